//! Fourier-side norms: 𝓑^s_p(γ,r), Besov-Lorentz and Triebel-Lizorkin-Lorentz.

use crate::error::{invalid, Result};
use crate::grid::SampledFunction;
use crate::littlewood_paley::{BandMagnitudes, LpFamily, Projection};
use crate::lorentz::{Exponent, LorentzParams, WeightedValueSet};
use serde::{Deserialize, Serialize};

/// Smoothness, integrability and weight parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesovParams {
    pub s: f64,
    pub p: f64,
    pub r: Exponent,
    pub q: Exponent,
    pub gamma: f64,
    pub homogeneous: bool,
}

impl BesovParams {
    pub fn new(s: f64, p: f64, r: impl Into<Exponent>, gamma: f64) -> Result<Self> {
        let r = r.into();
        LorentzParams::new(p, r)?;
        if !s.is_finite() || !gamma.is_finite() {
            return invalid("s and gamma must be finite");
        }
        Ok(Self { s, p, r, q: r, gamma, homogeneous: true })
    }

    pub fn with_q(mut self, q: impl Into<Exponent>) -> Result<Self> {
        let q = q.into();
        Exponent::new(q.value())?;
        self.q = q;
        Ok(self)
    }

    pub fn inhomogeneous(mut self) -> Self {
        self.homogeneous = false;
        self
    }

    pub fn lorentz(&self) -> LorentzParams {
        LorentzParams { p: self.p, r: self.r }
    }

    /// The exponent b = s + γ/p of P^b.
    pub fn b(&self) -> f64 {
        self.s + self.gamma / self.p
    }
}

/// Which norm a report carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormFamily {
    ScriptB,
    BesovLorentz,
    TriebelLizorkinLorentz,
    Difference,
    BsyDiagonal,
    WeakHalfSpace,
}

impl NormFamily {
    pub fn tag(&self) -> &'static str {
        match self {
            NormFamily::ScriptB => "script_b",
            NormFamily::BesovLorentz => "besov_lorentz",
            NormFamily::TriebelLizorkinLorentz => "triebel_lizorkin_lorentz",
            NormFamily::Difference => "difference",
            NormFamily::BsyDiagonal => "bsy_diagonal",
            NormFamily::WeakHalfSpace => "weak_half_space",
        }
    }
}

/// A computed quasi-norm with its parameters and discretization.
///
/// For Fourier-side norms `n`, `L`, `kmin`, `kmax` describe the lattice and band range; for
/// difference norms they describe the x-nodes per shift, the x-window and the h-shell range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub value: f64,
    pub family: NormFamily,
    pub s: f64,
    pub p: f64,
    pub r: Exponent,
    pub q: Exponent,
    pub gamma: f64,
    pub n: usize,
    #[serde(rename = "L")]
    pub box_len: f64,
    pub kmin: i32,
    pub kmax: i32,
    pub seed: u64,
    pub dim: usize,
    pub homogeneous: bool,
    pub label: String,
    pub quadrature: serde_json::Value,
    pub version: String,
}

impl NormReport {
    pub fn fourier(
        value: f64,
        family: NormFamily,
        f: &SampledFunction,
        params: &BesovParams,
        fam: &LpFamily,
    ) -> Self {
        Self {
            value,
            family,
            s: params.s,
            p: params.p,
            r: params.r,
            q: params.q,
            gamma: params.gamma,
            n: f.lattice.n,
            box_len: f.lattice.box_len,
            kmin: fam.k_min,
            kmax: fam.k_max,
            seed: 0,
            dim: f.lattice.dim,
            homogeneous: params.homogeneous,
            label: f.label.clone(),
            quadrature: serde_json::Value::Null,
            version: version_string(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Package version followed by the source revision when it was known at build time.
pub fn version_string() -> String {
    match option_env!("LORENTZ_BESOV_REVISION") {
        Some(rev) if !rev.is_empty() => format!("{}-{}", env!("CARGO_PKG_VERSION"), rev),
        _ => env!("CARGO_PKG_VERSION").to_string(),
    }
}

fn projection(params: &BesovParams) -> Projection {
    if params.homogeneous {
        Projection::Standard
    } else {
        Projection::Inhomogeneous
    }
}

fn lq_combine(values: impl Iterator<Item = f64>, q: Exponent) -> f64 {
    if q.is_infinite() {
        values.fold(0.0, f64::max)
    } else {
        let q = q.value();
        let v: Vec<f64> = values.collect();
        let top = v.iter().copied().fold(0.0, f64::max);
        if top == 0.0 {
            return 0.0;
        }
        top * v.iter().map(|x| (x / top).powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

/// ‖f‖_{𝓑^s_p(γ,r)} from precomputed band magnitudes.
pub fn script_b_from_bands(bands: &BandMagnitudes, params: &BesovParams) -> f64 {
    bands.pb_set(params.b(), params.gamma).quasi_norm(&params.lorentz())
}

/// ‖f‖_{Ḃ^s_q[L^{p,r}]} from precomputed band magnitudes.
pub fn besov_lorentz_from_bands(bands: &BandMagnitudes, params: &BesovParams) -> f64 {
    let lp = params.lorentz();
    let per_band = bands.bands.iter().enumerate().map(|(i, (k, _))| {
        bands.band_set(i, 2f64.powf(*k as f64 * params.s)).quasi_norm(&lp)
    });
    lq_combine(per_band.collect::<Vec<_>>().into_iter(), params.q)
}

/// ‖f‖_{Ḟ^s_q[L^{p,r}]} from precomputed band magnitudes.
pub fn tl_lorentz_from_bands(bands: &BandMagnitudes, params: &BesovParams) -> f64 {
    let npts = bands.bands.first().map(|b| b.1.len()).unwrap_or(0);
    let weights: Vec<f64> = bands.bands.iter().map(|(k, _)| 2f64.powf(*k as f64 * params.s)).collect();
    let pairs: Vec<(f64, f64)> = (0..npts)
        .map(|x| {
            let vals = bands.bands.iter().zip(&weights).map(|((_, m), w)| m[x] * w);
            (lq_combine(vals, params.q), bands.cell)
        })
        .collect();
    WeightedValueSet::from_pairs_unchecked(pairs).quasi_norm(&params.lorentz())
}

pub fn script_b_norm(f: &SampledFunction, params: &BesovParams, fam: &LpFamily) -> Result<NormReport> {
    let bands = BandMagnitudes::from_function(f, fam, projection(params))?;
    let v = script_b_from_bands(&bands, params);
    Ok(NormReport::fourier(v, NormFamily::ScriptB, f, params, fam))
}

pub fn besov_pq_norm(f: &SampledFunction, params: &BesovParams, fam: &LpFamily) -> Result<NormReport> {
    let bands = BandMagnitudes::from_function(f, fam, projection(params))?;
    let v = besov_lorentz_from_bands(&bands, params);
    Ok(NormReport::fourier(v, NormFamily::BesovLorentz, f, params, fam))
}

pub fn tl_lorentz_norm(f: &SampledFunction, params: &BesovParams, fam: &LpFamily) -> Result<NormReport> {
    let bands = BandMagnitudes::from_function(f, fam, projection(params))?;
    let v = tl_lorentz_from_bands(&bands, params);
    Ok(NormReport::fourier(v, NormFamily::TriebelLizorkinLorentz, f, params, fam))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{to_samples, to_spectrum, Lattice};
    use crate::littlewood_paley::build_phi;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn band_limited(lat: Lattice, annuli: &[(f64, f64)], seed: u64) -> SampledFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut spec = to_spectrum(&SampledFunction::zeros(lat, "z"));
        for (i, c) in spec.coeffs.iter_mut().enumerate() {
            let r = lat.xi_abs(i);
            if annuli.iter().any(|(lo, hi)| r >= *lo && r <= *hi) {
                *c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        to_samples(&spec, "bl")
    }

    fn setup() -> (Lattice, LpFamily) {
        (Lattice::new(1, 2048, 256.0).unwrap(), build_phi(-2, 3).unwrap())
    }

    #[test]
    fn gamma_independence_at_r_equals_p() {
        let (lat, fam) = setup();
        let f = band_limited(lat, &[(0.3, 9.0)], 11);
        let base = besov_pq_norm(&f, &BesovParams::new(0.5, 2.0, 2.0, 0.0).unwrap(), &fam).unwrap().value;
        for gamma in [-2.0, -1.0, 0.5, 1.0, 2.0] {
            let v = script_b_norm(&f, &BesovParams::new(0.5, 2.0, 2.0, gamma).unwrap(), &fam).unwrap().value;
            assert!((v - base).abs() < 1e-10 * base, "gamma {gamma}: {v} vs {base}");
        }
    }

    #[test]
    fn zero_function() {
        let (lat, fam) = setup();
        let z = SampledFunction::zeros(lat, "0");
        let p = BesovParams::new(0.5, 2.0, f64::INFINITY, 1.0).unwrap();
        assert_eq!(script_b_norm(&z, &p, &fam).unwrap().value, 0.0);
        assert_eq!(besov_pq_norm(&z, &p, &fam).unwrap().value, 0.0);
        assert_eq!(tl_lorentz_norm(&z, &p, &fam).unwrap().value, 0.0);
    }

    #[test]
    fn single_band_identities() {
        let (lat, fam) = setup();
        let f = band_limited(lat, &[(1.8, 2.2)], 4);
        for q in [1.0, 2.0, f64::INFINITY] {
            let params = BesovParams::new(0.7, 1.5, 3.0, 0.5).unwrap().with_q(q).unwrap();
            let sb = script_b_norm(&f, &params, &fam).unwrap().value;
            let bl = besov_pq_norm(&f, &params, &fam).unwrap().value;
            let tl = tl_lorentz_norm(&f, &params, &fam).unwrap().value;
            assert!((sb - bl).abs() < 1e-10 * bl);
            assert!((tl - bl).abs() < 1e-10 * bl);
        }
    }

    #[test]
    fn lq_nesting_and_two_band_bracket() {
        let (lat, fam) = setup();
        for seed in 0..5 {
            let f = band_limited(lat, &[(0.9, 1.1), (3.6, 4.4)], seed);
            let norm = |q: f64| {
                let params = BesovParams::new(0.3, 2.0, 2.0, 1.0).unwrap().with_q(q).unwrap();
                besov_pq_norm(&f, &params, &fam).unwrap().value
            };
            let (n1, n2, ninf) = (norm(1.0), norm(2.0), norm(f64::INFINITY));
            assert!(n1 >= n2 && n2 >= ninf);
            assert!(n1 / ninf <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn tl_equals_besov_when_q_p_r_agree() {
        let (lat, fam) = setup();
        let f = band_limited(lat, &[(0.3, 9.0)], 8);
        let params = BesovParams::new(0.5, 3.0, 3.0, 0.0).unwrap();
        let tl = tl_lorentz_norm(&f, &params, &fam).unwrap().value;
        let bl = besov_pq_norm(&f, &params, &fam).unwrap().value;
        assert!((tl - bl).abs() < 1e-10 * bl);
    }

    #[test]
    fn report_json_field_names() {
        let (lat, fam) = setup();
        let f = band_limited(lat, &[(0.9, 1.1)], 1);
        let params = BesovParams::new(0.5, 2.0, f64::INFINITY, 1.0).unwrap();
        let rep = script_b_norm(&f, &params, &fam).unwrap();
        let j: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
        for key in ["value", "family", "s", "p", "r", "q", "gamma", "n", "L", "kmin", "kmax", "seed"] {
            assert!(j.get(key).is_some(), "missing {key}");
        }
        assert_eq!(j["r"], "inf");
        assert_eq!(j["family"], "script_b");
    }

    #[test]
    fn r_monotonicity_of_script_b() {
        let (lat, fam) = setup();
        let f = band_limited(lat, &[(0.3, 9.0)], 21);
        let mut prev = f64::INFINITY;
        for r in [1.0, 1.5, 2.0, 4.0, f64::INFINITY] {
            let v = script_b_norm(&f, &BesovParams::new(0.5, 2.0, r, 1.0).unwrap(), &fam).unwrap().value;
            assert!(v <= prev * (1.0 + 1e-12));
            prev = v;
        }
    }
}
