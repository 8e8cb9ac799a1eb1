//! Explicit lacunary counterexamples and their quasi-norm growth, computed on a virtual
//! replication model: every Littlewood-Paley piece is a sum of well separated copies of one
//! profile, so its distribution function is the profile's times the copy count.

use crate::besov_norms::{version_string, NormFamily, NormReport};
use crate::error::{invalid, Error, Result};
use crate::grid::{to_samples, Lattice, SampledFunction, Spectrum};
use crate::littlewood_paley::smooth_step;
use crate::lorentz::{Exponent, LorentzParams, WeightedValueSet};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Largest multiplicity the virtual model accepts.
pub const MULTIPLICITY_CAP: f64 = 4_503_599_627_370_496.0; // 2^52

/// Radial spectrum exp(−(|ξ|−c)²/(2σ²))·χ(|ξ|−c): a narrow Gaussian cut off smoothly at ±w.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralBump {
    pub center: f64,
    pub half_width: f64,
    pub sigma: f64,
    pub amplitude: f64,
}

impl SpectralBump {
    /// Gaussian width chosen so the spectrum is below 10⁻¹⁰ of its peak where the cutoff starts.
    fn new(center: f64, half_width: f64) -> Self {
        let plateau = 0.75 * half_width;
        let sigma = plateau / (2.0 * 1e10f64.ln()).sqrt();
        Self { center, half_width, sigma, amplitude: 1.0 }
    }

    fn cutoff(&self, u: f64) -> f64 {
        // 1 on |u| ≤ 3w/4, 0 for |u| ≥ w
        let v = (u.abs() - 0.75 * self.half_width) / (0.25 * self.half_width);
        1.0 - smooth_step(v)
    }

    pub fn hat(&self, xi: f64) -> f64 {
        let u = xi.abs() - self.center;
        if u.abs() >= self.half_width {
            return 0.0;
        }
        self.amplitude * (-0.5 * u * u / (self.sigma * self.sigma)).exp() * self.cutoff(u)
    }

    /// Support of the spectrum in |ξ|.
    pub fn support(&self) -> (f64, f64) {
        ((self.center - self.half_width).max(0.0), self.center + self.half_width)
    }
}

/// A real even profile η given by its spectrum, tabulated on a symmetric window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BumpProfile {
    pub spectrum: SpectralBump,
    pub dx: f64,
    /// η(x_j) at x_j = (j − (len−1)/2)·dx.
    pub samples: Vec<f64>,
    /// min_{|x|≤1} |η|.
    pub c0: f64,
    /// Largest |η| on the edge of the window.
    pub edge: f64,
}

impl BumpProfile {
    fn tabulate(spectrum: SpectralBump, box_len: f64, n: usize, half_window: f64) -> Result<Self> {
        let lat = Lattice::new(1, n, box_len)?;
        let coeffs: Vec<Complex64> =
            (0..n).map(|i| Complex64::new(spectrum.hat(lat.xi_abs(i)) / box_len, 0.0)).collect();
        let f = to_samples(&Spectrum { lattice: lat, coeffs }, "profile");
        let dx = lat.spacing();
        let half = (half_window / dx).floor() as i64;
        let mid = n as i64 / 2;
        let samples: Vec<f64> = (-half..=half).map(|j| f.values[(mid + j) as usize].re).collect();
        if let Some(v) = samples.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("profile sample {v}")));
        }
        let mut out = Self { spectrum, dx, samples, c0: 0.0, edge: 0.0 };
        out.c0 = out.min_abs_within(1.0);
        out.edge = out.samples[0].abs().max(out.samples[out.samples.len() - 1].abs());
        Ok(out)
    }

    /// η with spectrum in the annulus 15/16 ≤ |ξ| ≤ 17/16, normalized by η(0) = 1.
    pub fn annulus() -> Result<Self> {
        let mut spec = SpectralBump::new(1.0, 1.0 / 16.0);
        // η(0) = (1/π)∫_0^∞ η̂
        let integral = crate::quadrature::integrate(|xi| spec.hat(xi), 15.0 / 16.0, 17.0 / 16.0, 64, 16);
        spec.amplitude = PI / integral;
        Self::tabulate(spec, 4096.0, 65536, 1250.0)
    }

    /// η₀ with spectrum in |ξ| ≤ 1/32, normalized so that min_{|x|≤1}|η₀| = 1.
    pub fn low_pass() -> Result<Self> {
        let spec = SpectralBump::new(0.0, 1.0 / 32.0);
        let raw = Self::tabulate(spec, 8192.0, 8192, 2400.0)?;
        let mut spec = raw.spectrum;
        spec.amplitude /= raw.c0;
        Self::tabulate(spec, 8192.0, 8192, 2400.0)
    }

    pub fn half_window(&self) -> f64 {
        (self.samples.len() / 2) as f64 * self.dx
    }

    fn x(&self, j: usize) -> f64 {
        (j as f64 - (self.samples.len() / 2) as f64) * self.dx
    }

    fn min_abs_within(&self, r: f64) -> f64 {
        (0..self.samples.len())
            .filter(|&j| self.x(j).abs() <= r)
            .map(|j| self.samples[j].abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest |η(y)| over |y| ≥ r (the window edge value beyond the window).
    pub fn envelope(&self, r: f64) -> f64 {
        let m = (0..self.samples.len())
            .filter(|&j| self.x(j).abs() >= r)
            .map(|j| self.samples[j].abs())
            .fold(0.0, f64::max);
        if r > self.half_window() {
            self.edge
        } else {
            m
        }
    }

    /// η(x) = (1/π)∫_0^∞ η̂(ξ) cos(xξ) dξ by direct quadrature.
    pub fn eval(&self, x: f64) -> f64 {
        let (a, b) = self.spectrum.support();
        crate::quadrature::integrate(|xi| self.spectrum.hat(xi) * (x * xi).cos(), a, b, 64, 16) / PI
    }

    /// (|η(x_j)|, dx) over |x| ≤ half_window, every `stride`-th sample.
    pub fn pushforward(&self, half_window: f64, stride: usize) -> Vec<(f64, f64)> {
        let stride = stride.max(1);
        let mid = self.samples.len() / 2;
        let half = ((half_window / self.dx).floor() as usize).min(mid);
        let mut out = Vec::new();
        let mut j = mid - (half / stride) * stride;
        while j <= mid + half {
            out.push((self.samples[j].abs(), self.dx * stride as f64));
            j += stride;
        }
        out
    }
}

/// Regime of the multiplicity construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// γ ≥ −1, bands k ∈ (N, 2N].
    Upper,
    /// γ < −1, bands k ∈ (−2N, −N].
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleSpec {
    pub gamma: f64,
    pub s: f64,
    pub p: f64,
    pub n: u32,
    /// Centers of copies in band k are S·2^{−k}/σ apart.
    pub separation: f64,
}

impl CounterexampleSpec {
    pub fn new(gamma: f64, s: f64, p: f64, n: u32) -> Result<Self> {
        if n < 1 {
            return invalid("N must be at least 1");
        }
        if !(p > 1.0 && p.is_finite()) {
            return invalid(format!("p must lie in (1, ∞), got {p}"));
        }
        Ok(Self { gamma, s, p, n, separation: 16.0 })
    }

    pub fn with_separation(mut self, s: f64) -> Result<Self> {
        if !(s >= 2.0) {
            return invalid(format!("separation multiplier must be at least 2, got {s}"));
        }
        self.separation = s;
        Ok(self)
    }

    pub fn regime(&self) -> Regime {
        if self.gamma >= -1.0 {
            Regime::Upper
        } else {
            Regime::Lower
        }
    }

    pub fn band_range(&self) -> std::ops::RangeInclusive<i32> {
        let n = self.n as i32;
        match self.regime() {
            Regime::Upper => n + 1..=2 * n,
            Regime::Lower => -2 * n + 1..=-n,
        }
    }

    /// 𝔑_γ(k) = ⌊2^{k(1+γ)}⌋.
    pub fn multiplicity(&self, k: i32) -> Result<f64> {
        let m = 2f64.powf(k as f64 * (1.0 + self.gamma)).floor();
        if m > MULTIPLICITY_CAP {
            return invalid(format!(
                "multiplicity 2^{:.1} at k = {k} exceeds 2^52; reduce N or γ",
                k as f64 * (1.0 + self.gamma)
            ));
        }
        if m < 1.0 {
            return invalid(format!("multiplicity vanishes at k = {k}"));
        }
        Ok(m)
    }
}

/// One Littlewood-Paley piece: 𝔑 copies of coefficient·η(2^{k}·) (or of η at unit scale).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirtualBand {
    pub k: i32,
    pub coefficient: f64,
    /// Lebesgue measure scale of one copy (2^{−k} for dilated copies).
    pub mass_scale: f64,
    pub multiplicity: f64,
}

/// Symbolic description {k ↦ L_kF}.
#[derive(Debug, Clone, Serialize)]
pub struct BandDescription {
    pub bands: Vec<VirtualBand>,
    /// All bands share one location and scale, so band values combine pointwise.
    pub colocated: bool,
    #[serde(skip)]
    pub profile: Arc<BumpProfile>,
    /// Copy separation in profile units; infinite when colocated.
    pub separation: f64,
    pub label: String,
}

/// F_{γ,N} = Σ_k 2^{−ks} 2^{−kγ/p} Σ_i η(2^k(· − n_{i,k})).
pub fn build_f(spec: &CounterexampleSpec, profile: Arc<BumpProfile>) -> Result<BandDescription> {
    let mut bands = Vec::new();
    for k in spec.band_range() {
        let kf = k as f64;
        bands.push(VirtualBand {
            k,
            coefficient: 2f64.powf(-kf * spec.s) * 2f64.powf(-kf * spec.gamma / spec.p),
            mass_scale: 2f64.powi(-k),
            multiplicity: spec.multiplicity(k)?,
        });
    }
    Ok(BandDescription {
        bands,
        colocated: false,
        separation: spec.separation / profile.spectrum.sigma,
        profile,
        label: format!("F(gamma={},N={})", spec.gamma, spec.n),
    })
}

/// G = 2^{3N(1/p−s)} F(2^{3N}·): every band moves up by 3N.
pub fn g_rescale(desc: &BandDescription, n: u32, s: f64, p: f64) -> BandDescription {
    let shift = 3 * n as i32;
    let amp = 2f64.powf(shift as f64 * (1.0 / p - s));
    let mut out = desc.clone();
    for b in &mut out.bands {
        b.k += shift;
        b.coefficient *= amp;
        b.mass_scale *= 2f64.powi(-shift);
    }
    out.label = format!("G[{}]", desc.label);
    out
}

/// The two logarithmic witnesses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogVariant {
    /// f_k = η₀ e^{i2^k x}·log k / k^{1/p}.
    Divergent,
    /// g_k = η₀ e^{i2^k x} / (k^{1/p} (log k)²).
    Convergent,
}

/// Σ_{k=3}^{K} 2^{−ks} f_k with co-located bands.
pub fn build_log_example(s: f64, p: f64, variant: LogVariant, k_max: i32, profile: Arc<BumpProfile>) -> Result<BandDescription> {
    if !(p > 1.0 && p.is_finite()) {
        return invalid(format!("p must lie in (1, ∞), got {p}"));
    }
    if k_max < 3 {
        return invalid("the truncation must include k = 3");
    }
    let bands = (3..=k_max)
        .map(|k| {
            let kf = k as f64;
            let c = match variant {
                LogVariant::Divergent => kf.ln() / kf.powf(1.0 / p),
                LogVariant::Convergent => 1.0 / (kf.powf(1.0 / p) * kf.ln().powi(2)),
            };
            VirtualBand { k, coefficient: 2f64.powf(-kf * s) * c, mass_scale: 1.0, multiplicity: 1.0 }
        })
        .collect();
    Ok(BandDescription {
        bands,
        colocated: true,
        profile,
        separation: f64::INFINITY,
        label: format!("{variant:?}(K={k_max})"),
    })
}

/// Fourier-side family evaluated on the virtual model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum VirtualFamily {
    /// 𝓑^s_p(β, r).
    ScriptB { beta: f64 },
    /// Ḃ^s_q[L^{p,r}].
    Besov { q: Exponent },
    /// Ḟ^s_q[L^{p,r}].
    TriebelLizorkin { q: Exponent },
}

impl VirtualFamily {
    fn tag(&self) -> NormFamily {
        match self {
            VirtualFamily::ScriptB { .. } => NormFamily::ScriptB,
            VirtualFamily::Besov { .. } => NormFamily::BesovLorentz,
            VirtualFamily::TriebelLizorkin { .. } => NormFamily::TriebelLizorkinLorentz,
        }
    }
}

fn lq(values: impl Iterator<Item = f64>, q: Exponent) -> f64 {
    if q.is_infinite() {
        values.fold(0.0, f64::max)
    } else {
        let q = q.value();
        values.map(|v| v.powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

fn evaluate(desc: &BandDescription, family: VirtualFamily, s: f64, params: &LorentzParams, atoms: &[(f64, f64)]) -> f64 {
    let bands = &desc.bands;
    match family {
        VirtualFamily::ScriptB { beta } => {
            let mut pairs = Vec::with_capacity(atoms.len() * bands.len());
            for b in bands {
                let kf = b.k as f64;
                let amp = b.coefficient * 2f64.powf(kf * (s + beta / params.p));
                let mass = b.mass_scale * b.multiplicity * 2f64.powf(-kf * beta);
                pairs.extend(atoms.iter().map(|(a, m)| (a * amp, m * mass)));
            }
            WeightedValueSet::from_pairs_unchecked(pairs).quasi_norm(params)
        }
        VirtualFamily::Besov { q } => lq(
            bands.iter().map(|b| {
                let amp = b.coefficient * 2f64.powf(b.k as f64 * s);
                let mass = b.mass_scale * b.multiplicity;
                WeightedValueSet::from_pairs_unchecked(atoms.iter().map(|(a, m)| (a * amp, m * mass)).collect())
                    .quasi_norm(params)
            }),
            q,
        ),
        VirtualFamily::TriebelLizorkin { q } => {
            if desc.colocated {
                let weight = lq(bands.iter().map(|b| b.coefficient * 2f64.powf(b.k as f64 * s)), q);
                let mass = bands.first().map(|b| b.mass_scale).unwrap_or(1.0);
                WeightedValueSet::from_pairs_unchecked(atoms.iter().map(|(a, m)| (a * weight, m * mass)).collect())
                    .quasi_norm(params)
            } else {
                // disjoint supports: one band is active at each point
                let mut pairs = Vec::new();
                for b in bands {
                    let amp = b.coefficient * 2f64.powf(b.k as f64 * s);
                    let mass = b.mass_scale * b.multiplicity;
                    pairs.extend(atoms.iter().map(|(a, m)| (a * amp, m * mass)));
                }
                WeightedValueSet::from_pairs_unchecked(pairs).quasi_norm(params)
            }
        }
    }
}

/// Bound on the neighbours' contribution inside one copy's cell of half-width D/2.
pub fn tail_level(desc: &BandDescription) -> f64 {
    if desc.colocated || !desc.separation.is_finite() {
        return 0.0;
    }
    let d = desc.separation;
    let mut tau = 2.0 * desc.profile.envelope(d);
    for j in 1.. {
        let term = 2.0 * desc.profile.envelope((j as f64 - 0.5) * d);
        tau += term;
        if term < 1e-300 || j > 10_000 || (j as f64 - 0.5) * d > desc.profile.half_window() {
            // beyond the window every further term is bounded by the edge value
            if (j as f64 - 0.5) * d > desc.profile.half_window() {
                tau += 2.0 * desc.profile.edge * 4.0;
            }
            break;
        }
    }
    tau
}

/// A virtual norm with its error bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VirtualNorm {
    pub value: f64,
    pub tail_error: f64,
    pub report: NormReport,
}

/// Norm of the described function with a bound from neighbour tails (|η| ± τ on each copy's
/// cell) and from the profile sampling (half-resolution comparison).
pub fn virtual_norm(desc: &BandDescription, family: VirtualFamily, s: f64, p: f64, r: Exponent) -> Result<VirtualNorm> {
    let params = LorentzParams::new(p, r)?;
    let window = if desc.colocated {
        desc.profile.half_window()
    } else {
        (0.5 * desc.separation).min(desc.profile.half_window())
    };
    let atoms = desc.profile.pushforward(window, 1);
    let value = evaluate(desc, family, s, &params, &atoms);
    let coarse = evaluate(desc, family, s, &params, &desc.profile.pushforward(window, 2));
    let mut err = (coarse - value).abs();
    let tau = tail_level(desc);
    if tau > 0.0 {
        let up: Vec<(f64, f64)> = atoms.iter().map(|(a, m)| (a + tau, *m)).collect();
        let lo: Vec<(f64, f64)> = atoms.iter().map(|(a, m)| ((a - tau).max(0.0), *m)).collect();
        let hi = evaluate(desc, family, s, &params, &up);
        let low = evaluate(desc, family, s, &params, &lo);
        err += (hi - value).max(value - low);
    }
    let (kmin, kmax) = (
        desc.bands.iter().map(|b| b.k).min().unwrap_or(0),
        desc.bands.iter().map(|b| b.k).max().unwrap_or(0),
    );
    let gamma = match family {
        VirtualFamily::ScriptB { beta } => beta,
        _ => 0.0,
    };
    let q = match family {
        VirtualFamily::ScriptB { .. } => r,
        VirtualFamily::Besov { q } | VirtualFamily::TriebelLizorkin { q } => q,
    };
    let report = NormReport {
        value,
        family: family.tag(),
        s,
        p,
        r,
        q,
        gamma,
        n: atoms.len(),
        box_len: 2.0 * window,
        kmin,
        kmax,
        seed: 0,
        dim: 1,
        homogeneous: true,
        label: desc.label.clone(),
        quadrature: serde_json::json!({
            "model": "virtual",
            "profile_dx": desc.profile.dx,
            "separation": desc.separation,
            "tail_level": tau,
            "tail_error": err,
        }),
        version: version_string(),
    };
    Ok(VirtualNorm { value, tail_error: err, report })
}

/// Samples the described function on a lattice by summing the copies' spectra.
///
/// Copies of band k sit at spacing S·2^{−k}/σ; bands are laid out in consecutive blocks.
pub fn grid_synthesize(desc: &BandDescription, lattice: Lattice) -> Result<SampledFunction> {
    if desc.colocated {
        return invalid("gridded synthesis is provided for separated copies only");
    }
    let spec = desc.profile.spectrum;
    let sep = desc.separation;
    let k_min = desc.bands.iter().map(|b| b.k).min().unwrap_or(0);
    let gap = 2.0 * sep * 2f64.powi(-k_min);
    let mut centers: Vec<Vec<f64>> = Vec::new();
    let mut cursor = 0.0;
    for b in &desc.bands {
        let step = sep * b.mass_scale;
        let count = b.multiplicity as usize;
        centers.push((0..count).map(|i| cursor + i as f64 * step).collect());
        cursor += (count.max(1) - 1) as f64 * step + gap;
    }
    let extent = cursor - gap;
    if extent + gap > lattice.box_len {
        return invalid(format!("copies need a box of length {:.0}, have {}", extent + gap, lattice.box_len));
    }
    let shift = -0.5 * extent;
    let len = lattice.len();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); len];
    for (i, c) in coeffs.iter_mut().enumerate() {
        let xi = lattice.xi_first(i);
        for (b, xs) in desc.bands.iter().zip(&centers) {
            let scale = 1.0 / b.mass_scale;
            let h = spec.hat(xi / scale);
            if h == 0.0 {
                continue;
            }
            let amp = b.coefficient * h * b.mass_scale / lattice.box_len;
            let phase_sum: Complex64 = xs.iter().map(|x0| Complex64::from_polar(1.0, -xi * (x0 + shift))).sum();
            *c += phase_sum * amp;
        }
    }
    Ok(to_samples(&Spectrum { lattice, coeffs }, desc.label.clone()))
}

/// Norm values over N with the fitted log₂-slope.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlopeRow {
    pub n: u32,
    pub family: String,
    pub value: f64,
    pub fitted_slope: f64,
    pub target_slope: f64,
    pub tail_error: f64,
}

/// Sweeps N for one family and fits log₂(norm) against log₂N.
#[allow(clippy::too_many_arguments)]
pub fn slope_sweep(
    gamma: f64,
    s: f64,
    p: f64,
    r: Exponent,
    ns: &[u32],
    separation: f64,
    family: VirtualFamily,
    target: f64,
    profile: Arc<BumpProfile>,
) -> Result<(Vec<SlopeRow>, f64)> {
    let mut vals = Vec::new();
    let mut rows = Vec::new();
    for &n in ns {
        let spec = CounterexampleSpec::new(gamma, s, p, n)?.with_separation(separation)?;
        let desc = build_f(&spec, profile.clone())?;
        let v = virtual_norm(&desc, family, s, p, r)?;
        vals.push((n as f64, v.value));
        rows.push((n, v));
    }
    let (slope, _) = crate::harness::slope_fit(&vals)?;
    let name = match family {
        VirtualFamily::ScriptB { beta } => format!("script_b(beta={beta})"),
        VirtualFamily::Besov { q } => format!("besov(q={q})"),
        VirtualFamily::TriebelLizorkin { q } => format!("triebel_lizorkin(q={q})"),
    };
    let out = rows
        .into_iter()
        .map(|(n, v)| SlopeRow {
            n,
            family: name.clone(),
            value: v.value,
            fitted_slope: slope,
            target_slope: target,
            tail_error: v.tail_error,
        })
        .collect();
    Ok((out, slope))
}

pub fn write_slope_csv(rows: &[SlopeRow], path: &std::path::Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["N", "family", "value", "fitted_slope", "target_slope", "tail_error"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.family.clone(),
            r.value.to_string(),
            r.fitted_slope.to_string(),
            r.target_slope.to_string(),
            r.tail_error.to_string(),
        ])?;
    }
    w.flush().map_err(Error::Io)
}
