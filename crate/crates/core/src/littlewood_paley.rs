//! Dyadic Littlewood-Paley multipliers and the μ_γ pushforward of P^b f.

use crate::error::{invalid, Error, Result};
use crate::grid::{to_samples, to_spectrum, Lattice, SampledFunction, Spectrum};
use crate::lorentz::WeightedValueSet;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

fn e_step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        (-1.0 / u).exp()
    }
}

/// Smooth step: 0 for u ≤ 0, 1 for u ≥ 1, C^∞ in between.
pub fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = e_step(u);
        a / (a + e_step(1.0 - u))
    }
}

/// Cutoff equal to 1 on [0, 3/2] and vanishing for t ≥ 7/4.
pub fn psi0(t: f64) -> f64 {
    smooth_step(4.0 * (1.75 - t))
}

/// Cutoff equal to 1 on [0, 7/4] and vanishing for t ≥ 2.
fn psi1(t: f64) -> f64 {
    smooth_step(4.0 * (2.0 - t))
}

/// Radial profile φ(|ξ|) = ψ₀(|ξ|) − ψ₀(2|ξ|).
pub fn phi(r: f64) -> f64 {
    psi0(r) - psi0(2.0 * r)
}

/// Companion profile, equal to 1 on [2/3, 7/4] ⊃ supp φ and supported in (7/12, 2).
pub fn phi_tilde(r: f64) -> f64 {
    psi1(r) - psi1(3.0 * r)
}

/// Which family of frequency localizations to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Projection {
    /// L_k with multiplier φ(2^{-k}ξ).
    Standard,
    /// L̃_k with multiplier φ̃(2^{-k}ξ).
    Tilde,
    /// Ł_k, k ≥ 0: Ł_0 = ψ₀(|ξ|), Ł_k = L_k below the top band, and the top band collects
    /// all remaining high frequencies so that Σ_k Ł_k = Id on the grid.
    Inhomogeneous,
}

/// Dyadic multiplier family with a finite band range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpFamily {
    pub k_min: i32,
    pub k_max: i32,
}

/// Builds the standard family on the band range [k_min, k_max].
pub fn build_phi(k_min: i32, k_max: i32) -> Result<LpFamily> {
    if k_min > k_max {
        return invalid(format!("empty band range [{k_min}, {k_max}]"));
    }
    Ok(LpFamily { k_min, k_max })
}

impl LpFamily {
    pub fn bands(&self) -> std::ops::RangeInclusive<i32> {
        self.k_min..=self.k_max
    }

    pub fn num_bands(&self) -> usize {
        (self.k_max - self.k_min + 1) as usize
    }

    /// Frequencies |ξ| on which Σ_k φ(2^{-k}ξ) = 1 over the band range.
    pub fn covered_interval(&self) -> (f64, f64) {
        (2f64.powi(self.k_min) * 0.875, 2f64.powi(self.k_max) * 1.5)
    }

    /// Value of the band-k multiplier at radius |ξ|.
    pub fn multiplier(&self, kind: Projection, k: i32, r: f64) -> f64 {
        let t = r * 2f64.powi(-k);
        match kind {
            Projection::Standard => phi(t),
            Projection::Tilde => phi_tilde(t),
            Projection::Inhomogeneous => {
                if k == 0 {
                    psi0(r)
                } else if k == self.k_max {
                    1.0 - psi0(2.0 * t)
                } else {
                    phi(t)
                }
            }
        }
    }

    /// Samples φ on `points` equispaced radii in [0, 2].
    pub fn table(&self, points: usize) -> Vec<(f64, f64)> {
        (0..points)
            .map(|i| {
                let r = 2.0 * i as f64 / (points.max(2) - 1) as f64;
                (r, phi(r))
            })
            .collect()
    }

    fn check_band(&self, lattice: &Lattice, kind: Projection, k: i32) -> Result<()> {
        let outer = match kind {
            Projection::Standard => 1.75,
            Projection::Tilde => 2.0,
            Projection::Inhomogeneous => {
                if k == self.k_max || k == 0 {
                    return Ok(());
                }
                1.75
            }
        };
        let edge = 2f64.powi(k) * outer;
        if edge >= lattice.nyquist() {
            return Err(Error::BandOutOfRange {
                k,
                detail: format!("annulus edge {edge:.4e} >= Nyquist {:.4e}", lattice.nyquist()),
            });
        }
        Ok(())
    }

    fn check_kind(&self, kind: Projection) -> Result<()> {
        if kind == Projection::Inhomogeneous && self.k_min != 0 {
            return invalid("inhomogeneous bands must start at k = 0");
        }
        Ok(())
    }
}

fn project_spectrum(spec: &Spectrum, fam: &LpFamily, kind: Projection, k: i32) -> Spectrum {
    spec.apply_radial(|r| fam.multiplier(kind, k, r))
}

/// L_k f (or L̃_k f, Ł_k f) for a single band.
pub fn lp_project(f: &SampledFunction, fam: &LpFamily, kind: Projection, k: i32) -> Result<SampledFunction> {
    fam.check_kind(kind)?;
    fam.check_band(&f.lattice, kind, k)?;
    let spec = to_spectrum(f);
    Ok(to_samples(&project_spectrum(&spec, fam, kind, k), format!("{}[{k}]", f.label)))
}

/// All bands of the family, computed from one forward transform.
#[derive(Debug, Clone)]
pub struct BandDecomposition {
    pub family: LpFamily,
    pub kind: Projection,
    pub lattice: Lattice,
    pub bands: Vec<(i32, SampledFunction)>,
}

pub fn decompose(f: &SampledFunction, fam: &LpFamily, kind: Projection) -> Result<BandDecomposition> {
    fam.check_kind(kind)?;
    for k in fam.bands() {
        fam.check_band(&f.lattice, kind, k)?;
    }
    let spec = to_spectrum(f);
    let bands = fam
        .bands()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|k| (k, to_samples(&project_spectrum(&spec, fam, kind, k), format!("{}[{k}]", f.label))))
        .collect();
    Ok(BandDecomposition { family: *fam, kind, lattice: f.lattice, bands })
}

impl BandDecomposition {
    /// Σ_k of the stored bands.
    pub fn sum(&self) -> SampledFunction {
        let mut out = SampledFunction::zeros(self.lattice, "sum");
        for (_, b) in &self.bands {
            for (o, v) in out.values.iter_mut().zip(&b.values) {
                *o += v;
            }
        }
        out
    }

    pub fn magnitudes(&self) -> BandMagnitudes {
        BandMagnitudes {
            family: self.family,
            cell: self.lattice.cell_volume(),
            dim: self.lattice.dim,
            bands: self
                .bands
                .iter()
                .map(|(k, b)| (*k, b.values.iter().map(|v| v.norm()).collect()))
                .collect(),
        }
    }
}

/// |L_k f(x)| for every band and lattice point; the reusable input of all Fourier-side norms.
#[derive(Debug, Clone)]
pub struct BandMagnitudes {
    pub family: LpFamily,
    pub cell: f64,
    pub dim: usize,
    pub bands: Vec<(i32, Vec<f64>)>,
}

impl BandMagnitudes {
    pub fn from_function(f: &SampledFunction, fam: &LpFamily, kind: Projection) -> Result<Self> {
        Ok(decompose(f, fam, kind)?.magnitudes())
    }

    /// Pushforward of (x,k) ↦ |2^{kb} L_k f(x)| under μ_γ.
    pub fn pb_set(&self, b: f64, gamma: f64) -> WeightedValueSet {
        let mut pairs = Vec::with_capacity(self.bands.iter().map(|(_, v)| v.len()).sum());
        for (k, mags) in &self.bands {
            let amp = 2f64.powf(*k as f64 * b);
            let mass = 2f64.powf(-(*k as f64) * gamma) * self.cell;
            pairs.extend(mags.iter().filter(|a| **a > 0.0).map(|a| (a * amp, mass)));
        }
        WeightedValueSet::from_pairs_unchecked(pairs)
    }

    /// Lebesgue pushforward of one band, scaled by `amp`.
    pub fn band_set(&self, index: usize, amp: f64) -> WeightedValueSet {
        let cell = self.cell;
        WeightedValueSet::from_pairs_unchecked(
            self.bands[index].1.iter().filter(|a| **a > 0.0).map(|a| (a * amp, cell)).collect(),
        )
    }
}

/// μ_γ pushforward of P^b f together with the (lattice index, band) of each atom.
#[derive(Debug, Clone)]
pub struct MuGammaSamples {
    pub set: WeightedValueSet,
    pub provenance: Vec<(usize, i32)>,
    pub atoms: Vec<(f64, f64)>,
    pub b: f64,
    pub gamma: f64,
}

pub fn pb_samples(f: &SampledFunction, fam: &LpFamily, b: f64, gamma: f64) -> Result<MuGammaSamples> {
    let dec = decompose(f, fam, Projection::Standard)?;
    let cell = f.lattice.cell_volume();
    let mut atoms = Vec::new();
    let mut provenance = Vec::new();
    for (k, band) in &dec.bands {
        let amp = 2f64.powf(*k as f64 * b);
        let mass = 2f64.powf(-(*k as f64) * gamma) * cell;
        for (i, v) in band.values.iter().enumerate() {
            let a = v.norm() * amp;
            if a > 0.0 {
                atoms.push((a, mass));
                provenance.push((i, *k));
            }
        }
    }
    let set = WeightedValueSet::from_pairs_unchecked(atoms.clone());
    Ok(MuGammaSamples { set, provenance, atoms, b, gamma })
}

/// Sum of complex band data Σ_k c_k·(band function), used to assemble test functions.
pub fn combine(lattice: Lattice, parts: &[(Complex64, &SampledFunction)]) -> SampledFunction {
    let mut out = SampledFunction::zeros(lattice, "combination");
    for (c, g) in parts {
        for (o, v) in out.values.iter_mut().zip(&g.values) {
            *o += c * v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Lattice;
    use crate::lorentz::LorentzParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn profile_values() {
        assert_eq!(phi(1.0), 1.0);
        assert_eq!(phi(2.0), 0.0);
        assert_eq!(phi(0.7), 0.0);
        assert_eq!(phi(0.875), 1.0);
        assert_eq!(phi(1.125), 1.0);
        let s: f64 = (-10..=10).map(|k| phi(2f64.powi(-k) * 1.3)).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tilde_profile_plateau_and_support() {
        for i in 0..=1000 {
            let r = 2.5 * i as f64 / 1000.0;
            if phi(r) != 0.0 {
                assert_eq!(phi_tilde(r), 1.0, "r = {r}");
            }
            if r <= 0.5 || r >= 2.0 {
                assert_eq!(phi_tilde(r), 0.0);
            }
            if r <= 0.75 || r >= 1.75 {
                assert_eq!(phi(r), 0.0);
            }
        }
    }

    #[test]
    fn partition_of_unity_on_lattice() {
        let fam = build_phi(-6, 4).unwrap();
        let lat = Lattice::new(1, 4096, 400.0).unwrap();
        let (lo, hi) = fam.covered_interval();
        let mut worst: f64 = 0.0;
        for slot in 0..lat.n {
            let r = lat.xi_abs(slot);
            if r >= lo && r <= hi {
                let s: f64 = fam.bands().map(|k| fam.multiplier(Projection::Standard, k, r)).sum();
                worst = worst.max((s - 1.0).abs());
            }
        }
        assert!(worst < 1e-12, "{worst}");
    }

    fn band_limited(lat: Lattice, lo: f64, hi: f64, seed: u64) -> SampledFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut spec = to_spectrum(&SampledFunction::zeros(lat, "z"));
        for (i, c) in spec.coeffs.iter_mut().enumerate() {
            let r = lat.xi_abs(i);
            if r >= lo && r <= hi {
                *c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        to_samples(&spec, "bl")
    }

    #[test]
    fn single_annulus_is_reproduced_by_one_band() {
        let lat = Lattice::new(1, 2048, 256.0).unwrap();
        let f = band_limited(lat, 0.9, 1.1, 1);
        let fam = build_phi(-2, 2).unwrap();
        let dec = decompose(&f, &fam, Projection::Standard).unwrap();
        for (k, b) in &dec.bands {
            let err = b.sub(&f).unwrap().l2_norm() / f.l2_norm();
            if *k == 0 {
                assert!(err < 1e-12);
            } else {
                assert!(b.l2_norm() < 1e-12 * f.l2_norm());
            }
        }
    }

    #[test]
    fn tilde_reproduces_band() {
        let lat = Lattice::new(1, 1024, 100.0).unwrap();
        let f = band_limited(lat, 0.2, 6.0, 2);
        let fam = build_phi(-2, 2).unwrap();
        for k in fam.bands() {
            let lk = lp_project(&f, &fam, Projection::Standard, k).unwrap();
            let tl = lp_project(&lk, &fam, Projection::Tilde, k).unwrap();
            assert!(tl.sub(&lk).unwrap().sup_norm() <= 1e-12 * lk.sup_norm().max(1e-300));
        }
    }

    #[test]
    fn constant_lives_in_the_lowest_inhomogeneous_band() {
        let lat = Lattice::new(1, 256, 20.0).unwrap();
        let f = SampledFunction::from_fn(lat, "one", |_| Complex64::new(2.0, 0.0)).unwrap();
        let fam = build_phi(0, 3).unwrap();
        let dec = decompose(&f, &fam, Projection::Inhomogeneous).unwrap();
        for (k, b) in &dec.bands {
            let err = if *k == 0 { b.sub(&f).unwrap().sup_norm() } else { b.sup_norm() };
            assert!(err < 1e-13, "band {k}: {err}");
        }
        // the inhomogeneous bands always sum to the identity
        let g = band_limited(lat, 0.0, 30.0, 9);
        let dec = decompose(&g, &fam, Projection::Inhomogeneous).unwrap();
        assert!(dec.sum().sub(&g).unwrap().sup_norm() < 1e-12 * g.sup_norm());
    }

    #[test]
    fn nyquist_guard() {
        let lat = Lattice::new(1, 64, 64.0).unwrap();
        let f = SampledFunction::zeros(lat, "z");
        let fam = build_phi(-1, 1).unwrap();
        assert!(lp_project(&f, &fam, Projection::Standard, 0).is_ok());
        assert!(matches!(
            lp_project(&f, &fam, Projection::Standard, 1),
            Err(Error::BandOutOfRange { .. })
        ));
    }

    #[test]
    fn reproduction_and_band_orthogonality() {
        let lat = Lattice::new(1, 4096, 512.0).unwrap();
        let fam = build_phi(-3, 3).unwrap();
        let (lo, hi) = fam.covered_interval();
        let f = band_limited(lat, lo, hi, 5);
        let dec = decompose(&f, &fam, Projection::Standard).unwrap();
        assert!(dec.sum().sub(&f).unwrap().l2_norm() < 1e-10 * f.l2_norm());
        for (k, bk) in &dec.bands {
            for j in fam.bands() {
                if (k - j).abs() >= 2 {
                    let g = lp_project(bk, &fam, Projection::Standard, j).unwrap();
                    assert!(g.l2_norm() < 1e-13 * f.l2_norm());
                }
            }
        }
    }

    #[test]
    fn pb_samples_examples() {
        let lat = Lattice::new(1, 1024, 128.0).unwrap();
        let fam = build_phi(-2, 2).unwrap();
        let zero = SampledFunction::zeros(lat, "0");
        assert!(pb_samples(&zero, &fam, 0.5, 1.0).unwrap().set.is_empty());

        // single band k = 1: the value is 2^{ks}[L_k f]_{p,r} for every γ
        let f = band_limited(lat, 2.0 * 0.9, 2.0 * 1.1, 3);
        let (s, p) = (0.4, 2.0);
        let params = LorentzParams::new(p, 3.0).unwrap();
        let band = lp_project(&f, &fam, Projection::Standard, 1).unwrap();
        let direct = WeightedValueSet::from_pairs_unchecked(
            band.values.iter().map(|v| (v.norm(), lat.cell_volume())).collect(),
        )
        .quasi_norm(&params)
            * 2f64.powf(s);
        for gamma in [-2.0, 0.5, 2.0] {
            let samples = pb_samples(&f, &fam, s + gamma / p, gamma).unwrap();
            let v = samples.set.quasi_norm(&params);
            assert!((v - direct).abs() < 1e-10 * direct, "gamma {gamma}");
            assert_eq!(samples.atoms.len(), samples.provenance.len());
        }
    }
}
