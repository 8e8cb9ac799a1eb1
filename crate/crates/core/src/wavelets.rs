//! Periodized orthonormal wavelets, greedy n-term approximation and approximation-space norms.

use crate::differences::{difference_quasi_norm, NuGammaQuadrature};
use crate::error::{invalid, Result};
use crate::grid::{AnalyticField, Lattice, SampledFunction};
use crate::lorentz::Exponent;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;

const DB: [&[f64]; 5] = [
    &[0.48296291314453414337, 0.83651630373780790558, 0.22414386804201338103, -0.12940952255126038117],
    &[
        0.332670552950082616,
        0.80689150931109257649,
        0.4598775021184915701,
        -0.1350110200102545887,
        -0.085441273882026661693,
        0.035226291885709536603,
    ],
    &[
        0.23037781330889650086,
        0.71484657055291564709,
        0.63088076792985890788,
        -0.027983769416859854211,
        -0.18703481171909308408,
        0.030841381835560763627,
        0.032883011666885199735,
        -0.010597401785069032105,
    ],
    &[
        0.16010239797419291448,
        0.60382926979718967054,
        0.72430852843777292773,
        0.13842814590132073151,
        -0.24229488706638203186,
        -0.032244869584638374648,
        0.077571493840045713523,
        -0.0062414902127982742742,
        -0.012580751999081999469,
        0.003335725285473771278,
    ],
    &[
        0.11154074335010946362,
        0.49462389039845308568,
        0.75113390802109535068,
        0.31525035170919762909,
        -0.22626469396543982008,
        -0.12976686756726193556,
        0.097501605587323049102,
        0.027522865530305728626,
        -0.031582039317486029565,
        0.00055384220116149613925,
        0.0047772575109455106396,
        -0.0010773010853084795649,
    ],
];

/// Compactly supported orthonormal filter pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletBasis {
    pub vanishing_moments: usize,
    pub lowpass: Vec<f64>,
    pub highpass: Vec<f64>,
}

impl WaveletBasis {
    /// Daubechies filter with u vanishing moments, u ∈ {2,…,6}.
    pub fn daubechies(u: usize) -> Result<Self> {
        if !(2..=6).contains(&u) {
            return invalid(format!("vanishing moments must lie in 2..=6, got {u}"));
        }
        let h = DB[u - 2].to_vec();
        let len = h.len();
        let g = (0..len).map(|i| if i % 2 == 0 { h[len - 1 - i] } else { -h[len - 1 - i] }).collect();
        Ok(Self { vanishing_moments: u, lowpass: h, highpass: g })
    }

    /// Largest |Σ_i i^k g_i| over k < u, normalized by Σ|i^k g_i|.
    pub fn moment_defect(&self) -> f64 {
        (0..self.vanishing_moments)
            .map(|k| {
                let terms = self.highpass.iter().enumerate().map(|(i, g)| (i as f64).powi(k as i32) * g);
                let (sum, abs) = terms.fold((0.0, 0.0), |(s, a), t| (s + t, a + t.abs()));
                (sum / abs).abs()
            })
            .fold(0.0, f64::max)
    }

    fn analysis_step(&self, a: &[Complex64], lo: &mut [Complex64], hi: &mut [Complex64]) {
        let n = a.len();
        for k in 0..n / 2 {
            let mut s = Complex64::new(0.0, 0.0);
            let mut d = Complex64::new(0.0, 0.0);
            for (i, (h, g)) in self.lowpass.iter().zip(&self.highpass).enumerate() {
                let v = a[(2 * k + i) % n];
                s += v * h;
                d += v * g;
            }
            lo[k] = s;
            hi[k] = d;
        }
    }

    fn synthesis_step(&self, lo: &[Complex64], hi: &[Complex64], out: &mut [Complex64]) {
        let n = out.len();
        out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for k in 0..n / 2 {
            for (i, (h, g)) in self.lowpass.iter().zip(&self.highpass).enumerate() {
                out[(2 * k + i) % n] += lo[k] * h + hi[k] * g;
            }
        }
    }

    /// Full 1-d transform in Mallat layout.
    fn forward(&self, data: &mut [Complex64], levels: usize) {
        let mut len = data.len();
        let mut lo = vec![Complex64::new(0.0, 0.0); len / 2];
        let mut hi = lo.clone();
        for _ in 0..levels {
            self.analysis_step(&data[..len], &mut lo[..len / 2], &mut hi[..len / 2]);
            data[..len / 2].copy_from_slice(&lo[..len / 2]);
            data[len / 2..len].copy_from_slice(&hi[..len / 2]);
            len /= 2;
        }
    }

    fn inverse(&self, data: &mut [Complex64], levels: usize) {
        let n = data.len();
        let mut len = n >> levels;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for _ in 0..levels {
            self.synthesis_step(&data[..len], &data[len..2 * len], &mut out[..2 * len]);
            data[..2 * len].copy_from_slice(&out[..2 * len]);
            len *= 2;
        }
    }
}

/// One coefficient ⟨f, ψ^e_{j,m}⟩; e = 0 marks coarsest-level scaling functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub e: u8,
    pub j: i32,
    pub m: [i64; 2],
    pub re: f64,
    pub im: f64,
}

/// Coefficients in Mallat layout together with the level bookkeeping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaveletCoeffTree {
    pub basis: WaveletBasis,
    pub lattice: Lattice,
    pub levels: usize,
    /// Level of the finest scaling coefficients: Δx = 2^{−finest}.
    pub finest: i32,
    pub data: Vec<Complex64>,
}

impl WaveletCoeffTree {
    pub fn coarsest(&self) -> i32 {
        self.finest - self.levels as i32
    }

    /// (e, j, m) of the coefficient stored at `pos`.
    pub fn index(&self, pos: usize) -> (u8, i32, [i64; 2]) {
        let n = self.lattice.n;
        let coarse = n >> self.levels;
        match self.lattice.dim {
            1 => {
                if pos < coarse {
                    return (0, self.coarsest(), [pos as i64, 0]);
                }
                let band = usize::BITS - 1 - pos.leading_zeros(); // pos ∈ [2^band, 2^{band+1})
                let size = 1usize << band;
                let j = self.coarsest() + (band as i32 - coarse.trailing_zeros() as i32);
                (1, j, [(pos - size) as i64, 0])
            }
            _ => {
                let (r, c) = (pos / n, pos % n);
                if r < coarse && c < coarse {
                    return (0, self.coarsest(), [r as i64, c as i64]);
                }
                let top = r.max(c);
                let band = usize::BITS - 1 - top.leading_zeros();
                let size = 1usize << band;
                let j = self.coarsest() + (band as i32 - coarse.trailing_zeros() as i32);
                let e = match (r >= size, c >= size) {
                    (false, true) => 1,
                    (true, false) => 2,
                    _ => 3,
                };
                (e, j, [(r % size) as i64, (c % size) as i64])
            }
        }
    }

    /// ‖c ψ^e_{j,m}‖_q up to the constant ‖ψ‖_q: |c|·2^{jd(1/2−1/q)}.
    pub fn weighted(&self, pos: usize, q: f64) -> f64 {
        let (_, j, _) = self.index(pos);
        let d = self.lattice.dim as f64;
        self.data[pos].norm() * 2f64.powf(j as f64 * d * (0.5 - 1.0 / q))
    }

    pub fn nonzero(&self) -> Vec<usize> {
        (0..self.data.len()).filter(|&i| self.data[i].norm() > 0.0).collect()
    }

    pub fn coefficients(&self) -> Vec<Coefficient> {
        self.nonzero()
            .into_iter()
            .map(|pos| {
                let (e, j, m) = self.index(pos);
                Coefficient { e, j, m, re: self.data[pos].re, im: self.data[pos].im }
            })
            .collect()
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Tree with the given coefficients kept and all others zero.
    pub fn restricted(&self, keep: &[usize]) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for &p in keep {
            out.data[p] = self.data[p];
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.coefficients())?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

fn finest_level(lattice: &Lattice) -> Result<i32> {
    let j = (lattice.n as f64 / lattice.box_len).log2();
    if (j - j.round()).abs() > 1e-12 {
        return invalid("wavelet lattices need n/L to be a power of two");
    }
    Ok(j.round() as i32)
}

fn transform_2d(basis: &WaveletBasis, data: &mut [Complex64], n: usize, levels: usize, forward: bool) {
    let mut row = vec![Complex64::new(0.0, 0.0); n];
    let order: Vec<usize> = if forward { (0..levels).collect() } else { (0..levels).rev().collect() };
    for l in order {
        let size = n >> l;
        if forward {
            for r in 0..size {
                row[..size].copy_from_slice(&data[r * n..r * n + size]);
                basis.forward(&mut row[..size], 1);
                data[r * n..r * n + size].copy_from_slice(&row[..size]);
            }
            for c in 0..size {
                for r in 0..size {
                    row[r] = data[r * n + c];
                }
                basis.forward(&mut row[..size], 1);
                for r in 0..size {
                    data[r * n + c] = row[r];
                }
            }
        } else {
            for c in 0..size {
                for r in 0..size {
                    row[r] = data[r * n + c];
                }
                basis.inverse(&mut row[..size], 1);
                for r in 0..size {
                    data[r * n + c] = row[r];
                }
            }
            for r in 0..size {
                row[..size].copy_from_slice(&data[r * n..r * n + size]);
                basis.inverse(&mut row[..size], 1);
                data[r * n..r * n + size].copy_from_slice(&row[..size]);
            }
        }
    }
}

/// Coefficients of f; finest scaling coefficients are √(cell)·f(x).
pub fn analyze(f: &SampledFunction, basis: &WaveletBasis, levels: usize) -> Result<WaveletCoeffTree> {
    let lat = f.lattice;
    let finest = finest_level(&lat)?;
    if (lat.n >> levels) < basis.lowpass.len() || levels == 0 {
        return invalid(format!(
            "{levels} levels leave {} coarse samples, fewer than the filter length {}",
            lat.n >> levels,
            basis.lowpass.len()
        ));
    }
    let scale = lat.cell_volume().sqrt();
    let mut data: Vec<Complex64> = f.values.iter().map(|v| v * scale).collect();
    match lat.dim {
        1 => basis.forward(&mut data, levels),
        _ => transform_2d(basis, &mut data, lat.n, levels, true),
    }
    Ok(WaveletCoeffTree { basis: basis.clone(), lattice: lat, levels, finest, data })
}

pub fn synthesize(t: &WaveletCoeffTree) -> SampledFunction {
    let mut data = t.data.clone();
    match t.lattice.dim {
        1 => t.basis.inverse(&mut data, t.levels),
        _ => transform_2d(&t.basis, &mut data, t.lattice.n, t.levels, false),
    }
    let scale = 1.0 / t.lattice.cell_volume().sqrt();
    data.iter_mut().for_each(|v| *v *= scale);
    SampledFunction { lattice: t.lattice, values: data, label: "synthesis".into() }
}

/// Positions sorted by decreasing q-weighted magnitude (ties by position).
pub fn greedy_order(t: &WaveletCoeffTree, q: f64) -> Vec<usize> {
    let mut idx = t.nonzero();
    let w: Vec<f64> = idx.iter().map(|&p| t.weighted(p, q)).collect();
    let mut pairs: Vec<(usize, f64)> = idx.drain(..).zip(w).collect();
    pairs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    pairs.into_iter().map(|(p, _)| p).collect()
}

/// ‖f − (n largest terms)‖_q.
pub fn greedy_sigma_n(t: &WaveletCoeffTree, q: f64, n: usize) -> f64 {
    let order = greedy_order(t, q);
    let rest: Vec<usize> = order.into_iter().skip(n).collect();
    synthesize(&t.restricted(&rest)).lq_norm(q)
}

/// σ_0, …, σ_{n_max} for the greedy selection.
pub fn sigma_curve(t: &WaveletCoeffTree, q: f64, n_max: usize) -> Vec<f64> {
    let order = greedy_order(t, q);
    let n_max = n_max.min(order.len());
    let mut out = Vec::with_capacity(n_max + 1);
    let mut tree = t.clone();
    for n in 0..=n_max {
        if n > 0 {
            tree.data[order[n - 1]] = Complex64::new(0.0, 0.0);
        }
        out.push(synthesize(&tree).lq_norm(q));
    }
    out
}

/// Best n-term error over all n-subsets (trees with at most 12 nonzero coefficients).
pub fn best_subset_sigma_n(t: &WaveletCoeffTree, q: f64, n: usize) -> Result<f64> {
    let nz = t.nonzero();
    if nz.len() > 12 {
        return invalid(format!("exhaustive search is limited to 12 coefficients, tree has {}", nz.len()));
    }
    if n >= nz.len() {
        return Ok(0.0);
    }
    let atoms: Vec<Vec<Complex64>> = nz.iter().map(|&p| synthesize(&t.restricted(&[p])).values).collect();
    let cell = t.lattice.cell_volume();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << nz.len()) {
        if mask.count_ones() as usize != n {
            continue;
        }
        // remainder = sum of the atoms left out
        let mut acc = 0.0;
        for x in 0..t.data.len() {
            let mut v = Complex64::new(0.0, 0.0);
            for (i, a) in atoms.iter().enumerate() {
                if mask & (1 << i) == 0 {
                    v += a[x];
                }
            }
            acc += v.norm().powf(q);
        }
        best = best.min((acc * cell).powf(1.0 / q));
    }
    Ok(best)
}

/// ‖f‖_{𝒜^α_r(L^q)} from the greedy σ_n, n = 1..n_max; returns (value, n_max).
pub fn approx_space_norm(t: &WaveletCoeffTree, q: f64, alpha: f64, r: Exponent, n_max: usize) -> (f64, usize) {
    let curve = sigma_curve(t, q, n_max);
    let n_max = curve.len() - 1;
    let terms = (1..=n_max).map(|n| (n as f64).powf(alpha) * curve[n]);
    let v = if r.is_infinite() {
        terms.fold(0.0, f64::max)
    } else {
        let r = r.value();
        terms.enumerate().map(|(i, v)| v.powf(r) / (i + 1) as f64).sum::<f64>().powf(1.0 / r)
    };
    (v, n_max)
}

/// Writes (n, sigma_n) rows.
pub fn write_sigma_csv(curve: &[f64], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["n", "sigma_n"])?;
    for (n, s) in curve.iter().enumerate() {
        w.write_record([n.to_string(), s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Linear interpolant of 1-d samples, zero outside the box.
pub fn sampled_interpolant(f: &SampledFunction, center: f64, radius: f64, carrier: f64) -> Result<AnalyticField> {
    if f.lattice.dim != 1 {
        return invalid("interpolation is provided for d = 1");
    }
    let lat = f.lattice;
    let values = f.values.clone();
    let x0 = lat.coordinate(0);
    let dx = lat.spacing();
    let bound = f.sup_norm();
    Ok(AnalyticField::new(1, 0, bound.max(f64::MIN_POSITIVE), move |x: &[f64]| {
        let u = (x[0] - x0) / dx;
        if u < 0.0 || u >= (values.len() - 1) as f64 {
            return Complex64::new(0.0, 0.0);
        }
        let j = u.floor() as usize;
        let t = u - j as f64;
        values[j] * (1.0 - t) + values[j + 1] * t
    })
    .with_support(&[center], radius)
    .with_frequency_scale(carrier)
    .with_spread(carrier)
    .with_label(f.label.clone()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cor110Report {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub p: f64,
    pub b: f64,
    pub n_max: usize,
}

/// sup_n n^α σ_n(f)_q against the weak norm of |h|^{d/q}|Δ_h^M f| under dx dh/|h|^{2d}.
pub fn corollary_110_comparison(
    tree: &WaveletCoeffTree,
    field: &AnalyticField,
    q: f64,
    alpha: f64,
    order: usize,
    quad: &NuGammaQuadrature,
) -> Result<Cor110Report> {
    let d = tree.lattice.dim as f64;
    if !(q > 1.0 && q.is_finite()) {
        return invalid(format!("q must lie in (1, ∞), got {q}"));
    }
    if !(alpha > 0.0 && alpha < 1.0 - 1.0 / q) {
        return invalid(format!("α must lie in (0, 1 − 1/q), got {alpha}"));
    }
    if !(order as f64 > alpha * d) {
        return invalid(format!("M = {order} must exceed αd = {}", alpha * d));
    }
    let s = alpha * d;
    let p = d * q / (d + s * q);
    let b = -d / q;
    let (lhs, n_max) = approx_space_norm(tree, q, alpha, Exponent::INFINITY, usize::MAX);
    let rhs = difference_quasi_norm(field, order, b, -d, p, Exponent::INFINITY, quad)?.value;
    let ratio = if rhs > 0.0 { lhs / rhs } else if lhs == 0.0 { 1.0 } else { f64::INFINITY };
    Ok(Cor110Report { lhs, rhs, ratio, p, b, n_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lattice() -> Lattice {
        Lattice::new(1, 1024, 16.0).unwrap()
    }

    fn random_f(seed: u64, lat: Lattice) -> SampledFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..lat.len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        SampledFunction::new(lat, v, "random").unwrap()
    }

    #[test]
    fn filters_are_orthonormal_with_vanishing_moments() {
        for u in 2..=6 {
            let b = WaveletBasis::daubechies(u).unwrap();
            assert!(b.moment_defect() < 1e-8, "u = {u}: {}", b.moment_defect());
            // Gram matrix of the synthesized system on a small box
            let lat = Lattice::new(1, 64, 1.0).unwrap();
            let zero = analyze(&SampledFunction::zeros(lat, "z"), &b, 2).unwrap();
            let atoms: Vec<Vec<Complex64>> = (0..64)
                .map(|p| {
                    let mut t = zero.clone();
                    t.data[p] = Complex64::new(1.0, 0.0);
                    synthesize(&t).values
                })
                .collect();
            let cell = lat.cell_volume();
            let mut worst: f64 = 0.0;
            for i in 0..64 {
                for j in 0..64 {
                    let g: Complex64 = atoms[i].iter().zip(&atoms[j]).map(|(a, b)| a * b.conj()).sum::<Complex64>() * cell;
                    let target = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((g - target).norm());
                }
            }
            assert!(worst < 1e-8, "u = {u}: {worst}");
        }
        assert!(WaveletBasis::daubechies(7).is_err());
    }

    #[test]
    fn perfect_reconstruction_and_parseval() {
        let b = WaveletBasis::daubechies(4).unwrap();
        let f = random_f(1, lattice());
        let t = analyze(&f, &b, 5).unwrap();
        let back = synthesize(&t);
        assert!(back.sub(&f).unwrap().l2_norm() < 1e-10 * f.l2_norm());
        assert!((t.energy() - f.l2_norm().powi(2)).abs() < 1e-8 * t.energy());
        let zero = analyze(&SampledFunction::zeros(lattice(), "z"), &b, 5).unwrap();
        assert!(zero.nonzero().is_empty());
    }

    #[test]
    fn two_dimensional_round_trip() {
        let b = WaveletBasis::daubechies(3).unwrap();
        let lat = Lattice::new(2, 64, 8.0).unwrap();
        let f = random_f(2, lat);
        let t = analyze(&f, &b, 2).unwrap();
        assert!(synthesize(&t).sub(&f).unwrap().l2_norm() < 1e-10 * f.l2_norm());
        assert!((t.energy() - f.l2_norm().powi(2)).abs() < 1e-8 * t.energy());
        let mut seen = std::collections::BTreeSet::new();
        for pos in 0..t.data.len() {
            seen.insert(t.index(pos).0);
        }
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn single_wavelet() {
        let b = WaveletBasis::daubechies(3).unwrap();
        let lat = lattice();
        let mut t = analyze(&SampledFunction::zeros(lat, "z"), &b, 4).unwrap();
        let pos = 300;
        t.data[pos] = Complex64::new(1.0, 0.0);
        let f = synthesize(&t);
        let back = analyze(&f, &b, 4).unwrap();
        assert_eq!(back.data.iter().filter(|c| c.norm() > 1e-12).count(), 1);
        assert!((back.data[pos] - 1.0).norm() < 1e-12);
        let q = 3.0;
        assert!((greedy_sigma_n(&t, q, 0) - f.lq_norm(q)).abs() < 1e-14);
        assert_eq!(greedy_sigma_n(&t, q, 1), 0.0);
        let (v, n_max) = approx_space_norm(&t, q, 0.3, Exponent::INFINITY, 10);
        assert_eq!((v, n_max), (0.0, 1));
        let (e, j, m) = t.index(pos);
        assert_eq!(e, 1);
        // 1024 samples on a box of 16: finest level 6, coarsest 2; [256, 512) holds the 2⁴·16 level-4 wavelets
        assert_eq!((j, m[0]), (4, 300 - 256));
    }

    #[test]
    fn greedy_is_monotone_and_homogeneous() {
        let b = WaveletBasis::daubechies(4).unwrap();
        let f = random_f(3, lattice());
        let t = analyze(&f, &b, 4).unwrap();
        let curve = sigma_curve(&t, 1.5, 200);
        assert!(curve.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        let scaled = t.scaled(Complex64::new(0.0, -3.0));
        assert!((greedy_sigma_n(&scaled, 1.5, 50) - 3.0 * curve[50]).abs() < 1e-10 * curve[50]);
        assert_eq!(greedy_sigma_n(&t, 1.5, t.data.len()), 0.0);
    }

    #[test]
    fn greedy_against_exhaustive_subsets() {
        let b = WaveletBasis::daubechies(3).unwrap();
        let lat = Lattice::new(1, 256, 8.0).unwrap();
        let zero = analyze(&SampledFunction::zeros(lat, "z"), &b, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..4 {
            let mut t = zero.clone();
            for _ in 0..8 {
                let p = rng.gen_range(0..256);
                t.data[p] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
            }
            for q in [1.5, 3.0] {
                for n in 0..=t.nonzero().len() {
                    let g = greedy_sigma_n(&t, q, n);
                    let best = best_subset_sigma_n(&t, q, n).unwrap();
                    assert!(g <= 4.0 * best + 1e-12 && best <= g + 1e-12, "q={q} n={n}: {g} vs {best}");
                }
            }
            // two coefficients: both orderings by hand
            let two = t.restricted(&t.nonzero()[..2]);
            let [a, c] = [two.nonzero()[0], two.nonzero()[1]];
            let by_hand = synthesize(&two.restricted(&[a])).lq_norm(2.5).min(synthesize(&two.restricted(&[c])).lq_norm(2.5));
            assert!((best_subset_sigma_n(&two, 2.5, 1).unwrap() - by_hand).abs() < 1e-14);
        }
    }

    #[test]
    fn weak_profile_slope() {
        // |c_k| = k^{−1/τ} with 1/τ = α + 1/q gives σ_n ≈ n^{−α} for q = 2
        let b = WaveletBasis::daubechies(4).unwrap();
        let lat = Lattice::new(1, 4096, 64.0).unwrap();
        let mut t = analyze(&SampledFunction::zeros(lat, "z"), &b, 6).unwrap();
        let (alpha, q) = (0.3, 2.0);
        let tau_inv = alpha + 1.0 / q;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pos: Vec<usize> = (0..4096).collect();
        for i in (1..pos.len()).rev() {
            pos.swap(i, rng.gen_range(0..=i));
        }
        for (k, &p) in pos.iter().enumerate() {
            t.data[p] = Complex64::new(((k + 1) as f64).powf(-tau_inv), 0.0);
        }
        let curve = sigma_curve(&t, q, 128);
        let pts: Vec<(f64, f64)> = (8..=128).map(|n| (n as f64, curve[n])).collect();
        let (slope, _) = crate::harness::slope_fit(&pts).unwrap();
        assert!((slope + alpha).abs() < 0.1, "{slope}");
        // tail oracle: σ_n² = Σ_{k>n} k^{−2/τ}
        let tail: f64 = (129..=4096).map(|k| (k as f64).powf(-2.0 * tau_inv)).sum();
        assert!((curve[128] - tail.sqrt()).abs() < 1e-10);
    }
}
