//! Sampled and analytic function representations, and the discrete Fourier transform on the periodic box.

use crate::error::{invalid, Error, Result};
use crate::quadrature::binomial;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

/// Lattice metadata shared by samples and spectra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub dim: usize,
    pub n: usize,
    pub box_len: f64,
}

impl Lattice {
    pub fn new(dim: usize, n: usize, box_len: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return invalid(format!("dimension must be 1 or 2, got {dim}"));
        }
        if n < 2 || !n.is_power_of_two() {
            return invalid(format!("samples per axis must be a power of two >= 2, got {n}"));
        }
        if !(box_len > 0.0 && box_len.is_finite()) {
            return invalid(format!("box length must be positive, got {box_len}"));
        }
        Ok(Self { dim, n, box_len })
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> f64 {
        self.box_len / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinate of lattice index `j` along one axis; the box is centered at the origin.
    pub fn coordinate(&self, j: usize) -> f64 {
        -0.5 * self.box_len + j as f64 * self.spacing()
    }

    /// Point of the flat (row-major) index.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        if self.dim == 1 {
            [self.coordinate(idx), 0.0]
        } else {
            [self.coordinate(idx / self.n), self.coordinate(idx % self.n)]
        }
    }

    /// Signed integer frequency of an FFT slot.
    pub fn mode(&self, slot: usize) -> i64 {
        if slot < self.n / 2 {
            slot as i64
        } else {
            slot as i64 - self.n as i64
        }
    }

    /// Angular frequency 2πm/L of an FFT slot.
    pub fn frequency(&self, slot: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.mode(slot) as f64 / self.box_len
    }

    /// Euclidean norm of the angular frequency of a flat spectral index.
    pub fn xi_abs(&self, idx: usize) -> f64 {
        if self.dim == 1 {
            self.frequency(idx).abs()
        } else {
            self.frequency(idx / self.n).hypot(self.frequency(idx % self.n))
        }
    }

    /// Signed first frequency component of a flat spectral index.
    pub fn xi_first(&self, idx: usize) -> f64 {
        if self.dim == 1 {
            self.frequency(idx)
        } else {
            self.frequency(idx / self.n)
        }
    }

    /// Largest |ξ| resolved along an axis.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI * self.n as f64 / self.box_len
    }
}

/// Uniform complex samples of a function on the periodic box [-L/2, L/2)^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    pub lattice: Lattice,
    pub values: Vec<Complex64>,
    pub label: String,
}

impl SampledFunction {
    pub fn new(lattice: Lattice, values: Vec<Complex64>, label: impl Into<String>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(Error::Shape(format!(
                "expected {} samples, got {}",
                lattice.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite(format!("sample {i} is not finite")));
        }
        Ok(Self { lattice, values, label: label.into() })
    }

    pub fn zeros(lattice: Lattice, label: impl Into<String>) -> Self {
        Self { lattice, values: vec![Complex64::new(0.0, 0.0); lattice.len()], label: label.into() }
    }

    /// Samples `f` at every lattice point.
    pub fn from_fn<F>(lattice: Lattice, label: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Complex64,
    {
        let d = lattice.dim;
        let values = (0..lattice.len())
            .map(|i| {
                let p = lattice.point(i);
                f(&p[..d])
            })
            .collect();
        Self::new(lattice, values, label)
    }

    /// Samples an analytic field on the lattice.
    pub fn from_field(lattice: Lattice, field: &AnalyticField) -> Result<Self> {
        if field.dim() != lattice.dim {
            return Err(Error::Shape("field and lattice dimensions differ".into()));
        }
        Self::from_fn(lattice, field.label().to_string(), |x| field.eval(x))
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.lattice.cell_volume()).sqrt()
    }

    pub fn lq_norm(&self, q: f64) -> f64 {
        (self.values.iter().map(|v| v.norm().powf(q)).sum::<f64>() * self.lattice.cell_volume())
            .powf(1.0 / q)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            lattice: self.lattice,
            values: self.values.iter().map(|v| v * c).collect(),
            label: self.label.clone(),
        }
    }

    /// Pointwise difference, used for error measurements.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.lattice != other.lattice {
            return Err(Error::Shape("lattices differ".into()));
        }
        Ok(Self {
            lattice: self.lattice,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
            label: format!("{}-{}", self.label, other.label),
        })
    }

    /// Reads one `re,im` pair per line; the lattice is implied by the line count.
    pub fn load_columns(path: &Path, dim: usize, box_len: f64) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut values = Vec::new();
        for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let mut parts = t.split(',').map(str::trim);
            let re = parts.next().and_then(|s| s.parse::<f64>().ok());
            let im = parts.next().map(|s| s.parse::<f64>().ok()).unwrap_or(Some(0.0));
            match (re, im) {
                (Some(re), Some(im)) => values.push(Complex64::new(re, im)),
                _ => return invalid(format!("{}:{}: expected `re,im`", path.display(), lineno + 1)),
            }
        }
        let n = match dim {
            1 => values.len(),
            2 => (values.len() as f64).sqrt().round() as usize,
            _ => return invalid("dimension must be 1 or 2"),
        };
        let lattice = Lattice::new(dim, n, box_len)?;
        let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Self::new(lattice, values, label)
    }

    pub fn save_columns(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        for v in &self.values {
            writeln!(w, "{:.17e},{:.17e}", v.re, v.im)?;
        }
        Ok(())
    }
}

/// Discrete Fourier coefficients in FFT slot order, normalized so that f(x) = Σ c_m e^{iξ_m·x}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub lattice: Lattice,
    pub coeffs: Vec<Complex64>,
}

impl Spectrum {
    /// Coefficient of the integer mode vector `m` (entries in [-n/2, n/2)).
    pub fn coefficient(&self, m: &[i64]) -> Complex64 {
        let n = self.lattice.n as i64;
        let slot = |mi: i64| mi.rem_euclid(n) as usize;
        if self.lattice.dim == 1 {
            self.coeffs[slot(m[0])]
        } else {
            self.coeffs[slot(m[0]) * self.lattice.n + slot(m[1])]
        }
    }

    /// Multiplies every coefficient by `mult(|ξ|)`.
    pub fn apply_radial<F: Fn(f64) -> f64>(&self, mult: F) -> Spectrum {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * mult(self.lattice.xi_abs(i)))
            .collect();
        Spectrum { lattice: self.lattice, coeffs }
    }
}

fn fft_in_place(lattice: &Lattice, data: &mut [Complex64], inverse: bool) {
    let n = lattice.n;
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    if lattice.dim == 1 {
        fft.process(data);
        return;
    }
    for row in data.chunks_mut(n) {
        fft.process(row);
    }
    let mut column = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..n {
        for r in 0..n {
            column[r] = data[r * n + c];
        }
        fft.process(&mut column);
        for r in 0..n {
            data[r * n + c] = column[r];
        }
    }
}

/// Sign (-1)^{m} relating the centered lattice to the FFT origin (n is even).
fn centering_sign(lattice: &Lattice, idx: usize) -> f64 {
    let parity = if lattice.dim == 1 { idx } else { idx / lattice.n + idx % lattice.n };
    if parity % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn to_spectrum(f: &SampledFunction) -> Spectrum {
    let lattice = f.lattice;
    let mut data = f.values.clone();
    fft_in_place(&lattice, &mut data, false);
    let scale = 1.0 / lattice.len() as f64;
    for (i, c) in data.iter_mut().enumerate() {
        *c *= scale * centering_sign(&lattice, i);
    }
    Spectrum { lattice, coeffs: data }
}

pub fn to_samples(s: &Spectrum, label: impl Into<String>) -> SampledFunction {
    let lattice = s.lattice;
    let mut data: Vec<Complex64> =
        s.coeffs.iter().enumerate().map(|(i, c)| c * centering_sign(&lattice, i)).collect();
    fft_in_place(&lattice, &mut data, true);
    SampledFunction { lattice, values: data, label: label.into() }
}

type Rule = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;

/// A lazily evaluated function on ℝ^d with a declared growth bound |f(x)| ≤ C(1+|x|)^N.
#[derive(Clone)]
pub struct AnalyticField {
    dim: usize,
    rule: Rule,
    growth_exponent: i32,
    growth_constant: f64,
    center: [f64; 2],
    support_radius: Option<f64>,
    frequency_scale: Option<f64>,
    spread: Option<f64>,
    label: String,
}

impl fmt::Debug for AnalyticField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticField")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .field("growth_exponent", &self.growth_exponent)
            .field("center", &self.center)
            .field("support_radius", &self.support_radius)
            .field("frequency_scale", &self.frequency_scale)
            .field("spread", &self.spread)
            .finish()
    }
}

impl AnalyticField {
    pub fn new<F>(dim: usize, growth_exponent: i32, growth_constant: f64, rule: F) -> Self
    where
        F: Fn(&[f64]) -> Complex64 + Send + Sync + 'static,
    {
        Self {
            dim,
            rule: Arc::new(rule),
            growth_exponent,
            growth_constant,
            center: [0.0; 2],
            support_radius: None,
            frequency_scale: None,
            spread: None,
            label: String::from("field"),
        }
    }

    /// Declares that |f| is negligible outside the ball of `radius` around `center`.
    pub fn with_support(mut self, center: &[f64], radius: f64) -> Self {
        self.center = [center[0], center.get(1).copied().unwrap_or(0.0)];
        self.support_radius = Some(radius);
        self
    }

    /// Largest angular frequency present in f, used to size quadrature meshes.
    pub fn with_frequency_scale(mut self, xi: f64) -> Self {
        self.frequency_scale = Some(xi);
        self
    }

    /// Width of the frequency support; |f| and |Δ_h f| vary in x on the scale 1/spread.
    pub fn with_spread(mut self, width: f64) -> Self {
        self.spread = Some(width);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn growth_exponent(&self) -> i32 {
        self.growth_exponent
    }

    pub fn center(&self) -> &[f64] {
        &self.center[..self.dim]
    }

    pub fn support_radius(&self) -> Option<f64> {
        self.support_radius
    }

    pub fn frequency_scale(&self) -> Option<f64> {
        self.frequency_scale
    }

    pub fn spread(&self) -> Option<f64> {
        self.spread
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> Complex64 {
        (self.rule)(x)
    }

    #[inline]
    pub fn eval1(&self, x: f64) -> Complex64 {
        (self.rule)(&[x])
    }

    /// Spot-checks the declared growth bound on `count` random points; returns the worst ratio.
    pub fn check_growth(&self, count: usize, radius: f64, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..count {
            let mut x = [0.0; 2];
            for xi in x.iter_mut().take(self.dim) {
                *xi = rng.gen_range(-radius..radius);
            }
            let r = x[..self.dim].iter().map(|v| v * v).sum::<f64>().sqrt();
            let bound = self.growth_constant * (1.0 + r).powi(self.growth_exponent);
            let v = self.eval(&x[..self.dim]).norm();
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("field {} at {:?}", self.label, &x[..self.dim])));
            }
            worst = worst.max(v / bound);
        }
        if worst > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "growth bound violated by factor {worst:.3e} for {}",
                self.label
            )));
        }
        Ok(worst)
    }

    /// x ↦ c·f(x).
    pub fn scaled(&self, c: Complex64) -> Self {
        let inner = self.rule.clone();
        let mut out = self.clone();
        out.rule = Arc::new(move |x: &[f64]| c * inner(x));
        out.growth_constant *= c.norm();
        out
    }

    /// x ↦ f(x − a).
    pub fn translated(&self, a: &[f64]) -> Self {
        let inner = self.rule.clone();
        let a2 = [a[0], a.get(1).copied().unwrap_or(0.0)];
        let d = self.dim;
        let mut out = self.clone();
        out.rule = Arc::new(move |x: &[f64]| {
            let mut y = [0.0; 2];
            for i in 0..d {
                y[i] = x[i] - a2[i];
            }
            inner(&y[..d])
        });
        for i in 0..d {
            out.center[i] += a2[i];
        }
        let shift: f64 = a2[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
        out.growth_constant *= (1.0 + shift).powi(self.growth_exponent.max(0));
        out
    }

    /// x ↦ e^{i⟨ω,x⟩} f(x).
    pub fn modulated(&self, omega: &[f64]) -> Self {
        let inner = self.rule.clone();
        let w = [omega[0], omega.get(1).copied().unwrap_or(0.0)];
        let d = self.dim;
        let mut out = self.clone();
        out.rule = Arc::new(move |x: &[f64]| {
            let phase: f64 = (0..d).map(|i| w[i] * x[i]).sum();
            Complex64::from_polar(1.0, phase) * inner(x)
        });
        let wn = w[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
        out.frequency_scale = self.frequency_scale.map(|f| f + wn);
        out
    }
}

/// 2^{n(d/p−s)} f(2^n ·).
pub fn dilate_renormalized(f: &AnalyticField, n: i32, s: f64, p: f64) -> AnalyticField {
    let d = f.dim;
    let scale = 2f64.powi(n);
    let amp = 2f64.powf(n as f64 * (d as f64 / p - s));
    let inner = f.rule.clone();
    let mut out = f.clone();
    out.rule = Arc::new(move |x: &[f64]| {
        let mut y = [0.0; 2];
        for i in 0..d {
            y[i] = scale * x[i];
        }
        amp * inner(&y[..d])
    });
    for i in 0..d {
        out.center[i] = f.center[i] / scale;
    }
    out.support_radius = f.support_radius.map(|r| r / scale);
    out.frequency_scale = f.frequency_scale.map(|xi| xi * scale);
    out.spread = f.spread.map(|xi| xi * scale);
    let stretch = if n > 0 { scale } else { 1.0 };
    out.growth_constant = f.growth_constant * amp * stretch.powi(f.growth_exponent.max(0));
    out
}

/// Δ_h^M f(x) = Σ_j (−1)^{M−j} C(M,j) f(x + jh).
pub fn finite_difference(f: &AnalyticField, h: &[f64], order: usize) -> Result<AnalyticField> {
    if order == 0 {
        return invalid("difference order must be at least 1");
    }
    let d = f.dim;
    let h2 = [h[0], h.get(1).copied().unwrap_or(0.0)];
    let coeffs = difference_coefficients(order);
    let inner = f.rule.clone();
    let mut out = f.clone();
    out.rule = Arc::new(move |x: &[f64]| {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, c) in coeffs.iter().enumerate() {
            let mut y = [0.0; 2];
            for i in 0..d {
                y[i] = x[i] + j as f64 * h2[i];
            }
            acc += c * inner(&y[..d]);
        }
        acc
    });
    out.growth_constant = f.growth_constant * 2f64.powi(order as i32);
    out.label = format!("D^{order} {}", f.label);
    Ok(out)
}

/// Signed binomial weights (−1)^{M−j} C(M,j), j = 0..=M.
pub fn difference_coefficients(order: usize) -> Vec<f64> {
    (0..=order)
        .map(|j| {
            let sign = if (order - j) % 2 == 0 { 1.0 } else { -1.0 };
            sign * binomial(order, j)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn constant_has_single_zero_mode() {
        let lat = Lattice::new(1, 64, 10.0).unwrap();
        let f = SampledFunction::from_fn(lat, "one", |_| c(1.0)).unwrap();
        let s = to_spectrum(&f);
        assert!((s.coefficient(&[0]) - c(1.0)).norm() < 1e-14);
        let rest: f64 = s.coeffs.iter().skip(1).map(|v| v.norm()).sum();
        assert!(rest < 1e-13);
    }

    #[test]
    fn pure_mode_has_unit_coefficient() {
        let l = 7.0;
        let lat = Lattice::new(1, 32, l).unwrap();
        let f = SampledFunction::from_fn(lat, "mode", |x| Complex64::from_polar(1.0, 2.0 * PI * x[0] / l))
            .unwrap();
        let s = to_spectrum(&f);
        assert!((s.coefficient(&[1]) - c(1.0)).norm() < 1e-13);
        assert!(s.coefficient(&[-1]).norm() < 1e-13);
        assert!((s.lattice.frequency(1) - 2.0 * PI / l).abs() < 1e-15);
    }

    #[test]
    fn two_dimensional_mode() {
        let l = 5.0;
        let lat = Lattice::new(2, 16, l).unwrap();
        let f = SampledFunction::from_fn(lat, "mode2", |x| {
            Complex64::from_polar(1.0, 2.0 * PI * (2.0 * x[0] - x[1]) / l)
        })
        .unwrap();
        let s = to_spectrum(&f);
        assert!((s.coefficient(&[2, -1]) - c(1.0)).norm() < 1e-12);
        let idx = 2 * 16 + 15;
        assert!((s.lattice.xi_abs(idx) - 2.0 * PI / l * 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (dim, n) in [(1, 1024), (2, 32)] {
            let lat = Lattice::new(dim, n, 3.0).unwrap();
            let vals: Vec<Complex64> =
                (0..lat.len()).map(|_| Complex64::new(rng.gen(), rng.gen())).collect();
            let f = SampledFunction::new(lat, vals, "r").unwrap();
            let g = to_samples(&to_spectrum(&f), "r");
            let err = f.sub(&g).unwrap().sup_norm() / f.sup_norm();
            assert!(err < 1e-12, "dim {dim}: {err}");
        }
    }

    #[test]
    fn lattice_validation() {
        assert!(Lattice::new(1, 100, 1.0).is_err());
        assert!(Lattice::new(3, 16, 1.0).is_err());
        assert!(Lattice::new(1, 16, -1.0).is_err());
    }

    fn gaussian() -> AnalyticField {
        AnalyticField::new(1, 0, 1.0, |x| c((-x[0] * x[0]).exp()))
    }

    #[test]
    fn dilation_examples() {
        let g = gaussian();
        let id = dilate_renormalized(&g, 0, 0.3, 2.0);
        assert_eq!(id.eval1(0.7), g.eval1(0.7));
        let d1 = dilate_renormalized(&g, 1, 0.5, 2.0);
        assert!((d1.eval1(0.0) - g.eval1(0.0)).norm() < 1e-15);
        assert!((d1.eval1(0.4) - g.eval1(0.8)).norm() < 1e-15);
    }

    #[test]
    fn differences_of_polynomials() {
        let lin = AnalyticField::new(1, 1, 1.0, |x| c(x[0]));
        let d = finite_difference(&lin, &[0.5], 1).unwrap();
        for x in [-3.0, 0.0, 2.5] {
            assert!((d.eval1(x) - c(0.5)).norm() < 1e-14);
        }
        let quad = AnalyticField::new(1, 2, 1.0, |x| c(x[0] * x[0]));
        for h in [0.1, 0.7, -2.0] {
            let d2 = finite_difference(&quad, &[h], 2).unwrap();
            assert!((d2.eval1(1.3) - c(2.0 * h * h)).norm() < 1e-12);
        }
    }

    #[test]
    fn growth_check() {
        let lin = AnalyticField::new(1, 1, 1.0, |x| c(x[0]));
        assert!(lin.check_growth(100, 50.0, 1).is_ok());
        let bad = AnalyticField::new(1, 0, 1.0, |x| c(x[0] * x[0]));
        assert!(bad.check_growth(100, 50.0, 1).is_err());
    }

    #[test]
    fn column_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let lat = Lattice::new(1, 16, 2.0).unwrap();
        let f = SampledFunction::from_fn(lat, "f", |x| Complex64::new(x[0], -x[0] * 0.5)).unwrap();
        f.save_columns(&path).unwrap();
        let g = SampledFunction::load_columns(&path, 1, 2.0).unwrap();
        assert_eq!(f.values, g.values);
    }
}
