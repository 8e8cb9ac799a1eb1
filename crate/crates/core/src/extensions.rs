//! Poisson and heat extensions to the upper half-plane, the smooth-kernel fields t^{-b}ψ_t∗f,
//! weak-type norms under λ_γ, and the BV inequality.

use crate::differences::{DifferenceSamples, HNode, NuGammaQuadrature, XSampling};
use crate::error::{invalid, Error, Result};
use crate::grid::AnalyticField;
use crate::lorentz::{Exponent, LorentzParams, WeightedValueSet};
use crate::quadrature::mapped_rule;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

/// Piecewise-linear function on ℝ: constant outside [k_0, k_last], linear between knots.
///
/// Piece 0 is (-∞, k_0), piece i is [k_{i-1}, k_i), the last piece is [k_last, ∞).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BVFunction {
    knots: Vec<f64>,
    /// Value of piece i at its left knot (outer pieces: the constant).
    values: Vec<f64>,
    /// Slopes of the inner pieces; empty for step functions.
    slopes: Vec<f64>,
}

impl BVFunction {
    pub fn step(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::piecewise_linear(knots, values, Vec::new())
    }

    pub fn piecewise_linear(knots: Vec<f64>, values: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if knots.is_empty() {
            return invalid("a BV function needs at least one knot");
        }
        if values.len() != knots.len() + 1 {
            return invalid(format!("expected {} piece values, got {}", knots.len() + 1, values.len()));
        }
        if !slopes.is_empty() && slopes.len() != knots.len() - 1 {
            return invalid(format!("expected {} inner slopes, got {}", knots.len() - 1, slopes.len()));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("knots must be strictly increasing");
        }
        if knots.iter().chain(&values).chain(&slopes).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("BV representation".into()));
        }
        Ok(Self { knots, values, slopes })
    }

    /// c·1_{[a,b)}.
    pub fn indicator(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::step(vec![a, b], vec![0.0, c, 0.0])
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn is_step(&self) -> bool {
        self.slopes.is_empty()
    }

    fn slope(&self, piece: usize) -> f64 {
        if self.slopes.is_empty() || piece == 0 || piece > self.slopes.len() {
            0.0
        } else {
            self.slopes[piece - 1]
        }
    }

    /// Left and right end values of inner piece i (1 ≤ i < knots.len()).
    fn piece_ends(&self, i: usize) -> (f64, f64) {
        let len = self.knots[i] - self.knots[i - 1];
        (self.values[i], self.values[i] + self.slope(i) * len)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.knots.partition_point(|&k| k <= x);
        if i == 0 || i == self.knots.len() {
            self.values[i]
        } else {
            self.values[i] + self.slope(i) * (x - self.knots[i - 1])
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            knots: self.knots.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
            slopes: self.slopes.iter().map(|v| c * v).collect(),
        }
    }

    /// Σ|jumps| + Σ∫|slope|.
    pub fn total_variation(&self) -> f64 {
        let k = self.knots.len();
        let mut tv = 0.0;
        let mut left_limit = self.values[0];
        for i in 1..k {
            let (a, b) = self.piece_ends(i);
            tv += (a - left_limit).abs() + (b - a).abs();
            left_limit = b;
        }
        tv + (self.values[k] - left_limit).abs()
    }

    pub fn ess_sup(&self) -> f64 {
        self.extreme_values().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn ess_inf(&self) -> f64 {
        self.extreme_values().fold(f64::INFINITY, f64::min)
    }

    fn extreme_values(&self) -> impl Iterator<Item = f64> + '_ {
        let k = self.knots.len();
        (1..k)
            .flat_map(move |i| {
                let (a, b) = self.piece_ends(i);
                [a, b]
            })
            .chain([self.values[0], self.values[k]])
    }

    /// inf_c ‖f − c‖_∞.
    pub fn v_infinity(&self) -> f64 {
        0.5 * (self.ess_sup() - self.ess_inf())
    }

    pub fn to_field(&self) -> AnalyticField {
        let me = self.clone();
        let lo = self.knots[0];
        let hi = *self.knots.last().unwrap();
        let bound = self.ess_sup().abs().max(self.ess_inf().abs());
        AnalyticField::new(1, 0, bound.max(f64::MIN_POSITIVE), move |x: &[f64]| Complex64::new(me.eval(x[0]), 0.0))
            .with_support(&[0.5 * (lo + hi)], 0.5 * (hi - lo))
            .with_label("bv")
    }
}

/// Exact x-integration of |Δ_h f| for a BV function (M = 1), h on the quadrature's radial nodes.
///
/// Step functions give exact atoms; linear pieces are split into `linear_cells` midpoint cells.
pub fn bv_difference_samples(f: &BVFunction, quad: &NuGammaQuadrature, linear_cells: usize) -> DifferenceSamples {
    let nodes = quad.h_nodes(1);
    let parts: Vec<(HNode, Vec<(f64, f64)>)> = nodes
        .par_iter()
        .map(|node| {
            let h = node.h[0];
            let mut bps: Vec<f64> = f.knots.iter().flat_map(|&k| [k, k - h]).collect();
            bps.sort_by(f64::total_cmp);
            bps.dedup();
            let mut atoms = Vec::with_capacity(bps.len());
            for w in bps.windows(2) {
                let (a, b) = (w[0], w[1]);
                let cells = if f.is_step() { 1 } else { linear_cells.max(1) };
                let dx = (b - a) / cells as f64;
                for c in 0..cells {
                    let x = a + (c as f64 + 0.5) * dx;
                    let v = (f.eval(x + h) - f.eval(x)).abs();
                    if v > 0.0 {
                        atoms.push((v, dx));
                    }
                }
            }
            (*node, atoms)
        })
        .collect();
    DifferenceSamples::from_parts(1, 1, parts)
}

/// Radial mesh for a BV function: shells from the smallest knot gap to the full extent.
pub fn bv_quadrature(f: &BVFunction, shells_below: i32, shells_above: i32) -> NuGammaQuadrature {
    let gap = f.knots.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let extent = f.knots.last().unwrap() - f.knots[0];
    let gap = if gap.is_finite() { gap } else { 1.0 };
    let extent = if extent > 0.0 { extent } else { 1.0 };
    NuGammaQuadrature {
        j_min: gap.log2().floor() as i32 - shells_below,
        j_max: extent.log2().ceil() as i32 + shells_above,
        radial_nodes: 4,
        nodes_per_period: 0.0,
        max_radial_nodes: 4,
        carrier: 0.0,
        oscillation_cutoff: 0.0,
        angles: 1,
        x_sampling: XSampling::Lattice { spacing: gap },
        x_window: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BvReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub p: f64,
    pub gamma: f64,
}

/// ‖f‖_{𝓑^{1/p}_p(γ,∞)} against ‖f‖_{V^∞}^{1−1/p} ‖f‖_{BV}^{1/p}.
pub fn bv_inequality_check(f: &BVFunction, p: f64, gamma: f64) -> Result<BvReport> {
    if (-1.0..=0.0).contains(&gamma) {
        return invalid(format!("γ = {gamma} lies in [-1, 0], where the inequality is not available"));
    }
    if !(p > 1.0 && p.is_finite()) {
        return invalid(format!("p must lie in (1, ∞), got {p}"));
    }
    let quad = bv_quadrature(f, 24, 24);
    let samples = bv_difference_samples(f, &quad, 16);
    let b = (1.0 + gamma) / p;
    let lhs = samples.quasi_norm(b, gamma, &LorentzParams::new(p, Exponent::INFINITY)?);
    let rhs = f.v_infinity().powf(1.0 - 1.0 / p) * f.total_variation().powf(1.0 / p);
    let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    Ok(BvReport { lhs, rhs, ratio, p, gamma })
}

/// Tensor mesh on ℝ × (0, ∞) with x-cell lengths and log-t cell widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpaceMesh {
    pub xs: Vec<f64>,
    pub dx: Vec<f64>,
    pub ts: Vec<f64>,
    pub dlog_t: Vec<f64>,
}

fn voronoi(points: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let n = points.len();
    (0..n)
        .map(|i| {
            let a = if i == 0 { lo } else { 0.5 * (points[i - 1] + points[i]) };
            let b = if i + 1 == n { hi } else { 0.5 * (points[i] + points[i + 1]) };
            b - a
        })
        .collect()
}

impl HalfSpaceMesh {
    /// x graded geometrically (ratio `ratio`, first offset `x_min_gap`) around each breakpoint,
    /// on [x_lo, x_hi]; t log-uniform on [t_min, t_max] with the same ratio.
    pub fn graded(
        breakpoints: &[f64],
        x_lo: f64,
        x_hi: f64,
        x_min_gap: f64,
        t_min: f64,
        t_max: f64,
        ratio: f64,
    ) -> Result<Self> {
        if !(ratio > 1.0) || !(t_min > 0.0 && t_max > t_min) || !(x_hi > x_lo) || !(x_min_gap > 0.0) {
            return invalid("half-space mesh needs ratio > 1, 0 < t_min < t_max, x_lo < x_hi, gap > 0");
        }
        let mut xs = Vec::new();
        for &c in breakpoints {
            let mut d = x_min_gap;
            while c - d > x_lo || c + d < x_hi {
                for x in [c - d, c + d] {
                    if x > x_lo && x < x_hi {
                        xs.push(x);
                    }
                }
                d *= ratio;
            }
        }
        if breakpoints.is_empty() {
            let n = ((x_hi - x_lo) / x_min_gap).ceil() as usize;
            xs.extend((0..n).map(|i| x_lo + (i as f64 + 0.5) * (x_hi - x_lo) / n as f64));
        }
        xs.sort_by(f64::total_cmp);
        // drop points closer than the local spacing of another breakpoint's progression
        let mut thinned: Vec<f64> = Vec::with_capacity(xs.len());
        for x in xs {
            let dist = breakpoints.iter().map(|c| (x - c).abs()).fold(f64::INFINITY, f64::min);
            let keep = match thinned.last() {
                Some(&prev) => x - prev > 0.5 * (ratio - 1.0) * dist,
                None => true,
            };
            if keep {
                thinned.push(x);
            }
        }
        let dx = voronoi(&thinned, x_lo, x_hi);
        let n_t = ((t_max / t_min).ln() / ratio.ln()).ceil() as usize;
        let step = (t_max / t_min).ln() / n_t as f64;
        let ts = (0..n_t).map(|i| (t_min.ln() + (i as f64 + 0.5) * step).exp()).collect();
        Ok(Self { xs: thinned, dx, ts, dlog_t: vec![step; n_t] })
    }

    /// Uniform mesh, used for residual checks.
    pub fn uniform(x_lo: f64, x_hi: f64, nx: usize, t_lo: f64, t_hi: f64, nt: usize) -> Self {
        let hx = (x_hi - x_lo) / (nx - 1).max(1) as f64;
        let ht = (t_hi - t_lo) / (nt - 1).max(1) as f64;
        let xs: Vec<f64> = (0..nx).map(|i| x_lo + i as f64 * hx).collect();
        let ts: Vec<f64> = (0..nt).map(|i| t_lo + i as f64 * ht).collect();
        let dlog_t = ts.iter().map(|t| ht / t).collect();
        Self { dx: vec![hx; nx], xs, ts, dlog_t }
    }

    pub fn len(&self) -> usize {
        self.xs.len() * self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Vector field on the half-space mesh; values indexed [(it·nx + ix)·components + c].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HalfSpaceField {
    pub mesh: HalfSpaceMesh,
    pub components: usize,
    pub values: Vec<Complex64>,
    pub label: String,
}

impl HalfSpaceField {
    pub fn get(&self, ix: usize, it: usize, c: usize) -> Complex64 {
        self.values[(it * self.mesh.xs.len() + ix) * self.components + c]
    }

    pub fn magnitude(&self, ix: usize, it: usize) -> f64 {
        (0..self.components).map(|c| self.get(ix, it, c).norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn component(&self, c: usize) -> Result<Self> {
        if c >= self.components {
            return invalid(format!("component {c} out of range"));
        }
        Ok(Self {
            mesh: self.mesh.clone(),
            components: 1,
            values: self.values.iter().skip(c).step_by(self.components).copied().collect(),
            label: format!("{}[{c}]", self.label),
        })
    }

    /// Multiplies each node by t^a.
    pub fn t_weighted(&self, a: f64) -> Self {
        let nx = self.mesh.xs.len();
        let mut out = self.clone();
        for (it, t) in self.mesh.ts.iter().enumerate() {
            let w = t.powf(a);
            for v in &mut out.values[it * nx * self.components..(it + 1) * nx * self.components] {
                *v *= w;
            }
        }
        out
    }

    /// Pushforward of |H| under λ_γ = t^{γ−1} dx dt.
    pub fn value_set(&self, gamma: f64) -> WeightedValueSet {
        let nx = self.mesh.xs.len();
        let mut pairs = Vec::with_capacity(self.mesh.len());
        for (it, t) in self.mesh.ts.iter().enumerate() {
            let wt = t.powf(gamma) * self.mesh.dlog_t[it];
            for ix in 0..nx {
                pairs.push((self.magnitude(ix, it), wt * self.mesh.dx[ix]));
            }
        }
        WeightedValueSet::from_pairs_unchecked(pairs)
    }

    fn boundary_mass_above(&self, lambda: f64, gamma: f64) -> f64 {
        let nx = self.mesh.xs.len();
        let nt = self.mesh.ts.len();
        let mut m = 0.0;
        for (it, t) in self.mesh.ts.iter().enumerate() {
            let wt = t.powf(gamma) * self.mesh.dlog_t[it];
            for ix in 0..nx {
                let edge = it == 0 || it + 1 == nt || ix == 0 || ix + 1 == nx;
                if edge && self.magnitude(ix, it) > lambda {
                    m += wt * self.mesh.dx[ix];
                }
            }
        }
        m
    }
}

/// sup_λ λ·λ_γ{|H| > λ}^{1/p}.
pub fn weak_norm_over_lambda_gamma(h: &HalfSpaceField, p: f64, gamma: f64) -> f64 {
    h.value_set(gamma).weak_norm(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSample {
    pub lambda: f64,
    pub measure: f64,
    pub scaled: f64,
    /// The super-level set reaches the mesh boundary with more than 10⁻³ of its mass.
    pub truncated: bool,
}

/// λ ↦ (λ_γ{|H| > λ}, λ^p·measure) on the given levels.
pub fn level_sweep(h: &HalfSpaceField, p: f64, gamma: f64, lambdas: &[f64]) -> Vec<LevelSample> {
    let set = h.value_set(gamma);
    lambdas
        .iter()
        .map(|&lambda| {
            let measure = set.distribution(lambda);
            let edge = h.boundary_mass_above(lambda, gamma);
            LevelSample { lambda, measure, scaled: lambda.powf(p) * measure, truncated: edge > 1e-3 * measure }
        })
        .collect()
}

pub fn write_level_csv(samples: &[LevelSample], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["lambda", "measure", "lambda^p_times_measure"])?;
    for s in samples {
        w.write_record([s.lambda.to_string(), s.measure.to_string(), s.scaled.to_string()])?;
    }
    w.flush().map_err(Error::Io)
}

/// Function whose extension is computed: exact BV pieces or a general field.
#[derive(Debug, Clone)]
pub enum Datum {
    Bv(BVFunction),
    Field(AnalyticField),
}

impl Datum {
    fn eval(&self, y: f64) -> Complex64 {
        match self {
            Datum::Bv(f) => Complex64::new(f.eval(y), 0.0),
            Datum::Field(f) => f.eval1(y),
        }
    }

    fn knots(&self) -> &[f64] {
        match self {
            Datum::Bv(f) => &f.knots,
            Datum::Field(_) => &[],
        }
    }
}

/// Integrates g(s)·(f(y(s)) − f(x)) over [lo, hi] for two weights at once, with breakpoints
/// where y(s) hits a knot.
#[allow(clippy::too_many_arguments)]
fn kernel_integral2<W, Y>(
    f: &Datum,
    x: f64,
    lo: f64,
    hi: f64,
    mut breaks: Vec<f64>,
    panel: f64,
    order: usize,
    weight: W,
    y_of: Y,
) -> [Complex64; 2]
where
    W: Fn(f64) -> [f64; 2],
    Y: Fn(f64) -> f64,
{
    breaks.retain(|b| *b > lo && *b < hi);
    breaks.push(lo);
    breaks.push(hi);
    breaks.sort_by(f64::total_cmp);
    let fx = f.eval(x);
    let mut acc = [Complex64::new(0.0, 0.0); 2];
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let panels = ((b - a) / panel).ceil().max(1.0) as usize;
        let step = (b - a) / panels as f64;
        for i in 0..panels {
            let pa = a + i as f64 * step;
            for (s, ws) in mapped_rule(order, pa, pa + step) {
                let diff = f.eval(y_of(s)) - fx;
                let [w0, w1] = weight(s);
                acc[0] += diff * (ws * w0);
                acc[1] += diff * (ws * w1);
            }
        }
    }
    acc
}

#[allow(clippy::too_many_arguments)]
fn kernel_integral<W, Y>(f: &Datum, x: f64, lo: f64, hi: f64, breaks: Vec<f64>, panel: f64, order: usize, weight: W, y_of: Y) -> Complex64
where
    W: Fn(f64) -> f64,
    Y: Fn(f64) -> f64,
{
    kernel_integral2(f, x, lo, hi, breaks, panel, order, |s| [weight(s), 0.0], y_of)[0]
}

/// Quadrature resolution for the extension integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtensionQuadrature {
    pub order: usize,
    /// Panel width in the angular (Poisson) or Gaussian (heat) variable.
    pub panel: f64,
    /// Field scale: for analytic data, panels in y are at most this wide.
    pub data_scale: f64,
}

impl Default for ExtensionQuadrature {
    fn default() -> Self {
        Self { order: 10, panel: 0.25, data_scale: f64::INFINITY }
    }
}

fn poisson_gradient_at(f: &Datum, x: f64, t: f64, q: &ExtensionQuadrature) -> [Complex64; 2] {
    // y = x + t·tanθ:  ∂_x𝒫f = (1/πt)∫ sin2θ (f(y) − f(x)) dθ,  ∂_t𝒫f = −(1/πt)∫ cos2θ (f(y) − f(x)) dθ
    let half = 0.5 * PI;
    let panel = q.panel.min((q.data_scale / t).atan().max(1e-3));
    let breaks: Vec<f64> = f.knots().iter().map(|k| ((k - x) / t).atan()).collect();
    let [gx, gt] = kernel_integral2(
        f,
        x,
        -half,
        half,
        breaks,
        panel,
        q.order,
        |th| [(2.0 * th).sin(), -(2.0 * th).cos()],
        |th| x + t * th.tan(),
    );
    [gx / (PI * t), gt / (PI * t)]
}

fn heat_gradient_at(f: &Datum, x: f64, t: f64, q: &ExtensionQuadrature) -> [Complex64; 2] {
    // y = x + 2√t·v:  ∂_x u = (1/√(πt))∫ v e^{−v²}(f(y) − f(x)) dv,
    //                 ∂_t u = (1/(t√π))∫ (v² − 1/2) e^{−v²}(f(y) − f(x)) dv
    let st = t.sqrt();
    let vmax = 8.5;
    let panel = (2.0 * q.panel).min(q.data_scale / (2.0 * st)).max(1e-3);
    let breaks: Vec<f64> = f.knots().iter().map(|k| (k - x) / (2.0 * st)).collect();
    let [gx, gt] = kernel_integral2(
        f,
        x,
        -vmax,
        vmax,
        breaks,
        panel,
        q.order,
        |v| {
            let e = (-v * v).exp();
            [v * e, (v * v - 0.5) * e]
        },
        |v| x + 2.0 * st * v,
    );
    [gx / (PI * t).sqrt(), gt / (t * PI.sqrt())]
}

fn check_finite(values: &[Complex64], what: &str) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NotConverged(format!("{what}: non-finite value at node {i}")));
    }
    Ok(())
}

fn build_field<F>(mesh: &HalfSpaceMesh, label: &str, node: F) -> Result<HalfSpaceField>
where
    F: Fn(f64, f64) -> [Complex64; 2] + Sync,
{
    let nx = mesh.xs.len();
    let rows: Vec<Vec<Complex64>> = mesh
        .ts
        .par_iter()
        .map(|&t| {
            let mut row = Vec::with_capacity(2 * nx);
            for &x in &mesh.xs {
                row.extend(node(x, t));
            }
            row
        })
        .collect();
    let values: Vec<Complex64> = rows.into_iter().flatten().collect();
    check_finite(&values, label)?;
    Ok(HalfSpaceField { mesh: mesh.clone(), components: 2, values, label: label.to_string() })
}

/// (∂_x𝒫f, ∂_t𝒫f) for the Poisson extension.
pub fn poisson_gradient(f: &Datum, mesh: &HalfSpaceMesh, q: &ExtensionQuadrature) -> Result<HalfSpaceField> {
    build_field(mesh, "grad P f", |x, t| poisson_gradient_at(f, x, t, q))
}

/// (ℋ_x^b, ℋ_t^b) = (t^{1/2−b}∂_x u, t^{1−b}∂_t u) for u = e^{tΔ}f.
pub fn heat_fields(f: &Datum, mesh: &HalfSpaceMesh, b: f64, q: &ExtensionQuadrature) -> Result<HalfSpaceField> {
    build_field(mesh, "H^b", |x, t| {
        let [gx, gt] = heat_gradient_at(f, x, t, q);
        [gx * t.powf(0.5 - b), gt * t.powf(1.0 - b)]
    })
}

/// 𝒫f(x, t) by direct quadrature against the Poisson kernel (y = x + t·tanθ).
pub fn poisson_value(f: &Datum, x: f64, t: f64, q: &ExtensionQuadrature) -> Complex64 {
    let half = 0.5 * PI;
    let panel = q.panel.min((q.data_scale / t).atan().max(1e-3));
    let breaks: Vec<f64> = f.knots().iter().map(|k| ((k - x) / t).atan()).collect();
    f.eval(x) + kernel_integral(f, x, -half, half, breaks, panel, q.order, |_| 1.0 / PI, |th| x + t * th.tan())
}

/// u(x, t) = e^{tΔ}f(x) by direct quadrature against the Gaussian kernel.
pub fn heat_value(f: &Datum, x: f64, t: f64, q: &ExtensionQuadrature) -> Complex64 {
    let st = t.sqrt();
    let panel = q.panel.min(q.data_scale / (2.0 * st)).max(1e-3);
    let breaks: Vec<f64> = f.knots().iter().map(|k| (k - x) / (2.0 * st)).collect();
    f.eval(x)
        + kernel_integral(f, x, -8.5, 8.5, breaks, panel, q.order, |v| (-v * v).exp() / PI.sqrt(), |v| {
            x + 2.0 * st * v
        })
}

/// Mean-zero kernels ψ with ψ_t∗f equal to a derivative of an extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelTag {
    /// ψ̂ = |ξ|e^{−|ξ|}; ψ_t∗f = −t∂_t𝒫f.
    Poisson1,
    /// ψ̂ = iξe^{−|ξ|}; ψ_t∗f = t∂_x𝒫f.
    Poisson2,
    /// ψ̂ = −|ξ|²e^{−|ξ|²}; ψ_t∗f = t²(∂_τ u)(·, t²).
    Heat3,
    /// ψ̂ = iξe^{−|ξ|²}; ψ_t∗f = t(∂_x u)(·, t²).
    Heat4,
}

impl KernelTag {
    pub const ALL: [KernelTag; 4] = [KernelTag::Poisson1, KernelTag::Poisson2, KernelTag::Heat3, KernelTag::Heat4];

    pub fn eval(self, x: f64) -> f64 {
        match self {
            KernelTag::Poisson1 => (1.0 - x * x) / (PI * (1.0 + x * x).powi(2)),
            KernelTag::Poisson2 => -2.0 * x / (PI * (1.0 + x * x).powi(2)),
            KernelTag::Heat3 => {
                let g = (-x * x / 4.0).exp() / (2.0 * PI.sqrt());
                g * (x * x / 4.0 - 0.5)
            }
            KernelTag::Heat4 => {
                let g = (-x * x / 4.0).exp() / (2.0 * PI.sqrt());
                -0.5 * x * g
            }
        }
    }

    fn is_heat(self) -> bool {
        matches!(self, KernelTag::Heat3 | KernelTag::Heat4)
    }

    /// ∫ψ over ℝ by quadrature (w = tanθ for the algebraic tails).
    pub fn integral(self) -> f64 {
        if self.is_heat() {
            crate::quadrature::integrate(|x| self.eval(x), -40.0, 40.0, 80, 16)
        } else {
            let h = 0.5 * PI;
            crate::quadrature::integrate(|th| self.eval(th.tan()) / th.cos().powi(2), -h, h, 64, 16)
        }
    }
}

/// ψ_t∗f(x) = ∫ψ(w)(f(x − tw) − f(x)) dw in the variable w = sinh(s) (Poisson tags) or w (heat tags).
fn kernel_convolution(f: &Datum, tag: KernelTag, x: f64, t: f64, q: &ExtensionQuadrature) -> Complex64 {
    if tag.is_heat() {
        let breaks: Vec<f64> = f.knots().iter().map(|k| (x - k) / t).collect();
        let panel = (2.0 * q.panel).min(q.data_scale / t).max(1e-3);
        kernel_integral(f, x, -17.0, 17.0, breaks, panel, q.order, |w| tag.eval(w), |w| x - t * w)
    } else {
        let u = 1e9f64.asinh();
        let breaks: Vec<f64> = f.knots().iter().map(|k| ((x - k) / t).asinh()).collect();
        let panel = q.panel.min((q.data_scale / t).asinh().max(1e-3));
        kernel_integral(f, x, -u, u, breaks, panel, q.order, |s| tag.eval(s.sinh()) * s.cosh(), |s| {
            x - t * s.sinh()
        })
    }
}

/// 𝒦^b f(x, t) = t^{−b} ψ_t∗f(x) on the mesh (one component).
pub fn smooth_kernel_field(
    f: &Datum,
    tag: KernelTag,
    b: f64,
    mesh: &HalfSpaceMesh,
    q: &ExtensionQuadrature,
) -> Result<HalfSpaceField> {
    let nx = mesh.xs.len();
    let rows: Vec<Vec<Complex64>> = mesh
        .ts
        .par_iter()
        .map(|&t| mesh.xs.iter().map(|&x| kernel_convolution(f, tag, x, t, q) * t.powf(-b)).collect())
        .collect();
    let values: Vec<Complex64> = rows.into_iter().flatten().collect();
    check_finite(&values, "kernel field")?;
    debug_assert_eq!(values.len(), nx * mesh.ts.len());
    Ok(HalfSpaceField { mesh: mesh.clone(), components: 1, values, label: format!("K^b {tag:?}") })
}

/// Mean of λ^p·measure over log-spaced levels in each decade [10^a, 10^{a+1}].
pub fn decade_means(h: &HalfSpaceField, p: f64, gamma: f64, decades: &[i32], per_decade: usize) -> Vec<(i32, f64, bool)> {
    decades
        .iter()
        .map(|&a| {
            let lambdas: Vec<f64> =
                (0..per_decade).map(|i| 10f64.powf(a as f64 + i as f64 / per_decade as f64)).collect();
            let sweep = level_sweep(h, p, gamma, &lambdas);
            let mean = sweep.iter().map(|s| s.scaled).sum::<f64>() / per_decade as f64;
            (a, mean, sweep.iter().any(|s| s.truncated))
        })
        .collect()
}

/// Writes the field as CSV rows (x, t, |H|).
pub fn write_field_csv(h: &HalfSpaceField, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "x,t,magnitude")?;
    for (it, t) in h.mesh.ts.iter().enumerate() {
        for (ix, x) in h.mesh.xs.iter().enumerate() {
            writeln!(out, "{x},{t},{}", h.magnitude(ix, it))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian() -> Datum {
        Datum::Field(
            AnalyticField::new(1, 0, 1.0, |x: &[f64]| Complex64::new((-x[0] * x[0]).exp(), 0.0))
                .with_support(&[0.0], 7.0),
        )
    }

    fn smooth_q() -> ExtensionQuadrature {
        ExtensionQuadrature { order: 12, panel: 0.05, data_scale: 0.25 }
    }

    #[test]
    fn bv_representation() {
        let f = BVFunction::step(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, -1.0, 0.5]).unwrap();
        assert_eq!(f.total_variation(), 2.0 + 3.0 + 1.5);
        assert_eq!(f.v_infinity(), 1.5);
        assert_eq!(f.eval(1.5), -1.0);
        assert_eq!(f.eval(-3.0), 0.0);
        let g = BVFunction::piecewise_linear(vec![0.0, 1.0, 3.0], vec![0.0, 0.0, 2.0, 0.0], vec![2.0, -1.0]).unwrap();
        // ramp up to 2, jump 0, ramp down to 0, no jump
        assert!((g.total_variation() - 4.0).abs() < 1e-15);
        assert!((g.eval(0.5) - 1.0).abs() < 1e-15);
        assert!(BVFunction::step(vec![1.0, 0.0], vec![0.0; 3]).is_err());
        assert!(BVFunction::step(vec![0.0], vec![0.0]).is_err());
    }

    #[test]
    fn bv_exact_samples_match_lattice_samples() {
        let f = BVFunction::step(vec![0.0, 0.7, 1.5], vec![0.0, 1.0, -0.5, 0.0]).unwrap();
        let mut quad = bv_quadrature(&f, 6, 6);
        let exact = bv_difference_samples(&f, &quad, 1);
        quad.x_sampling = XSampling::Lattice { spacing: 1e-4 };
        let lattice = crate::differences::difference_samples(&f.to_field(), 1, &quad).unwrap();
        let params = LorentzParams::new(2.0, 2.0).unwrap();
        let a = exact.quasi_norm(1.0, 1.0, &params);
        let b = lattice.quasi_norm(1.0, 1.0, &params);
        assert!((a - b).abs() < 2e-3 * a, "{a} vs {b}");
    }

    #[test]
    fn bv_inequality_homogeneity_and_range() {
        let f = BVFunction::indicator(0.0, 1.0, 1.0).unwrap();
        let r1 = bv_inequality_check(&f, 2.0, 1.0).unwrap();
        let r2 = bv_inequality_check(&f.scaled(37.5), 2.0, 1.0).unwrap();
        assert!((r1.ratio - r2.ratio).abs() < 1e-10 * r1.ratio);
        assert!(r1.ratio.is_finite() && r1.ratio > 0.0);
        assert!(bv_inequality_check(&f, 2.0, -0.5).is_err());
        assert!(bv_inequality_check(&f, 2.0, -2.0).unwrap().ratio.is_finite());
    }

    #[test]
    fn constants_and_affine_data() {
        let mesh = HalfSpaceMesh::uniform(-1.0, 1.0, 5, 0.1, 1.0, 4);
        let konst = Datum::Field(AnalyticField::new(1, 0, 3.0, |_: &[f64]| Complex64::new(3.0, 0.0)));
        let q = ExtensionQuadrature::default();
        for field in [poisson_gradient(&konst, &mesh, &q).unwrap(), heat_fields(&konst, &mesh, 0.5, &q).unwrap()] {
            assert!(field.values.iter().all(|v| v.norm() == 0.0));
        }
        for tag in KernelTag::ALL {
            let h = smooth_kernel_field(&konst, tag, 0.5, &mesh, &q).unwrap();
            assert!(h.values.iter().all(|v| v.norm() == 0.0));
        }
        // affine data truncated to a wide window: ∂_x𝒫f ≈ 1, ∂_t𝒫f ≈ 0 near the origin
        let w = 1e6;
        let ramp = BVFunction::piecewise_linear(vec![-w, w], vec![-w, -w, w], vec![1.0]).unwrap();
        let g = poisson_gradient_at(&Datum::Bv(ramp), 0.1, 0.5, &q);
        assert!((g[0].re - 1.0).abs() < 1e-5, "{:?}", g);
        assert!(g[1].re.abs() < 1e-5, "{:?}", g);
    }

    #[test]
    fn kernels_have_mean_zero() {
        for tag in KernelTag::ALL {
            assert!(tag.integral().abs() < 1e-10, "{tag:?}: {}", tag.integral());
        }
    }

    #[test]
    fn step_extension_matches_arctangent_formula() {
        // 𝒫1_{[0,1]} = (arctan((1−x)/t) + arctan(x/t))/π
        let f = Datum::Bv(BVFunction::indicator(0.0, 1.0, 1.0).unwrap());
        let q = ExtensionQuadrature::default();
        for &(x, t) in &[(0.3, 0.01), (-0.2, 1e-6), (1.4, 3.0), (0.0001, 1e-5)] {
            let g = poisson_gradient_at(&f, x, t, &q);
            let dx = (-t / (t * t + (1.0 - x) * (1.0 - x)) + t / (t * t + x * x)) / PI;
            let dt = (-(1.0 - x) / (t * t + (1.0 - x) * (1.0 - x)) - x / (t * t + x * x)) / PI;
            assert!((g[0].re - dx).abs() < 1e-10 * dx.abs().max(1.0), "{x} {t}");
            assert!((g[1].re - dt).abs() < 1e-10 * dt.abs().max(1.0), "{x} {t}");
        }
    }

    #[test]
    fn gaussian_heat_closed_form() {
        // e^{tΔ}e^{−x²} = (1+4t)^{−1/2} e^{−x²/(1+4t)}
        let f = gaussian();
        let q = smooth_q();
        for &(x, t) in &[(0.0f64, 0.1f64), (0.7, 0.5), (-1.3, 2.0)] {
            let a: f64 = 1.0 + 4.0 * t;
            let u = (-x * x / a).exp() / a.sqrt();
            assert!((heat_value(&f, x, t, &q).re - u).abs() < 1e-10);
            let [gx, gt] = heat_gradient_at(&f, x, t, &q);
            assert!((gx.re - (-2.0 * x / a) * u).abs() < 1e-10);
            let ut = u * (-2.0 / a + 4.0 * x * x / (a * a));
            assert!((gt.re - ut).abs() < 1e-10);
        }
    }

    #[test]
    fn pde_residuals() {
        let f = gaussian();
        let q = smooth_q();
        let d = 1e-2;
        for &(x, t) in &[(0.2, 0.5), (-0.6, 1.0), (1.0, 2.0)] {
            let p = |x, t| poisson_value(&f, x, t, &q).re;
            let lap = (p(x + d, t) + p(x - d, t) + p(x, t + d) + p(x, t - d) - 4.0 * p(x, t)) / (d * d);
            let scale = ((p(x + d, t) - 2.0 * p(x, t) + p(x - d, t)) / (d * d)).abs().max(1e-2);
            assert!(lap.abs() < 1e-3 * scale, "harmonic residual {lap} at ({x},{t})");
            let u = |x, t| heat_value(&f, x, t, &q).re;
            let ut = (u(x, t + d) - u(x, t - d)) / (2.0 * d);
            let uxx = (u(x + d, t) - 2.0 * u(x, t) + u(x - d, t)) / (d * d);
            assert!((ut - uxx).abs() < 1e-3 * uxx.abs().max(ut.abs()).max(1e-2), "heat residual at ({x},{t})");
        }
    }

    #[test]
    fn kernel_fields_match_extension_derivatives() {
        let f = gaussian();
        let q = smooth_q();
        let mesh = HalfSpaceMesh::uniform(-2.0, 2.0, 9, 0.2, 2.0, 5);
        let b = 0.4;
        let grad = poisson_gradient(&f, &mesh, &q).unwrap();
        let k1 = smooth_kernel_field(&f, KernelTag::Poisson1, b, &mesh, &q).unwrap();
        let k2 = smooth_kernel_field(&f, KernelTag::Poisson2, b, &mesh, &q).unwrap();
        for (it, &t) in mesh.ts.iter().enumerate() {
            for ix in 0..mesh.xs.len() {
                let w = t.powf(1.0 - b);
                let dt = grad.get(ix, it, 1) * w;
                let dx = grad.get(ix, it, 0) * w;
                assert!((k1.get(ix, it, 0) + dt).norm() < 0.01 * dt.norm().max(1e-3));
                assert!((k2.get(ix, it, 0) - dx).norm() < 0.01 * dx.norm().max(1e-3));
            }
        }
        // heat tags in heat time τ = t²
        let k3 = smooth_kernel_field(&f, KernelTag::Heat3, 0.0, &mesh, &q).unwrap();
        let k4 = smooth_kernel_field(&f, KernelTag::Heat4, 0.0, &mesh, &q).unwrap();
        for (it, &t) in mesh.ts.iter().enumerate() {
            for (ix, &x) in mesh.xs.iter().enumerate() {
                let [gx, gt] = heat_gradient_at(&f, x, t * t, &q);
                assert!((k3.get(ix, it, 0) - gt * (t * t)).norm() < 1e-8);
                assert!((k4.get(ix, it, 0) - gx * t).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn weak_norm_hand_sum() {
        let mesh = HalfSpaceMesh {
            xs: vec![0.0, 1.0],
            dx: vec![1.0, 2.0],
            ts: vec![1.0, 4.0],
            dlog_t: vec![0.5, 0.5],
        };
        let vals = [3.0, 1.0, 2.0, 0.0];
        let h = HalfSpaceField {
            mesh,
            components: 1,
            values: vals.iter().map(|v| Complex64::new(*v, 0.0)).collect(),
            label: "synthetic".into(),
        };
        // γ = 1: node masses t·dlog_t·dx = [0.5, 1.0, 2.0, 4.0]
        let sweep = level_sweep(&h, 2.0, 1.0, &[0.5, 1.5, 2.5]);
        assert_eq!(sweep[0].measure, 0.5 + 1.0 + 2.0);
        assert_eq!(sweep[1].measure, 0.5 + 2.0);
        assert_eq!(sweep[2].measure, 0.5);
        let expect = [3.0 * 0.5f64.sqrt(), 2.0 * 2.5f64.sqrt(), 1.0 * 3.5f64.sqrt()]
            .into_iter()
            .fold(0.0, f64::max);
        assert!((weak_norm_over_lambda_gamma(&h, 2.0, 1.0) - expect).abs() < 1e-14);
        let zero = HalfSpaceField { values: vec![Complex64::new(0.0, 0.0); 4], ..h };
        assert_eq!(weak_norm_over_lambda_gamma(&zero, 2.0, 1.0), 0.0);
    }
}
