//! Difference-side quasi-norms ‖𝒬_{M,b} f‖_{L^{p,r}(ν_γ)} by quadrature over (x, h), and the
//! retraction operators R_b and A_{b,ε}.

use crate::besov_norms::{version_string, NormFamily, NormReport};
use crate::error::{invalid, Error, Result};
use crate::grid::{difference_coefficients, AnalyticField, Lattice, SampledFunction};
use crate::littlewood_paley::{decompose, LpFamily, Projection};
use crate::lorentz::{Exponent, LorentzParams, WeightedValueSet};
use crate::quadrature::mapped_rule;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// How x is sampled for each shift h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum XSampling {
    /// Lattice with the given spacing, restricted to the windows where Δ_h^M f can be nonzero.
    Lattice { spacing: f64 },
    /// Uniform random points in the bounding box of those windows, drawn from a counter-based stream.
    MonteCarlo { count: usize, seed: u64 },
}

/// Quadrature for ν_γ = dx dh/|h|^{d-γ} on dyadic h-shells 2^j ≤ |h| < 2^{j+1}.
///
/// The weight |h|^γ is applied when a parameter set is evaluated, so one quadrature serves
/// every γ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuGammaQuadrature {
    pub j_min: i32,
    pub j_max: i32,
    /// Gauss-Legendre nodes per shell in log|h|.
    pub radial_nodes: usize,
    /// Extra radial nodes per period of the carrier inside a shell, for shells below `oscillation_cutoff`.
    pub nodes_per_period: f64,
    pub max_radial_nodes: usize,
    /// Carrier frequency used to count periods (0 disables the extra nodes).
    pub carrier: f64,
    /// Shells with 2^j above this radius use `radial_nodes` only.
    pub oscillation_cutoff: f64,
    /// Equispaced directions on the half circle (d = 2).
    pub angles: usize,
    pub x_sampling: XSampling,
    /// Fixed x-window (center, radius) for fields without a support hint.
    pub x_window: Option<([f64; 2], f64)>,
}

/// Scale information used to size a default quadrature.
#[derive(Debug, Clone, Copy)]
pub struct MeshHints {
    pub support_radius: f64,
    pub carrier: f64,
    pub spread: f64,
    pub shells_below: i32,
    pub shells_above: i32,
}

impl NuGammaQuadrature {
    /// Default mesh sized from the support radius and frequency content of `f`.
    pub fn for_field(f: &AnalyticField, order: usize, shells_below: i32, shells_above: i32) -> Result<Self> {
        let radius = f.support_radius().ok_or_else(|| {
            Error::InvalidParameter("field needs a support radius hint for automatic meshing".into())
        })?;
        let carrier = f.frequency_scale().unwrap_or(8.0 / radius);
        let spread = f.spread().unwrap_or(carrier);
        Ok(Self::from_hints(
            f.dim(),
            order,
            &MeshHints { support_radius: radius, carrier, spread, shells_below, shells_above },
        ))
    }

    pub fn from_hints(dim: usize, order: usize, h: &MeshHints) -> Self {
        let lo = (1.0 / h.carrier).log2().floor() as i32;
        let hi = (2.0 * order as f64 * h.support_radius).log2().ceil() as i32;
        Self {
            j_min: lo - h.shells_below,
            j_max: hi + h.shells_above,
            radial_nodes: 4,
            nodes_per_period: 2.0,
            max_radial_nodes: 64,
            carrier: h.carrier,
            oscillation_cutoff: h.support_radius,
            angles: if dim == 2 { 16 } else { 1 },
            x_sampling: XSampling::Lattice { spacing: 2.0 * PI / (8.0 * h.spread) },
            x_window: None,
        }
    }

    /// Doubles the h-resolution and halves the x-spacing (or doubles the sample count).
    pub fn refined(&self) -> Self {
        let mut q = self.clone();
        q.radial_nodes *= 2;
        q.nodes_per_period *= 2.0;
        q.max_radial_nodes *= 2;
        q.angles = if q.angles > 1 { q.angles * 2 } else { 1 };
        q.x_sampling = match self.x_sampling {
            XSampling::Lattice { spacing } => XSampling::Lattice { spacing: 0.5 * spacing },
            XSampling::MonteCarlo { count, seed } => XSampling::MonteCarlo { count: 2 * count, seed },
        };
        q
    }

    fn nodes_in_shell(&self, j: i32) -> usize {
        let width = 2f64.powi(j);
        let mut n = self.radial_nodes;
        if self.carrier > 0.0 && width <= self.oscillation_cutoff {
            let periods = width * self.carrier / (2.0 * PI);
            n += (self.nodes_per_period * periods).ceil() as usize;
        }
        n.clamp(1, self.max_radial_nodes.max(self.radial_nodes))
    }

    /// Radial nodes (|h|, weight of d log|h|).
    pub fn radial_rule(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for j in self.j_min..=self.j_max {
            let n = self.nodes_in_shell(j);
            let a = j as f64 * std::f64::consts::LN_2;
            for (u, w) in mapped_rule(n, a, a + std::f64::consts::LN_2) {
                out.push((u.exp(), w));
            }
        }
        out
    }

    /// Shift vectors h with weights for dh/|h|^d; antipodal symmetry halves the directions.
    pub fn h_nodes(&self, dim: usize) -> Vec<HNode> {
        let radial = self.radial_rule();
        let mut out = Vec::new();
        if dim == 1 {
            for (rho, w) in radial {
                out.push(HNode { h: [rho, 0.0], abs: rho, weight: 2.0 * w });
            }
        } else {
            let n = self.angles.max(1);
            for (rho, w) in radial {
                for a in 0..n {
                    let theta = PI * (a as f64 + 0.5) / n as f64;
                    out.push(HNode {
                        h: [rho * theta.cos(), rho * theta.sin()],
                        abs: rho,
                        weight: 2.0 * w * PI / n as f64,
                    });
                }
            }
        }
        out
    }
}

/// One shift vector with its weight for the measure dh/|h|^d.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HNode {
    pub h: [f64; 2],
    pub abs: f64,
    pub weight: f64,
}

/// |Δ_h^M f(x)| at every quadrature node, independent of (b, γ, p, r).
#[derive(Debug, Clone)]
pub struct DifferenceSamples {
    pub order: usize,
    pub dim: usize,
    pub h_nodes: Vec<HNode>,
    /// Atoms of h-node i occupy `offsets[i]..offsets[i+1]`.
    pub offsets: Vec<usize>,
    pub mags: Vec<f64>,
    pub xmass: Vec<f64>,
    pub x_nodes: usize,
    pub window: f64,
}

impl DifferenceSamples {
    pub fn from_parts(order: usize, dim: usize, nodes: Vec<(HNode, Vec<(f64, f64)>)>) -> Self {
        let mut h_nodes = Vec::with_capacity(nodes.len());
        let mut offsets = vec![0];
        let mut mags = Vec::new();
        let mut xmass = Vec::new();
        let mut x_nodes = 0;
        for (h, atoms) in nodes {
            h_nodes.push(h);
            x_nodes = x_nodes.max(atoms.len());
            for (a, m) in atoms {
                mags.push(a);
                xmass.push(m);
            }
            offsets.push(mags.len());
        }
        Self { order, dim, h_nodes, offsets, mags, xmass, x_nodes, window: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.mags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mags.is_empty()
    }

    /// Pushforward of (x,h) ↦ |Δ_h^M f(x)|/|h|^b under ν_γ.
    pub fn value_set(&self, b: f64, gamma: f64) -> WeightedValueSet {
        let mut pairs = Vec::with_capacity(self.mags.len());
        for (i, h) in self.h_nodes.iter().enumerate() {
            let amp = h.abs.powf(-b);
            let wm = h.weight * h.abs.powf(gamma);
            for k in self.offsets[i]..self.offsets[i + 1] {
                let a = self.mags[k];
                if a > 0.0 {
                    pairs.push((a * amp, self.xmass[k] * wm));
                }
            }
        }
        WeightedValueSet::from_pairs_unchecked(pairs)
    }

    pub fn quasi_norm(&self, b: f64, gamma: f64, params: &LorentzParams) -> f64 {
        self.value_set(b, gamma).quasi_norm(params)
    }
}

fn merge_intervals(mut iv: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// x-points and masses for one shift h.
fn x_points(
    quad: &NuGammaQuadrature,
    dim: usize,
    center: [f64; 2],
    radius: f64,
    inflate: Option<(&[f64], usize)>,
    stream: u64,
) -> Vec<([f64; 2], f64)> {
    let mut out = Vec::new();
    match (dim, quad.x_sampling) {
        (1, XSampling::Lattice { spacing }) => {
            let windows = match inflate {
                Some((h, order)) => merge_intervals(
                    (0..=order)
                        .map(|j| {
                            let c = center[0] - j as f64 * h[0];
                            (c - radius, c + radius)
                        })
                        .collect(),
                ),
                None => vec![(center[0] - radius, center[0] + radius)],
            };
            // one global lattice c + (m + 1/2)Δ so windows never double count
            let mut last_m = i64::MIN;
            for (a, b) in windows {
                let m0 = ((a - center[0]) / spacing - 0.5).ceil() as i64;
                let m1 = ((b - center[0]) / spacing - 0.5).floor() as i64;
                for m in m0.max(last_m + 1)..=m1 {
                    out.push(([center[0] + (m as f64 + 0.5) * spacing, 0.0], spacing));
                }
                last_m = last_m.max(m1);
            }
        }
        _ => {
            // bounding box of the inflated windows
            let mut lo = [f64::INFINITY; 2];
            let mut hi = [f64::NEG_INFINITY; 2];
            let order = inflate.map(|x| x.1).unwrap_or(0);
            for j in 0..=order {
                for ax in 0..dim {
                    let shift = inflate.map(|(h, _)| j as f64 * h[ax]).unwrap_or(0.0);
                    lo[ax] = lo[ax].min(center[ax] - shift - radius);
                    hi[ax] = hi[ax].max(center[ax] - shift + radius);
                }
            }
            match quad.x_sampling {
                XSampling::Lattice { spacing } => {
                    let n0 = ((hi[0] - lo[0]) / spacing).ceil() as usize;
                    let n1 = if dim == 2 { ((hi[1] - lo[1]) / spacing).ceil() as usize } else { 1 };
                    let mass = spacing.powi(dim as i32);
                    for a in 0..n0 {
                        for b in 0..n1 {
                            let x0 = lo[0] + (a as f64 + 0.5) * spacing;
                            let x1 = if dim == 2 { lo[1] + (b as f64 + 0.5) * spacing } else { 0.0 };
                            out.push(([x0, x1], mass));
                        }
                    }
                }
                XSampling::MonteCarlo { count, seed } => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(stream);
                    let vol: f64 = (0..dim).map(|ax| hi[ax] - lo[ax]).product();
                    let mass = vol / count as f64;
                    for _ in 0..count {
                        let mut x = [0.0; 2];
                        for ax in 0..dim {
                            x[ax] = rng.gen_range(lo[ax]..hi[ax]);
                        }
                        out.push((x, mass));
                    }
                }
            }
        }
    }
    out
}

/// Evaluates |Δ_h^M f(x)| over the quadrature.
pub fn difference_samples(f: &AnalyticField, order: usize, quad: &NuGammaQuadrature) -> Result<DifferenceSamples> {
    if order == 0 {
        return invalid("difference order must be at least 1");
    }
    let dim = f.dim();
    let coeffs = difference_coefficients(order);
    let (center, radius, inflate) = match (f.support_radius(), quad.x_window) {
        (_, Some((c, r))) => (c, r, false),
        (Some(r), None) => {
            let c = f.center();
            ([c[0], c.get(1).copied().unwrap_or(0.0)], r, true)
        }
        (None, None) => return invalid("field has no support hint and the quadrature no x-window"),
    };
    let nodes = quad.h_nodes(dim);
    let results: Vec<Result<(HNode, Vec<(f64, f64)>)>> = nodes
        .par_iter()
        .enumerate()
        .map(|(idx, node)| {
            let pts = x_points(
                quad,
                dim,
                center,
                radius,
                if inflate { Some((&node.h[..dim], order)) } else { None },
                idx as u64,
            );
            let mut atoms = Vec::with_capacity(pts.len());
            for (x, m) in pts {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, c) in coeffs.iter().enumerate() {
                    let mut y = [0.0; 2];
                    for ax in 0..dim {
                        y[ax] = x[ax] + j as f64 * node.h[ax];
                    }
                    acc += c * f.eval(&y[..dim]);
                }
                let a = acc.norm();
                if !a.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "Δ_h^{order} {} at x = {:?}, h = {:?}",
                        f.label(),
                        &x[..dim],
                        &node.h[..dim]
                    )));
                }
                atoms.push((a, m));
            }
            Ok((*node, atoms))
        })
        .collect();
    let parts = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut out = DifferenceSamples::from_parts(order, dim, parts);
    out.window = radius;
    Ok(out)
}

fn difference_report(
    value: f64,
    family: NormFamily,
    f_label: &str,
    dim: usize,
    order: usize,
    b: f64,
    gamma: f64,
    params: &LorentzParams,
    quad: &NuGammaQuadrature,
    samples: &DifferenceSamples,
) -> NormReport {
    let seed = match quad.x_sampling {
        XSampling::MonteCarlo { seed, .. } => seed,
        _ => 0,
    };
    NormReport {
        value,
        family,
        s: b - gamma / params.p,
        p: params.p,
        r: params.r,
        q: params.r,
        gamma,
        n: samples.x_nodes,
        box_len: 2.0 * samples.window,
        kmin: quad.j_min,
        kmax: quad.j_max,
        seed,
        dim,
        homogeneous: true,
        label: f_label.to_string(),
        quadrature: serde_json::json!({
            "order": order,
            "b": b,
            "atoms": samples.len(),
            "h_nodes": samples.h_nodes.len(),
            "mesh": quad,
        }),
        version: version_string(),
    }
}

/// ‖𝒬_{M,b} f‖_{L^{p,r}(ν_γ)}.
pub fn difference_quasi_norm(
    f: &AnalyticField,
    order: usize,
    b: f64,
    gamma: f64,
    p: f64,
    r: Exponent,
    quad: &NuGammaQuadrature,
) -> Result<NormReport> {
    let params = LorentzParams::new(p, r)?;
    let s = b - gamma / p;
    if !(s > 0.0 && s < order as f64) {
        log::warn!("b - γ/p = {s} lies outside (0, {order}); the quasi-norm may be infinite");
    }
    let samples = difference_samples(f, order, quad)?;
    let value = samples.quasi_norm(b, gamma, &params);
    Ok(difference_report(value, NormFamily::Difference, f.label(), f.dim(), order, b, gamma, &params, quad, &samples))
}

/// [𝒟_b f]_{L^{p,∞}(ℝ^{2d})}, i.e. the ν_d weak quasi-norm of the first difference.
pub fn bsy_diagonal_norm(f: &AnalyticField, b: f64, p: f64, quad: &NuGammaQuadrature) -> Result<NormReport> {
    let mut rep = difference_quasi_norm(f, 1, b, f.dim() as f64, p, Exponent::INFINITY, quad)?;
    rep.family = NormFamily::BsyDiagonal;
    Ok(rep)
}

/// Banded data (x, k) ↦ F_k(x) on a common lattice.
pub type BandedData = Vec<(i32, SampledFunction)>;

/// P^b f as banded data: 2^{kb} L_k f.
pub fn pb_apply(f: &SampledFunction, b: f64, fam: &LpFamily) -> Result<BandedData> {
    let dec = decompose(f, fam, Projection::Standard)?;
    Ok(dec
        .bands
        .into_iter()
        .map(|(k, band)| {
            let c = Complex64::new(2f64.powf(k as f64 * b), 0.0);
            (k, band.scaled(c))
        })
        .collect())
}

/// R_b F = Σ_k 2^{-kb} L̃_k F_k.
pub fn rb_apply(data: &BandedData, b: f64, fam: &LpFamily) -> Result<SampledFunction> {
    let lattice: Lattice = match data.first() {
        Some((_, g)) => g.lattice,
        None => return invalid("empty banded data"),
    };
    let mut out = SampledFunction::zeros(lattice, "R_b F");
    for (k, band) in data {
        if *k < fam.k_min || *k > fam.k_max {
            return Err(Error::BandOutOfRange { k: *k, detail: "outside the family range".into() });
        }
        if band.lattice != lattice {
            return Err(Error::Shape("bands live on different lattices".into()));
        }
        let g = crate::littlewood_paley::lp_project(band, fam, Projection::Tilde, *k)?;
        let c = 2f64.powf(-(*k as f64) * b);
        for (o, v) in out.values.iter_mut().zip(&g.values) {
            *o += v * c;
        }
    }
    Ok(out)
}

/// Mollifier φ supported in (-1/2, 1/2) with ∫φ = 1, and ψ = -φ - yφ'.
#[derive(Debug, Clone, Copy)]
pub struct Mollifier {
    norm: f64,
}

impl Default for Mollifier {
    fn default() -> Self {
        let raw = |v: f64| {
            let s = 1.0 - 4.0 * v * v;
            if s <= 0.0 {
                0.0
            } else {
                (-1.0 / s).exp()
            }
        };
        let integral: f64 = crate::quadrature::integrate(raw, -0.5, 0.5, 64, 16);
        Self { norm: 1.0 / integral }
    }
}

impl Mollifier {
    pub fn phi(&self, v: f64) -> f64 {
        let s = 1.0 - 4.0 * v * v;
        if s <= 0.0 {
            0.0
        } else {
            self.norm * (-1.0 / s).exp()
        }
    }

    pub fn dphi(&self, v: f64) -> f64 {
        let s = 1.0 - 4.0 * v * v;
        if s <= 0.0 {
            0.0
        } else {
            self.phi(v) * (-8.0 * v) / (s * s)
        }
    }

    /// ψ(y) = -φ(y) - yφ'(y) in d = 1.
    pub fn psi(&self, v: f64) -> f64 {
        -self.phi(v) - v * self.dphi(v)
    }

    /// (φ_t ∗ f)(x) by direct quadrature.
    pub fn convolve(&self, f: &AnalyticField, t: f64, x: f64, panels: usize) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (v, w) in crate::quadrature::composite_rule(&[-0.5, 0.5], panels, 16) {
            acc += f.eval1(x - t * v) * (w * self.phi(v));
        }
        acc
    }
}

/// Quadrature for A_{b,ε}: log-uniform t, composite Gauss-Legendre in the scaled variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbEpsilonQuadrature {
    /// Length scale on which F varies in y.
    pub scale: f64,
    pub panels_per_scale: f64,
    pub min_panels: usize,
    pub t_panels_per_octave: usize,
    pub order: usize,
}

impl Default for AbEpsilonQuadrature {
    fn default() -> Self {
        Self { scale: 1.0, panels_per_scale: 2.0, min_panels: 4, t_panels_per_octave: 2, order: 10 }
    }
}

impl AbEpsilonQuadrature {
    pub fn refined(&self) -> Self {
        Self {
            panels_per_scale: 2.0 * self.panels_per_scale,
            min_panels: 2 * self.min_panels,
            t_panels_per_octave: 2 * self.t_panels_per_octave,
            ..*self
        }
    }
}

/// F(y, h) on ℝ × (ℝ∖{0}).
pub type PairField = Arc<dyn Fn(f64, f64) -> Complex64 + Send + Sync>;

/// 𝒬_{M,b} f: (x, h) ↦ Δ_h^M f(x)/|h|^b.
#[derive(Debug, Clone)]
pub struct DifferenceField {
    pub f: AnalyticField,
    pub order: usize,
    pub b: f64,
    coeffs: Vec<f64>,
}

impl DifferenceField {
    pub fn new(f: AnalyticField, order: usize, b: f64) -> Result<Self> {
        if order == 0 {
            return invalid("difference order must be at least 1");
        }
        Ok(Self { f, order, b, coeffs: difference_coefficients(order) })
    }

    pub fn eval(&self, x: &[f64], h: &[f64]) -> Complex64 {
        let d = self.f.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        let mut y = [0.0; 2];
        for (j, c) in self.coeffs.iter().enumerate() {
            for ax in 0..d {
                y[ax] = x[ax] + j as f64 * h[ax];
            }
            acc += c * self.f.eval(&y[..d]);
        }
        let habs = h[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
        acc / habs.powf(self.b)
    }
}

/// 𝒬_{1,b} f as a pair field (d = 1).
pub fn q_field(f: &AnalyticField, b: f64) -> PairField {
    let q = DifferenceField::new(f.clone(), 1, b).expect("order 1 is valid");
    Arc::new(move |y: f64, h: f64| q.eval(&[y], &[h]))
}

fn ab_epsilon_eval(
    field: &PairField,
    b: f64,
    eps: f64,
    moll: &Mollifier,
    q: &AbEpsilonQuadrature,
    x: f64,
) -> Complex64 {
    let lo = eps.ln();
    let hi = -lo;
    let octaves = ((hi - lo) / std::f64::consts::LN_2).ceil().max(1.0) as usize;
    let t_rule = crate::quadrature::composite_rule(&[lo, hi], octaves * q.t_panels_per_octave, q.order);
    let mut total = Complex64::new(0.0, 0.0);
    for (u_t, w_t) in t_rule {
        let t = u_t.exp();
        let panels = ((q.panels_per_scale * t / q.scale).ceil() as usize).max(q.min_panels);
        // distinct orders keep u ≠ v at every node pair, so h ≠ 0
        let u_rule = crate::quadrature::composite_rule(&[-0.5, 0.5], panels, q.order + 1);
        let v_rule = crate::quadrature::composite_rule(&[-0.5, 0.5], panels, q.order);
        let mut inner = Complex64::new(0.0, 0.0);
        for &(u, wu) in &u_rule {
            let pu = moll.psi(u);
            if pu == 0.0 {
                continue;
            }
            let y = x - t * u;
            let mut acc = Complex64::new(0.0, 0.0);
            for &(v, wv) in &v_rule {
                let pv = moll.phi(v);
                if pv == 0.0 {
                    continue;
                }
                let h = t * (u - v);
                acc += field(y, h) * (h.abs().powf(b) * pv * wv);
            }
            inner += acc * (pu * wu);
        }
        total += inner * w_t;
    }
    total
}

/// A_{b,ε}F as an analytic field (d = 1).
pub fn a_b_epsilon_apply(
    field: PairField,
    b: f64,
    eps: f64,
    moll: Mollifier,
    q: AbEpsilonQuadrature,
) -> Result<AnalyticField> {
    if !(eps > 0.0 && eps < 1.0) {
        return invalid(format!("epsilon must lie in (0, 1), got {eps}"));
    }
    Ok(AnalyticField::new(1, 0, f64::INFINITY, move |x: &[f64]| {
        ab_epsilon_eval(&field, b, eps, &moll, &q, x[0])
    })
    .with_label(format!("A_(b={b},eps={eps})")))
}

/// Evaluates A_{b,ε}F(x) and flags the mesh when refinement moves the value by more than 1%
/// of `reference` (for instance ‖f‖_∞).
pub fn a_b_epsilon_checked(
    field: &PairField,
    b: f64,
    eps: f64,
    moll: &Mollifier,
    q: &AbEpsilonQuadrature,
    x: f64,
    reference: f64,
) -> Result<Complex64> {
    let coarse = ab_epsilon_eval(field, b, eps, moll, q, x);
    let fine = ab_epsilon_eval(field, b, eps, moll, &q.refined(), x);
    if (coarse - fine).norm() > 0.01 * reference.max(fine.norm()) {
        return Err(Error::NotConverged(format!(
            "A_(b,eps) at x = {x}: refinement moved the value from {coarse} to {fine}"
        )));
    }
    Ok(fine)
}
