//! Experiment plans, parameter sweeps and the acceptance checks.

pub mod acceptance;

use crate::besov_norms::{
    besov_lorentz_from_bands, script_b_from_bands, tl_lorentz_from_bands, version_string, BesovParams,
};
use crate::counterexamples::{build_log_example, virtual_norm, BumpProfile, LogVariant, VirtualFamily};
use crate::differences::{difference_samples, NuGammaQuadrature};
use crate::error::{invalid, Error, Result};
use crate::grid::{dilate_renormalized, AnalyticField, Lattice, SampledFunction};
use crate::littlewood_paley::{build_phi, BandMagnitudes, LpFamily, Projection};
use crate::lorentz::{Exponent, LorentzParams};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Least-squares slope of log2 y against log2 x; returns (slope, standard error).
pub fn slope_fit(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.log2(), y.log2())).collect();
    if pts.len() < 2 {
        return invalid("a slope fit needs at least two points");
    }
    if pts.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return invalid("slope fit needs positive finite data");
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return invalid("slope fit needs distinct abscissae");
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let se = if pts.len() > 2 {
        let rss: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok((slope, se))
}

/// Secondary index in a plan; `p` ties it to the integrability index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RChoice {
    SameAsP,
    Value(Exponent),
}

impl RChoice {
    pub fn resolve(self, p: f64) -> Exponent {
        match self {
            RChoice::SameAsP => Exponent::from(p),
            RChoice::Value(e) => e,
        }
    }
}

impl Serialize for RChoice {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RChoice::SameAsP => s.serialize_str("p"),
            RChoice::Value(e) => s.serialize_str(&e.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for RChoice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Exponent::new(v).map(RChoice::Value).map_err(serde::de::Error::custom),
            Raw::Str(s) if s == "p" => Ok(RChoice::SameAsP),
            Raw::Str(s) => s.parse::<Exponent>().map(RChoice::Value).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterGrid {
    #[serde(default = "default_orders")]
    pub orders: Vec<usize>,
    pub s: Vec<f64>,
    pub p: Vec<f64>,
    pub r: Vec<RChoice>,
    pub gamma: Vec<f64>,
}

fn default_orders() -> Vec<usize> {
    vec![1]
}

/// One point of a parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Combo {
    pub order: usize,
    pub s: f64,
    pub p: f64,
    pub r: Exponent,
    pub gamma: f64,
}

impl Combo {
    pub fn b(&self) -> f64 {
        self.s + self.gamma / self.p
    }
}

impl ParameterGrid {
    /// All combinations in plan order (order, s, p, r, γ), with duplicate r values dropped.
    pub fn combos(&self) -> Vec<Combo> {
        let mut out = Vec::new();
        for &order in &self.orders {
            for &s in &self.s {
                for &p in &self.p {
                    let mut rs: Vec<Exponent> = Vec::new();
                    for r in &self.r {
                        let e = r.resolve(p);
                        if !rs.contains(&e) {
                            rs.push(e);
                        }
                    }
                    for &r in &rs {
                        for &gamma in &self.gamma {
                            out.push(Combo { order, s, p, r, gamma });
                        }
                    }
                }
            }
        }
        out
    }
}

/// Bump profiles of the standard family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// e^{ix} e^{−x²/288}.
    GaussianCarrier,
    /// cos(1.5x) e^{−x²/128}.
    CosineGaussian,
}

impl Profile {
    pub fn field(self) -> AnalyticField {
        match self {
            Profile::GaussianCarrier => {
                let w: f64 = 12.0;
                AnalyticField::new(1, 0, 1.0, move |x: &[f64]| {
                    Complex64::from_polar((-0.5 * x[0] * x[0] / (w * w)).exp(), x[0])
                })
                .with_support(&[0.0], 7.43 * w)
                .with_frequency_scale(1.75)
                .with_spread(1.5)
                .with_label("gaussian_carrier")
            }
            Profile::CosineGaussian => {
                let w: f64 = 8.0;
                AnalyticField::new(1, 0, 1.0, move |x: &[f64]| {
                    Complex64::new((1.5 * x[0]).cos() * (-0.5 * x[0] * x[0] / (w * w)).exp(), 0.0)
                })
                .with_support(&[0.0], 7.43 * w)
                .with_frequency_scale(2.6)
                .with_spread(5.2)
                .with_label("cosine_gaussian")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    Plain,
    /// Shift by a fraction of the box length.
    Translated { fraction: f64 },
    /// Multiplication by e^{iωx}.
    Modulated { omega: f64 },
}

impl Variant {
    fn tag(&self) -> String {
        match self {
            Variant::Plain => "plain".into(),
            Variant::Translated { fraction } => format!("shift{fraction}L"),
            Variant::Modulated { omega } => format!("mod{omega}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub profiles: Vec<Profile>,
    pub dilations: Vec<i32>,
    pub variants: Vec<Variant>,
    /// Lattice of the undilated members; dilation by 2^n shrinks the box by 2^{−n}.
    pub base_box: f64,
    pub base_n: usize,
    pub k_min: i32,
    pub k_max: i32,
}

impl Default for FamilySpec {
    fn default() -> Self {
        Self {
            profiles: vec![Profile::GaussianCarrier, Profile::CosineGaussian],
            dilations: (-2..=2).collect(),
            variants: vec![Variant::Plain, Variant::Translated { fraction: 0.3 }, Variant::Modulated { omega: 8.0 }],
            base_box: 256.0,
            base_n: 2048,
            k_min: -2,
            k_max: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub shells_above: i32,
    /// Shells below the carrier scale for M = 1, 2, …; the last entry covers higher orders.
    pub shells_below: Vec<i32>,
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self { shells_above: 24, shells_below: vec![24, 10] }
    }
}

impl MeshSpec {
    pub fn below(&self, order: usize) -> i32 {
        let i = (order.max(1) - 1).min(self.shells_below.len().saturating_sub(1));
        self.shells_below.get(i).copied().unwrap_or(24)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Equivalence,
    Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub experiment: ExperimentKind,
    pub grid: ParameterGrid,
    #[serde(default)]
    pub family: FamilySpec,
    #[serde(default)]
    pub mesh: MeshSpec,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_tolerance() -> f64 {
    0.05
}

impl ExperimentPlan {
    /// Difference against Fourier quasi-norms over the standard family.
    pub fn standard_equivalence() -> Self {
        Self {
            experiment: ExperimentKind::Equivalence,
            grid: ParameterGrid {
                orders: vec![1, 2],
                s: vec![0.3, 0.5, 0.7],
                p: vec![1.5, 2.0, 3.0],
                r: vec![RChoice::Value(Exponent::from(1.0)), RChoice::SameAsP, RChoice::Value(Exponent::INFINITY)],
                gamma: vec![-2.0, 0.5, 1.0],
            },
            family: FamilySpec::default(),
            mesh: MeshSpec::default(),
            seeds: vec![0],
            tolerance: 0.05,
            output: None,
        }
    }

    /// Embedding directions over the standard family.
    pub fn standard_embedding() -> Self {
        Self {
            experiment: ExperimentKind::Embedding,
            grid: ParameterGrid {
                orders: vec![1],
                s: vec![0.3, 0.5, 0.7],
                p: vec![1.5, 2.0, 3.0],
                r: vec![
                    RChoice::Value(Exponent::from(1.0)),
                    RChoice::Value(Exponent::from(2.0)),
                    RChoice::SameAsP,
                    RChoice::Value(Exponent::from(4.0)),
                    RChoice::Value(Exponent::INFINITY),
                ],
                gamma: vec![-2.0, 0.5, 1.0],
            },
            family: FamilySpec::default(),
            mesh: MeshSpec::default(),
            seeds: vec![0],
            tolerance: 0.05,
            output: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let plan: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.orders.is_empty() || g.s.is_empty() || g.p.is_empty() || g.r.is_empty() || g.gamma.is_empty() {
            return invalid("every parameter list of the grid must be nonempty");
        }
        let f = &self.family;
        if f.profiles.is_empty() || f.dilations.is_empty() || f.variants.is_empty() {
            return invalid("the function family must be nonempty");
        }
        if f.k_min > f.k_max || f.base_n < 16 || !(f.base_box > 0.0) {
            return invalid("family lattice or band range is degenerate");
        }
        if !(self.tolerance >= 0.0) {
            return invalid("tolerance must be nonnegative");
        }
        for c in g.combos() {
            LorentzParams::new(c.p, c.r)?;
            if !c.s.is_finite() || !c.gamma.is_finite() {
                return invalid("s and γ must be finite");
            }
            match self.experiment {
                ExperimentKind::Equivalence => {
                    if c.order == 0 || !(c.s > 0.0 && c.s < c.order as f64) {
                        return invalid(format!("s = {} must lie in (0, M) for M = {}", c.s, c.order));
                    }
                }
                ExperimentKind::Embedding => {
                    if c.gamma == 0.0 {
                        return invalid("γ = 0 is covered by the witness sweep, not by the embedding grid");
                    }
                }
            }
        }
        Ok(())
    }
}

/// One function of the standard family with its lattice and band range.
#[derive(Debug, Clone)]
pub struct StandardMember {
    pub label: String,
    pub profile: Profile,
    pub dilation: i32,
    pub variant: Variant,
    pub field: AnalyticField,
    pub sampled: SampledFunction,
    pub bands: LpFamily,
}

impl StandardMember {
    /// Undilated and untranslated.
    pub fn is_base(&self) -> bool {
        self.dilation == 0 && !matches!(self.variant, Variant::Translated { .. })
    }
}

/// Samples Σ_{m∈{−1,0,1}} f(x + mL), the periodization of a field supported near the box.
pub fn sample_periodized(field: &AnalyticField, lattice: Lattice) -> Result<SampledFunction> {
    let l = lattice.box_len;
    SampledFunction::from_fn(lattice, field.label().to_string(), |x: &[f64]| {
        (-1..=1).map(|m| field.eval1(x[0] + m as f64 * l)).sum()
    })
}

pub fn standard_family(spec: &FamilySpec) -> Result<Vec<StandardMember>> {
    let mut out = Vec::new();
    for &profile in &spec.profiles {
        for &n in &spec.dilations {
            for &variant in &spec.variants {
                let base = profile.field();
                let v = match variant {
                    Variant::Plain => base,
                    Variant::Translated { fraction } => base.translated(&[fraction * spec.base_box]),
                    Variant::Modulated { omega } => base.modulated(&[omega]),
                };
                let label = format!("{}[{}]x2^{}", profile.field().label(), variant.tag(), n);
                let field = dilate_renormalized(&v, n, 1.0, 1.0).with_label(label.clone());
                let lattice = Lattice::new(1, spec.base_n, spec.base_box * 2f64.powi(-n))?;
                let sampled = sample_periodized(&field, lattice)?;
                let bands = build_phi(spec.k_min + n, spec.k_max + n)?;
                out.push(StandardMember { label, profile, dilation: n, variant, field, sampled, bands });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketRow {
    #[serde(flatten)]
    pub combo: Combo,
    pub c1: f64,
    pub c2: f64,
    pub dynamic_range: f64,
    pub c1_refined: f64,
    pub c2_refined: f64,
    /// Largest relative change of c₁ or c₂ under mesh doubling.
    pub mesh_drift: f64,
    /// Largest relative change of a member's ratio against its undilated counterpart.
    pub dilation_drift: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BracketTable {
    pub plan: ExperimentPlan,
    pub members: Vec<String>,
    pub rows: Vec<BracketRow>,
    /// ratios[member][combo] on the base mesh.
    pub ratios: Vec<Vec<f64>>,
    pub version: String,
}

impl BracketTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "M", "s", "p", "r", "gamma", "c1", "c2", "dynamic_range", "c1_refined", "c2_refined", "mesh_drift",
            "dilation_drift",
        ])?;
        for r in &self.rows {
            let c = &r.combo;
            w.write_record([
                c.order.to_string(),
                c.s.to_string(),
                c.p.to_string(),
                c.r.to_string(),
                c.gamma.to_string(),
                r.c1.to_string(),
                r.c2.to_string(),
                r.dynamic_range.to_string(),
                r.c1_refined.to_string(),
                r.c2_refined.to_string(),
                r.mesh_drift.to_string(),
                r.dilation_drift.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Difference norms of one member for every combo of the grid: [base mesh, refined mesh].
fn member_difference_norms(m: &StandardMember, combos: &[Combo], mesh: &MeshSpec) -> Result<[Vec<f64>; 2]> {
    let mut out = [vec![f64::NAN; combos.len()], vec![f64::NAN; combos.len()]];
    let mut orders: Vec<usize> = combos.iter().map(|c| c.order).collect();
    orders.dedup();
    for order in orders {
        let quad = NuGammaQuadrature::for_field(&m.field, order, mesh.below(order), mesh.shells_above)?;
        for (slot, q) in [quad.clone(), quad.refined()].iter().enumerate() {
            let samples = difference_samples(&m.field, order, q)?;
            let mut done = vec![false; combos.len()];
            for i in 0..combos.len() {
                if done[i] || combos[i].order != order {
                    continue;
                }
                let c = combos[i];
                let set = samples.value_set(c.b(), c.gamma);
                for j in i..combos.len() {
                    let d = combos[j];
                    if d.order == order && d.s == c.s && d.p == c.p && d.gamma == c.gamma {
                        out[slot][j] = set.quasi_norm(&LorentzParams::new(d.p, d.r)?);
                        done[j] = true;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Empirical bracket [c₁, c₂] of difference over Fourier quasi-norms for every grid point.
pub fn equivalence_bracket(plan: &ExperimentPlan) -> Result<BracketTable> {
    if plan.experiment != ExperimentKind::Equivalence {
        return invalid("plan is not an equivalence experiment");
    }
    plan.validate()?;
    let members = standard_family(&plan.family)?;
    let combos = plan.grid.combos();
    let per_member: Vec<Result<[Vec<f64>; 2]>> = members
        .par_iter()
        .map(|m| {
            let bands = BandMagnitudes::from_function(&m.sampled, &m.bands, Projection::Standard)?;
            let diff = member_difference_norms(m, &combos, &plan.mesh)?;
            let mut ratios = [Vec::with_capacity(combos.len()), Vec::with_capacity(combos.len())];
            for (i, c) in combos.iter().enumerate() {
                let fourier = script_b_from_bands(&bands, &BesovParams::new(c.s, c.p, c.r, c.gamma)?);
                if !(fourier > 0.0) {
                    return invalid(format!("{} has vanishing Fourier norm", m.label));
                }
                for k in 0..2 {
                    ratios[k].push(diff[k][i] / fourier);
                }
            }
            Ok(ratios)
        })
        .collect();
    let mut base = Vec::new();
    let mut refined = Vec::new();
    for r in per_member {
        let [a, b] = r?;
        base.push(a);
        refined.push(b);
    }
    let reference: Vec<Option<usize>> = members
        .iter()
        .map(|m| members.iter().position(|o| o.dilation == 0 && o.profile == m.profile && o.variant == m.variant))
        .collect();
    let rows = combos
        .iter()
        .enumerate()
        .map(|(i, &combo)| {
            let col = |t: &Vec<Vec<f64>>| t.iter().map(|row| row[i]).collect::<Vec<f64>>();
            let (b, r) = (col(&base), col(&refined));
            let c1 = b.iter().copied().fold(f64::INFINITY, f64::min);
            let c2 = b.iter().copied().fold(0.0, f64::max);
            let c1r = r.iter().copied().fold(f64::INFINITY, f64::min);
            let c2r = r.iter().copied().fold(0.0, f64::max);
            let dilation_drift = reference
                .iter()
                .enumerate()
                .filter_map(|(m, re)| re.map(|j| (b[m] / b[j] - 1.0).abs()))
                .fold(0.0, f64::max);
            BracketRow {
                combo,
                c1,
                c2,
                dynamic_range: c2 / c1,
                c1_refined: c1r,
                c2_refined: c2r,
                mesh_drift: (c1r / c1 - 1.0).abs().max((c2r / c2 - 1.0).abs()),
                dilation_drift,
            }
        })
        .collect();
    Ok(BracketTable {
        plan: plan.clone(),
        members: members.iter().map(|m| m.label.clone()).collect(),
        rows,
        ratios: base,
        version: version_string(),
    })
}

/// The four inequality directions; each ratio is bounded by one constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Ḃ^s_r[L^{p,r}] ≲ 𝓑^s_p(γ,r) for p ≤ r.
    BesovByScriptB,
    /// 𝓑^s_p(γ,r) ≲ Ḃ^s_r[L^{p,r}] for r ≤ p.
    ScriptBByBesov,
    /// 𝓑^s_p(γ,r) ≲ Ḟ^s_{p,r} for p ≤ r.
    ScriptBByTl,
    /// Ḟ^s_{p,r} ≲ 𝓑^s_p(γ,r) for r ≤ p.
    TlByScriptB,
}

impl Direction {
    fn applies(self, p: f64, r: Exponent) -> bool {
        let r = r.value();
        match self {
            Direction::BesovByScriptB | Direction::ScriptBByTl => p <= r,
            Direction::ScriptBByBesov | Direction::TlByScriptB => r <= p,
        }
    }

    fn ratio(self, script_b: f64, besov: f64, tl: f64) -> f64 {
        match self {
            Direction::BesovByScriptB => besov / script_b,
            Direction::ScriptBByBesov => script_b / besov,
            Direction::ScriptBByTl => script_b / tl,
            Direction::TlByScriptB => tl / script_b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRow {
    pub direction: Direction,
    pub s: f64,
    pub p: f64,
    pub r: Exponent,
    pub gamma: f64,
    /// Calibrated on the base members.
    pub constant: f64,
    pub worst: f64,
    pub worst_member: String,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessRow {
    pub lemma: String,
    pub k_max: i32,
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViolationReport {
    pub plan: ExperimentPlan,
    pub rows: Vec<EmbeddingRow>,
    pub total_violations: usize,
    /// Largest relative spread among 𝓑(γ,p), Ḃ^s_p[L^{p,p}] and Ḟ^s_{p,p}.
    pub collapse_deviation: f64,
    pub witnesses: Vec<WitnessRow>,
    /// Both witness ratios increase strictly with the number of bands.
    pub witness_growth: bool,
    pub version: String,
}

impl ViolationReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["direction", "s", "p", "r", "gamma", "constant", "worst", "worst_member", "violations"])?;
        for r in &self.rows {
            w.write_record([
                serde_json::to_value(r.direction)?.as_str().unwrap_or_default().to_string(),
                r.s.to_string(),
                r.p.to_string(),
                r.r.to_string(),
                r.gamma.to_string(),
                r.constant.to_string(),
                r.worst.to_string(),
                r.worst_member.clone(),
                r.violations.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Ratios exhibiting the failure of the γ = 0 embeddings on the logarithmic witnesses.
pub fn gamma_zero_witnesses(s: f64, p: f64, k_values: &[i32]) -> Result<Vec<WitnessRow>> {
    let profile = Arc::new(BumpProfile::low_pass()?);
    let mut out = Vec::new();
    for &k in k_values {
        let d = build_log_example(s, p, LogVariant::Divergent, k, profile.clone())?;
        let num = virtual_norm(&d, VirtualFamily::ScriptB { beta: 0.0 }, s, p, Exponent::INFINITY)?.value;
        let den = virtual_norm(&d, VirtualFamily::TriebelLizorkin { q: Exponent::from(2.0 * p) }, s, p, Exponent::from(p))?
            .value;
        out.push(WitnessRow {
            lemma: "script_b(0,inf)/tl(p,2p)".into(),
            k_max: k,
            numerator: num,
            denominator: den,
            ratio: num / den,
        });
    }
    for &k in k_values {
        let d = build_log_example(s, p, LogVariant::Convergent, k, profile.clone())?;
        let num = virtual_norm(&d, VirtualFamily::TriebelLizorkin { q: Exponent::from(1.0) }, s, p, Exponent::from(p))?
            .value;
        let den = virtual_norm(&d, VirtualFamily::ScriptB { beta: 0.0 }, s, p, Exponent::from(1.0))?.value;
        out.push(WitnessRow {
            lemma: "tl(p,1)/script_b(0,1)".into(),
            k_max: k,
            numerator: num,
            denominator: den,
            ratio: num / den,
        });
    }
    Ok(out)
}

fn strictly_increasing(rows: &[WitnessRow], lemma: &str) -> bool {
    let v: Vec<f64> = rows.iter().filter(|r| r.lemma == lemma).map(|r| r.ratio).collect();
    v.len() >= 2 && v.windows(2).all(|w| w[1] > w[0])
}

/// Checks every applicable direction with one constant per (direction, s, p, r, γ).
pub fn embedding_sweep(plan: &ExperimentPlan) -> Result<ViolationReport> {
    if plan.experiment != ExperimentKind::Embedding {
        return invalid("plan is not an embedding experiment");
    }
    plan.validate()?;
    let members = standard_family(&plan.family)?;
    let mut combos = plan.grid.combos();
    combos.retain(|c| c.order == plan.grid.orders[0]);
    // values[member][combo] = (𝓑, Ḃ, Ḟ)
    let values: Vec<Result<Vec<[f64; 3]>>> = members
        .par_iter()
        .map(|m| {
            let bands = BandMagnitudes::from_function(&m.sampled, &m.bands, Projection::Standard)?;
            combos
                .iter()
                .map(|c| {
                    let params = BesovParams::new(c.s, c.p, c.r, c.gamma)?;
                    let tl = BesovParams::new(c.s, c.p, c.p, c.gamma)?.with_q(c.r)?;
                    Ok([
                        script_b_from_bands(&bands, &params),
                        besov_lorentz_from_bands(&bands, &params),
                        tl_lorentz_from_bands(&bands, &tl),
                    ])
                })
                .collect()
        })
        .collect();
    let values: Vec<Vec<[f64; 3]>> = values.into_iter().collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut collapse: f64 = 0.0;
    for (i, c) in combos.iter().enumerate() {
        if c.r.value() == c.p {
            for v in &values {
                let hi = v[i].iter().copied().fold(0.0, f64::max);
                let lo = v[i].iter().copied().fold(f64::INFINITY, f64::min);
                collapse = collapse.max(hi / lo - 1.0);
            }
        }
        for dir in [Direction::BesovByScriptB, Direction::ScriptBByBesov, Direction::ScriptBByTl, Direction::TlByScriptB] {
            if !dir.applies(c.p, c.r) {
                continue;
            }
            let ratios: Vec<f64> = values.iter().map(|v| dir.ratio(v[i][0], v[i][1], v[i][2])).collect();
            let constant = members
                .iter()
                .zip(&ratios)
                .filter(|(m, _)| m.is_base())
                .map(|(_, r)| *r)
                .fold(0.0, f64::max);
            let (wi, worst) = ratios
                .iter()
                .copied()
                .enumerate()
                .fold((0, 0.0), |acc, (j, r)| if r > acc.1 { (j, r) } else { acc });
            let violations = ratios.iter().filter(|&&r| !(r <= (1.0 + plan.tolerance) * constant)).count();
            rows.push(EmbeddingRow {
                direction: dir,
                s: c.s,
                p: c.p,
                r: c.r,
                gamma: c.gamma,
                constant,
                worst,
                worst_member: members[wi].label.clone(),
                violations,
            });
        }
    }
    let witnesses = gamma_zero_witnesses(plan.grid.s[0], plan.grid.p[0], &[16, 32, 64, 128])?;
    let witness_growth = strictly_increasing(&witnesses, "script_b(0,inf)/tl(p,2p)")
        && strictly_increasing(&witnesses, "tl(p,1)/script_b(0,1)");
    Ok(ViolationReport {
        plan: plan.clone(),
        total_violations: rows.iter().map(|r| r.violations).sum(),
        rows,
        collapse_deviation: collapse,
        witnesses,
        witness_growth,
        version: version_string(),
    })
}
