//! Lorentz quasi-norms of discrete pushforward measures.
//!
//! A [`WeightedValueSet`] is a finite multiset of (magnitude, mass) atoms. Its distribution
//! function λ ↦ μ(|g| > λ) is a right-continuous step function, so every quasi-norm below is a
//! finite sum over the distinct magnitudes.

use crate::error::{invalid, Error, Result};
use crate::quadrature::{adaptive_simpson, mapped_rule};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// An exponent in [1, ∞] where ∞ is representable; serialized as a number or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Exponent(f64);

impl Exponent {
    pub const INFINITY: Exponent = Exponent(f64::INFINITY);

    pub fn new(v: f64) -> Result<Self> {
        if v.is_nan() || v < 1.0 {
            return invalid(format!("exponent must lie in [1, inf], got {v}"));
        }
        Ok(Exponent(v))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// 1/r, with 1/∞ = 0.
    pub fn recip(self) -> f64 {
        if self.is_infinite() {
            0.0
        } else {
            1.0 / self.0
        }
    }
}

impl From<f64> for Exponent {
    fn from(v: f64) -> Self {
        Exponent(v)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Exponent::INFINITY),
            t => t
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("cannot parse exponent `{s}`")))
                .and_then(Exponent::new),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Exponent::new(v).map_err(serde::de::Error::custom),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Lorentz indices (p, r) with 1 < p < ∞ and 1 ≤ r ≤ ∞.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzParams {
    pub p: f64,
    pub r: Exponent,
}

impl LorentzParams {
    pub fn new(p: f64, r: impl Into<Exponent>) -> Result<Self> {
        let r = r.into();
        if !(p > 1.0 && p.is_finite()) {
            return invalid(format!("p must lie in (1, inf), got {p}"));
        }
        Exponent::new(r.value())?;
        Ok(Self { p, r })
    }

    pub fn weak(p: f64) -> Result<Self> {
        Self::new(p, Exponent::INFINITY)
    }
}

/// Multiset of (magnitude, mass) atoms, sorted once by decreasing magnitude.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightedValueSet {
    levels: Vec<f64>,
    cumulative: Vec<f64>,
    total_mass: f64,
}

impl WeightedValueSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds the set after validating every atom.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut v: Vec<(f64, f64)> = Vec::new();
        for (i, (a, m)) in pairs.into_iter().enumerate() {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::NonFinite(format!("atom {i} has magnitude {a}")));
            }
            if !(m.is_finite() && m > 0.0) {
                return invalid(format!("atom {i} has mass {m}; masses must be positive"));
            }
            v.push((a, m));
        }
        Ok(Self::from_sorted_vec(v))
    }

    /// Builds the set from atoms known to be valid; zero magnitudes are dropped.
    pub fn from_pairs_unchecked(v: Vec<(f64, f64)>) -> Self {
        Self::from_sorted_vec(v)
    }

    fn from_sorted_vec(mut v: Vec<(f64, f64)>) -> Self {
        let total_mass = v.iter().map(|p| p.1).sum();
        v.retain(|p| p.0 > 0.0);
        v.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));
        let mut levels = Vec::with_capacity(v.len());
        let mut cumulative = Vec::with_capacity(v.len());
        let mut acc = 0.0;
        for (a, m) in v {
            acc += m;
            if levels.last() == Some(&a) {
                *cumulative.last_mut().expect("nonempty") = acc;
            } else {
                levels.push(a);
                cumulative.push(acc);
            }
        }
        Self { levels, cumulative, total_mass }
    }

    /// Union of several sets.
    pub fn union(sets: &[&WeightedValueSet]) -> Self {
        let mut v = Vec::new();
        for s in sets {
            v.extend(s.atoms());
        }
        Self::from_sorted_vec(v)
    }

    /// Distinct positive magnitudes with their merged masses, in decreasing order.
    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.levels.iter().enumerate().map(move |(i, &a)| {
            let prev = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
            (a, self.cumulative[i] - prev)
        })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Total mass of all atoms, including those of zero magnitude.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn max_magnitude(&self) -> f64 {
        self.levels.first().copied().unwrap_or(0.0)
    }

    /// Multiplies every magnitude by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            levels: self.levels.iter().map(|a| a * c).collect(),
            cumulative: self.cumulative.clone(),
            total_mass: self.total_mass,
        }
    }

    /// Multiplies every mass by `c > 0`.
    pub fn mass_scaled(&self, c: f64) -> Self {
        Self {
            levels: self.levels.clone(),
            cumulative: self.cumulative.iter().map(|m| m * c).collect(),
            total_mass: self.total_mass * c,
        }
    }

    /// μ(|g| > λ).
    pub fn distribution(&self, lambda: f64) -> f64 {
        // number of levels strictly above lambda
        let k = self.levels.partition_point(|&a| a > lambda);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }

    /// The bracket quasi-norm [g]_{p,r}, evaluated exactly on the step distribution.
    pub fn quasi_norm(&self, params: &LorentzParams) -> f64 {
        if self.levels.is_empty() {
            return 0.0;
        }
        let p = params.p;
        let a1 = self.levels[0];
        let total = *self.cumulative.last().expect("nonempty");
        let scale = a1 * total.powf(1.0 / p);
        if params.r.is_infinite() {
            let best = self
                .levels
                .iter()
                .zip(&self.cumulative)
                .map(|(a, m)| (a / a1) * (m / total).powf(1.0 / p))
                .fold(0.0, f64::max);
            return scale * best;
        }
        let r = params.r.value();
        let k = self.levels.len();
        let mut sum = 0.0;
        for i in 0..k {
            let ai = self.levels[i] / a1;
            let step = if i + 1 < k {
                let ratio = self.levels[i + 1] / self.levels[i];
                -ai.powf(r) * (r * ratio.ln()).exp_m1()
            } else {
                ai.powf(r)
            };
            sum += (self.cumulative[i] / total).powf(r / p) * step;
        }
        scale * sum.powf(1.0 / r)
    }

    /// sup_λ λ μ(|g|>λ)^{1/p}.
    pub fn weak_norm(&self, p: f64) -> f64 {
        self.quasi_norm(&LorentzParams { p, r: Exponent::INFINITY })
    }

    /// (∫ [t^{1/p} g**(t)]^r dt/t)^{1/r} with g** the running average of the rearrangement.
    pub fn hunt_norm(&self, params: &LorentzParams) -> Result<f64> {
        if self.levels.is_empty() {
            return Ok(0.0);
        }
        let p = params.p;
        let k = self.levels.len();
        let a1 = self.levels[0];
        let total = *self.cumulative.last().expect("nonempty");
        // normalized data: magnitudes / a1, masses / total
        let a: Vec<f64> = self.levels.iter().map(|v| v / a1).collect();
        let m: Vec<f64> = self.cumulative.iter().map(|v| v / total).collect();
        let mut s_prev = 0.0;
        let scale = a1 * total.powf(1.0 / p);
        if params.r.is_infinite() {
            let mut best: f64 = 0.0;
            let h = |c: f64, ai: f64, t: f64| t.powf(1.0 / p - 1.0) * (c + ai * t);
            for i in 0..k {
                let lo = if i == 0 { 0.0 } else { m[i - 1] };
                let c = s_prev - a[i] * lo;
                best = best.max(h(c, a[i], m[i]));
                if lo > 0.0 {
                    best = best.max(h(c, a[i], lo));
                    let crit = (p - 1.0) * c / a[i];
                    if crit > lo && crit < m[i] {
                        best = best.max(h(c, a[i], crit));
                    }
                }
                s_prev += a[i] * (m[i] - lo);
            }
            return Ok(scale * best);
        }
        let r = params.r.value();
        let mut sum = a[0].powf(r) * m[0].powf(r / p) * p / r;
        s_prev = a[0] * m[0];
        for i in 1..k {
            let lo = m[i - 1];
            let hi = m[i];
            let c = s_prev - a[i] * lo;
            let (ulo, uhi) = (lo.ln(), hi.ln());
            let panels = ((uhi - ulo) / 0.25).ceil().max(1.0) as usize;
            let width = (uhi - ulo) / panels as f64;
            for j in 0..panels {
                let u0 = ulo + width * j as f64;
                for (u, w) in mapped_rule(12, u0, u0 + width) {
                    let t = u.exp();
                    sum += w * t.powf(r / p - r) * (c + a[i] * t).powf(r);
                }
            }
            s_prev += a[i] * (hi - lo);
        }
        let tail_exp = r - r / p;
        if tail_exp <= 0.0 {
            return Err(Error::NotConverged("hunt-norm tail integral diverges".into()));
        }
        sum += s_prev.powf(r) * m[k - 1].powf(r / p - r) / tail_exp;
        Ok(scale * sum.powf(1.0 / r))
    }

    /// Bounds (lower, upper) relating the Hunt norm to the bracket quasi-norm.
    pub fn hunt_bounds(&self, params: &LorentzParams) -> (f64, f64) {
        let q = self.quasi_norm(params);
        let p = params.p;
        let c = if params.r.is_infinite() { 1.0 } else { (p / params.r.value()).powf(params.r.recip()) };
        (c * q, c * p / (p - 1.0) * q)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["magnitude", "mass"])?;
        for (a, m) in self.atoms() {
            w.write_record(&[format!("{a:.17e}"), format!("{m:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut pairs = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidParameter(format!("bad csv row {:?}", rec)))
            };
            pairs.push((parse(0)?, parse(1)?));
        }
        Self::from_pairs(pairs)
    }
}

/// Independent evaluation of the quasi-norm from the distribution function alone.
///
/// For finite r the integral r∫λ^{r-1}μ(λ)^{r/p}dλ is computed by adaptive Simpson quadrature;
/// for r = ∞ the jumps of μ are located by scanning and bisection.
pub fn brute_force_oracle(v: &WeightedValueSet, params: &LorentzParams) -> f64 {
    let top = v.max_magnitude();
    if top == 0.0 {
        return 0.0;
    }
    let p = params.p;
    let hi = top * (1.0 + 1e-9);
    if params.r.is_infinite() {
        let scan = 4096;
        let mut best: f64 = 0.0;
        let mut edge = 0.0;
        for i in 1..=scan {
            let next = hi * i as f64 / scan as f64;
            let target = v.distribution(next);
            let mut cur = edge;
            while v.distribution(cur) != target {
                let mu = v.distribution(cur);
                let (mut lo, mut up) = (cur, next);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + up);
                    if mid <= lo || mid >= up {
                        break;
                    }
                    if v.distribution(mid) == mu {
                        lo = mid;
                    } else {
                        up = mid;
                    }
                }
                best = best.max(up * mu.powf(1.0 / p));
                cur = up;
            }
            edge = next;
        }
        return best;
    }
    let r = params.r.value();
    let integrand = |lambda: f64| {
        if lambda <= 0.0 {
            return 0.0;
        }
        r * lambda.powf(r - 1.0) * v.distribution(lambda).powf(r / p)
    };
    let rough = top.powf(r) * v.distribution(0.0).powf(r / p);
    // dyadic cells refined uniformly, so that no level can hide between the first samples
    let octaves = 80;
    let sub = 16;
    let tol = 1e-14 * rough / (octaves * sub) as f64;
    let mut integral = 0.0;
    let mut upper = hi;
    for _ in 0..octaves {
        let lower = 0.5 * upper;
        let step = (upper - lower) / sub as f64;
        for j in 0..sub {
            let a = lower + step * j as f64;
            integral += adaptive_simpson(&integrand, a, a + step, tol, 50);
        }
        upper = lower;
    }
    integral += adaptive_simpson(&integrand, 0.0, upper, tol, 50);
    integral.powf(1.0 / r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(pairs: &[(f64, f64)]) -> WeightedValueSet {
        WeightedValueSet::from_pairs(pairs.iter().copied()).unwrap()
    }

    fn lp(p: f64, r: f64) -> LorentzParams {
        LorentzParams::new(p, r).unwrap()
    }

    #[test]
    fn distribution_examples() {
        let m = 2.5;
        let v = set(&[(1.0, m)]);
        assert_eq!(v.distribution(0.5), m);
        assert_eq!(v.distribution(1.0), 0.0);
        let w = set(&[(2.0, 1.0), (1.0, 3.0)]);
        assert_eq!(w.distribution(1.5), 1.0);
        assert_eq!(w.distribution(0.0), 4.0);
    }

    #[test]
    fn quasi_norm_examples() {
        let m: f64 = 3.7;
        let v = set(&[(1.0, m)]);
        for (p, r) in [(1.5, 1.0), (2.0, 2.0), (3.0, 7.0)] {
            assert!((v.quasi_norm(&lp(p, r)) - m.powf(1.0 / p)).abs() < 1e-14);
        }
        let w = set(&[(2.0, 1.0), (1.0, 3.0)]);
        assert!((w.quasi_norm(&lp(2.0, 2.0)) - 7f64.sqrt()).abs() < 1e-14);
        assert!((w.quasi_norm(&lp(2.0, 1.0)) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn weak_norm_examples() {
        let m: f64 = 0.3;
        assert!((set(&[(1.0, m)]).weak_norm(2.0) - m.sqrt()).abs() < 1e-15);
        assert_eq!(set(&[(2.0, 1.0), (1.0, 3.0)]).weak_norm(2.0), 2.0);
        assert_eq!(WeightedValueSet::empty().weak_norm(2.0), 0.0);
    }

    #[test]
    fn oracle_on_hand_examples() {
        let w = set(&[(2.0, 1.0), (1.0, 3.0)]);
        assert!((brute_force_oracle(&w, &lp(2.0, 1.0)) - 3.0).abs() < 1e-9);
        assert!((brute_force_oracle(&w, &LorentzParams::weak(2.0).unwrap()) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn hunt_norm_single_atom() {
        let m: f64 = 1.9;
        let v = set(&[(1.0, m)]);
        let h = v.hunt_norm(&lp(2.0, 1.0)).unwrap();
        assert!((h - 4.0 * m.sqrt()).abs() < 1e-12);
        // r = ∞: sup t^{1/2} g** is attained at t = m
        let h_inf = v.hunt_norm(&LorentzParams::weak(2.0).unwrap()).unwrap();
        assert!((h_inf - m.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn hunt_norm_against_direct_quadrature() {
        let v = set(&[(3.0, 0.5), (1.2, 2.0), (0.4, 7.0)]);
        for (p, r) in [(2.0, 1.0), (1.5, 3.0), (3.0, 2.0)] {
            let params = lp(p, r);
            let got = v.hunt_norm(&params).unwrap();
            let atoms: Vec<(f64, f64)> = v.atoms().collect();
            let gss = |t: f64| {
                let mut left = t;
                let mut acc = 0.0;
                for &(a, m) in &atoms {
                    let take = left.min(m);
                    acc += a * take;
                    left -= take;
                    if left <= 0.0 {
                        break;
                    }
                }
                acc / t
            };
            // ∫ (t^{1/p} g**)^r dt/t with t = e^u
            let f = |u: f64| {
                let t = u.exp();
                (t.powf(1.0 / p) * gss(t)).powf(r)
            };
            let mut direct = 0.0;
            let mut edges = vec![-60.0];
            let mut acc = 0.0;
            for &(_, m) in &atoms {
                acc += m;
                edges.push(f64::ln(acc));
            }
            edges.push(200.0);
            for w in edges.windows(2) {
                direct += crate::quadrature::integrate(f, w[0], w[1], 400, 10);
            }
            let direct = direct.powf(1.0 / r);
            assert!((got - direct).abs() < 1e-8 * direct, "p={p} r={r}: {got} vs {direct}");
            let (lo, hi) = v.hunt_bounds(&params);
            assert!(got >= lo * (1.0 - 1e-12) && got <= hi * (1.0 + 1e-12));
        }
    }

    #[test]
    fn exponent_parsing_and_serde() {
        assert!("inf".parse::<Exponent>().unwrap().is_infinite());
        assert_eq!("2.5".parse::<Exponent>().unwrap().value(), 2.5);
        assert!("0.5".parse::<Exponent>().is_err());
        let j = serde_json::to_string(&LorentzParams::weak(2.0).unwrap()).unwrap();
        assert_eq!(j, r#"{"p":2.0,"r":"inf"}"#);
        let back: LorentzParams = serde_json::from_str(&j).unwrap();
        assert!(back.r.is_infinite());
    }

    #[test]
    fn rejects_bad_atoms_and_params() {
        assert!(WeightedValueSet::from_pairs([(1.0, 0.0)]).is_err());
        assert!(WeightedValueSet::from_pairs([(f64::NAN, 1.0)]).is_err());
        assert!(LorentzParams::new(1.0, 2.0).is_err());
        assert!(LorentzParams::new(2.0, 0.5).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.csv");
        let v = set(&[(2.0, 1.0), (1.0, 3.0), (0.25, 0.5)]);
        v.write_csv(&path).unwrap();
        assert_eq!(WeightedValueSet::read_csv(&path).unwrap(), v);
    }

    fn arb_set(max_levels: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((1e-3f64..1e3, 1e-3f64..1e3), 1..=max_levels)
    }

    fn arb_params() -> impl Strategy<Value = LorentzParams> {
        (prop::sample::select(vec![1.5, 2.0, 3.0]), prop::sample::select(vec![1.0, 2.0, 0.0, -1.0]))
            .prop_map(|(p, r)| {
                let r = if r == 0.0 {
                    p
                } else if r < 0.0 {
                    f64::INFINITY
                } else {
                    r
                };
                LorentzParams::new(p, r).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn homogeneity(pairs in arb_set(8), c in 1e-3f64..1e3, params in arb_params()) {
            let v = WeightedValueSet::from_pairs(pairs).unwrap();
            let a = v.scaled(c).quasi_norm(&params);
            let b = c * v.quasi_norm(&params);
            prop_assert!((a - b).abs() <= 1e-13 * b);
        }

        #[test]
        fn r_equals_p_is_lp(pairs in arb_set(20), p in prop::sample::select(vec![1.5, 2.0, 3.0])) {
            let v = WeightedValueSet::from_pairs(pairs.clone()).unwrap();
            let lp_norm = pairs.iter().map(|(a, m)| a.powf(p) * m).sum::<f64>().powf(1.0 / p);
            let q = v.quasi_norm(&LorentzParams::new(p, p).unwrap());
            prop_assert!((q - lp_norm).abs() <= 1e-12 * lp_norm);
        }

        #[test]
        fn monotone_in_magnitudes(pairs in arb_set(8), bumps in prop::collection::vec(1.0f64..3.0, 8), params in arb_params()) {
            let v = WeightedValueSet::from_pairs(pairs.clone()).unwrap();
            let bigger: Vec<(f64, f64)> = pairs.iter().zip(&bumps).map(|((a, m), b)| (a * b, *m)).collect();
            let w = WeightedValueSet::from_pairs(bigger).unwrap();
            prop_assert!(w.quasi_norm(&params) >= v.quasi_norm(&params) * (1.0 - 1e-13));
        }

        #[test]
        fn oracle_agreement(pairs in arb_set(6), params in arb_params()) {
            let v = WeightedValueSet::from_pairs(pairs).unwrap();
            let q = v.quasi_norm(&params);
            let o = brute_force_oracle(&v, &params);
            prop_assert!((q - o).abs() <= 1e-6 * q, "{} vs {}", q, o);
        }

        #[test]
        fn weak_is_r_infinity(pairs in arb_set(10), p in 1.1f64..5.0) {
            let v = WeightedValueSet::from_pairs(pairs).unwrap();
            prop_assert_eq!(v.weak_norm(p), v.quasi_norm(&LorentzParams::weak(p).unwrap()));
        }

        #[test]
        fn order_independent(mut pairs in arb_set(10), params in arb_params()) {
            let a = WeightedValueSet::from_pairs(pairs.clone()).unwrap().quasi_norm(&params);
            pairs.reverse();
            let b = WeightedValueSet::from_pairs(pairs).unwrap().quasi_norm(&params);
            prop_assert!((a - b).abs() <= 1e-14 * a);
        }

        #[test]
        fn hunt_within_bounds(pairs in arb_set(6), params in arb_params()) {
            let v = WeightedValueSet::from_pairs(pairs).unwrap();
            let h = v.hunt_norm(&params).unwrap();
            let (lo, hi) = v.hunt_bounds(&params);
            prop_assert!(h >= lo * (1.0 - 1e-9) && h <= hi * (1.0 + 1e-9), "{} not in [{}, {}]", h, lo, hi);
        }
    }
}
