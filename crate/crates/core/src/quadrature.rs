//! Gauss-Legendre rules and small integration helpers shared by the quadrature code.

use gauss_quad::GaussLegendre;
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

type Rule = std::sync::Arc<Vec<(f64, f64)>>;

/// Gauss-Legendre nodes and weights on [-1, 1], sorted by node, cached per order.
pub fn gauss_legendre(order: usize) -> Rule {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(order)
        .or_insert_with(|| {
            let rule = if order == 1 {
                vec![(0.0, 2.0)]
            } else {
                let gl = GaussLegendre::new(order).expect("order >= 2");
                let mut v: Vec<(f64, f64)> = gl.iter().map(|(x, w)| (*x, *w)).collect();
                v.sort_by(|a, b| a.0.total_cmp(&b.0));
                v
            };
            std::sync::Arc::new(rule)
        })
        .clone()
}

/// Nodes and weights of a Gauss-Legendre rule mapped to [a, b].
pub fn mapped_rule(order: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    gauss_legendre(order)
        .iter()
        .map(|&(x, w)| (mid + half * x, half * w))
        .collect()
}

/// Composite Gauss-Legendre rule over consecutive breakpoints.
pub fn composite_rule(breaks: &[f64], panels_per_gap: usize, order: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(breaks.len() * panels_per_gap * order);
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b <= a {
            continue;
        }
        let step = (b - a) / panels_per_gap as f64;
        for i in 0..panels_per_gap {
            let lo = a + step * i as f64;
            out.extend(mapped_rule(order, lo, lo + step));
        }
    }
    out
}

/// Integrates `f` over [a, b] with a composite rule.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    composite_rule(&[a, b], panels, order)
        .into_iter()
        .map(|(x, w)| w * f(x))
        .sum()
}

/// Adaptive Simpson integration with a depth cap.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, max_depth)
}

/// Binomial coefficient as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for order in [1usize, 2, 5, 16] {
            let deg = 2 * order - 1;
            let got: f64 = mapped_rule(order, 0.0, 2.0)
                .iter()
                .map(|&(x, w)| w * x.powi(deg as i32))
                .sum();
            let exact = 2f64.powi(deg as i32 + 1) / (deg as f64 + 1.0);
            assert!((got - exact).abs() < 1e-12 * exact, "order {order}");
        }
    }

    #[test]
    fn composite_and_simpson_agree_on_smooth_integrand() {
        let a = integrate(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 8, 8);
        let b = adaptive_simpson(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12, 40);
        assert!((a - 2.0).abs() < 1e-13);
        assert!((b - 2.0).abs() < 1e-10);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(5, 0), 1.0);
        assert_eq!(binomial(6, 6), 1.0);
    }
}
