use lorentz_besov::grid::{finite_difference, to_samples, to_spectrum};
use lorentz_besov::harness::slope_fit;
use lorentz_besov::littlewood_paley::phi;
use lorentz_besov::lorentz::brute_force_oracle;
use lorentz_besov::{AnalyticField, Exponent, Lattice, LorentzParams, SampledFunction, WeightedValueSet};
use num_complex::Complex64;
use proptest::prelude::*;

fn value_set() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.01f64..100.0, 0.01f64..10.0), 1..7)
}

fn params() -> impl Strategy<Value = LorentzParams> {
    (1.1f64..6.0, prop_oneof![(1.0f64..8.0).prop_map(Exponent::from), Just(Exponent::INFINITY)])
        .prop_map(|(p, r)| LorentzParams::new(p, r).unwrap())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quasi_norm_is_positively_homogeneous(pairs in value_set(), prm in params(), c in 0.01f64..100.0) {
        let v = WeightedValueSet::from_pairs(pairs).unwrap();
        prop_assert!(close(v.scaled(c).quasi_norm(&prm), c * v.quasi_norm(&prm), 1e-12));
    }

    #[test]
    fn quasi_norm_is_monotone_in_magnitudes(pairs in value_set(), prm in params(), bumps in prop::collection::vec(1.0f64..3.0, 6)) {
        let v = WeightedValueSet::from_pairs(pairs.clone()).unwrap();
        let w = WeightedValueSet::from_pairs(pairs.iter().zip(&bumps).map(|(&(a, m), &t)| (a * t, m))).unwrap();
        prop_assert!(w.quasi_norm(&prm) >= v.quasi_norm(&prm) * (1.0 - 1e-12));
    }

    #[test]
    fn diagonal_exponent_is_weighted_lp(pairs in value_set(), p in 1.1f64..6.0) {
        let v = WeightedValueSet::from_pairs(pairs.clone()).unwrap();
        let lp: f64 = pairs.iter().map(|&(a, m)| m * a.powf(p)).sum::<f64>().powf(1.0 / p);
        prop_assert!(close(v.quasi_norm(&LorentzParams::new(p, p).unwrap()), lp, 1e-12));
    }

    #[test]
    fn weak_norm_is_the_infinite_exponent(pairs in value_set(), p in 1.1f64..6.0) {
        let v = WeightedValueSet::from_pairs(pairs).unwrap();
        prop_assert_eq!(v.weak_norm(p), v.quasi_norm(&LorentzParams::weak(p).unwrap()));
    }

    #[test]
    fn engine_matches_brute_force(pairs in value_set(), prm in params()) {
        let v = WeightedValueSet::from_pairs(pairs).unwrap();
        prop_assert!(close(v.quasi_norm(&prm), brute_force_oracle(&v, &prm), 1e-6));
    }

    #[test]
    fn distribution_is_nonincreasing(pairs in value_set(), a in 0.0f64..120.0, b in 0.0f64..120.0) {
        let v = WeightedValueSet::from_pairs(pairs).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(v.distribution(hi) <= v.distribution(lo));
    }

    #[test]
    fn spectral_round_trip(seed in any::<u64>(), log_n in 3u32..9, box_len in 1.0f64..100.0) {
        let lat = Lattice::new(1, 1 << log_n, box_len).unwrap();
        let mut state = seed | 1;
        let values: Vec<Complex64> = (0..lat.len())
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                Complex64::new((state % 2001) as f64 / 1000.0 - 1.0, ((state >> 20) % 2001) as f64 / 1000.0 - 1.0)
            })
            .collect();
        let f = SampledFunction::new(lat, values, "rand").unwrap();
        let back = to_samples(&to_spectrum(&f), "back");
        let err = f.sub(&back).unwrap().sup_norm();
        prop_assert!(err <= 1e-12 * f.sup_norm().max(1.0));
    }

    #[test]
    fn partition_of_unity(xi in 0.01f64..100.0) {
        let sum: f64 = (-12..=12).map(|k| phi(xi * 2f64.powi(-k))).sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn slope_fit_recovers_power_laws(slope in -3.0f64..3.0, c in 0.1f64..10.0) {
        let pts: Vec<(f64, f64)> = (1..8).map(|i| {
            let x = 2f64.powi(i);
            (x, c * x.powf(slope))
        }).collect();
        let (fitted, _) = slope_fit(&pts).unwrap();
        prop_assert!((fitted - slope).abs() < 1e-10);
    }

    #[test]
    fn differences_annihilate_low_degree_polynomials(order in 1usize..5, h in 0.05f64..2.0, x in -3.0f64..3.0) {
        for deg in 0..=order {
            let mono = AnalyticField::new(1, deg as i32, 1.0, move |y: &[f64]| Complex64::new(y[0].powi(deg as i32), 0.0));
            let d = finite_difference(&mono, &[h], order).unwrap().eval1(x).norm();
            if deg < order {
                prop_assert!(d < 1e-9 * (1.0 + x.abs() + order as f64 * h).powi(deg as i32));
            } else {
                let factorial: f64 = (1..=order).map(|i| i as f64).product();
                prop_assert!(close(d, factorial * h.powi(order as i32), 1e-8));
            }
        }
    }
}
