use std::collections::{BTreeMap, BTreeSet};

use kappa_core::dyadic_decomposition::mihlin_constant;
use kappa_core::index_algebra::{b_completion, ball_volume, lower_index_set};
use kappa_core::oscillation_metrics::{mean_oscillation_profile, default_centers, oscillation_profile};
use kappa_core::spectral_solver::{forward_apply, read_grid, solve_constant, write_grid, TrigPolynomial};
use kappa_core::symbol_analysis::{catalog, rational_derivative, RationalSymbol};
use kappa_core::{GridSpec, KappaWeight, MultiIndex};
use num_complex::Complex64;
use proptest::prelude::*;

fn kappa_and_b() -> impl Strategy<Value = (Vec<u32>, Vec<Vec<u32>>, u32)> {
    (1usize..=3).prop_flat_map(|n| {
        (
            prop::collection::vec(1u32..=3, n),
            prop::collection::vec(prop::collection::vec(0u32..=2, n), 1..=3),
            1u32..=10,
        )
    })
}

fn trig_field() -> impl Strategy<Value = Vec<(Vec<i64>, f64, f64)>> {
    prop::collection::vec(
        (prop::collection::vec(-5i64..=5, 2), 0.1f64..2.0, 0.0f64..6.0),
        1..=4,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lower_set_contains_completion((kappa, bs, m) in kappa_and_b()) {
        let kw = KappaWeight::new(kappa).unwrap();
        let b: BTreeSet<MultiIndex> = bs.into_iter().map(MultiIndex::new).collect();
        let a = b_completion(&b, m, &kw).unwrap();
        let low = lower_index_set(&b, m, &kw).unwrap();
        prop_assert!(a.indices.is_subset(&low.indices));
    }

    #[test]
    fn ball_volume_ratio_is_a_power(kappa in prop::collection::vec(1u32..=3, 1..=3), r in 0.1f64..5.0) {
        let kw = KappaWeight::new(kappa).unwrap();
        let v = ball_volume(r, &kw, 32).unwrap().volume;
        let v1 = ball_volume(1.0, &kw, 32).unwrap().volume;
        let want = r.powi(kw.total() as i32);
        prop_assert!((v / v1 - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn sup_profile_is_monotone_and_dominates_the_mean(parts in trig_field()) {
        let grid = GridSpec::torus(2, 16).unwrap();
        let kappa = KappaWeight::new(vec![1, 2]).unwrap();
        let f = TrigPolynomial::real_cos(parts).sample(&grid);
        let sup = oscillation_profile(&f, &kappa, 12).unwrap();
        prop_assert!(sup.values.windows(2).all(|w| w[0] <= w[1]));
        let fields = BTreeMap::from([("f".to_string(), f)]);
        let centers = default_centers(&grid, 64);
        let mean = mean_oscillation_profile(&fields, &kappa, &sup.radii, &centers).unwrap();
        for (m, s) in mean.values.iter().zip(&sup.values) {
            prop_assert!(*m <= *s + 1e-12);
        }
    }

    #[test]
    fn solve_is_linear(u in trig_field(), v in trig_field(), c in -3.0f64..3.0) {
        let op = catalog::heat();
        let grid = GridSpec::torus(2, 16).unwrap();
        let fu = forward_apply(&op, &TrigPolynomial::real_cos(u).sample(&grid)).unwrap();
        let fv = forward_apply(&op, &TrigPolynomial::real_cos(v).sample(&grid)).unwrap();
        let z = MultiIndex::zero(2);
        let combo = fu[&z].scale(Complex64::new(c, 0.0)).add(&fv[&z]).unwrap();
        let s = solve_constant(&op, &BTreeMap::from([(z.clone(), combo)])).unwrap();
        let su = solve_constant(&op, &fu).unwrap();
        let sv = solve_constant(&op, &fv).unwrap();
        for alpha in op.index_pair().a() {
            let want = su.derivatives[alpha].scale(Complex64::new(c, 0.0)).add(&sv.derivatives[alpha]).unwrap();
            let err = s.derivatives[alpha].sub(&want).unwrap().sup_norm();
            prop_assert!(err <= 1e-12 * want.sup_norm().max(1.0));
        }
    }

    #[test]
    fn rational_derivatives_commute(g1 in prop::collection::vec(0u32..=2, 2), g2 in prop::collection::vec(0u32..=2, 2),
                                    xi in prop::collection::vec(0.2f64..3.0, 2)) {
        let op = catalog::heat();
        let ms = RationalSymbol::solution_multiplier(&op, &MultiIndex::new(vec![2, 0]), &MultiIndex::zero(2)).unwrap();
        let (a, b) = (MultiIndex::new(g1), MultiIndex::new(g2));
        let ab = rational_derivative(&rational_derivative(&ms, &a).unwrap(), &b).unwrap().eval(&xi);
        let ba = rational_derivative(&rational_derivative(&ms, &b).unwrap(), &a).unwrap().eval(&xi);
        prop_assert!((ab - ba).norm() <= 1e-10 * ab.norm().max(1.0));
    }
}

#[test]
fn mihlin_estimates_settle_as_resolution_doubles() {
    let op = catalog::heat();
    let kappa = op.kappa().clone();
    let z = MultiIndex::zero(2);
    for (alpha, gamma) in [(vec![2, 0], vec![0, 0]), (vec![0, 1], vec![1, 0]), (vec![2, 0], vec![0, 1])] {
        let ms = RationalSymbol::solution_multiplier(&op, &MultiIndex::new(alpha), &z).unwrap();
        let g = MultiIndex::new(gamma);
        let mut prev = f64::INFINITY;
        for res in [64, 128, 256] {
            let a = mihlin_constant(&ms, &kappa, &g, -2..=2, res).unwrap().constant;
            assert!(a <= prev * 1.01, "{g}: {a} after {prev}");
            prev = a;
        }
    }
}

#[test]
fn grid_files_round_trip_through_memory() {
    let grid = GridSpec::new(vec![8, 4], vec![1.0, 3.5]).unwrap();
    let f = TrigPolynomial::real_cos(vec![(vec![1, 2], 1.0, 0.4)]).sample(&grid);
    let mut bytes = Vec::new();
    write_grid(&f, &mut bytes).unwrap();
    assert_eq!(&bytes[..4], b"AKGF");
    let back = read_grid(&mut bytes.as_slice()).unwrap();
    assert_eq!(back, f);
}
