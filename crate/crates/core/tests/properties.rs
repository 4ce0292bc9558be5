use pmelab::analytic::BarenblattSpec;
use pmelab::field::{Field, Grid};
use pmelab::free_boundary::{persistence_check, positivity_set};
use pmelab::harness::{holder_quotient, params, CheckReport};
use pmelab::inequalities::{poincare_ratio, pow_diff_holds, pow_diff_sweep, TestFunctionKind, TestFunctionSpec};
use pmelab::report::emit_report;
use pmelab::solver::{solve_pme, step, InitialCondition, PmeProblem, SchemeConfig};
use pmelab::surface::build_surface;
use proptest::prelude::*;

fn field_1d(values: Vec<f64>) -> Field {
    let grid = Grid::new(1, 2.0, values.len()).unwrap();
    Field::new(grid, 1.0, values).unwrap()
}

fn nonnegative_data() -> impl Strategy<Value = Vec<f64>> {
    // grids need an odd point count
    (5usize..30).prop_flat_map(|k| prop::collection::vec(prop_oneof![Just(0.0), 0.0..2.0f64], 2 * k + 1))
}

fn stable_dt(f: &Field, m: f64) -> f64 {
    let dx = f.grid.spacing();
    0.9 * dx * dx / (2.0 * m * f.sup().max(1e-12).powf(m - 1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn step_keeps_bounds_and_mass(values in nonnegative_data(), m in 1.0..4.0f64) {
        let f = field_1d(values);
        prop_assume!(f.sup() > 0.0);
        let g = step(&f, m, stable_dt(&f, m), &SchemeConfig::default()).unwrap();
        prop_assert!(g.min() >= 0.0);
        prop_assert!(g.sup() <= f.sup() * (1.0 + 1e-12));
        prop_assert!((g.mass() - f.mass()).abs() <= 1e-12 * f.mass());
    }

    #[test]
    fn mask_shrinks_as_threshold_grows(values in nonnegative_data(), a in 1e-6..1.0f64, b in 1e-6..1.0f64) {
        let f = field_1d(values);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let wide = positivity_set(&f, lo).unwrap();
        let narrow = positivity_set(&f, hi).unwrap();
        for (n, w) in narrow.flags.iter().zip(&wide.flags) {
            prop_assert!(!n || *w);
        }
    }

    #[test]
    fn metric_ratio_at_least_one(values in nonnegative_data(), beta in 1.2..6.0f64) {
        let f = field_1d(values);
        let s = build_surface(&f, beta, 1.0, 1e-10).unwrap();
        for sample in s.metric_samples() {
            prop_assert!(sample.ratio >= 1.0);
        }
    }

    #[test]
    fn pow_diff_never_violated(a in 0.0..10.0f64, b in 0.0..10.0f64, beta in 1.0001..8.0f64) {
        prop_assert!(pow_diff_holds(a, b, beta).unwrap().holds);
    }

    #[test]
    fn pow_diff_equality_cases(a in 0.0..10.0f64, beta in 1.0001..8.0f64) {
        let same = pow_diff_holds(a, a, beta).unwrap();
        prop_assert_eq!(same.lhs, same.rhs);
        let zero = pow_diff_holds(a, 0.0, beta).unwrap();
        prop_assert!((zero.lhs - zero.rhs).abs() <= 1e-15 * zero.rhs.max(1.0));
    }

    #[test]
    fn pow_diff_strict_away_from_equality(a in 0.1..10.0f64, b in 0.1..10.0f64, beta in 1.1..8.0f64) {
        prop_assume!((a - b).abs() > 0.01);
        let r = pow_diff_holds(a, b, beta).unwrap();
        prop_assert!(r.lhs < r.rhs);
    }

    #[test]
    fn barenblatt_mass_is_constant(m in 1.2..4.0f64, c in 0.01..2.0f64, t in 0.5..50.0f64) {
        let spec = BarenblattSpec::new(m, 1, c, 0.0).unwrap();
        let m0 = spec.mass().unwrap();
        prop_assert!((spec.mass_at(t).unwrap() - m0).abs() <= 1e-9 * m0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn poincare_ratio_ignores_amplitude(amp in 0.01..100.0f64, rho in 0.2..5.0f64) {
        let mut spec = TestFunctionSpec::new(TestFunctionKind::CosineBump, rho, 1);
        let base = poincare_ratio(&spec).unwrap().ratio;
        spec.amplitude = amp;
        let scaled = poincare_ratio(&spec).unwrap().ratio;
        prop_assert!((scaled - base).abs() <= 1e-10 * base);
    }

    #[test]
    fn poincare_ratio_scales_with_radius(rho in 0.2..5.0f64, seed in any::<u64>()) {
        let kind = TestFunctionKind::RandomSmooth { seed, modes: 4 };
        let unit = poincare_ratio(&TestFunctionSpec::new(kind.clone(), 1.0, 1)).unwrap();
        let r = poincare_ratio(&TestFunctionSpec::new(kind, rho, 1)).unwrap();
        prop_assert!((r.ratio - rho * unit.ratio).abs() <= 1e-10 * rho * unit.ratio);
        prop_assert!(r.holds);
    }

    #[test]
    fn positivity_sets_are_nested(m in 1.5..3.5f64, radius in 0.3..1.0f64) {
        let grid = Grid::new(1, 6.0, 241).unwrap();
        let problem = PmeProblem::new(m, InitialCondition::Bump { amplitude: 1.0, radius }, 0.0, 0.5)
            .with_snapshots(vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5]);
        let tr = solve_pme(&problem, &grid, &SchemeConfig::default()).unwrap();
        let report = persistence_check(&tr, 1e-10).unwrap();
        prop_assert!(report.nested(), "{:?}", report.violations.first());
    }

    #[test]
    fn holder_estimate_is_reproducible(seed in any::<u64>()) {
        let spec = BarenblattSpec::new(2.0, 1, 1.0 / 12.0, 0.0).unwrap();
        let grid = Grid::new(1, 3.0, 61).unwrap();
        let tr = spec.trajectory(&grid, &[1.0, 1.5, 2.0]).unwrap();
        let a = holder_quotient(&tr, 1.5, 1.0, 2.0, seed, 500).unwrap();
        let b = holder_quotient(&tr, 1.5, 1.0, 2.0, seed, 500).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn sweep_is_reproducible(seed in any::<u64>()) {
        let a = pow_diff_sweep(2000, seed);
        prop_assert_eq!(a.violations, 0);
        prop_assert_eq!(a, pow_diff_sweep(2000, seed));
    }

    #[test]
    fn report_files_ignore_input_order(stats in prop::collection::vec((0.0..1.0f64, 1.0..3.0f64), 1..8), rot in 0usize..8) {
        let mut reports: Vec<CheckReport> = stats
            .iter()
            .map(|&(s, m)| CheckReport::upper("heat_distance", params(&[("m", m)]), s, 0.5, 0.0))
            .collect();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let first = emit_report(&reports, a.path()).unwrap();
        let k = rot % reports.len();
        reports.rotate_left(k);
        let second = emit_report(&reports, b.path()).unwrap();
        for (x, y) in first.iter().zip(&second) {
            prop_assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        }
    }
}
