//! Randomized checks of identities that hold for every sample.

use cfslope::data::{apply_filter, Dataset, FilterSpec};
use cfslope::eif::{self, Estimand, EstimationSpec};
use cfslope::inference::{contrast, run_ge, TestName};
use cfslope::simulation::{generate, DgpConfig, DgpKind};
use cfslope::stats::two_sided_p;
use proptest::prelude::*;

const LINEAR: [Estimand; 5] = [
    Estimand::LinearCf(0),
    Estimand::LinearCf(1),
    Estimand::LinearFactual(0),
    Estimand::LinearFactual(1),
    Estimand::LinearDg,
];

const BINARY: [Estimand; 9] = [
    Estimand::LinearCf(1),
    Estimand::LogitCf(0),
    Estimand::LogitCf(1),
    Estimand::LogitFactual(1),
    Estimand::LogitDg,
    Estimand::LinearDg,
    Estimand::LogitCfGivenP1,
    Estimand::LogitDgGivenP1,
    Estimand::LogitFactualGivenP1,
];

fn sample(kind: DgpKind, n: usize, seed: u64) -> Dataset {
    generate(&DgpConfig::new(kind, n, seed)).unwrap().dataset
}

fn estimands(kind: DgpKind) -> &'static [Estimand] {
    match kind {
        DgpKind::CSequential => &BINARY,
        _ => &LINEAR,
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn eif_has_mean_zero(seed in any::<u64>(), kind in prop::sample::select(vec![DgpKind::AContinuous, DgpKind::CSequential, DgpKind::ColliderSelection])) {
        let data = sample(kind, 800, seed);
        let spec = EstimationSpec::parametric();
        for &e in estimands(kind) {
            let est = eif::estimate(&data, e, &spec).unwrap();
            prop_assert!(est.mean_eif().abs() < 1e-8, "{e}: {}", est.mean_eif());
        }
    }

    #[test]
    fn cross_fitted_eif_has_mean_zero(seed in any::<u64>()) {
        let data = sample(DgpKind::CSequential, 800, seed);
        let spec = EstimationSpec { cross_fit: true, seed, ..EstimationSpec::parametric() };
        for &e in &BINARY {
            let est = eif::estimate(&data, e, &spec).unwrap();
            prop_assert!(est.mean_eif().abs() < 1e-8, "{e}: {}", est.mean_eif());
        }
    }

    #[test]
    fn affine_background_equivariance(
        seed in any::<u64>(),
        a in prop_oneof![0.2f64..5.0, -5.0f64..-0.2],
        b in -10.0f64..10.0,
        kind in prop::sample::select(vec![DgpKind::AContinuous, DgpKind::CSequential]),
    ) {
        let data = sample(kind, 600, seed);
        let g2: Vec<f64> = data.g().iter().map(|g| a * g + b).collect();
        let moved = data.with_background(g2).unwrap();
        let spec = EstimationSpec::parametric();
        for &e in estimands(kind) {
            let s = eif::estimate(&data, e, &spec).unwrap();
            let t = eif::estimate(&moved, e, &spec).unwrap();
            prop_assert!(close(t.point * a, s.point, 1e-8), "{e}: {} vs {}", t.point * a, s.point);
            prop_assert!(close(t.se * a.abs(), s.se, 1e-8), "{e}: se");
            prop_assert!(close(t.p_value, s.p_value, 1e-8), "{e}: p");
            for (x, y) in t.eif.iter().zip(&s.eif) {
                prop_assert!(close(x * a, *y, 1e-8), "{e}: eif");
            }
        }
    }

    #[test]
    fn location_shift_leaves_fits_unchanged(seed in any::<u64>(), c in -20.0f64..20.0) {
        let data = sample(DgpKind::CSequential, 600, seed);
        let g2: Vec<f64> = data.g().iter().map(|g| g + c).collect();
        let moved = data.with_background(g2).unwrap();
        let spec = EstimationSpec::parametric();
        for &e in &BINARY {
            let s = eif::estimate(&data, e, &spec).unwrap();
            let t = eif::estimate(&moved, e, &spec).unwrap();
            prop_assert!(close(t.point, s.point, 1e-8), "{e}");
            for (x, y) in t.values.iter().zip(&s.values) {
                prop_assert!(close(*x, *y, 1e-8), "{e}: values");
            }
        }
    }

    #[test]
    fn filtering_is_idempotent(seed in any::<u64>(), q in 0.0f64..0.9) {
        let data = sample(DgpKind::AContinuous, 300, seed);
        let mut z: Vec<f64> = data.column("z").unwrap().to_vec();
        z.sort_by(f64::total_cmp);
        let min = z[(q * z.len() as f64) as usize];
        let spec = FilterSpec::trim("z", min);
        let once = apply_filter(&data, &spec).unwrap();
        let twice = apply_filter(&once, &spec).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert!(once.column("z").unwrap().iter().all(|&v| v >= min));
        prop_assert_eq!(apply_filter(&data, &FilterSpec::none()).unwrap(), data);
    }

    #[test]
    fn contrast_is_the_difference_of_components(seed in any::<u64>()) {
        let data = sample(DgpKind::AContinuous, 500, seed);
        let pair = run_ge(&data, &EstimationSpec::parametric()).unwrap();
        for t in [&pair.descriptive, &pair.selection_free] {
            let (a, b) = (&t.components.0, &t.components.1);
            prop_assert!((t.point - (a.point - b.point)).abs() < 1e-12);
            prop_assert!(t.eif.iter().sum::<f64>().abs() / (t.n as f64) < 1e-8);
            prop_assert!((t.ci_high - t.ci_low - 2.0 * 1.959964 * t.se).abs() < 1e-6 * t.se.max(1e-12));
            prop_assert!(t.ci_low <= t.point && t.point <= t.ci_high);
        }
    }

    #[test]
    fn outcome_scaling_scales_ge(seed in any::<u64>(), c in prop_oneof![0.1f64..10.0, -10.0f64..-0.1]) {
        let data = sample(DgpKind::AContinuous, 500, seed);
        let scaled = data.with_outcome(data.y().iter().map(|y| y * c).collect()).unwrap();
        let spec = EstimationSpec::parametric();
        let base = run_ge(&data, &spec).unwrap();
        let other = run_ge(&scaled, &spec).unwrap();
        prop_assert!(close(other.selection_free.point, c * base.selection_free.point, 1e-8));
        prop_assert!(close(other.descriptive.point, c * base.descriptive.point, 1e-8));
        prop_assert!(close(other.selection_free.se, c.abs() * base.selection_free.se, 1e-8));
    }

    #[test]
    fn p_value_decreases_in_the_z_ratio(se in 0.01f64..10.0, r1 in 0.0f64..8.0, r2 in 0.0f64..8.0) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        prop_assert!(two_sided_p(lo * se, se) >= two_sided_p(hi * se, se));
        prop_assert!(two_sided_p(-hi * se, se) == two_sided_p(hi * se, se));
        prop_assert_eq!(two_sided_p(0.0, se), 1.0);
    }

    #[test]
    fn slope_ci_has_nominal_width(seed in any::<u64>()) {
        let data = sample(DgpKind::AContinuous, 400, seed);
        let est = eif::estimate(&data, Estimand::LinearCf(1), &EstimationSpec::parametric()).unwrap();
        prop_assert!((est.ci_high - est.ci_low - 2.0 * 1.959964 * est.se).abs() < 1e-6 * est.se);
        prop_assert!(est.ci_low < est.point && est.point < est.ci_high);
        let self_contrast = contrast(TestName::GeSelectionFree, &est, &est).unwrap();
        prop_assert_eq!(self_contrast.point, 0.0);
        prop_assert_eq!(self_contrast.p_value, 1.0);
    }
}
