use super::*;
use crate::mc::{log_grid, CurveSource, Scheme};
use crate::models::HestonParams;
use proptest::prelude::*;

fn constants(exponent: f64) -> TailConstants<f64> {
    TailConstants {
        model: ModelKind::Heston,
        exponent,
        auxiliary: 0.0,
        root: std::f64::consts::FRAC_PI_2,
        s_arg: 0.0,
    }
}

fn jumps(eta1: f64, eta2: f64) -> JumpParams<f64> {
    JumpParams::new(0.5, 0.4, eta1, eta2).unwrap()
}

fn curve(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> DensityCurve<f64> {
    let xs = log_grid(lo, hi, 120).unwrap();
    let d = xs.iter().map(|&x| f(x)).collect();
    DensityCurve::new(xs, d, None, CurveSource::SemiAnalytic, None).unwrap()
}

#[test]
fn heavy_jumps_dominate_light_jumps_do_not() {
    let c = constants(4.0);
    let heavy = classify_regime(&c, &jumps(1.5, 3.0), TailSide::Large).unwrap();
    assert!(heavy.jumps_dominate);
    assert_eq!(heavy.dominant, 2.5);
    assert_eq!(heavy.predicted_slope(), -2.5);
    let light = classify_regime(&c, &jumps(10.0, 3.0), TailSide::Large).unwrap();
    assert!(!light.jumps_dominate);
    assert_eq!(light.dominant, 4.0);
}

#[test]
fn small_side_compares_eta2_with_shifted_exponent() {
    let c = constants(4.0);
    let d = classify_regime(&c, &jumps(3.0, 0.5), TailSide::Small).unwrap();
    assert!(d.jumps_dominate);
    assert_eq!(d.dominant, -0.5);
    let d = classify_regime(&c, &jumps(3.0, 5.0), TailSide::Small).unwrap();
    assert!(!d.jumps_dominate);
    assert_eq!(d.dominant, 1.0);
}

#[test]
fn knife_edge_is_indeterminate() {
    let err = classify_regime(&constants(4.0), &jumps(2.98, 3.0), TailSide::Large).unwrap_err();
    assert!(matches!(err, Error::Indeterminate { .. }));
}

#[test]
fn hull_white_never_changes() {
    for eta1 in [1.01, 1.5, 10.0] {
        let d = classify_hull_white(&jumps(eta1, 2.0)).unwrap();
        assert!(!d.jumps_dominate);
        assert_eq!(d.dominant, 2.0);
    }
}

#[test]
fn exact_power_law_passes_with_equal_constants() {
    let c = constants(4.0);
    let curve = curve(2.0, 200.0, |x| 3.0 * x.powf(-4.0));
    let r = check_sandwich(Theorem::HestonLarge, &curve, &c, &jumps(30.0, 2.0), 0.0, (3.0, 150.0)).unwrap();
    assert!(r.pass);
    assert!((r.c_upper / r.c_lower - 1.0).abs() < 1e-9);
    assert_eq!(r.fraction_satisfied, 1.0);
    assert_eq!(r.threshold, Some(r.window.0.max(curve.x_grid[curve.x_grid.partition_point(|&x| x < 3.0)])));
}

#[test]
fn tail_heavier_than_both_terms_fails() {
    let c = constants(4.0);
    let eta1 = 2.0;
    let curve = curve(2.0, 200.0, |x| x.powf(-(1.0 + eta1) / 2.0));
    let r = check_sandwich(Theorem::HestonLarge, &curve, &c, &jumps(eta1, 2.0), 0.1, (3.0, 150.0)).unwrap();
    assert!(!r.pass);
    assert!(r.upper_trend > TREND_TOLERANCE);
    assert_eq!(r.threshold, None);
}

#[test]
fn small_x_power_passes() {
    let c = constants(4.0);
    let eta2 = 0.5;
    let curve = curve(1e-4, 0.5, |x| 0.2 * x.powf(eta2 - 1.0) + x.powf(1.0));
    let r = check_sandwich(Theorem::HestonSmall, &curve, &c, &jumps(3.0, eta2), 0.1, (2e-4, 0.3)).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn wrong_model_constants_are_rejected() {
    let curve = curve(2.0, 200.0, |x| x.powf(-4.0));
    assert!(check_sandwich(Theorem::SteinSteinLarge, &curve, &constants(4.0), &jumps(3.0, 2.0), 0.1, (3.0, 150.0)).is_err());
}

#[test]
fn sweeps_cover_the_three_slacks() {
    let curve = curve(2.0, 200.0, |x| x.powf(-2.5));
    let reps = sandwich_sweep(Theorem::HestonLarge, &curve, &constants(4.0), &jumps(1.5, 2.0), (3.0, 150.0)).unwrap();
    let eps: Vec<f64> = reps.iter().map(|r| r.epsilon).collect();
    assert_eq!(eps, EPSILON_SWEEP.to_vec());
    assert!(reps.iter().all(|r| r.pass), "{reps:?}");
}

proptest! {
    #[test]
    fn passing_reports_have_ordered_constants(
        a in 2.1f64..6.0, eta1 in 1.1f64..8.0, w1 in 0.01f64..10.0, w2 in 0.01f64..10.0, eps in 0.0f64..0.3
    ) {
        let jumps = JumpParams::new(0.5, 0.4, eta1, 2.0).unwrap();
        let c = constants(a);
        let curve = curve(2.0, 200.0, |x| w1 * x.powf(-a) + w2 * x.powf(-(1.0 + eta1)));
        let r = check_sandwich(Theorem::HestonLarge, &curve, &c, &jumps, eps, (3.0, 150.0)).unwrap();
        // a mixture whose steeper term still dominates the window may fail:
        // on a finite window it is indistinguishable from a too-light tail
        if w2 >= w1 && 1.0 + eta1 < a || w1 >= w2 && a < 1.0 + eta1 {
            prop_assert!(r.pass, "{:?}", r);
        }
        for &x in curve.x_grid.iter().filter(|&&x| (3.0..=150.0).contains(&x)) {
            let (l, u) = sandwich_bounds(Theorem::HestonLarge, &c, &jumps, eps, x);
            prop_assert!(r.c_lower * l <= r.c_upper * u * (1.0 + 1e-12));
        }
        let again = check_sandwich(Theorem::HestonLarge, &curve, &c, &jumps, eps, (3.0, 150.0)).unwrap();
        prop_assert_eq!(r, again);
    }
}

#[test]
fn comparison_needs_jumps() {
    let spec = ModelSpec::unperturbed(VolModel::Heston(HestonParams {
        mu: 0.0,
        q_rev: 1.0,
        m_level: 0.04,
        c_vol: 0.5,
        x0: 1.0,
        y0: 0.04,
    }));
    let cfg = SimConfig::new(1000, 10, 1.0, 1, Scheme::CirFullTruncation);
    let err = compare_before_after(&spec, &cfg, &[1.0, 2.0], &CompareWindows::default(), CurveMethod::MonteCarlo)
        .unwrap_err();
    assert_eq!(err, Error::MissingJumps);
}
