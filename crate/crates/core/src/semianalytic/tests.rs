use super::*;
use crate::jumplaw::{build_compound_law, JumpParams};
use crate::mc::{log_grid, trapezoid};
use crate::models::ModelKind;

/// Log-normal shaped mixing density around `centre`.
fn smooth_table(centre: f64, log_sd: f64) -> MixingDensityTable<f64> {
    let grid: Vec<f64> = (0..1500).map(|i| centre * 0.15 + i as f64 * centre * 0.002).collect();
    let values = grid
        .iter()
        .map(|&y| {
            let r = (y / centre).ln() / log_sd;
            (-0.5 * r * r).exp() / y
        })
        .collect();
    MixingDensityTable::from_values(grid, values, 0.01, 1_000_000, ModelKind::Heston).unwrap()
}

fn bump_table(centre: f64, width: f64) -> MixingDensityTable<f64> {
    let grid: Vec<f64> = (0..401).map(|i| centre - 8.0 * width + i as f64 * width * 0.04).collect();
    let values = grid
        .iter()
        .map(|&y| (-0.5 * ((y - centre) / width).powi(2)).exp())
        .collect();
    MixingDensityTable::from_values(grid, values, width, 1_000_000, ModelKind::Heston).unwrap()
}

#[test]
fn narrow_bump_is_a_point_mass() {
    let y = 0.3;
    let t = 1.0;
    let k = LambdaKernel::with_default_quadrature(bump_table(y, 1e-4), t).unwrap();
    for w in [0.0, 0.2, 0.5, 1.0] {
        let exact = (-(w * w) / (2.0 * t * y * y) - t * y * y / 8.0).exp() / y;
        let got = lambda_kernel(w, 0.0, &k).unwrap();
        assert!((got / exact - 1.0).abs() < 0.01, "w={w}: {got} vs {exact}");
    }
}

#[test]
fn kernel_depends_on_the_difference_only_and_peaks_at_zero() {
    let k = LambdaKernel::with_default_quadrature(smooth_table(0.25, 0.3), 1.0).unwrap();
    let a = lambda_kernel(1.5, 0.25, &k).unwrap();
    let b = lambda_kernel(2.0, 0.75, &k).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
    let bound = k.peak();
    for w in [-2.0, -0.1, 0.3, 1.0, 4.0] {
        let v = k.eval(w).unwrap();
        assert!(v > 0.0 && v <= bound);
        assert_eq!(v.to_bits(), k.eval(-w).unwrap().to_bits());
    }
}

#[test]
fn table_interpolation_tracks_direct_quadrature() {
    let k = LambdaKernel::with_default_quadrature(smooth_table(0.25, 0.3), 1.0).unwrap();
    let table = k.tabulate(None).unwrap();
    for i in 0..60 {
        let w = 0.0137 + i as f64 * 0.1173;
        let direct = k.eval(w).unwrap();
        let fast = table.eval(w);
        assert!((fast / direct - 1.0).abs() < 1e-6, "w={w}: {fast} vs {direct}");
    }
}

#[test]
fn refining_the_tolerance_moves_values_by_less_than_the_old_tolerance() {
    let table = smooth_table(0.25, 0.3);
    let coarse = LambdaKernel::new(table.clone(), 1.0, QuadSpec::new(0.0, 1e-8)).unwrap();
    let fine = LambdaKernel::new(table, 1.0, QuadSpec::new(0.0, 5e-9)).unwrap();
    for w in [0.0, 0.4, 1.3, 2.2] {
        let (a, b) = (coarse.eval(w).unwrap(), fine.eval(w).unwrap());
        assert!((a - b).abs() <= 1e-8 * b, "{a} {b}");
    }
}

#[test]
fn unperturbed_density_is_symmetric_and_normalized() {
    let (forward, t) = (1.3f64, 1.0);
    let k = LambdaKernel::with_default_quadrature(smooth_table(0.25, 0.3), t).unwrap();
    let table = k.tabulate(None).unwrap();
    for x in log_grid(0.13, 13.0, 25).unwrap() {
        let lhs = (forward / x).powi(3) * unperturbed_density(forward * forward / x, &table, forward).unwrap();
        let rhs = unperturbed_density(x, &table, forward).unwrap();
        assert!((lhs / rhs - 1.0).abs() < 1e-10);
    }
    let xs = log_grid(forward * (-6.0f64).exp(), forward * 6.0f64.exp(), 4001).unwrap();
    let d: Vec<f64> = xs.iter().map(|&x| unperturbed_density(x, &table, forward).unwrap()).collect();
    assert!((trapezoid(&xs, &d) - 1.0).abs() < 5e-3);
}

fn law(lambda: f64, t: f64) -> CompoundPoissonLaw<f64> {
    build_compound_law(t, &JumpParams::new(lambda, 0.4, 3.0, 2.0).unwrap(), 1e-10).unwrap()
}

#[test]
fn perturbed_density_is_normalized() {
    let (forward, t) = (1.0, 1.0);
    let table = LambdaKernel::with_default_quadrature(smooth_table(0.25, 0.3), t)
        .unwrap()
        .tabulate(None)
        .unwrap();
    let law = law(1.0, t);
    let xs = log_grid((-12.0f64).exp(), 12.0f64.exp(), 1201).unwrap();
    let curve = semi_analytic_curve(&xs, |x| perturbed_density(x, &table, &law, forward)).unwrap();
    assert!((curve.mass() - 1.0).abs() < 1e-2, "{}", curve.mass());
    assert!(curve.density.iter().all(|&d| d >= 0.0));
}

#[test]
fn vanishing_intensity_recovers_the_jump_free_density() {
    let table = LambdaKernel::with_default_quadrature(smooth_table(0.25, 0.3), 1.0)
        .unwrap()
        .tabulate(None)
        .unwrap();
    let law = law(1e-9, 1.0);
    // the jump part carries mass 1 − π₀ ≈ 1e−9 and E[e^{U/2}] < 2
    let jump_mass = 1.0 - law.atom_weight;
    for x in [0.3f64, 1.0, 2.5] {
        let a = perturbed_density(x, &table, &law, 1.0).unwrap();
        let b = unperturbed_density(x, &table, 1.0).unwrap();
        let bound = density_prefactor(x, 1.0, 1.0) * table.peak() * 2.0 * jump_mass;
        assert!((a - b).abs() <= bound, "{a} {b}");
    }
}

#[test]
fn reflected_law_reproduces_the_substitution() {
    let forward = 1.2f64;
    let table = LambdaKernel::with_default_quadrature(smooth_table(0.25, 0.3), 1.0)
        .unwrap()
        .tabulate(None)
        .unwrap();
    let law = law(1.0, 1.0);
    for x in [0.05, 0.4, 1.0, 3.0, 20.0] {
        let direct = (forward / x).powi(3) * perturbed_density(forward * forward / x, &table, &law, forward).unwrap();
        let reflected = reflected_density(x, &table, &law, forward).unwrap();
        assert!((direct / reflected - 1.0).abs() < 1e-7, "x={x}: {direct} vs {reflected}");
    }
}

#[test]
fn prefactor_scaling_under_translation() {
    // D̃ depends on x only through z: scaling F and x together rescales
    // x^{3/2} D̃ by exactly √(scale).
    let table = LambdaKernel::with_default_quadrature(smooth_table(0.25, 0.3), 1.0)
        .unwrap()
        .tabulate(None)
        .unwrap();
    let law = law(1.0, 1.0);
    let (x, f) = (1.7f64, 1.1);
    let a = x * x.sqrt() * perturbed_density(x, &table, &law, f).unwrap();
    let b = (2.0 * x) * (2.0 * x).sqrt() * perturbed_density(2.0 * x, &table, &law, 2.0 * f).unwrap();
    assert!((b / a - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn slowly_decaying_half_is_rejected() {
    let table = LambdaKernel::with_default_quadrature(smooth_table(0.25, 0.3), 1.0)
        .unwrap()
        .tabulate(None)
        .unwrap();
    let measure = JumpMeasure {
        atom: 0.5,
        up: HalfLinePart {
            coeffs: vec![0.1],
            rate: 0.505,
        },
        down: HalfLinePart {
            coeffs: vec![0.1],
            rate: 2.0,
        },
    };
    let err = perturbed_density_with(1.0, &table, &measure, 1.0, 1.0, &default_outer_quad()).unwrap_err();
    assert!(matches!(err, Error::UncertifiableTail { .. }));
}

#[test]
fn mismatched_horizons_are_rejected() {
    let table = LambdaKernel::with_default_quadrature(smooth_table(0.25, 0.3), 1.0)
        .unwrap()
        .tabulate(None)
        .unwrap();
    assert!(perturbed_density(1.0, &table, &law(1.0, 2.0), 1.0).is_err());
}

#[test]
fn gauss_hermite_integrates_moments() {
    let (x, w) = gauss_hermite(48);
    let m0: f64 = w.iter().sum();
    let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
    let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
    let sp = std::f64::consts::PI.sqrt();
    assert!((m0 - sp).abs() < 1e-13);
    assert!((m2 - sp / 2.0).abs() < 1e-13);
    assert!((m4 - 0.75 * sp).abs() < 1e-12);
}

#[test]
fn smoothing_a_lognormal_widens_it() {
    let (m, s, h) = (0.1f64, 0.3f64, 0.05f64);
    let lognormal = |x: f64, s: f64| {
        let r = (x.ln() - m) / s;
        Ok((-0.5 * r * r).exp() / (x * s * std::f64::consts::TAU.sqrt()))
    };
    for x in [0.5, 1.1, 2.0] {
        let smoothed = kernel_smoothed_density(x, h, &|y| lognormal(y, s)).unwrap();
        let exact = lognormal(x, (s * s + h * h).sqrt()).unwrap();
        assert!((smoothed / exact - 1.0).abs() < 1e-10);
    }
}
