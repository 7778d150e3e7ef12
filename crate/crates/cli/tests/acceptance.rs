//! Acceptance checks, one test per criterion. Each prints a single
//! `PASS criterion N: ...` or `FAIL criterion N: ...` line before asserting.
//! Tests hold a shared lock so wall-clock budgets are measured without
//! interference from each other.

use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use voljump_core::asymptotics::{heston_tail_exponent, smallest_positive_root, stein_stein_tail_exponent};
use voljump_core::jumplaw::{build_compound_law, convolution_coefficients, sample_jump_draw, JumpParams};
use voljump_core::mc::{
    estimate_expected_price, estimate_mixing_density, kde_price_curve, log_grid, quantile_sorted, silverman_bandwidth,
    simulate_alpha, simulate_log_prices, simulate_price_density, sort_samples, MixingGridSpec, Scheme, SimConfig,
};
use voljump_core::models::{HestonParams, ModelSpec, SteinSteinParams, VolModel};
use voljump_core::quadrature::{integrate, QuadSpec};
use voljump_core::rng::{path_stream, StreamPurpose};
use voljump_core::semianalytic::{
    kernel_smoothed_density, perturbed_density, unperturbed_density, LambdaKernel, LambdaTable,
};
use voljump_core::verify::{compare_before_after, CompareWindows, CurveMethod};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: u32, pass: bool, detail: String) {
    println!("{} criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} failed: {detail}");
}

// ---------------------------------------------------------------- oracles

/// Iterated trapezoid convolution of the jump density on `[-w, w]` with
/// spacing `h`; jumps of the integrand carry the mean of their one-sided
/// limits.
fn grid_power(p: &JumpParams, n: usize, h: f64, w: f64) -> Vec<f64> {
    let m = (w / h).round() as i64;
    let f = |u: f64| {
        if u > 0.0 {
            p.p_up * p.eta1 * (-p.eta1 * u).exp()
        } else if u < 0.0 {
            p.q_down * p.eta2 * (p.eta2 * u).exp()
        } else {
            0.5 * (p.p_up * p.eta1 + p.q_down * p.eta2)
        }
    };
    let base: Vec<f64> = (-m..=m).map(|j| f(j as f64 * h)).collect();
    let mut cur = base.clone();
    let len = base.len() as i64;
    for step in 1..n {
        let mut next = vec![0.0; base.len()];
        for (out, slot) in next.iter_mut().enumerate() {
            let j = out as i64 - m;
            let mut acc = 0.0;
            for i in (j - m).max(-m)..=(j + m).min(m) {
                let a = (i + m) as usize;
                let b = j - i + m;
                if (0..len).contains(&b) {
                    if step == 1 && i == 0 && j == 0 {
                        // both factors jump at v = 0; the product does not
                        acc += p.p_up * p.eta1 * p.q_down * p.eta2;
                    } else {
                        acc += base[a] * cur[b as usize];
                    }
                }
            }
            *slot = acc * h;
        }
        cur = next;
    }
    cur
}

/// Bisection for the smallest positive zero of `z cos z + s sin z`,
/// searched on `(π/2, π)` where the function changes sign for `s > 0`.
fn bisect_root(s: f64) -> f64 {
    let g = |z: f64| z * z.cos() + s * z.sin();
    let (mut lo, mut hi) = (std::f64::consts::FRAC_PI_2, std::f64::consts::PI);
    assert!(g(lo) * g(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(lo) * g(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn heston(c_vol: f64) -> HestonParams {
    HestonParams {
        mu: 0.0,
        q_rev: 1.0,
        m_level: 0.04,
        c_vol,
        x0: 1.0,
        y0: 0.04,
    }
}

fn stein_stein(sigma: f64) -> SteinSteinParams {
    SteinSteinParams {
        mu: 0.05,
        q_rev: 1.0,
        m_level: 0.2,
        sigma,
        x0: 1.0,
        y0: 0.2,
    }
}

fn tabulate(spec: &ModelSpec, cfg: &SimConfig) -> LambdaTable {
    let alpha = simulate_alpha(&spec.without_jumps(), cfg).unwrap();
    let table = estimate_mixing_density(&alpha, &MixingGridSpec::default(), spec.kind()).unwrap();
    LambdaKernel::with_default_quadrature(table, cfg.horizon)
        .unwrap()
        .tabulate(None)
        .unwrap()
}

// ---------------------------------------------------------------- criteria

#[test]
fn criterion_01_convolution_matches_numerical_oracle() {
    let _g = serial();
    let start = Instant::now();
    // p η₁ ≠ q η₂, so the jump of the density at 0 is exercised
    let p = JumpParams::new(1.0, 0.3, 4.0, 1.5).unwrap();
    let (h, w) = (0.01, 30.0);
    let mut worst = 0.0f64;
    for n in 2..=5 {
        let coeffs = convolution_coefficients(n, &p).unwrap();
        let coarse = grid_power(&p, n, h, w);
        let fine = grid_power(&p, n, h / 2.0, w);
        let m = (w / h).round() as i64;
        for j in -m..=m {
            let u = j as f64 * h;
            if u.abs() > 10.0 {
                continue;
            }
            // Richardson: (4 F_{h/2} − F_h)/3 cancels the h² term
            let oracle = (4.0 * fine[(2 * j + 2 * m) as usize] - coarse[(j + m) as usize]) / 3.0;
            worst = worst.max((coeffs.density(u) - oracle).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        worst <= 1e-5 && secs < 10.0,
        format!("sup |analytic - oracle| over n=2..5, u in [-10,10] = {worst:.3e} (tol 1e-5), {secs:.1}s (budget 10s)"),
    );
}

#[test]
fn criterion_02_compound_law_matches_histogram() {
    let _g = serial();
    let start = Instant::now();
    let n_samples = 10_000_000u64;
    let chunk = 100_000u64;
    let mut worst_z = 0.0f64;
    let mut atom_ok = true;
    let mut details = Vec::new();
    for (k, lt) in [0.5f64, 1.0, 2.0].into_iter().enumerate() {
        let p = JumpParams::new(lt, 0.4, 3.0, 2.0).unwrap();
        let law = build_compound_law(1.0, &p, 1e-10).unwrap();
        let mut counts = [0u64; 20];
        let mut zeros = 0u64;
        for c in 0..n_samples / chunk {
            let mut rng = path_stream(20261015 + k as u64, c, StreamPurpose::Jumps);
            for _ in 0..chunk {
                let d = sample_jump_draw(1.0, &p, &mut rng);
                if d.count == 0 {
                    zeros += 1;
                    continue;
                }
                let b = ((d.sum + 5.0) / 0.5).floor();
                if (0.0..20.0).contains(&b) {
                    counts[b as usize] += 1;
                }
            }
        }
        let nf = n_samples as f64;
        let spec = QuadSpec::new(1e-15, 1e-12);
        let mut side_worst = 0.0f64;
        for (b, &count) in counts.iter().enumerate() {
            let lo = -5.0 + 0.5 * b as f64;
            let prob = integrate(|u| law.continuous_density(u), lo, lo + 0.5, &spec).unwrap().value;
            let se = (prob * (1.0 - prob) / nf).sqrt();
            side_worst = side_worst.max((count as f64 / nf - prob).abs() / se);
        }
        let pi0 = law.atom_weight;
        let atom_z = (zeros as f64 / nf - pi0).abs() / (pi0 * (1.0 - pi0) / nf).sqrt();
        atom_ok &= atom_z <= 4.0;
        worst_z = worst_z.max(side_worst);
        details.push(format!("lt={lt}: max bin z={side_worst:.2}, atom z={atom_z:.2}"));
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        2,
        worst_z <= 3.0 && atom_ok && secs < 120.0,
        format!("{} (bins within 3 SE, atom within 4 sigma), {secs:.1}s (budget 120s)", details.join("; ")),
    );
}

#[test]
fn criterion_03_roots_and_tail_exponents() {
    let _g = serial();
    let r0 = smallest_positive_root(0.0f64).unwrap();
    let r1 = smallest_positive_root(1.0f64).unwrap();
    let r1_oracle = bisect_root(1.0);
    let r0_ok = (r0 - std::f64::consts::FRAC_PI_2).abs() <= 1e-12;
    let r1_ok = (r1 - r1_oracle).abs() <= 1e-9 && (r1 - 2.028757838).abs() <= 1e-9;
    let cs: Vec<f64> = (0..100).map(|i| 0.05 + 1.95 * i as f64 / 99.0).collect();
    let a3: Vec<f64> = cs.iter().map(|&c| heston_tail_exponent(&heston(c), 1.0).unwrap().exponent).collect();
    let b3: Vec<f64> = cs
        .iter()
        .map(|&s| stein_stein_tail_exponent(&stein_stein(s), 1.0).unwrap().exponent)
        .collect();
    let above_two = a3.iter().chain(&b3).all(|&e| e > 2.0);
    let decreasing = a3.windows(2).all(|w| w[1] < w[0]) && b3.windows(2).all(|w| w[1] < w[0]);
    report(
        3,
        r0_ok && r1_ok && above_two && decreasing,
        format!(
            "r0-pi/2={:.1e}, r1={r1:.12} (bisection {r1_oracle:.12}), min A3={:.4}, min B3={:.4}, monotone={decreasing}",
            r0 - std::f64::consts::FRAC_PI_2,
            a3.iter().cloned().fold(f64::INFINITY, f64::min),
            b3.iter().cloned().fold(f64::INFINITY, f64::min),
        ),
    );
}

#[test]
fn criterion_04_constant_volatility_is_lognormal() {
    let _g = serial();
    let start = Instant::now();
    let vol = 0.25f64;
    let spec = ModelSpec::unperturbed(VolModel::SteinStein(SteinSteinParams {
        mu: 0.02,
        q_rev: 0.0,
        m_level: 0.0,
        sigma: 1e-14,
        x0: 1.0,
        y0: vol,
    }));
    let cfg = SimConfig::new(1_000_000, 10, 1.0, 20261015, Scheme::ExactOu);
    let (m, s) = (0.02 - 0.5 * vol * vol, vol);
    let q = 1.959963984540054;
    let grid = log_grid((m - q * s).exp(), (m + q * s).exp(), 201).unwrap();
    let curve = simulate_price_density(&spec, &cfg, &grid).unwrap();
    let worst = grid
        .iter()
        .zip(&curve.density)
        .map(|(&x, &d)| {
            let z = (x.ln() - m) / s;
            let exact = (-0.5 * z * z).exp() / (x * s * std::f64::consts::TAU.sqrt());
            ((d - exact) / exact).abs()
        })
        .fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    report(
        4,
        worst <= 0.02 && secs < 60.0,
        format!("sup relative error over central 95% = {worst:.4} (tol 0.02), {secs:.1}s (budget 60s)"),
    );
}

#[test]
fn criterion_05_mixing_representation_matches_simulation() {
    let _g = serial();
    let start = Instant::now();
    let jumps = JumpParams::new(0.5, 0.4, 3.0, 2.0).unwrap();
    let cases = [
        (
            "heston",
            ModelSpec::new(VolModel::Heston(heston(0.3)), Some(jumps)),
            Scheme::CirFullTruncation,
        ),
        (
            "stein-stein",
            ModelSpec::new(VolModel::SteinStein(stein_stein(0.2)), Some(jumps)),
            Scheme::ExactOu,
        ),
    ];
    let mut all_ok = true;
    let mut details = Vec::new();
    for (k, (name, spec, scheme)) in cases.into_iter().enumerate() {
        let seed = 500 + 10 * k as u64;
        // direct estimate
        let cfg = SimConfig::new(1_000_000, 100, 1.0, seed, scheme);
        let log_prices = simulate_log_prices(&spec, &cfg).unwrap();
        let mut sorted = log_prices.clone();
        sort_samples(&mut sorted);
        let h = silverman_bandwidth(&sorted).unwrap();
        let grid = log_grid(
            quantile_sorted(&sorted, 0.05f64).exp(),
            quantile_sorted(&sorted, 0.95f64).exp(),
            61,
        )
        .unwrap();
        let mc = kde_price_curve(&log_prices, &grid, 40).unwrap();
        drop((log_prices, sorted));
        // representation over an independently simulated mixing table; the
        // kernel estimate targets the density smoothed by its own kernel
        let law = build_compound_law(1.0, &jumps, 1e-10).unwrap();
        let forward = spec.forward(1.0);
        let smoothed = |lam: &LambdaTable| -> Vec<f64> {
            let f = |x: f64| perturbed_density(x, lam, &law, forward);
            grid.iter().map(|&x| kernel_smoothed_density(x, h, &f).unwrap()).collect()
        };
        let acfg = SimConfig::new(1_000_000, 100, 1.0, seed + 1, scheme);
        let semi = smoothed(&tabulate(&spec, &acfg));
        // its Monte Carlo error, from independent replicate tables
        let reps: Vec<Vec<f64>> = (0..8)
            .map(|r| smoothed(&tabulate(&spec, &SimConfig::new(125_000, 100, 1.0, seed + 100 + r, scheme))))
            .collect();
        let mut worst = 0.0f64;
        for i in 0..grid.len() {
            let vals: Vec<f64> = reps.iter().map(|r| r[i]).collect();
            let mean = vals.iter().sum::<f64>() / 8.0;
            let var_rep = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 7.0;
            // a 125k-path table has 8x the variance of the 1M-path one
            let se_semi2 = var_rep / 8.0;
            let se_mc = mc.std_err.as_ref().unwrap()[i];
            let z = (mc.density[i] - semi[i]).abs() / (se_mc * se_mc + se_semi2).sqrt();
            worst = worst.max(z);
        }
        all_ok &= worst <= 3.0;
        details.push(format!("{name}: max |diff|/combined SE = {worst:.2}"));
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        5,
        all_ok && secs < 600.0,
        format!("{} over central 90% (tol 3), {secs:.1}s (budget 600s)", details.join("; ")),
    );
}

#[test]
fn criterion_06_symmetry_identity() {
    let _g = serial();
    let mut worst = 0.0f64;
    let mut details = Vec::new();
    let cases = [
        (ModelSpec::unperturbed(VolModel::SteinStein(stein_stein(0.2))), Scheme::ExactOu),
        (
            ModelSpec::unperturbed(VolModel::Heston(HestonParams { mu: 0.03, ..heston(0.3) })),
            Scheme::CirFullTruncation,
        ),
    ];
    for (spec, scheme) in cases {
        let cfg = SimConfig::new(200_000, 100, 1.0, 61, scheme);
        let lam = tabulate(&spec, &cfg);
        let f = spec.forward(1.0);
        let mut side = 0.0f64;
        for x in log_grid(0.1, 10.0, 81).unwrap() {
            let d = unperturbed_density(x, &lam, f).unwrap();
            let mirrored = unperturbed_density(f * f / x, &lam, f).unwrap();
            // D(F²/x) = (x/F)³ D(x)
            let rel = (mirrored - (x / f).powi(3) * d).abs() / mirrored;
            assert!(d > 0.0 && mirrored > 0.0);
            side = side.max(rel);
        }
        worst = worst.max(side);
        details.push(format!("{}: {side:.2e}", spec.kind().name()));
    }
    report(
        6,
        worst <= 0.01,
        format!("max relative symmetry defect on [x0/10, 10x0]: {} (tol 0.01)", details.join(", ")),
    );
}

/// Heston parameters with `A₃ ≈ 4`, far enough from the knife edge for
/// every jump configuration below.
fn heavy_heston() -> HestonParams {
    heston(1.554)
}

fn regime_verdicts(jumps: JumpParams, windows: CompareWindows) -> Vec<(bool, String)> {
    let spec = ModelSpec::new(VolModel::Heston(heavy_heston()), Some(jumps));
    let grid = log_grid(1e-5, 1e5, 201).unwrap();
    [20261015u64, 20261016]
        .into_iter()
        .map(|seed| {
            let cfg = SimConfig::new(200_000, 200, 1.0, seed, Scheme::CirFullTruncation);
            let r = compare_before_after(&spec, &cfg, &grid, &windows, CurveMethod::SemiAnalytic).unwrap();
            let side = r.large.as_ref().or(r.small.as_ref()).unwrap();
            (
                r.prediction_holds(),
                format!(
                    "seed {seed}: unperturbed {:.3}, perturbed {:.3}, predicted {:.3}",
                    side.unperturbed.slope,
                    side.perturbed.slope,
                    side.decision.predicted_slope()
                ),
            )
        })
        .collect()
}

#[test]
fn criterion_07_large_x_regime_dichotomy() {
    let _g = serial();
    let start = Instant::now();
    let a3 = heston_tail_exponent(&heavy_heston(), 1.0).unwrap().exponent;
    let windows = CompareWindows {
        large: Some((1e2, 1e4)),
        small: None,
    };
    let heavy = JumpParams::new(0.2, 0.3, 1.5, 3.0).unwrap();
    let light = JumpParams::new(0.2, 0.5, 10.0, 10.0).unwrap();
    assert!(1.0 + heavy.eta1 <= a3 - 1.0 && 1.0 + light.eta1 >= a3 + 1.0);
    let jump = regime_verdicts(heavy, windows);
    let diffusive = regime_verdicts(light, windows);
    let pass = jump.iter().chain(&diffusive).all(|v| v.0);
    let secs = start.elapsed().as_secs_f64();
    report(
        7,
        pass && secs < 1200.0,
        format!(
            "A3={a3:.3}; jump-dominated [{}]; diffusive [{}]; {secs:.0}s (budget 1200s)",
            jump.iter().map(|v| v.1.as_str()).collect::<Vec<_>>().join("; "),
            diffusive.iter().map(|v| v.1.as_str()).collect::<Vec<_>>().join("; "),
        ),
    );
}

#[test]
fn criterion_08_small_x_dichotomy() {
    let _g = serial();
    let start = Instant::now();
    let a3 = heston_tail_exponent(&heavy_heston(), 1.0).unwrap().exponent;
    let jumps = JumpParams::new(0.2, 0.3, 3.0, 0.5).unwrap();
    assert!(jumps.eta2 < a3 - 3.0);
    let verdicts = regime_verdicts(
        jumps,
        CompareWindows {
            large: None,
            small: Some((1e-4, 1e-2)),
        },
    );
    let pass = verdicts.iter().all(|v| v.0);
    let secs = start.elapsed().as_secs_f64();
    report(
        8,
        pass,
        format!(
            "A3={a3:.3}, eta2-1={:.3}; [{}]; {secs:.0}s",
            jumps.eta2 - 1.0,
            verdicts.iter().map(|v| v.1.as_str()).collect::<Vec<_>>().join("; ")
        ),
    );
}

#[test]
fn criterion_09_moment_identity() {
    let _g = serial();
    let mut worst = 0.0f64;
    let mut details = Vec::new();
    for (k, lt) in [0.25f64, 0.5, 1.0].into_iter().enumerate() {
        let (p, eta1, eta2) = (0.4, 4.0, 3.0);
        let jumps = JumpParams::new(lt, p, eta1, eta2).unwrap();
        let spec = ModelSpec::new(VolModel::Heston(HestonParams { mu: 0.03, ..heston(0.3) }), Some(jumps));
        let cfg = SimConfig::new(1_000_000, 50, 1.0, 900 + k as u64, Scheme::CirFullTruncation);
        let est = estimate_expected_price(&spec, &cfg).unwrap();
        let q = 1.0 - p;
        let exact = (0.03f64).exp() * (lt * (p * eta1 / (eta1 - 1.0) + q * eta2 / (eta2 + 1.0) - 1.0)).exp();
        let z = (est.mean - exact).abs() / est.std_err;
        worst = worst.max(z);
        details.push(format!("lt={lt}: {:.6} vs {exact:.6} (z={z:.2})", est.mean));
    }
    report(9, worst <= 4.0, format!("{} (tol 4 SE)", details.join("; ")));
}

// ---------------------------------------------------------------- criterion 10

const MODEL: &str = "
[model]
kind = heston
q_rev = 1.0
m_level = 0.04
c_vol = 0.5
y0 = 0.04

[jumps]
lambda = 0.5
p_up = 0.4
eta1 = 2.5
eta2 = 2.0

[sim]
n_paths = 20000
n_steps = 50
seed = 77
";

fn task_configs() -> Vec<(&'static str, String)> {
    vec![
        ("simulate", MODEL.to_string()),
        ("density", format!("{MODEL}\n[task]\nmethod = mc\nx_min = 0.2\nx_max = 5\nn_points = 41\n")),
        (
            "constants",
            format!("{MODEL}\n[task]\nsweep_param = c_vol\nsweep_from = 0.1\nsweep_to = 1\nsweep_count = 10\n"),
        ),
        ("convolve", format!("{MODEL}\n[task]\nn = 3\n")),
        (
            "verify-bounds",
            format!(
                "{MODEL}\n[task]\ntheorem = heston-large-x\nx_min = 0.01\nx_max = 300\nn_points = 46\nwindow_lo = 2\nwindow_hi = 100\n"
            ),
        ),
        (
            "compare",
            format!("{MODEL}\n[task]\nmethod = mc\nx_min = 0.1\nx_max = 10\nn_points = 61\nlarge_lo = 1.2\nlarge_hi = 4\n"),
        ),
    ]
}

fn run_cli(task: &str, config: &Path, out: &Path, threads: &str) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_voljump"))
        .args([task, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("VOLJUMP_THREADS", threads)
        .output()
        .unwrap()
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn criterion_10_reproducible_across_thread_counts() {
    let _g = serial();
    let tmp = tempfile::tempdir().unwrap();
    let mut mismatches = Vec::new();
    let mut checked = 0;
    for (task, text) in task_configs() {
        let config = tmp.path().join(format!("{task}.ini"));
        std::fs::write(&config, text).unwrap();
        let mut runs = Vec::new();
        for (label, threads) in [("a", "1"), ("b", "3")] {
            let out = tmp.path().join(format!("{task}-{label}"));
            let o = run_cli(task, &config, &out, threads);
            assert!(o.status.success(), "{task}: {}", String::from_utf8_lossy(&o.stderr));
            runs.push(out);
        }
        // a rerun from the recorded config copy must also agree
        let replay = tmp.path().join(format!("{task}-replay"));
        let o = run_cli(task, &runs[0].join("config.ini"), &replay, "2");
        assert!(o.status.success(), "{task}: {}", String::from_utf8_lossy(&o.stderr));
        let digest = |d: &Path| {
            std::fs::read_to_string(d.join("manifest.txt"))
                .unwrap()
                .lines()
                .find(|l| l.starts_with("config_sha256="))
                .unwrap()
                .to_string()
        };
        let reference = csv_files(&runs[0]);
        assert!(!reference.is_empty());
        for other in [&runs[1], &replay] {
            if csv_files(other) != reference || digest(other) != digest(&runs[0]) {
                mismatches.push(format!("{task} ({})", other.file_name().unwrap().to_string_lossy()));
            }
        }
        checked += reference.len();
    }
    report(
        10,
        mismatches.is_empty(),
        format!(
            "{checked} CSV files from 6 tasks compared across VOLJUMP_THREADS=1/3 and a manifest replay; mismatches: {:?}",
            mismatches
        ),
    );
}
