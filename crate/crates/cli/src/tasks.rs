//! One function per task. Each returns its tables; writing them out is
//! left to [`crate::run`].
//!
//! CSV schemas (fixed; absent values are empty cells):
//!
//! | file | columns |
//! |------|---------|
//! | `paths.csv` | path, alpha, jump_count, jump_sum, log_price |
//! | `summary.csv` | quantity, estimate, std_err, reference |
//! | `density.csv`, `density_unperturbed.csv` | x, mc_kde, mc_std_err, semi_analytic |
//! | `constants.csv` | s_arg, root, C, A3 (Heston) or s_arg, root, G, B3 (Stein-Stein) |
//! | `convolve.csv` | u, analytic, oracle, abs_err |
//! | `sandwich.csv` | x, density, lower, upper |
//! | `bounds_report.csv` | theorem, epsilon, c_lower, c_upper, window_lo, window_hi, n_points, fraction_satisfied, envelope_ratio, lower_trend, upper_trend, pass, threshold |
//! | `compare_curves.csv` | x, unperturbed, unperturbed_std_err, perturbed, perturbed_std_err |
//! | `compare_report.csv` | side, jump_exponent, diffusive_exponent, dominant, margin, jumps_dominate, predicted_slope, unperturbed_slope, unperturbed_slope_std_err, perturbed_slope, perturbed_slope_std_err, window_lo, window_hi, slope_matches, ordering_holds, prediction_holds |

use anyhow::{anyhow, bail, Result};
use voljump_core::asymptotics::{heston_tail_exponent, stein_stein_tail_exponent};
use voljump_core::jumplaw::{build_compound_law, convolution_coefficients, DEFAULT_TAIL_MASS_TOL};
use voljump_core::mc::{
    estimate_mixing_density, log_grid, simulate_alpha, simulate_path_draws, simulate_price_density, DensityCurve,
    MixingGridSpec,
};
use voljump_core::models::{expected_price, ModelKind, ModelSpec, VolModel};
use voljump_core::oracle::{richardson_convolution_power, truncation_half_width};
use voljump_core::semianalytic::{perturbed_density, semi_analytic_curve, unperturbed_density, LambdaKernel};
use voljump_core::verify::{
    check_sandwich, compare_before_after, sandwich_bounds, tail_constants, CompareWindows, CurveMethod, Provenance,
    SideComparison, Theorem, EPSILON_SWEEP,
};
use voljump_core::SimConfigF64;

use crate::config::{ConfigError, ExperimentConfig, Task};
use crate::output::{Cell, Table};

/// Tables to write plus `key=value` facts for the manifest.
#[derive(Debug, Default)]
pub struct TaskOutput {
    pub tables: Vec<(String, Table)>,
    pub facts: Vec<(String, String)>,
}

impl TaskOutput {
    fn table(&mut self, name: &str, table: Table) {
        self.tables.push((name.to_string(), table));
    }

    fn fact(&mut self, key: &str, value: impl ToString) {
        self.facts.push((key.to_string(), value.to_string()));
    }
}

pub fn execute(cfg: &ExperimentConfig, digest: &str) -> Result<TaskOutput> {
    match cfg.task {
        Task::Simulate => simulate(cfg),
        Task::Density => density(cfg),
        Task::Constants => constants(cfg),
        Task::Convolve => convolve(cfg),
        Task::VerifyBounds => verify_bounds(cfg, digest),
        Task::Compare => compare(cfg),
    }
}

fn opt_real(v: Option<f64>) -> Cell {
    match v {
        Some(v) => Cell::Real(v),
        None => Cell::Text(String::new()),
    }
}

fn simulate(cfg: &ExperimentConfig) -> Result<TaskOutput> {
    let (spec, sim) = (cfg.spec(), cfg.sim());
    let draws = simulate_path_draws(spec, sim)?;
    let t = sim.horizon;
    let mut paths = Table::new(&["path", "alpha", "jump_count", "jump_sum", "log_price"]);
    let mut prices = Vec::with_capacity(draws.len());
    let mut no_jump = 0usize;
    for (i, d) in draws.iter().enumerate() {
        let lp = d.log_price(spec, t);
        prices.push(lp.exp());
        no_jump += (d.jump_count == 0) as usize;
        paths.push(vec![i.into(), d.alpha.into(), d.jump_count.into(), d.jump_sum.into(), lp.into()]);
    }
    let n = prices.len() as f64;
    let mean = prices.iter().sum::<f64>() / n;
    let var = prices.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let mut summary = Table::new(&["quantity", "estimate", "std_err", "reference"]);
    summary.push(vec![
        "mean_price".into(),
        mean.into(),
        (var / n).sqrt().into(),
        expected_price(spec, t).into(),
    ]);
    if let Some(j) = spec.jumps {
        let p = no_jump as f64 / n;
        let pi0 = (-j.lambda * t).exp();
        summary.push(vec![
            "no_jump_fraction".into(),
            p.into(),
            (pi0 * (1.0 - pi0) / n).sqrt().into(),
            pi0.into(),
        ]);
    }
    let mut out = TaskOutput::default();
    out.table("paths.csv", paths);
    out.table("summary.csv", summary);
    Ok(out)
}

/// Semi-analytic curve for `spec` over a mixing table simulated from its
/// jump-free twin.
fn semi_curve(spec: &ModelSpec<f64>, sim: &SimConfigF64, grid: &[f64]) -> Result<DensityCurve<f64>> {
    let t = sim.horizon;
    let alpha = simulate_alpha(&spec.without_jumps(), sim)?;
    let table = estimate_mixing_density(&alpha, &MixingGridSpec::default(), spec.kind())?;
    let lambda = LambdaKernel::with_default_quadrature(table, t)?.tabulate(None)?;
    let forward = spec.forward(t);
    let curve = match spec.jumps {
        Some(j) => {
            let law = build_compound_law(t, &j, DEFAULT_TAIL_MASS_TOL)?;
            semi_analytic_curve(grid, |x| perturbed_density(x, &lambda, &law, forward))?
        }
        None => semi_analytic_curve(grid, |x| unperturbed_density(x, &lambda, forward))?,
    };
    Ok(curve)
}

fn curve_for(method: &str, spec: &ModelSpec<f64>, sim: &SimConfigF64, grid: &[f64]) -> Result<DensityCurve<f64>> {
    Ok(match method {
        "mc" => simulate_price_density(spec, sim, grid)?,
        _ => semi_curve(spec, sim, grid)?,
    })
}

fn grid(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    Ok(log_grid(cfg.params.x_min, cfg.params.x_max, cfg.params.n_points)?)
}

fn density(cfg: &ExperimentConfig) -> Result<TaskOutput> {
    let (spec, sim) = (cfg.spec(), cfg.sim());
    let grid = grid(cfg)?;
    let method = cfg.params.method.as_str();
    let mut out = TaskOutput::default();
    let mut specs = vec![("density.csv", *spec)];
    if spec.jumps.is_some() {
        specs.push(("density_unperturbed.csv", spec.without_jumps()));
    }
    for (name, s) in specs {
        let mc = (method != "semi").then(|| simulate_price_density(&s, sim, &grid)).transpose()?;
        let semi = (method != "mc").then(|| semi_curve(&s, sim, &grid)).transpose()?;
        let mut table = Table::new(&["x", "mc_kde", "mc_std_err", "semi_analytic"]);
        for (i, &x) in grid.iter().enumerate() {
            table.push(vec![
                x.into(),
                opt_real(mc.as_ref().map(|c| c.density[i])),
                opt_real(mc.as_ref().and_then(|c| c.std_err.as_ref()).map(|e| e[i])),
                opt_real(semi.as_ref().map(|c| c.density[i])),
            ]);
        }
        if let Some(c) = &mc {
            out.fact(&format!("{}.mc_mass", name.trim_end_matches(".csv")), c.mass());
        }
        if let Some(c) = &semi {
            out.fact(&format!("{}.semi_mass", name.trim_end_matches(".csv")), c.mass());
        }
        out.table(name, table);
    }
    Ok(out)
}

fn constants(cfg: &ExperimentConfig) -> Result<TaskOutput> {
    let spec = cfg.spec();
    let p = &cfg.params;
    let count = if p.sweep_param.is_some() { p.sweep_count } else { 1 };
    let header: &[&'static str] = match spec.kind() {
        ModelKind::Heston => &["s_arg", "root", "C", "A3"],
        ModelKind::SteinStein => &["s_arg", "root", "G", "B3"],
        ModelKind::HullWhite => bail!(ConfigError::new(
            "model.kind",
            "the hull-white model has no closed-form tail exponent"
        )),
    };
    let mut table = Table::new(header);
    let mut min_exponent = f64::INFINITY;
    for i in 0..count {
        let value = if count == 1 {
            p.sweep_from
        } else {
            p.sweep_from + (p.sweep_to - p.sweep_from) * i as f64 / (count - 1) as f64
        };
        let mut model = spec.model;
        let mut t = p.horizon;
        if let Some(name) = &p.sweep_param {
            let bad = || anyhow!(ConfigError::new("task.sweep_param", format!("`{name}` is not a parameter of this model")));
            match (&mut model, name.as_str()) {
                (_, "horizon") => t = value,
                (VolModel::Heston(h), "c_vol") => h.c_vol = value,
                (VolModel::Heston(h), "q_rev") => h.q_rev = value,
                (VolModel::Heston(h), "m_level") => h.m_level = value,
                (VolModel::Heston(h), "y0") => h.y0 = value,
                (VolModel::SteinStein(s), "sigma") => s.sigma = value,
                (VolModel::SteinStein(s), "q_rev") => s.q_rev = value,
                (VolModel::SteinStein(s), "m_level") => s.m_level = value,
                (VolModel::SteinStein(s), "y0") => s.y0 = value,
                _ => return Err(bad()),
            }
        }
        let tc = match &model {
            VolModel::Heston(h) => heston_tail_exponent(h, t)?,
            VolModel::SteinStein(s) => stein_stein_tail_exponent(s, t)?,
            VolModel::HullWhite(_) => unreachable!("rejected above"),
        };
        min_exponent = min_exponent.min(tc.exponent);
        table.push(vec![tc.s_arg.into(), tc.root.into(), tc.auxiliary.into(), tc.exponent.into()]);
    }
    let mut out = TaskOutput::default();
    out.fact("min_exponent", crate::output::format_real(min_exponent));
    out.table("constants.csv", table);
    Ok(out)
}

fn convolve(cfg: &ExperimentConfig) -> Result<TaskOutput> {
    let jumps = cfg.jumps();
    let p = &cfg.params;
    let coeffs = convolution_coefficients(p.n, &jumps)?;
    let width = truncation_half_width(&jumps, p.n, p.u_max);
    let oracle = richardson_convolution_power(&jumps, p.n, p.spacing, width);
    let mut table = Table::new(&["u", "analytic", "oracle", "abs_err"]);
    let mut worst = 0.0f64;
    for (i, u) in oracle.abscissae().into_iter().enumerate() {
        if u.abs() > p.u_max + 0.5 * p.spacing {
            continue;
        }
        let analytic = coeffs.density(u);
        let err = (analytic - oracle.values[i]).abs();
        worst = worst.max(err);
        table.push(vec![u.into(), analytic.into(), oracle.values[i].into(), err.into()]);
    }
    let mut out = TaskOutput::default();
    out.fact("max_abs_err", crate::output::format_real(worst));
    out.table("convolve.csv", table);
    Ok(out)
}

fn verify_bounds(cfg: &ExperimentConfig, digest: &str) -> Result<TaskOutput> {
    let (spec, sim) = (cfg.spec(), cfg.sim());
    let p = &cfg.params;
    let theorem = Theorem::parse(p.theorem.as_deref().unwrap_or_default()).expect("validated tag");
    if theorem.model() != spec.kind() {
        bail!(ConfigError::new(
            "task.theorem",
            format!("{} does not apply to the {} model", theorem.tag(), spec.kind().name()),
        ));
    }
    let jumps = cfg.jumps();
    let window = p.window.expect("validated window");
    let grid = grid(cfg)?;
    let curve = curve_for(&p.method, spec, sim, &grid)?;
    let constants = tail_constants(spec, sim.horizon)?;
    let provenance = Provenance {
        seed: Some(sim.master_seed),
        config_digest: Some(digest.to_string()),
    };
    let mut epsilons = vec![p.epsilon];
    epsilons.extend(EPSILON_SWEEP.iter().copied().filter(|e| *e != p.epsilon));
    let mut report = Table::new(&[
        "theorem",
        "epsilon",
        "c_lower",
        "c_upper",
        "window_lo",
        "window_hi",
        "n_points",
        "fraction_satisfied",
        "envelope_ratio",
        "lower_trend",
        "upper_trend",
        "pass",
        "threshold",
    ]);
    let mut primary = None;
    for eps in epsilons {
        let r = check_sandwich(theorem, &curve, &constants, &jumps, eps, window)?.with_provenance(provenance.clone());
        report.push(vec![
            theorem.tag().into(),
            r.epsilon.into(),
            r.c_lower.into(),
            r.c_upper.into(),
            r.window.0.into(),
            r.window.1.into(),
            r.n_points.into(),
            r.fraction_satisfied.into(),
            r.envelope_ratio.into(),
            r.lower_trend.into(),
            r.upper_trend.into(),
            r.pass.into(),
            opt_real(r.threshold),
        ]);
        primary.get_or_insert(r);
    }
    let primary = primary.expect("at least one epsilon");
    let mut envelope = Table::new(&["x", "density", "lower", "upper"]);
    for (&x, &d) in curve.x_grid.iter().zip(&curve.density) {
        let (lo, hi) = sandwich_bounds(theorem, &constants, &jumps, primary.epsilon, x);
        envelope.push(vec![x.into(), d.into(), (primary.c_lower * lo).into(), (primary.c_upper * hi).into()]);
    }
    let mut out = TaskOutput::default();
    out.fact("pass", primary.pass);
    out.table("sandwich.csv", envelope);
    out.table("bounds_report.csv", report);
    Ok(out)
}

fn compare(cfg: &ExperimentConfig) -> Result<TaskOutput> {
    let (spec, sim) = (cfg.spec(), cfg.sim());
    let p = &cfg.params;
    let method = if p.method == "mc" {
        CurveMethod::MonteCarlo
    } else {
        CurveMethod::SemiAnalytic
    };
    let windows = CompareWindows {
        large: p.large_window,
        small: p.small_window,
    };
    let report = compare_before_after(spec, sim, &grid(cfg)?, &windows, method)?;
    let mut curves = Table::new(&["x", "unperturbed", "unperturbed_std_err", "perturbed", "perturbed_std_err"]);
    for i in 0..report.unperturbed.len() {
        let se = |c: &DensityCurve<f64>| opt_real(c.std_err.as_ref().map(|e| e[i]));
        curves.push(vec![
            report.unperturbed.x_grid[i].into(),
            report.unperturbed.density[i].into(),
            se(&report.unperturbed),
            report.perturbed.density[i].into(),
            se(&report.perturbed),
        ]);
    }
    let mut sides = Table::new(&[
        "side",
        "jump_exponent",
        "diffusive_exponent",
        "dominant",
        "margin",
        "jumps_dominate",
        "predicted_slope",
        "unperturbed_slope",
        "unperturbed_slope_std_err",
        "perturbed_slope",
        "perturbed_slope_std_err",
        "window_lo",
        "window_hi",
        "slope_matches",
        "ordering_holds",
        "prediction_holds",
    ]);
    let rows: [(&str, &Option<SideComparison<f64>>); 2] = [("large", &report.large), ("small", &report.small)];
    for (name, side) in rows {
        let Some(s) = side else { continue };
        let d = &s.decision;
        sides.push(vec![
            name.into(),
            d.jump_exponent.into(),
            d.diffusive_exponent.into(),
            d.dominant.into(),
            d.margin.into(),
            d.jumps_dominate.into(),
            d.predicted_slope().into(),
            s.unperturbed.slope.into(),
            s.unperturbed.slope_std_err.into(),
            s.perturbed.slope.into(),
            s.perturbed.slope_std_err.into(),
            s.perturbed.window.0.into(),
            s.perturbed.window.1.into(),
            s.slope_matches.into(),
            s.ordering_holds.into(),
            s.prediction_holds().into(),
        ]);
    }
    let mut out = TaskOutput::default();
    out.fact("prediction_holds", report.prediction_holds());
    out.table("compare_curves.csv", curves);
    out.table("compare_report.csv", sides);
    Ok(out)
}
