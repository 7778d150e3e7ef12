//! Checks of the two-sided tail estimates for perturbed models: regime
//! classification, sandwich fits, and before/after comparisons.

use crate::asymptotics::{
    fit_tail_slope, heston_tail_exponent, stein_stein_tail_exponent, window_indices, TailConstants, TailFitReport,
    MIN_FIT_POINTS,
};
use crate::error::{Error, Result};
use crate::jumplaw::{build_compound_law, JumpParams, DEFAULT_TAIL_MASS_TOL};
use crate::mc::{
    estimate_mixing_density, simulate_alpha, simulate_price_density, DensityCurve, MixingGridSpec, SimConfig,
};
use crate::models::{ModelKind, ModelSpec, VolModel};
use crate::real::Real;
use crate::semianalytic::{perturbed_density, semi_analytic_curve, unperturbed_density, LambdaKernel};

/// Exponent gap below which the two regimes are not separable at desk scale.
pub const KNIFE_EDGE_GUARD: f64 = 0.05;
/// Default exponent slack in the upper bound.
pub const DEFAULT_EPSILON: f64 = 0.1;
/// Slack values reported alongside every sandwich check.
pub const EPSILON_SWEEP: [f64; 3] = [0.05, 0.1, 0.25];
/// Envelopes wider than this factor are treated as vacuous.
pub const MAX_ENVELOPE_RATIO: f64 = 1e4;
/// Largest drift (in log-log slope) of density/bound towards the tail that
/// is still read as a bounded ratio.
pub const TREND_TOLERANCE: f64 = 0.05;
/// Fitted slopes closer than this agree with a predicted exponent.
pub const SLOPE_AGREEMENT: f64 = 0.15;
/// A perturbation changes the tail when fitted slopes differ by this much.
pub const SLOPE_SEPARATION: f64 = 0.3;

/// Which end of the price axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TailSide {
    /// `x → ∞`.
    Large,
    /// `x → 0`.
    Small,
}

impl TailSide {
    pub fn name(self) -> &'static str {
        match self {
            TailSide::Large => "large-x",
            TailSide::Small => "small-x",
        }
    }
}

/// The four two-sided estimates: model × tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Theorem {
    HestonLarge,
    HestonSmall,
    SteinSteinLarge,
    SteinSteinSmall,
}

impl Theorem {
    pub fn new(model: ModelKind, side: TailSide) -> Result<Self> {
        match (model, side) {
            (ModelKind::Heston, TailSide::Large) => Ok(Theorem::HestonLarge),
            (ModelKind::Heston, TailSide::Small) => Ok(Theorem::HestonSmall),
            (ModelKind::SteinStein, TailSide::Large) => Ok(Theorem::SteinSteinLarge),
            (ModelKind::SteinStein, TailSide::Small) => Ok(Theorem::SteinSteinSmall),
            (ModelKind::HullWhite, _) => Err(Error::InvalidArgument(
                "no two-sided estimate is checked for the Hull-White model".into(),
            )),
        }
    }

    pub fn model(self) -> ModelKind {
        match self {
            Theorem::HestonLarge | Theorem::HestonSmall => ModelKind::Heston,
            Theorem::SteinSteinLarge | Theorem::SteinSteinSmall => ModelKind::SteinStein,
        }
    }

    pub fn side(self) -> TailSide {
        match self {
            Theorem::HestonLarge | Theorem::SteinSteinLarge => TailSide::Large,
            Theorem::HestonSmall | Theorem::SteinSteinSmall => TailSide::Small,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Theorem::HestonLarge => "heston-large-x",
            Theorem::HestonSmall => "heston-small-x",
            Theorem::SteinSteinLarge => "stein-stein-large-x",
            Theorem::SteinSteinSmall => "stein-stein-small-x",
        }
    }

    pub fn parse(tag: &str) -> Option<Self> {
        [
            Theorem::HestonLarge,
            Theorem::HestonSmall,
            Theorem::SteinSteinLarge,
            Theorem::SteinSteinSmall,
        ]
        .into_iter()
        .find(|t| t.tag() == tag)
    }
}

/// Outcome of comparing the jump exponent with the diffusive one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeDecision<T = f64> {
    pub model: ModelKind,
    pub side: TailSide,
    /// `1+η₁` (large x) or `η₂` (small x).
    pub jump_exponent: T,
    /// `A₃`/`B₃` (large x) or `A₃−2`/`B₃−2` (small x); `2` for Hull-White.
    pub diffusive_exponent: T,
    /// Predicted power of the perturbed density: the decay exponent
    /// `min(1+η₁, A₃)` for large `x` (density `~ x^{−exponent}`), the power
    /// `min(η₂−1, A₃−3)` for small `x` (density `~ x^{power}`).
    pub dominant: T,
    /// `|jump_exponent − diffusive_exponent|`.
    pub margin: T,
    /// Whether the jump term dictates the tail.
    pub jumps_dominate: bool,
}

impl<T: Real> RegimeDecision<T> {
    /// Predicted log-log slope of the perturbed density on this side.
    pub fn predicted_slope(&self) -> T {
        match self.side {
            TailSide::Large => -self.dominant,
            TailSide::Small => self.dominant,
        }
    }
}

/// Decides which exponent governs the perturbed tail on one side. Depends
/// only on the exponents, never on prefactors.
pub fn classify_regime<T: Real>(
    constants: &TailConstants<T>,
    jumps: &JumpParams<T>,
    side: TailSide,
) -> Result<RegimeDecision<T>> {
    jumps.validate()?;
    let (jump_exponent, diffusive_exponent) = match side {
        TailSide::Large => (T::one() + jumps.eta1, constants.exponent),
        TailSide::Small => (jumps.eta2, constants.exponent - T::lit(2.0)),
    };
    let margin = (jump_exponent - diffusive_exponent).abs();
    if margin < T::lit(KNIFE_EDGE_GUARD) {
        return Err(Error::Indeterminate {
            jump_exponent: jump_exponent.to_f64_lossy(),
            diffusive_exponent: diffusive_exponent.to_f64_lossy(),
            guard: KNIFE_EDGE_GUARD,
        });
    }
    let jumps_dominate = jump_exponent < diffusive_exponent;
    let dominant = match side {
        TailSide::Large => jump_exponent.min(diffusive_exponent),
        TailSide::Small => (jump_exponent - T::one()).min(diffusive_exponent - T::one()),
    };
    Ok(RegimeDecision {
        model: constants.model,
        side,
        jump_exponent,
        diffusive_exponent,
        dominant,
        margin,
        jumps_dominate,
    })
}

/// Hull-White: the unperturbed density already decays like `x^{−2}` and
/// `1+η₁ > 2`, so jumps never change the large-`x` tail.
pub fn classify_hull_white<T: Real>(jumps: &JumpParams<T>) -> Result<RegimeDecision<T>> {
    jumps.validate()?;
    let two = T::lit(2.0);
    let jump_exponent = T::one() + jumps.eta1;
    Ok(RegimeDecision {
        model: ModelKind::HullWhite,
        side: TailSide::Large,
        jump_exponent,
        diffusive_exponent: two,
        dominant: two,
        margin: jump_exponent - two,
        jumps_dominate: false,
    })
}

/// Tail constants for a Heston or Stein-Stein specification.
pub fn tail_constants<T: Real>(spec: &ModelSpec<T>, t: T) -> Result<TailConstants<T>> {
    match &spec.model {
        VolModel::Heston(p) => heston_tail_exponent(p, t),
        VolModel::SteinStein(p) => stein_stein_tail_exponent(p, t),
        VolModel::HullWhite(_) => Err(Error::InvalidArgument(
            "Hull-White has no closed-form tail exponent".into(),
        )),
    }
}

/// Where a curve came from, for reports.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub config_digest: Option<String>,
}

/// One fitted two-sided estimate on a window.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichReport<T = f64> {
    pub theorem: Theorem,
    pub epsilon: T,
    /// Largest constant for which the lower bound holds on the window.
    pub c_lower: T,
    /// Smallest constant for which the upper bound holds on the window.
    pub c_upper: T,
    pub window: (T, T),
    pub n_points: usize,
    /// Fraction of window points satisfying both bounds.
    pub fraction_satisfied: T,
    /// Largest ratio between the fitted upper and lower envelopes.
    pub envelope_ratio: T,
    /// Log-log slopes of density/lower and density/upper towards the tail,
    /// over the third of the window nearest the tail.
    pub lower_trend: T,
    pub upper_trend: T,
    pub pass: bool,
    /// Smallest window start (largest end, for small `x`) with a pass,
    /// keeping the other end fixed.
    pub threshold: Option<T>,
    pub provenance: Provenance,
}

impl<T: Real> SandwichReport<T> {
    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }
}

fn bound_terms<T: Real>(theorem: Theorem, constants: &TailConstants<T>, jumps: &JumpParams<T>) -> (T, T) {
    match theorem.side() {
        // lower bound x^{−a} + x^{−b}
        TailSide::Large => (constants.exponent, T::one() + jumps.eta1),
        // lower bound x^{a} + x^{b}
        TailSide::Small => (constants.exponent - T::lit(3.0), jumps.eta2 - T::one()),
    }
}

/// `(lower, upper)` bound shapes at `x` (without constants).
pub fn sandwich_bounds<T: Real>(
    theorem: Theorem,
    constants: &TailConstants<T>,
    jumps: &JumpParams<T>,
    epsilon: T,
    x: T,
) -> (T, T) {
    let (a, b) = bound_terms(theorem, constants, jumps);
    match theorem.side() {
        TailSide::Large => (
            x.powf(-a) + x.powf(-b),
            x.powf(-(a - epsilon)) + x.powf(-(b - epsilon)),
        ),
        TailSide::Small => (x.powf(a) + x.powf(b), x.powf(a - epsilon) + x.powf(b - epsilon)),
    }
}

struct SandwichFit<T> {
    c_lower: T,
    c_upper: T,
    fraction: T,
    envelope_ratio: T,
    lower_trend: T,
    upper_trend: T,
    pass: bool,
}

fn slope<T: Real>(xs: &[T], ys: &[T]) -> T {
    let n = T::from_count(xs.len());
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let sxy: T = xs.iter().zip(ys).map(|(x, y)| (*x - mx) * (*y - my)).sum();
    let sxx: T = xs.iter().map(|x| (*x - mx) * (*x - mx)).sum();
    sxy / sxx
}

fn fit_sandwich<T: Real>(
    theorem: Theorem,
    curve: &DensityCurve<T>,
    constants: &TailConstants<T>,
    jumps: &JumpParams<T>,
    epsilon: T,
    idx: &[usize],
) -> SandwichFit<T> {
    let mut lower = Vec::with_capacity(idx.len());
    let mut upper = Vec::with_capacity(idx.len());
    for &i in idx {
        let (l, u) = sandwich_bounds(theorem, constants, jumps, epsilon, curve.x_grid[i]);
        lower.push(l);
        upper.push(u);
    }
    let d: Vec<T> = idx.iter().map(|&i| curve.density[i]).collect();
    let c_lower = d.iter().zip(&lower).fold(T::infinity(), |m, (d, l)| m.min(*d / *l));
    let c_upper = d.iter().zip(&upper).fold(T::zero(), |m, (d, u)| m.max(*d / *u));
    let slack = T::one() + T::lit(1e-12);
    let satisfied = d
        .iter()
        .zip(lower.iter().zip(&upper))
        .filter(|(d, (l, u))| c_lower * **l <= **d * slack && **d <= c_upper * **u * slack)
        .count();
    let fraction = T::from_count(satisfied) / T::from_count(idx.len());
    // fitted envelopes ordered pointwise: c_lower·lower ≤ c_upper·upper
    let envelope_ratio = lower
        .iter()
        .zip(&upper)
        .fold(T::zero(), |m, (l, u)| m.max(c_upper * *u / (c_lower * *l)));
    // orient log x so that it increases towards the tail
    let orient = match theorem.side() {
        TailSide::Large => T::one(),
        TailSide::Small => -T::one(),
    };
    let lx: Vec<T> = idx.iter().map(|&i| orient * curve.x_grid[i].ln()).collect();
    let lr: Vec<T> = d.iter().zip(&lower).map(|(d, l)| (*d / *l).ln()).collect();
    let ur: Vec<T> = d.iter().zip(&upper).map(|(d, u)| (*d / *u).ln()).collect();
    // trends on the third of the window nearest the tail, where a ratio
    // converging to a finite limit has flattened out
    let k = (idx.len() / 3).max(5).min(idx.len());
    let tail = |v: &[T]| -> Vec<T> {
        match theorem.side() {
            TailSide::Large => v[v.len() - k..].to_vec(),
            TailSide::Small => v[..k].to_vec(),
        }
    };
    let lower_trend = slope(&tail(&lx), &tail(&lr));
    let upper_trend = slope(&tail(&lx), &tail(&ur));
    let tol = T::lit(TREND_TOLERANCE);
    let pass = c_lower > T::zero()
        && c_lower.is_finite()
        && c_upper.is_finite()
        && fraction == T::one()
        && envelope_ratio <= T::lit(MAX_ENVELOPE_RATIO)
        && lower_trend >= -tol
        && upper_trend <= tol;
    SandwichFit {
        c_lower,
        c_upper,
        fraction,
        envelope_ratio,
        lower_trend,
        upper_trend,
        pass,
    }
}

/// Fits the largest lower and smallest upper constants of a two-sided
/// estimate on `window` and judges it. A pass needs positive finite
/// constants, every point inside the fitted envelope, an envelope no wider
/// than [`MAX_ENVELOPE_RATIO`], and no drift of density/bound towards the
/// tail beyond [`TREND_TOLERANCE`] (a drifting ratio means the constant
/// would not stay finite further out).
pub fn check_sandwich<T: Real>(
    theorem: Theorem,
    curve: &DensityCurve<T>,
    constants: &TailConstants<T>,
    jumps: &JumpParams<T>,
    epsilon: T,
    window: (T, T),
) -> Result<SandwichReport<T>> {
    if constants.model != theorem.model() {
        return Err(Error::InvalidArgument(format!(
            "{} constants supplied for the {} estimate",
            constants.model,
            theorem.tag()
        )));
    }
    jumps.validate()?;
    if !(epsilon >= T::zero()) {
        return Err(Error::InvalidArgument(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let idx = window_indices(curve, window)?;
    if idx.len() < MIN_FIT_POINTS {
        return Err(Error::InvalidWindow(format!(
            "{} grid points in window, need at least {MIN_FIT_POINTS}",
            idx.len()
        )));
    }
    let fit = fit_sandwich(theorem, curve, constants, jumps, epsilon, &idx);
    // scan the free end of the window from the body towards the tail
    let mut threshold = None;
    let n = idx.len();
    for k in 0..=(n - MIN_FIT_POINTS) {
        let sub = match theorem.side() {
            TailSide::Large => &idx[k..],
            TailSide::Small => &idx[..n - k],
        };
        if fit_sandwich(theorem, curve, constants, jumps, epsilon, sub).pass {
            threshold = Some(match theorem.side() {
                TailSide::Large => curve.x_grid[sub[0]],
                TailSide::Small => curve.x_grid[sub[sub.len() - 1]],
            });
            break;
        }
    }
    Ok(SandwichReport {
        theorem,
        epsilon,
        c_lower: fit.c_lower,
        c_upper: fit.c_upper,
        window,
        n_points: n,
        fraction_satisfied: fit.fraction,
        envelope_ratio: fit.envelope_ratio,
        lower_trend: fit.lower_trend,
        upper_trend: fit.upper_trend,
        pass: fit.pass,
        threshold,
        provenance: Provenance::default(),
    })
}

/// [`check_sandwich`] at every slack in [`EPSILON_SWEEP`].
pub fn sandwich_sweep<T: Real>(
    theorem: Theorem,
    curve: &DensityCurve<T>,
    constants: &TailConstants<T>,
    jumps: &JumpParams<T>,
    window: (T, T),
) -> Result<Vec<SandwichReport<T>>> {
    EPSILON_SWEEP
        .iter()
        .map(|&e| check_sandwich(theorem, curve, constants, jumps, T::lit(e), window))
        .collect()
}

/// How the paired curves of a comparison are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveMethod {
    /// Kernel density estimates of simulated prices.
    MonteCarlo,
    /// The mixing representation over a simulated mixing-density table.
    SemiAnalytic,
}

/// Unperturbed and perturbed curves for one specification on `x_grid`.
pub fn paired_curves<T: Real>(
    spec: &ModelSpec<T>,
    cfg: &SimConfig<T>,
    x_grid: &[T],
    method: CurveMethod,
) -> Result<(DensityCurve<T>, DensityCurve<T>)> {
    let jumps = spec.jumps.ok_or(Error::MissingJumps)?;
    let base = spec.without_jumps();
    match method {
        CurveMethod::MonteCarlo => Ok((
            simulate_price_density(&base, cfg, x_grid)?,
            simulate_price_density(spec, cfg, x_grid)?,
        )),
        CurveMethod::SemiAnalytic => {
            let t = cfg.horizon;
            let alpha = simulate_alpha(&base, cfg)?;
            let table = estimate_mixing_density(&alpha, &MixingGridSpec::default(), spec.kind())?;
            let lambda = LambdaKernel::with_default_quadrature(table, t)?.tabulate(None)?;
            let law = build_compound_law(t, &jumps, T::lit(DEFAULT_TAIL_MASS_TOL))?;
            let forward = spec.forward(t);
            Ok((
                semi_analytic_curve(x_grid, |x| unperturbed_density(x, &lambda, forward))?,
                semi_analytic_curve(x_grid, |x| perturbed_density(x, &lambda, &law, forward))?,
            ))
        }
    }
}

/// Fit windows for a comparison; either side may be skipped.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CompareWindows<T = f64> {
    pub large: Option<(T, T)>,
    pub small: Option<(T, T)>,
}

/// Paired slope fits on one side and the verdict on the predicted ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct SideComparison<T = f64> {
    pub decision: RegimeDecision<T>,
    pub unperturbed: TailFitReport<T>,
    pub perturbed: TailFitReport<T>,
    /// Jump regime: the perturbed slope is within [`SLOPE_AGREEMENT`] of the
    /// jump prediction. Diffusive regime: the two slopes agree within it.
    pub slope_matches: bool,
    /// Jump regime: the perturbed tail is heavier by at least
    /// [`SLOPE_SEPARATION`]. Always `true` in the diffusive regime.
    pub ordering_holds: bool,
}

impl<T: Real> SideComparison<T> {
    pub fn prediction_holds(&self) -> bool {
        self.slope_matches && self.ordering_holds
    }
}

/// Judges paired fits against a regime decision.
pub fn judge_pair<T: Real>(
    decision: RegimeDecision<T>,
    unperturbed: TailFitReport<T>,
    perturbed: TailFitReport<T>,
) -> SideComparison<T> {
    let agree = T::lit(SLOPE_AGREEMENT);
    let (slope_matches, ordering_holds) = if decision.jumps_dominate {
        // heavier: shallower decay for large x, more negative power near 0
        let heavier_by = match decision.side {
            TailSide::Large => perturbed.slope - unperturbed.slope,
            TailSide::Small => unperturbed.slope - perturbed.slope,
        };
        (
            (perturbed.slope - decision.predicted_slope()).abs() <= agree,
            heavier_by >= T::lit(SLOPE_SEPARATION),
        )
    } else {
        ((perturbed.slope - unperturbed.slope).abs() <= agree, true)
    };
    SideComparison {
        decision,
        unperturbed,
        perturbed,
        slope_matches,
        ordering_holds,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeforeAfterReport<T = f64> {
    pub unperturbed: DensityCurve<T>,
    pub perturbed: DensityCurve<T>,
    pub large: Option<SideComparison<T>>,
    pub small: Option<SideComparison<T>>,
}

impl<T: Real> BeforeAfterReport<T> {
    /// Every requested side matches its prediction.
    pub fn prediction_holds(&self) -> bool {
        self.large.iter().chain(&self.small).all(SideComparison::prediction_holds)
    }
}

/// Compares tails before and after removing the jumps of `spec`.
pub fn compare_before_after<T: Real>(
    spec: &ModelSpec<T>,
    cfg: &SimConfig<T>,
    x_grid: &[T],
    windows: &CompareWindows<T>,
    method: CurveMethod,
) -> Result<BeforeAfterReport<T>> {
    let jumps = spec.jumps.ok_or(Error::MissingJumps)?;
    let (unperturbed, perturbed) = paired_curves(spec, cfg, x_grid, method)?;
    let side = |side: TailSide, window: Option<(T, T)>| -> Result<Option<SideComparison<T>>> {
        let Some(window) = window else { return Ok(None) };
        let decision = match spec.kind() {
            ModelKind::HullWhite if side == TailSide::Large => classify_hull_white(&jumps)?,
            ModelKind::HullWhite => {
                return Err(Error::InvalidArgument(
                    "no small-x prediction is made for the Hull-White model".into(),
                ))
            }
            _ => classify_regime(&tail_constants(spec, cfg.horizon)?, &jumps, side)?,
        };
        Ok(Some(judge_pair(
            decision,
            fit_tail_slope(&unperturbed, window)?,
            fit_tail_slope(&perturbed, window)?,
        )))
    };
    let large = side(TailSide::Large, windows.large)?;
    let small = side(TailSide::Small, windows.small)?;
    Ok(BeforeAfterReport {
        unperturbed,
        perturbed,
        large,
        small,
    })
}

#[cfg(test)]
mod tests;
