//! Uncorrelated stochastic volatility models and their jump perturbations.
//!
//! All three models admit the exact log-price representation
//! `log X_t = log x₀ + μt - ½∫φ(Y) ds + ∫√φ(Y) dW + Σ U_i`, with
//! `φ(y) = y²` for Stein-Stein and Hull-White and `φ(y) = y` for Heston.

use crate::error::{Error, Result, Violation};
use crate::jumplaw::JumpParams;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    SteinStein,
    Heston,
    HullWhite,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::SteinStein => "stein-stein",
            ModelKind::Heston => "heston",
            ModelKind::HullWhite => "hull-white",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Ornstein-Uhlenbeck volatility `dY = q(m - Y)dt + σ dZ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteinSteinParams<T = f64> {
    pub mu: T,
    pub q_rev: T,
    pub m_level: T,
    pub sigma: T,
    pub x0: T,
    pub y0: T,
}

/// Cox-Ingersoll-Ross variance `dY = q(m - Y)dt + c√Y dZ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonParams<T = f64> {
    pub mu: T,
    pub q_rev: T,
    pub m_level: T,
    pub c_vol: T,
    pub x0: T,
    pub y0: T,
}

/// Geometric Brownian volatility `dY = νY dt + ξY dZ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HullWhiteParams<T = f64> {
    pub mu: T,
    pub nu: T,
    pub xi: T,
    pub x0: T,
    pub y0: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VolModel<T = f64> {
    SteinStein(SteinSteinParams<T>),
    Heston(HestonParams<T>),
    HullWhite(HullWhiteParams<T>),
}

/// A volatility model plus an optional compound-Poisson perturbation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec<T = f64> {
    pub model: VolModel<T>,
    pub jumps: Option<JumpParams<T>>,
}

fn require(out: &mut Vec<Violation>, ok: bool, field: &str, rule: &str) {
    if !ok {
        out.push(Violation::new(format!("model.{field}"), rule));
    }
}

impl<T: Real> VolModel<T> {
    pub fn kind(&self) -> ModelKind {
        match self {
            VolModel::SteinStein(_) => ModelKind::SteinStein,
            VolModel::Heston(_) => ModelKind::Heston,
            VolModel::HullWhite(_) => ModelKind::HullWhite,
        }
    }

    pub fn mu(&self) -> T {
        match self {
            VolModel::SteinStein(p) => p.mu,
            VolModel::Heston(p) => p.mu,
            VolModel::HullWhite(p) => p.mu,
        }
    }

    pub fn x0(&self) -> T {
        match self {
            VolModel::SteinStein(p) => p.x0,
            VolModel::Heston(p) => p.x0,
            VolModel::HullWhite(p) => p.x0,
        }
    }

    pub fn y0(&self) -> T {
        match self {
            VolModel::SteinStein(p) => p.y0,
            VolModel::Heston(p) => p.y0,
            VolModel::HullWhite(p) => p.y0,
        }
    }

    /// Instantaneous variance carried by a volatility state `y`.
    #[inline]
    pub fn variance_rate(&self, y: T) -> T {
        match self {
            VolModel::Heston(_) => y,
            _ => y * y,
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        match self {
            VolModel::SteinStein(p) => {
                require(&mut out, p.mu.is_finite(), "mu", "mu finite");
                require(&mut out, p.q_rev >= T::zero(), "q_rev", "q_rev >= 0");
                require(&mut out, p.m_level >= T::zero(), "m_level", "m_level >= 0");
                require(&mut out, p.sigma > T::zero(), "sigma", "sigma > 0");
                require(&mut out, p.x0 > T::zero(), "x0", "x0 > 0");
                require(&mut out, p.y0.is_finite(), "y0", "y0 finite");
            }
            VolModel::Heston(p) => {
                require(&mut out, p.mu.is_finite(), "mu", "mu finite");
                require(&mut out, p.q_rev > T::zero(), "q_rev", "q_rev > 0");
                require(&mut out, p.m_level >= T::zero(), "m_level", "m_level >= 0");
                require(&mut out, p.c_vol > T::zero(), "c_vol", "c_vol > 0");
                require(&mut out, p.x0 > T::zero(), "x0", "x0 > 0");
                require(&mut out, p.y0 >= T::zero(), "y0", "y0 >= 0");
            }
            VolModel::HullWhite(p) => {
                require(&mut out, p.mu.is_finite(), "mu", "mu finite");
                require(&mut out, p.nu.is_finite(), "nu", "nu finite");
                require(&mut out, p.xi > T::zero(), "xi", "xi > 0");
                require(&mut out, p.x0 > T::zero(), "x0", "x0 > 0");
                require(&mut out, p.y0 > T::zero(), "y0", "y0 > 0");
            }
        }
        out
    }
}

impl<T: Real> ModelSpec<T> {
    pub fn new(model: VolModel<T>, jumps: Option<JumpParams<T>>) -> Self {
        Self { model, jumps }
    }

    pub fn unperturbed(model: VolModel<T>) -> Self {
        Self { model, jumps: None }
    }

    /// The same model with the jump component removed.
    pub fn without_jumps(&self) -> Self {
        Self {
            model: self.model,
            jumps: None,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }

    /// `x₀ e^{μt}`, the centring level of the density representations.
    pub fn forward(&self, t: T) -> T {
        self.model.x0() * (self.model.mu() * t).exp()
    }

    pub fn checked(self) -> Result<Self> {
        let v = validate(&self);
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidParams(v))
        }
    }
}

/// All violated invariants of a specification; empty iff valid.
pub fn validate<T: Real>(spec: &ModelSpec<T>) -> Vec<Violation> {
    let mut out = spec.model.violations();
    if let Some(j) = &spec.jumps {
        out.extend(j.violations());
    }
    out
}

/// Exact log-price on a supplied path:
/// `log x₀ + μt - ½∫φ(Y) ds + ∫√φ(Y) dW + jump_sum`.
///
/// `times` starts at 0 and ends at the horizon; `vol_path[i]` is the state
/// at `times[i]` and `brownian_increments[i]` the increment of `W` over
/// `[times[i], times[i+1]]`. The time integral uses the trapezoid rule and
/// the stochastic integral the left-point (Itô) sum.
pub fn log_price_representation<T: Real>(
    spec: &ModelSpec<T>,
    times: &[T],
    vol_path: &[T],
    brownian_increments: &[T],
    jump_sum: T,
) -> Result<T> {
    if times.len() < 2 || vol_path.len() != times.len() || brownian_increments.len() + 1 != times.len() {
        return Err(Error::GridMismatch(format!(
            "times: {}, vol_path: {}, increments: {} (need n+1, n+1, n with n >= 1)",
            times.len(),
            vol_path.len(),
            brownian_increments.len()
        )));
    }
    if times[0] != T::zero() || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::GridMismatch(
            "time grid must start at 0 and be strictly increasing".into(),
        ));
    }
    if spec.jumps.is_none() && jump_sum != T::zero() {
        return Err(Error::InvalidArgument(
            "non-zero jump sum for a model without jumps".into(),
        ));
    }
    let heston = matches!(spec.model, VolModel::Heston(_));
    if heston {
        if let Some((step, &value)) = vol_path.iter().enumerate().find(|(_, &y)| y < T::zero()) {
            return Err(Error::NegativeVariance {
                value: value.to_f64_lossy(),
                step,
            });
        }
    }
    let half = T::lit(0.5);
    let mut time_integral = T::zero();
    let mut stochastic_integral = T::zero();
    for i in 0..brownian_increments.len() {
        let dt = times[i + 1] - times[i];
        let phi0 = spec.model.variance_rate(vol_path[i]);
        let phi1 = spec.model.variance_rate(vol_path[i + 1]);
        time_integral = time_integral + half * (phi0 + phi1) * dt;
        let diffusion = if heston { vol_path[i].sqrt() } else { vol_path[i] };
        stochastic_integral = stochastic_integral + diffusion * brownian_increments[i];
    }
    let t = *times.last().expect("non-empty grid");
    Ok(spec.model.x0().ln() + spec.model.mu() * t - half * time_integral + stochastic_integral + jump_sum)
}

/// `E[X̃_t] = x₀ e^{μt} exp(λt (E[e^U] - 1))`, using independence of the
/// jumps from the diffusion (whose exponential is a mean-one martingale).
pub fn expected_price<T: Real>(spec: &ModelSpec<T>, t: T) -> T {
    let jump_factor = spec
        .jumps
        .map(|j| (j.lambda * t * (j.mean_jump_factor() - T::one())).exp())
        .unwrap_or_else(T::one);
    spec.forward(t) * jump_factor
}
