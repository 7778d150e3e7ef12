//! Double-exponential (Kou) jump law and its compound-Poisson mixture.
//!
//! The log-jump marks `U` have density
//! `f(u) = p η₁ e^{-η₁ u} 1{u ≥ 0} + q η₂ e^{η₂ u} 1{u < 0}`.
//! Its `n`-fold convolution is a mixture of Erlang densities on each
//! half-line, with mixing weights `P[n,k]`, `Q[n,k]` given by binomial sums.
//! Summing over a Poisson number of jumps yields the law of the log-jump sum
//! over a horizon `t`: an atom `e^{-λt}` at zero plus the continuous parts
//! `G₁(u) e^{-η₁ u}` (u ≥ 0) and `G₂(u) e^{η₂ u}` (u < 0), where `G₁`, `G₂`
//! are entire functions stored here as truncated Taylor tables.

use rand::Rng;

use crate::error::{Error, Result, Violation};
use crate::real::{ln_binomial, ln_factorials, sample_poisson_count, Real};

/// Default bound on the neglected Poisson mass when truncating the series.
pub const DEFAULT_TAIL_MASS_TOL: f64 = 1e-10;

/// Largest admissible truncation order. Beyond ~170 jumps the factorials in
/// the coefficients leave double range, which signals a pathological `λt`.
pub const DEFAULT_TRUNCATION_CAP: usize = 170;

/// Intensity and shape of the double-exponential jump law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpParams<T = f64> {
    /// Jump intensity per unit time.
    pub lambda: T,
    /// Probability that a jump is upward.
    pub p_up: T,
    /// Probability that a jump is downward.
    pub q_down: T,
    /// Decay rate of upward log-jumps.
    pub eta1: T,
    /// Decay rate of downward log-jumps.
    pub eta2: T,
}

impl<T: Real> JumpParams<T> {
    /// Builds and validates parameters; `q_down` is set to `1 - p_up`.
    pub fn new(lambda: T, p_up: T, eta1: T, eta2: T) -> Result<Self> {
        let params = Self {
            lambda,
            p_up,
            q_down: T::one() - p_up,
            eta1,
            eta2,
        };
        params.validate()?;
        Ok(params)
    }

    /// Every violated constraint, with field paths under `jumps.`.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.lambda > T::zero()) {
            out.push(Violation::new("jumps.lambda", "lambda > 0"));
        }
        if !(self.p_up > T::zero()) {
            out.push(Violation::new("jumps.p_up", "p_up > 0"));
        }
        if !(self.q_down > T::zero()) {
            out.push(Violation::new("jumps.q_down", "q_down > 0"));
        }
        let tol = T::epsilon() * T::lit(16.0);
        if !((self.p_up + self.q_down - T::one()).abs() <= tol) {
            out.push(Violation::new("jumps.p_up", "p_up + q_down = 1"));
        }
        if !(self.eta1 > T::one()) {
            out.push(Violation::new("jumps.eta1", "eta1 > 1"));
        }
        if !(self.eta2 > T::zero()) {
            out.push(Violation::new("jumps.eta2", "eta2 > 0"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(v))
        }
    }

    /// `E[U] = p/η₁ - q/η₂`.
    pub fn mean_log_jump(&self) -> T {
        self.p_up / self.eta1 - self.q_down / self.eta2
    }

    /// `E[e^U] = p η₁/(η₁ - 1) + q η₂/(η₂ + 1)`, finite because `η₁ > 1`.
    pub fn mean_jump_factor(&self) -> T {
        self.p_up * self.eta1 / (self.eta1 - T::one())
            + self.q_down * self.eta2 / (self.eta2 + T::one())
    }
}

/// Density of a single log-jump mark.
pub fn double_exp_density<T: Real>(u: T, params: &JumpParams<T>) -> T {
    if u >= T::zero() {
        params.p_up * params.eta1 * (-params.eta1 * u).exp()
    } else {
        params.q_down * params.eta2 * (params.eta2 * u).exp()
    }
}

/// Erlang mixing weights of the `n`-fold convolution of the jump density.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionCoefficients<T = f64> {
    pub n: usize,
    /// `P[n,k]` for `k = 1..=n`, stored at index `k - 1`.
    pub p_table: Vec<T>,
    /// `Q[n,k]` for `k = 1..=n`, stored at index `k - 1`.
    pub q_table: Vec<T>,
    pub eta1: T,
    pub eta2: T,
}

impl<T: Real> ConvolutionCoefficients<T> {
    /// `P[n,k]`, 1-based.
    pub fn p(&self, k: usize) -> T {
        self.p_table[k - 1]
    }

    /// `Q[n,k]`, 1-based.
    pub fn q(&self, k: usize) -> T {
        self.q_table[k - 1]
    }

    /// Total weight, which equals one for an exact table.
    pub fn total_weight(&self) -> T {
        self.p_table.iter().copied().sum::<T>() + self.q_table.iter().copied().sum::<T>()
    }

    /// Evaluates `f^{*n}(u)`.
    pub fn density(&self, u: T) -> T {
        let (table, rate, x) = if u >= T::zero() {
            (&self.p_table, self.eta1, u)
        } else {
            (&self.q_table, self.eta2, -u)
        };
        if x == T::zero() {
            return table[0] * rate;
        }
        let ln_rate = rate.ln();
        let ln_x = x.ln();
        let mut ln_fact = T::zero();
        let mut acc = T::zero();
        for (i, &w) in table.iter().enumerate() {
            if i > 0 {
                ln_fact = ln_fact + T::from_count(i).ln();
            }
            if w > T::zero() {
                let k = T::from_count(i + 1);
                let ln_term = w.ln() + k * ln_rate + T::from_count(i) * ln_x - ln_fact - rate * x;
                acc = acc + ln_term.exp();
            }
        }
        acc
    }
}

struct LogParams<T> {
    ln_p: T,
    ln_q: T,
    ln_a: T,
    ln_b: T,
}

impl<T: Real> LogParams<T> {
    fn new(params: &JumpParams<T>) -> Self {
        let s = params.eta1 + params.eta2;
        Self {
            ln_p: params.p_up.ln(),
            ln_q: params.q_down.ln(),
            ln_a: (params.eta1 / s).ln(),
            ln_b: (params.eta2 / s).ln(),
        }
    }
}

fn coefficients_with<T: Real>(
    n: usize,
    params: &JumpParams<T>,
    lp: &LogParams<T>,
    ln_fact: &[T],
) -> ConvolutionCoefficients<T> {
    let mut p_table = vec![T::zero(); n];
    let mut q_table = vec![T::zero(); n];
    let nf = T::from_count(n);
    for k in 1..n {
        let mut p_sum = T::zero();
        let mut q_sum = T::zero();
        for i in k..n {
            let common = ln_binomial(ln_fact, n - k - 1, i - k) + ln_binomial(ln_fact, n, i);
            let ik = T::from_count(i - k);
            let ni = T::from_count(n - i);
            let fi = T::from_count(i);
            p_sum = p_sum + (common + ik * lp.ln_a + ni * lp.ln_b + fi * lp.ln_p + ni * lp.ln_q).exp();
            q_sum = q_sum + (common + ni * lp.ln_a + ik * lp.ln_b + ni * lp.ln_p + fi * lp.ln_q).exp();
        }
        p_table[k - 1] = p_sum;
        q_table[k - 1] = q_sum;
    }
    p_table[n - 1] = (nf * lp.ln_p).exp();
    q_table[n - 1] = (nf * lp.ln_q).exp();
    ConvolutionCoefficients {
        n,
        p_table,
        q_table,
        eta1: params.eta1,
        eta2: params.eta2,
    }
}

/// The `P[n,k]`, `Q[n,k]` tables of the `n`-fold convolution.
pub fn convolution_coefficients<T: Real>(
    n: usize,
    params: &JumpParams<T>,
) -> Result<ConvolutionCoefficients<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "convolution order must be at least 1".into(),
        ));
    }
    params.validate()?;
    let ln_fact = ln_factorials::<T>(n);
    Ok(coefficients_with(n, params, &LogParams::new(params), &ln_fact))
}

/// `f^{*n}(u)`. Builds the coefficient table on every call; hold a
/// [`ConvolutionCoefficients`] when evaluating many points.
pub fn convolution_density<T: Real>(n: usize, u: T, params: &JumpParams<T>) -> Result<T> {
    Ok(convolution_coefficients(n, params)?.density(u))
}

/// `P(N > n)` for `N ~ Poisson(mean)`, summed term by term from `n + 1`
/// so that tiny tails are computed without cancellation.
pub fn poisson_upper_tail<T: Real>(mean: T, n: usize) -> T {
    if mean <= T::zero() {
        return T::zero();
    }
    let ln_mean = mean.ln();
    let mut j = n + 1;
    let mut ln_term = -mean + T::from_count(j) * ln_mean - ln_factorials::<T>(j)[j];
    let mut sum = T::zero();
    loop {
        let term = ln_term.exp();
        sum = sum + term;
        if T::from_count(j) > mean && term <= sum * T::epsilon() * T::lit(1e-3) {
            break;
        }
        if j > n + 100_000 {
            break;
        }
        j += 1;
        ln_term = ln_term + ln_mean - T::from_count(j).ln();
    }
    sum
}

/// Which continuous half of the law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LawSide {
    /// `u ≥ 0`, carried by `G₁`.
    Up,
    /// `u < 0`, carried by `G₂`.
    Down,
}

/// Computable witness that `G(u) e^{-εu}` stays bounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthCertificate<T = f64> {
    /// Every coefficient with index above `k0` is at most `ε^k / k!`.
    pub k0: usize,
    /// Upper bound of `G(|u|) e^{-ε|u|}` on `[0, u_max]`.
    pub bound: T,
}

/// Law of the log-jump sum `Σ_{i ≤ N_t} U_i` over horizon `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompoundPoissonLaw<T = f64> {
    pub t: T,
    pub params: JumpParams<T>,
    /// `π₀ = e^{-λt}`, the probability of no jump.
    pub atom_weight: T,
    /// Taylor coefficients of `G₁` in powers of `u`.
    pub g1_coeffs: Vec<T>,
    /// Taylor coefficients of `G₂` in powers of `-u`.
    pub g2_coeffs: Vec<T>,
    /// Largest jump count kept in the series.
    pub truncation_order: usize,
    /// Poisson mass beyond `truncation_order`: the exact mass missing from
    /// the continuous parts.
    pub truncation_bound: T,
}

/// Builds the law with the default truncation cap.
pub fn build_compound_law<T: Real>(
    t: T,
    params: &JumpParams<T>,
    tail_mass_tol: T,
) -> Result<CompoundPoissonLaw<T>> {
    build_compound_law_capped(t, params, tail_mass_tol, DEFAULT_TRUNCATION_CAP)
}

pub fn build_compound_law_capped<T: Real>(
    t: T,
    params: &JumpParams<T>,
    tail_mass_tol: T,
    cap: usize,
) -> Result<CompoundPoissonLaw<T>> {
    params.validate()?;
    if !(t > T::zero()) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {t}")));
    }
    if !(tail_mass_tol > T::zero() && tail_mass_tol < T::one()) {
        return Err(Error::InvalidArgument(format!(
            "tail_mass_tol must lie in (0, 1), got {tail_mass_tol}"
        )));
    }
    let mean = params.lambda * t;
    let mut order = 0;
    let mut tail = poisson_upper_tail(mean, 0);
    while !(tail < tail_mass_tol) {
        order += 1;
        if order > cap {
            let mut required = order;
            while !(poisson_upper_tail(mean, required) < tail_mass_tol) && required < 100_000 {
                required += 1;
            }
            return Err(Error::TruncationCap {
                required,
                cap,
                mean: mean.to_f64_lossy(),
            });
        }
        tail = poisson_upper_tail(mean, order);
    }

    let ln_fact = ln_factorials::<T>(order.max(1));
    let lp = LogParams::new(params);
    let ln_mean = mean.ln();
    // ln π_n for n = 1..=order
    let ln_pi: Vec<T> = (0..=order)
        .map(|n| -mean + T::from_count(n) * ln_mean - ln_fact[n])
        .collect();
    let mut up_sums = vec![T::zero(); order];
    let mut down_sums = vec![T::zero(); order];
    for n in 1..=order {
        let c = coefficients_with(n, params, &lp, &ln_fact);
        let w = ln_pi[n].exp();
        for k in 1..=n {
            up_sums[k - 1] = up_sums[k - 1] + w * c.p(k);
            down_sums[k - 1] = down_sums[k - 1] + w * c.q(k);
        }
    }
    let taylor = |sums: &[T], rate: T| -> Vec<T> {
        let ln_rate = rate.ln();
        sums.iter()
            .enumerate()
            .map(|(k, &s)| {
                if s > T::zero() {
                    (s.ln() + T::from_count(k + 1) * ln_rate - ln_fact[k]).exp()
                } else {
                    T::zero()
                }
            })
            .collect()
    };
    Ok(CompoundPoissonLaw {
        t,
        params: *params,
        atom_weight: (-mean).exp(),
        g1_coeffs: taylor(&up_sums, params.eta1),
        g2_coeffs: taylor(&down_sums, params.eta2),
        truncation_order: order,
        truncation_bound: tail,
    })
}

/// Horner evaluation of `Σ c_k x^k`.
pub(crate) fn horner<T: Real>(coeffs: &[T], x: T) -> T {
    coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * x + c)
}

impl<T: Real> CompoundPoissonLaw<T> {
    /// `G₁(u)` for `u ≥ 0`.
    pub fn g1(&self, u: T) -> T {
        horner(&self.g1_coeffs, u)
    }

    /// `G₂(u)` for `u < 0`.
    pub fn g2(&self, u: T) -> T {
        horner(&self.g2_coeffs, -u)
    }

    pub fn coeffs(&self, side: LawSide) -> &[T] {
        match side {
            LawSide::Up => &self.g1_coeffs,
            LawSide::Down => &self.g2_coeffs,
        }
    }

    /// Density of the absolutely continuous part at `u` (the atom excluded).
    pub fn continuous_density(&self, u: T) -> T {
        if u >= T::zero() {
            self.g1(u) * (-self.params.eta1 * u).exp()
        } else {
            self.g2(u) * (self.params.eta2 * u).exp()
        }
    }

    /// Mass of one continuous half, integrated term by term from the table:
    /// `∫₀^∞ u^k e^{-ηu} du = k!/η^{k+1}`.
    pub fn side_mass(&self, side: LawSide) -> T {
        let (coeffs, rate) = match side {
            LawSide::Up => (&self.g1_coeffs, self.params.eta1),
            LawSide::Down => (&self.g2_coeffs, self.params.eta2),
        };
        let ln_rate = rate.ln();
        let mut ln_fact = T::zero();
        let mut acc = T::zero();
        for (k, &c) in coeffs.iter().enumerate() {
            if k > 0 {
                ln_fact = ln_fact + T::from_count(k).ln();
            }
            if c > T::zero() {
                acc = acc + (c.ln() + ln_fact - T::from_count(k + 1) * ln_rate).exp();
            }
        }
        acc
    }

    pub fn continuous_mass(&self) -> T {
        self.side_mass(LawSide::Up) + self.side_mass(LawSide::Down)
    }

    /// Smallest `k0` with `coeff[k] ≤ ε^k / k!` for every stored `k > k0`.
    /// Coefficients past the truncation order are zero, so the condition
    /// holds trivially beyond the table.
    pub fn subexponential_threshold(&self, side: LawSide, eps: T) -> usize {
        let coeffs = self.coeffs(side);
        let ln_eps = eps.ln();
        let ln_fact = ln_factorials::<T>(coeffs.len().max(1));
        let mut k0 = 0;
        for (k, &c) in coeffs.iter().enumerate() {
            if c > T::zero() && c.ln() > T::from_count(k) * ln_eps - ln_fact[k] {
                k0 = k;
            }
        }
        k0
    }

    /// Bound on `G(|u|) e^{-ε|u|}` over `|u| ≤ u_max`, derived from the table
    /// alone: terms up to `k0` are bounded by their maxima, the rest by the
    /// exponential series `Σ (εu)^k/k! e^{-εu} ≤ 1`.
    pub fn growth_certificate(&self, side: LawSide, eps: T, u_max: T) -> GrowthCertificate<T> {
        let k0 = self.subexponential_threshold(side, eps);
        let coeffs = self.coeffs(side);
        let mut bound = T::one();
        for (k, &c) in coeffs.iter().enumerate().take(k0 + 1) {
            let kf = T::from_count(k);
            let arg = (kf / eps).min(u_max);
            let peak = if k == 0 {
                T::one()
            } else {
                (kf * arg.ln() - eps * arg).exp()
            };
            bound = bound + c * peak;
        }
        GrowthCertificate { k0, bound }
    }
}

/// Number of jumps and log-jump sum of one draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpDraw<T = f64> {
    pub count: u64,
    pub sum: T,
}

pub fn sample_jump_draw<T: Real, R: Rng + ?Sized>(
    t: T,
    params: &JumpParams<T>,
    rng: &mut R,
) -> JumpDraw<T> {
    let count = sample_poisson_count((params.lambda * t).to_f64_lossy(), rng);
    let mut sum = T::zero();
    for _ in 0..count {
        let up = T::sample_unit(rng) < params.p_up;
        let e = T::sample_exp1(rng);
        sum = if up {
            sum + e / params.eta1
        } else {
            sum - e / params.eta2
        };
    }
    JumpDraw { count, sum }
}

/// Draws `Σ_{i ≤ N} U_i` with `N ~ Poisson(λt)`. Exactly zero iff no jump.
pub fn sample_jump_sum<T: Real, R: Rng + ?Sized>(t: T, params: &JumpParams<T>, rng: &mut R) -> T {
    sample_jump_draw(t, params, rng).sum
}
