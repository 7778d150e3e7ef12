//! Tail-exponent constants, asymptotic templates with fitted prefactors, and
//! log-log tail regression.

use crate::error::{Error, Result};
use crate::mc::DensityCurve;
use crate::models::{HestonParams, HullWhiteParams, ModelKind, SteinSteinParams};
use crate::real::Real;

/// Fits below this coefficient of determination are rejected.
pub const MIN_R_SQUARED: f64 = 0.9;
/// Minimum number of grid points in a slope-fit window.
pub const MIN_FIT_POINTS: usize = 10;
/// Windows keep this many kernel bandwidths away from the grid edges.
pub const EDGE_BANDWIDTHS: f64 = 3.0;
/// Half-window slopes differing by more than this flag a non-power law.
pub const POWER_LAW_DRIFT: f64 = 0.5;

/// `z cos z + s sin z`.
fn root_function<T: Real>(z: T, s: T) -> T {
    z * z.cos() + s * z.sin()
}

/// Least positive root `r_s` of `z cos z + s sin z`.
///
/// `r_0 = π/2`. For `s > 0` the function is `s > 0` at `π/2` and `−π < 0` at
/// `π`, and it has no root in `(0, π/2]`, so bisection on `[π/2, π]` is run
/// until the bracket collapses to adjacent floats; of the two the one with
/// the smaller residual is returned.
pub fn smallest_positive_root<T: Real>(s: T) -> Result<T> {
    if !(s >= T::zero()) || !s.is_finite() {
        return Err(Error::InvalidArgument(format!("root argument must be finite and >= 0, got {s}")));
    }
    let half_pi = T::FRAC_PI_2();
    if s == T::zero() {
        return Ok(half_pi);
    }
    let (mut lo, mut hi) = (half_pi, T::PI());
    let (mut f_lo, mut f_hi) = (root_function(lo, s), root_function(hi, s));
    if !(f_lo > T::zero() && f_hi < T::zero()) {
        return Err(Error::InvalidArgument(format!("root bracket lost for s = {s}")));
    }
    for _ in 0..200 {
        let mid = T::lit(0.5) * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        let f_mid = root_function(mid, s);
        if f_mid == T::zero() {
            return Ok(mid);
        }
        if f_mid > T::zero() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    Ok(if f_lo.abs() <= f_hi.abs() { lo } else { hi })
}

/// Exponent of the power-type decay of an unperturbed density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailConstants<T = f64> {
    pub model: ModelKind,
    /// `A₃` (Heston) or `B₃` (Stein-Stein).
    pub exponent: T,
    /// `C` (Heston) or `G` (Stein-Stein).
    pub auxiliary: T,
    /// The root `r_s` used.
    pub root: T,
    /// `qt/2` (Heston) or `qt` (Stein-Stein).
    pub s_arg: T,
}

fn exponent_from<T: Real>(aux: T, t: T) -> T {
    T::lit(1.5) + (T::lit(8.0) * aux + t).sqrt() / (T::lit(2.0) * t.sqrt())
}

fn check_horizon<T: Real>(t: T) -> Result<()> {
    if t > T::zero() && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("horizon must be positive, got {t}")))
    }
}

/// `A₃ = 3/2 + √(8C + t)/(2√t)` with `C = t/(2c²)·(q² + 4r²_{qt/2}/t²)`.
pub fn heston_tail_exponent<T: Real>(params: &HestonParams<T>, t: T) -> Result<TailConstants<T>> {
    check_horizon(t)?;
    let s_arg = params.q_rev * t / T::lit(2.0);
    let root = smallest_positive_root(s_arg)?;
    let c2 = params.c_vol * params.c_vol;
    let aux = t / (T::lit(2.0) * c2) * (params.q_rev * params.q_rev + T::lit(4.0) * root * root / (t * t));
    Ok(TailConstants {
        model: ModelKind::Heston,
        exponent: exponent_from(aux, t),
        auxiliary: aux,
        root,
        s_arg,
    })
}

/// `B₃ = 3/2 + √(8G + t)/(2√t)` with `G = t/(2σ²)·(q² + r²_{qt}/t²)`.
pub fn stein_stein_tail_exponent<T: Real>(params: &SteinSteinParams<T>, t: T) -> Result<TailConstants<T>> {
    check_horizon(t)?;
    let s_arg = params.q_rev * t;
    let root = smallest_positive_root(s_arg)?;
    let s2 = params.sigma * params.sigma;
    let aux = t / (T::lit(2.0) * s2) * (params.q_rev * params.q_rev + root * root / (t * t));
    Ok(TailConstants {
        model: ModelKind::SteinStein,
        exponent: exponent_from(aux, t),
        auxiliary: aux,
        root,
        s_arg,
    })
}

/// Theoretical structure of a large-`x` template; the remaining prefactor
/// constants are fitted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TemplateKind<T = f64> {
    /// `A₁ (log x)^{β} e^{A₂√log x} x^{−A₃}` with `β = −3/4 + qm/c²`.
    Heston { exponent: T, log_power: T },
    /// `B₁ (log x)^{−1/2} e^{B₂√log x} x^{−B₃}`.
    SteinStein { exponent: T },
    /// `b₁ x^{−2} (log x)^{(b₂−1)/2} (log log x)^{b₃} exp{−(ℓ + ½ log ℓ)²/(2tξ²)}`
    /// with `ℓ = log(√(2 log x / t)/y₀)`. With `free_power` the power of `x`
    /// is fitted too.
    HullWhite { t: T, xi: T, y0: T, free_power: bool },
}

impl<T: Real> TemplateKind<T> {
    pub fn heston(params: &HestonParams<T>, t: T) -> Result<Self> {
        let c = heston_tail_exponent(params, t)?;
        Ok(TemplateKind::Heston {
            exponent: c.exponent,
            log_power: T::lit(-0.75) + params.q_rev * params.m_level / (params.c_vol * params.c_vol),
        })
    }

    pub fn stein_stein(params: &SteinSteinParams<T>, t: T) -> Result<Self> {
        let c = stein_stein_tail_exponent(params, t)?;
        Ok(TemplateKind::SteinStein { exponent: c.exponent })
    }

    pub fn hull_white(params: &HullWhiteParams<T>, t: T, free_power: bool) -> Self {
        TemplateKind::HullWhite {
            t,
            xi: params.xi,
            y0: params.y0,
            free_power,
        }
    }

    pub fn model(&self) -> ModelKind {
        match self {
            TemplateKind::Heston { .. } => ModelKind::Heston,
            TemplateKind::SteinStein { .. } => ModelKind::SteinStein,
            TemplateKind::HullWhite { .. } => ModelKind::HullWhite,
        }
    }

    /// Names of the fitted constants, in the order reported.
    pub fn constant_names(&self) -> &'static [&'static str] {
        match self {
            TemplateKind::Heston { .. } => &["A1", "A2"],
            TemplateKind::SteinStein { .. } => &["B1", "B2"],
            TemplateKind::HullWhite { free_power: false, .. } => &["b1", "b2", "b3"],
            TemplateKind::HullWhite { free_power: true, .. } => &["b1", "b2", "b3", "power"],
        }
    }

    /// Fixed part of `log D` and the regressors of the fitted part at `x`;
    /// the first regressor is the constant for `log(prefactor)`.
    fn decompose(&self, x: T) -> Option<(T, Vec<T>)> {
        let l = x.ln();
        if !(l > T::zero()) {
            return None;
        }
        let ll = l.ln();
        match *self {
            TemplateKind::Heston { exponent, log_power } => {
                Some((log_power * ll - exponent * l, vec![T::one(), l.sqrt()]))
            }
            TemplateKind::SteinStein { exponent } => Some((T::lit(-0.5) * ll - exponent * l, vec![T::one(), l.sqrt()])),
            TemplateKind::HullWhite { t, xi, y0, free_power } => {
                let ell = ((T::lit(2.0) * l / t).sqrt() / y0).ln();
                if !(ell > T::zero() && ll > T::zero()) {
                    return None;
                }
                let arg = ell + T::lit(0.5) * ell.ln();
                let gauss = -(arg * arg) / (T::lit(2.0) * t * xi * xi);
                // (b₂ − 1)/2 · log L = b₂·(½ log L) − ½ log L
                let mut fixed = gauss - T::lit(0.5) * ll;
                let mut regressors = vec![T::one(), T::lit(0.5) * ll, ll.ln()];
                if free_power {
                    regressors.push(l);
                } else {
                    fixed = fixed - T::lit(2.0) * l;
                }
                Some((fixed, regressors))
            }
        }
    }

    /// Template value of `log D` at `x` for given constants (same order as
    /// [`TemplateKind::constant_names`], prefactor in log form).
    pub fn log_density(&self, x: T, log_prefactor: T, rest: &[T]) -> Option<T> {
        let (fixed, regs) = self.decompose(x)?;
        let mut acc = fixed + log_prefactor;
        for (r, c) in regs.iter().skip(1).zip(rest) {
            acc = acc + *r * *c;
        }
        Some(acc)
    }
}

/// A fitted constant with its least-squares standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedConstant<T = f64> {
    pub name: &'static str,
    pub value: T,
    pub std_err: T,
}

/// Template with its fitted constants. These constants are empirical fits
/// on a finite window; they are not theoretical values.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticTemplate<T = f64> {
    pub model: ModelKind,
    pub kind: TemplateKind<T>,
    pub constants: Vec<FittedConstant<T>>,
    pub window: (T, T),
    pub n_points: usize,
    pub r_squared: T,
    /// Root-mean-square residual of `log D`.
    pub rms_residual: T,
    pub max_abs_residual: T,
    /// Always `true`: prefactors come from regression, not theory.
    pub empirical: bool,
}

impl<T: Real> AsymptoticTemplate<T> {
    pub fn constant(&self, name: &str) -> Option<T> {
        self.constants.iter().find(|c| c.name == name).map(|c| c.value)
    }
}

/// Least squares by modified Gram-Schmidt: coefficients, residuals and the
/// diagonal of `(XᵀX)⁻¹`.
pub(crate) struct LsqFit<T> {
    pub coef: Vec<T>,
    pub residuals: Vec<T>,
    pub inv_diag: Vec<T>,
}

pub(crate) fn least_squares<T: Real>(rows: &[Vec<T>], y: &[T]) -> Result<LsqFit<T>> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if n <= p || p == 0 {
        return Err(Error::InvalidWindow(format!("{n} points cannot fit {p} parameters")));
    }
    // columns
    let mut q: Vec<Vec<T>> = (0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let mut r = vec![vec![T::zero(); p]; p];
    for j in 0..p {
        for i in 0..j {
            let d: T = q[i].iter().zip(&q[j]).map(|(a, b)| *a * *b).sum();
            r[i][j] = d;
            let qi = q[i].clone();
            for (v, a) in q[j].iter_mut().zip(&qi) {
                *v = *v - d * *a;
            }
        }
        let norm = q[j].iter().map(|v| *v * *v).sum::<T>().sqrt();
        if !(norm > T::epsilon() * T::lit(1e3)) {
            return Err(Error::InvalidWindow("regressors are collinear on this window".into()));
        }
        r[j][j] = norm;
        for v in q[j].iter_mut() {
            *v = *v / norm;
        }
    }
    let qty: Vec<T> = q.iter().map(|col| col.iter().zip(y).map(|(a, b)| *a * *b).sum()).collect();
    let mut coef = vec![T::zero(); p];
    for i in (0..p).rev() {
        let mut acc = qty[i];
        for k in i + 1..p {
            acc = acc - r[i][k] * coef[k];
        }
        coef[i] = acc / r[i][i];
    }
    // R⁻¹ by back substitution; diag((XᵀX)⁻¹) = row norms² of R⁻¹
    let mut rinv = vec![vec![T::zero(); p]; p];
    for c in 0..p {
        for i in (0..=c).rev() {
            let mut acc = if i == c { T::one() } else { T::zero() };
            for k in i + 1..=c {
                acc = acc - r[i][k] * rinv[k][c];
            }
            rinv[i][c] = acc / r[i][i];
        }
    }
    let inv_diag = (0..p).map(|i| rinv[i].iter().map(|v| *v * *v).sum()).collect();
    let residuals = rows
        .iter()
        .zip(y)
        .map(|(row, &yi)| yi - row.iter().zip(&coef).map(|(a, b)| *a * *b).sum::<T>())
        .collect();
    Ok(LsqFit { coef, residuals, inv_diag })
}

/// Indices of the curve points inside `window`, after the edge checks.
pub(crate) fn window_indices<T: Real>(curve: &DensityCurve<T>, window: (T, T)) -> Result<Vec<usize>> {
    let (lo, hi) = window;
    let g = &curve.x_grid;
    if g.len() < 2 {
        return Err(Error::InvalidWindow("curve has fewer than two points".into()));
    }
    if !(lo > g[0] && hi < g[g.len() - 1] && lo < hi) {
        return Err(Error::InvalidWindow(format!(
            "[{lo}, {hi}] is not strictly inside the grid [{}, {}]",
            g[0],
            g[g.len() - 1]
        )));
    }
    if let Some(h) = curve.bandwidth {
        let guard = T::lit(EDGE_BANDWIDTHS) * h;
        if (lo / g[0]).ln() < guard || (g[g.len() - 1] / hi).ln() < guard {
            return Err(Error::InvalidWindow(format!(
                "[{lo}, {hi}] is within {EDGE_BANDWIDTHS} bandwidths of the grid edge"
            )));
        }
    }
    let idx: Vec<usize> = (0..g.len()).filter(|&i| g[i] >= lo && g[i] <= hi).collect();
    if idx.iter().any(|&i| !(curve.density[i] > T::zero())) {
        return Err(Error::InvalidWindow("density vanishes inside the window".into()));
    }
    Ok(idx)
}

fn r_squared<T: Real>(y: &[T], residuals: &[T]) -> T {
    let n = T::from_count(y.len());
    let mean = y.iter().copied().sum::<T>() / n;
    let ss_tot: T = y.iter().map(|v| (*v - mean) * (*v - mean)).sum();
    let ss_res: T = residuals.iter().map(|r| *r * *r).sum();
    if ss_tot > T::zero() {
        (T::one() - ss_res / ss_tot).max(T::zero())
    } else if ss_res == T::zero() {
        T::one()
    } else {
        T::zero()
    }
}

/// Fits the prefactor constants of a template on `window` with the
/// theoretical exponents held fixed. `r²` is measured against the spread of
/// `log D` on the window.
pub fn fit_template<T: Real>(
    curve: &DensityCurve<T>,
    kind: TemplateKind<T>,
    window: (T, T),
) -> Result<AsymptoticTemplate<T>> {
    let idx = window_indices(curve, window)?;
    if curve.x_grid[curve.len() - 1] < T::lit(10.0) * window.0 {
        return Err(Error::InvalidWindow(
            "the curve must extend a decade beyond the window start".into(),
        ));
    }
    let mut rows = Vec::with_capacity(idx.len());
    let mut target = Vec::with_capacity(idx.len());
    let mut logd = Vec::with_capacity(idx.len());
    for &i in &idx {
        let x = curve.x_grid[i];
        let (fixed, regs) = kind.decompose(x).ok_or_else(|| {
            Error::InvalidWindow(format!("template undefined at x = {x} (needs large x)"))
        })?;
        let y = curve.density[i].ln();
        logd.push(y);
        target.push(y - fixed);
        rows.push(regs);
    }
    let fit = least_squares(&rows, &target)?;
    let r2 = r_squared(&logd, &fit.residuals);
    if r2 < T::lit(MIN_R_SQUARED) {
        return Err(Error::PoorFit {
            r_squared: r2.to_f64_lossy(),
            threshold: MIN_R_SQUARED,
        });
    }
    let n = fit.residuals.len();
    let p = fit.coef.len();
    let ss: T = fit.residuals.iter().map(|r| *r * *r).sum();
    let sigma2 = ss / T::from_count(n - p);
    let names = kind.constant_names();
    let mut constants = Vec::with_capacity(p);
    for j in 0..p {
        let se = (sigma2 * fit.inv_diag[j]).sqrt();
        let (value, std_err) = match (kind, j) {
            // prefactor reported on the natural scale
            (_, 0) => (fit.coef[0].exp(), fit.coef[0].exp() * se),
            _ => (fit.coef[j], se),
        };
        constants.push(FittedConstant {
            name: names[j],
            value,
            std_err,
        });
    }
    Ok(AsymptoticTemplate {
        model: kind.model(),
        kind,
        constants,
        window,
        n_points: n,
        r_squared: r2,
        rms_residual: (ss / T::from_count(n)).sqrt(),
        max_abs_residual: fit.residuals.iter().fold(T::zero(), |m, r| m.max(r.abs())),
        empirical: true,
    })
}

/// Ordinary least-squares line through `(log x, log D)` on a window.
#[derive(Debug, Clone, PartialEq)]
pub struct TailFitReport<T = f64> {
    pub slope: T,
    pub intercept: T,
    pub slope_std_err: T,
    pub window: (T, T),
    pub n_points: usize,
    pub r_squared: T,
    /// Largest absolute residual of `log D`: the pointwise band around the line.
    pub residual_band: T,
    /// Slopes fitted separately on the lower and upper halves of the window.
    pub half_slopes: (T, T),
    /// Set when the half-window slopes differ by more than
    /// [`POWER_LAW_DRIFT`].
    pub non_power_law: bool,
}

fn line_fit<T: Real>(xs: &[T], ys: &[T]) -> Result<(T, T, T, Vec<T>)> {
    let rows: Vec<Vec<T>> = xs.iter().map(|&x| vec![T::one(), x]).collect();
    let fit = least_squares(&rows, ys)?;
    let n = xs.len();
    let ss: T = fit.residuals.iter().map(|r| *r * *r).sum();
    let se = if n > 2 {
        (ss / T::from_count(n - 2) * fit.inv_diag[1]).sqrt()
    } else {
        T::zero()
    };
    Ok((fit.coef[1], fit.coef[0], se, fit.residuals))
}

/// Log-log regression of the density on `window`.
pub fn fit_tail_slope<T: Real>(curve: &DensityCurve<T>, window: (T, T)) -> Result<TailFitReport<T>> {
    let idx = window_indices(curve, window)?;
    if idx.len() < MIN_FIT_POINTS {
        return Err(Error::InvalidWindow(format!(
            "{} grid points in window, need at least {MIN_FIT_POINTS}",
            idx.len()
        )));
    }
    let xs: Vec<T> = idx.iter().map(|&i| curve.x_grid[i].ln()).collect();
    let ys: Vec<T> = idx.iter().map(|&i| curve.density[i].ln()).collect();
    let (slope, intercept, slope_std_err, residuals) = line_fit(&xs, &ys)?;
    let mid = xs.len() / 2;
    let (s1, _, _, _) = line_fit(&xs[..=mid], &ys[..=mid])?;
    let (s2, _, _, _) = line_fit(&xs[mid..], &ys[mid..])?;
    Ok(TailFitReport {
        slope,
        intercept,
        slope_std_err,
        window,
        n_points: idx.len(),
        r_squared: r_squared(&ys, &residuals),
        residual_band: residuals.iter().fold(T::zero(), |m, r| m.max(r.abs())),
        half_slopes: (s1, s2),
        non_power_law: (s1 - s2).abs() > T::lit(POWER_LAW_DRIFT),
    })
}

/// Scans windows of fixed log-width `log_width` (stepping by a quarter of
/// it) inside `range` and returns the fit whose half-window slopes agree
/// best. The chosen window is recorded in the report.
pub fn search_window<T: Real>(curve: &DensityCurve<T>, range: (T, T), log_width: T) -> Result<TailFitReport<T>> {
    let (a, b) = (range.0.ln(), range.1.ln());
    if !(log_width > T::zero() && b - a >= log_width) {
        return Err(Error::InvalidWindow("search range narrower than the window".into()));
    }
    let step = log_width / T::lit(4.0);
    let mut best: Option<TailFitReport<T>> = None;
    let mut start = a;
    while start + log_width <= b + T::epsilon() {
        let window = (start.exp(), (start + log_width).exp());
        if let Ok(fit) = fit_tail_slope(curve, window) {
            let drift = (fit.half_slopes.0 - fit.half_slopes.1).abs();
            if best
                .as_ref()
                .is_none_or(|b| drift < (b.half_slopes.0 - b.half_slopes.1).abs())
            {
                best = Some(fit);
            }
        }
        start = start + step;
    }
    best.ok_or_else(|| Error::InvalidWindow("no admissible window in the search range".into()))
}
