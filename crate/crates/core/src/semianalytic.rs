//! Stock-price densities from the mixing-density representation.
//!
//! With `F = x₀e^{μt}` and `z = log(x/F)`,
//!
//! ```text
//! D̃(x) = √F / (√(2πt) x^{3/2}) · ∫ e^{u/2} Λ(z − u) μ_t(du),
//! Λ(w) = ∫₀^∞ m_t(y)/y · exp(−w²/(2ty²) − ty²/8) dy,
//! ```
//!
//! where `μ_t` is the compound-Poisson law of the log-jump sum. Its atom is
//! applied exactly; the two continuous halves are integrated adaptively and
//! truncated where the exponential factor certifiably dominates `G₁`, `G₂`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::jumplaw::{horner, CompoundPoissonLaw};
use crate::mc::{CurveSource, DensityCurve, MixingDensityTable};
use crate::quadrature::{integrate_partitioned, QuadSpec};
use crate::real::Real;

/// Smallest admissible decay rate of a u-integrand.
pub const MIN_TAIL_DECAY: f64 = 1e-2;
/// Integrands are cut where they fall below this fraction of their peak.
pub const TAIL_CUTOFF: f64 = 1e-14;

/// Anything that evaluates `Λ_t(w)`; `Λ` depends on `(z, u)` only through
/// `w = z − u`, is even in `w`, and peaks at `w = 0`.
pub trait LambdaSource<T: Real>: Sync {
    fn lambda(&self, w: T) -> Result<T>;
    fn horizon(&self) -> T;
    /// `Λ_t(0)`, the maximum of `Λ_t`.
    fn peak(&self) -> T;
}

/// `Λ_t` by direct adaptive quadrature over a mixing table.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaKernel<T = f64> {
    pub mixing: MixingDensityTable<T>,
    pub t: T,
    pub quad: QuadSpec<T>,
    peak: T,
}

impl<T: Real> LambdaKernel<T> {
    pub fn new(mixing: MixingDensityTable<T>, t: T, quad: QuadSpec<T>) -> Result<Self> {
        if !(t > T::zero()) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {t}")));
        }
        if !(quad.rel_tol > T::zero() || quad.abs_tol > T::zero()) {
            return Err(Error::InvalidArgument("quadrature tolerance must be positive".into()));
        }
        let mut kernel = Self {
            mixing,
            t,
            quad,
            peak: T::zero(),
        };
        kernel.peak = kernel.eval(T::zero())?;
        Ok(kernel)
    }

    /// Kernel with relative tolerance `1e-10` and no absolute floor, so
    /// values deep in the tail keep their relative accuracy.
    pub fn with_default_quadrature(mixing: MixingDensityTable<T>, t: T) -> Result<Self> {
        Self::new(mixing, t, QuadSpec::new(T::min_positive_value(), T::lit(1e-10)))
    }

    /// `Λ_t(w)`, integrating panel by panel between the table nodes, where
    /// the interpolated mixing density is linear.
    pub fn eval(&self, w: T) -> Result<T> {
        let two_t = self.t + self.t;
        let eighth_t = self.t / T::lit(8.0);
        let w2 = w * w;
        let m = &self.mixing;
        let integrand = |y: T| {
            if y <= T::zero() {
                return T::zero();
            }
            m.density(y) / y * (-(w2 / (two_t * y * y)) - eighth_t * y * y).exp()
        };
        Ok(integrate_partitioned(integrand, &m.grid, &self.quad)?.value)
    }

    /// Tabulates `ln Λ_t` on `[0, w_max]` for fast interpolated evaluation.
    /// `spacing = None` picks a step from the mixing-density scale.
    pub fn tabulate(&self, spacing: Option<T>) -> Result<LambdaTable<T>> {
        let sqrt_t = self.t.sqrt();
        let spacing = spacing.unwrap_or_else(|| {
            (sqrt_t * self.mixing.mode() / T::lit(20.0)).max(T::lit(1e-3)).min(T::lit(2e-2))
        });
        if !(spacing > T::zero()) {
            return Err(Error::InvalidArgument("table spacing must be positive".into()));
        }
        // Beyond w_max, Λ(w) ≤ Λ(0)·exp(−w²/(2t y_max²)) is below 1e−280·Λ(0).
        let (_, y_max) = self.mixing.support();
        let floor = T::lit(1e-280).max(T::min_positive_value() / T::epsilon());
        let w_max = y_max * (-(T::lit(2.0) * self.t * floor.ln())).sqrt();
        let len = (w_max / spacing).ceil().to_usize().expect("finite table") + 1;
        let ln_floor = self.peak.ln() + floor.ln();
        let mut ln_values: Vec<T> = Vec::new();
        // evaluate in blocks and stop once Λ has fallen below the floor
        const BLOCK: usize = 256;
        while ln_values.len() < len {
            let start = ln_values.len();
            let end = (start + BLOCK).min(len);
            let block = (start..end)
                .into_par_iter()
                .map(|i| self.eval(T::from_count(i) * spacing).map(|v| v.ln()))
                .collect::<Result<Vec<T>>>()?;
            let done = block.iter().any(|v| !(*v > ln_floor));
            ln_values.extend(block.into_iter().take_while(|v| v.is_finite()));
            if done || ln_values.len() < end {
                break;
            }
        }
        if ln_values.len() < 4 {
            return Err(Error::InvalidArgument("Λ table has fewer than four usable nodes".into()));
        }
        Ok(LambdaTable {
            t: self.t,
            spacing,
            ln_values,
        })
    }
}

impl<T: Real> LambdaSource<T> for LambdaKernel<T> {
    fn lambda(&self, w: T) -> Result<T> {
        self.eval(w)
    }

    fn horizon(&self) -> T {
        self.t
    }

    fn peak(&self) -> T {
        self.peak
    }
}

/// `Λ_t(z, u)` by direct quadrature.
pub fn lambda_kernel<T: Real>(z: T, u: T, kernel: &LambdaKernel<T>) -> Result<T> {
    kernel.eval(z - u)
}

/// `ln Λ_t` on a uniform grid in `|w|`, interpolated by four-point Lagrange
/// polynomials (mirrored through `w = 0`). `Λ` is treated as zero past the
/// last node, where it is below `1e−280` of its peak.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaTable<T = f64> {
    pub t: T,
    pub spacing: T,
    pub ln_values: Vec<T>,
}

impl<T: Real> LambdaTable<T> {
    pub fn w_max(&self) -> T {
        T::from_count(self.ln_values.len() - 1) * self.spacing
    }

    fn node(&self, i: i64) -> T {
        self.ln_values[i.unsigned_abs() as usize]
    }

    pub fn eval(&self, w: T) -> T {
        let w = w.abs();
        if w > self.w_max() {
            return T::zero();
        }
        let pos = w / self.spacing;
        let last = self.ln_values.len() as i64 - 1;
        let i = pos.floor().to_i64().unwrap_or(0).min(last - 1);
        // stencil i-1 .. i+2, shifted left at the far end
        let start = (i - 1).min(last - 3);
        let x = pos - T::from_i64(start).expect("index");
        let f: [T; 4] = std::array::from_fn(|k| self.node(start + k as i64));
        let (one, two, three, six) = (T::one(), T::lit(2.0), T::lit(3.0), T::lit(6.0));
        let l0 = -(x - one) * (x - two) * (x - three) / six;
        let l1 = x * (x - two) * (x - three) / two;
        let l2 = -x * (x - one) * (x - three) / two;
        let l3 = x * (x - one) * (x - two) / six;
        (f[0] * l0 + f[1] * l1 + f[2] * l2 + f[3] * l3).exp()
    }
}

impl<T: Real> LambdaSource<T> for LambdaTable<T> {
    fn lambda(&self, w: T) -> Result<T> {
        Ok(self.eval(w))
    }

    fn horizon(&self) -> T {
        self.t
    }

    fn peak(&self) -> T {
        self.ln_values[0].exp()
    }
}

/// One continuous half of a jump measure: density `P(|u|)·e^{−rate·|u|}`
/// with `P(v) = Σ coeffs[k] v^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfLinePart<T = f64> {
    pub coeffs: Vec<T>,
    pub rate: T,
}

/// An atom at 0 plus densities on each half-line.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpMeasure<T = f64> {
    pub atom: T,
    pub up: HalfLinePart<T>,
    pub down: HalfLinePart<T>,
}

impl<T: Real> JumpMeasure<T> {
    /// `μ_t` itself.
    pub fn from_law(law: &CompoundPoissonLaw<T>) -> Self {
        Self {
            atom: law.atom_weight,
            up: HalfLinePart {
                coeffs: law.g1_coeffs.clone(),
                rate: law.params.eta1,
            },
            down: HalfLinePart {
                coeffs: law.g2_coeffs.clone(),
                rate: law.params.eta2,
            },
        }
    }

    /// `μ̃_t(du) = e^{−u} μ_t(−du)`: the up half carries `G₂` with rate
    /// `η₂ + 1`, the down half `G₁` with rate `η₁ − 1`.
    pub fn reflected(law: &CompoundPoissonLaw<T>) -> Self {
        Self {
            atom: law.atom_weight,
            up: HalfLinePart {
                coeffs: law.g2_coeffs.clone(),
                rate: law.params.eta2 + T::one(),
            },
            down: HalfLinePart {
                coeffs: law.g1_coeffs.clone(),
                rate: law.params.eta1 - T::one(),
            },
        }
    }

    /// The point mass at 0 alone (no jumps).
    pub fn dirac() -> Self {
        Self {
            atom: T::one(),
            up: HalfLinePart {
                coeffs: Vec::new(),
                rate: T::one(),
            },
            down: HalfLinePart {
                coeffs: Vec::new(),
                rate: T::one(),
            },
        }
    }
}

/// `∫₀^∞ P(v) e^{−decay·v} Λ(z − dir·v) dv`, where `decay` already includes
/// the `e^{±v/2}` factor. The upper limit `V` is past both the peak of `Λ`
/// and the point `(deg P)/decay` beyond which `P(v)e^{−decay·v}` decreases,
/// and satisfies `Λ(0)·P(V)e^{−decay·V} < TAIL_CUTOFF · peak`.
fn half_line_integral<T: Real, L: LambdaSource<T> + ?Sized>(
    coeffs: &[T],
    decay: T,
    z: T,
    dir: T,
    source: &L,
    quad: &QuadSpec<T>,
) -> Result<T> {
    if coeffs.is_empty() {
        return Ok(T::zero());
    }
    if !(decay > T::lit(MIN_TAIL_DECAY)) {
        return Err(Error::UncertifiableTail {
            rate: decay.to_f64_lossy(),
        });
    }
    let integrand = |v: T| -> Result<T> {
        Ok(horner(coeffs, v) * (-decay * v).exp() * source.lambda(z - dir * v)?)
    };
    let envelope = |v: T| source.peak() * horner(coeffs, v) * (-decay * v).exp();
    let centre = (dir * z).max(T::zero());
    let monotone = T::from_count(coeffs.len().saturating_sub(1)) / decay;
    // crude peak estimate from a sweep; a low estimate only pushes V out
    let probe_end = centre + monotone + T::lit(10.0) / decay;
    let mut peak = T::zero();
    for i in 0..=256 {
        let v = probe_end * T::from_count(i) / T::lit(256.0);
        peak = peak.max(integrand(v)?);
    }
    if !(peak > T::zero()) {
        return Ok(T::zero());
    }
    let threshold = T::lit(TAIL_CUTOFF) * peak;
    let mut upper = centre.max(monotone) + T::one() / decay;
    while !(envelope(upper) < threshold) {
        upper = upper + T::one() / decay;
        if !upper.is_finite() {
            return Err(Error::UncertifiableTail {
                rate: decay.to_f64_lossy(),
            });
        }
    }
    let mut points = vec![T::zero()];
    if centre > T::zero() && centre < upper {
        points.push(centre);
    }
    points.push(upper);
    let mut failure = None;
    let est = integrate_partitioned(
        |v| match integrand(v) {
            Ok(x) => x,
            Err(e) => {
                failure.get_or_insert(e);
                T::zero()
            }
        },
        &points,
        quad,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(est.value),
    }
}

/// `∫ e^{u/2} Λ(z − u) ν(du)` for an atom-plus-halves measure `ν`.
pub fn mixture_integral<T: Real, L: LambdaSource<T> + ?Sized>(
    measure: &JumpMeasure<T>,
    z: T,
    source: &L,
    quad: &QuadSpec<T>,
) -> Result<T> {
    let half = T::lit(0.5);
    let atom = if measure.atom > T::zero() {
        measure.atom * source.lambda(z)?
    } else {
        T::zero()
    };
    let up = half_line_integral(&measure.up.coeffs, measure.up.rate - half, z, T::one(), source, quad)?;
    let down = half_line_integral(&measure.down.coeffs, measure.down.rate + half, z, -T::one(), source, quad)?;
    Ok(atom + up + down)
}

/// `√F / (√(2πt) x^{3/2})`.
pub fn density_prefactor<T: Real>(x: T, forward: T, t: T) -> T {
    forward.sqrt() / ((T::TAU() * t).sqrt() * x * x.sqrt())
}

fn check_x<T: Real>(x: T) -> Result<()> {
    if x > T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("x must be positive and finite, got {x}")))
    }
}

/// Default tolerances for the outer u-integrals.
pub fn default_outer_quad<T: Real>() -> QuadSpec<T> {
    QuadSpec::new(T::min_positive_value(), T::lit(1e-9)).with_max_subdivisions(4000)
}

/// Jump-free density `D_t(x) = √F/(√(2πt) x^{3/2}) · Λ_t(log(x/F))`.
pub fn unperturbed_density<T: Real, L: LambdaSource<T> + ?Sized>(x: T, source: &L, forward: T) -> Result<T> {
    check_x(x)?;
    let t = source.horizon();
    Ok(density_prefactor(x, forward, t) * source.lambda((x / forward).ln())?)
}

fn check_horizons<T: Real>(law_t: T, kernel_t: T) -> Result<()> {
    if ((law_t - kernel_t) / kernel_t).abs() > T::lit(1e-12) {
        return Err(Error::InvalidArgument(format!(
            "jump law horizon {law_t} differs from kernel horizon {kernel_t}"
        )));
    }
    Ok(())
}

/// Perturbed density `D̃_t(x)` from the compound-Poisson law.
pub fn perturbed_density<T: Real, L: LambdaSource<T> + ?Sized>(
    x: T,
    source: &L,
    law: &CompoundPoissonLaw<T>,
    forward: T,
) -> Result<T> {
    perturbed_density_with(x, source, &JumpMeasure::from_law(law), law.t, forward, &default_outer_quad())
}

/// `(F/x)³ · D̃_t(F²/x)`, evaluated through the reflected law `μ̃_t` rather
/// than by substitution.
pub fn reflected_density<T: Real, L: LambdaSource<T> + ?Sized>(
    x: T,
    source: &L,
    law: &CompoundPoissonLaw<T>,
    forward: T,
) -> Result<T> {
    perturbed_density_with(x, source, &JumpMeasure::reflected(law), law.t, forward, &default_outer_quad())
}

/// Density for an arbitrary atom-plus-halves jump measure.
pub fn perturbed_density_with<T: Real, L: LambdaSource<T> + ?Sized>(
    x: T,
    source: &L,
    measure: &JumpMeasure<T>,
    law_t: T,
    forward: T,
    quad: &QuadSpec<T>,
) -> Result<T> {
    check_x(x)?;
    let t = source.horizon();
    check_horizons(law_t, t)?;
    let z = (x / forward).ln();
    Ok(density_prefactor(x, forward, t) * mixture_integral(measure, z, source, quad)?)
}

/// Evaluates `density` at every grid point (in parallel) as a
/// semi-analytic curve.
pub fn semi_analytic_curve<T: Real, F>(x_grid: &[T], density: F) -> Result<DensityCurve<T>>
where
    F: Fn(T) -> Result<T> + Sync,
{
    let values = x_grid.par_iter().map(|&x| density(x)).collect::<Result<Vec<T>>>()?;
    DensityCurve::new(x_grid.to_vec(), values, None, CurveSource::SemiAnalytic, None)
}

/// Nodes and weights of the `n`-point Gauss-Hermite rule for the weight
/// `e^{−x²}`, by Newton iteration on the orthonormal recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    (nodes, weights)
}

/// Expected value of a log-space Gaussian KDE with bandwidth `h` applied to
/// exact samples of a law with price density `density`: the log-price
/// density convolved with `N(0, h²)`, mapped back by `1/x`.
pub fn kernel_smoothed_density<T: Real, F>(x: T, h: T, density: &F) -> Result<T>
where
    F: Fn(T) -> Result<T>,
{
    check_x(x)?;
    let (nodes, weights) = gauss_hermite(48);
    let z = x.ln();
    let scale = T::lit(std::f64::consts::SQRT_2) * h;
    let mut acc = T::zero();
    for (&xi, &wi) in nodes.iter().zip(&weights) {
        let s = (z + scale * T::lit(xi)).exp();
        acc = acc + T::lit(wi) * s * density(s)?;
    }
    Ok(acc / (T::PI().sqrt() * x))
}

#[cfg(test)]
mod tests;
