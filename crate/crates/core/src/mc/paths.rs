//! Volatility-path transitions.

use rand::Rng;

use super::Scheme;
use crate::error::{Error, Result};
use crate::models::VolModel;
use crate::real::{sample_poisson_count, Real};

/// One-step transition of the volatility state with constants precomputed
/// for a fixed step size.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Stepper<T> {
    OuExact { m: T, decay: T, sd: T },
    GbmExact { drift: T, sd: T },
    CirTruncated { q: T, m: T, c: T, dt: T, sqrt_dt: T },
    CirExact { scale: T, half_dof: T, nc_factor: T },
    OuEuler { q: T, m: T, sigma: T, dt: T, sqrt_dt: T },
    CirEuler { q: T, m: T, c: T, dt: T, sqrt_dt: T },
    GbmEuler { nu: T, xi: T, dt: T, sqrt_dt: T },
}

impl<T: Real> Stepper<T> {
    pub(crate) fn new(model: &VolModel<T>, scheme: Scheme, dt: T) -> Result<Self> {
        let half = T::lit(0.5);
        let sqrt_dt = dt.sqrt();
        let step = match (model, scheme) {
            (VolModel::SteinStein(p), Scheme::ExactOu) => {
                // Var = σ²(1 - e^{-2qΔ})/(2q), → σ²Δ as q → 0.
                let var = if p.q_rev > T::zero() {
                    p.sigma * p.sigma * -(-(p.q_rev + p.q_rev) * dt).exp_m1() / (p.q_rev + p.q_rev)
                } else {
                    p.sigma * p.sigma * dt
                };
                Stepper::OuExact {
                    m: p.m_level,
                    decay: (-p.q_rev * dt).exp(),
                    sd: var.sqrt(),
                }
            }
            (VolModel::SteinStein(p), Scheme::Euler) => Stepper::OuEuler {
                q: p.q_rev,
                m: p.m_level,
                sigma: p.sigma,
                dt,
                sqrt_dt,
            },
            (VolModel::HullWhite(p), Scheme::ExactGbm) => Stepper::GbmExact {
                drift: (p.nu - half * p.xi * p.xi) * dt,
                sd: p.xi * sqrt_dt,
            },
            (VolModel::HullWhite(p), Scheme::Euler) => Stepper::GbmEuler {
                nu: p.nu,
                xi: p.xi,
                dt,
                sqrt_dt,
            },
            (VolModel::Heston(p), Scheme::CirFullTruncation) => Stepper::CirTruncated {
                q: p.q_rev,
                m: p.m_level,
                c: p.c_vol,
                dt,
                sqrt_dt,
            },
            (VolModel::Heston(p), Scheme::CirExact) => {
                let decay = (-p.q_rev * dt).exp();
                let one_minus = -(-p.q_rev * dt).exp_m1();
                let c2 = p.c_vol * p.c_vol;
                Stepper::CirExact {
                    scale: c2 * one_minus / (T::lit(4.0) * p.q_rev),
                    half_dof: T::lit(2.0) * p.q_rev * p.m_level / c2,
                    nc_factor: T::lit(4.0) * p.q_rev * decay / (c2 * one_minus),
                }
            }
            (VolModel::Heston(p), Scheme::Euler) => Stepper::CirEuler {
                q: p.q_rev,
                m: p.m_level,
                c: p.c_vol,
                dt,
                sqrt_dt,
            },
            (model, scheme) => {
                return Err(Error::SchemeMismatch {
                    scheme: scheme.name(),
                    model: model.kind().name(),
                })
            }
        };
        Ok(step)
    }

    /// Advances the state by one step. `step` is only used for diagnostics.
    #[inline]
    pub(crate) fn advance<R: Rng + ?Sized>(&self, y: T, step: usize, rng: &mut R) -> Result<T> {
        let next = match *self {
            Stepper::OuExact { m, decay, sd } => m + (y - m) * decay + sd * T::sample_std_normal(rng),
            Stepper::GbmExact { drift, sd } => y * (drift + sd * T::sample_std_normal(rng)).exp(),
            Stepper::CirTruncated { q, m, c, dt, sqrt_dt } => {
                let pos = y.max(T::zero());
                y + q * (m - pos) * dt + c * pos.sqrt() * sqrt_dt * T::sample_std_normal(rng)
            }
            Stepper::CirExact {
                scale,
                half_dof,
                nc_factor,
            } => {
                // Y' = scale · χ²_d(λ), with the non-central χ² drawn as a
                // Poisson(λ/2) mixture of central χ²_{d+2N} = 2·Gamma(d/2 + N).
                let lam = nc_factor * y.max(T::zero());
                let n = sample_poisson_count((T::lit(0.5) * lam).to_f64_lossy(), rng);
                let shape = half_dof + T::from_count(n as usize);
                if shape > T::zero() {
                    scale * T::lit(2.0) * T::sample_gamma(shape, rng)
                } else {
                    T::zero()
                }
            }
            Stepper::OuEuler { q, m, sigma, dt, sqrt_dt } => {
                y + q * (m - y) * dt + sigma * sqrt_dt * T::sample_std_normal(rng)
            }
            Stepper::CirEuler { q, m, c, dt, sqrt_dt } => {
                let next = y + q * (m - y) * dt + c * y.sqrt() * sqrt_dt * T::sample_std_normal(rng);
                if next < T::zero() {
                    return Err(Error::NegativeVariance {
                        value: next.to_f64_lossy(),
                        step: step + 1,
                    });
                }
                next
            }
            Stepper::GbmEuler { nu, xi, dt, sqrt_dt } => {
                y + nu * y * dt + xi * y * sqrt_dt * T::sample_std_normal(rng)
            }
        };
        Ok(next)
    }

    /// Instantaneous variance carried by a state. Full truncation feeds the
    /// positive part of the state to the price equation.
    #[inline]
    pub(crate) fn variance(&self, y: T) -> T {
        match self {
            Stepper::CirTruncated { .. } | Stepper::CirExact { .. } | Stepper::CirEuler { .. } => {
                y.max(T::zero())
            }
            _ => y * y,
        }
    }
}

/// Fills `path` (length `n_steps + 1`) with one volatility path.
pub(crate) fn fill_path<T: Real, R: Rng + ?Sized>(
    stepper: &Stepper<T>,
    y0: T,
    path: &mut [T],
    rng: &mut R,
) -> Result<()> {
    path[0] = y0;
    for i in 1..path.len() {
        path[i] = stepper.advance(path[i - 1], i - 1, rng)?;
    }
    Ok(())
}

/// `(1/t)∫₀ᵗ φ(Y) ds` by the trapezoid rule on the uniform grid, computed
/// on the fly without storing the path.
pub(crate) fn mean_variance<T: Real, R: Rng + ?Sized>(
    stepper: &Stepper<T>,
    y0: T,
    n_steps: usize,
    rng: &mut R,
) -> Result<T> {
    let mut y = y0;
    let mut acc = T::lit(0.5) * stepper.variance(y);
    for i in 0..n_steps {
        y = stepper.advance(y, i, rng)?;
        let v = stepper.variance(y);
        acc = acc + if i + 1 == n_steps { T::lit(0.5) * v } else { v };
    }
    Ok(acc / T::from_count(n_steps))
}
