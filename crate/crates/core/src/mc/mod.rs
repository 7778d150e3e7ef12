//! Monte Carlo engine: volatility paths, mixing-density tables and kernel
//! density estimates of the stock-price law.
//!
//! Given a volatility path, `∫√φ(Y) dW` is Gaussian with variance `t·α²`,
//! so each path contributes one normal draw rather than a discretized
//! stochastic integral. Every path reads from its own random streams (see
//! [`crate::rng`]), which makes all outputs independent of the thread count.

mod kde;
mod paths;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::jumplaw::sample_jump_draw;
use crate::models::{ModelKind, ModelSpec, VolModel};
use crate::real::Real;
use crate::rng::{path_stream, StreamPurpose};

pub use kde::{mean_and_sd, quantile_sorted, silverman_bandwidth, sort_samples, trapezoid, KdeEstimate};
use paths::Stepper;

/// Paths per parallel work item.
const CHUNK: usize = 2048;
/// Number of batches used for batch-means standard errors.
pub const DEFAULT_BATCHES: usize = 40;
/// Smallest sample set accepted by [`estimate_mixing_density`].
pub const MIN_MIXING_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Euler,
    ExactOu,
    ExactGbm,
    CirFullTruncation,
    CirExact,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Euler => "euler",
            Scheme::ExactOu => "exact_ou",
            Scheme::ExactGbm => "exact_gbm",
            Scheme::CirFullTruncation => "cir_full_truncation",
            Scheme::CirExact => "cir_exact",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        [
            Scheme::Euler,
            Scheme::ExactOu,
            Scheme::ExactGbm,
            Scheme::CirFullTruncation,
            Scheme::CirExact,
        ]
        .into_iter()
        .find(|s| s.name() == name)
    }

    /// The bias-free (or, for CIR, the robust) default for a model.
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::SteinStein => Scheme::ExactOu,
            ModelKind::Heston => Scheme::CirFullTruncation,
            ModelKind::HullWhite => Scheme::ExactGbm,
        }
    }

    pub fn supports(self, kind: ModelKind) -> bool {
        match self {
            Scheme::Euler => true,
            Scheme::ExactOu => kind == ModelKind::SteinStein,
            Scheme::ExactGbm => kind == ModelKind::HullWhite,
            Scheme::CirFullTruncation | Scheme::CirExact => kind == ModelKind::Heston,
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig<T = f64> {
    pub n_paths: usize,
    pub n_steps: usize,
    pub horizon: T,
    pub master_seed: u64,
    pub scheme: Scheme,
}

impl<T: Real> SimConfig<T> {
    pub fn new(n_paths: usize, n_steps: usize, horizon: T, master_seed: u64, scheme: Scheme) -> Self {
        Self {
            n_paths,
            n_steps,
            horizon,
            master_seed,
            scheme,
        }
    }

    pub fn with_seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    pub fn with_paths(mut self, n_paths: usize) -> Self {
        self.n_paths = n_paths;
        self
    }

    /// Checks the configuration on its own and against a model.
    pub fn check(&self, spec: &ModelSpec<T>) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidArgument("n_paths must be positive".into()));
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
        }
        if !(self.horizon > T::zero() && self.horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if !self.scheme.supports(spec.kind()) {
            return Err(Error::SchemeMismatch {
                scheme: self.scheme.name(),
                model: spec.kind().name(),
            });
        }
        spec.checked().map(|_| ())
    }

    fn dt(&self) -> T {
        self.horizon / T::from_count(self.n_steps)
    }
}

/// Everything one path contributes to the price law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathDraw<T = f64> {
    /// `α_t`, root-mean integrated variance.
    pub alpha: T,
    /// Standard normal driving `∫√φ(Y) dW` given the path.
    pub normal: T,
    /// Log-jump sum over the horizon; exactly 0 without jumps.
    pub jump_sum: T,
    pub jump_count: u64,
}

impl<T: Real> PathDraw<T> {
    /// `log x₀ + μt − ½tα² + √t·α·Z + jump_sum`.
    pub fn log_price(&self, spec: &ModelSpec<T>, t: T) -> T {
        spec.model.x0().ln() + spec.model.mu() * t - T::lit(0.5) * t * self.alpha * self.alpha
            + (t.sqrt() * self.alpha) * self.normal
            + self.jump_sum
    }
}

fn run_paths<U: Send, F>(n_paths: usize, f: F) -> Result<Vec<U>>
where
    F: Fn(u64) -> Result<U> + Sync,
{
    let n_chunks = n_paths.div_ceil(CHUNK);
    let chunks: Vec<Vec<U>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(n_paths);
            (start..end).map(|i| f(i as u64)).collect::<Result<Vec<U>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// One full volatility path (`n_steps + 1` states) of path `path_index`;
/// the same draws [`simulate_alpha`] integrates.
pub fn simulate_vol_path<T: Real>(spec: &ModelSpec<T>, cfg: &SimConfig<T>, path_index: u64) -> Result<Vec<T>> {
    cfg.check(spec)?;
    let stepper = Stepper::new(&spec.model, cfg.scheme, cfg.dt())?;
    let mut rng = path_stream(cfg.master_seed, path_index, StreamPurpose::Volatility);
    let mut path = vec![T::zero(); cfg.n_steps + 1];
    paths::fill_path(&stepper, spec.model.y0(), &mut path, &mut rng)?;
    Ok(path)
}

/// Instantaneous variance of a volatility state under `cfg`'s scheme.
pub fn path_variance<T: Real>(model: &VolModel<T>, scheme: Scheme, y: T) -> T {
    match (model, scheme) {
        (VolModel::Heston(_), _) => y.max(T::zero()),
        _ => y * y,
    }
}

/// `n_paths` independent draws of `α_t`.
pub fn simulate_alpha<T: Real>(spec: &ModelSpec<T>, cfg: &SimConfig<T>) -> Result<Vec<T>> {
    cfg.check(spec)?;
    let stepper = Stepper::new(&spec.model, cfg.scheme, cfg.dt())?;
    let y0 = spec.model.y0();
    run_paths(cfg.n_paths, |i| {
        let mut rng = path_stream(cfg.master_seed, i, StreamPurpose::Volatility);
        Ok(paths::mean_variance(&stepper, y0, cfg.n_steps, &mut rng)?.sqrt())
    })
}

/// Per-path `(α, Z, jump sum)` triples, in path-index order.
pub fn simulate_path_draws<T: Real>(spec: &ModelSpec<T>, cfg: &SimConfig<T>) -> Result<Vec<PathDraw<T>>> {
    cfg.check(spec)?;
    let stepper = Stepper::new(&spec.model, cfg.scheme, cfg.dt())?;
    let y0 = spec.model.y0();
    run_paths(cfg.n_paths, |i| {
        let mut vol_rng = path_stream(cfg.master_seed, i, StreamPurpose::Volatility);
        let alpha = paths::mean_variance(&stepper, y0, cfg.n_steps, &mut vol_rng)?.sqrt();
        let mut diff_rng = path_stream(cfg.master_seed, i, StreamPurpose::Diffusion);
        let normal = T::sample_std_normal(&mut diff_rng);
        let (jump_sum, jump_count) = match &spec.jumps {
            Some(j) => {
                let mut jump_rng = path_stream(cfg.master_seed, i, StreamPurpose::Jumps);
                let d = sample_jump_draw(cfg.horizon, j, &mut jump_rng);
                (d.sum, d.count)
            }
            None => (T::zero(), 0),
        };
        Ok(PathDraw {
            alpha,
            normal,
            jump_sum,
            jump_count,
        })
    })
}

/// Samples of `log X̃_t`, in path-index order.
pub fn simulate_log_prices<T: Real>(spec: &ModelSpec<T>, cfg: &SimConfig<T>) -> Result<Vec<T>> {
    let draws = simulate_path_draws(spec, cfg)?;
    Ok(draws.iter().map(|d| d.log_price(spec, cfg.horizon)).collect())
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate<T = f64> {
    pub mean: T,
    pub std_err: T,
}

/// Monte Carlo estimate of `E[X̃_t]`.
pub fn estimate_expected_price<T: Real>(spec: &ModelSpec<T>, cfg: &SimConfig<T>) -> Result<MeanEstimate<T>> {
    let prices: Vec<T> = simulate_log_prices(spec, cfg)?.into_iter().map(T::exp).collect();
    let (mean, sd) = mean_and_sd(&prices);
    Ok(MeanEstimate {
        mean,
        std_err: sd / T::from_count(prices.len()).sqrt(),
    })
}

/// Normalized tabulation of the mixing density `m_t` of `α_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingDensityTable<T = f64> {
    pub grid: Vec<T>,
    pub values: Vec<T>,
    pub bandwidth: T,
    pub n_samples: usize,
    pub model: ModelKind,
}

impl<T: Real> MixingDensityTable<T> {
    /// Validates and wraps a tabulation; values are renormalized to unit
    /// trapezoid mass.
    pub fn from_values(grid: Vec<T>, values: Vec<T>, bandwidth: T, n_samples: usize, model: ModelKind) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(Error::GridMismatch(format!(
                "mixing grid has {} nodes and {} values",
                grid.len(),
                values.len()
            )));
        }
        if !(grid[0] > T::zero()) || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::GridMismatch(
                "mixing grid must be positive and strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "mixing density values must be finite and non-negative".into(),
            ));
        }
        if !(bandwidth > T::zero()) {
            return Err(Error::InvalidArgument("bandwidth must be positive".into()));
        }
        let mass = trapezoid(&grid, &values);
        if !(mass > T::zero()) {
            return Err(Error::InvalidArgument("mixing density has no mass".into()));
        }
        let values = values.into_iter().map(|v| v / mass).collect();
        Ok(Self {
            grid,
            values,
            bandwidth,
            n_samples,
            model,
        })
    }

    /// Linear interpolation; zero off the grid.
    pub fn density(&self, y: T) -> T {
        let g = &self.grid;
        if y < g[0] || y > g[g.len() - 1] {
            return T::zero();
        }
        let i = g.partition_point(|&v| v <= y).clamp(1, g.len() - 1);
        let w = (y - g[i - 1]) / (g[i] - g[i - 1]);
        self.values[i - 1] + w * (self.values[i] - self.values[i - 1])
    }

    pub fn mass(&self) -> T {
        trapezoid(&self.grid, &self.values)
    }

    pub fn support(&self) -> (T, T) {
        (self.grid[0], self.grid[self.grid.len() - 1])
    }

    /// Grid node carrying the largest value.
    pub fn mode(&self) -> T {
        let (i, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        self.grid[i]
    }
}

/// Layout of the grid used by [`estimate_mixing_density`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingGridSpec<T = f64> {
    /// Grid nodes per bandwidth; at least 4.
    pub nodes_per_bandwidth: usize,
    /// Extension beyond the extreme samples, in bandwidths.
    pub tail_bandwidths: T,
}

impl<T: Real> Default for MixingGridSpec<T> {
    fn default() -> Self {
        Self {
            nodes_per_bandwidth: 8,
            tail_bandwidths: T::lit(4.0),
        }
    }
}

/// Gaussian-kernel estimate of `m_t` from samples of `α_t`. The grid spans
/// every sample (extended by `tail_bandwidths` bandwidths, but never below
/// half the smallest sample, so it stays positive).
pub fn estimate_mixing_density<T: Real>(
    samples: &[T],
    grid_spec: &MixingGridSpec<T>,
    model: ModelKind,
) -> Result<MixingDensityTable<T>> {
    if samples.len() < MIN_MIXING_SAMPLES {
        return Err(Error::TooFewSamples {
            got: samples.len(),
            need: MIN_MIXING_SAMPLES,
        });
    }
    if samples.iter().any(|s| !(*s >= T::zero()) || !s.is_finite()) {
        return Err(Error::InvalidArgument("alpha samples must be finite and non-negative".into()));
    }
    if grid_spec.nodes_per_bandwidth < 4 {
        return Err(Error::InvalidArgument("need at least 4 grid nodes per bandwidth".into()));
    }
    let mut sorted = samples.to_vec();
    sort_samples(&mut sorted);
    let h = silverman_bandwidth(&sorted)?;
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let ext = grid_spec.tail_bandwidths * h;
    let lo = (min - ext).max(T::lit(0.5) * min).max(T::min_positive_value());
    let hi = max + ext;
    let spacing = h / T::from_count(grid_spec.nodes_per_bandwidth);
    let len = ((hi - lo) / spacing).ceil().to_usize().expect("finite grid") + 1;
    let grid: Vec<T> = (0..len).map(|j| lo + T::from_count(j) * spacing).collect();
    let values = kde::binned_kde(&sorted, lo, spacing, len, h);
    MixingDensityTable::from_values(grid, values, h, samples.len(), model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveSource {
    MonteCarloKde,
    SemiAnalytic,
    AsymptoticTemplate,
}

impl CurveSource {
    pub fn name(self) -> &'static str {
        match self {
            CurveSource::MonteCarloKde => "mc_kde",
            CurveSource::SemiAnalytic => "semi_analytic",
            CurveSource::AsymptoticTemplate => "asymptotic_template",
        }
    }
}

/// Density samples over a log-spaced grid of prices.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCurve<T = f64> {
    pub x_grid: Vec<T>,
    pub density: Vec<T>,
    /// Pointwise standard errors; present exactly for Monte Carlo curves.
    pub std_err: Option<Vec<T>>,
    pub source: CurveSource,
    /// Kernel bandwidth in log-price, when a kernel estimate is involved.
    pub bandwidth: Option<T>,
}

impl<T: Real> DensityCurve<T> {
    pub fn new(
        x_grid: Vec<T>,
        density: Vec<T>,
        std_err: Option<Vec<T>>,
        source: CurveSource,
        bandwidth: Option<T>,
    ) -> Result<Self> {
        if x_grid.len() != density.len() || std_err.as_ref().is_some_and(|s| s.len() != x_grid.len()) {
            return Err(Error::GridMismatch("curve columns differ in length".into()));
        }
        if x_grid.first().is_some_and(|x| !(*x > T::zero())) || x_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::GridMismatch(
                "x grid must be positive and strictly increasing".into(),
            ));
        }
        if density.iter().any(|d| !(*d >= T::zero()) || !d.is_finite()) {
            return Err(Error::InvalidArgument("density must be finite and non-negative".into()));
        }
        if std_err.is_some() != (source == CurveSource::MonteCarloKde) {
            return Err(Error::InvalidArgument(
                "standard errors are carried by Monte Carlo curves only".into(),
            ));
        }
        Ok(Self {
            x_grid,
            density,
            std_err,
            source,
            bandwidth,
        })
    }

    pub fn len(&self) -> usize {
        self.x_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_grid.is_empty()
    }

    /// Trapezoid mass over the grid.
    pub fn mass(&self) -> T {
        trapezoid(&self.x_grid, &self.density)
    }
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid<T: Real>(lo: T, hi: T, n: usize) -> Result<Vec<T>> {
    if !(lo > T::zero() && hi > lo) || n < 2 {
        return Err(Error::InvalidArgument(format!(
            "log grid needs 0 < lo < hi and n >= 2 (lo = {lo}, hi = {hi}, n = {n})"
        )));
    }
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / T::from_count(n - 1);
    Ok((0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i + 1 == n {
                hi
            } else {
                (a + T::from_count(i) * step).exp()
            }
        })
        .collect())
}

/// Kernel density estimate of `X̃_t` on `x_grid`: Gaussian KDE of the
/// log-price with Silverman's bandwidth, mapped to price space by the
/// Jacobian `1/x`, with batch-means standard errors.
pub fn simulate_price_density<T: Real>(spec: &ModelSpec<T>, cfg: &SimConfig<T>, x_grid: &[T]) -> Result<DensityCurve<T>> {
    let logs = simulate_log_prices(spec, cfg)?;
    kde_price_curve(&logs, x_grid, DEFAULT_BATCHES)
}

/// Price-space KDE curve from log-price samples given in path order.
pub fn kde_price_curve<T: Real>(log_samples: &[T], x_grid: &[T], batches: usize) -> Result<DensityCurve<T>> {
    if x_grid.is_empty() || x_grid.iter().any(|x| !(*x > T::zero())) {
        return Err(Error::InvalidArgument("x grid must be non-empty and positive".into()));
    }
    let n = log_samples.len();
    let nb = batches.clamp(1, n.max(1));
    if n < 2 * nb {
        return Err(Error::TooFewSamples { got: n, need: 2 * nb });
    }
    let mut sorted_values = log_samples.to_vec();
    sort_samples(&mut sorted_values);
    let h = silverman_bandwidth(&sorted_values)?;
    let mut batch_sizes = vec![0usize; nb];
    let mut tagged: Vec<(T, u32)> = log_samples
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let b = i * nb / n;
            batch_sizes[b] += 1;
            (s, b as u32)
        })
        .collect();
    tagged.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite samples").then(a.1.cmp(&b.1)));
    let points: Vec<T> = x_grid.iter().map(|x| x.ln()).collect();
    let est = kde::windowed_kde(&tagged, &batch_sizes, &points, h);
    let density = est.values.iter().zip(x_grid).map(|(&f, &x)| f / x).collect();
    let std_err = est.std_err.iter().zip(x_grid).map(|(&s, &x)| s / x).collect();
    DensityCurve::new(
        x_grid.to_vec(),
        density,
        Some(std_err),
        CurveSource::MonteCarloKde,
        Some(h),
    )
}
