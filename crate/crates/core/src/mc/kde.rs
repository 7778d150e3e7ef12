//! Gaussian kernel density estimation.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::real::Real;

/// Kernels are cut at this many bandwidths; `φ(8) ≈ 5e-15`.
pub(crate) const KERNEL_REACH: f64 = 8.0;

/// Mean and (n−1)-normalized standard deviation.
pub fn mean_and_sd<T: Real>(samples: &[T]) -> (T, T) {
    let n = T::from_count(samples.len());
    let mean = samples.iter().copied().sum::<T>() / n;
    let ss: T = samples.iter().map(|&s| (s - mean) * (s - mean)).sum();
    let sd = if samples.len() > 1 {
        (ss / (n - T::one())).sqrt()
    } else {
        T::zero()
    };
    (mean, sd)
}

/// Empirical quantile of sorted data by linear interpolation between order
/// statistics.
pub fn quantile_sorted<T: Real>(sorted: &[T], prob: T) -> T {
    let pos = prob.max(T::zero()).min(T::one()) * T::from_count(sorted.len() - 1);
    let lo = pos.floor().to_usize().unwrap_or(0).min(sorted.len() - 1);
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - T::from_count(lo);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn sort_samples<T: Real>(samples: &mut [T]) {
    samples.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite samples"));
}

/// Silverman's rule of thumb `0.9 · min(sd, IQR/1.34) · n^{-1/5}` on sorted
/// samples. Rejects sets whose spread is zero to working precision.
pub fn silverman_bandwidth<T: Real>(sorted: &[T]) -> Result<T> {
    let (mean, sd) = mean_and_sd(sorted);
    let scale_floor = T::lit(1e-10) * mean.abs().max(T::min_positive_value());
    if !(sd > scale_floor) {
        return Err(Error::DegenerateSamples {
            std_dev: sd.to_f64_lossy(),
        });
    }
    let iqr = quantile_sorted(sorted, T::lit(0.75)) - quantile_sorted(sorted, T::lit(0.25));
    let spread = if iqr > T::zero() { sd.min(iqr / T::lit(1.34)) } else { sd };
    Ok(T::lit(0.9) * spread * T::from_count(sorted.len()).powf(T::lit(-0.2)))
}

/// Pointwise estimate with a batch-means standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeEstimate<T = f64> {
    pub values: Vec<T>,
    pub std_err: Vec<T>,
}

/// Gaussian KDE at `points` from samples sorted by value, each tagged with
/// its batch. Batches are equal-size blocks of the original (path-index)
/// order; the standard error is the spread of the per-batch estimates.
pub(crate) fn windowed_kde<T: Real>(
    sorted: &[(T, u32)],
    batch_sizes: &[usize],
    points: &[T],
    h: T,
) -> KdeEstimate<T> {
    let n = T::from_count(sorted.len());
    let reach = T::lit(KERNEL_REACH) * h;
    let norm = T::one() / (h * T::TAU().sqrt());
    let nb = batch_sizes.len();
    let per_point: Vec<(T, T)> = points
        .par_iter()
        .map(|&z| {
            let lo = sorted.partition_point(|s| s.0 < z - reach);
            let hi = sorted.partition_point(|s| s.0 <= z + reach);
            let mut total = T::zero();
            let mut by_batch = vec![T::zero(); nb];
            for &(s, b) in &sorted[lo..hi] {
                let r = (z - s) / h;
                let k = (T::lit(-0.5) * r * r).exp();
                total = total + k;
                by_batch[b as usize] = by_batch[b as usize] + k;
            }
            let value = total * norm / n;
            let se = if nb > 1 {
                let est: Vec<T> = by_batch
                    .iter()
                    .zip(batch_sizes)
                    .map(|(&k, &m)| k * norm / T::from_count(m))
                    .collect();
                let mean = est.iter().copied().sum::<T>() / T::from_count(nb);
                let ss: T = est.iter().map(|&e| (e - mean) * (e - mean)).sum();
                (ss / T::from_count(nb * (nb - 1))).sqrt()
            } else {
                T::zero()
            };
            (value, se)
        })
        .collect();
    let (values, std_err) = per_point.into_iter().unzip();
    KdeEstimate { values, std_err }
}

/// Linear-binned Gaussian KDE on the uniform grid `lo + j·spacing`,
/// `j < len`. Binning error is `O(spacing²)`, negligible for
/// `spacing ≤ h/4`.
pub(crate) fn binned_kde<T: Real>(samples: &[T], lo: T, spacing: T, len: usize, h: T) -> Vec<T> {
    let mut counts = vec![T::zero(); len];
    for &s in samples {
        let pos = (s - lo) / spacing;
        let j = pos.floor();
        let frac = pos - j;
        let j = j.to_i64().unwrap_or(-1);
        if j >= 0 && (j as usize) < len {
            counts[j as usize] = counts[j as usize] + (T::one() - frac);
        }
        if j + 1 >= 0 && ((j + 1) as usize) < len {
            counts[(j + 1) as usize] = counts[(j + 1) as usize] + frac;
        }
    }
    let reach = (T::lit(KERNEL_REACH) * h / spacing).ceil().to_usize().unwrap_or(0);
    let kernel: Vec<T> = (0..=reach)
        .map(|d| {
            let r = T::from_count(d) * spacing / h;
            (T::lit(-0.5) * r * r).exp()
        })
        .collect();
    let norm = T::one() / (T::from_count(samples.len()) * h * T::TAU().sqrt());
    (0..len)
        .map(|i| {
            let a = i.saturating_sub(reach);
            let b = (i + reach).min(len - 1);
            let mut acc = T::zero();
            for (j, &c) in counts.iter().enumerate().take(b + 1).skip(a) {
                if c > T::zero() {
                    acc = acc + c * kernel[i.abs_diff(j)];
                }
            }
            acc * norm
        })
        .collect()
}

/// Trapezoid integral of `values` over a (possibly non-uniform) grid.
pub fn trapezoid<T: Real>(grid: &[T], values: &[T]) -> T {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(x, y)| T::lit(0.5) * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let s = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.5), 2.0);
        assert_eq!(quantile_sorted(&s, 0.125), 0.5);
    }

    #[test]
    fn constant_samples_are_degenerate() {
        let s = vec![0.2; 100];
        assert!(matches!(
            silverman_bandwidth(&s),
            Err(Error::DegenerateSamples { .. })
        ));
    }

    #[test]
    fn binned_and_direct_estimates_agree() {
        let samples: Vec<f64> = (0..2000).map(|i| ((i as f64) * 0.618_033_988_7).fract()).collect();
        let h = 0.05;
        let lo = -0.5;
        let spacing = h / 16.0;
        let len = (2.0 / spacing) as usize;
        let binned = binned_kde(&samples, lo, spacing, len, h);
        let mut tagged: Vec<(f64, u32)> = samples.iter().map(|&s| (s, 0)).collect();
        tagged.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let points: Vec<f64> = (0..len).map(|j| lo + j as f64 * spacing).collect();
        let direct = windowed_kde(&tagged, &[samples.len()], &points, h);
        for (a, b) in binned.iter().zip(&direct.values) {
            assert!((a - b).abs() < 2e-3, "{a} {b}");
        }
    }
}
