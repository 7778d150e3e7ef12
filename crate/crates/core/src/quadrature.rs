//! Adaptive Gauss-Kronrod quadrature.
//!
//! The 7/15-point pair from QUADPACK drives a global adaptive scheme: the
//! subinterval with the largest error estimate is bisected until the summed
//! error meets the tolerance or the subdivision cap is reached.

use crate::error::{Error, Result};
use crate::real::Real;

const XGK15: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK15: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the nodes XGK15[1], XGK15[3], XGK15[5], XGK15[7].
const WG7: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSpec<T = f64> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_subdivisions: usize,
}

impl<T: Real> QuadSpec<T> {
    pub fn new(abs_tol: T, rel_tol: T) -> Self {
        Self {
            abs_tol,
            rel_tol,
            max_subdivisions: 2000,
        }
    }

    pub fn with_max_subdivisions(mut self, max_subdivisions: usize) -> Self {
        self.max_subdivisions = max_subdivisions;
        self
    }

    pub(crate) fn target(&self, value: T) -> T {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

impl<T: Real> Default for QuadSpec<T> {
    fn default() -> Self {
        Self::new(T::lit(1e-13), T::lit(1e-10))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadEstimate<T = f64> {
    pub value: T,
    pub error: T,
    pub evaluations: usize,
}

/// One 15-point Kronrod panel on `[a, b]`; returns `(integral, error estimate)`.
pub fn gk15<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let fc = f(center);
    let mut kronrod = fc * T::lit(WGK15[7]);
    let mut gauss = fc * T::lit(WG7[3]);
    for j in 0..7 {
        let dx = half_len * T::lit(XGK15[j]);
        let pair = f(center - dx) + f(center + dx);
        kronrod = kronrod + T::lit(WGK15[j]) * pair;
        if j % 2 == 1 {
            gauss = gauss + T::lit(WG7[j / 2]) * pair;
        }
    }
    let value = kronrod * half_len;
    let error = ((kronrod - gauss) * half_len).abs();
    (value, error)
}

struct Panel<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<T: Real, F: FnMut(T) -> T>(
    f: F,
    a: T,
    b: T,
    spec: &QuadSpec<T>,
) -> Result<QuadEstimate<T>> {
    integrate_partitioned(f, &[a, b], spec)
}

/// Integrates `f` over `[points[0], points[last]]` with the given points as
/// initial panel boundaries, so kinks and peaks at known locations never
/// fall inside a panel.
pub fn integrate_partitioned<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    points: &[T],
    spec: &QuadSpec<T>,
) -> Result<QuadEstimate<T>> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument(
            "quadrature needs at least two breakpoints".into(),
        ));
    }
    if points.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::InvalidArgument(
            "quadrature breakpoints must be non-decreasing".into(),
        ));
    }
    let mut panels: Vec<Panel<T>> = Vec::with_capacity(points.len() * 4);
    let mut evaluations = 0;
    for w in points.windows(2) {
        if w[1] > w[0] {
            let (value, error) = gk15(&mut f, w[0], w[1]);
            evaluations += 15;
            panels.push(Panel {
                a: w[0],
                b: w[1],
                value,
                error,
            });
        }
    }
    loop {
        let value: T = panels.iter().map(|p| p.value).sum();
        let error: T = panels.iter().map(|p| p.error).sum();
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::QuadratureNotConverged {
                estimate: value.to_f64_lossy(),
                error: error.to_f64_lossy(),
                tolerance: spec.target(value).to_f64_lossy(),
            });
        }
        if error <= spec.target(value) {
            return Ok(QuadEstimate {
                value,
                error,
                evaluations,
            });
        }
        if panels.len() >= spec.max_subdivisions {
            return Err(Error::QuadratureNotConverged {
                estimate: value.to_f64_lossy(),
                error: error.to_f64_lossy(),
                tolerance: spec.target(value).to_f64_lossy(),
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.partial_cmp(&y.1.error).expect("finite errors"))
            .map(|(i, _)| i)
            .expect("at least one panel");
        let Panel { a, b, .. } = panels.swap_remove(worst);
        let mid = T::lit(0.5) * (a + b);
        if !(mid > a && mid < b) {
            // Panel cannot be split further in this precision.
            return Err(Error::QuadratureNotConverged {
                estimate: value.to_f64_lossy(),
                error: error.to_f64_lossy(),
                tolerance: spec.target(value).to_f64_lossy(),
            });
        }
        for (lo, hi) in [(a, mid), (mid, b)] {
            let (value, error) = gk15(&mut f, lo, hi);
            evaluations += 15;
            panels.push(Panel {
                a: lo,
                b: hi,
                value,
                error,
            });
        }
    }
}
