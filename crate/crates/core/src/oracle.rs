//! Brute-force reference computations.
//!
//! Nothing here touches the closed-form coefficient tables; these routines
//! exist to cross-check them and are also exposed through the CLI.

use crate::jumplaw::{double_exp_density, JumpParams};
use crate::real::Real;

/// A function tabulated on the uniform grid `u_j = j * spacing`,
/// `j = -half_len..=half_len`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T = f64> {
    pub spacing: T,
    pub half_len: usize,
    pub values: Vec<T>,
}

impl<T: Real> GridFunction<T> {
    pub fn abscissa(&self, idx: usize) -> T {
        T::from_count(idx) * self.spacing - T::from_count(self.half_len) * self.spacing
    }

    pub fn index_of_node(&self, j: i64) -> Option<usize> {
        let idx = j + self.half_len as i64;
        (idx >= 0 && (idx as usize) < self.values.len()).then_some(idx as usize)
    }

    pub fn abscissae(&self) -> Vec<T> {
        (0..self.values.len()).map(|i| self.abscissa(i)).collect()
    }
}

/// Half-width beyond which `f^{*n}` is below `1e-14`, using the crude bound
/// `f^{*n}(u) ≤ η^n |u|^{n-1}/(n-1)! e^{-η_min |u|}` with `η = max(η₁, η₂)`.
pub fn truncation_half_width<T: Real>(params: &JumpParams<T>, n: usize, at_least: T) -> T {
    let eta_max = params.eta1.max(params.eta2);
    let eta_min = params.eta1.min(params.eta2);
    let nf = T::from_count(n);
    let ln_fact: T = (1..n).map(|k| T::from_count(k).ln()).sum();
    let mut width = at_least;
    let step = T::lit(0.5);
    loop {
        let bound = (nf * eta_max.ln() + (nf - T::one()) * width.ln() - ln_fact - eta_min * width).exp();
        if bound < T::lit(1e-14) {
            return width;
        }
        width = width + step;
    }
}

/// Iterated trapezoid convolution of the jump density on a uniform grid.
/// Jumps of the integrand sit on nodes and carry the mean of their
/// one-sided limits, which keeps the rule second-order.
pub fn grid_convolution_power<T: Real>(
    params: &JumpParams<T>,
    n: usize,
    spacing: T,
    half_width: T,
) -> GridFunction<T> {
    assert!(n >= 1, "convolution order must be positive");
    let half_len = (half_width / spacing).ceil().to_usize().expect("finite grid");
    let len = 2 * half_len + 1;
    let mut base = vec![T::zero(); len];
    for (i, b) in base.iter_mut().enumerate() {
        let j = i as i64 - half_len as i64;
        *b = if j == 0 {
            T::lit(0.5) * (params.p_up * params.eta1 + params.q_down * params.eta2)
        } else {
            double_exp_density(T::from_i64(j).expect("index") * spacing, params)
        };
    }
    let mut current = base.clone();
    for step in 1..n {
        let mut next = vec![T::zero(); len];
        for (out_idx, out) in next.iter_mut().enumerate() {
            // (f * g)(u_j) = h Σ_i f(u_i) g(u_j - u_i)
            let j = out_idx as i64 - half_len as i64;
            let lo = (j - half_len as i64).max(-(half_len as i64));
            let hi = (j + half_len as i64).min(half_len as i64);
            let mut acc = T::zero();
            for i in lo..=hi {
                let fi = base[(i + half_len as i64) as usize];
                let gi = current[(j - i + half_len as i64) as usize];
                acc = acc + fi * gi;
            }
            if step == 1 && j == 0 {
                // Both factors jump at v = 0 here, and the product's one-sided
                // limits are both p η₁ q η₂, not the product of the means.
                let mean = base[half_len];
                acc = acc - mean * mean + params.p_up * params.eta1 * params.q_down * params.eta2;
            }
            *out = acc * spacing;
        }
        current = next;
    }
    if n == 1 {
        // Report the one-sided value at the jump, not the trapezoid mean.
        current[half_len] = params.p_up * params.eta1;
    }
    GridFunction {
        spacing,
        half_len,
        values: current,
    }
}

/// Richardson-extrapolated grid convolution on nodes of spacing `spacing`:
/// `(4 F_{h/2} - F_h) / 3`, which removes the `h²` error term.
pub fn richardson_convolution_power<T: Real>(
    params: &JumpParams<T>,
    n: usize,
    spacing: T,
    half_width: T,
) -> GridFunction<T> {
    let coarse = grid_convolution_power(params, n, spacing, half_width);
    let fine = grid_convolution_power(params, n, spacing * T::lit(0.5), half_width);
    let values = (0..coarse.values.len())
        .map(|i| {
            let j = i as i64 - coarse.half_len as i64;
            let fi = fine.index_of_node(2 * j).expect("fine grid covers coarse");
            (T::lit(4.0) * fine.values[fi] - coarse.values[i]) / T::lit(3.0)
        })
        .collect();
    GridFunction {
        spacing,
        half_len: coarse.half_len,
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_two_matches_the_closed_form_mass_and_origin() {
        // p η₁ ≠ q η₂: the density jumps at 0
        let params = JumpParams::new(1.0, 0.4, 2.0, 3.0).unwrap();
        let g = grid_convolution_power(&params, 2, 0.01, 25.0);
        let mass: f64 = g.values.iter().sum::<f64>() * g.spacing;
        assert!((mass - 1.0).abs() < 2e-4, "{mass}");
        let r = richardson_convolution_power(&params, 2, 0.01, 25.0);
        // f*f(0) = 2 p q η₁ η₂ / (η₁ + η₂)
        assert!((r.values[r.half_len] - 2.0 * 0.4 * 0.6 * 6.0 / 5.0).abs() < 1e-8);
        // node sums of the oracle and of the exact density agree; both carry
        // the O(h²) error of summing a function with a kink at 0
        let exact: f64 = r
            .abscissae()
            .iter()
            .map(|&u| crate::jumplaw::convolution_density(2, u, &params).unwrap())
            .sum::<f64>()
            * r.spacing;
        let mass: f64 = r.values.iter().sum::<f64>() * r.spacing;
        assert!((mass - exact).abs() < 1e-8, "{mass} vs {exact}");
    }

    #[test]
    fn truncation_width_grows_with_order() {
        let params = JumpParams::new(1.0, 0.4, 2.0, 3.0).unwrap();
        let w2 = truncation_half_width(&params, 2, 10.0);
        let w5 = truncation_half_width(&params, 5, 10.0);
        assert!(w5 > w2 && w2 > 10.0);
    }
}
