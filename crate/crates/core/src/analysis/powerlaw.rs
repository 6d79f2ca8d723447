//! Saturating power law `L(x) = A x^(-alpha) + C`.
//!
//! For a fixed `C` the model is linear in log space,
//! `log(L - C) = log A - alpha log x`, so `(A, alpha)` come from ordinary
//! least squares. `C` is searched on a grid below `min(L)` and refined by
//! golden-section search. The grid lives in units of `min(L)`, which makes
//! the fit equivariant under scaling of the losses.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerLawFit<T> {
    pub a: T,
    pub alpha: T,
    pub c: T,
    /// Sum of squared log-space residuals at the optimum.
    pub residual: T,
}

impl<T: Scalar> PowerLawFit<T> {
    pub fn predict(&self, x: T) -> T {
        self.a * x.powf(-self.alpha) + self.c
    }
}

const GRID_HALF: usize = 32;
const GRID_EPS: f64 = 1e-6;
const GOLDEN_ITERS: usize = 200;

/// 64 candidates for `C / min(L)`, ascending in `(0, 1)`: 32 geometric
/// points from `1e-6` to `0.5`, then 32 points `1 - t` with `t` geometric
/// from just below `0.5` down to `1e-6`.
pub fn c_grid() -> Vec<f64> {
    let geom = |k: usize, m: usize| GRID_EPS * (0.5 / GRID_EPS).powf(k as f64 / (m - 1) as f64);
    let mut grid: Vec<f64> = (0..GRID_HALF).map(|k| geom(k, GRID_HALF)).collect();
    grid.extend((0..GRID_HALF).rev().map(|k| 1.0 - geom(k, GRID_HALF + 1)));
    grid
}

/// Log-space least squares for a fixed `c`: returns `(log A, alpha, sse)`.
fn solve_fixed_c(lx: &[f64], y: &[f64], c: f64) -> (f64, f64, f64) {
    let n = lx.len() as f64;
    let ly: Vec<f64> = y.iter().map(|v| (v - c).ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in lx.iter().zip(&ly) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    (intercept, -slope, sse)
}

/// Fits `A x^(-alpha) + C` to a loss frontier.
pub fn fit_power_law<T: Scalar>(x: &[T], loss: &[T]) -> Result<PowerLawFit<T>> {
    if x.len() != loss.len() {
        return Err(Error::Usage("x and loss lengths differ".into()));
    }
    if x.len() < 4 {
        return Err(Error::Usage(format!("need at least 4 points, got {}", x.len())));
    }
    let xs: Vec<f64> = x.iter().map(|v| v.to_f64_lossy()).collect();
    let ys: Vec<f64> = loss.iter().map(|v| v.to_f64_lossy()).collect();
    if xs.iter().any(|v| !(v.is_finite() && *v > 0.0)) || xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Usage("x must be positive and strictly increasing".into()));
    }
    if ys.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Usage("losses must be positive and finite".into()));
    }
    if ys.windows(2).all(|w| w[1] >= w[0]) {
        return Err(Error::FitDegenerate(format!(
            "loss frontier never decreases ({} .. {}); alpha is unidentifiable",
            ys[0],
            ys[ys.len() - 1]
        )));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let min_loss = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let sse_at = |u: f64| solve_fixed_c(&lx, &ys, u * min_loss).2;

    let grid = c_grid();
    let scores: Vec<f64> = grid.iter().map(|&u| sse_at(u)).collect();
    let best = (0..grid.len())
        .min_by(|&i, &j| scores[i].total_cmp(&scores[j]))
        .expect("grid is non-empty");
    // C = 0 is admissible; the grid's lower neighbour of the first point.
    let mut lo = if best == 0 { 0.0 } else { grid[best - 1] };
    let mut hi = if best + 1 == grid.len() { 1.0 - GRID_EPS * 1e-3 } else { grid[best + 1] };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (sse_at(a), sse_at(b));
    for _ in 0..GOLDEN_ITERS {
        if hi - lo <= 1e-15 {
            break;
        }
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = sse_at(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = sse_at(b);
        }
    }
    let mut u = if fa <= fb { a } else { b };
    if scores[best] < sse_at(u) {
        u = grid[best];
    }
    let (log_a, alpha, sse) = solve_fixed_c(&lx, &ys, u * min_loss);
    Ok(PowerLawFit {
        a: T::of(log_a.exp()),
        alpha: T::of(alpha),
        c: T::of(u * min_loss),
        residual: T::of(sse),
    })
}

/// `L(N) = min_S L(N, S)`: the minimum of each row of `grid`.
pub fn frontier_min<T: Scalar>(grid: &[Vec<T>]) -> Vec<T> {
    grid.iter()
        .map(|row| row.iter().copied().fold(T::infinity(), T::min))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_sizes() -> Vec<f64> {
        (3..=10).map(|k| 2f64.powi(k)).collect()
    }

    fn curve(x: &[f64], a: f64, alpha: f64, c: f64) -> Vec<f64> {
        x.iter().map(|v| a * v.powf(-alpha) + c).collect()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn grid_is_increasing_inside_unit_interval() {
        let g = c_grid();
        assert_eq!(g.len(), 64);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(g[0] > 0.0 && g[63] < 1.0);
    }

    #[test]
    fn noiseless_recovery() {
        let x = sample_sizes();
        for &(a, alpha, c) in &[(2.0, 0.5, 0.1), (5.0, 0.3, 1.2), (1.0, 1.0, 0.05), (3.0, 0.7, 0.0001)] {
            let fit = fit_power_law(&x, &curve(&x, a, alpha, c)).unwrap();
            assert!(rel(fit.a, a) < 1e-3, "{fit:?}");
            assert!(rel(fit.alpha, alpha) < 1e-3, "{fit:?}");
            assert!(rel(fit.c, c) < 1e-3, "{fit:?}");
        }
    }

    #[test]
    fn f32_inputs() {
        let x: Vec<f32> = sample_sizes().iter().map(|&v| v as f32).collect();
        let y: Vec<f32> = x.iter().map(|v| 2.0 * v.powf(-0.5) + 0.1).collect();
        let fit = fit_power_law(&x, &y).unwrap();
        assert!((fit.alpha - 0.5).abs() < 1e-2);
    }

    #[test]
    fn constant_losses_are_degenerate() {
        let x = sample_sizes();
        assert!(matches!(fit_power_law(&x, &vec![0.7; x.len()]), Err(Error::FitDegenerate(_))));
        let rising: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        assert!(matches!(fit_power_law(&x, &rising), Err(Error::FitDegenerate(_))));
    }

    #[test]
    fn bad_inputs_are_rejected() {
        assert!(fit_power_law(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).is_err());
        assert!(fit_power_law(&[1.0, 3.0, 2.0, 4.0], &[4.0, 3.0, 2.0, 1.0]).is_err());
    }

    #[test]
    fn scaling_losses_is_equivariant() {
        let x = sample_sizes();
        let y = curve(&x, 2.0, 0.5, 0.1);
        let mut noisy = y.clone();
        noisy[3] *= 1.01;
        noisy[6] *= 0.99;
        for data in [y, noisy] {
            let base = fit_power_law(&x, &data).unwrap();
            for k in [0.01, 3.0, 250.0] {
                let scaled: Vec<f64> = data.iter().map(|v| v * k).collect();
                let fit = fit_power_law(&x, &scaled).unwrap();
                assert!(rel(fit.a, base.a * k) < 1e-6);
                assert!(rel(fit.c, base.c * k) < 1e-6);
                assert!((fit.alpha - base.alpha).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn frontier_is_elementwise_minimum() {
        let grid = vec![vec![3.0, 2.0, 4.0], vec![1.5, 1.7, 1.6]];
        assert_eq!(frontier_min(&grid), [2.0, 1.5]);
    }
}
