//! Incremental importance weights, their normalization, and the pathwise
//! score functional.
//!
//! The weight of one Euler step is the Girsanov increment
//! `log G = h(x)^T dy - (delta/2) h(x)^T h(x)` evaluated at the step's left
//! endpoint. The score functional recovers the Brownian increments from the
//! state path itself (`sigma^{-1}(x_k)(x_{k+1} - x_k - b(x_k) delta)`), so it
//! can be evaluated on any stored trajectory without keeping the noise.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::Result;
use crate::linalg::MAX_DIM;
use crate::models::{phi, Model};

/// Log Girsanov weight of a single step from state `x` against the
/// observation increment `dy`.
pub fn log_g(model: &dyn Model, theta: &[f64], x: &[f64], dy: &[f64], delta: f64) -> f64 {
    let mut h = [0.0; MAX_DIM];
    let dy_len = dy.len();
    model.obs_drift(theta, x, &mut h[..dy_len]);
    let mut dot = 0.0;
    let mut norm = 0.0;
    for (hi, &dyi) in h[..dy_len].iter().zip(dy) {
        dot += hi * dyi;
        norm += hi * hi;
    }
    dot - 0.5 * delta * norm
}

/// Sum of step log weights over the global step range `steps`, reading the
/// left-endpoint states from a flat path and the matching observation
/// increments from a flat increment array.
pub fn unit_log_weight(
    model: &dyn Model,
    theta: &[f64],
    delta: f64,
    path: &[f64],
    dim_x: usize,
    incs: &[f64],
    dim_y: usize,
    steps: Range<usize>,
) -> f64 {
    let mut acc = 0.0;
    for k in steps {
        let x = &path[k * dim_x..(k + 1) * dim_x];
        let dy = &incs[k * dim_y..(k + 1) * dim_y];
        acc += log_g(model, theta, x, dy, delta);
    }
    acc
}

/// Normalizes log weights into a probability vector.
///
/// Non-finite entries get zero mass. If no mass survives (every weight
/// underflowed or was non-finite) the result is uniform and the degenerate
/// flag is set; callers count that in their diagnostics rather than abort.
pub fn normalize_log_weights(log_w: &[f64]) -> (Vec<f64>, bool) {
    let n = log_w.len();
    let max = log_w
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return (vec![1.0 / n as f64; n], true);
    }
    let mut w: Vec<f64> = log_w
        .iter()
        .map(|&lw| if lw.is_finite() { libm::exp(lw - max) } else { 0.0 })
        .collect();
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return (vec![1.0 / n as f64; n], true);
    }
    for v in w.iter_mut() {
        *v /= total;
    }
    (w, false)
}

/// Effective sample size of a normalized weight vector: 1 / sum w_i^2.
pub fn ess(w: &[f64]) -> f64 {
    let s: f64 = w.iter().map(|&v| v * v).sum();
    1.0 / s
}

/// Elementwise minimum of two nonnegative vectors and its total mass.
pub fn min_overlap(p: &[f64], q: &[f64]) -> (Vec<f64>, f64) {
    debug_assert_eq!(p.len(), q.len());
    let m: Vec<f64> = p.iter().zip(q).map(|(&a, &b)| a.min(b)).collect();
    let mass = m.iter().sum();
    (m, mass)
}

/// Pathwise score functional at discretization `level`: along the whole path,
///
/// ```text
///   sum_k  phi(x_k) dW_k
///        + [grad_theta h(x_k)]^T (dy_k - h(x_k) delta)
/// ```
///
/// with `dW_k` recovered by solving `sigma(x_k) dW_k = x_{k+1} - x_k -
/// b(x_k) delta`. Output length is `d_theta`; entries are added into a
/// zeroed `out`.
pub fn score_lambda(
    model: &dyn Model,
    theta: &[f64],
    level: u32,
    path: &[f64],
    incs: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let dims = model.dims();
    let delta = crate::lattice::LevelGrid::new(level).delta();
    let n_steps = path.len() / dims.x - 1;
    debug_assert_eq!(incs.len(), n_steps * dims.y);
    debug_assert_eq!(out.len(), dims.theta);
    out.fill(0.0);

    let mut b = [0.0; MAX_DIM];
    let mut resid = [0.0; MAX_DIM];
    let mut dw = [0.0; MAX_DIM];
    let mut h = [0.0; MAX_DIM];
    let mut contrib = [0.0; MAX_DIM];
    for k in 0..n_steps {
        let x = &path[k * dims.x..(k + 1) * dims.x];
        let x_next = &path[(k + 1) * dims.x..(k + 2) * dims.x];
        let dy = &incs[k * dims.y..(k + 1) * dims.y];

        model.drift(theta, x, &mut b[..dims.x]);
        for i in 0..dims.x {
            resid[i] = x_next[i] - x[i] - b[i] * delta;
        }
        model
            .diffusion(x)
            .solve_vec(&resid[..dims.x], &mut dw[..dims.x])?;
        let ph = phi(model, theta, x)?;
        ph.matvec(&dw[..dims.x], &mut contrib[..dims.theta]);
        for i in 0..dims.theta {
            out[i] += contrib[i];
        }

        model.obs_drift(theta, x, &mut h[..dims.y]);
        let mut adj = [0.0; MAX_DIM];
        for i in 0..dims.y {
            adj[i] = dy[i] - h[i] * delta;
        }
        model
            .grad_obs_drift(theta, x)
            .tr_matvec(&adj[..dims.y], &mut contrib[..dims.theta]);
        for i in 0..dims.theta {
            out[i] += contrib[i];
        }
    }
    Ok(())
}
