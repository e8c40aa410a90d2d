//! Stochastic gradient ascent on the log-likelihood.
//!
//! Estimated parameter components are reparameterized as xi = ln theta, so
//! the ascent step xi += alpha g exp(xi) keeps them positive without any
//! projection. The gradient g is supplied by a caller-chosen unbiased score
//! estimator; each iteration draws it from a fresh stream, retrying once on
//! failure before aborting the run.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::models::{validate_theta, Model};
use crate::rng::{self, StreamCtx};

/// Ascent tuning. Defaults fit nothing in particular; use a preset.
#[derive(Clone, Copy, Debug)]
pub struct SgdConfig {
    /// Initial learning rate.
    pub alpha0: f64,
    /// Convergence tolerance on the largest parameter move.
    pub beta: f64,
    /// The learning rate halves at every positive multiple of this.
    pub halve_every: u32,
    /// Consecutive sub-tolerance iterations required to declare convergence.
    pub patience: u32,
    /// Iteration cap.
    pub max_iters: u32,
    /// Extra gradient attempts allowed per iteration after a failure.
    pub retry_attempts: u32,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            alpha0: 5e-2,
            beta: 1e-3,
            halve_every: 50,
            patience: 10,
            max_iters: 1000,
            retry_attempts: 1,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 >= 0.0 && self.alpha0.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be finite and >= 0"));
        }
        if !(self.beta > 0.0) {
            return Err(Error::InvalidConfig("stop tolerance must be positive"));
        }
        if self.halve_every == 0 || self.patience == 0 || self.max_iters == 0 {
            return Err(Error::InvalidConfig("ascent counters must be positive"));
        }
        Ok(())
    }
}

/// Per-model defaults: learning rate, tolerance, and the box the initial
/// estimated components are drawn from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SgdPreset {
    pub alpha0: f64,
    pub beta: f64,
    pub init_lo: f64,
    pub init_hi: f64,
}

pub fn preset_for(model_name: &str) -> Option<SgdPreset> {
    match model_name {
        "ou" => Some(SgdPreset {
            alpha0: 5e-2,
            beta: 1e-3,
            init_lo: 0.25,
            init_hi: 1.25,
        }),
        "gbm" => Some(SgdPreset {
            alpha0: 2.5e-2,
            beta: 1e-3,
            init_lo: 0.25,
            init_hi: 1.25,
        }),
        "lorenz" => Some(SgdPreset {
            alpha0: 1.5625e-3,
            beta: 5e-2,
            init_lo: 0.5,
            init_hi: 3.5,
        }),
        _ => None,
    }
}

/// Frozen components at their defaults, estimated components uniform on
/// [lo, hi].
pub fn draw_initial_theta(model: &dyn Model, lo: f64, hi: f64, ctx: StreamCtx) -> Vec<f64> {
    let mut theta = model.theta_default();
    let mut rng = ctx.rng();
    for &j in model.estimated() {
        theta[j] = lo + (hi - lo) * rng::uniform(&mut rng);
    }
    theta
}

/// A finished ascent run.
#[derive(Clone, Debug)]
pub struct SgdRun {
    /// Final parameter vector.
    pub theta: Vec<f64>,
    /// Every iterate including the initial point; length = iterations + 1.
    pub trajectory: Vec<Vec<f64>>,
    pub iterations: u32,
    /// Whether the patience criterion fired before the iteration cap.
    pub converged: bool,
    /// Gradient attempts that failed (each retry that was needed counts).
    pub estimator_failures: u32,
}

/// Gradient oracle: full-dimension score estimate at theta, drawn from the
/// given stream.
pub type GradFn<'a> = dyn FnMut(&[f64], StreamCtx) -> Result<Vec<f64>> + 'a;

/// Runs the log-reparameterized ascent from `theta_init`.
///
/// Iteration k draws its gradient from `ctx / SGD_ITER / k / attempt`, so a
/// retry sees fresh randomness and reruns of the same context reproduce the
/// trajectory exactly.
pub fn run_sgd(
    model: &dyn Model,
    theta_init: &[f64],
    grad: &mut GradFn<'_>,
    cfg: &SgdConfig,
    ctx: StreamCtx,
) -> Result<SgdRun> {
    cfg.validate()?;
    validate_theta(model, theta_init)?;
    let estimated = model.estimated();
    let d = model.dims().theta;

    let mut theta = theta_init.to_vec();
    let mut xi: Vec<f64> = estimated.iter().map(|&j| libm::log(theta[j])).collect();
    let mut alpha = cfg.alpha0;
    let mut trajectory = Vec::with_capacity(cfg.max_iters as usize + 1);
    trajectory.push(theta.clone());
    let mut iterations = 0;
    let mut converged = false;
    let mut streak = 0;
    let mut failures = 0;

    for k in 0..cfg.max_iters {
        if k > 0 && k % cfg.halve_every == 0 {
            alpha *= 0.5;
        }
        let iter_ctx = ctx.child(rng::SGD_ITER).child(k as u64);
        let mut gradient = None;
        for attempt in 0..=cfg.retry_attempts {
            match grad(&theta, iter_ctx.child(attempt as u64)) {
                Ok(g) if g.len() == d && g.iter().all(|v| v.is_finite()) => {
                    gradient = Some(g);
                    break;
                }
                _ => failures += 1,
            }
        }
        let g = gradient.ok_or(Error::GradientFailure { iteration: k })?;

        let mut max_move = 0.0f64;
        for (x, &j) in xi.iter_mut().zip(estimated) {
            let old = theta[j];
            *x += alpha * g[j] * libm::exp(*x);
            let new = libm::exp(*x);
            if !new.is_finite() {
                return Err(Error::NonFinite("ascent iterate"));
            }
            theta[j] = new;
            max_move = max_move.max((new - old).abs());
        }
        iterations = k + 1;
        trajectory.push(theta.clone());
        if max_move < cfg.beta {
            streak += 1;
        } else {
            streak = 0;
        }
        if streak >= cfg.patience {
            converged = true;
            break;
        }
    }

    Ok(SgdRun {
        theta,
        trajectory,
        iterations,
        converged,
        estimator_failures: failures,
    })
}
