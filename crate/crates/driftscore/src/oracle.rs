//! Exact reference values for models whose discretization is linear-Gaussian.
//!
//! The mean-reverting scalar model admits a closed filter: the Euler chain is
//! an AR(1) in the state and the observation increments are affine in it, so
//! the likelihood of the increments has a prediction-error decomposition. The
//! score reference is a central finite difference of that likelihood, which
//! is exact for score comparison purposes because the observation-increment
//! likelihood differs from the particle systems' normalizing constant only by
//! a factor that does not depend on theta.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lattice::ObservationRecord;
use crate::models::Model;

/// Scalar linear-Gaussian state-space form of one discretization level:
///
/// ```text
///   x_{k+1} = trans * x_k + N(0, trans_var)
///   z_k     = obs_shift + obs_scale * x_k + N(0, obs_var)
/// ```
///
/// with `x_0` known exactly (zero initial covariance).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarLgssm {
    pub trans: f64,
    pub trans_var: f64,
    pub obs_scale: f64,
    pub obs_shift: f64,
    pub obs_var: f64,
}

/// Finite-difference step of the score reference.
pub const FD_STEP: f64 = 1e-5;

/// Log-likelihood of the observation increments `z_0..z_{n-1}` under the
/// filter recursion, observing before propagating. `z_k` reads the state at
/// the left endpoint of step k, so the first observation sees `x0` exactly.
pub fn kalman_loglik(ssm: &ScalarLgssm, x0: f64, obs: &[f64]) -> f64 {
    let mut m = x0;
    let mut p = 0.0;
    let mut ll = 0.0;
    for &z in obs {
        let s = ssm.obs_scale * ssm.obs_scale * p + ssm.obs_var;
        let nu = z - ssm.obs_shift - ssm.obs_scale * m;
        ll -= 0.5 * (libm::log(2.0 * core::f64::consts::PI * s) + nu * nu / s);
        let gain = p * ssm.obs_scale / s;
        m += gain * nu;
        p -= gain * ssm.obs_scale * p;
        m = ssm.trans * m;
        p = ssm.trans * ssm.trans * p + ssm.trans_var;
    }
    ll
}

/// Exact log-likelihood of a record's level-`level` increments, for models
/// that provide a linear-Gaussian form. The parameter vector is passed
/// through unvalidated so finite differencing may probe just outside the
/// nominal domain.
pub fn reference_loglik(
    model: &dyn Model,
    theta: &[f64],
    record: &ObservationRecord,
    level: u32,
) -> Result<f64> {
    let ssm = model
        .linear_gaussian(theta, level)
        .ok_or(Error::Unsupported(
            "score reference requires a linear-Gaussian discretization",
        ))?;
    if record.dim_y != 1 || record.x_star.len() != 1 {
        return Err(Error::Unsupported("score reference is scalar only"));
    }
    let incs = record.increments_at(level)?;
    Ok(kalman_loglik(&ssm, record.x_star[0], &incs))
}

/// Central finite-difference score at `theta`, component by component.
pub fn reference_score(
    model: &dyn Model,
    theta: &[f64],
    record: &ObservationRecord,
    level: u32,
) -> Result<Vec<f64>> {
    let mut grad = Vec::with_capacity(theta.len());
    let mut probe = theta.to_vec();
    for j in 0..theta.len() {
        probe[j] = theta[j] + FD_STEP;
        let up = reference_loglik(model, &probe, record, level)?;
        probe[j] = theta[j] - FD_STEP;
        let down = reference_loglik(model, &probe, record, level)?;
        probe[j] = theta[j];
        grad.push((up - down) / (2.0 * FD_STEP));
    }
    Ok(grad)
}
