//! The three diffusion models: drift, observation drift, diffusion
//! coefficient, and their parameter Jacobians.
//!
//! A model describes the pair of SDEs
//!
//! ```text
//!   dX_t = b_theta(X_t) dt + sigma(X_t) dW_t        (hidden state)
//!   dY_t = h_theta(X_t) dt + dB_t                   (observation path)
//! ```
//!
//! All parameter vectors have three components; which of them gradient
//! ascent actually updates is reported by [`Model::estimated`]. Dimensions
//! stay within [`crate::linalg::MAX_DIM`] by construction.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::SMat;
use crate::oracle::ScalarLgssm;

/// State, observation and parameter dimensions of a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub x: usize,
    pub y: usize,
    pub theta: usize,
}

/// Floor applied by state clamping for models that must stay positive.
pub const POSITIVITY_FLOOR: f64 = 1e-8;

pub trait Model: Send + Sync {
    /// Short identifier used by the CLI and run manifests.
    fn name(&self) -> &'static str;

    fn dims(&self) -> Dims;

    /// Reference parameter values (the ones data is simulated under).
    fn theta_default(&self) -> Vec<f64>;

    /// Indices of the components gradient ascent updates.
    fn estimated(&self) -> &'static [usize];

    /// Open admissible interval per component.
    fn theta_domain(&self) -> &'static [(f64, f64)];

    /// Mean of the randomized starting state used when simulating data.
    fn x_init_mean(&self) -> Vec<f64>;

    /// State drift `b_theta(x)`, written into `out` (length `dims().x`).
    fn drift(&self, theta: &[f64], x: &[f64], out: &mut [f64]);

    /// Observation drift `h_theta(x)`, written into `out` (length `dims().y`).
    fn obs_drift(&self, theta: &[f64], x: &[f64], out: &mut [f64]);

    /// Diffusion coefficient `sigma(x)` as a `d_x x d_x` matrix.
    fn diffusion(&self, x: &[f64]) -> SMat;

    /// Jacobian `d b_i / d theta_j`, shape `d_x x d_theta`.
    fn grad_drift(&self, theta: &[f64], x: &[f64]) -> SMat;

    /// Jacobian `d h_i / d theta_j`, shape `d_y x d_theta`.
    fn grad_obs_drift(&self, theta: &[f64], x: &[f64]) -> SMat;

    /// Projects `x` back into the admissible state space after an Euler
    /// step. Returns true if anything was altered.
    fn clamp_state(&self, _x: &mut [f64]) -> bool {
        false
    }

    /// Exact linear-Gaussian state-space form of the time discretization at
    /// `level`, if the model admits one. Drives the Kalman reference.
    fn linear_gaussian(&self, _theta: &[f64], _level: u32) -> Option<ScalarLgssm> {
        None
    }
}

/// Checks length, finiteness and domain membership of a parameter vector.
pub fn validate_theta(model: &dyn Model, theta: &[f64]) -> Result<()> {
    let d = model.dims().theta;
    if theta.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: theta.len(),
        });
    }
    for (i, (&v, &(lo, hi))) in theta.iter().zip(model.theta_domain()).enumerate() {
        if !v.is_finite() || v <= lo || v >= hi {
            return Err(Error::InvalidParameter { index: i, value: v });
        }
    }
    Ok(())
}

/// `phi_theta(x) = [grad_theta b]^T (sigma sigma^T)^{-1} sigma`, the
/// integrand multiplying the recovered Brownian increments in the score
/// functional. Shape `d_theta x d_x`.
pub fn phi(model: &dyn Model, theta: &[f64], x: &[f64]) -> Result<SMat> {
    let sigma = model.diffusion(x);
    let a = sigma.matmul(&sigma.transpose());
    let m = a.solve_mat(&sigma)?;
    Ok(model.grad_drift(theta, x).transpose().matmul(&m))
}

/// Constructs a model from its CLI identifier.
pub fn by_name(name: &str) -> Option<Box<dyn Model>> {
    match name {
        "ou" => Some(Box::new(OrnsteinUhlenbeck::default())),
        "gbm" => Some(Box::new(GeometricBrownian::default())),
        "lorenz" => Some(Box::new(Lorenz)),
        _ => None,
    }
}

/// Mean-reverting observation of an Ornstein-Uhlenbeck state:
/// `b = -theta2 x`, `h = theta1 (mu1 - x)`, constant scalar diffusion.
///
/// theta = [theta1, theta2, mu1]; only theta1 is estimated.
#[derive(Clone, Copy, Debug)]
pub struct OrnsteinUhlenbeck {
    pub sigma: f64,
}

impl Default for OrnsteinUhlenbeck {
    fn default() -> Self {
        OrnsteinUhlenbeck { sigma: 0.5 }
    }
}

impl Model for OrnsteinUhlenbeck {
    fn name(&self) -> &'static str {
        "ou"
    }

    fn dims(&self) -> Dims {
        Dims { x: 1, y: 1, theta: 3 }
    }

    fn theta_default(&self) -> Vec<f64> {
        vec![0.75, 0.75, 1.0]
    }

    fn estimated(&self) -> &'static [usize] {
        &[0]
    }

    fn theta_domain(&self) -> &'static [(f64, f64)] {
        &[(0.0, 1e6), (0.0, 1e6), (-1e6, 1e6)]
    }

    fn x_init_mean(&self) -> Vec<f64> {
        vec![0.0]
    }

    fn drift(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        out[0] = -theta[1] * x[0];
    }

    fn obs_drift(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        out[0] = theta[0] * (theta[2] - x[0]);
    }

    fn diffusion(&self, _x: &[f64]) -> SMat {
        SMat::from_rows(1, 1, &[self.sigma])
    }

    fn grad_drift(&self, _theta: &[f64], x: &[f64]) -> SMat {
        SMat::from_rows(1, 3, &[0.0, -x[0], 0.0])
    }

    fn grad_obs_drift(&self, theta: &[f64], x: &[f64]) -> SMat {
        SMat::from_rows(1, 3, &[theta[2] - x[0], 0.0, theta[0]])
    }

    fn linear_gaussian(&self, theta: &[f64], level: u32) -> Option<ScalarLgssm> {
        let delta = crate::lattice::LevelGrid::new(level).delta();
        Some(ScalarLgssm {
            trans: 1.0 - theta[1] * delta,
            trans_var: self.sigma * self.sigma * delta,
            obs_scale: -delta * theta[0],
            obs_shift: delta * theta[0] * theta[2],
            obs_var: delta,
        })
    }
}

/// Geometric Brownian state observed through its logarithm:
/// `b = theta2 x`, `h = theta1 (mu1 - ln x)`, `sigma(x) = 0.05 x`.
///
/// theta = [theta1, theta2, mu1]; only theta1 is estimated. The Euler walk
/// can cross zero, where neither `h` nor `sigma` makes sense, so the state
/// is clamped to a small positive floor after every step.
#[derive(Clone, Copy, Debug)]
pub struct GeometricBrownian {
    pub vol: f64,
}

impl Default for GeometricBrownian {
    fn default() -> Self {
        GeometricBrownian { vol: 0.05 }
    }
}

impl Model for GeometricBrownian {
    fn name(&self) -> &'static str {
        "gbm"
    }

    fn dims(&self) -> Dims {
        Dims { x: 1, y: 1, theta: 3 }
    }

    fn theta_default(&self) -> Vec<f64> {
        vec![0.75, 0.05, 1.0]
    }

    fn estimated(&self) -> &'static [usize] {
        &[0]
    }

    fn theta_domain(&self) -> &'static [(f64, f64)] {
        &[(0.0, 1e6), (0.0, 1e6), (-1e6, 1e6)]
    }

    fn x_init_mean(&self) -> Vec<f64> {
        vec![5.0]
    }

    fn drift(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        out[0] = theta[1] * x[0];
    }

    fn obs_drift(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        out[0] = theta[0] * (theta[2] - libm::log(x[0]));
    }

    fn diffusion(&self, x: &[f64]) -> SMat {
        SMat::from_rows(1, 1, &[self.vol * x[0]])
    }

    fn grad_drift(&self, _theta: &[f64], x: &[f64]) -> SMat {
        SMat::from_rows(1, 3, &[0.0, x[0], 0.0])
    }

    fn grad_obs_drift(&self, theta: &[f64], x: &[f64]) -> SMat {
        SMat::from_rows(1, 3, &[theta[2] - libm::log(x[0]), 0.0, theta[0]])
    }

    fn clamp_state(&self, x: &mut [f64]) -> bool {
        if x[0] < POSITIVITY_FLOOR {
            x[0] = POSITIVITY_FLOOR;
            true
        } else {
            false
        }
    }
}

/// Two-dimensional reduced Lorenz drift with linear observation:
/// `b = (-s (x1 - 1), x1 - b x2)`, `h = (k x1, k x2)`, identity diffusion.
///
/// theta = [s, b, k]; only the observation gain k is estimated.
#[derive(Clone, Copy, Debug, Default)]
pub struct Lorenz;

impl Model for Lorenz {
    fn name(&self) -> &'static str {
        "lorenz"
    }

    fn dims(&self) -> Dims {
        Dims { x: 2, y: 2, theta: 3 }
    }

    fn theta_default(&self) -> Vec<f64> {
        vec![10.0, 8.0 / 3.0, 2.0]
    }

    fn estimated(&self) -> &'static [usize] {
        &[2]
    }

    fn theta_domain(&self) -> &'static [(f64, f64)] {
        &[(0.0, 1e6), (0.0, 1e6), (0.0, 1e6)]
    }

    fn x_init_mean(&self) -> Vec<f64> {
        vec![0.0, 0.0]
    }

    fn drift(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        out[0] = -theta[0] * (x[0] - 1.0);
        out[1] = x[0] - theta[1] * x[1];
    }

    fn obs_drift(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        out[0] = theta[2] * x[0];
        out[1] = theta[2] * x[1];
    }

    fn diffusion(&self, _x: &[f64]) -> SMat {
        SMat::identity(2)
    }

    fn grad_drift(&self, _theta: &[f64], x: &[f64]) -> SMat {
        SMat::from_rows(2, 3, &[-(x[0] - 1.0), 0.0, 0.0, 0.0, -x[1], 0.0])
    }

    fn grad_obs_drift(&self, _theta: &[f64], x: &[f64]) -> SMat {
        SMat::from_rows(2, 3, &[0.0, 0.0, x[0], 0.0, 0.0, x[1]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drift1(m: &dyn Model, theta: &[f64], x: &[f64]) -> f64 {
        let mut out = [0.0];
        m.drift(theta, x, &mut out);
        out[0]
    }

    #[test]
    fn ou_drift_and_observation_values() {
        let m = OrnsteinUhlenbeck::default();
        let theta = [0.75, 0.75, 1.0];
        assert_eq!(drift1(&m, &theta, &[2.0]), -1.5);
        let mut h = [0.0];
        m.obs_drift(&theta, &[1.0], &mut h);
        assert_eq!(h[0], 0.0, "observation drift vanishes at the mean");
        assert_eq!(m.grad_obs_drift(&theta, &[0.0]).get(0, 0), 1.0);
    }

    #[test]
    fn gbm_drift_value_and_clamp() {
        let m = GeometricBrownian::default();
        assert_eq!(drift1(&m, &[0.75, 0.05, 1.0], &[5.0]), 0.25);
        let mut x = [-0.3];
        assert!(m.clamp_state(&mut x));
        assert_eq!(x[0], POSITIVITY_FLOOR);
        let mut ok = [0.2];
        assert!(!m.clamp_state(&mut ok));
        assert_eq!(ok[0], 0.2);
    }

    #[test]
    fn lorenz_drift_and_obs_gradient() {
        let m = Lorenz;
        let theta = m.theta_default();
        let mut b = [0.0, 0.0];
        m.drift(&theta, &[1.0, 1.0], &mut b);
        assert_eq!(b[0], 0.0);
        assert!((b[1] - (1.0 - 8.0 / 3.0)).abs() < 1e-15);
        let g = m.grad_obs_drift(&theta, &[2.0, 3.0]);
        assert_eq!((g.get(0, 2), g.get(1, 2)), (2.0, 3.0));
    }

    #[test]
    fn phi_known_values() {
        // OU: phi = grad_b^T sigma^{-1}; the theta1 row is zero and the
        // theta2 row is -x / sigma.
        let ou = OrnsteinUhlenbeck::default();
        let p = phi(&ou, &[0.75, 0.75, 1.0], &[2.0]).unwrap();
        assert_eq!(p.get(0, 0), 0.0);
        assert!((p.get(1, 0) - (-4.0)).abs() < 1e-12);

        // GBM: state-dependent sigma cancels to x / sigma(x) = 1 / vol.
        let gbm = GeometricBrownian::default();
        let p = phi(&gbm, &[0.75, 0.05, 1.0], &[5.0]).unwrap();
        assert!((p.get(1, 0) - 20.0).abs() < 1e-10);
    }

    #[test]
    fn phi_matches_transposed_jacobian_times_inverse_noise() {
        // Independent route: for invertible sigma,
        // grad^T (sigma sigma^T)^{-1} sigma = grad^T sigma^{-T}.
        let m = Lorenz;
        let theta = m.theta_default();
        let x = [0.4, -1.3];
        let p = phi(&m, &theta, &x).unwrap();
        // Identity diffusion: phi is just the transposed Jacobian.
        let gt = m.grad_drift(&theta, &x).transpose();
        for i in 0..3 {
            for j in 0..2 {
                assert!((p.get(i, j) - gt.get(i, j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn theta_validation() {
        let m = OrnsteinUhlenbeck::default();
        assert!(validate_theta(&m, &[0.75, 0.75, 1.0]).is_ok());
        assert_eq!(
            validate_theta(&m, &[0.75, 0.75]),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        );
        assert!(matches!(
            validate_theta(&m, &[-0.1, 0.75, 1.0]),
            Err(Error::InvalidParameter { index: 0, .. })
        ));
        assert!(matches!(
            validate_theta(&m, &[f64::NAN, 0.75, 1.0]),
            Err(Error::InvalidParameter { index: 0, .. })
        ));
    }

    #[test]
    fn lookup_by_name() {
        for name in ["ou", "gbm", "lorenz"] {
            let m = by_name(name).unwrap();
            assert_eq!(m.name(), name);
            assert_eq!(m.theta_default().len(), m.dims().theta);
            for &i in m.estimated() {
                assert!(i < m.dims().theta);
            }
        }
        assert!(by_name("heston").is_none());
    }
}
