//! Dyadic time grids, discrete paths, and the observation record.
//!
//! Level l discretizes each unit time interval into 2^(l+3) Euler steps of
//! width 2^-(l+3). Observations are stored once, on the finest grid l* they
//! were generated at; coarser increments are recovered by differencing every
//! 2^(l*-l)-th stored value, so the same record serves every level at or
//! below l*.

use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics;
use crate::error::{Error, Result};
use crate::models::Model;
use crate::rng::{self, StreamCtx};

/// Exponent offset of the dyadic grids: level l has step 2^-(l+3).
pub const LEVEL_EXP_OFFSET: u32 = 3;

/// Variance of the randomized starting state and starting observation used
/// by the data simulator.
pub const INIT_STATE_VAR: f64 = 1.6e-3;

/// One discretization level of the unit-interval lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LevelGrid {
    level: u32,
}

impl LevelGrid {
    pub fn new(level: u32) -> Self {
        assert!(level + LEVEL_EXP_OFFSET < 40, "level out of range");
        LevelGrid { level }
    }

    #[inline]
    pub fn level(&self) -> u32 {
        self.level
    }

    /// Step width; an exact power of two.
    #[inline]
    pub fn delta(&self) -> f64 {
        1.0 / (1u64 << (self.level + LEVEL_EXP_OFFSET)) as f64
    }

    /// Euler steps per unit time interval.
    #[inline]
    pub fn steps_per_unit(&self) -> usize {
        1usize << (self.level + LEVEL_EXP_OFFSET)
    }

    /// Total steps over `t_units` unit intervals.
    #[inline]
    pub fn total_steps(&self, t_units: usize) -> usize {
        t_units * self.steps_per_unit()
    }
}

/// A discrete path on one level's grid: `steps + 1` states of dimension
/// `dim`, stored flat in time-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticePath {
    pub level: u32,
    pub dim: usize,
    pub states: Vec<f64>,
}

impl LatticePath {
    pub fn n_states(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }
}

/// An observation path sampled on the finest grid, plus the fixed starting
/// state the estimation conditions on.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationRecord {
    /// Finest available level; levels above this cannot be served.
    pub l_star: u32,
    /// Length of the observation window in unit intervals.
    pub t_units: usize,
    /// Observation dimension.
    pub dim_y: usize,
    /// Seed the record was generated under (provenance only).
    pub seed: u64,
    /// Starting state of the hidden diffusion; its length is d_x.
    pub x_star: Vec<f64>,
    /// `(total_steps(l*) + 1) * dim_y` observation values, time-major.
    pub values: Vec<f64>,
}

impl ObservationRecord {
    /// Observation vector at fine-grid index `k`.
    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim_y..(k + 1) * self.dim_y]
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_units == 0 {
            return Err(Error::InvalidConfig("observation window has zero length"));
        }
        let expected = (LevelGrid::new(self.l_star).total_steps(self.t_units) + 1) * self.dim_y;
        if self.values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: self.values.len(),
            });
        }
        if self.x_star.is_empty() {
            return Err(Error::InvalidConfig("empty starting state"));
        }
        if !self.values.iter().chain(&self.x_star).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("observation record"));
        }
        Ok(())
    }

    /// Increment over level-`level` step `k`, written into `out`.
    pub fn increment(&self, level: u32, k: usize, out: &mut [f64]) -> Result<()> {
        if level > self.l_star {
            return Err(Error::LevelAboveData {
                requested: level,
                l_star: self.l_star,
            });
        }
        let stride = 1usize << (self.l_star - level);
        let lo = self.value(k * stride);
        let hi = self.value((k + 1) * stride);
        for ((o, &a), &b) in out.iter_mut().zip(hi).zip(lo) {
            *o = a - b;
        }
        Ok(())
    }

    /// All level-`level` increments, flat `n_steps x dim_y`. Estimators call
    /// this once per level and hold the result for the whole run.
    pub fn increments_at(&self, level: u32) -> Result<Vec<f64>> {
        let n = LevelGrid::new(level).total_steps(self.t_units);
        let mut flat = vec![0.0; n * self.dim_y];
        for (k, chunk) in flat.chunks_exact_mut(self.dim_y).enumerate() {
            self.increment(level, k, chunk)?;
        }
        Ok(flat)
    }
}

/// Latent path and observation record produced by the data simulator.
pub struct SimulatedData {
    pub latent: LatticePath,
    pub record: ObservationRecord,
    /// Euler positivity clamps that fired while generating the latent path.
    pub clamp_events: u64,
}

/// Simulates the joint (X, Y) Euler dynamics on grid `l_star` under `theta`.
///
/// The starting state is `N(x_init_mean, INIT_STATE_VAR I)` and the starting
/// observation `N(0, INIT_STATE_VAR I)`; both are recorded, and the realized
/// start becomes the `x_star` every later estimation conditions on. Per step
/// the state noise is drawn before the observation noise.
pub fn simulate_data(
    model: &dyn Model,
    theta: &[f64],
    l_star: u32,
    t_units: usize,
    seed: u64,
) -> Result<SimulatedData> {
    crate::models::validate_theta(model, theta)?;
    if t_units == 0 {
        return Err(Error::InvalidConfig("observation window has zero length"));
    }
    if l_star + LEVEL_EXP_OFFSET >= 40 {
        return Err(Error::InvalidConfig("data level out of range"));
    }
    let dims = model.dims();
    let grid = LevelGrid::new(l_star);
    let delta = grid.delta();
    let total = grid.total_steps(t_units);
    let sd0 = libm::sqrt(INIT_STATE_VAR);
    let sd_obs = libm::sqrt(delta);

    let mut rng = StreamCtx::root(seed).child(rng::DOMAIN_DATA).rng();
    let mut diag = dynamics::Diagnostics::default();

    let mut x = model.x_init_mean();
    for v in x.iter_mut() {
        *v += sd0 * rng::standard_normal(&mut rng);
    }
    if model.clamp_state(&mut x) {
        diag.clamp_events += 1;
    }
    let mut y = vec![0.0; dims.y];
    rng::fill_gaussian(&mut rng, sd0, &mut y);

    let mut latent = Vec::with_capacity((total + 1) * dims.x);
    let mut values = Vec::with_capacity((total + 1) * dims.y);
    latent.extend_from_slice(&x);
    values.extend_from_slice(&y);

    let mut w = vec![0.0; dims.x];
    let mut h = vec![0.0; dims.y];
    let mut next = vec![0.0; dims.x];
    for _ in 0..total {
        rng::fill_gaussian(&mut rng, libm::sqrt(delta), &mut w);
        dynamics::euler_step(model, theta, delta, &x, &w, &mut next, &mut diag);
        model.obs_drift(theta, &x, &mut h);
        for (yi, &hi) in y.iter_mut().zip(h.iter()) {
            *yi += hi * delta + sd_obs * rng::standard_normal(&mut rng);
        }
        x.copy_from_slice(&next);
        latent.extend_from_slice(&x);
        values.extend_from_slice(&y);
    }

    let record = ObservationRecord {
        l_star,
        t_units,
        dim_y: dims.y,
        seed,
        x_star: latent[..dims.x].to_vec(),
        values,
    };
    record.validate()?;
    Ok(SimulatedData {
        latent: LatticePath {
            level: l_star,
            dim: dims.x,
            states: latent,
        },
        record,
        clamp_events: diag.clamp_events,
    })
}
