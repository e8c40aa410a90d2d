//! Euler-Maruyama propagation on the dyadic grids, including the coupled
//! variants that reuse one block of Brownian increments across ensembles.
//!
//! Coupling happens entirely through shared noise: a [`NoiseBlock`] holds the
//! fine-level increments for one particle over one unit interval, the fine
//! chains consume them one by one, and the coarse chains consume consecutive
//! pairs summed. Nothing else about the propagation differs between the
//! single, paired and four-chain cases.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::RngCore;

use crate::lattice::LevelGrid;
use crate::models::Model;
use crate::rng;

/// Counters that accumulate across a run. Merged upward, never reset inside
/// the algorithms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Diagnostics {
    /// Euler steps that left the admissible state space and were clamped.
    pub clamp_events: u64,
    /// Weight normalizations that fell back to uniform because every weight
    /// underflowed.
    pub degenerate_weight_events: u64,
    /// Adaptive resampling rounds that actually fired.
    pub resample_events: u64,
}

impl Diagnostics {
    pub fn merge(&mut self, other: &Diagnostics) {
        self.clamp_events += other.clamp_events;
        self.degenerate_weight_events += other.degenerate_weight_events;
        self.resample_events += other.resample_events;
    }
}

/// Brownian increments for one particle over one unit interval at a fixed
/// level: `steps_per_unit` vectors of dimension `dim`, each N(0, delta I).
#[derive(Clone, Debug)]
pub struct NoiseBlock {
    dim: usize,
    w: Vec<f64>,
}

impl NoiseBlock {
    pub fn draw(rng: &mut impl RngCore, level: u32, dim: usize) -> Self {
        let grid = LevelGrid::new(level);
        let mut w = vec![0.0; grid.steps_per_unit() * dim];
        rng::fill_gaussian(rng, libm::sqrt(grid.delta()), &mut w);
        NoiseBlock { dim, w }
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.w.len() / self.dim
    }

    /// Increment for fine step `k`.
    #[inline]
    pub fn fine(&self, k: usize) -> &[f64] {
        &self.w[k * self.dim..(k + 1) * self.dim]
    }

    /// Increment for coarse step `k`: the sum of fine increments 2k and
    /// 2k+1, which is exactly the Brownian increment over the doubled step.
    pub fn coarse(&self, k: usize, out: &mut [f64]) {
        let a = self.fine(2 * k);
        let b = self.fine(2 * k + 1);
        for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
            *o = x + y;
        }
    }
}

/// One Euler-Maruyama step: `out = x + b(x) delta + sigma(x) w`, followed by
/// the model's state clamp.
pub fn euler_step(
    model: &dyn Model,
    theta: &[f64],
    delta: f64,
    x: &[f64],
    w: &[f64],
    out: &mut [f64],
    diag: &mut Diagnostics,
) {
    let mut b = [0.0; crate::linalg::MAX_DIM];
    let mut sw = [0.0; crate::linalg::MAX_DIM];
    let d = x.len();
    model.drift(theta, x, &mut b[..d]);
    model.diffusion(x).matvec(w, &mut sw[..d]);
    for i in 0..d {
        out[i] = x[i] + b[i] * delta + sw[i];
    }
    if model.clamp_state(out) {
        diag.clamp_events += 1;
    }
}

/// Appends one unit interval of fine-level states to `path`, starting from
/// its current endpoint and consuming `noise.fine(k)` in step order.
pub fn extend_unit(
    model: &dyn Model,
    theta: &[f64],
    level: u32,
    path: &mut Vec<f64>,
    noise: &NoiseBlock,
    diag: &mut Diagnostics,
) {
    let dim = model.dims().x;
    let delta = LevelGrid::new(level).delta();
    debug_assert!(path.len() >= dim);
    let mut next = [0.0; crate::linalg::MAX_DIM];
    for k in 0..noise.steps() {
        let start = path.len() - dim;
        euler_step(model, theta, delta, &path[start..], noise.fine(k), &mut next[..dim], diag);
        path.extend_from_slice(&next[..dim]);
    }
}

/// Appends one unit interval of coarse-level states to `path`, consuming the
/// fine block's increments in summed pairs.
pub fn extend_unit_coarse(
    model: &dyn Model,
    theta: &[f64],
    fine_level: u32,
    path: &mut Vec<f64>,
    noise: &NoiseBlock,
    diag: &mut Diagnostics,
) {
    assert!(fine_level >= 1, "no coarser grid below level 0");
    let dim = model.dims().x;
    let delta = LevelGrid::new(fine_level - 1).delta();
    debug_assert!(path.len() >= dim);
    let mut w = [0.0; crate::linalg::MAX_DIM];
    let mut next = [0.0; crate::linalg::MAX_DIM];
    for k in 0..noise.steps() / 2 {
        noise.coarse(k, &mut w[..dim]);
        let start = path.len() - dim;
        euler_step(model, theta, delta, &path[start..], &w[..dim], &mut next[..dim], diag);
        path.extend_from_slice(&next[..dim]);
    }
}

/// Propagates two same-level chains through one unit with shared noise.
pub fn coupled_unit_step(
    model: &dyn Model,
    theta: &[f64],
    level: u32,
    path_a: &mut Vec<f64>,
    path_b: &mut Vec<f64>,
    noise: &NoiseBlock,
    diag: &mut Diagnostics,
) {
    extend_unit(model, theta, level, path_a, noise, diag);
    extend_unit(model, theta, level, path_b, noise, diag);
}

/// Propagates a fine chain (at `fine_level`) and a coarse chain (one level
/// below) through one unit with shared noise.
pub fn fine_coarse_unit_step(
    model: &dyn Model,
    theta: &[f64],
    fine_level: u32,
    path_fine: &mut Vec<f64>,
    path_coarse: &mut Vec<f64>,
    noise: &NoiseBlock,
    diag: &mut Diagnostics,
) {
    extend_unit(model, theta, fine_level, path_fine, noise, diag);
    extend_unit_coarse(model, theta, fine_level, path_coarse, noise, diag);
}

/// Propagates two fine and two coarse chains through one unit, all four
/// from the same noise block.
#[allow(clippy::too_many_arguments)]
pub fn four_chain_unit_step(
    model: &dyn Model,
    theta: &[f64],
    fine_level: u32,
    fine_a: &mut Vec<f64>,
    fine_b: &mut Vec<f64>,
    coarse_a: &mut Vec<f64>,
    coarse_b: &mut Vec<f64>,
    noise: &NoiseBlock,
    diag: &mut Diagnostics,
) {
    extend_unit(model, theta, fine_level, fine_a, noise, diag);
    extend_unit(model, theta, fine_level, fine_b, noise, diag);
    extend_unit_coarse(model, theta, fine_level, coarse_a, noise, diag);
    extend_unit_coarse(model, theta, fine_level, coarse_b, noise, diag);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{GeometricBrownian, OrnsteinUhlenbeck};
    use crate::rng::StreamCtx;

    #[test]
    fn euler_step_known_value() {
        // x + (-0.75 * 1) * 0.125 + 0.5 * 0.2 = 1.00625
        let m = OrnsteinUhlenbeck::default();
        let mut out = [0.0];
        let mut diag = Diagnostics::default();
        euler_step(&m, &[0.75, 0.75, 1.0], 0.125, &[1.0], &[0.2], &mut out, &mut diag);
        assert!((out[0] - 1.00625).abs() < 1e-15);
        assert_eq!(diag.clamp_events, 0);
    }

    #[test]
    fn clamp_is_counted() {
        let m = GeometricBrownian::default();
        let mut out = [0.0];
        let mut diag = Diagnostics::default();
        // Large negative shock drives the state below zero.
        euler_step(&m, &[0.75, 0.05, 1.0], 0.125, &[0.01], &[-100.0], &mut out, &mut diag);
        assert_eq!(out[0], crate::models::POSITIVITY_FLOOR);
        assert_eq!(diag.clamp_events, 1);
    }

    #[test]
    fn noise_block_shape_and_coarse_pairs() {
        let mut rng = StreamCtx::root(3).rng();
        let block = NoiseBlock::draw(&mut rng, 2, 2);
        assert_eq!(block.steps(), 32);
        let mut c = [0.0; 2];
        block.coarse(5, &mut c);
        assert_eq!(c[0], block.fine(10)[0] + block.fine(11)[0]);
        assert_eq!(c[1], block.fine(10)[1] + block.fine(11)[1]);
    }

    #[test]
    fn driftless_fine_and_coarse_chains_share_endpoints() {
        // With zero drift the Euler map is a pure noise sum, so consuming
        // the block finely or in pairs must land on the same endpoint.
        let m = OrnsteinUhlenbeck::default();
        let theta = [0.75, 0.0, 1.0];
        let mut rng = StreamCtx::root(11).rng();
        let block = NoiseBlock::draw(&mut rng, 3, 1);
        let mut diag = Diagnostics::default();
        let mut fine = vec![0.4];
        let mut coarse = vec![0.4];
        fine_coarse_unit_step(&m, &theta, 3, &mut fine, &mut coarse, &block, &mut diag);
        assert_eq!(fine.len(), 1 + 64);
        assert_eq!(coarse.len(), 1 + 32);
        assert!((fine.last().unwrap() - coarse.last().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn shared_noise_makes_equal_starts_identical() {
        let m = OrnsteinUhlenbeck::default();
        let theta = [0.75, 0.75, 1.0];
        let mut rng = StreamCtx::root(17).rng();
        let block = NoiseBlock::draw(&mut rng, 1, 1);
        let mut diag = Diagnostics::default();
        let mut a = vec![0.2];
        let mut b = vec![0.2];
        coupled_unit_step(&m, &theta, 1, &mut a, &mut b, &block, &mut diag);
        assert_eq!(a, b, "identical inputs through identical noise");
    }

    #[test]
    fn four_chain_pairs_agree_from_equal_starts() {
        let m = OrnsteinUhlenbeck::default();
        let theta = [0.75, 0.75, 1.0];
        let mut rng = StreamCtx::root(23).rng();
        let block = NoiseBlock::draw(&mut rng, 2, 1);
        let mut diag = Diagnostics::default();
        let (mut fa, mut fb) = (vec![0.0], vec![0.0]);
        let (mut ca, mut cb) = (vec![0.0], vec![0.0]);
        four_chain_unit_step(
            &m, &theta, 2, &mut fa, &mut fb, &mut ca, &mut cb, &block, &mut diag,
        );
        assert_eq!(fa, fb);
        assert_eq!(ca, cb);
        // Fine and coarse genuinely differ once drift is present.
        assert_ne!(fa.last(), ca.last());
    }
}
