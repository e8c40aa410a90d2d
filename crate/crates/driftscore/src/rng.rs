//! Keyed random streams with a hierarchical addressing scheme.
//!
//! Every random draw in this crate is addressed, not sequenced: a stream is
//! identified by the root seed plus a short path of integer labels
//! (domain, replicate, sweep, unit, particle, ...) and two streams with
//! different paths are independent for all practical purposes. This is what
//! makes parallel replicates bit-identical to sequential ones: the set of
//! streams consumed by a computation depends only on its address, never on
//! which thread ran first.
//!
//! The path is hashed into a 256-bit ChaCha8 key through four splitmix64
//! lanes with distinct per-lane constants, so two addresses collide only if
//! all four 64-bit lane digests collide at once. ChaCha8 then provides the
//! actual stream; it is a pure function of the key, carries no global state,
//! and behaves identically on every platform.
//!
//! Gaussian variates use the trigonometric Box-Muller map and consume exactly
//! two uniforms each. Nothing is cached between calls, so a stream's n-th
//! gaussian is a fixed function of the key regardless of call grouping.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Maximum path depth. The deepest address in the crate is
/// [sgd, restart, step, iter, replicate, psi, level, sweep, k, noise, unit, particle]
/// which is 12 labels; 16 leaves headroom.
const MAX_PATH: usize = 16;

// Label constants. Values only need to be distinct among siblings at the
// same tree position, but keeping them globally distinct costs nothing and
// makes stream dumps readable.
pub const DOMAIN_DATA: u64 = 0x01;
pub const DOMAIN_ESTIMATE: u64 = 0x02;
pub const DOMAIN_SGD: u64 = 0x03;

pub const LEVEL_DRAW: u64 = 0x10;
pub const PSI_TERM: u64 = 0x11;

pub const INIT_SWEEP_REF: u64 = 0x20;
pub const INIT_LAGGED: u64 = 0x21;
pub const INIT_SWEEP: u64 = 0x22;
pub const SWEEP: u64 = 0x23;

pub const NOISE: u64 = 0x30;
pub const RESAMPLE: u64 = 0x31;
pub const TERMINAL: u64 = 0x32;

pub const SGD_INIT: u64 = 0x40;
pub const SGD_ITER: u64 = 0x41;

/// Address of a random stream: root seed plus a label path.
///
/// `Copy` on purpose; contexts are passed by value and narrowed with
/// [`StreamCtx::child`] as the computation descends.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamCtx {
    seed: u64,
    depth: usize,
    path: [u64; MAX_PATH],
}

impl StreamCtx {
    /// Root context for a run.
    pub fn root(seed: u64) -> Self {
        StreamCtx {
            seed,
            depth: 0,
            path: [0; MAX_PATH],
        }
    }

    /// Context narrowed by one label. Panics if the path would exceed
    /// [`MAX_PATH`]; that is a structural bug, not a runtime condition.
    #[must_use]
    pub fn child(mut self, label: u64) -> Self {
        assert!(self.depth < MAX_PATH, "stream path too deep");
        self.path[self.depth] = label;
        self.depth += 1;
        self
    }

    /// The ChaCha8 stream at this address.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        for (lane, chunk) in self.key_lanes().iter().zip(key.chunks_exact_mut(8)) {
            chunk.copy_from_slice(&lane.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }

    fn key_lanes(&self) -> [u64; 4] {
        // Distinct odd constants per lane; the seed enters every lane and the
        // path words are absorbed round-robin with a cross-lane feedback so a
        // label at depth d perturbs all four lanes after one rotation.
        const LANE_SALT: [u64; 4] = [
            0x243f_6a88_85a3_08d3,
            0x1319_8a2e_0370_7344,
            0xa409_3822_299f_31d0,
            0x082e_fa98_ec4e_6c89,
        ];
        let mut lanes = [0u64; 4];
        for (i, lane) in lanes.iter_mut().enumerate() {
            *lane = splitmix64(self.seed ^ LANE_SALT[i]);
        }
        for (d, &label) in self.path[..self.depth].iter().enumerate() {
            let i = d % 4;
            lanes[i] = splitmix64(lanes[i] ^ label.wrapping_add(0x9e37_79b9_7f4a_7c15));
            lanes[(i + 1) % 4] ^= lanes[i].rotate_left(23);
        }
        // Final avalanche so the last absorbed label diffuses everywhere.
        for lane in lanes.iter_mut() {
            *lane = splitmix64(*lane);
        }
        // Depth is part of the address: [a] and [a, 0] must differ even
        // though label 0 absorbs to a fixed perturbation.
        lanes[0] ^= splitmix64(self.depth as u64 ^ 0xff51_afd7_ed55_8ccd);
        lanes
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform draw on [0, 1) with 53 random bits.
pub fn uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw on (0, 1]; safe as a logarithm argument.
fn uniform_open(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal via Box-Muller (cosine branch only).
///
/// Consumes exactly two uniforms, so draw counts per stream are static and
/// the mapping from address to variate sequence never depends on values.
pub fn standard_normal(rng: &mut impl RngCore) -> f64 {
    let u1 = uniform_open(rng);
    let u2 = uniform(rng);
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

/// Fills `out` with independent N(0, sd^2) draws.
pub fn fill_gaussian(rng: &mut impl RngCore, sd: f64, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = sd * standard_normal(rng);
    }
}
