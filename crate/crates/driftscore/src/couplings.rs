//! Categorical sampling, maximal couplings of categorical laws, and the
//! maximal coupling of two such couplings.
//!
//! A maximal coupling of probability vectors (p, q) draws a pair (r, s) with
//! r ~ p, s ~ q and P(r = s) = sum_i min(p_i, q_i), the largest value any
//! joint law allows. Its pmf splits into a diagonal overlap part and an
//! independent-residual part; that closed form is what lets the four-chain
//! resampling couple two of these couplings against each other by rejection.

use alloc::vec::Vec;

use rand_chacha::rand_core::RngCore;

use crate::error::{Error, Result};
use crate::rng::uniform;
use crate::weights::min_overlap;

/// Attempts the rejection loop in [`quad_maximal_coupling`] is allowed
/// before reporting failure. The acceptance probability per attempt is the
/// complement of the couplings' overlap, so a bound this large is reached
/// only when the two laws are numerically indistinguishable yet not bitwise
/// equal.
pub const COUPLING_ATTEMPT_CAP: u64 = 1_000_000;

/// Draws an index proportionally to nonnegative `weights` (need not be
/// normalized). An all-zero or non-finite total reports [`Error::ZeroMass`].
pub fn sample_categorical(rng: &mut impl RngCore, weights: &[f64]) -> Result<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::ZeroMass);
    }
    let u = uniform(rng) * total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = Some(i);
            if u < acc {
                return Ok(i);
            }
        }
    }
    // Rounding can leave u marginally above the accumulated total; the
    // leftover mass belongs to the last positive atom.
    last_positive.ok_or(Error::ZeroMass)
}

/// Outcome of one maximally coupled pair draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairDraw {
    pub left: usize,
    pub right: usize,
    /// True when the pair came from the overlap component (hence equal).
    pub from_overlap: bool,
}

/// Draws (r, s) from the maximal coupling of probability vectors `p` and
/// `q`. Inputs are assumed normalized; bitwise-equal inputs always produce
/// an equal pair, because the residual branch is unreachable when the
/// residual mass vanishes.
pub fn maximal_coupling(rng: &mut impl RngCore, p: &[f64], q: &[f64]) -> Result<PairDraw> {
    debug_assert_eq!(p.len(), q.len());
    let (mins, alpha) = min_overlap(p, q);
    let kappa = uniform(rng);
    if kappa >= alpha {
        let resid_p: Vec<f64> = p.iter().zip(&mins).map(|(&a, &m)| (a - m).max(0.0)).collect();
        let resid_q: Vec<f64> = q.iter().zip(&mins).map(|(&a, &m)| (a - m).max(0.0)).collect();
        let mass_p: f64 = resid_p.iter().sum();
        let mass_q: f64 = resid_q.iter().sum();
        if mass_p > 0.0 && mass_q > 0.0 {
            let left = sample_categorical(rng, &resid_p)?;
            let right = sample_categorical(rng, &resid_q)?;
            return Ok(PairDraw {
                left,
                right,
                from_overlap: false,
            });
        }
        // No residual mass: the laws coincide and only the overlap remains.
    }
    let i = sample_categorical(rng, &mins)?;
    Ok(PairDraw {
        left: i,
        right: i,
        from_overlap: true,
    })
}

/// Probability the maximal coupling of (p, q) assigns to the pair (i, j).
pub fn maximal_coupling_pmf(p: &[f64], q: &[f64], i: usize, j: usize) -> f64 {
    let (mins, alpha) = min_overlap(p, q);
    let diag = if i == j { mins[i] } else { 0.0 };
    let resid_mass = 1.0 - alpha;
    if resid_mass <= 1e-15 {
        return diag;
    }
    diag + (p[i] - mins[i]) * (q[j] - mins[j]) / resid_mass
}

/// Ancestor indices for all four chains of one coupled-difference particle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadDraw {
    pub fine_left: usize,
    pub fine_right: usize,
    pub coarse_left: usize,
    pub coarse_right: usize,
}

/// Maximally couples the maximal coupling of `(fine_p, fine_q)` with the
/// maximal coupling of `(coarse_p, coarse_q)`.
///
/// With probability equal to the overlap of the two coupling laws all four
/// indices come from a single pair draw; otherwise the coarse pair is
/// re-drawn by rejection until it lands outside the fine coupling's shadow.
/// Bitwise-equal fine and coarse inputs accept on the first try every time,
/// collapsing the construction to one maximal coupling.
pub fn quad_maximal_coupling(
    rng: &mut impl RngCore,
    fine_p: &[f64],
    fine_q: &[f64],
    coarse_p: &[f64],
    coarse_q: &[f64],
    attempt_cap: u64,
) -> Result<QuadDraw> {
    let fine = maximal_coupling(rng, fine_p, fine_q)?;
    let w_fine = maximal_coupling_pmf(fine_p, fine_q, fine.left, fine.right);
    let u = uniform(rng) * w_fine;
    if u < maximal_coupling_pmf(coarse_p, coarse_q, fine.left, fine.right) {
        return Ok(QuadDraw {
            fine_left: fine.left,
            fine_right: fine.right,
            coarse_left: fine.left,
            coarse_right: fine.right,
        });
    }
    for _ in 0..attempt_cap {
        let coarse = maximal_coupling(rng, coarse_p, coarse_q)?;
        let w_coarse = maximal_coupling_pmf(coarse_p, coarse_q, coarse.left, coarse.right);
        let v = uniform(rng) * w_coarse;
        if v > maximal_coupling_pmf(fine_p, fine_q, coarse.left, coarse.right) {
            return Ok(QuadDraw {
                fine_left: fine.left,
                fine_right: fine.right,
                coarse_left: coarse.left,
                coarse_right: coarse.right,
            });
        }
    }
    Err(Error::CouplingFailure {
        attempts: attempt_cap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamCtx;
    use crate::stats::tv_distance;
    use alloc::vec;
    use alloc::vec::Vec;

    #[test]
    fn categorical_point_mass_and_zero_mass() {
        let mut rng = StreamCtx::root(1).rng();
        for _ in 0..100 {
            assert_eq!(sample_categorical(&mut rng, &[0.0, 1.0, 0.0]).unwrap(), 1);
        }
        assert_eq!(sample_categorical(&mut rng, &[0.0, 0.0]), Err(Error::ZeroMass));
        assert_eq!(
            sample_categorical(&mut rng, &[f64::NAN, 1.0]),
            Err(Error::ZeroMass)
        );
    }

    #[test]
    fn categorical_skips_zero_atoms_and_honors_proportions() {
        let mut rng = StreamCtx::root(2).rng();
        let w = [0.5, 0.0, 1.5];
        let mut counts = [0usize; 3];
        let n = 40_000;
        for _ in 0..n {
            counts[sample_categorical(&mut rng, &w).unwrap()] += 1;
        }
        assert_eq!(counts[1], 0);
        let frac = counts[0] as f64 / n as f64;
        // 3-sigma band around 0.25 for 40k draws.
        assert!((frac - 0.25).abs() < 3.0 * (0.25f64 * 0.75 / n as f64).sqrt());
    }

    #[test]
    fn equal_inputs_always_couple() {
        let mut rng = StreamCtx::root(3).rng();
        let p = [0.2, 0.5, 0.3];
        for _ in 0..500 {
            let d = maximal_coupling(&mut rng, &p, &p).unwrap();
            assert_eq!(d.left, d.right);
            assert!(d.from_overlap);
        }
    }

    #[test]
    fn meeting_probability_matches_overlap() {
        let p = [0.7, 0.3];
        let q = [0.3, 0.7];
        let mut rng = StreamCtx::root(4).rng();
        let n = 40_000;
        let mut met = 0usize;
        for _ in 0..n {
            let d = maximal_coupling(&mut rng, &p, &q).unwrap();
            if d.left == d.right {
                met += 1;
            }
        }
        let rate = met as f64 / n as f64;
        let se = (0.6f64 * 0.4 / n as f64).sqrt();
        assert!((rate - 0.6).abs() < 3.0 * se, "rate {rate}");
    }

    #[test]
    fn pmf_is_a_proper_joint_law_with_the_right_marginals() {
        let p = [0.5, 0.2, 0.3];
        let q = [0.1, 0.6, 0.3];
        let n = p.len();
        let mut total = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            let mut col = 0.0;
            for j in 0..n {
                row += maximal_coupling_pmf(&p, &q, i, j);
                col += maximal_coupling_pmf(&p, &q, j, i);
                total += maximal_coupling_pmf(&p, &q, i, j);
            }
            assert!((row - p[i]).abs() < 1e-12, "row marginal");
            assert!((col - q[i]).abs() < 1e-12, "column marginal");
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empirical_joint_law_matches_pmf() {
        let p = [0.5, 0.2, 0.3];
        let q = [0.1, 0.6, 0.3];
        let mut rng = StreamCtx::root(5).rng();
        let n_draws = 60_000;
        let mut counts = vec![0.0; 9];
        for _ in 0..n_draws {
            let d = maximal_coupling(&mut rng, &p, &q).unwrap();
            counts[d.left * 3 + d.right] += 1.0 / n_draws as f64;
        }
        let exact: Vec<f64> = (0..9)
            .map(|k| maximal_coupling_pmf(&p, &q, k / 3, k % 3))
            .collect();
        let tv = tv_distance(&counts, &exact);
        assert!(tv < 0.02, "tv {tv}");
    }

    #[test]
    fn identical_levels_collapse_the_quad() {
        let p = [0.4, 0.6];
        let q = [0.7, 0.3];
        let mut rng = StreamCtx::root(6).rng();
        for _ in 0..500 {
            let quad = quad_maximal_coupling(&mut rng, &p, &q, &p, &q, 10).unwrap();
            assert_eq!(quad.fine_left, quad.coarse_left);
            assert_eq!(quad.fine_right, quad.coarse_right);
        }
    }

    #[test]
    fn quad_marginal_pairs_follow_their_own_couplings() {
        let fine_p = [0.5, 0.2, 0.3];
        let fine_q = [0.1, 0.6, 0.3];
        let coarse_p = [0.3, 0.3, 0.4];
        let coarse_q = [0.25, 0.5, 0.25];
        let mut rng = StreamCtx::root(7).rng();
        let n_draws = 60_000;
        let mut fine_counts = vec![0.0; 9];
        let mut coarse_counts = vec![0.0; 9];
        for _ in 0..n_draws {
            let quad = quad_maximal_coupling(
                &mut rng,
                &fine_p,
                &fine_q,
                &coarse_p,
                &coarse_q,
                COUPLING_ATTEMPT_CAP,
            )
            .unwrap();
            fine_counts[quad.fine_left * 3 + quad.fine_right] += 1.0 / n_draws as f64;
            coarse_counts[quad.coarse_left * 3 + quad.coarse_right] += 1.0 / n_draws as f64;
        }
        let fine_exact: Vec<f64> = (0..9)
            .map(|k| maximal_coupling_pmf(&fine_p, &fine_q, k / 3, k % 3))
            .collect();
        let coarse_exact: Vec<f64> = (0..9)
            .map(|k| maximal_coupling_pmf(&coarse_p, &coarse_q, k / 3, k % 3))
            .collect();
        assert!(tv_distance(&fine_counts, &fine_exact) < 0.02);
        assert!(
            tv_distance(&coarse_counts, &coarse_exact) < 0.02,
            "rejection branch distorts the coarse marginal"
        );
    }

    #[test]
    fn disjoint_laws_exhaust_the_attempt_cap() {
        // Fine coupling concentrates on (0,0), coarse on (1,1); the shadow
        // check always rejects, so a zero cap must fail and a positive cap
        // must return disagreeing pairs.
        let fine = [1.0, 0.0];
        let coarse = [0.0, 1.0];
        let mut rng = StreamCtx::root(8).rng();
        assert_eq!(
            quad_maximal_coupling(&mut rng, &fine, &fine, &coarse, &coarse, 0),
            Err(Error::CouplingFailure { attempts: 0 })
        );
        let quad =
            quad_maximal_coupling(&mut rng, &fine, &fine, &coarse, &coarse, 10).unwrap();
        assert_eq!((quad.fine_left, quad.fine_right), (0, 0));
        assert_eq!((quad.coarse_left, quad.coarse_right), (1, 1));
    }
}
