//! Conditional particle filter sweeps and their couplings.
//!
//! Every sweep runs N particles over the whole observation window. Slot
//! N-1 is pinned: it replays the reference trajectory instead of moving, so
//! the sweep is a Markov kernel on path space that leaves the smoothing law
//! invariant. The other three constructions couple two or four such sweeps:
//!
//! * two ensembles at the same level, driven by identical noise blocks,
//!   resampled through a maximal coupling of their weight vectors;
//! * two ensembles at adjacent levels, the coarse one consuming the fine
//!   noise in summed pairs;
//! * four ensembles (a fine pair and a coarse pair) whose resampling draws
//!   all four ancestors at once by maximally coupling the two pairwise
//!   couplings.
//!
//! Coupled sweeps meet when their terminally selected trajectories coincide
//! bit for bit. From then on the inputs of the paired ensembles are
//! identical, the shared-noise propagation is deterministic, every weight
//! comparison ties, and the couplings keep returning equal indices, so a
//! meeting persists without any special casing.
//!
//! Resampling is adaptive: a round fires when the effective sample size of
//! the coupling-relevant weights drops below N/4, or always when configured
//! so. A resample resets the accumulated weights of every ensemble in the
//! structure; between resamples the unit weights accumulate multiplicatively
//! (additively in log space).

use alloc::vec;
use alloc::vec::Vec;

use crate::couplings::{
    maximal_coupling, quad_maximal_coupling, sample_categorical, COUPLING_ATTEMPT_CAP,
};
use crate::dynamics::{extend_unit, extend_unit_coarse, Diagnostics, NoiseBlock};
use crate::error::{Error, Result};
use crate::lattice::LevelGrid;
use crate::models::Model;
use crate::rng::{self, StreamCtx};
use crate::weights::{ess, min_overlap, normalize_log_weights, unit_log_weight};

/// Knobs shared by all sweep kernels.
#[derive(Clone, Copy, Debug)]
pub struct ChainParams {
    /// Total ensemble size N, including the pinned slot. At least 2.
    pub n_particles: usize,
    /// When true, resample at every unit boundary instead of adaptively.
    pub resample_always: bool,
}

impl ChainParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::InvalidConfig("need at least two particles"));
        }
        Ok(())
    }
}

/// A statistic of one path, evaluated at the sweep's terminal ensemble.
pub trait PathFunctional {
    /// Output dimension.
    fn dim(&self) -> usize;

    /// Evaluates the statistic of a flat path discretized at `level`.
    fn eval(&self, level: u32, path: &[f64], out: &mut [f64]) -> Result<()>;
}

/// Weighted average of `func` over an ensemble's trajectories:
/// `out = sum_i weights[i] * func(paths[i])`. Zero-weight particles are
/// skipped, so a degenerate path in a dead slot cannot poison the value.
pub fn rao_blackwell(
    func: &dyn PathFunctional,
    level: u32,
    paths: &[Vec<f64>],
    weights: &[f64],
    out: &mut [f64],
) -> Result<()> {
    debug_assert_eq!(paths.len(), weights.len());
    out.fill(0.0);
    let mut tmp = vec![0.0; func.dim()];
    for (path, &w) in paths.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        func.eval(level, path, &mut tmp)?;
        for (o, &t) in out.iter_mut().zip(&tmp) {
            *o += w * t;
        }
    }
    Ok(())
}

/// One particle ensemble of a sweep: N growing trajectories, the last of
/// which mirrors the reference, plus the log weights accumulated since the
/// last resample.
struct Ensemble<'a> {
    level: u32,
    delta: f64,
    steps_per_unit: usize,
    dim_x: usize,
    dim_y: usize,
    /// Coarse ensembles consume fine noise blocks in summed pairs.
    pair_sum: bool,
    reference: &'a [f64],
    incs: &'a [f64],
    paths: Vec<Vec<f64>>,
    log_w: Vec<f64>,
}

impl<'a> Ensemble<'a> {
    #[allow(clippy::too_many_arguments)]
    fn new(
        n: usize,
        level: u32,
        dim_x: usize,
        dim_y: usize,
        t_units: usize,
        x_star: &[f64],
        reference: &'a [f64],
        incs: &'a [f64],
        pair_sum: bool,
    ) -> Result<Self> {
        let grid = LevelGrid::new(level);
        let m = grid.steps_per_unit();
        let expect_ref = (t_units * m + 1) * dim_x;
        if reference.len() != expect_ref {
            return Err(Error::DimensionMismatch {
                expected: expect_ref,
                got: reference.len(),
            });
        }
        let expect_incs = t_units * m * dim_y;
        if incs.len() != expect_incs {
            return Err(Error::DimensionMismatch {
                expected: expect_incs,
                got: incs.len(),
            });
        }
        if x_star.len() != dim_x {
            return Err(Error::DimensionMismatch {
                expected: dim_x,
                got: x_star.len(),
            });
        }
        if reference[..dim_x] != *x_star {
            return Err(Error::InvalidConfig(
                "reference path does not start at the conditioning state",
            ));
        }
        let paths = (0..n)
            .map(|_| {
                let mut p = Vec::with_capacity(expect_ref);
                p.extend_from_slice(x_star);
                p
            })
            .collect();
        Ok(Ensemble {
            level,
            delta: grid.delta(),
            steps_per_unit: m,
            dim_x,
            dim_y,
            pair_sum,
            reference,
            incs,
            paths,
            log_w: vec![0.0; n],
        })
    }

    fn n(&self) -> usize {
        self.paths.len()
    }

    /// Moves free particle `i` through one unit of shared noise.
    fn extend_free(
        &mut self,
        model: &dyn Model,
        theta: &[f64],
        i: usize,
        block: &NoiseBlock,
        diag: &mut Diagnostics,
    ) {
        debug_assert!(i + 1 < self.n(), "pinned slot is not propagated");
        if self.pair_sum {
            extend_unit_coarse(model, theta, self.level + 1, &mut self.paths[i], block, diag);
        } else {
            extend_unit(model, theta, self.level, &mut self.paths[i], block, diag);
        }
    }

    /// Replays the reference segment of unit `unit` into the pinned slot.
    fn extend_pinned(&mut self, unit: usize) {
        let m = self.steps_per_unit;
        let lo = (unit * m + 1) * self.dim_x;
        let hi = ((unit + 1) * m + 1) * self.dim_x;
        let pinned = self.paths.last_mut().expect("nonempty ensemble");
        pinned.extend_from_slice(&self.reference[lo..hi]);
    }

    /// Adds unit `unit`'s Girsanov increments to every particle's weight.
    fn weigh_unit(&mut self, model: &dyn Model, theta: &[f64], unit: usize) {
        let m = self.steps_per_unit;
        let range = unit * m..(unit + 1) * m;
        for (path, lw) in self.paths.iter().zip(self.log_w.iter_mut()) {
            *lw += unit_log_weight(
                model,
                theta,
                self.delta,
                path,
                self.dim_x,
                self.incs,
                self.dim_y,
                range.clone(),
            );
        }
    }

    fn normalized(&self, diag: &mut Diagnostics) -> Vec<f64> {
        let (f, degenerate) = normalize_log_weights(&self.log_w);
        if degenerate {
            diag.degenerate_weight_events += 1;
        }
        f
    }

    /// Replaces free trajectories by clones of their ancestors (which may
    /// include the pinned slot) and resets the accumulated weights.
    fn resample(&mut self, ancestors: &[usize]) {
        debug_assert_eq!(ancestors.len() + 1, self.n());
        let old = core::mem::take(&mut self.paths);
        let mut fresh = Vec::with_capacity(old.len());
        for &a in ancestors {
            fresh.push(old[a].clone());
        }
        fresh.push(old.into_iter().next_back().expect("pinned slot"));
        self.paths = fresh;
        self.log_w.fill(0.0);
    }
}

/// ESS-based trigger on an already-normalized weight vector.
fn ess_below_quarter(f: &[f64]) -> bool {
    ess(f) < f.len() as f64 / 4.0
}

/// Trigger for coupled structures: ESS of the normalized elementwise
/// minimum. Vanishing overlap forces a resample outright.
fn coupled_trigger(fa: &[f64], fb: &[f64]) -> bool {
    let (mut mins, mass) = min_overlap(fa, fb);
    if mass <= 0.0 {
        return true;
    }
    for v in mins.iter_mut() {
        *v /= mass;
    }
    ess_below_quarter(&mins)
}

/// Output of a single conditional sweep.
#[derive(Clone, Debug)]
pub struct SweepSingle {
    /// Terminally selected trajectory; the next reference.
    pub selected: Vec<f64>,
    /// Rao-Blackwellized functional value over the terminal ensemble.
    pub rb: Vec<f64>,
    /// Resampling rounds that fired.
    pub resamples: u32,
    pub diag: Diagnostics,
}

/// One conditional particle filter sweep at `level`, pinned to `reference`.
#[allow(clippy::too_many_arguments)]
pub fn cpf_sweep(
    model: &dyn Model,
    theta: &[f64],
    level: u32,
    t_units: usize,
    x_star: &[f64],
    incs: &[f64],
    reference: &[f64],
    func: &dyn PathFunctional,
    params: &ChainParams,
    ctx: StreamCtx,
) -> Result<SweepSingle> {
    params.validate()?;
    let dims = model.dims();
    let n = params.n_particles;
    let mut ens = Ensemble::new(
        n, level, dims.x, dims.y, t_units, x_star, reference, incs, false,
    )?;
    let mut diag = Diagnostics::default();
    let mut resamples = 0u32;

    for unit in 0..t_units {
        if unit > 0 {
            let f = ens.normalized(&mut diag);
            if params.resample_always || ess_below_quarter(&f) {
                let mut rrng = ctx.child(rng::RESAMPLE).child(unit as u64).rng();
                let mut ancestors = Vec::with_capacity(n - 1);
                for _ in 0..n - 1 {
                    ancestors.push(sample_categorical(&mut rrng, &f)?);
                }
                ens.resample(&ancestors);
                diag.resample_events += 1;
                resamples += 1;
            }
        }
        for i in 0..n - 1 {
            let mut nrng = ctx
                .child(rng::NOISE)
                .child(unit as u64)
                .child(i as u64)
                .rng();
            let block = NoiseBlock::draw(&mut nrng, level, dims.x);
            ens.extend_free(model, theta, i, &block, &mut diag);
        }
        ens.extend_pinned(unit);
        ens.weigh_unit(model, theta, unit);
    }

    let f = ens.normalized(&mut diag);
    let mut trng = ctx.child(rng::TERMINAL).rng();
    let pick = sample_categorical(&mut trng, &f)?;
    let mut rb = vec![0.0; func.dim()];
    rao_blackwell(func, level, &ens.paths, &f, &mut rb)?;
    Ok(SweepSingle {
        selected: ens.paths[pick].clone(),
        rb,
        resamples,
        diag,
    })
}

/// Output of a coupled pair of sweeps.
#[derive(Clone, Debug)]
pub struct SweepPair {
    pub selected: (Vec<f64>, Vec<f64>),
    pub rb: (Vec<f64>, Vec<f64>),
    /// Selected trajectories coincide exactly. Cross-level pairs can never
    /// meet and always report false.
    pub met: bool,
    pub resamples: u32,
    pub diag: Diagnostics,
}

/// Two coupled conditional sweeps at the same level, pinned to the two
/// references, sharing noise blocks and resampled by maximal couplings.
#[allow(clippy::too_many_arguments)]
pub fn ccpf_sweep(
    model: &dyn Model,
    theta: &[f64],
    level: u32,
    t_units: usize,
    x_star: &[f64],
    incs: &[f64],
    references: (&[f64], &[f64]),
    func: &dyn PathFunctional,
    params: &ChainParams,
    ctx: StreamCtx,
) -> Result<SweepPair> {
    params.validate()?;
    let dims = model.dims();
    let n = params.n_particles;
    let mut a = Ensemble::new(
        n, level, dims.x, dims.y, t_units, x_star, references.0, incs, false,
    )?;
    let mut b = Ensemble::new(
        n, level, dims.x, dims.y, t_units, x_star, references.1, incs, false,
    )?;
    let mut diag = Diagnostics::default();
    let mut resamples = 0u32;

    for unit in 0..t_units {
        if unit > 0 {
            let fa = a.normalized(&mut diag);
            let fb = b.normalized(&mut diag);
            if params.resample_always || coupled_trigger(&fa, &fb) {
                let mut rrng = ctx.child(rng::RESAMPLE).child(unit as u64).rng();
                let mut anc_a = Vec::with_capacity(n - 1);
                let mut anc_b = Vec::with_capacity(n - 1);
                for _ in 0..n - 1 {
                    let d = maximal_coupling(&mut rrng, &fa, &fb)?;
                    anc_a.push(d.left);
                    anc_b.push(d.right);
                }
                a.resample(&anc_a);
                b.resample(&anc_b);
                diag.resample_events += 1;
                resamples += 1;
            }
        }
        for i in 0..n - 1 {
            let mut nrng = ctx
                .child(rng::NOISE)
                .child(unit as u64)
                .child(i as u64)
                .rng();
            let block = NoiseBlock::draw(&mut nrng, level, dims.x);
            a.extend_free(model, theta, i, &block, &mut diag);
            b.extend_free(model, theta, i, &block, &mut diag);
        }
        a.extend_pinned(unit);
        b.extend_pinned(unit);
        a.weigh_unit(model, theta, unit);
        b.weigh_unit(model, theta, unit);
    }

    let fa = a.normalized(&mut diag);
    let fb = b.normalized(&mut diag);
    let mut trng = ctx.child(rng::TERMINAL).rng();
    let pick = maximal_coupling(&mut trng, &fa, &fb)?;
    let mut rb_a = vec![0.0; func.dim()];
    let mut rb_b = vec![0.0; func.dim()];
    rao_blackwell(func, level, &a.paths, &fa, &mut rb_a)?;
    rao_blackwell(func, level, &b.paths, &fb, &mut rb_b)?;
    let sel_a = a.paths[pick.left].clone();
    let sel_b = b.paths[pick.right].clone();
    let met = sel_a == sel_b;
    Ok(SweepPair {
        selected: (sel_a, sel_b),
        rb: (rb_a, rb_b),
        met,
        resamples,
        diag,
    })
}

/// Two coupled sweeps at adjacent levels (fine first), sharing fine noise,
/// the coarse ensemble consuming it in summed pairs. The marginals are the
/// single-level kernels at their own levels.
#[allow(clippy::too_many_arguments)]
pub fn cross_level_ccpf_sweep(
    model: &dyn Model,
    theta: &[f64],
    fine_level: u32,
    t_units: usize,
    x_star: &[f64],
    incs_fine: &[f64],
    incs_coarse: &[f64],
    references: (&[f64], &[f64]),
    func: &dyn PathFunctional,
    params: &ChainParams,
    ctx: StreamCtx,
) -> Result<SweepPair> {
    params.validate()?;
    if fine_level == 0 {
        return Err(Error::InvalidConfig("cross-level sweep needs level >= 1"));
    }
    let dims = model.dims();
    let n = params.n_particles;
    let mut fine = Ensemble::new(
        n,
        fine_level,
        dims.x,
        dims.y,
        t_units,
        x_star,
        references.0,
        incs_fine,
        false,
    )?;
    let mut coarse = Ensemble::new(
        n,
        fine_level - 1,
        dims.x,
        dims.y,
        t_units,
        x_star,
        references.1,
        incs_coarse,
        true,
    )?;
    let mut diag = Diagnostics::default();
    let mut resamples = 0u32;

    for unit in 0..t_units {
        if unit > 0 {
            let ff = fine.normalized(&mut diag);
            let fc = coarse.normalized(&mut diag);
            if params.resample_always || coupled_trigger(&ff, &fc) {
                let mut rrng = ctx.child(rng::RESAMPLE).child(unit as u64).rng();
                let mut anc_f = Vec::with_capacity(n - 1);
                let mut anc_c = Vec::with_capacity(n - 1);
                for _ in 0..n - 1 {
                    let d = maximal_coupling(&mut rrng, &ff, &fc)?;
                    anc_f.push(d.left);
                    anc_c.push(d.right);
                }
                fine.resample(&anc_f);
                coarse.resample(&anc_c);
                diag.resample_events += 1;
                resamples += 1;
            }
        }
        for i in 0..n - 1 {
            let mut nrng = ctx
                .child(rng::NOISE)
                .child(unit as u64)
                .child(i as u64)
                .rng();
            let block = NoiseBlock::draw(&mut nrng, fine_level, dims.x);
            fine.extend_free(model, theta, i, &block, &mut diag);
            coarse.extend_free(model, theta, i, &block, &mut diag);
        }
        fine.extend_pinned(unit);
        coarse.extend_pinned(unit);
        fine.weigh_unit(model, theta, unit);
        coarse.weigh_unit(model, theta, unit);
    }

    let ff = fine.normalized(&mut diag);
    let fc = coarse.normalized(&mut diag);
    let mut trng = ctx.child(rng::TERMINAL).rng();
    let pick = maximal_coupling(&mut trng, &ff, &fc)?;
    let mut rb_f = vec![0.0; func.dim()];
    let mut rb_c = vec![0.0; func.dim()];
    rao_blackwell(func, fine_level, &fine.paths, &ff, &mut rb_f)?;
    rao_blackwell(func, fine_level - 1, &coarse.paths, &fc, &mut rb_c)?;
    Ok(SweepPair {
        selected: (fine.paths[pick.left].clone(), coarse.paths[pick.right].clone()),
        rb: (rb_f, rb_c),
        met: false,
        resamples,
        diag,
    })
}

/// Output of the four-chain coupled sweep. Index order everywhere is
/// [fine unringed, fine ringed, coarse unringed, coarse ringed].
#[derive(Clone, Debug)]
pub struct SweepQuad {
    pub selected: [Vec<f64>; 4],
    pub rb: [Vec<f64>; 4],
    pub met_fine: bool,
    pub met_coarse: bool,
    pub resamples: u32,
    pub diag: Diagnostics,
}

/// Four coupled conditional sweeps: a pair at `fine_level` and a pair one
/// level below, all driven by the same noise, with ancestors drawn four at a
/// time from the maximal coupling of the two pairwise maximal couplings. The
/// resampling trigger watches the coarse pair's overlap.
#[allow(clippy::too_many_arguments)]
pub fn cccpf_sweep(
    model: &dyn Model,
    theta: &[f64],
    fine_level: u32,
    t_units: usize,
    x_star: &[f64],
    incs_fine: &[f64],
    incs_coarse: &[f64],
    references: [&[f64]; 4],
    func: &dyn PathFunctional,
    params: &ChainParams,
    ctx: StreamCtx,
) -> Result<SweepQuad> {
    params.validate()?;
    if fine_level == 0 {
        return Err(Error::InvalidConfig("four-chain sweep needs level >= 1"));
    }
    let dims = model.dims();
    let n = params.n_particles;
    let mut fine_a = Ensemble::new(
        n,
        fine_level,
        dims.x,
        dims.y,
        t_units,
        x_star,
        references[0],
        incs_fine,
        false,
    )?;
    let mut fine_b = Ensemble::new(
        n,
        fine_level,
        dims.x,
        dims.y,
        t_units,
        x_star,
        references[1],
        incs_fine,
        false,
    )?;
    let mut coarse_a = Ensemble::new(
        n,
        fine_level - 1,
        dims.x,
        dims.y,
        t_units,
        x_star,
        references[2],
        incs_coarse,
        true,
    )?;
    let mut coarse_b = Ensemble::new(
        n,
        fine_level - 1,
        dims.x,
        dims.y,
        t_units,
        x_star,
        references[3],
        incs_coarse,
        true,
    )?;
    let mut diag = Diagnostics::default();
    let mut resamples = 0u32;

    for unit in 0..t_units {
        if unit > 0 {
            let fa = fine_a.normalized(&mut diag);
            let fb = fine_b.normalized(&mut diag);
            let ca = coarse_a.normalized(&mut diag);
            let cb = coarse_b.normalized(&mut diag);
            if params.resample_always || coupled_trigger(&ca, &cb) {
                let mut rrng = ctx.child(rng::RESAMPLE).child(unit as u64).rng();
                let mut anc = [
                    Vec::with_capacity(n - 1),
                    Vec::with_capacity(n - 1),
                    Vec::with_capacity(n - 1),
                    Vec::with_capacity(n - 1),
                ];
                for _ in 0..n - 1 {
                    let q = quad_maximal_coupling(
                        &mut rrng,
                        &fa,
                        &fb,
                        &ca,
                        &cb,
                        COUPLING_ATTEMPT_CAP,
                    )?;
                    anc[0].push(q.fine_left);
                    anc[1].push(q.fine_right);
                    anc[2].push(q.coarse_left);
                    anc[3].push(q.coarse_right);
                }
                fine_a.resample(&anc[0]);
                fine_b.resample(&anc[1]);
                coarse_a.resample(&anc[2]);
                coarse_b.resample(&anc[3]);
                diag.resample_events += 1;
                resamples += 1;
            }
        }
        for i in 0..n - 1 {
            let mut nrng = ctx
                .child(rng::NOISE)
                .child(unit as u64)
                .child(i as u64)
                .rng();
            let block = NoiseBlock::draw(&mut nrng, fine_level, dims.x);
            fine_a.extend_free(model, theta, i, &block, &mut diag);
            fine_b.extend_free(model, theta, i, &block, &mut diag);
            coarse_a.extend_free(model, theta, i, &block, &mut diag);
            coarse_b.extend_free(model, theta, i, &block, &mut diag);
        }
        for ens in [&mut fine_a, &mut fine_b, &mut coarse_a, &mut coarse_b] {
            ens.extend_pinned(unit);
            ens.weigh_unit(model, theta, unit);
        }
    }

    let fa = fine_a.normalized(&mut diag);
    let fb = fine_b.normalized(&mut diag);
    let ca = coarse_a.normalized(&mut diag);
    let cb = coarse_b.normalized(&mut diag);
    let mut trng = ctx.child(rng::TERMINAL).rng();
    let q = quad_maximal_coupling(&mut trng, &fa, &fb, &ca, &cb, COUPLING_ATTEMPT_CAP)?;

    let mut rb = [
        vec![0.0; func.dim()],
        vec![0.0; func.dim()],
        vec![0.0; func.dim()],
        vec![0.0; func.dim()],
    ];
    rao_blackwell(func, fine_level, &fine_a.paths, &fa, &mut rb[0])?;
    rao_blackwell(func, fine_level, &fine_b.paths, &fb, &mut rb[1])?;
    rao_blackwell(func, fine_level - 1, &coarse_a.paths, &ca, &mut rb[2])?;
    rao_blackwell(func, fine_level - 1, &coarse_b.paths, &cb, &mut rb[3])?;

    let selected = [
        fine_a.paths[q.fine_left].clone(),
        fine_b.paths[q.fine_right].clone(),
        coarse_a.paths[q.coarse_left].clone(),
        coarse_b.paths[q.coarse_right].clone(),
    ];
    let met_fine = selected[0] == selected[1];
    let met_coarse = selected[2] == selected[3];
    Ok(SweepQuad {
        selected,
        rb,
        met_fine,
        met_coarse,
        resamples,
        diag,
    })
}

/// Plain forward Euler draw of a trajectory over the window; the
/// initialization distribution of the single-level chains.
pub fn forward_path(
    model: &dyn Model,
    theta: &[f64],
    level: u32,
    t_units: usize,
    x_star: &[f64],
    ctx: StreamCtx,
    diag: &mut Diagnostics,
) -> Vec<f64> {
    let dims = model.dims();
    let grid = LevelGrid::new(level);
    let mut rng = ctx.rng();
    let mut path = Vec::with_capacity((grid.total_steps(t_units) + 1) * dims.x);
    path.extend_from_slice(x_star);
    for _ in 0..t_units {
        let block = NoiseBlock::draw(&mut rng, level, dims.x);
        extend_unit(model, theta, level, &mut path, &block, diag);
    }
    path
}

/// Forward Euler draws at adjacent levels from shared noise; the
/// initialization distribution of the four-chain structure.
pub fn forward_path_pair(
    model: &dyn Model,
    theta: &[f64],
    fine_level: u32,
    t_units: usize,
    x_star: &[f64],
    ctx: StreamCtx,
    diag: &mut Diagnostics,
) -> (Vec<f64>, Vec<f64>) {
    assert!(fine_level >= 1);
    let dims = model.dims();
    let fine_grid = LevelGrid::new(fine_level);
    let mut rng = ctx.rng();
    let mut fine = Vec::with_capacity((fine_grid.total_steps(t_units) + 1) * dims.x);
    let mut coarse = Vec::with_capacity((fine_grid.total_steps(t_units) / 2 + 1) * dims.x);
    fine.extend_from_slice(x_star);
    coarse.extend_from_slice(x_star);
    for _ in 0..t_units {
        let block = NoiseBlock::draw(&mut rng, fine_level, dims.x);
        extend_unit(model, theta, fine_level, &mut fine, &block, diag);
        extend_unit_coarse(model, theta, fine_level, &mut coarse, &block, diag);
    }
    (fine, coarse)
}
