//! Debiased score estimators.
//!
//! The level-l score expectation is approached through a chain of coupled
//! sweeps: the lagged chain starts from a plain forward draw, the leading
//! chain from one extra sweep applied to an independent forward draw, and
//! both are advanced by the same coupled kernel until they meet. Averaging
//! the leading chain over a fixed sweep window [k*, m*] and adding the
//! weighted telescoping corrections up to the meeting time removes the
//! burn-in bias exactly; all path statistics are Rao-Blackwellized over the
//! terminal ensembles. A second layer of randomization over the level
//! removes the time-discretization bias: draw L from a distribution on
//! {0..l_max}, then either reweight the single increment term by its pmf or
//! sum all increments up to L reweighted by survival probabilities.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::RngCore;

use crate::chains::{
    ccpf_sweep, cccpf_sweep, cpf_sweep, cross_level_ccpf_sweep, forward_path, forward_path_pair,
    ChainParams, PathFunctional,
};
use crate::dynamics::Diagnostics;
use crate::error::{Error, Result};
use crate::lattice::{LevelGrid, ObservationRecord};
use crate::models::{validate_theta, Model};
use crate::rng::{self, StreamCtx};
use crate::stats::{linear_fit, pairwise_sum};
use crate::weights::score_lambda;

/// Tuning of one debiased increment estimate.
#[derive(Clone, Copy, Debug)]
pub struct EstimatorParams {
    /// Ensemble size of every sweep.
    pub n_particles: usize,
    /// First sweep of the averaging window; at least 1.
    pub k_star: u32,
    /// Last sweep of the averaging window.
    pub m_star: u32,
    /// Hard cap on sweeps while waiting for a meeting.
    pub sweep_cap: u32,
    /// Forwarded to the sweep kernels.
    pub resample_always: bool,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        EstimatorParams {
            n_particles: 128,
            k_star: 2,
            m_star: 4,
            sweep_cap: 1040,
            resample_always: false,
        }
    }
}

impl EstimatorParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::InvalidConfig("need at least two particles"));
        }
        if self.k_star < 1 {
            return Err(Error::InvalidConfig("averaging window must start at 1"));
        }
        if self.k_star > self.m_star {
            return Err(Error::InvalidConfig("averaging window is empty"));
        }
        if self.sweep_cap < self.m_star {
            return Err(Error::InvalidConfig("sweep cap below averaging window"));
        }
        Ok(())
    }

    fn chain_params(&self) -> ChainParams {
        ChainParams {
            n_particles: self.n_particles,
            resample_always: self.resample_always,
        }
    }
}

/// The score functional with observation increments cached for the level(s)
/// it will be asked about.
pub struct ScoreFunctional<'a> {
    model: &'a dyn Model,
    theta: &'a [f64],
    fine: (u32, Vec<f64>),
    coarse: Option<(u32, Vec<f64>)>,
}

impl<'a> ScoreFunctional<'a> {
    /// Serves exactly one level.
    pub fn single(
        model: &'a dyn Model,
        theta: &'a [f64],
        record: &ObservationRecord,
        level: u32,
    ) -> Result<Self> {
        Ok(ScoreFunctional {
            model,
            theta,
            fine: (level, record.increments_at(level)?),
            coarse: None,
        })
    }

    /// Serves `fine_level` and the level below it.
    pub fn adjacent_pair(
        model: &'a dyn Model,
        theta: &'a [f64],
        record: &ObservationRecord,
        fine_level: u32,
    ) -> Result<Self> {
        if fine_level == 0 {
            return Err(Error::InvalidConfig("no level below 0"));
        }
        Ok(ScoreFunctional {
            model,
            theta,
            fine: (fine_level, record.increments_at(fine_level)?),
            coarse: Some((fine_level - 1, record.increments_at(fine_level - 1)?)),
        })
    }
}

impl PathFunctional for ScoreFunctional<'_> {
    fn dim(&self) -> usize {
        self.model.dims().theta
    }

    fn eval(&self, level: u32, path: &[f64], out: &mut [f64]) -> Result<()> {
        let incs = if level == self.fine.0 {
            &self.fine.1
        } else {
            match &self.coarse {
                Some((l, incs)) if *l == level => incs,
                _ => return Err(Error::InvalidConfig("functional not prepared for this level")),
            }
        };
        score_lambda(self.model, self.theta, level, path, incs, out)
    }
}

/// Level-independent constant; useful because every debiased increment of a
/// level-independent statistic must vanish.
pub struct ConstantFunctional {
    pub value: f64,
}

impl PathFunctional for ConstantFunctional {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, _level: u32, _path: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = self.value;
        Ok(())
    }
}

/// The path's terminal state.
pub struct TerminalStateFunctional {
    pub dim_x: usize,
}

impl PathFunctional for TerminalStateFunctional {
    fn dim(&self) -> usize {
        self.dim_x
    }
    fn eval(&self, _level: u32, path: &[f64], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(&path[path.len() - self.dim_x..]);
        Ok(())
    }
}

/// One debiased increment term.
#[derive(Clone, Debug)]
pub struct PsiOutput {
    pub value: Vec<f64>,
    /// Sweeps actually executed: max(meeting time, m*).
    pub sweeps: u32,
    /// Meeting time of the (fine) coupled pair.
    pub tau_fine: u32,
    /// Meeting time of the coarse pair; present for level >= 1 terms.
    pub tau_coarse: Option<u32>,
    pub diag: Diagnostics,
}

fn check_psi_inputs(
    model: &dyn Model,
    theta: &[f64],
    record: &ObservationRecord,
    params: &EstimatorParams,
) -> Result<()> {
    validate_theta(model, theta)?;
    params.validate()?;
    record.validate()?;
    let dims = model.dims();
    if record.dim_y != dims.y || record.x_star.len() != dims.x {
        return Err(Error::DimensionMismatch {
            expected: dims.y,
            got: record.dim_y,
        });
    }
    Ok(())
}

/// Debiased expectation of `func` under the level-0 smoothing law.
pub fn psi_zero(
    model: &dyn Model,
    theta: &[f64],
    record: &ObservationRecord,
    func: &dyn PathFunctional,
    params: &EstimatorParams,
    ctx: StreamCtx,
) -> Result<PsiOutput> {
    check_psi_inputs(model, theta, record, params)?;
    let incs = record.increments_at(0)?;
    let t = record.t_units;
    let x_star = &record.x_star;
    let chain = params.chain_params();
    let d = func.dim();
    let mut diag = Diagnostics::default();

    // Leading chain: one sweep applied to an independent forward draw.
    // Lagged chain: a plain forward draw.
    let sweep_ref = forward_path(model, theta, 0, t, x_star, ctx.child(rng::INIT_SWEEP_REF), &mut diag);
    let init = cpf_sweep(
        model, theta, 0, t, x_star, &incs, &sweep_ref, func, &chain,
        ctx.child(rng::INIT_SWEEP),
    )?;
    diag.merge(&init.diag);
    let mut lead = init.selected;
    let mut lag = forward_path(model, theta, 0, t, x_star, ctx.child(rng::INIT_LAGGED), &mut diag);

    let window = (params.m_star - params.k_star + 1) as f64;
    let mut avg = vec![0.0; d];
    let mut corr = vec![0.0; d];
    let mut met_at: Option<u32> = None;
    let mut sweeps = 0;
    for k in 1..=params.sweep_cap {
        let out = ccpf_sweep(
            model, theta, 0, t, x_star, &incs, (&lead, &lag), func, &chain,
            ctx.child(rng::SWEEP).child(k as u64),
        )?;
        diag.merge(&out.diag);
        lead = out.selected.0;
        lag = out.selected.1;
        if met_at.is_none() && out.met {
            met_at = Some(k);
        }
        if params.k_star <= k && k <= params.m_star {
            for (a, v) in avg.iter_mut().zip(&out.rb.0) {
                *a += v;
            }
        }
        if met_at.is_none() && k > params.k_star {
            let c_k = ((k - params.k_star) as f64).min(window) / window;
            for ((c, va), vb) in corr.iter_mut().zip(&out.rb.0).zip(&out.rb.1) {
                *c += c_k * (va - vb);
            }
        }
        sweeps = k;
        if met_at.is_some() && k >= params.m_star {
            break;
        }
    }
    let tau = met_at.ok_or(Error::NoMeeting {
        sweeps: params.sweep_cap,
    })?;

    let value = avg
        .iter()
        .zip(&corr)
        .map(|(a, c)| a / window + c)
        .collect();
    Ok(PsiOutput {
        value,
        sweeps,
        tau_fine: tau,
        tau_coarse: None,
        diag,
    })
}

/// Debiased expectation of the difference of `func` between `level` and the
/// level below, via the four-chain coupled structure.
pub fn psi_level(
    model: &dyn Model,
    theta: &[f64],
    level: u32,
    record: &ObservationRecord,
    func: &dyn PathFunctional,
    params: &EstimatorParams,
    ctx: StreamCtx,
) -> Result<PsiOutput> {
    if level == 0 {
        return Err(Error::InvalidConfig("difference term needs level >= 1"));
    }
    check_psi_inputs(model, theta, record, params)?;
    let incs_fine = record.increments_at(level)?;
    let incs_coarse = record.increments_at(level - 1)?;
    let t = record.t_units;
    let x_star = &record.x_star;
    let chain = params.chain_params();
    let d = func.dim();
    let mut diag = Diagnostics::default();

    let (sweep_ref_f, sweep_ref_c) = forward_path_pair(
        model, theta, level, t, x_star, ctx.child(rng::INIT_SWEEP_REF), &mut diag,
    );
    let init = cross_level_ccpf_sweep(
        model, theta, level, t, x_star, &incs_fine, &incs_coarse,
        (&sweep_ref_f, &sweep_ref_c), func, &chain, ctx.child(rng::INIT_SWEEP),
    )?;
    diag.merge(&init.diag);
    let (mut lead_f, mut lead_c) = init.selected;
    let (mut lag_f, mut lag_c) = forward_path_pair(
        model, theta, level, t, x_star, ctx.child(rng::INIT_LAGGED), &mut diag,
    );

    let window = (params.m_star - params.k_star + 1) as f64;
    let mut avg = vec![0.0; d];
    let mut corr = vec![0.0; d];
    let mut met_fine: Option<u32> = None;
    let mut met_coarse: Option<u32> = None;
    let mut sweeps = 0;
    for k in 1..=params.sweep_cap {
        let out = cccpf_sweep(
            model, theta, level, t, x_star, &incs_fine, &incs_coarse,
            [&lead_f, &lag_f, &lead_c, &lag_c], func, &chain,
            ctx.child(rng::SWEEP).child(k as u64),
        )?;
        diag.merge(&out.diag);
        let [sf_lead, sf_lag, sc_lead, sc_lag] = out.selected;
        lead_f = sf_lead;
        lag_f = sf_lag;
        lead_c = sc_lead;
        lag_c = sc_lag;
        if met_fine.is_none() && out.met_fine {
            met_fine = Some(k);
        }
        if met_coarse.is_none() && out.met_coarse {
            met_coarse = Some(k);
        }
        if params.k_star <= k && k <= params.m_star {
            for ((a, vf), vc) in avg.iter_mut().zip(&out.rb[0]).zip(&out.rb[2]) {
                *a += vf - vc;
            }
        }
        // The correction window ends one sweep before both pairs have met;
        // the pair that met earlier contributes exact zeros from then on.
        if (met_fine.is_none() || met_coarse.is_none()) && k > params.k_star {
            let c_k = ((k - params.k_star) as f64).min(window) / window;
            for i in 0..d {
                let fine_diff = out.rb[0][i] - out.rb[1][i];
                let coarse_diff = out.rb[2][i] - out.rb[3][i];
                corr[i] += c_k * (fine_diff - coarse_diff);
            }
        }
        sweeps = k;
        if met_fine.is_some() && met_coarse.is_some() && k >= params.m_star {
            break;
        }
    }
    let (tau_f, tau_c) = match (met_fine, met_coarse) {
        (Some(f), Some(c)) => (f, c),
        _ => {
            return Err(Error::NoMeeting {
                sweeps: params.sweep_cap,
            })
        }
    };

    let value = avg
        .iter()
        .zip(&corr)
        .map(|(a, c)| a / window + c)
        .collect();
    Ok(PsiOutput {
        value,
        sweeps,
        tau_fine: tau_f,
        tau_coarse: Some(tau_c),
        diag,
    })
}

/// Debiased score increment at `level` (the level-0 term for `level == 0`,
/// the adjacent difference otherwise).
pub fn score_psi(
    model: &dyn Model,
    theta: &[f64],
    record: &ObservationRecord,
    level: u32,
    params: &EstimatorParams,
    ctx: StreamCtx,
) -> Result<PsiOutput> {
    if level == 0 {
        let func = ScoreFunctional::single(model, theta, record, 0)?;
        psi_zero(model, theta, record, &func, params, ctx)
    } else {
        let func = ScoreFunctional::adjacent_pair(model, theta, record, level)?;
        psi_level(model, theta, level, record, &func, params, ctx)
    }
}

/// Distribution of the randomized discretization level on {0..l_max}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LevelDistribution {
    /// Mass proportional to p (1-p)^l; light tails, finite variance only
    /// for statistics with fast enough level decay.
    Geometric { p: f64, l_max: u32 },
    /// Mass proportional to sqrt(delta_l) (l+1) (log2(2+l))^2. Heavier than
    /// any geometric: infinite expected cost in the untruncated limit, but
    /// finite estimator variance.
    Empirical { l_max: u32 },
}

impl LevelDistribution {
    pub fn l_max(&self) -> u32 {
        match *self {
            LevelDistribution::Geometric { l_max, .. } => l_max,
            LevelDistribution::Empirical { l_max } => l_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let LevelDistribution::Geometric { p, .. } = *self {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidConfig("geometric rate outside (0, 1)"));
            }
        }
        if self.l_max() > 26 {
            return Err(Error::InvalidConfig("level cap out of range"));
        }
        Ok(())
    }

    /// Normalized masses on {0..l_max}.
    pub fn masses(&self) -> Vec<f64> {
        let l_max = self.l_max();
        let mut m: Vec<f64> = (0..=l_max)
            .map(|l| match *self {
                LevelDistribution::Geometric { p, .. } => {
                    p * libm::pow(1.0 - p, l as f64)
                }
                LevelDistribution::Empirical { .. } => {
                    let delta = LevelGrid::new(l).delta();
                    let lg = libm::log2(2.0 + l as f64);
                    libm::sqrt(delta) * (l + 1) as f64 * lg * lg
                }
            })
            .collect();
        let total: f64 = m.iter().sum();
        for v in m.iter_mut() {
            *v /= total;
        }
        m
    }

    pub fn pmf(&self, level: u32) -> f64 {
        let m = self.masses();
        m.get(level as usize).copied().unwrap_or(0.0)
    }

    /// Tail mass P(L >= level).
    pub fn survival(&self, level: u32) -> f64 {
        self.masses()
            .iter()
            .skip(level as usize)
            .sum()
    }

    pub fn sample(&self, rng: &mut impl RngCore) -> u32 {
        let m = self.masses();
        let u = rng::uniform(rng);
        let mut acc = 0.0;
        for (l, &w) in m.iter().enumerate() {
            acc += w;
            if u < acc {
                return l as u32;
            }
        }
        self.l_max()
    }

    /// Exponential decay rate of the tail: the negated least-squares slope
    /// of log2 P(L >= l) over the tail window l in {3..min(8, l_max)}, where
    /// the decay has settled into its asymptotic regime.
    pub fn survival_decay_rate(&self) -> Result<f64> {
        let hi = self.l_max().min(8);
        if hi < 4 {
            return Err(Error::InvalidConfig("level cap too small for a tail fit"));
        }
        let xs: Vec<f64> = (3..=hi).map(|l| l as f64).collect();
        let ys: Vec<f64> = (3..=hi).map(|l| libm::log2(self.survival(l))).collect();
        let (slope, _) = linear_fit(&xs, &ys);
        Ok(-slope)
    }
}

/// How the level randomization turns increments into a score estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorKind {
    /// One increment term, reweighted by its pmf.
    SingleTerm,
    /// All increments up to the drawn level, reweighted by survivals.
    CoupledSum,
}

/// A single unbiased score estimate plus its bookkeeping.
#[derive(Clone, Debug)]
pub struct ScoreEstimate {
    pub value: Vec<f64>,
    /// The drawn level L.
    pub level: u32,
    /// Total sweeps over all increment terms.
    pub sweeps: u32,
    /// Meeting times of the deepest term.
    pub tau_fine: u32,
    pub tau_coarse: Option<u32>,
    pub diag: Diagnostics,
}

fn check_estimate_inputs(dist: &LevelDistribution, record: &ObservationRecord) -> Result<()> {
    dist.validate()?;
    if dist.l_max() > record.l_star {
        return Err(Error::LevelAboveData {
            requested: dist.l_max(),
            l_star: record.l_star,
        });
    }
    Ok(())
}

/// Single-term estimator: `psi_L / pmf(L)` with L drawn from `dist`.
pub fn single_term_estimate(
    model: &dyn Model,
    theta: &[f64],
    record: &ObservationRecord,
    dist: &LevelDistribution,
    params: &EstimatorParams,
    ctx: StreamCtx,
) -> Result<ScoreEstimate> {
    check_estimate_inputs(dist, record)?;
    let level = dist.sample(&mut ctx.child(rng::LEVEL_DRAW).rng());
    let psi = score_psi(
        model, theta, record, level, params,
        ctx.child(rng::PSI_TERM).child(level as u64),
    )?;
    let p = dist.pmf(level);
    let value = psi.value.iter().map(|v| v / p).collect();
    Ok(ScoreEstimate {
        value,
        level,
        sweeps: psi.sweeps,
        tau_fine: psi.tau_fine,
        tau_coarse: psi.tau_coarse,
        diag: psi.diag,
    })
}

/// Coupled-sum estimator: `sum_{l <= L} psi_l / P(L >= l)` with L drawn
/// from `dist`.
pub fn coupled_sum_estimate(
    model: &dyn Model,
    theta: &[f64],
    record: &ObservationRecord,
    dist: &LevelDistribution,
    params: &EstimatorParams,
    ctx: StreamCtx,
) -> Result<ScoreEstimate> {
    check_estimate_inputs(dist, record)?;
    let level = dist.sample(&mut ctx.child(rng::LEVEL_DRAW).rng());
    let d = model.dims().theta;
    let mut value = vec![0.0; d];
    let mut sweeps = 0;
    let mut diag = Diagnostics::default();
    let mut tau_fine = 0;
    let mut tau_coarse = None;
    for l in 0..=level {
        let psi = score_psi(
            model, theta, record, l, params,
            ctx.child(rng::PSI_TERM).child(l as u64),
        )?;
        let surv = dist.survival(l);
        for (acc, v) in value.iter_mut().zip(&psi.value) {
            *acc += v / surv;
        }
        sweeps += psi.sweeps;
        diag.merge(&psi.diag);
        tau_fine = psi.tau_fine;
        tau_coarse = psi.tau_coarse;
    }
    Ok(ScoreEstimate {
        value,
        level,
        sweeps,
        tau_fine,
        tau_coarse,
        diag,
    })
}

/// One replicate of an averaged run: replicate `rep` of the estimator draws
/// its own stream `base.child(rep)`, so any scheduling of replicates yields
/// identical results.
#[allow(clippy::too_many_arguments)]
pub fn replicate_estimate(
    model: &dyn Model,
    theta: &[f64],
    record: &ObservationRecord,
    dist: &LevelDistribution,
    params: &EstimatorParams,
    kind: EstimatorKind,
    rep: u64,
    base: StreamCtx,
) -> Result<ScoreEstimate> {
    let ctx = base.child(rep);
    match kind {
        EstimatorKind::SingleTerm => single_term_estimate(model, theta, record, dist, params, ctx),
        EstimatorKind::CoupledSum => coupled_sum_estimate(model, theta, record, dist, params, ctx),
    }
}

/// Componentwise cascade mean of replicate values.
pub fn combine_replicates(estimates: &[ScoreEstimate], dim: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(dim);
    for j in 0..dim {
        let comp: Vec<f64> = estimates.iter().map(|e| e.value[j]).collect();
        out.push(pairwise_sum(&comp) / comp.len() as f64);
    }
    out
}

/// Average of independent estimator replicates.
#[derive(Clone, Debug)]
pub struct AveragedEstimate {
    pub value: Vec<f64>,
    pub estimates: Vec<ScoreEstimate>,
    /// Replicates that failed (index, cause); they are excluded from the
    /// average rather than aborting the run.
    pub failures: Vec<(u64, Error)>,
}

/// Runs `replicates` independent estimates sequentially and averages the
/// successes. Fails only if every replicate failed.
#[allow(clippy::too_many_arguments)]
pub fn averaged_estimate(
    model: &dyn Model,
    theta: &[f64],
    record: &ObservationRecord,
    dist: &LevelDistribution,
    params: &EstimatorParams,
    kind: EstimatorKind,
    replicates: u64,
    ctx: StreamCtx,
) -> Result<AveragedEstimate> {
    if replicates == 0 {
        return Err(Error::InvalidConfig("zero replicates"));
    }
    check_estimate_inputs(dist, record)?;
    let mut estimates = Vec::new();
    let mut failures = Vec::new();
    for rep in 0..replicates {
        match replicate_estimate(model, theta, record, dist, params, kind, rep, ctx) {
            Ok(e) => estimates.push(e),
            Err(e) => failures.push((rep, e)),
        }
    }
    if estimates.is_empty() {
        return Err(Error::AllReplicatesFailed);
    }
    let value = combine_replicates(&estimates, model.dims().theta);
    Ok(AveragedEstimate {
        value,
        estimates,
        failures,
    })
}
