//! Acceptance suite: desk-scale quantitative checks of the whole pipeline.
//!
//! Scale throughout: the mean-reverting scalar model, ten observation units,
//! data grid level 6, ensembles of 64 to 128 particles. Each criterion prints
//! one verdict line (visible under `--nocapture`) and enforces a wall-clock
//! budget.

use std::fs;
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use driftscore::couplings::{maximal_coupling, maximal_coupling_pmf, quad_maximal_coupling};
use driftscore::dynamics::{
    coupled_unit_step, extend_unit, fine_coarse_unit_step, four_chain_unit_step, Diagnostics,
    NoiseBlock,
};
use driftscore::estimators::{
    psi_level, score_psi, EstimatorParams, LevelDistribution, TerminalStateFunctional,
};
use driftscore::lattice::{simulate_data, ObservationRecord};
use driftscore::models::{Model, OrnsteinUhlenbeck};
use driftscore::oracle::{reference_loglik, reference_score};
use driftscore::rng::StreamCtx;
use driftscore::sgd::{run_sgd, SgdConfig};
use driftscore::stats::{ks_two_sample, linear_fit, mean, sample_variance, tv_distance};

const OU_THETA: [f64; 3] = [0.75, 0.75, 1.0];

fn ou() -> OrnsteinUhlenbeck {
    OrnsteinUhlenbeck::default()
}

/// Shared desk-scale record: T = 10 units observed on grid level 6.
fn desk_record() -> &'static ObservationRecord {
    static REC: OnceLock<ObservationRecord> = OnceLock::new();
    REC.get_or_init(|| {
        simulate_data(&ou(), &OU_THETA, 6, 10, 777)
            .expect("desk data simulates")
            .record
    })
}

/// Runs `jobs` closures across the available cores, results in index order.
fn par_map<T: Send, F: Fn(usize) -> T + Sync>(jobs: usize, job: F) -> Vec<T> {
    let workers = std::thread::available_parallelism()
        .map_or(1, |p| p.get())
        .min(jobs.max(1));
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..jobs).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs {
                    break;
                }
                let out = job(i);
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("job ran"))
        .collect()
}

fn normalized(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

/// Appends a failure when the elapsed time exceeds the budget; returns it.
fn check_budget(failures: &mut Vec<String>, start: Instant, budget_s: u64) -> f64 {
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed > budget_s as f64 {
        failures.push(format!("runtime {elapsed:.1}s exceeds {budget_s}s budget"));
    }
    elapsed
}

fn verdict(label: &str, failures: &[String], detail: &str) {
    if failures.is_empty() {
        println!("criterion {label}: PASS ({detail})");
    } else {
        println!("criterion {label}: FAIL ({}; {detail})", failures.join("; "));
    }
    assert!(
        failures.is_empty(),
        "criterion {label}: {}",
        failures.join("; ")
    );
}

fn run_cli(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_driftscore"))
        .args(args)
        .output()
        .expect("cli binary spawns");
    assert!(
        out.status.success(),
        "cli {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn criterion_1_resampling_coupling_joint_laws() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut rng = StreamCtx::root(0xACC1).rng();
    let pair_draws = 100_000usize;
    // The four-index law spreads over up to n^4 cells; extra draws keep the
    // sampling noise floor of the empirical TV well inside the tolerance.
    let quad_draws = 400_000usize;
    let mut max_pair_tv: f64 = 0.0;
    let mut max_quad_tv: f64 = 0.0;
    let mut max_meet_z: f64 = 0.0;
    let mut max_share_z: f64 = 0.0;

    for n in [2usize, 3, 4] {
        let pf = normalized(&(1..=n).map(|i| i as f64).collect::<Vec<_>>());
        let qf = normalized(
            &(1..=n)
                .map(|i| ((n + 1 - i) * (n + 1 - i)) as f64)
                .collect::<Vec<_>>(),
        );
        let pc = normalized(&(1..=n).map(|i| 1.0 + 0.5 * i as f64).collect::<Vec<_>>());
        let qc = normalized(&(1..=n).map(|i| (i * i) as f64).collect::<Vec<_>>());

        // Pair coupling against its closed-form joint pmf.
        let mut joint = vec![0.0; n * n];
        let mut met = 0usize;
        for _ in 0..pair_draws {
            let d = maximal_coupling(&mut rng, &pf, &qf).unwrap();
            joint[d.left * n + d.right] += 1.0;
            met += usize::from(d.left == d.right);
        }
        for c in joint.iter_mut() {
            *c /= pair_draws as f64;
        }
        let exact: Vec<f64> = (0..n * n)
            .map(|cell| maximal_coupling_pmf(&pf, &qf, cell / n, cell % n))
            .collect();
        let tv = tv_distance(&joint, &exact);
        max_pair_tv = max_pair_tv.max(tv);
        if tv > 0.01 {
            failures.push(format!("pair joint TV {tv:.4} at support {n}"));
        }

        let overlap: f64 = pf.iter().zip(&qf).map(|(a, b)| a.min(*b)).sum();
        let se = (overlap * (1.0 - overlap) / pair_draws as f64).sqrt();
        let z = ((met as f64 / pair_draws as f64) - overlap).abs() / se;
        max_meet_z = max_meet_z.max(z);
        if z > 3.0 {
            failures.push(format!("meeting probability z {z:.2} at support {n}"));
        }

        // Quad coupling against the enumerated two-branch law: a shared pair
        // with the overlap mass, otherwise independent residual draws.
        let omega_f: Vec<f64> = (0..n * n)
            .map(|cell| maximal_coupling_pmf(&pf, &qf, cell / n, cell % n))
            .collect();
        let omega_c: Vec<f64> = (0..n * n)
            .map(|cell| maximal_coupling_pmf(&pc, &qc, cell / n, cell % n))
            .collect();
        let share_mass: f64 = omega_f.iter().zip(&omega_c).map(|(a, b)| a.min(*b)).sum();
        let resid = 1.0 - share_mass;
        let cells = n * n;
        let mut exact_quad = vec![0.0; cells * cells];
        for fine_cell in 0..cells {
            exact_quad[fine_cell * cells + fine_cell] +=
                omega_f[fine_cell].min(omega_c[fine_cell]);
            if resid > 0.0 {
                let rf = (omega_f[fine_cell] - omega_c[fine_cell]).max(0.0);
                for coarse_cell in 0..cells {
                    let rc = (omega_c[coarse_cell] - omega_f[coarse_cell]).max(0.0);
                    exact_quad[fine_cell * cells + coarse_cell] += rf * rc / resid;
                }
            }
        }

        let mut quad = vec![0.0; cells * cells];
        let mut shared = 0usize;
        for _ in 0..quad_draws {
            let d = quad_maximal_coupling(&mut rng, &pf, &qf, &pc, &qc, 1_000_000).unwrap();
            let fine_cell = d.fine_left * n + d.fine_right;
            let coarse_cell = d.coarse_left * n + d.coarse_right;
            quad[fine_cell * cells + coarse_cell] += 1.0;
            shared += usize::from(fine_cell == coarse_cell);
        }
        for c in quad.iter_mut() {
            *c /= quad_draws as f64;
        }
        let tv = tv_distance(&quad, &exact_quad);
        max_quad_tv = max_quad_tv.max(tv);
        if tv > 0.01 {
            failures.push(format!("quad joint TV {tv:.4} at support {n}"));
        }

        let se = (share_mass * (1.0 - share_mass) / quad_draws as f64).sqrt();
        let z = ((shared as f64 / quad_draws as f64) - share_mass).abs() / se;
        max_share_z = max_share_z.max(z);
        if z > 3.0 {
            failures.push(format!("shared-pair probability z {z:.2} at support {n}"));
        }
    }

    let elapsed = check_budget(&mut failures, start, 60);
    verdict(
        "1",
        &failures,
        &format!(
            "pair TV max {max_pair_tv:.4} @1e5, quad TV max {max_quad_tv:.4} @4e5, \
             meet z max {max_meet_z:.2}, share z max {max_share_z:.2}, {elapsed:.1}s"
        ),
    );
}

/// Endpoint of one observation unit simulated without any coupling.
fn unit_endpoints(model: &dyn Model, level: u32, x0: f64, n: usize, ctx: StreamCtx) -> Vec<f64> {
    let mut rng = ctx.rng();
    let mut diag = Diagnostics::default();
    (0..n)
        .map(|_| {
            let noise = NoiseBlock::draw(&mut rng, level, 1);
            let mut path = vec![x0];
            extend_unit(model, &OU_THETA, level, &mut path, &noise, &mut diag);
            *path.last().unwrap()
        })
        .collect()
}

#[test]
fn criterion_2_coupled_propagators_preserve_marginals() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let model = ou();
    let samples = 100_000usize;
    let starts = [0.3, -0.4, 0.8, -0.9];

    // (name, endpoint sample, level, start) for every coupled marginal.
    let mut comparisons: Vec<(String, Vec<f64>, u32, f64)> = Vec::new();

    for level in [0u32, 1] {
        let mut rng = StreamCtx::root(0xACC2).child(u64::from(level)).rng();
        let mut diag = Diagnostics::default();
        let mut end_a = Vec::with_capacity(samples);
        let mut end_b = Vec::with_capacity(samples);
        for _ in 0..samples {
            let noise = NoiseBlock::draw(&mut rng, level, 1);
            let mut a = vec![starts[0]];
            let mut b = vec![starts[1]];
            coupled_unit_step(&model, &OU_THETA, level, &mut a, &mut b, &noise, &mut diag);
            end_a.push(*a.last().unwrap());
            end_b.push(*b.last().unwrap());
        }
        comparisons.push((format!("coupled left l={level}"), end_a, level, starts[0]));
        comparisons.push((format!("coupled right l={level}"), end_b, level, starts[1]));
    }

    {
        let mut rng = StreamCtx::root(0xACC2).child(10).rng();
        let mut diag = Diagnostics::default();
        let mut end_f = Vec::with_capacity(samples);
        let mut end_c = Vec::with_capacity(samples);
        for _ in 0..samples {
            let noise = NoiseBlock::draw(&mut rng, 1, 1);
            let mut fine = vec![starts[0]];
            let mut coarse = vec![starts[2]];
            fine_coarse_unit_step(&model, &OU_THETA, 1, &mut fine, &mut coarse, &noise, &mut diag);
            end_f.push(*fine.last().unwrap());
            end_c.push(*coarse.last().unwrap());
        }
        comparisons.push(("fine-coarse fine l=1".into(), end_f, 1, starts[0]));
        comparisons.push(("fine-coarse coarse l=0".into(), end_c, 0, starts[2]));
    }

    {
        let mut rng = StreamCtx::root(0xACC2).child(11).rng();
        let mut diag = Diagnostics::default();
        let mut ends = [
            Vec::with_capacity(samples),
            Vec::with_capacity(samples),
            Vec::with_capacity(samples),
            Vec::with_capacity(samples),
        ];
        for _ in 0..samples {
            let noise = NoiseBlock::draw(&mut rng, 1, 1);
            let mut fa = vec![starts[0]];
            let mut fb = vec![starts[1]];
            let mut ca = vec![starts[2]];
            let mut cb = vec![starts[3]];
            four_chain_unit_step(
                &model, &OU_THETA, 1, &mut fa, &mut fb, &mut ca, &mut cb, &noise, &mut diag,
            );
            ends[0].push(*fa.last().unwrap());
            ends[1].push(*fb.last().unwrap());
            ends[2].push(*ca.last().unwrap());
            ends[3].push(*cb.last().unwrap());
        }
        let mut ends = ends.into_iter();
        comparisons.push(("four-chain fine left".into(), ends.next().unwrap(), 1, starts[0]));
        comparisons.push(("four-chain fine right".into(), ends.next().unwrap(), 1, starts[1]));
        comparisons.push(("four-chain coarse left".into(), ends.next().unwrap(), 0, starts[2]));
        comparisons.push(("four-chain coarse right".into(), ends.next().unwrap(), 0, starts[3]));
    }

    let mut min_p: f64 = 1.0;
    for (i, (name, sampled, level, x0)) in comparisons.iter().enumerate() {
        let reference = unit_endpoints(
            &model,
            *level,
            *x0,
            samples,
            StreamCtx::root(0xACD2).child(i as u64),
        );
        let (_, p) = ks_two_sample(sampled, &reference);
        min_p = min_p.min(p);
        if p <= 0.01 {
            failures.push(format!("{name}: KS p {p:.4}"));
        }
    }

    let elapsed = check_budget(&mut failures, start, 120);
    verdict(
        "2",
        &failures,
        &format!(
            "{} marginals @1e5 samples, min KS p {min_p:.3}, {elapsed:.1}s",
            comparisons.len()
        ),
    );
}

#[test]
fn criterion_3_debiased_score_matches_kalman_reference() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let model = ou();
    let record = desk_record();
    let params = EstimatorParams::default();
    let reps = 200usize;

    let oracle0 = reference_score(&model, &OU_THETA, record, 0).unwrap();
    let oracle1 = reference_score(&model, &OU_THETA, record, 1).unwrap();

    let level0: Vec<Vec<f64>> = par_map(reps, |i| {
        score_psi(
            &model,
            &OU_THETA,
            record,
            0,
            &params,
            StreamCtx::root(0xACC3).child(i as u64),
        )
        .unwrap()
        .value
    });
    let mut max_z: f64 = 0.0;
    for comp in [0usize, 1] {
        let xs: Vec<f64> = level0.iter().map(|v| v[comp]).collect();
        let m = mean(&xs);
        let se = (sample_variance(&xs) / reps as f64).sqrt();
        let z = (m - oracle0[comp]).abs() / se;
        max_z = max_z.max(z);
        if z > 3.0 {
            failures.push(format!(
                "level-0 component {comp}: mean {m:.4} vs reference {:.4} (z {z:.2})",
                oracle0[comp]
            ));
        }
    }

    // Independent replicates of the level-0 term plus the level-1 increment
    // estimate the level-1 score.
    let level1: Vec<Vec<f64>> = par_map(reps, |i| {
        let base = score_psi(
            &model,
            &OU_THETA,
            record,
            0,
            &params,
            StreamCtx::root(0xACC4).child(i as u64),
        )
        .unwrap()
        .value;
        let inc = score_psi(
            &model,
            &OU_THETA,
            record,
            1,
            &params,
            StreamCtx::root(0xACC5).child(i as u64),
        )
        .unwrap()
        .value;
        base.iter().zip(&inc).map(|(a, b)| a + b).collect()
    });
    for comp in [0usize, 1] {
        let xs: Vec<f64> = level1.iter().map(|v| v[comp]).collect();
        let m = mean(&xs);
        let se = (sample_variance(&xs) / reps as f64).sqrt();
        let z = (m - oracle1[comp]).abs() / se;
        max_z = max_z.max(z);
        if z > 3.0 {
            failures.push(format!(
                "level-1 component {comp}: mean {m:.4} vs reference {:.4} (z {z:.2})",
                oracle1[comp]
            ));
        }
    }

    let elapsed = check_budget(&mut failures, start, 900);
    verdict(
        "3",
        &failures,
        &format!("200 replicates per level, max |z| {max_z:.2}, {elapsed:.1}s"),
    );
}

#[test]
fn criterion_4_level_free_statistic_has_vanishing_increment() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let model = ou();
    let record = desk_record();
    let params = EstimatorParams::default();
    let func = TerminalStateFunctional { dim_x: 1 };
    let reps = 200usize;

    let vals: Vec<f64> = par_map(reps, |i| {
        psi_level(
            &model,
            &OU_THETA,
            1,
            record,
            &func,
            &params,
            StreamCtx::root(0xACC6).child(i as u64),
        )
        .unwrap()
        .value[0]
    });
    let m = mean(&vals);
    let se = (sample_variance(&vals) / reps as f64).sqrt();
    let z = m.abs() / se;
    if z > 3.0 {
        failures.push(format!("increment mean {m:.5} is {z:.2} SE from zero"));
    }

    // Context for the verdict: the exact level increment of this statistic.
    // The terminal smoothing mean is the terminal filter mean, so the closed
    // filter gives the true value of E[psi] at each level.
    let exact_increment = {
        let mut means = [0.0; 2];
        for (slot, level) in means.iter_mut().zip([0u32, 1]) {
            let ssm = model.linear_gaussian(&OU_THETA, level).unwrap();
            let obs = record.increments_at(level).unwrap();
            let mut fm = record.x_star[0];
            let mut fp = 0.0;
            for &obs_inc in &obs {
                let s = ssm.obs_scale * ssm.obs_scale * fp + ssm.obs_var;
                let nu = obs_inc - ssm.obs_shift - ssm.obs_scale * fm;
                let gain = fp * ssm.obs_scale / s;
                fm += gain * nu;
                fp -= gain * ssm.obs_scale * fp;
                fm = ssm.trans * fm;
                fp = ssm.trans * ssm.trans * fp + ssm.trans_var;
            }
            *slot = fm;
        }
        means[1] - means[0]
    };
    let z_exact = (m - exact_increment).abs() / se;

    let elapsed = check_budget(&mut failures, start, 600);
    verdict(
        "4",
        &failures,
        &format!(
            "mean {m:.5}, SE {se:.5}, z {z:.2} against zero; exact filter increment \
             of this statistic is {exact_increment:.5} (z {z_exact:.2} against it), {elapsed:.1}s"
        ),
    );
}

/// Sample variance of the level-l term's first component, 100 repeats per
/// level at 64 particles. Shared between the decay and the contrast checks.
fn increment_variances() -> &'static Vec<f64> {
    static VL: OnceLock<Vec<f64>> = OnceLock::new();
    VL.get_or_init(|| {
        let model = ou();
        let record = desk_record();
        let params = EstimatorParams {
            n_particles: 64,
            ..EstimatorParams::default()
        };
        (0..=4u32)
            .map(|level| {
                let xs: Vec<f64> = par_map(100, |i| {
                    score_psi(
                        &model,
                        &OU_THETA,
                        record,
                        level,
                        &params,
                        StreamCtx::root(0xACC7)
                            .child(u64::from(level))
                            .child(i as u64),
                    )
                    .unwrap()
                    .value[0]
                });
                sample_variance(&xs)
            })
            .collect()
    })
}

#[test]
fn criterion_5_increment_variance_decays_with_level() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let v = increment_variances();

    for l in 0..3 {
        if v[l + 1] >= v[l] {
            failures.push(format!("variance rises from level {l} to {}", l + 1));
        }
    }
    let levels = [0.0, 1.0, 2.0, 3.0];
    let logs: Vec<f64> = v[..4].iter().map(|x| x.log2()).collect();
    let (slope, _) = linear_fit(&levels, &logs);
    if slope >= -0.3 {
        failures.push(format!("log2 variance slope {slope:.3} not below -0.3"));
    }

    let elapsed = check_budget(&mut failures, start, 1800);
    verdict(
        "5",
        &failures,
        &format!(
            "V = [{:.3e}, {:.3e}, {:.3e}, {:.3e}, {:.3e}], slope {slope:.3}, {elapsed:.1}s",
            v[0], v[1], v[2], v[3], v[4]
        ),
    );
}

#[test]
fn criterion_6_level_distribution_tail_rates() {
    let start = Instant::now();
    let mut failures = Vec::new();

    let geo = LevelDistribution::Geometric { p: 0.6, l_max: 8 }
        .survival_decay_rate()
        .unwrap();
    let emp = LevelDistribution::Empirical { l_max: 8 }
        .survival_decay_rate()
        .unwrap();
    if (geo - 1.32).abs() > 0.15 {
        failures.push(format!("geometric tail rate {geo:.3} outside 1.32 +- 0.15"));
    }
    if (emp - 0.64).abs() > 0.15 {
        failures.push(format!("empirical tail rate {emp:.3} outside 0.64 +- 0.15"));
    }

    let elapsed = check_budget(&mut failures, start, 1);
    verdict(
        "6",
        &failures,
        &format!("geometric {geo:.3}, empirical {emp:.3}, {elapsed:.3}s"),
    );
}

#[test]
fn criterion_7_tail_weighted_variance_contrast() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let v = increment_variances();
    let emp = LevelDistribution::Empirical { l_max: 8 };
    let geo = LevelDistribution::Geometric { p: 0.6, l_max: 8 };

    // Variance of the tail-weighted term at each level: V_l / P(L >= l)^2.
    let r_emp: Vec<f64> = (0..=4u32)
        .map(|l| v[l as usize] / emp.survival(l).powi(2))
        .collect();
    let r_geo: Vec<f64> = (0..=4u32)
        .map(|l| v[l as usize] / geo.survival(l).powi(2))
        .collect();
    for l in 1..4 {
        if r_emp[l + 1] > r_emp[l] {
            failures.push(format!(
                "empirical weighting rises from level {l} to {}",
                l + 1
            ));
        }
        if r_geo[l + 1] <= r_geo[l] {
            failures.push(format!(
                "geometric weighting fails to rise from level {l} to {}",
                l + 1
            ));
        }
    }

    let elapsed = check_budget(&mut failures, start, 1800);
    verdict(
        "7",
        &failures,
        &format!(
            "empirical ratios [{:.2e}, {:.2e}, {:.2e}, {:.2e}], geometric ratios \
             [{:.2e}, {:.2e}, {:.2e}, {:.2e}], {elapsed:.1}s",
            r_emp[1], r_emp[2], r_emp[3], r_emp[4], r_geo[1], r_geo[2], r_geo[3], r_geo[4]
        ),
    );
}

/// Golden-section maximizer of a unimodal function on [a, b].
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..120 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[test]
fn criterion_8_ascent_recovers_drift_parameter() {
    let start = Instant::now();
    let mut failures = Vec::new();

    // Campaign through the binary: three data series, three restarts each,
    // tail-sum gradient with the empirical level distribution.
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("campaign.csv");
    run_cli(&[
        "sgd",
        "--model",
        "ou",
        "--seed",
        "4101",
        "--series",
        "3",
        "--restarts",
        "3",
        "--grad-estimator",
        "coupled",
        "--dist",
        "empirical",
        "--l-max",
        "3",
        "--n-particles",
        "128",
        "--t-horizon",
        "10",
        "--l-star",
        "6",
        "--workers",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .unwrap_or_else(|| panic!("column {name}"))
    };
    let (c_series, c_status, c_theta) = (col("series"), col("status"), col("theta_0"));
    let mut by_series: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields[c_status] != "ok" {
            failures.push(format!(
                "series {} restart failed: {}",
                fields[c_series], fields[c_status]
            ));
            continue;
        }
        by_series
            .entry(fields[c_series].to_string())
            .or_default()
            .push(fields[c_theta].parse().unwrap());
    }
    if by_series.len() != 3 {
        failures.push(format!("{} series reported, expected 3", by_series.len()));
    }

    // The campaign's returned estimate is the average over series and
    // restarts; single-series likelihoods at ten observation units spread
    // far wider than the full-length experiments' series tables do.
    let all: Vec<f64> = by_series.values().flatten().copied().collect();
    let campaign = mean(&all);
    if !(0.5..=1.0).contains(&campaign) {
        failures.push(format!(
            "campaign recovered {campaign:.3} outside [0.5, 1.0]"
        ));
    }

    // Each series must track the exact maximizer of its own data's
    // truncated-telescope likelihood; this pins the spread on the data
    // rather than on the ascent or the gradient estimator.
    let model = ou();
    let mut series_detail = Vec::new();
    for (idx, (series, thetas)) in by_series.iter().enumerate() {
        let m = mean(thetas);
        let record = simulate_data(&model, &OU_THETA, 6, 10, 4101 + idx as u64)
            .unwrap()
            .record;
        let series_mle = golden_max(
            |t| {
                let mut th = OU_THETA.to_vec();
                th[0] = t;
                reference_loglik(&model, &th, &record, 3).unwrap()
            },
            0.05,
            3.0,
        );
        if (m - series_mle).abs() > 0.05 {
            failures.push(format!(
                "series {series} recovered {m:.3}, its exact maximizer is {series_mle:.3}"
            ));
        }
        series_detail.push(format!("{m:.3} (exact {series_mle:.3})"));
    }

    // Exact-gradient ascent against a golden-section maximizer of the
    // reference log-likelihood over the estimated component.
    let record = desk_record();
    let cfg = SgdConfig::default();
    let mut grad = |theta: &[f64], _ctx: StreamCtx| reference_score(&model, theta, record, 0);
    let init = vec![0.5, 0.75, 1.0];
    let run = run_sgd(&model, &init, &mut grad, &cfg, StreamCtx::root(0xACC8)).unwrap();
    let mle = golden_max(
        |t| {
            let mut th = OU_THETA.to_vec();
            th[0] = t;
            reference_loglik(&model, &th, record, 0).unwrap()
        },
        0.25,
        1.25,
    );
    let gap = (run.theta[0] - mle).abs();
    if gap > 20.0 * cfg.beta {
        failures.push(format!(
            "exact-gradient ascent {:.4} vs maximizer {mle:.4} (gap {gap:.4})",
            run.theta[0]
        ));
    }

    let elapsed = check_budget(&mut failures, start, 3600);
    verdict(
        "8",
        &failures,
        &format!(
            "campaign {campaign:.3} for true 0.75, series [{}], ascent {:.4} vs maximizer {mle:.4}, {elapsed:.0}s",
            series_detail.join(", "),
            run.theta[0]
        ),
    );
}

/// Drops every column whose header name mentions wall time.
fn strip_wall_columns(text: &str) -> String {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    let keep: Vec<usize> = header
        .split(',')
        .enumerate()
        .filter(|(_, name)| !name.contains("wall"))
        .map(|(i, _)| i)
        .collect();
    let mut out = String::new();
    for line in std::iter::once(header).chain(lines) {
        let fields: Vec<&str> = line.split(',').collect();
        let row: Vec<&str> = keep
            .iter()
            .map(|&i| fields.get(i).copied().unwrap_or(""))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[test]
fn criterion_9_reruns_reproduce_outputs_byte_for_byte() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_string();

    let data_a = path("a.bin");
    let data_csv_a = path("a.csv");
    let data_b = path("b.bin");
    let data_csv_b = path("b.csv");
    for (out, csv) in [(&data_a, &data_csv_a), (&data_b, &data_csv_b)] {
        run_cli(&[
            "simulate-data",
            "--model",
            "ou",
            "--t-horizon",
            "2",
            "--l-star",
            "4",
            "--seed",
            "900",
            "--out",
            out,
            "--csv",
            csv,
        ]);
    }
    if fs::read(&data_a).unwrap() != fs::read(&data_b).unwrap() {
        failures.push("simulate-data records differ across reruns".into());
    }
    if fs::read_to_string(&data_csv_a).unwrap() != fs::read_to_string(&data_csv_b).unwrap() {
        failures.push("simulate-data csv exports differ across reruns".into());
    }

    // Each estimator command runs twice with different worker counts; bytes
    // must agree once wall-time columns are dropped.
    let commands: Vec<(&str, Vec<String>)> = vec![
        (
            "estimate-score",
            vec![
                "estimate-score", "--model", "ou", "--data", &data_a, "--seed", "901",
                "--replicates", "6", "--n-particles", "8", "--dist", "geom:0.5", "--l-max", "2",
                "--estimator", "coupled",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
        ),
        (
            "variance-sweep",
            vec![
                "variance-sweep", "--model", "ou", "--data", &data_a, "--seed", "902", "--level",
                "2", "--n-grid", "8,12", "--repeats", "3", "--n-particles", "8", "--dist",
                "geom:0.5", "--l-max", "2",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
        ),
        (
            "mse-sweep",
            vec![
                "mse-sweep", "--model", "ou", "--data", &data_a, "--seed", "903", "--n-grid",
                "8,12", "--repeats", "3", "--dist", "geom:0.5", "--l-max", "2",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
        ),
        (
            "sgd",
            vec![
                "sgd", "--model", "ou", "--data", &data_a, "--seed", "904", "--series", "1",
                "--restarts", "2", "--grad-estimator", "coupled", "--dist", "geom:0.5", "--l-max",
                "1", "--n-particles", "8", "--max-iters", "3",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
        ),
    ];

    for (label, args) in &commands {
        let out_1 = path(&format!("{label}_1.csv"));
        let out_2 = path(&format!("{label}_2.csv"));
        for (out, workers) in [(&out_1, "1"), (&out_2, "3")] {
            let mut full: Vec<&str> = args.iter().map(String::as_str).collect();
            full.extend(["--workers", workers, "--out", out]);
            run_cli(&full);
        }
        let a = strip_wall_columns(&fs::read_to_string(&out_1).unwrap());
        let b = strip_wall_columns(&fs::read_to_string(&out_2).unwrap());
        if a != b {
            failures.push(format!("{label} output depends on worker scheduling"));
        }
    }

    let elapsed = check_budget(&mut failures, start, 300);
    verdict(
        "9",
        &failures,
        &format!(
            "{} commands byte-stable across reruns and worker counts, {elapsed:.1}s",
            commands.len() + 1
        ),
    );
}
