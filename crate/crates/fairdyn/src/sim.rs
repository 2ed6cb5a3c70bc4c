//! Trajectory orchestration: round loop, seeded Monte Carlo batches,
//! equilibrium detection and CSV emission.
//!
//! Two engines share the loop. The asymptotic engine treats the pool as
//! infinite (the realized state equals the mean parameter, rewards are
//! truncated conditional means); the empirical engine draws a finite pool
//! each round, samples scores and realizes integer admissions.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::evolve::{
    feedback_signal, role_model_share_asymptotic, role_model_share_empirical, update_theta,
    EvolutionModel, StepSchedule,
};
use crate::policy::{
    cmfg_policy, cmfg_policy_empirical, mfg_policy, mfg_policy_empirical, score_reward_asymptotic,
    thresholds, EngineMode, FairnessTarget, GroupDistributions, InstitutionConfig,
    PolicyKind, ScoredPool,
};
use crate::pool::{sample_pool, PoolConfig};
use crate::Result;

/// Everything needed to run rounds, minus the seed and horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub dists: GroupDistributions,
    pub institutions: Vec<InstitutionConfig>,
    pub target: FairnessTarget,
    pub pool: PoolConfig,
    pub policy: PolicyKind,
    pub engine: EngineMode,
    pub model: EvolutionModel,
    pub schedule: StepSchedule,
    pub theta0: f64,
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        crate::policy::validate_institutions(&self.institutions)?;
        self.pool.validate()?;
        self.schedule.validate()?;
        self.model.validate(self.institutions.len())?;
        if !(self.theta0 > 0.0 && self.theta0 < 1.0) {
            return Err(crate::Error::InvalidConfig {
                field: "theta0".into(),
                reason: format!("must lie in (0, 1), got {}", self.theta0),
            });
        }
        Ok(())
    }
}

/// One round's observables. In an empty-pool round every diagnostic except
/// `theta` is absent (`NaN` / `None`), not zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: u64,
    pub theta: f64,
    /// Realized minority fraction of the pool (NaN for an empty pool).
    pub state: f64,
    pub empty_pool: bool,
    pub actions: Vec<f64>,
    pub weighted_signal: f64,
    pub rewards: Vec<f64>,
    pub role_fractions: Option<Vec<f64>>,
    /// Per institution: CDF position of the lowest admitted score in each
    /// group's distribution; `None` when the institution admitted nobody
    /// from that group.
    pub lowest_admit_percentile: Vec<(Option<f64>, Option<f64>)>,
}

impl RoundRecord {
    fn empty(round: u64, theta: f64, k: usize, role: bool) -> Self {
        RoundRecord {
            round,
            theta,
            state: f64::NAN,
            empty_pool: true,
            actions: vec![f64::NAN; k],
            weighted_signal: f64::NAN,
            rewards: vec![f64::NAN; k],
            role_fractions: if role { Some(vec![f64::NAN; k]) } else { None },
            lowest_admit_percentile: vec![(None, None); k],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    pub records: Vec<RoundRecord>,
}

/// Runs one round from mean parameter `theta` at round index `t`.
/// Returns the record and the next mean parameter.
pub fn run_round<R: rand::Rng + ?Sized>(
    theta: f64,
    params: &SimParams,
    t: u64,
    rng: &mut R,
) -> Result<(RoundRecord, f64)> {
    let k = params.institutions.len();
    let role = params.model.needs_role_shares();
    match params.engine {
        EngineMode::Asymptotic => {
            let s = theta;
            let profile = match params.policy {
                PolicyKind::Mfg => mfg_policy(s, &params.dists, &params.institutions, params.target)?,
                PolicyKind::Cmfg => {
                    cmfg_policy(s, &params.dists, &params.institutions, params.target)?
                }
            };
            let mut rewards = Vec::with_capacity(k);
            let mut percentiles = Vec::with_capacity(k);
            let mut role_shares = if role { Some(Vec::with_capacity(k)) } else { None };
            for i in 0..k {
                let a = profile.actions[i];
                let prior = &profile.actions[..i];
                rewards.push(score_reward_asymptotic(
                    i,
                    s,
                    a,
                    prior,
                    &params.dists,
                    &params.institutions,
                )?);
                let th = thresholds(i, s, a, prior, &params.dists, &params.institutions)?;
                let p0 = if a > 1e-12 { Some(th.minority.lower_cdf) } else { None };
                let p1 = if a < 1.0 - 1e-12 { Some(th.majority.lower_cdf) } else { None };
                percentiles.push((p0, p1));
                if let Some(shares) = role_shares.as_mut() {
                    let fraction = match &params.model {
                        EvolutionModel::RoleModel { fraction } => *fraction,
                        _ => unreachable!(),
                    };
                    shares.push(role_model_share_asymptotic(
                        s,
                        a,
                        params.institutions[i].capacity,
                        &th,
                        &params.dists,
                        fraction,
                    )?);
                }
            }
            let signal =
                feedback_signal(&params.model, &profile, &params.institutions, role_shares.as_deref());
            let next =
                update_theta(&params.model, &params.schedule, t, theta, s, signal, &params.pool);
            let record = RoundRecord {
                round: t,
                theta,
                state: s,
                empty_pool: false,
                actions: profile.actions,
                weighted_signal: signal,
                rewards,
                role_fractions: role_shares,
                lowest_admit_percentile: percentiles,
            };
            Ok((record, next))
        }
        EngineMode::Empirical => {
            let pool = sample_pool(theta, &params.pool, rng);
            if pool.is_empty() {
                return Ok((RoundRecord::empty(t, theta, k, role), theta));
            }
            let s = pool.state;
            let scored = ScoredPool::sample(
                &params.dists,
                pool.n_minority as usize,
                pool.n_majority as usize,
                rng,
            );
            let outcome = match params.policy {
                PolicyKind::Mfg => {
                    mfg_policy_empirical(&scored, s, &params.institutions, params.target)
                }
                PolicyKind::Cmfg => {
                    cmfg_policy_empirical(&scored, s, &params.institutions, params.target)
                }
            };
            let mut percentiles = Vec::with_capacity(k);
            for (minority, majority) in &outcome.admitted {
                let p0 = minority.last().map(|&lowest| params.dists.minority.cdf(lowest));
                let p1 = majority.last().map(|&lowest| params.dists.majority.cdf(lowest));
                percentiles.push((p0, p1));
            }
            let role_shares = if role {
                let fraction = match &params.model {
                    EvolutionModel::RoleModel { fraction } => *fraction,
                    _ => unreachable!(),
                };
                Some(
                    outcome
                        .admitted
                        .iter()
                        .map(|(m0, m1)| role_model_share_empirical(m0, m1, fraction, s))
                        .collect::<Vec<f64>>(),
                )
            } else {
                None
            };
            let signal = feedback_signal(
                &params.model,
                &outcome.profile,
                &params.institutions,
                role_shares.as_deref(),
            );
            let next =
                update_theta(&params.model, &params.schedule, t, theta, s, signal, &params.pool);
            let record = RoundRecord {
                round: t,
                theta,
                state: s,
                empty_pool: false,
                actions: outcome.profile.actions,
                weighted_signal: signal,
                rewards: outcome.rewards,
                role_fractions: role_shares,
                lowest_admit_percentile: percentiles,
            };
            Ok((record, next))
        }
    }
}

/// Deterministic trajectory for one seed.
pub fn run_trajectory(params: &SimParams, seed: u64, rounds: u64) -> Result<Trajectory> {
    assert!(rounds >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = params.pool.clip_mean(params.theta0);
    let mut records = Vec::with_capacity(rounds as usize);
    for t in 0..rounds {
        let (record, next) = run_round(theta, params, t, &mut rng)?;
        records.push(record);
        theta = next;
    }
    Ok(Trajectory { seed, records })
}

/// Per-round cross-instance averages. Cells are `None` when no instance
/// produced the diagnostic that round.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub round: u64,
    pub mean_theta: f64,
    pub se_theta: f64,
    pub mean_state: Option<f64>,
    pub mean_actions: Vec<Option<f64>>,
    pub mean_signal: Option<f64>,
    pub mean_rewards: Vec<Option<f64>>,
    pub mean_role_fractions: Vec<Option<f64>>,
    pub mean_low_pct_minority: Vec<Option<f64>>,
    pub mean_low_pct_majority: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSummary {
    pub n_instances: usize,
    pub n_institutions: usize,
    pub has_role_fractions: bool,
    pub rows: Vec<SummaryRow>,
}

fn finite_mean_se(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return (None, None);
    }
    let n = finite.len() as f64;
    let mean = finite.iter().sum::<f64>() / n;
    let se = if finite.len() > 1 {
        let var = finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    (Some(mean), Some(se))
}

fn mean_of_options(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let present: Vec<f64> = values.flatten().filter(|v| v.is_finite()).collect();
    finite_mean_se(&present).0
}

/// Aggregates trajectories (all the same length) into per-round statistics.
pub fn summarize(trajectories: &[Trajectory], params: &SimParams) -> BatchSummary {
    assert!(!trajectories.is_empty());
    let rounds = trajectories[0].records.len();
    let k = params.institutions.len();
    let role = params.model.needs_role_shares();
    let mut rows = Vec::with_capacity(rounds);
    for r in 0..rounds {
        let recs: Vec<&RoundRecord> = trajectories.iter().map(|t| &t.records[r]).collect();
        let thetas: Vec<f64> = recs.iter().map(|x| x.theta).collect();
        let (mean_theta, se_theta) = finite_mean_se(&thetas);
        let states: Vec<f64> = recs.iter().map(|x| x.state).collect();
        let signals: Vec<f64> = recs.iter().map(|x| x.weighted_signal).collect();
        let per_inst = |f: &dyn Fn(&RoundRecord, usize) -> Option<f64>| -> Vec<Option<f64>> {
            (0..k)
                .map(|i| mean_of_options(recs.iter().map(|x| f(x, i))))
                .collect()
        };
        rows.push(SummaryRow {
            round: recs[0].round,
            mean_theta: mean_theta.unwrap(),
            se_theta: se_theta.unwrap(),
            mean_state: finite_mean_se(&states).0,
            mean_actions: per_inst(&|x, i| Some(x.actions[i])),
            mean_signal: finite_mean_se(&signals).0,
            mean_rewards: per_inst(&|x, i| Some(x.rewards[i])),
            mean_role_fractions: if role {
                per_inst(&|x, i| x.role_fractions.as_ref().map(|v| v[i]))
            } else {
                vec![None; k]
            },
            mean_low_pct_minority: per_inst(&|x, i| x.lowest_admit_percentile[i].0),
            mean_low_pct_majority: per_inst(&|x, i| x.lowest_admit_percentile[i].1),
        });
    }
    BatchSummary {
        n_instances: trajectories.len(),
        n_institutions: k,
        has_role_fractions: role,
        rows,
    }
}

/// Runs `n_instances` independent trajectories with seeds
/// `base_seed, base_seed + 1, ...` in parallel and aggregates them.
/// The result does not depend on thread scheduling.
pub fn run_batch(
    params: &SimParams,
    n_instances: usize,
    base_seed: u64,
    rounds: u64,
) -> Result<BatchSummary> {
    assert!(n_instances >= 1);
    let trajectories: Vec<Trajectory> = (0..n_instances)
        .into_par_iter()
        .map(|i| run_trajectory(params, base_seed.wrapping_add(i as u64), rounds))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(&trajectories, params))
}

/// Mean of the last `window` rounds of the mean-parameter trajectory, plus a
/// convergence flag: max minus min over that window below `tol`.
pub fn detect_equilibrium(summary: &BatchSummary, window: usize, tol: f64) -> (f64, bool) {
    assert!(window >= 1 && window <= summary.rows.len());
    let tail = &summary.rows[summary.rows.len() - window..];
    let mean = tail.iter().map(|r| r.mean_theta).sum::<f64>() / window as f64;
    let max = tail.iter().map(|r| r.mean_theta).fold(f64::NEG_INFINITY, f64::max);
    let min = tail.iter().map(|r| r.mean_theta).fold(f64::INFINITY, f64::min);
    (mean, max - min < tol)
}

/// CDF position of a group's lowest admitted score in its distribution.
pub fn lowest_admit_percentile(
    dist: &crate::dist::ScoreDistribution,
    admitted_descending: &[f64],
) -> Option<f64> {
    admitted_descending.last().map(|&lowest| dist.cdf(lowest))
}

fn push_opt(row: &mut Vec<String>, v: Option<f64>) {
    row.push(v.map(|x| format!("{x}")).unwrap_or_default());
}

/// Writes the batch CSV: `round,mean_theta,se_theta,mean_state,
/// mean_action_1..K,mean_signal,mean_role_frac_1..K,mean_low_pct_g0_1..K,
/// mean_low_pct_g1_1..K`. Missing diagnostics are empty cells.
pub fn write_summary_csv<W: Write>(summary: &BatchSummary, writer: W) -> Result<()> {
    let k = summary.n_institutions;
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![
        "round".to_string(),
        "mean_theta".to_string(),
        "se_theta".to_string(),
        "mean_state".to_string(),
    ];
    header.extend((1..=k).map(|i| format!("mean_action_{i}")));
    header.push("mean_signal".to_string());
    header.extend((1..=k).map(|i| format!("mean_role_frac_{i}")));
    header.extend((1..=k).map(|i| format!("mean_low_pct_g0_{i}")));
    header.extend((1..=k).map(|i| format!("mean_low_pct_g1_{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for row in &summary.rows {
        let mut rec: Vec<String> = vec![
            row.round.to_string(),
            format!("{}", row.mean_theta),
            format!("{}", row.se_theta),
        ];
        push_opt(&mut rec, row.mean_state);
        for v in &row.mean_actions {
            push_opt(&mut rec, *v);
        }
        push_opt(&mut rec, row.mean_signal);
        for v in &row.mean_role_fractions {
            push_opt(&mut rec, *v);
        }
        for v in &row.mean_low_pct_minority {
            push_opt(&mut rec, *v);
        }
        for v in &row.mean_low_pct_majority {
            push_opt(&mut rec, *v);
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> crate::Error {
    crate::Error::Ingest(format!("csv write: {e}"))
}
