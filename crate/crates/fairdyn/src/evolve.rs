//! Pool-composition feedback: how admission outcomes move the mean minority
//! proportion between rounds.
//!
//! All variants share the same update skeleton
//! `theta' = clip(theta + eta_t * transform(signal - state))`; they differ in
//! which aggregate signal they react to and in the drift transform. The
//! order-based transform with `beta = 1` and the weighted signal with
//! capacity weights reduce bitwise to the pure model because they reuse the
//! same code paths.

use serde::{Deserialize, Serialize};

use crate::dist::Bound;
use crate::policy::{ActionProfile, InstitutionConfig, InstitutionThresholds};
use crate::pool::PoolConfig;
use crate::{Error, Result};

/// Step-size schedule `eta_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    Fixed { eta: f64 },
    /// `eta_t = eta0 / (t + 1)^exponent` with `exponent` in (0.5, 1].
    Decaying { eta0: f64, exponent: f64 },
}

impl StepSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSchedule::Fixed { eta } => {
                if !(eta > 0.0) {
                    return Err(Error::InvalidConfig {
                        field: "evolution.step.eta".into(),
                        reason: "must be > 0".into(),
                    });
                }
            }
            StepSchedule::Decaying { eta0, exponent } => {
                if !(eta0 > 0.0) {
                    return Err(Error::InvalidConfig {
                        field: "evolution.step.eta".into(),
                        reason: "must be > 0".into(),
                    });
                }
                if !(exponent > 0.5 && exponent <= 1.0) {
                    return Err(Error::InvalidConfig {
                        field: "evolution.step.exponent".into(),
                        reason: format!("must lie in (0.5, 1], got {exponent}"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Step size at (0-based) round `t`.
    pub fn step(&self, t: u64) -> f64 {
        match *self {
            StepSchedule::Fixed { eta } => eta,
            StepSchedule::Decaying { eta0, exponent } => eta0 / ((t + 1) as f64).powf(exponent),
        }
    }
}

/// Reinforcement model for the pool mean parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum EvolutionModel {
    /// Drift toward the capacity-weighted admission fraction.
    Pure,
    /// Pure drift passed through `sign(d) |d|^beta`.
    OrderBased { beta: f64 },
    /// Drift toward a custom-weighted admission fraction.
    Weighted { weights: Vec<f64> },
    /// Drift toward the capacity-weighted minority share of each
    /// institution's top `fraction` of admits.
    RoleModel { fraction: f64 },
}

impl EvolutionModel {
    pub fn validate(&self, n_institutions: usize) -> Result<()> {
        match self {
            EvolutionModel::Pure => {}
            EvolutionModel::OrderBased { beta } => {
                if !(*beta > 0.0) {
                    return Err(Error::InvalidConfig {
                        field: "evolution.beta".into(),
                        reason: "must be > 0".into(),
                    });
                }
            }
            EvolutionModel::Weighted { weights } => {
                if weights.len() != n_institutions {
                    return Err(Error::InvalidConfig {
                        field: "evolution.weights".into(),
                        reason: format!(
                            "expected {n_institutions} weights, got {}",
                            weights.len()
                        ),
                    });
                }
                if weights.iter().any(|w| !(*w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
                    return Err(Error::InvalidConfig {
                        field: "evolution.weights".into(),
                        reason: "must be non-negative with positive sum".into(),
                    });
                }
            }
            EvolutionModel::RoleModel { fraction } => {
                if !(*fraction > 0.0 && *fraction <= 1.0) {
                    return Err(Error::InvalidConfig {
                        field: "evolution.role_fraction".into(),
                        reason: format!("must lie in (0, 1], got {fraction}"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn needs_role_shares(&self) -> bool {
        matches!(self, EvolutionModel::RoleModel { .. })
    }
}

/// Aggregate admission signal the pool reacts to.
///
/// `role_shares` must be provided (one entry per institution) for the
/// role-model variant and is ignored otherwise.
pub fn feedback_signal(
    model: &EvolutionModel,
    profile: &ActionProfile,
    insts: &[InstitutionConfig],
    role_shares: Option<&[f64]>,
) -> f64 {
    match model {
        EvolutionModel::Pure | EvolutionModel::OrderBased { .. } => {
            profile.capacity_weighted(insts)
        }
        EvolutionModel::Weighted { weights } => profile.weighted_by(weights),
        EvolutionModel::RoleModel { .. } => {
            let shares = role_shares.expect("role-model signal needs per-institution shares");
            let weights: Vec<f64> = insts.iter().map(|i| i.capacity).collect();
            crate::policy::weighted_mean(shares, &weights)
        }
    }
}

fn drift_transform(model: &EvolutionModel, d: f64) -> f64 {
    match model {
        EvolutionModel::OrderBased { beta } => d.signum() * d.abs().powf(*beta),
        _ => d,
    }
}

/// One mean-parameter update: `clip(theta + eta_t * transform(signal - state))`.
pub fn update_theta(
    model: &EvolutionModel,
    schedule: &StepSchedule,
    round: u64,
    theta: f64,
    state: f64,
    signal: f64,
    pool: &PoolConfig,
) -> f64 {
    let eta = schedule.step(round);
    let raw = theta + eta * drift_transform(model, signal - state);
    pool.clip_mean(raw)
}

/// Minority share of the top `floor(fraction * admits)` admitted scores.
///
/// Both slices must be sorted descending. Equal scores across groups break
/// toward the minority slice. An empty top slice is neutral: the share is
/// the current pool state, producing zero drift.
pub fn role_model_share_empirical(
    minority: &[f64],
    majority: &[f64],
    fraction: f64,
    state: f64,
) -> f64 {
    let admits = minority.len() + majority.len();
    let m = (fraction * admits as f64).floor() as usize;
    if m == 0 {
        return state;
    }
    let (mut i, mut j) = (0usize, 0usize);
    while i + j < m {
        if i < minority.len() && (j >= majority.len() || minority[i] >= majority[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }
    i as f64 / m as f64
}

/// Asymptotic counterpart: minority fraction of the top `fraction * c_k`
/// mass of institution `k`'s admitted slice, found by bisection on the score
/// cutoff. With `fraction = 1` this is exactly the institution's action.
pub fn role_model_share_asymptotic(
    s: f64,
    action: f64,
    capacity: f64,
    th: &InstitutionThresholds,
    dists: &crate::policy::GroupDistributions,
    fraction: f64,
) -> Result<f64> {
    if fraction >= 1.0 {
        return Ok(action);
    }
    let target_mass = fraction * capacity;
    // Admitted mass above a cutoff x, per group, in population-fraction units.
    let upper_cdf0 = th.minority.lower_cdf + th.minority.mass;
    let upper_cdf1 = th.majority.lower_cdf + th.majority.mass;
    let min_above = |x: f64| -> f64 {
        let fx = dists.minority.cdf(x);
        s * (upper_cdf0 - fx.max(th.minority.lower_cdf)).max(0.0)
    };
    let maj_above = |x: f64| -> f64 {
        let fx = dists.majority.cdf(x);
        (1.0 - s) * (upper_cdf1 - fx.max(th.majority.lower_cdf)).max(0.0)
    };
    let finite = |b: Bound, fallback: f64| match b {
        Bound::Finite(x) => x,
        Bound::Unbounded => fallback,
    };
    let q = |d: &crate::dist::ScoreDistribution, p: f64| d.inv_cdf(p).unwrap_or(0.0);
    let lo0 = finite(th.minority.lower, q(&dists.minority, 1e-12));
    let lo1 = finite(th.majority.lower, q(&dists.majority, 1e-12));
    let hi0 = finite(th.minority.upper, q(&dists.minority, 1.0 - 1e-12));
    let hi1 = finite(th.majority.upper, q(&dists.majority, 1.0 - 1e-12));
    let mut lo = lo0.min(lo1);
    let mut hi = hi0.max(hi1);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if min_above(mid) + maj_above(mid) > target_mass {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * (1.0 + hi.abs()) {
            break;
        }
    }
    let cut = 0.5 * (lo + hi);
    Ok((min_above(cut) / target_mass).clamp(0.0, 1.0))
}
