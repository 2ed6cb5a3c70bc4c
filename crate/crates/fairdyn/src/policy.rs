//! Per-round admission decisions.
//!
//! Institutions are rank-ordered (index 0 is the highest rank) and select
//! sequentially from the shared pool. Each institution `k` balances its
//! score-based reward against the squared fairness loss
//! `lambda_k * (a - alpha)^2` over its feasible action interval. Two engines
//! are provided: the asymptotic engine works on the score distributions
//! through truncated conditional means and admission thresholds, the
//! empirical engine on realized sampled scores with integer admit counts.
//!
//! All operations here are pure functions of their arguments; random streams
//! appear only in empirical score sampling and are passed explicitly.

use serde::{Deserialize, Serialize};

use crate::dist::{Bound, ScoreDistribution};
use crate::{Error, Result};

/// Action tolerance treated as "no admits from this group".
const A_EPS: f64 = 1e-12;
/// Grid resolution for the concave maximizations.
const GRID_STEP: f64 = 1e-3;
/// Width the golden-section refinement narrows to.
const GOLDEN_TOL: f64 = 1e-6;

/// A ranked institution: capacity fraction `c_k` and fairness weight
/// `lambda_k`. Rank is the position in the institution slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstitutionConfig {
    pub capacity: f64,
    #[serde(rename = "lambda")]
    pub fairness_weight: f64,
}

/// Validates capacities (`sum c_k < 1`, each positive) and weights.
pub fn validate_institutions(insts: &[InstitutionConfig]) -> Result<()> {
    if insts.is_empty() {
        return Err(Error::InvalidConfig {
            field: "institutions".into(),
            reason: "at least one institution required".into(),
        });
    }
    let mut total = 0.0;
    for (k, inst) in insts.iter().enumerate() {
        if !(inst.capacity > 0.0) {
            return Err(Error::InvalidConfig {
                field: format!("institutions[{k}].capacity"),
                reason: "must be > 0".into(),
            });
        }
        if !(inst.fairness_weight >= 0.0) {
            return Err(Error::InvalidConfig {
                field: format!("institutions[{k}].lambda"),
                reason: "must be >= 0".into(),
            });
        }
        total += inst.capacity;
    }
    if total >= 1.0 {
        return Err(Error::InvalidConfig {
            field: "institutions".into(),
            reason: format!("total capacity must be < 1, got {total}"),
        });
    }
    Ok(())
}

/// Long-term fairness target `alpha`, strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FairnessTargetRaw", into = "FairnessTargetRaw")]
pub struct FairnessTarget {
    alpha: f64,
}

#[derive(Serialize, Deserialize)]
struct FairnessTargetRaw {
    alpha: f64,
}

impl TryFrom<FairnessTargetRaw> for FairnessTarget {
    type Error = Error;
    fn try_from(raw: FairnessTargetRaw) -> Result<Self> {
        FairnessTarget::new(raw.alpha)
    }
}

impl From<FairnessTarget> for FairnessTargetRaw {
    fn from(t: FairnessTarget) -> Self {
        FairnessTargetRaw { alpha: t.alpha }
    }
}

impl FairnessTarget {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidConfig {
                field: "target.alpha".into(),
                reason: format!("must lie in (0, 1), got {alpha}"),
            });
        }
        Ok(FairnessTarget { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// The two groups' score laws; group 0 is the minority.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDistributions {
    pub minority: ScoreDistribution,
    pub majority: ScoreDistribution,
}

impl GroupDistributions {
    pub fn identical(&self) -> bool {
        self.minority == self.majority
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineMode {
    Asymptotic,
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Mfg,
    Cmfg,
}

/// Per-institution admitted minority fractions plus their feasible intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionProfile {
    pub actions: Vec<f64>,
    pub feasible_intervals: Vec<(f64, f64)>,
}

impl ActionProfile {
    pub fn empty() -> Self {
        ActionProfile { actions: Vec::new(), feasible_intervals: Vec::new() }
    }

    /// Capacity-weighted admission fraction `pi^W`.
    pub fn capacity_weighted(&self, insts: &[InstitutionConfig]) -> f64 {
        let weights: Vec<f64> = insts.iter().map(|i| i.capacity).collect();
        weighted_mean(&self.actions, &weights)
    }

    /// Custom-weighted admission fraction `pi^z`.
    pub fn weighted_by(&self, weights: &[f64]) -> f64 {
        weighted_mean(&self.actions, weights)
    }
}

pub(crate) fn weighted_mean(values: &[f64], weights: &[f64]) -> f64 {
    let num: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
    let den: f64 = weights.iter().sum();
    num / den
}

/// Admission score band for one group at one institution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceThresholds {
    pub lower: Bound,
    pub upper: Bound,
    /// CDF value at the lower threshold under the group's distribution.
    pub lower_cdf: f64,
    /// Probability mass of the slice under the group's distribution.
    pub mass: f64,
}

/// Lower/upper thresholds per group for one institution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstitutionThresholds {
    pub minority: SliceThresholds,
    pub majority: SliceThresholds,
}

fn check_state(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidState(s));
    }
    Ok(())
}

/// Cumulative capacity already claimed from each group by ranks before `k`,
/// as fractions of the whole pool.
fn prior_claims(prior: &[f64], insts: &[InstitutionConfig]) -> (f64, f64) {
    let mut cbar0 = 0.0;
    let mut cbar1 = 0.0;
    for (a, inst) in prior.iter().zip(insts) {
        cbar0 += a * inst.capacity;
        cbar1 += (1.0 - a) * inst.capacity;
    }
    (cbar0, cbar1)
}

/// Feasible action interval for institution `k` (0-based rank) given the
/// actions of all higher-ranked institutions.
pub fn feasible_interval(
    k: usize,
    s: f64,
    prior: &[f64],
    insts: &[InstitutionConfig],
) -> Result<(f64, f64)> {
    check_state(s)?;
    assert_eq!(prior.len(), k, "prior actions must cover ranks before k");
    let (cbar0, cbar1) = prior_claims(prior, insts);
    let rem0 = s - cbar0;
    let rem1 = (1.0 - s) - cbar1;
    if rem0 < -1e-9 || rem1 < -1e-9 {
        return Err(Error::InconsistentPriors(format!(
            "negative remaining group mass (minority {rem0}, majority {rem1})"
        )));
    }
    let ck = insts[k].capacity;
    let lo = (1.0 - rem1.max(0.0) / ck).max(0.0);
    let hi = (rem0.max(0.0) / ck).min(1.0);
    // The interval is non-empty whenever total capacity < 1; collapse float noise.
    Ok((lo, hi.max(lo)))
}

fn slice_thresholds(
    dist: &ScoreDistribution,
    claimed: f64,
    admitted: f64,
    group_share: f64,
) -> Result<SliceThresholds> {
    // CDF-space positions of the band: priors consume the top `claimed`
    // fraction of the group, this institution the next `admitted`.
    let upper_p = 1.0 - claimed / group_share;
    let lower_p = 1.0 - (claimed + admitted) / group_share;
    if lower_p < -1e-9 {
        return Err(Error::InconsistentPriors(format!(
            "cumulative demand exceeds group mass (inverse-CDF argument {lower_p})"
        )));
    }
    let upper = if upper_p >= 1.0 {
        Bound::Unbounded
    } else {
        Bound::Finite(dist.inv_cdf(upper_p.clamp(1e-12, 1.0 - 1e-16))?)
    };
    let lower = if admitted <= A_EPS * group_share {
        upper
    } else if lower_p <= 0.0 {
        Bound::Unbounded
    } else {
        Bound::Finite(dist.inv_cdf(lower_p)?)
    };
    Ok(SliceThresholds {
        lower,
        upper,
        lower_cdf: lower_p.clamp(0.0, 1.0),
        mass: (upper_p.clamp(0.0, 1.0) - lower_p.clamp(0.0, 1.0)).max(0.0),
    })
}

/// Group-specific admission thresholds for institution `k` taking action `a`.
pub fn thresholds(
    k: usize,
    s: f64,
    a: f64,
    prior: &[f64],
    dists: &GroupDistributions,
    insts: &[InstitutionConfig],
) -> Result<InstitutionThresholds> {
    let (lo, hi) = feasible_interval(k, s, prior, insts)?;
    if a < lo - 1e-9 || a > hi + 1e-9 {
        return Err(Error::InfeasibleAction { action: a, lo, hi });
    }
    let (cbar0, cbar1) = prior_claims(prior, insts);
    let ck = insts[k].capacity;
    Ok(InstitutionThresholds {
        minority: slice_thresholds(&dists.minority, cbar0, a * ck, s)?,
        majority: slice_thresholds(&dists.majority, cbar1, (1.0 - a) * ck, 1.0 - s)?,
    })
}

/// Asymptotic score-based reward: the admitted-score average under the
/// large-pool limit, a convex combination of the two groups' truncated means.
pub fn score_reward_asymptotic(
    k: usize,
    s: f64,
    a: f64,
    prior: &[f64],
    dists: &GroupDistributions,
    insts: &[InstitutionConfig],
) -> Result<f64> {
    let a = a.clamp(0.0, 1.0);
    let th = thresholds(k, s, a, prior, dists, insts)?;
    let mut reward = 0.0;
    if a > A_EPS {
        reward += a * dists.minority.truncated_mean(th.minority.lower, th.minority.upper)?;
    }
    if a < 1.0 - A_EPS {
        reward +=
            (1.0 - a) * dists.majority.truncated_mean(th.majority.lower, th.majority.upper)?;
    }
    Ok(reward)
}

/// Finite-sample score-based reward: mean of the top `round(a * admits)`
/// remaining minority scores and the complementary majority scores.
/// Both remaining-score slices must be sorted descending.
pub fn score_reward_empirical(
    a: f64,
    admits: usize,
    remaining_minority: &[f64],
    remaining_majority: &[f64],
) -> Result<f64> {
    if admits == 0 {
        return Ok(0.0);
    }
    let a0 = ((a * admits as f64) + 0.5).floor() as usize;
    let a0 = a0.min(admits);
    let a1 = admits - a0;
    if a0 > remaining_minority.len() {
        return Err(Error::OverDemand { requested: a0, available: remaining_minority.len() });
    }
    if a1 > remaining_majority.len() {
        return Err(Error::OverDemand { requested: a1, available: remaining_majority.len() });
    }
    let sum: f64 = remaining_minority[..a0].iter().sum::<f64>()
        + remaining_majority[..a1].iter().sum::<f64>();
    Ok(sum / admits as f64)
}

/// Squared deviation from the fairness target.
pub fn fairness_loss(a: f64, target: FairnessTarget) -> f64 {
    (a - target.alpha()).powi(2)
}

/// Fairness-aware utility `R_k - lambda_k * (a - alpha)^2` (asymptotic engine).
pub fn utility(
    k: usize,
    s: f64,
    a: f64,
    prior: &[f64],
    dists: &GroupDistributions,
    insts: &[InstitutionConfig],
    target: FairnessTarget,
) -> Result<f64> {
    let reward = score_reward_asymptotic(k, s, a, prior, dists, insts)?;
    Ok(reward - insts[k].fairness_weight * fairness_loss(a, target))
}

/// Fairness-optimal action: `alpha` projected onto the feasible interval.
pub fn fairness_optimal_action(
    k: usize,
    s: f64,
    prior: &[f64],
    insts: &[InstitutionConfig],
    target: FairnessTarget,
) -> Result<f64> {
    let (lo, hi) = feasible_interval(k, s, prior, insts)?;
    Ok(target.alpha().clamp(lo, hi))
}

/// Reward-optimal action.
///
/// With identical group distributions this is the closed form
/// `[s + (1/c_k) * sum_j c_j (s - pi_j)]` projected onto the feasible
/// interval. With distinct distributions the reward derivative equals the
/// gap between the group lower thresholds, which is monotone decreasing in
/// the action, so the maximizer is found by bisection on that gap.
pub fn reward_optimal_action(
    k: usize,
    s: f64,
    prior: &[f64],
    dists: &GroupDistributions,
    insts: &[InstitutionConfig],
) -> Result<f64> {
    let (lo, hi) = feasible_interval(k, s, prior, insts)?;
    if dists.identical() {
        let mut raw = s;
        for (j, a) in prior.iter().enumerate() {
            raw += insts[j].capacity * (s - a) / insts[k].capacity;
        }
        return Ok(raw.clamp(lo, hi));
    }
    let (cbar0, cbar1) = prior_claims(prior, insts);
    let ck = insts[k].capacity;
    // Lower-threshold positions as extended reals so the bracket stays valid
    // at the interval edges (an empty slice's limit is the upper threshold).
    let lower_at = |dist: &ScoreDistribution, p: f64| -> f64 {
        if p <= 0.0 {
            f64::NEG_INFINITY
        } else if p >= 1.0 {
            f64::INFINITY
        } else {
            dist.inv_cdf(p).unwrap_or(f64::NAN)
        }
    };
    let gap = |a: f64| -> f64 {
        let t0 = lower_at(&dists.minority, 1.0 - (cbar0 + a * ck) / s);
        let t1 = lower_at(&dists.majority, 1.0 - (cbar1 + (1.0 - a) * ck) / (1.0 - s));
        t0 - t1
    };
    let mut lo_a = lo;
    let mut hi_a = hi;
    if !(gap(lo_a) > 0.0) {
        return Ok(lo_a);
    }
    if !(gap(hi_a) < 0.0) {
        return Ok(hi_a);
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo_a + hi_a);
        if gap(mid) > 0.0 {
            lo_a = mid;
        } else {
            hi_a = mid;
        }
    }
    Ok(0.5 * (lo_a + hi_a))
}

/// Grid search at [`GRID_STEP`] with a golden-section refinement to
/// [`GOLDEN_TOL`]. Grid ties go to the point closest to `alpha`, then the
/// smallest.
fn maximize_on_interval(f: impl Fn(f64) -> f64, lo: f64, hi: f64, alpha: f64) -> f64 {
    if hi - lo < GOLDEN_TOL {
        return 0.5 * (lo + hi);
    }
    let n = ((hi - lo) / GRID_STEP).ceil() as usize;
    let mut best_x = lo;
    let mut best_v = f(lo);
    for i in 1..=n {
        let x = lo + (hi - lo) * i as f64 / n as f64;
        let v = f(x);
        let better = v > best_v + 1e-12
            || (v > best_v - 1e-12
                && ((x - alpha).abs() < (best_x - alpha).abs() - 1e-15
                    || ((x - alpha).abs() <= (best_x - alpha).abs() + 1e-15 && x < best_x)));
        if better {
            best_x = x;
            best_v = v;
        }
    }
    let step = (hi - lo) / n as f64;
    let (mut a, mut b) = ((best_x - step).max(lo), (best_x + step).min(hi));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > GOLDEN_TOL {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        }
    }
    let refined = 0.5 * (a + b);
    if f(refined) >= best_v { refined } else { best_x }
}

/// Sequential decentralized MFG policy: each institution, in rank order,
/// maximizes its own fairness-aware utility over its feasible interval.
pub fn mfg_policy(
    s: f64,
    dists: &GroupDistributions,
    insts: &[InstitutionConfig],
    target: FairnessTarget,
) -> Result<ActionProfile> {
    check_state(s)?;
    let mut actions: Vec<f64> = Vec::with_capacity(insts.len());
    let mut intervals = Vec::with_capacity(insts.len());
    for k in 0..insts.len() {
        let (lo, hi) = feasible_interval(k, s, &actions, insts)?;
        let f = |a: f64| {
            utility(k, s, a, &actions, dists, insts, target).unwrap_or(f64::NEG_INFINITY)
        };
        let a = maximize_on_interval(f, lo, hi, target.alpha());
        actions.push(a);
        intervals.push((lo, hi));
    }
    Ok(ActionProfile { actions, feasible_intervals: intervals })
}

/// Total utility of a joint action vector under the shared-pool constraints.
pub fn total_utility(
    s: f64,
    actions: &[f64],
    dists: &GroupDistributions,
    insts: &[InstitutionConfig],
    target: FairnessTarget,
) -> Result<f64> {
    let mut acc = 0.0;
    for k in 0..insts.len() {
        acc += utility(k, s, actions[k], &actions[..k], dists, insts, target)?;
    }
    Ok(acc)
}

/// Conditional feasible range of coordinate `k` given the other actions,
/// derived from the two group-budget constraints.
fn conditional_range(
    k: usize,
    s: f64,
    actions: &[f64],
    insts: &[InstitutionConfig],
) -> (f64, f64) {
    let mut used0 = 0.0;
    let mut used1 = 0.0;
    for (j, a) in actions.iter().enumerate() {
        if j != k {
            used0 += a * insts[j].capacity;
            used1 += (1.0 - a) * insts[j].capacity;
        }
    }
    let ck = insts[k].capacity;
    let lo = (1.0 - ((1.0 - s) - used1) / ck).clamp(0.0, 1.0);
    let hi = (((s - used0) / ck).max(0.0)).clamp(0.0, 1.0);
    (lo.min(hi), hi.max(lo))
}

fn repair_joint(actions: &mut [f64], s: f64, insts: &[InstitutionConfig]) -> bool {
    for _ in 0..2 {
        for k in 0..actions.len() {
            let (lo, hi) = conditional_range(k, s, actions, insts);
            actions[k] = actions[k].clamp(lo, hi);
        }
    }
    let used0: f64 = actions.iter().zip(insts).map(|(a, i)| a * i.capacity).sum();
    let used1: f64 = actions.iter().zip(insts).map(|(a, i)| (1.0 - a) * i.capacity).sum();
    used0 <= s + 1e-9 && used1 <= (1.0 - s) + 1e-9
}

/// Centralized CMFG policy: joint maximization of the summed utility under
/// the group-budget constraints, by coordinate ascent from several starts
/// (the MFG profile among them, so the CMFG total utility never falls below
/// the MFG one).
pub fn cmfg_policy(
    s: f64,
    dists: &GroupDistributions,
    insts: &[InstitutionConfig],
    target: FairnessTarget,
) -> Result<ActionProfile> {
    check_state(s)?;
    let k_total = insts.len();
    let mfg = mfg_policy(s, dists, insts, target)?;
    let mut starts: Vec<Vec<f64>> = vec![
        mfg.actions.clone(),
        vec![s; k_total],
        vec![target.alpha(); k_total],
        vec![0.0; k_total],
        vec![1.0; k_total],
    ];
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in starts.iter_mut() {
        if !repair_joint(start, s, insts) {
            continue;
        }
        let mut point = start.clone();
        let mut value = match total_utility(s, &point, dists, insts, target) {
            Ok(v) => v,
            Err(_) => continue,
        };
        for _ in 0..50 {
            let mut improved = false;
            for k in 0..k_total {
                let (lo, hi) = conditional_range(k, s, &point, insts);
                let f = |x: f64| {
                    let mut trial = point.clone();
                    trial[k] = x;
                    total_utility(s, &trial, dists, insts, target)
                        .unwrap_or(f64::NEG_INFINITY)
                };
                let x = maximize_on_interval(f, lo, hi, target.alpha());
                let v = f(x);
                if v > value + 1e-10 {
                    point[k] = x;
                    value = v;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        if best.as_ref().is_none_or(|(bv, _)| value > *bv) {
            best = Some((value, point));
        }
    }
    let (_, actions) =
        best.ok_or_else(|| Error::InconsistentPriors("no feasible joint action".into()))?;
    let mut intervals = Vec::with_capacity(k_total);
    for k in 0..k_total {
        intervals.push(feasible_interval(k, s, &actions[..k], insts)?);
    }
    Ok(ActionProfile { actions, feasible_intervals: intervals })
}

// ---------------------------------------------------------------------------
// Empirical engine
// ---------------------------------------------------------------------------

/// Realized scores of one round's pool, per group, sorted descending with
/// prefix sums for O(1) top-slice sums.
#[derive(Debug, Clone)]
pub struct ScoredPool {
    minority: Vec<f64>,
    majority: Vec<f64>,
    prefix_minority: Vec<f64>,
    prefix_majority: Vec<f64>,
}

impl ScoredPool {
    pub fn from_scores(mut minority: Vec<f64>, mut majority: Vec<f64>) -> Self {
        minority.sort_by(|a, b| b.partial_cmp(a).unwrap());
        majority.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let prefix = |xs: &[f64]| {
            let mut p = Vec::with_capacity(xs.len() + 1);
            p.push(0.0);
            let mut acc = 0.0;
            for &x in xs {
                acc += x;
                p.push(acc);
            }
            p
        };
        let prefix_minority = prefix(&minority);
        let prefix_majority = prefix(&majority);
        ScoredPool { minority, majority, prefix_minority, prefix_majority }
    }

    pub fn sample<R: rand::Rng + ?Sized>(
        dists: &GroupDistributions,
        n_minority: usize,
        n_majority: usize,
        rng: &mut R,
    ) -> Self {
        let minority = dists.minority.sample(n_minority, rng);
        let majority = dists.majority.sample(n_majority, rng);
        ScoredPool::from_scores(minority, majority)
    }

    pub fn n_minority(&self) -> usize {
        self.minority.len()
    }

    pub fn n_majority(&self) -> usize {
        self.majority.len()
    }

    pub fn total(&self) -> usize {
        self.minority.len() + self.majority.len()
    }

    fn top_sum_minority(&self, offset: usize, count: usize) -> f64 {
        self.prefix_minority[offset + count] - self.prefix_minority[offset]
    }

    fn top_sum_majority(&self, offset: usize, count: usize) -> f64 {
        self.prefix_majority[offset + count] - self.prefix_majority[offset]
    }
}

/// Integer admit counts per institution (minority, majority).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdmitCounts {
    pub per_institution: Vec<(usize, usize)>,
}

/// Outcome of an empirical-mode policy: realized actions, admitted scores
/// (descending, per institution per group) and realized rewards.
#[derive(Debug, Clone)]
pub struct EmpiricalOutcome {
    pub profile: ActionProfile,
    pub counts: AdmitCounts,
    /// Per institution: (minority admitted scores, majority admitted scores),
    /// each sorted descending.
    pub admitted: Vec<(Vec<f64>, Vec<f64>)>,
    pub rewards: Vec<f64>,
}

/// Number of slots institution `k` fills out of a pool of `total` applicants.
fn admit_quota(capacity: f64, total: usize) -> usize {
    ((capacity * total as f64) + 0.5).floor() as usize
}

fn quotas(insts: &[InstitutionConfig], total: usize) -> Vec<usize> {
    let mut q: Vec<usize> = insts.iter().map(|i| admit_quota(i.capacity, total)).collect();
    // Rounding can over-demand tiny pools; trim from the lowest rank up.
    let mut excess = q.iter().sum::<usize>().saturating_sub(total);
    for slot in q.iter_mut().rev() {
        if excess == 0 {
            break;
        }
        let cut = (*slot).min(excess);
        *slot -= cut;
        excess -= cut;
    }
    q
}

fn outcome_from_counts(
    pool: &ScoredPool,
    state: f64,
    counts: Vec<(usize, usize)>,
    insts: &[InstitutionConfig],
    target: FairnessTarget,
) -> EmpiricalOutcome {
    let mut actions = Vec::with_capacity(counts.len());
    let mut intervals = Vec::with_capacity(counts.len());
    let mut admitted = Vec::with_capacity(counts.len());
    let mut rewards = Vec::with_capacity(counts.len());
    let (mut m0, mut m1) = (0usize, 0usize);
    for (k, &(a0, a1)) in counts.iter().enumerate() {
        let total = a0 + a1;
        let action = if total > 0 { a0 as f64 / total as f64 } else { state };
        let rem0 = pool.n_minority() - m0;
        let rem1 = pool.n_majority() - m1;
        let interval = if total > 0 {
            (
                total.saturating_sub(rem1) as f64 / total as f64,
                (rem0.min(total)) as f64 / total as f64,
            )
        } else {
            (action, action)
        };
        let reward = if total > 0 {
            (pool.top_sum_minority(m0, a0) + pool.top_sum_majority(m1, a1)) / total as f64
        } else {
            0.0
        };
        let _ = target;
        let _ = insts[k];
        admitted.push((
            pool.minority[m0..m0 + a0].to_vec(),
            pool.majority[m1..m1 + a1].to_vec(),
        ));
        actions.push(action);
        intervals.push(interval);
        rewards.push(reward);
        m0 += a0;
        m1 += a1;
    }
    EmpiricalOutcome {
        profile: ActionProfile { actions, feasible_intervals: intervals },
        counts: AdmitCounts { per_institution: counts },
        admitted,
        rewards,
    }
}

/// Decentralized MFG policy on a realized pool: each institution, in rank
/// order, picks the integer minority count maximizing its empirical utility
/// over the remaining applicants. Ties go to the fraction closest to `alpha`,
/// then the smallest.
pub fn mfg_policy_empirical(
    pool: &ScoredPool,
    state: f64,
    insts: &[InstitutionConfig],
    target: FairnessTarget,
) -> EmpiricalOutcome {
    let quotas = quotas(insts, pool.total());
    let mut counts: Vec<(usize, usize)> = Vec::with_capacity(insts.len());
    let (mut m0, mut m1) = (0usize, 0usize);
    for (k, &quota) in quotas.iter().enumerate() {
        let rem0 = pool.n_minority() - m0;
        let rem1 = pool.n_majority() - m1;
        let quota = quota.min(rem0 + rem1);
        if quota == 0 {
            counts.push((0, 0));
            continue;
        }
        let lo = quota.saturating_sub(rem1);
        let hi = quota.min(rem0);
        let lambda = insts[k].fairness_weight;
        let mut best = (f64::NEG_INFINITY, lo);
        for a0 in lo..=hi {
            let a = a0 as f64 / quota as f64;
            let v = (pool.top_sum_minority(m0, a0) + pool.top_sum_majority(m1, quota - a0))
                / quota as f64
                - lambda * fairness_loss(a, target);
            let better = v > best.0 + 1e-12
                || (v > best.0 - 1e-12 && {
                    let ba = best.1 as f64 / quota as f64;
                    (a - target.alpha()).abs() < (ba - target.alpha()).abs()
                });
            if better {
                best = (v, a0);
            }
        }
        let a0 = best.1;
        counts.push((a0, quota - a0));
        m0 += a0;
        m1 += quota - a0;
    }
    outcome_from_counts(pool, state, counts, insts, target)
}

fn empirical_total_utility(
    pool: &ScoredPool,
    counts: &[(usize, usize)],
    insts: &[InstitutionConfig],
    target: FairnessTarget,
) -> f64 {
    let (mut m0, mut m1) = (0usize, 0usize);
    let mut acc = 0.0;
    for (k, &(a0, a1)) in counts.iter().enumerate() {
        let total = a0 + a1;
        if total > 0 {
            let a = a0 as f64 / total as f64;
            acc += (pool.top_sum_minority(m0, a0) + pool.top_sum_majority(m1, a1))
                / total as f64
                - insts[k].fairness_weight * fairness_loss(a, target);
        }
        m0 += a0;
        m1 += a1;
    }
    acc
}

/// Centralized CMFG policy on a realized pool: coordinate ascent over the
/// joint integer minority counts, from several starts including the MFG
/// solution.
pub fn cmfg_policy_empirical(
    pool: &ScoredPool,
    state: f64,
    insts: &[InstitutionConfig],
    target: FairnessTarget,
) -> EmpiricalOutcome {
    let quotas = quotas(insts, pool.total());
    let mfg = mfg_policy_empirical(pool, state, insts, target);
    let clamp_feasible = |counts: &mut Vec<(usize, usize)>| {
        for _ in 0..2 {
            for k in 0..counts.len() {
                let others0: usize =
                    counts.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, c)| c.0).sum();
                let others1: usize =
                    counts.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, c)| c.1).sum();
                let quota = quotas[k];
                let lo = quota.saturating_sub(pool.n_majority().saturating_sub(others1));
                let hi = quota.min(pool.n_minority().saturating_sub(others0));
                if lo > hi {
                    return false;
                }
                let a0 = counts[k].0.clamp(lo, hi);
                counts[k] = (a0, quota - a0);
            }
        }
        true
    };
    let fraction_start = |f: f64| -> Vec<(usize, usize)> {
        quotas
            .iter()
            .map(|&q| {
                let a0 = (((f * q as f64) + 0.5).floor() as usize).min(q);
                (a0, q - a0)
            })
            .collect()
    };
    let starts = vec![
        mfg.counts.per_institution.clone(),
        fraction_start(target.alpha()),
        fraction_start(state),
        fraction_start(0.0),
        fraction_start(1.0),
    ];
    let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
    for start in starts {
        let mut counts = start;
        if !clamp_feasible(&mut counts) {
            continue;
        }
        let mut value = empirical_total_utility(pool, &counts, insts, target);
        for _ in 0..50 {
            let mut improved = false;
            for k in 0..counts.len() {
                let others0: usize =
                    counts.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, c)| c.0).sum();
                let others1: usize =
                    counts.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, c)| c.1).sum();
                let quota = quotas[k];
                let lo = quota.saturating_sub(pool.n_majority().saturating_sub(others1));
                let hi = quota.min(pool.n_minority().saturating_sub(others0));
                let current = counts[k].0;
                let mut local_best = (value, current);
                for a0 in lo..=hi {
                    if a0 == current {
                        continue;
                    }
                    let mut trial = counts.clone();
                    trial[k] = (a0, quota - a0);
                    let v = empirical_total_utility(pool, &trial, insts, target);
                    if v > local_best.0 + 1e-12 {
                        local_best = (v, a0);
                    }
                }
                if local_best.1 != current {
                    counts[k] = (local_best.1, quota - local_best.1);
                    value = local_best.0;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        if best.as_ref().is_none_or(|(bv, _)| value > *bv) {
            best = Some((value, counts));
        }
    }
    let (_, counts) = best.expect("MFG start is always feasible");
    outcome_from_counts(pool, state, counts, insts, target)
}
