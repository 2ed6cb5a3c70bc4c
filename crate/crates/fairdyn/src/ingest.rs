//! Semi-synthetic score distributions from tabular outcome data.
//!
//! Pipeline: read a delimited table, binarize the protected attribute
//! (configured majority value vs everyone else), standardize the numeric
//! features, fit a logistic regression of the outcome on the features, score
//! every applicant with the pre-sigmoid logit, and fit one Gaussian per
//! group to the scores.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::dist::ScoreDistribution;
use crate::policy::GroupDistributions;
use crate::{Error, Result};

/// Column-role mapping for the input table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub race_column: String,
    pub label_column: String,
    pub feature_columns: Vec<String>,
    /// Race value mapped to group 1; every other value is group 0.
    #[serde(default = "default_majority")]
    pub majority_value: String,
}

fn default_majority() -> String {
    "white".to_string()
}

/// One usable row after preprocessing.
#[derive(Debug, Clone, PartialEq)]
pub struct ApplicantRecord {
    /// Standardized numeric features.
    pub features: Vec<f64>,
    /// 0 = minority, 1 = majority.
    pub group: u8,
    /// Binary outcome.
    pub label: u8,
}

fn missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c.eq_ignore_ascii_case("na") || c.eq_ignore_ascii_case("nan")
}

fn parse_label(cell: &str) -> Option<u8> {
    let c = cell.trim();
    match c.to_ascii_lowercase().as_str() {
        "true" | "yes" => return Some(1),
        "false" | "no" => return Some(0),
        _ => {}
    }
    let v: f64 = c.parse().ok()?;
    if v.is_finite() {
        Some(u8::from(v >= 0.5))
    } else {
        None
    }
}

/// Reads the table, drops rows with missing required fields, binarizes the
/// race column and standardizes each feature to zero mean, unit variance.
pub fn preprocess<R: Read>(input: R, config: &IngestConfig) -> Result<Vec<ApplicantRecord>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| Error::Ingest(format!("reading header: {e}")))?
        .clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Ingest(format!("missing required column `{name}`")))
    };
    let race_idx = find(&config.race_column)?;
    let label_idx = find(&config.label_column)?;
    let feature_idx: Vec<usize> =
        config.feature_columns.iter().map(|c| find(c)).collect::<Result<_>>()?;
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Ingest(format!("reading row: {e}")))?;
        let get = |i: usize| row.get(i).unwrap_or("");
        if missing(get(race_idx)) || missing(get(label_idx)) {
            continue;
        }
        let Some(label) = parse_label(get(label_idx)) else { continue };
        let group = u8::from(get(race_idx).trim().eq_ignore_ascii_case(&config.majority_value));
        let mut features = Vec::with_capacity(feature_idx.len());
        let mut ok = true;
        for &i in &feature_idx {
            let cell = get(i);
            if missing(cell) {
                ok = false;
                break;
            }
            match cell.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => features.push(v),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            records.push(ApplicantRecord { features, group, label });
        }
    }
    standardize(&mut records);
    Ok(records)
}

fn standardize(records: &mut [ApplicantRecord]) {
    if records.is_empty() {
        return;
    }
    let d = records[0].features.len();
    let n = records.len() as f64;
    for j in 0..d {
        let mean = records.iter().map(|r| r.features[j]).sum::<f64>() / n;
        let var = records.iter().map(|r| (r.features[j] - mean).powi(2)).sum::<f64>()
            / (n - 1.0).max(1.0);
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for r in records.iter_mut() {
            r.features[j] = (r.features[j] - mean) / sd;
        }
    }
}

/// Fitted logistic scoring model. The applicant score is the pre-sigmoid
/// logit `w . x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LogisticModel {
    pub fn score(&self, features: &[f64]) -> f64 {
        self.weights.iter().zip(features).map(|(w, x)| w * x).sum::<f64>() + self.intercept
    }
}

/// L2 strength keeping the optimum finite on separable data.
const L2: f64 = 1e-4;
const GRAD_TOL: f64 = 1e-6;
const MAX_ITERS: usize = 10_000;

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean penalized log-likelihood; `params` is `[weights..., intercept]`.
pub(crate) fn log_likelihood(records: &[ApplicantRecord], params: &[f64]) -> f64 {
    let d = params.len() - 1;
    let n = records.len() as f64;
    let mut ll = 0.0;
    for r in records {
        let z: f64 =
            params[..d].iter().zip(&r.features).map(|(w, x)| w * x).sum::<f64>() + params[d];
        // log p(y|z) = y z - log(1 + e^z), computed stably
        ll += f64::from(r.label) * z - if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
    }
    ll / n - 0.5 * L2 * params[..d].iter().map(|w| w * w).sum::<f64>()
}

/// Analytic gradient of [`log_likelihood`].
pub(crate) fn log_likelihood_gradient(records: &[ApplicantRecord], params: &[f64]) -> Vec<f64> {
    let d = params.len() - 1;
    let n = records.len() as f64;
    let mut grad = vec![0.0; d + 1];
    for r in records {
        let z: f64 =
            params[..d].iter().zip(&r.features).map(|(w, x)| w * x).sum::<f64>() + params[d];
        let residual = f64::from(r.label) - sigmoid(z);
        for j in 0..d {
            grad[j] += residual * r.features[j];
        }
        grad[d] += residual;
    }
    for g in grad.iter_mut() {
        *g /= n;
    }
    for j in 0..d {
        grad[j] -= L2 * params[j];
    }
    grad
}

fn cholesky_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= a[i][k] * a[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                a[i][j] = sum.sqrt();
            } else {
                a[i][j] = sum / a[j][j];
            }
        }
    }
    for i in 0..n {
        for k in 0..i {
            b[i] -= a[i][k] * b[k];
        }
        b[i] /= a[i][i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            b[i] -= a[k][i] * b[k];
        }
        b[i] /= a[i][i];
    }
    Some(b)
}

/// Maximizes the penalized log-likelihood from zero initialization with
/// damped Newton steps, stopping at gradient norm below 1e-6 or after 10^4
/// iterations. Deterministic.
pub fn fit_logistic(records: &[ApplicantRecord]) -> Result<LogisticModel> {
    if records.len() < 2 {
        return Err(Error::Ingest("need at least 2 records".into()));
    }
    let labels: std::collections::BTreeSet<u8> = records.iter().map(|r| r.label).collect();
    if labels.len() < 2 {
        return Err(Error::Ingest("both outcome classes must be present".into()));
    }
    let d = records[0].features.len();
    let n = records.len() as f64;
    let mut params = vec![0.0; d + 1];
    let mut ll = log_likelihood(records, &params);
    for _ in 0..MAX_ITERS {
        let grad = log_likelihood_gradient(records, &params);
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm < GRAD_TOL {
            break;
        }
        // Negative Hessian of the penalized mean log-likelihood.
        let mut h = vec![vec![0.0; d + 1]; d + 1];
        for r in records {
            let z: f64 =
                params[..d].iter().zip(&r.features).map(|(w, x)| w * x).sum::<f64>() + params[d];
            let p = sigmoid(z);
            let s = p * (1.0 - p) / n;
            for i in 0..=d {
                let xi = if i < d { r.features[i] } else { 1.0 };
                for j in 0..=i {
                    let xj = if j < d { r.features[j] } else { 1.0 };
                    h[i][j] += s * xi * xj;
                }
            }
        }
        for i in 0..d {
            h[i][i] += L2;
        }
        h[d][d] += 1e-12;
        for i in 0..=d {
            for j in i + 1..=d {
                h[i][j] = h[j][i];
            }
        }
        let Some(step) = cholesky_solve(h, grad.clone()) else {
            return Err(Error::Ingest("singular Hessian in logistic fit".into()));
        };
        // Backtrack until the objective does not decrease.
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> =
                params.iter().zip(&step).map(|(p, s)| p + scale * s).collect();
            let trial_ll = log_likelihood(records, &trial);
            if trial_ll >= ll - 1e-15 {
                params = trial;
                ll = trial_ll;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(LogisticModel { weights: params[..d].to_vec(), intercept: params[d] })
}

/// Scores every record with the fitted logit and fits a Gaussian per group.
pub fn extract_score_distributions(
    records: &[ApplicantRecord],
    model: &LogisticModel,
) -> Result<GroupDistributions> {
    let scores = |group: u8| -> Vec<f64> {
        records
            .iter()
            .filter(|r| r.group == group)
            .map(|r| model.score(&r.features))
            .collect()
    };
    let minority = ScoreDistribution::fit_gaussian(&scores(0))?;
    let majority = ScoreDistribution::fit_gaussian(&scores(1))?;
    Ok(GroupDistributions { minority, majority })
}

/// Full pipeline: table in, per-group Gaussians out.
pub fn ingest<R: Read>(input: R, config: &IngestConfig) -> Result<GroupDistributions> {
    let records = preprocess(input, config)?;
    let model = fit_logistic(&records)?;
    extract_score_distributions(&records, &model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn config() -> IngestConfig {
        IngestConfig {
            race_column: "race".into(),
            label_column: "pass".into(),
            feature_columns: vec!["lsat".into(), "gpa".into()],
            majority_value: "white".into(),
        }
    }

    const TABLE: &str = "\
race,pass,lsat,gpa
white,1,40,3.5
black,0,30,2.9
hisp,1,35,3.2
white,0,28,2.5
white,,33,3.1
,1,36,3.4
asian,1,NA,3.0
white,1,38,3.3
";

    #[test]
    fn preprocess_binarizes_and_drops() {
        let records = preprocess(TABLE.as_bytes(), &config()).unwrap();
        // 3 rows dropped: missing label, missing race, missing feature.
        assert_eq!(records.len(), 5);
        assert_eq!(
            records.iter().map(|r| r.group).collect::<Vec<_>>(),
            vec![1, 0, 0, 1, 1]
        );
        assert_eq!(
            records.iter().map(|r| r.label).collect::<Vec<_>>(),
            vec![1, 0, 1, 0, 1]
        );
        // standardized columns: zero mean, unit variance
        for j in 0..2 {
            let n = records.len() as f64;
            let mean = records.iter().map(|r| r.features[j]).sum::<f64>() / n;
            let var =
                records.iter().map(|r| r.features[j].powi(2)).sum::<f64>() / (n - 1.0);
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn preprocess_rejects_missing_column() {
        let mut cfg = config();
        cfg.label_column = "outcome".into();
        let err = preprocess(TABLE.as_bytes(), &cfg).unwrap_err();
        assert!(err.to_string().contains("outcome"));
    }

    fn separable_records() -> Vec<ApplicantRecord> {
        // 1-D, threshold at 0: x < 0 fails, x > 0 passes.
        let mut records = Vec::new();
        for i in 1..=20 {
            let x = i as f64 / 10.0;
            records.push(ApplicantRecord { features: vec![x], group: 1, label: 1 });
            records.push(ApplicantRecord { features: vec![-x], group: 0, label: 0 });
        }
        records
    }

    #[test]
    fn fit_separates_toy_data() {
        let records = separable_records();
        let model = fit_logistic(&records).unwrap();
        let correct = records
            .iter()
            .filter(|r| u8::from(model.score(&r.features) > 0.0) == r.label)
            .count();
        assert_eq!(correct, records.len());
        let mut params = model.weights.clone();
        params.push(model.intercept);
        let grad = log_likelihood_gradient(&records, &params);
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        assert!(norm < 1e-6, "gradient norm {norm}");
    }

    #[test]
    fn fit_rejects_single_class() {
        let records: Vec<ApplicantRecord> = (0..10)
            .map(|i| ApplicantRecord { features: vec![i as f64], group: 0, label: 1 })
            .collect();
        assert!(fit_logistic(&records).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let records: Vec<ApplicantRecord> = (0..25)
                .map(|_| ApplicantRecord {
                    features: (0..3).map(|_| rng.random_range(-2.0..2.0)).collect(),
                    group: 0,
                    label: u8::from(rng.random_range(0.0..1.0) > 0.5),
                })
                .collect();
            let params: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let grad = log_likelihood_gradient(&records, &params);
            let h = 1e-6;
            for j in 0..4 {
                let mut plus = params.clone();
                plus[j] += h;
                let mut minus = params.clone();
                minus[j] -= h;
                let fd = (log_likelihood(&records, &plus) - log_likelihood(&records, &minus))
                    / (2.0 * h);
                let scale = grad[j].abs().max(1.0);
                assert!((grad[j] - fd).abs() / scale < 1e-6, "j={j}: {} vs {fd}", grad[j]);
            }
        }
    }

    #[test]
    fn label_shuffle_collapses_weights() {
        let records = separable_records();
        let model = fit_logistic(&records).unwrap();
        // Random labels independent of the features.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let shuffled: Vec<ApplicantRecord> = records
            .iter()
            .map(|r| ApplicantRecord {
                features: r.features.clone(),
                group: r.group,
                label: u8::from(rng.random_range(0.0..1.0) > 0.5),
            })
            .collect();
        let null_model = fit_logistic(&shuffled).unwrap();
        assert!(null_model.weights[0].abs() < 0.1 * model.weights[0].abs());
    }

    #[test]
    fn identical_groups_identical_gaussians() {
        let mut records = separable_records();
        // duplicate every record into the other group
        let dup: Vec<ApplicantRecord> = records
            .iter()
            .map(|r| ApplicantRecord {
                features: r.features.clone(),
                group: 1 - r.group,
                label: r.label,
            })
            .collect();
        records.extend(dup);
        let model = fit_logistic(&records).unwrap();
        let dists = extract_score_distributions(&records, &model).unwrap();
        // Same score multiset per group; moments agree up to summation order.
        match (&dists.minority, &dists.majority) {
            (
                crate::dist::ScoreDistribution::Gaussian { mean: m0, variance: v0 },
                crate::dist::ScoreDistribution::Gaussian { mean: m1, variance: v1 },
            ) => {
                assert!((m0 - m1).abs() < 1e-12);
                assert!((v0 - v1).abs() < 1e-12);
            }
            other => panic!("expected Gaussians, got {other:?}"),
        }
    }

    #[test]
    fn pipeline_is_deterministic() {
        let a = ingest(TABLE.as_bytes(), &config()).unwrap();
        let b = ingest(TABLE.as_bytes(), &config()).unwrap();
        assert_eq!(a, b);
    }
}
