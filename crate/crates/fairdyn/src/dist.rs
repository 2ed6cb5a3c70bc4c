//! Group-specific score distributions.
//!
//! Provides the analytic primitives the policy engine needs: CDF, inverse
//! CDF, truncated conditional means and seeded sampling, for Gaussian and
//! empirical (sorted-sample) score laws. Distributions are immutable after
//! construction and safe to share across parallel workers; sampling always
//! takes an explicit random stream.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// One end of a (possibly unbounded) score interval.
///
/// Infinite bounds are an explicit sentinel rather than a large float, so
/// tail integrals never overflow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bound {
    Unbounded,
    Finite(f64),
}

impl Bound {
    /// Finite value, or `default` when unbounded.
    pub fn finite_or(self, default: f64) -> f64 {
        match self {
            Bound::Unbounded => default,
            Bound::Finite(x) => x,
        }
    }
}

/// A group's score law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScoreDistribution {
    Gaussian { mean: f64, variance: f64 },
    Empirical { sample: Vec<f64> },
}

impl ScoreDistribution {
    /// Gaussian score law; `variance` must be strictly positive.
    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() || variance <= 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "Gaussian requires finite mean and variance > 0, got ({mean}, {variance})"
            )));
        }
        Ok(ScoreDistribution::Gaussian { mean, variance })
    }

    /// Empirical score law from a non-empty sample; the sample is sorted.
    pub fn empirical(mut sample: Vec<f64>) -> Result<Self> {
        if sample.is_empty() || sample.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidDistribution(
                "empirical sample must be non-empty and finite".into(),
            ));
        }
        sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(ScoreDistribution::Empirical { sample })
    }

    /// Fit a Gaussian by sample mean and unbiased sample variance.
    pub fn fit_gaussian(scores: &[f64]) -> Result<Self> {
        if scores.len() < 2 {
            return Err(Error::InvalidDistribution(format!(
                "fit_gaussian needs at least 2 scores, got {}",
                scores.len()
            )));
        }
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let variance = scores.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        if variance <= 0.0 {
            return Err(Error::InvalidDistribution(
                "fit_gaussian: sample has zero variance".into(),
            ));
        }
        ScoreDistribution::gaussian(mean, variance)
    }

    pub fn mean(&self) -> f64 {
        match self {
            ScoreDistribution::Gaussian { mean, .. } => *mean,
            ScoreDistribution::Empirical { sample } => {
                sample.iter().sum::<f64>() / sample.len() as f64
            }
        }
    }

    /// Cumulative distribution function, monotone non-decreasing in `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            ScoreDistribution::Gaussian { mean, variance } => {
                std_normal_cdf((x - mean) / variance.sqrt())
            }
            ScoreDistribution::Empirical { sample } => {
                let below = sample.partition_point(|&v| v <= x);
                below as f64 / sample.len() as f64
            }
        }
    }

    /// Inverse CDF.
    ///
    /// For the Gaussian kind `p` must lie strictly inside (0, 1); the
    /// empirical kind accepts the closed interval and uses the
    /// midpoint-quantile convention.
    pub fn inv_cdf(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::ProbabilityOutOfRange(p));
        }
        match self {
            ScoreDistribution::Gaussian { mean, variance } => {
                if p <= 0.0 || p >= 1.0 {
                    return Err(Error::ProbabilityOutOfRange(p));
                }
                Ok(mean + variance.sqrt() * std_normal_inv_cdf(p))
            }
            ScoreDistribution::Empirical { sample } => {
                let n = sample.len() as f64;
                let idx = (p * n - 0.5).round().clamp(0.0, n - 1.0) as usize;
                Ok(sample[idx])
            }
        }
    }

    /// Conditional expectation `E[X | lo <= X <= hi]`.
    ///
    /// Rejects intervals carrying zero probability mass, which signal a
    /// degenerate admission slice upstream.
    pub fn truncated_mean(&self, lo: Bound, hi: Bound) -> Result<f64> {
        if let (Bound::Finite(a), Bound::Finite(b)) = (lo, hi) {
            if a >= b {
                return Err(Error::DegenerateSlice);
            }
        }
        match self {
            ScoreDistribution::Gaussian { mean, variance } => {
                let sd = variance.sqrt();
                let a = match lo {
                    Bound::Unbounded => f64::NEG_INFINITY,
                    Bound::Finite(x) => (x - mean) / sd,
                };
                let b = match hi {
                    Bound::Unbounded => f64::INFINITY,
                    Bound::Finite(x) => (x - mean) / sd,
                };
                // Phi(b) - Phi(a) via complementary error functions for tail stability.
                let mass = 0.5 * (erfc_ext(a / SQRT_2) - erfc_ext(b / SQRT_2));
                if mass <= 0.0 || !mass.is_finite() {
                    return Err(Error::DegenerateSlice);
                }
                Ok(mean + sd * (std_normal_pdf(a) - std_normal_pdf(b)) / mass)
            }
            ScoreDistribution::Empirical { sample } => {
                let lo = lo.finite_or(f64::NEG_INFINITY);
                let hi = hi.finite_or(f64::INFINITY);
                let mut sum = 0.0;
                let mut count = 0usize;
                for &x in sample {
                    if x >= lo && x <= hi {
                        sum += x;
                        count += 1;
                    }
                }
                if count == 0 {
                    return Err(Error::DegenerateSlice);
                }
                Ok(sum / count as f64)
            }
        }
    }

    /// `n` i.i.d. draws; reproducible given the rng seed.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        match self {
            ScoreDistribution::Gaussian { mean, variance } => {
                let normal = Normal::new(*mean, variance.sqrt()).expect("validated at construction");
                (0..n).map(|_| normal.sample(rng)).collect()
            }
            ScoreDistribution::Empirical { sample } => (0..n)
                .map(|_| sample[rng.random_range(0..sample.len())])
                .collect(),
        }
    }
}

fn std_normal_pdf(z: f64) -> f64 {
    if z.is_infinite() {
        0.0
    } else {
        INV_SQRT_2PI * (-0.5 * z * z).exp()
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc_ext(-z / SQRT_2)
}

fn erfc_ext(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        2.0
    } else if x == f64::INFINITY {
        0.0
    } else {
        erfc(x)
    }
}

/// Standard normal quantile: Acklam's rational approximation refined by
/// Newton steps against the erfc-based CDF. Round-trips to better than 1e-9.
fn std_normal_inv_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    if p > 0.5 {
        return -std_normal_inv_cdf(1.0 - p);
    }
    let mut x = acklam(p);
    for _ in 0..2 {
        let pdf = std_normal_pdf(x);
        if pdf <= 0.0 {
            break;
        }
        x -= (std_normal_cdf(x) - p) / pdf;
    }
    x
}

fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: standard normal CDF by Simpson quadrature on the
    /// density from -10 to x.
    fn cdf_oracle(x: f64) -> f64 {
        let lo = -10.0f64;
        let n = 40_000usize;
        let h = (x - lo) / n as f64;
        let f = |t: f64| INV_SQRT_2PI * (-0.5 * t * t).exp();
        let mut acc = f(lo) + f(x);
        for i in 1..n {
            let t = lo + i as f64 * h;
            acc += if i % 2 == 1 { 4.0 * f(t) } else { 2.0 * f(t) };
        }
        acc * h / 3.0
    }

    /// Independent oracle: quantile by bisection on the quadrature CDF.
    fn inv_cdf_oracle(p: f64) -> f64 {
        let (mut lo, mut hi) = (-10.0f64, 10.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if cdf_oracle(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn gaussian_cdf_at_mean_and_tail() {
        let d = ScoreDistribution::gaussian(5.0, 1.0).unwrap();
        assert!((d.cdf(5.0) - 0.5).abs() < 1e-12);
        assert!((d.cdf(1e6) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_cdf_matches_quadrature_oracle() {
        let d = ScoreDistribution::gaussian(0.0, 1.0).unwrap();
        // Frozen from the quadrature oracle; 0.8413 per the tabulated value.
        assert!((d.cdf(1.0) - 0.841_344_746_068_5).abs() < 1e-9);
        for x in [-3.0, -1.2, -0.3, 0.7, 2.5] {
            assert!((d.cdf(x) - cdf_oracle(x)).abs() < 1e-9, "x={x}");
        }
    }

    #[test]
    fn gaussian_inv_cdf_median_and_roundtrip() {
        let d = ScoreDistribution::gaussian(5.0, 1.0).unwrap();
        assert!((d.inv_cdf(0.5).unwrap() - 5.0).abs() < 1e-12);
        let p = d.cdf(6.3);
        assert!((d.inv_cdf(p).unwrap() - 6.3).abs() < 1e-9);
    }

    #[test]
    fn gaussian_inv_cdf_matches_bisection_oracle() {
        let d = ScoreDistribution::gaussian(0.0, 1.0).unwrap();
        // 1.95996 at p = 0.975; frozen from the bisection oracle.
        assert!((d.inv_cdf(0.975).unwrap() - 1.959_963_984_540).abs() < 1e-6);
        for p in [0.01, 0.1, 0.35, 0.8, 0.99] {
            assert!(
                (d.inv_cdf(p).unwrap() - inv_cdf_oracle(p)).abs() < 1e-6,
                "p={p}"
            );
        }
    }

    #[test]
    fn inv_cdf_rejects_out_of_range() {
        let d = ScoreDistribution::gaussian(0.0, 1.0).unwrap();
        assert!(d.inv_cdf(-0.1).is_err());
        assert!(d.inv_cdf(1.1).is_err());
        assert!(d.inv_cdf(0.0).is_err());
    }

    #[test]
    fn truncated_mean_full_support_and_symmetric() {
        let d = ScoreDistribution::gaussian(5.0, 1.0).unwrap();
        let full = d.truncated_mean(Bound::Unbounded, Bound::Unbounded).unwrap();
        assert!((full - 5.0).abs() < 1e-12);
        let sym = d
            .truncated_mean(Bound::Finite(4.0), Bound::Finite(6.0))
            .unwrap();
        assert!((sym - 5.0).abs() < 1e-12);
    }

    #[test]
    fn truncated_mean_half_normal() {
        let d = ScoreDistribution::gaussian(0.0, 1.0).unwrap();
        let m = d.truncated_mean(Bound::Finite(0.0), Bound::Unbounded).unwrap();
        // E[X | X >= 0] = sqrt(2/pi); cross-checked by Monte Carlo below.
        let expect = (2.0 / std::f64::consts::PI).sqrt();
        assert!((m - expect).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = d.sample(2_000_000, &mut rng);
        let kept: Vec<f64> = draws.into_iter().filter(|&x| x >= 0.0).collect();
        let mc = kept.iter().sum::<f64>() / kept.len() as f64;
        assert!((m - mc).abs() < 2e-3);
    }

    #[test]
    fn truncated_mean_rejects_degenerate_slice() {
        let d = ScoreDistribution::gaussian(0.0, 1.0).unwrap();
        assert!(d
            .truncated_mean(Bound::Finite(1.0), Bound::Finite(1.0))
            .is_err());
        assert!(d
            .truncated_mean(Bound::Finite(2.0), Bound::Finite(1.0))
            .is_err());
    }

    #[test]
    fn sample_empty_and_sample_mean() {
        let d = ScoreDistribution::gaussian(5.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(d.sample(0, &mut rng).is_empty());
        let xs = d.sample(1_000_000, &mut rng);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 5.0).abs() < 0.01);
    }

    #[test]
    fn empirical_sampling_frequencies() {
        let d = ScoreDistribution::empirical(vec![1.0, 2.0, 3.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs = d.sample(300_000, &mut rng);
        for v in [1.0, 2.0, 3.0] {
            let freq = xs.iter().filter(|&&x| x == v).count() as f64 / xs.len() as f64;
            assert!((freq - 1.0 / 3.0).abs() < 0.01, "value {v}: {freq}");
        }
    }

    #[test]
    fn empirical_cdf_and_quantile() {
        let d = ScoreDistribution::empirical(vec![3.0, 1.0, 2.0]).unwrap();
        assert_eq!(d.cdf(0.5), 0.0);
        assert_eq!(d.cdf(1.0), 1.0 / 3.0);
        assert_eq!(d.cdf(10.0), 1.0);
        assert_eq!(d.inv_cdf(0.0).unwrap(), 1.0);
        assert_eq!(d.inv_cdf(0.5).unwrap(), 2.0);
        assert_eq!(d.inv_cdf(1.0).unwrap(), 3.0);
    }

    #[test]
    fn fit_gaussian_two_points_and_errors() {
        let d = ScoreDistribution::fit_gaussian(&[0.0, 2.0]).unwrap();
        assert_eq!(d, ScoreDistribution::Gaussian { mean: 1.0, variance: 2.0 });
        assert!(ScoreDistribution::fit_gaussian(&[5.0, 5.0, 5.0]).is_err());
        assert!(ScoreDistribution::fit_gaussian(&[1.0]).is_err());
    }

    #[test]
    fn fit_gaussian_recovers_law_school_moments() {
        let truth = ScoreDistribution::gaussian(-1.46, 2.73).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs = truth.sample(100_000, &mut rng);
        match ScoreDistribution::fit_gaussian(&xs).unwrap() {
            ScoreDistribution::Gaussian { mean, variance } => {
                assert!((mean + 1.46).abs() < 0.02);
                assert!((variance - 2.73).abs() < 0.05);
            }
            _ => unreachable!(),
        }
    }
}
