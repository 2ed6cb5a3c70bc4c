//! Fit per-group score distributions from labeled tabular data, then run a
//! short simulation on them. The score of a row is the linear predictor of
//! an L2-regularized logistic regression on the standardized features.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use fairdyn::config::Preset;
use fairdyn::ingest::{ingest, IngestConfig};
use fairdyn::sim::run_batch;

fn synthetic_csv() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut csv = String::from("race,gpa,exam,label\n");
    for i in 0..4000 {
        let (race, shift) = if i % 4 == 0 { ("black", -0.2) } else { ("white", 0.0) };
        let gpa = Normal::new(3.0 + shift, 0.4).unwrap().sample(&mut rng);
        let exam = Normal::new(150.0 + 20.0 * shift, 10.0).unwrap().sample(&mut rng);
        let p = 1.0 / (1.0 + f64::exp(-1.5 * (gpa + exam / 50.0 - 6.0)));
        let label = u8::from(rand::Rng::random_range(&mut rng, 0.0..1.0) < p);
        writeln!(csv, "{race},{gpa:.3},{exam:.1},{label}").unwrap();
    }
    csv
}

fn main() {
    let config = IngestConfig {
        race_column: "race".into(),
        label_column: "label".into(),
        feature_columns: vec!["gpa".into(), "exam".into()],
        majority_value: "white".into(),
    };
    let dists = ingest(synthetic_csv().as_bytes(), &config).unwrap();
    println!("fitted minority scores: mean {:.3}", dists.minority.mean());
    println!("fitted majority scores: mean {:.3}", dists.majority.mean());

    let mut experiment = Preset::Fig5.config();
    experiment.distributions = dists;
    experiment.horizon = 200;
    let summary = run_batch(
        &experiment.to_sim_params(),
        experiment.instances,
        experiment.base_seed,
        experiment.horizon,
    )
    .unwrap();
    let tail = &summary.rows[summary.rows.len() - 50..];
    let theta = tail.iter().map(|r| r.mean_theta).sum::<f64>() / 50.0;
    println!("final 50-round mean theta on fitted distributions: {theta:.4}");
}
