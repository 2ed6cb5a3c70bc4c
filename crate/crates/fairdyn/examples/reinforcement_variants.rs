//! Compare how fast the pool reaches the fairness target under the four
//! reinforcement models, holding everything else at the baseline setup.

use fairdyn::config::Preset;
use fairdyn::evolve::EvolutionModel;
use fairdyn::sim::{run_batch, BatchSummary};

fn rounds_to_band(summary: &BatchSummary, alpha: f64, band: f64) -> usize {
    summary
        .rows
        .iter()
        .position(|r| (r.mean_theta - alpha).abs() < band)
        .unwrap_or(summary.rows.len())
}

fn main() {
    let variants = [
        ("pure", EvolutionModel::Pure),
        ("order-based beta=0.8", EvolutionModel::OrderBased { beta: 0.8 }),
        ("weighted (equal)", EvolutionModel::Weighted { weights: vec![1.0, 1.0, 1.0] }),
        ("role-model r=0.8", EvolutionModel::RoleModel { fraction: 0.8 }),
    ];
    for (name, model) in variants {
        let mut config = Preset::Fig1a.config();
        config.evolution.model = model;
        let summary =
            run_batch(&config.to_sim_params(), config.instances, config.base_seed, config.horizon)
                .unwrap();
        let rounds = rounds_to_band(&summary, 0.4, 0.02);
        let final_theta = summary.rows.last().unwrap().mean_theta;
        println!("{name:<22} rounds to |theta - 0.4| < 0.02: {rounds:>4}, final theta {final_theta:.4}");
    }
}
