//! Role-model reinforcement punishes decentralized selection: each
//! institution pushes minority admits toward its own lower ranks, so the
//! visible top slice underrepresents them and the pool mean collapses.
//! Coordinated selection avoids the collapse.

use fairdyn::config::Preset;
use fairdyn::policy::PolicyKind;
use fairdyn::sim::run_batch;

fn final_theta(config: &fairdyn::ExperimentConfig) -> f64 {
    let summary =
        run_batch(&config.to_sim_params(), config.instances, config.base_seed, config.horizon)
            .unwrap();
    let tail = &summary.rows[summary.rows.len() - 50..];
    tail.iter().map(|r| r.mean_theta).sum::<f64>() / 50.0
}

fn main() {
    let decentralized = Preset::Fig4.config();
    let mut coordinated = Preset::Fig4.config();
    coordinated.policy = PolicyKind::Cmfg;

    println!("role-model reinforcement, top fraction r = 0.5, theta0 = 0.25");
    println!("decentralized final theta: {:.4}", final_theta(&decentralized));
    println!("coordinated   final theta: {:.4}", final_theta(&coordinated));
}
