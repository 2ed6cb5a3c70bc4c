//! With distinct group distributions the equilibrium sits below the
//! fairness target, and a larger fairness weight pulls it closer.

use fairdyn::config::Preset;
use fairdyn::sim::{detect_equilibrium, run_batch};

fn main() {
    println!("minority N(4.9, 1.1), majority N(5, 1), target alpha = 0.4");
    for lambda in ["0.25", "0.5", "1", "2", "4"] {
        let mut config = Preset::Fig5.config();
        config.apply_override("lambda", lambda).unwrap();
        let summary =
            run_batch(&config.to_sim_params(), config.instances, config.base_seed, config.horizon)
                .unwrap();
        let (equilibrium, converged) = detect_equilibrium(&summary, 50, 0.01);
        println!(
            "lambda = {lambda:>4}: equilibrium theta = {equilibrium:.4} (converged: {converged})"
        );
    }
}
