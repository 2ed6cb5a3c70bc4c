//! When both groups share a score distribution and the pool state sits at
//! the fairness target, every institution's best response is the target
//! itself, at any fairness weight.

use fairdyn::dist::ScoreDistribution;
use fairdyn::policy::{mfg_policy, FairnessTarget, GroupDistributions, InstitutionConfig};

fn main() {
    let gaussian = ScoreDistribution::gaussian(5.0, 1.0).unwrap();
    let dists = GroupDistributions { minority: gaussian.clone(), majority: gaussian };
    let target = FairnessTarget::new(0.4).unwrap();

    for lambda in [0.1, 0.75, 2.0, 10.0] {
        let insts: Vec<InstitutionConfig> = [0.1, 0.05, 0.2]
            .iter()
            .map(|&capacity| InstitutionConfig { capacity, fairness_weight: lambda })
            .collect();
        let profile = mfg_policy(target.alpha(), &dists, &insts, target).unwrap();
        println!("lambda = {lambda:>5}: actions = {:?}", profile.actions);
    }
    println!("state = alpha = 0.4 is a fixed point of the selection dynamics");
}
