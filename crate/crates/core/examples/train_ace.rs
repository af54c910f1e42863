//! End-to-end training on toy5 with scripted advisors, against the plain
//! SAC ablation. Usage: `train_ace [steps] [seed]`.

use ace_core::train::{TrainConfig, Trainer};

fn main() {
    let mut args = std::env::args().skip(1);
    let steps: u64 = args.next().map_or(3000, |s| s.parse().expect("steps"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let mut base = TrainConfig::desk();
    base.total_steps = steps;
    base.seed = seed;
    for (name, config) in [
        ("full ACE", base.clone()),
        ("without critic", base.clone().without_critic()),
        ("plain SAC", base.clone().plain_sac()),
    ] {
        let mut trainer = Trainer::from_config(config, None).expect("trainer");
        let summary = trainer.run().expect("training");
        let eval = summary.final_eval.as_ref().unwrap();
        println!(
            "{name:>15}: reward {:6.2}, survival {:.3}, target reached at {:?}, refinements {}/{}, critic edits {}",
            eval.mean_reward,
            eval.mean_survival,
            summary.steps_to_target,
            summary.stats.actor_accepted,
            summary.stats.actor_candidates,
            summary.stats.critic_edits
        );
        let curve: Vec<String> = summary.evals.iter().map(|e| format!("{:.2}", e.mean_survival)).collect();
        println!("{:>15}  survival curve: {}", "", curve.join(" "));
    }
}
