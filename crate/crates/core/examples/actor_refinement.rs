//! Refining a failing agent decision with the scripted actor advisor.

use std::sync::Arc;

use ace_core::advisor::{refine_action, select_refinement_candidates, Canned, ScriptedOracleActor};
use ace_core::experience::{record_episode, Transition};
use ace_core::grid::{gen_scenarios, toy5, EnvConfig, GridEnv, ScenarioOptions};
use ace_core::rl::Encoder;
use ace_core::textio::ActorPromptConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let topology = Arc::new(toy5());
    let options = ScenarioOptions {
        opponent_enabled: true,
        ..ScenarioOptions::default()
    };
    let scenarios: Vec<_> = gen_scenarios(&topology, 6, 96, 2, &options).unwrap().into_iter().map(Arc::new).collect();
    let mut env = GridEnv::new(topology.clone(), EnvConfig::default());
    let encoder = Encoder::new(&topology, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(4);

    let mut failing: Option<(Transition, Arc<_>)> = None;
    for (e, s) in scenarios.iter().enumerate() {
        let episode = record_episode(&mut env, s.clone(), e as u64, e as u64, &encoder, |_, mask| {
            let legal: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
            legal[rng.random_range(0..legal.len())]
        })
        .unwrap();
        let refs: Vec<&Transition> = episode.iter().collect();
        if let Some(t) = select_refinement_candidates(&refs, 0.1).first() {
            failing = Some(((*t).clone(), s.clone()));
            break;
        }
    }
    let (candidate, scenario) = failing.expect("a random policy fails somewhere");
    let simulator = env.simulator_for(scenario);
    println!(
        "candidate: episode {}, step {}, action {:?}, reward {:.3}",
        candidate.episode_id,
        candidate.step_index,
        simulator.table().get(candidate.action),
        candidate.original_reward
    );

    let config = ActorPromptConfig::default();
    let mut oracle = ScriptedOracleActor::new(0);
    let result = refine_action(&candidate, &simulator, &encoder, &mut oracle, &config, 5);
    println!("\n--- round 1 prompt ---\n{}", result.exchanges[0].prompt);
    println!("--- round 1 response ---\n{}", result.exchanges[0].response);
    match &result.outcome {
        Ok(t) => println!("accepted {:?} with simulated reward {:.3}", simulator.table().get(t.action), t.refined_reward),
        Err(e) => println!("refinement failed: {e:?}"),
    }

    let mut stubborn = Canned::new(vec![
        Ok("no idea".into()),
        Ok("proposed line changes: {99: 1}".into()),
        Ok("proposed line changes: {}".into()),
    ]);
    let result = refine_action(&candidate, &simulator, &encoder, &mut stubborn, &config, 5);
    println!("\ncanned advisor, {} rounds:", result.exchanges.len());
    for ex in &result.exchanges {
        println!(
            "  round {}: parse {:?}, simulated {:?}, accepted {}",
            ex.round, ex.parse_error, ex.simulated_reward, ex.accepted
        );
    }
}
