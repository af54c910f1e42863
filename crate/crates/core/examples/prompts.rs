//! Advisor prompt serialization and tolerant response parsing.

use std::sync::Arc;

use ace_core::grid::{nominal_scenario, toy5, EnvConfig, GridEnv, LineChangeMap};
use ace_core::textio::{
    format_actor_response, format_critic_response, parse_actor_response, parse_critic_response, serialize_actor_prompt,
    ActorPromptConfig, BadAction,
};

fn main() {
    let topology = Arc::new(toy5());
    let mut env = GridEnv::new(topology.clone(), EnvConfig::default());
    let state = env.reset(Arc::new(nominal_scenario(&topology)), 0).unwrap();
    let bad = vec![BadAction {
        changes: LineChangeMap::from([(2, 1), (5, 0)]),
        reward: -1.0,
    }];
    let config = ActorPromptConfig { display_threshold: 0.3 };
    println!("{}", serialize_actor_prompt(&topology, &state, &bad, &config));

    let reply = format_actor_response(&LineChangeMap::from([(3, 1)]), "moving line 3 relieves line 1.");
    println!("formatted actor reply:\n{reply}\nparsed: {:?}\n", parse_actor_response(&reply));
    for text in [
        "Sure!\n3. **Proposed Line Changes:** {4: 0, 7: 1}",
        "proposed line changes: {'4': '1'}",
        "I would not change anything.",
    ] {
        println!("{text:?}\n  -> {:?}", parse_actor_response(text));
    }

    let critic = format_critic_response(&[(3, -0.4), (10, 0.2)]);
    println!("\nformatted critic reply:\n{critic}\nparsed: {:?}", parse_critic_response(&critic, 0.2));
    let messy = "key decision point indices: [3, 10, 12]\nreward adjustments: [-0.4, 0.2, 0.7]";
    println!("{messy:?}\n  -> {:?}", parse_critic_response(messy, 0.2));
}
