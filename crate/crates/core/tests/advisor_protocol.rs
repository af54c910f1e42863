mod common;

use std::sync::Arc;

use ace_core::advisor::{
    refine_action, select_key_steps, select_refinement_candidates, shape_rewards, summarize_episode, ActorBackend,
    Canned, Counting, CriticBackend, KeyStepConfig, KeyStepCriterion, RefineFailure, ScriptedOracleActor,
    ScriptedOracleCritic, MAX_ROUNDS,
};
use ace_core::experience::{record_episode, MixConfig, ReplayBuffers, Source, Transition};
use ace_core::grid::{line_changes, ActionTable, EnvConfig, GridEnv, Scenario, Simulator};
use ace_core::rl::Encoder;
use ace_core::textio::{format_actor_response, ActorPromptConfig, ReasonThresholds, StepSummary};
use proptest::prelude::*;

fn simulator(scenario: &Arc<Scenario>) -> Simulator {
    let env = GridEnv::new(common::toy5_arc(), EnvConfig::default());
    env.simulator_for(scenario.clone())
}

/// Best one-step reward over legal actions whose line changes differ from the agent's.
fn brute_best_alternative(sim: &Simulator, t: &Transition) -> f64 {
    let own = line_changes(sim.topology(), &t.state, &sim.table().get(t.action));
    let mask = sim.legal_actions(&t.state);
    (0..mask.len())
        .filter(|&i| mask[i])
        .filter(|&i| line_changes(sim.topology(), &t.state, &sim.table().get(i)) != own)
        .map(|i| sim.simulate(&t.state, i).reward)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn accepted_refinements_are_one_step_optimal() {
    let (topology, episodes) = common::random_episodes(6, 21);
    let encoder = Encoder::new(&topology, 1);
    let mix = MixConfig::default();
    let mut accepted = 0;
    for (episode, scenario) in &episodes {
        let sim = simulator(scenario);
        let batch: Vec<&Transition> = episode.iter().collect();
        for t in select_refinement_candidates(&batch, mix.r_lower).into_iter().take(6) {
            let mut backend = Counting::new(ScriptedOracleActor::new(0));
            let result = refine_action(t, &sim, &encoder, &mut backend, &ActorPromptConfig::default(), MAX_ROUNDS);
            assert!(backend.calls() <= MAX_ROUNDS);
            assert_eq!(result.exchanges.len(), backend.calls());
            if let Ok(refined) = result.outcome {
                accepted += 1;
                assert!(refined.refined_reward > refined.original_reward);
                assert_eq!(refined.source, Source::LlmActor);
                assert_eq!(backend.calls(), 1);
                assert_eq!(refined.refined_reward, brute_best_alternative(&sim, t));
                let again = sim.simulate(&t.state, refined.action);
                assert_eq!(again.reward, refined.refined_reward);
                assert_eq!(again.next_state, refined.next_state);
            }
        }
    }
    assert!(accepted > 5, "only {accepted} refinements accepted");
}

#[test]
fn repeating_the_bad_action_exhausts_five_rounds() {
    let (topology, episodes) = common::random_episodes(3, 5);
    let encoder = Encoder::new(&topology, 1);
    let (episode, scenario) = &episodes[0];
    let sim = simulator(scenario);
    let t = &episode[0];
    let own = line_changes(sim.topology(), &t.state, &sim.table().get(t.action));
    let text = format_actor_response(&own, "keep the current plan.");
    for max_rounds in [5, 9] {
        let mut backend = Counting::new(Canned::always(&text));
        let result = refine_action(t, &sim, &encoder, &mut backend, &ActorPromptConfig::default(), max_rounds);
        assert_eq!(result.outcome.unwrap_err(), RefineFailure::RoundsExhausted);
        assert_eq!(backend.calls(), 5);
        assert_eq!(result.exchanges.len(), 5);
        assert!(result.exchanges.iter().all(|e| !e.accepted));
        assert_eq!(result.exchanges.iter().map(|e| e.round).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
    }
}

#[test]
fn unparseable_responses_count_as_rounds() {
    let (topology, episodes) = common::random_episodes(2, 6);
    let encoder = Encoder::new(&topology, 1);
    let (episode, scenario) = &episodes[0];
    let sim = simulator(scenario);
    let mut backend = Counting::new(Canned::always("I would rather not say."));
    let result = refine_action(&episode[0], &sim, &encoder, &mut backend, &ActorPromptConfig::default(), MAX_ROUNDS);
    assert_eq!(result.outcome.unwrap_err(), RefineFailure::RoundsExhausted);
    assert_eq!(backend.calls(), MAX_ROUNDS);
    assert!(result.exchanges.iter().all(|e| e.parse_error.is_some()));
}

#[test]
fn candidate_sets_are_nested_in_the_threshold() {
    let (_, episodes) = common::random_episodes(8, 13);
    let all: Vec<&Transition> = episodes.iter().flat_map(|(e, _)| e.iter()).collect();
    let sets: Vec<Vec<(u64, usize)>> = [-0.3, 0.0, 0.3]
        .iter()
        .map(|&r| {
            select_refinement_candidates(&all, r)
                .iter()
                .map(|t| (t.episode_id, t.step_index))
                .collect()
        })
        .collect();
    for pair in sets.windows(2) {
        assert!(pair[0].iter().all(|k| pair[1].contains(k)));
    }
    assert!(!sets[0].is_empty());
}

fn noop_episode() -> (ActionTable, Vec<Transition>) {
    let topology = common::toy5_arc();
    let scenario = common::attacked_scenarios(&topology, 1, 17).remove(0);
    let mut env = GridEnv::new(topology.clone(), EnvConfig::default());
    let encoder = Encoder::new(&topology, 1);
    let episode = record_episode(&mut env, scenario, 17, 0, &encoder, |_, _| 0).unwrap();
    (ActionTable::new(&topology), episode)
}

#[test]
fn action_criterion_skips_noop_steps() {
    let (table, episode) = noop_episode();
    let refs: Vec<&Transition> = episode.iter().collect();
    let steps = summarize_episode(&common::toy5_arc(), &table, &refs);
    let config = KeyStepConfig {
        criterion: KeyStepCriterion::Action,
        ..KeyStepConfig::default()
    };
    assert!(select_key_steps(&steps, &config).is_empty());
}

#[test]
fn reward_criterion_picks_large_rewards() {
    let (topology, episodes) = common::random_episodes(6, 4);
    let table = ActionTable::new(&topology);
    let config = KeyStepConfig::default();
    for (episode, _) in &episodes {
        let refs: Vec<&Transition> = episode.iter().collect();
        let steps = summarize_episode(&topology, &table, &refs);
        let picked = select_key_steps(&steps, &config);
        assert!(picked.len() <= config.max_input);
        assert!(picked.windows(2).all(|w| w[0] < w[1]));
        let eligible = steps.iter().filter(|s| s.reward.abs() > config.r_bar).count();
        assert_eq!(picked.len(), eligible.min(config.max_input));
        for &i in &picked {
            assert!(steps[i].reward.abs() > config.r_bar);
        }
    }
}

fn critic_fixture() -> (Vec<StepSummary>, ReplayBuffers, u64) {
    let (topology, episodes) = common::random_episodes(20, 9);
    let table = ActionTable::new(&topology);
    let (episode, _) = episodes.into_iter().find(|(e, _)| e.len() >= 8).expect("an eight-step episode");
    let mut buffers = ReplayBuffers::new(1000, 16);
    for t in &episode {
        buffers.push_rl(t.clone());
    }
    let refs: Vec<&Transition> = episode.iter().collect();
    (summarize_episode(&topology, &table, &refs), buffers, episode[0].episode_id)
}

fn shape_with(text: &str, key_steps: &[usize]) -> (ace_core::advisor::ShapingResult, ReplayBuffers, ReplayBuffers) {
    let (steps, mut buffers, episode) = critic_fixture();
    let before = buffers.clone();
    let mut backend = Canned::always(text);
    let result = shape_rewards(
        &mut buffers,
        episode,
        &steps,
        key_steps,
        &mut backend,
        0.2,
        4,
        &ReasonThresholds::default(),
    );
    (result, before, buffers)
}

#[test]
fn two_point_response_replaces_two_rewards() {
    let text = "Key Decision Point Indices: [2, 5]\nReward Adjustments: [+0.2, -0.4]";
    let (result, before, after) = shape_with(text, &[2, 5, 7]);
    assert_eq!(result.applied, vec![(2, 0.2), (5, -0.4)]);
    assert_eq!(result.rejected, 0);
    assert_eq!(after.rl().len(), before.rl().len());
    for (a, b) in before.rl().iter().zip(after.rl()) {
        match b.step_index {
            2 => assert!((b.reward - (a.original_reward + 0.2)).abs() < 1e-12),
            5 => assert!((b.reward - (a.original_reward - 0.4)).abs() < 1e-12),
            _ => assert_eq!(a.reward, b.reward),
        }
        assert_eq!(a.original_reward, b.original_reward);
    }
}

#[test]
fn five_points_are_rejected_wholesale() {
    let text = "Key Decision Point Indices: [0, 1, 2, 3, 4]\nReward Adjustments: [0.2, 0.2, 0.2, 0.2, 0.2]";
    let (result, before, after) = shape_with(text, &[0, 1, 2, 3, 4]);
    assert!(result.applied.is_empty());
    assert_eq!(result.rejected, 5);
    assert!(result.exchange.parse_error.is_some());
    for (a, b) in before.rl().iter().zip(after.rl()) {
        assert_eq!(a.reward, b.reward);
    }
}

#[test]
fn mismatched_list_lengths_are_rejected() {
    let text = "Key Decision Point Indices: [2, 5]\nReward Adjustments: [0.2]";
    let (result, _, _) = shape_with(text, &[2, 5]);
    assert!(result.applied.is_empty());
}

#[test]
fn oracle_critic_adjustments_are_snapped_and_bounded() {
    let (topology, episodes) = common::random_episodes(30, 2);
    let table = ActionTable::new(&topology);
    let mix = MixConfig::default();
    let k = mix.k_adjust;
    let mut total = 0;
    for (episode, _) in &episodes {
        let mut buffers = ReplayBuffers::new(1000, 16);
        for t in episode {
            buffers.push_rl(t.clone());
        }
        let refs: Vec<&Transition> = episode.iter().collect();
        let steps = summarize_episode(&topology, &table, &refs);
        let key_steps = select_key_steps(&steps, &KeyStepConfig::default());
        let mut backend = Counting::new(ScriptedOracleCritic::new(0.995, 0.05));
        let result = shape_rewards(
            &mut buffers,
            episode[0].episode_id,
            &steps,
            &key_steps,
            &mut backend,
            k,
            mix.max_adjustments_per_episode,
            &ReasonThresholds::default(),
        );
        assert_eq!(backend.calls(), 1);
        assert!(result.applied.len() <= 4);
        for &(i, a) in &result.applied {
            assert!([k, -k, 2.0 * k, -2.0 * k].iter().any(|l| (l - a).abs() < 1e-12), "{a}");
            assert!(key_steps.contains(&i));
        }
        total += result.applied.len();
    }
    assert!(total > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arbitrary_critic_text_respects_the_bounds(
        indices in prop::collection::vec(0usize..12, 0..7),
        values in prop::collection::vec(-1.0f64..1.0, 0..7),
    ) {
        let fmt = |v: &[String]| v.join(", ");
        let text = format!(
            "Key Decision Point Indices: [{}]\nReward Adjustments: [{}]",
            fmt(&indices.iter().map(|i| i.to_string()).collect::<Vec<_>>()),
            fmt(&values.iter().map(|v| format!("{v:+.1}")).collect::<Vec<_>>()),
        );
        let key_steps: Vec<usize> = (0..12).collect();
        let (result, _, after) = shape_with(&text, &key_steps);
        prop_assert!(result.applied.len() <= 4);
        for &(i, a) in &result.applied {
            prop_assert!([0.2, -0.2, 0.4, -0.4].iter().any(|l| (l - a).abs() < 1e-12));
            let stored = after.rl().iter().find(|t| t.step_index == i).unwrap();
            prop_assert!((stored.reward - stored.original_reward - a).abs() < 1e-12);
        }
    }
}

#[allow(dead_code)]
fn assert_object_safe(_: &mut dyn ActorBackend, _: &mut dyn CriticBackend) {}
