use std::sync::Arc;

use ace_core::grid::{nominal_scenario, toy5, EnvConfig, GridEnv, LineChangeMap};
use ace_core::textio::{
    format_actor_response, format_critic_response, parse_actor_response, parse_critic_lists, parse_critic_response,
    serialize_actor_prompt, ActorParseError, ActorPromptConfig, CriticParseError,
};
use proptest::prelude::*;

/// Text fragments that steer random input towards the parsers' interesting paths.
fn near_miss() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        Just("proposed line changes:".to_string()),
        Just("Proposed Line Changes : ".to_string()),
        Just("Key Decision Point Indices:".to_string()),
        Just("Reward Adjustments:".to_string()),
        Just("{".to_string()),
        Just("}".to_string()),
        Just("[".to_string()),
        Just("]".to_string()),
        Just(", ".to_string()),
        Just(": ".to_string()),
        Just("+".to_string()),
        Just("-".to_string()),
        Just(".".to_string()),
        Just("\n".to_string()),
        Just("99999999999999999999999".to_string()),
        "[0-9]{1,3}",
        "[0-9]\\.[0-9]{1,2}",
        "\\PC{0,6}",
    ];
    prop::collection::vec(piece, 0..24).prop_map(|v| v.concat())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn actor_parser_is_total(text in prop_oneof![any::<String>(), near_miss()]) {
        if let Ok(map) = parse_actor_response(&text) {
            prop_assert!(map.len() <= 5);
            prop_assert!(map.values().all(|&b| b <= 1));
        }
    }

    #[test]
    fn critic_parser_is_total(text in prop_oneof![any::<String>(), near_miss()], k in 0.01f64..1.0) {
        let _ = parse_critic_lists(&text);
        if let Ok(entries) = parse_critic_response(&text, k) {
            prop_assert!(entries.len() <= 4);
            for (_, a) in entries {
                prop_assert!([k, -k, 2.0 * k, -2.0 * k].contains(&a));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn actor_format_round_trips(entries in prop::collection::btree_map(0usize..200, 0u8..2, 0..=5)) {
        let map: LineChangeMap = entries;
        prop_assert_eq!(parse_actor_response(&format_actor_response(&map, "analysis")).unwrap(), map);
    }

    #[test]
    fn critic_format_round_trips(
        points in prop::collection::vec((0usize..96, prop::sample::select(vec![0.2, -0.2, 0.4, -0.4])), 0..=4),
    ) {
        prop_assert_eq!(parse_critic_response(&format_critic_response(&points), 0.2).unwrap(), points);
    }
}

#[test]
fn actor_fixture_parses() {
    let text = "1. Analysis of critical issues: line 21 is overloaded.\n\n3. proposed line changes: {21: 1, 38: 0}";
    assert_eq!(parse_actor_response(text).unwrap(), LineChangeMap::from([(21, 1), (38, 0)]));
    assert_eq!(parse_actor_response("proposed line changes: {}").unwrap(), LineChangeMap::new());
    assert_eq!(parse_actor_response("no proposal"), Err(ActorParseError::MissingAnchor));
    assert_eq!(
        parse_actor_response("proposed line changes: {3: 1, 3: 0}"),
        Err(ActorParseError::DuplicateLine { line: 3 })
    );
}

#[test]
fn critic_fixture_parses() {
    let text = "Key Decision Point Indices: [2, 5]\nReward Adjustments: [+0.2, -0.4]";
    assert_eq!(parse_critic_response(text, 0.2).unwrap(), vec![(2, 0.2), (5, -0.4)]);
    let empty = "Key Decision Point Indices: []\nReward Adjustments: []";
    assert_eq!(parse_critic_response(empty, 0.2).unwrap(), vec![]);
}

#[test]
fn off_level_adjustment_is_rejected() {
    let text = "Key Decision Point Indices: [2]\nReward Adjustments: [+0.5]";
    assert!(matches!(
        parse_critic_response(text, 0.2),
        Err(CriticParseError::IllegalAdjustment { .. })
    ));
    let five = "Key Decision Point Indices: [1, 2, 3, 4, 5]\nReward Adjustments: [0.2, 0.2, 0.2, 0.2, 0.2]";
    assert_eq!(parse_critic_response(five, 0.2), Err(CriticParseError::TooMany(5)));
    let uneven = "Key Decision Point Indices: [1, 2]\nReward Adjustments: [0.2]";
    assert!(matches!(
        parse_critic_response(uneven, 0.2),
        Err(CriticParseError::LengthMismatch { .. })
    ));
}

#[test]
fn overloaded_line_usage_fixture() {
    let t = toy5();
    let mut env = GridEnv::new(Arc::new(t.clone()), EnvConfig::default());
    let mut s = env.reset(Arc::new(nominal_scenario(&t)), 0).unwrap();
    s.rho[5] = 1.6369;
    let text = serialize_actor_prompt(&t, &s, &[], &ActorPromptConfig::default());
    assert!(text.contains("Line id 5 (Usage: 163.69%)"));
}
