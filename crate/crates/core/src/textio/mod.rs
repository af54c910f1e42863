//! Prompt serializers and response parsers for the two advisors.

pub mod actor;
pub mod critic;

pub use actor::{
    format_actor_response, parse_actor_response, serialize_actor_prompt, validate_line_ids, ActorParseError,
    ActorPromptConfig, BadAction, ACTOR_TASK_PREFIX,
};
pub use critic::{
    critic_task_prefix, format_critic_response, key_reasons, parse_critic_lists, parse_critic_response,
    serialize_critic_prompt, snap_adjustment, CriticParseError, ReasonThresholds, StepSummary, MAX_KEY_POINTS,
};

use crate::grid::LineChangeMap;

/// `{21: 1, 38: 0}`; `{}` when empty.
pub fn format_changes(changes: &LineChangeMap) -> String {
    let items: Vec<String> = changes.iter().map(|(l, b)| format!("{l}: {b}")).collect();
    format!("{{{}}}", items.join(", "))
}
