use crate::llm_gateway::Message;

use super::{AgentConfig, AgentError};

/// First-person guidance placed after the think-open tag.
pub const DEFAULT_GUIDANCE: &str = include_str!("../../config/guidance.txt");

/// `[system (if role_prompt non-empty), user(query), assistant(prefill)]`
/// where the prefill is the think-open tag followed by the guidance.
pub fn prepare_context(query: &str, role_prompt: &str, config: &AgentConfig) -> Result<Vec<Message>, AgentError> {
    if query.trim().is_empty() {
        return Err(AgentError::EmptyQuery);
    }
    let mut messages = Vec::with_capacity(3);
    if !role_prompt.is_empty() {
        messages.push(Message::system(role_prompt));
    }
    messages.push(Message::user(query));
    messages.push(Message::assistant(format!(
        "{}{}",
        config.tags.think_open(),
        config.guidance_text
    )));
    Ok(messages)
}
