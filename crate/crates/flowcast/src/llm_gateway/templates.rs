//! The four prompt templates and the placeholder renderer.
//!
//! Placeholders are written `{name}` and must all be bound at render time.
//! Rendering is a single pass, so braces inside binding values are emitted
//! verbatim and can never be re-interpreted as placeholders.

use serde::{Deserialize, Serialize};

use super::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TemplateId {
    /// Structure a raw event time description into per-session rows.
    P1Time,
    /// Summarize an event description within a token budget.
    P2Summary,
    /// Classify an event into one of the predefined types.
    P3Classify,
    /// Decide whether a social media post relates to an event.
    P4Relevance,
}

const P1_TIME: &str = "\
Below is the raw description of an event's hosting time, including event ID: {event ID}, and event time: {raw time description}.

Your task is to extract the exact start and end datetime for each event. If an event has multiple sessions, find the exact start and end datetime for each session. If a session does not have a specific start and end time, set the start time to \"00:00:00\" and the end time to \"23:59:59\" of the event day.

Provide the output in four columns:
- Id: The event ID.
- Sub id: A unique number for each session of the event, starting from 1.
- Start time: The start datetime of the event session in \"YYYY-MM-DD hh:mm:ss\" format.
- End time: The end datetime of the event session in \"YYYY-MM-DD hh:mm:ss\" format.

Format each session as a single line with the four columns separated by \" | \", and output nothing else.";

const P2_SUMMARY: &str = "\
Please summarize the event information given the raw event description extracted from the web page: {raw event description}.

Requirements are as follows:
- Exclude details about time, location, registration, tickets, and payment; only focus on the event content.
- Be concise within {token usage} tokens.
- Summarize in {language}.
- Only provide the summarized event description without any additional explanations.";

const P3_CLASSIFY: &str = "\
Below is a description of an event that occurred in {study area}, called {event title}. {summarized event description}. Please match the events into the following categories: {predefined event types}.

Only provide the event type without any additional description.";

const P4_RELEVANCE: &str = "\
Below, you will find a description of an event and the content of a social media post. Please compare their semantics and determine if the post {post ID} is related to the given event. Respond with \"Yes\" if the post is related, or \"No\" if it is not.

Event Information:
- Title: {event title}
- Type: {event type}
- Description: {summarized event description}

Social Media Post Details:
- Title: {post title}
- Content: {post content}
- Geo-tags: {post geo-tags}
- Hashtags: {post hashtags}

Criteria for Relevance:
- The post must reference an event occurring in {study area}.
- The post's content must demonstrate a clear connection to the event based on the provided event information.";

pub fn template_body(id: TemplateId) -> &'static str {
    match id {
        TemplateId::P1Time => P1_TIME,
        TemplateId::P2Summary => P2_SUMMARY,
        TemplateId::P3Classify => P3_CLASSIFY,
        TemplateId::P4Relevance => P4_RELEVANCE,
    }
}

/// Render a template, substituting every `{placeholder}` from `bindings`.
/// Unbound placeholders are an error; unused bindings are ignored.
pub fn render(id: TemplateId, bindings: &[(&str, &str)]) -> Result<String, GatewayError> {
    let body = template_body(id);
    let mut out = String::with_capacity(body.len());
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or_else(|| GatewayError::MissingBinding(after.chars().take(32).collect()))?;
        let name = &after[..close];
        let value = bindings
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| GatewayError::MissingBinding(name.to_string()))?;
        out.push_str(value);
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}
