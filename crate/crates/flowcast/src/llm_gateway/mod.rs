//! Prompt templates, a chat-completion client, and a deterministic offline
//! mock.
//!
//! The four templates cover event time structuring, description
//! summarization, event classification, and post relevance checks. A gateway
//! runs in one of two modes: `Remote` talks to any `/v1/chat/completions`
//! compatible endpoint; `Mock` answers every prompt deterministically from a
//! [`MockRuleSet`], so the whole pipeline is testable without network access.

mod mock;
mod remote;
mod templates;

pub use mock::MockRuleSet;
pub use remote::backoff_schedule;
pub use templates::{render, template_body, TemplateId};

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use once_cell::sync::OnceCell;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event_catalog::Event;
use crate::popularity::Post;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("no binding supplied for placeholder `{{{0}}}`")]
    MissingBinding(String),
    #[error("expected a yes/no answer, got {0:?}")]
    UnparseableAnswer(String),
    #[error("gateway request failed after {attempts} attempt(s): {cause}")]
    Exhausted { attempts: u32, cause: String },
    #[error("endpoint returned status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed completion response: {0}")]
    BadResponse(String),
    #[error("api key environment variable `{0}` is not set")]
    MissingApiKey(String),
    #[error("invalid gateway config: {0}")]
    InvalidConfig(String),
}

/// Anything that can answer a rendered prompt. Implemented by
/// [`LlmGateway`] and by plain closures in tests.
pub trait Gateway: Sync {
    fn complete(&self, prompt: &str) -> Result<String, GatewayError>;
}

impl<F> Gateway for F
where
    F: Fn(&str) -> Result<String, GatewayError> + Sync,
{
    fn complete(&self, prompt: &str) -> Result<String, GatewayError> {
        self(prompt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatewayMode {
    Remote,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 3, base_backoff: Duration::from_millis(500) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
    pub mode: GatewayMode,
    /// Name of the environment variable holding the API key (remote mode).
    pub api_key_env: String,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model_name: "gpt-4".into(),
            temperature: 0.0,
            max_in_flight: 4,
            retry: RetryPolicy::default(),
            mode: GatewayMode::Mock,
            api_key_env: "FLOWCAST_API_KEY".into(),
        }
    }
}

impl GatewayConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.retry.max_attempts < 1 {
            return Err(GatewayError::InvalidConfig("retry.max_attempts must be >= 1".into()));
        }
        if self.temperature < 0.0 {
            return Err(GatewayError::InvalidConfig("temperature must be >= 0".into()));
        }
        if self.max_in_flight < 1 {
            return Err(GatewayError::InvalidConfig("max_in_flight must be >= 1".into()));
        }
        Ok(())
    }
}

/// The production gateway: remote HTTP in `Remote` mode, [`MockRuleSet`]
/// answers in `Mock` mode.
pub struct LlmGateway {
    config: GatewayConfig,
    mock_rules: MockRuleSet,
    limiter: InFlightLimiter,
    client: OnceCell<reqwest::blocking::Client>,
}

impl LlmGateway {
    pub fn new(config: GatewayConfig) -> Result<Self, GatewayError> {
        Self::with_mock_rules(config, MockRuleSet::default())
    }

    pub fn with_mock_rules(
        config: GatewayConfig,
        mock_rules: MockRuleSet,
    ) -> Result<Self, GatewayError> {
        config.validate()?;
        mock_rules.validate()?;
        let limiter = InFlightLimiter::new(config.max_in_flight);
        Ok(Self { config, mock_rules, limiter, client: OnceCell::new() })
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn mock_rules(&self) -> &MockRuleSet {
        &self.mock_rules
    }
}

impl Gateway for LlmGateway {
    fn complete(&self, prompt: &str) -> Result<String, GatewayError> {
        match self.config.mode {
            GatewayMode::Mock => Ok(mock::answer(prompt, &self.mock_rules)),
            GatewayMode::Remote => {
                remote::complete(&self.config, &self.limiter, &self.client, prompt)
            }
        }
    }
}

/// Ask whether `post` is about `event`. Renders Prompt 4, sends it, and
/// parses a strict yes/no answer; anything else is an error.
pub fn relevance_check(
    event: &Event,
    post: &Post,
    gateway: &dyn Gateway,
) -> Result<bool, GatewayError> {
    let prompt = render(
        TemplateId::P4Relevance,
        &[
            ("post ID", post.post_id.as_str()),
            ("event title", event.title.as_str()),
            ("event type", event.event_type.name()),
            ("summarized event description", event.summary.as_str()),
            ("post title", post.title.as_str()),
            ("post content", post.content.as_str()),
            ("post geo-tags", &post.geotags.join(", ")),
            ("post hashtags", &post.hashtags.join(", ")),
            ("study area", "the study area"),
        ],
    )?;
    let answer = gateway.complete(&prompt)?;
    parse_yes_no(&answer)
}

/// Strict yes/no parse: whitespace, surrounding quotes, and one trailing
/// period are tolerated; any other decoration is an error.
pub fn parse_yes_no(answer: &str) -> Result<bool, GatewayError> {
    let trimmed = answer
        .trim()
        .trim_matches(|c| c == '"' || c == '\u{201c}' || c == '\u{201d}')
        .trim_end_matches('.');
    if trimmed.eq_ignore_ascii_case("yes") {
        Ok(true)
    } else if trimmed.eq_ignore_ascii_case("no") {
        Ok(false)
    } else {
        Err(GatewayError::UnparseableAnswer(answer.to_string()))
    }
}

/// FIFO counting semaphore bounding concurrent remote requests.
pub(crate) struct InFlightLimiter {
    state: Mutex<LimiterState>,
    cv: Condvar,
    capacity: usize,
}

#[derive(Default)]
struct LimiterState {
    active: usize,
    next_ticket: u64,
    serving: u64,
}

impl InFlightLimiter {
    fn new(capacity: usize) -> Self {
        Self { state: Mutex::new(LimiterState::default()), cv: Condvar::new(), capacity }
    }

    pub(crate) fn acquire(&self) -> InFlightPermit<'_> {
        let mut state = self.state.lock().unwrap();
        let ticket = state.next_ticket;
        state.next_ticket += 1;
        while state.serving != ticket || state.active == self.capacity {
            state = self.cv.wait(state).unwrap();
        }
        state.serving += 1;
        state.active += 1;
        drop(state);
        self.cv.notify_all();
        InFlightPermit { limiter: self }
    }
}

pub(crate) struct InFlightPermit<'a> {
    limiter: &'a InFlightLimiter,
}

impl Drop for InFlightPermit<'_> {
    fn drop(&mut self) {
        let mut state = self.limiter.state.lock().unwrap();
        state.active -= 1;
        drop(state);
        self.limiter.cv.notify_all();
    }
}
