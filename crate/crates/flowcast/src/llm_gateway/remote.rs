//! Remote chat-completion transport with bounded retries.

use std::time::Duration;

use once_cell::sync::OnceCell;
use serde::Deserialize;
use serde_json::json;

use super::{GatewayConfig, GatewayError, InFlightLimiter};

/// Sleep intervals between attempts: `base * 2^k`, non-decreasing, one entry
/// per retry (so `max_attempts - 1` entries).
pub fn backoff_schedule(base: Duration, max_attempts: u32) -> Vec<Duration> {
    (0..max_attempts.saturating_sub(1)).map(|k| base * 2u32.saturating_pow(k)).collect()
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: String,
}

pub(super) fn complete(
    config: &GatewayConfig,
    limiter: &InFlightLimiter,
    client_cell: &OnceCell<reqwest::blocking::Client>,
    prompt: &str,
) -> Result<String, GatewayError> {
    let api_key = std::env::var(&config.api_key_env)
        .map_err(|_| GatewayError::MissingApiKey(config.api_key_env.clone()))?;
    let client = client_cell.get_or_try_init(|| {
        reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))
    })?;

    let _permit = limiter.acquire();
    let delays = backoff_schedule(config.retry.base_backoff, config.retry.max_attempts);
    let mut last_error = GatewayError::Transport("no attempts made".into());
    for attempt in 0..config.retry.max_attempts {
        match try_once(client, config, &api_key, prompt) {
            Ok(content) => return Ok(content),
            Err(err) => {
                let retryable = matches!(
                    &err,
                    GatewayError::Transport(_)
                        | GatewayError::Http { status: 429, .. }
                        | GatewayError::Http { status: 500..=599, .. }
                );
                log::debug!("gateway attempt {} failed: {err}", attempt + 1);
                last_error = err;
                if !retryable {
                    break;
                }
                if let Some(delay) = delays.get(attempt as usize) {
                    std::thread::sleep(*delay);
                }
            }
        }
    }
    Err(GatewayError::Exhausted {
        attempts: config.retry.max_attempts,
        cause: last_error.to_string(),
    })
}

fn try_once(
    client: &reqwest::blocking::Client,
    config: &GatewayConfig,
    api_key: &str,
    prompt: &str,
) -> Result<String, GatewayError> {
    // All prompts go out as a single user message; no system message.
    let body = json!({
        "model": config.model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": config.temperature,
    });
    log::debug!(
        "gateway request to {} (model {}, authorization redacted): {}",
        config.endpoint_url,
        config.model_name,
        body
    );
    let response = client
        .post(&config.endpoint_url)
        .bearer_auth(api_key)
        .json(&body)
        .send()
        .map_err(|e| GatewayError::Transport(e.to_string()))?;
    let status = response.status().as_u16();
    let text = response.text().map_err(|e| GatewayError::Transport(e.to_string()))?;
    log::debug!("gateway response status {status}: {text}");
    if !(200..300).contains(&status) {
        return Err(GatewayError::Http { status, body: text });
    }
    let parsed: ChatResponse =
        serde_json::from_str(&text).map_err(|e| GatewayError::BadResponse(e.to_string()))?;
    parsed
        .choices
        .first()
        .map(|c| c.message.content.clone())
        .ok_or_else(|| GatewayError::BadResponse("response has no choices".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_is_nondecreasing_and_bounded() {
        let delays = backoff_schedule(Duration::from_millis(100), 4);
        assert_eq!(delays.len(), 3);
        assert!(delays.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(delays[0], Duration::from_millis(100));
        assert_eq!(delays[2], Duration::from_millis(400));
    }

    #[test]
    fn single_attempt_has_no_delays() {
        assert!(backoff_schedule(Duration::from_millis(100), 1).is_empty());
    }
}
