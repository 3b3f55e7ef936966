//! HTTP chat-completions backend.
//!
//! Speaks the common chat wire protocol: POST with model, messages,
//! max_tokens, temperature, top_p; reads choices[0].message.content and
//! usage.prompt_tokens / usage.completion_tokens. Usage counts are never
//! fabricated; a response without them is a hard error.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use crate::error::BackendError;

use super::{Backend, CallCtx, Completion, FinishReason, GenParams};

const MAX_ATTEMPTS: u32 = 3;

#[derive(Debug, Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    usage: Option<WireUsage>,
}

#[derive(Debug, Deserialize)]
struct WireChoice {
    message: WireMessage,
    finish_reason: Option<String>,
}

#[derive(Debug, Deserialize)]
struct WireMessage {
    content: Option<String>,
}

#[derive(Debug, Deserialize)]
struct WireUsage {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
}

/// Counting semaphore bounding in-flight requests.
struct Gate {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(permits: usize) -> Self {
        Gate {
            permits: Mutex::new(permits.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> GateGuard<'_> {
        let mut permits = self.permits.lock().expect("gate lock");
        while *permits == 0 {
            permits = self.cv.wait(permits).expect("gate wait");
        }
        *permits -= 1;
        GateGuard { gate: self }
    }
}

struct GateGuard<'a> {
    gate: &'a Gate,
}

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.gate.permits.lock().expect("gate lock") += 1;
        self.gate.cv.notify_one();
    }
}

pub struct HttpBackend {
    client: reqwest::blocking::Client,
    url: String,
    model: String,
    api_key: Option<String>,
    gate: Gate,
    retry_base: Duration,
}

impl HttpBackend {
    /// Builds a backend against a chat-completions URL. The API key is read
    /// from the environment variable named in the config; a named-but-unset
    /// variable is an immediate error.
    pub fn new(
        url: impl Into<String>,
        model: impl Into<String>,
        api_key_env: Option<&str>,
        max_in_flight: usize,
    ) -> Result<Self, BackendError> {
        let api_key = match api_key_env {
            Some(name) => {
                Some(std::env::var(name).map_err(|_| BackendError::MissingEnv(name.to_string()))?)
            }
            None => None,
        };
        Ok(HttpBackend {
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(600))
                .build()
                .map_err(|e| BackendError::Transport {
                    attempts: 0,
                    msg: e.to_string(),
                })?,
            url: url.into(),
            model: model.into(),
            api_key,
            gate: Gate::new(max_in_flight),
            retry_base: Duration::from_secs(1),
        })
    }

    /// Overrides the first retry delay (exponential from there). Tests use
    /// milliseconds; the default is 1s.
    pub fn with_retry_base(mut self, base: Duration) -> Self {
        self.retry_base = base;
        self
    }

    fn send_once(
        &self,
        body: &serde_json::Value,
    ) -> Result<reqwest::blocking::Response, reqwest::Error> {
        let mut req = self.client.post(&self.url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        req.send()
    }

    fn parse(&self, status: u16, text: &str) -> Result<Completion, BackendError> {
        let wire: WireResponse = serde_json::from_str(text)
            .map_err(|e| BackendError::MalformedResponse(format!("status {status}: {e}")))?;
        let choice = wire
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::MalformedResponse("no choices".into()))?;
        let content = choice.message.content.ok_or_else(|| {
            BackendError::MalformedResponse("choice without message content".into())
        })?;
        let usage = wire
            .usage
            .ok_or_else(|| BackendError::MissingUsage("usage object absent".into()))?;
        let in_tokens = usage
            .prompt_tokens
            .ok_or_else(|| BackendError::MissingUsage("usage.prompt_tokens absent".into()))?;
        let out_tokens = usage
            .completion_tokens
            .ok_or_else(|| BackendError::MissingUsage("usage.completion_tokens absent".into()))?;
        let finish = match choice.finish_reason.as_deref() {
            Some("length") => FinishReason::Length,
            _ => FinishReason::Stop,
        };
        Ok(Completion {
            text: content,
            in_tokens,
            out_tokens,
            finish,
        })
    }
}

impl Backend for HttpBackend {
    fn generate(
        &self,
        prompt: &str,
        params: &GenParams,
        _ctx: &CallCtx<'_>,
    ) -> Result<Completion, BackendError> {
        params.validate()?;
        if prompt.is_empty() {
            return Err(BackendError::InvalidParams("empty prompt".into()));
        }
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": params.max_tokens,
            "temperature": params.temperature,
            "top_p": params.top_p,
        });

        let _permit = self.gate.acquire();
        let mut delay = self.retry_base;
        let mut last_err: Option<BackendError> = None;
        for attempt in 1..=MAX_ATTEMPTS {
            if attempt > 1 {
                std::thread::sleep(delay);
                delay *= 2;
            }
            match self.send_once(&body) {
                Ok(resp) => {
                    let status = resp.status().as_u16();
                    let retryable = status >= 500 || status == 429;
                    let text = resp.text().unwrap_or_default();
                    if (200..300).contains(&status) {
                        // Parse failures (including missing usage) are hard
                        // errors, not retried.
                        return self.parse(status, &text);
                    }
                    let err = BackendError::Http {
                        status,
                        attempts: attempt,
                        msg: truncate(&text, 200),
                    };
                    if !retryable {
                        return Err(err);
                    }
                    last_err = Some(err);
                }
                Err(e) => {
                    last_err = Some(BackendError::Transport {
                        attempts: attempt,
                        msg: e.to_string(),
                    });
                }
            }
        }
        Err(last_err.expect("at least one attempt made"))
    }
}

fn truncate(s: &str, limit: usize) -> String {
    if s.len() <= limit {
        s.to_string()
    } else {
        let mut end = limit;
        while !s.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}...", &s[..end])
    }
}
