// SPDX-License-Identifier: Apache-2.0

//! Sources of candidate designs: a pre-generated directory or a live
//! OpenAI-compatible chat endpoint.

use std::io::{BufRead, BufReader};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{EndpointConfig, ModelConfig};
use super::extract::{extract_code, Extraction};
use crate::task::Task;
use crate::toolchain::InfraError;

/// Per-attempt inference figures; absent when the source did not report them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferenceMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_usd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub throughput_tok_per_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ttft_s: Option<f64>,
}

impl InferenceMeta {
    /// reasoning / (reasoning + completion), when defined.
    pub fn reasoning_ratio(&self) -> Option<f64> {
        let r = self.reasoning_tokens? as f64;
        let c = self.completion_tokens.unwrap_or(0) as f64;
        (r + c > 0.0).then(|| r / (r + c))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub raw_response: String,
    pub extracted: Extraction,
    #[serde(default)]
    pub inference: InferenceMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

pub trait Generator: Send + Sync {
    /// `attempt` is 1-based. Errors are infrastructure failures.
    fn generate(&self, model: &ModelConfig, task: &Task, prompt: &str, attempt: u32)
        -> Result<GenerationRecord, InfraError>;
}

/// `{root}/{model}/{task}/attempt_{i}.v` holds code verbatim;
/// `attempt_{i}.txt` holds a raw response that still needs extraction.
/// An optional `attempt_{i}.meta` JSON file carries [`InferenceMeta`].
pub struct PregenDir {
    root: PathBuf,
}

impl PregenDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
}

impl Generator for PregenDir {
    fn generate(&self, model: &ModelConfig, task: &Task, _prompt: &str, attempt: u32)
        -> Result<GenerationRecord, InfraError> {
        let dir = self.root.join(&model.id).join(&task.id);
        let read = |p: &PathBuf| std::fs::read_to_string(p).map_err(|e| InfraError::new("pregen", format!("{}: {e}", p.display())));
        let code = dir.join(format!("attempt_{attempt}.v"));
        let raw = dir.join(format!("attempt_{attempt}.txt"));
        let (raw_response, extracted) = if code.exists() {
            let text = read(&code)?;
            (text.clone(), Extraction::Code { text })
        } else if raw.exists() {
            let text = read(&raw)?;
            let ex = extract_code(&text);
            (text, ex)
        } else {
            return Err(InfraError::new(
                "pregen",
                format!("missing {} (or .txt)", code.display()),
            ));
        };
        let meta = dir.join(format!("attempt_{attempt}.meta"));
        let inference = if meta.exists() {
            serde_json::from_str(&read(&meta)?)
                .map_err(|e| InfraError::new("pregen", format!("{}: {e}", meta.display())))?
        } else {
            InferenceMeta::default()
        };
        Ok(GenerationRecord {
            raw_response,
            extracted,
            inference,
            temperature: None,
        })
    }
}

/// Injected so tests do not wait out real backoff.
pub trait Sleeper: Send + Sync {
    fn sleep(&self, d: Duration);
}

pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Waits before the 1st, 2nd and 3rd retry.
pub const RETRY_BACKOFF: [Duration; 3] = [Duration::from_secs(1), Duration::from_secs(4), Duration::from_secs(16)];

enum CallError {
    /// Worth retrying: transport failure, 429, 5xx.
    Transient(String),
    Fatal(String),
}

pub struct ChatEndpoint {
    sleeper: Box<dyn Sleeper>,
}

impl Default for ChatEndpoint {
    fn default() -> Self {
        Self::new(Box::new(ThreadSleeper))
    }
}

struct Streamed {
    content: String,
    ttft: Option<Duration>,
    total: Duration,
    usage: Option<Value>,
}

impl ChatEndpoint {
    pub fn new(sleeper: Box<dyn Sleeper>) -> Self {
        Self { sleeper }
    }

    fn call(&self, ep: &EndpointConfig, token: &str, prompt: &str) -> Result<Streamed, CallError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(ep.request_timeout_s)))
            .http_status_as_error(false)
            .build()
            .into();
        let mut body = json!({
            "model": ep.model,
            "messages": [{"role": "user", "content": prompt}],
            "stream": true,
            "usage": {"include": true},
            "stream_options": {"include_usage": true},
        });
        if let Some(t) = ep.temperature {
            body["temperature"] = json!(t);
        }
        if let Some(m) = ep.max_tokens {
            body["max_tokens"] = json!(m);
        }
        let url = format!("{}/chat/completions", ep.base_url.trim_end_matches('/'));
        let start = Instant::now();
        let resp = agent
            .post(&url)
            .header("Authorization", &format!("Bearer {token}"))
            .send_json(&body)
            .map_err(|e| CallError::Transient(format!("transport: {e}")))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(CallError::Transient(format!("http status {status}")));
        }
        if status >= 400 {
            return Err(CallError::Fatal(format!("http status {status}")));
        }
        let reader = BufReader::new(resp.into_body().into_reader());
        let mut out = Streamed {
            content: String::new(),
            ttft: None,
            total: Duration::ZERO,
            usage: None,
        };
        for line in reader.lines() {
            let line = line.map_err(|e| CallError::Transient(format!("stream: {e}")))?;
            let Some(data) = line.strip_prefix("data:").map(str::trim) else { continue };
            if data == "[DONE]" {
                break;
            }
            let Ok(chunk) = serde_json::from_str::<Value>(data) else { continue };
            if let Some(err) = chunk.get("error") {
                return Err(CallError::Transient(format!("provider error: {err}")));
            }
            let delta = &chunk["choices"][0]["delta"];
            let piece = delta["content"].as_str().unwrap_or("");
            let thinking = delta["reasoning"].as_str().unwrap_or("");
            if out.ttft.is_none() && !(piece.is_empty() && thinking.is_empty()) {
                out.ttft = Some(start.elapsed());
            }
            out.content.push_str(piece);
            if chunk.get("usage").is_some_and(|u| !u.is_null()) {
                out.usage = Some(chunk["usage"].clone());
            }
        }
        out.total = start.elapsed();
        Ok(out)
    }
}

fn meta_from(s: &Streamed) -> InferenceMeta {
    let usage = s.usage.as_ref();
    let completion = usage.and_then(|u| u["completion_tokens"].as_u64());
    let reasoning = usage.map(|u| u["completion_tokens_details"]["reasoning_tokens"].as_u64().unwrap_or(0));
    let ttft = s.ttft.map(|d| d.as_secs_f64());
    let gen_time = s.total.as_secs_f64() - ttft.unwrap_or(0.0);
    InferenceMeta {
        cost_usd: usage.and_then(|u| u["cost"].as_f64()),
        reasoning_tokens: reasoning,
        completion_tokens: completion,
        throughput_tok_per_s: completion.filter(|_| gen_time > 0.0).map(|c| c as f64 / gen_time),
        ttft_s: ttft,
    }
}

impl Generator for ChatEndpoint {
    fn generate(&self, model: &ModelConfig, _task: &Task, prompt: &str, _attempt: u32)
        -> Result<GenerationRecord, InfraError> {
        let ep = model
            .endpoint
            .as_ref()
            .ok_or_else(|| InfraError::new("generate", format!("model `{}` has no endpoint", model.id)))?;
        let token = std::env::var(&ep.auth_env)
            .map_err(|_| InfraError::new("generate", format!("environment variable `{}` is not set", ep.auth_env)))?;
        let mut last = String::new();
        for retry in 0..=RETRY_BACKOFF.len() {
            if retry > 0 {
                log::warn!("{}: retry {retry} after {last}", model.id);
                self.sleeper.sleep(RETRY_BACKOFF[retry - 1]);
            }
            match self.call(ep, &token, prompt) {
                Ok(s) => {
                    return Ok(GenerationRecord {
                        extracted: extract_code(&s.content),
                        inference: meta_from(&s),
                        raw_response: s.content,
                        temperature: ep.temperature,
                    })
                }
                Err(CallError::Fatal(m)) => return Err(InfraError::new("generate", m)),
                Err(CallError::Transient(m)) => last = m,
            }
        }
        Err(InfraError::new(
            "generate",
            format!("giving up after {} retries: {last}", RETRY_BACKOFF.len()),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reasoning_ratio() {
        let m = InferenceMeta {
            reasoning_tokens: Some(300),
            completion_tokens: Some(100),
            ..Default::default()
        };
        assert_eq!(m.reasoning_ratio(), Some(0.75));
        assert_eq!(InferenceMeta::default().reasoning_ratio(), None);
        let zero = InferenceMeta {
            reasoning_tokens: Some(0),
            completion_tokens: Some(0),
            ..Default::default()
        };
        assert_eq!(zero.reasoning_ratio(), None);
    }

    #[test]
    fn backoff_schedule() {
        assert_eq!(RETRY_BACKOFF.map(|d| d.as_secs()), [1, 4, 16]);
    }
}
