//! OpenAI-compatible chat-completions backend.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::prompt::{
    format_reminder, parse_choice, parse_likelihood, parse_refined, parse_relevance, render_plan, render_refine,
    render_relevance, render_trajectory,
};
use super::{Reasoner, ReasonerError, RefineRequest, RelevanceRequest, Reply, RequestKind, TrajectoryRequest};
use crate::memory::Relevance;
use crate::planning::PlanContext;
use crate::validation::Likelihood;

pub const API_KEY_ENV: &str = "REVECA_API_KEY";
pub const SYSTEM_PROMPT: &str = "You are a cooperative household agent. Follow the answer format exactly.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteConfig {
    /// Full chat-completions URL.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    /// Extra attempts after the first transport failure.
    pub retries: u32,
    /// First backoff delay; doubles per retry.
    pub backoff_ms: u64,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o-mini".into(),
            temperature: 0.7,
            top_p: 1.0,
            max_tokens: 1024,
            timeout_secs: 60,
            retries: 2,
            backoff_ms: 500,
            api_key_env: API_KEY_ENV.into(),
        }
    }
}

impl RemoteConfig {
    /// Request body for one prompt.
    pub fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": prompt},
            ],
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_tokens": self.max_tokens,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("{0}")]
    Unavailable(String),
    #[error("no fixture for prompt {hash}")]
    FixtureMiss { kind: RequestKind, hash: String },
}

impl From<TransportError> for ReasonerError {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::Unavailable(m) => ReasonerError::Unavailable(m),
            TransportError::FixtureMiss { kind, hash } => ReasonerError::FixtureMiss { kind, hash },
        }
    }
}

/// Sends one rendered prompt and returns the raw completion text.
pub trait ChatTransport: Send {
    fn complete(&mut self, kind: RequestKind, prompt: &str) -> Result<String, TransportError>;
}

impl<T: ChatTransport + ?Sized> ChatTransport for Box<T> {
    fn complete(&mut self, kind: RequestKind, prompt: &str) -> Result<String, TransportError> {
        (**self).complete(kind, prompt)
    }
}

pub struct HttpTransport {
    config: RemoteConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
    calls: usize,
}

impl HttpTransport {
    pub fn new(config: RemoteConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build()
            .into();
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Self { config, agent, api_key, calls: 0 }
    }

    /// HTTP requests issued so far, retries included.
    pub fn calls(&self) -> usize {
        self.calls
    }

    fn send_once(&mut self, body: &Value) -> Result<String, String> {
        self.calls += 1;
        let mut req = self.agent.post(&self.config.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| e.to_string())?;
        let v: Value = resp.body_mut().read_json().map_err(|e| e.to_string())?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| format!("response has no choices[0].message.content: {v}"))
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&mut self, _kind: RequestKind, prompt: &str) -> Result<String, TransportError> {
        let body = self.config.request_body(prompt);
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut last = String::new();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay *= 2;
            }
            match self.send_once(&body) {
                Ok(text) => return Ok(text),
                Err(e) => last = e,
            }
        }
        Err(TransportError::Unavailable(format!("{} attempts failed, last error: {last}", self.config.retries + 1)))
    }
}

/// Reasoner that renders prompts, sends them through a transport and parses
/// the choice-token grammar, reprompting once on a malformed reply.
pub struct LlmReasoner<T: ChatTransport> {
    transport: T,
}

impl<T: ChatTransport> LlmReasoner<T> {
    pub fn new(transport: T) -> Self {
        Self { transport }
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    pub fn into_transport(self) -> T {
        self.transport
    }

    fn ask<V>(&mut self, kind: RequestKind, prompt: String, parse: impl Fn(&str) -> Option<V>) -> Result<Reply<V>, ReasonerError> {
        let start = Instant::now();
        let raw = self.transport.complete(kind, &prompt)?;
        if let Some(v) = parse(&raw) {
            return Ok(Reply { value: v, raw_text: raw, latency_ms: start.elapsed().as_secs_f64() * 1e3 });
        }
        let retry = format!("{prompt}\n\n{}", format_reminder(kind));
        let raw = self.transport.complete(kind, &retry)?;
        match parse(&raw) {
            Some(v) => Ok(Reply { value: v, raw_text: raw, latency_ms: start.elapsed().as_secs_f64() * 1e3 }),
            None => Err(ReasonerError::ParseFailure { kind, raw }),
        }
    }
}

impl<T: ChatTransport> Reasoner for LlmReasoner<T> {
    fn backend(&self) -> &'static str {
        "remote"
    }

    fn relevance(&mut self, req: &RelevanceRequest) -> Result<Reply<Relevance>, ReasonerError> {
        let ladder = req.ladder;
        self.ask(RequestKind::Relevance, render_relevance(req), |t| parse_relevance(t, ladder))
    }

    fn plan(&mut self, ctx: &PlanContext, repair: Option<&str>) -> Result<Reply<usize>, ReasonerError> {
        self.ask(RequestKind::Plan, render_plan(ctx, repair), parse_choice)
    }

    fn trajectory(&mut self, req: &TrajectoryRequest) -> Result<Reply<Likelihood>, ReasonerError> {
        self.ask(RequestKind::Trajectory, render_trajectory(req), parse_likelihood)
    }

    fn refine(&mut self, req: &RefineRequest) -> Result<Reply<String>, ReasonerError> {
        self.ask(RequestKind::Refine, render_refine(req), parse_refined)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    struct Canned(VecDeque<String>, Vec<String>);

    impl ChatTransport for Canned {
        fn complete(&mut self, _kind: RequestKind, prompt: &str) -> Result<String, TransportError> {
            self.1.push(prompt.to_string());
            self.0.pop_front().ok_or_else(|| TransportError::Unavailable("empty".into()))
        }
    }

    fn refine_req() -> RefineRequest {
        RefineRequest { kind: crate::message::MessageKind::InitBroadcast, sender_name: "Alice".into(), draft: "hi".into() }
    }

    #[test]
    fn defaults_match_sampling_settings() {
        let c = RemoteConfig::default();
        let body = c.request_body("p");
        assert_eq!(body["temperature"], 0.7);
        assert_eq!(body["top_p"], 1.0);
        assert_eq!(body["max_tokens"], 1024);
        assert_eq!(c.api_key_env, "REVECA_API_KEY");
    }

    #[test]
    fn reprompt_once_then_fail() {
        let mut r = LlmReasoner::new(Canned(VecDeque::from(["".to_string(), "  ".to_string()]), Vec::new()));
        let err = r.refine(&refine_req()).unwrap_err();
        assert!(matches!(err, ReasonerError::ParseFailure { kind: RequestKind::Refine, .. }));
        let sent = &r.transport().1;
        assert_eq!(sent.len(), 2);
        assert!(sent[1].ends_with(format_reminder(RequestKind::Refine)));
    }

    #[test]
    fn reprompt_recovers() {
        let mut r = LlmReasoner::new(Canned(VecDeque::from(["".to_string(), "Message: hello there".to_string()]), Vec::new()));
        assert_eq!(r.refine(&refine_req()).unwrap().value, "hello there");
    }
}
