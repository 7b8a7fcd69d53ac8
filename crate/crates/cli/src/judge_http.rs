//! Judge client for an OpenAI-style chat-completions endpoint.
//!
//! Each disputed pair is one `POST` with body
//!
//! ```json
//! {"model":"judge","temperature":0,
//!  "messages":[{"role":"system","content":"..."},
//!              {"role":"user","content":"{\"task\":\"object\",\"a\":\"person\",\"b\":\"man\",\"scene\":\"objects[3]...\"}"}]}
//! ```
//!
//! The user message is itself JSON: `task` is `object` or `predicate`;
//! predicate questions add `subject` and `object` labels. The verdict is read
//! from `choices[0].message.content`, either `{"equivalent": true|false}` or
//! a leading `yes`/`no`/`true`/`false`.

use std::time::Duration;

use serde_json::{json, Value};
use sgkit_core::metrics::{JudgeClient, JudgeError};

use crate::config::JudgeSettings;

const SYSTEM_PROMPT: &str =
    "You compare names from a scene graph. Given two object labels, or two \
relation predicates between the same subject and object, decide whether they denote the same thing \
in the given scene. Reply with JSON only: {\"equivalent\": true} or {\"equivalent\": false}.";

pub struct HttpJudge {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    token: Option<String>,
    retries: u32,
}

impl HttpJudge {
    /// Builds a client; the bearer token is read from `settings.token_env`
    /// if that variable is set.
    pub fn new(endpoint: &str, settings: &JudgeSettings) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(settings.timeout_secs)))
            .build()
            .into();
        Self {
            agent,
            endpoint: endpoint.to_string(),
            model: settings.model.clone(),
            token: std::env::var(&settings.token_env)
                .ok()
                .filter(|t| !t.is_empty()),
            retries: settings.retries,
        }
    }

    fn ask(&self, question: Value) -> Result<bool, JudgeError> {
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": question.to_string()},
            ],
        });
        let mut last = JudgeError::Transport("no attempt made".into());
        for attempt in 0..=self.retries {
            if attempt > 0 {
                log::debug!("judge retry {attempt} after: {last}");
            }
            let mut req = self.agent.post(&self.endpoint);
            if let Some(t) = &self.token {
                req = req.header("Authorization", format!("Bearer {t}"));
            }
            match req.send_json(&body) {
                Ok(mut resp) => match resp.body_mut().read_json::<Value>() {
                    Ok(v) => return parse_verdict(&v),
                    Err(e) => last = JudgeError::BadVerdict(e.to_string()),
                },
                Err(e) => last = JudgeError::Transport(e.to_string()),
            }
        }
        Err(last)
    }
}

/// Extracts the verdict from a chat-completions response.
pub fn parse_verdict(response: &Value) -> Result<bool, JudgeError> {
    let content = response
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| JudgeError::BadVerdict("missing choices[0].message.content".into()))?
        .trim();
    if let Some(b) = serde_json::from_str::<Value>(content)
        .ok()
        .and_then(|v| v.get("equivalent")?.as_bool())
    {
        return Ok(b);
    }
    let word: String = content
        .chars()
        .take_while(|c| c.is_alphabetic())
        .collect::<String>()
        .to_lowercase();
    match word.as_str() {
        "yes" | "true" => Ok(true),
        "no" | "false" => Ok(false),
        _ => Err(JudgeError::BadVerdict(content.chars().take(80).collect())),
    }
}

impl JudgeClient for HttpJudge {
    fn judge_objects(&self, a: &str, b: &str, ctx: &str) -> Result<bool, JudgeError> {
        if a == b {
            return Ok(true);
        }
        self.ask(json!({"task": "object", "a": a, "b": b, "scene": ctx}))
    }

    fn judge_predicates(
        &self,
        a: &str,
        b: &str,
        s: &str,
        o: &str,
        ctx: &str,
    ) -> Result<bool, JudgeError> {
        if a == b {
            return Ok(true);
        }
        self.ask(
            json!({"task": "predicate", "a": a, "b": b, "subject": s, "object": o, "scene": ctx}),
        )
    }
}
