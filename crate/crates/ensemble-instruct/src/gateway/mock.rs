//! Scripted backend for offline, reproducible runs.
//!
//! Each entry matches prompts exactly or by prefix and replays its responses
//! in order, cycling when they run out. Exact matches win over prefixes; among
//! prefixes the longest wins.

use std::collections::HashSet;
use std::io::BufRead;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Completion, FinishReason, GatewayError};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptMatcher {
    Exact(String),
    Prefix(String),
}

impl PromptMatcher {
    fn matches(&self, prompt: &str) -> bool {
        match self {
            PromptMatcher::Exact(s) => prompt == s,
            PromptMatcher::Prefix(p) => prompt.starts_with(p.as_str()),
        }
    }
}

/// One script line, e.g. `{"prefix": "instruction:", "responses": ["a", "b"]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockEntry {
    #[serde(flatten)]
    pub matcher: PromptMatcher,
    pub responses: Vec<String>,
    /// Responses reported as cut off at `max_tokens`, by index.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub truncated: Vec<usize>,
}

impl MockEntry {
    pub fn exact(prompt: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            matcher: PromptMatcher::Exact(prompt.into()),
            responses: vec![response.into()],
            truncated: Vec::new(),
        }
    }

    pub fn prefix(prefix: impl Into<String>, response: impl Into<String>) -> Self {
        Self::prefix_cycle(prefix, vec![response.into()])
    }

    pub fn prefix_cycle(prefix: impl Into<String>, responses: Vec<String>) -> Self {
        Self {
            matcher: PromptMatcher::Prefix(prefix.into()),
            responses,
            truncated: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MockCall {
    pub prompt: String,
    /// Index of the entry that answered, `None` on a script miss.
    pub entry: Option<usize>,
    pub response: Option<String>,
}

#[derive(Debug, Default)]
struct State {
    cursors: Vec<usize>,
    calls: Vec<MockCall>,
}

#[derive(Debug)]
pub struct MockScript {
    entries: Vec<MockEntry>,
    state: Mutex<State>,
}

impl MockScript {
    pub fn new(entries: Vec<MockEntry>) -> Result<Self, GatewayError> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(&e.matcher) {
                let text = match &e.matcher {
                    PromptMatcher::Exact(s) | PromptMatcher::Prefix(s) => s.clone(),
                };
                return Err(GatewayError::DuplicateMatcher(text));
            }
            if e.responses.is_empty() {
                return Err(GatewayError::Config("mock entry has no responses".into()));
            }
        }
        Ok(Self {
            state: Mutex::new(State {
                cursors: vec![0; entries.len()],
                calls: Vec::new(),
            }),
            entries,
        })
    }

    /// Reads a JSON Lines script. Blank lines are skipped.
    pub fn parse_entries(reader: impl BufRead) -> Result<Vec<MockEntry>, GatewayError> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| GatewayError::Config(format!("mock script: {e}")))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry = serde_json::from_str(&line)
                .map_err(|e| GatewayError::Config(format!("mock script line {}: {e}", i + 1)))?;
            entries.push(entry);
        }
        Ok(entries)
    }

    fn find(&self, prompt: &str) -> Option<usize> {
        let exact = self
            .entries
            .iter()
            .position(|e| matches!(e.matcher, PromptMatcher::Exact(_)) && e.matcher.matches(prompt));
        exact.or_else(|| {
            self.entries
                .iter()
                .enumerate()
                .filter(|(_, e)| e.matcher.matches(prompt))
                .max_by_key(|(i, e)| match &e.matcher {
                    PromptMatcher::Prefix(p) => (p.len(), usize::MAX - i),
                    PromptMatcher::Exact(_) => (0, 0),
                })
                .map(|(i, _)| i)
        })
    }

    pub fn complete(&self, backend: &str, prompt: &str) -> Result<Completion, GatewayError> {
        let mut state = self.state.lock().expect("mock state poisoned");
        let Some(idx) = self.find(prompt) else {
            state.calls.push(MockCall {
                prompt: prompt.to_string(),
                entry: None,
                response: None,
            });
            return Err(GatewayError::ScriptMiss {
                backend: backend.to_string(),
                prompt: prompt.chars().take(80).collect(),
            });
        };
        let entry = &self.entries[idx];
        let k = state.cursors[idx] % entry.responses.len();
        state.cursors[idx] += 1;
        let text = entry.responses[k].clone();
        state.calls.push(MockCall {
            prompt: prompt.to_string(),
            entry: Some(idx),
            response: Some(text.clone()),
        });
        let finish_reason = if entry.truncated.contains(&k) {
            FinishReason::Length
        } else {
            FinishReason::Stop
        };
        Ok(Completion { text, finish_reason })
    }

    pub fn calls(&self) -> Vec<MockCall> {
        self.state.lock().expect("mock state poisoned").calls.clone()
    }
}
