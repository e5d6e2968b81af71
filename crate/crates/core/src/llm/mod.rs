//! Chat-provider contract, retries, and a process-wide in-flight limiter.

pub mod extract;
pub mod http;
pub mod json_repair;
pub mod prompts;
pub mod scripted;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{extract_attitude, extract_judge_rating, extract_lessons};
pub use http::{HttpChatConfig, HttpChatProvider};
pub use scripted::{ScriptedProvider, ScriptedRuleSet};

pub const AGENT_TEMPERATURE: f64 = 0.7;
pub const NEWS_TEMPERATURE: f64 = 1.5;
pub const JUDGE_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_PARALLELISM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChatParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: Option<u64>,
}

impl ChatParams {
    pub fn agent(seed: u64) -> Self {
        Self {
            temperature: AGENT_TEMPERATURE,
            max_tokens: 512,
            seed: Some(seed),
        }
    }
}

impl Default for ChatParams {
    fn default() -> Self {
        Self {
            temperature: AGENT_TEMPERATURE,
            max_tokens: 512,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("http status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
}

/// Anything that turns a chat transcript into a completion.
pub trait ChatProvider: Send + Sync {
    fn complete(&self, messages: &[Message], params: &ChatParams) -> Result<String, ProviderError>;
    fn id(&self) -> String;
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GatewayError {
    #[error("provider failed after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: ProviderError },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub backoff_multiplier: f64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            initial_backoff_ms: 500,
            backoff_multiplier: 2.0,
            max_backoff_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    pub fn immediate(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            initial_backoff_ms: 0,
            ..Self::default()
        }
    }

    fn backoff(&self, failed_attempts: u32) -> Duration {
        let factor = self.backoff_multiplier.powi(failed_attempts.saturating_sub(1) as i32);
        let ms = (self.initial_backoff_ms as f64 * factor).min(self.max_backoff_ms as f64);
        Duration::from_millis(ms as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub attempts: u32,
}

/// Calls `provider` until it succeeds or `policy.max_attempts` is used up,
/// sleeping with exponential backoff in between.
pub fn complete_with_retry(
    provider: &dyn ChatProvider,
    messages: &[Message],
    params: &ChatParams,
    policy: &RetryPolicy,
) -> Result<Completion, GatewayError> {
    let max = policy.max_attempts.max(1);
    let mut attempt = 0;
    loop {
        attempt += 1;
        match provider.complete(messages, params) {
            Ok(text) => {
                if attempt > 1 {
                    log::info!("{}: succeeded on attempt {attempt}", provider.id());
                }
                return Ok(Completion { text, attempts: attempt });
            }
            Err(e) => {
                log::warn!("{}: attempt {attempt}/{max} failed: {e}", provider.id());
                if attempt >= max {
                    return Err(GatewayError::Exhausted { attempts: attempt, last: e });
                }
                let wait = policy.backoff(attempt);
                if !wait.is_zero() {
                    std::thread::sleep(wait);
                }
            }
        }
    }
}

/// Counting semaphore bounding concurrent provider calls.
#[derive(Debug)]
pub struct Limiter {
    max: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

pub struct Permit<'a> {
    limiter: &'a Limiter,
}

impl Limiter {
    pub fn new(max: usize) -> Self {
        Self {
            max: max.max(1),
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().expect("limiter lock");
        while *n >= self.max {
            n = self.freed.wait(n).expect("limiter lock");
        }
        *n += 1;
        Permit { limiter: self }
    }

    pub fn capacity(&self) -> usize {
        self.max
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.limiter.in_flight.lock().expect("limiter lock");
        *n -= 1;
        self.limiter.freed.notify_one();
    }
}

/// Shareable handle: provider + retry policy + in-flight limiter.
#[derive(Clone)]
pub struct Gateway {
    provider: Arc<dyn ChatProvider>,
    retry: RetryPolicy,
    limiter: Arc<Limiter>,
    calls: Arc<AtomicU64>,
}

impl Gateway {
    pub fn new(provider: Arc<dyn ChatProvider>, retry: RetryPolicy, parallelism: usize) -> Self {
        Self {
            provider,
            retry,
            limiter: Arc::new(Limiter::new(parallelism)),
            calls: Arc::new(AtomicU64::new(0)),
        }
    }

    pub fn provider_id(&self) -> String {
        self.provider.id()
    }

    pub fn complete(&self, messages: &[Message], params: &ChatParams) -> Result<Completion, GatewayError> {
        let _permit = self.limiter.acquire();
        self.calls.fetch_add(1, Ordering::Relaxed);
        complete_with_retry(self.provider.as_ref(), messages, params, &self.retry)
    }

    /// Number of `complete` calls issued through this handle and its clones.
    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;

    struct Flaky {
        failures: u32,
        seen: AtomicU64,
    }

    impl ChatProvider for Flaky {
        fn complete(&self, _: &[Message], _: &ChatParams) -> Result<String, ProviderError> {
            let n = self.seen.fetch_add(1, Ordering::SeqCst) as u32;
            if n < self.failures {
                Err(ProviderError::Transport(format!("boom {n}")))
            } else {
                Ok("ok".into())
            }
        }
        fn id(&self) -> String {
            "flaky".into()
        }
    }

    #[test]
    fn scripted_needs_no_retry() {
        let p = ScriptedProvider::new(ScriptedRuleSet::policy_sensitive(), 1);
        let c = complete_with_retry(&p, &[Message::user("hello")], &ChatParams::default(), &RetryPolicy::immediate(3)).unwrap();
        assert_eq!(c.attempts, 1);
        let again = complete_with_retry(&p, &[Message::user("hello")], &ChatParams::default(), &RetryPolicy::immediate(3)).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn retries_then_succeeds() {
        let p = Flaky { failures: 2, seen: AtomicU64::new(0) };
        let c = complete_with_retry(&p, &[], &ChatParams::default(), &RetryPolicy::immediate(3)).unwrap();
        assert_eq!(c.attempts, 3);
        assert_eq!(c.text, "ok");
    }

    #[test]
    fn exhaustion_reports_last_failure() {
        let p = Flaky { failures: u32::MAX, seen: AtomicU64::new(0) };
        let err = complete_with_retry(&p, &[], &ChatParams::default(), &RetryPolicy::immediate(3)).unwrap_err();
        assert_eq!(
            err,
            GatewayError::Exhausted { attempts: 3, last: ProviderError::Transport("boom 2".into()) }
        );
        assert_eq!(p.seen.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn backoff_grows_and_caps() {
        let p = RetryPolicy::default();
        assert_eq!(p.backoff(1), Duration::from_millis(500));
        assert_eq!(p.backoff(2), Duration::from_millis(1000));
        assert_eq!(p.backoff(10), Duration::from_millis(8000));
    }

    #[test]
    fn limiter_bounds_concurrency() {
        let limiter = Arc::new(Limiter::new(2));
        let live = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let (limiter, live, peak) = (limiter.clone(), live.clone(), peak.clone());
                std::thread::spawn(move || {
                    let _p = limiter.acquire();
                    let now = live.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(5));
                    live.fetch_sub(1, Ordering::SeqCst);
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
