use std::sync::atomic::{AtomicU64, Ordering};

use super::config::PolicyChoice;
use super::*;
use crate::content::{Effort, PolicyCategory};
use crate::llm::{ChatProvider, ProviderError, RetryPolicy, ScriptedProvider, ScriptedRuleSet};

fn small_config() -> SimulationConfig {
    let mut c = SimulationConfig { n_agents: 6, steps: 5, warmup: 2, seeds: vec![1, 2], ..Default::default() };
    c.news.generate_per_stance = 6;
    c.log_prompts = true;
    c.llm.retry = RetryPolicy::immediate(1);
    c.policy = Some(PolicyChoice { category: PolicyCategory::Incentive, effort: Effort::Strong, catalog: None });
    c
}

fn scripted() -> Gateway {
    Gateway::new(Arc::new(ScriptedProvider::new(ScriptedRuleSet::policy_sensitive(), 0)), RetryPolicy::immediate(1), 4)
}

fn run_once(config: &SimulationConfig, seed: u64) -> RunRecord {
    let gw = scripted();
    let shared = SharedInputs::prepare(config, &gw).unwrap();
    let inputs = prepare_run(config, &shared, seed, &gw).unwrap();
    run(config, &inputs, &gw, seed).unwrap()
}

#[test]
fn zero_steps_no_calls() {
    let mut c = small_config();
    c.steps = 0;
    c.warmup = 0;
    c.news.corpus = None;
    let gw = scripted();
    let shared = SharedInputs::prepare(&c, &gw).unwrap();
    let inputs = prepare_run(&c, &shared, 3, &gw).unwrap();
    let before = gw.call_count();
    let rec = run(&c, &inputs, &gw, 3).unwrap();
    assert_eq!(gw.call_count(), before);
    assert!(rec.steps.is_empty());
    assert!(rec.is_complete());
}

#[test]
fn warmup_gate_and_causality() {
    let c = small_config();
    let rec = run_once(&c, 7);
    assert_eq!(rec.steps.len(), 5);
    let policy = rec.header.policy.clone().unwrap();
    for step in &rec.steps {
        assert_eq!(step.agents.len(), c.n_agents);
        for a in &step.agents {
            assert_eq!(a.policy_shown, a.step >= c.warmup);
            assert!(a.tweets_read.iter().all(|tw| tw.posted_at < a.step));
            assert!(a.tweets_read.iter().all(|tw| tw.author != a.agent));
            if a.step < c.warmup {
                assert!(a.calls.iter().all(|call| !call.user.contains(&policy.description)));
            }
        }
        assert_eq!(recompute_hesitancy(step).unwrap(), step.hesitancy());
    }
    assert!(rec.steps[1].agents.iter().any(|a| !a.tweets_read.is_empty()));
}

#[test]
fn deterministic_and_mode_free() {
    let mut c = small_config();
    let a = run_once(&c, 11).to_jsonl();
    let b = run_once(&c, 11).to_jsonl();
    assert_eq!(a, b);
    c.execution = ExecutionMode::Sequential;
    let s = run_once(&c, 11).to_jsonl();
    // the config snapshot differs only in the execution key
    let strip = |log: &str| log.lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&a), strip(&s));
    assert_ne!(a, run_once(&small_config(), 12).to_jsonl());
}

#[test]
fn log_round_trip() {
    let rec = run_once(&small_config(), 5);
    let back = RunRecord::from_jsonl(rec.to_jsonl().as_bytes()).unwrap();
    assert_eq!(back.header, rec.header);
    assert_eq!(back.steps, rec.steps);
    assert_eq!(back.end, rec.end);
    assert!(RunRecord::from_jsonl("{\"type\":\"run_end\"}".as_bytes()).is_err());
}

#[test]
fn end_hesitancy_tail_mean() {
    let mut rec = run_once(&small_config(), 5);
    for (s, h) in rec.steps.iter_mut().zip([0.1, 0.2, 0.40, 0.42, 0.44]) {
        s.summary.hesitancy = h;
    }
    assert!((end_hesitancy(&rec).unwrap() - 0.42).abs() < 1e-12);
    assert_eq!(warmup_hesitancy(&rec).unwrap(), 0.2);
    rec.steps.truncate(2);
    assert!((end_hesitancy(&rec).unwrap() - 0.15).abs() < 1e-12);
    rec.steps.clear();
    assert!(end_hesitancy(&rec).is_err());
}

struct FailAfter {
    inner: ScriptedProvider,
    left: AtomicU64,
}

impl ChatProvider for FailAfter {
    fn complete(&self, messages: &[Message], params: &ChatParams) -> Result<String, ProviderError> {
        if self.left.fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1)).is_err() {
            return Err(ProviderError::Transport("down".into()));
        }
        self.inner.complete(messages, params)
    }

    fn id(&self) -> String {
        "fail-after".into()
    }
}

#[test]
fn provider_exhaustion_aborts_with_partial_record() {
    let mut c = small_config();
    c.execution = ExecutionMode::Sequential;
    let good = scripted();
    let shared = SharedInputs::prepare(&c, &good).unwrap();
    let inputs = prepare_run(&c, &shared, 1, &good).unwrap();
    let provider = FailAfter { inner: ScriptedProvider::new(ScriptedRuleSet::policy_sensitive(), 0), left: AtomicU64::new(60) };
    let gw = Gateway::new(Arc::new(provider), RetryPolicy::immediate(2), 1);
    let rec = run(&c, &inputs, &gw, 1).unwrap();
    assert_eq!(rec.end.status, RunStatus::Aborted);
    assert!(rec.end.error.is_some());
    assert!(!rec.steps.is_empty() && rec.steps.len() < c.steps as usize);
    assert_eq!(rec.end.steps_completed as usize, rec.steps.len());
}

#[test]
fn batch_rejects_duplicates_and_counts() {
    let c = small_config();
    let gw = scripted();
    let shared = SharedInputs::prepare(&c, &gw).unwrap();
    assert!(matches!(run_batch(&c, &shared, &gw, &[1, 2, 1]), Err(EngineError::DuplicateSeed(1))));
    let batch = run_batch(&c, &shared, &gw, &[1, 2, 3]).unwrap();
    assert_eq!(batch.records.len(), 3);
    assert!(!batch.partial);
    let seeds: Vec<u64> = batch.records.iter().map(RunRecord::seed).collect();
    assert_eq!(seeds, vec![1, 2, 3]);
}

#[test]
fn persona_count_checked() {
    let c = small_config();
    let gw = scripted();
    let shared = SharedInputs::prepare(&c, &gw).unwrap();
    let mut inputs = prepare_run(&c, &shared, 1, &gw).unwrap();
    inputs.personas.pop();
    assert!(matches!(run(&c, &inputs, &gw, 1), Err(EngineError::PersonaCount { .. })));
}
