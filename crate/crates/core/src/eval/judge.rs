//! LLM-as-judge scoring of sampled agent episodes.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::engine::{AgentStepRecord, CallKind, LoggedCall, RunRecord};
use crate::exec::{map_range, ExecutionMode};
use crate::llm::prompts::{
    judge_system, JUDGE_ATTITUDE_SYSTEM, JUDGE_CONVERSATION_SYSTEM, JUDGE_MEMORY_SYSTEM,
};
use crate::llm::{extract_judge_rating, ChatParams, Gateway, Message};
use crate::persona::profile_string;
use crate::rng::{stream, stream_key, Purpose};

pub const DEFAULT_JUDGE_AGENTS: usize = 25;
pub const DEFAULT_EPISODES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JudgeCategory {
    Attitude,
    Memory,
    Conversation,
}

impl JudgeCategory {
    pub const ALL: [JudgeCategory; 3] = [JudgeCategory::Attitude, JudgeCategory::Memory, JudgeCategory::Conversation];

    pub fn as_str(self) -> &'static str {
        match self {
            JudgeCategory::Attitude => "attitude",
            JudgeCategory::Memory => "memory",
            JudgeCategory::Conversation => "conversation",
        }
    }

    fn system_prompt(self) -> String {
        judge_system(match self {
            JudgeCategory::Attitude => JUDGE_ATTITUDE_SYSTEM,
            JudgeCategory::Memory => JUDGE_MEMORY_SYSTEM,
            JudgeCategory::Conversation => JUDGE_CONVERSATION_SYSTEM,
        })
    }

    fn kinds(self) -> &'static [CallKind] {
        match self {
            JudgeCategory::Attitude => &[CallKind::Attitude],
            JudgeCategory::Memory => &[CallKind::NewsLesson, CallKind::PolicyLesson, CallKind::RiskLesson, CallKind::TweetLesson],
            JudgeCategory::Conversation => &[CallKind::TweetWrite],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeEpisode {
    pub seed: u64,
    pub agent: usize,
    pub step: u32,
    /// `None` when the judge reply could not be parsed.
    pub rating: Option<u8>,
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeReport {
    pub category: JudgeCategory,
    pub episodes: Vec<JudgeEpisode>,
    pub mean: Option<f64>,
    pub parse_failures: usize,
    /// Every episode failed to parse (or there were none).
    pub failed: bool,
}

impl JudgeReport {
    pub fn from_episodes(category: JudgeCategory, episodes: Vec<JudgeEpisode>) -> Self {
        let ratings: Vec<u8> = episodes.iter().filter_map(|e| e.rating).collect();
        let parse_failures = episodes.len() - ratings.len();
        let mean = (!ratings.is_empty()).then(|| ratings.iter().map(|&r| f64::from(r)).sum::<f64>() / ratings.len() as f64);
        Self { category, failed: mean.is_none(), episodes, mean, parse_failures }
    }

    pub fn ratings(&self) -> Vec<u8> {
        self.episodes.iter().filter_map(|e| e.rating).collect()
    }
}

fn render_calls(calls: &[&LoggedCall]) -> String {
    calls
        .iter()
        .map(|c| format!("[system]\n{}\n[user]\n{}\n[assistant]\n{}", c.system, c.user, c.response))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Fallback when prompts were not logged: the structured fields of the step.
fn render_fields(category: JudgeCategory, profile: &str, a: &AgentStepRecord) -> String {
    let lessons = a
        .lessons_added
        .iter()
        .map(|l| format!("- {} (importance {:.2})", l.text, l.importance))
        .collect::<Vec<_>>()
        .join("\n");
    match category {
        JudgeCategory::Attitude => format!(
            "Agent profile: {profile}\nWeek {}\nLessons learned this week:\n{lessons}\nAgent reasoning: {}\nStated distribution: {:?}\nSampled answer: {}",
            a.step + 1,
            a.reasoning,
            a.raw.unwrap_or(a.repaired),
            a.sample
        ),
        JudgeCategory::Memory => format!("Agent profile: {profile}\nWeek {}\nLessons and importance:\n{lessons}", a.step + 1),
        JudgeCategory::Conversation => format!(
            "Agent profile: {profile}\nWeek {}\nLessons learned this week:\n{lessons}\nTweet: {}",
            a.step + 1,
            a.tweet_text.as_deref().unwrap_or("")
        ),
    }
}

/// The conversation a judge sees for one agent-step.
pub fn episode_text(category: JudgeCategory, record: &RunRecord, agent: usize, step: u32) -> Option<String> {
    let find = |s: u32| {
        record
            .steps
            .iter()
            .find(|st| st.step() == s)
            .and_then(|st| st.agents.iter().find(|a| a.agent == agent))
    };
    let a = find(step)?;
    let calls: Vec<&LoggedCall> = a.calls.iter().filter(|c| category.kinds().contains(&c.kind)).collect();
    let profile = record.header.personas.get(agent).map(profile_string).unwrap_or_default();
    let mut text = if calls.is_empty() { render_fields(category, &profile, a) } else { render_calls(&calls) };
    if category == JudgeCategory::Attitude && step > 0 {
        if let Some(prev) = find(step - 1) {
            text = format!(
                "Previous week's answer: {} with reasoning: {}\n\n{text}",
                prev.sample, prev.reasoning
            );
        }
    }
    Some(text)
}

/// Samples `n_agents` (run, agent) pairs and `episodes` steps for each, then
/// asks the judge to rate every episode in each category.
pub fn p4_judge(
    records: &[RunRecord],
    gateway: &Gateway,
    n_agents: usize,
    episodes: usize,
    seed: u64,
    temperature: f64,
    mode: ExecutionMode,
) -> Result<Vec<JudgeReport>, EvalError> {
    let pairs: Vec<(usize, usize)> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.steps.is_empty())
        .flat_map(|(ri, r)| (0..r.header.personas.len()).map(move |a| (ri, a)))
        .collect();
    let mut out = Vec::with_capacity(3);
    for category in JudgeCategory::ALL {
        let tag = category as u64;
        let mut rng = stream(seed, Purpose::JudgeSample, &[tag]);
        let picked = sample(&mut rng, pairs.len(), n_agents.min(pairs.len()));
        let mut jobs: Vec<(usize, usize, u32)> = Vec::new();
        for idx in picked.iter() {
            let (ri, agent) = pairs[idx];
            let steps: Vec<u32> = records[ri]
                .steps
                .iter()
                .filter(|s| category != JudgeCategory::Conversation || s.agents.get(agent).is_some_and(|a| a.tweet_text.is_some()))
                .map(|s| s.step())
                .collect();
            let chosen = sample(&mut rng, steps.len(), episodes.min(steps.len()));
            let mut chosen: Vec<u32> = chosen.iter().map(|i| steps[i]).collect();
            chosen.sort_unstable();
            jobs.extend(chosen.into_iter().map(|s| (ri, agent, s)));
        }
        let system = category.system_prompt();
        let results = map_range(mode, jobs.len(), |j| {
            let (ri, agent, step) = jobs[j];
            let r = &records[ri];
            let text = episode_text(category, r, agent, step).unwrap_or_default();
            let params = ChatParams {
                temperature,
                max_tokens: 512,
                seed: Some(stream_key(seed, &[tag, r.seed(), agent as u64, u64::from(step)])),
            };
            let reply = gateway.complete(&[Message::system(system.clone()), Message::user(text)], &params)?;
            let (reasoning, rating) = match extract_judge_rating(&reply.text) {
                Ok((reasoning, rating)) => (reasoning, Some(rating)),
                Err(e) => {
                    log::warn!("judge reply for seed {} agent {agent} step {step} unparseable: {e}", r.seed());
                    (String::new(), None)
                }
            };
            Ok::<_, EvalError>(JudgeEpisode { seed: r.seed(), agent, step, rating, reasoning })
        });
        let eps = results.into_iter().collect::<Result<Vec<_>, _>>()?;
        let report = JudgeReport::from_episodes(category, eps);
        if report.failed {
            log::warn!("judge category {} failed: no parseable ratings", category.as_str());
        }
        out.push(report);
    }
    Ok(out)
}

pub fn judge_csv(reports: &[JudgeReport]) -> String {
    let mut out = String::from("category,episodes,parsed,parse_failures,mean,failed\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.category.as_str(),
            r.episodes.len(),
            r.episodes.len() - r.parse_failures,
            r.parse_failures,
            r.mean.map(|m| format!("{m:.4}")).unwrap_or_default(),
            r.failed
        ));
    }
    out
}
