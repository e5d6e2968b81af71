//! Trajectory comparison against a reference series and LLM-written
//! qualitative analysis of run logs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::engine::RunRecord;
use crate::exec::{map_range, ExecutionMode};
use crate::llm::prompts::{ANALYSIS_SYSTEM, META_ANALYSIS_SYSTEM};
use crate::llm::{ChatParams, Gateway, Message};
use crate::persona::profile_string;
use crate::rng::{stream, stream_key, Purpose};

/// Observed hesitancy by week, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSeries {
    pub points: BTreeMap<u32, f64>,
}

impl ReferenceSeries {
    /// Parses `week,hesitancy_percent` rows; a header line is optional.
    pub fn parse_csv(text: &str, path: &str) -> Result<Self, EvalError> {
        let mut points = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("week")) {
                continue;
            }
            let err = |message: String| EvalError::Parse { path: path.to_string(), line: i + 1, message };
            let (w, h) = line.split_once(',').ok_or_else(|| err("expected week,hesitancy_percent".into()))?;
            let week = w.trim().parse::<u32>().map_err(|e| err(format!("week: {e}")))?;
            let pct = h.trim().parse::<f64>().map_err(|e| err(format!("hesitancy: {e}")))?;
            if !(0.0..=100.0).contains(&pct) {
                return Err(err(format!("hesitancy {pct} outside [0, 100]")));
            }
            if points.insert(week, pct).is_some() {
                return Err(err(format!("duplicate week {week}")));
            }
        }
        if points.is_empty() {
            return Err(EvalError::Parse { path: path.to_string(), line: 0, message: "no data rows".into() });
        }
        Ok(Self { points })
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| EvalError::Io { path: path.display().to_string(), source })?;
        Self::parse_csv(&text, &path.display().to_string())
    }

    /// Value at the nearest reference week (earlier week on ties), or `None`
    /// outside the covered range.
    pub fn at_week(&self, week: u32) -> Option<f64> {
        let (&lo, _) = self.points.first_key_value()?;
        let (&hi, _) = self.points.last_key_value()?;
        if week < lo || week > hi {
            return None;
        }
        let below = self.points.range(..=week).next_back();
        let above = self.points.range(week..).next();
        match (below, above) {
            (Some((&bw, &bv)), Some((&aw, &av))) => Some(if week - bw <= aw - week { bv } else { av }),
            (Some((_, &v)), None) | (None, Some((_, &v))) => Some(v),
            (None, None) => None,
        }
    }
}

/// Mean absolute difference, in percentage points, between a simulated
/// trajectory (fractions, step `t` = week `t + 1`) and the reference over
/// the weeks both cover.
pub fn mae_vs_reference(trajectory: &[f64], reference: &ReferenceSeries) -> Result<f64, EvalError> {
    let diffs: Vec<f64> = trajectory
        .iter()
        .enumerate()
        .filter_map(|(t, &h)| reference.at_week(t as u32 + 1).map(|r| (100.0 * h - r).abs()))
        .collect();
    if diffs.is_empty() {
        return Err(EvalError::Mismatch("trajectory and reference series do not overlap".into()));
    }
    Ok(diffs.iter().sum::<f64>() / diffs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisScope {
    PerAgent,
    Meta,
}

impl FromStr for AnalysisScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per_agent" | "per-agent" => Ok(Self::PerAgent),
            "meta" => Ok(Self::Meta),
            other => Err(format!("unknown analysis scope {other:?} (per_agent | meta)")),
        }
    }
}

/// Which weeks of which run fed a section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub agent: usize,
    pub steps: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSection {
    pub title: String,
    pub sources: Vec<Provenance>,
    /// Model output, or a failure marker.
    pub text: String,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub scope: AnalysisScope,
    pub provider: String,
    pub sections: Vec<AnalysisSection>,
    pub meta: Option<AnalysisSection>,
}

impl AnalysisReport {
    pub fn is_empty(&self) -> bool {
        self.sections.is_empty() && self.meta.is_none()
    }

    pub fn failures(&self) -> usize {
        self.sections.iter().chain(self.meta.as_ref()).filter(|s| s.failed).count()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in self.sections.iter().chain(self.meta.as_ref()) {
            let _ = writeln!(out, "## {}", s.title);
            for p in &s.sources {
                let _ = writeln!(out, "source: seed {} agent {} weeks {:?}", p.seed, p.agent, p.steps.iter().map(|t| t + 1).collect::<Vec<_>>());
            }
            let _ = writeln!(out, "\n{}\n", s.text.trim_end());
        }
        out
    }
}

/// One line per week: answer, hesitancy flag, what was read, lessons and tweet.
pub fn agent_dataset(record: &RunRecord, agent: usize) -> Option<(String, Vec<u32>)> {
    let persona = record.header.personas.get(agent)?;
    let mut out = format!("Agent {agent} (seed {}): {}\n", record.seed(), profile_string(persona));
    let mut steps = Vec::new();
    for st in &record.steps {
        let Some(a) = st.agents.iter().find(|a| a.agent == agent) else { continue };
        steps.push(a.step);
        let lessons: Vec<&str> = a.lessons_added.iter().map(|l| l.text.as_str()).collect();
        let _ = writeln!(
            out,
            "week={} answer={} hesitant={} news={} policy={} tweets_read={} reasoning={:?} lessons={:?} tweet={:?}",
            a.step + 1,
            a.sample,
            a.hesitant,
            a.news_shown.len(),
            a.policy_shown,
            a.tweets_read.len(),
            a.reasoning,
            lessons,
            a.tweet_text.as_deref().unwrap_or("")
        );
    }
    Some((out, steps))
}

/// Samples up to `n_agents` agents from each run and asks for one analysis
/// per agent; `Meta` scope adds a synthesis over those analyses.
pub fn analysis_report(
    records: &[RunRecord],
    gateway: &Gateway,
    scope: AnalysisScope,
    n_agents: usize,
    seed: u64,
    temperature: f64,
    mode: ExecutionMode,
) -> AnalysisReport {
    let mut picks: Vec<(usize, usize)> = Vec::new();
    for (ri, r) in records.iter().enumerate() {
        let n = r.header.personas.len();
        let mut rng = stream(seed, Purpose::ReportSample, &[r.seed()]);
        let mut chosen: Vec<usize> = sample(&mut rng, n, n_agents.min(n)).into_vec();
        chosen.sort_unstable();
        picks.extend(chosen.into_iter().map(|a| (ri, a)));
    }
    let provider = gateway.provider_id();
    let ask = |system: &str, user: String, key: u64| -> Result<String, String> {
        let params = ChatParams { temperature, max_tokens: 2048, seed: Some(key) };
        gateway
            .complete(&[Message::system(system), Message::user(user)], &params)
            .map(|c| c.text)
            .map_err(|e| e.to_string())
    };
    let sections: Vec<AnalysisSection> = map_range(mode, picks.len(), |i| {
        let (ri, agent) = picks[i];
        let r = &records[ri];
        let (data, steps) = agent_dataset(r, agent).unwrap_or_default();
        let (text, failed) = match ask(ANALYSIS_SYSTEM, data, stream_key(seed, &[r.seed(), agent as u64])) {
            Ok(t) => (t, false),
            Err(e) => {
                log::warn!("analysis for seed {} agent {agent} failed: {e}", r.seed());
                (format!("[analysis unavailable: {e}]"), true)
            }
        };
        AnalysisSection {
            title: format!("Seed {} agent {agent}", r.seed()),
            sources: vec![Provenance { seed: r.seed(), agent, steps }],
            text,
            failed,
        }
    });
    let meta = (scope == AnalysisScope::Meta && !sections.is_empty()).then(|| {
        let mut user = String::new();
        for s in &sections {
            let _ = writeln!(user, "{}: {}", s.title, s.text.replace('\n', " "));
        }
        for r in records {
            for st in &r.steps {
                let _ = writeln!(user, "seed {} week {} hesitancy {:.3}", r.seed(), st.step() + 1, st.hesitancy());
            }
        }
        let (text, failed) = match ask(META_ANALYSIS_SYSTEM, user, stream_key(seed, &[u64::MAX])) {
            Ok(t) => (t, false),
            Err(e) => {
                log::warn!("meta-analysis failed: {e}");
                (format!("[meta-analysis unavailable: {e}]"), true)
            }
        };
        AnalysisSection {
            title: "Meta-analysis".into(),
            sources: sections.iter().flat_map(|s| s.sources.clone()).collect(),
            text,
            failed,
        }
    });
    AnalysisReport { scope, provider, sections, meta }
}
