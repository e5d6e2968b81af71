//! Run records and the JSONL run log.
//!
//! Log layout: one `config` line, then per step one `agent_step` line per
//! agent followed by a `step_summary` line, then a `run_end` line. Nothing
//! time-dependent is written, so scripted runs log byte-identically.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::SimulationConfig;
use super::EngineError;
use crate::attitude::RepairKind;
use crate::content::Policy;
use crate::memory::LessonSource;
use crate::persona::Persona;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub size: usize,
    pub pos: usize,
    pub neg: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub seed: u64,
    pub provider: String,
    pub embedder: String,
    pub policy: Option<Policy>,
    pub corpus: CorpusSummary,
    pub n_edges: usize,
    pub risk: Vec<(u32, f64)>,
    pub personas: Vec<Persona>,
    pub config: SimulationConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRef {
    pub id: usize,
    pub author: usize,
    pub posted_at: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LessonEntry {
    pub text: String,
    pub importance: f64,
    pub source: LessonSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    NewsLesson,
    PolicyLesson,
    RiskLesson,
    TweetLesson,
    TweetWrite,
    Attitude,
}

impl CallKind {
    pub fn tag(self) -> u64 {
        self as u64 + 1
    }
}

/// One chat exchange with the long constant blocks replaced by markers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedCall {
    pub kind: CallKind,
    pub system: String,
    pub user: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStepRecord {
    pub step: u32,
    pub agent: usize,
    pub news_shown: Vec<usize>,
    pub policy_shown: bool,
    pub risk: f64,
    pub tweets_read: Vec<TweetRef>,
    pub tweet_posted: Option<usize>,
    pub tweet_text: Option<String>,
    pub lessons_added: Vec<LessonEntry>,
    pub reasoning: String,
    /// Distribution as parsed, before repair; absent when unparseable.
    pub raw: Option<[f64; 4]>,
    pub repaired: [f64; 4],
    pub repair: RepairKind,
    pub modulated: [f64; 4],
    pub sample: u8,
    pub hesitant: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub calls: Vec<LoggedCall>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub step: u32,
    pub n_samples: usize,
    pub n_hesitant: usize,
    pub hesitancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub agents: Vec<AgentStepRecord>,
    pub summary: StepSummary,
}

impl StepRecord {
    pub fn step(&self) -> u32 {
        self.summary.step
    }

    pub fn hesitancy(&self) -> f64 {
        self.summary.hesitancy
    }
}

/// Generation and repair bookkeeping.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub calls: u64,
    pub lesson_calls: u64,
    pub lessons_added: u64,
    /// Lesson replies that needed JSON repair.
    pub lesson_json_repaired: u64,
    /// Lesson replies that yielded nothing.
    pub lesson_empty: u64,
    pub tweets_posted: u64,
    pub attitude_parse_failures: u64,
    pub attitude_renormalized: u64,
    pub attitude_fallback: u64,
    pub attitude_uniform: u64,
}

impl EventCounts {
    pub fn add(&mut self, other: &EventCounts) {
        self.calls += other.calls;
        self.lesson_calls += other.lesson_calls;
        self.lessons_added += other.lessons_added;
        self.lesson_json_repaired += other.lesson_json_repaired;
        self.lesson_empty += other.lesson_empty;
        self.tweets_posted += other.tweets_posted;
        self.attitude_parse_failures += other.attitude_parse_failures;
        self.attitude_renormalized += other.attitude_renormalized;
        self.attitude_fallback += other.attitude_fallback;
        self.attitude_uniform += other.attitude_uniform;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEnd {
    pub status: RunStatus,
    pub steps_completed: u32,
    pub counts: EventCounts,
    pub error: Option<String>,
}

/// Timing kept out of the log so logs stay reproducible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub seed: u64,
    pub wall_clock_secs: f64,
    pub started_unix_secs: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub header: RunHeader,
    pub steps: Vec<StepRecord>,
    pub end: RunEnd,
    pub meta: RunMeta,
}

impl RunRecord {
    pub fn seed(&self) -> u64 {
        self.header.seed
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.header.config
    }

    pub fn is_complete(&self) -> bool {
        self.end.status == RunStatus::Completed
    }

    pub fn trajectory(&self) -> Vec<f64> {
        self.steps.iter().map(StepRecord::hesitancy).collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), EngineError> {
        let mut line = |rec: &LogRecordRef<'_>| -> Result<(), EngineError> {
            serde_json::to_writer(&mut w, rec).map_err(|e| EngineError::Log(e.to_string()))?;
            w.write_all(b"\n").map_err(|e| EngineError::Log(e.to_string()))
        };
        line(&LogRecordRef::Config(&self.header))?;
        for step in &self.steps {
            for a in &step.agents {
                line(&LogRecordRef::AgentStep(a))?;
            }
            line(&LogRecordRef::StepSummary(&step.summary))?;
        }
        line(&LogRecordRef::RunEnd(&self.end))?;
        w.flush().map_err(|e| EngineError::Log(e.to_string()))
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn save(&self, log_path: &Path) -> Result<(), EngineError> {
        let file = std::fs::File::create(log_path).map_err(|e| EngineError::Io {
            path: log_path.display().to_string(),
            source: e,
        })?;
        self.write_jsonl(std::io::BufWriter::new(file))
    }

    pub fn save_meta(&self, path: &Path) -> Result<(), EngineError> {
        let text = serde_json::to_string_pretty(&self.meta).map_err(|e| EngineError::Log(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| EngineError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn from_jsonl<R: BufRead>(reader: R) -> Result<Self, EngineError> {
        let bad = |line: usize, message: String| EngineError::LogParse { line, message };
        let mut header = None;
        let mut steps: Vec<StepRecord> = Vec::new();
        let mut pending: Vec<AgentStepRecord> = Vec::new();
        let mut end = None;
        for (i, line) in reader.lines().enumerate() {
            let n = i + 1;
            let line = line.map_err(|e| bad(n, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: LogRecord = serde_json::from_str(&line).map_err(|e| bad(n, e.to_string()))?;
            if end.is_some() {
                return Err(bad(n, "record after run_end".into()));
            }
            match rec {
                LogRecord::Config(h) => {
                    if header.replace(*h).is_some() {
                        return Err(bad(n, "second config record".into()));
                    }
                }
                _ if header.is_none() => return Err(bad(n, "log must start with a config record".into())),
                LogRecord::AgentStep(a) => pending.push(*a),
                LogRecord::StepSummary(s) => {
                    if pending.iter().any(|a| a.step != s.step) {
                        return Err(bad(n, format!("agent records do not belong to step {}", s.step)));
                    }
                    steps.push(StepRecord { agents: std::mem::take(&mut pending), summary: s });
                }
                LogRecord::RunEnd(e) => end = Some(e),
            }
        }
        let header = header.ok_or_else(|| bad(0, "empty log".into()))?;
        let end = end.ok_or_else(|| bad(0, "missing run_end record".into()))?;
        if !pending.is_empty() {
            return Err(bad(0, "agent records without a step summary".into()));
        }
        Ok(Self {
            meta: RunMeta { seed: header.seed, ..RunMeta::default() },
            header,
            steps,
            end,
        })
    }

    pub fn load(path: &Path) -> Result<Self, EngineError> {
        let file = std::fs::File::open(path).map_err(|e| EngineError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_jsonl(std::io::BufReader::new(file))
    }
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LogRecordRef<'a> {
    Config(&'a RunHeader),
    AgentStep(&'a AgentStepRecord),
    StepSummary(&'a StepSummary),
    RunEnd(&'a RunEnd),
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LogRecord {
    Config(Box<RunHeader>),
    AgentStep(Box<AgentStepRecord>),
    StepSummary(StepSummary),
    RunEnd(RunEnd),
}
