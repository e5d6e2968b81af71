//! Metrics and evaluation protocols over completed runs.

pub mod judge;
pub mod rank;
pub mod report;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::content::{Effort, NewsItem, PolicyCategory};
use crate::engine::config::PolicyChoice;
use crate::engine::{
    end_hesitancy, run_batch, warmup_hesitancy, BatchResult, EngineError, RunRecord, SharedInputs, SimulationConfig,
};
use crate::llm::{Gateway, GatewayError};

pub use judge::{p4_judge, JudgeCategory, JudgeEpisode, JudgeReport};
pub use rank::{borda_aggregate, kendall_tau_b, tau_exact_pvalue, Ranking, RankError};
pub use report::{analysis_report, mae_vs_reference, AnalysisReport, AnalysisScope, ReferenceSeries};

/// Temperature grid searched by [`p1_align`].
pub const P1_GRID: [f64; 6] = [0.1, 0.5, 0.7, 1.0, 1.5, 2.0];
pub const P1_TARGET: f64 = 0.45;
/// Fewest surviving seeds a protocol accepts.
pub const MIN_SEEDS: usize = 3;
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error("provider failure: {0}")]
    Provider(#[from] GatewayError),
    #[error("summaries are not comparable: {0}")]
    Mismatch(String),
    #[error("protocol failure: {0}")]
    Protocol(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
}

/// End hesitancy of one batch, per seed and averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HesitancySummary {
    /// Policy label, or `none`.
    pub policy: String,
    pub mix: f64,
    pub steps: u32,
    pub warmup: u32,
    pub temperature: f64,
    pub seeds: Vec<u64>,
    /// H_L per seed, aligned with `seeds`.
    pub per_seed: Vec<f64>,
    pub mean: f64,
    /// H_W per seed; `None` when the run has no warmup.
    pub per_seed_warmup: Vec<Option<f64>>,
    pub warmup_mean: Option<f64>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

impl HesitancySummary {
    /// Summarizes the completed runs of a batch; aborted runs are skipped
    /// with a warning.
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a RunRecord>) -> Result<Self, EvalError> {
        let mut first: Option<&RunRecord> = None;
        let (mut seeds, mut per_seed, mut per_seed_warmup) = (Vec::new(), Vec::new(), Vec::new());
        for r in records {
            if !r.is_complete() {
                log::warn!("seed {}: aborted run left out of the summary", r.seed());
                continue;
            }
            let f = *first.get_or_insert(r);
            let (a, b) = (f.config(), r.config());
            if a.news.mix != b.news.mix || a.steps != b.steps || a.warmup != b.warmup || f.header.policy != r.header.policy
            {
                return Err(EvalError::Mismatch(format!("seed {} was run under a different config", r.seed())));
            }
            seeds.push(r.seed());
            per_seed.push(end_hesitancy(r)?);
            per_seed_warmup.push(warmup_hesitancy(r).ok());
        }
        let f = first.ok_or_else(|| EvalError::Protocol("no completed runs to summarize".into()))?;
        let warmup_mean = per_seed_warmup
            .iter()
            .copied()
            .collect::<Option<Vec<f64>>>()
            .map(|v| mean(&v));
        Ok(Self {
            policy: f.header.policy.as_ref().map_or_else(|| "none".to_string(), |p| p.label()),
            mix: f.config().news.mix,
            steps: f.config().steps,
            warmup: f.config().warmup,
            temperature: f.config().temperature,
            mean: mean(&per_seed),
            seeds,
            per_seed,
            per_seed_warmup,
            warmup_mean,
        })
    }

    /// Mean of H_L - H_W, the within-batch drift.
    pub fn drift(&self) -> Result<f64, EvalError> {
        let w = self
            .warmup_mean
            .ok_or_else(|| EvalError::Protocol(format!("batch `{}` has no warmup hesitancy", self.policy)))?;
        Ok(self.mean - w)
    }
}

/// `H_L(p0) - H_L(p)`.
pub fn delta_h(baseline: &HesitancySummary, treated: &HesitancySummary) -> Result<f64, EvalError> {
    if baseline.mix != treated.mix {
        return Err(EvalError::Mismatch(format!("news mix {} vs {}", baseline.mix, treated.mix)));
    }
    if baseline.steps != treated.steps {
        return Err(EvalError::Mismatch(format!("L = {} vs {}", baseline.steps, treated.steps)));
    }
    if baseline.seeds != treated.seeds {
        return Err(EvalError::Mismatch(format!("seeds {:?} vs {:?}", baseline.seeds, treated.seeds)));
    }
    Ok(baseline.mean - treated.mean)
}

/// Runs a batch for a config. Protocols call this once per arm.
pub trait BatchRunner {
    fn run_batch(&mut self, label: &str, config: &SimulationConfig) -> Result<BatchResult, EngineError>;
}

/// Runs batches with the engine, reusing one news corpus across arms and
/// optionally saving every run log.
pub struct EngineRunner<'g> {
    gateway: &'g Gateway,
    corpus: Option<Vec<NewsItem>>,
    log_dir: Option<PathBuf>,
    /// Every batch run so far, in order.
    pub history: Vec<(String, BatchResult)>,
}

impl<'g> EngineRunner<'g> {
    pub fn new(gateway: &'g Gateway) -> Self {
        Self { gateway, corpus: None, log_dir: None, history: Vec::new() }
    }

    pub fn with_log_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.log_dir = Some(dir.into());
        self
    }
}

pub fn run_log_name(label: &str, seed: u64) -> String {
    format!("{label}_seed{seed}.jsonl")
}

impl BatchRunner for EngineRunner<'_> {
    fn run_batch(&mut self, label: &str, config: &SimulationConfig) -> Result<BatchResult, EngineError> {
        let shared = match &self.corpus {
            // generated once, reused by every later arm
            Some(corpus) if config.news.corpus.is_none() => {
                SharedInputs::prepare_with_corpus(config, self.gateway, corpus.clone())?
            }
            _ => SharedInputs::prepare(config, self.gateway)?,
        };
        if self.corpus.is_none() {
            self.corpus = Some(shared.corpus.clone());
        }
        let batch = run_batch(config, &shared, self.gateway, &config.seeds)?;
        if let Some(dir) = &self.log_dir {
            std::fs::create_dir_all(dir).map_err(|source| EngineError::Io { path: dir.display().to_string(), source })?;
            for r in &batch.records {
                r.save(&dir.join(run_log_name(label, r.seed())))?;
                r.save_meta(&dir.join(format!("{label}_seed{}.meta.json", r.seed())))?;
            }
        }
        self.history.push((label.to_string(), batch.clone()));
        Ok(batch)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct P1Row {
    pub temperature: f64,
    pub seeds_used: usize,
    /// Mean of H_W - target.
    pub mean_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct P1Result {
    pub best_temperature: f64,
    pub target: f64,
    pub rows: Vec<P1Row>,
}

/// Warmup-only runs without policy for each temperature; picks the grid
/// point whose mean H_W is closest to `target`, ties going to the smaller T.
pub fn p1_align(
    base: &SimulationConfig,
    grid: &[f64],
    target: f64,
    runner: &mut dyn BatchRunner,
) -> Result<P1Result, EvalError> {
    if grid.is_empty() {
        return Err(EvalError::Protocol("empty temperature grid".into()));
    }
    if base.warmup == 0 {
        return Err(EvalError::Protocol("P1 needs a warmup of at least one step".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &t in grid {
        let mut cfg = base.clone();
        cfg.temperature = t;
        cfg.steps = base.warmup;
        cfg.policy = None;
        let batch = runner.run_batch(&format!("p1_T{t}"), &cfg)?;
        let hw: Vec<f64> = batch.completed().map(warmup_hesitancy).collect::<Result<_, _>>()?;
        let aborted = batch.records.len() - hw.len();
        if aborted > 0 {
            log::warn!("T = {t}: {aborted} aborted runs excluded");
        }
        if hw.len() < MIN_SEEDS {
            return Err(EvalError::Protocol(format!(
                "T = {t}: only {} of {} seeds completed (need {MIN_SEEDS})",
                hw.len(),
                batch.records.len()
            )));
        }
        rows.push(P1Row { temperature: t, seeds_used: hw.len(), mean_error: mean(&hw) - target });
    }
    let best = rows
        .iter()
        .min_by(|a, b| {
            let (ea, eb) = (a.mean_error.abs(), b.mean_error.abs());
            // errors within rounding of each other count as a tie
            let by_error = if (ea - eb).abs() <= TIE_TOLERANCE { std::cmp::Ordering::Equal } else { ea.total_cmp(&eb) };
            by_error.then(a.temperature.total_cmp(&b.temperature))
        })
        .expect("grid is non-empty");
    Ok(P1Result { best_temperature: best.temperature, target, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct P2Result {
    pub category: PolicyCategory,
    pub baseline: HesitancySummary,
    pub weak: HesitancySummary,
    pub strong: HesitancySummary,
    pub delta_weak: f64,
    pub delta_strong: f64,
    /// `delta_strong - delta_weak`.
    pub gap: f64,
}

fn policy_arm(base: &SimulationConfig, category: PolicyCategory, effort: Effort) -> SimulationConfig {
    let mut cfg = base.clone();
    let catalog = base.policy.as_ref().and_then(|p| p.catalog.clone());
    cfg.policy = Some(PolicyChoice { category, effort, catalog });
    cfg
}

fn summarize(batch: &BatchResult) -> Result<HesitancySummary, EvalError> {
    let s = HesitancySummary::from_records(batch.completed())?;
    if s.seeds.len() < MIN_SEEDS {
        return Err(EvalError::Protocol(format!(
            "only {} seeds completed for `{}` (need {MIN_SEEDS})",
            s.seeds.len(),
            s.policy
        )));
    }
    Ok(s)
}

/// Baseline, weak and strong batches under the same mix and seeds.
pub fn p2_effort_gap(
    base: &SimulationConfig,
    category: PolicyCategory,
    runner: &mut dyn BatchRunner,
) -> Result<P2Result, EvalError> {
    let mut p0 = base.clone();
    p0.policy = None;
    let baseline = summarize(&runner.run_batch("p0", &p0)?)?;
    let weak_cfg = policy_arm(base, category, Effort::Weak);
    let strong_cfg = policy_arm(base, category, Effort::Strong);
    let weak = summarize(&runner.run_batch(&format!("{}_weak", category.as_str()), &weak_cfg)?)?;
    let strong = summarize(&runner.run_batch(&format!("{}_strong", category.as_str()), &strong_cfg)?)?;
    let delta_weak = delta_h(&baseline, &weak)?;
    let delta_strong = delta_h(&baseline, &strong)?;
    Ok(P2Result { category, baseline, weak, strong, delta_weak, delta_strong, gap: delta_strong - delta_weak })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct P3Result {
    pub negative: HesitancySummary,
    pub positive: HesitancySummary,
    pub drift_negative: f64,
    pub drift_positive: f64,
    /// `drift_negative - drift_positive`.
    pub gap: f64,
}

/// No-policy batches on all-neg and all-pos news; compares H_L - H_W.
pub fn p3_stance_gap(base: &SimulationConfig, runner: &mut dyn BatchRunner) -> Result<P3Result, EvalError> {
    let arm = |mix: f64| {
        let mut cfg = base.clone();
        cfg.policy = None;
        cfg.news.mix = mix;
        cfg
    };
    let negative = summarize(&runner.run_batch("news_neg", &arm(0.0))?)?;
    let positive = summarize(&runner.run_batch("news_pos", &arm(1.0))?)?;
    let drift_negative = negative.drift()?;
    let drift_positive = positive.drift()?;
    Ok(P3Result { negative, positive, drift_negative, drift_positive, gap: drift_negative - drift_positive })
}

/// Every metrics table as CSV text, keyed by file name.
pub mod csv {
    use super::*;

    pub const RUNS_HEADER: &str = "batch,policy,mix,temperature,seed,steps,warmup,status,h_w,h_l";
    pub const TRAJECTORY_HEADER: &str = "batch,policy,mix,seed,step,hesitancy";

    fn opt(x: Option<f64>) -> String {
        x.map(|v| format!("{v:.6}")).unwrap_or_default()
    }

    /// One row per run: policy x effort x seed.
    pub fn runs(batches: &[(String, BatchResult)]) -> String {
        let mut out = format!("{RUNS_HEADER}\n");
        for (label, b) in batches {
            for r in &b.records {
                let c = r.config();
                let policy = r.header.policy.as_ref().map_or_else(|| "none".to_string(), |p| p.label());
                let status = if r.is_complete() { "completed" } else { "aborted" };
                out.push_str(&format!(
                    "{label},{policy},{},{},{},{},{},{status},{},{}\n",
                    c.news.mix,
                    c.temperature,
                    r.seed(),
                    c.steps,
                    c.warmup,
                    opt(warmup_hesitancy(r).ok()),
                    opt(end_hesitancy(r).ok()),
                ));
            }
        }
        out
    }

    pub fn trajectories(batches: &[(String, BatchResult)]) -> String {
        let mut out = format!("{TRAJECTORY_HEADER}\n");
        for (label, b) in batches {
            for r in &b.records {
                let policy = r.header.policy.as_ref().map_or_else(|| "none".to_string(), |p| p.label());
                for s in &r.steps {
                    out.push_str(&format!(
                        "{label},{policy},{},{},{},{:.6}\n",
                        r.config().news.mix,
                        r.seed(),
                        s.step(),
                        s.hesitancy()
                    ));
                }
            }
        }
        out
    }

    pub fn p1(result: &P1Result) -> String {
        let mut out = String::from("temperature,seeds_used,mean_error,abs_error,best\n");
        for r in &result.rows {
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{}\n",
                r.temperature,
                r.seeds_used,
                r.mean_error,
                r.mean_error.abs(),
                r.temperature == result.best_temperature
            ));
        }
        out
    }

    pub const SUMMARY_HEADER: &str = "arm,policy,mix,n_seeds,h_l_mean,h_w_mean,delta_h";

    fn summary_row(arm: &str, s: &HesitancySummary, delta: Option<f64>) -> String {
        format!(
            "{arm},{},{},{},{:.6},{},{}\n",
            s.policy,
            s.mix,
            s.seeds.len(),
            s.mean,
            opt(s.warmup_mean),
            opt(delta)
        )
    }

    pub fn p2(result: &P2Result) -> String {
        let mut out = format!("{SUMMARY_HEADER}\n");
        out.push_str(&summary_row("baseline", &result.baseline, Some(0.0)));
        out.push_str(&summary_row("weak", &result.weak, Some(result.delta_weak)));
        out.push_str(&summary_row("strong", &result.strong, Some(result.delta_strong)));
        out.push_str(&format!("gap,{},,,,,{:.6}\n", result.category.as_str(), result.gap));
        out
    }

    pub fn p3(result: &P3Result) -> String {
        let mut out = String::from("arm,mix,n_seeds,h_l_mean,h_w_mean,drift\n");
        for (arm, s, d) in [
            ("negative", &result.negative, result.drift_negative),
            ("positive", &result.positive, result.drift_positive),
        ] {
            out.push_str(&format!(
                "{arm},{},{},{:.6},{},{:.6}\n",
                s.mix,
                s.seeds.len(),
                s.mean,
                opt(s.warmup_mean),
                d
            ));
        }
        out.push_str(&format!("gap,,,,,{:.6}\n", result.gap));
        out
    }

    pub fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf, EvalError> {
        std::fs::create_dir_all(dir).map_err(|source| EvalError::Io { path: dir.display().to_string(), source })?;
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|source| EvalError::Io { path: path.display().to_string(), source })?;
        Ok(path)
    }
}
