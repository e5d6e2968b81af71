//! Run configuration, stored as TOML. Every key has a default, so an empty
//! file is a valid config.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::content::{Effort, PolicyCategory, RiskShape};
use crate::exec::ExecutionMode;
use crate::llm::{
    ChatProvider, Gateway, HttpChatConfig, HttpChatProvider, RetryPolicy, ScriptedProvider, ScriptedRuleSet,
    AGENT_TEMPERATURE, DEFAULT_PARALLELISM, JUDGE_TEMPERATURE, NEWS_TEMPERATURE,
};
use crate::recommend::{
    CachedEmbedder, EmbeddingProvider, HashingEmbedder, HttpEmbedder, HttpEmbeddingConfig, DEFAULT_EMBEDDING_DIM,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub n_agents: usize,
    /// Total steps L.
    pub steps: u32,
    /// Warmup steps W; a policy is delivered from step W on.
    pub warmup: u32,
    /// Modulation temperature T.
    pub temperature: f64,
    pub seed: u64,
    /// Seeds for batch runs.
    pub seeds: Vec<u64>,
    pub execution: ExecutionMode,
    /// Keep every prompt and reply in the run log.
    pub log_prompts: bool,
    pub policy: Option<PolicyChoice>,
    /// Catalog used when the policy choice names none; built-in when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy_catalog: Option<PathBuf>,
    pub news: NewsConfig,
    pub tweets: TweetConfig,
    pub memory: MemoryConfig,
    pub risk: RiskConfig,
    pub population: PopulationConfig,
    pub network: NetworkConfig,
    pub llm: LlmConfig,
    pub embedding: EmbeddingConfig,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_agents: 100,
            steps: 20,
            warmup: 5,
            temperature: 1.0,
            seed: 0,
            seeds: vec![0, 1, 2, 3, 4],
            execution: ExecutionMode::default(),
            log_prompts: false,
            policy: None,
            policy_catalog: None,
            news: NewsConfig::default(),
            tweets: TweetConfig::default(),
            memory: MemoryConfig::default(),
            risk: RiskConfig::default(),
            population: PopulationConfig::default(),
            network: NetworkConfig::default(),
            llm: LlmConfig::default(),
            embedding: EmbeddingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyChoice {
    pub category: PolicyCategory,
    pub effort: Effort,
    /// Catalog file; the built-in catalog when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewsConfig {
    /// Fraction of pos-stance items in the corpus view.
    pub mix: f64,
    pub pool_size: usize,
    pub k: usize,
    /// Items per stance when no corpus file is given.
    pub generate_per_stance: usize,
    pub lessons_per_source: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    /// One exemplar per line; built-in placeholders when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub few_shot: Option<PathBuf>,
}

impl Default for NewsConfig {
    fn default() -> Self {
        Self {
            mix: 0.5,
            pool_size: crate::recommend::DEFAULT_POOL_SIZE,
            k: crate::recommend::DEFAULT_NEWS_K,
            generate_per_stance: 250,
            lessons_per_source: 3,
            corpus: None,
            few_shot: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TweetConfig {
    pub k: usize,
    /// Candidate tweets come from this many previous steps.
    pub window_steps: u32,
    /// Most recent candidates kept before scoring.
    pub pool_cap: usize,
    pub decay: f64,
    pub follow_bonus: f64,
}

impl Default for TweetConfig {
    fn default() -> Self {
        Self {
            k: 3,
            window_steps: 3,
            pool_cap: 200,
            decay: crate::recommend::DEFAULT_TWEET_DECAY,
            follow_bonus: crate::recommend::DEFAULT_FOLLOW_BONUS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemoryConfig {
    pub k_lessons: usize,
    pub decay: f64,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            k_lessons: crate::memory::DEFAULT_TOP_K,
            decay: crate::memory::DEFAULT_LESSON_DECAY,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiskConfig {
    /// `week,rate` CSV; a synthetic curve from `shape` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series: Option<PathBuf>,
    pub shape: RiskShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationConfig {
    /// Draw fresh personas and a fresh follow graph for every seed.
    pub resample_per_seed: bool,
    pub include_race: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub marginals: Option<PathBuf>,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            resample_per_seed: true,
            include_race: false,
            marginals: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Pinned edge list; generated per run when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edges: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Scripted,
    Http,
}

impl std::str::FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scripted" => Ok(Backend::Scripted),
            "http" => Ok(Backend::Http),
            _ => Err(format!("unknown backend `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub backend: Backend,
    pub parallelism: usize,
    pub agent_temperature: f64,
    pub news_temperature: f64,
    pub judge_temperature: f64,
    pub max_tokens: u32,
    pub scripted_seed: u64,
    /// TOML rule set for the scripted backend; the policy-sensitive set when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scripted_rules: Option<PathBuf>,
    pub retry: RetryPolicy,
    pub http: HttpChatConfig,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Scripted,
            parallelism: DEFAULT_PARALLELISM,
            agent_temperature: AGENT_TEMPERATURE,
            news_temperature: NEWS_TEMPERATURE,
            judge_temperature: JUDGE_TEMPERATURE,
            max_tokens: 512,
            scripted_seed: 0,
            scripted_rules: None,
            retry: RetryPolicy::default(),
            http: HttpChatConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingBackend {
    #[default]
    Hashing,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub backend: EmbeddingBackend,
    pub dimension: usize,
    /// JSONL vector cache, loaded before and saved after a run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
    pub http: HttpEmbeddingConfig,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            backend: EmbeddingBackend::Hashing,
            dimension: DEFAULT_EMBEDDING_DIM,
            cache: None,
            http: HttpEmbeddingConfig::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

impl SimulationConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: "<string>".into(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Loads, resolves relative paths against the file's directory, and
    /// validates.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut config: Self = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if let Some(dir) = path.parent() {
            config.resolve_paths(dir);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        std::fs::write(path, self.to_toml_string()).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        if let Some(policy) = &mut self.policy {
            fix(&mut policy.catalog);
        }
        fix(&mut self.policy_catalog);
        fix(&mut self.news.corpus);
        fix(&mut self.news.few_shot);
        fix(&mut self.risk.series);
        fix(&mut self.population.marginals);
        fix(&mut self.network.edges);
        fix(&mut self.llm.scripted_rules);
        fix(&mut self.embedding.cache);
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_agents < 2 {
            return Err(invalid(format!("n_agents must be at least 2, got {}", self.n_agents)));
        }
        if self.warmup > self.steps {
            return Err(invalid(format!("warmup {} exceeds steps {}", self.warmup, self.steps)));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(invalid(format!("temperature must be positive, got {}", self.temperature)));
        }
        let ks = [
            ("news.k", self.news.k),
            ("news.pool_size", self.news.pool_size),
            ("news.lessons_per_source", self.news.lessons_per_source),
            ("tweets.k", self.tweets.k),
            ("tweets.pool_cap", self.tweets.pool_cap),
            ("memory.k_lessons", self.memory.k_lessons),
            ("llm.parallelism", self.llm.parallelism),
        ];
        if let Some((name, _)) = ks.iter().find(|(_, v)| *v == 0) {
            return Err(invalid(format!("{name} must be at least 1")));
        }
        if self.news.k > self.news.pool_size {
            return Err(invalid("news.k exceeds news.pool_size"));
        }
        if !(0.0..=1.0).contains(&self.news.mix) {
            return Err(invalid(format!("news.mix must lie in [0, 1], got {}", self.news.mix)));
        }
        for (name, d) in [("memory.decay", self.memory.decay), ("tweets.decay", self.tweets.decay)] {
            if !(d > 0.0 && d <= 1.0) {
                return Err(invalid(format!("{name} must lie in (0, 1], got {d}")));
            }
        }
        if !(self.tweets.follow_bonus.is_finite() && self.tweets.follow_bonus >= 0.0) {
            return Err(invalid("tweets.follow_bonus must be non-negative"));
        }
        let distinct: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            return Err(invalid("seeds must be distinct"));
        }
        if self.news.corpus.is_none() && self.news.generate_per_stance == 0 {
            return Err(invalid("news.generate_per_stance must be positive without a corpus file"));
        }
        if self.llm.retry.max_attempts == 0 {
            return Err(invalid("llm.retry.max_attempts must be at least 1"));
        }
        if self.embedding.dimension == 0 {
            return Err(invalid("embedding.dimension must be positive"));
        }
        Ok(())
    }
}

impl LlmConfig {
    pub fn scripted_rules(&self) -> Result<ScriptedRuleSet, ConfigError> {
        match &self.scripted_rules {
            None => Ok(ScriptedRuleSet::policy_sensitive()),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                toml::from_str(&text).map_err(|e| ConfigError::Parse {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })
            }
        }
    }

    pub fn provider(&self) -> Result<Arc<dyn ChatProvider>, ConfigError> {
        Ok(match self.backend {
            Backend::Scripted => Arc::new(ScriptedProvider::new(self.scripted_rules()?, self.scripted_seed)),
            Backend::Http => Arc::new(HttpChatProvider::new(self.http.clone())),
        })
    }

    pub fn gateway(&self) -> Result<Gateway, ConfigError> {
        Ok(Gateway::new(self.provider()?, self.retry, self.parallelism))
    }
}

impl EmbeddingConfig {
    pub fn embedder(&self) -> Result<Arc<CachedEmbedder>, ConfigError> {
        let inner: Arc<dyn EmbeddingProvider> = match self.backend {
            EmbeddingBackend::Hashing => Arc::new(HashingEmbedder::new(self.dimension)),
            EmbeddingBackend::Http => {
                let mut http = self.http.clone();
                http.dimension = self.dimension;
                Arc::new(HttpEmbedder::new(http))
            }
        };
        let cached = Arc::new(CachedEmbedder::new(inner));
        if let Some(path) = &self.cache {
            if path.exists() {
                let n = cached.load(path).map_err(|e| ConfigError::Parse {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                log::info!("loaded {n} cached embeddings from {}", path.display());
            }
        }
        Ok(cached)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(SimulationConfig::from_toml_str("").unwrap(), SimulationConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut c = SimulationConfig {
            policy: Some(PolicyChoice { category: PolicyCategory::Mandate, effort: Effort::Weak, catalog: None }),
            ..Default::default()
        };
        c.news.corpus = Some("news.jsonl".into());
        c.llm.backend = Backend::Http;
        let text = c.to_toml_string();
        assert_eq!(SimulationConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "n_agents = 1",
            "steps = 3\nwarmup = 4",
            "temperature = 0.0",
            "seeds = [1, 1]",
            "[news]\nmix = 1.5",
            "[tweets]\nk = 0",
            "[memory]\ndecay = 0.0",
            "bogus = 1",
        ] {
            assert!(SimulationConfig::from_toml_str(text).is_err(), "{text}");
        }
    }

    #[test]
    fn relative_paths_resolve() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sim.toml");
        std::fs::write(&path, "[news]\ncorpus = \"data/news.jsonl\"\n").unwrap();
        let c = SimulationConfig::load(&path).unwrap();
        assert_eq!(c.news.corpus.unwrap(), dir.path().join("data/news.jsonl"));
    }
}
