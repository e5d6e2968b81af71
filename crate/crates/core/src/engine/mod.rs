//! The per-step simulation loop.
//!
//! Within a step every agent reads the same snapshot (corpus view, tweets
//! from earlier steps, risk, policy) and its own state; new tweets are merged
//! at the step barrier, so processing order never matters.

pub mod config;
pub mod record;

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use thiserror::Error;

use crate::attitude::{
    modulate, sample_attitude, validate_and_repair, AttitudeDistribution, ModulationTemperature, RepairKind,
};
use crate::content::{
    find_policy, generate_balanced_corpus, load_news_corpus, load_policy_catalog, load_risk_series, builtin_policies,
    placeholder_few_shot, risk_sentence, synthetic_risk_series, ContentError, CorpusView, Group, NewsItem, Policy,
    RiskSeries,
};
use crate::exec::{map_mut, ExecutionMode};
use crate::llm::prompts::{self, NO_LESSONS};
use crate::llm::{extract_attitude, extract_lessons, ChatParams, Gateway, GatewayError, Message};
use crate::memory::{Lesson, LessonSource, MemoryError, MemoryStore};
use crate::persona::{
    load_marginals, profile_string_with, sample_population, DemographicMarginals, MarginalsError, Persona,
    ProfileOptions,
};
use crate::recommend::{
    max_sim, sample_candidate_pool, score_news, top_k, tweet_score_from_sim, CachedEmbedder, EmbedError, Embedding, RecommendError,
    ScoredCandidate,
};
use crate::rng::{stream, stream_key, Purpose};
use crate::socialnet::{generate_network, load_edges, FollowGraph, SocialNetError};

pub use config::{ConfigError, SimulationConfig};
pub use record::{
    AgentStepRecord, CallKind, CorpusSummary, EventCounts, LessonEntry, LoggedCall, RunEnd, RunHeader, RunMeta,
    RunRecord, RunStatus, StepRecord, StepSummary, TweetRef,
};

/// Tag separating the recency tie-break hash from other stream keys.
const TWEET_CAP_TAG: u64 = 0x7477_6565_7463_6170;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Content(#[from] ContentError),
    #[error(transparent)]
    SocialNet(#[from] SocialNetError),
    #[error(transparent)]
    Marginals(#[from] MarginalsError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("expected {expected} personas, got {got}")]
    PersonaCount { expected: usize, got: usize },
    #[error("follow graph has {got} agents, expected {expected}")]
    GraphSize { expected: usize, got: usize },
    #[error("seed {0} appears more than once in the batch")]
    DuplicateSeed(u64),
    #[error("run has no steps to measure")]
    NoSteps,
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("run log: {0}")]
    Log(String),
    #[error("run log line {line}: {message}")]
    LogParse { line: usize, message: String },
}

/// Inputs shared by every run of a batch.
pub struct SharedInputs {
    pub corpus: Vec<NewsItem>,
    pub marginals: DemographicMarginals,
    pub risk: RiskSeries,
    pub policy: Option<Policy>,
    /// Personas and graph fixed across seeds, when pinned.
    pub population: Option<(Vec<Persona>, FollowGraph)>,
    pub embedder: Arc<CachedEmbedder>,
}

impl SharedInputs {
    /// Loads or generates everything that does not depend on the run seed.
    /// Generated material is seeded with `config.seed`.
    pub fn prepare(config: &SimulationConfig, gateway: &Gateway) -> Result<Self, EngineError> {
        config.validate()?;
        let corpus = match &config.news.corpus {
            Some(path) => load_news_corpus(path)?,
            None => {
                let few_shot = match &config.news.few_shot {
                    Some(path) => read_lines(path)?,
                    None => placeholder_few_shot(),
                };
                let mode = config.execution.effective();
                generate_balanced_corpus(gateway, config.news.generate_per_stance, &few_shot, config.seed, mode)?
            }
        };
        Self::prepare_with_corpus(config, gateway, corpus)
    }

    /// As [`SharedInputs::prepare`] with the news corpus supplied.
    pub fn prepare_with_corpus(
        config: &SimulationConfig,
        gateway: &Gateway,
        corpus: Vec<NewsItem>,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        let marginals = match &config.population.marginals {
            Some(path) => load_marginals(path)?.0,
            None => DemographicMarginals::bundled(),
        };
        let risk = match &config.risk.series {
            Some(path) => load_risk_series(path)?,
            None => synthetic_risk_series(
                config.steps.max(1),
                &config.risk.shape,
                &mut stream(config.seed, Purpose::Risk, &[]),
            )?,
        };
        let policy = resolve_policy(config)?;
        let pin = !config.population.resample_per_seed || config.network.edges.is_some();
        if config.population.resample_per_seed && config.network.edges.is_some() {
            log::warn!("a pinned edge list also pins the personas; sampling them once with seed {}", config.seed);
        }
        let population = if pin {
            Some(sample_agents(config, &marginals, config.seed, gateway)?)
        } else {
            None
        };
        Ok(Self {
            corpus,
            marginals,
            risk,
            policy,
            population,
            embedder: config.embedding.embedder()?,
        })
    }
}

fn read_lines(path: &std::path::Path) -> Result<Vec<String>, EngineError> {
    let text = std::fs::read_to_string(path).map_err(|source| EngineError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

pub fn resolve_policy(config: &SimulationConfig) -> Result<Option<Policy>, EngineError> {
    let Some(choice) = &config.policy else {
        return Ok(None);
    };
    let catalog = match choice.catalog.as_ref().or(config.policy_catalog.as_ref()) {
        Some(path) => load_policy_catalog(path)?,
        None => builtin_policies(),
    };
    find_policy(&catalog, choice.category, choice.effort)
        .cloned()
        .map(Some)
        .ok_or_else(|| {
            ConfigError::Invalid(format!(
                "policy {}_{} not in catalog",
                choice.category.as_str(),
                choice.effort.as_str()
            ))
            .into()
        })
}

fn sample_agents(
    config: &SimulationConfig,
    marginals: &DemographicMarginals,
    seed: u64,
    gateway: &Gateway,
) -> Result<(Vec<Persona>, FollowGraph), EngineError> {
    let personas = sample_population(marginals, config.n_agents, seed);
    let graph = match &config.network.edges {
        Some(path) => load_edges(path, config.n_agents)?,
        None => generate_network(&personas, gateway, seed, config.execution.effective())?.0,
    };
    Ok((personas, graph))
}

/// Everything one run reads.
pub struct RunInputs {
    pub personas: Vec<Persona>,
    pub graph: FollowGraph,
    pub view: CorpusView,
    pub risk: RiskSeries,
    pub policy: Option<Policy>,
    pub embedder: Arc<CachedEmbedder>,
}

pub fn prepare_run(
    config: &SimulationConfig,
    shared: &SharedInputs,
    seed: u64,
    gateway: &Gateway,
) -> Result<RunInputs, EngineError> {
    let (personas, graph) = match &shared.population {
        Some((p, g)) => (p.clone(), g.clone()),
        None => sample_agents(config, &shared.marginals, seed, gateway)?,
    };
    let view = CorpusView::with_mix(&shared.corpus, config.news.mix, &mut stream(seed, Purpose::CorpusView, &[]))?;
    Ok(RunInputs {
        personas,
        graph,
        view,
        risk: shared.risk.clone(),
        policy: shared.policy.clone(),
        embedder: Arc::clone(&shared.embedder),
    })
}

struct Tweet {
    id: usize,
    author: usize,
    posted_at: u32,
    text: String,
    embedding: Arc<Embedding>,
}

struct AgentState {
    profile: String,
    memory: MemoryStore,
    /// Embeddings of the agent's own tweets.
    history: Vec<Arc<Embedding>>,
    /// Last repaired (unmodulated) distribution.
    last: Option<AttitudeDistribution>,
}

struct StepCtx<'a> {
    config: &'a SimulationConfig,
    seed: u64,
    t: u32,
    view: &'a CorpusView,
    news_emb: &'a [Arc<Embedding>],
    /// Tweets inside the read window, all posted before `t`.
    window: &'a [&'a Tweet],
    graph: &'a FollowGraph,
    policy: Option<&'a Policy>,
    risk: f64,
    temperature: ModulationTemperature,
    gateway: &'a Gateway,
}

#[derive(Debug, Error)]
enum StepFailure {
    #[error("agent {agent} at step {step}: {source}")]
    Gateway { agent: usize, step: u32, source: GatewayError },
    #[error("agent {agent} at step {step}: {source}")]
    Recommend { agent: usize, step: u32, source: RecommendError },
    #[error("agent {agent} at step {step}: {source}")]
    Memory { agent: usize, step: u32, source: MemoryError },
    #[error("step {step}: {source}")]
    Embed { step: u32, source: EmbedError },
}

struct AgentOutcome {
    record: AgentStepRecord,
    counts: EventCounts,
}

struct AgentTurn<'a, 'b> {
    ctx: &'b StepCtx<'a>,
    agent: usize,
    calls: Vec<LoggedCall>,
    counts: EventCounts,
}

impl AgentTurn<'_, '_> {
    fn ask(&mut self, kind: CallKind, system: &str, user: &str) -> Result<String, StepFailure> {
        let c = self.ctx;
        let params = ChatParams {
            temperature: c.config.llm.agent_temperature,
            max_tokens: c.config.llm.max_tokens,
            seed: Some(stream_key(c.seed, &[self.agent as u64, u64::from(c.t), kind.tag()])),
        };
        let messages = [Message::system(system), Message::user(user)];
        let reply = c.gateway.complete(&messages, &params).map_err(|source| StepFailure::Gateway {
            agent: self.agent,
            step: c.t,
            source,
        })?;
        self.counts.calls += 1;
        if c.config.log_prompts {
            self.calls.push(LoggedCall {
                kind,
                system: prompts::compact(system),
                user: prompts::compact(user),
                response: reply.text.clone(),
            });
        }
        Ok(reply.text)
    }

    fn lessons(
        &mut self,
        kind: CallKind,
        source: LessonSource,
        system: &str,
        user: &str,
    ) -> Result<Vec<Lesson>, StepFailure> {
        let reply = self.ask(kind, system, user)?;
        let extraction = extract_lessons(&reply);
        self.counts.lesson_calls += 1;
        if extraction.repaired {
            self.counts.lesson_json_repaired += 1;
        }
        if extraction.lessons.is_empty() {
            self.counts.lesson_empty += 1;
        }
        Ok(extraction
            .lessons
            .into_iter()
            .take(self.ctx.config.news.lessons_per_source)
            .map(|(text, importance)| Lesson::new(text, importance, self.ctx.t, source))
            .collect())
    }
}

fn lesson_system(state: &AgentState, t: u32, k: usize, agent: usize) -> Result<String, StepFailure> {
    let salient = state
        .memory
        .top_k_salient(t, k)
        .map_err(|source| StepFailure::Memory { agent, step: t, source })?;
    let block = prompts::lesson_block(salient.iter().map(|s| (s.lesson.text.as_str(), s.lesson.importance)));
    Ok(prompts::agent_system(&state.profile, &block))
}

fn numbered<'s>(items: impl IntoIterator<Item = &'s str>) -> String {
    items
        .into_iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {s}", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

fn select_news(ctx: &StepCtx<'_>, i: usize, state: &AgentState) -> Result<Vec<usize>, RecommendError> {
    let (seed, t) = (ctx.seed, u64::from(ctx.t));
    let pool = sample_candidate_pool(
        ctx.view.len(),
        ctx.config.news.pool_size,
        &mut stream(seed, Purpose::NewsPool, &[i as u64, t]),
    )?;
    let scored = pool
        .into_iter()
        .map(|idx| {
            Ok(ScoredCandidate {
                item: idx,
                score: score_news(&state.history, &ctx.news_emb[idx])?,
                tie_break_key: ctx.view.items[idx].id as u64,
            })
        })
        .collect::<Result<Vec<_>, RecommendError>>()?;
    let top = top_k(scored, ctx.config.news.k, &mut stream(seed, Purpose::NewsColdStart, &[i as u64, t]))?;
    Ok(top.into_iter().map(|c| c.item).collect())
}

fn select_tweets<'t>(ctx: &StepCtx<'t>, i: usize, state: &AgentState) -> Result<Vec<&'t Tweet>, RecommendError> {
    let cfg = &ctx.config.tweets;
    let mut candidates: Vec<&Tweet> = ctx.window.iter().copied().filter(|tw| tw.author != i).collect();
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    if candidates.len() > cfg.pool_cap {
        // newest first; same-step ties in a per-reader hashed order
        candidates.sort_by_key(|tw| {
            (
                std::cmp::Reverse(tw.posted_at),
                stream_key(ctx.seed, &[TWEET_CAP_TAG, i as u64, tw.id as u64]),
            )
        });
        candidates.truncate(cfg.pool_cap);
    }
    // identical texts share one cached vector, so MaxSim is memoized per vector
    let mut sims: HashMap<*const Embedding, f64> = HashMap::new();
    let mut scored = Vec::with_capacity(candidates.len());
    for (pos, tw) in candidates.iter().enumerate() {
        let sim = match sims.get(&Arc::as_ptr(&tw.embedding)) {
            Some(&s) => s,
            None => {
                let s = max_sim(&state.history, &tw.embedding)?;
                sims.insert(Arc::as_ptr(&tw.embedding), s);
                s
            }
        };
        let age = i64::from(ctx.t) - i64::from(tw.posted_at);
        let follows = ctx.graph.follows(i, tw.author);
        scored.push(ScoredCandidate {
            item: pos,
            score: tweet_score_from_sim(sim, age, follows, cfg.decay, cfg.follow_bonus)?,
            tie_break_key: tw.id as u64,
        });
    }
    let top = top_k(scored, cfg.k, &mut stream(ctx.seed, Purpose::TweetColdStart, &[i as u64, u64::from(ctx.t)]))?;
    Ok(top.into_iter().map(|c| candidates[c.item]).collect())
}

fn clean_tweet(text: &str) -> Option<String> {
    let t = text.trim().trim_matches('"').trim();
    (!t.is_empty()).then(|| t.to_string())
}

fn agent_step(ctx: &StepCtx<'_>, i: usize, state: &mut AgentState) -> Result<AgentOutcome, StepFailure> {
    let t = ctx.t;
    let cfg = ctx.config;
    let k_src = cfg.news.lessons_per_source;
    let rec_err = |source| StepFailure::Recommend { agent: i, step: t, source };

    // (a) news, (b) policy, (c) risk, (d) tweets
    let news = select_news(ctx, i, state).map_err(rec_err)?;
    let policy = ctx.policy.filter(|_| t >= cfg.warmup);
    let risk_text = risk_sentence(ctx.risk);
    let tweets = select_tweets(ctx, i, state).map_err(rec_err)?;

    // (e) lessons from every delivered source, all against the same snapshot
    let mut turn = AgentTurn { ctx, agent: i, calls: Vec::new(), counts: EventCounts::default() };
    let system = lesson_system(state, t, cfg.memory.k_lessons, i)?;
    let mut fresh = Vec::new();
    let news_text = numbered(news.iter().map(|&idx| ctx.view.items[idx].text.as_str()));
    fresh.extend(turn.lessons(
        CallKind::NewsLesson,
        LessonSource::News,
        &system,
        &prompts::news_lesson(&news_text, k_src),
    )?);
    if let Some(p) = policy {
        fresh.extend(turn.lessons(
            CallKind::PolicyLesson,
            LessonSource::Policy,
            &system,
            &prompts::policy_lesson(&p.description, k_src),
        )?);
    }
    fresh.extend(turn.lessons(
        CallKind::RiskLesson,
        LessonSource::Risk,
        &system,
        &prompts::risk_lesson(&risk_text, k_src),
    )?);
    if !tweets.is_empty() {
        let tweet_text = numbered(tweets.iter().map(|tw| tw.text.as_str()));
        fresh.extend(turn.lessons(
            CallKind::TweetLesson,
            LessonSource::Tweet,
            &system,
            &prompts::tweet_lesson(&tweet_text, k_src),
        )?);
    }
    let lessons_added: Vec<LessonEntry> = fresh
        .iter()
        .map(|l| LessonEntry { text: l.text.clone(), importance: l.importance, source: l.source })
        .collect();
    turn.counts.lessons_added = fresh.len() as u64;
    state.memory.add_lessons(fresh);

    // (f) one new tweet, readable from t + 1
    let system = lesson_system(state, t, cfg.memory.k_lessons, i)?;
    let tweet_text = clean_tweet(&turn.ask(CallKind::TweetWrite, &system, &prompts::tweet_write(t + 1))?);
    let tweet_posted = tweet_text.as_ref().map(|_| t as usize * cfg.n_agents + i);
    if tweet_posted.is_some() {
        turn.counts.tweets_posted += 1;
    }

    // (g) attitude: elicit, repair, modulate, sample
    let reply = if t == 0 {
        let system = prompts::agent_system(&state.profile, NO_LESSONS);
        turn.ask(CallKind::Attitude, &system, &prompts::initial_attitude())?
    } else {
        let prev = state.last.unwrap_or(AttitudeDistribution::UNIFORM);
        turn.ask(CallKind::Attitude, &system, &prompts::weekly_attitude(t + 1, &risk_text, prev.probs()))?
    };
    let (reasoning, raw, repaired) = match extract_attitude(&reply) {
        Ok(ex) => {
            let r = validate_and_repair(&ex.raw, state.last.as_ref());
            (ex.reasoning, Some(ex.raw), r)
        }
        Err(e) => {
            log::debug!("agent {i} step {t}: unparseable attitude reply ({e})");
            turn.counts.attitude_parse_failures += 1;
            let r = validate_and_repair(&[f64::NAN; 4], state.last.as_ref());
            (String::new(), None, r)
        }
    };
    match repaired.repair {
        RepairKind::None => {}
        RepairKind::Renormalized => turn.counts.attitude_renormalized += 1,
        RepairKind::Fallback => turn.counts.attitude_fallback += 1,
        RepairKind::Uniform => turn.counts.attitude_uniform += 1,
    }
    let modulated = modulate(&repaired.distribution, ctx.temperature);
    let sample = sample_attitude(&modulated, &mut stream(ctx.seed, Purpose::AttitudeSample, &[i as u64, u64::from(t)]));
    state.last = Some(repaired.distribution);

    let record = AgentStepRecord {
        step: t,
        agent: i,
        news_shown: news.iter().map(|&idx| ctx.view.items[idx].id).collect(),
        policy_shown: policy.is_some(),
        risk: ctx.risk,
        tweets_read: tweets
            .iter()
            .map(|tw| TweetRef { id: tw.id, author: tw.author, posted_at: tw.posted_at })
            .collect(),
        tweet_posted,
        tweet_text,
        lessons_added,
        reasoning,
        raw,
        repaired: *repaired.distribution.probs(),
        repair: repaired.repair,
        modulated: *modulated.probs(),
        sample: sample.value,
        hesitant: sample.hesitant,
        calls: turn.calls,
    };
    Ok(AgentOutcome { record, counts: turn.counts })
}

/// Runs one seed to completion or to the first provider failure. A failure
/// yields an `Aborted` record holding every completed step.
pub fn run(
    config: &SimulationConfig,
    inputs: &RunInputs,
    gateway: &Gateway,
    seed: u64,
) -> Result<RunRecord, EngineError> {
    config.validate()?;
    let n = config.n_agents;
    if inputs.personas.len() != n {
        return Err(EngineError::PersonaCount { expected: n, got: inputs.personas.len() });
    }
    if inputs.graph.n_agents() != n {
        return Err(EngineError::GraphSize { expected: n, got: inputs.graph.n_agents() });
    }
    if let Some((position, p)) = inputs.personas.iter().enumerate().find(|(i, p)| p.agent_id != *i) {
        return Err(EngineError::Config(ConfigError::Invalid(format!(
            "persona at position {position} has agent_id {}",
            p.agent_id
        ))));
    }
    let started = Instant::now();
    let started_unix_secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mode: ExecutionMode = config.execution.effective();
    let temperature = ModulationTemperature::new(config.temperature)
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;

    let header = RunHeader {
        seed,
        provider: gateway.provider_id(),
        embedder: inputs.embedder.provider_id(),
        policy: inputs.policy.clone(),
        corpus: CorpusSummary {
            size: inputs.view.len(),
            pos: inputs.view.count(Group::Pos),
            neg: inputs.view.count(Group::Neg),
        },
        n_edges: inputs.graph.len(),
        risk: (0..config.steps).map(|t| (t, inputs.risk.rate_at(t))).collect(),
        personas: inputs.personas.clone(),
        config: config.clone(),
    };
    let options = ProfileOptions { include_race: config.population.include_race };
    let mut agents = inputs
        .personas
        .iter()
        .map(|p| {
            Ok(AgentState {
                profile: profile_string_with(p, options),
                memory: MemoryStore::new(p.agent_id, config.memory.decay)
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?,
                history: Vec::new(),
                last: None,
            })
        })
        .collect::<Result<Vec<_>, EngineError>>()?;

    let mut steps: Vec<StepRecord> = Vec::with_capacity(config.steps as usize);
    let mut counts = EventCounts::default();
    let mut tweets: Vec<Tweet> = Vec::new();
    let mut failure: Option<StepFailure> = None;

    let news_texts: Vec<String> = inputs.view.items.iter().map(|it| it.text.clone()).collect();
    let news_emb = if config.steps > 0 {
        match inputs.embedder.embed_many(&news_texts) {
            Ok(v) => v,
            Err(source) => {
                failure = Some(StepFailure::Embed { step: 0, source });
                Vec::new()
            }
        }
    } else {
        Vec::new()
    };

    let policy = inputs.policy.as_ref();
    for t in 0..config.steps {
        if failure.is_some() {
            break;
        }
        let lo = t.saturating_sub(config.tweets.window_steps);
        let window: Vec<&Tweet> = tweets.iter().filter(|tw| tw.posted_at >= lo && tw.posted_at < t).collect();
        let ctx = StepCtx {
            config,
            seed,
            t,
            view: &inputs.view,
            news_emb: &news_emb,
            window: &window,
            graph: &inputs.graph,
            policy,
            risk: inputs.risk.rate_at(t),
            temperature,
            gateway,
        };
        let outcomes = map_mut(mode, &mut agents, |i, state| agent_step(&ctx, i, state));
        let mut records = Vec::with_capacity(n);
        for outcome in outcomes {
            match outcome {
                Ok(o) => {
                    counts.add(&o.counts);
                    records.push(o.record);
                }
                Err(e) => {
                    failure.get_or_insert(e);
                }
            }
        }
        if failure.is_some() {
            break;
        }

        // barrier: embed and publish this step's tweets
        let posted: Vec<(usize, String)> = records
            .iter()
            .filter_map(|r| r.tweet_text.clone().map(|text| (r.agent, text)))
            .collect();
        let texts: Vec<String> = posted.iter().map(|(_, s)| s.clone()).collect();
        let embs = match inputs.embedder.embed_many(&texts) {
            Ok(v) => v,
            Err(source) => {
                failure = Some(StepFailure::Embed { step: t, source });
                break;
            }
        };
        for ((author, text), emb) in posted.into_iter().zip(embs) {
            let history = &mut agents[author].history;
            // repeated texts add nothing to MaxSim
            if !history.iter().any(|h| Arc::ptr_eq(h, &emb)) {
                history.push(Arc::clone(&emb));
            }
            tweets.push(Tweet { id: t as usize * n + author, author, posted_at: t, text, embedding: emb });
        }
        let n_hesitant = records.iter().filter(|r| r.hesitant).count();
        steps.push(StepRecord {
            summary: StepSummary {
                step: t,
                n_samples: records.len(),
                n_hesitant,
                hesitancy: n_hesitant as f64 / records.len() as f64,
            },
            agents: records,
        });
        log::info!("seed {seed} step {t}: hesitancy {:.3}", steps[steps.len() - 1].hesitancy());
    }

    let end = RunEnd {
        status: if failure.is_some() { RunStatus::Aborted } else { RunStatus::Completed },
        steps_completed: steps.len() as u32,
        counts,
        error: failure.as_ref().map(|f| f.to_string()),
    };
    if let Some(f) = &failure {
        log::error!("seed {seed}: run aborted: {f}");
    }
    Ok(RunRecord {
        header,
        steps,
        end,
        meta: RunMeta { seed, wall_clock_secs: started.elapsed().as_secs_f64(), started_unix_secs },
    })
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub records: Vec<RunRecord>,
    /// Some member run aborted.
    pub partial: bool,
}

impl BatchResult {
    pub fn completed(&self) -> impl Iterator<Item = &RunRecord> {
        self.records.iter().filter(|r| r.is_complete())
    }
}

/// Independent runs, one per seed, sharing `shared`.
pub fn run_batch(
    config: &SimulationConfig,
    shared: &SharedInputs,
    gateway: &Gateway,
    seeds: &[u64],
) -> Result<BatchResult, EngineError> {
    let mut seen = BTreeSet::new();
    if let Some(dup) = seeds.iter().find(|s| !seen.insert(**s)) {
        return Err(EngineError::DuplicateSeed(*dup));
    }
    let mut records = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let inputs = prepare_run(config, shared, seed, gateway)?;
        records.push(run(config, &inputs, gateway, seed)?);
    }
    let partial = records.iter().any(|r| !r.is_complete());
    Ok(BatchResult { records, partial })
}

/// Mean hesitancy over the last three steps (fewer when the run is shorter).
pub fn end_hesitancy(record: &RunRecord) -> Result<f64, EngineError> {
    let traj = record.trajectory();
    if traj.is_empty() {
        return Err(EngineError::NoSteps);
    }
    if traj.len() < 3 {
        log::warn!("run has {} steps; end hesitancy averages all of them", traj.len());
    }
    let tail = &traj[traj.len().saturating_sub(3)..];
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

/// Hesitancy at the last warmup step, `W - 1`.
pub fn warmup_hesitancy(record: &RunRecord) -> Result<f64, EngineError> {
    let w = record.config().warmup;
    if w == 0 {
        return Err(EngineError::NoSteps);
    }
    record
        .steps
        .iter()
        .find(|s| s.step() == w - 1)
        .map(StepRecord::hesitancy)
        .ok_or(EngineError::NoSteps)
}

/// Hesitancy fraction recomputed from the per-agent samples.
pub fn recompute_hesitancy(step: &StepRecord) -> Result<f64, EngineError> {
    if step.agents.is_empty() {
        return Err(EngineError::NoSteps);
    }
    Ok(step.agents.iter().filter(|a| a.sample <= 2).count() as f64 / step.agents.len() as f64)
}

#[cfg(test)]
mod tests;
