//! Embedding-based news and tweet recommendation.
//!
//! News is scored by the maximum cosine similarity between the candidate
//! and anything the reader has tweeted. Tweets use the same similarity,
//! decayed by age, plus a fixed bonus when the reader follows the author.

use std::collections::HashMap;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::rng::fnv1a;

pub const DEFAULT_EMBEDDING_DIM: usize = 384;
pub const DEFAULT_TWEET_DECAY: f64 = 0.9;
pub const DEFAULT_FOLLOW_BONUS: f64 = 0.3;
pub const DEFAULT_POOL_SIZE: usize = 9;
pub const DEFAULT_NEWS_K: usize = 3;

#[derive(Debug, Error)]
pub enum RecommendError {
    #[error("embedding dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("negative tweet age {0}")]
    NegativeAge(i64),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("candidate corpus is empty")]
    EmptyCorpus,
}

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding request failed: {0}")]
    Http(String),
    #[error("embedding response malformed: {0}")]
    Malformed(String),
    #[error("embedding provider returned dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("cache io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding(pub Vec<f64>);

impl Embedding {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Scales to unit L2 norm; the zero vector is left unchanged.
    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.0.iter_mut().for_each(|x| *x /= n);
        }
        self
    }
}

impl AsRef<Embedding> for Embedding {
    fn as_ref(&self) -> &Embedding {
        self
    }
}

pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64, RecommendError> {
    if a.dim() != b.dim() {
        return Err(RecommendError::DimensionMismatch(a.dim(), b.dim()));
    }
    // one pass, four lanes per sum so the loop vectorizes
    let (mut dot, mut na, mut nb) = ([0.0f64; 4], [0.0f64; 4], [0.0f64; 4]);
    let (ca, cb) = (a.0.chunks_exact(4), b.0.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            dot[l] += x[l] * y[l];
            na[l] += x[l] * x[l];
            nb[l] += y[l] * y[l];
        }
    }
    let (mut d, mut sa, mut sb) = (dot.iter().sum::<f64>(), na.iter().sum::<f64>(), nb.iter().sum::<f64>());
    for (x, y) in ra.iter().zip(rb) {
        d += x * y;
        sa += x * x;
        sb += y * y;
    }
    let denom = sa.sqrt() * sb.sqrt();
    Ok(if denom > 0.0 { (d / denom).clamp(-1.0, 1.0) } else { 0.0 })
}

/// Maximum cosine similarity between `candidate` and any history entry.
/// An empty history scores 0.0.
pub fn max_sim<E: AsRef<Embedding>>(history: &[E], candidate: &Embedding) -> Result<f64, RecommendError> {
    let mut best: Option<f64> = None;
    for h in history {
        let c = cosine(h.as_ref(), candidate)?;
        best = Some(best.map_or(c, |b: f64| b.max(c)));
    }
    Ok(best.unwrap_or(0.0))
}

pub fn score_news<E: AsRef<Embedding>>(tweet_history: &[E], news: &Embedding) -> Result<f64, RecommendError> {
    max_sim(tweet_history, news)
}

/// `max_sim(history, tweet) * decay^age + bonus * [reader follows author]`.
pub fn score_tweet<E: AsRef<Embedding>>(
    reader_history: &[E],
    tweet: &Embedding,
    tweet_age: i64,
    follows_author: bool,
    decay: f64,
    follow_bonus: f64,
) -> Result<f64, RecommendError> {
    tweet_score_from_sim(max_sim(reader_history, tweet)?, tweet_age, follows_author, decay, follow_bonus)
}

/// [`score_tweet`] with the MaxSim term already computed.
pub fn tweet_score_from_sim(
    sim: f64,
    tweet_age: i64,
    follows_author: bool,
    decay: f64,
    follow_bonus: f64,
) -> Result<f64, RecommendError> {
    if tweet_age < 0 {
        return Err(RecommendError::NegativeAge(tweet_age));
    }
    let bonus = if follows_author { follow_bonus } else { 0.0 };
    Ok(sim * decay.powi(tweet_age as i32) + bonus)
}

/// Uniform sample of `pool_size` distinct indices into a corpus of
/// `corpus_len` items; the whole corpus when it is not larger than the pool.
pub fn sample_candidate_pool<R: Rng + ?Sized>(
    corpus_len: usize,
    pool_size: usize,
    rng: &mut R,
) -> Result<Vec<usize>, RecommendError> {
    if corpus_len == 0 {
        return Err(RecommendError::EmptyCorpus);
    }
    if pool_size >= corpus_len {
        return Ok((0..corpus_len).collect());
    }
    Ok(rand::seq::index::sample(rng, corpus_len, pool_size).into_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub item: usize,
    pub score: f64,
    pub tie_break_key: u64,
}

/// The `k` best candidates by descending score, ties broken by ascending
/// `tie_break_key`. If every score is exactly zero (cold start) `k`
/// candidates are drawn uniformly with `rng` instead.
pub fn top_k<R: Rng + ?Sized>(
    mut candidates: Vec<ScoredCandidate>,
    k: usize,
    rng: &mut R,
) -> Result<Vec<ScoredCandidate>, RecommendError> {
    if k == 0 {
        return Err(RecommendError::ZeroK);
    }
    if candidates.len() <= k && !candidates.iter().all(|c| c.score == 0.0) {
        candidates.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.tie_break_key.cmp(&b.tie_break_key)));
        return Ok(candidates);
    }
    if !candidates.is_empty() && candidates.iter().all(|c| c.score == 0.0) {
        candidates.sort_by_key(|c| c.tie_break_key);
        let take = k.min(candidates.len());
        let picks = rand::seq::index::sample(rng, candidates.len(), take);
        return Ok(picks.iter().map(|i| candidates[i].clone()).collect());
    }
    candidates.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.tie_break_key.cmp(&b.tie_break_key)));
    candidates.truncate(k);
    Ok(candidates)
}

/// A source of sentence embeddings.
pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, EmbedError>;
    fn dimension(&self) -> usize;
    fn id(&self) -> String;
}

/// Offline embedder: hashes lowercase word unigrams and bigrams into signed
/// buckets, then L2-normalizes. Identical text gives identical vectors in
/// every process.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    pub fn embed_one(&self, text: &str) -> Embedding {
        let tokens: Vec<String> = text
            .split(|c: char| !c.is_alphanumeric() && c != '$')
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
            .collect();
        let mut v = vec![0.0; self.dim];
        let mut bump = |key: &str, weight: f64| {
            let h = fnv1a(key.as_bytes());
            let idx = (h % self.dim as u64) as usize;
            let sign = if (h >> 63) & 1 == 0 { 1.0 } else { -1.0 };
            v[idx] += sign * weight;
        };
        for t in &tokens {
            bump(t, 1.0);
        }
        for w in tokens.windows(2) {
            bump(&format!("{} {}", w[0], w[1]), 0.5);
        }
        if v.iter().all(|x| *x == 0.0) {
            v[0] = 1.0;
        }
        Embedding(v).normalized()
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_EMBEDDING_DIM)
    }
}

impl EmbeddingProvider for HashingEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn id(&self) -> String {
        format!("hashing-{}", self.dim)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpEmbeddingConfig {
    pub base_url: String,
    pub model: String,
    pub api_key_env: String,
    pub dimension: usize,
    pub timeout_secs: u64,
}

impl Default for HttpEmbeddingConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".into(),
            model: "sentence-transformers/all-MiniLM-L6-v2".into(),
            api_key_env: "VHSIM_EMBEDDING_API_KEY".into(),
            dimension: DEFAULT_EMBEDDING_DIM,
            timeout_secs: 60,
        }
    }
}

/// Client for the common `POST {base}/embeddings` endpoint shape.
pub struct HttpEmbedder {
    config: HttpEmbeddingConfig,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
    #[serde(default)]
    index: Option<usize>,
}

impl HttpEmbedder {
    pub fn new(config: HttpEmbeddingConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .build()
            .into();
        Self { config, agent }
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Embedding>, EmbedError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let url = format!("{}/embeddings", self.config.base_url.trim_end_matches('/'));
        let mut req = self.agent.post(&url);
        if let Ok(key) = std::env::var(&self.config.api_key_env) {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(EmbeddingRequest {
                model: &self.config.model,
                input: texts,
            })
            .map_err(|e| EmbedError::Http(e.to_string()))?;
        let mut body: EmbeddingResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| EmbedError::Malformed(e.to_string()))?;
        if body.data.len() != texts.len() {
            return Err(EmbedError::Malformed(format!(
                "{} vectors for {} inputs",
                body.data.len(),
                texts.len()
            )));
        }
        body.data.sort_by_key(|d| d.index.unwrap_or(usize::MAX));
        body.data
            .into_iter()
            .map(|d| {
                if d.embedding.len() != self.config.dimension {
                    return Err(EmbedError::Dimension {
                        expected: self.config.dimension,
                        got: d.embedding.len(),
                    });
                }
                Ok(Embedding(d.embedding).normalized())
            })
            .collect()
    }

    fn dimension(&self) -> usize {
        self.config.dimension
    }

    fn id(&self) -> String {
        format!("http:{}", self.config.model)
    }
}

pub fn text_key(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    vector: Vec<f64>,
}

/// Embedding provider wrapper with a shared text-hash cache. Inserts are
/// insert-if-absent, so concurrent callers agree on one vector per text.
pub struct CachedEmbedder {
    inner: Arc<dyn EmbeddingProvider>,
    cache: RwLock<HashMap<String, Arc<Embedding>>>,
}

impl CachedEmbedder {
    pub fn new(inner: Arc<dyn EmbeddingProvider>) -> Self {
        Self {
            inner,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn provider_id(&self) -> String {
        self.inner.id()
    }

    pub fn len(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn embed_one(&self, text: &str) -> Result<Arc<Embedding>, EmbedError> {
        Ok(self.embed_many(&[text.to_string()])?.remove(0))
    }

    pub fn embed_many(&self, texts: &[String]) -> Result<Vec<Arc<Embedding>>, EmbedError> {
        let keys: Vec<String> = texts.iter().map(|t| text_key(t)).collect();
        let mut missing: Vec<usize> = Vec::new();
        {
            let cache = self.cache.read().expect("cache lock");
            for (i, k) in keys.iter().enumerate() {
                if !cache.contains_key(k) && !missing.iter().any(|&j| keys[j] == *k) {
                    missing.push(i);
                }
            }
        }
        if !missing.is_empty() {
            let batch: Vec<String> = missing.iter().map(|&i| texts[i].clone()).collect();
            let vectors = self.inner.embed(&batch)?;
            let mut cache = self.cache.write().expect("cache lock");
            for (&i, v) in missing.iter().zip(vectors) {
                cache.entry(keys[i].clone()).or_insert_with(|| Arc::new(v));
            }
        }
        let cache = self.cache.read().expect("cache lock");
        Ok(keys.iter().map(|k| Arc::clone(&cache[k])).collect())
    }

    /// Writes the cache as JSON lines sorted by key.
    pub fn save(&self, path: &Path) -> Result<(), EmbedError> {
        let cache = self.cache.read().expect("cache lock");
        let mut keys: Vec<&String> = cache.keys().collect();
        keys.sort();
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        for k in keys {
            let line = CacheLine {
                key: k.clone(),
                vector: cache[k].0.clone(),
            };
            serde_json::to_writer(&mut w, &line).map_err(|e| EmbedError::Malformed(e.to_string()))?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Loads entries saved by [`CachedEmbedder::save`]; existing entries win.
    pub fn load(&self, path: &Path) -> Result<usize, EmbedError> {
        let reader = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut cache = self.cache.write().expect("cache lock");
        let mut n = 0;
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: CacheLine = serde_json::from_str(&line).map_err(|e| EmbedError::Malformed(e.to_string()))?;
            if entry.vector.len() != self.inner.dimension() {
                return Err(EmbedError::Dimension {
                    expected: self.inner.dimension(),
                    got: entry.vector.len(),
                });
            }
            cache.entry(entry.key).or_insert_with(|| Arc::new(Embedding(entry.vector)));
            n += 1;
        }
        Ok(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_unit(rng: &mut StreamRng, dim: usize) -> Embedding {
        Embedding((0..dim).map(|_| rng.random::<f64>() - 0.5).collect()).normalized()
    }

    fn cand(item: usize, score: f64) -> ScoredCandidate {
        ScoredCandidate { item, score, tie_break_key: item as u64 }
    }

    #[test]
    fn max_sim_basics() {
        let e = HashingEmbedder::default();
        let v = e.embed_one("vaccines are safe and effective");
        assert!((max_sim(std::slice::from_ref(&v), &v).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(max_sim::<Embedding>(&[], &v).unwrap(), 0.0);
        let w = Embedding(vec![1.0, 0.0]);
        assert!(matches!(max_sim(&[w], &v), Err(RecommendError::DimensionMismatch(2, 384))));
    }

    #[test]
    fn tweet_score_examples() {
        let v = Embedding(vec![1.0, 0.0]);
        let s = score_tweet(std::slice::from_ref(&v), &v, 0, true, 0.9, 0.3).unwrap();
        assert!((s - 1.3).abs() < 1e-12);
        assert!((score_tweet(std::slice::from_ref(&v), &v, 0, false, 0.9, 0.3).unwrap() - 1.0).abs() < 1e-12);
        // cosine 0.5 at 60 degrees
        let half = Embedding(vec![0.5, 3f64.sqrt() / 2.0]);
        let s = score_tweet(std::slice::from_ref(&v), &half, 2, true, 0.9, 0.3).unwrap();
        assert!((s - 0.705).abs() < 1e-12, "{s}");
        assert!(matches!(score_tweet(std::slice::from_ref(&v), &v, -1, true, 0.9, 0.3), Err(RecommendError::NegativeAge(-1))));
    }

    #[test]
    fn pool_sampling() {
        let mut rng = StreamRng::seed_from_u64(1);
        assert_eq!(sample_candidate_pool(9, 9, &mut rng).unwrap(), (0..9).collect::<Vec<_>>());
        assert!(matches!(sample_candidate_pool(0, 9, &mut rng), Err(RecommendError::EmptyCorpus)));
        let a = sample_candidate_pool(100, 9, &mut StreamRng::seed_from_u64(4)).unwrap();
        let b = sample_candidate_pool(100, 9, &mut StreamRng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 9);
    }

    #[test]
    fn top_k_examples() {
        let mut rng = StreamRng::seed_from_u64(2);
        let got = top_k(vec![cand(0, 0.9), cand(1, 0.1), cand(2, 0.5)], 2, &mut rng).unwrap();
        assert_eq!(got.iter().map(|c| c.item).collect::<Vec<_>>(), vec![0, 2]);

        let zeros: Vec<_> = (0..9).map(|i| cand(i, 0.0)).collect();
        let a = top_k(zeros.clone(), 3, &mut StreamRng::seed_from_u64(8)).unwrap();
        let b = top_k(zeros, 3, &mut StreamRng::seed_from_u64(8)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);

        let got = top_k(vec![cand(5, 0.2), cand(3, 0.2)], 5, &mut rng).unwrap();
        assert_eq!(got.iter().map(|c| c.item).collect::<Vec<_>>(), vec![3, 5]);
        assert!(matches!(top_k(vec![], 0, &mut rng), Err(RecommendError::ZeroK)));
        assert!(top_k(vec![], 3, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn news_selection_matches_full_sort() {
        let mut rng = StreamRng::seed_from_u64(10);
        for _ in 0..50 {
            let history: Vec<_> = (0..10).map(|_| random_unit(&mut rng, 16)).collect();
            let pool: Vec<_> = (0..9).map(|_| random_unit(&mut rng, 16)).collect();
            let scored: Vec<_> = pool
                .iter()
                .enumerate()
                .map(|(i, n)| cand(i, score_news(&history, n).unwrap()))
                .collect();
            let mut oracle: Vec<(usize, f64)> = pool
                .iter()
                .enumerate()
                .map(|(i, n)| {
                    let best = history
                        .iter()
                        .map(|h| {
                            let dot: f64 = h.0.iter().zip(&n.0).map(|(a, b)| a * b).sum();
                            dot / (h.norm() * n.norm())
                        })
                        .fold(f64::MIN, f64::max);
                    (i, best)
                })
                .collect();
            oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
            let got = top_k(scored, 3, &mut rng).unwrap();
            let want: Vec<_> = oracle.iter().take(3).map(|x| x.0).collect();
            assert_eq!(got.iter().map(|c| c.item).collect::<Vec<_>>(), want);
        }
    }

    #[test]
    fn hashing_embedder_is_unit_and_stable() {
        let e = HashingEmbedder::new(64);
        let a = e.embed_one("Hospitals are overwhelmed this week");
        assert!((a.norm() - 1.0).abs() < 1e-12);
        assert_eq!(a, e.embed_one("Hospitals are overwhelmed this week"));
        assert!((e.embed_one("").norm() - 1.0).abs() < 1e-12);
        // pinned bucket so changes to the hash show up as test failures
        let v = HashingEmbedder::new(8).embed_one("vaccine");
        let nonzero: Vec<usize> = v.0.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, _)| i).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(nonzero[0] as u64, fnv1a(b"vaccine") % 8);
    }

    #[test]
    fn cache_round_trip() {
        let cached = CachedEmbedder::new(Arc::new(HashingEmbedder::new(32)));
        let texts: Vec<String> = vec!["a b".into(), "c d".into(), "a b".into()];
        let v = cached.embed_many(&texts).unwrap();
        assert_eq!(cached.len(), 2);
        assert!(Arc::ptr_eq(&v[0], &v[2]));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.jsonl");
        cached.save(&path).unwrap();
        let fresh = CachedEmbedder::new(Arc::new(HashingEmbedder::new(32)));
        assert_eq!(fresh.load(&path).unwrap(), 2);
        assert_eq!(*fresh.embed_one("c d").unwrap(), *v[1]);
    }

    proptest! {
        #[test]
        fn tweet_score_properties(
            seed in 0u64..1000, age in 0i64..20, decay in 0.1f64..1.0,
        ) {
            let mut rng = StreamRng::seed_from_u64(seed);
            let hist: Vec<_> = (0..4).map(|_| random_unit(&mut rng, 8)).collect();
            let t = random_unit(&mut rng, 8);
            let off = score_tweet(&hist, &t, age, false, decay, 0.3).unwrap();
            let on = score_tweet(&hist, &t, age, true, decay, 0.3).unwrap();
            prop_assert!((on - off - 0.3).abs() < 1e-12);
            let sim = max_sim(&hist, &t).unwrap();
            prop_assert!((-1.0..=1.0).contains(&sim));
            if sim >= 0.0 {
                let older = score_tweet(&hist, &t, age + 1, false, decay, 0.3).unwrap();
                prop_assert!(older <= off);
            }
        }

        #[test]
        fn top_k_scale_invariant(scores in prop::collection::vec(0.01f64..10.0, 1..40), scale in 0.1f64..100.0, k in 1usize..6) {
            let mut rng = StreamRng::seed_from_u64(0);
            let a: Vec<_> = scores.iter().enumerate().map(|(i, s)| cand(i, *s)).collect();
            let b: Vec<_> = scores.iter().enumerate().map(|(i, s)| cand(i, s * scale)).collect();
            let ia: Vec<_> = top_k(a, k, &mut rng).unwrap().into_iter().map(|c| c.item).collect();
            let ib: Vec<_> = top_k(b, k, &mut rng).unwrap().into_iter().map(|c| c.item).collect();
            prop_assert_eq!(ia, ib);
        }
    }
}
