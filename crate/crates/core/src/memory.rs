//! Lesson memory with recency-decayed saliency.
//!
//! A lesson's saliency is `importance + decay^(now - created_at)`. Retrieval
//! min-max normalizes saliency over every lesson the agent holds and returns
//! the top `k`. Lessons are never evicted.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_LESSON_DECAY: f64 = 0.995;
pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LessonSource {
    News,
    Tweet,
    Policy,
    Risk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lesson {
    pub text: String,
    pub importance: f64,
    pub created_at: u32,
    pub source: LessonSource,
}

impl Lesson {
    pub fn new(text: impl Into<String>, importance: f64, created_at: u32, source: LessonSource) -> Self {
        Self {
            text: text.into(),
            importance,
            created_at,
            source,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MemoryError {
    #[error("query time {now} precedes lesson creation time {created_at}")]
    FutureLesson { now: u32, created_at: u32 },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("decay rate {0} outside (0, 1]")]
    BadDecay(f64),
}

/// `importance + decay^(now - created_at)`.
pub fn saliency(lesson: &Lesson, now: u32, decay: f64) -> Result<f64, MemoryError> {
    if now < lesson.created_at {
        return Err(MemoryError::FutureLesson {
            now,
            created_at: lesson.created_at,
        });
    }
    Ok(lesson.importance + decay.powi((now - lesson.created_at) as i32))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalientLesson {
    pub lesson: Lesson,
    pub saliency: f64,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryStore {
    pub agent_id: usize,
    lessons: Vec<Lesson>,
    decay: f64,
}

impl MemoryStore {
    pub fn new(agent_id: usize, decay: f64) -> Result<Self, MemoryError> {
        if !(decay > 0.0 && decay <= 1.0) {
            return Err(MemoryError::BadDecay(decay));
        }
        Ok(Self {
            agent_id,
            lessons: Vec::new(),
            decay,
        })
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn lessons(&self) -> &[Lesson] {
        &self.lessons
    }

    pub fn len(&self) -> usize {
        self.lessons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lessons.is_empty()
    }

    /// Appends lessons in order. Importance outside `[0, 1]` is clamped with
    /// a warning; a NaN importance becomes 0.
    pub fn add_lessons(&mut self, lessons: impl IntoIterator<Item = Lesson>) {
        for mut lesson in lessons {
            if !(0.0..=1.0).contains(&lesson.importance) {
                let clamped = if lesson.importance.is_nan() {
                    0.0
                } else {
                    lesson.importance.clamp(0.0, 1.0)
                };
                log::warn!(
                    "agent {}: lesson importance {} clamped to {}",
                    self.agent_id,
                    lesson.importance,
                    clamped
                );
                lesson.importance = clamped;
            }
            self.lessons.push(lesson);
        }
    }

    /// The `k` most salient lessons at time `now`, in descending order.
    ///
    /// Ties on saliency go to the newer lesson, then to the earlier
    /// insertion. When every lesson has the same saliency the normalized
    /// score is 1.0 for all of them.
    pub fn top_k_salient(&self, now: u32, k: usize) -> Result<Vec<SalientLesson>, MemoryError> {
        if k == 0 {
            return Err(MemoryError::ZeroK);
        }
        if self.lessons.is_empty() {
            return Ok(Vec::new());
        }
        let scores = self
            .lessons
            .iter()
            .map(|l| saliency(l, now, self.decay))
            .collect::<Result<Vec<_>, _>>()?;
        let (min, max) = scores
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)));
        let span = max - min;
        let mut order: Vec<usize> = (0..self.lessons.len()).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .total_cmp(&scores[a])
                .then(self.lessons[b].created_at.cmp(&self.lessons[a].created_at))
                .then(a.cmp(&b))
        });
        Ok(order
            .into_iter()
            .take(k)
            .map(|i| SalientLesson {
                lesson: self.lessons[i].clone(),
                saliency: scores[i],
                normalized: if span > 0.0 { (scores[i] - min) / span } else { 1.0 },
            })
            .collect())
    }
}
