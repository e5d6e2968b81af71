//! Broadcast information sources: news corpus, policy catalog, risk series.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{map_range, ExecutionMode};
use crate::llm::{prompts, ChatParams, Gateway, GatewayError, Message, NEWS_TEMPERATURE};

#[derive(Debug, Error)]
pub enum ContentError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("few-shot exemplar list is empty")]
    NoFewShot,
    #[error("news generation failed at item {index}: {source}")]
    Generation {
        index: usize,
        source: GatewayError,
        partial: Vec<NewsItem>,
    },
    #[error("news mix {mix} unattainable: {detail}")]
    Mix { mix: f64, detail: String },
    #[error("invalid risk series: {0}")]
    Risk(String),
    #[error("duplicate policy ({0})")]
    DuplicatePolicy(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ContentError + '_ {
    move |source| ContentError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stance {
    VaccineBenefit,
    VaccineConcern,
    LowDisruption,
    HighDisruption,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Pos,
    Neg,
}

impl Stance {
    pub const ALL: [Stance; 4] = [
        Stance::VaccineBenefit,
        Stance::VaccineConcern,
        Stance::LowDisruption,
        Stance::HighDisruption,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stance::VaccineBenefit => "vaccine_benefit",
            Stance::VaccineConcern => "vaccine_concern",
            Stance::LowDisruption => "low_disruption",
            Stance::HighDisruption => "high_disruption",
        }
    }

    pub fn group(self) -> Group {
        match self {
            Stance::VaccineBenefit | Stance::HighDisruption => Group::Pos,
            Stance::VaccineConcern | Stance::LowDisruption => Group::Neg,
        }
    }

    fn instruction(self) -> &'static str {
        match self {
            Stance::VaccineBenefit => "describe the benefits of COVID-19 vaccines",
            Stance::VaccineConcern => "describe concerns about COVID-19 vaccines",
            Stance::LowDisruption => "depict how daily life is only a little disrupted by COVID-19",
            Stance::HighDisruption => "depict how daily life is considerably disrupted by COVID-19",
        }
    }
}

impl std::str::FromStr for Stance {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Stance::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown stance `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewsItem {
    pub id: usize,
    pub stance_type: Stance,
    pub text: String,
}

impl NewsItem {
    pub fn group(&self) -> Group {
        self.stance_type.group()
    }
}

/// Invented stand-ins for the real few-shot news exemplars, which are not
/// redistributed.
pub fn placeholder_few_shot() -> Vec<String> {
    [
        "County health officials opened two new testing sites this week as case counts rose in several neighborhoods.",
        "A regional hospital said staffing remains tight but elective procedures will continue for now.",
        "School districts are weighing whether to keep in-person classes after a spike in absences.",
        "Pharmacies report steady demand for appointments as eligibility expands to more adults.",
        "Small business owners describe mixed effects of the outbreak on foot traffic downtown.",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// Generates `count` items of one stance, ids starting at `first_id`.
#[allow(clippy::too_many_arguments)]
pub fn generate_news(
    gateway: &Gateway,
    stance: Stance,
    count: usize,
    few_shot: &[String],
    temperature: f64,
    first_id: usize,
    seed: u64,
    mode: ExecutionMode,
) -> Result<Vec<NewsItem>, ContentError> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if few_shot.is_empty() {
        return Err(ContentError::NoFewShot);
    }
    let examples: String = few_shot
        .iter()
        .enumerate()
        .map(|(i, t)| format!("Example {}: {}", i + 1, t))
        .collect::<Vec<_>>()
        .join("\n");
    let results = map_range(mode, count, |i| {
        let user = prompts::NEWS_GEN_USER
            .render(&[
                ("examples", &examples),
                ("stance", stance.as_str()),
                ("stance_instruction", stance.instruction()),
                ("index", &(first_id + i).to_string()),
            ])
            .expect("static template");
        let params = ChatParams {
            temperature,
            max_tokens: 400,
            seed: Some(seed),
        };
        gateway.complete(&[Message::system(prompts::NEWS_GEN_SYSTEM), Message::user(user)], &params)
    });
    let mut items = Vec::with_capacity(count);
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(c) => items.push(NewsItem {
                id: first_id + i,
                stance_type: stance,
                text: c.text.trim().to_string(),
            }),
            Err(source) => {
                return Err(ContentError::Generation { index: first_id + i, source, partial: items });
            }
        }
    }
    Ok(items)
}

/// Equal counts per stance, ids contiguous from 0.
pub fn generate_balanced_corpus(
    gateway: &Gateway,
    per_stance: usize,
    few_shot: &[String],
    seed: u64,
    mode: ExecutionMode,
) -> Result<Vec<NewsItem>, ContentError> {
    let mut all = Vec::with_capacity(per_stance * 4);
    for stance in Stance::ALL {
        match generate_news(gateway, stance, per_stance, few_shot, NEWS_TEMPERATURE, all.len(), seed, mode) {
            Ok(items) => all.extend(items),
            Err(ContentError::Generation { index, source, partial }) => {
                all.extend(partial);
                return Err(ContentError::Generation { index, source, partial: all });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(all)
}

fn write_jsonl<T: Serialize>(items: &[T], path: &Path) -> Result<(), ContentError> {
    let mut out = String::new();
    for it in items {
        out.push_str(&serde_json::to_string(it).expect("serializable"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(io_err(path))
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, ContentError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ContentError::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn save_news_corpus(items: &[NewsItem], path: &Path) -> Result<(), ContentError> {
    write_jsonl(items, path)
}

pub fn load_news_corpus(path: &Path) -> Result<Vec<NewsItem>, ContentError> {
    let items: Vec<NewsItem> = read_jsonl(path)?;
    let mut ids = BTreeSet::new();
    for (i, it) in items.iter().enumerate() {
        if !ids.insert(it.id) {
            return Err(ContentError::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message: format!("duplicate news id {}", it.id),
            });
        }
    }
    Ok(items)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusView {
    pub items: Vec<NewsItem>,
}

impl CorpusView {
    /// Largest subsample with the requested fraction of pos items. Items are
    /// kept in id order.
    pub fn with_mix<R: Rng + ?Sized>(corpus: &[NewsItem], mix: f64, rng: &mut R) -> Result<Self, ContentError> {
        if !(0.0..=1.0).contains(&mix) {
            return Err(ContentError::Mix { mix, detail: "mix must lie in [0, 1]".into() });
        }
        let (mut pos, mut neg): (Vec<&NewsItem>, Vec<&NewsItem>) =
            corpus.iter().partition(|it| it.group() == Group::Pos);
        pos.sort_by_key(|it| it.id);
        neg.sort_by_key(|it| it.id);
        let total = if mix == 1.0 {
            pos.len()
        } else if mix == 0.0 {
            neg.len()
        } else {
            ((pos.len() as f64 / mix).min(neg.len() as f64 / (1.0 - mix))).floor() as usize
        };
        let n_pos = (mix * total as f64).round() as usize;
        let n_neg = total - n_pos;
        if total == 0 || n_pos > pos.len() || n_neg > neg.len() {
            return Err(ContentError::Mix {
                mix,
                detail: format!(
                    "corpus has {} pos and {} neg items; need {} pos and {} neg",
                    pos.len(),
                    neg.len(),
                    n_pos.max(usize::from(mix > 0.0)),
                    n_neg.max(usize::from(mix < 1.0)),
                ),
            });
        }
        pos.shuffle(rng);
        neg.shuffle(rng);
        let mut items: Vec<NewsItem> = pos[..n_pos].iter().chain(&neg[..n_neg]).map(|it| (*it).clone()).collect();
        items.sort_by_key(|it| it.id);
        Ok(Self { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn count(&self, group: Group) -> usize {
        self.items.iter().filter(|it| it.group() == group).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyCategory {
    Incentive,
    Ambassador,
    Mandate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Effort {
    Weak,
    Strong,
}

impl PolicyCategory {
    pub const ALL: [PolicyCategory; 3] = [PolicyCategory::Incentive, PolicyCategory::Ambassador, PolicyCategory::Mandate];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyCategory::Incentive => "incentive",
            PolicyCategory::Ambassador => "ambassador",
            PolicyCategory::Mandate => "mandate",
        }
    }
}

impl std::str::FromStr for PolicyCategory {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown policy category `{s}`"))
    }
}

impl Effort {
    pub const ALL: [Effort; 2] = [Effort::Weak, Effort::Strong];

    pub fn as_str(self) -> &'static str {
        match self {
            Effort::Weak => "weak",
            Effort::Strong => "strong",
        }
    }
}

impl std::str::FromStr for Effort {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown effort `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    pub category: PolicyCategory,
    pub effort: Effort,
    pub description: String,
}

impl Policy {
    /// e.g. `incentive_strong`
    pub fn label(&self) -> String {
        format!("{}_{}", self.category.as_str(), self.effort.as_str())
    }
}

pub fn builtin_policies() -> Vec<Policy> {
    let p = |category, effort, description: &str| Policy { category, effort, description: description.into() };
    use Effort::*;
    use PolicyCategory::*;
    vec![
        p(Ambassador, Weak, "Our community is introducing the 'VaxUp Neighbors' program to raise basic awareness about vaccines. Volunteers will be available at community events, such as school gatherings or park meetups, to provide general information on vaccines. This effort, in collaboration with the County Health Department and PTA, encourages casual conversations to dispel myths and offer simple, reliable information about vaccinations. Participation is voluntary, and no formal training is required for volunteers, but they will have access to informational resources."),
        p(Ambassador, Strong, "Our community is launching the 'VaxUp Neighbors' program, where fully trained volunteers will facilitate in-depth conversations about vaccines in various familiar settings like schools, parks, and community centers. In partnership with the County Health Department and PTA, these volunteers will complete a comprehensive training program, covering all aspects of vaccine safety, benefits, and myth-busting. They will lead interactive workshops, host Q&A sessions, and provide fact-based resources. This initiative aims to improve vaccine literacy and public health outcomes by equipping the community with the tools to make well-informed vaccination decisions."),
        p(Incentive, Weak, "The state government offers a $10 cash card to adults who receive their first dose of vaccination. This limited-time incentive is available while supplies last."),
        p(Incentive, Strong, "The state government guarantees a $50 cash card to all adults who either receive or transport someone to receive their first dose of vaccination. Additionally, targeted outreach will ensure residents in underserved areas are aware of and can access this enhanced incentive."),
        p(Mandate, Weak, "Starting today, our state government strongly recommends that employees and students be vaccinated before entering workplaces or schools. Compliance is encouraged, but enforcement will be minimal, and institutions will have discretion in enforcing this policy."),
        p(Mandate, Strong, "Starting today, our state government mandates that all employees, students, and individuals entering workplaces, schools, public venues, and transportation hubs be vaccinated. This policy will be strictly enforced by local health departments, with state oversight and penalties for non-compliance across all sectors, including public transportation and government buildings."),
    ]
}

pub fn find_policy(catalog: &[Policy], category: PolicyCategory, effort: Effort) -> Option<&Policy> {
    catalog.iter().find(|p| p.category == category && p.effort == effort)
}

pub fn save_policy_catalog(catalog: &[Policy], path: &Path) -> Result<(), ContentError> {
    write_jsonl(catalog, path)
}

pub fn load_policy_catalog(path: &Path) -> Result<Vec<Policy>, ContentError> {
    let catalog: Vec<Policy> = read_jsonl(path)?;
    let mut seen = BTreeSet::new();
    for p in &catalog {
        if !seen.insert((p.category, p.effort)) {
            return Err(ContentError::DuplicatePolicy(p.label()));
        }
    }
    Ok(catalog)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskSeries {
    points: Vec<(u32, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskShape {
    pub peak_week: u32,
    /// Rate at the peak above the baseline, in percent.
    pub height: f64,
    pub width: f64,
    pub baseline: f64,
    /// Relative multiplicative jitter; the peak week stays the maximum.
    pub jitter: f64,
}

impl Default for RiskShape {
    fn default() -> Self {
        Self {
            peak_week: 8,
            height: 4.0,
            width: 3.0,
            baseline: 1.0,
            jitter: 0.0,
        }
    }
}

impl RiskSeries {
    pub fn new(points: Vec<(u32, f64)>) -> Result<Self, ContentError> {
        if points.is_empty() {
            return Err(ContentError::Risk("series is empty".into()));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(ContentError::Risk(format!("week {} does not follow week {}", w[1].0, w[0].0)));
            }
        }
        if let Some((week, rate)) = points.iter().find(|(_, r)| !r.is_finite() || *r < 0.0) {
            return Err(ContentError::Risk(format!("week {week} has invalid rate {rate}")));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(u32, f64)] {
        &self.points
    }

    /// Rate of the last point at or before `week`; before the first point the
    /// first rate is used, past the end the last rate is repeated.
    pub fn rate_at(&self, week: u32) -> f64 {
        let last = self.points[self.points.len() - 1];
        if week > last.0 {
            log::debug!("risk series ends at week {}; reusing its rate for week {week}", last.0);
            return last.1;
        }
        match self.points.binary_search_by_key(&week, |p| p.0) {
            Ok(i) => self.points[i].1,
            Err(0) => self.points[0].1,
            Err(i) => self.points[i - 1].1,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("week,rate\n");
        for (w, r) in &self.points {
            let _ = writeln!(out, "{w},{r}");
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self, ContentError> {
        let mut points = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("week")) {
                continue;
            }
            let bad = || ContentError::Risk(format!("line {}: expected `week,rate`, got {line:?}", i + 1));
            let (w, r) = line.split_once(',').ok_or_else(bad)?;
            let w: u32 = w.trim().parse().map_err(|_| bad())?;
            let r: f64 = r.trim().parse().map_err(|_| bad())?;
            points.push((w, r));
        }
        Self::new(points)
    }
}

pub fn load_risk_series(path: &Path) -> Result<RiskSeries, ContentError> {
    RiskSeries::parse_csv(&std::fs::read_to_string(path).map_err(io_err(path))?)
}

pub fn save_risk_series(series: &RiskSeries, path: &Path) -> Result<(), ContentError> {
    std::fs::write(path, series.to_csv()).map_err(io_err(path))
}

/// Single-peak curve over weeks `0..len`: baseline plus a Gaussian bump.
pub fn synthetic_risk_series<R: Rng + ?Sized>(len: u32, shape: &RiskShape, rng: &mut R) -> Result<RiskSeries, ContentError> {
    if len == 0 {
        return Err(ContentError::Risk("length must be at least 1".into()));
    }
    let width = shape.width.max(1e-6);
    let mut rates: Vec<f64> = (0..len)
        .map(|w| {
            let d = w as f64 - shape.peak_week as f64;
            let base = shape.baseline + shape.height * (-d * d / (2.0 * width * width)).exp();
            let j = if shape.jitter > 0.0 { 1.0 + shape.jitter * (2.0 * rng.random::<f64>() - 1.0) } else { 1.0 };
            // 4 decimals keeps the CSV round trip exact
            ((base * j).max(0.0) * 1e4).round() / 1e4
        })
        .collect();
    let peak = (shape.peak_week.min(len - 1)) as usize;
    let max_other = rates
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != peak)
        .map(|(_, r)| *r)
        .fold(f64::NEG_INFINITY, f64::max);
    if rates[peak] <= max_other {
        rates[peak] = max_other + 0.01;
    }
    RiskSeries::new(rates.into_iter().enumerate().map(|(w, r)| (w as u32, r)).collect())
}

pub fn risk_sentence(rate: f64) -> String {
    format!("This week, the COVID-19 emergency department visit rate is {rate:.2}%.")
}
