//! Offline chat backend: responses are pure functions of the prompt text and
//! a seed. Attitudes come from a discretized Gaussian over the 1-4 scale whose
//! center is driven by persona features, lesson keywords, the previous week's
//! distribution and the broadcast risk level.

use serde::{Deserialize, Serialize};

use super::prompts::{self, ATTITUDE_FORMAT_PROMPT, JSON_LESSON_PROMPT};
use super::{ChatParams, ChatProvider, Message, ProviderError};
use crate::persona::{parse_profile, ParsedProfile};
use crate::rng::{fnv1a, stream_key};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequestKind {
    FollowList,
    Judge,
    MetaAnalysis,
    Analysis,
    NewsGeneration,
    Lessons,
    Attitude,
    Tweet,
    Other,
}

pub fn classify(messages: &[Message]) -> RequestKind {
    let has = |needle: &str| messages.iter().any(|m| m.content.contains(needle));
    if has("Which of these people will you become friends with") {
        RequestKind::FollowList
    } else if has("Please act as an impartial judge") {
        RequestKind::Judge
    } else if has("conduct a meta-analysis") {
        RequestKind::MetaAnalysis
    } else if has("conduct a systematic analysis") {
        RequestKind::Analysis
    } else if has("Stance marker: [") {
        RequestKind::NewsGeneration
    } else if has("ONLY output a list of lists") {
        RequestKind::Lessons
    } else if has("attitude_dist") {
        RequestKind::Attitude
    } else if has("Write a short tweet") {
        RequestKind::Tweet
    } else {
        RequestKind::Other
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LessonRule {
    /// Case-insensitive; any one match fires the rule.
    pub keywords: Vec<String>,
    pub lesson: String,
    pub importance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttitudeShift {
    pub keywords: Vec<String>,
    /// Added to the distribution center (in answer units) per matching line,
    /// scaled by that line's importance.
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaShift {
    /// One of gender, education, occupation, political_belief, religion.
    pub field: String,
    pub value: String,
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeShift {
    pub min: u32,
    pub max: u32,
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRule {
    /// Rates (percent) at or above this produce the high-risk lesson.
    pub high_threshold: f64,
    pub high_lesson: String,
    pub low_lesson: String,
    pub importance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FollowRule {
    /// Follow others sharing the same political belief, at most `max_follows`.
    SamePoliticalBelief { max_follows: usize },
    /// Always answer with this exact text.
    Fixed { response: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JudgeRule {
    Fixed { rating: u8 },
    /// Rating picked from the list by a hash of the prompt.
    Mixed { ratings: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsTemplates {
    pub stance: String,
    pub headlines: Vec<String>,
    pub sentences: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedRuleSet {
    pub lesson_rules: Vec<LessonRule>,
    pub default_lesson: LessonRule,
    pub risk_rule: RiskRule,
    pub attitude_shifts: Vec<AttitudeShift>,
    pub persona_shifts: Vec<PersonaShift>,
    pub age_shifts: Vec<AgeShift>,
    /// Center offset from 2.5 used when no persona is recognized.
    pub default_center: f64,
    pub persona_noise: f64,
    pub step_noise: f64,
    /// Standard deviation of the emitted distribution, in answer units.
    pub spread: f64,
    /// Weekly weight on the lesson signal.
    pub gain: f64,
    /// Weekly pull of the center back toward the persona prior.
    pub pull: f64,
    pub risk_gain: f64,
    pub risk_reference: f64,
    pub tweet_importance_scale: f64,
    /// Fraction of lesson replies emitted with the stray trailing quote.
    pub malformed_rate: f64,
    pub follow: FollowRule,
    pub judge: JudgeRule,
    pub news: Vec<NewsTemplates>,
}

fn lesson(keywords: &[&str], lesson: &str, importance: f64) -> LessonRule {
    LessonRule {
        keywords: keywords.iter().map(|s| s.to_string()).collect(),
        lesson: lesson.into(),
        importance,
    }
}

fn shift(keywords: &[&str], shift: f64) -> AttitudeShift {
    AttitudeShift {
        keywords: keywords.iter().map(|s| s.to_string()).collect(),
        shift,
    }
}

fn persona(field: &str, value: &str, shift: f64) -> PersonaShift {
    PersonaShift {
        field: field.into(),
        value: value.into(),
        shift,
    }
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl ScriptedRuleSet {
    /// Rule set in which strong policies move attitudes more than weak ones
    /// and news stance moves attitudes in its own direction.
    pub fn policy_sensitive() -> Self {
        Self {
            lesson_rules: vec![
                lesson(&["$50 cash card"], "the state guarantees a $50 cash card for getting vaccinated", 0.9),
                lesson(&["$10 cash card"], "the state offers a $10 cash card for a first vaccine dose", 0.8),
                lesson(
                    &["fully trained volunteers"],
                    "fully trained volunteers run in-depth vaccine workshops in my community",
                    0.85,
                ),
                lesson(
                    &["no formal training"],
                    "volunteers with no formal training share basic vaccine information",
                    0.7,
                ),
                lesson(&["strictly enforced"], "vaccination is mandated and strictly enforced everywhere", 0.9),
                lesson(
                    &["strongly recommends"],
                    "the state strongly recommends vaccination for work and school",
                    0.75,
                ),
                lesson(
                    &["safe and effective", "prevent severe illness"],
                    "vaccines are safe and effective and prevent severe illness",
                    0.7,
                ),
                lesson(
                    &["side effects", "rushed"],
                    "some people report worrying side effects from a rushed vaccine",
                    0.7,
                ),
                lesson(
                    &["back to normal", "barely disrupted"],
                    "daily life is barely disrupted and mostly back to normal",
                    0.6,
                ),
                lesson(
                    &["overwhelmed", "severely disrupted"],
                    "hospitals are overwhelmed and daily life is severely disrupted",
                    0.6,
                ),
            ],
            default_lesson: lesson(&[], "I am still learning about COVID-19 vaccines", 0.3),
            risk_rule: RiskRule {
                high_threshold: 3.0,
                high_lesson: "the disease risk in my area is high right now".into(),
                low_lesson: "the disease risk in my area is low right now".into(),
                importance: 0.5,
            },
            attitude_shifts: vec![
                shift(&["$50 cash card"], 0.3),
                shift(&["$10 cash card"], 0.1),
                shift(&["fully trained volunteers"], 0.25),
                shift(&["no formal training"], 0.06),
                shift(&["strictly enforced"], 0.28),
                shift(&["strongly recommends"], 0.08),
                shift(&["safe and effective"], 0.3),
                shift(&["side effects"], -0.3),
                shift(&["barely disrupted"], -0.2),
                shift(&["severely disrupted"], 0.2),
                shift(&["risk in my area is high"], 0.1),
                shift(&["risk in my area is low"], -0.05),
            ],
            persona_shifts: vec![
                persona("political_belief", "Republican", -0.45),
                persona("political_belief", "Democrats", 0.45),
                persona("education", "Less than High School", -0.15),
                persona("education", "4-year Bachelor Degree", 0.15),
                persona("education", "Master's Degree", 0.25),
                persona("education", "Professional Degree", 0.25),
                persona("education", "Doctorate Degree", 0.25),
                persona("gender", "Male", 0.05),
                persona("gender", "Female", -0.05),
                persona("occupation", "Healthcare Practitioners", 0.3),
                persona("religion", "Atheist", 0.1),
            ],
            age_shifts: vec![
                AgeShift { min: 25, max: 39, shift: -0.15 },
                AgeShift { min: 40, max: 54, shift: -0.05 },
                AgeShift { min: 55, max: 64, shift: 0.1 },
                AgeShift { min: 65, max: 200, shift: 0.25 },
            ],
            default_center: 0.0,
            persona_noise: 0.6,
            step_noise: 0.08,
            spread: 0.75,
            gain: 0.12,
            pull: 0.15,
            risk_gain: 0.02,
            risk_reference: 3.0,
            tweet_importance_scale: 0.7,
            malformed_rate: 0.05,
            follow: FollowRule::SamePoliticalBelief { max_follows: 12 },
            judge: JudgeRule::Fixed { rating: 4 },
            news: vec![
                NewsTemplates {
                    stance: "vaccine_benefit".into(),
                    headlines: strings(&[
                        "New study confirms COVID-19 vaccines are safe and effective.",
                        "Health officials report vaccines prevent severe illness in most adults.",
                    ]),
                    sentences: strings(&[
                        "Doctors say vaccinated patients are far less likely to be hospitalized.",
                        "Clinical data from thousands of volunteers show strong protection.",
                        "Local clinics have expanded hours to meet demand for shots.",
                        "Researchers note that protection remains high months after the second dose.",
                    ]),
                },
                NewsTemplates {
                    stance: "vaccine_concern".into(),
                    headlines: strings(&[
                        "Some residents report side effects after COVID-19 shots.",
                        "Critics question whether the vaccine rollout was rushed.",
                    ]),
                    sentences: strings(&[
                        "Several people described fevers and fatigue lasting days.",
                        "Advocacy groups are asking for more long-term safety data.",
                        "A few employers have paused vaccination drives pending review.",
                        "Online forums are filled with questions about the approval timeline.",
                    ]),
                },
                NewsTemplates {
                    stance: "low_disruption".into(),
                    headlines: strings(&[
                        "Town life is largely back to normal despite COVID-19.",
                        "Businesses say the outbreak barely disrupted their season.",
                    ]),
                    sentences: strings(&[
                        "Restaurants report full tables and steady weekend crowds.",
                        "Schools continue in-person classes with few absences.",
                        "Case counts have stayed flat for several weeks.",
                        "Residents say they rarely think about the virus anymore.",
                    ]),
                },
                NewsTemplates {
                    stance: "high_disruption".into(),
                    headlines: strings(&[
                        "Hospitals are overwhelmed as COVID-19 cases surge.",
                        "Daily life severely disrupted as the outbreak spreads.",
                    ]),
                    sentences: strings(&[
                        "Emergency rooms are turning away non-urgent patients.",
                        "Several schools have moved classes online again.",
                        "Staff shortages are forcing shops to close early.",
                        "Families describe long waits for testing and treatment.",
                    ]),
                },
            ],
        }
    }

    /// Distribution emitted for an attitude request with no usable features.
    pub fn default_prior(&self) -> [f64; 4] {
        discretized(2.5 + self.default_center, self.spread)
    }

    fn persona_prior(&self, p: &ParsedProfile, seed: u64) -> f64 {
        let mut c = self.default_center;
        for s in &self.persona_shifts {
            let v = match s.field.as_str() {
                "gender" => &p.gender,
                "education" => &p.education,
                "occupation" => &p.occupation,
                "political_belief" => &p.political_belief,
                "religion" => &p.religion,
                _ => continue,
            };
            if *v == s.value {
                c += s.shift;
            }
        }
        for a in &self.age_shifts {
            if (a.min..=a.max).contains(&p.age) {
                c += a.shift;
            }
        }
        let key = fnv1a(format!("{}|{}|{}", p.agent_id, p.age, p.occupation).as_bytes());
        c + self.persona_noise * (2.0 * unit(seed, &[1, key]) - 1.0)
    }
}

fn unit(seed: u64, tags: &[u64]) -> f64 {
    (stream_key(seed, tags) >> 11) as f64 / (1u64 << 53) as f64
}

/// Gaussian mass at answers 1..=4 around `center`, normalized.
pub fn discretized(center: f64, spread: f64) -> [f64; 4] {
    let s = spread.max(1e-3);
    let mut p = [0.0; 4];
    for (i, v) in p.iter_mut().enumerate() {
        let d = (i as f64 + 1.0) - center;
        *v = (-d * d / (2.0 * s * s)).exp();
    }
    let z: f64 = p.iter().sum();
    p.map(|v| v / z)
}

fn mean_answer(p: &[f64; 4]) -> f64 {
    p.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * v).sum::<f64>() / p.iter().sum::<f64>()
}

/// Center whose discretized distribution has the given mean answer.
fn invert_mean(target: f64, spread: f64) -> f64 {
    let (mut lo, mut hi) = (-2.0, 7.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mean_answer(&discretized(mid, spread)) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn contains_ci(haystack_lower: &str, needle: &str) -> bool {
    haystack_lower.contains(&needle.to_lowercase())
}

fn find_profile(messages: &[Message]) -> Option<ParsedProfile> {
    messages.iter().flat_map(|m| m.content.lines()).find_map(|line| {
        let rest = line.strip_prefix("Pretend you are ")?;
        let rest = rest.split(". You are joining").next().unwrap_or(rest);
        parse_profile(rest.trim_end_matches('.')).ok()
    })
}

fn parse_bracket_list(s: &str) -> Option<[f64; 4]> {
    let start = s.find('[')?;
    let end = start + s[start..].find(']')?;
    let vals: Vec<f64> = s[start + 1..end]
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .ok()?;
    vals.try_into().ok()
}

fn number_after(s: &str, marker: &str) -> Option<f64> {
    let rest = &s[s.find(marker)? + marker.len()..];
    let num: String = rest
        .trim_start()
        .chars()
        .take_while(|c| c.is_ascii_digit() || *c == '.')
        .collect();
    num.trim_end_matches('.').parse().ok()
}

fn importance_of(line: &str) -> f64 {
    number_after(line, "(importance ").unwrap_or(1.0)
}

pub struct ScriptedProvider {
    rules: ScriptedRuleSet,
    seed: u64,
}

impl ScriptedProvider {
    pub fn new(rules: ScriptedRuleSet, seed: u64) -> Self {
        Self { rules, seed }
    }

    pub fn rules(&self) -> &ScriptedRuleSet {
        &self.rules
    }

    fn lessons(&self, messages: &[Message], seed: u64) -> String {
        let user = messages.last().map(|m| m.content.as_str()).unwrap_or("");
        let material = user.split("\nSummarize").next().unwrap_or(user);
        let lower = material.to_lowercase();
        let k = number_after(user, "Summarize at most ")
            .or_else(|| number_after(user, "Summarize "))
            .map(|k| k as usize)
            .unwrap_or(3)
            .max(1);
        let scale = if user.starts_with("You read the following tweets") {
            self.rules.tweet_importance_scale
        } else {
            1.0
        };
        let key = fnv1a(material.as_bytes());
        let mut out: Vec<(String, f64)> = Vec::new();
        let push = |out: &mut Vec<(String, f64)>, text: &str, imp: f64, i: u64| {
            if out.iter().all(|(t, _)| t != text) {
                let jitter = 0.9 + 0.2 * unit(seed, &[2, key, i]);
                out.push((text.to_string(), round2((imp * scale * jitter).clamp(0.0, 1.0))));
            }
        };
        if let Some(rate) = number_after(material, "visit rate is ") {
            let r = &self.rules.risk_rule;
            let text = if rate >= r.high_threshold { &r.high_lesson } else { &r.low_lesson };
            push(&mut out, text, r.importance, 0);
        }
        for (i, rule) in self.rules.lesson_rules.iter().enumerate() {
            if rule.keywords.iter().any(|kw| contains_ci(&lower, kw)) {
                push(&mut out, &rule.lesson, rule.importance, i as u64 + 1);
            }
        }
        if out.is_empty() {
            let d = &self.rules.default_lesson;
            push(&mut out, &d.lesson, d.importance, u64::MAX);
        }
        out.truncate(k);
        let mut text = serde_json::to_string(&out).expect("serializable");
        if unit(seed, &[3, key]) < self.rules.malformed_rate {
            // the stray trailing quote the lesson contract warns about
            text.insert(text.len() - 1, '"');
        }
        text
    }

    /// Center (answer units) for an attitude request.
    fn attitude_center(&self, messages: &[Message], seed: u64) -> (f64, bool) {
        let joined: String = messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n");
        let text = joined.replace(prompts::rating_exp_text(), "").replace(ATTITUDE_FORMAT_PROMPT, "");
        let profile = find_profile(messages);
        let prior = match &profile {
            Some(p) => 2.5 + self.rules.persona_prior(p, seed),
            None => 2.5 + self.rules.default_center,
        };
        let mut signal = 0.0;
        let mut recognized = profile.is_some();
        for line in text.lines() {
            let lower = line.to_lowercase();
            let weight = importance_of(line);
            for s in &self.rules.attitude_shifts {
                if s.keywords.iter().any(|kw| contains_ci(&lower, kw)) {
                    signal += s.shift * weight;
                    recognized = true;
                }
            }
        }
        let previous = text
            .find("your attitude distribution was ")
            .and_then(|i| parse_bracket_list(&text[i..]));
        let center = match previous {
            None => prior + signal,
            Some(prev) => {
                recognized = true;
                let last = invert_mean(mean_answer(&prev), self.rules.spread);
                let risk = number_after(&text, "visit rate is ")
                    .map(|r| self.rules.risk_gain * (r - self.rules.risk_reference))
                    .unwrap_or(0.0);
                let noise = self.rules.step_noise * (2.0 * unit(seed, &[4, fnv1a(text.as_bytes())]) - 1.0);
                last + self.rules.pull * (prior - last) + self.rules.gain * signal + risk + noise
            }
        };
        (center, recognized)
    }

    fn attitude(&self, messages: &[Message], seed: u64) -> String {
        let (center, recognized) = self.attitude_center(messages, seed);
        let dist = if recognized {
            discretized(center.clamp(0.0, 5.0), self.rules.spread)
        } else {
            self.rules.default_prior()
        };
        let dist = dist.map(round2);
        let reasoning = if center >= 2.5 {
            "Given my background and what I have learned, I lean towards getting vaccinated."
        } else {
            "Given my background and what I have learned, I lean against getting vaccinated."
        };
        serde_json::json!({ "reasoning": reasoning, "attitude_dist": dist }).to_string()
    }

    fn tweet(&self, messages: &[Message], seed: u64) -> String {
        let top = messages
            .iter()
            .flat_map(|m| m.content.lines())
            .find_map(|l| l.strip_prefix("- "))
            .map(|l| l.split(" (importance ").next().unwrap_or(l).to_string());
        let tags = ["#COVID19", "#vaccines", "#health"];
        let tag = tags[(stream_key(seed, &[5, fnv1a(messages.last().map(|m| m.content.as_bytes()).unwrap_or(b""))]) % 3) as usize];
        match top {
            Some(lesson) => format!("Been thinking about this: {lesson}. {tag}"),
            None => format!("Still making up my mind about the COVID-19 vaccine. {tag}"),
        }
    }

    fn follows(&self, messages: &[Message], seed: u64) -> String {
        let (max, me) = match &self.rules.follow {
            FollowRule::Fixed { response } => return response.clone(),
            FollowRule::SamePoliticalBelief { max_follows } => (*max_follows, find_profile(messages)),
        };
        let Some(me) = me else { return String::new() };
        let user = messages.last().map(|m| m.content.as_str()).unwrap_or("");
        let list = user
            .split("separated by semicolon: ")
            .nth(1)
            .and_then(|r| r.split(". Please ONLY").next())
            .unwrap_or("");
        let mut picks: Vec<(u64, usize)> = list
            .split("; ")
            .filter_map(|s| parse_profile(s).ok())
            .filter(|p| p.agent_id != me.agent_id && p.political_belief == me.political_belief)
            .map(|p| (stream_key(seed, &[6, me.agent_id as u64, p.agent_id as u64]), p.agent_id))
            .collect();
        picks.sort_unstable();
        picks.truncate(max);
        let mut ids: Vec<usize> = picks.into_iter().map(|(_, id)| id).collect();
        ids.sort_unstable();
        ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
    }

    fn judge(&self, messages: &[Message], seed: u64) -> String {
        let rating = match &self.rules.judge {
            JudgeRule::Fixed { rating } => *rating,
            JudgeRule::Mixed { ratings } if !ratings.is_empty() => {
                let key = fnv1a(messages.last().map(|m| m.content.as_bytes()).unwrap_or(b""));
                ratings[(stream_key(seed, &[7, key]) % ratings.len() as u64) as usize]
            }
            JudgeRule::Mixed { .. } => 3,
        };
        serde_json::json!({ "reasoning": "Scripted assessment of the episode.", "rating": rating.to_string() })
            .to_string()
    }

    fn news(&self, messages: &[Message], seed: u64) -> String {
        let user = messages.last().map(|m| m.content.as_str()).unwrap_or("");
        let stance = user
            .split("Stance marker: [")
            .nth(1)
            .and_then(|r| r.split(']').next())
            .unwrap_or("");
        let index = number_after(user, "Article number ").unwrap_or(0.0) as u64;
        let Some(t) = self.rules.news.iter().find(|t| t.stance == stance) else {
            return format!("A general update about COVID-19 (article {index}).");
        };
        let pick = |list: &[String], salt: u64| -> String {
            if list.is_empty() {
                return String::new();
            }
            list[(stream_key(seed, &[8, index, salt]) % list.len() as u64) as usize].clone()
        };
        let a = pick(&t.sentences, 1);
        let mut b = pick(&t.sentences, 2);
        if b == a && t.sentences.len() > 1 {
            b = pick(&t.sentences, 3);
        }
        format!("{} {} {}", pick(&t.headlines, 0), a, b).trim().to_string()
    }

    fn analysis(&self, messages: &[Message], meta: bool) -> String {
        let user = messages.last().map(|m| m.content.as_str()).unwrap_or("");
        let n = user.lines().filter(|l| !l.trim().is_empty()).count();
        let hesitant = user.matches("hesitant=true").count();
        if meta {
            format!("Meta-analysis over {n} summary lines; {hesitant} hesitant observations referenced.")
        } else {
            format!("Analysis over {n} records; {hesitant} hesitant weeks observed.")
        }
    }
}

impl ChatProvider for ScriptedProvider {
    fn complete(&self, messages: &[Message], params: &ChatParams) -> Result<String, ProviderError> {
        let seed = stream_key(self.seed, &[params.seed.unwrap_or(0)]);
        Ok(match classify(messages) {
            RequestKind::FollowList => self.follows(messages, seed),
            RequestKind::Judge => self.judge(messages, seed),
            RequestKind::MetaAnalysis => self.analysis(messages, true),
            RequestKind::Analysis => self.analysis(messages, false),
            RequestKind::NewsGeneration => self.news(messages, seed),
            RequestKind::Lessons => self.lessons(messages, seed),
            RequestKind::Attitude => self.attitude(messages, seed),
            RequestKind::Tweet => self.tweet(messages, seed),
            RequestKind::Other => "OK".to_string(),
        })
    }

    fn id(&self) -> String {
        format!("scripted:{}", self.seed)
    }
}

/// Sanity hook used by tests: the fixed lesson contract must not trip rules.
pub fn template_text_is_neutral(rules: &ScriptedRuleSet) -> bool {
    let lower = [JSON_LESSON_PROMPT, ATTITUDE_FORMAT_PROMPT, prompts::rating_exp_text()]
        .iter()
        .map(|s| s.to_lowercase())
        .collect::<Vec<_>>();
    rules
        .attitude_shifts
        .iter()
        .flat_map(|s| s.keywords.iter())
        .chain(rules.lesson_rules.iter().flat_map(|r| r.keywords.iter()))
        .all(|kw| lower.iter().all(|t| !contains_ci(t, kw)))
}
