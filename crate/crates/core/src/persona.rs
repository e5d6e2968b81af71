//! Demographic marginals and agent personas.
//!
//! Marginals are loaded from a TOML file with one `[category, weight]`
//! array per demographic axis. Every axis is normalized at load time and
//! the raw sums are kept in a [`LoadReport`]. Personas draw each attribute
//! independently from its marginal.

use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, Purpose};

/// Bundled marginals transcribed from the census-style survey table.
pub const BUNDLED_MARGINALS: &str = include_str!("../data/marginals.toml");

/// Upper bound used for an open-ended age bucket such as `75+`.
pub const OPEN_AGE_UPPER: u32 = 90;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    AgeGroup,
    Education,
    Gender,
    RaceEthnicity,
    Occupation,
    PoliticalBelief,
    Religion,
}

impl Attribute {
    pub const ALL: [Attribute; 7] = [
        Attribute::AgeGroup,
        Attribute::Education,
        Attribute::Gender,
        Attribute::RaceEthnicity,
        Attribute::Occupation,
        Attribute::PoliticalBelief,
        Attribute::Religion,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Attribute::AgeGroup => "age_group",
            Attribute::Education => "education",
            Attribute::Gender => "gender",
            Attribute::RaceEthnicity => "race_ethnicity",
            Attribute::Occupation => "occupation",
            Attribute::PoliticalBelief => "political_belief",
            Attribute::Religion => "religion",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Error)]
pub enum MarginalsError {
    #[error("cannot read marginals file: {0}")]
    Io(#[from] std::io::Error),
    #[error("marginals file is not valid TOML: {0}")]
    Syntax(String),
    #[error("missing attribute `{0}`")]
    MissingAttribute(Attribute),
    #[error("attribute `{0}` has an empty category list")]
    EmptyCategories(Attribute),
    #[error("negative probability {value} for `{attribute}` category `{category}`")]
    NegativeProbability {
        attribute: Attribute,
        category: String,
        value: f64,
    },
    #[error("attribute `{attribute}` entry {index} is malformed: {reason}")]
    MalformedEntry {
        attribute: Attribute,
        index: usize,
        reason: String,
    },
    #[error("attribute `{0}` has zero total weight")]
    ZeroMass(Attribute),
    #[error("age group label `{0}` is not of the form `lo-hi` or `lo+`")]
    BadAgeGroup(String),
}

/// One normalized categorical distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub categories: Vec<String>,
    pub probabilities: Vec<f64>,
}

impl Marginal {
    pub fn probability_of(&self, category: &str) -> Option<f64> {
        self.categories
            .iter()
            .position(|c| c == category)
            .map(|i| self.probabilities[i])
    }

    pub fn contains(&self, category: &str) -> bool {
        self.categories.iter().any(|c| c == category)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &str {
        &self.categories[rng::categorical(&self.probabilities, rng)]
    }
}

/// Divides every weight by the total. Normalizing an already normalized
/// vector leaves it unchanged up to rounding.
pub fn normalize(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemographicMarginals {
    marginals: Vec<(Attribute, Marginal)>,
}

/// Raw (pre-normalization) weights and their sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub raw_sums: Vec<(Attribute, f64)>,
    pub raw_weights: Vec<(Attribute, Vec<(String, f64)>)>,
}

impl LoadReport {
    pub fn raw_weight(&self, attribute: Attribute, category: &str) -> Option<f64> {
        self.raw_weights
            .iter()
            .find(|(a, _)| *a == attribute)
            .and_then(|(_, ws)| ws.iter().find(|(c, _)| c == category).map(|(_, w)| *w))
    }
}

impl DemographicMarginals {
    /// Parses marginals from TOML text.
    pub fn from_toml_str(text: &str) -> Result<(Self, LoadReport), MarginalsError> {
        let table: toml::Table =
            toml::from_str(text).map_err(|e| MarginalsError::Syntax(e.to_string()))?;
        let mut marginals = Vec::with_capacity(Attribute::ALL.len());
        let mut raw_sums = Vec::new();
        let mut raw_weights = Vec::new();
        for attribute in Attribute::ALL {
            let entries = table
                .get(attribute.key())
                .ok_or(MarginalsError::MissingAttribute(attribute))?
                .as_array()
                .ok_or_else(|| MarginalsError::MalformedEntry {
                    attribute,
                    index: 0,
                    reason: "expected an array of [category, weight] pairs".into(),
                })?;
            if entries.is_empty() {
                return Err(MarginalsError::EmptyCategories(attribute));
            }
            let mut categories = Vec::with_capacity(entries.len());
            let mut weights = Vec::with_capacity(entries.len());
            for (index, entry) in entries.iter().enumerate() {
                let (category, weight) = parse_entry(attribute, index, entry)?;
                if weight < 0.0 {
                    return Err(MarginalsError::NegativeProbability {
                        attribute,
                        category,
                        value: weight,
                    });
                }
                if attribute == Attribute::AgeGroup {
                    age_bounds(&category)?;
                }
                categories.push(category);
                weights.push(weight);
            }
            let total: f64 = weights.iter().sum();
            if total <= 0.0 {
                return Err(MarginalsError::ZeroMass(attribute));
            }
            log::debug!("marginal `{attribute}` raw sum {total}");
            raw_sums.push((attribute, total));
            raw_weights.push((
                attribute,
                categories.iter().cloned().zip(weights.iter().copied()).collect(),
            ));
            marginals.push((
                attribute,
                Marginal {
                    categories,
                    probabilities: normalize(&weights),
                },
            ));
        }
        Ok((
            Self { marginals },
            LoadReport {
                raw_sums,
                raw_weights,
            },
        ))
    }

    pub fn bundled() -> Self {
        Self::from_toml_str(BUNDLED_MARGINALS)
            .expect("bundled marginals are valid")
            .0
    }

    pub fn get(&self, attribute: Attribute) -> &Marginal {
        &self
            .marginals
            .iter()
            .find(|(a, _)| *a == attribute)
            .expect("every attribute is present after load")
            .1
    }

    /// Renders back to the TOML layout accepted by [`load_marginals`].
    pub fn to_toml_string(&self) -> String {
        let mut out = String::new();
        for (attribute, m) in &self.marginals {
            out.push_str(attribute.key());
            out.push_str(" = [\n");
            for (c, p) in m.categories.iter().zip(&m.probabilities) {
                out.push_str(&format!("  [{}, {}],\n", toml_string(c), p));
            }
            out.push_str("]\n\n");
        }
        out
    }
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn parse_entry(
    attribute: Attribute,
    index: usize,
    entry: &toml::Value,
) -> Result<(String, f64), MarginalsError> {
    let malformed = |reason: &str| MarginalsError::MalformedEntry {
        attribute,
        index,
        reason: reason.to_string(),
    };
    let pair = entry
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| malformed("expected [category, weight]"))?;
    let category = pair[0]
        .as_str()
        .ok_or_else(|| malformed("category must be a string"))?
        .to_string();
    let weight = match &pair[1] {
        toml::Value::Float(f) => *f,
        toml::Value::Integer(i) => *i as f64,
        _ => return Err(malformed("weight must be a number")),
    };
    if !weight.is_finite() {
        return Err(malformed("weight must be finite"));
    }
    Ok((category, weight))
}

pub fn load_marginals(path: &Path) -> Result<(DemographicMarginals, LoadReport), MarginalsError> {
    let text = std::fs::read_to_string(path)?;
    DemographicMarginals::from_toml_str(&text)
}

/// Inclusive age bounds for a bucket label.
pub fn age_bounds(label: &str) -> Result<(u32, u32), MarginalsError> {
    let bad = || MarginalsError::BadAgeGroup(label.to_string());
    let label = label.trim();
    if let Some(lo) = label.strip_suffix('+') {
        let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
        return Ok((lo, OPEN_AGE_UPPER.max(lo)));
    }
    let (lo, hi) = label.split_once('-').ok_or_else(bad)?;
    let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
    let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persona {
    pub agent_id: usize,
    pub gender: String,
    pub age: u32,
    pub age_group: String,
    pub education: String,
    pub race_ethnicity: String,
    pub occupation: String,
    pub political_belief: String,
    pub religion: String,
}

/// Samples one persona. Attributes are drawn independently; the age is
/// uniform inside the drawn bucket.
pub fn sample_persona<R: Rng + ?Sized>(
    marginals: &DemographicMarginals,
    agent_id: usize,
    rng: &mut R,
) -> Persona {
    let age_group = marginals.get(Attribute::AgeGroup).sample(rng).to_string();
    let (lo, hi) = age_bounds(&age_group).expect("age groups validated at load");
    let age = rng.random_range(lo..=hi);
    Persona {
        agent_id,
        gender: marginals.get(Attribute::Gender).sample(rng).to_string(),
        age,
        age_group,
        education: marginals.get(Attribute::Education).sample(rng).to_string(),
        race_ethnicity: marginals.get(Attribute::RaceEthnicity).sample(rng).to_string(),
        occupation: marginals.get(Attribute::Occupation).sample(rng).to_string(),
        political_belief: marginals.get(Attribute::PoliticalBelief).sample(rng).to_string(),
        religion: marginals.get(Attribute::Religion).sample(rng).to_string(),
    }
}

/// Samples `n` personas, each from its own stream keyed by `(seed, agent_id)`.
pub fn sample_population(marginals: &DemographicMarginals, n: usize, seed: u64) -> Vec<Persona> {
    (0..n)
        .map(|id| {
            let mut rng = rng::stream(seed, Purpose::Persona, &[id as u64]);
            sample_persona(marginals, id, &mut rng)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileOptions {
    pub include_race: bool,
}

/// `ID. Gender\tAge: ..\tEducation: ..\tOccupation: ..\tPolitical belief: ..\tReligion: ..`
pub fn profile_string(persona: &Persona) -> String {
    profile_string_with(persona, ProfileOptions::default())
}

pub fn profile_string_with(persona: &Persona, options: ProfileOptions) -> String {
    let mut s = format!(
        "{}. {}\tAge: {}\tEducation: {}\tOccupation: {}\tPolitical belief: {}\tReligion: {}",
        persona.agent_id,
        persona.gender,
        persona.age,
        persona.education,
        persona.occupation,
        persona.political_belief,
        persona.religion
    );
    if options.include_race {
        s.push_str("\tRace/ethnicity: ");
        s.push_str(&persona.race_ethnicity);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedProfile {
    pub agent_id: usize,
    pub gender: String,
    pub age: u32,
    pub education: String,
    pub occupation: String,
    pub political_belief: String,
    pub religion: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed profile string: {0}")]
pub struct ProfileParseError(pub String);

/// Parses a rendered profile string back into its fields.
pub fn parse_profile(s: &str) -> Result<ParsedProfile, ProfileParseError> {
    let err = |m: &str| ProfileParseError(m.to_string());
    let mut fields = s.trim().split('\t');
    let head = fields.next().ok_or_else(|| err("empty"))?;
    let (id, gender) = head.split_once(". ").ok_or_else(|| err("missing `ID. Gender`"))?;
    let agent_id = id.trim().parse().map_err(|_| err("bad id"))?;
    let mut take = |label: &str| -> Result<String, ProfileParseError> {
        let f = fields.next().ok_or_else(|| err(&format!("missing {label}")))?;
        f.strip_prefix(label)
            .and_then(|v| v.strip_prefix(": "))
            .map(str::to_string)
            .ok_or_else(|| err(&format!("expected {label}")))
    };
    let age = take("Age")?.parse().map_err(|_| err("bad age"))?;
    Ok(ParsedProfile {
        agent_id,
        gender: gender.to_string(),
        age,
        education: take("Education")?,
        occupation: take("Occupation")?,
        political_belief: take("Political belief")?,
        religion: take("Religion")?,
    })
}
