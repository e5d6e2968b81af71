//! Typed extraction of lessons, attitude distributions and judge ratings.

use serde_json::Value;
use thiserror::Error;

use super::json_repair::{repair_json, Shape};

#[derive(Debug, Clone, PartialEq)]
pub struct LessonExtraction {
    pub lessons: Vec<(String, f64)>,
    pub repaired: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttitudeExtraction {
    pub reasoning: String,
    pub raw: [f64; 4],
    pub repaired: bool,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AttitudeParseError {
    #[error("no JSON object found")]
    NoJson,
    #[error("missing `attitude_dist`")]
    MissingDistribution,
    #[error("`attitude_dist` has {0} entries, expected 4")]
    Arity(usize),
    #[error("`attitude_dist` entry {0} is not a number")]
    NonNumeric(usize),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum JudgeParseError {
    #[error("no JSON object found")]
    NoJson,
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    #[error("rating is not an integer: {0}")]
    NotInteger(String),
    #[error("rating {0} outside 1..=5")]
    OutOfRange(i64),
}

fn number(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn lesson_entry(v: &Value) -> Option<(String, f64)> {
    match v {
        Value::Array(pair) if pair.len() == 2 => {
            let text = pair[0].as_str()?.trim();
            let imp = number(&pair[1])?;
            (!text.is_empty()).then(|| (text.to_string(), imp))
        }
        Value::Object(map) => {
            let text = map.get("lesson").or_else(|| map.get("text"))?.as_str()?.trim();
            let imp = number(map.get("importance")?)?;
            (!text.is_empty()).then(|| (text.to_string(), imp))
        }
        _ => None,
    }
}

/// Parses the list-of-`[text, importance]` contract. Unusable entries are
/// skipped; importance is clamped into `[0, 1]` (NaN becomes 0).
pub fn extract_lessons(text: &str) -> LessonExtraction {
    let Some(r) = repair_json(text, Shape::Array) else {
        log::warn!("unrecoverable lesson output: {text:?}");
        return LessonExtraction { lessons: Vec::new(), repaired: false };
    };
    let items = r.value.as_array().cloned().unwrap_or_default();
    // a bare ["text", 0.9] pair is accepted as a single lesson
    let lessons: Vec<(String, f64)> = match lesson_entry(&r.value) {
        Some(single) if !items.iter().any(|v| v.is_array()) => vec![single],
        _ => items.iter().filter_map(lesson_entry).collect(),
    };
    let lessons = lessons
        .into_iter()
        .map(|(t, imp)| (t, if imp.is_nan() { 0.0 } else { imp.clamp(0.0, 1.0) }))
        .collect::<Vec<_>>();
    if lessons.is_empty() {
        log::warn!("lesson output held no usable entries: {text:?}");
    }
    LessonExtraction { lessons, repaired: r.repaired }
}

pub fn extract_attitude(text: &str) -> Result<AttitudeExtraction, AttitudeParseError> {
    let r = repair_json(text, Shape::Object).ok_or(AttitudeParseError::NoJson)?;
    let obj = r.value.as_object().ok_or(AttitudeParseError::NoJson)?;
    let reasoning = obj
        .get("reasoning")
        .map(|v| v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string()))
        .unwrap_or_default();
    let dist = obj.get("attitude_dist").ok_or(AttitudeParseError::MissingDistribution)?;
    let list = match dist {
        Value::Array(a) => a.clone(),
        Value::String(s) => match serde_json::from_str::<Value>(s) {
            Ok(Value::Array(a)) => a,
            _ => return Err(AttitudeParseError::NonNumeric(0)),
        },
        _ => return Err(AttitudeParseError::MissingDistribution),
    };
    if list.len() != 4 {
        return Err(AttitudeParseError::Arity(list.len()));
    }
    let mut raw = [0.0; 4];
    for (i, v) in list.iter().enumerate() {
        raw[i] = number(v).ok_or(AttitudeParseError::NonNumeric(i))?;
    }
    Ok(AttitudeExtraction { reasoning, raw, repaired: r.repaired })
}

pub fn extract_judge_rating(text: &str) -> Result<(String, u8), JudgeParseError> {
    let r = repair_json(text, Shape::Object).ok_or(JudgeParseError::NoJson)?;
    let obj = r.value.as_object().ok_or(JudgeParseError::NoJson)?;
    let reasoning = obj
        .get("reasoning")
        .ok_or(JudgeParseError::MissingKey("reasoning"))?
        .as_str()
        .ok_or(JudgeParseError::MissingKey("reasoning"))?
        .to_string();
    let rating = obj.get("rating").ok_or(JudgeParseError::MissingKey("rating"))?;
    let value = match rating {
        Value::Number(n) => n
            .as_i64()
            .or_else(|| n.as_f64().filter(|f| f.fract() == 0.0 && f.abs() < 1e9).map(|f| f as i64)),
        Value::String(s) => s.trim().parse::<i64>().ok(),
        _ => None,
    }
    .ok_or_else(|| JudgeParseError::NotInteger(rating.to_string()))?;
    if !(1..=5).contains(&value) {
        return Err(JudgeParseError::OutOfRange(value));
    }
    Ok((reasoning, value as u8))
}
