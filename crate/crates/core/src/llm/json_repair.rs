//! Deterministic JSON salvage for model output.
//!
//! Pipeline: direct parse, then strip code fences and slice from the first
//! expected opening delimiter, then cut at the matching close, then trim
//! trailing stray quotes/brackets and re-balance delimiters. As a last step
//! single-quoted payloads are retried with double quotes.

use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Array,
    Object,
}

impl Shape {
    fn open(self) -> u8 {
        match self {
            Shape::Array => b'[',
            Shape::Object => b'{',
        }
    }

    fn matches(self, v: &Value) -> bool {
        match self {
            Shape::Array => v.is_array(),
            Shape::Object => v.is_object(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Repaired {
    pub value: Value,
    /// False when the text parsed as-is.
    pub repaired: bool,
}

pub fn strip_code_fences(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    // drop an optional language tag on the opening fence line
    let body = match rest.find('\n') {
        Some(nl) => &rest[nl + 1..],
        None => rest,
    };
    let body = body.trim_end();
    body.strip_suffix("```").unwrap_or(body).trim()
}

/// Byte index just past the delimiter closing the value that starts at 0,
/// honoring string literals.
fn matching_close(s: &str) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, b) in s.bytes().enumerate() {
        if in_str {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_str = true,
            b'[' | b'{' => depth += 1,
            b']' | b'}' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

pub fn trim_trailing_garbage(s: &str) -> &str {
    s.trim_end_matches(|c: char| c.is_whitespace() || matches!(c, '"' | '\'' | ']' | '}' | ',' | '.' | ';' | '`'))
}

/// Closes an unterminated string and any open brackets, dropping a dangling
/// comma first.
pub fn balance_delimiters(s: &str) -> String {
    let mut stack = Vec::new();
    let mut in_str = false;
    let mut escaped = false;
    for b in s.bytes() {
        if in_str {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_str = true,
            b'[' => stack.push(b']'),
            b'{' => stack.push(b'}'),
            b']' | b'}'
                if stack.last() == Some(&b) => {
                    stack.pop();
                }
            _ => {}
        }
    }
    let mut out = s.to_string();
    if in_str {
        if escaped {
            out.pop();
        }
        out.push('"');
    } else {
        let trimmed = out.trim_end().trim_end_matches(',').len();
        out.truncate(trimmed);
    }
    while let Some(c) = stack.pop() {
        out.push(c as char);
    }
    out
}

fn parse_shape(s: &str, shape: Shape) -> Option<Value> {
    serde_json::from_str::<Value>(s).ok().filter(|v| shape.matches(v))
}

fn salvage(text: &str, shape: Shape) -> Option<Value> {
    let body = strip_code_fences(text);
    let start = body.bytes().position(|b| b == shape.open())?;
    let body = &body[start..];
    if let Some(end) = matching_close(body) {
        if let Some(v) = parse_shape(&body[..end], shape) {
            return Some(v);
        }
    }
    parse_shape(&balance_delimiters(trim_trailing_garbage(body)), shape)
}

pub fn repair_json(text: &str, shape: Shape) -> Option<Repaired> {
    if let Some(value) = parse_shape(text.trim(), shape) {
        return Some(Repaired { value, repaired: false });
    }
    if let Some(value) = salvage(text, shape) {
        return Some(Repaired { value, repaired: true });
    }
    if text.contains('\'') && !text.contains('"') {
        let swapped = text.replace('\'', "\"");
        if let Some(value) = salvage(&swapped, shape) {
            return Some(Repaired { value, repaired: true });
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    #[test]
    fn clean_input_not_marked_repaired() {
        let r = repair_json(r#"[["a", 0.5]]"#, Shape::Array).unwrap();
        assert!(!r.repaired);
        assert_eq!(r.value, json!([["a", 0.5]]));
    }

    #[test]
    fn extra_trailing_quote() {
        let text = r#"[["the government incentivizes vaccines with cash", 0.9], ["today no one gets infected", 0.8]"]"#;
        let r = repair_json(text, Shape::Array).unwrap();
        assert!(r.repaired);
        assert_eq!(
            r.value,
            json!([["the government incentivizes vaccines with cash", 0.9], ["today no one gets infected", 0.8]])
        );
    }

    #[test]
    fn fenced_and_prefixed() {
        let text = "```json\n{\"reasoning\": \"x\", \"attitude_dist\": [0.1, 0.2, 0.3, 0.4]}\n```";
        assert_eq!(repair_json(text, Shape::Object).unwrap().value["attitude_dist"][3], json!(0.4));
        let text = "Sure! Here you go: {\"a\": 1} hope that helps";
        assert_eq!(repair_json(text, Shape::Object).unwrap().value, json!({"a": 1}));
    }

    #[test]
    fn truncated_output_balanced() {
        let r = repair_json(r#"[["vaccines are safe", 0.7], ["side eff"#, Shape::Array).unwrap();
        assert_eq!(r.value[0], json!(["vaccines are safe", 0.7]));
        assert_eq!(balance_delimiters(r#"{"a": [1, 2,"#), r#"{"a": [1, 2]}"#);
    }

    #[test]
    fn brackets_inside_strings_ignored() {
        let r = repair_json(r#"[["odd ] text [", 0.4]] trailing"#, Shape::Array).unwrap();
        assert_eq!(r.value, json!([["odd ] text [", 0.4]]));
    }

    #[test]
    fn single_quotes() {
        let r = repair_json("[['masks help', 0.6]]", Shape::Array).unwrap();
        assert_eq!(r.value, json!([["masks help", 0.6]]));
    }

    #[test]
    fn hopeless() {
        assert!(repair_json("no json here", Shape::Array).is_none());
        assert!(repair_json("", Shape::Object).is_none());
    }

    proptest! {
        #[test]
        fn never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            let s = String::from_utf8_lossy(&bytes);
            let _ = repair_json(&s, Shape::Array);
            let _ = repair_json(&s, Shape::Object);
        }

        #[test]
        fn never_panics_jsonish(s in r#"[\[\]{}"',:a-z0-9 .\\]{0,60}"#) {
            let _ = repair_json(&s, Shape::Array);
            let _ = repair_json(&s, Shape::Object);
        }
    }
}
