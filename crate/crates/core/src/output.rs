//! Text formatting shared by the command-line front end: 12 significant
//! digits for every float and `#`-prefixed provenance headers.

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;

pub const SIG_DIGITS: usize = 12;

/// Rounds to [`SIG_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Float formatted with [`SIG_DIGITS`] significant digits, shortest form.
pub fn fmt(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    let r = round_sig(x);
    let s = format!("{r}");
    if s.contains('e') || s.len() <= 24 {
        s
    } else {
        format!("{r:e}")
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if !n.is_i64() && !n.is_u64() => {
            if let Some(r) = n.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to [`SIG_DIGITS`] significant digits.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

/// `# key = value` lines, one per entry, for CSV headers.
pub fn header(entries: &[(&str, String)]) -> String {
    entries.iter().map(|(k, v)| format!("# {k} = {v}\n")).collect()
}

/// Prefixes each line of a multi-line block with `# `.
pub fn comment_block(text: &str) -> String {
    text.lines().map(|l| format!("# {l}\n")).collect()
}
