//! Statistics files: a simulation record (JSON) or a plain 3x3 table.
//!
//! Tables have one row per outcome `b` and one column per input `x`. Entries
//! are either all integers (counts) or probabilities; `#` starts a comment.

use crate::error::{Error, Result};
use crate::simulator::RunRecord;
use crate::stats::{ConditionalStats, INPUTS, OUTCOMES};

#[derive(Debug, Clone)]
pub enum StatsInput {
    Record(RunRecord),
    Table(ConditionalStats),
}

pub fn parse_stats(text: &str) -> Result<StatsInput> {
    let trimmed = text.trim_start();
    if trimmed.is_empty() {
        return Err(Error::Parse { line: 1, message: "statistics file is empty".into() });
    }
    if trimmed.starts_with('{') {
        let record: RunRecord = serde_json::from_str(text)
            .map_err(|e| Error::Parse { line: e.line(), message: format!("bad record: {e}") })?;
        if record.repetitions.is_empty() {
            return Err(Error::Parse { line: 1, message: "record holds no repetitions".into() });
        }
        return Ok(StatsInput::Record(record));
    }
    parse_table(text).map(StatsInput::Table)
}

fn parse_table(text: &str) -> Result<ConditionalStats> {
    let mut rows: Vec<(usize, Vec<&str>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()).collect();
        if toks.len() != INPUTS {
            return Err(Error::Parse { line: i + 1, message: format!("expected {INPUTS} entries, found {}", toks.len()) });
        }
        rows.push((i + 1, toks));
    }
    if rows.len() != OUTCOMES {
        let line = rows.last().map_or(1, |r| r.0);
        return Err(Error::Parse { line, message: format!("expected {OUTCOMES} rows, found {}", rows.len()) });
    }
    let all_int = rows.iter().all(|(_, r)| r.iter().all(|t| t.parse::<u64>().is_ok()));
    if all_int {
        let mut counts = [[0u64; INPUTS]; OUTCOMES];
        for (b, (_, r)) in rows.iter().enumerate() {
            for (x, t) in r.iter().enumerate() {
                counts[b][x] = t.parse().expect("checked");
            }
        }
        return ConditionalStats::from_counts(counts);
    }
    let mut probs = [[0.0; INPUTS]; OUTCOMES];
    for (b, (line, r)) in rows.iter().enumerate() {
        for (x, t) in r.iter().enumerate() {
            probs[b][x] = t
                .parse::<f64>()
                .map_err(|_| Error::Parse { line: *line, message: format!("not a number: {t:?}") })?;
        }
    }
    ConditionalStats::from_probabilities(probs)
}
