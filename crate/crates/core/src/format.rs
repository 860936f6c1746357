//! Text formats: sequence databases, attempt logs, mined-pattern reports and
//! knowledge-base files.
//!
//! Database, one record per line:
//!
//! ```text
//! @dims success expertise
//! # id | dims | actionsets
//! 1 | true,novice | 0:a ; 1:b c{4}
//! 2 | false,expert | a ; b c        # index timestamps
//! ```
//!
//! Attempt log:
//!
//! ```text
//! dims success=true expertise=novice
//! state S0
//! action a
//! action EP{-2} cam_CP2             # one simultaneous actionset
//! state S1
//! ```

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::MinedPattern;
use crate::model::{
    Action, ActionSet, DimensionSchema, MdPattern, MdRecord, Mode, SequenceDatabase, TimedSequence,
};
use crate::recognizer::{Attempt, KnowledgeBase, ProblemState};

fn valid_symbol(s: &str) -> bool {
    !s.is_empty()
        && !s
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, '{' | '}' | ';' | '|' | ',' | ':' | '#' | '(' | ')'))
}

/// Parses `sym` or `sym{value}`.
pub fn parse_action(text: &str) -> std::result::Result<Action, String> {
    let text = text.trim();
    let (symbol, value) = match text.find('{') {
        None => (text, None),
        Some(open) => {
            let Some(inner) = text[open + 1..].strip_suffix('}') else {
                return Err(format!("malformed value literal in `{text}`"));
            };
            let value: i64 = inner
                .trim()
                .parse()
                .map_err(|_| format!("malformed value literal in `{text}`"))?;
            (&text[..open], Some(value))
        }
    };
    if !valid_symbol(symbol) {
        return Err(format!("invalid action symbol `{symbol}`"));
    }
    Ok(Action {
        symbol: symbol.into(),
        value,
    })
}

fn parse_actions(text: &str, line: usize) -> Result<Vec<Action>> {
    text.split_whitespace()
        .map(|t| parse_action(t).map_err(|m| Error::parse(line, m)))
        .collect()
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(l, _)| l).trim()
}

fn parse_record(text: &str, line: usize) -> Result<MdRecord> {
    let parts: Vec<&str> = text.split('|').collect();
    let [id, dims, body] = parts[..] else {
        return Err(Error::parse(line, "expected `id | dims | actionsets`"));
    };
    let id: u64 = id
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid record id `{}`", id.trim())))?;
    let dims = if dims.trim().is_empty() {
        MdPattern::default()
    } else {
        let values: Vec<&str> = dims.split(',').map(str::trim).collect();
        if values.iter().any(|v| v.is_empty() || *v == "*") {
            return Err(Error::parse(line, "dimension values must be concrete and non-empty"));
        }
        MdPattern::concrete(&values)
    };
    let segments: Vec<&str> = body.split(';').map(str::trim).collect();
    let mut sets = Vec::new();
    let mut timed = None;
    if !(segments.len() == 1 && segments[0].is_empty()) {
        for (i, seg) in segments.iter().enumerate() {
            let (time, items) = match seg.split_once(':') {
                Some((t, items)) => {
                    let t: i64 = t
                        .trim()
                        .parse()
                        .map_err(|_| Error::parse(line, format!("invalid timestamp `{}`", t.trim())))?;
                    (Some(t), items)
                }
                None => (None, *seg),
            };
            if *timed.get_or_insert(time.is_some()) != time.is_some() {
                return Err(Error::parse(line, "timestamps must be given for all actionsets or none"));
            }
            let actions = parse_actions(items, line)?;
            if actions.is_empty() {
                return Err(Error::parse(line, "empty actionset"));
            }
            let set = ActionSet::new(time.unwrap_or(i as i64), actions).map_err(|e| Error::parse(line, e.to_string()))?;
            sets.push(set);
        }
    }
    let seq = TimedSequence::new(sets).map_err(|e| Error::parse(line, e.to_string()))?;
    Ok(MdRecord { id, dims, seq })
}

/// Parses a database. Without an `@dims` header, dimensions are named
/// `d1..dn` after the first record's arity.
pub fn parse_db(text: &str) -> Result<SequenceDatabase> {
    let mut schema: Option<DimensionSchema> = None;
    let mut records: Vec<MdRecord> = Vec::new();
    let mut ids = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = strip_comment(raw);
        if content.is_empty() {
            continue;
        }
        if let Some(names) = content.strip_prefix("@dims") {
            if schema.is_some() || !records.is_empty() {
                return Err(Error::parse(line, "`@dims` must come once, before any record"));
            }
            let names = names.split_whitespace().map(String::from).collect();
            schema = Some(DimensionSchema::new(names).map_err(|e| Error::parse(line, e.to_string()))?);
            continue;
        }
        let record = parse_record(content, line)?;
        let schema = schema.get_or_insert_with(|| DimensionSchema {
            names: (1..=record.dims.len()).map(|i| format!("d{i}")).collect(),
        });
        if record.dims.len() != schema.len() {
            return Err(Error::parse(
                line,
                format!(
                    "dimension arity mismatch: expected {}, got {}",
                    schema.len(),
                    record.dims.len()
                ),
            ));
        }
        if !ids.insert(record.id) {
            return Err(Error::parse(line, format!("duplicate record id {}", record.id)));
        }
        records.push(record);
    }
    SequenceDatabase::new(schema.unwrap_or_default(), records)
}

fn write_actions(out: &mut String, actions: &[Action]) {
    for (i, a) in actions.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{a}");
    }
}

/// Inverse of [`parse_db`]; always writes timestamps.
pub fn emit_db(db: &SequenceDatabase) -> String {
    let mut out = String::new();
    if !db.schema.is_empty() {
        let _ = writeln!(out, "@dims {}", db.schema.names.join(" "));
    }
    for r in db.records() {
        let _ = write!(out, "{} | {} |", r.id, r.dims);
        for (i, s) in r.seq.sets().iter().enumerate() {
            out.push_str(if i == 0 { " " } else { " ; " });
            let _ = write!(out, "{}:", s.time);
            write_actions(&mut out, s.actions());
        }
        out.push('\n');
    }
    out
}

/// Parses one attempt log.
pub fn parse_attempt(text: &str) -> Result<Attempt> {
    let mut header: Option<(DimensionSchema, MdPattern)> = None;
    let mut states: Vec<ProblemState> = Vec::new();
    let mut transitions: Vec<Vec<Vec<Action>>> = Vec::new();
    let mut current: Vec<Vec<Action>> = Vec::new();
    let mut last_action_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = strip_comment(raw);
        if content.is_empty() {
            continue;
        }
        let (keyword, rest) = content.split_once(char::is_whitespace).unwrap_or((content, ""));
        let rest = rest.trim();
        match keyword {
            "dims" => {
                if header.is_some() {
                    return Err(Error::parse(line, "duplicate `dims` line"));
                }
                if !states.is_empty() {
                    return Err(Error::parse(line, "`dims` must precede the first state"));
                }
                let mut names = Vec::new();
                let mut values = Vec::new();
                for pair in rest.split_whitespace() {
                    let Some((k, v)) = pair.split_once('=') else {
                        return Err(Error::parse(line, format!("expected name=value, got `{pair}`")));
                    };
                    if v.is_empty() || v == "*" || v.contains(',') {
                        return Err(Error::parse(line, format!("invalid value for dimension `{k}`")));
                    }
                    names.push(k.to_string());
                    values.push(v.to_string());
                }
                let schema = DimensionSchema::new(names).map_err(|e| Error::parse(line, e.to_string()))?;
                header = Some((schema, MdPattern::concrete(&values)));
            }
            "state" => {
                if header.is_none() {
                    return Err(Error::parse(line, "missing `dims` line before the first state"));
                }
                let state = ProblemState::new(rest).map_err(|e| Error::parse(line, e.to_string()))?;
                if !states.is_empty() {
                    transitions.push(std::mem::take(&mut current));
                }
                states.push(state);
            }
            "action" => {
                if states.is_empty() {
                    return Err(Error::parse(line, "attempt must start with a state line"));
                }
                let actions = parse_actions(rest, line)?;
                if actions.is_empty() {
                    return Err(Error::parse(line, "empty action line"));
                }
                current.push(actions);
                last_action_line = line;
            }
            other => return Err(Error::parse(line, format!("unknown keyword `{other}`"))),
        }
    }
    let Some((schema, dims)) = header else {
        return Err(Error::parse(1, "missing `dims` line"));
    };
    if states.is_empty() {
        return Err(Error::parse(1, "attempt has no state"));
    }
    if !current.is_empty() {
        return Err(Error::parse(last_action_line, "actions after the last state"));
    }
    let transitions = transitions
        .into_iter()
        .map(TimedSequence::from_itemsets)
        .collect::<Result<Vec<_>>>()?;
    Attempt::new(schema, dims, states, transitions)
}

/// Inverse of [`parse_attempt`] (timestamps are not written; transitions are
/// index-timed).
pub fn emit_attempt(attempt: &Attempt) -> String {
    let mut out = String::from("dims");
    for (name, value) in attempt.schema.names.iter().zip(&attempt.dims.0) {
        let _ = write!(out, " {name}={value}");
    }
    out.push('\n');
    for (i, state) in attempt.states.iter().enumerate() {
        let _ = writeln!(out, "state {state}");
        if let Some(t) = attempt.transitions.get(i) {
            for s in t.sets() {
                out.push_str("action ");
                write_actions(&mut out, s.actions());
                out.push('\n');
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Tsv,
    Json,
}

/// Run parameters echoed at the top of a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub minsup_abs: usize,
    pub records: usize,
    pub mode: Mode,
}

#[derive(Serialize)]
struct JsonCluster {
    median: i64,
    min: i64,
    max: i64,
    size: usize,
}

#[derive(Serialize)]
struct JsonItem {
    offset: i64,
    symbol: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    cluster: Option<JsonCluster>,
}

#[derive(Serialize)]
struct JsonPattern {
    pattern: String,
    support_count: usize,
    support_frac: f64,
    dims: String,
    items: Vec<JsonItem>,
}

#[derive(Serialize)]
struct JsonReport {
    #[serde(flatten)]
    header: ReportHeader,
    patterns: Vec<JsonPattern>,
}

fn round4(x: f64) -> f64 {
    (x * 10_000.0).round() / 10_000.0
}

/// Renders patterns as TSV (`pattern, support_count, support_frac, dims`
/// after a `#` header line) or as JSON with the same fields plus cluster
/// bounds.
pub fn emit_patterns(patterns: &[MinedPattern], format: OutputFormat, header: &ReportHeader) -> String {
    match format {
        OutputFormat::Tsv => {
            let mut out = format!(
                "# minsup_abs={} records={} mode={}\npattern\tsupport_count\tsupport_frac\tdims\n",
                header.minsup_abs, header.records, header.mode
            );
            for p in patterns {
                let _ = writeln!(out, "{}\t{}\t{:.4}\t{}", p.pattern, p.support, p.fraction(), p.md);
            }
            out
        }
        OutputFormat::Json => {
            let report = JsonReport {
                header: *header,
                patterns: patterns
                    .iter()
                    .map(|p| JsonPattern {
                        pattern: p.pattern.to_string(),
                        support_count: p.support,
                        support_frac: round4(p.fraction()),
                        dims: p.md.to_string(),
                        items: p
                            .pattern
                            .sets
                            .iter()
                            .flat_map(|s| {
                                s.items.iter().map(move |it| JsonItem {
                                    offset: s.offset,
                                    symbol: it.symbol.to_string(),
                                    cluster: it.cluster.as_ref().map(|c| JsonCluster {
                                        median: c.median,
                                        min: c.min,
                                        max: c.max,
                                        size: c.size(),
                                    }),
                                })
                            })
                            .collect(),
                    })
                    .collect(),
            };
            let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
            s.push('\n');
            s
        }
    }
}

pub const KB_FORMAT: &str = "taskmodel-kb";
pub const KB_VERSION: u32 = 1;

/// Serializes a knowledge base as self-describing JSON.
pub fn save_kb(kb: &KnowledgeBase) -> String {
    let mut s = serde_json::to_string_pretty(kb).expect("knowledge base serializes");
    s.push('\n');
    s
}

/// Loads a knowledge base, refusing other formats and versions.
pub fn load_kb(text: &str) -> Result<KnowledgeBase> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
    let format = value.get("format").and_then(|v| v.as_str());
    if format != Some(KB_FORMAT) {
        return Err(Error::IncompatibleKb(format!(
            "expected format `{KB_FORMAT}`, found {format:?}"
        )));
    }
    let version = value.get("version").and_then(|v| v.as_u64());
    if version != Some(KB_VERSION as u64) {
        return Err(Error::IncompatibleKb(format!(
            "unsupported version {version:?} (expected {KB_VERSION})"
        )));
    }
    let kb: KnowledgeBase = serde_json::from_value(value).map_err(|e| Error::IncompatibleKb(e.to_string()))?;
    kb.validate()?;
    Ok(kb)
}
