//! Sequence data model: actions, actionsets, timed sequences, dimensions and
//! databases, plus the pattern types the miners produce.
//!
//! Records are [`TimedSequence`]s of concrete [`Action`]s. Patterns are
//! [`Pattern`]s whose items may carry a value cluster instead of a single value.
//! Both keep their actionsets sorted by [`Symbol`] so that equality and
//! ordering are canonical.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cluster::ValueCluster;
use crate::error::{Error, Result};

/// An action label.
///
/// Symbols order numerically when both parse as integers (so `9 < 10`), and
/// numeric symbols sort before textual ones. Equality is textual.
#[derive(Clone)]
pub struct Symbol(Arc<SymbolInner>);

struct SymbolInner {
    text: Box<str>,
    num: Option<i64>,
}

impl Symbol {
    pub fn new(text: impl AsRef<str>) -> Self {
        let text = text.as_ref();
        Symbol(Arc::new(SymbolInner {
            num: text.parse().ok(),
            text: text.into(),
        }))
    }

    pub fn as_str(&self) -> &str {
        &self.0.text
    }
}

impl PartialEq for Symbol {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.text == other.0.text
    }
}

impl Eq for Symbol {}

impl Hash for Symbol {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.text.hash(state)
    }
}

impl Ord for Symbol {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        let key = |s: &SymbolInner| (s.num.is_none(), s.num.unwrap_or(0));
        key(&self.0)
            .cmp(&key(&other.0))
            .then_with(|| self.0.text.cmp(&other.0.text))
    }
}

impl PartialOrd for Symbol {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.as_str())
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

impl Serialize for Symbol {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Symbol {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Ok(Symbol::new(text))
    }
}

/// A concrete action as logged: a symbol and an optional integer value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    pub symbol: Symbol,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<i64>,
}

impl Action {
    pub fn plain(symbol: impl AsRef<str>) -> Self {
        Action {
            symbol: Symbol::new(symbol),
            value: None,
        }
    }

    pub fn valued(symbol: impl AsRef<str>, value: i64) -> Self {
        Action {
            symbol: Symbol::new(symbol),
            value: Some(value),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value {
            Some(v) => write!(f, "{}{{{}}}", self.symbol, v),
            None => write!(f, "{}", self.symbol),
        }
    }
}

/// Simultaneous actions at one timestamp, sorted and distinct by symbol.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionSet {
    pub time: i64,
    actions: Vec<Action>,
}

impl ActionSet {
    pub fn new(time: i64, mut actions: Vec<Action>) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::InvalidSequence("empty actionset".into()));
        }
        if time < 0 {
            return Err(Error::InvalidSequence(format!("negative timestamp {time}")));
        }
        actions.sort_by(|a, b| a.symbol.cmp(&b.symbol));
        if let Some(w) = actions.windows(2).find(|w| w[0].symbol == w[1].symbol) {
            return Err(Error::InvalidSequence(format!(
                "duplicate symbol {} in actionset",
                w[0].symbol
            )));
        }
        Ok(ActionSet { time, actions })
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn get(&self, symbol: &Symbol) -> Option<&Action> {
        self.actions
            .binary_search_by(|a| a.symbol.cmp(symbol))
            .ok()
            .map(|i| &self.actions[i])
    }
}

/// An ordered list of actionsets with strictly increasing timestamps, the
/// first at time 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct TimedSequence {
    sets: Vec<ActionSet>,
}

impl TimedSequence {
    /// Builds a sequence, rebasing timestamps so that the first is 0.
    pub fn new(mut sets: Vec<ActionSet>) -> Result<Self> {
        if let Some(w) = sets.windows(2).find(|w| w[1].time <= w[0].time) {
            return Err(Error::InvalidSequence(format!(
                "timestamps not strictly increasing ({} then {})",
                w[0].time, w[1].time
            )));
        }
        if let Some(base) = sets.first().map(|s| s.time) {
            for s in &mut sets {
                s.time -= base;
            }
        }
        Ok(TimedSequence { sets })
    }

    /// Builds a sequence whose timestamps are the actionset indices.
    pub fn from_itemsets(itemsets: Vec<Vec<Action>>) -> Result<Self> {
        let sets = itemsets
            .into_iter()
            .enumerate()
            .map(|(i, a)| ActionSet::new(i as i64, a))
            .collect::<Result<Vec<_>>>()?;
        TimedSequence::new(sets)
    }

    /// Convenience constructor from `(time, ["sym", "sym{3}"])` pairs.
    pub fn parse_items(sets: &[(i64, &[&str])]) -> Result<Self> {
        let sets = sets
            .iter()
            .map(|(t, items)| {
                let actions = items
                    .iter()
                    .map(|s| crate::format::parse_action(s).map_err(Error::InvalidSequence))
                    .collect::<Result<Vec<_>>>()?;
                ActionSet::new(*t, actions)
            })
            .collect::<Result<Vec<_>>>()?;
        TimedSequence::new(sets)
    }

    pub fn sets(&self) -> &[ActionSet] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn time(&self, pos: usize) -> i64 {
        self.sets[pos].time
    }

    /// Drops timestamps and values: the plain pattern this sequence spells.
    pub fn to_pattern(&self, mode: Mode) -> Pattern {
        Pattern {
            sets: self
                .sets
                .iter()
                .enumerate()
                .map(|(i, s)| PatternSet {
                    offset: match mode {
                        Mode::Timed => s.time,
                        Mode::Untimed => i as i64,
                    },
                    items: s
                        .actions
                        .iter()
                        .map(|a| PatternItem::plain(a.symbol.clone()))
                        .collect(),
                })
                .collect(),
        }
    }
}

impl fmt::Display for TimedSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.sets {
            write!(f, "({},", s.time)?;
            for (i, a) in s.actions.iter().enumerate() {
                if i > 0 {
                    f.write_str(" ")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Whether pattern timestamps are part of pattern identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Timed,
    Untimed,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Timed => "timed",
            Mode::Untimed => "untimed",
        })
    }
}

/// One pattern element: a symbol, optionally restricted to a value cluster.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PatternItem {
    pub symbol: Symbol,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<Arc<ValueCluster>>,
}

impl PatternItem {
    pub fn plain(symbol: Symbol) -> Self {
        PatternItem {
            symbol,
            cluster: None,
        }
    }

    pub fn clustered(symbol: Symbol, cluster: ValueCluster) -> Self {
        PatternItem {
            symbol,
            cluster: Some(Arc::new(cluster)),
        }
    }

    /// Symbol equality plus, for clustered items, membership of the value.
    /// Unvalued occurrences never match a clustered item.
    pub fn matches(&self, action: &Action) -> bool {
        self.symbol == action.symbol
            && match &self.cluster {
                None => true,
                Some(c) => action.value.is_some_and(|v| c.contains(v)),
            }
    }
}

impl fmt::Display for PatternItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.cluster {
            Some(c) => write!(f, "{}{{{}}}", self.symbol, c.median),
            None => write!(f, "{}", self.symbol),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PatternSet {
    pub offset: i64,
    pub items: Vec<PatternItem>,
}

impl PatternSet {
    /// True if every item of `self` matches a distinct action of `set`.
    pub fn matched_by(&self, set: &ActionSet) -> bool {
        self.items
            .iter()
            .all(|it| set.get(&it.symbol).is_some_and(|a| it.matches(a)))
    }

    pub fn last_symbol(&self) -> Option<&Symbol> {
        self.items.last().map(|i| &i.symbol)
    }
}

/// A mined (or queried) sequential pattern.
///
/// Timed patterns carry offsets relative to their head; untimed patterns carry
/// ordinal offsets `0, 1, 2, ...`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Pattern {
    pub sets: Vec<PatternSet>,
}

impl Pattern {
    pub fn empty() -> Self {
        Pattern::default()
    }

    /// Timed pattern from `(offset, ["sym", ...])` pairs; items are plain.
    pub fn timed(sets: &[(i64, &[&str])]) -> Self {
        let mut p = Pattern {
            sets: sets
                .iter()
                .map(|(t, items)| PatternSet {
                    offset: *t,
                    items: items.iter().map(|s| PatternItem::plain(Symbol::new(s))).collect(),
                })
                .collect(),
        };
        p.canonicalize();
        p
    }

    /// Untimed pattern from itemsets; items are plain.
    pub fn untimed(sets: &[&[&str]]) -> Self {
        let timed: Vec<(i64, &[&str])> = sets
            .iter()
            .enumerate()
            .map(|(i, s)| (i as i64, *s))
            .collect();
        Pattern::timed(&timed)
    }

    pub(crate) fn canonicalize(&mut self) {
        for s in &mut self.sets {
            s.items.sort();
        }
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn item_count(&self) -> usize {
        self.sets.iter().map(|s| s.items.len()).sum()
    }

    /// Offset distance between head and tail.
    pub fn span(&self) -> i64 {
        match (self.sets.first(), self.sets.last()) {
            (Some(a), Some(b)) => b.offset - a.offset,
            _ => 0,
        }
    }

    pub fn items(&self) -> impl Iterator<Item = &PatternItem> {
        self.sets.iter().flat_map(|s| s.items.iter())
    }

    pub fn has_clusters(&self) -> bool {
        self.items().any(|i| i.cluster.is_some())
    }

    /// Same pattern with ordinal offsets.
    pub fn untimed_view(&self) -> Pattern {
        Pattern {
            sets: self
                .sets
                .iter()
                .enumerate()
                .map(|(i, s)| PatternSet {
                    offset: i as i64,
                    items: s.items.clone(),
                })
                .collect(),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.sets {
            write!(f, "({},", s.offset)?;
            for (i, it) in s.items.iter().enumerate() {
                if i > 0 {
                    f.write_str(" ")?;
                }
                write!(f, "{it}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Ordered dimension names.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DimensionSchema {
    pub names: Vec<String>,
}

impl DimensionSchema {
    pub fn new(names: Vec<String>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for n in &names {
            if n.is_empty() {
                return Err(Error::InvalidArgument("empty dimension name".into()));
            }
            if !seen.insert(n) {
                return Err(Error::InvalidArgument(format!("duplicate dimension name {n}")));
            }
        }
        Ok(DimensionSchema { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n.eq_ignore_ascii_case(name))
    }
}

/// A dimension value or the wildcard `*`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MdValue {
    Any,
    Value(String),
}

impl MdValue {
    pub fn value(s: impl Into<String>) -> Self {
        MdValue::Value(s.into())
    }

    pub fn parse(s: &str) -> Self {
        if s == "*" {
            MdValue::Any
        } else {
            MdValue::Value(s.to_string())
        }
    }

    pub fn as_value(&self) -> Option<&str> {
        match self {
            MdValue::Any => None,
            MdValue::Value(v) => Some(v),
        }
    }
}

impl fmt::Display for MdValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MdValue::Any => f.write_str("*"),
            MdValue::Value(v) => f.write_str(v),
        }
    }
}

impl Serialize for MdValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for MdValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(MdValue::parse(&String::deserialize(d)?))
    }
}

/// One value (or `*`) per schema dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct MdPattern(pub Vec<MdValue>);

impl MdPattern {
    pub fn any(len: usize) -> Self {
        MdPattern(vec![MdValue::Any; len])
    }

    pub fn concrete<S: AsRef<str>>(values: &[S]) -> Self {
        MdPattern(values.iter().map(|v| MdValue::value(v.as_ref())).collect())
    }

    /// Parses `true,*` style text; `*` becomes the wildcard.
    pub fn parse(text: &str) -> Self {
        if text.trim().is_empty() {
            return MdPattern::default();
        }
        MdPattern(text.split(',').map(|v| MdValue::parse(v.trim())).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn has_wildcards(&self) -> bool {
        self.0.contains(&MdValue::Any)
    }

    pub fn get(&self, dim: usize) -> Option<&MdValue> {
        self.0.get(dim)
    }
}

impl fmt::Display for MdPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// A database row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MdRecord {
    pub id: u64,
    pub dims: MdPattern,
    pub seq: TimedSequence,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SequenceDatabase {
    pub schema: DimensionSchema,
    records: Vec<MdRecord>,
}

impl SequenceDatabase {
    pub fn new(schema: DimensionSchema, records: Vec<MdRecord>) -> Result<Self> {
        let mut ids = std::collections::HashSet::new();
        for r in &records {
            if !ids.insert(r.id) {
                return Err(Error::InvalidArgument(format!("duplicate record id {}", r.id)));
            }
            if r.dims.len() != schema.len() {
                return Err(Error::ArityMismatch {
                    expected: schema.len(),
                    got: r.dims.len(),
                });
            }
            if r.dims.has_wildcards() {
                return Err(Error::InvalidArgument(format!(
                    "record {} has a wildcard dimension value",
                    r.id
                )));
            }
        }
        Ok(SequenceDatabase { schema, records })
    }

    /// Schema-less database with ids `1..=n`.
    pub fn from_sequences(seqs: Vec<TimedSequence>) -> Self {
        let records = seqs
            .into_iter()
            .enumerate()
            .map(|(i, seq)| MdRecord {
                id: i as u64 + 1,
                dims: MdPattern::default(),
                seq,
            })
            .collect();
        SequenceDatabase {
            schema: DimensionSchema::default(),
            records,
        }
    }

    pub fn records(&self) -> &[MdRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Total number of actionsets over all records.
    pub fn total_length(&self) -> usize {
        self.records.iter().map(|r| r.seq.len()).sum()
    }
}
