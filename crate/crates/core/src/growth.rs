//! Projection-based pattern growth with gap and span constraints.
//!
//! A [`ProjectedDb`] is a pseudo-projection: each suffix is a pointer
//! `(record, position, start)` into the original database, one per occurrence
//! of the prefix's last actionset. Every occurrence is kept, so a record can
//! contribute several suffixes; support is always the number of distinct
//! records.
//!
//! Growth alternates two steps. [`grow_step`] scans the suffixes for
//! `(offset, symbol)` pairs: offset 0 adds a symbol to the last actionset
//! (only symbols greater than those already there), a positive offset opens a
//! new actionset that many time units later (timed) or anywhere later within
//! the gap window (untimed, offset 1). [`project`] then builds the projection
//! of the extended prefix. Valued symbols can be split by cluster in between,
//! see [`crate::cluster`].

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closure;
use crate::cluster::{adaptive_cluster, split_projection, ValueCluster};
use crate::containment::GapWindow;
use crate::error::{Error, Result};
use crate::model::{Action, MdPattern, Mode, Pattern, PatternItem, PatternSet, SequenceDatabase, Symbol};

/// Minimum support, relative or absolute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MinSupport {
    Fraction(f64),
    Absolute(usize),
}

/// Search thresholds: minimum support and the four time constraints
/// (minimum/maximum gap between adjacent actionsets, minimum/maximum span
/// between head and tail).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    pub minsup: MinSupport,
    pub min_gap: i64,
    pub max_gap: Option<i64>,
    pub min_span: i64,
    pub max_span: Option<i64>,
}

impl Constraints {
    pub fn new(minsup: MinSupport) -> Self {
        Constraints {
            minsup,
            min_gap: 1,
            max_gap: None,
            min_span: 0,
            max_span: None,
        }
    }

    pub fn fraction(f: f64) -> Self {
        Constraints::new(MinSupport::Fraction(f))
    }

    pub fn absolute(n: usize) -> Self {
        Constraints::new(MinSupport::Absolute(n))
    }

    pub fn with_gaps(mut self, min_gap: i64, max_gap: Option<i64>) -> Self {
        self.min_gap = min_gap;
        self.max_gap = max_gap;
        self
    }

    pub fn with_span(mut self, min_span: i64, max_span: Option<i64>) -> Self {
        self.min_span = min_span;
        self.max_span = max_span;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.minsup {
            MinSupport::Fraction(f) if !(f > 0.0 && f <= 1.0) => {
                return Err(Error::InfeasibleConstraints(format!(
                    "minsup fraction {f} outside (0, 1]"
                )))
            }
            MinSupport::Absolute(0) => {
                return Err(Error::InfeasibleConstraints("absolute minsup must be at least 1".into()))
            }
            _ => {}
        }
        if self.min_gap < 0 || self.min_span < 0 {
            return Err(Error::InfeasibleConstraints("negative gap or span bound".into()));
        }
        if let Some(c2) = self.max_gap {
            if self.min_gap > c2 {
                return Err(Error::InfeasibleConstraints(format!(
                    "min gap {} exceeds max gap {c2}",
                    self.min_gap
                )));
            }
        }
        if let Some(c4) = self.max_span {
            if self.min_span > c4 {
                return Err(Error::InfeasibleConstraints(format!(
                    "min span {} exceeds max span {c4}",
                    self.min_span
                )));
            }
        }
        Ok(())
    }

    /// Absolute threshold for a database of `n` records: `ceil(fraction * n)`,
    /// never below 1.
    pub fn threshold(&self, n: usize) -> usize {
        match self.minsup {
            MinSupport::Absolute(a) => a,
            MinSupport::Fraction(f) => ((f * n as f64 - 1e-9).ceil() as usize).max(1),
        }
    }

    pub fn window(&self) -> GapWindow {
        GapWindow {
            min_gap: self.min_gap,
            max_gap: self.max_gap,
            max_span: self.max_span,
        }
    }

    /// Minimum-span test deciding whether a frequent pattern is reported.
    /// Timed patterns use their own span; untimed ones their ordinal span.
    pub fn emits(&self, pattern: &Pattern, mode: Mode) -> bool {
        let span = match mode {
            Mode::Timed => pattern.span(),
            Mode::Untimed => pattern.len() as i64 - 1,
        };
        span >= self.min_span
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MineOptions {
    pub closed: bool,
    pub cluster_values: bool,
    /// BackScan pruning for closed mining; `None` means on unless values are
    /// clustered. It is never applied to clustered mining.
    pub backscan: Option<bool>,
}

impl MineOptions {
    pub fn backscan_enabled(&self) -> bool {
        self.closed && !self.cluster_values && self.backscan.unwrap_or(true)
    }
}

/// A frequent pattern with its support.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MinedPattern {
    pub pattern: Pattern,
    pub support: usize,
    pub db_size: usize,
    /// All wildcards unless refined by dimension mining.
    pub md: MdPattern,
}

impl MinedPattern {
    pub fn fraction(&self) -> f64 {
        if self.db_size == 0 {
            0.0
        } else {
            self.support as f64 / self.db_size as f64
        }
    }
}

/// A growth step: `offset` 0 extends the last actionset, a positive offset
/// opens a new one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pair {
    pub offset: i64,
    pub symbol: Symbol,
}

impl Pair {
    pub fn new(offset: i64, symbol: impl AsRef<str>) -> Self {
        Pair {
            offset,
            symbol: Symbol::new(symbol),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Suffix {
    pub record: usize,
    /// Position of the actionset matching the prefix's last actionset;
    /// `None` before anything was matched.
    pub pos: Option<usize>,
    /// Time of the actionset matching the prefix's head.
    pub start: i64,
}

#[derive(Debug, Clone, Copy)]
struct Occurrence {
    record: usize,
    pos: usize,
    start: i64,
}

/// A materialized projected suffix: `(offset, actions)` relative to the
/// matched actionset. Offset 0, when present, holds the unmatched symbols of
/// that actionset that could still extend it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuffixView {
    pub origin: u64,
    pub sets: Vec<(i64, Vec<Action>)>,
}

#[derive(Debug, Clone)]
pub struct ProjectedDb<'a> {
    db: &'a SequenceDatabase,
    mode: Mode,
    constraints: Constraints,
    prefix: Pattern,
    suffixes: Vec<Suffix>,
}

impl<'a> ProjectedDb<'a> {
    /// The whole database under the empty prefix.
    pub fn root(db: &'a SequenceDatabase, mode: Mode, constraints: Constraints) -> Self {
        ProjectedDb {
            db,
            mode,
            constraints,
            prefix: Pattern::empty(),
            suffixes: (0..db.len())
                .map(|record| Suffix {
                    record,
                    pos: None,
                    start: 0,
                })
                .collect(),
        }
    }

    pub fn prefix(&self) -> &Pattern {
        &self.prefix
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn constraints(&self) -> &Constraints {
        &self.constraints
    }

    pub fn database(&self) -> &'a SequenceDatabase {
        self.db
    }

    pub fn is_empty(&self) -> bool {
        self.suffixes.is_empty()
    }

    /// Distinct records (indices into the database) with an occurrence.
    pub fn supporters(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.suffixes.iter().map(|s| s.record).collect();
        out.dedup();
        out
    }

    pub fn support(&self) -> usize {
        self.supporters().len()
    }

    /// The non-empty projected suffixes, one per occurrence.
    pub fn suffixes(&self) -> Vec<SuffixView> {
        let last = self.prefix.sets.last().and_then(|s| s.last_symbol());
        self.suffixes
            .iter()
            .filter_map(|s| {
                let rec = &self.db.records()[s.record];
                let sets = rec.seq.sets();
                let mut out = Vec::new();
                let from = match s.pos {
                    None => {
                        out.extend(sets.iter().map(|x| (x.time, x.actions().to_vec())));
                        return (!out.is_empty()).then_some(SuffixView {
                            origin: rec.id,
                            sets: out,
                        });
                    }
                    Some(p) => p,
                };
                let rest: Vec<Action> = sets[from]
                    .actions()
                    .iter()
                    .filter(|a| last.is_none_or(|l| a.symbol > *l))
                    .cloned()
                    .collect();
                if !rest.is_empty() {
                    out.push((0, rest));
                }
                for x in &sets[from + 1..] {
                    let gap = x.time - sets[from].time;
                    if self.constraints.max_gap.is_some_and(|g| gap > g)
                        || self.constraints.max_span.is_some_and(|m| x.time - s.start > m)
                    {
                        break;
                    }
                    out.push((gap, x.actions().to_vec()));
                }
                (!out.is_empty()).then_some(SuffixView {
                    origin: rec.id,
                    sets: out,
                })
            })
            .collect()
    }

    fn occurrences(&self) -> BTreeMap<Pair, Vec<Occurrence>> {
        let mut found: BTreeMap<Pair, Vec<Occurrence>> = BTreeMap::new();
        let c = &self.constraints;
        let last = self.prefix.sets.last().and_then(|s| s.last_symbol());
        for s in &self.suffixes {
            let sets = self.db.records()[s.record].seq.sets();
            let Some(pos) = s.pos else {
                for (j, set) in sets.iter().enumerate() {
                    for a in set.actions() {
                        found.entry(Pair { offset: 0, symbol: a.symbol.clone() }).or_default().push(Occurrence {
                            record: s.record,
                            pos: j,
                            start: set.time,
                        });
                    }
                }
                continue;
            };
            for a in sets[pos].actions() {
                if last.is_some_and(|l| a.symbol > *l) {
                    found.entry(Pair { offset: 0, symbol: a.symbol.clone() }).or_default().push(Occurrence {
                        record: s.record,
                        pos,
                        start: s.start,
                    });
                }
            }
            for (j, set) in sets.iter().enumerate().skip(pos + 1) {
                let gap = set.time - sets[pos].time;
                if c.max_gap.is_some_and(|g| gap > g) || c.max_span.is_some_and(|m| set.time - s.start > m) {
                    break;
                }
                if gap < c.min_gap {
                    continue;
                }
                let offset = match self.mode {
                    Mode::Timed => gap,
                    Mode::Untimed => 1,
                };
                for a in set.actions() {
                    found.entry(Pair { offset, symbol: a.symbol.clone() }).or_default().push(Occurrence {
                        record: s.record,
                        pos: j,
                        start: s.start,
                    });
                }
            }
        }
        found
    }

    fn extended_prefix(&self, pair: &Pair) -> Pattern {
        let mut prefix = self.prefix.clone();
        let item = PatternItem::plain(pair.symbol.clone());
        match prefix.sets.last_mut() {
            Some(last) if pair.offset == 0 => last.items.push(item),
            Some(last) => {
                let offset = last.offset
                    + match self.mode {
                        Mode::Timed => pair.offset,
                        Mode::Untimed => 1,
                    };
                prefix.sets.push(PatternSet {
                    offset,
                    items: vec![item],
                })
            }
            None => prefix.sets.push(PatternSet {
                offset: 0,
                items: vec![item],
            }),
        }
        prefix
    }

    fn child(&self, pair: &Pair, occs: &[Occurrence]) -> ProjectedDb<'a> {
        let mut suffixes: Vec<Suffix> = occs
            .iter()
            .map(|o| Suffix {
                record: o.record,
                pos: Some(o.pos),
                start: o.start,
            })
            .collect();
        // one suffix per matched actionset; the latest start leaves the most
        // room under the span bound
        suffixes.sort_by(|a, b| (a.record, a.pos, b.start).cmp(&(b.record, b.pos, a.start)));
        suffixes.dedup_by(|a, b| a.record == b.record && a.pos == b.pos);
        ProjectedDb {
            db: self.db,
            mode: self.mode,
            constraints: self.constraints,
            prefix: self.extended_prefix(pair),
            suffixes,
        }
    }

    /// Values taken by the prefix's last symbol at the matched actionsets:
    /// each distinct value once per record, unvalued occurrences skipped.
    pub fn matched_values(&self) -> Vec<i64> {
        let Some(symbol) = self.prefix.sets.last().and_then(|s| s.last_symbol()) else {
            return Vec::new();
        };
        let mut per_record: Vec<(usize, i64)> = self
            .suffixes
            .iter()
            .filter_map(|s| {
                let set = &self.db.records()[s.record].seq.sets()[s.pos?];
                set.get(symbol)?.value.map(|v| (s.record, v))
            })
            .collect();
        per_record.sort_unstable();
        per_record.dedup();
        per_record.into_iter().map(|(_, v)| v).collect()
    }

    /// Keeps the suffixes whose last matched symbol has a value in `cluster`
    /// and annotates that prefix item with it.
    pub(crate) fn restrict_last_item(&self, cluster: &ValueCluster) -> ProjectedDb<'a> {
        let mut prefix = self.prefix.clone();
        let item = prefix
            .sets
            .last_mut()
            .and_then(|s| s.items.last_mut())
            .expect("restricting an empty prefix");
        let symbol = item.symbol.clone();
        *item = PatternItem::clustered(symbol.clone(), cluster.clone());
        let suffixes = self
            .suffixes
            .iter()
            .filter(|s| {
                s.pos.is_some_and(|p| {
                    self.db.records()[s.record].seq.sets()[p]
                        .get(&symbol)
                        .and_then(|a| a.value)
                        .is_some_and(|v| cluster.contains(v))
                })
            })
            .copied()
            .collect();
        ProjectedDb {
            db: self.db,
            mode: self.mode,
            constraints: self.constraints,
            prefix,
            suffixes,
        }
    }
}

/// Every `(offset, symbol)` pair whose distinct-record support reaches the
/// absolute threshold, with that support.
pub fn grow_step(pdb: &ProjectedDb) -> Vec<(Pair, usize)> {
    let minsup = pdb.constraints.threshold(pdb.db.len());
    pdb.occurrences()
        .into_iter()
        .filter_map(|(pair, occs)| {
            let n = distinct_records(&occs);
            (n >= minsup).then_some((pair, n))
        })
        .collect()
}

/// Projection of `pdb` on `pair`; empty if the pair does not occur.
pub fn project<'a>(pdb: &ProjectedDb<'a>, pair: &Pair) -> ProjectedDb<'a> {
    let occs = pdb.occurrences().remove(pair).unwrap_or_default();
    pdb.child(pair, &occs)
}

fn distinct_records(occs: &[Occurrence]) -> usize {
    let mut n = 0;
    let mut prev = None;
    for o in occs {
        if prev != Some(o.record) {
            n += 1;
            prev = Some(o.record);
        }
    }
    n
}

struct Miner {
    mode: Mode,
    constraints: Constraints,
    opts: MineOptions,
    minsup: usize,
}

impl Miner {
    fn expand<'a>(&self, pdb: &ProjectedDb<'a>) -> Vec<ProjectedDb<'a>> {
        let mut children = Vec::new();
        for (pair, occs) in pdb.occurrences() {
            if distinct_records(&occs) < self.minsup {
                continue;
            }
            let child = pdb.child(&pair, &occs);
            if self.opts.cluster_values {
                let values = child.matched_values();
                if !values.is_empty() {
                    let outcome = adaptive_cluster(&values, child.support(), self.minsup)
                        .expect("values are non-empty");
                    children.extend(
                        split_projection(&child, &outcome)
                            .into_iter()
                            .filter(|c| c.support() >= self.minsup),
                    );
                    continue;
                }
            }
            children.push(child);
        }
        children
    }

    fn visit(&self, pdb: &ProjectedDb, out: &mut Vec<MinedPattern>) {
        if self.opts.backscan_enabled() && closure::backscan_prunable(pdb) {
            return;
        }
        let closed_inline = self.opts.closed && !self.opts.cluster_values;
        if self.constraints.emits(&pdb.prefix, self.mode)
            && (!closed_inline
                || closure::is_closed_in(
                    &pdb.prefix,
                    pdb.db,
                    &pdb.supporters(),
                    self.mode,
                    &self.constraints,
                ))
        {
            out.push(MinedPattern {
                pattern: pdb.prefix.clone(),
                support: pdb.support(),
                db_size: pdb.db.len(),
                md: MdPattern::any(pdb.db.schema.len()),
            });
        }
        for child in self.expand(pdb) {
            self.visit(&child, out);
        }
    }
}

/// All frequent patterns satisfying the constraints, in canonical order.
pub fn mine(db: &SequenceDatabase, c: &Constraints, mode: Mode, opts: MineOptions) -> Result<Vec<MinedPattern>> {
    c.validate()?;
    if db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    let miner = Miner {
        mode,
        constraints: *c,
        opts,
        minsup: c.threshold(db.len()),
    };
    let root = ProjectedDb::root(db, mode, *c);
    let mut patterns: Vec<MinedPattern> = miner
        .expand(&root)
        .par_iter()
        .flat_map_iter(|child| {
            let mut out = Vec::new();
            miner.visit(child, &mut out);
            out
        })
        .collect();
    patterns.sort();
    if opts.closed && opts.cluster_values {
        patterns = closure::closed_subset(patterns, mode, c);
    }
    Ok(patterns)
}
