//! Closed-pattern checks.
//!
//! A frequent pattern is closed when no strict super-pattern has the same
//! support. Rather than comparing against stored candidates, [`is_closed`]
//! scans the supporting records for *extension events* (a symbol added to an
//! actionset, or a new actionset inserted before, between or after the
//! existing ones) and reports the pattern closed iff no event is present in
//! every supporter.
//!
//! The super-pattern order depends on the mode and constraints:
//!
//! * timed patterns: offsets are preserved exactly;
//! * untimed patterns, unbounded max gap: ordinary subsequence order;
//! * untimed patterns, bounded max gap: the smaller pattern must align with
//!   *consecutive* actionsets of the larger one. Inserting an actionset in
//!   the middle can raise support under a gap bound, so it is not an
//!   extension there.
//!
//! Clustered items compare by symbol and cluster.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::containment::{contains, supporters, timed_embeddings};
use crate::growth::{Constraints, MinedPattern, ProjectedDb};
use crate::model::{Mode, Pattern, PatternItem, PatternSet, SequenceDatabase, Symbol, TimedSequence};

/// Untimed embeddings enumerated per record before BackScan gives up.
const EMBEDDING_CAP: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtensionKind {
    /// A new actionset after the tail.
    Forward,
    /// A new actionset before the head or between two actionsets.
    Backward,
    /// A symbol added to an existing actionset.
    ItemsetAugmentation,
}

/// A one-step extension of a pattern.
///
/// `position` is the index of the augmented actionset, or the insertion
/// index of the new one. `offset` is the new actionset's time offset in the
/// pattern's frame (timed mode, insertions only).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExtensionEvent {
    pub kind: ExtensionKind,
    pub position: usize,
    pub offset: Option<i64>,
    pub symbol: Symbol,
}

impl ExtensionEvent {
    /// The extended pattern. Timed results are rebased so the head is at 0;
    /// untimed results get ordinal offsets.
    pub fn apply(&self, pattern: &Pattern, mode: Mode) -> Pattern {
        let mut sets = pattern.sets.clone();
        let item = PatternItem::plain(self.symbol.clone());
        match self.kind {
            ExtensionKind::ItemsetAugmentation => {
                let items = &mut sets[self.position].items;
                items.push(item);
                items.sort();
            }
            ExtensionKind::Forward | ExtensionKind::Backward => sets.insert(
                self.position,
                PatternSet {
                    offset: self.offset.unwrap_or(0),
                    items: vec![item],
                },
            ),
        }
        let base = sets.first().map_or(0, |s| s.offset);
        for (i, s) in sets.iter_mut().enumerate() {
            s.offset = match mode {
                Mode::Timed => s.offset - base,
                Mode::Untimed => i as i64,
            };
        }
        Pattern { sets }
    }
}

/// Whether `small ⊑ big` in the super-pattern order described in the module
/// docs.
pub fn is_subpattern(small: &Pattern, big: &Pattern, mode: Mode, c: &Constraints) -> bool {
    if small.is_empty() {
        return true;
    }
    if small.len() > big.len() {
        return false;
    }
    match mode {
        Mode::Timed => big.sets.iter().any(|anchor| {
            let shift = anchor.offset - small.sets[0].offset;
            small.sets.iter().all(|s| {
                big.sets
                    .iter()
                    .find(|b| b.offset == s.offset + shift)
                    .is_some_and(|b| subset(s, b))
            })
        }),
        Mode::Untimed if c.max_gap.is_none() => {
            let mut next = 0;
            for s in &small.sets {
                match big.sets[next..].iter().position(|b| subset(s, b)) {
                    Some(i) => next += i + 1,
                    None => return false,
                }
            }
            true
        }
        Mode::Untimed => (0..=big.len() - small.len()).any(|shift| {
            small
                .sets
                .iter()
                .zip(&big.sets[shift..])
                .all(|(s, b)| subset(s, b))
        }),
    }
}

fn subset(small: &PatternSet, big: &PatternSet) -> bool {
    small.items.iter().all(|i| big.items.contains(i))
}

fn timed_valid(p: &Pattern, c: &Constraints) -> bool {
    p.sets
        .windows(2)
        .all(|w| {
            let gap = w[1].offset - w[0].offset;
            gap >= c.min_gap && c.max_gap.is_none_or(|m| gap <= m)
        })
        && c.max_span.is_none_or(|m| p.span() <= m)
}

fn has_symbol(set: &PatternSet, symbol: &Symbol) -> bool {
    set.items.iter().any(|i| i.symbol == *symbol)
}

fn insertion(position: usize, len: usize, offset: Option<i64>, symbol: Symbol) -> ExtensionEvent {
    ExtensionEvent {
        kind: if position == len {
            ExtensionKind::Forward
        } else {
            ExtensionKind::Backward
        },
        position,
        offset,
        symbol,
    }
}

fn augmentation(position: usize, symbol: Symbol) -> ExtensionEvent {
    ExtensionEvent {
        kind: ExtensionKind::ItemsetAugmentation,
        position,
        offset: None,
        symbol,
    }
}

/// Events that might be realized in `record`; the caller verifies them.
fn candidate_events(pattern: &Pattern, record: &TimedSequence, mode: Mode, c: &Constraints) -> BTreeSet<ExtensionEvent> {
    let n = pattern.len();
    let mut out = BTreeSet::new();
    match mode {
        Mode::Timed => {
            for emb in timed_embeddings(pattern, record) {
                let frame = record.time(emb[0]) - pattern.sets[0].offset;
                for set in record.sets() {
                    let o = set.time - frame;
                    match pattern.sets.iter().position(|s| s.offset == o) {
                        Some(k) => {
                            for a in set.actions() {
                                if !has_symbol(&pattern.sets[k], &a.symbol) {
                                    out.insert(augmentation(k, a.symbol.clone()));
                                }
                            }
                        }
                        None => {
                            let pos = pattern.sets.iter().filter(|s| s.offset < o).count();
                            for a in set.actions() {
                                out.insert(insertion(pos, n, Some(o), a.symbol.clone()));
                            }
                        }
                    }
                }
            }
            out.retain(|e| timed_valid(&e.apply(pattern, mode), c));
        }
        Mode::Untimed => {
            let symbols: BTreeSet<&Symbol> = record
                .sets()
                .iter()
                .flat_map(|s| s.actions().iter().map(|a| &a.symbol))
                .collect();
            for &x in &symbols {
                for (k, set) in pattern.sets.iter().enumerate() {
                    if !has_symbol(set, x) {
                        out.insert(augmentation(k, x.clone()));
                    }
                }
                for pos in 0..=n {
                    if pos == 0 || pos == n || c.max_gap.is_none() {
                        out.insert(insertion(pos, n, None, x.clone()));
                    }
                }
            }
        }
    }
    out
}

/// Extension events present in every record supporting `pattern`; the
/// pattern is closed iff this is empty.
pub fn closing_events(pattern: &Pattern, db: &SequenceDatabase, mode: Mode, c: &Constraints) -> Vec<ExtensionEvent> {
    let sup = supporters(db, pattern, mode, &c.window());
    events_in_all(pattern, db, &sup, mode, c)
}

fn events_in_all(
    pattern: &Pattern,
    db: &SequenceDatabase,
    sup: &[usize],
    mode: Mode,
    c: &Constraints,
) -> Vec<ExtensionEvent> {
    let Some(&first) = sup.first() else {
        return Vec::new();
    };
    let window = c.window();
    let records = db.records();
    let mut alive: Vec<(ExtensionEvent, Pattern)> = candidate_events(pattern, &records[first].seq, mode, c)
        .into_iter()
        .map(|e| {
            let q = e.apply(pattern, mode);
            (e, q)
        })
        .collect();
    for &r in sup {
        alive.retain(|(_, q)| contains(q, &records[r].seq, mode, &window));
        if alive.is_empty() {
            break;
        }
    }
    alive.into_iter().map(|(e, _)| e).collect()
}

/// True iff no strict super-pattern of `pattern` has the same support.
/// Items are compared by symbol only, so this is meant for unclustered
/// patterns; clustered results are filtered with [`closed_subset`].
pub fn is_closed(pattern: &Pattern, db: &SequenceDatabase, mode: Mode, c: &Constraints) -> bool {
    closing_events(pattern, db, mode, c).is_empty()
}

pub(crate) fn is_closed_in(
    pattern: &Pattern,
    db: &SequenceDatabase,
    sup: &[usize],
    mode: Mode,
    c: &Constraints,
) -> bool {
    events_in_all(pattern, db, sup, mode, c).is_empty()
}

/// Patterns with no strict super-pattern of equal support in `patterns`.
pub fn closed_subset(patterns: Vec<MinedPattern>, mode: Mode, c: &Constraints) -> Vec<MinedPattern> {
    let keep: Vec<bool> = patterns
        .iter()
        .map(|p| {
            !patterns.iter().any(|q| {
                q.support == p.support && q.pattern != p.pattern && is_subpattern(&p.pattern, &q.pattern, mode, c)
            })
        })
        .collect();
    patterns
        .into_iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(p))
        .collect()
}

/// Support of `query` recovered from a closed set: the largest support among
/// closed super-patterns, or `None` when there is none (the query is not
/// frequent).
pub fn reconstruct_from_closed(closed: &[MinedPattern], query: &Pattern, mode: Mode, c: &Constraints) -> Option<usize> {
    closed
        .iter()
        .filter(|p| is_subpattern(query, &p.pattern, mode, c))
        .map(|p| p.support)
        .max()
}

/// Window-respecting untimed embeddings, or `None` past the cap.
fn untimed_embeddings(pattern: &Pattern, record: &TimedSequence, c: &Constraints) -> Option<Vec<Vec<usize>>> {
    fn go(
        pattern: &Pattern,
        record: &TimedSequence,
        c: &Constraints,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) -> bool {
        let k = cur.len();
        if k == pattern.len() {
            out.push(cur.clone());
            return out.len() <= EMBEDDING_CAP;
        }
        let sets = record.sets();
        let from = cur.last().map_or(0, |&p| p + 1);
        for j in from..sets.len() {
            if let Some(&prev) = cur.last() {
                let gap = sets[j].time - sets[prev].time;
                if c.max_gap.is_some_and(|m| gap > m) || c.max_span.is_some_and(|m| sets[j].time - sets[cur[0]].time > m) {
                    break;
                }
                if gap < c.min_gap {
                    continue;
                }
            }
            if pattern.sets[k].matched_by(&sets[j]) {
                cur.push(j);
                let ok = go(pattern, record, c, cur, out);
                cur.pop();
                if !ok {
                    return false;
                }
            }
        }
        true
    }
    let mut out = Vec::new();
    go(pattern, record, c, &mut Vec::new(), &mut out).then_some(out)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum BackEvent {
    Augment(usize, Symbol),
    /// Keyed by offset (timed) or insertion index (untimed).
    Insert(i64, Symbol),
}

/// Backward events realized by one embedding that would also be realized by
/// every embedding of every growth of the pattern.
fn backward_events(
    pattern: &Pattern,
    record: &TimedSequence,
    emb: &[usize],
    mode: Mode,
    c: &Constraints,
) -> BTreeSet<BackEvent> {
    let sets = record.sets();
    let n = pattern.len();
    let mut out = BTreeSet::new();
    for (k, &pos) in emb.iter().enumerate() {
        let max = pattern.sets[k].last_symbol();
        for a in sets[pos].actions() {
            if has_symbol(&pattern.sets[k], &a.symbol) {
                continue;
            }
            if k + 1 < n || max.is_some_and(|m| a.symbol < *m) {
                out.insert(BackEvent::Augment(k, a.symbol.clone()));
            }
        }
    }
    let gap_ok = |g: i64| g >= c.min_gap && c.max_gap.is_none_or(|m| g <= m);
    // prepends change the span of every growth, so need an unbounded span
    if c.max_span.is_none() {
        for set in &sets[..emb[0]] {
            if gap_ok(sets[emb[0]].time - set.time) {
                let key = match mode {
                    Mode::Timed => set.time - sets[emb[0]].time + pattern.sets[0].offset,
                    Mode::Untimed => 0,
                };
                out.extend(set.actions().iter().map(|a| BackEvent::Insert(key, a.symbol.clone())));
            }
        }
    }
    if mode == Mode::Timed || c.max_gap.is_none() {
        for k in 1..n {
            for set in &sets[emb[k - 1] + 1..emb[k]] {
                if set.time - sets[emb[k - 1]].time < c.min_gap || sets[emb[k]].time - set.time < c.min_gap {
                    continue;
                }
                let key = match mode {
                    Mode::Timed => set.time - sets[emb[0]].time + pattern.sets[0].offset,
                    Mode::Untimed => k as i64,
                };
                out.extend(set.actions().iter().map(|a| BackEvent::Insert(key, a.symbol.clone())));
            }
        }
    }
    out
}

/// BackScan: true when some backward event occurs in every embedding of the
/// prefix in every supporter. Then every growth of the prefix (and the prefix
/// itself) has an equal-support super-pattern that is not a growth of it, so
/// the branch holds no closed pattern.
///
/// Conservative: clustered prefixes and records with too many embeddings are
/// never pruned.
pub fn backscan_prunable(pdb: &ProjectedDb) -> bool {
    let prefix = pdb.prefix();
    if prefix.is_empty() || prefix.has_clusters() {
        return false;
    }
    let c = pdb.constraints();
    let mode = pdb.mode();
    let records = pdb.database().records();
    let mut common: Option<BTreeSet<BackEvent>> = None;
    for r in pdb.supporters() {
        let seq = &records[r].seq;
        let embeddings = match mode {
            Mode::Timed => timed_embeddings(prefix, seq).collect(),
            Mode::Untimed => match untimed_embeddings(prefix, seq, c) {
                Some(e) => e,
                None => return false,
            },
        };
        for emb in embeddings {
            let here = backward_events(prefix, seq, &emb, mode, c);
            let next = match common {
                None => here,
                Some(prev) => prev.intersection(&here).cloned().collect(),
            };
            if next.is_empty() {
                return false;
            }
            common = Some(next);
        }
    }
    common.is_some_and(|s| !s.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::parse_db;
    use crate::growth::{mine, MineOptions};

    fn plans() -> SequenceDatabase {
        parse_db(include_str!("../fixtures/plans.db")).unwrap()
    }

    fn unbounded() -> Constraints {
        Constraints::fraction(0.25)
    }

    #[test]
    fn prefix_of_a_longer_equal_support_pattern_is_not_closed() {
        let db = plans();
        let p = Pattern::untimed(&[&["1"], &["46"]]);
        let events = closing_events(&p, &db, Mode::Untimed, &unbounded());
        assert!(events.contains(&ExtensionEvent {
            kind: ExtensionKind::Forward,
            position: 2,
            offset: None,
            symbol: Symbol::new("48"),
        }));
        assert!(!is_closed(&p, &db, Mode::Untimed, &unbounded()));
    }

    #[test]
    fn four_step_plan_is_closed() {
        let db = plans();
        let p = Pattern::untimed(&[&["1"], &["25"], &["46"], &["48"]]);
        assert!(is_closed(&p, &db, Mode::Untimed, &unbounded()));
    }

    #[test]
    fn whole_record_is_closed() {
        let db = SequenceDatabase::from_sequences(vec![TimedSequence::parse_items(&[
            (0, &["a", "b"]),
            (2, &["c"]),
        ])
        .unwrap()]);
        let c = Constraints::absolute(1);
        let p = Pattern::timed(&[(0, &["a", "b"]), (2, &["c"])]);
        assert!(is_closed(&p, &db, Mode::Timed, &c));
        assert!(!is_closed(&Pattern::timed(&[(0, &["a"]), (2, &["c"])]), &db, Mode::Timed, &c));
        assert!(!is_closed(&Pattern::timed(&[(0, &["c"])]), &db, Mode::Timed, &c));
    }

    #[test]
    fn timed_insertions_respect_gap_bounds() {
        // (0,a)(1,x)(2,b) witnesses that (0,a)(2,b) is not closed, unless
        // the minimum gap rules out its unit gaps
        let db = SequenceDatabase::from_sequences(vec![
            TimedSequence::parse_items(&[(0, &["a"]), (1, &["x"]), (2, &["b"])]).unwrap(),
            TimedSequence::parse_items(&[(0, &["a"]), (1, &["x"]), (2, &["b"])]).unwrap(),
        ]);
        let c = Constraints::absolute(2).with_gaps(1, Some(2));
        let ab = Pattern::timed(&[(0, &["a"]), (2, &["b"])]);
        assert!(!is_closed(&ab, &db, Mode::Timed, &c));
        let c = Constraints::absolute(2).with_gaps(2, Some(2));
        assert!(is_closed(&ab, &db, Mode::Timed, &c));
    }

    #[test]
    fn subpattern_orders() {
        let c = unbounded();
        let a_c = Pattern::untimed(&[&["a"], &["c"]]);
        let a_b_c = Pattern::untimed(&[&["a"], &["b"], &["c"]]);
        assert!(is_subpattern(&a_c, &a_b_c, Mode::Untimed, &c));
        let tight = c.with_gaps(1, Some(1));
        assert!(!is_subpattern(&a_c, &a_b_c, Mode::Untimed, &tight));
        assert!(is_subpattern(&Pattern::untimed(&[&["b"], &["c"]]), &a_b_c, Mode::Untimed, &tight));

        let t1 = Pattern::timed(&[(0, &["a"]), (2, &["c"])]);
        let t2 = Pattern::timed(&[(0, &["a"]), (1, &["b"]), (2, &["c", "d"])]);
        assert!(is_subpattern(&t1, &t2, Mode::Timed, &c));
        assert!(!is_subpattern(&Pattern::timed(&[(0, &["a"]), (1, &["c"])]), &t2, Mode::Timed, &c));
        assert!(is_subpattern(&Pattern::empty(), &t2, Mode::Timed, &c));
    }

    #[test]
    fn reconstruction_from_closed_set() {
        let db = plans();
        let c = unbounded();
        let closed = mine(
            &db,
            &c,
            Mode::Untimed,
            MineOptions {
                closed: true,
                ..MineOptions::default()
            },
        )
        .unwrap();
        let q = Pattern::untimed(&[&["1"], &["46"]]);
        assert_eq!(reconstruct_from_closed(&closed, &q, Mode::Untimed, &c), Some(4));
        for p in &closed {
            assert_eq!(reconstruct_from_closed(&closed, &p.pattern, Mode::Untimed, &c), Some(p.support));
        }
        let absent = Pattern::untimed(&[&["999"]]);
        assert_eq!(reconstruct_from_closed(&closed, &absent, Mode::Untimed, &c), None);
    }

    #[test]
    fn backscan_prunes_prefix_always_preceded() {
        let seq = || TimedSequence::parse_items(&[(0, &["x"]), (1, &["a"]), (2, &["b"])]).unwrap();
        let db = SequenceDatabase::from_sequences(vec![seq(), seq(), seq()]);
        for mode in [Mode::Timed, Mode::Untimed] {
            let c = Constraints::absolute(2);
            let root = ProjectedDb::root(&db, mode, c);
            let a = crate::growth::project(&root, &crate::growth::Pair::new(0, "a"));
            assert!(backscan_prunable(&a));
            let x = crate::growth::project(&root, &crate::growth::Pair::new(0, "x"));
            assert!(!backscan_prunable(&x));
        }
    }

    #[test]
    fn backscan_needs_a_common_predecessor() {
        let db = SequenceDatabase::from_sequences(vec![
            TimedSequence::parse_items(&[(0, &["x"]), (1, &["a"])]).unwrap(),
            TimedSequence::parse_items(&[(0, &["y"]), (1, &["a"])]).unwrap(),
        ]);
        let root = ProjectedDb::root(&db, Mode::Timed, Constraints::absolute(2));
        let a = crate::growth::project(&root, &crate::growth::Pair::new(0, "a"));
        assert!(!backscan_prunable(&a));
    }

    #[test]
    fn backscan_does_not_change_closed_output() {
        let db = plans();
        for mode in [Mode::Timed, Mode::Untimed] {
            let on = MineOptions {
                closed: true,
                backscan: Some(true),
                ..MineOptions::default()
            };
            let off = MineOptions {
                backscan: Some(false),
                ..on
            };
            let c = unbounded();
            assert_eq!(mine(&db, &c, mode, on).unwrap(), mine(&db, &c, mode, off).unwrap());
        }
    }
}
