//! Generate-and-test reference computations for small databases.
//!
//! Everything here is exponential on purpose and shares no search code with
//! the miners: candidates come from explicit enumeration of record
//! sub-embeddings, supports from a direct recursive containment test, and
//! the constraints are applied as plain filters.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cluster::adaptive_cluster;
use crate::error::{Error, Result};
use crate::growth::{Constraints, MinedPattern};
use crate::md::MdSequencePattern;
use crate::model::{
    Action, ActionSet, DimensionSchema, MdPattern, MdRecord, MdValue, Mode, Pattern, PatternItem, PatternSet,
    SequenceDatabase, Symbol, TimedSequence,
};

/// Largest total number of actionsets the oracle accepts.
pub const GUARD: usize = 64;

fn guard(db: &SequenceDatabase, c: &Constraints) -> Result<()> {
    if db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    c.validate()?;
    let total = db.total_length();
    if total > GUARD {
        return Err(Error::GuardExceeded(format!("{total} actionsets (limit {GUARD})")));
    }
    Ok(())
}

fn item_ok(item: &PatternItem, set: &ActionSet) -> bool {
    set.actions().iter().any(|a| {
        a.symbol == item.symbol
            && match &item.cluster {
                None => true,
                Some(c) => a.value.is_some_and(|v| c.members.contains(&v)),
            }
    })
}

fn set_ok(pset: &PatternSet, set: &ActionSet) -> bool {
    pset.items.iter().all(|i| item_ok(i, set))
}

/// Every embedding (record positions) of `p` in `seq` under the mode's
/// rules.
fn embeddings(p: &Pattern, seq: &TimedSequence, mode: Mode, c: &Constraints) -> Vec<Vec<usize>> {
    fn go(
        p: &Pattern,
        seq: &TimedSequence,
        mode: Mode,
        c: &Constraints,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        let k = cur.len();
        if k == p.len() {
            out.push(cur.clone());
            return;
        }
        let sets = seq.sets();
        let from = cur.last().map_or(0, |x| x + 1);
        for j in from..sets.len() {
            if k > 0 {
                let ok = match mode {
                    Mode::Timed => sets[j].time - sets[cur[0]].time == p.sets[k].offset - p.sets[0].offset,
                    Mode::Untimed => {
                        let gap = sets[j].time - sets[cur[k - 1]].time;
                        gap >= c.min_gap
                            && c.max_gap.is_none_or(|m| gap <= m)
                            && c.max_span.is_none_or(|m| sets[j].time - sets[cur[0]].time <= m)
                    }
                };
                if !ok {
                    continue;
                }
            }
            if set_ok(&p.sets[k], &sets[j]) {
                cur.push(j);
                go(p, seq, mode, c, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(p, seq, mode, c, &mut Vec::new(), &mut out);
    out
}

fn contained(p: &Pattern, seq: &TimedSequence, mode: Mode, c: &Constraints) -> bool {
    p.is_empty() || !embeddings(p, seq, mode, c).is_empty()
}

fn count(db: &SequenceDatabase, p: &Pattern, mode: Mode, c: &Constraints) -> usize {
    db.records().iter().filter(|r| contained(p, &r.seq, mode, c)).count()
}

fn pattern_ok(p: &Pattern, mode: Mode, c: &Constraints) -> bool {
    match mode {
        Mode::Timed => {
            p.sets.windows(2).all(|w| {
                let g = w[1].offset - w[0].offset;
                g >= c.min_gap && c.max_gap.is_none_or(|m| g <= m)
            }) && c.max_span.is_none_or(|m| p.span() <= m)
                && p.span() >= c.min_span
        }
        Mode::Untimed => p.len() as i64 > c.min_span,
    }
}

fn nonempty_subsets(actions: &[Action]) -> Vec<Vec<PatternItem>> {
    (1u32..1 << actions.len())
        .map(|mask| {
            actions
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, a)| PatternItem::plain(a.symbol.clone()))
                .collect()
        })
        .collect()
}

/// Patterns spelled by record position chains satisfying the gap and span
/// bounds, with any non-empty subset taken at each position.
fn sub_embeddings(seq: &TimedSequence, mode: Mode, c: &Constraints, out: &mut HashSet<Pattern>) {
    fn go(
        seq: &TimedSequence,
        mode: Mode,
        c: &Constraints,
        chain: &mut Vec<usize>,
        picked: &mut Vec<PatternSet>,
        out: &mut HashSet<Pattern>,
    ) {
        if !picked.is_empty() {
            out.insert(Pattern { sets: picked.clone() });
        }
        let sets = seq.sets();
        let from = chain.last().map_or(0, |x| x + 1);
        for j in from..sets.len() {
            if let Some(&prev) = chain.last() {
                let gap = sets[j].time - sets[prev].time;
                let span = sets[j].time - sets[chain[0]].time;
                if gap < c.min_gap || c.max_gap.is_some_and(|m| gap > m) || c.max_span.is_some_and(|m| span > m) {
                    continue;
                }
            }
            let offset = match mode {
                Mode::Timed => sets[j].time - chain.first().map_or(sets[j].time, |&h| sets[h].time),
                Mode::Untimed => chain.len() as i64,
            };
            for items in nonempty_subsets(sets[j].actions()) {
                chain.push(j);
                picked.push(PatternSet { offset, items });
                go(seq, mode, c, chain, picked, out);
                picked.pop();
                chain.pop();
            }
        }
    }
    go(seq, mode, c, &mut Vec::new(), &mut Vec::new(), out);
}

/// Reference frequent-pattern set, in canonical order.
pub fn oracle_frequent(db: &SequenceDatabase, c: &Constraints, mode: Mode, cluster: bool) -> Result<Vec<MinedPattern>> {
    guard(db, c)?;
    let minsup = c.threshold(db.len());
    let mut out = if cluster {
        clustered(db, c, mode, minsup)
    } else {
        let mut candidates = HashSet::new();
        for r in db.records() {
            sub_embeddings(&r.seq, mode, c, &mut candidates);
        }
        candidates
            .into_iter()
            .filter(|p| pattern_ok(p, mode, c))
            .filter_map(|p| {
                let support = count(db, &p, mode, c);
                (support >= minsup).then(|| MinedPattern {
                    pattern: p,
                    support,
                    db_size: db.len(),
                    md: MdPattern::any(db.schema.len()),
                })
            })
            .collect()
    };
    out.sort();
    Ok(out)
}

/// Value-clustered patterns: grown one item at a time from explicit
/// embeddings, each valued item split by clustering the values it takes at
/// the end of those embeddings.
fn clustered(db: &SequenceDatabase, c: &Constraints, mode: Mode, minsup: usize) -> Vec<MinedPattern> {
    let mut out = Vec::new();
    let mut stack = vec![Pattern::empty()];
    while let Some(p) = stack.pop() {
        // (offset, symbol) -> record -> values at the extension
        let mut ext: BTreeMap<(i64, Symbol), BTreeMap<usize, BTreeSet<i64>>> = BTreeMap::new();
        for (ri, r) in db.records().iter().enumerate() {
            let sets = r.seq.sets();
            let embs = if p.is_empty() {
                vec![Vec::new()]
            } else {
                embeddings(&p, &r.seq, mode, c)
            };
            for emb in embs {
                let mut add = |offset: i64, a: &Action| {
                    let values = ext.entry((offset, a.symbol.clone())).or_default().entry(ri).or_default();
                    values.extend(a.value);
                };
                let Some(&last) = emb.last() else {
                    for set in sets {
                        for a in set.actions() {
                            add(0, a);
                        }
                    }
                    continue;
                };
                let max = p.sets.last().and_then(|s| s.last_symbol()).expect("non-empty");
                for a in sets[last].actions() {
                    if a.symbol > *max {
                        add(0, a);
                    }
                }
                for j in last + 1..sets.len() {
                    let gap = sets[j].time - sets[last].time;
                    let span = sets[j].time - sets[emb[0]].time;
                    if gap < c.min_gap || c.max_gap.is_some_and(|m| gap > m) || c.max_span.is_some_and(|m| span > m) {
                        continue;
                    }
                    let offset = match mode {
                        Mode::Timed => gap,
                        Mode::Untimed => 1,
                    };
                    for a in sets[j].actions() {
                        add(offset, a);
                    }
                }
            }
        }
        for ((offset, symbol), per_record) in ext {
            let raw = per_record.len();
            if raw < minsup {
                continue;
            }
            let values: Vec<i64> = per_record.values().flatten().copied().collect();
            let mut children = Vec::new();
            let base = extend(&p, offset, PatternItem::plain(symbol.clone()));
            if values.is_empty() {
                children.push(base);
            } else {
                let outcome = adaptive_cluster(&values, raw, minsup).expect("non-empty values");
                for cl in outcome.clusters {
                    children.push(extend(&p, offset, PatternItem::clustered(symbol.clone(), cl)));
                }
            }
            for child in children {
                let support = count(db, &child, mode, c);
                if support < minsup {
                    continue;
                }
                if pattern_ok(&child, mode, c) {
                    out.push(MinedPattern {
                        pattern: child.clone(),
                        support,
                        db_size: db.len(),
                        md: MdPattern::any(db.schema.len()),
                    });
                }
                stack.push(child);
            }
        }
    }
    out
}

fn extend(p: &Pattern, offset: i64, item: PatternItem) -> Pattern {
    let mut q = p.clone();
    match q.sets.last_mut() {
        Some(last) if offset == 0 => last.items.push(item),
        Some(last) => {
            let o = last.offset + offset;
            q.sets.push(PatternSet {
                offset: o,
                items: vec![item],
            })
        }
        None => q.sets.push(PatternSet {
            offset: 0,
            items: vec![item],
        }),
    }
    q
}

/// `small ⊑ big` by exhaustive search over set alignments.
fn below(small: &Pattern, big: &Pattern, mode: Mode, c: &Constraints) -> bool {
    let sub = |a: &PatternSet, b: &PatternSet| a.items.iter().all(|i| b.items.contains(i));
    fn search(
        small: &Pattern,
        big: &Pattern,
        k: usize,
        from: usize,
        prev: Option<usize>,
        ok: &dyn Fn(usize, Option<usize>, usize) -> bool,
    ) -> bool {
        if k == small.len() {
            return true;
        }
        (from..big.len()).any(|j| ok(k, prev, j) && search(small, big, k + 1, j + 1, Some(j), ok))
    }
    let ok = |k: usize, prev: Option<usize>, j: usize| -> bool {
        if !sub(&small.sets[k], &big.sets[j]) {
            return false;
        }
        match (mode, prev) {
            (_, None) => true,
            (Mode::Timed, Some(p)) => {
                big.sets[j].offset - big.sets[p].offset == small.sets[k].offset - small.sets[k - 1].offset
            }
            (Mode::Untimed, Some(p)) => c.max_gap.is_none() || j == p + 1,
        }
    };
    search(small, big, 0, 0, None, &ok)
}

/// Pairwise closed filter: keeps `p` unless a strict super-pattern in
/// `patterns` has the same support.
pub fn oracle_closed(patterns: &[MinedPattern], mode: Mode, c: &Constraints) -> Vec<MinedPattern> {
    let mut out: Vec<MinedPattern> = patterns
        .iter()
        .filter(|p| {
            !patterns
                .iter()
                .any(|q| q.support == p.support && q.pattern != p.pattern && below(&p.pattern, &q.pattern, mode, c))
        })
        .cloned()
        .collect();
    out.sort();
    out
}

fn all_md_patterns(db: &SequenceDatabase) -> Vec<MdPattern> {
    let domains: Vec<Vec<MdValue>> = (0..db.schema.len())
        .map(|d| {
            let values: BTreeSet<MdValue> = db.records().iter().filter_map(|r| r.dims.get(d).cloned()).collect();
            std::iter::once(MdValue::Any).chain(values).collect()
        })
        .collect();
    let mut out = vec![MdPattern::default()];
    for dom in domains {
        out = out
            .into_iter()
            .flat_map(|p| {
                dom.iter().map(move |v| {
                    let mut q = p.clone();
                    q.0.push(v.clone());
                    q
                })
            })
            .collect();
    }
    out
}

fn md_below(general: &MdPattern, specific: &MdPattern) -> bool {
    general.0.iter().zip(&specific.0).all(|(g, s)| *g == MdValue::Any || g == s)
}

/// Reference MD-sequence set: every (MD-pattern, frequent sequence) pair with
/// joint support at the threshold, minus pairs with an equally supported,
/// more specific MD-pattern for the same sequence.
pub fn oracle_md(db: &SequenceDatabase, c: &Constraints, mode: Mode) -> Result<Vec<MdSequencePattern>> {
    let seqs = oracle_frequent(db, c, mode, false)?;
    let minsup = c.threshold(db.len());
    let mds = all_md_patterns(db);
    let mut out = Vec::new();
    for s in seqs {
        let hits: Vec<&MdRecord> = db.records().iter().filter(|r| contained(&s.pattern, &r.seq, mode, c)).collect();
        let frequent: Vec<(MdPattern, usize)> = mds
            .iter()
            .map(|m| (m.clone(), hits.iter().filter(|r| md_below(m, &r.dims)).count()))
            .filter(|(_, n)| *n >= minsup)
            .collect();
        for (m, n) in &frequent {
            let dominated = frequent.iter().any(|(m2, n2)| n2 == n && m2 != m && md_below(m, m2));
            if !dominated {
                out.push(MdSequencePattern {
                    seq: s.clone(),
                    md: m.clone(),
                    support: *n,
                });
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Size bounds for [`random_db`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_records: usize,
    pub max_sets: usize,
    pub alphabet: usize,
    /// How many of the symbols usually carry a value.
    pub valued_symbols: usize,
    pub value_range: (i64, i64),
    pub max_dims: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_records: 8,
            max_sets: 6,
            alphabet: 6,
            valued_symbols: 2,
            value_range: (-5, 5),
            max_dims: 3,
        }
    }
}

const DIM_VALUES: [&str; 3] = ["x", "y", "z"];

/// Deterministic pseudo-random database for `seed`.
pub fn random_db(seed: u64, limits: &Limits) -> SequenceDatabase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if limits.max_records == 0 || limits.max_sets == 0 || limits.alphabet == 0 {
        return SequenceDatabase::default();
    }
    let symbols: Vec<String> = (0..limits.alphabet.min(26))
        .map(|i| ((b'a' + i as u8) as char).to_string())
        .collect();
    let dims = rng.gen_range(0..=limits.max_dims);
    let arities: Vec<usize> = (0..dims).map(|_| rng.gen_range(2..=3)).collect();
    let schema = DimensionSchema {
        names: (1..=dims).map(|i| format!("d{i}")).collect(),
    };
    let n = rng.gen_range(1..=limits.max_records);
    let records = (0..n)
        .map(|i| {
            let dims = MdPattern::concrete(
                &arities
                    .iter()
                    .map(|&k| DIM_VALUES[rng.gen_range(0..k)])
                    .collect::<Vec<_>>(),
            );
            let len = rng.gen_range(1..=limits.max_sets);
            let mut time = 0;
            let sets = (0..len)
                .map(|j| {
                    if j > 0 {
                        time += rng.gen_range(1..=2);
                    }
                    let size = match rng.gen_range(0..10) {
                        0..=5 => 1,
                        6..=8 => 2,
                        _ => 3,
                    }
                    .min(symbols.len());
                    let actions = symbols
                        .choose_multiple(&mut rng, size)
                        .map(|s| {
                            let idx = symbols.iter().position(|x| x == s).unwrap();
                            if idx < limits.valued_symbols && rng.gen_bool(0.8) {
                                Action::valued(s, rng.gen_range(limits.value_range.0..=limits.value_range.1))
                            } else {
                                Action::plain(s)
                            }
                        })
                        .collect();
                    ActionSet::new(time, actions).expect("distinct symbols")
                })
                .collect();
            MdRecord {
                id: i as u64 + 1,
                dims,
                seq: TimedSequence::new(sets).expect("increasing times"),
            }
        })
        .collect();
    SequenceDatabase::new(schema, records).expect("consistent random database")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::parse_db;

    fn rendered(ps: &[MinedPattern]) -> Vec<(String, usize)> {
        ps.iter().map(|p| (p.pattern.to_string(), p.support)).collect()
    }

    #[test]
    fn small_timed_db() {
        let db = parse_db("1 | | 0:a ; 1:b ; 2:c\n2 | | 0:a ; 1:c\n3 | | 0:b ; 1:c").unwrap();
        let out = oracle_frequent(&db, &Constraints::absolute(2), Mode::Timed, false).unwrap();
        assert_eq!(
            rendered(&out),
            vec![
                ("(0,a)".to_string(), 2),
                ("(0,b)".to_string(), 2),
                ("(0,b)(1,c)".to_string(), 2),
                ("(0,c)".to_string(), 3)
            ]
        );
    }

    #[test]
    fn plans_patterns() {
        let db = parse_db(include_str!("../fixtures/plans.db")).unwrap();
        let out = rendered(&oracle_frequent(&db, &Constraints::fraction(0.25), Mode::Untimed, false).unwrap());
        for (p, s) in [
            ("(0,1)(1,46)(2,48)", 4),
            ("(0,1)(1,25)(2,46)(3,48)", 3),
            ("(0,1)(1,25)(2,46)(3,10 11)", 2),
            ("(0,1)(1,9 10 31)", 2),
            ("(0,1)(1,9 11 31)", 2),
        ] {
            assert!(out.contains(&(p.to_string(), s)), "{p}");
        }
    }

    #[test]
    fn errors() {
        assert_eq!(
            oracle_frequent(&SequenceDatabase::default(), &Constraints::absolute(1), Mode::Timed, false),
            Err(Error::EmptyDatabase)
        );
        let long = (0..70).map(|i| format!("{i}:a")).collect::<Vec<_>>().join(" ; ");
        let db = parse_db(&format!("1 | | {long}")).unwrap();
        assert!(matches!(
            oracle_frequent(&db, &Constraints::absolute(1), Mode::Timed, false),
            Err(Error::GuardExceeded(_))
        ));
    }

    #[test]
    fn closed_filter() {
        let db = parse_db(include_str!("../fixtures/plans.db")).unwrap();
        let c = Constraints::fraction(0.25);
        let mk = |sets: &[&[&str]], support| MinedPattern {
            pattern: Pattern::untimed(sets),
            support,
            db_size: db.len(),
            md: MdPattern::default(),
        };
        let pair = vec![mk(&[&["1"], &["46"]], 4), mk(&[&["1"], &["46"], &["48"]], 4)];
        assert_eq!(oracle_closed(&pair, Mode::Untimed, &c), vec![pair[1].clone()]);
        assert_eq!(oracle_closed(&pair[..1], Mode::Untimed, &c), vec![pair[0].clone()]);
        let chain = vec![mk(&[&["1"]], 5), mk(&[&["1"], &["46"]], 4), mk(&[&["1"], &["25"], &["46"]], 3)];
        assert_eq!(oracle_closed(&chain, Mode::Untimed, &c).len(), 3);
    }

    #[test]
    fn md_reference() {
        let db = parse_db("@dims s e\n1 | t,n | 0:a\n2 | f,e | 0:a").unwrap();
        let out = oracle_md(&db, &Constraints::absolute(2), Mode::Timed).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].md, MdPattern::parse("*,*"));

        let plain = parse_db("1 | | 0:a ; 1:b\n2 | | 0:a").unwrap();
        let c = Constraints::absolute(1);
        let md = oracle_md(&plain, &c, Mode::Timed).unwrap();
        let seqs = oracle_frequent(&plain, &c, Mode::Timed, false).unwrap();
        assert_eq!(md.iter().map(|m| m.seq.clone()).collect::<Vec<_>>(), seqs);
        assert!(md.iter().all(|m| m.md.is_empty()));
    }

    #[test]
    fn random_db_is_deterministic_and_bounded() {
        let limits = Limits::default();
        assert_eq!(random_db(7, &limits), random_db(7, &limits));
        assert_ne!(random_db(7, &limits), random_db(8, &limits));
        for seed in 0..50 {
            let db = random_db(seed, &limits);
            assert!(db.len() <= 8 && db.total_length() <= GUARD);
            assert!(db.schema.len() <= 3);
            assert!(db.records().iter().all(|r| r.seq.len() <= 6));
        }
        let none = Limits {
            max_records: 0,
            ..limits
        };
        assert!(random_db(1, &none).is_empty());
    }
}
