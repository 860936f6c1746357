//! Multi-dimensional enrichment of mined sequences.
//!
//! Dimension tuples are treated as transactions over `(dimension, value)`
//! items. Closed MD-patterns are mined level-wise from minimal generators,
//! each generator's closure being the values shared by all of its supporting
//! tuples (`*` elsewhere). [`seqdim`] mines sequences first and then the
//! closed MD-patterns of each sequence's supporters.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::containment::{md_subsumes, supporters};
use crate::error::Result;
use crate::growth::{mine, Constraints, MineOptions, MinedPattern};
use crate::model::{MdPattern, MdValue, Mode, SequenceDatabase};

/// A sequence pattern paired with an MD-pattern; `support` counts records
/// matching both.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MdSequencePattern {
    pub seq: MinedPattern,
    pub md: MdPattern,
    pub support: usize,
}

impl MdSequencePattern {
    /// The pattern with its joint support and MD-pattern folded in.
    pub fn to_mined(&self) -> MinedPattern {
        MinedPattern {
            pattern: self.seq.pattern.clone(),
            support: self.support,
            db_size: self.seq.db_size,
            md: self.md.clone(),
        }
    }
}

type Item = (usize, String);

fn covers(tuple: &MdPattern, items: &[Item]) -> bool {
    items
        .iter()
        .all(|(d, v)| tuple.get(*d).and_then(MdValue::as_value) == Some(v.as_str()))
}

fn closure(tuples: &[&MdPattern], width: usize) -> MdPattern {
    MdPattern(
        (0..width)
            .map(|d| {
                let first = tuples[0].get(d).cloned().unwrap_or(MdValue::Any);
                if tuples.iter().all(|t| t.get(d) == Some(&first)) {
                    first
                } else {
                    MdValue::Any
                }
            })
            .collect(),
    )
}

/// Frequent closed MD-patterns over concrete `tuples`, with supports, in
/// canonical order. The all-wildcard pattern appears only when it is closed.
pub fn mine_closed_mdpatterns(tuples: &[MdPattern], abs_minsup: usize) -> Vec<(MdPattern, usize)> {
    let minsup = abs_minsup.max(1);
    if tuples.len() < minsup {
        return Vec::new();
    }
    let width = tuples[0].len();
    let support_of = |items: &[Item]| -> Vec<&MdPattern> { tuples.iter().filter(|t| covers(t, items)).collect() };

    let mut closed: BTreeMap<MdPattern, usize> = BTreeMap::new();
    let all: Vec<&MdPattern> = tuples.iter().collect();
    closed.insert(closure(&all, width), tuples.len());

    // level 1: single items whose support differs from the empty set's
    let mut singles: BTreeSet<Item> = BTreeSet::new();
    for t in tuples {
        for (d, v) in t.0.iter().enumerate() {
            if let Some(v) = v.as_value() {
                singles.insert((d, v.to_string()));
            }
        }
    }
    let mut level: BTreeMap<Vec<Item>, usize> = BTreeMap::new();
    for item in singles {
        let sup = support_of(std::slice::from_ref(&item));
        if sup.len() >= minsup && sup.len() < tuples.len() {
            closed.insert(closure(&sup, width), sup.len());
            level.insert(vec![item], sup.len());
        }
    }

    while !level.is_empty() {
        let keys: Vec<&Vec<Item>> = level.keys().collect();
        let mut next = BTreeMap::new();
        for (i, a) in keys.iter().enumerate() {
            for b in &keys[i + 1..] {
                let k = a.len();
                if a[..k - 1] != b[..k - 1] || a[k - 1].0 == b[k - 1].0 {
                    continue;
                }
                let mut cand = (*a).clone();
                cand.push(b[k - 1].clone());
                // every immediate subset must be a frequent generator with
                // larger support
                let sup = support_of(&cand);
                if sup.len() < minsup {
                    continue;
                }
                let generator = (0..cand.len()).all(|drop| {
                    let mut sub = cand.clone();
                    sub.remove(drop);
                    level.get(&sub).is_some_and(|&s| s > sup.len())
                });
                if generator {
                    closed.insert(closure(&sup, width), sup.len());
                    next.insert(cand, sup.len());
                }
            }
        }
        level = next;
    }
    closed.into_iter().collect()
}

/// Sequences mined first, then the closed MD-patterns of each sequence's
/// supporting records.
pub fn seqdim(db: &SequenceDatabase, c: &Constraints, mode: Mode, opts: MineOptions) -> Result<Vec<MdSequencePattern>> {
    let mined = mine(db, c, mode, opts)?;
    let minsup = c.threshold(db.len());
    let window = c.window();
    let mut out = Vec::new();
    for p in mined {
        let tuples: Vec<MdPattern> = supporters(db, &p.pattern, mode, &window)
            .into_iter()
            .map(|r| db.records()[r].dims.clone())
            .collect();
        for (md, support) in mine_closed_mdpatterns(&tuples, minsup) {
            out.push(MdSequencePattern {
                seq: p.clone(),
                md,
                support,
            });
        }
    }
    out.sort();
    Ok(out)
}

/// Patterns whose MD-pattern is subsumed by `selector`.
pub fn filter_by_md(patterns: &[MdSequencePattern], selector: &MdPattern) -> Result<Vec<MdSequencePattern>> {
    let mut out = Vec::new();
    for p in patterns {
        if md_subsumes(selector, &p.md)? {
            out.push(p.clone());
        }
    }
    Ok(out)
}
