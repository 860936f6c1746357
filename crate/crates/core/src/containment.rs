//! Containment and support primitives shared by every miner.

use crate::error::{Error, Result};
use crate::model::{MdPattern, MdValue, Mode, Pattern, SequenceDatabase, TimedSequence};

/// The part of the time constraints that restricts how a pattern may be
/// embedded in an untimed record: adjacent gaps in `[min_gap, max_gap]` and
/// head-to-tail distance at most `max_span`.
///
/// Timed patterns carry their gaps intrinsically, so timed containment
/// ignores the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GapWindow {
    pub min_gap: i64,
    pub max_gap: Option<i64>,
    pub max_span: Option<i64>,
}

impl Default for GapWindow {
    fn default() -> Self {
        GapWindow {
            min_gap: 1,
            max_gap: None,
            max_span: None,
        }
    }
}

impl GapWindow {
    pub(crate) fn span_ok(&self, span: i64) -> bool {
        self.max_span.is_none_or(|m| span <= m)
    }
}

/// Order-preserving subset embedding, timestamps ignored.
pub fn contains_untimed(pattern: &Pattern, target: &TimedSequence) -> bool {
    contains_untimed_within(pattern, target, &GapWindow::default())
}

/// Untimed embedding whose record gaps and span respect `window`.
pub fn contains_untimed_within(pattern: &Pattern, target: &TimedSequence, window: &GapWindow) -> bool {
    let Some(first) = pattern.sets.first() else {
        return true;
    };
    let sets = target.sets();
    let m = sets.len();
    let mut reach = vec![false; m];
    let mut next = vec![false; m];
    for s in 0..m {
        if !first.matched_by(&sets[s]) {
            continue;
        }
        reach.iter_mut().for_each(|r| *r = false);
        reach[s] = true;
        let mut alive = true;
        for pset in &pattern.sets[1..] {
            next.iter_mut().for_each(|r| *r = false);
            alive = false;
            for i in s..m {
                if !reach[i] {
                    continue;
                }
                for j in i + 1..m {
                    let gap = sets[j].time - sets[i].time;
                    if window.max_gap.is_some_and(|g| gap > g)
                        || !window.span_ok(sets[j].time - sets[s].time)
                    {
                        break;
                    }
                    if gap >= window.min_gap && !next[j] && pset.matched_by(&sets[j]) {
                        next[j] = true;
                        alive = true;
                    }
                }
            }
            if !alive {
                break;
            }
            std::mem::swap(&mut reach, &mut next);
        }
        if alive {
            return true;
        }
    }
    false
}

/// Embedding whose matched timestamps, rebased to the first match, equal the
/// pattern offsets exactly.
pub fn contains_timed(pattern: &Pattern, target: &TimedSequence) -> bool {
    pattern.is_empty() || timed_embeddings(pattern, target).next().is_some()
}

/// Record positions of every timed embedding, one vector per start.
pub(crate) fn timed_embeddings<'a>(
    pattern: &'a Pattern,
    target: &'a TimedSequence,
) -> impl Iterator<Item = Vec<usize>> + 'a {
    let sets = target.sets();
    let base = pattern.sets.first().map_or(0, |s| s.offset);
    (0..sets.len()).filter_map(move |s| {
        let t0 = sets[s].time;
        let mut positions = Vec::with_capacity(pattern.len());
        let mut from = s;
        for pset in &pattern.sets {
            let want = t0 + pset.offset - base;
            let idx = from + sets[from..].partition_point(|x| x.time < want);
            if idx >= sets.len() || sets[idx].time != want || !pset.matched_by(&sets[idx]) {
                return None;
            }
            positions.push(idx);
            from = idx;
        }
        Some(positions)
    })
}

/// Containment under `mode`; the window applies to untimed embeddings only.
pub fn contains(pattern: &Pattern, target: &TimedSequence, mode: Mode, window: &GapWindow) -> bool {
    match mode {
        Mode::Timed => contains_timed(pattern, target),
        Mode::Untimed => contains_untimed_within(pattern, target, window),
    }
}

/// Number and fraction of records containing `pattern`.
pub fn support(db: &SequenceDatabase, pattern: &Pattern, mode: Mode) -> Result<(usize, f64)> {
    support_within(db, pattern, mode, &GapWindow::default())
}

pub fn support_within(
    db: &SequenceDatabase,
    pattern: &Pattern,
    mode: Mode,
    window: &GapWindow,
) -> Result<(usize, f64)> {
    if db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    let count = supporters(db, pattern, mode, window).len();
    Ok((count, count as f64 / db.len() as f64))
}

/// Indices (into `db.records()`) of the records containing `pattern`.
pub fn supporters(db: &SequenceDatabase, pattern: &Pattern, mode: Mode, window: &GapWindow) -> Vec<usize> {
    db.records()
        .iter()
        .enumerate()
        .filter(|(_, r)| contains(pattern, &r.seq, mode, window))
        .map(|(i, _)| i)
        .collect()
}

/// True iff every dimension of `pattern` is `*` or equals the record's value.
pub fn md_matches(record_dims: &MdPattern, pattern: &MdPattern) -> Result<bool> {
    check_arity(record_dims, pattern)?;
    Ok(record_dims
        .0
        .iter()
        .zip(&pattern.0)
        .all(|(r, p)| *p == MdValue::Any || p == r))
}

/// True iff every concrete value of `general` equals the one in `specific`.
pub fn md_subsumes(general: &MdPattern, specific: &MdPattern) -> Result<bool> {
    check_arity(general, specific)?;
    Ok(general
        .0
        .iter()
        .zip(&specific.0)
        .all(|(g, s)| *g == MdValue::Any || g == s))
}

fn check_arity(a: &MdPattern, b: &MdPattern) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::ArityMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::parse_db;

    fn plans() -> SequenceDatabase {
        parse_db(include_str!("../fixtures/plans.db")).unwrap()
    }

    fn seq(sets: &[(i64, &[&str])]) -> TimedSequence {
        TimedSequence::parse_items(sets).unwrap()
    }

    #[test]
    fn four_step_plan_contained_in_three_records() {
        let db = plans();
        let s2 = Pattern::untimed(&[&["1"], &["25"], &["46"], &["48"]]);
        let hits: Vec<u64> = db
            .records()
            .iter()
            .filter(|r| contains_untimed(&s2, &r.seq))
            .map(|r| r.id)
            .collect();
        assert_eq!(hits, vec![1, 2, 5]);
        assert!(!contains_untimed(&s2, &db.records()[2].seq));
    }

    #[test]
    fn empty_pattern_is_everywhere() {
        let db = plans();
        for r in db.records() {
            assert!(contains_untimed(&Pattern::empty(), &r.seq));
            assert!(contains_timed(&Pattern::empty(), &r.seq));
        }
        assert_eq!(support(&db, &Pattern::empty(), Mode::Untimed).unwrap(), (6, 1.0));
    }

    #[test]
    fn timed_offsets_must_match_exactly() {
        let t = seq(&[(0, &["a"]), (1, &["b"]), (2, &["c"])]);
        assert!(contains_timed(&Pattern::timed(&[(0, &["b"]), (1, &["c"])]), &t));
        assert!(!contains_timed(&Pattern::timed(&[(0, &["a"]), (1, &["c"])]), &t));
        assert!(contains_timed(&Pattern::timed(&[(0, &["a"]), (2, &["c"])]), &t));
    }

    #[test]
    fn plan_supports() {
        let db = plans();
        let s1 = Pattern::untimed(&[&["1"], &["46"], &["48"]]);
        let s2 = Pattern::untimed(&[&["1"], &["25"], &["46"], &["48"]]);
        assert_eq!(support(&db, &s2, Mode::Untimed).unwrap(), (3, 0.5));
        assert_eq!(support(&db, &s1, Mode::Untimed).unwrap().0, 4);
    }

    #[test]
    fn support_rejects_empty_database() {
        let db = SequenceDatabase::default();
        assert_eq!(
            support(&db, &Pattern::empty(), Mode::Timed),
            Err(Error::EmptyDatabase)
        );
    }

    #[test]
    fn window_restricts_untimed_embeddings() {
        let t = seq(&[(0, &["a"]), (1, &["b"]), (2, &["c"])]);
        let ac = Pattern::untimed(&[&["a"], &["c"]]);
        let tight = GapWindow {
            min_gap: 1,
            max_gap: Some(1),
            max_span: None,
        };
        assert!(contains_untimed(&ac, &t));
        assert!(!contains_untimed_within(&ac, &t, &tight));
        let short = GapWindow {
            max_span: Some(1),
            ..GapWindow::default()
        };
        assert!(!contains_untimed_within(&ac, &t, &short));
        let wide = GapWindow {
            min_gap: 2,
            ..GapWindow::default()
        };
        assert!(contains_untimed_within(&ac, &t, &wide));
    }

    #[test]
    fn md_matching() {
        let rec = MdPattern::concrete(&["true", "novice"]);
        assert!(md_matches(&rec, &MdPattern::parse("*,novice")).unwrap());
        assert!(md_matches(&rec, &MdPattern::parse("*,*")).unwrap());
        let expert = MdPattern::concrete(&["true", "expert"]);
        assert!(!md_matches(&expert, &MdPattern::parse("*,novice")).unwrap());
        assert!(md_matches(&rec, &MdPattern::parse("*")).is_err());
    }

    #[test]
    fn md_subsumption() {
        let p = MdPattern::parse("*,novice");
        assert!(md_subsumes(&p, &MdPattern::parse("true,novice")).unwrap());
        assert!(md_subsumes(&p, &p).unwrap());
        assert!(!md_subsumes(&MdPattern::parse("true,*"), &MdPattern::parse("false,expert")).unwrap());
        assert!(md_subsumes(&p, &MdPattern::parse("a,b,c")).is_err());
    }
}
