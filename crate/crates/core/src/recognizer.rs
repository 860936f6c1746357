//! Knowledge base of per-state action patterns, live plan tracking with skip
//! tolerance, expertise estimation and next-step hints.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::containment::{contains, md_matches};
use crate::error::{Error, Result};
use crate::format::{KB_FORMAT, KB_VERSION};
use crate::growth::{Constraints, MineOptions};
use crate::md::{seqdim, MdSequencePattern};
use crate::model::{
    Action, DimensionSchema, MdPattern, MdRecord, MdValue, Mode, PatternSet, SequenceDatabase, TimedSequence,
};

pub const DEFAULT_SKIP_BUDGET: usize = 2;

/// An opaque, non-empty problem-state label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProblemState(String);

impl ProblemState {
    pub fn new(label: impl Into<String>) -> Result<Self> {
        let label = label.into().trim().to_string();
        if label.is_empty() {
            return Err(Error::InvalidArgument("empty problem-state label".into()));
        }
        Ok(ProblemState(label))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ProblemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One logged attempt: the states visited and the actions between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attempt {
    pub schema: DimensionSchema,
    pub dims: MdPattern,
    pub states: Vec<ProblemState>,
    /// `transitions[i]` leads from `states[i]` to `states[i + 1]`.
    pub transitions: Vec<TimedSequence>,
}

impl Attempt {
    pub fn new(
        schema: DimensionSchema,
        dims: MdPattern,
        states: Vec<ProblemState>,
        transitions: Vec<TimedSequence>,
    ) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidArgument("attempt has no state".into()));
        }
        if transitions.len() + 1 != states.len() {
            return Err(Error::InvalidArgument(format!(
                "{} states need {} transitions, got {}",
                states.len(),
                states.len() - 1,
                transitions.len()
            )));
        }
        if dims.len() != schema.len() {
            return Err(Error::ArityMismatch {
                expected: schema.len(),
                got: dims.len(),
            });
        }
        if dims.has_wildcards() {
            return Err(Error::InvalidArgument("attempt dimensions must be concrete".into()));
        }
        Ok(Attempt {
            schema,
            dims,
            states,
            transitions,
        })
    }
}

/// Mining settings recorded in a knowledge base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KbConfig {
    pub constraints: Constraints,
    pub mode: Mode,
    pub options: MineOptions,
}

impl KbConfig {
    /// Untimed, unclosed, unclustered mining under `constraints`.
    pub fn new(constraints: Constraints) -> Self {
        KbConfig {
            constraints,
            mode: Mode::Untimed,
            options: MineOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionPattern {
    pub pattern: MdSequencePattern,
    /// Most frequent next state among the pattern's supporters.
    pub destination: Option<ProblemState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    pub format: String,
    pub version: u32,
    pub config: KbConfig,
    pub schema: DimensionSchema,
    pub success_dim: Option<usize>,
    pub expertise_dim: Option<usize>,
    /// Expertise values from lowest to highest level.
    pub expertise_order: Vec<String>,
    pub state_patterns: Vec<MdSequencePattern>,
    pub action_patterns: BTreeMap<ProblemState, Vec<ActionPattern>>,
}

fn level_rank(value: &str) -> u8 {
    match value.to_ascii_lowercase().as_str() {
        "novice" | "beginner" => 0,
        "interm" | "intermediate" => 1,
        "expert" | "advanced" => 2,
        _ => 3,
    }
}

fn dim_named(schema: &DimensionSchema, needle: &str) -> Option<usize> {
    schema
        .names
        .iter()
        .position(|n| n.to_ascii_lowercase().contains(needle))
}

impl KnowledgeBase {
    /// A knowledge base without patterns.
    pub fn empty(schema: DimensionSchema, config: KbConfig) -> Self {
        KnowledgeBase {
            format: KB_FORMAT.to_string(),
            version: KB_VERSION,
            config,
            success_dim: dim_named(&schema, "success"),
            expertise_dim: dim_named(&schema, "expert"),
            schema,
            expertise_order: Vec::new(),
            state_patterns: Vec::new(),
            action_patterns: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.schema.len();
        for d in [self.success_dim, self.expertise_dim].into_iter().flatten() {
            if d >= n {
                return Err(Error::IncompatibleKb(format!("dimension index {d} outside schema")));
            }
        }
        let mds = self
            .state_patterns
            .iter()
            .chain(self.action_patterns.values().flatten().map(|a| &a.pattern));
        for p in mds {
            if p.md.len() != n {
                return Err(Error::IncompatibleKb(format!(
                    "pattern dimensions {} do not fit schema of {n}",
                    p.md
                )));
            }
        }
        Ok(())
    }

    /// Patterns whose source is `state`.
    pub fn patterns_for(&self, state: &ProblemState) -> &[ActionPattern] {
        self.action_patterns.get(state).map_or(&[], Vec::as_slice)
    }

    fn level_of<'a>(&self, md: &'a MdPattern) -> Option<&'a str> {
        md.get(self.expertise_dim?)?.as_value()
    }
}

/// Mines state-level and per-state action-level patterns from a corpus.
pub fn build_kb(attempts: &[Attempt], config: &KbConfig) -> Result<KnowledgeBase> {
    let first = attempts.first().ok_or(Error::EmptyCorpus)?;
    config.constraints.validate()?;
    let schema = first.schema.clone();
    if let Some(a) = attempts.iter().find(|a| a.schema != schema) {
        return Err(Error::InvalidArgument(format!(
            "attempt schema [{}] differs from [{}]",
            a.schema.names.join(" "),
            schema.names.join(" ")
        )));
    }
    let mut kb = KnowledgeBase::empty(schema.clone(), *config);
    if let Some(e) = kb.expertise_dim {
        let values: BTreeSet<&str> = attempts.iter().filter_map(|a| a.dims.get(e)?.as_value()).collect();
        let mut order: Vec<String> = values.into_iter().map(String::from).collect();
        order.sort_by(|a, b| (level_rank(a), a).cmp(&(level_rank(b), b)));
        kb.expertise_order = order;
    }

    let state_db = SequenceDatabase::new(
        schema.clone(),
        attempts
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let seq = TimedSequence::from_itemsets(
                    a.states.iter().map(|s| vec![Action::plain(s.as_str())]).collect(),
                )?;
                Ok(MdRecord {
                    id: i as u64 + 1,
                    dims: a.dims.clone(),
                    seq,
                })
            })
            .collect::<Result<Vec<_>>>()?,
    )?;
    kb.state_patterns = seqdim(&state_db, &config.constraints, config.mode, config.options)?;

    let mut leaving: BTreeMap<&ProblemState, Vec<(&Attempt, &ProblemState, &TimedSequence)>> = BTreeMap::new();
    for a in attempts {
        for (i, t) in a.transitions.iter().enumerate() {
            leaving.entry(&a.states[i]).or_default().push((a, &a.states[i + 1], t));
        }
    }
    let window = config.constraints.window();
    for (source, rows) in leaving {
        let records: Vec<MdRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, (a, _, t))| MdRecord {
                id: i as u64 + 1,
                dims: a.dims.clone(),
                seq: (*t).clone(),
            })
            .collect();
        let db = SequenceDatabase::new(schema.clone(), records)?;
        let mut patterns = Vec::new();
        for p in seqdim(&db, &config.constraints, config.mode, config.options)? {
            let mut votes: BTreeMap<&ProblemState, usize> = BTreeMap::new();
            for (r, (_, dest, _)) in db.records().iter().zip(&rows) {
                if md_matches(&r.dims, &p.md)? && contains(&p.seq.pattern, &r.seq, config.mode, &window) {
                    *votes.entry(dest).or_default() += 1;
                }
            }
            let destination = votes
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(a.0)))
                .map(|(d, _)| d.clone());
            patterns.push(ActionPattern { pattern: p, destination });
        }
        kb.action_patterns.insert(source.clone(), patterns);
    }
    Ok(kb)
}

/// A learner event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    /// Simultaneous actions.
    Action(Vec<Action>),
    StateChange(ProblemState),
}

/// Matching progress in one pattern: next element, skips spent, elements
/// matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cursor {
    pub pos: usize,
    pub skips: usize,
    pub matched: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    /// Index into the current state's pattern list.
    pub index: usize,
    pub cursors: BTreeSet<Cursor>,
    pub best_matched: usize,
}

impl Candidate {
    /// Most advanced cursor: most matched, then fewest skips, then earliest.
    pub fn best_cursor(&self) -> Option<Cursor> {
        self.cursors
            .iter()
            .copied()
            .min_by_key(|c| (Reverse(c.matched), c.skips, c.pos))
    }
}

fn element_matches(element: &PatternSet, played: &[Action]) -> bool {
    element.items.iter().all(|item| {
        played.iter().any(|a| {
            a.symbol == item.symbol
                && match &item.cluster {
                    None => true,
                    Some(c) => a.value.is_some_and(|v| c.min <= v && v <= c.max),
                }
        })
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionState {
    pub current_state: Option<ProblemState>,
    pub actions_in_state: Vec<Vec<Action>>,
    pub candidates: Vec<Candidate>,
    pub skip_budget: usize,
    pub expertise_estimate: Option<String>,
    /// Expertise votes of candidates no longer tracked.
    history: BTreeMap<String, usize>,
}

impl Default for SessionState {
    fn default() -> Self {
        SessionState::new(DEFAULT_SKIP_BUDGET)
    }
}

impl SessionState {
    pub fn new(skip_budget: usize) -> Self {
        SessionState {
            current_state: None,
            actions_in_state: Vec::new(),
            candidates: Vec::new(),
            skip_budget,
            expertise_estimate: None,
            history: BTreeMap::new(),
        }
    }

    fn weight(kb: &KnowledgeBase, state: Option<&ProblemState>, c: &Candidate) -> Option<(String, usize)> {
        let p = &kb.patterns_for(state?).get(c.index)?.pattern;
        let level = kb.level_of(&p.md)?;
        Some((level.to_string(), c.best_matched * p.support))
    }

    fn fold(&mut self, kb: &KnowledgeBase, c: &Candidate) {
        if let Some((level, w)) = Self::weight(kb, self.current_state.as_ref(), c) {
            *self.history.entry(level).or_default() += w;
        }
    }

    /// Applies one event.
    pub fn observe(&mut self, kb: &KnowledgeBase, event: &Event) {
        match event {
            Event::StateChange(state) => {
                for c in std::mem::take(&mut self.candidates) {
                    self.fold(kb, &c);
                }
                self.current_state = Some(state.clone());
                self.actions_in_state.clear();
                self.candidates = (0..kb.patterns_for(state).len())
                    .map(|index| Candidate {
                        index,
                        cursors: BTreeSet::from([Cursor {
                            pos: 0,
                            skips: 0,
                            matched: 0,
                        }]),
                        best_matched: 0,
                    })
                    .collect();
            }
            Event::Action(played) => {
                self.actions_in_state.push(played.clone());
                let patterns = match &self.current_state {
                    Some(s) => kb.patterns_for(s),
                    None => &[],
                };
                let budget = self.skip_budget;
                let mut dropped = Vec::new();
                for cand in &mut self.candidates {
                    let sets = &patterns[cand.index].pattern.seq.pattern.sets;
                    let mut next = BTreeSet::new();
                    for c in &cand.cursors {
                        if c.pos < sets.len() && element_matches(&sets[c.pos], played) {
                            next.insert(Cursor {
                                pos: c.pos + 1,
                                skips: c.skips,
                                matched: c.matched + 1,
                            });
                        } else if c.skips < budget {
                            // ignore the learner's action
                            next.insert(Cursor {
                                skips: c.skips + 1,
                                ..*c
                            });
                            // or give up on this pattern element
                            if c.pos < sets.len() {
                                next.insert(Cursor {
                                    pos: c.pos + 1,
                                    skips: c.skips + 1,
                                    matched: c.matched,
                                });
                            }
                        }
                    }
                    cand.best_matched = next.iter().map(|c| c.matched).max().unwrap_or(0).max(cand.best_matched);
                    cand.cursors = next;
                    if cand.cursors.is_empty() {
                        dropped.push(cand.clone());
                    }
                }
                self.candidates.retain(|c| !c.cursors.is_empty());
                for c in dropped {
                    self.fold(kb, &c);
                }
            }
        }
        self.expertise_estimate = estimate_expertise(kb, self);
    }
}

/// Functional form of [`SessionState::observe`].
pub fn observe(kb: &KnowledgeBase, session: &SessionState, event: &Event) -> SessionState {
    let mut next = session.clone();
    next.observe(kb, event);
    next
}

/// Weighted vote (matched elements × support) over tracked and previously
/// tracked candidates; ties go to the lower level. `None` until something
/// matched.
pub fn estimate_expertise(kb: &KnowledgeBase, session: &SessionState) -> Option<String> {
    let mut votes = session.history.clone();
    for c in &session.candidates {
        if let Some((level, w)) = SessionState::weight(kb, session.current_state.as_ref(), c) {
            *votes.entry(level).or_default() += w;
        }
    }
    let rank = |v: &str| {
        let pos = kb.expertise_order.iter().position(|o| o == v).unwrap_or(usize::MAX);
        (pos, level_rank(v), v.to_string())
    };
    votes
        .into_iter()
        .filter(|(_, w)| *w > 0)
        .min_by(|a, b| b.1.cmp(&a.1).then_with(|| rank(&a.0).cmp(&rank(&b.0))))
        .map(|(level, _)| level)
}

/// The next elements of one tracked pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hint {
    pub state: ProblemState,
    pub index: usize,
    pub elements: Vec<PatternSet>,
    pub support: usize,
    pub matched: usize,
    pub md: MdPattern,
    pub destination: Option<ProblemState>,
}

impl fmt::Display for Hint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.elements.iter().enumerate() {
            if i > 0 {
                f.write_str(" -> ")?;
            }
            for (j, it) in e.items.iter().enumerate() {
                if j > 0 {
                    f.write_str("+")?;
                }
                write!(f, "{it}")?;
            }
        }
        Ok(())
    }
}

fn dim_accepts(md: &MdPattern, dim: Option<usize>, want: Option<&str>) -> bool {
    match (dim, want) {
        (Some(d), Some(w)) => match md.get(d) {
            Some(MdValue::Value(v)) => v == w,
            _ => true,
        },
        _ => true,
    }
}

/// Ranked hints: tracked patterns with elements left, preferring success
/// patterns of the estimated expertise (relaxing expertise, then success,
/// when none qualify), ordered by support, then matched length, then
/// pattern. Each hint holds up to `n` elements after the best cursor.
pub fn next_step_hints(kb: &KnowledgeBase, session: &SessionState, n: usize) -> Result<Vec<Hint>> {
    if n < 1 {
        return Err(Error::InvalidArgument("hint length must be at least 1".into()));
    }
    let Some(state) = &session.current_state else {
        return Ok(Vec::new());
    };
    let patterns = kb.patterns_for(state);
    let open: Vec<(&Candidate, Cursor, &ActionPattern)> = session
        .candidates
        .iter()
        .filter_map(|c| {
            let cur = c.best_cursor()?;
            let p = patterns.get(c.index)?;
            (cur.pos < p.pattern.seq.pattern.len()).then_some((c, cur, p))
        })
        .collect();
    let expertise = session.expertise_estimate.as_deref();
    let passes = |p: &ActionPattern, check_level: bool, check_success: bool| {
        (!check_success || dim_accepts(&p.pattern.md, kb.success_dim, Some("true")))
            && (!check_level || dim_accepts(&p.pattern.md, kb.expertise_dim, expertise))
    };
    let mut chosen = Vec::new();
    for (level, success) in [(true, true), (false, true), (false, false)] {
        chosen = open.iter().filter(|(_, _, p)| passes(p, level, success)).collect();
        if !chosen.is_empty() {
            break;
        }
    }
    chosen.sort_by(|a, b| {
        let key = |x: &&(&Candidate, Cursor, &ActionPattern)| {
            (
                Reverse(x.2.pattern.support),
                Reverse(x.1.matched),
                x.2.pattern.seq.pattern.clone(),
                x.2.pattern.md.clone(),
                x.0.index,
            )
        };
        key(a).cmp(&key(b))
    });
    Ok(chosen
        .into_iter()
        .map(|(c, cur, p)| {
            let sets = &p.pattern.seq.pattern.sets;
            Hint {
                state: state.clone(),
                index: c.index,
                elements: sets[cur.pos..(cur.pos + n).min(sets.len())].to_vec(),
                support: p.pattern.support,
                matched: cur.matched,
                md: p.pattern.md.clone(),
                destination: p.destination.clone(),
            }
        })
        .collect())
}

/// The top-ranked hint, if any.
pub fn next_step_hint(kb: &KnowledgeBase, session: &SessionState, n: usize) -> Result<Option<Hint>> {
    Ok(next_step_hints(kb, session, n)?.into_iter().next())
}
