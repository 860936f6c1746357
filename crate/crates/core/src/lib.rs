//! Mining partial task models from logged action sequences.
//!
//! The crate mines time-extended sequential patterns (optionally closed,
//! value-clustered and enriched with record dimensions) and uses them to
//! track a learner's plan and suggest next steps.
//!
//! ```
//! use taskmodel::{mine, parse_db, Constraints, MineOptions, Mode};
//!
//! let db = parse_db("1 | | a ; b ; c\n2 | | a ; c\n3 | | b ; c\n").unwrap();
//! let patterns = mine(&db, &Constraints::absolute(2), Mode::Untimed, MineOptions::default()).unwrap();
//! let rendered: Vec<String> = patterns.iter().map(|p| format!("{} @{}", p.pattern, p.support)).collect();
//! assert!(rendered.contains(&"(0,a)(1,c) @2".to_string()));
//! ```

pub mod closure;
pub mod cluster;
pub mod containment;
pub mod error;
pub mod format;
pub mod growth;
pub mod md;
pub mod model;
pub mod oracle;
pub mod recognizer;

pub use closure::{
    backscan_prunable, closed_subset, closing_events, is_closed, is_subpattern, reconstruct_from_closed,
    ExtensionEvent, ExtensionKind,
};
pub use cluster::{adaptive_cluster, kmedians_1d, split_projection, ClusterOutcome, ValueCluster};
pub use containment::{
    contains, contains_timed, contains_untimed, contains_untimed_within, md_matches, md_subsumes, support,
    support_within, supporters, GapWindow,
};
pub use error::{Error, Result};
pub use format::{
    emit_attempt, emit_db, emit_patterns, load_kb, parse_action, parse_attempt, parse_db, save_kb, OutputFormat,
    ReportHeader,
};
pub use growth::{grow_step, mine, project, Constraints, MinSupport, MineOptions, MinedPattern, Pair, ProjectedDb, SuffixView};
pub use md::{filter_by_md, mine_closed_mdpatterns, seqdim, MdSequencePattern};
pub use model::{
    Action, ActionSet, DimensionSchema, MdPattern, MdRecord, MdValue, Mode, Pattern, PatternItem, PatternSet,
    SequenceDatabase, Symbol, TimedSequence,
};
pub use oracle::{oracle_closed, oracle_frequent, oracle_md, random_db, Limits};
pub use recognizer::{
    build_kb, estimate_expertise, next_step_hint, next_step_hints, observe, ActionPattern, Attempt, Candidate, Cursor,
    Event, Hint, KbConfig, KnowledgeBase, ProblemState, SessionState,
};
