use proptest::prelude::*;
use taskmodel::{
    contains_timed, contains_untimed, emit_db, is_closed, md_matches, md_subsumes, mine, parse_db, random_db, support,
    supporters, Constraints, Limits, MdPattern, MdRecord, MineOptions, Mode, SequenceDatabase,
};

fn small_db() -> impl Strategy<Value = SequenceDatabase> {
    any::<u64>().prop_map(|seed| random_db(seed, &Limits::default()))
}

fn constraints() -> impl Strategy<Value = Constraints> {
    (1usize..4, 1i64..3, prop::option::of(2i64..5), 0i64..3, prop::option::of(3i64..8)).prop_map(
        |(minsup, c1, c2, c3, c4)| {
            Constraints::absolute(minsup)
                .with_gaps(c1, c2.map(|g| g.max(c1)))
                .with_span(c3, c4.map(|s| s.max(c3)))
        },
    )
}

fn mode() -> impl Strategy<Value = Mode> {
    prop_oneof![Just(Mode::Timed), Just(Mode::Untimed)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reported_supports_are_recomputable(db in small_db(), c in constraints(), mode in mode(), cluster in any::<bool>()) {
        let opts = MineOptions { cluster_values: cluster, ..MineOptions::default() };
        for p in mine(&db, &c, mode, opts).unwrap() {
            prop_assert_eq!(supporters(&db, &p.pattern, mode, &c.window()).len(), p.support);
            prop_assert!(p.support >= c.threshold(db.len()));
            if mode == Mode::Timed {
                let gaps_ok = p.pattern.sets.windows(2).all(|w| {
                    let g = w[1].offset - w[0].offset;
                    g >= c.min_gap && c.max_gap.is_none_or(|m| g <= m)
                });
                prop_assert!(gaps_ok);
                prop_assert!(p.pattern.span() >= c.min_span);
                prop_assert!(c.max_span.is_none_or(|m| p.pattern.span() <= m));
            }
        }
    }

    #[test]
    fn support_is_anti_monotone(db in small_db(), mode in mode()) {
        let c = Constraints::absolute(1);
        let patterns = mine(&db, &c, mode, MineOptions::default()).unwrap();
        for p in patterns.iter().filter(|p| p.pattern.len() > 1) {
            let mut prefix = p.pattern.clone();
            prefix.sets.pop();
            let (n, _) = support(&db, &prefix, mode).unwrap();
            prop_assert!(n >= p.support);
        }
    }

    #[test]
    fn timed_containment_implies_untimed(db in small_db()) {
        let c = Constraints::absolute(1);
        for p in mine(&db, &c, Mode::Timed, MineOptions::default()).unwrap() {
            for r in db.records() {
                if contains_timed(&p.pattern, &r.seq) {
                    prop_assert!(contains_untimed(&p.pattern.untimed_view(), &r.seq));
                }
            }
        }
    }

    #[test]
    fn support_ignores_record_order_and_ids(db in small_db(), mode in mode()) {
        let mut records: Vec<MdRecord> = db.records().to_vec();
        records.reverse();
        for (i, r) in records.iter_mut().enumerate() {
            r.id = 100 + i as u64;
        }
        let shuffled = SequenceDatabase::new(db.schema.clone(), records).unwrap();
        for p in mine(&db, &Constraints::absolute(1), mode, MineOptions::default()).unwrap() {
            prop_assert_eq!(support(&shuffled, &p.pattern, mode).unwrap().0, p.support);
        }
    }

    #[test]
    fn closed_output_is_the_closed_filter(db in small_db(), c in constraints(), mode in mode()) {
        let all = mine(&db, &c, mode, MineOptions::default()).unwrap();
        let closed = mine(&db, &c, mode, MineOptions { closed: true, ..MineOptions::default() }).unwrap();
        let filtered: Vec<_> = all.into_iter().filter(|p| is_closed(&p.pattern, &db, mode, &c)).collect();
        prop_assert_eq!(closed, filtered);
    }

    #[test]
    fn mining_is_deterministic(db in small_db(), mode in mode(), cluster in any::<bool>()) {
        let c = Constraints::fraction(0.3);
        let opts = MineOptions { cluster_values: cluster, closed: true, backscan: None };
        prop_assert_eq!(mine(&db, &c, mode, opts).unwrap(), mine(&db, &c, mode, opts).unwrap());
    }

    #[test]
    fn database_text_round_trips(db in small_db()) {
        prop_assert_eq!(parse_db(&emit_db(&db)).unwrap(), db);
    }

    #[test]
    fn md_matching_is_transitive(values in prop::collection::vec(0usize..3, 3), a in prop::collection::vec(any::<bool>(), 3), b in prop::collection::vec(any::<bool>(), 3)) {
        let names = ["x", "y", "z"];
        let record = MdPattern::concrete(&values.iter().map(|&v| names[v]).collect::<Vec<_>>());
        let blur = |mask: &[bool], base: &MdPattern| MdPattern(
            base.0.iter().zip(mask).map(|(v, &m)| if m { taskmodel::MdValue::Any } else { v.clone() }).collect()
        );
        let specific = blur(&a, &record);
        let general = blur(&b, &specific);
        prop_assert!(md_matches(&record, &specific).unwrap());
        prop_assert!(md_subsumes(&general, &specific).unwrap());
        prop_assert!(md_matches(&record, &general).unwrap());
    }
}

#[test]
fn random_db_seed_one_is_stable() {
    let golden = include_str!("golden/random_seed1.db");
    assert_eq!(emit_db(&random_db(1, &Limits::default())), golden);
}

#[test]
fn classic_prefixspan_semantics_on_unit_timestamps() {
    // with index timestamps and no gap bounds, untimed mining is plain
    // sequential pattern mining
    let db = parse_db("1 | | a ; a b ; c\n2 | | a ; c\n3 | | b ; c ; a\n").unwrap();
    let out: Vec<String> = mine(&db, &Constraints::absolute(2), Mode::Untimed, MineOptions::default())
        .unwrap()
        .iter()
        .map(|p| format!("{}@{}", p.pattern, p.support))
        .collect();
    assert_eq!(
        out,
        vec!["(0,a)@3", "(0,a)(1,c)@2", "(0,b)@2", "(0,b)(1,c)@2", "(0,c)@3"]
    );
}

mod recognizer {
    use proptest::prelude::*;
    use taskmodel::{
        build_kb, emit_attempt, next_step_hints, parse_attempt, Action, Attempt, Constraints, Event, KbConfig,
        KnowledgeBase, ProblemState, SessionState,
        load_kb, save_kb,
    };

    const SYMBOLS: [&str; 4] = ["a", "b", "c", "d"];

    fn attempt_text() -> impl Strategy<Value = String> {
        (
            any::<bool>(),
            0usize..3,
            prop::collection::vec(prop::collection::vec((0usize..4, prop::option::of(-3i64..4)), 0..5), 1..4),
        )
            .prop_map(|(success, level, transitions)| {
                let levels = ["novice", "interm", "expert"];
                let mut text = format!("dims success={success} expertise={}\nstate S0\n", levels[level]);
                for (i, t) in transitions.iter().enumerate() {
                    for (s, v) in t {
                        match v {
                            Some(v) => text.push_str(&format!("action {}{{{v}}}\n", SYMBOLS[*s])),
                            None => text.push_str(&format!("action {}\n", SYMBOLS[*s])),
                        }
                    }
                    text.push_str(&format!("state S{}\n", (i + 1) % 3));
                }
                text
            })
    }

    fn corpus() -> impl Strategy<Value = Vec<Attempt>> {
        prop::collection::vec(attempt_text(), 2..6)
            .prop_map(|texts| texts.iter().map(|t| parse_attempt(t).unwrap()).collect())
    }

    fn events() -> impl Strategy<Value = Vec<Event>> {
        prop::collection::vec(
            prop_oneof![
                4 => (0usize..4).prop_map(|s| Event::Action(vec![Action::plain(SYMBOLS[s])])),
                1 => (0usize..3).prop_map(|s| Event::StateChange(ProblemState::new(format!("S{s}")).unwrap())),
            ],
            0..12,
        )
    }

    fn kb(corpus: &[Attempt]) -> KnowledgeBase {
        build_kb(corpus, &KbConfig::new(Constraints::fraction(0.5))).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn attempt_text_round_trips(text in attempt_text()) {
            let attempt = parse_attempt(&text).unwrap();
            prop_assert_eq!(parse_attempt(&emit_attempt(&attempt)).unwrap(), attempt);
        }

        #[test]
        fn kb_file_round_trips(corpus in corpus()) {
            let kb = kb(&corpus);
            prop_assert_eq!(load_kb(&save_kb(&kb)).unwrap(), kb);
        }

        #[test]
        fn alive_candidates_never_grow_on_actions(corpus in corpus(), events in events(), budget in 0usize..3) {
            let kb = kb(&corpus);
            let mut session = SessionState::new(budget);
            for e in &events {
                let before: Vec<usize> = session.candidates.iter().map(|c| c.index).collect();
                session.observe(&kb, e);
                if matches!(e, Event::Action(_)) {
                    let after: Vec<usize> = session.candidates.iter().map(|c| c.index).collect();
                    prop_assert!(after.iter().all(|i| before.contains(i)));
                }
            }
        }

        #[test]
        fn replaying_events_gives_identical_hints(corpus in corpus(), events in events()) {
            let kb = kb(&corpus);
            let run = || {
                let mut session = SessionState::default();
                let mut out = Vec::new();
                for e in &events {
                    session.observe(&kb, e);
                    out.push(next_step_hints(&kb, &session, 2).unwrap());
                }
                out
            };
            prop_assert_eq!(run(), run());
        }

        #[test]
        fn hints_are_suffixes_of_kb_patterns(corpus in corpus(), events in events()) {
            let kb = kb(&corpus);
            let mut session = SessionState::default();
            for e in &events {
                session.observe(&kb, e);
                for h in next_step_hints(&kb, &session, 3).unwrap() {
                    let sets = &kb.patterns_for(&h.state)[h.index].pattern.seq.pattern.sets;
                    prop_assert!(!h.elements.is_empty() && h.elements.len() <= 3);
                    let found = (0..=sets.len() - h.elements.len()).any(|pos| {
                        let window = &sets[pos..pos + h.elements.len()];
                        let tail_or_full = pos + h.elements.len() == sets.len() || h.elements.len() == 3;
                        tail_or_full && window.iter().zip(&h.elements).all(|(x, y)| x.items == y.items)
                    });
                    prop_assert!(found);
                }
            }
        }
    }
}
