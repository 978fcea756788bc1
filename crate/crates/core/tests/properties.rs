use std::collections::BTreeSet;
use std::sync::LazyLock;

use podgrid::model::ConstraintKind;
use podgrid::requirements::coverage_report;
use podgrid::strategy::{multi_type_model, single_type_model, single_type_model_with_notes};
use podgrid::*;
use proptest::prelude::*;

/// Independent per-row check of every same-type hard constraint.
fn row_satisfies(model: &NoiseFactorModel, type_name: &str, row: &Situation) -> bool {
    let ty = model.factor_type(type_name).unwrap();
    model.constraints.iter().all(|c| {
        let (Some(sf), Some(tf)) = (ty.factor(&c.source), ty.factor(&c.target)) else {
            return true;
        };
        let s = active(sf, row.state_of(&c.source).unwrap()).unwrap();
        let t = active(tf, row.state_of(&c.target).unwrap()).unwrap();
        match c.kind {
            ConstraintKind::Requires => !s || t,
            ConstraintKind::Excludes => !(s && t),
            ConstraintKind::Note => true,
        }
    })
}

fn all_assignments(model: &NoiseFactorModel, type_name: &str) -> Vec<Vec<String>> {
    let ty = model.factor_type(type_name).unwrap();
    let mut out: Vec<Vec<String>> = vec![vec![]];
    for f in &ty.factors {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                f.states.iter().map(move |s| {
                    let mut p = prefix.clone();
                    p.push(s.label.clone());
                    p
                })
            })
            .collect();
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn expand_matches_oracle(m in single_type_model(6, 3)) {
        prop_assert_eq!(expand(&m, "T").unwrap(), oracle_expand(&m, "T").unwrap());
    }

    #[test]
    fn sound_complete_and_ordered(m in single_type_model(6, 3)) {
        let g = expand(&m, "T").unwrap();
        for row in &g.rows {
            prop_assert!(row_satisfies(&m, "T", row));
        }
        let emitted: BTreeSet<Vec<String>> = g
            .rows
            .iter()
            .map(|r| r.labels().map(str::to_owned).collect())
            .collect();
        prop_assert_eq!(emitted.len() as u64, g.len());
        for assignment in all_assignments(&m, "T") {
            if emitted.contains(&assignment) {
                continue;
            }
            let ty = m.factor_type("T").unwrap();
            let violated = m.constraints.iter().any(|c| {
                let (Some(si), Some(ti)) = (ty.factor_position(&c.source), ty.factor_position(&c.target)) else {
                    return false;
                };
                let s = active(&ty.factors[si], &assignment[si]).unwrap();
                let t = active(&ty.factors[ti], &assignment[ti]).unwrap();
                !c.kind.holds(s, t)
            });
            prop_assert!(violated, "{:?} dropped without a violated constraint", assignment);
        }
        let keys: Vec<u64> = g.rows.iter().map(|r| g.key(r)).collect();
        prop_assert!(keys.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn baseline_row_is_first(m in single_type_model(6, 3)) {
        let g = expand(&m, "T").unwrap();
        let ty = m.factor_type("T").unwrap();
        let first = g.row(1).unwrap();
        for (f, label) in ty.factors.iter().zip(first.labels()) {
            prop_assert!(!active(f, label).unwrap());
        }
    }

    #[test]
    fn notes_do_not_prune(m in single_type_model_with_notes(6, 3)) {
        prop_assert_eq!(expand(&m, "T").unwrap(), expand(&m.without_notes(), "T").unwrap());
    }

    #[test]
    fn adding_a_constraint_never_grows_the_grid(
        m in single_type_model(6, 3),
        kind in prop_oneof![Just(ConstraintKind::Requires), Just(ConstraintKind::Excludes)],
        s in 0usize..6,
        t in 0usize..6,
    ) {
        let n = m.types[0].factors.len();
        prop_assume!(n >= 2 && s % n != t % n);
        let before = count(&m, "T").unwrap().pruned_count;
        let mut more = m.clone();
        more.constraints.push(Constraint::new(
            kind,
            m.types[0].factors[s % n].id.clone(),
            m.types[0].factors[t % n].id.clone(),
        ));
        prop_assert!(count(&more, "T").unwrap().pruned_count <= before);
    }

    #[test]
    fn count_and_lazy_rows_agree_with_expand(m in single_type_model(6, 3)) {
        let g = expand(&m, "T").unwrap();
        let stats = count(&m, "T").unwrap();
        prop_assert_eq!(stats.pruned_count, g.len());
        prop_assert_eq!(stats.pruned_count + stats.pruned_away, stats.unpruned_count);
        let lazy = LazyGrid::new(&m, "T").unwrap();
        for (id, row) in g.iter() {
            prop_assert_eq!(&row_by_id(&lazy, id).unwrap(), row);
        }
        prop_assert_eq!(expand_parallel(&m, "T").unwrap(), g);
    }

    #[test]
    fn filter_relevant_is_idempotent_and_exact(m in multi_type_model()) {
        let once = filter_relevant(&m).unwrap();
        prop_assert_eq!(filter_relevant(&once).unwrap(), once.clone());
        let expected: Vec<&str> = m
            .factors()
            .filter(|f| f.channels.as_ref().unwrap().iter().any(|c| c.affects_image_content()))
            .map(|f| f.id.as_str())
            .collect();
        let kept: Vec<&str> = once.factors().map(|f| f.id.as_str()).collect();
        prop_assert_eq!(kept, expected);
        prop_assert!(validate(&once).is_empty() || once.types.is_empty());
    }

    #[test]
    fn model_roundtrip(m in multi_type_model()) {
        let bytes = serialize_model(&m);
        prop_assert_eq!(parse_model(&bytes).unwrap(), m.clone());
        prop_assert_eq!(serialize_model(&m), bytes);
    }

    #[test]
    fn coverage_is_monotone_and_partitions(
        first in proptest::collection::btree_set(1u64..=108, 0..40),
        second in proptest::collection::btree_set(1u64..=108, 1..40),
    ) {
        let m = reference_model();
        let grid = expand(&m, "Usage").unwrap();
        let req = |label: &str, rows: &BTreeSet<u64>| RobustnessRequirement {
            id: label.into(),
            trigger: "t".into(),
            component: "c".into(),
            behaviour: "b".into(),
            pods: vec![Pod { label: label.into(), type_name: "Usage".into(), row_ids: rows.clone() }],
        };
        let mut reqs = vec![];
        if !first.is_empty() {
            reqs.push(req("PODs#1", &first));
        }
        let before = coverage_report(&reqs, &grid).unwrap();
        reqs.push(req("PODs#2", &second));
        let after = coverage_report(&reqs, &grid).unwrap();
        prop_assert!(before.covered.is_subset(&after.covered));
        for r in [&before, &after] {
            prop_assert!(r.covered.is_disjoint(&r.uncovered));
            let union: BTreeSet<u64> = r.covered.union(&r.uncovered).copied().collect();
            prop_assert_eq!(union, (1..=108).collect::<BTreeSet<_>>());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn requirements_roundtrip(
        ids in proptest::collection::btree_set("[A-Z]{2}-[0-9]{1,3}", 1..5),
        text in "[a-z ]{0,30}",
        lo in 1u64..50,
        span in 0u64..50,
    ) {
        let specs: Vec<RequirementSpec> = ids
            .into_iter()
            .enumerate()
            .map(|(i, id)| RequirementSpec {
                id,
                trigger: text.clone(),
                component: "component".into(),
                behaviour: text.clone(),
                pods: vec![match i % 3 {
                    0 => PodSelector::new("Usage", RowSelector::All),
                    1 => PodSelector::new("Usage", RowSelector::Range(lo, lo + span)),
                    _ => PodSelector::new("Environment", RowSelector::List(vec![lo, 2, lo])),
                }],
            })
            .collect();
        prop_assert_eq!(parse_requirements(&serialize_requirements(&specs)).unwrap(), specs);
    }

    #[test]
    fn binding_ignores_selector_order(
        rows in proptest::collection::vec(proptest::collection::vec(1u64..=12, 1..5), 1..6),
        seed in any::<u64>(),
    ) {
        let m = reference_model();
        let grids = GridSet::expand_all(&m);
        let selectors: Vec<PodSelector> = rows
            .into_iter()
            .map(|r| PodSelector::new("Environment", RowSelector::List(r)))
            .collect();
        let mut shuffled = selectors.clone();
        shuffled.rotate_left((seed as usize) % selectors.len());
        shuffled.reverse();
        let contents = |pods: Vec<Pod>| -> BTreeSet<(String, BTreeSet<u64>)> {
            pods.into_iter().map(|p| (p.type_name, p.row_ids)).collect()
        };
        prop_assert_eq!(
            contents(bind_pods(&m, &grids, &selectors).unwrap()),
            contents(bind_pods(&m, &grids, &shuffled).unwrap())
        );
    }

    #[test]
    fn rendered_sentence_names_each_pod_once(n in 1usize..6, dup in 0usize..3) {
        let pods: Vec<Pod> = (1..=n)
            .chain((0..dup).map(|_| 1))
            .map(|i| Pod { label: format!("PODs#{i}"), type_name: "Usage".into(), row_ids: BTreeSet::from([i as u64]) })
            .collect();
        let req = RobustnessRequirement {
            id: "RQ".into(),
            trigger: "x".into(),
            component: "y".into(),
            behaviour: "z".into(),
            pods,
        };
        let text = render_requirement(&req);
        for i in 1..=n {
            let label = format!("PODs#{i}");
            let hits = text.matches(&format!("{label},")).count() + text.matches(&format!("{label}]")).count();
            prop_assert_eq!(hits, 1, "{}", text);
        }
        prop_assert!(!text.contains(['{', '}']), "unresolved braces in {}", text);
    }
}

static SPACE: LazyLock<GlobalIndexSpace> =
    LazyLock::new(|| GlobalIndexSpace::new(&reference_model()).unwrap());

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn global_index_bijection(gid in 1u64..=80_621_568) {
        let tuple = SPACE.global_to_tuple(gid).unwrap();
        prop_assert_eq!(SPACE.tuple_to_global(&tuple).unwrap(), gid);
    }
}
