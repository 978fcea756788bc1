//! Proptest strategies producing random, structurally valid models.

use proptest::collection::{btree_set, vec};
use proptest::prelude::*;
use proptest::sample::select;

use crate::model::{
    Channel, Constraint, ConstraintKind, Factor, FactorType, NoiseFactorModel, StateDef,
};

const LABELS: [&str; 3] = ["False", "Low", "High"];

fn arb_kind(with_notes: bool) -> impl Strategy<Value = ConstraintKind> {
    let kinds = if with_notes {
        vec![ConstraintKind::Requires, ConstraintKind::Excludes, ConstraintKind::Note]
    } else {
        vec![ConstraintKind::Requires, ConstraintKind::Excludes]
    };
    select(kinds)
}

fn arb_channels() -> impl Strategy<Value = std::collections::BTreeSet<Channel>> {
    btree_set(select(Channel::ALL.to_vec()), 1..=4)
}

/// Factor with 2..=`max_states` states, baseline first.
fn arb_factor(id: String, max_states: usize) -> impl Strategy<Value = Factor> {
    (2..=max_states, arb_channels()).prop_map(move |(n, channels)| {
        let states = LABELS[..n]
            .iter()
            .enumerate()
            .map(|(i, l)| StateDef::new(*l, i == 0))
            .collect();
        Factor::new(id.clone(), format!("Factor {id}"), states).with_channels(channels)
    })
}

/// Random constraints over `ids`, never relating a factor to itself.
fn arb_constraints(
    ids: Vec<String>,
    max: usize,
    with_notes: bool,
) -> impl Strategy<Value = Vec<Constraint>> {
    let n = ids.len();
    if n < 2 {
        return Just(Vec::new()).boxed();
    }
    vec((arb_kind(with_notes), 0..n, 1..n), 0..=max)
        .prop_map(move |raw| {
            raw.into_iter()
                .map(|(kind, s, offset)| {
                    let t = (s + offset) % n;
                    Constraint::new(kind, ids[s].clone(), ids[t].clone())
                })
                .collect()
        })
        .boxed()
}

/// One type named `T` with up to `max_factors` factors of up to `max_states`
/// states and hard requires/excludes constraints only.
pub fn single_type_model(
    max_factors: usize,
    max_states: usize,
) -> impl Strategy<Value = NoiseFactorModel> {
    single_type_model_with(max_factors, max_states, false)
}

/// As [`single_type_model`], with note constraints mixed in.
pub fn single_type_model_with_notes(
    max_factors: usize,
    max_states: usize,
) -> impl Strategy<Value = NoiseFactorModel> {
    single_type_model_with(max_factors, max_states, true)
}

fn single_type_model_with(
    max_factors: usize,
    max_states: usize,
    with_notes: bool,
) -> impl Strategy<Value = NoiseFactorModel> {
    (1..=max_factors)
        .prop_flat_map(move |n| {
            let ids: Vec<String> = (0..n).map(|i| format!("f{i}")).collect();
            let factors: Vec<_> = ids.iter().map(|id| arb_factor(id.clone(), max_states)).collect();
            (factors, arb_constraints(ids, 8, with_notes))
        })
        .prop_map(|(factors, constraints)| {
            let mut m = NoiseFactorModel::new("random", "0");
            m.types.push(FactorType::new("T", factors));
            m.constraints = constraints;
            m
        })
}

/// Several types, channel-tagged factors, and constraints that may cross
/// type boundaries.
pub fn multi_type_model() -> impl Strategy<Value = NoiseFactorModel> {
    vec(1..=4usize, 1..=3)
        .prop_flat_map(|sizes| {
            let types: Vec<_> = sizes
                .iter()
                .enumerate()
                .map(|(t, &n)| {
                    let factors: Vec<_> =
                        (0..n).map(|i| arb_factor(format!("t{t}f{i}"), 3)).collect();
                    factors.prop_map(move |fs| FactorType::new(format!("Type {t}"), fs))
                })
                .collect();
            let ids: Vec<String> = sizes
                .iter()
                .enumerate()
                .flat_map(|(t, &n)| (0..n).map(move |i| format!("t{t}f{i}")))
                .collect();
            (types, arb_constraints(ids, 6, true))
        })
        .prop_map(|(types, constraints)| NoiseFactorModel {
            name: "random".into(),
            version: "0".into(),
            types,
            constraints,
        })
}
