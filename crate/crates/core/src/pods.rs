//! Cross-type composition and POD binding.
//!
//! Every composite situation (one row from each type's grid) gets a stable
//! 1-based global ID by mixed-radix composition over the per-type grid sizes,
//! last type varying fastest. The composite space is never materialized.

use std::collections::{BTreeSet, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{GridError, GridSet, LazyGrid, Situation};
use crate::model::{ConstraintKind, NoiseFactorModel};
use crate::modelio::{PodSelector, RowSelector};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PodError {
    #[error("unknown factor type `{0}`")]
    UnknownType(String),
    #[error("factor type `{0}` has no expanded grid")]
    UnboundPod(String),
    #[error("row {id} of `{type_name}` out of range 1..={max}")]
    RowOutOfRange { type_name: String, id: u64, max: u64 },
    #[error("POD on `{0}` selects no rows")]
    EmptyPod(String),
    #[error("POD label `{0}` is used for two different row sets")]
    ConflictingLabel(String),
    #[error("global id {id} out of range 1..={max}")]
    OutOfRange { id: u64, max: u64 },
    #[error("tuple component {index} is {value}, expected 1..={max}")]
    ComponentOutOfRange { index: usize, value: u64, max: u64 },
    #[error("tuple has {got} components, expected {expected}")]
    ArityMismatch { got: usize, expected: usize },
    #[error("cannot draw {n} distinct ids from {total}")]
    NTooLarge { n: u64, total: u64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy)]
struct CrossRule {
    kind: ConstraintKind,
    source: (usize, usize),
    target: (usize, usize),
}

/// Mixed-radix index over the product of every type's pruned grid.
#[derive(Debug, Clone)]
pub struct GlobalIndexSpace {
    grids: Vec<LazyGrid>,
    radices: Vec<u64>,
    total: u64,
    cross: Vec<CrossRule>,
    baselines: Vec<Vec<String>>,
}

impl GlobalIndexSpace {
    pub fn new(model: &NoiseFactorModel) -> Result<Self, PodError> {
        let grids = model
            .types
            .iter()
            .map(|t| LazyGrid::new(model, &t.name))
            .collect::<Result<Vec<_>, _>>()?;
        let radices: Vec<u64> = grids.iter().map(LazyGrid::len).collect();
        let total = radices.iter().fold(1u64, |acc, &r| acc.saturating_mul(r));
        let cross = model
            .cross_type_constraints()
            .filter_map(|c| {
                Some(CrossRule {
                    kind: c.kind,
                    source: model.locate(&c.source)?,
                    target: model.locate(&c.target)?,
                })
            })
            .collect();
        let baselines = model
            .types
            .iter()
            .map(|t| {
                t.factors
                    .iter()
                    .map(|f| f.states[f.baseline_index()].label.clone())
                    .collect()
            })
            .collect();
        Ok(Self {
            grids,
            radices,
            total,
            cross,
            baselines,
        })
    }

    pub fn type_names(&self) -> impl Iterator<Item = &str> {
        self.grids.iter().map(LazyGrid::type_name)
    }

    pub fn radices(&self) -> &[u64] {
        &self.radices
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn grid(&self, index: usize) -> Option<&LazyGrid> {
        self.grids.get(index)
    }

    /// Per-type row IDs for a global ID.
    pub fn global_to_tuple(&self, gid: u64) -> Result<Vec<u64>, PodError> {
        if gid == 0 || gid > self.total {
            return Err(PodError::OutOfRange {
                id: gid,
                max: self.total,
            });
        }
        let mut rest = gid - 1;
        let mut tuple = vec![0; self.radices.len()];
        for (slot, &radix) in tuple.iter_mut().zip(&self.radices).rev() {
            *slot = rest % radix + 1;
            rest /= radix;
        }
        Ok(tuple)
    }

    pub fn tuple_to_global(&self, tuple: &[u64]) -> Result<u64, PodError> {
        if tuple.len() != self.radices.len() {
            return Err(PodError::ArityMismatch {
                got: tuple.len(),
                expected: self.radices.len(),
            });
        }
        let mut gid = 0u64;
        for (index, (&value, &radix)) in tuple.iter().zip(&self.radices).enumerate() {
            if value == 0 || value > radix {
                return Err(PodError::ComponentOutOfRange {
                    index,
                    value,
                    max: radix,
                });
            }
            gid = gid * radix + (value - 1);
        }
        Ok(gid + 1)
    }

    /// The per-type situations a global ID stands for.
    pub fn situations(&self, gid: u64) -> Result<Vec<Situation>, PodError> {
        let tuple = self.global_to_tuple(gid)?;
        self.grids
            .iter()
            .zip(&tuple)
            .map(|(g, &id)| g.row_by_id(id).map_err(PodError::from))
            .collect()
    }

    pub fn has_cross_type_constraints(&self) -> bool {
        !self.cross.is_empty()
    }

    /// Whether a composite situation satisfies every cross-type hard
    /// constraint. Always true when the model declares none.
    pub fn is_consistent(&self, situations: &[Situation]) -> bool {
        let is_active = |(t, f): (usize, usize)| {
            situations[t].assignments[f].state != self.baselines[t][f]
        };
        self.cross
            .iter()
            .all(|r| r.kind.holds(is_active(r.source), is_active(r.target)))
    }
}

pub fn global_to_tuple(space: &GlobalIndexSpace, gid: u64) -> Result<Vec<u64>, PodError> {
    space.global_to_tuple(gid)
}

pub fn tuple_to_global(space: &GlobalIndexSpace, tuple: &[u64]) -> Result<u64, PodError> {
    space.tuple_to_global(tuple)
}

/// A bounded operational-context subset: some rows of one type's grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pod {
    pub label: String,
    pub type_name: String,
    pub row_ids: BTreeSet<u64>,
}

fn resolve_rows(rows: &RowSelector, type_name: &str, max: u64) -> Result<BTreeSet<u64>, PodError> {
    let out_of_range = |id| PodError::RowOutOfRange {
        type_name: type_name.to_owned(),
        id,
        max,
    };
    match rows {
        RowSelector::All => Ok((1..=max).collect()),
        RowSelector::Range(lo, hi) => {
            for id in [*lo, *hi] {
                if id == 0 || id > max {
                    return Err(out_of_range(id));
                }
            }
            if lo > hi {
                return Err(PodError::EmptyPod(type_name.to_owned()));
            }
            Ok((*lo..=*hi).collect())
        }
        RowSelector::List(ids) if ids.is_empty() => Err(PodError::EmptyPod(type_name.to_owned())),
        RowSelector::List(ids) => ids
            .iter()
            .map(|&id| {
                if id == 0 || id > max {
                    Err(out_of_range(id))
                } else {
                    Ok(id)
                }
            })
            .collect(),
    }
}

/// Labels POD selectors in document order.
///
/// Selectors without an explicit label are numbered `PODs#1`, `PODs#2`, ...
/// A selector that resolves to the same type and rows as an earlier one
/// reuses that POD's label instead of consuming a new number.
#[derive(Debug, Default)]
pub struct PodBinder {
    next_ordinal: u64,
    by_content: HashMap<(String, BTreeSet<u64>), String>,
    by_label: HashMap<String, (String, BTreeSet<u64>)>,
}

impl PodBinder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(
        &mut self,
        model: &NoiseFactorModel,
        grids: &GridSet,
        selector: &PodSelector,
    ) -> Result<Pod, PodError> {
        let ty = model
            .factor_type(&selector.type_name)
            .ok_or_else(|| PodError::UnknownType(selector.type_name.clone()))?;
        let grid = grids
            .get(&ty.name)
            .ok_or_else(|| PodError::UnboundPod(ty.name.clone()))?;
        let row_ids = resolve_rows(&selector.rows, &ty.name, grid.len())?;
        let content = (ty.name.clone(), row_ids);

        let label = match &selector.label {
            Some(label) => label.clone(),
            None => match self.by_content.get(&content) {
                Some(label) => label.clone(),
                None => {
                    self.next_ordinal += 1;
                    format!("PODs#{}", self.next_ordinal)
                }
            },
        };
        match self.by_label.get(&label) {
            Some(existing) if *existing != content => {
                return Err(PodError::ConflictingLabel(label));
            }
            Some(_) => {}
            None => {
                self.by_label.insert(label.clone(), content.clone());
            }
        }
        self.by_content
            .entry(content.clone())
            .or_insert_with(|| label.clone());

        Ok(Pod {
            label,
            type_name: content.0,
            row_ids: content.1,
        })
    }
}

/// Binds selectors to grid rows, labelling them in the given order.
pub fn bind_pods(
    model: &NoiseFactorModel,
    grids: &GridSet,
    selectors: &[PodSelector],
) -> Result<Vec<Pod>, PodError> {
    let mut binder = PodBinder::new();
    selectors
        .iter()
        .map(|s| binder.bind(model, grids, s))
        .collect()
}

/// Draws `n` distinct IDs from `1..=total`, deterministically for a seed.
///
/// Uses Robert Floyd's sampling algorithm driven by ChaCha8 seeded with
/// `seed`; for `j` in `total-n+1..=total` a candidate `t` is drawn uniformly
/// from `1..=j` and `j` is taken instead when `t` was already chosen. IDs are
/// returned in the order they were chosen. All arithmetic is on `u64`, so
/// output does not depend on the platform word size.
pub fn sample_ids(total: u64, n: u64, seed: u64) -> Result<Vec<u64>, PodError> {
    if n > total {
        return Err(PodError::NTooLarge { n, total });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = HashSet::with_capacity(n as usize);
    let mut out = Vec::with_capacity(n as usize);
    for j in (total - n + 1)..=total {
        let t = rng.gen_range(1..=j);
        let pick = if chosen.contains(&t) { j } else { t };
        chosen.insert(pick);
        out.push(pick);
    }
    Ok(out)
}

/// Where [`sample`] draws from.
#[derive(Debug, Clone, Copy)]
pub enum SampleSpace<'a> {
    Grid(&'a LazyGrid),
    Global(&'a GlobalIndexSpace),
}

impl SampleSpace<'_> {
    pub fn total(&self) -> u64 {
        match self {
            SampleSpace::Grid(g) => g.len(),
            SampleSpace::Global(s) => s.total(),
        }
    }
}

pub fn sample(space: SampleSpace<'_>, n: u64, seed: u64) -> Result<Vec<u64>, PodError> {
    sample_ids(space.total(), n, seed)
}
