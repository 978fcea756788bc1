//! Situation coverage grids.
//!
//! A grid is the constrained Cartesian product of the states of one factor
//! type. Factors nest left to right with the rightmost factor varying
//! fastest, and states follow their declared order, so rows are sorted by
//! their mixed-radix key. Row IDs are 1-based and assigned after pruning.
//!
//! Only hard constraints whose two endpoints belong to the expanded type
//! prune rows; notes and cross-type constraints are ignored here.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{active, ConstraintKind, NoiseFactorModel};

/// Largest unpruned product [`oracle_expand`] will enumerate.
pub const ORACLE_LIMIT: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("unknown factor type `{0}`")]
    UnknownType(String),
    #[error("row {id} out of range 1..={max}")]
    OutOfRange { id: u64, max: u64 },
    #[error("unpruned product {size} exceeds oracle limit {limit}")]
    InstanceTooLarge { size: u64, limit: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Assignment {
    pub factor_id: String,
    pub state: String,
}

/// One consistent state assignment for every factor of a type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Situation {
    pub assignments: Vec<Assignment>,
    ordinals: Vec<usize>,
}

impl Situation {
    /// State positions in declared order, one per factor.
    pub fn ordinals(&self) -> &[usize] {
        &self.ordinals
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.assignments.iter().map(|a| a.state.as_str())
    }

    pub fn state_of(&self, factor_id: &str) -> Option<&str> {
        self.assignments
            .iter()
            .find(|a| a.factor_id == factor_id)
            .map(|a| a.state.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub factor_id: String,
    pub factor_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SituationGrid {
    pub type_name: String,
    pub columns: Vec<Column>,
    radices: Vec<usize>,
    pub rows: Vec<Situation>,
}

impl SituationGrid {
    pub fn len(&self) -> u64 {
        self.rows.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    /// Row by 1-based ID.
    pub fn row(&self, id: u64) -> Result<&Situation, GridError> {
        id.checked_sub(1)
            .and_then(|i| self.rows.get(i as usize))
            .ok_or(GridError::OutOfRange {
                id,
                max: self.len(),
            })
    }

    /// Position of a situation in the unpruned mixed-radix space.
    pub fn key(&self, situation: &Situation) -> u64 {
        mixed_radix_key(&self.radices, &situation.ordinals)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &Situation)> {
        self.rows.iter().enumerate().map(|(i, r)| (i as u64 + 1, r))
    }

    /// CSV with header `ID,<factor name>,...` and one line per row.
    pub fn to_csv(&self) -> String {
        self.rows_to_csv(self.iter())
    }

    pub(crate) fn rows_to_csv<'a>(&'a self, rows: impl Iterator<Item = (u64, &'a Situation)>) -> String {
        let mut out = String::from("ID");
        for c in &self.columns {
            out.push(',');
            out.push_str(&csv_field(&c.factor_name));
        }
        out.push('\n');
        for (id, row) in rows {
            out.push_str(&id.to_string());
            for label in row.labels() {
                out.push(',');
                out.push_str(&csv_field(label));
            }
            out.push('\n');
        }
        out
    }

    /// JSON array of `{id, assignments}` objects.
    pub fn to_json(&self) -> Vec<u8> {
        #[derive(Serialize)]
        struct Row<'a> {
            id: u64,
            assignments: &'a [Assignment],
        }
        let rows: Vec<Row> = self
            .iter()
            .map(|(id, r)| Row {
                id,
                assignments: &r.assignments,
            })
            .collect();
        let mut out = serde_json::to_vec_pretty(&rows).expect("grid serialization is infallible");
        out.push(b'\n');
        out
    }
}

/// RFC 4180 quoting, applied only when the field needs it.
pub(crate) fn csv_field(field: &str) -> std::borrow::Cow<'_, str> {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\"")).into()
    } else {
        field.into()
    }
}

pub(crate) fn mixed_radix_key(radices: &[usize], digits: &[usize]) -> u64 {
    radices
        .iter()
        .zip(digits)
        .fold(0u64, |acc, (&r, &d)| acc * r as u64 + d as u64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GridStats {
    pub type_name: String,
    pub unpruned_count: u64,
    pub pruned_count: u64,
    pub pruned_away: u64,
}

#[derive(Debug, Clone, Copy)]
struct Rule {
    kind: ConstraintKind,
    source: usize,
    target: usize,
}

/// One factor type lowered to state ordinals, ready for enumeration.
#[derive(Debug, Clone)]
pub struct CompiledType {
    type_name: String,
    columns: Vec<Column>,
    labels: Vec<Vec<String>>,
    radices: Vec<usize>,
    baseline: Vec<usize>,
    /// `closing[i]`: rules whose later endpoint is factor `i`.
    closing: Vec<Vec<Rule>>,
    constrained: Vec<bool>,
}

impl CompiledType {
    pub fn new(model: &NoiseFactorModel, type_name: &str) -> Result<Self, GridError> {
        let ty = model
            .factor_type(type_name)
            .ok_or_else(|| GridError::UnknownType(type_name.to_owned()))?;
        let n = ty.factors.len();
        let mut closing = vec![Vec::new(); n];
        let mut constrained = vec![false; n];
        for c in model.intra_type_constraints(type_name) {
            let (Some(source), Some(target)) =
                (ty.factor_position(&c.source), ty.factor_position(&c.target))
            else {
                continue;
            };
            if source == target {
                continue;
            }
            closing[source.max(target)].push(Rule {
                kind: c.kind,
                source,
                target,
            });
            constrained[source] = true;
            constrained[target] = true;
        }
        Ok(Self {
            type_name: ty.name.clone(),
            columns: ty
                .factors
                .iter()
                .map(|f| Column {
                    factor_id: f.id.clone(),
                    factor_name: f.name.clone(),
                })
                .collect(),
            labels: ty
                .factors
                .iter()
                .map(|f| f.states.iter().map(|s| s.label.clone()).collect())
                .collect(),
            radices: ty.factors.iter().map(|f| f.cardinality()).collect(),
            baseline: ty.factors.iter().map(|f| f.baseline_index()).collect(),
            closing,
            constrained,
        })
    }

    pub fn type_name(&self) -> &str {
        &self.type_name
    }

    pub fn unpruned_count(&self) -> u64 {
        self.radices
            .iter()
            .fold(1u64, |acc, &r| acc.saturating_mul(r as u64))
    }

    /// Rules closing at `pos` hold for the current prefix.
    fn closes_ok(&self, digits: &[usize], pos: usize) -> bool {
        self.closing[pos].iter().all(|r| {
            let s = digits[r.source] != self.baseline[r.source];
            let t = digits[r.target] != self.baseline[r.target];
            r.kind.holds(s, t)
        })
    }

    fn situation(&self, digits: &[usize]) -> Situation {
        Situation {
            assignments: self
                .columns
                .iter()
                .zip(digits)
                .enumerate()
                .map(|(i, (c, &d))| Assignment {
                    factor_id: c.factor_id.clone(),
                    state: self.labels[i][d].clone(),
                })
                .collect(),
            ordinals: digits.to_vec(),
        }
    }

    fn walk(&self, digits: &mut Vec<usize>, pos: usize, out: &mut Vec<Situation>) {
        if pos == self.radices.len() {
            out.push(self.situation(digits));
            return;
        }
        for s in 0..self.radices[pos] {
            digits[pos] = s;
            if self.closes_ok(digits, pos) {
                self.walk(digits, pos + 1, out);
            }
        }
    }

    /// Number of valid completions of `digits[..pos]`. Unconstrained factors
    /// contribute their radix without being enumerated.
    fn completions(&self, digits: &mut [usize], pos: usize) -> u64 {
        if pos == self.radices.len() {
            return 1;
        }
        if !self.constrained[pos] {
            digits[pos] = self.baseline[pos];
            return (self.radices[pos] as u64).saturating_mul(self.completions(digits, pos + 1));
        }
        let mut total = 0u64;
        for s in 0..self.radices[pos] {
            digits[pos] = s;
            if self.closes_ok(digits, pos) {
                total = total.saturating_add(self.completions(digits, pos + 1));
            }
        }
        total
    }

    pub fn pruned_count(&self) -> u64 {
        let mut digits = vec![0; self.radices.len()];
        self.completions(&mut digits, 0)
    }

    fn grid(&self, rows: Vec<Situation>) -> SituationGrid {
        SituationGrid {
            type_name: self.type_name.clone(),
            columns: self.columns.clone(),
            radices: self.radices.clone(),
            rows,
        }
    }

    pub fn expand(&self) -> SituationGrid {
        let mut rows = Vec::new();
        let mut digits = vec![0; self.radices.len()];
        self.walk(&mut digits, 0, &mut rows);
        self.grid(rows)
    }

    /// Splits on the first factor's states; chunks are concatenated in
    /// state order so the result equals [`CompiledType::expand`].
    pub fn expand_parallel(&self) -> SituationGrid {
        if self.radices.is_empty() {
            return self.expand();
        }
        let chunks: Vec<Vec<Situation>> = (0..self.radices[0])
            .into_par_iter()
            .map(|s| {
                let mut digits = vec![0; self.radices.len()];
                digits[0] = s;
                let mut rows = Vec::new();
                if self.closes_ok(&digits, 0) {
                    self.walk(&mut digits, 1, &mut rows);
                }
                rows
            })
            .collect();
        self.grid(chunks.into_iter().flatten().collect())
    }

    /// The `id`-th valid row, found by skip-counting over the mixed-radix
    /// space rather than materializing earlier rows.
    pub fn row_by_id(&self, id: u64) -> Result<Situation, GridError> {
        let max = self.pruned_count();
        if id == 0 || id > max {
            return Err(GridError::OutOfRange { id, max });
        }
        let mut remaining = id;
        let mut digits = vec![0; self.radices.len()];
        for pos in 0..self.radices.len() {
            let mut chosen = false;
            for s in 0..self.radices[pos] {
                digits[pos] = s;
                if !self.closes_ok(&digits, pos) {
                    continue;
                }
                let mut scratch = digits.clone();
                let below = self.completions(&mut scratch, pos + 1);
                if remaining <= below {
                    chosen = true;
                    break;
                }
                remaining -= below;
            }
            debug_assert!(chosen, "skip-count exhausted position {pos}");
        }
        Ok(self.situation(&digits))
    }
}

/// Lazily indexed grid: knows its size, produces rows on demand.
#[derive(Debug, Clone)]
pub struct LazyGrid {
    compiled: CompiledType,
    len: u64,
}

impl LazyGrid {
    pub fn new(model: &NoiseFactorModel, type_name: &str) -> Result<Self, GridError> {
        let compiled = CompiledType::new(model, type_name)?;
        let len = compiled.pruned_count();
        Ok(Self { compiled, len })
    }

    pub fn type_name(&self) -> &str {
        self.compiled.type_name()
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn columns(&self) -> &[Column] {
        &self.compiled.columns
    }

    pub fn row_by_id(&self, id: u64) -> Result<Situation, GridError> {
        if id == 0 || id > self.len {
            return Err(GridError::OutOfRange { id, max: self.len });
        }
        self.compiled.row_by_id(id)
    }
}

/// Expands one factor type into its pruned situation grid.
pub fn expand(model: &NoiseFactorModel, type_name: &str) -> Result<SituationGrid, GridError> {
    Ok(CompiledType::new(model, type_name)?.expand())
}

pub fn expand_parallel(model: &NoiseFactorModel, type_name: &str) -> Result<SituationGrid, GridError> {
    Ok(CompiledType::new(model, type_name)?.expand_parallel())
}

/// Grid sizes without materializing rows.
pub fn count(model: &NoiseFactorModel, type_name: &str) -> Result<GridStats, GridError> {
    let compiled = CompiledType::new(model, type_name)?;
    let unpruned = compiled.unpruned_count();
    let pruned = compiled.pruned_count();
    Ok(GridStats {
        type_name: compiled.type_name.clone(),
        unpruned_count: unpruned,
        pruned_count: pruned,
        pruned_away: unpruned - pruned,
    })
}

pub fn row_by_id(grid: &LazyGrid, id: u64) -> Result<Situation, GridError> {
    grid.row_by_id(id)
}

/// Reference enumeration: walks the whole Cartesian product with an
/// odometer and keeps rows on which every same-type hard constraint,
/// evaluated on state labels, holds.
pub fn oracle_expand(model: &NoiseFactorModel, type_name: &str) -> Result<SituationGrid, GridError> {
    let ty = model
        .factor_type(type_name)
        .ok_or_else(|| GridError::UnknownType(type_name.to_owned()))?;
    let size = ty.unpruned_count();
    if size > ORACLE_LIMIT {
        return Err(GridError::InstanceTooLarge {
            size,
            limit: ORACLE_LIMIT,
        });
    }
    let hard: Vec<_> = model
        .constraints
        .iter()
        .filter(|c| matches!(c.kind, ConstraintKind::Requires | ConstraintKind::Excludes))
        .filter_map(|c| Some((c, ty.factor(&c.source)?, ty.factor(&c.target)?)))
        .collect();

    let n = ty.factors.len();
    let mut digits = vec![0usize; n];
    let mut rows = Vec::new();
    for _ in 0..size {
        let label = |id: &str| {
            let i = ty.factor_position(id).unwrap();
            ty.factors[i].states[digits[i]].label.as_str()
        };
        let ok = hard.iter().all(|(c, sf, tf)| {
            let s = active(sf, label(&c.source)).unwrap();
            let t = active(tf, label(&c.target)).unwrap();
            match c.kind {
                ConstraintKind::Requires => !s || t,
                ConstraintKind::Excludes => !s || !t,
                ConstraintKind::Note => true,
            }
        });
        if ok {
            rows.push(Situation {
                assignments: ty
                    .factors
                    .iter()
                    .zip(&digits)
                    .map(|(f, &d)| Assignment {
                        factor_id: f.id.clone(),
                        state: f.states[d].label.clone(),
                    })
                    .collect(),
                ordinals: digits.clone(),
            });
        }
        // odometer, rightmost digit fastest
        for i in (0..n).rev() {
            digits[i] += 1;
            if digits[i] < ty.factors[i].states.len() {
                break;
            }
            digits[i] = 0;
        }
    }

    Ok(SituationGrid {
        type_name: ty.name.clone(),
        columns: ty
            .factors
            .iter()
            .map(|f| Column {
                factor_id: f.id.clone(),
                factor_name: f.name.clone(),
            })
            .collect(),
        radices: ty.factors.iter().map(|f| f.cardinality()).collect(),
        rows,
    })
}

/// Expanded grids for several types of one model, in model order.
#[derive(Debug, Clone, Default)]
pub struct GridSet {
    grids: Vec<SituationGrid>,
}

impl GridSet {
    pub fn expand_all(model: &NoiseFactorModel) -> Self {
        let grids = model
            .types
            .iter()
            .map(|t| expand(model, &t.name).expect("type taken from the model"))
            .collect();
        Self { grids }
    }

    pub fn insert(&mut self, grid: SituationGrid) {
        match self.grids.iter_mut().find(|g| g.type_name == grid.type_name) {
            Some(slot) => *slot = grid,
            None => self.grids.push(grid),
        }
    }

    pub fn get(&self, type_name: &str) -> Option<&SituationGrid> {
        self.grids.iter().find(|g| g.type_name == type_name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &SituationGrid> {
        self.grids.iter()
    }
}

impl FromIterator<SituationGrid> for GridSet {
    fn from_iter<I: IntoIterator<Item = SituationGrid>>(iter: I) -> Self {
        let mut set = GridSet::default();
        for g in iter {
            set.insert(g);
        }
        set
    }
}
