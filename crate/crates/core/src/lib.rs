//! Situation coverage grids for camera noise-factor models, and robustness
//! safety requirements qualified by bounded operational-context subsets
//! (PODs).
//!
//! The pipeline runs in three steps:
//!
//! 1. [`model`]: declare factor types, factors, discrete states and the
//!    dependencies between factors; [`modelio`] reads and writes them as JSON.
//! 2. [`grid`]: expand each factor type into its pruned, ordered grid of
//!    situations.
//! 3. [`pods`] and [`requirements`]: bind requirement PODs to grid rows,
//!    render the requirements and check that the PODs cover every situation.

pub mod grid;
pub mod model;
pub mod modelio;
pub mod pods;
pub mod requirements;

#[cfg(feature = "proptest")]
pub mod strategy;

pub use grid::{
    count, expand, expand_parallel, oracle_expand, row_by_id, GridError, GridSet, GridStats,
    LazyGrid, Situation, SituationGrid,
};
pub use model::{
    active, filter_relevant, validate, Channel, Constraint, ConstraintKind, Factor, FactorType,
    IssueCode, ModelError, NoiseFactorModel, StateDef, ValidationIssue,
};
pub use modelio::{
    parse_model, parse_requirements, reference_model, serialize_model, serialize_requirements,
    ParseError, PodSelector, RequirementSpec, RowSelector,
};
pub use pods::{bind_pods, sample, GlobalIndexSpace, Pod, PodError, SampleSpace};
pub use requirements::{
    bind_requirements, completeness, coverage_report, emit, render_requirement, CoverageReport,
    Format, RequirementsError, RobustnessRequirement,
};
