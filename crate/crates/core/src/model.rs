//! Noise-factor taxonomy: factor types, factors, discrete states and the
//! dependencies between factors.
//!
//! A model is organised in three levels (type, factor, state). Every factor
//! has exactly one baseline state (the non-degraded "normal" condition); a
//! factor is *active* whenever it is assigned any other state. Hard
//! constraints (`requires`, `excludes`) are defined over activity, which lets
//! them apply uniformly to binary and categorical factors.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Camera output channel a noise factor can affect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Channel {
    /// Frame rate.
    #[serde(rename = "FR")]
    FrameRate,
    /// Pixel intensity.
    #[serde(rename = "I_RGB")]
    PixelIntensity,
    /// Pixel position.
    #[serde(rename = "P_XY")]
    PixelPosition,
    /// Dropped frames.
    #[serde(rename = "DF")]
    DroppedFrames,
}

impl Channel {
    pub const ALL: [Channel; 4] = [
        Channel::FrameRate,
        Channel::PixelIntensity,
        Channel::PixelPosition,
        Channel::DroppedFrames,
    ];

    /// Channels that carry the spatial or visual image content a perception
    /// model consumes.
    pub const IMAGE_CONTENT: [Channel; 2] = [Channel::PixelIntensity, Channel::PixelPosition];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::FrameRate => "FR",
            Channel::PixelIntensity => "I_RGB",
            Channel::PixelPosition => "P_XY",
            Channel::DroppedFrames => "DF",
        }
    }

    pub fn affects_image_content(self) -> bool {
        Self::IMAGE_CONTENT.contains(&self)
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateDef {
    pub label: String,
    pub baseline: bool,
}

impl StateDef {
    pub fn new(label: impl Into<String>, baseline: bool) -> Self {
        Self {
            label: label.into(),
            baseline,
        }
    }

    pub fn baseline(label: impl Into<String>) -> Self {
        Self::new(label, true)
    }

    pub fn degraded(label: impl Into<String>) -> Self {
        Self::new(label, false)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    pub id: String,
    pub name: String,
    /// Declared order defines the enumeration ordinal of each state.
    pub states: Vec<StateDef>,
    /// `None` means the factor has not been annotated with channel effects yet.
    pub channels: Option<BTreeSet<Channel>>,
}

impl Factor {
    pub fn new(id: impl Into<String>, name: impl Into<String>, states: Vec<StateDef>) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            states,
            channels: None,
        }
    }

    pub fn with_channels(mut self, channels: impl IntoIterator<Item = Channel>) -> Self {
        self.channels = Some(channels.into_iter().collect());
        self
    }

    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    /// Position of the baseline state. Only meaningful on validated factors;
    /// falls back to the first state if no state is flagged.
    pub fn baseline_index(&self) -> usize {
        self.states.iter().position(|s| s.baseline).unwrap_or(0)
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s.label == label)
    }

    /// Whether `label` names a non-baseline state of this factor.
    pub fn is_active(&self, label: &str) -> Result<bool, ModelError> {
        self.states
            .iter()
            .find(|s| s.label == label)
            .map(|s| !s.baseline)
            .ok_or_else(|| ModelError::UnknownState {
                factor: self.id.clone(),
                label: label.to_owned(),
            })
    }
}

/// Canonical activity predicate used by constraint semantics.
pub fn active(factor: &Factor, state_label: &str) -> Result<bool, ModelError> {
    factor.is_active(state_label)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorType {
    pub name: String,
    /// Declared order defines grid column order and enumeration nesting.
    pub factors: Vec<Factor>,
}

impl FactorType {
    pub fn new(name: impl Into<String>, factors: Vec<Factor>) -> Self {
        Self {
            name: name.into(),
            factors,
        }
    }

    pub fn factor(&self, id: &str) -> Option<&Factor> {
        self.factors.iter().find(|f| f.id == id)
    }

    pub fn factor_position(&self, id: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.id == id)
    }

    /// Size of the unconstrained Cartesian product, saturating at `u64::MAX`.
    pub fn unpruned_count(&self) -> u64 {
        self.factors
            .iter()
            .fold(1u64, |acc, f| acc.saturating_mul(f.cardinality() as u64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    /// `active(source) => active(target)`
    Requires,
    /// `!(active(source) && active(target))`
    Excludes,
    /// Documentation only; never prunes.
    Note,
}

impl ConstraintKind {
    pub fn is_hard(self) -> bool {
        !matches!(self, ConstraintKind::Note)
    }

    /// Evaluates the constraint given the activity of its two endpoints.
    pub fn holds(self, source_active: bool, target_active: bool) -> bool {
        match self {
            ConstraintKind::Requires => !source_active || target_active,
            ConstraintKind::Excludes => !(source_active && target_active),
            ConstraintKind::Note => true,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintKind::Requires => "requires",
            ConstraintKind::Excludes => "excludes",
            ConstraintKind::Note => "note",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub source: String,
    pub target: String,
    pub description: String,
}

impl Constraint {
    pub fn new(kind: ConstraintKind, source: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            kind,
            source: source.into(),
            target: target.into(),
            description: String::new(),
        }
    }

    pub fn requires(source: impl Into<String>, target: impl Into<String>) -> Self {
        Self::new(ConstraintKind::Requires, source, target)
    }

    pub fn excludes(source: impl Into<String>, target: impl Into<String>) -> Self {
        Self::new(ConstraintKind::Excludes, source, target)
    }

    pub fn note(source: impl Into<String>, target: impl Into<String>) -> Self {
        Self::new(ConstraintKind::Note, source, target)
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoiseFactorModel {
    pub name: String,
    pub version: String,
    pub types: Vec<FactorType>,
    pub constraints: Vec<Constraint>,
}

impl NoiseFactorModel {
    pub fn new(name: impl Into<String>, version: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            version: version.into(),
            types: Vec::new(),
            constraints: Vec::new(),
        }
    }

    pub fn factor_type(&self, name: &str) -> Option<&FactorType> {
        self.types.iter().find(|t| t.name == name)
    }

    pub fn type_position(&self, name: &str) -> Option<usize> {
        self.types.iter().position(|t| t.name == name)
    }

    pub fn factors(&self) -> impl Iterator<Item = &Factor> {
        self.types.iter().flat_map(|t| t.factors.iter())
    }

    pub fn factor(&self, id: &str) -> Option<&Factor> {
        self.factors().find(|f| f.id == id)
    }

    /// (type index, factor index within the type) of a factor id.
    pub fn locate(&self, id: &str) -> Option<(usize, usize)> {
        self.types
            .iter()
            .enumerate()
            .find_map(|(ti, t)| t.factor_position(id).map(|fi| (ti, fi)))
    }

    pub fn factor_count(&self) -> usize {
        self.types.iter().map(|t| t.factors.len()).sum()
    }

    /// Hard constraints whose endpoints both belong to `type_name`.
    pub fn intra_type_constraints<'a>(
        &'a self,
        type_name: &'a str,
    ) -> impl Iterator<Item = &'a Constraint> + 'a {
        let ty = self.factor_type(type_name);
        self.constraints.iter().filter(move |c| {
            c.kind.is_hard()
                && ty.is_some_and(|t| {
                    t.factor_position(&c.source).is_some() && t.factor_position(&c.target).is_some()
                })
        })
    }

    /// Hard constraints whose endpoints live in different types.
    pub fn cross_type_constraints(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter().filter(move |c| {
            c.kind.is_hard()
                && match (self.locate(&c.source), self.locate(&c.target)) {
                    (Some((a, _)), Some((b, _))) => a != b,
                    _ => false,
                }
        })
    }

    pub fn without_notes(&self) -> Self {
        let mut out = self.clone();
        out.constraints.retain(|c| c.kind.is_hard());
        out
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("factor `{factor}` has no state labelled `{label}`")]
    UnknownState { factor: String, label: String },
    #[error("factor `{0}` has no channel tags")]
    MissingChannels(String),
}

/// Machine-readable validation issue code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IssueCode {
    NoTypes,
    DupTypeName,
    EmptyType,
    DupFactorId,
    TooFewStates,
    EmptyStateLabel,
    DupStateLabel,
    NoBaseline,
    MultiBaseline,
    BaselineNotFirst,
    UnknownFactorRef,
    SelfConstraint,
}

impl IssueCode {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueCode::NoTypes => "NO_TYPES",
            IssueCode::DupTypeName => "DUP_TYPE_NAME",
            IssueCode::EmptyType => "EMPTY_TYPE",
            IssueCode::DupFactorId => "DUP_FACTOR_ID",
            IssueCode::TooFewStates => "TOO_FEW_STATES",
            IssueCode::EmptyStateLabel => "EMPTY_STATE_LABEL",
            IssueCode::DupStateLabel => "DUP_STATE_LABEL",
            IssueCode::NoBaseline => "NO_BASELINE",
            IssueCode::MultiBaseline => "MULTI_BASELINE",
            IssueCode::BaselineNotFirst => "BASELINE_NOT_FIRST",
            IssueCode::UnknownFactorRef => "UNKNOWN_FACTOR_REF",
            IssueCode::SelfConstraint => "SELF_CONSTRAINT",
        }
    }
}

impl fmt::Display for IssueCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    pub code: IssueCode,
    /// Path to the offending element, e.g. `types[2].factors[4].states`.
    pub path: String,
    pub message: String,
}

impl ValidationIssue {
    fn new(code: IssueCode, path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code,
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.code, self.path, self.message)
    }
}

/// Checks every structural invariant and reports one issue per violation.
pub fn validate(model: &NoiseFactorModel) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();

    if model.types.is_empty() {
        issues.push(ValidationIssue::new(
            IssueCode::NoTypes,
            "types",
            "model declares no factor types",
        ));
    }

    let mut type_names = HashSet::new();
    let mut factor_ids: HashMap<&str, String> = HashMap::new();

    for (ti, ty) in model.types.iter().enumerate() {
        let tpath = format!("types[{ti}]");
        if !type_names.insert(ty.name.as_str()) {
            issues.push(ValidationIssue::new(
                IssueCode::DupTypeName,
                format!("{tpath}.name"),
                format!("factor type `{}` declared more than once", ty.name),
            ));
        }
        if ty.factors.is_empty() {
            issues.push(ValidationIssue::new(
                IssueCode::EmptyType,
                format!("{tpath}.factors"),
                format!("factor type `{}` has no factors", ty.name),
            ));
        }

        for (fi, factor) in ty.factors.iter().enumerate() {
            let fpath = format!("{tpath}.factors[{fi}]");
            if let Some(first) = factor_ids.get(factor.id.as_str()) {
                issues.push(ValidationIssue::new(
                    IssueCode::DupFactorId,
                    format!("{fpath}.id"),
                    format!("factor id `{}` already used at {first}", factor.id),
                ));
            } else {
                factor_ids.insert(&factor.id, fpath.clone());
            }
            validate_states(factor, &fpath, &mut issues);
        }
    }

    for (ci, c) in model.constraints.iter().enumerate() {
        let cpath = format!("constraints[{ci}]");
        for (end, id) in [("source", &c.source), ("target", &c.target)] {
            if !factor_ids.contains_key(id.as_str()) {
                issues.push(ValidationIssue::new(
                    IssueCode::UnknownFactorRef,
                    format!("{cpath}.{end}"),
                    format!("constraint references unknown factor `{id}`"),
                ));
            }
        }
        if c.source == c.target {
            issues.push(ValidationIssue::new(
                IssueCode::SelfConstraint,
                cpath,
                format!("constraint relates factor `{}` to itself", c.source),
            ));
        }
    }

    issues
}

fn validate_states(factor: &Factor, fpath: &str, issues: &mut Vec<ValidationIssue>) {
    let spath = format!("{fpath}.states");
    if factor.states.len() < 2 {
        issues.push(ValidationIssue::new(
            IssueCode::TooFewStates,
            spath.clone(),
            format!(
                "factor `{}` has {} state(s), at least 2 required",
                factor.id,
                factor.states.len()
            ),
        ));
    }

    let mut labels = HashSet::new();
    for (si, s) in factor.states.iter().enumerate() {
        if s.label.is_empty() {
            issues.push(ValidationIssue::new(
                IssueCode::EmptyStateLabel,
                format!("{spath}[{si}].label"),
                format!("factor `{}` has an empty state label", factor.id),
            ));
        } else if !labels.insert(s.label.as_str()) {
            issues.push(ValidationIssue::new(
                IssueCode::DupStateLabel,
                format!("{spath}[{si}].label"),
                format!("factor `{}` repeats state `{}`", factor.id, s.label),
            ));
        }
    }

    match factor.states.iter().filter(|s| s.baseline).count() {
        0 => issues.push(ValidationIssue::new(
            IssueCode::NoBaseline,
            spath,
            format!("factor `{}` has no baseline state", factor.id),
        )),
        1 => {
            if !factor.states[0].baseline {
                issues.push(ValidationIssue::new(
                    IssueCode::BaselineNotFirst,
                    spath,
                    format!("factor `{}` must declare its baseline state first", factor.id),
                ));
            }
        }
        n => issues.push(ValidationIssue::new(
            IssueCode::MultiBaseline,
            spath,
            format!("factor `{}` has {n} baseline states", factor.id),
        )),
    }
}

/// Keeps only the factors that affect pixel intensity or pixel position.
///
/// Factors whose effects are limited to frame rate or dropped frames are
/// removed, along with constraints that mention them and any type left
/// empty. Fails if a factor has not been annotated with channel tags.
pub fn filter_relevant(model: &NoiseFactorModel) -> Result<NoiseFactorModel, ModelError> {
    if let Some(f) = model
        .factors()
        .find(|f| f.channels.as_ref().is_none_or(|c| c.is_empty()))
    {
        return Err(ModelError::MissingChannels(f.id.clone()));
    }

    let relevant = |f: &Factor| {
        f.channels
            .as_ref()
            .is_some_and(|c| c.iter().any(|ch| ch.affects_image_content()))
    };

    let types: Vec<FactorType> = model
        .types
        .iter()
        .map(|t| FactorType {
            name: t.name.clone(),
            factors: t.factors.iter().filter(|f| relevant(f)).cloned().collect(),
        })
        .filter(|t| !t.factors.is_empty())
        .collect();

    let kept: HashSet<&str> = types
        .iter()
        .flat_map(|t| t.factors.iter().map(|f| f.id.as_str()))
        .collect();
    let constraints = model
        .constraints
        .iter()
        .filter(|c| kept.contains(c.source.as_str()) && kept.contains(c.target.as_str()))
        .cloned()
        .collect();

    Ok(NoiseFactorModel {
        name: model.name.clone(),
        version: model.version.clone(),
        types,
        constraints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modelio::reference_model;

    fn binary(id: &str) -> Factor {
        Factor::new(
            id,
            id,
            vec![StateDef::baseline("False"), StateDef::degraded("True")],
        )
        .with_channels([Channel::PixelIntensity])
    }

    fn single_type(factors: Vec<Factor>) -> NoiseFactorModel {
        let mut m = NoiseFactorModel::new("m", "1");
        m.types.push(FactorType::new("T", factors));
        m
    }

    fn codes(issues: &[ValidationIssue]) -> Vec<IssueCode> {
        issues.iter().map(|i| i.code).collect()
    }

    #[test]
    fn reference_model_is_clean() {
        assert_eq!(validate(&reference_model()), vec![]);
    }

    #[test]
    fn missing_baseline_is_reported_at_the_factor() {
        let mut f = binary("x");
        f.states[0].baseline = false;
        let issues = validate(&single_type(vec![f]));
        assert_eq!(codes(&issues), vec![IssueCode::NoBaseline]);
        assert_eq!(issues[0].path, "types[0].factors[0].states");
    }

    #[test]
    fn two_baselines() {
        let mut f = binary("x");
        f.states[1].baseline = true;
        assert_eq!(codes(&validate(&single_type(vec![f]))), vec![IssueCode::MultiBaseline]);
    }

    #[test]
    fn baseline_must_come_first() {
        let mut f = binary("x");
        f.states.swap(0, 1);
        assert_eq!(
            codes(&validate(&single_type(vec![f]))),
            vec![IssueCode::BaselineNotFirst]
        );
    }

    #[test]
    fn self_constraint() {
        let mut m = single_type(vec![binary("X"), binary("Y")]);
        m.constraints.push(Constraint::requires("X", "X"));
        assert_eq!(codes(&validate(&m)), vec![IssueCode::SelfConstraint]);
    }

    #[test]
    fn structural_violations() {
        let mut m = single_type(vec![binary("a"), binary("a")]);
        m.types[0].factors[1].states = vec![StateDef::baseline("only")];
        m.types.push(FactorType::new("T", vec![]));
        m.types[0].factors[0]
            .states
            .push(StateDef::degraded("True"));
        m.types[0].factors[0].states.push(StateDef::degraded(""));
        m.constraints.push(Constraint::excludes("a", "ghost"));
        let got = codes(&validate(&m));
        assert_eq!(
            got,
            vec![
                IssueCode::DupStateLabel,
                IssueCode::EmptyStateLabel,
                IssueCode::DupFactorId,
                IssueCode::TooFewStates,
                IssueCode::DupTypeName,
                IssueCode::EmptyType,
                IssueCode::UnknownFactorRef,
            ]
        );
    }

    #[test]
    fn no_types() {
        let m = NoiseFactorModel::new("m", "1");
        assert_eq!(codes(&validate(&m)), vec![IssueCode::NoTypes]);
    }

    #[test]
    fn activity_is_relative_to_baseline() {
        let model = reference_model();
        let alignment = model.factor("alignment").unwrap();
        let obstructions = model.factor("obstructions").unwrap();
        assert_eq!(active(alignment, "False"), Ok(false));
        assert_eq!(active(obstructions, "High"), Ok(true));
        assert_eq!(
            active(obstructions, "Medium"),
            Err(ModelError::UnknownState {
                factor: "obstructions".into(),
                label: "Medium".into()
            })
        );
    }

    #[test]
    fn exactly_one_inactive_state_per_reference_factor() {
        for f in reference_model().factors() {
            let inactive = f
                .states
                .iter()
                .filter(|s| !active(f, &s.label).unwrap())
                .count();
            assert_eq!(inactive, 1, "{}", f.id);
        }
    }

    #[test]
    fn filter_drops_frame_only_factors() {
        let df_only = binary("df").with_channels([Channel::DroppedFrames]);
        let mixed = binary("mixed").with_channels([Channel::FrameRate, Channel::PixelIntensity]);
        let mut m = single_type(vec![df_only, mixed]);
        m.types
            .push(FactorType::new("Gone", vec![binary("fr").with_channels([Channel::FrameRate])]));
        m.constraints.push(Constraint::requires("df", "mixed"));
        m.constraints.push(Constraint::note("mixed", "fr"));

        let out = filter_relevant(&m).unwrap();
        assert_eq!(out.types.len(), 1);
        let ids: Vec<_> = out.factors().map(|f| f.id.as_str()).collect();
        assert_eq!(ids, ["mixed"]);
        assert!(out.constraints.is_empty());
    }

    #[test]
    fn filter_requires_channel_tags() {
        let mut f = binary("x");
        f.channels = None;
        assert_eq!(
            filter_relevant(&single_type(vec![f])),
            Err(ModelError::MissingChannels("x".into()))
        );
        let mut g = binary("y");
        g.channels = Some(BTreeSet::new());
        assert_eq!(
            filter_relevant(&single_type(vec![g])),
            Err(ModelError::MissingChannels("y".into()))
        );
    }

    #[test]
    fn filter_keeps_reference_model_intact() {
        let model = reference_model();
        assert_eq!(filter_relevant(&model).unwrap(), model);
    }

    #[test]
    fn constraint_truth_tables() {
        use ConstraintKind::*;
        let table = [(false, false), (false, true), (true, false), (true, true)];
        let req: Vec<_> = table.iter().map(|&(s, t)| Requires.holds(s, t)).collect();
        let exc: Vec<_> = table.iter().map(|&(s, t)| Excludes.holds(s, t)).collect();
        assert_eq!(req, [true, true, false, true]);
        assert_eq!(exc, [true, true, true, false]);
        assert!(table.iter().all(|&(s, t)| Note.holds(s, t)));
    }
}
