//! JSON documents for noise-factor models and robustness requirements, and
//! the bundled reference model.
//!
//! Output is deterministic: keys in schema order, arrays in model order,
//! two-space indentation, LF line endings and a trailing newline.

use std::collections::HashSet;
use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    validate, Channel, Constraint, ConstraintKind, Factor, FactorType, NoiseFactorModel, StateDef,
    ValidationIssue,
};

/// The bundled camera noise-factor model (22 factors in five types).
pub const REFERENCE_MODEL_JSON: &str = include_str!("../data/reference_model.json");

/// Parses the bundled reference model.
pub fn reference_model() -> NoiseFactorModel {
    parse_model(REFERENCE_MODEL_JSON.as_bytes()).expect("bundled reference model is valid")
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at `{path}`: {reason}")]
    Schema { path: String, reason: String },
    #[error("model failed validation with {} issue(s)", .0.len())]
    ValidationFailed(Vec<ValidationIssue>),
    #[error("duplicate requirement id `{0}`")]
    DuplicateRequirementId(String),
}

fn from_json<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ParseError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let value: T = serde_path_to_error::deserialize(&mut de).map_err(|err| {
        let path = err.path().to_string();
        classify(err.into_inner(), path)
    })?;
    de.end().map_err(|err| classify(err, String::from(".")))?;
    Ok(value)
}

fn classify(err: serde_json::Error, path: String) -> ParseError {
    if err.is_data() {
        ParseError::Schema {
            path,
            reason: strip_position(&err),
        }
    } else {
        ParseError::Syntax {
            line: err.line(),
            column: err.column(),
            message: strip_position(&err),
        }
    }
}

fn strip_position(err: &serde_json::Error) -> String {
    let text = err.to_string();
    match text.rfind(" at line ") {
        Some(idx) => text[..idx].to_owned(),
        None => text,
    }
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("document serialization is infallible");
    out.push(b'\n');
    out
}

// Wire format for models.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    model_name: String,
    version: String,
    types: Vec<TypeDoc>,
    #[serde(default)]
    constraints: Vec<ConstraintDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TypeDoc {
    name: String,
    factors: Vec<FactorDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorDoc {
    id: String,
    name: String,
    states: Vec<StateDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    channels: Option<Vec<Channel>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateDoc {
    label: String,
    #[serde(default)]
    baseline: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintDoc {
    kind: ConstraintKind,
    source: String,
    target: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    description: String,
}

impl From<ModelDoc> for NoiseFactorModel {
    fn from(doc: ModelDoc) -> Self {
        NoiseFactorModel {
            name: doc.model_name,
            version: doc.version,
            types: doc
                .types
                .into_iter()
                .map(|t| FactorType {
                    name: t.name,
                    factors: t
                        .factors
                        .into_iter()
                        .map(|f| Factor {
                            id: f.id,
                            name: f.name,
                            states: f
                                .states
                                .into_iter()
                                .map(|s| StateDef::new(s.label, s.baseline))
                                .collect(),
                            channels: f.channels.map(|c| c.into_iter().collect()),
                        })
                        .collect(),
                })
                .collect(),
            constraints: doc
                .constraints
                .into_iter()
                .map(|c| Constraint {
                    kind: c.kind,
                    source: c.source,
                    target: c.target,
                    description: c.description,
                })
                .collect(),
        }
    }
}

impl From<&NoiseFactorModel> for ModelDoc {
    fn from(m: &NoiseFactorModel) -> Self {
        ModelDoc {
            model_name: m.name.clone(),
            version: m.version.clone(),
            types: m
                .types
                .iter()
                .map(|t| TypeDoc {
                    name: t.name.clone(),
                    factors: t
                        .factors
                        .iter()
                        .map(|f| FactorDoc {
                            id: f.id.clone(),
                            name: f.name.clone(),
                            states: f
                                .states
                                .iter()
                                .map(|s| StateDoc {
                                    label: s.label.clone(),
                                    baseline: s.baseline,
                                })
                                .collect(),
                            channels: f.channels.as_ref().map(|c| c.iter().copied().collect()),
                        })
                        .collect(),
                })
                .collect(),
            constraints: m
                .constraints
                .iter()
                .map(|c| ConstraintDoc {
                    kind: c.kind,
                    source: c.source.clone(),
                    target: c.target.clone(),
                    description: c.description.clone(),
                })
                .collect(),
        }
    }
}

/// Parses and validates a model document.
pub fn parse_model(bytes: &[u8]) -> Result<NoiseFactorModel, ParseError> {
    let doc: ModelDoc = from_json(bytes)?;
    let model = NoiseFactorModel::from(doc);
    let issues = validate(&model);
    if issues.is_empty() {
        Ok(model)
    } else {
        Err(ParseError::ValidationFailed(issues))
    }
}

pub fn serialize_model(model: &NoiseFactorModel) -> Vec<u8> {
    to_json(&ModelDoc::from(model))
}

// Requirements documents.

/// Which rows of a type's grid a POD selector picks, kept symbolic until
/// bound against an expanded grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowSelector {
    All,
    /// Closed interval `[lo, hi]`.
    Range(u64, u64),
    List(Vec<u64>),
}

impl fmt::Display for RowSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowSelector::All => f.write_str("all"),
            RowSelector::Range(lo, hi) => write!(f, "{lo}..={hi}"),
            RowSelector::List(ids) => {
                let parts: Vec<String> = ids.iter().map(u64::to_string).collect();
                write!(f, "[{}]", parts.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PodSelector {
    pub type_name: String,
    pub rows: RowSelector,
    /// Explicit POD label; generated as `PODs#<n>` when absent.
    pub label: Option<String>,
}

impl PodSelector {
    pub fn new(type_name: impl Into<String>, rows: RowSelector) -> Self {
        Self {
            type_name: type_name.into(),
            rows,
            label: None,
        }
    }
}

/// A requirement as written, before its POD selectors are bound to grids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequirementSpec {
    pub id: String,
    pub trigger: String,
    pub component: String,
    pub behaviour: String,
    pub pods: Vec<PodSelector>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RequirementsDoc {
    requirements: Vec<RequirementDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RequirementDoc {
    id: String,
    trigger: String,
    component: String,
    behaviour: String,
    pods: Vec<PodDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PodDoc {
    #[serde(rename = "type")]
    type_name: String,
    rows: RowsDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RowsDoc {
    List(Vec<u64>),
    Keyword(AllKeyword),
    Range { range: [u64; 2] },
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum AllKeyword {
    All,
}

fn schema(path: String, reason: impl Into<String>) -> ParseError {
    ParseError::Schema {
        path,
        reason: reason.into(),
    }
}

pub fn parse_requirements(bytes: &[u8]) -> Result<Vec<RequirementSpec>, ParseError> {
    let doc: RequirementsDoc = from_json(bytes)?;
    let mut seen = HashSet::new();
    let mut specs = Vec::with_capacity(doc.requirements.len());

    for (ri, req) in doc.requirements.into_iter().enumerate() {
        if !seen.insert(req.id.clone()) {
            return Err(ParseError::DuplicateRequirementId(req.id));
        }
        if req.pods.is_empty() {
            return Err(schema(
                format!("requirements[{ri}].pods"),
                "a requirement must cite at least one POD",
            ));
        }
        let mut pods = Vec::with_capacity(req.pods.len());
        for (pi, pod) in req.pods.into_iter().enumerate() {
            let path = format!("requirements[{ri}].pods[{pi}].rows");
            let rows = match pod.rows {
                RowsDoc::Keyword(AllKeyword::All) => RowSelector::All,
                RowsDoc::Range { range: [lo, hi] } => {
                    if lo == 0 || hi < lo {
                        return Err(schema(
                            path,
                            format!("range [{lo}, {hi}] must satisfy 1 <= lo <= hi"),
                        ));
                    }
                    RowSelector::Range(lo, hi)
                }
                RowsDoc::List(ids) => {
                    if ids.is_empty() {
                        return Err(schema(path, "row list must not be empty"));
                    }
                    if ids.contains(&0) {
                        return Err(schema(path, "row ids are 1-based"));
                    }
                    RowSelector::List(ids)
                }
            };
            pods.push(PodSelector {
                type_name: pod.type_name,
                rows,
                label: pod.label,
            });
        }
        specs.push(RequirementSpec {
            id: req.id,
            trigger: req.trigger,
            component: req.component,
            behaviour: req.behaviour,
            pods,
        });
    }
    Ok(specs)
}

pub fn serialize_requirements(specs: &[RequirementSpec]) -> Vec<u8> {
    let doc = RequirementsDoc {
        requirements: specs
            .iter()
            .map(|s| RequirementDoc {
                id: s.id.clone(),
                trigger: s.trigger.clone(),
                component: s.component.clone(),
                behaviour: s.behaviour.clone(),
                pods: s
                    .pods
                    .iter()
                    .map(|p| PodDoc {
                        type_name: p.type_name.clone(),
                        rows: match &p.rows {
                            RowSelector::All => RowsDoc::Keyword(AllKeyword::All),
                            RowSelector::Range(lo, hi) => RowsDoc::Range { range: [*lo, *hi] },
                            RowSelector::List(ids) => RowsDoc::List(ids.clone()),
                        },
                        label: p.label.clone(),
                    })
                    .collect(),
            })
            .collect(),
    };
    to_json(&doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::IssueCode;

    #[test]
    fn reference_model_shape() {
        let m = reference_model();
        assert_eq!(m.types.len(), 5);
        assert_eq!(m.factor_count(), 22);
        let sizes: Vec<_> = m.types.iter().map(|t| t.factors.len()).collect();
        assert_eq!(sizes, [5, 4, 6, 3, 4]);
        assert_eq!(m.constraints.len(), 4);
        let hard: Vec<_> = m.constraints.iter().filter(|c| c.kind.is_hard()).collect();
        assert_eq!(hard.len(), 1);
        assert_eq!(
            (hard[0].kind, hard[0].source.as_str(), hard[0].target.as_str()),
            (ConstraintKind::Requires, "vehicle_impact", "misplacement")
        );
    }

    #[test]
    fn bundled_file_is_in_canonical_form() {
        let m = reference_model();
        assert_eq!(serialize_model(&m), REFERENCE_MODEL_JSON.as_bytes());
        assert_eq!(serialize_model(&m), serialize_model(&m));
    }

    #[test]
    fn empty_input_is_a_syntax_error() {
        assert!(matches!(parse_model(b""), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn trailing_garbage_is_a_syntax_error() {
        let mut bytes = REFERENCE_MODEL_JSON.as_bytes().to_vec();
        bytes.extend_from_slice(b"}");
        assert!(matches!(parse_model(&bytes), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn double_baseline_fails_validation() {
        let doc = r#"{"model_name":"m","version":"1","types":[{"name":"T","factors":[
            {"id":"a","name":"A","states":[{"label":"x","baseline":true},{"label":"y","baseline":true}]}
        ]}],"constraints":[]}"#;
        match parse_model(doc.as_bytes()) {
            Err(ParseError::ValidationFailed(issues)) => {
                assert_eq!(issues.len(), 1);
                assert_eq!(issues[0].code, IssueCode::MultiBaseline);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn baseline_flag_defaults_to_false() {
        let doc = r#"{"model_name":"m","version":"1","types":[{"name":"T","factors":[
            {"id":"a","name":"A","states":[{"label":"x","baseline":true},{"label":"y"}]}
        ]}]}"#;
        let m = parse_model(doc.as_bytes()).unwrap();
        assert!(!m.types[0].factors[0].states[1].baseline);
    }

    #[test]
    fn unknown_keys_and_channels_are_rejected() {
        let extra = r#"{"model_name":"m","version":"1","types":[],"constraints":[],"extra":1}"#;
        assert!(matches!(parse_model(extra.as_bytes()), Err(ParseError::Schema { .. })));

        let bad_channel = r#"{"model_name":"m","version":"1","types":[{"name":"T","factors":[
            {"id":"a","name":"A","states":[{"label":"x","baseline":true},{"label":"y","baseline":false}],
             "channels":["I_RGB","GAMMA"]}]}]}"#;
        match parse_model(bad_channel.as_bytes()) {
            Err(ParseError::Schema { path, .. }) => {
                assert_eq!(path, "types[0].factors[0].channels[1]")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn multibyte_names_survive() {
        let mut m = reference_model();
        m.name = "Kamera-Störfaktoren ✓".into();
        let bytes = serialize_model(&m);
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.contains("Kamera-Störfaktoren ✓"));
        assert!(!text.contains('\r'));
        assert_eq!(parse_model(&bytes).unwrap(), m);
    }

    const PEDESTRIAN_RQ: &str = r#"{"requirements":[{
        "id":"RQ","trigger":"the ego vehicle is 50 metres from the crossing",
        "component":"object detection component",
        "behaviour":"identify pedestrians that are on or near the crossing in their correct position",
        "pods":[{"type":"Usage","rows":[1]}]}]}"#;

    #[test]
    fn parses_single_pod_requirement() {
        let specs = parse_requirements(PEDESTRIAN_RQ.as_bytes()).unwrap();
        assert_eq!(specs.len(), 1);
        assert_eq!(
            specs[0].pods,
            vec![PodSelector::new("Usage", RowSelector::List(vec![1]))]
        );
    }

    #[test]
    fn row_selector_forms() {
        let doc = r#"{"requirements":[{"id":"a","trigger":"t","component":"c","behaviour":"b",
            "pods":[{"type":"Usage","rows":{"range":[1,108]}},
                    {"type":"Usage","rows":"all","label":"everything"}]}]}"#;
        let specs = parse_requirements(doc.as_bytes()).unwrap();
        assert_eq!(specs[0].pods[0].rows, RowSelector::Range(1, 108));
        assert_eq!(specs[0].pods[1].rows, RowSelector::All);
        assert_eq!(specs[0].pods[1].label.as_deref(), Some("everything"));
        assert_eq!(
            parse_requirements(&serialize_requirements(&specs)).unwrap(),
            specs
        );
    }

    #[test]
    fn duplicate_requirement_ids() {
        let doc = r#"{"requirements":[
            {"id":"RQ-1","trigger":"t","component":"c","behaviour":"b","pods":[{"type":"Usage","rows":[1]}]},
            {"id":"RQ-1","trigger":"t","component":"c","behaviour":"b","pods":[{"type":"Usage","rows":[2]}]}]}"#;
        assert!(matches!(
            parse_requirements(doc.as_bytes()),
            Err(ParseError::DuplicateRequirementId(id)) if id == "RQ-1"
        ));
    }

    #[test]
    fn malformed_selectors() {
        for rows in [r#"[0]"#, r#"[]"#, r#"{"range":[5,2]}"#, r#"{"range":[0,2]}"#, r#""some""#] {
            let doc = format!(
                r#"{{"requirements":[{{"id":"a","trigger":"t","component":"c","behaviour":"b",
                "pods":[{{"type":"Usage","rows":{rows}}}]}}]}}"#
            );
            assert!(
                matches!(parse_requirements(doc.as_bytes()), Err(ParseError::Schema { .. })),
                "{rows}"
            );
        }
        let no_pods = r#"{"requirements":[{"id":"a","trigger":"t","component":"c","behaviour":"b","pods":[]}]}"#;
        assert!(matches!(
            parse_requirements(no_pods.as_bytes()),
            Err(ParseError::Schema { .. })
        ));
    }
}
