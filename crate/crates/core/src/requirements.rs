//! Robustness safety requirements: performance requirements qualified by
//! PODs, coverage of the operational context, and document output.

use std::collections::BTreeSet;
use std::fmt;

use num_rational::Ratio;
use serde::Serialize;
use thiserror::Error;

use crate::grid::{Assignment, GridSet, SituationGrid};
use crate::model::NoiseFactorModel;
use crate::modelio::RequirementSpec;
use crate::pods::{Pod, PodBinder, PodError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RequirementsError {
    #[error("POD on `{pod_type}` cannot be checked against the `{grid_type}` grid")]
    TypeMismatch { pod_type: String, grid_type: String },
    #[error("POD `{label}` refers to `{type_name}`, which has no matching expanded grid")]
    UnboundPod { label: String, type_name: String },
    #[error("requirement `{0}` cites no POD")]
    NoPods(String),
    #[error(transparent)]
    Pod(#[from] PodError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RobustnessRequirement {
    pub id: String,
    pub trigger: String,
    pub component: String,
    pub behaviour: String,
    pub pods: Vec<Pod>,
}

impl RobustnessRequirement {
    /// Distinct POD labels in citation order.
    pub fn pod_labels(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.pods
            .iter()
            .map(|p| p.label.as_str())
            .filter(|l| seen.insert(*l))
            .collect()
    }
}

/// Binds every requirement's POD selectors. Labels are numbered across the
/// whole document, so the same selector cited twice shares one label.
pub fn bind_requirements(
    model: &NoiseFactorModel,
    grids: &GridSet,
    specs: &[RequirementSpec],
) -> Result<Vec<RobustnessRequirement>, RequirementsError> {
    let mut binder = PodBinder::new();
    specs
        .iter()
        .map(|spec| {
            if spec.pods.is_empty() {
                return Err(RequirementsError::NoPods(spec.id.clone()));
            }
            let mut pods: Vec<Pod> = Vec::with_capacity(spec.pods.len());
            for sel in &spec.pods {
                let pod = binder.bind(model, grids, sel)?;
                if !pods.iter().any(|p| p.label == pod.label) {
                    pods.push(pod);
                }
            }
            Ok(RobustnessRequirement {
                id: spec.id.clone(),
                trigger: spec.trigger.clone(),
                component: spec.component.clone(),
                behaviour: spec.behaviour.clone(),
                pods,
            })
        })
        .collect()
}

/// Renders the requirement sentence, e.g.
/// `**RQ:** When <trigger>, the <component> shall <behaviour> under all
/// conditions defined in [PODs#1].`
pub fn render_requirement(req: &RobustnessRequirement) -> String {
    format!(
        "**{}:** When {}, the {} shall {} under all conditions defined in [{}].",
        req.id,
        req.trigger,
        req.component,
        req.behaviour,
        req.pod_labels().join(", ")
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Lint {
    EmptySlot { requirement: String, slot: &'static str },
    BraceInSlot { requirement: String, slot: &'static str },
    NoPods { requirement: String },
}

impl fmt::Display for Lint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lint::EmptySlot { requirement, slot } => {
                write!(f, "warning: {requirement}: `{slot}` is empty")
            }
            Lint::BraceInSlot { requirement, slot } => {
                write!(f, "warning: {requirement}: `{slot}` contains a brace, which reads as an unresolved placeholder")
            }
            Lint::NoPods { requirement } => {
                write!(f, "warning: {requirement}: no POD cited, robustness scope is vacuous")
            }
        }
    }
}

pub fn lint(req: &RobustnessRequirement) -> Vec<Lint> {
    let mut out = Vec::new();
    for (slot, text) in [
        ("trigger", &req.trigger),
        ("component", &req.component),
        ("behaviour", &req.behaviour),
    ] {
        if text.trim().is_empty() {
            out.push(Lint::EmptySlot {
                requirement: req.id.clone(),
                slot,
            });
        }
        if text.contains(['{', '}']) {
            out.push(Lint::BraceInSlot {
                requirement: req.id.clone(),
                slot,
            });
        }
    }
    if req.pods.is_empty() {
        out.push(Lint::NoPods {
            requirement: req.id.clone(),
        });
    }
    out
}

/// Which rows of one type's grid the requirements' PODs reach.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageReport {
    pub type_name: String,
    pub grid_size: u64,
    pub covered: BTreeSet<u64>,
    pub uncovered: BTreeSet<u64>,
    pub ratio: Ratio<u64>,
}

impl CoverageReport {
    pub fn is_complete(&self) -> bool {
        self.uncovered.is_empty()
    }

    /// Ratio rounded half-up to `places` decimals, using integer arithmetic.
    pub fn ratio_decimal(&self, places: u32) -> String {
        let scale = 10u128.pow(places);
        let num = *self.ratio.numer() as u128;
        let den = *self.ratio.denom() as u128;
        let scaled = (num * scale * 2 + den) / (den * 2);
        let int = scaled / scale;
        let frac = scaled % scale;
        if places == 0 {
            int.to_string()
        } else {
            format!("{int}.{frac:0width$}", width = places as usize)
        }
    }
}

/// Compresses sorted ids into `a-b` runs, e.g. `1-3,7`.
pub fn format_id_ranges(ids: &BTreeSet<u64>) -> String {
    let mut parts = Vec::new();
    let mut iter = ids.iter().copied().peekable();
    while let Some(start) = iter.next() {
        let mut end = start;
        while iter.peek() == Some(&(end + 1)) {
            end = iter.next().unwrap();
        }
        parts.push(if start == end {
            start.to_string()
        } else {
            format!("{start}-{end}")
        });
    }
    parts.join(",")
}

fn report(type_name: &str, grid_size: u64, covered: BTreeSet<u64>) -> CoverageReport {
    let uncovered = (1..=grid_size).filter(|id| !covered.contains(id)).collect();
    CoverageReport {
        type_name: type_name.to_owned(),
        grid_size,
        ratio: Ratio::new(covered.len() as u64, grid_size.max(1)),
        covered,
        uncovered,
    }
}

/// Coverage of one grid by the union of all PODs. Every POD must be on the
/// grid's type.
pub fn coverage_report(
    reqs: &[RobustnessRequirement],
    grid: &SituationGrid,
) -> Result<CoverageReport, RequirementsError> {
    let mut covered = BTreeSet::new();
    for pod in reqs.iter().flat_map(|r| &r.pods) {
        if pod.type_name != grid.type_name {
            return Err(RequirementsError::TypeMismatch {
                pod_type: pod.type_name.clone(),
                grid_type: grid.type_name.clone(),
            });
        }
        covered.extend(pod.row_ids.iter().copied().filter(|&id| id <= grid.len()));
    }
    Ok(report(&grid.type_name, grid.len(), covered))
}

/// Per-type coverage over every grid in the set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completeness {
    pub reports: Vec<CoverageReport>,
}

impl Completeness {
    /// The union of all PODs spans every situation of every type.
    pub fn is_complete(&self) -> bool {
        self.reports.iter().all(CoverageReport::is_complete)
    }
}

pub fn completeness(
    reqs: &[RobustnessRequirement],
    grids: &GridSet,
) -> Result<Completeness, RequirementsError> {
    for pod in reqs.iter().flat_map(|r| &r.pods) {
        if grids.get(&pod.type_name).is_none() {
            return Err(RequirementsError::UnboundPod {
                label: pod.label.clone(),
                type_name: pod.type_name.clone(),
            });
        }
    }
    let reports = grids
        .iter()
        .map(|g| {
            let covered = reqs
                .iter()
                .flat_map(|r| &r.pods)
                .filter(|p| p.type_name == g.type_name)
                .flat_map(|p| p.row_ids.iter().copied())
                .filter(|&id| id <= g.len())
                .collect();
            report(&g.type_name, g.len(), covered)
        })
        .collect();
    Ok(Completeness { reports })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Markdown,
    Json,
    Csv,
}

/// Distinct PODs in first-citation order, each paired with its grid.
fn appendix<'a>(
    reqs: &'a [RobustnessRequirement],
    grids: &'a GridSet,
) -> Result<Vec<(&'a Pod, &'a SituationGrid)>, RequirementsError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for pod in reqs.iter().flat_map(|r| &r.pods) {
        if !seen.insert(pod.label.as_str()) {
            continue;
        }
        let unbound = || RequirementsError::UnboundPod {
            label: pod.label.clone(),
            type_name: pod.type_name.clone(),
        };
        let grid = grids.get(&pod.type_name).ok_or_else(unbound)?;
        if pod.row_ids.iter().any(|&id| id == 0 || id > grid.len()) {
            return Err(unbound());
        }
        out.push((pod, grid));
    }
    Ok(out)
}

fn md_cell(text: &str) -> String {
    text.replace('|', "\\|")
}

fn emit_markdown(reqs: &[RobustnessRequirement], pods: &[(&Pod, &SituationGrid)]) -> String {
    let mut out = String::from("# Robustness safety requirements\n\n");
    for req in reqs {
        out.push_str(&render_requirement(req));
        out.push_str("\n\n");
    }
    out.push_str("## POD appendix\n");
    for (pod, grid) in pods {
        out.push_str(&format!("\n### {} ({})\n\n", pod.label, pod.type_name));
        out.push_str("| ID |");
        for c in &grid.columns {
            out.push_str(&format!(" {} |", md_cell(&c.factor_name)));
        }
        out.push_str("\n|---|");
        for _ in &grid.columns {
            out.push_str("---|");
        }
        out.push('\n');
        for &id in &pod.row_ids {
            let row = grid.row(id).expect("checked by appendix");
            out.push_str(&format!("| {id} |"));
            for label in row.labels() {
                out.push_str(&format!(" {} |", md_cell(label)));
            }
            out.push('\n');
        }
    }
    out
}

fn emit_json(reqs: &[RobustnessRequirement], pods: &[(&Pod, &SituationGrid)]) -> Vec<u8> {
    #[derive(Serialize)]
    struct Doc<'a> {
        requirements: Vec<Req<'a>>,
        pods: Vec<PodOut<'a>>,
    }
    #[derive(Serialize)]
    struct Req<'a> {
        id: &'a str,
        text: String,
        trigger: &'a str,
        component: &'a str,
        behaviour: &'a str,
        pods: Vec<&'a str>,
    }
    #[derive(Serialize)]
    struct PodOut<'a> {
        label: &'a str,
        #[serde(rename = "type")]
        type_name: &'a str,
        rows: Vec<Row<'a>>,
    }
    #[derive(Serialize)]
    struct Row<'a> {
        id: u64,
        assignments: &'a [Assignment],
    }

    let doc = Doc {
        requirements: reqs
            .iter()
            .map(|r| Req {
                id: &r.id,
                text: render_requirement(r),
                trigger: &r.trigger,
                component: &r.component,
                behaviour: &r.behaviour,
                pods: r.pod_labels(),
            })
            .collect(),
        pods: pods
            .iter()
            .map(|(pod, grid)| PodOut {
                label: &pod.label,
                type_name: &pod.type_name,
                rows: pod
                    .row_ids
                    .iter()
                    .map(|&id| Row {
                        id,
                        assignments: &grid.row(id).expect("checked by appendix").assignments,
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut out = serde_json::to_vec_pretty(&doc).expect("document serialization is infallible");
    out.push(b'\n');
    out
}

/// One grid-format CSV block per POD, blocks separated by an empty line.
fn emit_csv(pods: &[(&Pod, &SituationGrid)]) -> String {
    pods.iter()
        .map(|(pod, grid)| {
            grid.rows_to_csv(
                pod.row_ids
                    .iter()
                    .map(|&id| (id, grid.row(id).expect("checked by appendix"))),
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Writes the requirements document. Markdown and JSON carry the rendered
/// requirements plus a POD appendix; CSV carries the appendix only.
pub fn emit(
    reqs: &[RobustnessRequirement],
    grids: &GridSet,
    format: Format,
) -> Result<Vec<u8>, RequirementsError> {
    let pods = appendix(reqs, grids)?;
    Ok(match format {
        Format::Markdown => emit_markdown(reqs, &pods).into_bytes(),
        Format::Json => emit_json(reqs, &pods),
        Format::Csv => emit_csv(&pods).into_bytes(),
    })
}
