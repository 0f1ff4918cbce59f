use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::ode::ProblemSpec;
use crate::rational::Rational;
use crate::Error;

/// Input state of a stage: implicitly `q^n` plus rational-weighted
/// increments of earlier stages.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InputExpr {
    pub terms: Vec<(String, Rational)>,
}

impl InputExpr {
    pub fn base() -> Self {
        InputExpr::default()
    }

    pub fn with_term(mut self, stage_id: impl Into<String>, coeff: Rational) -> Self {
        self.terms.push((stage_id.into(), coeff));
        self
    }

    /// Coefficient on the increment of `stage_id`, zero when absent.
    pub fn coeff_of(&self, stage_id: &str) -> Rational {
        self.terms
            .iter()
            .find(|(id, _)| id == stage_id)
            .map(|(_, c)| *c)
            .unwrap_or(Rational::ZERO)
    }
}

/// One per-process integration within a coupled step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage {
    pub id: String,
    pub process: String,
    pub input: InputExpr,
}

impl Stage {
    pub fn new(id: impl Into<String>, process: impl Into<String>, input: InputExpr) -> Self {
        Stage {
            id: id.into(),
            process: process.into(),
            input,
        }
    }
}

/// A coupling scheme: ordered stages plus per-stage output weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemeSpec {
    pub name: String,
    stages: Vec<Stage>,
    output_weights: BTreeMap<String, Rational>,
}

impl SchemeSpec {
    /// Builds a scheme with the default output (weight-1 sum of all stage
    /// increments). Rejects duplicate stage ids and forward references.
    pub fn new(name: impl Into<String>, stages: Vec<Stage>) -> crate::Result<Self> {
        let weights = stages
            .iter()
            .map(|s| (s.id.clone(), Rational::ONE))
            .collect();
        Self::with_output_weights(name, stages, weights)
    }

    /// Builds a scheme with explicit output weights; stages absent from the
    /// map get weight 0.
    pub fn with_output_weights(
        name: impl Into<String>,
        stages: Vec<Stage>,
        mut output_weights: BTreeMap<String, Rational>,
    ) -> crate::Result<Self> {
        let mut seen: Vec<&str> = Vec::with_capacity(stages.len());
        for stage in &stages {
            if seen.contains(&stage.id.as_str()) {
                return Err(Error::invalid(format!("duplicate stage id `{}`", stage.id)));
            }
            for (referenced, _) in &stage.input.terms {
                if !seen.contains(&referenced.as_str()) {
                    return Err(Error::invalid(format!(
                        "stage `{}` references `{}` which is not an earlier stage",
                        stage.id, referenced
                    )));
                }
            }
            seen.push(&stage.id);
        }
        for id in output_weights.keys() {
            if !stages.iter().any(|s| &s.id == id) {
                return Err(Error::invalid(format!(
                    "output weight for unknown stage `{id}`"
                )));
            }
        }
        for stage in &stages {
            output_weights
                .entry(stage.id.clone())
                .or_insert(Rational::ZERO);
        }
        Ok(SchemeSpec {
            name: name.into(),
            stages,
            output_weights,
        })
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn stage(&self, id: &str) -> Option<&Stage> {
        self.stages.iter().find(|s| s.id == id)
    }

    pub fn output_weight(&self, stage_id: &str) -> Rational {
        self.output_weights
            .get(stage_id)
            .copied()
            .unwrap_or(Rational::ZERO)
    }

    /// Stage integrating `process`, when there is exactly one such stage.
    pub fn stage_for_process(&self, process: &str) -> Option<&Stage> {
        let mut found = None;
        for stage in &self.stages {
            if stage.process == process {
                if found.is_some() {
                    return None;
                }
                found = Some(stage);
            }
        }
        found
    }
}

/// Diagnostics produced by [`validate_consistency`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    ProcessMissing(String),
    ProcessDuplicated(String),
    UnknownProcess { stage: String, process: String },
    OutputWeightNotOne { stage: String, weight: Rational },
    UnusedStage(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ProcessMissing(p) => write!(f, "process {p} never integrated"),
            Violation::ProcessDuplicated(p) => {
                write!(f, "process {p} integrated more than once per step")
            }
            Violation::UnknownProcess { stage, process } => {
                write!(f, "stage {stage} integrates unknown process {process}")
            }
            Violation::OutputWeightNotOne { stage, weight } => write!(
                f,
                "stage {stage}: output weight {weight} \u{2260} 1 breaks first-order consistency"
            ),
            Violation::UnusedStage(s) => write!(f, "stage {s} unused (output weight 0)"),
        }
    }
}

/// Checks that the scheme is a first-order-consistent splitting of the
/// problem: every process integrated in exactly one stage, every stage
/// contributing with output weight 1. Returns diagnostics instead of
/// failing.
pub fn validate_consistency(scheme: &SchemeSpec, problem: &ProblemSpec) -> Vec<Violation> {
    let mut violations = Vec::new();
    for process in problem.processes() {
        let count = scheme
            .stages()
            .iter()
            .filter(|s| s.process == process.name())
            .count();
        match count {
            0 => violations.push(Violation::ProcessMissing(process.name().to_string())),
            1 => {}
            _ => violations.push(Violation::ProcessDuplicated(process.name().to_string())),
        }
    }
    for stage in scheme.stages() {
        if problem.process_by_name(&stage.process).is_none() {
            violations.push(Violation::UnknownProcess {
                stage: stage.id.clone(),
                process: stage.process.clone(),
            });
        }
        let weight = scheme.output_weight(&stage.id);
        if weight == Rational::ZERO {
            violations.push(Violation::UnusedStage(stage.id.clone()));
        } else if weight != Rational::ONE {
            violations.push(Violation::OutputWeightNotOne {
                stage: stage.id.clone(),
                weight,
            });
        }
    }
    violations
}

/// The four coupling schemes discussed throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinKind {
    /// Every stage starts from `q^n`; increments are summed.
    Parallel,
    /// Chain: each stage starts from the state updated by all earlier ones.
    Sequential,
    /// Three-process chain A -> B -> C (the original coupling).
    EamOriginal,
    /// A and B from `q^n`, C from `q^n` plus both increments (the revised
    /// coupling).
    EamRevised,
}

impl BuiltinKind {
    pub fn parse_name(name: &str) -> Option<Self> {
        match name {
            "parallel" => Some(BuiltinKind::Parallel),
            "sequential" => Some(BuiltinKind::Sequential),
            "eam_original" => Some(BuiltinKind::EamOriginal),
            "eam_revised" => Some(BuiltinKind::EamRevised),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BuiltinKind::Parallel => "parallel",
            BuiltinKind::Sequential => "sequential",
            BuiltinKind::EamOriginal => "eam_original",
            BuiltinKind::EamRevised => "eam_revised",
        }
    }
}

fn stage_id_for(process: &str) -> String {
    process.to_lowercase()
}

/// Instantiates a built-in scheme over the given process names. Stage ids
/// are the lowercased process names. Parallel and sequential accept two or
/// more processes; the eam variants require exactly three.
pub fn builtin_scheme(kind: BuiltinKind, process_names: &[&str]) -> crate::Result<SchemeSpec> {
    match kind {
        BuiltinKind::Parallel | BuiltinKind::Sequential => {
            if process_names.len() < 2 {
                return Err(Error::invalid(format!(
                    "{} needs at least 2 processes",
                    kind.name()
                )));
            }
        }
        BuiltinKind::EamOriginal | BuiltinKind::EamRevised => {
            if process_names.len() != 3 {
                return Err(Error::invalid(format!(
                    "{} needs exactly 3 processes",
                    kind.name()
                )));
            }
        }
    }
    let ids: Vec<String> = process_names.iter().map(|p| stage_id_for(p)).collect();
    let mut stages = Vec::with_capacity(process_names.len());
    for (k, (&process, id)) in process_names.iter().zip(&ids).enumerate() {
        let input = match kind {
            BuiltinKind::Parallel => InputExpr::base(),
            BuiltinKind::Sequential | BuiltinKind::EamOriginal => {
                let mut input = InputExpr::base();
                for prior in &ids[..k] {
                    input = input.with_term(prior.clone(), Rational::ONE);
                }
                input
            }
            BuiltinKind::EamRevised => {
                if k == 2 {
                    InputExpr::base()
                        .with_term(ids[0].clone(), Rational::ONE)
                        .with_term(ids[1].clone(), Rational::ONE)
                } else {
                    InputExpr::base()
                }
            }
        };
        stages.push(Stage::new(id.clone(), process, input));
    }
    SchemeSpec::new(kind.name(), stages)
}
