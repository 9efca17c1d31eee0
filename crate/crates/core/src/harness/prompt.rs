use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::task::Task;
use crate::lint::{LintReport, RuleId};

/// Instruction appended to every rendered prompt.
pub const OUTPUT_FORMAT: &str =
    "Output format: emit one fenced SPICE netlist (```spice ... ```) ending in .end.";

pub const DEFAULT_TEMPLATE: &str = "Design task:\n{description}\n\nRequirements:\n{requirements}";

/// Fraction of failing reports a rule must appear in to be suggested.
pub const DEFAULT_SUGGESTION_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuidelineOrigin {
    Manual,
    Auto,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guideline {
    pub id: String,
    pub text: String,
    pub origin: GuidelineOrigin,
}

impl Guideline {
    pub fn manual(id: &str, text: &str) -> Self {
        Guideline {
            id: id.to_string(),
            text: text.to_string(),
            origin: GuidelineOrigin::Manual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotPrompt {
    pub guidelines: Vec<Guideline>,
    pub task_template: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template lacks the {0} placeholder")]
    MissingPlaceholder(&'static str),
    #[error("guideline id `{0}` is not unique")]
    DuplicateGuideline(String),
}

impl Default for PilotPrompt {
    fn default() -> Self {
        PilotPrompt {
            guidelines: vec![
                Guideline::manual(
                    "wl-ratio",
                    "Size each PMOS at twice the W/L of its NMOS counterpart (2:1) so pull-up and pull-down drive strengths match.",
                ),
                Guideline::manual(
                    "analysis",
                    "Include the analysis the task asks for: .tran for time-domain behavior, .dc for transfer curves, .op for bias points, .ac for frequency response.",
                ),
                Guideline::manual(
                    "inputs",
                    "Drive every input node with an independent source whose levels stay between 0 V and the supply rail.",
                ),
                Guideline::manual(
                    "temperature",
                    "Add a .temp directive whenever the task states an operating temperature.",
                ),
                Guideline::manual(
                    "format",
                    "Return plain SPICE, not Python: give every device a .model card, name the ground node 0 and finish with .end.",
                ),
            ],
            task_template: DEFAULT_TEMPLATE.to_string(),
        }
    }
}

impl PilotPrompt {
    pub fn validate(&self) -> Result<(), TemplateError> {
        for placeholder in ["{description}", "{requirements}"] {
            if !self.task_template.contains(placeholder) {
                return Err(TemplateError::MissingPlaceholder(placeholder));
            }
        }
        let mut seen = BTreeSet::new();
        for g in &self.guidelines {
            if !seen.insert(g.id.as_str()) {
                return Err(TemplateError::DuplicateGuideline(g.id.clone()));
            }
        }
        Ok(())
    }

    /// Adds accepted candidates whose ids are not already present.
    pub fn accept(&self, candidates: &[Guideline]) -> PilotPrompt {
        let mut next = self.clone();
        for c in candidates {
            if !next.guidelines.iter().any(|g| g.id == c.id) {
                next.guidelines.push(c.clone());
            }
        }
        next
    }
}

fn list(nodes: &[crate::netlist::NodeId]) -> String {
    if nodes.is_empty() {
        "none".to_string()
    } else {
        nodes.iter().map(|n| n.as_str()).collect::<Vec<_>>().join(", ")
    }
}

pub fn requirements_summary(task: &Task) -> String {
    let req = &task.requirements;
    let analyses = if req.required_analyses.is_empty() {
        "any".to_string()
    } else {
        req.required_analyses
            .iter()
            .map(|a| a.directive())
            .collect::<Vec<_>>()
            .join(", ")
    };
    let (lo, hi) = task.expected_transistor_range;
    let mut out = String::new();
    let _ = writeln!(out, "- supply rail: {} V", req.supply_rail);
    let _ = writeln!(out, "- required analyses: {analyses}");
    let _ = writeln!(out, "- input nodes: {}", list(&req.input_nodes));
    let _ = writeln!(out, "- output nodes: {}", list(&req.output_nodes));
    let _ = writeln!(
        out,
        "- .temp directive: {}",
        if req.requires_temp { "required" } else { "optional" }
    );
    let _ = write!(out, "- transistor count: {lo} to {hi}");
    out
}

/// Guidelines (numbered), then the filled task template, then the output
/// format instruction. Deterministic in its inputs.
pub fn render_pilot_prompt(task: &Task, prompt: &PilotPrompt) -> Result<String, TemplateError> {
    prompt.validate()?;
    let mut out = String::from("Guidelines:\n");
    for (i, g) in prompt.guidelines.iter().enumerate() {
        let _ = writeln!(out, "{}. {}", i + 1, g.text);
    }
    out.push('\n');
    let body = prompt
        .task_template
        .replace("{description}", &task.description)
        .replace("{requirements}", &requirements_summary(task));
    out.push_str(body.trim_end());
    out.push_str("\n\n");
    out.push_str(OUTPUT_FORMAT);
    out.push('\n');
    Ok(out)
}

/// Candidate guidelines for rules present in at least `threshold` of the
/// failing reports. Never modifies a prompt; see [`PilotPrompt::accept`].
pub fn suggest_guidelines(reports: &[LintReport], threshold: f64) -> Vec<Guideline> {
    let failing: Vec<&LintReport> = reports.iter().filter(|r| !r.is_valid()).collect();
    if failing.is_empty() {
        return Vec::new();
    }
    RuleId::ALL
        .iter()
        .filter(|rule| {
            let hits = failing.iter().filter(|r| r.has_rule(**rule)).count();
            hits as f64 >= threshold * failing.len() as f64
        })
        .map(|rule| Guideline {
            id: format!("auto-{}", rule.as_str().to_ascii_lowercase().replace('_', "-")),
            text: format!("Avoid {}: {}", rule.as_str(), rule.hint()),
            origin: GuidelineOrigin::Auto,
        })
        .collect()
}
