//! Netlist validation against the common LLM failure classes.
//!
//! Rules run in registry order: structure, W/L sizing, analyses, sources,
//! temperature. A report is valid iff it carries no error-severity diagnostic.

mod checks;
mod rules;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{AnalysisKind, Netlist, NodeId};

pub use checks::{
    check_analysis, check_sources, check_structure, check_temperature, check_wl_ratio,
    DEFAULT_WL_REL_TOL, DEFAULT_WL_TARGET,
};
pub use rules::{registry_table, RuleId, Severity};

/// What the task expects of a generated netlist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRequirements {
    #[serde(rename = "analyses", default)]
    pub required_analyses: BTreeSet<AnalysisKind>,
    #[serde(rename = "rail")]
    pub supply_rail: f64,
    #[serde(rename = "inputs", default)]
    pub input_nodes: Vec<NodeId>,
    #[serde(rename = "outputs", default)]
    pub output_nodes: Vec<NodeId>,
    #[serde(default)]
    pub requires_temp: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_transistor_range: Option<(u32, u32)>,
}

impl Default for TaskRequirements {
    fn default() -> Self {
        TaskRequirements {
            required_analyses: BTreeSet::new(),
            supply_rail: 1.8,
            input_nodes: Vec::new(),
            output_nodes: Vec::new(),
            requires_temp: false,
            expected_transistor_range: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RequirementsError {
    #[error("supply rail must be positive, got {0}")]
    Rail(f64),
    #[error("node `{0}` is listed as both input and output")]
    Overlap(NodeId),
    #[error("expected transistor range {0}..{1} is empty")]
    Range(u32, u32),
}

impl TaskRequirements {
    pub fn validate(&self) -> Result<(), RequirementsError> {
        if self.supply_rail.is_nan() || self.supply_rail <= 0.0 {
            return Err(RequirementsError::Rail(self.supply_rail));
        }
        if let Some(n) = self.input_nodes.iter().find(|n| self.output_nodes.contains(n)) {
            return Err(RequirementsError::Overlap(n.clone()));
        }
        if let Some((lo, hi)) = self.expected_transistor_range {
            if lo > hi {
                return Err(RequirementsError::Range(lo, hi));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub rule: RuleId,
    pub severity: Severity,
    pub message: String,
    pub element: Option<String>,
    pub node: Option<NodeId>,
}

impl Diagnostic {
    pub fn new(rule: RuleId, message: impl Into<String>) -> Self {
        Diagnostic {
            rule,
            severity: rule.default_severity(),
            message: message.into(),
            element: None,
            node: None,
        }
    }

    pub fn with_element(mut self, name: impl Into<String>) -> Self {
        self.element = Some(name.into());
        self
    }

    pub fn with_node(mut self, node: NodeId) -> Self {
        self.node = Some(node);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Valid,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LintReport {
    pub verdict: Verdict,
    pub diagnostics: Vec<Diagnostic>,
}

impl LintReport {
    pub fn from_diagnostics(diagnostics: Vec<Diagnostic>) -> Self {
        let verdict = if diagnostics.iter().any(|d| d.severity == Severity::Error) {
            Verdict::Invalid
        } else {
            Verdict::Valid
        };
        LintReport {
            verdict,
            diagnostics,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.verdict == Verdict::Valid
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics
            .iter()
            .filter(|d| d.severity == Severity::Error)
    }

    pub fn has_rule(&self, rule: RuleId) -> bool {
        self.diagnostics.iter().any(|d| d.rule == rule)
    }

    /// Re-grades the listed rules as errors and recomputes the verdict.
    pub fn escalate(&self, rules: &[RuleId]) -> LintReport {
        let diagnostics = self
            .diagnostics
            .iter()
            .cloned()
            .map(|mut d| {
                if rules.contains(&d.rule) {
                    d.severity = Severity::Error;
                }
                d
            })
            .collect();
        LintReport::from_diagnostics(diagnostics)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("lint report serializes")
    }
}

/// Runs every rule. Netlists with subcircuit instances are flattened first;
/// expansion failures become `BAD_SUBCKT` errors. `RANGE` runs only when the
/// requirements carry an expected transistor range.
pub fn lint(netlist: &Netlist, req: &TaskRequirements) -> LintReport {
    let mut diagnostics = Vec::new();
    let has_instances = netlist
        .elements
        .iter()
        .any(|e| e.kind() == crate::netlist::ElementKind::Subckt);
    let flat;
    let target = if has_instances {
        match crate::netlist::flatten(netlist) {
            Ok(f) => {
                flat = f;
                &flat
            }
            Err(e) => {
                diagnostics.push(Diagnostic::new(RuleId::BadSubckt, e.to_string()));
                netlist
            }
        }
    } else {
        netlist
    };
    diagnostics.extend(check_structure(target, req));
    diagnostics.extend(check_wl_ratio(target, DEFAULT_WL_TARGET, DEFAULT_WL_REL_TOL));
    diagnostics.extend(check_analysis(target, req));
    diagnostics.extend(check_sources(target, req));
    diagnostics.extend(check_temperature(target, req));
    if let Some((lo, hi)) = req.expected_transistor_range {
        let count = crate::metrics::compute_metrics(target).transistor_count;
        if count < lo || count > hi {
            diagnostics.push(Diagnostic::new(
                RuleId::Range,
                format!("{count} transistors, task expects {lo} to {hi}"),
            ));
        }
    }
    LintReport::from_diagnostics(diagnostics)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("feedback requested for a valid lint report")]
pub struct ReportIsValid;

/// Numbered repair notes for an invalid report, one line per diagnostic.
pub fn render_feedback(report: &LintReport) -> Result<String, ReportIsValid> {
    if report.is_valid() {
        return Err(ReportIsValid);
    }
    Ok(render_diagnostics(&report.diagnostics))
}

pub fn render_diagnostics(diagnostics: &[Diagnostic]) -> String {
    let mut out = String::new();
    for (i, d) in diagnostics.iter().enumerate() {
        out.push_str(&format!(
            "{}. {}: {}; {}\n",
            i + 1,
            d.rule,
            d.message,
            d.rule.hint()
        ));
    }
    out
}

#[cfg(test)]
mod tests;
