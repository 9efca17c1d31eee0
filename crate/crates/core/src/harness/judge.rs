use serde::{Deserialize, Serialize};

use super::task::Task;
use crate::lint::{lint, render_feedback, LintReport, RuleId, TaskRequirements};
use crate::metrics::{compute_metrics, CircuitMetrics};
use crate::netlist::{extract_netlist, flatten, parse_netlist, ElementKind, Netlist};
use crate::sim::{functional_check, FunctionalFailure, FunctionalReport, SimOptions};

/// Warning-level rules that block a benchmark pass.
pub const JUDGE_ESCALATED: [RuleId; 2] = [RuleId::WlRatio, RuleId::NoTemp];

/// Ordered by stage: a verdict never names a stage after the first failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AttemptVerdict {
    Pass,
    FailParse,
    FailLint,
    FailSim,
    FailFunctional,
    FailBudget,
}

impl AttemptVerdict {
    pub fn is_pass(self) -> bool {
        self == AttemptVerdict::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgement {
    pub verdict: AttemptVerdict,
    /// Extracted netlist text, or `None` when nothing was extractable.
    pub netlist: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lint: Option<LintReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<CircuitMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functional: Option<FunctionalReport>,
    /// Repair notes for the next iteration; empty on pass.
    pub feedback: String,
}

impl Judgement {
    fn stop(verdict: AttemptVerdict, netlist: Option<String>, feedback: String) -> Self {
        Judgement {
            verdict,
            netlist,
            lint: None,
            metrics: None,
            functional: None,
            feedback,
        }
    }
}

fn flattened(netlist: &Netlist) -> Option<Netlist> {
    if netlist.elements.iter().any(|e| e.kind() == ElementKind::Subckt) {
        flatten(netlist).ok()
    } else {
        Some(netlist.clone())
    }
}

/// Runs extract, parse, lint, transistor-range and functional stages in order
/// and stops at the first failure.
pub fn judge(task: &Task, response: &str, options: &SimOptions) -> Judgement {
    let text = match extract_netlist(response) {
        Ok(t) => t,
        Err(e) => {
            return Judgement::stop(
                AttemptVerdict::FailParse,
                None,
                format!("1. no netlist found: {e}\n"),
            )
        }
    };
    let netlist = match parse_netlist(&text) {
        Ok(n) => n,
        Err(e) => {
            return Judgement::stop(
                AttemptVerdict::FailParse,
                Some(text),
                format!("1. parse error: {e}\n"),
            )
        }
    };

    let requirements = TaskRequirements {
        expected_transistor_range: Some(task.expected_transistor_range),
        ..task.requirements.clone()
    };
    let report = lint(&netlist, &requirements).escalate(&JUDGE_ESCALATED);
    let metrics = flattened(&netlist).as_ref().map(compute_metrics);
    if !report.is_valid() {
        let feedback = render_feedback(&report).unwrap_or_default();
        return Judgement {
            verdict: AttemptVerdict::FailLint,
            netlist: Some(text),
            lint: Some(report),
            metrics,
            functional: None,
            feedback,
        };
    }

    let mut judgement = Judgement {
        verdict: AttemptVerdict::Pass,
        netlist: Some(text),
        lint: Some(report),
        metrics,
        functional: None,
        feedback: String::new(),
    };
    let Some(spec) = &task.functional_spec else {
        return judgement;
    };
    let functional = functional_check(&netlist, spec, task.requirements.supply_rail, options);
    if let Some(failure) = &functional.failure {
        judgement.verdict = match failure {
            FunctionalFailure::Unsimulatable { .. } => AttemptVerdict::FailSim,
            _ => AttemptVerdict::FailFunctional,
        };
        judgement.feedback = format!("1. functional check failed: {failure}\n");
    }
    judgement.functional = Some(functional);
    judgement
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::task::parse_suite;

    const INVERTER: &str = "\
* cmos inverter
.model nch NMOS (VTO=0.7 KP=110u)
.model pch PMOS (VTO=-0.7 KP=50u)
Vdd vdd 0 1.8
Vin in 0 PULSE(0 1.8 0 1n 1n 10n 20n)
Mp out in vdd vdd pch W=2u L=1u
Mn out in 0 0 nch W=1u L=1u
Cl out 0 10f
.tran 0.1n 40n
.end
";

    fn tasks() -> Vec<Task> {
        parse_suite(
            r#"[
            {"id": 1, "name": "Inverter", "description": "CMOS inverter.", "difficulty": "easy",
             "expected_transistors": [2, 2],
             "requirements": {"analyses": ["tran"], "rail": 1.8, "inputs": ["in"], "outputs": ["out"]},
             "functional": {"truth_table": {"rows": [
                {"inputs": {"in": 0}, "outputs": {"out": 1}},
                {"inputs": {"in": 1}, "outputs": {"out": 0}}]}}},
            {"id": 3, "name": "Op-amp", "description": "Two-stage op-amp.", "difficulty": "hard",
             "expected_transistors": [26, 45],
             "requirements": {"analyses": ["tran"], "rail": 1.8, "inputs": ["in"], "outputs": ["out"]}}
            ]"#,
        )
        .unwrap()
    }

    fn fenced(text: &str) -> String {
        format!("Here you go:\n```spice\n{text}```\n")
    }

    #[test]
    fn golden_inverter_passes() {
        let j = judge(&tasks()[0], &fenced(INVERTER), &SimOptions::default());
        assert_eq!(j.verdict, AttemptVerdict::Pass, "{}", j.feedback);
        assert_eq!(j.metrics.unwrap().transistor_count, 2);
        assert!(j.functional.unwrap().passed);
        assert!(j.feedback.is_empty());
    }

    #[test]
    fn garbage_fails_parse() {
        let j = judge(&tasks()[0], "I cannot help with that.", &SimOptions::default());
        assert_eq!(j.verdict, AttemptVerdict::FailParse);
        assert!(j.netlist.is_none());
        let j = judge(&tasks()[0], "```spice\nR1 a\n.end\n```", &SimOptions::default());
        assert_eq!(j.verdict, AttemptVerdict::FailParse);
    }

    #[test]
    fn inverter_against_opamp_is_out_of_range() {
        let j = judge(&tasks()[1], &fenced(INVERTER), &SimOptions::default());
        assert_eq!(j.verdict, AttemptVerdict::FailLint);
        assert!(j.lint.unwrap().has_rule(RuleId::Range));
        assert!(j.feedback.contains("RANGE"));
    }

    #[test]
    fn escalated_wl_ratio_fails_lint() {
        let bad = INVERTER.replace("W=2u", "W=1u");
        let j = judge(&tasks()[0], &fenced(&bad), &SimOptions::default());
        assert_eq!(j.verdict, AttemptVerdict::FailLint);
        assert!(j.feedback.contains("WL_RATIO"));
    }

    #[test]
    fn polarity_fault_fails_functional() {
        let swapped = INVERTER
            .replace("Mp out in vdd vdd pch", "Mp out in 0 vdd pch")
            .replace("Mn out in 0 0 nch", "Mn out in vdd 0 nch");
        let j = judge(&tasks()[0], &fenced(&swapped), &SimOptions::default());
        assert!(
            matches!(j.verdict, AttemptVerdict::FailFunctional | AttemptVerdict::FailSim),
            "{:?}",
            j.verdict
        );
        assert!(!j.feedback.is_empty());
    }

    #[test]
    fn unsimulatable_maps_to_fail_sim() {
        let opts = SimOptions {
            max_newton_iter: 1,
            ..SimOptions::default()
        };
        let j = judge(&tasks()[0], &fenced(INVERTER), &opts);
        assert_eq!(j.verdict, AttemptVerdict::FailSim);
    }
}
