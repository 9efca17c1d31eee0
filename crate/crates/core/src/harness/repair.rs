use serde::{Deserialize, Serialize};

use super::judge::{judge, AttemptVerdict, Judgement};
use super::passk::DomainError;
use super::prompt::{render_pilot_prompt, PilotPrompt};
use super::provider::Provider;
use super::task::Task;
use crate::metrics::CircuitMetrics;
use crate::sim::SimOptions;

pub const REVISE_INSTRUCTION: &str = "Please revise the netlist to fix every problem listed above.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairOptions {
    pub max_iters: u32,
    #[serde(default)]
    pub sim: SimOptions,
}

impl Default for RepairOptions {
    fn default() -> Self {
        RepairOptions {
            max_iters: 3,
            sim: SimOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTranscript {
    pub iteration: u32,
    pub prompt: String,
    /// `None` when the provider failed before answering.
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judgement: Option<Judgement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub task_id: u32,
    /// 1-based index among the task's independent attempts.
    pub attempt: u32,
    pub iterations: Vec<IterationTranscript>,
    pub final_verdict: AttemptVerdict,
    pub iterations_used: u32,
    /// The iteration budget ran out before a pass.
    pub exhausted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passing_netlist: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<CircuitMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
}

impl Attempt {
    pub fn passed(&self) -> bool {
        self.final_verdict.is_pass()
    }

    /// Verdict of every iteration in order; provider failures read `FailBudget`.
    pub fn verdict_trail(&self) -> Vec<AttemptVerdict> {
        self.iterations
            .iter()
            .map(|t| {
                t.judgement
                    .as_ref()
                    .map_or(AttemptVerdict::FailBudget, |j| j.verdict)
            })
            .collect()
    }
}

/// The next prompt after a failed iteration.
pub fn follow_up_prompt(previous: &str, response: &str, feedback: &str) -> String {
    format!(
        "{}\n\nPrevious answer:\n{}\n\nProblems found:\n{}\n{}\n",
        previous.trim_end(),
        response.trim_end(),
        feedback.trim_end(),
        REVISE_INSTRUCTION
    )
}

/// One independent attempt: generate, judge, and feed failures back until a
/// pass or until `max_iters` iterations have run.
pub fn repair_loop(
    provider: &dyn Provider,
    task: &Task,
    prompt: &PilotPrompt,
    attempt: u32,
    options: &RepairOptions,
) -> Result<Attempt, DomainError> {
    if options.max_iters == 0 {
        return Err(DomainError("max_iters must be at least 1".into()));
    }
    let mut text = render_pilot_prompt(task, prompt).map_err(|e| DomainError(e.to_string()))?;
    let mut out = Attempt {
        task_id: task.id,
        attempt,
        iterations: Vec::new(),
        final_verdict: AttemptVerdict::FailBudget,
        iterations_used: 0,
        exhausted: false,
        failure_reason: None,
        passing_netlist: None,
        metrics: None,
        gain: None,
    };
    for iteration in 1..=options.max_iters {
        out.iterations_used = iteration;
        let response = match provider.generate(&text) {
            Ok(r) => r,
            Err(e) => {
                tracing::warn!(task = task.id, attempt, iteration, error = %e, "provider failed");
                out.iterations.push(IterationTranscript {
                    iteration,
                    prompt: text,
                    response: None,
                    judgement: None,
                    provider_error: Some(e.to_string()),
                });
                out.final_verdict = AttemptVerdict::FailBudget;
                out.failure_reason = Some(e.to_string());
                return Ok(out);
            }
        };
        let judgement = judge(task, &response, &options.sim);
        let verdict = judgement.verdict;
        let feedback = judgement.feedback.clone();
        if verdict.is_pass() {
            out.passing_netlist = judgement.netlist.clone();
            out.metrics = judgement.metrics.clone();
            out.gain = judgement.functional.as_ref().and_then(|f| f.gain);
        }
        out.iterations.push(IterationTranscript {
            iteration,
            prompt: text.clone(),
            response: Some(response.clone()),
            judgement: Some(judgement),
            provider_error: None,
        });
        out.final_verdict = verdict;
        if verdict.is_pass() {
            out.failure_reason = None;
            return Ok(out);
        }
        out.failure_reason = Some(feedback.trim_end().to_string());
        text = follow_up_prompt(&text, &response, &feedback);
    }
    out.exhausted = true;
    Ok(out)
}
