//! The generate, judge and repair loop with Pass@k scoring and the
//! validated dataset store.

mod bench;
mod dataset;
mod judge;
mod passk;
mod prompt;
mod provider;
mod repair;
mod score;
mod task;

pub use bench::{load_records, read_records, run_benchmark, BenchError, BenchOptions, RunRecord, RunStore, RECORDS_FILE};
pub use dataset::{DatasetError, DatasetRecord, DatasetStore, GainMeasurement, Provenance, GAIN_METHOD};
pub use judge::{judge, AttemptVerdict, Judgement, JUDGE_ESCALATED};
pub use passk::{pass_at_k, DomainError};
pub use prompt::{
    render_pilot_prompt, requirements_summary, suggest_guidelines, Guideline, GuidelineOrigin, PilotPrompt,
    TemplateError, DEFAULT_SUGGESTION_THRESHOLD, DEFAULT_TEMPLATE, OUTPUT_FORMAT,
};
pub use provider::{
    load_replay_dir, prompt_hash, LiveConfig, LiveProvider, Provider, ProviderError, ProviderIdentity,
    RecordingProvider, ReplayEntry, ReplayProvider, ScriptedProvider,
};
pub use repair::{follow_up_prompt, repair_loop, Attempt, IterationTranscript, RepairOptions, REVISE_INSTRUCTION};
pub use score::{score, ScoreTable, TierRow, EMPTY_CELL};
pub use task::{find_task, load_suite, parse_suite, Task, TaskError, TaskSource};
