use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dataset::{DatasetError, DatasetRecord, DatasetStore};
use super::passk::DomainError;
use super::prompt::PilotPrompt;
use super::provider::{Provider, ProviderIdentity};
use super::repair::{repair_loop, Attempt, RepairOptions};
use super::task::Task;
use crate::metrics::Difficulty;

pub const RECORDS_FILE: &str = "records.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task_id: u32,
    pub difficulty: Difficulty,
    pub provider: ProviderIdentity,
    /// RFC 3339 completion time.
    pub timestamp: String,
    pub n: u32,
    pub c: u32,
    pub attempts: Vec<Attempt>,
}

impl RunRecord {
    pub fn new(task: &Task, provider: ProviderIdentity, attempts: Vec<Attempt>) -> Self {
        let c = attempts.iter().filter(|a| a.passed()).count() as u32;
        RunRecord {
            task_id: task.id,
            difficulty: task.difficulty,
            provider,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            n: attempts.len() as u32,
            c,
            attempts,
        }
    }

    /// `c` agrees with the attempt verdicts and `n` with their count.
    pub fn is_consistent(&self) -> bool {
        self.n as usize == self.attempts.len()
            && self.c as usize == self.attempts.iter().filter(|a| a.passed()).count()
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("run records {path}: {error}")]
    Io {
        path: String,
        error: std::io::Error,
    },
    #[error("run records {path} line {line}: {reason}")]
    Corrupt {
        path: String,
        line: usize,
        reason: String,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> BenchError + '_ {
    move |error| BenchError::Io {
        path: path.display().to_string(),
        error,
    }
}

/// Parses a run-record JSONL file.
pub fn read_records(path: &Path) -> Result<Vec<RunRecord>, BenchError> {
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let corrupt = |reason: String| BenchError::Corrupt {
            path: path.display().to_string(),
            line: i + 1,
            reason,
        };
        let record: RunRecord = serde_json::from_str(line).map_err(|e| corrupt(e.to_string()))?;
        if !record.is_consistent() {
            return Err(corrupt(format!(
                "task {} has c={} n={} disagreeing with its attempts",
                record.task_id, record.n, record.c
            )));
        }
        out.push(record);
    }
    Ok(out)
}

/// Reads `dir/records.jsonl`, or `path` itself when it is a file.
pub fn load_records(path: &Path) -> Result<Vec<RunRecord>, BenchError> {
    if path.is_dir() {
        read_records(&path.join(RECORDS_FILE))
    } else {
        read_records(path)
    }
}

/// Run-record persistence for one output directory.
pub struct RunStore {
    path: PathBuf,
    existing: Mutex<Vec<RunRecord>>,
}

impl RunStore {
    pub fn open(dir: &Path) -> Result<Self, BenchError> {
        fs::create_dir_all(dir).map_err(io_error(dir))?;
        let path = dir.join(RECORDS_FILE);
        let existing = if path.exists() {
            read_records(&path)?
        } else {
            Vec::new()
        };
        Ok(RunStore {
            path,
            existing: Mutex::new(existing),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn completed(&self, task_id: u32, provider: &ProviderIdentity) -> Option<RunRecord> {
        self.existing
            .lock()
            .expect("run store lock")
            .iter()
            .find(|r| r.task_id == task_id && &r.provider == provider)
            .cloned()
    }

    pub fn append(&self, record: &RunRecord) -> Result<(), BenchError> {
        let mut existing = self.existing.lock().expect("run store lock");
        let line = serde_json::to_string(record).expect("run record serializes");
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(io_error(&self.path))?;
        writeln!(file, "{line}").map_err(io_error(&self.path))?;
        existing.push(record.clone());
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub n_attempts: u32,
    /// Tasks in flight at once; attempts within a task run in order.
    pub concurrency: usize,
    pub repair: RepairOptions,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            n_attempts: 5,
            concurrency: 1,
            repair: RepairOptions::default(),
        }
    }
}

fn run_task(
    provider: &dyn Provider,
    task: &Task,
    prompt: &PilotPrompt,
    options: &BenchOptions,
) -> Result<RunRecord, DomainError> {
    let attempts = (1..=options.n_attempts)
        .map(|i| repair_loop(provider, task, prompt, i, &options.repair))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RunRecord::new(task, provider.identity(), attempts))
}

fn commit(
    task: &Task,
    record: &RunRecord,
    store: &RunStore,
    dataset: Option<&DatasetStore>,
) -> Result<(), BenchError> {
    store.append(record)?;
    let Some(dataset) = dataset else {
        return Ok(());
    };
    for attempt in &record.attempts {
        let Some(entry) = DatasetRecord::from_attempt(task, attempt, &record.provider)? else {
            continue;
        };
        match dataset.append(&entry) {
            Ok(line) => tracing::info!(task = task.id, line, "dataset record appended"),
            Err(DatasetError::AlreadyPresent { .. }) => {}
            Err(DatasetError::InvalidRecord(reason)) => {
                tracing::warn!(task = task.id, %reason, "passing netlist rejected by dataset")
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

/// Runs `n_attempts` independent repair loops per task. Tasks already
/// recorded for this provider identity are reused, not re-run. Records and
/// dataset appends are committed in suite order by a single writer, so an
/// interrupted run leaves a completed prefix.
pub fn run_benchmark(
    tasks: &[Task],
    provider: &dyn Provider,
    prompt: &PilotPrompt,
    options: &BenchOptions,
    store: &RunStore,
    dataset: Option<&DatasetStore>,
) -> Result<Vec<RunRecord>, BenchError> {
    if options.n_attempts == 0 {
        return Err(DomainError("n_attempts must be at least 1".into()).into());
    }
    if options.repair.max_iters == 0 {
        return Err(DomainError("max_iters must be at least 1".into()).into());
    }
    let ids: BTreeSet<u32> = tasks.iter().map(|t| t.id).collect();
    if ids.len() != tasks.len() {
        return Err(DomainError("task ids must be unique".into()).into());
    }
    prompt
        .validate()
        .map_err(|e| DomainError(e.to_string()))?;

    let identity = provider.identity();
    let mut results: Vec<Option<RunRecord>> = tasks
        .iter()
        .map(|t| store.completed(t.id, &identity))
        .collect();
    let pending: Vec<usize> = (0..tasks.len()).filter(|&i| results[i].is_none()).collect();
    if pending.len() < tasks.len() {
        tracing::info!(skipped = tasks.len() - pending.len(), "resuming benchmark run");
    }

    let next = AtomicUsize::new(0);
    let workers = options.concurrency.max(1).min(pending.len().max(1));
    let (tx, rx) = mpsc::channel::<(usize, Result<RunRecord, DomainError>)>();
    thread::scope(|scope| -> Result<(), BenchError> {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, pending) = (&next, &pending);
            scope.spawn(move || loop {
                let slot = next.fetch_add(1, Ordering::SeqCst);
                let Some(&index) = pending.get(slot) else {
                    break;
                };
                let outcome = run_task(provider, &tasks[index], prompt, options);
                if tx.send((index, outcome)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut buffered: BTreeMap<usize, RunRecord> = BTreeMap::new();
        let mut cursor = 0;
        for (index, outcome) in rx {
            buffered.insert(index, outcome?);
            while let Some(&index) = pending.get(cursor) {
                let Some(record) = buffered.remove(&index) else {
                    break;
                };
                tracing::info!(task = record.task_id, n = record.n, c = record.c, "task complete");
                commit(&tasks[index], &record, store, dataset)?;
                results[index] = Some(record);
                cursor += 1;
            }
        }
        Ok(())
    })?;
    Ok(results.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::judge::AttemptVerdict;
    use crate::harness::provider::ScriptedProvider;
    use crate::harness::task::parse_suite;

    const GOOD: &str = "```spice
.model nch NMOS (VTO=0.7 KP=110u)
.model pch PMOS (VTO=-0.7 KP=50u)
Vdd vdd 0 1.8
Vin in 0 PULSE(0 1.8 0 1n 1n 10n 20n)
Mp out in vdd vdd pch W=2u L=1u
Mn out in 0 0 nch W=1u L=1u
.tran 0.1n 40n
.end
```";

    fn suite() -> Vec<Task> {
        let one = r#"{"id": ID, "name": "Inverter", "description": "CMOS inverter ID.", "difficulty": "easy",
             "expected_transistors": [2, 2],
             "requirements": {"analyses": ["tran"], "rail": 1.8, "inputs": ["in"], "outputs": ["out"]}}"#;
        parse_suite(&format!("[{},{}]", one.replace("ID", "1"), one.replace("ID", "2"))).unwrap()
    }

    fn opts(n: u32) -> BenchOptions {
        BenchOptions {
            n_attempts: n,
            concurrency: 1,
            repair: RepairOptions {
                max_iters: 1,
                ..RepairOptions::default()
            },
        }
    }

    #[test]
    fn counts_passes_and_resumes() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::open(dir.path()).unwrap();
        let dataset = DatasetStore::open(dir.path().join("data.jsonl")).unwrap();
        let p = ScriptedProvider::new([GOOD, "no", GOOD, "nope", "nope", GOOD]);
        let records = run_benchmark(&suite(), &p, &PilotPrompt::default(), &opts(3), &store, Some(&dataset)).unwrap();
        assert_eq!(records.iter().map(|r| (r.task_id, r.n, r.c)).collect::<Vec<_>>(), [(1, 3, 2), (2, 3, 1)]);
        assert_eq!(records[0].attempts[1].final_verdict, AttemptVerdict::FailParse);
        // Same netlist for both tasks: one dataset line per task.
        assert_eq!(dataset.len(), 2);

        let again = RunStore::open(dir.path()).unwrap();
        let empty = ScriptedProvider::new(Vec::<String>::new());
        let resumed = run_benchmark(&suite(), &empty, &PilotPrompt::default(), &opts(3), &again, None).unwrap();
        assert_eq!(resumed, records);
        assert_eq!(load_records(dir.path()).unwrap().len(), 2);
    }

    #[test]
    fn partial_run_resumes_at_first_incomplete_task() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::open(dir.path()).unwrap();
        let tasks = suite();
        let p = ScriptedProvider::new([GOOD]);
        run_benchmark(&tasks[..1], &p, &PilotPrompt::default(), &opts(1), &store, None).unwrap();
        let p = ScriptedProvider::new([GOOD]);
        let all = run_benchmark(&tasks, &p, &PilotPrompt::default(), &opts(1), &store, None).unwrap();
        assert_eq!(all.iter().map(|r| r.c).collect::<Vec<_>>(), [1, 1]);
        assert_eq!(load_records(store.path()).unwrap().len(), 2);
    }

    #[test]
    fn zero_attempts_is_a_domain_error() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::open(dir.path()).unwrap();
        let p = ScriptedProvider::new([GOOD]);
        assert!(matches!(
            run_benchmark(&suite(), &p, &PilotPrompt::default(), &opts(0), &store, None),
            Err(BenchError::Domain(_))
        ));
    }
}
