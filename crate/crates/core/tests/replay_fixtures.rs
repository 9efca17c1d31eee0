//! Rebuilds the shipped replay fixtures from the scripted responses and checks
//! them against the checked-in copies. Set `SPICEPILOT_REGENERATE=1` to
//! rewrite the checked-in fixtures instead.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use spicepilot_core::harness::{
    load_suite, run_benchmark, AttemptVerdict, BenchOptions, DatasetStore, PilotPrompt, RecordingProvider,
    RepairOptions, ReplayProvider, RunStore, ScriptedProvider,
};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/replay")
}

fn script() -> Vec<String> {
    let dir = fixtures().join("script");
    let order: BTreeMap<String, Vec<String>> =
        serde_json::from_str(&fs::read_to_string(dir.join("order.json")).unwrap()).unwrap();
    let suite = load_suite(&fixtures().join("suite.json")).unwrap();
    suite
        .iter()
        .flat_map(|t| order[&t.id.to_string()].clone())
        .map(|name| fs::read_to_string(dir.join(format!("{name}.txt"))).unwrap())
        .collect()
}

fn options() -> BenchOptions {
    BenchOptions {
        n_attempts: 3,
        concurrency: 1,
        repair: RepairOptions {
            max_iters: 3,
            ..RepairOptions::default()
        },
    }
}

fn read_dir(dir: &Path) -> BTreeMap<String, String> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap()))
        .collect()
}

#[test]
fn recorded_fixtures_are_current() {
    let suite = load_suite(&fixtures().join("suite.json")).unwrap();
    let work = tempfile::tempdir().unwrap();
    let responses = work.path().join("responses");
    let recorder = RecordingProvider::new(ScriptedProvider::new(script()), &responses);
    let store = RunStore::open(&work.path().join("runs")).unwrap();
    let dataset = DatasetStore::open(work.path().join("dataset.jsonl")).unwrap();
    let records = run_benchmark(&suite, &recorder, &PilotPrompt::default(), &options(), &store, Some(&dataset)).unwrap();

    let trails: Vec<Vec<Vec<AttemptVerdict>>> = records
        .iter()
        .map(|r| r.attempts.iter().map(|a| a.verdict_trail()).collect())
        .collect();
    use AttemptVerdict::*;
    assert_eq!(
        trails,
        vec![
            vec![vec![Pass], vec![FailLint, Pass], vec![Pass]],
            vec![vec![FailLint, Pass], vec![Pass], vec![FailFunctional; 3]],
            vec![vec![Pass], vec![FailParse, FailLint, FailFunctional], vec![FailBudget]],
        ]
    );
    assert_eq!(records.iter().map(|r| r.c).collect::<Vec<_>>(), [3, 2, 1]);
    assert_eq!(dataset.len(), 4);

    let shipped = fixtures().join("responses");
    if std::env::var_os("SPICEPILOT_REGENERATE").is_some() {
        fs::create_dir_all(&shipped).unwrap();
        for old in read_dir(&shipped).keys() {
            fs::remove_file(shipped.join(old)).unwrap();
        }
        for (name, text) in read_dir(&responses) {
            fs::write(shipped.join(name), text).unwrap();
        }
    }
    assert_eq!(read_dir(&responses), read_dir(&shipped), "replay fixtures are stale; regenerate them");

    // Replaying the recorded fixtures reproduces the scripted run exactly.
    let replay_store = RunStore::open(&work.path().join("replayed")).unwrap();
    let replayed = run_benchmark(
        &suite,
        &ReplayProvider::new(&shipped),
        &PilotPrompt::default(),
        &options(),
        &replay_store,
        None,
    )
    .unwrap();
    for (a, b) in records.iter().zip(&replayed) {
        assert_eq!(a.attempts, b.attempts);
    }
}
