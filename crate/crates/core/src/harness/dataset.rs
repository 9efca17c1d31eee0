use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::judge::AttemptVerdict;
use super::provider::ProviderIdentity;
use super::repair::Attempt;
use super::task::Task;
use crate::lint::{lint, TaskRequirements};
use crate::metrics::{compute_metrics, CircuitMetrics};
use crate::netlist::{flatten, parse_netlist, serialize, ElementKind};

pub const GAIN_METHOD: &str = "finite-difference-dc";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainMeasurement {
    pub value: f64,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub provider: ProviderIdentity,
    pub iterations: u32,
    pub attempt: u32,
    /// Set when a human edited the netlist before it was accepted.
    #[serde(default)]
    pub manual_override: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub task_id: u32,
    pub description: String,
    pub requirements: TaskRequirements,
    /// Canonical serialization of the accepted netlist.
    pub netlist: String,
    pub netlist_sha256: String,
    pub metrics: CircuitMetrics,
    pub gain: Option<GainMeasurement>,
    pub provenance: Provenance,
    pub verdict_trail: Vec<AttemptVerdict>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid dataset record: {0}")]
    InvalidRecord(String),
    #[error("task {task_id} already has netlist {hash}")]
    AlreadyPresent { task_id: u32, hash: String },
    #[error("dataset store {path}: {error}")]
    Io {
        path: String,
        error: std::io::Error,
    },
    #[error("dataset store line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn canonical(text: &str) -> Result<(String, CircuitMetrics), DatasetError> {
    let netlist = parse_netlist(text).map_err(|e| DatasetError::InvalidRecord(e.to_string()))?;
    let flat = if netlist.elements.iter().any(|e| e.kind() == ElementKind::Subckt) {
        flatten(&netlist).map_err(|e| DatasetError::InvalidRecord(e.to_string()))?
    } else {
        netlist.clone()
    };
    Ok((serialize(&netlist), compute_metrics(&flat)))
}

impl DatasetRecord {
    /// Builds a record from a passing attempt; `None` for any other attempt.
    pub fn from_attempt(
        task: &Task,
        attempt: &Attempt,
        provider: &ProviderIdentity,
    ) -> Result<Option<Self>, DatasetError> {
        let Some(text) = attempt.passing_netlist.as_deref() else {
            return Ok(None);
        };
        let (netlist, metrics) = canonical(text)?;
        Ok(Some(DatasetRecord {
            task_id: task.id,
            description: task.description.clone(),
            requirements: task.requirements.clone(),
            netlist_sha256: sha256_hex(&netlist),
            netlist,
            metrics,
            gain: attempt.gain.map(|value| GainMeasurement {
                value,
                method: GAIN_METHOD.to_string(),
            }),
            provenance: Provenance {
                provider: provider.clone(),
                iterations: attempt.iterations_used,
                attempt: attempt.attempt,
                manual_override: false,
            },
            verdict_trail: attempt.verdict_trail(),
        }))
    }

    /// Re-checks the record invariant: the netlist is canonical, hashed
    /// correctly and lints valid against the recorded requirements.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let (canon, _) = canonical(&self.netlist)?;
        if canon != self.netlist {
            return Err(DatasetError::InvalidRecord("netlist is not in canonical form".into()));
        }
        if sha256_hex(&self.netlist) != self.netlist_sha256 {
            return Err(DatasetError::InvalidRecord("netlist hash mismatch".into()));
        }
        let netlist = parse_netlist(&self.netlist).map_err(|e| DatasetError::InvalidRecord(e.to_string()))?;
        let report = lint(&netlist, &self.requirements);
        if !report.is_valid() {
            let rules: Vec<&str> = report.errors().map(|d| d.rule.as_str()).collect();
            return Err(DatasetError::InvalidRecord(format!(
                "netlist no longer lints valid: {}",
                rules.join(", ")
            )));
        }
        Ok(())
    }

    fn key(&self) -> (u32, String) {
        (self.task_id, self.netlist_sha256.clone())
    }
}

struct StoreState {
    keys: BTreeSet<(u32, String)>,
    len: usize,
}

/// Append-only JSON Lines store with one appender.
pub struct DatasetStore {
    path: PathBuf,
    state: Mutex<StoreState>,
}

impl DatasetStore {
    /// Opens or creates the store and validates every existing line.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, DatasetError> {
        let path = path.into();
        let io = |error| DatasetError::Io {
            path: path.display().to_string(),
            error,
        };
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(io(e)),
        };
        let mut state = StoreState {
            keys: BTreeSet::new(),
            len: 0,
        };
        for (i, line) in text.lines().enumerate() {
            let record: DatasetRecord = serde_json::from_str(line).map_err(|e| DatasetError::Corrupt {
                line: i + 1,
                reason: e.to_string(),
            })?;
            record.validate().map_err(|e| DatasetError::Corrupt {
                line: i + 1,
                reason: e.to_string(),
            })?;
            state.keys.insert(record.key());
            state.len += 1;
        }
        Ok(DatasetStore {
            path,
            state: Mutex::new(state),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.state.lock().expect("dataset lock").len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Appends one record and returns its 1-based line number.
    pub fn append(&self, record: &DatasetRecord) -> Result<usize, DatasetError> {
        record.validate()?;
        let mut state = self.state.lock().expect("dataset lock");
        let key = record.key();
        if state.keys.contains(&key) {
            return Err(DatasetError::AlreadyPresent {
                task_id: key.0,
                hash: key.1,
            });
        }
        let io = |error| DatasetError::Io {
            path: self.path.display().to_string(),
            error,
        };
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io)?;
        }
        let line = serde_json::to_string(record).expect("dataset record serializes");
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(io)?;
        writeln!(file, "{line}").map_err(io)?;
        state.keys.insert(key);
        state.len += 1;
        Ok(state.len)
    }

    pub fn records(&self) -> Result<Vec<DatasetRecord>, DatasetError> {
        let _guard = self.state.lock().expect("dataset lock");
        let text = fs::read_to_string(&self.path).unwrap_or_default();
        text.lines()
            .enumerate()
            .map(|(i, line)| {
                serde_json::from_str(line).map_err(|e| DatasetError::Corrupt {
                    line: i + 1,
                    reason: e.to_string(),
                })
            })
            .collect()
    }

    /// Writes the store's lines to `out` unchanged.
    pub fn export(&self, out: &Path) -> Result<(), DatasetError> {
        let _guard = self.state.lock().expect("dataset lock");
        let io = |error| DatasetError::Io {
            path: out.display().to_string(),
            error,
        };
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io)?;
        }
        if self.path.exists() {
            fs::copy(&self.path, out).map_err(io)?;
        } else {
            File::create(out).map_err(io)?;
        }
        Ok(())
    }
}
