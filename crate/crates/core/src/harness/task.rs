use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lint::TaskRequirements;
use crate::metrics::{classify_difficulty, Difficulty};
use crate::sim::FunctionalSpec;

/// Whether a task row was published as-is or reconstructed to fill the suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskSource {
    Published,
    Reconstructed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: u32,
    pub name: String,
    pub description: String,
    pub difficulty: Difficulty,
    #[serde(rename = "expected_transistors")]
    pub expected_transistor_range: (u32, u32),
    pub requirements: TaskRequirements,
    #[serde(rename = "functional", default, skip_serializing_if = "Option::is_none")]
    pub functional_spec: Option<FunctionalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<TaskSource>,
}

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("cannot read task suite {path}: {error}")]
    Io {
        path: String,
        error: std::io::Error,
    },
    #[error("malformed task suite: {0}")]
    Json(#[from] serde_json::Error),
    #[error("task id {0} appears more than once")]
    DuplicateId(u32),
    #[error("task {id}: {reason}")]
    Invalid { id: u32, reason: String },
    #[error("no task with id {0}")]
    NotFound(u32),
}

impl Task {
    pub fn validate(&self) -> Result<(), TaskError> {
        let invalid = |reason: String| TaskError::Invalid {
            id: self.id,
            reason,
        };
        let (lo, hi) = self.expected_transistor_range;
        if lo > hi {
            return Err(invalid(format!("transistor range {lo}..{hi} is empty")));
        }
        if classify_difficulty(lo) != self.difficulty || classify_difficulty(hi) != self.difficulty {
            return Err(invalid(format!(
                "transistor range {lo}..{hi} leaves the {} tier",
                self.difficulty
            )));
        }
        self.requirements
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        if let Some(spec) = &self.functional_spec {
            spec.validate().map_err(|e| invalid(e.to_string()))?;
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SuiteFile {
    Bare(Vec<Task>),
    Wrapped { tasks: Vec<Task> },
}

/// Parses a suite given either as a JSON array or as `{"tasks": [...]}`.
pub fn parse_suite(text: &str) -> Result<Vec<Task>, TaskError> {
    let tasks = match serde_json::from_str::<SuiteFile>(text) {
        Ok(SuiteFile::Bare(t)) | Ok(SuiteFile::Wrapped { tasks: t }) => t,
        Err(_) => {
            // Re-parse strictly for a precise error location.
            serde_json::from_str::<Vec<Task>>(text)?
        }
    };
    let mut seen = BTreeSet::new();
    for task in &tasks {
        if !seen.insert(task.id) {
            return Err(TaskError::DuplicateId(task.id));
        }
        task.validate()?;
    }
    Ok(tasks)
}

pub fn load_suite(path: &Path) -> Result<Vec<Task>, TaskError> {
    let text = fs::read_to_string(path).map_err(|error| TaskError::Io {
        path: path.display().to_string(),
        error,
    })?;
    parse_suite(&text)
}

pub fn find_task(tasks: &[Task], id: u32) -> Result<&Task, TaskError> {
    tasks.iter().find(|t| t.id == id).ok_or(TaskError::NotFound(id))
}
