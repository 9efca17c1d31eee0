use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::bench::RunRecord;
use super::passk::{pass_at_k, DomainError};
use super::task::Task;
use crate::metrics::Difficulty;

/// Rendering of a tier with no tasks.
pub const EMPTY_CELL: &str = "—";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierRow {
    pub difficulty: Difficulty,
    pub tasks: usize,
    /// Percentages per k; `None` when the tier has no tasks.
    pub cells: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub ks: Vec<u64>,
    pub tiers: Vec<TierRow>,
    /// Mean over all tasks, each task weighted equally.
    pub average: Vec<Option<f64>>,
    /// Tasks with at least one passing attempt.
    pub solved: usize,
    pub task_count: usize,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64 * 100.0)
}

/// Per-tier mean Pass@k in percent. Tiers come from `task_index` when given,
/// else from each record.
pub fn score(
    records: &[RunRecord],
    ks: &[u64],
    task_index: Option<&[Task]>,
) -> Result<ScoreTable, DomainError> {
    if ks.is_empty() {
        return Err(DomainError("at least one k is required".into()));
    }
    let mut seen = BTreeSet::new();
    for r in records {
        if !seen.insert(r.task_id) {
            return Err(DomainError(format!("task {} has more than one record", r.task_id)));
        }
    }
    let tiers_by_id: BTreeMap<u32, Difficulty> = task_index
        .unwrap_or_default()
        .iter()
        .map(|t| (t.id, t.difficulty))
        .collect();

    let mut per_tier: BTreeMap<Difficulty, Vec<Vec<f64>>> = BTreeMap::new();
    let mut all: Vec<Vec<f64>> = vec![Vec::new(); ks.len()];
    for r in records {
        let tier = tiers_by_id.get(&r.task_id).copied().unwrap_or(r.difficulty);
        let columns = per_tier
            .entry(tier)
            .or_insert_with(|| vec![Vec::new(); ks.len()]);
        for (i, &k) in ks.iter().enumerate() {
            let p = pass_at_k(u64::from(r.n), u64::from(r.c), k).map_err(|e| {
                DomainError(format!("task {}: {}", r.task_id, e.0))
            })?;
            columns[i].push(p);
            all[i].push(p);
        }
    }

    let tiers = Difficulty::ALL
        .iter()
        .map(|&difficulty| {
            let columns = per_tier.get(&difficulty);
            TierRow {
                difficulty,
                tasks: columns.map_or(0, |c| c[0].len()),
                cells: (0..ks.len())
                    .map(|i| columns.and_then(|c| mean(&c[i])))
                    .collect(),
            }
        })
        .collect();
    Ok(ScoreTable {
        ks: ks.to_vec(),
        tiers,
        average: all.iter().map(|c| mean(c)).collect(),
        solved: records.iter().filter(|r| r.c >= 1).count(),
        task_count: records.len(),
    })
}

fn cell(value: Option<f64>) -> String {
    value.map_or_else(|| EMPTY_CELL.to_string(), |v| format!("{v:.1}"))
}

impl ScoreTable {
    fn rows(&self) -> Vec<(String, Vec<String>)> {
        let mut rows: Vec<(String, Vec<String>)> = self
            .tiers
            .iter()
            .map(|t| (t.difficulty.label().to_string(), t.cells.iter().map(|&v| cell(v)).collect()))
            .collect();
        rows.push(("Avg".into(), self.average.iter().map(|&v| cell(v)).collect()));
        rows.push(("# Solved".into(), vec![self.solved.to_string(); self.ks.len()]));
        rows
    }

    /// Aligned plain text: tier rows, then `Avg`, then `# Solved`.
    pub fn render_text(&self) -> String {
        let headers: Vec<String> = self.ks.iter().map(|k| format!("Pass@{k}")).collect();
        let widths: Vec<usize> = headers.iter().map(|h| h.len().max(6) + 2).collect();
        let mut out = format!("{:<10}", "Task Level");
        for (h, w) in headers.iter().zip(&widths) {
            let _ = write!(out, "{h:>w$}");
        }
        out.push('\n');
        for (label, cells) in self.rows() {
            let _ = write!(out, "{label:<10}");
            for (c, w) in cells.iter().zip(&widths) {
                let _ = write!(out, "{c:>w$}");
            }
            out.push('\n');
        }
        out
    }

    /// CSV with empty fields for empty tiers.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("level");
        for k in &self.ks {
            let _ = write!(out, ",pass@{k}");
        }
        out.push('\n');
        for (label, cells) in self.rows() {
            out.push_str(&label);
            for c in cells {
                out.push(',');
                if c != EMPTY_CELL {
                    out.push_str(&c);
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::judge::AttemptVerdict;
    use crate::harness::provider::ProviderIdentity;
    use crate::harness::repair::Attempt;

    fn record(task_id: u32, difficulty: Difficulty, n: u32, c: u32) -> RunRecord {
        let attempts = (1..=n)
            .map(|i| Attempt {
                task_id,
                attempt: i,
                iterations: Vec::new(),
                final_verdict: if i <= c { AttemptVerdict::Pass } else { AttemptVerdict::FailLint },
                iterations_used: 1,
                exhausted: false,
                failure_reason: None,
                passing_netlist: None,
                metrics: None,
                gain: None,
            })
            .collect();
        RunRecord {
            task_id,
            difficulty,
            provider: ProviderIdentity::new("scripted", "m"),
            timestamp: String::new(),
            n,
            c,
            attempts,
        }
    }

    #[test]
    fn single_easy_task() {
        let t = score(&[record(1, Difficulty::Easy, 5, 5)], &[1, 5], None).unwrap();
        assert_eq!(t.tiers[0].cells, [Some(100.0), Some(100.0)]);
        assert_eq!(t.solved, 1);
        assert_eq!(t.tiers[2].cells, [None, None]);
    }

    #[test]
    fn medium_mean() {
        let records = [record(1, Difficulty::Medium, 5, 2), record(2, Difficulty::Medium, 5, 5)];
        let t = score(&records, &[1], None).unwrap();
        let got = t.tiers[1].cells[0].unwrap();
        assert!((got - 70.0).abs() < 1e-12);
        assert!(t.render_text().contains("Medium        70.0\n"));
    }

    #[test]
    fn empty_tier_renders_dash() {
        let t = score(&[record(1, Difficulty::Easy, 3, 1)], &[1, 3], None).unwrap();
        let text = t.render_text();
        assert_eq!(
            text,
            "Task Level  Pass@1  Pass@3\n\
             Easy          33.3   100.0\n\
             Medium           —       —\n\
             Hard             —       —\n\
             Extreme          —       —\n\
             Avg           33.3   100.0\n\
             # Solved         1       1\n"
        );
        assert!(t.render_csv().contains("\nHard,,\n"));
    }

    #[test]
    fn k_above_n_and_duplicates_rejected() {
        assert!(score(&[record(1, Difficulty::Easy, 3, 1)], &[5], None).is_err());
        let dup = [record(1, Difficulty::Easy, 3, 1), record(1, Difficulty::Easy, 3, 1)];
        assert!(score(&dup, &[1], None).is_err());
        assert!(score(&[], &[], None).is_err());
    }

    #[test]
    fn task_index_overrides_tier() {
        let suite = crate::harness::task::parse_suite(
            r#"[{"id": 1, "name": "x", "description": "x", "difficulty": "hard",
                 "expected_transistors": [30, 30], "requirements": {"rail": 1.8}}]"#,
        )
        .unwrap();
        let t = score(&[record(1, Difficulty::Easy, 3, 3)], &[1], Some(&suite)).unwrap();
        assert_eq!(t.tiers[2].tasks, 1);
        assert_eq!(t.tiers[0].tasks, 0);
    }
}
