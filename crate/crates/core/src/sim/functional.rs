use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::analysis::{operating_point_with, small_signal_gain};
use super::circuit::{Circuit, Drive};
use super::{SimError, SimOptions, DEFAULT_GAIN_DELTA};
use crate::netlist::{
    flatten, Element, ElementKind, ElementPayload, Netlist, NodeId, SourceSpec, SourceWaveform,
};

fn default_low() -> f64 {
    0.1
}

fn default_high() -> f64 {
    0.9
}

/// One combinational (or pinned-state) row: logic levels in {0, 1}.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthRow {
    pub inputs: BTreeMap<NodeId, u8>,
    pub outputs: BTreeMap<NodeId, u8>,
    /// State nodes forced for this row only, for sequential circuits.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub pins: BTreeMap<NodeId, u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalSpec {
    TruthTable {
        rows: Vec<TruthRow>,
        #[serde(default = "default_low")]
        v_low_max: f64,
        #[serde(default = "default_high")]
        v_high_min: f64,
    },
    MinGain {
        input_source: String,
        output_node: NodeId,
        min_abs_gain: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("truth table has no rows")]
    Empty,
    #[error("row {0} repeats an earlier input vector")]
    DuplicateRow(usize),
    #[error("row {0} uses a logic level other than 0 or 1")]
    BadLevel(usize),
    #[error("thresholds must satisfy 0 < v_low_max < v_high_min < 1")]
    Thresholds,
    #[error("min_abs_gain must be positive")]
    Gain,
}

impl FunctionalSpec {
    pub fn truth_table(rows: Vec<TruthRow>) -> Self {
        FunctionalSpec::TruthTable {
            rows,
            v_low_max: default_low(),
            v_high_min: default_high(),
        }
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        match self {
            FunctionalSpec::TruthTable {
                rows,
                v_low_max,
                v_high_min,
            } => {
                if rows.is_empty() {
                    return Err(SpecError::Empty);
                }
                if !(0.0 < *v_low_max && v_low_max < v_high_min && *v_high_min < 1.0) {
                    return Err(SpecError::Thresholds);
                }
                let mut seen = BTreeSet::new();
                for (i, row) in rows.iter().enumerate() {
                    let levels = row.inputs.values().chain(row.outputs.values()).chain(row.pins.values());
                    if levels.into_iter().any(|v| *v > 1) {
                        return Err(SpecError::BadLevel(i));
                    }
                    if !seen.insert((&row.inputs, &row.pins)) {
                        return Err(SpecError::DuplicateRow(i));
                    }
                }
                Ok(())
            }
            FunctionalSpec::MinGain { min_abs_gain, .. } => {
                if *min_abs_gain > 0.0 {
                    Ok(())
                } else {
                    Err(SpecError::Gain)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowReport {
    pub row: usize,
    pub outputs: BTreeMap<NodeId, f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionalFailure {
    Row {
        row: usize,
        node: NodeId,
        expected: u8,
        voltage: f64,
    },
    Gain {
        gain: f64,
        min_abs_gain: f64,
    },
    Unsimulatable {
        reason: String,
    },
}

impl std::fmt::Display for FunctionalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FunctionalFailure::Row {
                row,
                node,
                expected,
                voltage,
            } => write!(
                f,
                "truth-table row {row}: V({node}) = {voltage:.4} V, expected logic {expected}"
            ),
            FunctionalFailure::Gain { gain, min_abs_gain } => {
                write!(f, "|gain| = {:.4} is below the required {min_abs_gain}", gain.abs())
            }
            FunctionalFailure::Unsimulatable { reason } => write!(f, "unsimulatable: {reason}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub passed: bool,
    pub rows: Vec<RowReport>,
    pub gain: Option<f64>,
    pub failure: Option<FunctionalFailure>,
}

impl FunctionalReport {
    fn fail(rows: Vec<RowReport>, gain: Option<f64>, failure: FunctionalFailure) -> Self {
        FunctionalReport {
            passed: false,
            rows,
            gain,
            failure: Some(failure),
        }
    }

    fn unsimulatable(reason: impl ToString) -> Self {
        Self::fail(
            Vec::new(),
            None,
            FunctionalFailure::Unsimulatable {
                reason: reason.to_string(),
            },
        )
    }
}

fn forcing_source(name: String, node: NodeId) -> Element {
    Element {
        name,
        nodes: vec![node, NodeId::ground()],
        payload: ElementPayload::VoltageSource(SourceSpec {
            waveform: SourceWaveform::Dc { v: 0.0 },
            ac: None,
        }),
    }
}

/// Name and orientation sign of a voltage source tied between `node` and ground.
fn grounded_source(netlist: &Netlist, node: &NodeId) -> Option<(String, f64)> {
    netlist.elements.iter().find_map(|e| {
        if e.kind() != ElementKind::VoltageSource {
            return None;
        }
        match (&e.nodes[0], &e.nodes[1]) {
            (p, q) if p == node && q.is_ground() => Some((e.name.to_uppercase(), 1.0)),
            (p, q) if q == node && p.is_ground() => Some((e.name.to_uppercase(), -1.0)),
            _ => None,
        }
    })
}

/// Verifies logic rows by per-row DC solves, or a minimum small-signal gain.
/// Inputs are driven through the grounded source already on the node, or a
/// forcing source when none exists. Solver failures are reported as
/// `Unsimulatable` rather than errors.
pub fn functional_check(
    netlist: &Netlist,
    spec: &FunctionalSpec,
    rail: f64,
    options: &SimOptions,
) -> FunctionalReport {
    if let Err(e) = spec.validate() {
        return FunctionalReport::unsimulatable(e);
    }
    match spec {
        FunctionalSpec::MinGain {
            input_source,
            output_node,
            min_abs_gain,
        } => match small_signal_gain(netlist, input_source, output_node, DEFAULT_GAIN_DELTA, options) {
            Ok(gain) if gain.abs() >= *min_abs_gain => FunctionalReport {
                passed: true,
                rows: Vec::new(),
                gain: Some(gain),
                failure: None,
            },
            Ok(gain) => FunctionalReport::fail(
                Vec::new(),
                Some(gain),
                FunctionalFailure::Gain {
                    gain,
                    min_abs_gain: *min_abs_gain,
                },
            ),
            Err(e) => FunctionalReport::unsimulatable(e),
        },
        FunctionalSpec::TruthTable {
            rows,
            v_low_max,
            v_high_min,
        } => match check_rows(netlist, rows, rail * v_low_max, rail * v_high_min, rail, options) {
            Ok(report) => report,
            Err(e) => FunctionalReport::unsimulatable(e),
        },
    }
}

fn check_rows(
    netlist: &Netlist,
    rows: &[TruthRow],
    low_max: f64,
    high_min: f64,
    rail: f64,
    options: &SimOptions,
) -> Result<FunctionalReport, SimError> {
    let flat = flatten(netlist)?;
    let mut reports = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let mut circuit_netlist = flat.clone();
        let mut drive = Drive::dc();
        let forced = row.inputs.iter().map(|(n, l)| (n, l, false)).chain(row.pins.iter().map(|(n, l)| (n, l, true)));
        for (node, level, is_pin) in forced {
            let existing = if is_pin { None } else { grounded_source(&flat, node) };
            let (name, sign) = existing.unwrap_or_else(|| {
                let name = format!("VFORCE_{}", node.as_str().to_uppercase());
                circuit_netlist
                    .elements
                    .push(forcing_source(name.clone(), node.clone()));
                (name, 1.0)
            });
            drive.overrides.insert(name, sign * f64::from(*level) * rail);
        }
        let circuit = Circuit::compile(&circuit_netlist)?;
        for node in row.outputs.keys() {
            if !node.is_ground() && circuit.node_index(node).is_none() {
                return Err(SimError::UnknownNode { node: node.clone() });
            }
        }
        let (solution, _) = operating_point_with(&circuit, &drive, None, options)?;
        let mut outputs = BTreeMap::new();
        let mut violation = None;
        for (node, expected) in &row.outputs {
            let v = solution.voltage(node).unwrap_or(0.0);
            outputs.insert(node.clone(), v);
            let ok = if *expected == 1 { v >= high_min } else { v <= low_max };
            if !ok && violation.is_none() {
                violation = Some(FunctionalFailure::Row {
                    row: i,
                    node: node.clone(),
                    expected: *expected,
                    voltage: v,
                });
            }
        }
        reports.push(RowReport {
            row: i,
            outputs,
            passed: violation.is_none(),
        });
        if let Some(failure) = violation {
            return Ok(FunctionalReport::fail(reports, None, failure));
        }
    }
    Ok(FunctionalReport {
        passed: true,
        rows: reports,
        gain: None,
        failure: None,
    })
}
