//! Modified nodal analysis with a Level-1 MOSFET model.
//!
//! Node voltages and voltage-source branch currents are the unknowns. A gmin
//! conductance ties every node to ground while Newton iterates; a converged
//! point is then polished without gmin whenever that system is non-singular.

mod analysis;
mod circuit;
pub mod device;
mod engine;
mod functional;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{FlattenError, NodeId};

pub use analysis::{dc_operating_point, dc_sweep, kcl_residual, small_signal_gain, transient, DcSweep};
pub use engine::{external_engine_run, parse_node_table, EngineConfig, EngineError, EngineRun, ENGINE_ENV};
pub use functional::{
    functional_check, FunctionalFailure, FunctionalReport, FunctionalSpec, RowReport, SpecError,
    TruthRow,
};

pub const DEFAULT_GAIN_DELTA: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimOptions {
    pub abstol: f64,
    pub reltol: f64,
    pub vntol: f64,
    pub gmin: f64,
    pub max_newton_iter: usize,
    pub temp_celsius: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            abstol: 1e-12,
            reltol: 1e-6,
            vntol: 1e-9,
            gmin: 1e-12,
            max_newton_iter: 200,
            temp_celsius: 27.0,
        }
    }
}

impl SimOptions {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [self.abstol, self.reltol, self.vntol, self.gmin];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) || self.max_newton_iter == 0 {
            return Err(SimError::InvalidOptions(
                "tolerances, gmin and max_newton_iter must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcSolution {
    /// Includes ground at exactly 0 V.
    pub node_voltages: BTreeMap<NodeId, f64>,
    /// Current into each voltage source's positive terminal.
    pub source_currents: BTreeMap<String, f64>,
    pub iterations_used: usize,
    pub converged: bool,
    /// Ground leakage present in the solved system; 0 once polished away.
    #[serde(default)]
    pub gmin: f64,
}

impl DcSolution {
    pub fn voltage(&self, node: &NodeId) -> Option<f64> {
        self.node_voltages.get(node).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranTrace {
    pub times: Vec<f64>,
    /// Non-ground nodes only; each series has `times.len()` samples.
    pub node_voltages: BTreeMap<NodeId, Vec<f64>>,
}

impl TranTrace {
    pub fn series(&self, node: &NodeId) -> Option<&[f64]> {
        if node.is_ground() {
            return None;
        }
        self.node_voltages.get(node).map(Vec::as_slice)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time");
        for node in self.node_voltages.keys() {
            out.push(',');
            out.push_str(node.as_str());
        }
        out.push('\n');
        for (i, t) in self.times.iter().enumerate() {
            out.push_str(&format!("{t:e}"));
            for series in self.node_voltages.values() {
                out.push_str(&format!(",{:e}", series[i]));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("Newton iteration did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("Newton iteration did not converge at t = {time:e} s after {iterations} iterations")]
    NonConvergenceAt { time: f64, iterations: usize },
    #[error("the MNA matrix is singular (check for voltage-source or inductor loops)")]
    SingularMatrix,
    #[error("element {name} is not supported by the internal simulator")]
    UnsupportedElement { name: String },
    #[error("{element} references missing or non-MOS model `{model}`")]
    MissingModel { element: String, model: String },
    #[error("no element connects to ground")]
    NoGround,
    #[error("no independent source named {name}")]
    UnknownSource { name: String },
    #[error("{name} is not a voltage source")]
    NotAVoltageSource { name: String },
    #[error("node `{node}` does not exist")]
    UnknownNode { node: NodeId },
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("invalid transient window: {0}")]
    InvalidTransient(String),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("subcircuit expansion failed: {0}")]
    Flatten(#[from] FlattenError),
    #[error("at sweep value {value:e}: {error}")]
    AtSweepPoint {
        value: f64,
        error: Box<SimError>,
    },
}
