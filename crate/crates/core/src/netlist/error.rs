use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {reason}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub reason: String,
}

impl ParseError {
    pub fn new(line: usize, column: usize, reason: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FlattenError {
    #[error("instance {instance} references unknown subcircuit `{name}`")]
    UnknownSubckt { instance: String, name: String },
    #[error("recursive subcircuit instantiation: {}", cycle.join(" -> "))]
    RecursionDetected { cycle: Vec<String> },
    #[error("instance {instance} connects {given} nodes but `{name}` has {expected} ports")]
    PortMismatch {
        instance: String,
        name: String,
        given: usize,
        expected: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no SPICE netlist found in model output")]
pub struct NoNetlistFound;
