use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::circuit::{Circuit, Drive, Mode, Solved};
use super::{DcSolution, SimError, SimOptions, TranTrace};
use crate::netlist::{Netlist, NodeId};

fn solution(circuit: &Circuit, solved: &Solved) -> DcSolution {
    DcSolution {
        node_voltages: circuit.node_voltages(&solved.x),
        source_currents: circuit.source_currents(&solved.x),
        iterations_used: solved.iterations,
        converged: true,
        gmin: solved.gmin,
    }
}

pub(crate) fn operating_point_with(
    circuit: &Circuit,
    drive: &Drive,
    warm: Option<DVector<f64>>,
    options: &SimOptions,
) -> Result<(DcSolution, DVector<f64>), SimError> {
    let solved = circuit.solve_dc(warm, drive, options)?;
    Ok((solution(circuit, &solved), solved.x))
}

pub fn dc_operating_point(netlist: &Netlist, options: &SimOptions) -> Result<DcSolution, SimError> {
    options.validate()?;
    let circuit = Circuit::compile(netlist)?;
    operating_point_with(&circuit, &Drive::dc(), None, options).map(|(s, _)| s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcSweep {
    pub source: String,
    pub values: Vec<f64>,
    pub points: Vec<DcSolution>,
}

fn sweep_values(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, SimError> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
        return Err(SimError::InvalidSweep("bounds must be finite".into()));
    }
    if step <= 0.0 {
        return Err(SimError::InvalidSweep(format!("step {step} must be positive")));
    }
    if start > stop {
        return Err(SimError::InvalidSweep(format!("start {start} exceeds stop {stop}")));
    }
    let count = ((stop - start) / step * (1.0 + 1e-12)).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

/// Operating points with `source` overridden at each value, each warm-started
/// from the previous point.
pub fn dc_sweep(
    netlist: &Netlist,
    source: &str,
    start: f64,
    stop: f64,
    step: f64,
    options: &SimOptions,
) -> Result<DcSweep, SimError> {
    options.validate()?;
    let circuit = Circuit::compile(netlist)?;
    if !circuit.has_source(source) {
        return Err(SimError::UnknownSource {
            name: source.to_string(),
        });
    }
    let values = sweep_values(start, stop, step)?;
    let name = source.to_uppercase();
    let mut points = Vec::with_capacity(values.len());
    let mut warm = None;
    for &value in &values {
        let mut drive = Drive::dc();
        drive.overrides.insert(name.clone(), value);
        let (point, x) =
            operating_point_with(&circuit, &drive, warm.take(), options).map_err(|e| {
                SimError::AtSweepPoint {
                    value,
                    error: Box::new(e),
                }
            })?;
        warm = Some(x);
        points.push(point);
    }
    Ok(DcSweep {
        source: name,
        values,
        points,
    })
}

/// Fixed-step backward Euler from the t = 0 operating point.
pub fn transient(
    netlist: &Netlist,
    tstep: f64,
    tstop: f64,
    options: &SimOptions,
) -> Result<TranTrace, SimError> {
    options.validate()?;
    if !(tstep > 0.0 && tstep.is_finite() && tstop.is_finite()) {
        return Err(SimError::InvalidTransient(format!(
            "tstep {tstep} must be positive and finite"
        )));
    }
    if tstop < 10.0 * tstep * (1.0 - 1e-12) {
        return Err(SimError::InvalidTransient(format!(
            "tstop {tstop} is shorter than 10 steps of {tstep}"
        )));
    }
    let circuit = Circuit::compile(netlist)?;
    let x_dc = circuit.solve_dc(None, &Drive::dc(), options)?.x;
    let steps = (tstop / tstep).round() as usize;

    let mut history = circuit.history_from_dc(&x_dc, tstep);
    let mut x = circuit.tran_vector(&x_dc);
    let mut times = Vec::with_capacity(steps + 1);
    let mut series: Vec<Vec<f64>> = vec![Vec::with_capacity(steps + 1); circuit.nodes.len()];
    let record = |x: &DVector<f64>, series: &mut Vec<Vec<f64>>| {
        for (i, s) in series.iter_mut().enumerate() {
            s.push(x[i]);
        }
    };
    times.push(0.0);
    record(&x, &mut series);

    for k in 1..=steps {
        let time = k as f64 * tstep;
        let drive = Drive {
            time,
            ..Drive::dc()
        };
        let mode = Mode::Tran(&history);
        let (next, iters) = circuit
            .newton(x.clone(), mode, &drive, options, options.gmin)
            .map_err(|e| match e {
                SimError::NonConvergence { iterations } => {
                    SimError::NonConvergenceAt { time, iterations }
                }
                other => other,
            })?;
        let next = circuit.polish(next, iters, mode, &drive, options).x;
        circuit.advance(&mut history, &next);
        x = next;
        times.push(time);
        record(&x, &mut series);
    }
    Ok(TranTrace {
        times,
        node_voltages: circuit.nodes.iter().cloned().zip(series).collect(),
    })
}

/// Central-difference DC gain d V(output) / d V(input) around the nominal bias.
pub fn small_signal_gain(
    netlist: &Netlist,
    input_source: &str,
    output_node: &NodeId,
    delta: f64,
    options: &SimOptions,
) -> Result<f64, SimError> {
    options.validate()?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(SimError::InvalidOptions(format!("gain delta {delta} must be positive")));
    }
    let circuit = Circuit::compile(netlist)?;
    if !circuit.is_voltage_source(input_source) {
        return Err(if circuit.has_source(input_source) {
            SimError::NotAVoltageSource {
                name: input_source.to_string(),
            }
        } else {
            SimError::UnknownSource {
                name: input_source.to_string(),
            }
        });
    }
    let out = if output_node.is_ground() {
        None
    } else {
        Some(
            circuit
                .node_index(output_node)
                .ok_or_else(|| SimError::UnknownNode {
                    node: output_node.clone(),
                })?,
        )
    };
    let name = input_source.to_uppercase();
    let v0 = circuit.source_nominal(&name).unwrap_or(0.0);
    let (_, bias) = operating_point_with(&circuit, &Drive::dc(), None, options)?;
    let at = |v: f64| -> Result<f64, SimError> {
        let mut drive = Drive::dc();
        drive.overrides.insert(name.clone(), v);
        let (_, x) = operating_point_with(&circuit, &drive, Some(bias.clone()), options)?;
        Ok(out.map_or(0.0, |i| x[i]))
    };
    // Divide by the realized step so rounding of v0 +/- delta cancels.
    let (up, down) = (v0 + delta, v0 - delta);
    let hi = at(up)?;
    let lo = at(down)?;
    Ok((hi - lo) / (up - down))
}

/// Net current leaving each non-ground node at an operating point solved with
/// nominal source values, counting the gmin leakage the solution reports.
pub fn kcl_residual(
    netlist: &Netlist,
    solution: &DcSolution,
) -> Result<BTreeMap<NodeId, f64>, SimError> {
    let circuit = Circuit::compile(netlist)?;
    let x = circuit.unknowns_from(solution)?;
    let residual = circuit.residual(&x, Mode::Dc, &Drive::dc(), solution.gmin);
    Ok(circuit.nodes.iter().cloned().zip(residual).collect())
}
