use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};

use super::device::{terminal_current, Level1};
use super::{DcSolution, SimError, SimOptions};
use crate::netlist::{flatten, ElementKind, ElementPayload, Netlist, NodeId, SourceSpec};

type Node = Option<usize>;

#[derive(Debug, Clone)]
struct Two {
    name: String,
    a: Node,
    b: Node,
    value: f64,
}

#[derive(Debug, Clone)]
struct Source {
    name: String,
    a: Node,
    b: Node,
    spec: SourceSpec,
}

#[derive(Debug, Clone)]
struct Mos {
    d: Node,
    g: Node,
    s: Node,
    model: Level1,
    beta: f64,
}

/// A flattened netlist compiled into index form.
#[derive(Debug, Clone)]
pub(crate) struct Circuit {
    pub nodes: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    resistors: Vec<Two>,
    capacitors: Vec<Two>,
    inductors: Vec<Two>,
    vsources: Vec<Source>,
    isources: Vec<Source>,
    mosfets: Vec<Mos>,
}

/// Source values for one solve: time point, global scale and per-source
/// DC overrides keyed by upper-case name.
#[derive(Debug, Clone, Default)]
pub(crate) struct Drive {
    pub time: f64,
    pub scale: f64,
    pub overrides: BTreeMap<String, f64>,
}

impl Drive {
    pub fn dc() -> Self {
        Drive {
            time: 0.0,
            scale: 1.0,
            overrides: BTreeMap::new(),
        }
    }

    fn value(&self, source: &Source) -> f64 {
        let v = match self.overrides.get(&source.name) {
            Some(v) => *v,
            None => source.spec.waveform.value_at(self.time),
        };
        self.scale * v
    }
}

/// A converged unknown vector and the ground leakage in effect there.
#[derive(Debug, Clone)]
pub(crate) struct Solved {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub gmin: f64,
}

/// Reactive-element state carried between backward-Euler steps.
#[derive(Debug, Clone)]
pub(crate) struct History {
    pub dt: f64,
    pub cap_voltages: Vec<f64>,
    pub ind_currents: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Mode<'a> {
    Dc,
    Tran(&'a History),
}

fn volt(x: &DVector<f64>, n: Node) -> f64 {
    n.map_or(0.0, |i| x[i])
}

fn add(a: &mut DMatrix<f64>, r: Node, c: Node, v: f64) {
    if let (Some(r), Some(c)) = (r, c) {
        a[(r, c)] += v;
    }
}

fn add_rhs(b: &mut DVector<f64>, r: Node, v: f64) {
    if let Some(r) = r {
        b[r] += v;
    }
}

fn stamp_conductance(a: &mut DMatrix<f64>, p: Node, q: Node, g: f64) {
    add(a, p, p, g);
    add(a, q, q, g);
    add(a, p, q, -g);
    add(a, q, p, -g);
}

impl Circuit {
    pub fn compile(netlist: &Netlist) -> Result<Circuit, SimError> {
        let flat_storage;
        let netlist = if netlist.elements.iter().any(|e| e.kind() == ElementKind::Subckt) {
            flat_storage = flatten(netlist)?;
            &flat_storage
        } else {
            netlist
        };
        if !netlist
            .elements
            .iter()
            .any(|e| e.nodes.iter().any(NodeId::is_ground))
        {
            return Err(SimError::NoGround);
        }
        let mut nodes: Vec<NodeId> = netlist
            .nodes()
            .into_iter()
            .filter(|n| !n.is_ground())
            .collect();
        nodes.sort();
        let index: HashMap<NodeId, usize> =
            nodes.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        let at = |n: &NodeId| index.get(n).copied();

        let mut c = Circuit {
            nodes: nodes.clone(),
            index: index.clone(),
            resistors: Vec::new(),
            capacitors: Vec::new(),
            inductors: Vec::new(),
            vsources: Vec::new(),
            isources: Vec::new(),
            mosfets: Vec::new(),
        };
        for e in &netlist.elements {
            let two = |value: f64| Two {
                name: e.name.to_uppercase(),
                a: at(&e.nodes[0]),
                b: at(&e.nodes[1]),
                value,
            };
            match &e.payload {
                ElementPayload::Resistor { value } => c.resistors.push(two(*value)),
                ElementPayload::Capacitor { value } => c.capacitors.push(two(*value)),
                ElementPayload::Inductor { value } => c.inductors.push(two(*value)),
                ElementPayload::VoltageSource(spec) | ElementPayload::CurrentSource(spec) => {
                    let s = Source {
                        name: e.name.to_uppercase(),
                        a: at(&e.nodes[0]),
                        b: at(&e.nodes[1]),
                        spec: spec.clone(),
                    };
                    if e.kind() == ElementKind::VoltageSource {
                        c.vsources.push(s);
                    } else {
                        c.isources.push(s);
                    }
                }
                ElementPayload::Mosfet(p) => {
                    let card = netlist
                        .model(&p.model)
                        .filter(|m| m.kind.is_mos())
                        .ok_or_else(|| SimError::MissingModel {
                            element: e.name.clone(),
                            model: p.model.clone(),
                        })?;
                    let model = Level1::from_card(card);
                    c.mosfets.push(Mos {
                        d: at(&e.nodes[0]),
                        g: at(&e.nodes[1]),
                        s: at(&e.nodes[2]),
                        beta: model.kp * p.aspect_ratio() * f64::from(p.m),
                        model,
                    });
                }
                ElementPayload::Bjt(_) | ElementPayload::Subckt { .. } => {
                    return Err(SimError::UnsupportedElement {
                        name: e.name.clone(),
                    })
                }
            }
        }
        Ok(c)
    }

    pub fn node_index(&self, node: &NodeId) -> Option<usize> {
        self.index.get(node).copied()
    }

    pub fn has_source(&self, name: &str) -> bool {
        let name = name.to_uppercase();
        self.vsources.iter().chain(&self.isources).any(|s| s.name == name)
    }

    pub fn is_voltage_source(&self, name: &str) -> bool {
        let name = name.to_uppercase();
        self.vsources.iter().any(|s| s.name == name)
    }

    /// DC value of a source at t = 0, before overrides.
    pub fn source_nominal(&self, name: &str) -> Option<f64> {
        let name = name.to_uppercase();
        self.vsources
            .iter()
            .chain(&self.isources)
            .find(|s| s.name == name)
            .map(|s| s.spec.waveform.value_at(0.0))
    }

    pub fn is_linear(&self) -> bool {
        self.mosfets.is_empty()
    }

    /// Number of unknowns; inductors carry a branch current only in DC.
    pub fn size(&self, mode: Mode) -> usize {
        let base = self.nodes.len() + self.vsources.len();
        match mode {
            Mode::Dc => base + self.inductors.len(),
            Mode::Tran(_) => base,
        }
    }

    /// Jacobian and right-hand side linearized at `x`. Node rows read
    /// "sum of currents leaving the node = 0".
    pub fn assemble(
        &self,
        x: &DVector<f64>,
        mode: Mode,
        drive: &Drive,
        gmin: f64,
    ) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.size(mode);
        let nn = self.nodes.len();
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for i in 0..nn {
            a[(i, i)] += gmin;
        }
        for r in &self.resistors {
            stamp_conductance(&mut a, r.a, r.b, 1.0 / r.value);
        }
        for (k, s) in self.vsources.iter().enumerate() {
            let row = Some(nn + k);
            add(&mut a, s.a, row, 1.0);
            add(&mut a, s.b, row, -1.0);
            add(&mut a, row, s.a, 1.0);
            add(&mut a, row, s.b, -1.0);
            b[nn + k] = drive.value(s);
        }
        for s in &self.isources {
            // Positive current flows from a through the source to b.
            let i = drive.value(s);
            add_rhs(&mut b, s.a, -i);
            add_rhs(&mut b, s.b, i);
        }
        match mode {
            Mode::Dc => {
                let base = nn + self.vsources.len();
                for (k, l) in self.inductors.iter().enumerate() {
                    let row = Some(base + k);
                    add(&mut a, l.a, row, 1.0);
                    add(&mut a, l.b, row, -1.0);
                    add(&mut a, row, l.a, 1.0);
                    add(&mut a, row, l.b, -1.0);
                }
            }
            Mode::Tran(h) => {
                for (k, c) in self.capacitors.iter().enumerate() {
                    let g = c.value / h.dt;
                    stamp_conductance(&mut a, c.a, c.b, g);
                    let hist = g * h.cap_voltages[k];
                    add_rhs(&mut b, c.a, hist);
                    add_rhs(&mut b, c.b, -hist);
                }
                for (k, l) in self.inductors.iter().enumerate() {
                    let g = h.dt / l.value;
                    stamp_conductance(&mut a, l.a, l.b, g);
                    let i0 = h.ind_currents[k];
                    add_rhs(&mut b, l.a, -i0);
                    add_rhs(&mut b, l.b, i0);
                }
            }
        }
        for m in &self.mosfets {
            let v = [volt(x, m.d), volt(x, m.g), volt(x, m.s)];
            let (id, grad) = terminal_current(&m.model, m.beta, v[0], v[1], v[2]);
            let terms = [m.d, m.g, m.s];
            let mut eq = id;
            for k in 0..3 {
                add(&mut a, m.d, terms[k], grad[k]);
                add(&mut a, m.s, terms[k], -grad[k]);
                eq -= grad[k] * v[k];
            }
            add_rhs(&mut b, m.d, -eq);
            add_rhs(&mut b, m.s, eq);
        }
        (a, b)
    }

    /// Per-node net current leaving each non-ground node at `x`.
    pub fn residual(&self, x: &DVector<f64>, mode: Mode, drive: &Drive, gmin: f64) -> Vec<f64> {
        let (a, b) = self.assemble(x, mode, drive, gmin);
        let r = &a * x - &b;
        r.iter().take(self.nodes.len()).copied().collect()
    }

    fn converged_step(&self, old: &DVector<f64>, new: &DVector<f64>, opts: &SimOptions) -> bool {
        let nn = self.nodes.len();
        old.iter().zip(new.iter()).enumerate().all(|(i, (o, n))| {
            let floor = if i < nn { opts.vntol } else { opts.abstol };
            (n - o).abs() <= floor + opts.reltol * n.abs()
        })
    }

    /// Plain Newton from `x0`. Returns the solution and the number of
    /// linear solves performed.
    pub fn newton(
        &self,
        x0: DVector<f64>,
        mode: Mode,
        drive: &Drive,
        opts: &SimOptions,
        gmin: f64,
    ) -> Result<(DVector<f64>, usize), SimError> {
        let nn = self.nodes.len();
        let mut x = x0;
        let mut step_small = false;
        for it in 0..=opts.max_newton_iter {
            let (a, b) = self.assemble(&x, mode, drive, gmin);
            if step_small {
                let r = &a * &x - &b;
                if r.iter().take(nn).all(|v| v.abs() <= opts.abstol) {
                    return Ok((x, it));
                }
            }
            if it == opts.max_newton_iter {
                break;
            }
            let next = solve(a, b)?;
            step_small = self.converged_step(&x, &next, opts);
            x = if self.is_linear() {
                next
            } else {
                limit_step(&x, &next, nn)
            };
        }
        Err(SimError::NonConvergence {
            iterations: opts.max_newton_iter,
        })
    }

    /// Newton with gmin, falling back to source stepping, then a gmin-free
    /// polish when that system is solvable.
    pub fn solve_dc(
        &self,
        x0: Option<DVector<f64>>,
        drive: &Drive,
        opts: &SimOptions,
    ) -> Result<Solved, SimError> {
        let n = self.size(Mode::Dc);
        let start = x0.unwrap_or_else(|| DVector::zeros(n));
        let (x, iters) = match self.newton(start, Mode::Dc, drive, opts, opts.gmin) {
            Ok(ok) => ok,
            Err(SimError::NonConvergence { .. }) => self.source_stepping(drive, opts)?,
            Err(e) => return Err(e),
        };
        Ok(self.polish(x, iters, Mode::Dc, drive, opts))
    }

    fn source_stepping(
        &self,
        drive: &Drive,
        opts: &SimOptions,
    ) -> Result<(DVector<f64>, usize), SimError> {
        let mut x = DVector::zeros(self.size(Mode::Dc));
        let mut scale: f64 = 0.0;
        let mut step: f64 = 0.1;
        let mut total = 0;
        while scale < 1.0 {
            let target = (scale + step).min(1.0);
            let stepped = Drive {
                scale: drive.scale * target,
                ..drive.clone()
            };
            match self.newton(x.clone(), Mode::Dc, &stepped, opts, opts.gmin) {
                Ok((next, it)) => {
                    total += it;
                    x = next;
                    scale = target;
                    step = (step * 2.0).min(0.25);
                }
                Err(SimError::NonConvergence { iterations }) => {
                    total += iterations;
                    step /= 4.0;
                    if step < 1e-4 {
                        return Err(SimError::NonConvergence { iterations: total });
                    }
                }
                Err(e) => return Err(e),
            }
        }
        Ok((x, total))
    }

    pub fn polish(
        &self,
        x: DVector<f64>,
        iters: usize,
        mode: Mode,
        drive: &Drive,
        opts: &SimOptions,
    ) -> Solved {
        let quick = SimOptions {
            max_newton_iter: 8,
            ..opts.clone()
        };
        match self.newton(x.clone(), mode, drive, &quick, 0.0) {
            Ok((polished, extra)) if polished.iter().all(|v| v.is_finite()) => Solved {
                x: polished,
                iterations: iters + extra,
                gmin: 0.0,
            },
            _ => Solved {
                x,
                iterations: iters,
                gmin: opts.gmin,
            },
        }
    }

    pub fn node_voltages(&self, x: &DVector<f64>) -> BTreeMap<NodeId, f64> {
        let mut out: BTreeMap<NodeId, f64> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), x[i]))
            .collect();
        out.insert(NodeId::ground(), 0.0);
        out
    }

    /// Voltage-source branch currents, plus inductor currents when `x` is a
    /// DC vector (inductors act as zero-volt sources there).
    pub fn source_currents(&self, x: &DVector<f64>) -> BTreeMap<String, f64> {
        let nn = self.nodes.len();
        let base = nn + self.vsources.len();
        let mut out: BTreeMap<String, f64> = self
            .vsources
            .iter()
            .enumerate()
            .map(|(k, s)| (s.name.clone(), x[nn + k]))
            .collect();
        if x.len() == base + self.inductors.len() {
            for (k, l) in self.inductors.iter().enumerate() {
                out.insert(l.name.clone(), x[base + k]);
            }
        }
        out
    }

    /// DC unknown vector rebuilt from a reported solution.
    pub fn unknowns_from(&self, sol: &DcSolution) -> Result<DVector<f64>, SimError> {
        let mut x = DVector::zeros(self.size(Mode::Dc));
        for (i, n) in self.nodes.iter().enumerate() {
            x[i] = sol
                .voltage(n)
                .ok_or_else(|| SimError::UnknownNode { node: n.clone() })?;
        }
        let names = self.vsources.iter().map(|s| &s.name).chain(self.inductors.iter().map(|l| &l.name));
        for (k, name) in names.enumerate() {
            x[self.nodes.len() + k] = *sol
                .source_currents
                .get(name)
                .ok_or_else(|| SimError::UnknownSource { name: name.clone() })?;
        }
        Ok(x)
    }

    /// Reactive state implied by a DC solution, for starting a transient.
    pub fn history_from_dc(&self, x: &DVector<f64>, dt: f64) -> History {
        let base = self.nodes.len() + self.vsources.len();
        History {
            dt,
            cap_voltages: self
                .capacitors
                .iter()
                .map(|c| volt(x, c.a) - volt(x, c.b))
                .collect(),
            ind_currents: (0..self.inductors.len()).map(|k| x[base + k]).collect(),
        }
    }

    /// Advances reactive state after a converged step at `x`.
    pub fn advance(&self, h: &mut History, x: &DVector<f64>) {
        for (k, c) in self.capacitors.iter().enumerate() {
            h.cap_voltages[k] = volt(x, c.a) - volt(x, c.b);
        }
        for (k, l) in self.inductors.iter().enumerate() {
            h.ind_currents[k] += h.dt / l.value * (volt(x, l.a) - volt(x, l.b));
        }
    }

    /// Transient unknowns from DC unknowns (drops inductor branches).
    pub fn tran_vector(&self, x_dc: &DVector<f64>) -> DVector<f64> {
        x_dc.rows(0, self.nodes.len() + self.vsources.len()).into_owned()
    }
}

const MAX_NODE_STEP: f64 = 0.5;

/// Scales a Newton update so no node voltage moves more than `MAX_NODE_STEP`.
fn limit_step(old: &DVector<f64>, new: &DVector<f64>, nodes: usize) -> DVector<f64> {
    let worst = (0..nodes)
        .map(|i| (new[i] - old[i]).abs())
        .fold(0.0, f64::max);
    if worst <= MAX_NODE_STEP {
        return new.clone();
    }
    let alpha = MAX_NODE_STEP / worst;
    old + (new - old) * alpha
}

fn solve(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>, SimError> {
    let x = a.lu().solve(&b).ok_or(SimError::SingularMatrix)?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(SimError::SingularMatrix)
    }
}
