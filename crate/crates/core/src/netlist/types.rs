use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A circuit node. Names are stored lower-cased; `gnd` is folded into `0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(name: &str) -> Self {
        let lower = name.to_lowercase();
        if lower == "gnd" {
            NodeId("0".to_string())
        } else {
            NodeId(lower)
        }
    }

    pub fn ground() -> Self {
        NodeId("0".to_string())
    }

    pub fn is_ground(&self) -> bool {
        self.0 == "0"
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId::new(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Resistor,
    Capacitor,
    Inductor,
    Mosfet,
    Bjt,
    VoltageSource,
    CurrentSource,
    Subckt,
}

impl ElementKind {
    pub fn letter(self) -> char {
        match self {
            ElementKind::Resistor => 'R',
            ElementKind::Capacitor => 'C',
            ElementKind::Inductor => 'L',
            ElementKind::Mosfet => 'M',
            ElementKind::Bjt => 'Q',
            ElementKind::VoltageSource => 'V',
            ElementKind::CurrentSource => 'I',
            ElementKind::Subckt => 'X',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        Some(match c.to_ascii_uppercase() {
            'R' => ElementKind::Resistor,
            'C' => ElementKind::Capacitor,
            'L' => ElementKind::Inductor,
            'M' => ElementKind::Mosfet,
            'Q' => ElementKind::Bjt,
            'V' => ElementKind::VoltageSource,
            'I' => ElementKind::CurrentSource,
            'X' => ElementKind::Subckt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosfetParams {
    pub model: String,
    pub w: f64,
    pub l: f64,
    /// Parallel multiplicity; 1 when not given.
    pub m: u32,
    /// Other instance parameters (AD, AS, PD, ...), upper-cased keys.
    pub extra: BTreeMap<String, f64>,
}

impl MosfetParams {
    pub fn aspect_ratio(&self) -> f64 {
        self.w / self.l
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BjtParams {
    pub model: String,
    pub area: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SourceWaveform {
    Dc {
        v: f64,
    },
    Pulse {
        v1: f64,
        v2: f64,
        td: f64,
        tr: f64,
        tf: f64,
        pw: f64,
        per: f64,
    },
    Sin {
        vo: f64,
        va: f64,
        freq: f64,
        td: f64,
        theta: f64,
    },
    Pwl {
        points: Vec<(f64, f64)>,
    },
}

impl SourceWaveform {
    /// Instantaneous value at time `t` (seconds).
    pub fn value_at(&self, t: f64) -> f64 {
        match *self {
            SourceWaveform::Dc { v } => v,
            SourceWaveform::Pulse {
                v1,
                v2,
                td,
                tr,
                tf,
                pw,
                per,
            } => {
                if t < td {
                    return v1;
                }
                let mut local = t - td;
                if per > 0.0 {
                    local %= per;
                }
                if local < tr {
                    v1 + (v2 - v1) * local / tr
                } else if local < tr + pw {
                    v2
                } else if local < tr + pw + tf {
                    v2 + (v1 - v2) * (local - tr - pw) / tf
                } else {
                    v1
                }
            }
            SourceWaveform::Sin {
                vo,
                va,
                freq,
                td,
                theta,
            } => {
                if t < td {
                    vo
                } else {
                    let dt = t - td;
                    vo + va * (-theta * dt).exp() * (2.0 * std::f64::consts::PI * freq * dt).sin()
                }
            }
            SourceWaveform::Pwl { ref points } => {
                let Some(first) = points.first() else {
                    return 0.0;
                };
                if t <= first.0 {
                    return first.1;
                }
                for pair in points.windows(2) {
                    let (t0, v0) = pair[0];
                    let (t1, v1) = pair[1];
                    if t <= t1 {
                        return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
                    }
                }
                points[points.len() - 1].1
            }
        }
    }

    /// Voltage levels the source can reach, used for rail checks.
    pub fn levels(&self) -> Vec<f64> {
        match *self {
            SourceWaveform::Dc { v } => vec![v],
            SourceWaveform::Pulse { v1, v2, .. } => vec![v1, v2],
            SourceWaveform::Sin { vo, va, .. } => vec![vo - va.abs(), vo + va.abs()],
            SourceWaveform::Pwl { ref points } => points.iter().map(|p| p.1).collect(),
        }
    }

    /// Returns a description of the first violated waveform invariant, if any.
    pub fn violation(&self) -> Option<String> {
        match *self {
            SourceWaveform::Dc { v } if !v.is_finite() => Some("DC level is not finite".into()),
            SourceWaveform::Dc { .. } => None,
            SourceWaveform::Pulse {
                td,
                tr,
                tf,
                pw,
                per,
                ..
            } => {
                if tr <= 0.0 {
                    Some(format!("PULSE rise time {tr} must be > 0"))
                } else if tf <= 0.0 {
                    Some(format!("PULSE fall time {tf} must be > 0"))
                } else if pw <= 0.0 {
                    Some(format!("PULSE width {pw} must be > 0"))
                } else if per < tr + tf + pw {
                    Some(format!(
                        "PULSE period {per} is shorter than tr+tf+pw = {}",
                        tr + tf + pw
                    ))
                } else if td < 0.0 {
                    Some(format!("PULSE delay {td} is negative"))
                } else {
                    None
                }
            }
            SourceWaveform::Sin { freq, .. } if freq <= 0.0 => {
                Some(format!("SIN frequency {freq} must be > 0"))
            }
            SourceWaveform::Sin { .. } => None,
            SourceWaveform::Pwl { ref points } => {
                if points.is_empty() {
                    return Some("PWL has no points".into());
                }
                points
                    .windows(2)
                    .find(|w| w[1].0 <= w[0].0)
                    .map(|w| format!("PWL times not strictly increasing at t={}", w[1].0))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub waveform: SourceWaveform,
    /// Small-signal AC magnitude and phase (degrees), carried for external engines.
    pub ac: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ElementPayload {
    Resistor { value: f64 },
    Capacitor { value: f64 },
    Inductor { value: f64 },
    Mosfet(MosfetParams),
    Bjt(BjtParams),
    VoltageSource(SourceSpec),
    CurrentSource(SourceSpec),
    Subckt { subckt: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element {
    /// Upper-cased element name; the first letter encodes the kind.
    pub name: String,
    pub nodes: Vec<NodeId>,
    pub payload: ElementPayload,
}

impl Element {
    pub fn kind(&self) -> ElementKind {
        match self.payload {
            ElementPayload::Resistor { .. } => ElementKind::Resistor,
            ElementPayload::Capacitor { .. } => ElementKind::Capacitor,
            ElementPayload::Inductor { .. } => ElementKind::Inductor,
            ElementPayload::Mosfet(_) => ElementKind::Mosfet,
            ElementPayload::Bjt(_) => ElementKind::Bjt,
            ElementPayload::VoltageSource(_) => ElementKind::VoltageSource,
            ElementPayload::CurrentSource(_) => ElementKind::CurrentSource,
            ElementPayload::Subckt { .. } => ElementKind::Subckt,
        }
    }

    pub fn mosfet(&self) -> Option<&MosfetParams> {
        match &self.payload {
            ElementPayload::Mosfet(p) => Some(p),
            _ => None,
        }
    }

    pub fn source(&self) -> Option<&SourceSpec> {
        match &self.payload {
            ElementPayload::VoltageSource(s) | ElementPayload::CurrentSource(s) => Some(s),
            _ => None,
        }
    }

    /// Model name for M and Q elements.
    pub fn model_name(&self) -> Option<&str> {
        match &self.payload {
            ElementPayload::Mosfet(p) => Some(&p.model),
            ElementPayload::Bjt(p) => Some(&p.model),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModelKind {
    Nmos,
    Pmos,
    Npn,
    Pnp,
}

impl ModelKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ModelKind::Nmos => "NMOS",
            ModelKind::Pmos => "PMOS",
            ModelKind::Npn => "NPN",
            ModelKind::Pnp => "PNP",
        }
    }

    pub fn is_mos(self) -> bool {
        matches!(self, ModelKind::Nmos | ModelKind::Pmos)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCard {
    pub name: String,
    pub kind: ModelKind,
    /// Upper-cased parameter keys (VTO, KP, LAMBDA, ...).
    pub params: BTreeMap<String, f64>,
}

impl ModelCard {
    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisKind {
    Op,
    Dc,
    Tran,
    Ac,
}

impl AnalysisKind {
    pub fn directive(self) -> &'static str {
        match self {
            AnalysisKind::Op => ".op",
            AnalysisKind::Dc => ".dc",
            AnalysisKind::Tran => ".tran",
            AnalysisKind::Ac => ".ac",
        }
    }
}

impl fmt::Display for AnalysisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.directive()[1..])
    }
}

impl std::str::FromStr for AnalysisKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim_start_matches('.').to_ascii_lowercase().as_str() {
            "op" => Ok(AnalysisKind::Op),
            "dc" => Ok(AnalysisKind::Dc),
            "tran" => Ok(AnalysisKind::Tran),
            "ac" => Ok(AnalysisKind::Ac),
            other => Err(format!("unknown analysis kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcVariation {
    Dec,
    Oct,
    Lin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum AnalysisDirective {
    Op,
    Dc {
        source: String,
        start: f64,
        stop: f64,
        step: f64,
    },
    Tran {
        tstep: f64,
        tstop: f64,
        tstart: Option<f64>,
        tmax: Option<f64>,
    },
    Ac {
        variation: AcVariation,
        npoints: u32,
        fstart: f64,
        fstop: f64,
    },
    Temp {
        celsius: f64,
    },
}

impl AnalysisDirective {
    /// The analysis kind, or `None` for `.temp`.
    pub fn kind(&self) -> Option<AnalysisKind> {
        match self {
            AnalysisDirective::Op => Some(AnalysisKind::Op),
            AnalysisDirective::Dc { .. } => Some(AnalysisKind::Dc),
            AnalysisDirective::Tran { .. } => Some(AnalysisKind::Tran),
            AnalysisDirective::Ac { .. } => Some(AnalysisKind::Ac),
            AnalysisDirective::Temp { .. } => None,
        }
    }

    pub fn violation(&self) -> Option<String> {
        match *self {
            AnalysisDirective::Dc {
                start, stop, step, ..
            } => {
                if step <= 0.0 {
                    Some(format!(".dc step {step} must be > 0"))
                } else if stop < start {
                    Some(format!(".dc stop {stop} is below start {start}"))
                } else {
                    None
                }
            }
            AnalysisDirective::Tran { tstep, tstop, .. } => {
                if tstep <= 0.0 {
                    Some(format!(".tran tstep {tstep} must be > 0"))
                } else if tstop <= tstep {
                    Some(format!(".tran tstop {tstop} must exceed tstep {tstep}"))
                } else {
                    None
                }
            }
            AnalysisDirective::Ac {
                npoints,
                fstart,
                fstop,
                ..
            } => {
                if npoints < 1 {
                    Some(".ac needs at least one point".into())
                } else if fstart <= 0.0 || fstop < fstart {
                    Some(format!(".ac frequency range {fstart}..{fstop} is invalid"))
                } else {
                    None
                }
            }
            _ => None,
        }
    }
}

/// A dot-card the parser does not model. Kept verbatim and flagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpaqueDirective {
    /// Full card text, lines joined with `\n` for blocks such as `.control`.
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubcktDef {
    pub name: String,
    pub ports: Vec<NodeId>,
    pub elements: Vec<Element>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Netlist {
    pub title: String,
    pub elements: Vec<Element>,
    pub models: BTreeMap<String, ModelCard>,
    pub directives: Vec<AnalysisDirective>,
    pub subckts: BTreeMap<String, SubcktDef>,
    pub unknown: Vec<OpaqueDirective>,
    pub end_present: bool,
}

impl Netlist {
    pub fn element(&self, name: &str) -> Option<&Element> {
        self.elements
            .iter()
            .find(|e| e.name.eq_ignore_ascii_case(name))
    }

    pub fn model(&self, name: &str) -> Option<&ModelCard> {
        self.models.get(&name.to_uppercase())
    }

    /// Every node touched by a top-level element, in first-seen order.
    pub fn nodes(&self) -> Vec<NodeId> {
        let mut seen = Vec::new();
        for n in self.elements.iter().flat_map(|e| e.nodes.iter()) {
            if !seen.contains(n) {
                seen.push(n.clone());
            }
        }
        seen
    }

    pub fn temperature(&self) -> Option<f64> {
        self.directives.iter().find_map(|d| match d {
            AnalysisDirective::Temp { celsius } => Some(*celsius),
            _ => None,
        })
    }

    pub fn analyses(&self) -> impl Iterator<Item = &AnalysisDirective> {
        self.directives.iter().filter(|d| d.kind().is_some())
    }

    /// Polarity of the model bound to a MOSFET, when the card exists.
    pub fn mos_polarity(&self, element: &Element) -> Option<ModelKind> {
        let model = self.model(element.mosfet()?.model.as_str())?;
        model.kind.is_mos().then_some(model.kind)
    }
}
