use std::fmt::Write;

use super::types::*;
use super::value::format_value as v;

/// Canonical text form: one card per line, upper-case element and model names,
/// lower-case nodes, `{:.6e}` values, `.end` last.
///
/// Order is title, models, subcircuits, elements, analyses, opaque cards.
/// Flattened netlists (names like `X1.R1`) do not survive a re-parse.
pub fn serialize(netlist: &Netlist) -> String {
    let mut out = String::new();
    if netlist.title.is_empty() {
        out.push_str("* untitled\n");
    } else {
        let _ = writeln!(out, ".title {}", netlist.title);
    }
    for model in netlist.models.values() {
        let _ = write!(out, ".model {} {}", model.name, model.kind.keyword());
        for (key, value) in &model.params {
            let _ = write!(out, " {key}={}", v(*value));
        }
        out.push('\n');
    }
    for def in netlist.subckts.values() {
        let _ = write!(out, ".subckt {}", def.name);
        for port in &def.ports {
            let _ = write!(out, " {port}");
        }
        out.push('\n');
        for element in &def.elements {
            out.push_str(&element_card(element));
            out.push('\n');
        }
        let _ = writeln!(out, ".ends {}", def.name);
    }
    for element in &netlist.elements {
        out.push_str(&element_card(element));
        out.push('\n');
    }
    for directive in &netlist.directives {
        out.push_str(&directive_card(directive));
        out.push('\n');
    }
    for opaque in &netlist.unknown {
        out.push_str(&opaque.text);
        out.push('\n');
    }
    out.push_str(".end\n");
    out
}

pub fn element_card(element: &Element) -> String {
    let mut line = element.name.to_uppercase();
    for node in &element.nodes {
        line.push(' ');
        line.push_str(node.as_str());
    }
    match &element.payload {
        ElementPayload::Resistor { value }
        | ElementPayload::Capacitor { value }
        | ElementPayload::Inductor { value } => {
            let _ = write!(line, " {}", v(*value));
        }
        ElementPayload::Mosfet(p) => {
            let _ = write!(line, " {} W={} L={}", p.model, v(p.w), v(p.l));
            if p.m != 1 {
                let _ = write!(line, " M={}", p.m);
            }
            for (key, value) in &p.extra {
                let _ = write!(line, " {key}={}", v(*value));
            }
        }
        ElementPayload::Bjt(p) => {
            let _ = write!(line, " {}", p.model);
            if let Some(area) = p.area {
                let _ = write!(line, " AREA={}", v(area));
            }
        }
        ElementPayload::VoltageSource(spec) | ElementPayload::CurrentSource(spec) => {
            line.push(' ');
            line.push_str(&waveform_text(&spec.waveform));
            if let Some((mag, phase)) = spec.ac {
                let _ = write!(line, " AC {} {}", v(mag), v(phase));
            }
        }
        ElementPayload::Subckt { subckt } => {
            let _ = write!(line, " {subckt}");
        }
    }
    line
}

fn waveform_text(w: &SourceWaveform) -> String {
    match w {
        SourceWaveform::Dc { v: level } => format!("DC {}", v(*level)),
        SourceWaveform::Pulse {
            v1,
            v2,
            td,
            tr,
            tf,
            pw,
            per,
        } => format!(
            "PULSE({} {} {} {} {} {} {})",
            v(*v1),
            v(*v2),
            v(*td),
            v(*tr),
            v(*tf),
            v(*pw),
            v(*per)
        ),
        SourceWaveform::Sin {
            vo,
            va,
            freq,
            td,
            theta,
        } => format!(
            "SIN({} {} {} {} {})",
            v(*vo),
            v(*va),
            v(*freq),
            v(*td),
            v(*theta)
        ),
        SourceWaveform::Pwl { points } => {
            let body: Vec<String> = points
                .iter()
                .map(|(t, val)| format!("{} {}", v(*t), v(*val)))
                .collect();
            format!("PWL({})", body.join(" "))
        }
    }
}

pub fn directive_card(d: &AnalysisDirective) -> String {
    match d {
        AnalysisDirective::Op => ".op".to_string(),
        AnalysisDirective::Dc {
            source,
            start,
            stop,
            step,
        } => format!(".dc {source} {} {} {}", v(*start), v(*stop), v(*step)),
        AnalysisDirective::Tran {
            tstep,
            tstop,
            tstart,
            tmax,
        } => {
            let mut s = format!(".tran {} {}", v(*tstep), v(*tstop));
            if let Some(t) = tstart {
                let _ = write!(s, " {}", v(*t));
            }
            if let Some(t) = tmax {
                let _ = write!(s, " {}", v(*t));
            }
            s
        }
        AnalysisDirective::Ac {
            variation,
            npoints,
            fstart,
            fstop,
        } => {
            let var = match variation {
                AcVariation::Dec => "dec",
                AcVariation::Oct => "oct",
                AcVariation::Lin => "lin",
            };
            format!(".ac {var} {npoints} {} {}", v(*fstart), v(*fstop))
        }
        AnalysisDirective::Temp { celsius } => format!(".temp {}", v(*celsius)),
    }
}
