use std::collections::{BTreeMap, BTreeSet};

use super::{Diagnostic, RuleId, TaskRequirements};
use crate::netlist::{
    AnalysisDirective, ElementKind, ElementPayload, ModelKind, Netlist, NodeId, SourceWaveform,
};

pub const DEFAULT_WL_TARGET: f64 = 2.0;
pub const DEFAULT_WL_REL_TOL: f64 = 0.25;

const WL_MIN: f64 = 0.1;
const WL_MAX: f64 = 1000.0;
const TEMP_MIN: f64 = -55.0;
const TEMP_MAX: f64 = 150.0;

/// Ground, floating nodes, duplicate names, model binding, `.end`.
pub fn check_structure(netlist: &Netlist, req: &TaskRequirements) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    let touches_ground = netlist
        .elements
        .iter()
        .any(|e| e.nodes.iter().any(NodeId::is_ground));
    if !touches_ground {
        out.push(Diagnostic::new(
            RuleId::NoGround,
            "no element is connected to ground (node 0)",
        ));
    }

    // Degree = number of distinct elements touching the node.
    let mut degree: BTreeMap<&NodeId, (usize, &str)> = BTreeMap::new();
    for element in &netlist.elements {
        let unique: BTreeSet<&NodeId> = element.nodes.iter().collect();
        for node in unique {
            let entry = degree.entry(node).or_insert((0, element.name.as_str()));
            entry.0 += 1;
        }
    }
    for (node, (count, element)) in &degree {
        if *count == 1 && !node.is_ground() && !req.output_nodes.contains(node) {
            out.push(
                Diagnostic::new(
                    RuleId::FloatingNode,
                    format!("node `{node}` is connected only to {element}"),
                )
                .with_node((*node).clone())
                .with_element(*element),
            );
        }
    }

    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for element in &netlist.elements {
        *seen.entry(element.name.to_uppercase()).or_default() += 1;
    }
    for (name, count) in seen.iter().filter(|(_, c)| **c > 1) {
        out.push(
            Diagnostic::new(
                RuleId::DupName,
                format!("element name {name} is used {count} times"),
            )
            .with_element(name.clone()),
        );
    }

    for element in &netlist.elements {
        let Some(model_name) = element.model_name() else {
            continue;
        };
        match netlist.model(model_name) {
            None => out.push(
                Diagnostic::new(
                    RuleId::MissingModel,
                    format!("{} references model `{model_name}` which has no .model card", element.name),
                )
                .with_element(element.name.clone()),
            ),
            Some(card) => {
                let wants_mos = element.kind() == ElementKind::Mosfet;
                if card.kind.is_mos() != wants_mos {
                    out.push(
                        Diagnostic::new(
                            RuleId::ModelKindMismatch,
                            format!(
                                "{} is a {} but model `{}` is {}",
                                element.name,
                                if wants_mos { "MOSFET" } else { "BJT" },
                                card.name,
                                card.kind.keyword()
                            ),
                        )
                        .with_element(element.name.clone()),
                    );
                }
            }
        }
    }

    for opaque in &netlist.unknown {
        let head = opaque.text.split_whitespace().next().unwrap_or("");
        out.push(Diagnostic::new(
            RuleId::UnknownDirective,
            format!("directive `{head}` is outside the supported subset and was kept verbatim"),
        ));
    }

    if !netlist.end_present {
        out.push(Diagnostic::new(RuleId::NoEnd, "the netlist has no .end card"));
    }
    out
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Compares median PMOS W/L against median NMOS W/L. Not applicable unless
/// both polarities are present.
pub fn check_wl_ratio(netlist: &Netlist, target_ratio: f64, rel_tol: f64) -> Vec<Diagnostic> {
    let mut pmos = Vec::new();
    let mut nmos = Vec::new();
    for element in &netlist.elements {
        let (Some(params), Some(kind)) = (element.mosfet(), netlist.mos_polarity(element)) else {
            continue;
        };
        match kind {
            ModelKind::Pmos => pmos.push((element, params.aspect_ratio())),
            ModelKind::Nmos => nmos.push((element, params.aspect_ratio())),
            _ => {}
        }
    }
    if pmos.is_empty() || nmos.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (element, ratio) in pmos.iter().chain(nmos.iter()) {
        if !(WL_MIN..=WL_MAX).contains(ratio) {
            out.push(
                Diagnostic::new(
                    RuleId::WlDegenerate,
                    format!(
                        "{} has W/L = {ratio:.4}, outside [{WL_MIN}, {WL_MAX}]",
                        element.name
                    ),
                )
                .with_element(element.name.clone()),
            );
        }
    }
    let mut p: Vec<f64> = pmos.iter().map(|x| x.1).collect();
    let mut n: Vec<f64> = nmos.iter().map(|x| x.1).collect();
    let ratio = median(&mut p) / median(&mut n);
    if ((ratio - target_ratio) / target_ratio).abs() > rel_tol {
        out.push(Diagnostic::new(
            RuleId::WlRatio,
            format!("PMOS/NMOS W/L ratio is {ratio:.1}"),
        ));
    }
    out
}

/// Presence and well-formedness of the analyses the task requires.
pub fn check_analysis(netlist: &Netlist, req: &TaskRequirements) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let present: BTreeSet<_> = netlist.analyses().filter_map(|d| d.kind()).collect();
    if present.is_empty() {
        out.push(Diagnostic::new(
            RuleId::NoAnalysis,
            "the netlist contains no analysis directive",
        ));
    }
    for kind in &req.required_analyses {
        if !present.contains(kind) {
            out.push(Diagnostic::new(
                RuleId::WrongAnalysis,
                format!("the task requires a `{}` analysis, which is missing", kind.directive()),
            ));
        }
    }
    if !req.required_analyses.is_empty() {
        for kind in &present {
            if !req.required_analyses.contains(kind) {
                out.push(Diagnostic::new(
                    RuleId::ExtraAnalysis,
                    format!("`{}` analysis is present but not required", kind.directive()),
                ));
            }
        }
    }
    for directive in &netlist.directives {
        if let Some(problem) = directive.violation() {
            out.push(Diagnostic::new(RuleId::BadAnalysisParams, problem));
        }
        if let AnalysisDirective::Dc { source, .. } = directive {
            let is_source = netlist.element(source).is_some_and(|e| {
                matches!(
                    e.kind(),
                    ElementKind::VoltageSource | ElementKind::CurrentSource
                )
            });
            if !is_source {
                out.push(
                    Diagnostic::new(
                        RuleId::BadAnalysisParams,
                        format!(".dc sweeps `{source}`, which is not an independent source"),
                    )
                    .with_element(source.clone()),
                );
            }
        }
    }
    out
}

/// Input driving, rail levels, waveform constraints and the supply source.
pub fn check_sources(netlist: &Netlist, req: &TaskRequirements) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let rail = req.supply_rail;

    let source_nodes: BTreeSet<&NodeId> = netlist
        .elements
        .iter()
        .filter(|e| e.source().is_some())
        .flat_map(|e| e.nodes.iter())
        .filter(|n| !n.is_ground())
        .collect();
    for input in &req.input_nodes {
        let direct = source_nodes.contains(input);
        let via_resistor = netlist.elements.iter().any(|e| {
            e.kind() == ElementKind::Resistor
                && e.nodes.contains(input)
                && e.nodes
                    .iter()
                    .any(|n| n != input && source_nodes.contains(n))
        });
        if !direct && !via_resistor {
            out.push(
                Diagnostic::new(
                    RuleId::UndrivenInput,
                    format!("input node `{input}` is not driven by any source"),
                )
                .with_node(input.clone()),
            );
        }
    }

    let lo = -0.1 * rail;
    let hi = 1.1 * rail;
    for element in &netlist.elements {
        let Some(spec) = element.source() else {
            continue;
        };
        if let Some(problem) = spec.waveform.violation() {
            out.push(
                Diagnostic::new(RuleId::BadWaveform, format!("{}: {problem}", element.name))
                    .with_element(element.name.clone()),
            );
        }
        if let ElementPayload::VoltageSource(_) = element.payload {
            if let Some(level) = spec.waveform.levels().into_iter().find(|v| *v < lo || *v > hi) {
                out.push(
                    Diagnostic::new(
                        RuleId::LevelOutOfRails,
                        format!(
                            "{} drives {level} V, outside [{lo:.3}, {hi:.3}] V for a {rail} V rail",
                            element.name
                        ),
                    )
                    .with_element(element.name.clone()),
                );
            }
        }
    }

    let has_supply = netlist.elements.iter().any(|e| {
        matches!(&e.payload, ElementPayload::VoltageSource(spec)
            if matches!(spec.waveform, SourceWaveform::Dc { v } if (v.abs() - rail).abs() <= 0.01 * rail))
    });
    if !has_supply {
        out.push(Diagnostic::new(
            RuleId::NoSupply,
            format!("no DC voltage source provides the {rail} V supply rail"),
        ));
    }
    out
}

pub fn check_temperature(netlist: &Netlist, req: &TaskRequirements) -> Vec<Diagnostic> {
    match netlist.temperature() {
        None if req.requires_temp => vec![Diagnostic::new(
            RuleId::NoTemp,
            "no .temp directive; simulators default to 27 \u{b0}C",
        )],
        Some(t) if !(TEMP_MIN..=TEMP_MAX).contains(&t) => vec![Diagnostic::new(
            RuleId::TempRange,
            format!(".temp {t} is outside [{TEMP_MIN}, {TEMP_MAX}] \u{b0}C"),
        )],
        _ => Vec::new(),
    }
}
