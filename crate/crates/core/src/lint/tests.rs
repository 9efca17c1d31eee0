use super::*;
use crate::netlist::parse_netlist;

const INVERTER: &str = "CMOS inverter
.model nch NMOS VTO=0.7 KP=110u LAMBDA=0.02
.model pch PMOS VTO=-0.7 KP=50u LAMBDA=0.02
Vdd vdd 0 DC 1.8
Vin in 0 PULSE(0 1.8 0 100p 100p 5n 10n)
Mp out in vdd vdd pch W=2u L=1u
Mn out in 0 0 nch W=1u L=1u
Cl out 0 10f
.tran 10p 20n
.end
";

fn inverter_req() -> TaskRequirements {
    TaskRequirements {
        required_analyses: [AnalysisKind::Tran].into(),
        supply_rail: 1.8,
        input_nodes: vec![NodeId::new("in")],
        output_nodes: vec![NodeId::new("out")],
        requires_temp: false,
        expected_transistor_range: None,
    }
}

fn rules_of(d: &[Diagnostic]) -> Vec<RuleId> {
    d.iter().map(|d| d.rule).collect()
}

#[test]
fn golden_inverter_is_clean() {
    let n = parse_netlist(INVERTER).unwrap();
    assert!(check_structure(&n, &inverter_req()).is_empty());
    let report = lint(&n, &inverter_req());
    assert_eq!(report.verdict, Verdict::Valid);
    assert!(report.diagnostics.is_empty(), "{:?}", report.diagnostics);
}

#[test]
fn lone_resistor_has_no_ground_and_two_floating_nodes() {
    let n = parse_netlist("R1 1 2 1k").unwrap();
    let d = check_structure(&n, &TaskRequirements::default());
    let structural: Vec<_> = rules_of(&d)
        .into_iter()
        .filter(|r| *r != RuleId::NoEnd)
        .collect();
    assert_eq!(
        structural,
        [RuleId::NoGround, RuleId::FloatingNode, RuleId::FloatingNode]
    );
}

#[test]
fn missing_model() {
    let n = parse_netlist("t\nV1 d 0 1\nM1 d d 0 0 NMOS1 W=1u L=1u\n.end").unwrap();
    let d = check_structure(&n, &TaskRequirements::default());
    assert_eq!(rules_of(&d), [RuleId::MissingModel]);
}

#[test]
fn model_kind_mismatch_and_duplicates() {
    let n = parse_netlist(
        "t\n.model q1 NPN BF=100\nV1 d 0 1\nM1 d d 0 0 q1 W=1u L=1u\nR1 d 0 1k\nr1 d 0 2k\n.end",
    )
    .unwrap();
    let d = check_structure(&n, &TaskRequirements::default());
    assert_eq!(rules_of(&d), [RuleId::DupName, RuleId::ModelKindMismatch]);
}

#[test]
fn wl_ratio_cases() {
    let n = parse_netlist(INVERTER).unwrap();
    assert!(check_wl_ratio(&n, 2.0, 0.25).is_empty());

    let one_to_one = INVERTER.replace("pch W=2u", "pch W=1u");
    let n = parse_netlist(&one_to_one).unwrap();
    let d = check_wl_ratio(&n, 2.0, 0.25);
    assert_eq!(rules_of(&d), [RuleId::WlRatio]);
    assert_eq!(d[0].severity, Severity::Warning);
    assert_eq!(d[0].message, "PMOS/NMOS W/L ratio is 1.0");

    let pass_gate = "t\n.model nch NMOS\nV1 a 0 1.8\nM1 a g b 0 nch W=1u L=1u\nM2 b g c 0 nch W=1u L=1u\n.end";
    assert!(check_wl_ratio(&parse_netlist(pass_gate).unwrap(), 2.0, 0.25).is_empty());

    let degenerate = INVERTER.replace("nch W=1u L=1u", "nch W=1u L=1m");
    let d = check_wl_ratio(&parse_netlist(&degenerate).unwrap(), 2.0, 0.25);
    assert!(d.iter().any(|d| d.rule == RuleId::WlDegenerate && d.severity == Severity::Error));
}

#[test]
fn analysis_cases() {
    let req = inverter_req();
    let n = parse_netlist("t\nR1 a 0 1\n.tran 1n 100n\n.end").unwrap();
    assert!(check_analysis(&n, &req).is_empty());

    let n = parse_netlist("t\nR1 a 0 1\n.op\n.end").unwrap();
    assert_eq!(
        rules_of(&check_analysis(&n, &req)),
        [RuleId::WrongAnalysis, RuleId::ExtraAnalysis]
    );

    let n = parse_netlist("t\nR1 a 0 1\n.tran 10n 1n\n.end").unwrap();
    assert_eq!(rules_of(&check_analysis(&n, &req)), [RuleId::BadAnalysisParams]);

    let n = parse_netlist("t\nR1 a 0 1\n.end").unwrap();
    assert_eq!(
        rules_of(&check_analysis(&n, &req)),
        [RuleId::NoAnalysis, RuleId::WrongAnalysis]
    );
}

#[test]
fn source_cases() {
    let nand = "t
Vdd vdd 0 DC 1.8
Va a 0 PULSE(0 1.8 0 100p 100p 5n 10n)
Vb b 0 PULSE(0 1.8 0 100p 100p 10n 20n)
.end";
    let req = TaskRequirements {
        input_nodes: vec![NodeId::new("a"), NodeId::new("b")],
        ..TaskRequirements::default()
    };
    assert!(check_sources(&parse_netlist(nand).unwrap(), &req).is_empty());

    let req = TaskRequirements {
        input_nodes: vec![NodeId::new("in")],
        ..TaskRequirements::default()
    };
    let n = parse_netlist("t\nVdd vdd 0 1.8\nR1 vdd in 1k\nR2 in out 1k\n.end").unwrap();
    // `in` reaches the supply through R1, which counts as driven.
    assert!(check_sources(&n, &req).is_empty());
    let n = parse_netlist("t\nVdd vdd 0 1.8\nM1 out in 0 0 n W=1u L=1u\n.end").unwrap();
    let d = check_sources(&n, &req);
    assert_eq!(rules_of(&d), [RuleId::UndrivenInput]);
    assert_eq!(d[0].node, Some(NodeId::new("in")));

    let n = parse_netlist("t\nVdd vdd 0 1.8\nVa a 0 PULSE(0 1.8 0 1n 1n 30n 20n)\n.end").unwrap();
    assert_eq!(
        rules_of(&check_sources(&n, &TaskRequirements::default())),
        [RuleId::BadWaveform]
    );

    let n = parse_netlist("t\nVdd vdd 0 5\n.end").unwrap();
    assert_eq!(
        rules_of(&check_sources(&n, &TaskRequirements::default())),
        [RuleId::LevelOutOfRails, RuleId::NoSupply]
    );
}

#[test]
fn temperature_cases() {
    let req = TaskRequirements {
        requires_temp: true,
        ..TaskRequirements::default()
    };
    let n = parse_netlist("t\nR1 a 0 1\n.end").unwrap();
    assert_eq!(rules_of(&check_temperature(&n, &req)), [RuleId::NoTemp]);
    let n = parse_netlist("t\nR1 a 0 1\n.temp 27\n.end").unwrap();
    assert!(check_temperature(&n, &req).is_empty());
    let n = parse_netlist("t\nR1 a 0 1\n.temp 500\n.end").unwrap();
    assert_eq!(rules_of(&check_temperature(&n, &req)), [RuleId::TempRange]);
}

#[test]
fn figure_one_triple_fault() {
    let faulty = INVERTER
        .replace("pch W=2u", "pch W=1u")
        .replace(".tran 10p 20n", ".op")
        .replace("Vin in 0 PULSE(0 1.8 0 100p 100p 5n 10n)\n", "");
    let report = lint(&parse_netlist(&faulty).unwrap(), &inverter_req());
    assert_eq!(report.verdict, Verdict::Invalid);
    for rule in [RuleId::WlRatio, RuleId::WrongAnalysis, RuleId::UndrivenInput] {
        assert!(report.has_rule(rule), "missing {rule}");
    }
    assert!(report.diagnostics.len() >= 3);
}

#[test]
fn empty_netlist_is_invalid() {
    let report = lint(&Netlist::default(), &TaskRequirements::default());
    assert_eq!(report.verdict, Verdict::Invalid);
    assert!(report.has_rule(RuleId::NoGround));
}

#[test]
fn feedback_rendering() {
    let d = vec![Diagnostic::new(RuleId::WlRatio, "PMOS/NMOS W/L ratio is 1.0")
        .with_element("M1")];
    let report = LintReport::from_diagnostics(d);
    // A warning-only report is valid; escalate it to request feedback.
    assert_eq!(render_feedback(&report), Err(ReportIsValid));
    let text = render_feedback(&report.escalate(&[RuleId::WlRatio])).unwrap();
    assert_eq!(
        text,
        "1. WL_RATIO: PMOS/NMOS W/L ratio is 1.0; standard practice is 2:1 \u{2014} widen the PMOS devices.\n"
    );

    let n = parse_netlist("t\nR1 a 0 1\n.op\n.end").unwrap();
    let report = lint(&n, &inverter_req());
    let text = render_feedback(&report).unwrap();
    assert_eq!(text.lines().count(), report.diagnostics.len());
    let wrong = text.lines().find(|l| l.contains("WRONG_ANALYSIS")).unwrap();
    assert!(wrong.contains(".tran") && wrong.contains("time window"), "{wrong}");
    assert_eq!(text, render_feedback(&lint(&n, &inverter_req())).unwrap());
}

#[test]
fn report_json_shape() {
    let n = parse_netlist("R1 1 2 1k").unwrap();
    let report = lint(&n, &TaskRequirements::default());
    let v: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(v["verdict"], "Invalid");
    let first = &v["diagnostics"][0];
    for key in ["rule", "severity", "message", "element", "node"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
    assert_eq!(first["rule"], "NO_GROUND");
}

#[test]
fn subckt_expansion_failure_is_reported() {
    let n = parse_netlist("t\nV1 a 0 1.8\nX1 a 0 nothere\n.op\n.end").unwrap();
    assert!(lint(&n, &TaskRequirements::default()).has_rule(RuleId::BadSubckt));
}

#[test]
fn requirements_validation() {
    assert!(TaskRequirements::default().validate().is_ok());
    let bad = TaskRequirements {
        supply_rail: 0.0,
        ..TaskRequirements::default()
    };
    assert!(bad.validate().is_err());
    let overlap = TaskRequirements {
        input_nodes: vec![NodeId::new("x")],
        output_nodes: vec![NodeId::new("X")],
        ..TaskRequirements::default()
    };
    assert!(overlap.validate().is_err());
}

#[test]
fn transistor_range_only_when_requested() {
    let n = parse_netlist(INVERTER).unwrap();
    let inside = TaskRequirements {
        expected_transistor_range: Some((2, 2)),
        ..inverter_req()
    };
    assert!(lint(&n, &inside).diagnostics.is_empty());
    let outside = TaskRequirements {
        expected_transistor_range: Some((26, 45)),
        ..inverter_req()
    };
    let report = lint(&n, &outside);
    assert_eq!(rules_of(&report.diagnostics), [RuleId::Range]);
    assert!(!report.is_valid());
}
