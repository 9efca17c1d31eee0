use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Severity {
    Error,
    Warning,
}

macro_rules! rules {
    ($( $variant:ident => $id:literal, $sev:ident, $desc:literal, $hint:literal; )*) => {
        /// Closed set of lint rule identifiers.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum RuleId {
            $( #[serde(rename = $id)] $variant, )*
        }

        impl RuleId {
            pub const ALL: &'static [RuleId] = &[ $( RuleId::$variant, )* ];

            pub fn as_str(self) -> &'static str {
                match self { $( RuleId::$variant => $id, )* }
            }

            pub fn default_severity(self) -> Severity {
                match self { $( RuleId::$variant => Severity::$sev, )* }
            }

            pub fn description(self) -> &'static str {
                match self { $( RuleId::$variant => $desc, )* }
            }

            /// One-sentence repair hint used in feedback and guideline suggestions.
            pub fn hint(self) -> &'static str {
                match self { $( RuleId::$variant => $hint, )* }
            }
        }

        impl FromStr for RuleId {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $( $id => Ok(RuleId::$variant), )*
                    other => Err(format!("unknown rule `{other}`")),
                }
            }
        }
    };
}

rules! {
    NoGround => "NO_GROUND", Error,
        "no element connects to ground (node 0 / gnd)",
        "connect the circuit reference to node 0 so every voltage has a return path.";
    FloatingNode => "FLOATING_NODE", Error,
        "a node is touched by exactly one element and is not a declared output",
        "connect the node to a second element or remove the dangling terminal.";
    DupName => "DUP_NAME", Error,
        "two elements share a name (case-insensitive)",
        "give every element a unique name.";
    MissingModel => "MISSING_MODEL", Error,
        "an M or Q element references a model with no .model card",
        "add a matching `.model <name> NMOS|PMOS|NPN|PNP (...)` card or fix the model name.";
    ModelKindMismatch => "MODEL_KIND_MISMATCH", Error,
        "a MOSFET is bound to a BJT model or vice versa",
        "bind M elements to NMOS/PMOS models and Q elements to NPN/PNP models.";
    NoEnd => "NO_END", Warning,
        "the netlist has no .end card",
        "finish the netlist with a `.end` line.";
    BadSubckt => "BAD_SUBCKT", Error,
        "a subcircuit instance cannot be expanded",
        "define every instantiated subcircuit once, with matching port counts and no self-instantiation.";
    UnknownDirective => "UNKNOWN_DIRECTIVE", Warning,
        "a dot-card outside the supported subset was kept verbatim",
        "remove engine-specific directives that the task does not need.";
    WlRatio => "WL_RATIO", Warning,
        "PMOS/NMOS W/L ratio deviates from the 2:1 convention",
        "standard practice is 2:1 \u{2014} widen the PMOS devices.";
    WlDegenerate => "WL_DEGENERATE", Error,
        "a MOSFET W/L lies outside [0.1, 1000]",
        "choose W and L in the same length scale (for example W=2u L=1u).";
    NoAnalysis => "NO_ANALYSIS", Error,
        "the netlist requests no analysis",
        "add the analysis directive the task asks for (.op, .dc, .tran or .ac).";
    WrongAnalysis => "WRONG_ANALYSIS", Error,
        "a required analysis kind is missing",
        "add the missing directive: `.tran <tstep> <tstop>` with tstop covering the required time window, `.dc <source> <start> <stop> <step>`, `.op`, or `.ac dec <points> <fstart> <fstop>`.";
    ExtraAnalysis => "EXTRA_ANALYSIS", Warning,
        "an analysis is present that the task does not require",
        "drop analyses the task does not ask for.";
    BadAnalysisParams => "BAD_ANALYSIS_PARAMS", Error,
        "an analysis directive has inconsistent parameters",
        "order the arguments as documented (e.g. `.tran <tstep> <tstop>` with tstop > tstep > 0).";
    UndrivenInput => "UNDRIVEN_INPUT", Error,
        "a task input node is not driven by a source",
        "attach a V source (DC or PULSE between 0 and the supply rail) to every input node.";
    LevelOutOfRails => "LEVEL_OUT_OF_RAILS", Error,
        "a source level lies outside the supply rails",
        "keep source levels between 0 V and the supply rail.";
    BadWaveform => "BAD_WAVEFORM", Error,
        "a source waveform violates its parameter constraints",
        "use PULSE(v1 v2 td tr tf pw per) with tr, tf, pw > 0 and per >= tr+tf+pw, SIN with freq > 0, PWL with increasing times.";
    NoSupply => "NO_SUPPLY", Warning,
        "no DC source matches the supply rail",
        "add a DC supply source at the task's rail voltage.";
    NoTemp => "NO_TEMP", Warning,
        "the task requires an operating temperature but no .temp is set",
        "add a `.temp <celsius>` card (defaulting to 27 \u{b0}C is implicit otherwise).";
    TempRange => "TEMP_RANGE", Error,
        "the .temp value lies outside [-55, 150] \u{b0}C",
        "set `.temp` within the -55 to 150 \u{b0}C device range.";
    Range => "RANGE", Error,
        "transistor count outside the task's expected range",
        "build the circuit topology the task describes; the transistor count is outside the expected range.";
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Markdown table of the rule registry.
pub fn registry_table() -> String {
    let mut out = String::from("| rule | severity | description |\n|---|---|---|\n");
    for rule in RuleId::ALL {
        out.push_str(&format!(
            "| {} | {:?} | {} |\n",
            rule.as_str(),
            rule.default_severity(),
            rule.description()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip_and_are_unique() {
        let mut seen = std::collections::HashSet::new();
        for rule in RuleId::ALL {
            assert!(seen.insert(rule.as_str()));
            assert_eq!(rule.as_str().parse::<RuleId>().unwrap(), *rule);
            assert!(!rule.hint().is_empty());
        }
        assert_eq!(
            serde_json::to_string(&RuleId::WlRatio).unwrap(),
            "\"WL_RATIO\""
        );
    }
}
