//! Circuit statistics and transistor-count difficulty tiers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::netlist::{ElementKind, ElementPayload, Netlist};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
    Extreme,
}

impl Difficulty {
    pub const ALL: [Difficulty; 4] = [
        Difficulty::Easy,
        Difficulty::Medium,
        Difficulty::Hard,
        Difficulty::Extreme,
    ];

    /// Inclusive transistor-count bounds of the tier.
    pub fn bounds(self) -> (u32, u32) {
        match self {
            Difficulty::Easy => (0, 10),
            Difficulty::Medium => (11, 25),
            Difficulty::Hard => (26, 45),
            Difficulty::Extreme => (46, u32::MAX),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Difficulty::Easy => "Easy",
            Difficulty::Medium => "Medium",
            Difficulty::Hard => "Hard",
            Difficulty::Extreme => "Extreme",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Difficulty {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "easy" => Ok(Difficulty::Easy),
            "medium" => Ok(Difficulty::Medium),
            "hard" => Ok(Difficulty::Hard),
            "extreme" => Ok(Difficulty::Extreme),
            other => Err(format!("unknown difficulty `{other}`")),
        }
    }
}

pub fn classify_difficulty(transistor_count: u32) -> Difficulty {
    match transistor_count {
        0..=10 => Difficulty::Easy,
        11..=25 => Difficulty::Medium,
        26..=45 => Difficulty::Hard,
        _ => Difficulty::Extreme,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitMetrics {
    #[serde(rename = "transistors")]
    pub transistor_count: u32,
    #[serde(rename = "nodes")]
    pub node_count: u32,
    #[serde(rename = "elements")]
    pub element_counts: BTreeMap<ElementKind, u32>,
    pub difficulty: Difficulty,
}

/// Counts over the top-level element list; flatten hierarchical netlists first.
/// MOSFET multiplicity `m` counts as that many transistors.
pub fn compute_metrics(netlist: &Netlist) -> CircuitMetrics {
    let mut element_counts = BTreeMap::new();
    let mut transistors = 0u32;
    let mut nodes = BTreeSet::new();
    for element in &netlist.elements {
        *element_counts.entry(element.kind()).or_insert(0) += 1;
        transistors = transistors.saturating_add(match &element.payload {
            ElementPayload::Mosfet(p) => p.m,
            ElementPayload::Bjt(_) => 1,
            _ => 0,
        });
        nodes.extend(element.nodes.iter().filter(|n| !n.is_ground()));
    }
    CircuitMetrics {
        transistor_count: transistors,
        node_count: nodes.len() as u32,
        element_counts,
        difficulty: classify_difficulty(transistors),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{flatten, parse_netlist};

    #[test]
    fn tier_thresholds() {
        assert_eq!(classify_difficulty(8), Difficulty::Easy);
        assert_eq!(classify_difficulty(20), Difficulty::Medium);
        assert_eq!(classify_difficulty(30), Difficulty::Hard);
        assert_eq!(classify_difficulty(60), Difficulty::Extreme);
        for (below, above) in [(10, 11), (25, 26), (45, 46)] {
            assert!(classify_difficulty(below) < classify_difficulty(above));
        }
        assert_eq!(classify_difficulty(0), Difficulty::Easy);
        assert_eq!(classify_difficulty(u32::MAX), Difficulty::Extreme);
    }

    #[test]
    fn empty_netlist() {
        let m = compute_metrics(&Netlist::default());
        assert_eq!(m.transistor_count, 0);
        assert_eq!(m.node_count, 0);
        assert_eq!(m.difficulty, Difficulty::Easy);
    }

    #[test]
    fn sr_latch_from_two_nor_gates() {
        let text = "SR latch
.model n NMOS
.model p PMOS
.subckt nor2 a b y vdd
Mp1 x a vdd vdd p W=4u L=1u
Mp2 y b x vdd p W=4u L=1u
Mn1 y a 0 0 n W=1u L=1u
Mn2 y b 0 0 n W=1u L=1u
.ends
Vdd vdd 0 1.8
X1 r qb q vdd nor2
X2 s q qb vdd nor2
.end";
        let flat = flatten(&parse_netlist(text).unwrap()).unwrap();
        let m = compute_metrics(&flat);
        assert_eq!(m.transistor_count, 8);
        assert_eq!(m.difficulty, Difficulty::Easy);
    }

    #[test]
    fn multiplicity_and_bjts() {
        let text = "t\nM1 d g 0 0 n W=1u L=1u M=3\nQ1 c b 0 qn\n.end";
        let m = compute_metrics(&parse_netlist(text).unwrap());
        assert_eq!(m.transistor_count, 4);
        assert_eq!(m.node_count, 4);
        assert_eq!(m.element_counts[&ElementKind::Mosfet], 1);
    }

    #[test]
    fn json_shape() {
        let m = compute_metrics(&parse_netlist("t\nR1 a 0 1k\n.end").unwrap());
        let v = serde_json::to_value(&m).unwrap();
        assert_eq!(v["transistors"], 0);
        assert_eq!(v["nodes"], 1);
        assert_eq!(v["elements"]["resistor"], 1);
        assert_eq!(v["difficulty"], "easy");
    }
}
