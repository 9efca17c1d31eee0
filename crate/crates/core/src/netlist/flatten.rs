use std::collections::HashMap;

use super::error::FlattenError;
use super::types::*;

/// Expands every `X` instance into its subcircuit body.
///
/// Internal nodes become `<inst>.<node>` (lower-case) and element names
/// `<INST>.<NAME>`; ports are replaced by the instance's actual nodes and
/// ground stays global. The result has no subcircuit definitions.
pub fn flatten(netlist: &Netlist) -> Result<Netlist, FlattenError> {
    let mut flat = Netlist {
        title: netlist.title.clone(),
        elements: Vec::with_capacity(netlist.elements.len()),
        models: netlist.models.clone(),
        directives: netlist.directives.clone(),
        subckts: Default::default(),
        unknown: netlist.unknown.clone(),
        end_present: netlist.end_present,
    };
    let mut stack = Vec::new();
    for element in &netlist.elements {
        expand(netlist, element, "", &HashMap::new(), &mut stack, &mut flat.elements)?;
    }
    Ok(flat)
}

fn expand(
    netlist: &Netlist,
    element: &Element,
    prefix: &str,
    port_map: &HashMap<NodeId, NodeId>,
    stack: &mut Vec<String>,
    out: &mut Vec<Element>,
) -> Result<(), FlattenError> {
    let rename = |node: &NodeId| -> NodeId {
        if node.is_ground() {
            node.clone()
        } else if let Some(actual) = port_map.get(node) {
            actual.clone()
        } else if prefix.is_empty() {
            node.clone()
        } else {
            NodeId::new(&format!("{}{}", prefix.to_lowercase(), node))
        }
    };
    let nodes: Vec<NodeId> = element.nodes.iter().map(rename).collect();
    let name = format!("{prefix}{}", element.name);

    let ElementPayload::Subckt { subckt } = &element.payload else {
        out.push(Element {
            name,
            nodes,
            payload: element.payload.clone(),
        });
        return Ok(());
    };
    let Some(def) = netlist.subckts.get(&subckt.to_uppercase()) else {
        return Err(FlattenError::UnknownSubckt {
            instance: name,
            name: subckt.clone(),
        });
    };
    if stack.contains(&def.name) {
        let mut cycle = stack.clone();
        cycle.push(def.name.clone());
        return Err(FlattenError::RecursionDetected { cycle });
    }
    if def.ports.len() != nodes.len() {
        return Err(FlattenError::PortMismatch {
            instance: name,
            name: def.name.clone(),
            given: nodes.len(),
            expected: def.ports.len(),
        });
    }
    let inner_map: HashMap<NodeId, NodeId> = def
        .ports
        .iter()
        .cloned()
        .zip(nodes.iter().cloned())
        .collect();
    let inner_prefix = format!("{name}.");
    stack.push(def.name.clone());
    for child in &def.elements {
        expand(netlist, child, &inner_prefix, &inner_map, stack, out)?;
    }
    stack.pop();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_netlist;

    #[test]
    fn renames_body() {
        let n = parse_netlist(
            "t\n.subckt rc a b\nR1 a mid 1k\nC1 mid b 1p\n.ends\nX1 in 0 rc\n.end",
        )
        .unwrap();
        let flat = flatten(&n).unwrap();
        let names: Vec<&str> = flat.elements.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names, ["X1.R1", "X1.C1"]);
        assert_eq!(flat.elements[0].nodes, ["in", "x1.mid"].map(NodeId::new).to_vec());
        assert_eq!(flat.elements[1].nodes, ["x1.mid", "0"].map(NodeId::new).to_vec());
        assert!(flat.subckts.is_empty());
    }

    #[test]
    fn no_instances_is_identity_on_elements() {
        let n = parse_netlist("t\nR1 a 0 1k\nC1 a 0 1p\n.end").unwrap();
        let flat = flatten(&n).unwrap();
        assert_eq!(flat, n);
    }

    #[test]
    fn nested_instances() {
        let n = parse_netlist(
            "t\n.subckt inner p\nR1 p q 1k\nR2 q 0 1k\n.ends\n.subckt outer a\nXI a inner\n.ends\nXO top outer\n.end",
        )
        .unwrap();
        let flat = flatten(&n).unwrap();
        assert_eq!(flat.elements[0].name, "XO.XI.R1");
        assert_eq!(flat.elements[0].nodes[1].as_str(), "xo.xi.q");
        assert_eq!(flat.elements[0].nodes[0].as_str(), "top");
    }

    #[test]
    fn errors() {
        let n = parse_netlist("t\n.subckt a p\nX1 p a\n.ends\nX0 n a\n.end").unwrap();
        assert!(matches!(flatten(&n), Err(FlattenError::RecursionDetected { .. })));
        let n = parse_netlist("t\nX1 a b missing\n.end").unwrap();
        assert!(matches!(flatten(&n), Err(FlattenError::UnknownSubckt { .. })));
        let n = parse_netlist("t\n.subckt a p q\nR1 p q 1\n.ends\nX1 n a\n.end").unwrap();
        assert!(matches!(flatten(&n), Err(FlattenError::PortMismatch { .. })));
    }
}
