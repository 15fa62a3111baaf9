use crate::error::{Error, Result};
use crate::model::{ElementKind, Netlist, NodeId, GROUND};

/// Chains `m` copies of a two-port, port 2 of each copy joined to port 1 of
/// the next. The drive of the first copy and the auxiliary generator of the
/// last are kept; every other source is dropped.
pub fn cascade_stages(net: &Netlist, m: usize) -> Result<Netlist> {
    if m == 0 {
        return Err(Error::Config("stage count must be at least 1".into()));
    }
    if net.ports.len() != 2 {
        return Err(Error::Config(format!(
            "cascading needs a two-port, netlist has {} ports",
            net.ports.len()
        )));
    }
    if m == 1 {
        return Ok(net.clone());
    }
    let span = net.max_node();
    let (p1, p2) = (net.ports[0], net.ports[1]);
    let mut out = Netlist {
        f_ref: net.reference_frequency(),
        ..Netlist::default()
    };
    // netlist id of the previous stage's port-2 terminals
    let mut join = (p2.node, p2.reference);
    for stage in 0..m {
        let map = |n: NodeId| -> NodeId {
            if n == GROUND {
                GROUND
            } else if stage > 0 && n == p1.node {
                join.0
            } else if stage > 0 && n == p1.reference {
                join.1
            } else {
                n + stage * span
            }
        };
        for e in &net.elements {
            let keep = match e.kind {
                ElementKind::CwSource(_) => stage == 0,
                ElementKind::PagSource(_) => stage == m - 1,
                _ => true,
            };
            if !keep {
                continue;
            }
            let name = if stage == 0 { e.name.clone() } else { format!("{}_{}", e.name, stage + 1) };
            out.add(name, map(e.node_a), map(e.node_b), e.kind.clone());
        }
        if stage == 0 {
            out.add_port(p1.node, p1.reference, p1.z0);
        }
        if stage == m - 1 {
            out.add_port(map(p2.node), map(p2.reference), p2.z0);
        }
        join = (map(p2.node), map(p2.reference));
    }
    out.validate()?;
    Ok(out)
}
