//! Netlist lowered to indexed two-terminal branches.
//!
//! Every varactor becomes a series loss resistor feeding an internal node and
//! a junction between that node and the anode. Port terminations are plain
//! conductances; sources only contribute Norton currents.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{lu_factor, DenseMatrix, LuFactors, Singular};
use crate::model::{BiasedVaractor, ElementKind, Netlist, NodeId, SourceSpec, GROUND};

/// Resistance assigned to a lossless inductor at DC.
pub(crate) const DC_SHORT_OHMS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum BranchKind {
    Resistor(f64),
    /// Series inductance and loss resistance.
    Inductor { l: f64, r: f64 },
    /// Series capacitance and loss resistance.
    Capacitor { c: f64, r: f64 },
}

#[derive(Debug, Clone)]
pub(crate) struct Branch {
    pub a: Option<usize>,
    pub b: Option<usize>,
    pub kind: BranchKind,
}

impl Branch {
    pub fn admittance(&self, omega: f64) -> Complex64 {
        match self.kind {
            BranchKind::Resistor(r) => Complex64::new(1.0 / r, 0.0),
            BranchKind::Inductor { l, r } => {
                if omega == 0.0 {
                    Complex64::new(1.0 / r.max(DC_SHORT_OHMS), 0.0)
                } else {
                    1.0 / Complex64::new(r, omega * l)
                }
            }
            BranchKind::Capacitor { c, r } => {
                if omega == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    1.0 / Complex64::new(r, -1.0 / (omega * c))
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Junction {
    pub name: String,
    /// Cathode side (internal node behind the loss resistor).
    pub a: Option<usize>,
    pub b: Option<usize>,
    pub device: BiasedVaractor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SourceRole {
    Cw,
    Pag,
}

#[derive(Debug, Clone)]
pub(crate) struct CompiledSource {
    pub role: SourceRole,
    pub spec: SourceSpec,
    pub port: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct CompiledPort {
    pub a: Option<usize>,
    pub b: Option<usize>,
    pub z0: f64,
}

/// How junctions enter a frequency-domain matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum JunctionStamp {
    /// Small-signal capacitance at the bias point.
    Linear,
    Omit,
}

#[derive(Debug, Clone)]
pub(crate) struct Compiled {
    /// Netlist id of each unknown; `None` for internal varactor nodes.
    pub nodes: Vec<Option<NodeId>>,
    pub index: BTreeMap<NodeId, usize>,
    pub branches: Vec<Branch>,
    pub junctions: Vec<Junction>,
    pub ports: Vec<CompiledPort>,
    pub sources: Vec<CompiledSource>,
    /// Port terminations removed by an exclude list.
    pub skipped_ports: BTreeSet<usize>,
}

pub(crate) fn stamp(m: &mut DenseMatrix<Complex64>, a: Option<usize>, b: Option<usize>, y: Complex64) {
    if let Some(i) = a {
        m.add(i, i, y);
    }
    if let Some(j) = b {
        m.add(j, j, y);
    }
    if let (Some(i), Some(j)) = (a, b) {
        m.add(i, j, -y);
        m.add(j, i, -y);
    }
}

impl Compiled {
    /// Lowers `net`, dropping elements named in `exclude`. Port terminations
    /// are named `P1`, `P2`, ... in declaration order.
    pub fn build(net: &Netlist, exclude: &BTreeSet<String>) -> Result<Self> {
        let mut index = BTreeMap::new();
        let mut nodes = Vec::new();
        for n in net.nodes() {
            if n != GROUND {
                index.insert(n, nodes.len());
                nodes.push(Some(n));
            }
        }
        let idx = |n: NodeId| if n == GROUND { None } else { Some(index[&n]) };
        let mut branches = Vec::new();
        let mut junctions = Vec::new();
        let mut sources = Vec::new();
        for e in &net.elements {
            if exclude.contains(&e.name) {
                continue;
            }
            let (a, b) = (idx(e.node_a), idx(e.node_b));
            let r = net.series_loss(e)?;
            match &e.kind {
                ElementKind::Resistor { ohms } => branches.push(Branch {
                    a,
                    b,
                    kind: BranchKind::Resistor(*ohms),
                }),
                ElementKind::Inductor { henries, .. } => branches.push(Branch {
                    a,
                    b,
                    kind: BranchKind::Inductor { l: *henries, r },
                }),
                ElementKind::Capacitor { farads, .. } => branches.push(Branch {
                    a,
                    b,
                    kind: BranchKind::Capacitor { c: *farads, r },
                }),
                ElementKind::Varactor { device, .. } => {
                    let internal = nodes.len();
                    nodes.push(None);
                    branches.push(Branch {
                        a,
                        b: Some(internal),
                        kind: BranchKind::Resistor(r.max(DC_SHORT_OHMS)),
                    });
                    junctions.push(Junction {
                        name: e.name.clone(),
                        a: Some(internal),
                        b,
                        device: *device,
                    });
                }
                ElementKind::CwSource(s) | ElementKind::PagSource(s) => {
                    let port = net.source_port(e).ok_or_else(|| {
                        Error::Config(format!("source {} does not sit on a declared port", e.name))
                    })?;
                    let role = if matches!(e.kind, ElementKind::CwSource(_)) {
                        SourceRole::Cw
                    } else {
                        SourceRole::Pag
                    };
                    sources.push(CompiledSource { role, spec: *s, port });
                }
            }
        }
        let ports = net
            .ports
            .iter()
            .map(|p| CompiledPort {
                a: idx(p.node),
                b: idx(p.reference),
                z0: p.z0,
            })
            .collect();
        let skipped_ports = (0..net.ports.len())
            .filter(|k| exclude.contains(&format!("P{}", k + 1)))
            .collect();
        Ok(Self {
            nodes,
            index,
            branches,
            junctions,
            ports,
            sources,
            skipped_ports,
        })
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn index_of(&self, node: NodeId) -> Option<usize> {
        self.index.get(&node).copied()
    }

    /// Nodal admittance matrix at `omega`, port terminations included.
    pub fn admittance(&self, omega: f64, junctions: JunctionStamp) -> DenseMatrix<Complex64> {
        let mut m = DenseMatrix::zeros(self.dim());
        for br in &self.branches {
            stamp(&mut m, br.a, br.b, br.admittance(omega));
        }
        if junctions == JunctionStamp::Linear {
            for j in &self.junctions {
                stamp(&mut m, j.a, j.b, Complex64::new(0.0, omega * j.device.c_v));
            }
        }
        for (k, p) in self.ports.iter().enumerate() {
            if !self.skipped_ports.contains(&k) {
                stamp(&mut m, p.a, p.b, Complex64::new(1.0 / p.z0, 0.0));
            }
        }
        m
    }

    /// Adds the Norton current `i` entering port `port`'s positive node.
    pub fn inject_port(&self, rhs: &mut [Complex64], port: usize, i: Complex64) {
        let p = &self.ports[port];
        if let Some(a) = p.a {
            rhs[a] += i;
        }
        if let Some(b) = p.b {
            rhs[b] -= i;
        }
    }

    pub fn port_voltage(&self, v: &[Complex64], port: usize) -> Complex64 {
        let p = &self.ports[port];
        let at = |n: Option<usize>| n.map_or(Complex64::new(0.0, 0.0), |i| v[i]);
        at(p.a) - at(p.b)
    }

    pub fn source(&self, role: SourceRole) -> Option<&CompiledSource> {
        self.sources.iter().find(|s| s.role == role)
    }

    /// Factors `m`, mapping breakdown to a degenerate-topology error that names
    /// the netlist node of the failing row.
    pub fn factor(&self, m: DenseMatrix<Complex64>, cond_limit: Option<f64>) -> Result<LuFactors<Complex64>> {
        lu_factor(m, cond_limit).map_err(|Singular { row, condition }| Error::DegenerateTopology {
            node: self.nodes.get(row).copied().flatten().unwrap_or(GROUND),
            detail: if condition.is_finite() {
                format!("condition estimate {condition:.3e} exceeds limit")
            } else {
                "zero pivot (floating node or disconnected sub-network)".into()
            },
        })
    }
}
