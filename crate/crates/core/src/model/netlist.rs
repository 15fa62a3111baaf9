//! Node-connected element list with ports; the substrate of every analysis.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::design::{component_series_resistance, ReactiveKind};
use super::varactor::BiasedVaractor;
use crate::error::{Error, Result};

pub type NodeId = usize;
pub const GROUND: NodeId = 0;

/// Sinusoidal generator with an internal impedance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub freq: f64,
    /// Available power, W.
    pub power: f64,
    pub z_source: f64,
}

impl SourceSpec {
    /// Peak open-circuit voltage delivering `power` into a matched load.
    pub fn emf(&self) -> f64 {
        (8.0 * self.z_source * self.power).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ElementKind {
    Resistor { ohms: f64 },
    Inductor { henries: f64, q: Option<f64> },
    Capacitor { farads: f64, q: Option<f64> },
    /// Cathode on `node_a`.
    Varactor { model_name: String, device: BiasedVaractor },
    CwSource(SourceSpec),
    /// Power auxiliary generator at half the drive frequency.
    PagSource(SourceSpec),
}

impl ElementKind {
    pub fn is_source(&self) -> bool {
        matches!(self, ElementKind::CwSource(_) | ElementKind::PagSource(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetlistElement {
    pub name: String,
    pub kind: ElementKind,
    pub node_a: NodeId,
    pub node_b: NodeId,
}

/// Single-ended measurement/termination port.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Port {
    pub node: NodeId,
    pub reference: NodeId,
    pub z0: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Netlist {
    pub elements: Vec<NetlistElement>,
    pub ports: Vec<Port>,
    /// Frequency at which component Q factors are specified. Falls back to
    /// the drive source frequency when unset.
    pub f_ref: Option<f64>,
}

impl Netlist {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, node_a: NodeId, node_b: NodeId, kind: ElementKind) -> &mut Self {
        self.elements.push(NetlistElement {
            name: name.into(),
            kind,
            node_a,
            node_b,
        });
        self
    }

    pub fn add_port(&mut self, node: NodeId, reference: NodeId, z0: f64) -> &mut Self {
        self.ports.push(Port { node, reference, z0 });
        self
    }

    pub fn element(&self, name: &str) -> Option<&NetlistElement> {
        self.elements.iter().find(|e| e.name == name)
    }

    pub fn element_mut(&mut self, name: &str) -> Option<&mut NetlistElement> {
        self.elements.iter_mut().find(|e| e.name == name)
    }

    /// Every node touched by an element or a port, ground included.
    pub fn nodes(&self) -> BTreeSet<NodeId> {
        let mut set = BTreeSet::from([GROUND]);
        for e in &self.elements {
            set.insert(e.node_a);
            set.insert(e.node_b);
        }
        for p in &self.ports {
            set.insert(p.node);
            set.insert(p.reference);
        }
        set
    }

    pub fn cw_source(&self) -> Option<(&NetlistElement, SourceSpec)> {
        self.elements.iter().find_map(|e| match e.kind {
            ElementKind::CwSource(s) => Some((e, s)),
            _ => None,
        })
    }

    pub fn pag_source(&self) -> Option<(&NetlistElement, SourceSpec)> {
        self.elements.iter().find_map(|e| match e.kind {
            ElementKind::PagSource(s) => Some((e, s)),
            _ => None,
        })
    }

    pub fn varactors(&self) -> impl Iterator<Item = (&NetlistElement, &BiasedVaractor)> {
        self.elements.iter().filter_map(|e| match &e.kind {
            ElementKind::Varactor { device, .. } => Some((e, device)),
            _ => None,
        })
    }

    pub fn reference_frequency(&self) -> Option<f64> {
        self.f_ref.or_else(|| self.cw_source().map(|(_, s)| s.freq))
    }

    /// Index of the port a source element drives. When several ports share
    /// the source's terminals, the drive takes the first and the pAG the last.
    pub fn source_port(&self, element: &NetlistElement) -> Option<usize> {
        let on = |p: &Port| p.node == element.node_a && p.reference == element.node_b;
        match element.kind {
            ElementKind::PagSource(_) => self.ports.iter().rposition(on),
            _ => self.ports.iter().position(on),
        }
    }

    /// Frequency-independent series loss of a reactive element or varactor.
    pub fn series_loss(&self, element: &NetlistElement) -> Result<f64> {
        let need_ref = || {
            self.reference_frequency().ok_or_else(|| {
                Error::Config(format!(
                    "element {} has a Q factor but the netlist has no reference frequency",
                    element.name
                ))
            })
        };
        match &element.kind {
            ElementKind::Inductor { henries, q: Some(q) } => {
                component_series_resistance(ReactiveKind::Inductor, *henries, *q, need_ref()?)
            }
            ElementKind::Capacitor { farads, q: Some(q) } => {
                component_series_resistance(ReactiveKind::Capacitor, *farads, *q, need_ref()?)
            }
            ElementKind::Varactor { device, .. } => Ok(device.series_resistance(need_ref()?)),
            _ => Ok(0.0),
        }
    }

    /// Checks the structural invariants every analysis relies on.
    pub fn validate(&self) -> Result<()> {
        if self.ports.is_empty() {
            return Err(Error::Config("netlist declares no port".into()));
        }
        let mut names = BTreeSet::new();
        let mut pags = 0;
        for e in &self.elements {
            if !names.insert(e.name.as_str()) {
                return Err(Error::Config(format!("duplicate element name {}", e.name)));
            }
            if e.node_a == e.node_b {
                return Err(Error::Config(format!("element {} is shorted on node {}", e.name, e.node_a)));
            }
            let positive = |what: &str, v: f64| {
                if v.is_finite() && v > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Config(format!("element {} has non-positive {what} {v}", e.name)))
                }
            };
            match &e.kind {
                ElementKind::Resistor { ohms } => positive("resistance", *ohms)?,
                ElementKind::Inductor { henries, q } => {
                    positive("inductance", *henries)?;
                    if let Some(q) = q {
                        positive("Q", *q)?;
                    }
                }
                ElementKind::Capacitor { farads, q } => {
                    positive("capacitance", *farads)?;
                    if let Some(q) = q {
                        positive("Q", *q)?;
                    }
                }
                ElementKind::Varactor { device, .. } => device.model.validate()?,
                ElementKind::CwSource(s) | ElementKind::PagSource(s) => {
                    positive("frequency", s.freq)?;
                    positive("power", s.power)?;
                    positive("source impedance", s.z_source)?;
                    let port = self.source_port(e).ok_or_else(|| {
                        Error::Config(format!(
                            "source {} ({} {}) does not sit on a declared port",
                            e.name, e.node_a, e.node_b
                        ))
                    })?;
                    let z0 = self.ports[port].z0;
                    if (s.z_source - z0).abs() > 1e-9 * z0 {
                        return Err(Error::Config(format!(
                            "source {} impedance {} differs from port z0 {}",
                            e.name, s.z_source, z0
                        )));
                    }
                    if matches!(e.kind, ElementKind::PagSource(_)) {
                        pags += 1;
                    }
                }
            }
            self.series_loss(e)?;
        }
        if pags > 1 {
            return Err(Error::Config("at most one pAG source is allowed".into()));
        }
        if let (Some((_, cw)), Some((_, pag))) = (self.cw_source(), self.pag_source()) {
            if (pag.freq - cw.freq / 2.0).abs() > 1e-9 * cw.freq {
                return Err(Error::Config(format!(
                    "pAG frequency {} Hz is not half the drive frequency {} Hz",
                    pag.freq, cw.freq
                )));
            }
        }
        let element_nodes: BTreeSet<NodeId> = self
            .elements
            .iter()
            .flat_map(|e| [e.node_a, e.node_b])
            .chain([GROUND])
            .collect();
        for p in &self.ports {
            if !(p.z0.is_finite() && p.z0 > 0.0) {
                return Err(Error::Config(format!("port z0 must be positive, got {}", p.z0)));
            }
            for n in [p.node, p.reference] {
                if !element_nodes.contains(&n) {
                    return Err(Error::Config(format!("port references undefined node {n}")));
                }
            }
        }
        Ok(())
    }

    /// Nodes with no resistive/inductive path to ground. Capacitors and
    /// sources do not conduct DC; ports do (through their termination).
    pub fn floating_nodes(&self) -> Vec<NodeId> {
        let nodes: Vec<NodeId> = self.nodes().into_iter().collect();
        let index: BTreeMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let mut parent: Vec<usize> = (0..nodes.len()).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        let mut union = |a: NodeId, b: NodeId| {
            let (ra, rb) = (find(&mut parent, index[&a]), find(&mut parent, index[&b]));
            parent[ra] = rb;
        };
        for e in &self.elements {
            if matches!(
                e.kind,
                ElementKind::Resistor { .. } | ElementKind::Inductor { .. } | ElementKind::Varactor { .. }
            ) {
                union(e.node_a, e.node_b);
            }
        }
        for p in &self.ports {
            union(p.node, p.reference);
        }
        let ground = find(&mut parent, index[&GROUND]);
        nodes
            .iter()
            .filter(|&&n| n != GROUND && find(&mut parent, index[&n]) != ground)
            .copied()
            .collect()
    }

    /// Copy with all node ids shifted by `offset` (ground stays ground).
    pub fn renumbered(&self, offset: NodeId) -> Netlist {
        let shift = |n: NodeId| if n == GROUND { GROUND } else { n + offset };
        let mut out = self.clone();
        for e in &mut out.elements {
            e.node_a = shift(e.node_a);
            e.node_b = shift(e.node_b);
        }
        for p in &mut out.ports {
            p.node = shift(p.node);
            p.reference = shift(p.reference);
        }
        out
    }

    pub fn max_node(&self) -> NodeId {
        self.nodes().into_iter().max().unwrap_or(GROUND)
    }

    /// Copy with the drive retuned to `f_in` (and the pAG to `f_in / 2`).
    pub fn retuned(&self, f_in: f64) -> Netlist {
        let mut out = self.clone();
        for e in &mut out.elements {
            match &mut e.kind {
                ElementKind::CwSource(s) => s.freq = f_in,
                ElementKind::PagSource(s) => s.freq = f_in / 2.0,
                _ => {}
            }
        }
        out
    }

    /// Copy with the drive set to `power` watts.
    pub fn with_drive_power(&self, power: f64) -> Netlist {
        let mut out = self.clone();
        for e in &mut out.elements {
            if let ElementKind::CwSource(s) = &mut e.kind {
                s.power = power;
            }
        }
        out
    }

    /// Copy with every varactor re-biased to `v_dc`.
    pub fn with_bias(&self, v_dc: f64) -> Result<Netlist> {
        let mut out = self.clone();
        for e in &mut out.elements {
            if let ElementKind::Varactor { device, .. } = &mut e.kind {
                *device = super::varactor::capacitance_at_bias(&device.model, v_dc)?;
            }
        }
        Ok(out)
    }

    /// Stable content hash used to tag sweep traces.
    pub fn content_hash(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let text = serde_json::to_string(self).unwrap_or_default();
        let mut h = std::collections::hash_map::DefaultHasher::new();
        text.hash(&mut h);
        h.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::varactor::{capacitance_at_bias, VaractorModel};

    fn divider() -> Netlist {
        let mut n = Netlist::new();
        n.add("R1", 1, 2, ElementKind::Resistor { ohms: 50.0 })
            .add("C1", 2, 0, ElementKind::Capacitor { farads: 1e-12, q: None })
            .add("C2", 2, 3, ElementKind::Capacitor { farads: 1e-12, q: None })
            .add("C3", 3, 0, ElementKind::Capacitor { farads: 1e-12, q: None })
            .add_port(1, 0, 50.0);
        n
    }

    #[test]
    fn floating_detection() {
        let n = divider();
        assert_eq!(n.floating_nodes(), vec![3]);
        assert!(n.validate().is_ok());
    }

    #[test]
    fn source_must_sit_on_port() {
        let mut n = divider();
        let s = SourceSpec { freq: 1e9, power: 1e-3, z_source: 50.0 };
        n.add("V1", 2, 0, ElementKind::CwSource(s));
        assert!(matches!(n.validate(), Err(Error::Config(_))));
        n.elements.last_mut().unwrap().node_a = 1;
        assert!(n.validate().is_ok());
    }

    #[test]
    fn pag_frequency_must_be_half() {
        let mut n = divider();
        n.add_port(2, 0, 50.0);
        n.add("V1", 1, 0, ElementKind::CwSource(SourceSpec { freq: 2e9, power: 1e-3, z_source: 50.0 }));
        n.add("A1", 2, 0, ElementKind::PagSource(SourceSpec { freq: 1.1e9, power: 1e-12, z_source: 50.0 }));
        assert!(n.validate().is_err());
        let n = n.retuned(2.2e9);
        assert!(n.validate().is_ok());
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut n = divider();
        n.add("R1", 1, 0, ElementKind::Resistor { ohms: 1.0 });
        assert!(n.validate().is_err());
    }

    #[test]
    fn q_requires_reference_frequency() {
        let mut n = divider();
        n.add("L1", 1, 0, ElementKind::Inductor { henries: 1e-9, q: Some(50.0) });
        assert!(n.validate().is_err());
        n.f_ref = Some(1e9);
        assert!(n.validate().is_ok());
        let dev = capacitance_at_bias(&VaractorModel::default(), 1.1).unwrap();
        n.add("X1", 2, 0, ElementKind::Varactor { model_name: "d".into(), device: dev });
        let r = n.series_loss(n.element("X1").unwrap()).unwrap();
        assert!((r - 1.0 / (2.0 * std::f64::consts::PI * 1e9 * 2e-12 * 15.0)).abs() < 1e-9);
    }
}
