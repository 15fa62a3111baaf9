//! Small-signal AC analysis by nodal admittance assembly.

pub(crate) mod compile;
mod sparams;

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{lu_factor, DenseMatrix};
use crate::model::{ImpedanceSet, Netlist, NodeId};
use compile::{Compiled, JunctionStamp};

pub use sparams::{cascade, three_db_band, Bandwidth, SParameters};

/// Pivot-ratio limit above which a nodal matrix is treated as degenerate.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Node voltage phasors (peak) at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct AcSolution {
    pub frequency: f64,
    pub voltages: BTreeMap<NodeId, Complex64>,
}

impl AcSolution {
    pub fn v(&self, node: NodeId) -> Complex64 {
        self.voltages.get(&node).copied().unwrap_or_default()
    }
}

fn same_freq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

/// Solves the linearized network at `f`, driven by every source whose
/// frequency equals `f`. Varactors are fixed capacitors at their bias point.
pub fn ac_solve(net: &Netlist, f: f64) -> Result<AcSolution> {
    if !(f.is_finite() && f > 0.0) {
        return Err(Error::Domain(format!("analysis frequency must be positive, got {f}")));
    }
    let c = Compiled::build(net, &BTreeSet::new())?;
    if c.sources.is_empty() {
        return Err(Error::Config("AC analysis needs at least one source".into()));
    }
    let mut rhs = vec![Complex64::default(); c.dim()];
    let mut driven = false;
    for s in c.sources.iter().filter(|s| same_freq(s.spec.freq, f)) {
        c.inject_port(&mut rhs, s.port, Complex64::new(s.spec.emf() / s.spec.z_source, 0.0));
        driven = true;
    }
    if !driven {
        return Err(Error::Config(format!("no source operates at {f} Hz")));
    }
    let lu = c.factor(c.admittance(2.0 * PI * f, JunctionStamp::Linear), Some(CONDITION_LIMIT))?;
    let x = lu.solve(&rhs);
    let voltages = c
        .nodes
        .iter()
        .zip(&x)
        .filter_map(|(n, v)| n.map(|n| (n, *v)))
        .collect();
    Ok(AcSolution { frequency: f, voltages })
}

/// Full scattering matrix at `f`, one column per excited port.
pub fn s_matrix(net: &Netlist, f: f64) -> Result<Vec<Vec<Complex64>>> {
    let c = Compiled::build(net, &BTreeSet::new())?;
    let lu = c.factor(c.admittance(2.0 * PI * f, JunctionStamp::Linear), Some(CONDITION_LIMIT))?;
    let np = c.ports.len();
    let mut s = vec![vec![Complex64::default(); np]; np];
    for j in 0..np {
        let z0j = c.ports[j].z0;
        let mut rhs = vec![Complex64::default(); c.dim()];
        // unit EMF behind z0j
        c.inject_port(&mut rhs, j, Complex64::new(1.0 / z0j, 0.0));
        let v = lu.solve(&rhs);
        for (i, row) in s.iter_mut().enumerate() {
            let vi = c.port_voltage(&v, i);
            row[j] = if i == j {
                2.0 * vi - 1.0
            } else {
                2.0 * vi * (z0j / c.ports[i].z0).sqrt()
            };
        }
    }
    Ok(s)
}

/// Two-port S-parameters at `f`.
pub fn s_parameters(net: &Netlist, f: f64) -> Result<SParameters> {
    if net.ports.len() != 2 {
        return Err(Error::Config(format!(
            "two-port analysis needs exactly 2 ports, netlist has {}",
            net.ports.len()
        )));
    }
    let s = s_matrix(net, f)?;
    Ok(SParameters {
        frequency: f,
        s11: s[0][0],
        s21: s[1][0],
        s12: s[0][1],
        s22: s[1][1],
        z0: [net.ports[0].z0, net.ports[1].z0],
    })
}

/// Linearly spaced frequency grid including both ends.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
        .collect()
}

pub fn sweep_sparams(net: &Netlist, f_start: f64, f_stop: f64, n_points: usize) -> Result<Vec<SParameters>> {
    if !(f_start > 0.0 && f_start < f_stop) || n_points < 2 {
        return Err(Error::Config(format!(
            "sweep needs 0 < f_start < f_stop and n >= 2, got {f_start}..{f_stop} x {n_points}"
        )));
    }
    linspace(f_start, f_stop, n_points)
        .into_par_iter()
        .map(|f| s_parameters(net, f))
        .collect()
}

/// Impedance looking into a node once some elements are removed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DrivingPoint {
    Finite(Complex64),
    /// The remaining sub-network has no path to ground.
    Open,
}

impl DrivingPoint {
    pub fn finite(self) -> Option<Complex64> {
        match self {
            DrivingPoint::Finite(z) => Some(z),
            DrivingPoint::Open => None,
        }
    }
}

/// Impedance seen from `node` to ground with the elements named in `exclude`
/// removed. Port terminations are addressed as `P1`, `P2`, ...
pub fn driving_point_impedance(net: &Netlist, node: NodeId, exclude: &BTreeSet<String>, f: f64) -> Result<DrivingPoint> {
    let c = Compiled::build(net, exclude)?;
    let start = c
        .index_of(node)
        .ok_or_else(|| Error::Config(format!("node {node} is not in the netlist")))?;
    // connected component of the test node
    let mut edges: Vec<(Option<usize>, Option<usize>)> = c.branches.iter().map(|b| (b.a, b.b)).collect();
    edges.extend(c.junctions.iter().map(|j| (j.a, j.b)));
    edges.extend(
        c.ports
            .iter()
            .enumerate()
            .filter(|(k, _)| !c.skipped_ports.contains(k))
            .map(|(_, p)| (p.a, p.b)),
    );
    let mut seen = vec![false; c.dim()];
    let mut grounded = false;
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(i) = stack.pop() {
        for &(a, b) in &edges {
            let other = match (a, b) {
                (Some(x), y) if x == i => y,
                (x, Some(y)) if y == i => x,
                _ => continue,
            };
            match other {
                None => grounded = true,
                Some(o) if !seen[o] => {
                    seen[o] = true;
                    stack.push(o);
                }
                _ => {}
            }
        }
    }
    if !grounded {
        return Ok(DrivingPoint::Open);
    }
    let keep: Vec<usize> = (0..c.dim()).filter(|&i| seen[i]).collect();
    let full = c.admittance(2.0 * PI * f, JunctionStamp::Linear);
    let mut sub = DenseMatrix::zeros(keep.len());
    for (r, &i) in keep.iter().enumerate() {
        for (s, &j) in keep.iter().enumerate() {
            sub[(r, s)] = full[(i, j)];
        }
    }
    let Ok(lu) = lu_factor(sub, Some(CONDITION_LIMIT)) else {
        return Ok(DrivingPoint::Open);
    };
    let mut rhs = vec![Complex64::default(); keep.len()];
    let pos = keep.iter().position(|&i| i == start).unwrap_or(0);
    rhs[pos] = Complex64::new(1.0, 0.0);
    let z = lu.solve(&rhs)[pos];
    if z.re.is_finite() && z.im.is_finite() {
        Ok(DrivingPoint::Finite(z))
    } else {
        Ok(DrivingPoint::Open)
    }
}

/// Which elements to remove when looking from the diode-side node into each
/// of the three branches, and from the port node into the limiter.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchCuts {
    /// Junction node joining the three branches.
    pub hub: NodeId,
    /// Port-side node at which the shunt input impedance is taken.
    pub input: NodeId,
    pub toward_1: BTreeSet<String>,
    pub toward_2: BTreeSet<String>,
    pub toward_3: BTreeSet<String>,
    pub toward_input: BTreeSet<String>,
}

/// Extracts the six branch impedances and the input impedance by nodal solves.
pub fn impedance_set(net: &Netlist, cuts: &BranchCuts, f_in: f64) -> Result<ImpedanceSet> {
    let z = |exclude: &BTreeSet<String>, node: NodeId, f: f64| -> Result<Complex64> {
        driving_point_impedance(net, node, exclude, f)?
            .finite()
            .ok_or_else(|| Error::SingularImpedance(format!("branch seen from node {node} at {f} Hz is open")))
    };
    let f_d = f_in / 2.0;
    let set = ImpedanceSet {
        z1_in: z(&cuts.toward_1, cuts.hub, f_in)?,
        z2_in: z(&cuts.toward_2, cuts.hub, f_in)?,
        z3_in: z(&cuts.toward_3, cuts.hub, f_in)?,
        z1_d: z(&cuts.toward_1, cuts.hub, f_d)?,
        z2_d: z(&cuts.toward_2, cuts.hub, f_d)?,
        z3_d: z(&cuts.toward_3, cuts.hub, f_d)?,
        z_in: z(&cuts.toward_input, cuts.input, f_in)?,
    };
    Ok(set)
}

#[cfg(test)]
mod tests;
