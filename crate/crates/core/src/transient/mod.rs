//! Time-domain integration of the same netlist the harmonic-balance engine
//! solves. Serves as its brute-force reference.
//!
//! Trapezoidal rule throughout. Reactive branches carry their series loss as
//! an internal state; the varactor is integrated through its charge so the
//! stored charge is conserved exactly from step to step.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hb::HarmonicSpectrum;
use crate::linalg::{lu_factor, DenseMatrix};
use crate::linear::compile::{BranchKind, Compiled};
use crate::model::{Netlist, NodeId};

mod oracle;
pub use oracle::{oracle_report, OracleLine, OracleOptions, OracleReport, RESOLVED_FRACTION};

/// Time steps per drive period by default.
pub const STEPS_PER_PERIOD: usize = 200;
/// Drive periods simulated by default (before any extension for the
/// spectrum window).
pub const DEFAULT_PERIODS: usize = 500;
/// Periods of the spectrum base frequency analyzed by default.
pub const DEFAULT_SPECTRUM_PERIODS: usize = 64;
/// Fraction of the run discarded as start-up transient.
pub const DISCARD_FRACTION: f64 = 0.8;

const NEWTON_REL_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;

/// Node voltages sampled on a uniform grid starting at t = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub dt: f64,
    pub duration: f64,
    /// Netlist id of each column.
    pub nodes: Vec<NodeId>,
    /// One row per time point, `samples[0]` at t = 0.
    pub samples: Vec<Vec<f64>>,
    /// Instantaneous power from the generators, per time point, W.
    pub source_power: Vec<f64>,
    /// Instantaneous power dissipated in the network and the generator
    /// impedances, per time point, W.
    pub dissipated_power: Vec<f64>,
}

impl Waveform {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Samples of one node, or `None` if it is not part of the netlist.
    pub fn node(&self, node: NodeId) -> Option<Vec<f64>> {
        let col = self.nodes.iter().position(|&n| n == node)?;
        Some(self.samples.iter().map(|r| r[col]).collect())
    }

    /// Average generator and dissipated power over the final `n_periods`
    /// periods of `f0`.
    pub fn energy_audit(&self, f0: f64, n_periods: usize) -> Result<EnergyAudit> {
        let n = window_len(self, f0, n_periods)?;
        let start = self.len() - n;
        let avg = |v: &[f64]| v[start..].iter().sum::<f64>() / n as f64;
        Ok(EnergyAudit {
            source: avg(&self.source_power),
            dissipated: avg(&self.dissipated_power),
        })
    }

    /// Writes `t` and every node voltage as CSV.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        let header: Vec<String> = std::iter::once("t_s".to_string())
            .chain(self.nodes.iter().map(|n| format!("v{n}_v")))
            .collect();
        writeln!(out, "{}", header.join(",")).map_err(io)?;
        for (i, row) in self.samples.iter().enumerate() {
            write!(out, "{:.12e}", i as f64 * self.dt).map_err(io)?;
            for v in row {
                write!(out, ",{v:.12e}").map_err(io)?;
            }
            writeln!(out).map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

/// Average powers over a steady-state window, W.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyAudit {
    pub source: f64,
    pub dissipated: f64,
}

impl EnergyAudit {
    pub fn relative_error(&self) -> f64 {
        (self.source - self.dissipated).abs() / self.source.abs()
    }
}

/// Per-branch trapezoidal state.
#[derive(Debug, Clone, Copy, Default)]
struct BranchState {
    /// Branch current at the last accepted step.
    i: f64,
    /// Capacitor voltage (series RC) or branch voltage (series RL).
    v: f64,
}

struct Stepper<'a> {
    c: &'a Compiled,
    dt: f64,
    /// Constant part of the iteration matrix.
    base: DenseMatrix<f64>,
    /// Companion conductance of each branch.
    g: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(c: &'a Compiled, dt: f64) -> Self {
        let n = c.dim();
        let mut base = DenseMatrix::zeros(n);
        let mut g = Vec::with_capacity(c.branches.len());
        let stamp = |m: &mut DenseMatrix<f64>, a: Option<usize>, b: Option<usize>, y: f64| {
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
        };
        for br in &c.branches {
            let gb = match br.kind {
                BranchKind::Resistor(r) => 1.0 / r,
                BranchKind::Inductor { l, r } => 1.0 / (r + 2.0 * l / dt),
                BranchKind::Capacitor { c, r } => 1.0 / (r + dt / (2.0 * c)),
            };
            stamp(&mut base, br.a, br.b, gb);
            g.push(gb);
        }
        for (k, p) in c.ports.iter().enumerate() {
            if !c.skipped_ports.contains(&k) {
                stamp(&mut base, p.a, p.b, 1.0 / p.z0);
            }
        }
        Self { c, dt, base, g }
    }

    /// Current the branch would carry at zero voltage in the next step.
    fn history(&self, k: usize, s: &BranchState) -> f64 {
        let g = self.g[k];
        match self.c.branches[k].kind {
            BranchKind::Resistor(_) => 0.0,
            BranchKind::Inductor { l, r } => g * ((2.0 * l / self.dt - r) * s.i + s.v),
            BranchKind::Capacitor { c, .. } => -g * (s.v + self.dt / (2.0 * c) * s.i),
        }
    }

    fn advance(&self, k: usize, s: &mut BranchState, v_branch: f64, hist: f64) {
        let i = self.g[k] * v_branch + hist;
        match self.c.branches[k].kind {
            BranchKind::Resistor(_) => {}
            BranchKind::Inductor { .. } => s.v = v_branch,
            BranchKind::Capacitor { c, .. } => s.v += self.dt / (2.0 * c) * (i + s.i),
        }
        s.i = i;
    }

    fn loss(&self, k: usize, s: &BranchState) -> f64 {
        let r = match self.c.branches[k].kind {
            BranchKind::Resistor(r) | BranchKind::Inductor { r, .. } | BranchKind::Capacitor { r, .. } => r,
        };
        s.i * s.i * r
    }
}

fn at(v: &[f64], n: Option<usize>) -> f64 {
    n.map_or(0.0, |i| v[i])
}

/// Integrates `net` from rest over `duration` seconds with step `dt`.
/// Generators start at t = 0 as cosines, matching the phase reference of
/// the harmonic-balance engine.
pub fn transient_solve(net: &Netlist, duration: f64, dt: f64) -> Result<Waveform> {
    net.validate()?;
    let (_, cw) = net
        .cw_source()
        .ok_or_else(|| Error::Config("transient analysis needs a cw source".into()))?;
    if !(dt > 0.0 && dt <= 1.0 / (100.0 * cw.freq)) {
        return Err(Error::Config(format!(
            "time step {dt:e} s exceeds 1/(100 f_in) = {:e} s",
            1.0 / (100.0 * cw.freq)
        )));
    }
    if !(duration > dt && duration.is_finite()) {
        return Err(Error::Config(format!("invalid duration {duration:e} s")));
    }
    let c = Compiled::build(net, &BTreeSet::new())?;
    let st = Stepper::new(&c, dt);
    let n = c.dim();
    let steps = (duration / dt).round() as usize;
    let sources: Vec<(f64, f64, usize, f64)> = c
        .sources
        .iter()
        .map(|s| (s.spec.emf(), 2.0 * PI * s.spec.freq, s.port, c.ports[s.port].z0))
        .collect();

    let mut v = vec![0.0; n];
    let mut bstate = vec![BranchState::default(); c.branches.len()];
    // junction charge current at the last step
    let mut iq = vec![0.0; c.junctions.len()];
    let mut samples = Vec::with_capacity(steps + 1);
    let mut source_power = Vec::with_capacity(steps + 1);
    let mut dissipated_power = Vec::with_capacity(steps + 1);
    let node_cols: Vec<usize> = (0..n).filter(|&i| c.nodes[i].is_some()).collect();
    let record = |v: &[f64], samples: &mut Vec<Vec<f64>>| samples.push(node_cols.iter().map(|&i| v[i]).collect());
    let powers = |t: f64, v: &[f64], bstate: &[BranchState]| -> (f64, f64) {
        let mut src = 0.0;
        let mut diss = 0.0;
        for &(emf, w, port, z0) in &sources {
            let p = &c.ports[port];
            let e = emf * (w * t).cos();
            let i = (e - (at(v, p.a) - at(v, p.b))) / z0;
            src += e * i;
        }
        for (k, p) in c.ports.iter().enumerate() {
            if c.skipped_ports.contains(&k) {
                continue;
            }
            let drive: f64 = sources
                .iter()
                .filter(|s| s.2 == k)
                .map(|&(emf, w, _, _)| emf * (w * t).cos())
                .sum();
            let i = (drive - (at(v, p.a) - at(v, p.b))) / p.z0;
            diss += i * i * p.z0;
        }
        for (k, s) in bstate.iter().enumerate() {
            diss += st.loss(k, s);
        }
        for j in &c.junctions {
            let vj = at(v, j.a) - at(v, j.b);
            diss += vj * j.device.current_dev(vj).0;
        }
        (src, diss)
    };
    record(&v, &mut samples);
    let (p0, d0) = powers(0.0, &v, &bstate);
    source_power.push(p0);
    dissipated_power.push(d0);

    let mut rhs_base = vec![0.0; n];
    let mut hist = vec![0.0; c.branches.len()];
    for step in 1..=steps {
        let t = step as f64 * dt;
        rhs_base.iter_mut().for_each(|x| *x = 0.0);
        for &(emf, w, port, z0) in &sources {
            let p = &c.ports[port];
            let i = emf * (w * t).cos() / z0;
            if let Some(a) = p.a {
                rhs_base[a] += i;
            }
            if let Some(b) = p.b {
                rhs_base[b] -= i;
            }
        }
        for (k, br) in c.branches.iter().enumerate() {
            hist[k] = st.history(k, &bstate[k]);
            if let Some(a) = br.a {
                rhs_base[a] -= hist[k];
            }
            if let Some(b) = br.b {
                rhs_base[b] += hist[k];
            }
        }
        let v_prev = v.clone();
        let mut converged = c.junctions.is_empty();
        let mut iter = 0;
        loop {
            let mut m = st.base.clone();
            let mut f = st.base.mul_vec(&v);
            for (fi, r) in f.iter_mut().zip(&rhs_base) {
                *fi -= r;
            }
            for (ji, j) in c.junctions.iter().enumerate() {
                let vj = at(&v, j.a) - at(&v, j.b);
                let vj0 = at(&v_prev, j.a) - at(&v_prev, j.b);
                let (q, cap) = j.device.charge_dev(vj);
                let (q0, _) = j.device.charge_dev(vj0);
                let (ic, gc) = j.device.current_dev(vj);
                let i = ic + 2.0 / dt * (q - q0) - iq[ji];
                let g = gc + 2.0 * cap / dt;
                for (node, sgn) in [(j.a, 1.0), (j.b, -1.0)] {
                    let Some(r) = node else { continue };
                    f[r] += sgn * i;
                    for (col, s2) in [(j.a, 1.0), (j.b, -1.0)] {
                        if let Some(cc) = col {
                            m.add(r, cc, sgn * s2 * g);
                        }
                    }
                }
            }
            let lu = lu_factor(m, None).map_err(|_| Error::TransientStep { time: t })?;
            let neg: Vec<f64> = f.iter().map(|x| -x).collect();
            let dx = lu.solve(&neg);
            let scale = v.iter().fold(1.0f64, |a, x| a.max(x.abs()));
            let dmax = dx.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            for (vi, d) in v.iter_mut().zip(&dx) {
                *vi += d;
            }
            iter += 1;
            if c.junctions.is_empty() || dmax <= NEWTON_REL_TOL * scale {
                converged = true;
                break;
            }
            if iter >= NEWTON_MAX_ITER || !dmax.is_finite() {
                break;
            }
        }
        if !converged {
            return Err(Error::TransientStep { time: t });
        }
        for (ji, j) in c.junctions.iter().enumerate() {
            let vj = at(&v, j.a) - at(&v, j.b);
            let vj0 = at(&v_prev, j.a) - at(&v_prev, j.b);
            iq[ji] = 2.0 / dt * (j.device.charge_dev(vj).0 - j.device.charge_dev(vj0).0) - iq[ji];
        }
        for (k, br) in c.branches.iter().enumerate() {
            let vb = at(&v, br.a) - at(&v, br.b);
            st.advance(k, &mut bstate[k], vb, hist[k]);
        }
        record(&v, &mut samples);
        let (p, d) = powers(t, &v, &bstate);
        source_power.push(p);
        dissipated_power.push(d);
    }
    Ok(Waveform {
        dt,
        duration: steps as f64 * dt,
        nodes: node_cols.iter().map(|&i| c.nodes[i].expect("named column")).collect(),
        samples,
        source_power,
        dissipated_power,
    })
}

/// Default run for `net`: step `1/(200 f_in)`, long enough for 500 drive
/// periods and for the default spectrum window to fit after the discard.
pub fn default_run(net: &Netlist) -> Result<Waveform> {
    let (_, cw) = net
        .cw_source()
        .ok_or_else(|| Error::Config("transient analysis needs a cw source".into()))?;
    let f_in = cw.freq;
    let f0 = f_in / 2.0;
    let dt = 1.0 / (STEPS_PER_PERIOD as f64 * f_in);
    let duration = default_duration(f_in, f0, DEFAULT_SPECTRUM_PERIODS);
    transient_solve(net, duration, dt)
}

/// Run length covering 500 drive periods and leaving `n_periods` of `f0`
/// after the discard window.
pub fn default_duration(f_in: f64, f0: f64, n_periods: usize) -> f64 {
    let needed = n_periods as f64 / f0 / (1.0 - DISCARD_FRACTION);
    (DEFAULT_PERIODS as f64 / f_in).max(needed)
}

fn window_len(w: &Waveform, f0: f64, n_periods: usize) -> Result<usize> {
    if !(f0 > 0.0) || n_periods == 0 {
        return Err(Error::Config("spectrum needs f0 > 0 and at least one period".into()));
    }
    let span = n_periods as f64 / f0;
    let n = (span / w.dt).round() as usize;
    let available = w.len().saturating_sub(1);
    let discard = (DISCARD_FRACTION * available as f64).floor() as usize;
    if n == 0 || n > available - discard.min(available) {
        return Err(Error::InsufficientData(format!(
            "{n_periods} periods of {f0:e} Hz need {span:e} s after the discard window, waveform has {:e} s",
            (available - discard) as f64 * w.dt
        )));
    }
    if ((span / w.dt) - n as f64).abs() > 1e-6 * n as f64 {
        log::warn!("spectrum window is not an integer number of steps; expect leakage");
    }
    Ok(n)
}

/// Phasors at `k f0`, `k = 0..=k_max`, of every node over the final
/// `n_periods` periods of `f0`, with the same scaling as the
/// harmonic-balance spectra.
pub fn steady_state_spectrum(
    w: &Waveform,
    f0: f64,
    n_periods: usize,
    k_max: usize,
) -> Result<BTreeMap<NodeId, HarmonicSpectrum>> {
    let n = window_len(w, f0, n_periods)?;
    let start = w.len() - n;
    let mut out = BTreeMap::new();
    for (col, &node) in w.nodes.iter().enumerate() {
        let mut phasors = Vec::with_capacity(k_max + 1);
        for k in 0..=k_max {
            let mut acc = Complex64::default();
            for s in start..w.len() {
                let t = s as f64 * w.dt;
                acc += w.samples[s][col] * Complex64::from_polar(1.0, -2.0 * PI * k as f64 * f0 * t);
            }
            let scale = if k == 0 { 1.0 } else { 2.0 } / n as f64;
            let mut p = acc * scale;
            if k == 0 {
                p.im = 0.0;
            }
            phasors.push(p);
        }
        out.insert(node, HarmonicSpectrum { f0, phasors });
    }
    Ok(out)
}
