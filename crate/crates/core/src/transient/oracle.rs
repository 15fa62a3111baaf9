//! Harmonic-balance results checked against a time-domain run of the same netlist.

use serde::{Deserialize, Serialize};

use super::{steady_state_spectrum, transient_solve, EnergyAudit, DEFAULT_SPECTRUM_PERIODS, STEPS_PER_PERIOD};
use crate::error::{Error, Result};
use crate::hb::{solve_continued, HbOptions, HbSolution, HbSystem};
use crate::model::{Netlist, NodeId};

/// Lines weaker than this fraction of the strongest line are below the
/// harmonic-balance residual tolerance and are not compared.
pub const RESOLVED_FRACTION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleOptions {
    /// Run length in drive periods.
    pub periods: f64,
    pub steps_per_period: usize,
    /// Spectrum window in periods of the divided frequency.
    pub spectrum_periods: usize,
    /// Highest multiple of the divided frequency compared.
    pub k_max: usize,
    pub hb: HbOptions,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            // high-Q tanks at the divided frequency need about 1000 drive
            // periods to settle to 1e-3
            periods: 2000.0,
            steps_per_period: STEPS_PER_PERIOD,
            spectrum_periods: DEFAULT_SPECTRUM_PERIODS,
            k_max: 3,
            hb: HbOptions::default(),
        }
    }
}

/// One node voltage line at `k` times the divided frequency, V.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleLine {
    pub node: NodeId,
    pub k: usize,
    pub hb: f64,
    pub transient: f64,
}

impl OracleLine {
    pub fn relative_error(&self) -> f64 {
        (self.hb - self.transient).abs() / self.hb
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub f_in: f64,
    pub p_in: f64,
    /// Divided-frequency power at the output port from harmonic balance, W.
    pub p_sub: f64,
    /// Harmonic balance was moved to the other period-doubled phase state to
    /// match the one the time-domain run settled in.
    pub phase_shifted: bool,
    pub lines: Vec<OracleLine>,
    pub energy: EnergyAudit,
}

impl OracleReport {
    /// Compared lines: `k = 1..=k_max` above the resolution floor.
    pub fn resolved(&self) -> impl Iterator<Item = &OracleLine> {
        let top = self.lines.iter().map(|l| l.hb).fold(0.0, f64::max);
        self.lines.iter().filter(move |l| l.hb > RESOLVED_FRACTION * top)
    }

    pub fn max_relative_error(&self) -> f64 {
        self.resolved().map(OracleLine::relative_error).fold(0.0, f64::max)
    }

    /// Largest line in the time-domain spectrum, as a multiple of the divided frequency.
    pub fn dominant_harmonic(&self, node: NodeId) -> Option<usize> {
        self.lines
            .iter()
            .filter(|l| l.node == node)
            .max_by(|a, b| a.transient.total_cmp(&b.transient))
            .map(|l| l.k)
    }
}

/// Solves `net` at its cw-source drive both ways and compares node spectra.
pub fn oracle_report(net: &Netlist, opts: &OracleOptions) -> Result<OracleReport> {
    let (_, cw) = net
        .cw_source()
        .ok_or_else(|| Error::Config("oracle comparison needs a cw source".into()))?;
    if opts.k_max == 0 || opts.k_max > opts.hb.k_harmonics {
        return Err(Error::Config(format!(
            "compared harmonics 1..={} must lie within the {} solved",
            opts.k_max, opts.hb.k_harmonics
        )));
    }
    let (f_in, f0) = (cw.freq, cw.freq / 2.0);
    let (mut hb, _) = solve_continued(net, f_in, cw.power, opts.hb)?;
    let dt = 1.0 / (opts.steps_per_period as f64 * f_in);
    let w = transient_solve(net, opts.periods / f_in, dt)?;
    let spectra = steady_state_spectrum(&w, f0, opts.spectrum_periods, opts.k_max)?;

    // line at f_d that best identifies the phase state
    let probe = hb
        .spectra
        .iter()
        .max_by(|a, b| a.1.magnitude(1).total_cmp(&b.1.magnitude(1)))
        .map(|(n, _)| *n)
        .ok_or_else(|| Error::Config("netlist has no solved node".into()))?;
    let mut phase_shifted = false;
    let agree = |sol: &HbSolution| (sol.spectra[&probe].phasors[1].conj() * spectra[&probe].phasors[1]).re;
    if agree(&hb) < 0.0 {
        let sys = HbSystem::new(net, f_in, opts.hb)?;
        let other = sys.solve(cw.power, Some(&hb.state.drive_period_shifted()))?;
        if agree(&other) > 0.0 {
            hb = other;
            phase_shifted = true;
        }
    }

    let mut lines = Vec::new();
    for (node, s) in &hb.spectra {
        let Some(t) = spectra.get(node) else { continue };
        for k in 1..=opts.k_max {
            lines.push(OracleLine {
                node: *node,
                k,
                hb: s.magnitude(k),
                transient: t.magnitude(k),
            });
        }
    }
    Ok(OracleReport {
        f_in,
        p_in: cw.power,
        p_sub: hb.p_sub,
        phase_shifted,
        lines,
        energy: w.energy_audit(f0, opts.spectrum_periods)?,
    })
}
