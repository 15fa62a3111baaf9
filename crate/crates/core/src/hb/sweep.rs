//! Warm-started power and frequency sweeps, and the quantities extracted
//! from them: threshold, maximum power, interference suppression.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::solver::{HbOptions, HbSolution, HbState, HbSystem};
use crate::error::{Error, Result};
use crate::io::units::{dbm_to_w, ratio_to_db, w_to_dbm};
use crate::model::{BiasedVaractor, Netlist};

/// Absolute p_sub floor, W (−60 dBm).
pub const DEFAULT_PSUB_FLOOR: f64 = 1e-9;

/// Drive level used to fix the stable reference sign of the Jacobian, W.
const REFERENCE_POWER: f64 = 1e-9;

/// Smallest step the sweep subdivides to, as a fraction of the nominal step.
const MIN_STEP_FRACTION: f64 = 1.0 / 16.0;

/// Newton budget for a seeded attempt; seeds that do not lead anywhere
/// are abandoned early.
const KICK_MAX_ITER: usize = 25;

/// Width of the bracket the threshold bisection stops at, dB.
const PTH_RESOLUTION_DB: f64 = 0.1;

/// Drive below which every design is taken to be undivided, W.
const RAMP_START: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepDirection {
    Up,
    Down,
}

/// One point of a sweep. Metrics are NaN when `converged` is false.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    /// Available drive power, W.
    pub p_in: f64,
    pub s21: Complex64,
    pub s11: Complex64,
    pub p_sub: f64,
    pub diode_v_peak: f64,
    pub converged: bool,
    /// Jacobian sign matches the low-drive reference.
    pub stable: bool,
    pub iterations: usize,
    pub residual: f64,
    #[serde(skip)]
    pub state: Option<HbState>,
}

impl SweepRecord {
    fn from_solution(sol: &HbSolution, stable: bool) -> Self {
        Self {
            p_in: sol.p_in,
            s21: sol.s21_ls,
            s11: sol.s11_ls,
            p_sub: sol.p_sub,
            diode_v_peak: sol.diode_v_peak,
            converged: true,
            stable,
            iterations: sol.convergence.iterations,
            residual: sol.convergence.residual,
            state: Some(sol.state.clone()),
        }
    }

    fn failed(p_in: f64, iterations: usize, residual: f64) -> Self {
        let nan = Complex64::new(f64::NAN, f64::NAN);
        Self {
            p_in,
            s21: nan,
            s11: nan,
            p_sub: f64::NAN,
            diode_v_peak: f64::NAN,
            converged: false,
            stable: false,
            iterations,
            residual,
            state: None,
        }
    }

    pub fn s21_db(&self) -> f64 {
        20.0 * self.s21.norm().log10()
    }

    pub fn s11_db(&self) -> f64 {
        20.0 * self.s11.norm().log10()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTrace {
    pub direction: SweepDirection,
    pub f_in: f64,
    pub netlist_hash: u64,
    pub options: HbOptions,
    pub records: Vec<SweepRecord>,
    /// Swept network, kept so extraction can refine between records.
    #[serde(skip)]
    pub netlist: Option<Netlist>,
}

impl SweepTrace {
    /// Records that converged, in sweep order.
    pub fn converged(&self) -> impl Iterator<Item = &SweepRecord> {
        self.records.iter().filter(|r| r.converged)
    }

    /// Records that converged, sorted by ascending drive power.
    pub fn ascending(&self) -> Vec<&SweepRecord> {
        let mut v: Vec<_> = self.converged().collect();
        v.sort_by(|a, b| a.p_in.total_cmp(&b.p_in));
        v
    }
}

/// Level p_sub must exceed to count as divided.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PsubFloor {
    /// Fixed level, W.
    Absolute(f64),
    /// Margin in dB above the auxiliary-generator leak-through seen at the
    /// lowest drive of the trace.
    AboveLeak(f64),
}

impl Default for PsubFloor {
    fn default() -> Self {
        PsubFloor::AboveLeak(10.0)
    }
}

impl PsubFloor {
    pub fn level(&self, trace: &SweepTrace) -> Result<f64> {
        match *self {
            PsubFloor::Absolute(w) => Ok(w),
            PsubFloor::AboveLeak(db) => {
                let lowest = trace
                    .ascending()
                    .first()
                    .map(|r| r.p_sub)
                    .ok_or_else(|| Error::InsufficientData("trace has no converged record".into()))?;
                Ok(lowest * 10f64.powf(db / 10.0))
            }
        }
    }
}

/// Low-drive solution used to judge later ones.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Reference {
    sign: f64,
    /// Auxiliary-generator leak-through with no division, W.
    leak: f64,
}

impl Reference {
    pub(crate) fn of(sys: &HbSystem) -> Result<Self> {
        let sol = sys.solve(REFERENCE_POWER, None)?;
        Ok(Self {
            sign: sol.jacobian_sign,
            leak: sol.p_sub,
        })
    }
}

/// Solves at `p_in`; while the result is still undivided, seeds the odd
/// harmonics and keeps a divided solution whose Jacobian sign matches the
/// low-drive reference. The sign alone misses pairs of simultaneous
/// crossings (identical stages in parallel), so the seeding is not gated on it.
pub(crate) fn solve_tracked(
    sys: &HbSystem,
    p_in: f64,
    init: Option<&HbState>,
    reference: Reference,
) -> Result<(HbSolution, bool)> {
    let sol = sys.solve(p_in, init)?;
    let stable = sol.jacobian_sign == reference.sign;
    if sol.p_sub > 10.0 * reference.leak {
        return Ok((sol, stable));
    }
    for gain in [3.0, 1.0] {
        for phase in [FRAC_PI_2, 0.0] {
            let seed = sys.kicked(&sol.state, gain, phase, 1e-3);
            if let Ok(kicked) = sys.solve_capped(p_in, Some(&seed), KICK_MAX_ITER) {
                if kicked.jacobian_sign == reference.sign && kicked.p_sub > 10.0 * sol.p_sub {
                    log::debug!("moved to divided branch at {:.2} dBm", w_to_dbm(p_in));
                    return Ok((kicked, true));
                }
            }
        }
    }
    Ok((sol, stable))
}

/// Continues from a solved point `(dBm, state)` to `target` dBm in steps of
/// at most `step_db`, halving the step on failure down to
/// `MIN_STEP_FRACTION`. The inner error carries the last Newton failure.
#[allow(clippy::type_complexity)]
fn continue_to(
    sys: &HbSystem,
    from: (f64, HbState),
    target: f64,
    step_db: f64,
    reference: Reference,
) -> Result<std::result::Result<(HbSolution, bool), (usize, f64)>> {
    let (mut here, mut state) = from;
    let sgn = (target - here).signum();
    let mut sub = step_db;
    loop {
        let next = if sgn * (target - (here + sgn * sub)) < 0.0 {
            target
        } else {
            here + sgn * sub
        };
        match solve_tracked(sys, dbm_to_w(next), Some(&state), reference) {
            Ok(done) if next == target => return Ok(Ok(done)),
            Ok((sol, _)) => {
                here = next;
                state = sol.state;
            }
            Err(Error::NoConvergence { iterations, residual, .. }) => {
                if sub * 0.5 < step_db * MIN_STEP_FRACTION - 1e-12 {
                    return Ok(Err((iterations, residual)));
                }
                sub *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Solution at `p_dbm` reached by ramping up from `RAMP_START`, so that a
/// sweep starting above threshold lands on the branch an up-sweep would.
fn approach(sys: &HbSystem, p_dbm: f64, step_db: f64, reference: Reference) -> Result<(HbSolution, bool)> {
    let start = w_to_dbm(RAMP_START);
    let (sol, stable) = solve_tracked(sys, dbm_to_w(p_dbm.min(start)), None, reference)?;
    if p_dbm <= start {
        return Ok((sol, stable));
    }
    match continue_to(sys, (start, sol.state), p_dbm, step_db.min(1.0), reference)? {
        Ok(done) => Ok(done),
        Err((iterations, residual)) => Err(Error::NoConvergence {
            iterations,
            residual,
            history: Vec::new(),
        }),
    }
}

/// Solution at `p_in` (W) reached by 1 dB continuation from a low drive,
/// with the stability flag of [`SweepRecord`].
pub fn solve_continued(net: &Netlist, f_in: f64, p_in: f64, opts: HbOptions) -> Result<(HbSolution, bool)> {
    let sys = HbSystem::new(net, f_in, opts)?;
    let reference = Reference::of(&sys)?;
    approach(&sys, w_to_dbm(p_in), 1.0, reference)
}

/// Power sweep in `step_db` increments between `p_start` and `p_stop` (W),
/// each point warm-started from the previous converged one. `p_start > p_stop`
/// sweeps downward.
pub fn power_sweep(
    net: &Netlist,
    f_in: f64,
    p_start: f64,
    p_stop: f64,
    step_db: f64,
    opts: HbOptions,
) -> Result<SweepTrace> {
    if !(step_db > 0.0 && step_db.is_finite()) {
        return Err(Error::Config(format!("sweep step must be positive, got {step_db} dB")));
    }
    if !(p_start > 0.0 && p_stop > 0.0) || p_start == p_stop {
        return Err(Error::Config("sweep needs two distinct positive power bounds".into()));
    }
    let direction = if p_stop > p_start {
        SweepDirection::Up
    } else {
        SweepDirection::Down
    };
    let sys = HbSystem::new(net, f_in, opts)?;
    let reference = Reference::of(&sys)?;
    let (d0, d1) = (w_to_dbm(p_start), w_to_dbm(p_stop));
    let n = ((d1 - d0).abs() / step_db + 1e-9).floor() as usize;
    let sgn = (d1 - d0).signum();
    let grid: Vec<f64> = (0..=n).map(|i| d0 + sgn * step_db * i as f64).collect();

    let (first, stable) = approach(&sys, grid[0], step_db, reference)?;
    let mut records = vec![SweepRecord::from_solution(&first, stable)];
    let mut last = (grid[0], first.state);
    for &target in &grid[1..] {
        match continue_to(&sys, last.clone(), target, step_db, reference)? {
            Ok((sol, stable)) => {
                records.push(SweepRecord::from_solution(&sol, stable));
                last = (target, sol.state);
            }
            Err((iterations, residual)) => {
                log::warn!("no convergence at {target:.2} dBm; point flagged");
                records.push(SweepRecord::failed(dbm_to_w(target), iterations, residual));
            }
        }
    }
    Ok(SweepTrace {
        direction,
        f_in,
        netlist_hash: net.content_hash(),
        options: opts,
        records,
        netlist: Some(net.clone()),
    })
}

/// Smallest drive at which p_sub exceeds `floor`. When the trace carries its
/// netlist, the bracket is bisected down to 0.1 dB.
pub fn extract_pth(trace: &SweepTrace, floor: PsubFloor) -> Result<f64> {
    let level = floor.level(trace)?;
    let recs = trace.ascending();
    let idx = recs
        .iter()
        .position(|r| r.p_sub > level)
        .ok_or(Error::NoBifurcation)?;
    if idx == 0 {
        return Ok(recs[0].p_in);
    }
    let (lo_rec, hi_rec) = (recs[idx - 1], recs[idx]);
    let (Some(net), Some(lo_state)) = (&trace.netlist, &lo_rec.state) else {
        return Ok(hi_rec.p_in);
    };
    let sys = HbSystem::new(net, trace.f_in, trace.options)?;
    let reference = Reference::of(&sys)?;
    let (mut lo, mut hi) = (w_to_dbm(lo_rec.p_in), w_to_dbm(hi_rec.p_in));
    let mut state = lo_state.clone();
    while hi - lo > PTH_RESOLUTION_DB {
        let mid = 0.5 * (lo + hi);
        let (sol, _) = solve_tracked(&sys, dbm_to_w(mid), Some(&state), reference)?;
        if sol.p_sub > level {
            hi = mid;
        } else {
            lo = mid;
            state = sol.state;
        }
    }
    Ok(dbm_to_w(hi))
}

/// Where the maximum-power criterion is met, if within the trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PmaxBound {
    /// Drive (W) at which the diode peak reaches the conduction limit.
    Reached(f64),
    /// Never reached; the largest drive swept and the largest peak seen.
    Beyond { p_top: f64, max_v_peak: f64 },
}

impl PmaxBound {
    pub fn value(&self) -> Option<f64> {
        match *self {
            PmaxBound::Reached(p) => Some(p),
            PmaxBound::Beyond { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmaxEstimate {
    /// Diode peak-voltage criterion.
    pub diode_peak: PmaxBound,
    /// First local maximum of |S21| above threshold, W.
    pub s21_marker: Option<f64>,
    /// First local minimum of |S11| above threshold, W.
    pub s11_marker: Option<f64>,
}

/// Drive at which the junction peak forward swing reaches `v_dc + v_bi`,
/// interpolated in dBm between records, plus the transmission markers.
pub fn extract_pmax(trace: &SweepTrace, dv: &BiasedVaractor, p_th: Option<f64>) -> Result<PmaxEstimate> {
    let recs = trace.ascending();
    if recs.is_empty() {
        return Err(Error::InsufficientData("trace has no converged record".into()));
    }
    let limit = dv.forward_headroom();
    let diode_peak = match recs.iter().position(|r| r.diode_v_peak >= limit) {
        Some(0) => PmaxBound::Reached(recs[0].p_in),
        Some(i) => {
            let (a, b) = (recs[i - 1], recs[i]);
            let t = (limit - a.diode_v_peak) / (b.diode_v_peak - a.diode_v_peak);
            let (da, db) = (w_to_dbm(a.p_in), w_to_dbm(b.p_in));
            PmaxBound::Reached(dbm_to_w(da + t * (db - da)))
        }
        None => PmaxBound::Beyond {
            p_top: recs[recs.len() - 1].p_in,
            max_v_peak: recs.iter().map(|r| r.diode_v_peak).fold(f64::MIN, f64::max),
        },
    };
    let above: Vec<&SweepRecord> = recs.iter().copied().filter(|r| p_th.is_none_or(|p| r.p_in > p)).collect();
    let local = |metric: &dyn Fn(&SweepRecord) -> f64, sign: f64| {
        above
            .windows(3)
            .find(|w| sign * metric(w[1]) > sign * metric(w[0]) && sign * metric(w[1]) >= sign * metric(w[2]))
            .map(|w| w[1].p_in)
    };
    Ok(PmaxEstimate {
        diode_peak,
        s21_marker: local(&|r| r.s21.norm(), 1.0),
        s11_marker: local(&|r| r.s11.norm(), -1.0),
    })
}

/// Interference suppression over a power sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsReport {
    pub p_th: f64,
    /// Conduction-limited drive; the top of the trace when never reached.
    pub p_max: f64,
    pub p_max_reached: bool,
    /// Low-drive insertion loss, dB.
    pub il_ss: f64,
    /// Largest suppression for p_th < p_in < p_max, dB.
    pub is_max_below_pmax: f64,
    /// (p_in in W, suppression in dB) per converged record, ascending.
    pub curve: Vec<(f64, f64)>,
}

impl IsReport {
    /// Suppression at `p` (W), interpolated in dBm; `None` outside the trace.
    pub fn is_at(&self, p: f64) -> Option<f64> {
        let x = w_to_dbm(p);
        self.curve.windows(2).find_map(|w| {
            let (xa, xb) = (w_to_dbm(w[0].0), w_to_dbm(w[1].0));
            (xa <= x && x <= xb).then(|| {
                let t = if xb > xa { (x - xa) / (xb - xa) } else { 0.0 };
                w[0].1 + t * (w[1].1 - w[0].1)
            })
        })
    }
}

/// Number of lowest-drive records averaged into the small-signal loss.
const IL_SS_POINTS: usize = 5;

pub fn is_report(trace: &SweepTrace, dv: &BiasedVaractor, floor: PsubFloor) -> Result<IsReport> {
    let recs = trace.ascending();
    if recs.len() < IL_SS_POINTS + 2 {
        return Err(Error::InsufficientData(format!(
            "need at least {} converged records, have {}",
            IL_SS_POINTS + 2,
            recs.len()
        )));
    }
    let il = |r: &SweepRecord| -r.s21_db();
    let il_ss = recs[..IL_SS_POINTS].iter().map(|r| il(r)).sum::<f64>() / IL_SS_POINTS as f64;
    let p_th = extract_pth(trace, floor)?;
    let pmax = extract_pmax(trace, dv, Some(p_th))?;
    let (p_max, p_max_reached) = match pmax.diode_peak {
        PmaxBound::Reached(p) => (p, true),
        PmaxBound::Beyond { p_top, .. } => (p_top, false),
    };
    let curve: Vec<(f64, f64)> = recs.iter().map(|r| (r.p_in, il(r) - il_ss)).collect();
    let is_max_below_pmax = curve
        .iter()
        .filter(|(p, _)| *p > p_th && *p < p_max)
        .map(|c| c.1)
        .fold(f64::NAN, f64::max);
    Ok(IsReport {
        p_th,
        p_max: p_max.max(p_th),
        p_max_reached,
        il_ss,
        is_max_below_pmax,
        curve,
    })
}

/// Large-signal response at one drive frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPoint {
    pub f_in: f64,
    pub s21: Complex64,
    pub s11: Complex64,
    pub p_sub: f64,
    pub converged: bool,
}

impl FrequencyPoint {
    pub fn s21_db(&self) -> f64 {
        ratio_to_db(self.s21.norm_sqr())
    }
}

/// Large-signal S21 across `n` drive frequencies at fixed drive `p_in` (W).
/// Each frequency is continued up in 1 dB steps from a low drive so the
/// period-doubled branch is reached the same way as in a power sweep.
pub fn sweep_frequency_at_power(
    net: &Netlist,
    f_start: f64,
    f_stop: f64,
    n: usize,
    p_in: f64,
    opts: HbOptions,
) -> Result<Vec<FrequencyPoint>> {
    use rayon::prelude::*;
    if n < 2 || !(f_start > 0.0 && f_stop > f_start) {
        return Err(Error::Config("frequency sweep needs n >= 2 and 0 < f_start < f_stop".into()));
    }
    let freqs = crate::linear::linspace(f_start, f_stop, n);
    freqs
        .par_iter()
        .map(|&f| {
            let (sol, stable) = solve_continued(net, f, p_in, opts)?;
            let rec = SweepRecord::from_solution(&sol, stable);
            Ok(FrequencyPoint {
                f_in: f,
                s21: rec.s21,
                s11: rec.s11,
                p_sub: rec.p_sub,
                converged: rec.converged,
            })
        })
        .collect()
}
