//! Harmonic-balance engine with auxiliary-generator injection.
//!
//! A small generator at half the drive frequency sits on the output port so
//! the divided frequency is part of the harmonic set. Power sweeps are
//! warm-started point to point; while a point is still undivided, the odd
//! harmonics are seeded and a period-doubled solution with the low-drive
//! Jacobian sign is preferred.

mod cascade;
mod solver;
mod sweep;

pub use cascade::cascade_stages;
pub use solver::{hb_solve, Convergence, HarmonicSpectrum, HbOptions, HbSolution, HbState, HbSystem, PowerBalance, GMIN};
pub use sweep::{
    extract_pmax, extract_pth, is_report, power_sweep, solve_continued, sweep_frequency_at_power, FrequencyPoint, IsReport, PmaxBound,
    PmaxEstimate, PsubFloor, SweepDirection, SweepRecord, SweepTrace, DEFAULT_PSUB_FLOOR,
};
