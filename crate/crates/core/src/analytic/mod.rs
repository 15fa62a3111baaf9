//! Closed-form threshold, insertion-loss and maximum-power estimates.

mod contour;
mod synthesis;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::DrivingPoint;
use crate::model::{AnalyticLosses, BiasedVaractor, DesignPoint, ImpedanceSet};

pub use contour::{contour_grid, Axis, AxisRange, BiasCoupling, ContourSpec, Grid, GridCell, Metric};
pub use synthesis::{synthesize_network, SynthesizedNetwork, BLOCKING_CAPACITANCE, PAG_POWER};

/// Determinant-like combination of the three branch impedances.
pub fn geq(z1: Complex64, z2: Complex64, z3: Complex64) -> Complex64 {
    z2 * z3 + z1 * (z2 + z3)
}

/// Threshold power and the matching peak generator voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub p_th: f64,
    pub v_th: f64,
}

fn prefactor(dv: &BiasedVaractor, dp: &DesignPoint) -> f64 {
    dv.c_v.powi(4) / (2.0 * dp.z0 * dv.delta * dv.delta)
}

/// Threshold from the complete branch-impedance set.
pub fn pth_full(imps: &ImpedanceSet, dv: &BiasedVaractor, dp: &DesignPoint) -> Result<Threshold> {
    if !imps.is_finite() {
        return Err(Error::SingularImpedance("impedance set has non-finite entries".into()));
    }
    let den_d = imps.z1_d + imps.z2_d;
    if den_d.norm() == 0.0 || imps.z2_in.norm() == 0.0 {
        return Err(Error::SingularImpedance(
            "Z1 + Z2 at the divided frequency or Z2 at the drive frequency vanishes".into(),
        ));
    }
    let g_d = geq(imps.z1_d, imps.z2_d, imps.z3_d);
    let g_in = geq(imps.z1_in, imps.z2_in, imps.z3_in);
    let w2 = dp.omega_in * dp.omega_in;
    let p_th = prefactor(dv, dp) * (g_d * g_in * w2 / (den_d * imps.z2_in)).norm_sqr();
    Ok(Threshold {
        p_th,
        v_th: (8.0 * dp.z0 * p_th).sqrt(),
    })
}

/// Threshold when all four resonances hold exactly.
pub fn pth_resonant(losses: &AnalyticLosses, dv: &BiasedVaractor, dp: &DesignPoint) -> f64 {
    let x = losses.r_p * losses.r_d * dp.omega_in * dp.omega_in;
    prefactor(dv, dp) * x * x
}

/// Drive-mesh resistance: series loss plus the port load seen through the transformer.
pub fn rp_from_ztx(r_s: f64, z_tx: f64, z0: f64) -> f64 {
    r_s + 2.0 * z_tx * z_tx / z0
}

/// Mesh loss counting only the diode.
pub fn rs_approx(dv: &BiasedVaractor, dp: &DesignPoint) -> f64 {
    1.0 / (dp.omega_in * dv.c_v * dv.model.q_v)
}

/// Mesh losses with both passive and diode contributions; `r_s = r_d`.
pub fn rs_rd(dv: &BiasedVaractor, dp: &DesignPoint, z_tx: f64) -> AnalyticLosses {
    let r = (1.0 / (dp.omega_in * dv.c_v)) * (1.0 / dp.q_l + 1.0 / dv.model.q_v);
    AnalyticLosses {
        r_s: r,
        r_d: r,
        r_p: rp_from_ztx(r, z_tx, dp.z0),
    }
}

/// Diode-limited losses, the form the simplified threshold builds on.
pub fn rs_rd_approx(dv: &BiasedVaractor, dp: &DesignPoint, z_tx: f64) -> AnalyticLosses {
    let r = rs_approx(dv, dp);
    AnalyticLosses {
        r_s: r,
        r_d: r,
        r_p: rp_from_ztx(r, z_tx, dp.z0),
    }
}

/// Minimum threshold estimate in terms of device and transformer only.
pub fn pth_approx(dv: &BiasedVaractor, dp: &DesignPoint, z_tx: f64) -> f64 {
    let q = dv.model.q_v;
    let num = dp.z0 + 2.0 * dv.c_v * q * z_tx * z_tx * dp.omega_in;
    num * num / (2.0 * q.powi(4) * dp.z0.powi(3) * dv.delta * dv.delta)
}

/// Input impedance of the limiter branch at resonance; open when lossless.
pub fn zin_resonant(losses: &AnalyticLosses, z_tx: f64) -> DrivingPoint {
    if losses.r_s > 0.0 {
        DrivingPoint::Finite(Complex64::new(z_tx * z_tx / losses.r_s, 0.0))
    } else {
        DrivingPoint::Open
    }
}

/// Small-signal insertion loss as a power ratio (>= 1) and in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InsertionLoss {
    pub ratio: f64,
    pub db: f64,
}

impl InsertionLoss {
    fn from_transmission(t: Complex64) -> Self {
        let ratio = 1.0 / t.norm_sqr();
        Self {
            ratio,
            db: 10.0 * ratio.log10(),
        }
    }
}

/// Loss of a shunt impedance across a line terminated at both ends.
pub fn il_ss(z_in: DrivingPoint, z0: f64) -> Result<InsertionLoss> {
    match z_in {
        DrivingPoint::Open => Ok(InsertionLoss { ratio: 1.0, db: 0.0 }),
        DrivingPoint::Finite(z) => {
            let den = z + z0 / 2.0;
            if z.norm() == 0.0 || den.norm() == 0.0 {
                return Err(Error::SingularImpedance(format!("shunt impedance {z} shorts the line")));
            }
            Ok(InsertionLoss::from_transmission(z / den))
        }
    }
}

/// Insertion loss from the mesh series resistance.
pub fn il_from_rs(r_s: f64, z_tx: f64, z0: f64) -> InsertionLoss {
    let t2 = 2.0 * z_tx * z_tx;
    InsertionLoss::from_transmission(Complex64::new(t2 / (r_s * z0 + t2), 0.0))
}

/// Insertion loss from device and transformer only.
pub fn il_closed_form(dv: &BiasedVaractor, dp: &DesignPoint, z_tx: f64) -> InsertionLoss {
    let x = 2.0 * dv.c_v * dv.model.q_v * z_tx * z_tx * dp.omega_in;
    InsertionLoss::from_transmission(Complex64::new(1.0 - dp.z0 / (dp.z0 + x), 0.0))
}

/// Input power at which the diode swing reaches forward conduction.
pub fn pmax_approx(dv: &BiasedVaractor, dp: &DesignPoint, z_tx: f64) -> f64 {
    let head = dv.forward_headroom();
    let q = dv.model.q_v;
    let x = 2.0 * dv.c_v * q * dp.omega_in * z_tx * z_tx + dp.z0;
    head * head * x * x / (8.0 * q * q * dp.z0 * z_tx * z_tx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceMetrics {
    pub p_th: f64,
    /// Power ratio, >= 1.
    pub il_ss: f64,
    pub p_max: f64,
    pub v_th: f64,
}

/// Simplified-form metrics of a design.
pub fn performance_metrics(dv: &BiasedVaractor, dp: &DesignPoint, z_tx: f64) -> PerformanceMetrics {
    let p_th = pth_approx(dv, dp, z_tx);
    PerformanceMetrics {
        p_th,
        il_ss: il_closed_form(dv, dp, z_tx).ratio,
        p_max: pmax_approx(dv, dp, z_tx),
        v_th: (8.0 * dp.z0 * p_th).sqrt(),
    }
}

#[cfg(test)]
mod tests;
