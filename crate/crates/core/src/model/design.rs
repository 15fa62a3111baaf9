use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Operating point of a design: port termination, target frequency and the
/// quality factor assumed for the passive components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub z0: f64,
    pub f_in_opt: f64,
    pub omega_in: f64,
    pub omega_d: f64,
    pub q_l: f64,
}

impl DesignPoint {
    pub fn new(z0: f64, f_in_opt: f64, q_l: f64) -> Result<Self> {
        if !(z0.is_finite() && z0 > 0.0) {
            return Err(Error::Domain(format!("z0 must be positive, got {z0}")));
        }
        if !(f_in_opt.is_finite() && f_in_opt > 0.0) {
            return Err(Error::Domain(format!("f_in_opt must be positive, got {f_in_opt}")));
        }
        // q_l = +inf is the lossless-passive limit
        if !(q_l > 0.0) {
            return Err(Error::Domain(format!("q_l must be positive, got {q_l}")));
        }
        let omega_in = 2.0 * PI * f_in_opt;
        Ok(Self {
            z0,
            f_in_opt,
            omega_in,
            omega_d: omega_in / 2.0,
            q_l,
        })
    }

    pub fn f_d(&self) -> f64 {
        self.f_in_opt / 2.0
    }
}

/// Lumped C–L–C pi realization of the quarter-wave impedance transformer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformerSpec {
    pub z_tx: f64,
    pub l_t: f64,
    pub c_t: f64,
}

impl TransformerSpec {
    /// Element values giving a 90 degree section of impedance `z_tx` at `omega`.
    pub fn quarter_wave(z_tx: f64, omega: f64) -> Result<Self> {
        if !(z_tx.is_finite() && z_tx > 0.0) {
            return Err(Error::Domain(format!("z_tx must be positive, got {z_tx}")));
        }
        Ok(Self {
            z_tx,
            l_t: z_tx / omega,
            c_t: 1.0 / (z_tx * omega),
        })
    }

    pub fn characteristic_impedance(&self) -> f64 {
        (self.l_t / self.c_t).sqrt()
    }
}

/// Branch impedances around the diode node at the drive and divided frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceSet {
    pub z1_in: Complex64,
    pub z2_in: Complex64,
    pub z3_in: Complex64,
    pub z1_d: Complex64,
    pub z2_d: Complex64,
    pub z3_d: Complex64,
    pub z_in: Complex64,
}

impl ImpedanceSet {
    pub fn is_finite(&self) -> bool {
        [
            self.z1_in, self.z2_in, self.z3_in, self.z1_d, self.z2_d, self.z3_d, self.z_in,
        ]
        .iter()
        .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Mesh resistances entering the resonant-condition threshold formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticLosses {
    /// Series loss of the drive-frequency mesh, diode included.
    pub r_s: f64,
    /// Series loss of the divided-frequency mesh.
    pub r_d: f64,
    /// Drive mesh resistance including the transformed port load.
    pub r_p: f64,
}

/// Which component is being converted from Q to a series resistance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReactiveKind {
    Inductor,
    Capacitor,
}

/// Series resistance realizing quality factor `q` at `f_ref`.
pub fn component_series_resistance(kind: ReactiveKind, value: f64, q: f64, f_ref: f64) -> Result<f64> {
    if !(value > 0.0 && q > 0.0 && f_ref > 0.0) {
        return Err(Error::Domain(format!(
            "series resistance needs positive value/q/f_ref, got {value}/{q}/{f_ref}"
        )));
    }
    if q.is_infinite() {
        return Ok(0.0);
    }
    let omega = 2.0 * PI * f_ref;
    Ok(match kind {
        ReactiveKind::Inductor => omega * value / q,
        ReactiveKind::Capacitor => 1.0 / (omega * value * q),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_point_halves_omega() {
        let dp = DesignPoint::new(50.0, 2.1e9, 80.0).unwrap();
        assert_eq!(dp.omega_d * 2.0, dp.omega_in);
        assert!(DesignPoint::new(0.0, 2.1e9, 80.0).is_err());
        assert!(DesignPoint::new(50.0, -1.0, 80.0).is_err());
        assert!(DesignPoint::new(50.0, 2.1e9, 0.0).is_err());
        assert!(DesignPoint::new(50.0, 2.1e9, f64::INFINITY).is_ok());
    }

    #[test]
    fn transformer_impedance_identity() {
        let t = TransformerSpec::quarter_wave(31.0, 2.0 * PI * 2.1e9).unwrap();
        assert!((t.characteristic_impedance() - 31.0).abs() < 1e-9 * 31.0);
    }

    #[test]
    fn series_resistance_values() {
        let rl = component_series_resistance(ReactiveKind::Inductor, 6.8e-9, 80.0, 2.1e9).unwrap();
        assert!((rl - 1.1216).abs() < 1e-4, "{rl}");
        let rc = component_series_resistance(ReactiveKind::Capacitor, 1.4e-12, 100.0, 2.1e9).unwrap();
        assert!((rc - 0.5413).abs() < 5e-4, "{rc}");
        let lossless =
            component_series_resistance(ReactiveKind::Capacitor, 1e-12, f64::INFINITY, 2.1e9).unwrap();
        assert_eq!(lossless, 0.0);
        assert!(component_series_resistance(ReactiveKind::Inductor, 1e-9, -1.0, 1e9).is_err());
    }
}
