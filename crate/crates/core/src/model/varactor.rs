//! Varactor C–V law, bias linearization and junction conduction.
//!
//! Voltages handed to the large-signal functions are *reverse* voltages
//! across the junction (cathode minus anode). The element convention used by
//! the circuit engines puts the cathode on `node_a`, so a positive element
//! voltage reverse-biases the diode.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Thermal voltage at 300 K.
pub const THERMAL_VOLTAGE: f64 = 0.025_852;

/// Fraction of `v_j` of forward bias beyond which the depletion
/// capacitance is continued linearly (the usual SPICE `FC` coefficient).
pub const DEPLETION_FC: f64 = 0.5;

/// Exponent at which the conduction exponential is continued linearly.
const EXP_LIMIT: f64 = 40.0;

pub const DEFAULT_BREAKDOWN: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VaractorModel {
    /// Zero-bias junction capacitance, F.
    pub c_j0: f64,
    /// Junction potential, V.
    pub v_j: f64,
    /// Grading exponent.
    pub gamma: f64,
    /// Quality factor at the design frequency.
    pub q_v: f64,
    /// Built-in voltage used by the forward-conduction criterion, V.
    pub v_bi: f64,
    /// Saturation current, A.
    pub i_s: f64,
    pub n_ideality: f64,
    /// Package capacitance in parallel with the junction, F.
    pub c_pkg: f64,
    /// Reverse bias above which the model is not trusted, V.
    #[serde(default = "default_breakdown")]
    pub v_breakdown: f64,
}

fn default_breakdown() -> f64 {
    DEFAULT_BREAKDOWN
}

impl Default for VaractorModel {
    /// Hyperabrupt device giving 2.0 pF total (1.6 pF junction + 0.4 pF
    /// package) and a normalized slope of 0.4 /V at 1.1 V reverse bias.
    fn default() -> Self {
        let v_j: f64 = 0.8;
        let gamma = 0.95;
        let c_j0 = 1.6e-12 * (1.0 + 1.1 / v_j).powf(gamma);
        Self {
            c_j0,
            v_j,
            gamma,
            q_v: 15.0,
            v_bi: 0.7,
            i_s: 1e-14,
            n_ideality: 1.0,
            c_pkg: 0.4e-12,
            v_breakdown: DEFAULT_BREAKDOWN,
        }
    }
}

impl VaractorModel {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("c_j0", self.c_j0),
            ("v_j", self.v_j),
            ("gamma", self.gamma),
            ("q_v", self.q_v),
            ("v_bi", self.v_bi),
            ("i_s", self.i_s),
            ("n_ideality", self.n_ideality),
            ("v_breakdown", self.v_breakdown),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Domain(format!("varactor {name} must be positive, got {value}")));
            }
        }
        if !(self.c_pkg.is_finite() && self.c_pkg >= 0.0) {
            return Err(Error::Domain(format!("varactor c_pkg must be >= 0, got {}", self.c_pkg)));
        }
        Ok(())
    }

    /// Junction (depletion) capacitance at reverse voltage `vr`.
    pub fn junction_capacitance(&self, vr: f64) -> f64 {
        let vr0 = -DEPLETION_FC * self.v_j;
        if vr >= vr0 {
            self.c_j0 / (1.0 + vr / self.v_j).powf(self.gamma)
        } else {
            let c0 = self.c_j0 / (1.0 + vr0 / self.v_j).powf(self.gamma);
            c0 + self.junction_slope(vr0) * (vr - vr0)
        }
    }

    /// d(C_j)/d(vr); negative in the depletion region.
    pub fn junction_slope(&self, vr: f64) -> f64 {
        let vr = vr.max(-DEPLETION_FC * self.v_j);
        -self.gamma / self.v_j * self.c_j0 / (1.0 + vr / self.v_j).powf(self.gamma + 1.0)
    }

    /// Total small-signal capacitance, junction plus package.
    pub fn capacitance(&self, vr: f64) -> f64 {
        self.c_pkg + self.junction_capacitance(vr)
    }

    /// Charge stored at reverse voltage `vr`, referenced to zero volts, so
    /// that `d(charge)/d(vr) == capacitance(vr)`.
    pub fn charge(&self, vr: f64) -> f64 {
        let vr0 = -DEPLETION_FC * self.v_j;
        let qj = |v: f64| {
            let x = 1.0 + v / self.v_j;
            if (self.gamma - 1.0).abs() < 1e-12 {
                self.c_j0 * self.v_j * x.ln()
            } else {
                self.c_j0 * self.v_j / (1.0 - self.gamma) * (x.powf(1.0 - self.gamma) - 1.0)
            }
        };
        let junction = if vr >= vr0 {
            qj(vr)
        } else {
            let dv = vr - vr0;
            let c0 = self.junction_capacitance(vr0);
            qj(vr0) + c0 * dv + 0.5 * self.junction_slope(vr0) * dv * dv
        };
        self.c_pkg * vr + junction
    }

    /// Conduction current flowing cathode to anode at reverse voltage `vr`,
    /// and its derivative with respect to `vr`.
    pub fn conduction(&self, vr: f64) -> (f64, f64) {
        let nvt = self.n_ideality * THERMAL_VOLTAGE;
        let x = -vr / nvt;
        let (e, de) = if x > EXP_LIMIT {
            let el = EXP_LIMIT.exp();
            (el * (1.0 + x - EXP_LIMIT), el)
        } else {
            let e = x.exp();
            (e, e)
        };
        (self.i_s * (1.0 - e), self.i_s * de / nvt)
    }
}

/// A varactor linearized around its DC reverse bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasedVaractor {
    pub model: VaractorModel,
    pub v_dc: f64,
    /// Total capacitance at bias, package included, F.
    pub c_v: f64,
    /// Normalized C–V slope: C(V_DC + v) ~ c_v (1 + delta v / 1 V).
    pub delta: f64,
}

/// Evaluates the C–V law at `v_dc` and returns the linearized device.
pub fn capacitance_at_bias(model: &VaractorModel, v_dc: f64) -> Result<BiasedVaractor> {
    model.validate()?;
    if !(v_dc.is_finite() && v_dc >= 0.0) {
        return Err(Error::Domain(format!("bias voltage must be >= 0 V, got {v_dc}")));
    }
    if v_dc >= model.v_breakdown {
        return Err(Error::Domain(format!(
            "bias {v_dc} V at or beyond breakdown {} V",
            model.v_breakdown
        )));
    }
    let c_v = model.capacitance(v_dc);
    let delta = model.junction_slope(v_dc).abs() / c_v;
    Ok(BiasedVaractor {
        model: *model,
        v_dc,
        c_v,
        delta,
    })
}

impl BiasedVaractor {
    /// Series loss resistance realizing `q_v` at `f_ref`.
    pub fn series_resistance(&self, f_ref: f64) -> f64 {
        1.0 / (2.0 * std::f64::consts::PI * f_ref * self.c_v * self.model.q_v)
    }

    /// Charge deviation from the bias point for a junction-voltage deviation `v`,
    /// together with the incremental capacitance.
    pub fn charge_dev(&self, v: f64) -> (f64, f64) {
        let vr = self.v_dc + v;
        (
            self.model.charge(vr) - self.model.charge(self.v_dc),
            self.model.capacitance(vr),
        )
    }

    /// Conduction current deviation from the bias point and its conductance.
    pub fn current_dev(&self, v: f64) -> (f64, f64) {
        let (i0, _) = self.model.conduction(self.v_dc);
        let (i, g) = self.model.conduction(self.v_dc + v);
        (i - i0, g)
    }

    /// Reverse voltage at which forward conduction sets in, expressed as a
    /// forward excursion from the bias point.
    pub fn forward_headroom(&self) -> f64 {
        self.v_dc + self.model.v_bi
    }
}
