//! Component values realizing the four resonances around the diode node.
//!
//! Topology (node ids of the emitted netlist):
//!
//! ```text
//!  ports ── 1 ──LT── 2 ──(LA‖CA)── 3 ──LC── 4 ──X1── gnd
//!           │        │             │
//!          CIN      CTX          CBLK
//!           │        │             │
//!          gnd      gnd      5 ──(LB‖CB)── gnd
//! ```
//!
//! Both ports sit on node 1, so the limiter is a reflective shunt branch.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::{driving_point_impedance, BranchCuts};
use crate::model::{BiasedVaractor, DesignPoint, ElementKind, Netlist, NodeId, SourceSpec, TransformerSpec};

/// DC-blocking capacitor in series with the drive-frequency tank.
pub const BLOCKING_CAPACITANCE: f64 = 12e-12;

/// Default probe power of the auxiliary generator, W.
pub const PAG_POWER: f64 = 1e-12;

pub const PORT_NODE: NodeId = 1;
pub const TRANSFORMER_NODE: NodeId = 2;
pub const HUB_NODE: NodeId = 3;
pub const DIODE_NODE: NodeId = 4;
pub const TANK_NODE: NodeId = 5;

const NEWTON_TOL: f64 = 1e-9;
const NEWTON_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesizedNetwork {
    pub l_a: f64,
    pub c_a: f64,
    pub l_b: f64,
    pub c_b: f64,
    pub l_c: f64,
    pub c_blk: f64,
    pub transformer: TransformerSpec,
    pub c_tx: f64,
    pub c_in: f64,
    pub varactor: BiasedVaractor,
    pub design: DesignPoint,
    /// Imaginary-part residuals at the drive and divided frequencies, ohm.
    pub residual_in: f64,
    pub residual_d: f64,
}

fn names(list: &[&str]) -> BTreeSet<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// Element removals defining the three branches seen from the hub and the
/// limiter input seen from the port node.
pub fn pfsl_branch_cuts() -> BranchCuts {
    BranchCuts {
        hub: HUB_NODE,
        input: PORT_NODE,
        toward_1: names(&["CBLK", "LC"]),
        toward_2: names(&["LA", "CA", "LC"]),
        toward_3: names(&["LA", "CA", "CBLK"]),
        toward_input: names(&["P1", "P2"]),
    }
}

#[derive(Clone, Copy)]
struct Values {
    l_a: f64,
    c_a: f64,
    l_b: f64,
    c_b: f64,
    l_c: f64,
    t: TransformerSpec,
}

fn build(v: &Values, dv: &BiasedVaractor, dp: &DesignPoint, p_in: f64) -> Netlist {
    let q = (dp.q_l.is_finite()).then_some(dp.q_l);
    let ind = |h: f64| ElementKind::Inductor { henries: h, q };
    let cap = |f: f64| ElementKind::Capacitor { farads: f, q };
    let mut n = Netlist::new();
    n.add("CIN", PORT_NODE, 0, cap(v.t.c_t))
        .add("LT", PORT_NODE, TRANSFORMER_NODE, ind(v.t.l_t))
        .add("CTX", TRANSFORMER_NODE, 0, cap(v.t.c_t))
        .add("LA", TRANSFORMER_NODE, HUB_NODE, ind(v.l_a))
        .add("CA", TRANSFORMER_NODE, HUB_NODE, cap(v.c_a))
        .add("CBLK", HUB_NODE, TANK_NODE, cap(BLOCKING_CAPACITANCE))
        .add("LB", TANK_NODE, 0, ind(v.l_b))
        .add("CB", TANK_NODE, 0, cap(v.c_b))
        .add("LC", HUB_NODE, DIODE_NODE, ind(v.l_c))
        .add(
            "X1",
            DIODE_NODE,
            0,
            ElementKind::Varactor {
                model_name: "varactor".into(),
                device: *dv,
            },
        )
        .add(
            "V1",
            PORT_NODE,
            0,
            ElementKind::CwSource(SourceSpec {
                freq: dp.f_in_opt,
                power: p_in,
                z_source: dp.z0,
            }),
        )
        .add(
            "A1",
            PORT_NODE,
            0,
            ElementKind::PagSource(SourceSpec {
                freq: dp.f_d(),
                power: PAG_POWER,
                z_source: dp.z0,
            }),
        )
        .add_port(PORT_NODE, 0, dp.z0)
        .add_port(PORT_NODE, 0, dp.z0);
    n.f_ref = Some(dp.f_in_opt);
    n
}

/// Imaginary parts of (Z1 + Z3) at the drive frequency and (Z2 + Z3) at the
/// divided frequency, with the real parts for scaling.
fn residuals(v: &Values, dv: &BiasedVaractor, dp: &DesignPoint) -> Result<[f64; 4]> {
    let net = build(v, dv, dp, 1e-3);
    let cuts = pfsl_branch_cuts();
    let z = |ex: &BTreeSet<String>, f: f64| -> Result<num_complex::Complex64> {
        driving_point_impedance(&net, cuts.hub, ex, f)?
            .finite()
            .ok_or_else(|| Error::SingularImpedance(format!("branch open at {f} Hz")))
    };
    let s_in = z(&cuts.toward_1, dp.f_in_opt)? + z(&cuts.toward_3, dp.f_in_opt)?;
    let s_d = z(&cuts.toward_2, dp.f_d())? + z(&cuts.toward_3, dp.f_d())?;
    Ok([s_in.im, s_d.im, s_in.re, s_d.re])
}

fn with(base: &Values, l_b: f64, l_c: f64, dp: &DesignPoint) -> Values {
    Values {
        l_b,
        l_c,
        c_b: 1.0 / (l_b * dp.omega_in * dp.omega_in),
        ..*base
    }
}

/// Solves the two series resonances for (L_b, L_c) given the divided-frequency
/// tank inductance `l_a_seed`.
pub fn synthesize_network(
    dv: &BiasedVaractor,
    dp: &DesignPoint,
    z_tx: f64,
    l_a_seed: f64,
) -> Result<SynthesizedNetwork> {
    if !(z_tx.is_finite() && z_tx > 0.0) {
        return Err(Error::Domain(format!("z_tx must be positive, got {z_tx}")));
    }
    if !(l_a_seed.is_finite() && l_a_seed > 0.0) {
        return Err(Error::Domain(format!("L_a seed must be positive, got {l_a_seed}")));
    }
    let (wi, wd) = (dp.omega_in, dp.omega_d);
    let t = TransformerSpec::quarter_wave(z_tx, wi)?;
    let base = Values {
        l_a: l_a_seed,
        c_a: 1.0 / (l_a_seed * wd * wd),
        l_b: 0.0,
        c_b: 0.0,
        l_c: 0.0,
        t,
    };
    // lossless closed-form seeds
    let l_c0 = 1.0 / (wi * wi * dv.c_v) + l_a_seed / 3.0;
    let l_b0 = 0.75 * (1.0 / (wd * wd * dv.c_v) + 1.0 / (wd * wd * BLOCKING_CAPACITANCE) - l_c0);
    let infeasible = |reason: &str, r: [f64; 4]| Error::InfeasibleSynthesis {
        reason: reason.into(),
        res_in: r[0],
        res_d: r[1],
    };
    if l_b0 <= 0.0 {
        let r = residuals(&with(&base, 1e-15, l_c0, dp), dv, dp).unwrap_or([f64::NAN; 4]);
        return Err(infeasible("the divided-frequency mesh needs a negative tank inductance", r));
    }

    // damped Newton in nH units
    let scale = 1e-9;
    let mut x = [l_b0 / scale, l_c0 / scale];
    let eval = |x: [f64; 2]| residuals(&with(&base, x[0] * scale, x[1] * scale, dp), dv, dp);
    let mut r = eval(x)?;
    let norm = |r: &[f64; 4]| r[0].hypot(r[1]);
    let mut converged = false;
    for _ in 0..NEWTON_MAX_ITER {
        if r[0].abs() <= NEWTON_TOL * r[2].abs() && r[1].abs() <= NEWTON_TOL * r[3].abs() {
            converged = true;
            break;
        }
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let h = 1e-6 * x[k];
            let mut xp = x;
            xp[k] += h;
            let rp = eval(xp)?;
            jac[0][k] = (rp[0] - r[0]) / h;
            jac[1][k] = (rp[1] - r[1]) / h;
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dx = [
            -(jac[1][1] * r[0] - jac[0][1] * r[1]) / det,
            -(-jac[1][0] * r[0] + jac[0][0] * r[1]) / det,
        ];
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let xn = [x[0] + lambda * dx[0], x[1] + lambda * dx[1]];
            if xn[0] > 0.0 && xn[1] > 0.0 {
                if let Ok(rn) = eval(xn) {
                    if norm(&rn) < norm(&r) || lambda < 1e-6 {
                        x = xn;
                        r = rn;
                        accepted = true;
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
        if (dx[0] / x[0]).abs().max((dx[1] / x[1]).abs()) * lambda < NEWTON_TOL {
            converged = r[0].abs() <= 1e-6 * r[2].abs() && r[1].abs() <= 1e-6 * r[3].abs();
            if converged {
                break;
            }
        }
    }
    if !converged {
        let (xb, rb) = bisection_fallback(x, &eval)?;
        x = xb;
        r = rb;
    }
    if r[0].abs() > 1e-3 * r[2].abs() || r[1].abs() > 1e-3 * r[3].abs() {
        return Err(infeasible("no positive root for the series resonances", r));
    }
    let v = with(&base, x[0] * scale, x[1] * scale, dp);
    Ok(SynthesizedNetwork {
        l_a: v.l_a,
        c_a: v.c_a,
        l_b: v.l_b,
        c_b: v.c_b,
        l_c: v.l_c,
        c_blk: BLOCKING_CAPACITANCE,
        transformer: t,
        c_tx: t.c_t,
        c_in: t.c_t,
        varactor: *dv,
        design: *dp,
        residual_in: r[0],
        residual_d: r[1],
    })
}

/// Alternating bisection along each coordinate; each residual is monotone in
/// its own inductor.
fn bisection_fallback(
    mut x: [f64; 2],
    eval: &dyn Fn([f64; 2]) -> Result<[f64; 4]>,
) -> Result<([f64; 2], [f64; 4])> {
    for _ in 0..6 {
        for (k, res) in [(1usize, 0usize), (0, 1)] {
            let f = |v: f64| -> Result<f64> {
                let mut xx = x;
                xx[k] = v;
                Ok(eval(xx)?[res])
            };
            let (mut lo, mut hi) = (1e-4, 1e4);
            let (flo, fhi) = (f(lo)?, f(hi)?);
            if flo.signum() == fhi.signum() {
                continue;
            }
            for _ in 0..200 {
                let mid = (lo * hi).sqrt();
                let fm = f(mid)?;
                if fm.signum() == flo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi / lo - 1.0 < 1e-13 {
                    break;
                }
            }
            x[k] = (lo * hi).sqrt();
        }
    }
    let r = eval(x)?;
    Ok((x, r))
}

impl SynthesizedNetwork {
    fn values(&self) -> Values {
        Values {
            l_a: self.l_a,
            c_a: self.c_a,
            l_b: self.l_b,
            c_b: self.c_b,
            l_c: self.l_c,
            t: self.transformer,
        }
    }

    /// Complete limiter netlist with the drive at `p_in` watts and the probe
    /// generator at its default level.
    pub fn to_netlist(&self, p_in: f64) -> Netlist {
        build(&self.values(), &self.varactor, &self.design, p_in)
    }

    pub fn branch_cuts(&self) -> BranchCuts {
        pfsl_branch_cuts()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{capacitance_at_bias, VaractorModel};

    fn prototype(q_l: f64) -> (BiasedVaractor, DesignPoint) {
        (
            capacitance_at_bias(&VaractorModel::default(), 1.1).unwrap(),
            DesignPoint::new(50.0, 2.1e9, q_l).unwrap(),
        )
    }

    #[test]
    fn parallel_resonance_rule() {
        let w = 2.0 * std::f64::consts::PI * 2.1e9;
        let c = 1.0 / (6.8e-9 * w * w);
        assert!((c - 0.8447e-12).abs() < 0.0001e-12, "{c}");
    }

    #[test]
    fn lossless_matches_closed_form() {
        let (dv, dp) = prototype(f64::INFINITY);
        let s = synthesize_network(&dv, &dp, 31.0, 11e-9).unwrap();
        let l_c = 1.0 / (dp.omega_in.powi(2) * dv.c_v) + 11e-9 / 3.0;
        assert!((s.l_c - l_c).abs() < 1e-6 * l_c, "{} vs {}", s.l_c, l_c);
        assert!((s.l_a * s.c_a * dp.omega_d.powi(2) - 1.0).abs() < 1e-9);
        assert!((s.l_b * s.c_b * dp.omega_in.powi(2) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lossy_residuals_below_tolerance() {
        let (dv, dp) = prototype(80.0);
        let s = synthesize_network(&dv, &dp, 31.0, 11e-9).unwrap();
        let r = residuals(&s.values(), &dv, &dp).unwrap();
        assert!(r[0].abs() < 1e-3 * r[2].abs() && r[1].abs() < 1e-3 * r[3].abs(), "{r:?}");
        assert!(s.l_b > 0.0 && s.l_c > 0.0);
    }

    #[test]
    fn oversized_tank_is_infeasible() {
        let (dv, dp) = prototype(f64::INFINITY);
        match synthesize_network(&dv, &dp, 31.0, 60e-9) {
            Err(Error::InfeasibleSynthesis { .. }) => {}
            other => panic!("expected infeasible, got {other:?}"),
        }
        assert!(synthesize_network(&dv, &dp, -1.0, 11e-9).is_err());
    }
}
