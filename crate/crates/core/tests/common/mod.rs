//! Circuits shared by the integration suites.
#![allow(dead_code)]

use pfsl::analytic::synthesize_network;
use pfsl::io::units::dbm_to_w;
use pfsl::model::{capacitance_at_bias, DesignPoint, ElementKind, Netlist, SourceSpec, VaractorModel};

pub const F_IN: f64 = 2.1e9;

/// Series resistor and varactor across the port, driven by `emf` volts peak.
pub fn varactor_loop(emf: f64) -> Netlist {
    let dv = capacitance_at_bias(&VaractorModel::default(), 1.1).unwrap();
    let z0 = 50.0;
    let mut n = Netlist::new();
    n.add(
        "V1",
        1,
        0,
        ElementKind::CwSource(SourceSpec {
            freq: F_IN,
            power: emf * emf / (8.0 * z0),
            z_source: z0,
        }),
    )
    .add(
        "A1",
        1,
        0,
        ElementKind::PagSource(SourceSpec {
            freq: F_IN / 2.0,
            power: 1e-12,
            z_source: z0,
        }),
    )
    .add("R1", 1, 2, ElementKind::Resistor { ohms: 10.0 })
    .add(
        "X1",
        2,
        0,
        ElementKind::Varactor {
            model_name: "varactor".into(),
            device: dv,
        },
    )
    .add_port(1, 0, z0)
    .add_port(1, 0, z0);
    n.f_ref = Some(F_IN);
    n
}

/// The 2.1 GHz limiter synthesized for the default varactor at 1.1 V.
pub fn limiter(p_dbm: f64) -> Netlist {
    let dv = capacitance_at_bias(&VaractorModel::default(), 1.1).unwrap();
    let dp = DesignPoint::new(50.0, F_IN, 2000.0).unwrap();
    synthesize_network(&dv, &dp, 31.0, 13e-9)
        .unwrap()
        .to_netlist(dbm_to_w(p_dbm))
}

/// Five nonlinear circuits spanning weak, strong, undivided and divided drive.
pub fn fixtures() -> Vec<(&'static str, Netlist)> {
    vec![
        ("loop_1v", varactor_loop(1.0)),
        ("loop_3v", varactor_loop(3.0)),
        ("limiter_-10dbm", limiter(-10.0)),
        ("limiter_5dbm", limiter(5.0)),
        ("limiter_12dbm", limiter(12.0)),
    ]
}
