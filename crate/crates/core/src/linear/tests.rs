use super::*;
use crate::model::{ElementKind, Netlist, SourceSpec};
use proptest::prelude::*;

fn two_port(z0: f64) -> Netlist {
    let mut n = Netlist::new();
    n.add_port(1, 0, z0).add_port(2, 0, z0);
    n
}

fn r(ohms: f64) -> ElementKind {
    ElementKind::Resistor { ohms }
}
fn l(h: f64) -> ElementKind {
    ElementKind::Inductor { henries: h, q: None }
}
fn c(f: f64) -> ElementKind {
    ElementKind::Capacitor { farads: f, q: None }
}

#[test]
fn series_impedance_transmission() {
    let mut n = two_port(50.0);
    n.add("R1", 1, 2, r(30.0));
    let s = s_parameters(&n, 1e9).unwrap();
    assert!((s.s21 - Complex64::new(100.0 / 130.0, 0.0)).norm() < 1e-12);
    assert!((s.s12 - s.s21).norm() < 1e-12);
    let mut short = two_port(50.0);
    short.add("R1", 1, 2, r(1e-6));
    let s = s_parameters(&short, 1e6).unwrap();
    assert!((s.s21 - 1.0).norm() < 1e-7);
}

#[test]
fn quarter_wave_pi_matches_load() {
    let w = 2.0 * PI * 2.1e9;
    let z_tx = (50.0f64 * 200.0).sqrt();
    let mut n = Netlist::new();
    n.add("C1", 1, 0, c(1.0 / (z_tx * w)))
        .add("L1", 1, 2, l(z_tx / w))
        .add("C2", 2, 0, c(1.0 / (z_tx * w)))
        .add("RL", 2, 0, r(200.0))
        .add_port(1, 0, 50.0);
    let s = s_matrix(&n, 2.1e9).unwrap();
    assert!(s[0][0].norm() < 1e-6, "{}", s[0][0].norm());
}

#[test]
fn shunt_resistor_is_flat() {
    let mut n = two_port(50.0);
    n.add("R1", 1, 2, l(1e-15)).add("R2", 2, 0, r(50.0));
    let sweep = sweep_sparams(&n, 1e8, 1e9, 11).unwrap();
    let first = sweep[0].s21_db();
    for s in &sweep {
        assert!((s.s21_db() - first).abs() < 1e-6);
    }
}

#[test]
fn port_reversal_transposes() {
    let mut n = two_port(50.0);
    n.add("R1", 1, 2, r(10.0))
        .add("C1", 2, 0, c(2e-12))
        .add("L1", 1, 0, l(8e-9));
    let s = s_parameters(&n, 1.3e9).unwrap();
    n.ports.reverse();
    let t = s_parameters(&n, 1.3e9).unwrap();
    assert!((s.s11 - t.s22).norm() < 1e-12);
    assert!((s.s22 - t.s11).norm() < 1e-12);
    assert!((s.s21 - t.s12).norm() < 1e-12);
}

#[test]
fn ac_solve_divider_and_source_frequency() {
    let mut n = two_port(50.0);
    n.add("R1", 1, 2, r(50.0)).add(
        "V1",
        1,
        0,
        ElementKind::CwSource(SourceSpec {
            freq: 1e9,
            power: 1e-3,
            z_source: 50.0,
        }),
    );
    let sol = ac_solve(&n, 1e9).unwrap();
    let e = (8.0 * 50.0 * 1e-3f64).sqrt();
    // source 50 | 50 series | 50 load
    assert!((sol.v(2).re - e / 3.0).abs() < 1e-12);
    assert!(matches!(ac_solve(&n, 2e9), Err(Error::Config(_))));
}

#[test]
fn floating_node_reports_degenerate_topology() {
    let mut n = two_port(50.0);
    n.add("R1", 1, 0, r(50.0)).add("R2", 2, 0, r(50.0)).add("R3", 3, 4, r(1.0));
    match s_parameters(&n, 1e9) {
        Err(Error::DegenerateTopology { node, .. }) => assert!(node == 3 || node == 4),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn single_inductor_impedance() {
    let mut n = Netlist::new();
    n.add("L1", 1, 0, l(5e-9));
    let z = driving_point_impedance(&n, 1, &BTreeSet::new(), 1e9).unwrap().finite().unwrap();
    assert!((z - Complex64::new(0.0, 2.0 * PI * 1e9 * 5e-9)).norm() < 1e-9);
}

#[test]
fn tank_at_resonance_is_q_times_reactance() {
    let (lv, cv, q): (f64, f64, f64) = (6.8e-9, 0.8447e-12, 80.0);
    let f0 = 1.0 / (2.0 * PI * (lv * cv).sqrt());
    let mut n = Netlist::new();
    n.add("L1", 1, 0, ElementKind::Inductor { henries: lv, q: Some(q) })
        .add("C1", 1, 0, c(cv));
    n.f_ref = Some(f0);
    let z = driving_point_impedance(&n, 1, &BTreeSet::new(), f0).unwrap().finite().unwrap();
    let expected = q * 2.0 * PI * f0 * lv;
    assert!((z.re - expected).abs() < 1e-3 * expected, "{} vs {}", z.re, expected);
}

#[test]
fn excluded_branch_can_leave_open() {
    let mut n = Netlist::new();
    n.add("C1", 1, 2, c(1e-12)).add("R1", 2, 0, r(10.0)).add_port(1, 0, 50.0);
    let ex: BTreeSet<String> = ["R1".to_string(), "P1".to_string()].into();
    assert_eq!(driving_point_impedance(&n, 1, &ex, 1e9).unwrap(), DrivingPoint::Open);
    let ex: BTreeSet<String> = ["R1".to_string()].into();
    let z = driving_point_impedance(&n, 1, &ex, 1e9).unwrap().finite().unwrap();
    assert!((z - 50.0).norm() < 1e-9);
}

fn matched_pad(db_loss: f64, z0: f64) -> Netlist {
    let k = 10f64.powf(db_loss / 20.0);
    let shunt = z0 * (k + 1.0) / (k - 1.0);
    let series = z0 * (k * k - 1.0) / (2.0 * k);
    let mut n = two_port(z0);
    n.add("RA", 1, 0, r(shunt)).add("RS", 1, 2, r(series)).add("RB", 2, 0, r(shunt));
    n
}

#[test]
fn cascade_identity_and_composition() {
    let pad = sweep_sparams(&matched_pad(3.0, 50.0), 1e9, 2e9, 5).unwrap();
    assert!((pad[0].s21_db() + 3.0).abs() < 1e-9);
    let thru: Vec<_> = pad.iter().map(|s| SParameters::thru(s.frequency, 50.0)).collect();
    let same = cascade(&pad, &thru).unwrap();
    for (a, b) in same.iter().zip(&pad) {
        assert!((a.s21 - b.s21).norm() < 1e-12 && (a.s11 - b.s11).norm() < 1e-12);
    }
    let six = cascade(&pad, &pad).unwrap();
    for s in &six {
        assert!((s.s21_db() + 6.0).abs() < 1e-9);
    }
    assert!(matches!(cascade(&pad, &pad[..3]), Err(Error::GridMismatch)));
}

#[test]
fn cascade_equals_merged_netlist() {
    let mut a = two_port(50.0);
    a.add("L1", 1, 2, l(4e-9)).add("C1", 2, 0, c(1.5e-12)).add("R1", 1, 0, r(300.0));
    let sa = sweep_sparams(&a, 1e9, 3e9, 7).unwrap();
    let mut merged = Netlist::new();
    merged
        .add("L1", 1, 2, l(4e-9))
        .add("C1", 2, 0, c(1.5e-12))
        .add("R1", 1, 0, r(300.0))
        .add("L2", 2, 3, l(4e-9))
        .add("C2", 3, 0, c(1.5e-12))
        .add("R2", 2, 0, r(300.0))
        .add_port(1, 0, 50.0)
        .add_port(3, 0, 50.0);
    let sm = sweep_sparams(&merged, 1e9, 3e9, 7).unwrap();
    for (x, y) in cascade(&sa, &sa).unwrap().iter().zip(&sm) {
        assert!((x.s21 - y.s21).norm() < 1e-10);
        assert!((x.s11 - y.s11).norm() < 1e-10);
    }
}

#[test]
fn three_db_band_of_series_resonator() {
    let (lv, cv) = (20e-9, 0.5e-12);
    let mut n = two_port(50.0);
    n.add("L1", 1, 3, l(lv)).add("C1", 3, 2, c(cv));
    let sweep = sweep_sparams(&n, 0.5e9, 3.5e9, 3001).unwrap();
    let band = three_db_band(&sweep).unwrap();
    // |S21| = -3 dB where the series reactance reaches 100 sqrt(10^0.3 - 1) ohm
    let x = 100.0 * (10f64.powf(0.3) - 1.0).sqrt();
    let expected = x / (2.0 * PI * lv);
    assert!(((band.f_high - band.f_low) - expected).abs() < 1e-4 * expected, "{band:?} {expected}");
    assert!(band.contains(1.0 / (2.0 * PI * (lv * cv).sqrt())));
}

#[derive(Debug, Clone)]
enum Part {
    R(f64),
    L(f64),
    C(f64),
}

impl Part {
    fn kind(&self) -> ElementKind {
        match *self {
            Part::R(v) => r(v),
            Part::L(v) => l(v),
            Part::C(v) => c(v),
        }
    }
    fn z(&self, w: f64) -> Complex64 {
        match *self {
            Part::R(v) => Complex64::new(v, 0.0),
            Part::L(v) => Complex64::new(0.0, w * v),
            Part::C(v) => Complex64::new(0.0, -1.0 / (w * v)),
        }
    }
}

fn part() -> impl Strategy<Value = Part> {
    prop_oneof![
        (1.0f64..500.0).prop_map(Part::R),
        (0.5e-9f64..50e-9).prop_map(Part::L),
        (0.1e-12f64..20e-12).prop_map(Part::C),
    ]
}

fn lossy_two_port() -> impl Strategy<Value = Netlist> {
    (prop::collection::vec((part(), part()), 1..5), 1.0f64..200.0).prop_map(|(stages, rl)| {
        let mut n = two_port(50.0);
        let mut node = 1;
        for (k, (series, shunt)) in stages.iter().enumerate() {
            n.add(format!("S{k}"), node, node + 1, series.kind());
            n.add(format!("H{k}"), node + 1, 0, shunt.kind());
            node += 1;
        }
        n.add("RL", node, 0, r(rl));
        n.add("RIN", 1, 0, r(rl * 3.0));
        n.ports[1].node = node;
        n
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn ladder_impedance_matches_reduction(
        stages in prop::collection::vec((part(), part()), 1..6),
        f in 1e8f64..5e9,
    ) {
        let w = 2.0 * PI * f;
        let mut n = Netlist::new();
        for (k, (series, shunt)) in stages.iter().enumerate() {
            n.add(format!("S{k}"), k + 1, k + 2, series.kind());
            n.add(format!("H{k}"), k + 2, 0, shunt.kind());
        }
        let mut z = Complex64::new(f64::INFINITY, 0.0);
        for (series, shunt) in stages.iter().rev() {
            let zs = shunt.z(w);
            z = if z.re.is_infinite() { zs } else { zs * z / (zs + z) };
            z += series.z(w);
        }
        match driving_point_impedance(&n, 1, &BTreeSet::new(), f).unwrap() {
            DrivingPoint::Finite(got) => prop_assert!((got - z).norm() <= 1e-9 * z.norm().max(1e-3), "{got} vs {z}"),
            DrivingPoint::Open => prop_assert!(z.norm() > 1e9),
        }
    }

    #[test]
    fn reciprocal_and_passive(net in lossy_two_port(), f in 1e8f64..5e9) {
        let s = s_parameters(&net, f).unwrap();
        prop_assert!((s.s12 - s.s21).norm() < 1e-9);
        prop_assert!(s.passivity_margin() >= -1e-9);
        prop_assert!(s.s11.norm() <= 1.0 + 1e-9 && s.s21.norm() <= 1.0 + 1e-9);
    }
}
