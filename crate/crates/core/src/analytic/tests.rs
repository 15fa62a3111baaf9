use super::*;
use crate::io::units::{ratio_to_db, w_to_dbm};
use crate::model::{capacitance_at_bias, VaractorModel};
use proptest::prelude::*;

fn device(c_v: f64, q_v: f64, delta: f64) -> BiasedVaractor {
    let mut dv = capacitance_at_bias(&VaractorModel::default(), 1.1).unwrap();
    dv.c_v = c_v;
    dv.delta = delta;
    dv.model.q_v = q_v;
    dv
}

fn anchor() -> (BiasedVaractor, DesignPoint) {
    (
        device(2.0e-12, 15.0, 0.4),
        DesignPoint::new(50.0, 2.1e9, f64::INFINITY).unwrap(),
    )
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn geq_examples() {
    let (z2, z3) = (c(3.0, -1.0), c(0.5, 7.0));
    assert_eq!(geq(c(0.0, 0.0), z2, z3), z2 * z3);
    assert_eq!(geq(c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)), c(11.0, 0.0));
    // j10·(5 − j10) − j50 = 100 + j0
    assert_eq!(geq(c(0.0, 10.0), c(0.0, -10.0), c(5.0, 0.0)), c(100.0, 0.0));
}

#[test]
fn resonant_threshold_example() {
    let (dv, dp) = anchor();
    let p = pth_resonant(
        &AnalyticLosses {
            r_s: 2.526,
            r_d: 2.526,
            r_p: 41.0,
        },
        &dv,
        &dp,
    );
    assert!((p - 3.25e-4).abs() < 0.01e-4, "{p}");
    let doubled = pth_resonant(
        &AnalyticLosses {
            r_s: 2.526,
            r_d: 2.526,
            r_p: 82.0,
        },
        &dv,
        &dp,
    );
    assert!((doubled / p - 4.0).abs() < 1e-12);
}

#[test]
fn transformed_resistance() {
    assert!((rp_from_ztx(2.526, 31.0, 50.0) - 40.966).abs() < 1e-9);
    assert_eq!(rp_from_ztx(1.7, 0.0, 50.0), 1.7);
    assert_eq!(rp_from_ztx(0.0, 50.0, 50.0), 100.0);
}

#[test]
fn mesh_losses() {
    let (dv, dp) = anchor();
    let l = rs_rd(&dv, &dp, 31.0);
    assert!((l.r_s - 2.526).abs() < 5e-4, "{}", l.r_s);
    assert_eq!(l.r_s, l.r_d);
    assert!(l.r_p >= l.r_s);
    let equal_q = DesignPoint::new(50.0, 2.1e9, 15.0).unwrap();
    assert!((rs_rd(&dv, &equal_q, 31.0).r_s / rs_approx(&dv, &equal_q) - 2.0).abs() < 1e-12);
    let big = device(4.0e-12, 15.0, 0.4);
    assert!((rs_rd(&big, &dp, 31.0).r_s * 2.0 - l.r_s).abs() < 1e-12);
}

#[test]
fn threshold_anchor() {
    let (dv, dp) = anchor();
    let p = pth_approx(&dv, &dp, 31.0);
    assert!((p - 3.246e-4).abs() < 0.001e-4, "{p}");
    assert!((w_to_dbm(p) + 4.886).abs() < 0.005);
    let small = device(0.5e-12, 15.0, 0.4);
    let p2 = pth_approx(&small, &dp, 50.0);
    assert!((p2 - 1.466e-4).abs() < 0.002e-4, "{p2}");
    assert!((w_to_dbm(p2) + 8.34).abs() < 0.01);
    let steep = device(2.0e-12, 15.0, 0.8);
    assert!((pth_approx(&steep, &dp, 31.0) * 4.0 / p - 1.0).abs() < 1e-12);
}

#[test]
fn full_threshold_reduces_to_resonant_form() {
    let (dv, dp) = anchor();
    let l = rs_rd_approx(&dv, &dp, 31.0);
    let x = 123.0;
    let huge = c(0.0, 1e13);
    let imps = ImpedanceSet {
        z1_in: c(l.r_p - 1.0, -x),
        z2_in: huge,
        z3_in: c(1.0, x),
        z1_d: huge,
        z2_d: c(l.r_d - 0.4, 40.0),
        z3_d: c(0.4, -40.0),
        z_in: c(380.0, 0.0),
    };
    let full = pth_full(&imps, &dv, &dp).unwrap();
    let reduced = pth_resonant(&l, &dv, &dp);
    assert!((full.p_th / reduced - 1.0).abs() < 1e-6);
    assert!((full.v_th.powi(2) / (8.0 * 50.0) - full.p_th).abs() < 1e-15);
    let steep = BiasedVaractor { delta: 0.8, ..dv };
    let quarter = pth_full(&imps, &steep, &dp).unwrap();
    assert!((quarter.p_th * 4.0 / full.p_th - 1.0).abs() < 1e-12);
    let bad = ImpedanceSet { z2_in: c(0.0, 0.0), ..imps };
    assert!(matches!(pth_full(&bad, &dv, &dp), Err(Error::SingularImpedance(_))));
}

#[test]
fn input_impedance_at_resonance() {
    let (dv, dp) = anchor();
    let l = rs_rd(&dv, &dp, 31.0);
    let z = zin_resonant(&l, 31.0).finite().unwrap();
    assert!((z.re - 380.4).abs() < 0.1, "{z}");
    let lossless = AnalyticLosses {
        r_s: 0.0,
        r_d: 0.0,
        r_p: 38.44,
    };
    assert_eq!(zin_resonant(&lossless, 31.0), DrivingPoint::Open);
    let fixed = AnalyticLosses {
        r_s: 31.0,
        r_d: 31.0,
        r_p: 69.44,
    };
    assert_eq!(zin_resonant(&fixed, 31.0).finite().unwrap().re, 31.0);
}

#[test]
fn insertion_loss_anchor() {
    let (dv, dp) = anchor();
    let closed = il_closed_form(&dv, &dp, 31.0);
    assert!((closed.db - 0.553).abs() < 0.001, "{}", closed.db);
    let z = zin_resonant(&rs_rd(&dv, &dp, 31.0), 31.0);
    let composed = il_ss(z, 50.0).unwrap();
    assert!((composed.db - closed.db).abs() < 1e-9);
    assert_eq!(il_from_rs(0.0, 31.0, 50.0).db, 0.0);
    assert!((ratio_to_db(composed.ratio) - composed.db).abs() < 1e-12);
    assert!(il_ss(DrivingPoint::Finite(c(-25.0, 0.0)), 50.0).is_err());
}

#[test]
fn max_power_anchor() {
    let (dv, dp) = anchor();
    let p = pmax_approx(&dv, &dp, 31.0);
    assert!((p - 2.463e-2).abs() < 0.002e-2, "{p}");
    assert!((w_to_dbm(p) - 13.91).abs() < 0.01);
    let unbiased = BiasedVaractor { v_dc: 0.0, ..dv };
    let p0 = pmax_approx(&unbiased, &dp, 31.0);
    assert!((p0 - 3.73e-3).abs() < 0.01e-3, "{p0}");
    assert!((w_to_dbm(p0) - 5.72).abs() < 0.01);
    let mut doubled = dv;
    doubled.v_dc = 2.0 * 1.8 - dv.model.v_bi;
    assert!((pmax_approx(&doubled, &dp, 31.0) / p - 4.0).abs() < 1e-12);
}

#[test]
fn metrics_bundle() {
    let (dv, dp) = anchor();
    let m = performance_metrics(&dv, &dp, 31.0);
    assert!(m.p_th > 0.0 && m.il_ss >= 1.0 && m.p_max > m.p_th);
}

fn anchor_spec(metric: Metric, x: AxisRange, y: AxisRange) -> ContourSpec {
    let (dv, dp) = anchor();
    ContourSpec {
        metric,
        x,
        y,
        varactor: dv,
        design: dp,
        z_tx: 31.0,
        coupling: BiasCoupling::FromModel,
    }
}

#[test]
fn single_cell_grid_matches_direct_call() {
    let x = AxisRange { axis: Axis::Cv, start: 2e-12, stop: 2e-12, steps: 1 };
    let y = AxisRange { axis: Axis::Ztx, start: 31.0, stop: 31.0, steps: 1 };
    let g = contour_grid(&anchor_spec(Metric::PTh, x, y)).unwrap();
    let (dv, dp) = anchor();
    assert_eq!(g.cells.len(), 1);
    assert_eq!(g.cells[0].value, pth_approx(&dv, &dp, 31.0));
}

#[test]
fn threshold_grid_contains_anchor_and_is_monotone() {
    let x = AxisRange { axis: Axis::Cv, start: 0.05e-12, stop: 5e-12, steps: 100 };
    let y = AxisRange { axis: Axis::Ztx, start: 5.0, stop: 100.0, steps: 96 };
    let g = contour_grid(&anchor_spec(Metric::PTh, x, y)).unwrap();
    assert_eq!(g.nan_count, 0);
    let cell = g.cells.iter().find(|c| (c.x - 2e-12).abs() < 1e-18 && (c.y - 31.0).abs() < 1e-9).unwrap();
    assert!((w_to_dbm(cell.value) + 4.886).abs() < 0.005);
    for j in 0..g.ny {
        for i in 1..g.nx {
            assert!(g.at(i, j).value > g.at(i - 1, j).value);
        }
    }
    for i in 0..g.nx {
        for j in 1..g.ny {
            assert!(g.at(i, j).value > g.at(i, j - 1).value);
        }
    }
}

#[test]
fn bias_axis_coupling() {
    let x = AxisRange { axis: Axis::Ztx, start: 10.0, stop: 60.0, steps: 6 };
    let y = AxisRange { axis: Axis::Vdc, start: 0.0, stop: 14.0, steps: 8 };
    let mut spec = anchor_spec(Metric::PTh, x, y);
    let coupled = contour_grid(&spec).unwrap();
    spec.coupling = BiasCoupling::Fixed;
    let fixed = contour_grid(&spec).unwrap();
    // a fixed capacitance makes the threshold independent of bias
    assert_eq!(fixed.at(2, 0).value, fixed.at(2, 7).value);
    assert_ne!(coupled.at(2, 0).value, coupled.at(2, 7).value);
    // out-of-range bias becomes NaN, never aborts
    spec.y.stop = 20.0;
    spec.coupling = BiasCoupling::FromModel;
    assert!(contour_grid(&spec).unwrap().nan_count > 0);
    spec.x.axis = Axis::Vdc;
    assert!(contour_grid(&spec).is_err());
}

fn draw() -> impl Strategy<Value = (f64, f64, f64, f64, f64)> {
    (0.05e-12f64..5e-12, 2.0f64..100.0, 0.05f64..1.9, 1.0f64..150.0, 0.3e9f64..10e9)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn simplified_threshold_is_composition((c_v, q_v, delta, z_tx, f) in draw()) {
        let dv = device(c_v, q_v, delta);
        let dp = DesignPoint::new(50.0, f, f64::INFINITY).unwrap();
        let direct = pth_approx(&dv, &dp, z_tx);
        let composed = pth_resonant(&rs_rd_approx(&dv, &dp, z_tx), &dv, &dp);
        prop_assert!((direct / composed - 1.0).abs() < 1e-12);
    }

    #[test]
    fn insertion_loss_is_composition((c_v, q_v, delta, z_tx, f) in draw()) {
        let dv = device(c_v, q_v, delta);
        let dp = DesignPoint::new(50.0, f, f64::INFINITY).unwrap();
        let direct = il_closed_form(&dv, &dp, z_tx).ratio;
        let losses = rs_rd_approx(&dv, &dp, z_tx);
        let via_zin = il_ss(zin_resonant(&losses, z_tx), 50.0).unwrap().ratio;
        let via_rs = il_from_rs(losses.r_s, z_tx, 50.0).ratio;
        prop_assert!((direct / via_zin - 1.0).abs() < 1e-12);
        prop_assert!((direct / via_rs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_forms_are_monotone((c_v, q_v, delta, z_tx, f) in draw(), k in 1.01f64..2.0) {
        let dv = device(c_v, q_v, delta);
        let dp = DesignPoint::new(50.0, f, f64::INFINITY).unwrap();
        let p = pth_approx(&dv, &dp, z_tx);
        prop_assert!(pth_approx(&device(c_v * k, q_v, delta), &dp, z_tx) > p);
        prop_assert!(pth_approx(&dv, &dp, z_tx * k) > p);
        prop_assert!(pth_approx(&device(c_v, q_v, delta / k), &dp, z_tx) > p);
        let il = il_closed_form(&dv, &dp, z_tx).ratio;
        prop_assert!(il_closed_form(&device(c_v * k, q_v, delta), &dp, z_tx).ratio < il);
        prop_assert!(il_closed_form(&device(c_v, q_v * k, delta), &dp, z_tx).ratio < il);
        prop_assert!(il_closed_form(&dv, &dp, z_tx * k).ratio < il);
        let mut hot = dv;
        hot.v_dc += 0.3 * k;
        prop_assert!(pmax_approx(&hot, &dp, z_tx) > pmax_approx(&dv, &dp, z_tx));
    }
}
