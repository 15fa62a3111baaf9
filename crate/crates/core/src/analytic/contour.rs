use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{il_closed_form, pmax_approx, pth_approx};
use crate::error::{Error, Result};
use crate::model::{capacitance_at_bias, BiasedVaractor, DesignPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    /// Threshold power, W.
    PTh,
    /// Small-signal insertion loss, power ratio.
    IlSs,
    /// Maximum power before forward conduction, W.
    PMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    /// Varactor capacitance at bias, F.
    Cv,
    /// Transformer impedance, ohm.
    Ztx,
    /// Reverse bias, V.
    Vdc,
    /// Drive frequency, Hz.
    Fin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub axis: Axis,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl AxisRange {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        (0..self.steps)
            .map(|i| self.start + (self.stop - self.start) * i as f64 / (self.steps - 1) as f64)
            .collect()
    }

    fn check(&self) -> Result<()> {
        let lower_ok = match self.axis {
            Axis::Vdc => self.start >= 0.0,
            _ => self.start > 0.0,
        };
        let ordered = self.start < self.stop || (self.steps == 1 && self.start == self.stop);
        if !(lower_ok && ordered && self.stop.is_finite() && self.steps >= 1) {
            return Err(Error::Config(format!(
                "invalid {:?} axis {}..{} x {}",
                self.axis, self.start, self.stop, self.steps
            )));
        }
        Ok(())
    }
}

/// How a bias axis acts on the varactor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BiasCoupling {
    /// Capacitance and slope follow the C–V law at each bias.
    #[default]
    FromModel,
    /// Only the conduction headroom moves; capacitance stays fixed.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub metric: Metric,
    pub x: AxisRange,
    pub y: AxisRange,
    pub varactor: BiasedVaractor,
    pub design: DesignPoint,
    pub z_tx: f64,
    #[serde(default)]
    pub coupling: BiasCoupling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub metric: Metric,
    pub x_axis: Axis,
    pub y_axis: Axis,
    pub nx: usize,
    pub ny: usize,
    /// Row-major in x: cell `(i, j)` is at `j * nx + i`.
    pub cells: Vec<GridCell>,
    pub nan_count: usize,
}

impl Grid {
    pub fn at(&self, i: usize, j: usize) -> &GridCell {
        &self.cells[j * self.nx + i]
    }

    /// Cell whose coordinates are closest in normalized distance.
    pub fn nearest(&self, x: f64, y: f64) -> Option<&GridCell> {
        let (sx, sy) = (
            self.cells.iter().map(|c| c.x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE),
            self.cells.iter().map(|c| c.y.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE),
        );
        self.cells.iter().min_by(|a, b| {
            let da = ((a.x - x) / sx).powi(2) + ((a.y - y) / sy).powi(2);
            let db = ((b.x - x) / sx).powi(2) + ((b.y - y) / sy).powi(2);
            da.total_cmp(&db)
        })
    }
}

fn evaluate(spec: &ContourSpec, coords: [(Axis, f64); 2]) -> Result<f64> {
    let mut dv = spec.varactor;
    let mut dp = spec.design;
    let mut z_tx = spec.z_tx;
    // bias first so an explicit capacitance axis overrides the C–V law
    for (axis, v) in coords {
        if axis == Axis::Vdc {
            dv = match spec.coupling {
                BiasCoupling::FromModel => capacitance_at_bias(&dv.model, v)?,
                BiasCoupling::Fixed => BiasedVaractor { v_dc: v, ..dv },
            };
        }
    }
    for (axis, v) in coords {
        match axis {
            Axis::Cv => dv.c_v = v,
            Axis::Ztx => z_tx = v,
            Axis::Fin => dp = DesignPoint::new(dp.z0, v, dp.q_l)?,
            Axis::Vdc => {}
        }
    }
    Ok(match spec.metric {
        Metric::PTh => pth_approx(&dv, &dp, z_tx),
        Metric::IlSs => il_closed_form(&dv, &dp, z_tx).ratio,
        Metric::PMax => pmax_approx(&dv, &dp, z_tx),
    })
}

/// Evaluates the chosen closed-form metric over a dense two-axis grid.
/// Cells whose parameters fall outside the model range become NaN.
pub fn contour_grid(spec: &ContourSpec) -> Result<Grid> {
    spec.x.check()?;
    spec.y.check()?;
    if spec.x.axis == spec.y.axis {
        return Err(Error::Config(format!("both axes are {:?}", spec.x.axis)));
    }
    let xs = spec.x.values();
    let ys = spec.y.values();
    let cells: Vec<GridCell> = ys
        .par_iter()
        .flat_map_iter(|&y| {
            xs.iter().map(move |&x| {
                let value = evaluate(spec, [(spec.x.axis, x), (spec.y.axis, y)])
                    .ok()
                    .filter(|v| v.is_finite())
                    .unwrap_or(f64::NAN);
                GridCell { x, y, value }
            })
        })
        .collect();
    let nan_count = cells.iter().filter(|c| c.value.is_nan()).count();
    if nan_count > 0 {
        log::warn!("{nan_count} grid cells could not be evaluated");
    }
    Ok(Grid {
        metric: spec.metric,
        x_axis: spec.x.axis,
        y_axis: spec.y.axis,
        nx: xs.len(),
        ny: ys.len(),
        cells,
        nan_count,
    })
}
