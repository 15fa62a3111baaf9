use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SParameters {
    pub frequency: f64,
    pub s11: Complex64,
    pub s21: Complex64,
    pub s12: Complex64,
    pub s22: Complex64,
    /// Reference impedances of port 1 and port 2.
    pub z0: [f64; 2],
}

fn db(x: Complex64) -> f64 {
    20.0 * x.norm().log10()
}

impl SParameters {
    pub fn thru(frequency: f64, z0: f64) -> Self {
        let one = Complex64::new(1.0, 0.0);
        Self {
            frequency,
            s11: Complex64::default(),
            s21: one,
            s12: one,
            s22: Complex64::default(),
            z0: [z0, z0],
        }
    }

    pub fn s21_db(&self) -> f64 {
        db(self.s21)
    }

    pub fn s11_db(&self) -> f64 {
        db(self.s11)
    }

    /// Same network seen with its ports swapped.
    pub fn flipped(&self) -> Self {
        Self {
            frequency: self.frequency,
            s11: self.s22,
            s21: self.s12,
            s12: self.s21,
            s22: self.s11,
            z0: [self.z0[1], self.z0[0]],
        }
    }

    /// Smallest eigenvalue of `I - S^H S`; negative values indicate gain.
    pub fn passivity_margin(&self) -> f64 {
        let (a, b, c, d) = (self.s11, self.s12, self.s21, self.s22);
        // Hermitian 2x2: [[p, q], [q*, r]]
        let p = 1.0 - (a.norm_sqr() + c.norm_sqr());
        let r = 1.0 - (b.norm_sqr() + d.norm_sqr());
        let q = -(a.conj() * b + c.conj() * d);
        let mean = 0.5 * (p + r);
        let half_gap = (0.25 * (p - r) * (p - r) + q.norm_sqr()).sqrt();
        mean - half_gap
    }

    fn to_t(self) -> Result<[Complex64; 4]> {
        if self.s21.norm() == 0.0 {
            return Err(Error::Domain(format!(
                "S21 vanishes at {} Hz, transfer parameters undefined",
                self.frequency
            )));
        }
        let det = self.s11 * self.s22 - self.s12 * self.s21;
        Ok([-det / self.s21, self.s11 / self.s21, -self.s22 / self.s21, 1.0 / self.s21])
    }

    fn from_t(frequency: f64, z0: [f64; 2], t: [Complex64; 4]) -> Self {
        let [t11, t12, t21, t22] = t;
        let det = t11 * t22 - t12 * t21;
        Self {
            frequency,
            s11: t12 / t22,
            s21: 1.0 / t22,
            s12: det / t22,
            s22: -t21 / t22,
            z0,
        }
    }
}

/// Chains two two-ports point by point (output of `a` into input of `b`).
pub fn cascade(a: &[SParameters], b: &[SParameters]) -> Result<Vec<SParameters>> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch);
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let f = x.frequency;
            if (f - y.frequency).abs() > 1e-9 * f.abs() {
                return Err(Error::GridMismatch);
            }
            if (x.z0[1] - y.z0[0]).abs() > 1e-9 * x.z0[1] {
                return Err(Error::Config(format!(
                    "reference impedances differ at the junction: {} vs {}",
                    x.z0[1], y.z0[0]
                )));
            }
            let [a11, a12, a21, a22] = x.to_t()?;
            let [b11, b12, b21, b22] = y.to_t()?;
            let t = [
                a11 * b11 + a12 * b21,
                a11 * b12 + a12 * b22,
                a21 * b11 + a22 * b21,
                a21 * b12 + a22 * b22,
            ];
            Ok(SParameters::from_t(f, [x.z0[0], y.z0[1]], t))
        })
        .collect()
}

/// Half-power band around the transmission maximum of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    pub f_peak: f64,
    pub s21_peak_db: f64,
    pub f_low: f64,
    pub f_high: f64,
}

impl Bandwidth {
    /// Band width divided by the arithmetic band center.
    pub fn fractional(&self) -> f64 {
        2.0 * (self.f_high - self.f_low) / (self.f_high + self.f_low)
    }

    pub fn contains(&self, f: f64) -> bool {
        (self.f_low..=self.f_high).contains(&f)
    }
}

/// Locates the 3 dB edges by linear interpolation in dB; `None` when either
/// edge lies outside the sweep.
pub fn three_db_band(sweep: &[SParameters]) -> Option<Bandwidth> {
    let mags: Vec<f64> = sweep.iter().map(|s| s.s21_db()).collect();
    let (peak, &top) = mags
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    let level = top - 3.0;
    let edge = |i: usize, j: usize| {
        let (fi, fj) = (sweep[i].frequency, sweep[j].frequency);
        fi + (fj - fi) * (level - mags[i]) / (mags[j] - mags[i])
    };
    let low = (1..=peak).rev().find(|&i| mags[i - 1] < level).map(|i| edge(i, i - 1))?;
    let high = (peak..mags.len() - 1).find(|&i| mags[i + 1] < level).map(|i| edge(i, i + 1))?;
    Some(Bandwidth {
        f_peak: sweep[peak].frequency,
        s21_peak_db: top,
        f_low: low,
        f_high: high,
    })
}
