//! Logarithmic unit conversions.

/// Watts to dBm.
pub fn w_to_dbm(p: f64) -> f64 {
    10.0 * (p / 1e-3).log10()
}

/// dBm to watts.
pub fn dbm_to_w(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// Power ratio to dB.
pub fn ratio_to_db(r: f64) -> f64 {
    10.0 * r.log10()
}

pub fn db_to_ratio(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
