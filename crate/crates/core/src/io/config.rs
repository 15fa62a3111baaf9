//! JSON run configuration. Every field is optional; missing ones take defaults.
//!
//! ```json
//! {
//!   "hb": { "k_harmonics": 9, "rel_tol": 1e-10 },
//!   "varactor": { "q_v": 20.0 },
//!   "sweep": { "p_start_dbm": -30, "p_stop_dbm": 20, "step_db": 0.5 },
//!   "oracle": { "periods": 3000 }
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hb::{HbOptions, PsubFloor};
use crate::model::VaractorModel;
use crate::transient::OracleOptions;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub p_start_dbm: f64,
    pub p_stop_dbm: f64,
    pub step_db: f64,
    pub psub_floor: PsubFloor,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            p_start_dbm: -20.0,
            p_stop_dbm: 28.0,
            step_db: 0.5,
            psub_floor: PsubFloor::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub hb: HbOptions,
    pub sweep: SweepConfig,
    pub varactor: VaractorModel,
    pub oracle: OracleOptions,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }
}

pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Config::from_json(&text)
}
