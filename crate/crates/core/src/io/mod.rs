//! Netlist text format, trace writers and configuration files.

pub mod config;
pub mod netlist;
pub mod tables;
pub mod units;

pub use config::{load_config, Config, SweepConfig};
pub use netlist::{parse_document, parse_netlist, parse_netlist_bytes, parse_value, serialize_netlist, Diagnostic, NetlistDocument};
pub use tables::{write_frequency_csv, write_grid_csv, write_is_csv, write_sparams_csv, write_trace_csv, SIGNIFICANT_DIGITS};
