//! Domain types shared by the analytic, linear, harmonic-balance and
//! transient engines.

pub mod design;
pub mod netlist;
pub mod varactor;

pub use design::{
    component_series_resistance, AnalyticLosses, DesignPoint, ImpedanceSet, ReactiveKind, TransformerSpec,
};
pub use netlist::{ElementKind, Netlist, NetlistElement, NodeId, Port, SourceSpec, GROUND};
pub use varactor::{capacitance_at_bias, BiasedVaractor, VaractorModel};
