//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A physical parameter lies outside the range where its model is valid.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent netlist or solver configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("singular impedance: {0}")]
    SingularImpedance(String),

    /// The nodal matrix could not be factored; `node` is the netlist id of the
    /// row on which elimination broke down (0 when it is an internal node).
    #[error("degenerate topology at node {node}: {detail}")]
    DegenerateTopology { node: usize, detail: String },

    #[error("infeasible synthesis: {reason} (residuals at f_in {res_in:.3e} ohm, at f_d {res_d:.3e} ohm)")]
    InfeasibleSynthesis {
        reason: String,
        res_in: f64,
        res_d: f64,
    },

    #[error("harmonic balance did not converge after {iterations} iterations (final residual {residual:.3e} A)")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("transient step failed to converge at t = {time:.6e} s")]
    TransientStep { time: f64 },

    #[error("no bifurcation found: p_sub never exceeds the floor")]
    NoBifurcation,

    #[error("frequency grids differ between the cascaded networks")]
    GridMismatch,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerical engines (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularImpedance(_)
                | Error::DegenerateTopology { .. }
                | Error::InfeasibleSynthesis { .. }
                | Error::NoConvergence { .. }
                | Error::TransientStep { .. }
                | Error::NoBifurcation
                | Error::Domain(_)
        )
    }
}
