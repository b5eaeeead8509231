//! Scenario runner: synthesis, certification and simulation of one plant,
//! with CSV trajectories, field snapshots and a JSON report.

mod json;
mod report;
mod runner;
mod scenario;

pub use json::to_json_17;
pub use report::{OrderEntry, OrderReport, Report, SdpaReport, SimulationReport, SpectrumReport};
pub use runner::{reverify_report, run_scenario, Overrides, RunOutcome};
pub use scenario::{load_scenario, OrderChoice, Scenario};

/// Exit codes of the `specstab` binary.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    /// Plant or argument error (including an unreachable decay rate).
    pub const MODEL: i32 = 1;
    /// No verified certificate within the order limit.
    pub const INFEASIBLE: i32 = 2;
    pub const CONFIG: i32 = 3;
    pub const IO: i32 = 4;
    pub const SPECTRUM: i32 = 5;
    pub const SYNTHESIS: i32 = 6;
    pub const CERTIFICATE: i32 = 7;
    pub const SIMULATION: i32 = 8;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] specstab::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use specstab::Error as E;
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Io(_) => exit::IO,
            CliError::Core(e) => match e {
                E::Io(_) => exit::IO,
                E::NonPositiveDiffusion { .. }
                | E::CoefficientBounds(_)
                | E::ResolutionTooCoarse { .. }
                | E::BoundViolation { .. }
                | E::GridMismatch { .. } => exit::SPECTRUM,
                E::UncontrollablePair(_) | E::UnobservablePair(_) | E::PoleTooSlow { .. } | E::OrderTooSmall { .. } => {
                    exit::SYNTHESIS
                }
                E::DimensionMismatch(_)
                | E::NotHurwitzShifted { .. }
                | E::Singular(_)
                | E::NoFeasibleN { .. }
                | E::CertificateRequired
                | E::SdpaFormat(_) => exit::CERTIFICATE,
                E::OrderMismatch(_)
                | E::IncompatibleInitialCondition(_)
                | E::StepRejected(_)
                | E::NonPositiveSeries => exit::SIMULATION,
                _ => exit::MODEL,
            },
        }
    }
}
