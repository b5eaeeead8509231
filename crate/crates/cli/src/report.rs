//! Serialized run report.

use serde::{Deserialize, Serialize};
use specstab::certificate::{Certificate, CertificateRoute};
use specstab::homogenize::{MeasurementKind, TailConstant};
use specstab::synthesis::GainSet;

/// One row of the order sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderEntry {
    pub n: usize,
    pub feasible: bool,
    pub alpha: f64,
    pub route: CertificateRoute,
    pub worst_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    /// `"auto"` or `"fixed"`.
    pub mode: String,
    pub n_max: usize,
    pub alphas: Vec<f64>,
    /// Selected order; `None` when nothing was certified.
    pub selected: Option<usize>,
    pub sweep: Vec<OrderEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub modes: usize,
    pub grid_size: usize,
    pub analytic: bool,
    /// Leading eigenvalues up to `N + 1` (or `n_max + 1`).
    pub leading_eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub n_sim: usize,
    pub dt: f64,
    pub t_end: f64,
    pub steps: usize,
    pub fit_window: [f64; 2],
    /// Slope of `-ln η` over the fit window.
    pub decay_rate: f64,
    pub eta_initial: f64,
    pub eta_final: f64,
    /// Largest increment of `e^{2δt} V(t)`; `None` without a certificate.
    pub lyapunov_max_increment: Option<f64>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpaReport {
    pub path: String,
    pub n: usize,
    pub alpha: f64,
    pub n_vars: usize,
    pub block_sizes: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub measurement: MeasurementKind,
    pub delta: f64,
    pub q_c: f64,
    pub eps: f64,
    pub spectrum: SpectrumReport,
    pub n0: usize,
    pub tail_constant: TailConstant,
    pub gains: GainSet,
    pub order: OrderReport,
    pub certificate: Option<Certificate>,
    pub simulation: Option<SimulationReport>,
    pub sdpa: Option<SdpaReport>,
    pub feasible: bool,
}
