//! Stability certificates for the observer-based closed loop.
//!
//! A certificate is `(P, α, β, γ, ε)` with `P ≻ 0`, `α > 1`, `β, γ > 0` and
//!
//! ```text
//! Θ₁ = [FᵀP + PF + 2δP + αγG   P𝓛]  ⪯ 0,   Θ₂ ≤ 0,   (Neumann) Θ₃ ≥ 0,
//!      [𝓛ᵀP                    -β ]
//! ```
//!
//! where `Θ₂ = 2γ(-(1 - 1/α)λ_{N+1} + q_c + δ) + β·τ` and `τ` depends on the
//! measurement: `‖c‖²/λ_{N+1}`, the Dirichlet trace constant, or the Neumann
//! trace constant times `λ_{N+1}^{1/2+ε}`. The Neumann case also needs
//! `Θ₃ = 2γ(1 - 1/α) - β M/λ_{N+1}^{1/2-ε} ≥ 0`.

mod sdpa;
mod search;

pub use sdpa::{build_sdpa, certificate_point, export_sdpa, SdpaEntry, SdpaProblem, SDPA_MARGIN};
pub use search::{
    lyapunov_norm_sweep, minimal_n, order_sweep, search_certificate, CertificateQuery, OrderOutcome, SearchPolicy,
    DEFAULT_ALPHAS,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::homogenize::{MeasurementKind, ReducedPlant};
use crate::linalg::{max_abs, max_sym_eig, min_sym_eig, spectral_abscissa, LyapunovSolver};
use crate::synthesis::ClosedLoopMatrices;
use crate::{Error, Result};

const LYAPUNOV_RESIDUAL: f64 = 1e-9;
const SIGN_TOLERANCE: f64 = 1e-9;

/// Solves `FᵀP + PF + 2δP = -I`.
pub fn lyapunov_solve(f: &DMatrix<f64>, delta: f64) -> Result<DMatrix<f64>> {
    let n = f.nrows();
    let shifted = f + DMatrix::<f64>::identity(n, n) * delta;
    let abscissa = spectral_abscissa(&shifted);
    if !(abscissa < 0.0) {
        return Err(Error::NotHurwitzShifted { abscissa });
    }
    let minus_i = -DMatrix::<f64>::identity(n, n);
    let p = LyapunovSolver::new(&shifted)?.solve(&minus_i)?;
    let residual = max_abs(&(shifted.transpose() * &p + &p * &shifted - &minus_i));
    if residual > LYAPUNOV_RESIDUAL {
        return Err(Error::Singular(format!("Lyapunov residual {residual:e} exceeds {LYAPUNOV_RESIDUAL:e}")));
    }
    Ok(p)
}

/// The scalar tail conditions for a fixed `α` (and `ε`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarConditions {
    pub kind: MeasurementKind,
    pub alpha: f64,
    pub eps: Option<f64>,
    pub q_c: f64,
    pub delta: f64,
    pub lambda_next: f64,
    pub tail_constant: f64,
}

impl ScalarConditions {
    pub fn new(model: &ClosedLoopMatrices, reduced: &ReducedPlant, alpha: f64, eps: f64) -> Result<Self> {
        if !(alpha > 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must exceed 1, got {alpha}")));
        }
        if reduced.spectrum.n_modes() < model.n + 1 {
            return Err(Error::InsufficientModes {
                available: reduced.spectrum.n_modes(),
                required: model.n + 1,
            });
        }
        let tail = reduced.tail_for_eps(eps)?;
        Ok(Self {
            kind: model.kind,
            alpha,
            eps: tail.eps,
            q_c: reduced.q_c(),
            delta: reduced.delta(),
            lambda_next: reduced.spectrum.lambdas[model.n],
            tail_constant: tail.value,
        })
    }

    fn shrink(&self) -> f64 {
        1.0 - 1.0 / self.alpha
    }

    /// `-(1 - 1/α)λ + q_c + δ`
    pub fn rate_at(&self, lambda: f64) -> f64 {
        -self.shrink() * lambda + self.q_c + self.delta
    }

    /// Coefficient of `β` in the per-mode tail rate at eigenvalue `λ`.
    pub fn tail_weight_at(&self, lambda: f64) -> f64 {
        match self.kind {
            MeasurementKind::Bounded => self.tail_constant / lambda,
            MeasurementKind::Dirichlet => self.tail_constant,
            MeasurementKind::Neumann => self.tail_constant * lambda.powf(0.5 + self.eps.unwrap_or(0.0)),
        }
    }

    /// Per-mode tail rate `Γ_n`; `Θ₂` is its value at `λ_{N+1}`.
    pub fn gamma_at(&self, lambda: f64, beta: f64, gamma: f64) -> f64 {
        2.0 * gamma * self.rate_at(lambda) + beta * self.tail_weight_at(lambda)
    }

    pub fn theta2(&self, beta: f64, gamma: f64) -> f64 {
        self.gamma_at(self.lambda_next, beta, gamma)
    }

    pub fn theta3(&self, beta: f64, gamma: f64) -> Option<f64> {
        (self.kind == MeasurementKind::Neumann).then(|| {
            let eps = self.eps.unwrap_or(0.0);
            2.0 * gamma * self.shrink() - beta * self.tail_constant / self.lambda_next.powf(0.5 - eps)
        })
    }

    /// Largest `κ` such that `β <= κγ` satisfies every scalar condition;
    /// non-positive when no `(β, γ)` can.
    pub fn beta_gamma_ratio(&self) -> f64 {
        let rate = self.rate_at(self.lambda_next);
        if rate >= 0.0 {
            return 0.0;
        }
        let mut kappa = -2.0 * rate / self.tail_weight_at(self.lambda_next);
        if self.kind == MeasurementKind::Neumann {
            let eps = self.eps.unwrap_or(0.0);
            kappa = kappa.min(2.0 * self.shrink() * self.lambda_next.powf(0.5 - eps) / self.tail_constant);
        }
        kappa
    }

    fn tolerance(&self, beta: f64, gamma: f64) -> f64 {
        let terms = [
            2.0 * gamma * self.rate_at(self.lambda_next),
            beta * self.tail_weight_at(self.lambda_next),
            2.0 * gamma * self.shrink(),
        ];
        SIGN_TOLERANCE * terms.iter().fold(1.0_f64, |acc, t| acc.max(t.abs()))
    }
}

/// `Θ₁` as a `(2N+2) × (2N+2)` symmetric matrix.
pub fn theta1(model: &ClosedLoopMatrices, p: &DMatrix<f64>, delta: f64, alpha: f64, beta: f64, gamma: f64) -> DMatrix<f64> {
    let n = model.dim();
    let mut t = DMatrix::<f64>::zeros(n + 1, n + 1);
    let top = model.f.transpose() * p + p * &model.f + p * (2.0 * delta) + &model.g * (alpha * gamma);
    t.view_mut((0, 0), (n, n)).copy_from(&top);
    let pl = p * &model.lcal;
    t.view_mut((0, n), (n, 1)).copy_from(&pl);
    t.view_mut((n, 0), (1, n)).copy_from(&pl.transpose());
    t[(n, n)] = -beta;
    crate::linalg::symmetrize(&t)
}

/// Schur complement of `Θ₁` with respect to its `-β` corner.
pub fn theta1_schur(model: &ClosedLoopMatrices, p: &DMatrix<f64>, delta: f64, alpha: f64, beta: f64, gamma: f64) -> DMatrix<f64> {
    let pl: DVector<f64> = p * &model.lcal;
    let m = model.f.transpose() * p + p * &model.f + p * (2.0 * delta) + &model.g * (alpha * gamma)
        + &pl * pl.transpose() / beta;
    crate::linalg::symmetrize(&m)
}

/// How the certificate's `P` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateRoute {
    /// `P` solves `FᵀP + PF + 2δP = -I`.
    Lyapunov,
    /// `P` solves the bounded-real Riccati equation of `Θ₁`.
    Riccati,
    /// `P` was supplied by the caller.
    Supplied,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub n: usize,
    pub n0: usize,
    pub kind: MeasurementKind,
    pub route: CertificateRoute,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub eps: Option<f64>,
    /// Row-major `P`.
    pub p: Vec<Vec<f64>>,
    pub p_min_eig: f64,
    pub theta1_max_eig: f64,
    pub theta2: f64,
    /// `None` when the measurement has no third condition.
    pub theta3: Option<f64>,
    pub feasible: bool,
}

impl Certificate {
    pub fn p_matrix(&self) -> DMatrix<f64> {
        let n = self.p.len();
        DMatrix::from_fn(n, n, |i, j| self.p[i][j])
    }

    /// Re-runs verification from the stored data.
    pub fn reverify(&self, model: &ClosedLoopMatrices, reduced: &ReducedPlant) -> Result<Certificate> {
        let eps = self.eps.unwrap_or(crate::homogenize::DEFAULT_EPS);
        let mut c = verify_certificate(model, reduced, &self.p_matrix(), self.alpha, self.beta, self.gamma, eps)?;
        c.route = self.route;
        Ok(c)
    }

    /// Largest violation over the sign conditions; `<= 0` means every
    /// condition holds strictly.
    pub fn worst_violation(&self) -> f64 {
        let mut w = self.theta1_max_eig.max(self.theta2).max(-self.p_min_eig);
        if let Some(t3) = self.theta3 {
            w = w.max(-t3);
        }
        w
    }
}

/// Checks every sign condition of a candidate certificate. `eps` is used
/// only for the Neumann measurement.
pub fn verify_certificate(
    model: &ClosedLoopMatrices,
    reduced: &ReducedPlant,
    p: &DMatrix<f64>,
    alpha: f64,
    beta: f64,
    gamma: f64,
    eps: f64,
) -> Result<Certificate> {
    let n = model.dim();
    if p.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "P is {}x{}, closed loop has dimension {n}",
            p.nrows(),
            p.ncols()
        )));
    }
    let p_scale = max_abs(p).max(f64::MIN_POSITIVE);
    if max_abs(&(p - p.transpose())) > 1e-12 * p_scale {
        return Err(Error::DimensionMismatch("P is not symmetric".into()));
    }
    if !(beta > 0.0 && gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("beta and gamma must be positive, got {beta}, {gamma}")));
    }
    let cond = ScalarConditions::new(model, reduced, alpha, eps)?;
    let t1 = theta1(model, p, cond.delta, alpha, beta, gamma);
    let t1_max = max_sym_eig(&t1);
    let p_min = min_sym_eig(p);
    let theta2 = cond.theta2(beta, gamma);
    let theta3 = cond.theta3(beta, gamma);
    let tol = cond.tolerance(beta, gamma);
    let feasible = p_min > 0.0
        && t1_max <= SIGN_TOLERANCE * max_abs(&t1).max(1.0)
        && theta2 <= tol
        && theta3.is_none_or(|t| t >= -tol);
    Ok(Certificate {
        n: model.n,
        n0: model.n0,
        kind: model.kind,
        route: CertificateRoute::Supplied,
        alpha,
        beta,
        gamma,
        eps: cond.eps,
        p: (0..n).map(|i| (0..n).map(|j| p[(i, j)]).collect()).collect(),
        p_min_eig: p_min,
        theta1_max_eig: t1_max,
        theta2,
        theta3,
        feasible,
    })
}
