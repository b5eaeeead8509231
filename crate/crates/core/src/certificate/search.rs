use nalgebra::{DMatrix, DVector};

use super::{lyapunov_solve, verify_certificate, Certificate, CertificateRoute, ScalarConditions};
use crate::homogenize::{MeasurementKind, ReducedPlant, DEFAULT_EPS};
use crate::linalg::{max_abs, max_sym_eig, min_sym_eig, norm2, LyapunovSolver};
use crate::synthesis::{assemble_closed_loop, ClosedLoopMatrices, GainSet};
use crate::{Error, Exec, Result};

pub const DEFAULT_ALPHAS: [f64; 3] = [1.1, 2.0, 10.0];

#[derive(Debug, Clone, PartialEq)]
pub struct SearchPolicy {
    /// Log-spaced `γ` samples of the Lyapunov-route scan.
    pub gamma_points: usize,
    /// Golden-section steps refining the best `γ` cell.
    pub refine_steps: usize,
    /// Fall back to the Riccati route when the Lyapunov route fails.
    pub riccati: bool,
    /// Fractions of the admissible `β/γ` ratio given up by the Riccati route, tried in order.
    pub riccati_slack: Vec<f64>,
    pub riccati_max_iter: usize,
}

impl Default for SearchPolicy {
    fn default() -> Self {
        Self {
            gamma_points: 121,
            refine_steps: 60,
            riccati: true,
            riccati_slack: vec![0.5, 0.2, 0.05, 0.01],
            riccati_max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateQuery {
    pub n: usize,
    pub alpha: f64,
    /// Used by the Neumann measurement only.
    pub eps: f64,
    pub policy: SearchPolicy,
}

impl CertificateQuery {
    pub fn new(n: usize, alpha: f64) -> Self {
        Self {
            n,
            alpha,
            eps: DEFAULT_EPS,
            policy: SearchPolicy::default(),
        }
    }
}

/// `γ` seeds from the asymptotic scalings that make the conditions hold for large `N`.
fn gamma_seed(kind: MeasurementKind, n: usize) -> f64 {
    let n = n as f64;
    match kind {
        MeasurementKind::Bounded => n.powf(-0.5),
        MeasurementKind::Dirichlet => 1.0 / n,
        MeasurementKind::Neumann => n.powf(-3.0 / 16.0),
    }
}

/// Lyapunov-route data: with `P` fixed, `Θ₁ ⪯ 0` reduces to
/// `β >= (P𝓛)ᵀ (I - αγG)⁻¹ (P𝓛)` whenever `αγG ≺ I`.
struct FixedP<'a> {
    p: DMatrix<f64>,
    pl: DVector<f64>,
    g: &'a DMatrix<f64>,
    alpha: f64,
    gamma_max: f64,
}

impl FixedP<'_> {
    fn beta_min(&self, gamma: f64) -> Option<f64> {
        let n = self.g.nrows();
        let m = DMatrix::<f64>::identity(n, n) - self.g * (self.alpha * gamma);
        let chol = m.cholesky()?;
        Some(self.pl.dot(&chol.solve(&self.pl)))
    }

    /// `log(κγ / β_min(γ))`, positive where the scalar and matrix conditions overlap.
    fn log_ratio(&self, kappa: f64, log_gamma: f64) -> f64 {
        let gamma = log_gamma.exp();
        match self.beta_min(gamma) {
            Some(b) if b > 0.0 => (kappa * gamma / b).ln(),
            Some(_) => f64::INFINITY,
            None => f64::NEG_INFINITY,
        }
    }
}

/// Searches `(β, γ)` with `P` from the shifted Lyapunov equation, then, if
/// that fails and the policy allows, a Riccati-based `P`. Any certificate
/// returned with `feasible = true` has passed [`verify_certificate`].
pub fn search_certificate(
    model: &ClosedLoopMatrices,
    reduced: &ReducedPlant,
    query: &CertificateQuery,
) -> Result<Certificate> {
    if query.n != model.n {
        return Err(Error::DimensionMismatch(format!(
            "query is for N = {}, model has N = {}",
            query.n, model.n
        )));
    }
    let delta = reduced.delta();
    let p = lyapunov_solve(&model.f, delta)?;
    let cond = ScalarConditions::new(model, reduced, query.alpha, query.eps)?;
    let kappa = cond.beta_gamma_ratio();
    let lyap = lyapunov_route(model, reduced, &cond, p, kappa, query)?;
    if lyap.feasible || !query.policy.riccati || !(kappa > 0.0) {
        return Ok(lyap);
    }
    for &slack in &query.policy.riccati_slack {
        if let Some(cert) = riccati_route(model, reduced, &cond, kappa * (1.0 - slack), query)? {
            if cert.feasible {
                return Ok(cert);
            }
        }
    }
    Ok(lyap)
}

fn lyapunov_route(
    model: &ClosedLoopMatrices,
    reduced: &ReducedPlant,
    cond: &ScalarConditions,
    p: DMatrix<f64>,
    kappa: f64,
    query: &CertificateQuery,
) -> Result<Certificate> {
    let g_max = max_sym_eig(&model.g);
    let gamma_max = if g_max > 0.0 { 1.0 / (query.alpha * g_max) } else { 1e6 };
    let fixed = FixedP {
        pl: &p * &model.lcal,
        p,
        g: &model.g,
        alpha: query.alpha,
        gamma_max,
    };
    let hi = (fixed.gamma_max * (1.0 - 1e-9)).ln();
    let lo = hi - 12.0 * std::f64::consts::LN_10;
    let points = query.policy.gamma_points.max(2);
    let mut samples: Vec<f64> = (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect();
    let seed = gamma_seed(cond.kind, model.n).ln();
    if seed > lo && seed < hi {
        samples.push(seed);
        samples.sort_by(f64::total_cmp);
    }
    let objective = |lg: f64| fixed.log_ratio(kappa.max(f64::MIN_POSITIVE), lg);
    let values: Vec<f64> = samples.iter().map(|&lg| objective(lg)).collect();
    let best = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut a = samples[best.saturating_sub(1)];
    let mut b = samples[(best + 1).min(samples.len() - 1)];
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    for _ in 0..query.policy.refine_steps {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d);
        }
    }
    let (log_gamma, value) = [(samples[best], values[best]), (c, fc), (d, fd)]
        .into_iter()
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .unwrap_or((samples[best], values[best]));
    let gamma = log_gamma.exp();
    let beta_lo = fixed.beta_min(gamma).unwrap_or(f64::MAX).max(f64::MIN_POSITIVE);
    let beta = if kappa > 0.0 && value > 0.0 {
        if kappa.is_finite() {
            (beta_lo * kappa * gamma).sqrt()
        } else {
            2.0 * beta_lo
        }
    } else {
        // keep Θ₁ satisfied and report the scalar violation
        beta_lo * (1.0 + 1e-6)
    };
    let mut cert = verify_certificate(model, reduced, &fixed.p, query.alpha, beta, gamma, query.eps)?;
    cert.route = CertificateRoute::Lyapunov;
    Ok(cert)
}

/// With `γ = 1` and `β = κ_s`, `Θ₁ ⪯ 0` is the Riccati inequality
/// `F_δᵀP + PF_δ + P𝓛𝓛ᵀP/κ_s + αG ⪯ 0`. Its minimal solution with an added
/// `ηI` is the limit of `X_{k+1} = Lyap(F_δ, αG + ηI + X_k R X_k)` from
/// `X_0 = 0`, which increases monotonically and diverges when the
/// bounded-real condition fails.
fn riccati_route(
    model: &ClosedLoopMatrices,
    reduced: &ReducedPlant,
    cond: &ScalarConditions,
    beta: f64,
    query: &CertificateQuery,
) -> Result<Option<Certificate>> {
    let n = model.dim();
    let fd = &model.f + DMatrix::<f64>::identity(n, n) * cond.delta;
    let solver = LyapunovSolver::new(&fd)?;
    let ag = &model.g * query.alpha;
    let eta = 1e-4 * max_abs(&ag).max(1.0);
    let q = &ag + DMatrix::<f64>::identity(n, n) * eta;
    let r = &model.lcal * model.lcal.transpose() / beta;
    let mut x = solver.solve(&(-&q))?;
    let first = max_abs(&x);
    let mut converged = false;
    for _ in 0..query.policy.riccati_max_iter {
        let next = solver.solve(&(-(&q + &x * &r * &x)))?;
        let change = max_abs(&(&next - &x));
        x = next;
        let size = max_abs(&x);
        if !size.is_finite() || size > 1e12 * first {
            return Ok(None);
        }
        if change <= 1e-13 * size {
            converged = true;
            break;
        }
    }
    if !converged {
        return Ok(None);
    }
    // Θ₁ is homogeneous in (P, β, γ); fix the smallest eigenvalue of P at 1
    let scale = min_sym_eig(&x);
    if !(scale > 0.0) {
        return Ok(None);
    }
    let p = &x / scale;
    let mut cert = verify_certificate(model, reduced, &p, query.alpha, beta / scale, 1.0 / scale, query.eps)?;
    cert.route = CertificateRoute::Riccati;
    Ok(Some(cert))
}

/// Best certificate found for one observer order.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderOutcome {
    pub n: usize,
    pub certificate: Certificate,
}

/// Runs the certificate search for every `N` in `N0+1..=n_max` and every
/// `α`, keeping for each `N` the first feasible certificate in `α` order or
/// else the one with the smallest worst violation.
pub fn order_sweep(
    reduced: &ReducedPlant,
    gains: &GainSet,
    n_max: usize,
    alphas: &[f64],
    eps: f64,
    policy: &SearchPolicy,
    exec: Exec,
) -> Result<Vec<OrderOutcome>> {
    let n_min = reduced.n0 + 1;
    if n_max < n_min {
        return Err(Error::OrderTooSmall { n: n_max, min: n_min });
    }
    if alphas.is_empty() {
        return Err(Error::InvalidArgument("alpha grid is empty".into()));
    }
    let models = (n_min..=n_max)
        .map(|n| assemble_closed_loop(reduced, gains, n))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, f64)> = (0..models.len())
        .flat_map(|i| alphas.iter().map(move |&a| (i, a)))
        .collect();
    let results = exec.map(&jobs, |&(i, alpha)| {
        let query = CertificateQuery {
            n: models[i].n,
            alpha,
            eps,
            policy: policy.clone(),
        };
        search_certificate(&models[i], reduced, &query)
    });
    let mut results = results.into_iter();
    let mut out = Vec::with_capacity(models.len());
    for model in &models {
        let mut chosen: Option<Certificate> = None;
        for _ in alphas {
            let cert = results.next().expect("one result per job")?;
            chosen = match chosen {
                Some(c) if c.feasible => Some(c),
                Some(c) if !cert.feasible && c.worst_violation() <= cert.worst_violation() => Some(c),
                _ => Some(cert),
            };
        }
        out.push(OrderOutcome {
            n: model.n,
            certificate: chosen.expect("alpha grid is non-empty"),
        });
    }
    Ok(out)
}

/// Smallest `N <= n_max` with a verified certificate.
pub fn minimal_n(
    reduced: &ReducedPlant,
    gains: &GainSet,
    n_max: usize,
    alphas: &[f64],
    eps: f64,
    exec: Exec,
) -> Result<(usize, Certificate)> {
    let sweep = order_sweep(reduced, gains, n_max, alphas, eps, &SearchPolicy::default(), exec)?;
    sweep
        .into_iter()
        .find(|o| o.certificate.feasible)
        .map(|o| (o.n, o.certificate))
        .ok_or(Error::NoFeasibleN { n_max })
}

/// `‖P^N‖` for `P^N` solving the shifted Lyapunov equation of each order.
pub fn lyapunov_norm_sweep(reduced: &ReducedPlant, gains: &GainSet, orders: &[usize], exec: Exec) -> Result<Vec<f64>> {
    let delta = reduced.delta();
    exec.map(orders, |&n| {
        let model = assemble_closed_loop(reduced, gains, n)?;
        Ok(norm2(&lyapunov_solve(&model.f, delta)?))
    })
    .into_iter()
    .collect()
}
