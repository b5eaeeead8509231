//! Closed-loop simulation of the truncated plant with the modal observer.
//!
//! State `(u, w_1..w_{N_sim}, ŵ_1..ŵ_N)`. The loop is linear and
//! time-invariant, so it is advanced exactly by powers of `exp(A dt)`.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::certificate::Certificate;
use crate::homogenize::{Measurement, MeasurementKind, ReducedPlant};
use crate::linalg::expm;
use crate::sturm_liouville::{grid_derivative, Profile, Spectrum};
use crate::synthesis::GainSet;
use crate::{Error, Result};

pub const DEFAULT_SIM_MODES: usize = 50;
pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_HORIZON: f64 = 3.0;
const COMPATIBILITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n_sim: usize,
    pub dt: f64,
    pub t_end: f64,
    pub z0: Profile,
    pub u0: f64,
}

impl SimConfig {
    pub fn new(z0: Profile, u0: f64) -> Self {
        Self {
            n_sim: DEFAULT_SIM_MODES,
            dt: DEFAULT_DT,
            t_end: DEFAULT_HORIZON,
            z0,
            u0,
        }
    }
}

/// Closed-loop generator over `(u, w_1..w_{N_sim}, ŵ_1..ŵ_N)`.
pub fn assemble_sim(reduced: &ReducedPlant, gains: &GainSet, n: usize, n_sim: usize) -> Result<DMatrix<f64>> {
    let n0 = reduced.n0;
    if n < n0 + 1 || n_sim < n {
        return Err(Error::OrderMismatch(format!(
            "need N0 + 1 <= N <= N_sim, got N0 = {n0}, N = {n}, N_sim = {n_sim}"
        )));
    }
    if reduced.spectrum.n_modes() < n_sim {
        return Err(Error::OrderMismatch(format!(
            "spectrum has {} modes, simulation needs {n_sim}",
            reduced.spectrum.n_modes()
        )));
    }
    if gains.k.len() != n0 + 1 || gains.l.len() != n0 {
        return Err(Error::OrderMismatch(format!("gains sized for N0 = {}, plant has N0 = {n0}", gains.l.len())));
    }
    let dim = 1 + n_sim + n;
    let w = |i: usize| 1 + i;
    let wh = |i: usize| 1 + n_sim + i;
    // v as a row over the state
    let mut v = DVector::<f64>::zeros(dim);
    v[0] = gains.k[0];
    for i in 0..n0 {
        v[wh(i)] = gains.k[i + 1];
    }
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    a.row_mut(0).copy_from(&v.transpose());
    for i in 0..n_sim {
        let mut row = &v * reduced.b_coef[i];
        row[0] += reduced.a_coef[i];
        row[w(i)] += reduced.open_loop_rate(i + 1);
        a.row_mut(w(i)).copy_from(&row.transpose());
    }
    for i in 0..n {
        let mut row = &v * reduced.b_coef[i];
        row[0] += reduced.a_coef[i];
        row[wh(i)] += reduced.open_loop_rate(i + 1);
        if i < n0 {
            let l = gains.l[i];
            for j in 0..n_sim {
                row[w(j)] += l * reduced.out_coef[j];
            }
            for j in 0..n {
                row[wh(j)] -= l * reduced.out_coef[j];
            }
        }
        a.row_mut(wh(i)).copy_from(&row.transpose());
    }
    Ok(a)
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub n: usize,
    pub n0: usize,
    pub n_sim: usize,
    pub kind: MeasurementKind,
    pub delta: f64,
    pub lambdas: Vec<f64>,
    pub times: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// `w[k][i]` is mode `i + 1` at `times[k]`.
    pub w: Vec<Vec<f64>>,
    pub w_hat: Vec<Vec<f64>>,
    /// `Σ_{N < i <= N_sim} c_i w_i`.
    pub zeta: Vec<f64>,
    /// `(Σ w_i²)^{1/2}`
    pub w_l2: Vec<f64>,
    /// `Σ λ_i w_i²`
    pub energy: Vec<f64>,
    /// `(u² + Σ ŵ_i² + Σ w_i² + Σ λ_i w_i²)^{1/2}`
    pub eta: Vec<f64>,
}

fn check_compatibility(config: &SimConfig, kind: MeasurementKind, spectrum: &Spectrum) -> Result<()> {
    let z0 = config.z0.sample(spectrum.grid_size);
    let mismatch_1 = (z0[spectrum.grid_size] - config.u0).abs();
    if mismatch_1 > COMPATIBILITY_TOLERANCE {
        return Err(Error::IncompatibleInitialCondition(format!("z0(1) - u0 = {mismatch_1:e}")));
    }
    match kind {
        MeasurementKind::Neumann => {
            if z0[0].abs() > COMPATIBILITY_TOLERANCE {
                return Err(Error::IncompatibleInitialCondition(format!("z0(0) = {:e}", z0[0])));
            }
        }
        _ => {
            let slope = match config.z0.derivative() {
                Some(d) => d.eval(0.0),
                None => grid_derivative(&z0, spectrum.h())[0],
            };
            if slope.abs() > COMPATIBILITY_TOLERANCE {
                return Err(Error::IncompatibleInitialCondition(format!("z0'(0) = {slope:e}")));
            }
        }
    }
    Ok(())
}

/// Simulates `a_cl` (from [`assemble_sim`] with `config.n_sim` plant modes)
/// from `w(0) = z0 - g u0` projected on the spectrum and `ŵ(0) = 0`.
pub fn run(a_cl: &DMatrix<f64>, config: &SimConfig, reduced: &ReducedPlant, gains: &GainSet) -> Result<SimResult> {
    let spectrum = &reduced.spectrum;
    let n_sim = config.n_sim;
    let dim = a_cl.nrows();
    if a_cl.ncols() != dim || dim < 2 + n_sim {
        return Err(Error::OrderMismatch(format!(
            "generator is {}x{}, too small for {n_sim} plant modes",
            dim,
            a_cl.ncols()
        )));
    }
    let n = dim - 1 - n_sim;
    if n < reduced.n0 + 1 || n > n_sim || spectrum.n_modes() < n_sim || gains.k.len() != reduced.n0 + 1 {
        return Err(Error::OrderMismatch(format!("generator implies N = {n} with N_sim = {n_sim}")));
    }
    if !(config.dt > 0.0 && config.t_end >= 0.0 && config.dt.is_finite() && config.t_end.is_finite()) {
        return Err(Error::InvalidArgument("time step and horizon must be positive and finite".into()));
    }
    let kind = reduced.kind();
    check_compatibility(config, kind, spectrum)?;

    let xs = spectrum.grid();
    let z0 = config.z0.sample(spectrum.grid_size);
    let w0: Vec<f64> = xs.iter().zip(&z0).map(|(&x, z)| z - kind.lifting(x) * config.u0).collect();
    let mut x = DVector::<f64>::zeros(dim);
    x[0] = config.u0;
    for i in 0..n_sim {
        x[1 + i] = spectrum.inner(&w0, &spectrum.eigenfunctions[i])?;
    }

    let step = expm(&(a_cl * config.dt))?;
    let growth = step.amax();
    if !growth.is_finite() || growth > 1e100 {
        return Err(Error::StepRejected(growth));
    }
    let steps = (config.t_end / config.dt).round() as usize;
    let lambdas: Vec<f64> = spectrum.lambdas[..n_sim].to_vec();
    let mut out = SimResult {
        n,
        n0: reduced.n0,
        n_sim,
        kind,
        delta: reduced.delta(),
        lambdas,
        times: Vec::with_capacity(steps + 1),
        u: Vec::with_capacity(steps + 1),
        v: Vec::with_capacity(steps + 1),
        w: Vec::with_capacity(steps + 1),
        w_hat: Vec::with_capacity(steps + 1),
        zeta: Vec::with_capacity(steps + 1),
        w_l2: Vec::with_capacity(steps + 1),
        energy: Vec::with_capacity(steps + 1),
        eta: Vec::with_capacity(steps + 1),
    };
    for k in 0..=steps {
        if k > 0 {
            x = &step * x;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::StepRejected(growth));
            }
        }
        out.record(k as f64 * config.dt, &x, reduced, gains);
    }
    Ok(out)
}

impl SimResult {
    fn record(&mut self, t: f64, x: &DVector<f64>, reduced: &ReducedPlant, gains: &GainSet) {
        let (n, n0, n_sim) = (self.n, self.n0, self.n_sim);
        let u = x[0];
        let w: Vec<f64> = x.rows(1, n_sim).iter().copied().collect();
        let w_hat: Vec<f64> = x.rows(1 + n_sim, n).iter().copied().collect();
        let v = gains.k[0] * u + (0..n0).map(|i| gains.k[i + 1] * w_hat[i]).sum::<f64>();
        let zeta = (n..n_sim).map(|i| reduced.out_coef[i] * w[i]).sum();
        let l2: f64 = w.iter().map(|v| v * v).sum();
        let energy: f64 = w.iter().zip(&self.lambdas).map(|(v, l)| l * v * v).sum();
        let hat2: f64 = w_hat.iter().map(|v| v * v).sum();
        self.times.push(t);
        self.u.push(u);
        self.v.push(v);
        self.zeta.push(zeta);
        self.w_l2.push(l2.sqrt());
        self.energy.push(energy);
        self.eta.push((u * u + hat2 + l2 + energy).sqrt());
        self.w.push(w);
        self.w_hat.push(w_hat);
    }

    fn synthesize(&self, spectrum: &Spectrum, coef: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; spectrum.grid_size + 1];
        for (c, phi) in coef.iter().zip(&spectrum.eigenfunctions) {
            for (fi, p) in f.iter_mut().zip(phi) {
                *fi += c * p;
            }
        }
        f
    }

    /// Homogenized field `w(t_k, ·)` on the spectrum grid.
    pub fn field_w(&self, spectrum: &Spectrum, k: usize) -> Vec<f64> {
        self.synthesize(spectrum, &self.w[k])
    }

    /// Plant field `z(t_k, ·) = w + g u`.
    pub fn field_z(&self, spectrum: &Spectrum, k: usize) -> Vec<f64> {
        let u = self.u[k];
        let kind = self.kind;
        self.field_w(spectrum, k)
            .into_iter()
            .zip(spectrum.grid())
            .map(|(w, x)| w + kind.lifting(x) * u)
            .collect()
    }

    /// Estimation error `e(t_k, ·) = w - Σ_{n<=N} ŵ_n φ_n`.
    pub fn field_error(&self, spectrum: &Spectrum, k: usize) -> Vec<f64> {
        let est = self.synthesize(spectrum, &self.w_hat[k]);
        self.field_w(spectrum, k).into_iter().zip(est).map(|(w, e)| w - e).collect()
    }

    /// Output `Σ c_i w_i` of the homogenized plant.
    pub fn homogenized_output(&self, reduced: &ReducedPlant, k: usize) -> f64 {
        self.w[k].iter().zip(&reduced.out_coef).map(|(w, c)| w * c).sum()
    }

    /// Raw measurement of the reconstructed plant field.
    pub fn measured_output(&self, reduced: &ReducedPlant, k: usize) -> Result<f64> {
        let spectrum = &reduced.spectrum;
        let z = self.field_z(spectrum, k);
        match &reduced.plant.measurement {
            Measurement::Bounded(c) => spectrum.inner(&c.sample(spectrum.grid_size), &z),
            Measurement::DirichletAt0 => Ok(z[0]),
            Measurement::NeumannAt0 => {
                // one-sided derivative of the modal sum and the lifting
                let u = self.u[k];
                let slope: f64 = self.w[k].iter().zip(&spectrum.dtrace0).map(|(w, d)| w * d).sum();
                Ok(slope + u)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovTrace {
    pub values: Vec<f64>,
    /// `max_k (V(t_{k+1}) e^{2δ t_{k+1}} - V(t_k) e^{2δ t_k})`
    pub max_increment: f64,
}

/// Evaluates `V = XᵀPX + γ Σ_{N < n <= N_sim} λ_n w_n²` along a trajectory with
/// `X = col(u, ŵ_1..ŵ_N0, e_1..e_N0, ŵ_{N0+1}..ŵ_N, s_n e_n)`.
/// The simulated plant has exactly `N_sim` modes, so the sum has no remainder.
pub fn lyapunov_trace(result: &SimResult, certificate: &Certificate) -> Result<LyapunovTrace> {
    if !certificate.feasible {
        return Err(Error::CertificateRequired);
    }
    let (n, n0) = (result.n, result.n0);
    if certificate.n != n || certificate.n0 != n0 || certificate.kind != result.kind {
        return Err(Error::OrderMismatch(format!(
            "certificate is for N = {}, N0 = {}, simulation has N = {n}, N0 = {n0}",
            certificate.n, certificate.n0
        )));
    }
    let p = certificate.p_matrix();
    let values: Vec<f64> = (0..result.times.len())
        .map(|k| {
            let w = &result.w[k];
            let wh = &result.w_hat[k];
            let mut x = DVector::<f64>::zeros(2 * n + 1);
            x[0] = result.u[k];
            for i in 0..n0 {
                x[1 + i] = wh[i];
                x[1 + n0 + i] = w[i] - wh[i];
            }
            for i in n0..n {
                x[1 + n0 + i] = wh[i];
                x[1 + n + i] = result.kind.error_scaling(result.lambdas[i]) * (w[i] - wh[i]);
            }
            let tail: f64 = (n..result.n_sim).map(|i| result.lambdas[i] * w[i] * w[i]).sum();
            x.dot(&(&p * &x)) + certificate.gamma * tail
        })
        .collect();
    let weighted: Vec<f64> = values
        .iter()
        .zip(&result.times)
        .map(|(v, t)| v * (2.0 * result.delta * t).exp())
        .collect();
    let max_increment = weighted
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(LyapunovTrace { values, max_increment })
}

/// Negated least-squares slope of `ln η` over samples with `t_a <= t <= t_b`.
pub fn fit_decay(times: &[f64], eta: &[f64], t_a: f64, t_b: f64) -> Result<f64> {
    if times.len() != eta.len() {
        return Err(Error::InvalidArgument("times and values differ in length".into()));
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(eta)
        .filter(|(t, _)| **t >= t_a && **t <= t_b)
        .map(|(&t, &e)| (t, e))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InvalidArgument(format!("fewer than two samples in [{t_a}, {t_b}]")));
    }
    if pts.iter().any(|&(_, e)| !(e > 0.0)) {
        return Err(Error::NonPositiveSeries);
    }
    let m = pts.len() as f64;
    let t_mean = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let y_mean = pts.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, e) in &pts {
        sxy += (t - t_mean) * (e.ln() - y_mean);
        sxx += (t - t_mean) * (t - t_mean);
    }
    Ok(-sxy / sxx)
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a `t,value` series.
pub fn write_series_csv(path: &Path, times: &[f64], values: &[f64]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "t,value")?;
    for (t, v) in times.iter().zip(values) {
        writeln!(f, "{},{}", fmt17(*t), fmt17(*v))?;
    }
    f.flush()?;
    Ok(())
}

/// Writes field snapshots in `x,t,value` long format.
pub fn write_field_csv(path: &Path, xs: &[f64], snapshots: &[(f64, Vec<f64>)]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "x,t,value")?;
    for (t, values) in snapshots {
        for (x, v) in xs.iter().zip(values) {
            writeln!(f, "{},{},{}", fmt17(*x), fmt17(*t), fmt17(*v))?;
        }
    }
    f.flush()?;
    Ok(())
}
