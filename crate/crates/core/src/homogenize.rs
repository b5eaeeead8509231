//! Boundary lifting and modal reduction.
//!
//! The boundary input is moved into the domain by `w = z - g(x) u` with
//! `g(x) = x²` (Neumann-Dirichlet domain, which preserves `w(t, 0) = z(t, 0)`)
//! or `g(x) = x` (Dirichlet-Dirichlet domain). The projected dynamics are
//!
//! ```text
//! u' = v
//! w_n' = (-λ_n + q_c) w_n + a_n u + b_n v
//! ```
//!
//! with `a_n = ⟨a, φ_n⟩`, `b_n = ⟨b, φ_n⟩`.

use std::f64::consts::PI;

use crate::sturm_liouville::{BoundarySpec, CoefficientPair, Profile, Smoothness, Spectrum, SpectrumOrigin};
use crate::{Error, Result};

/// Default `ε` for the Neumann tail constant.
pub const DEFAULT_EPS: f64 = 0.125;

/// Explicitly summed terms of the tail constants for closed-form spectra.
pub const DEFAULT_ANALYTIC_TAIL_TERMS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub enum Measurement {
    /// `y = ∫ c(x) z(t, x) dx`
    Bounded(Profile),
    /// `y = z(t, 0)`
    DirichletAt0,
    /// `y = z_x(t, 0)`
    NeumannAt0,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MeasurementKind {
    Bounded,
    Dirichlet,
    Neumann,
}

impl Measurement {
    pub fn kind(&self) -> MeasurementKind {
        match self {
            Measurement::Bounded(_) => MeasurementKind::Bounded,
            Measurement::DirichletAt0 => MeasurementKind::Dirichlet,
            Measurement::NeumannAt0 => MeasurementKind::Neumann,
        }
    }
}

impl MeasurementKind {
    pub fn boundary(self) -> BoundarySpec {
        match self {
            MeasurementKind::Bounded | MeasurementKind::Dirichlet => BoundarySpec::NeumannDirichlet,
            MeasurementKind::Neumann => BoundarySpec::DirichletDirichlet,
        }
    }

    /// Lifting profile `g` in `w = z - g(x) u`.
    pub fn lifting(self, x: f64) -> f64 {
        match self {
            MeasurementKind::Neumann => x,
            _ => x * x,
        }
    }

    /// Factor applied to the tail observation errors so that the output
    /// coupling stays bounded in `N`: `√λ_n` for a Dirichlet trace, `λ_n`
    /// for a Neumann trace, none for a bounded functional.
    pub fn error_scaling(self, lambda: f64) -> f64 {
        match self {
            MeasurementKind::Bounded => 1.0,
            MeasurementKind::Dirichlet => lambda.sqrt(),
            MeasurementKind::Neumann => lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantSpec {
    pub coeffs: CoefficientPair,
    pub q_c: f64,
    pub measurement: Measurement,
    pub delta: f64,
}

impl PlantSpec {
    pub fn new(coeffs: CoefficientPair, q_c: f64, measurement: Measurement, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidArgument(format!("decay rate must be positive, got {delta}")));
        }
        if !q_c.is_finite() {
            return Err(Error::InvalidArgument("q_c must be finite".into()));
        }
        if measurement.kind() != MeasurementKind::Bounded && coeffs.smoothness != Smoothness::C2 {
            return Err(Error::InsufficientSmoothness);
        }
        if let Measurement::Bounded(c) = &measurement {
            if c.sample(1000).iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("measurement kernel must be finite".into()));
            }
        }
        Ok(Self {
            coeffs,
            q_c,
            measurement,
            delta,
        })
    }

    pub fn kind(&self) -> MeasurementKind {
        self.measurement.kind()
    }

    pub fn boundary(&self) -> BoundarySpec {
        self.kind().boundary()
    }
}

/// Lifting sources `a` and `b` of the homogenized equation
/// `w_t = (p w_x)_x + (q_c - q) w + a u + b u'`, sampled on the spectrum grid.
pub fn lifting_functions(plant: &PlantSpec, spectrum: &Spectrum) -> Result<(Vec<f64>, Vec<f64>)> {
    check_domain(plant, spectrum)?;
    let p_prime = plant.coeffs.p_prime.as_ref().ok_or(Error::MissingDerivative)?;
    let p = &plant.coeffs.p;
    let q = &plant.coeffs.q;
    let q_c = plant.q_c;
    let kind = plant.kind();
    let xs = spectrum.grid();
    let a = xs
        .iter()
        .map(|&x| match kind {
            MeasurementKind::Neumann => p_prime.eval(x) + (q_c - q.eval(x)) * x,
            _ => 2.0 * p.eval(x) + 2.0 * x * p_prime.eval(x) + (q_c - q.eval(x)) * x * x,
        })
        .collect();
    let b = xs.iter().map(|&x| -kind.lifting(x)).collect();
    Ok((a, b))
}

fn check_domain(plant: &PlantSpec, spectrum: &Spectrum) -> Result<()> {
    if spectrum.boundary != plant.boundary() {
        return Err(Error::InvalidArgument(format!(
            "{:?} measurement needs a {:?} spectrum, got {:?}",
            plant.kind(),
            plant.boundary(),
            spectrum.boundary
        )));
    }
    Ok(())
}

/// Smallest `N0 >= 1` such that `-λ_n + q_c < -δ` for every `n >= N0 + 1`.
pub fn select_n0(spectrum: &Spectrum, q_c: f64, delta: f64) -> Result<usize> {
    let first_stable = spectrum
        .lambdas
        .iter()
        .position(|&lam| -lam + q_c < -delta)
        .ok_or(Error::DecayUnreachable { delta })?;
    Ok(first_stable.max(1))
}

/// Upper bound on the constant controlling the unmeasured output tail:
/// `‖c‖²` (bounded), `Σ_{n≥2} φ_n(0)²/λ_n` (Dirichlet trace) or
/// `Σ_{n≥2} φ_n'(0)²/λ_n^{3/2+ε}` (Neumann trace).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TailConstant {
    pub value: f64,
    /// `ε` of the Neumann constant.
    pub eps: Option<f64>,
    /// Last mode index summed explicitly.
    pub explicit_terms: usize,
    /// Bound on the remainder past `explicit_terms`, included in `value`.
    pub remainder_bound: f64,
}

/// Computes the tail constant for the plant's measurement.
///
/// Closed-form spectra are summed up to `tail_terms` (at least the stored
/// modes) and the remainder is bounded by an integral, which is an upper
/// bound because the summand is convex and decreasing. Finite-difference
/// spectra are summed over `min(tail_terms, n_modes)` modes; the remainder
/// uses `λ_n >= π²(n-1)² p_star` and the largest normalized trace observed
/// among the computed modes.
pub fn tail_constants(plant: &PlantSpec, spectrum: &Spectrum, eps: f64, tail_terms: usize) -> Result<TailConstant> {
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::EpsOutOfRange(eps));
    }
    check_domain(plant, spectrum)?;
    let kind = plant.kind();
    if let Measurement::Bounded(c) = &plant.measurement {
        let cs = c.sample(spectrum.grid_size);
        return Ok(TailConstant {
            value: spectrum.inner(&cs, &cs)?,
            eps: None,
            explicit_terms: 0,
            remainder_bound: 0.0,
        });
    }
    let boundary = spectrum.boundary;
    let term = |lam: f64, trace: f64| match kind {
        MeasurementKind::Neumann => trace * trace / lam.powf(1.5 + eps),
        _ => trace * trace / lam,
    };
    let trace_of = |k: usize| match kind {
        MeasurementKind::Neumann => spectrum.dtrace0[k],
        _ => spectrum.trace0[k],
    };
    let (explicit, sum, remainder) = match spectrum.origin {
        SpectrumOrigin::Analytic => {
            let m = tail_terms.max(spectrum.n_modes()).max(1);
            let sum: f64 = (2..=m)
                .map(|n| {
                    let trace = match kind {
                        MeasurementKind::Neumann => boundary.unit_dtrace0(n),
                        _ => boundary.unit_trace0(n),
                    };
                    term(boundary.unit_lambda(n), trace)
                })
                .sum();
            let mf = m as f64;
            let remainder = match kind {
                // ∫_{M+1/2}^∞ 2 / (π² (x - 1/2)²) dx
                MeasurementKind::Dirichlet => 2.0 / (PI * PI * mf),
                // ∫_{M+1/2}^∞ 2 (π x)^{-1-2ε} dx
                _ => 2.0 * PI.powf(-1.0 - 2.0 * eps) * (mf + 0.5).powf(-2.0 * eps) / (2.0 * eps),
            };
            (m, sum, remainder)
        }
        SpectrumOrigin::FiniteDifference => {
            let m = tail_terms.min(spectrum.n_modes()).max(1);
            let sum: f64 = (2..=m).map(|n| term(spectrum.lambdas[n - 1], trace_of(n - 1))).sum();
            let p_star = plant.coeffs.p_star;
            let mf = m as f64;
            let remainder = match kind {
                MeasurementKind::Dirichlet => {
                    let t = (0..spectrum.n_modes()).map(|k| trace_of(k).powi(2)).fold(0.0, f64::max);
                    t / (PI * PI * p_star * (mf - 0.5))
                }
                _ => {
                    let r = (0..spectrum.n_modes())
                        .map(|k| trace_of(k).powi(2) / spectrum.lambdas[k])
                        .fold(0.0, f64::max);
                    r * (PI * p_star.sqrt()).powf(-1.0 - 2.0 * eps) * (mf - 0.5).powf(-2.0 * eps) / (2.0 * eps)
                }
            };
            (m, sum, remainder)
        }
    };
    Ok(TailConstant {
        value: sum + remainder,
        eps: (kind == MeasurementKind::Neumann).then_some(eps),
        explicit_terms: explicit,
        remainder_bound: remainder,
    })
}

/// Modal data of the homogenized plant. Coefficients are stored for every
/// mode of the spectrum, 0-based (`a_coef[n - 1] = a_n`).
#[derive(Debug, Clone)]
pub struct ReducedPlant {
    pub plant: PlantSpec,
    pub spectrum: Spectrum,
    pub a_coef: Vec<f64>,
    pub b_coef: Vec<f64>,
    /// `c_n`, `φ_n(0)` or `φ_n'(0)` depending on the measurement.
    pub out_coef: Vec<f64>,
    pub n0: usize,
    pub tail: TailConstant,
    pub a_norm2: f64,
    pub b_norm2: f64,
    /// `∫ g(x) c(x) dx` for a bounded measurement, 0 otherwise; the
    /// homogenized output is `y - feedthrough · u`. For a Neumann trace the
    /// lifting contributes `g'(0) = 1` instead (see [`ReducedPlant::output_offset`]).
    pub feedthrough: f64,
    pub p_at_1: f64,
}

impl ReducedPlant {
    pub fn kind(&self) -> MeasurementKind {
        self.plant.kind()
    }

    pub fn q_c(&self) -> f64 {
        self.plant.q_c
    }

    pub fn delta(&self) -> f64 {
        self.plant.delta
    }

    /// Diagonal entry `-λ_n + q_c` (1-based `mode`).
    pub fn open_loop_rate(&self, mode: usize) -> f64 {
        -self.spectrum.lambdas[mode - 1] + self.plant.q_c
    }

    /// Coefficient `κ` in `ỹ = y - κ u` relating the raw and homogenized outputs.
    pub fn output_offset(&self) -> f64 {
        match self.kind() {
            MeasurementKind::Bounded => self.feedthrough,
            MeasurementKind::Dirichlet => 0.0,
            MeasurementKind::Neumann => 1.0,
        }
    }

    /// Tail constant for a given `ε`, recomputed when it differs from the stored one.
    pub fn tail_for_eps(&self, eps: f64) -> Result<TailConstant> {
        match (self.kind(), self.tail.eps) {
            (MeasurementKind::Neumann, Some(e)) if e == eps => Ok(self.tail),
            (MeasurementKind::Neumann, _) => {
                tail_constants(&self.plant, &self.spectrum, eps, self.tail.explicit_terms)
            }
            _ => Ok(self.tail),
        }
    }

    /// `c_n ≠ 0` for every actively controlled mode.
    pub fn observable(&self) -> bool {
        self.out_coef[..self.n0].iter().all(|c| c.abs() > 1e-12)
    }
}

/// Projects the homogenized plant on the spectrum. `order` is the intended
/// observer order `N`; the spectrum must carry at least `N + 1` modes.
pub fn reduce(plant: &PlantSpec, spectrum: Spectrum, order: usize) -> Result<ReducedPlant> {
    reduce_with_eps(plant, spectrum, order, DEFAULT_EPS)
}

pub fn reduce_with_eps(plant: &PlantSpec, spectrum: Spectrum, order: usize, eps: f64) -> Result<ReducedPlant> {
    check_domain(plant, &spectrum)?;
    if order == 0 {
        return Err(Error::InvalidArgument("observer order must be at least 1".into()));
    }
    if spectrum.n_modes() < order + 1 {
        return Err(Error::InsufficientModes {
            available: spectrum.n_modes(),
            required: order + 1,
        });
    }
    let (a, b) = lifting_functions(plant, &spectrum)?;
    let modes = 0..spectrum.n_modes();
    let a_coef = modes
        .clone()
        .map(|k| spectrum.inner(&a, &spectrum.eigenfunctions[k]))
        .collect::<Result<Vec<_>>>()?;
    let b_coef = modes
        .clone()
        .map(|k| spectrum.inner(&b, &spectrum.eigenfunctions[k]))
        .collect::<Result<Vec<_>>>()?;
    let (out_coef, feedthrough) = match &plant.measurement {
        Measurement::Bounded(c) => {
            let cs = c.sample(spectrum.grid_size);
            let coef = modes
                .map(|k| spectrum.inner(&cs, &spectrum.eigenfunctions[k]))
                .collect::<Result<Vec<_>>>()?;
            let g: Vec<f64> = spectrum.grid().iter().map(|&x| x * x).collect();
            (coef, spectrum.inner(&g, &cs)?)
        }
        Measurement::DirichletAt0 => (spectrum.trace0.clone(), 0.0),
        Measurement::NeumannAt0 => (spectrum.dtrace0.clone(), 0.0),
    };
    let n0 = select_n0(&spectrum, plant.q_c, plant.delta)?;
    if spectrum.n_modes() < n0 + 1 {
        return Err(Error::InsufficientModes {
            available: spectrum.n_modes(),
            required: n0 + 1,
        });
    }
    let tail_terms = match spectrum.origin {
        SpectrumOrigin::Analytic => DEFAULT_ANALYTIC_TAIL_TERMS,
        SpectrumOrigin::FiniteDifference => spectrum.n_modes(),
    };
    let tail = tail_constants(plant, &spectrum, eps, tail_terms)?;
    let a_norm2 = spectrum.inner(&a, &a)?;
    let b_norm2 = spectrum.inner(&b, &b)?;
    let p_at_1 = plant.coeffs.p.eval(1.0);
    Ok(ReducedPlant {
        plant: plant.clone(),
        spectrum,
        a_coef,
        b_coef,
        out_coef,
        n0,
        tail,
        a_norm2,
        b_norm2,
        feedthrough,
        p_at_1,
    })
}

/// `a_n + (-λ_n + q_c) b_n + p(1) φ_n'(1)`, which vanishes identically; its
/// size measures quadrature and eigen-solver consistency. `mode` is 1-based.
pub fn boundary_flux_residual(reduced: &ReducedPlant, mode: usize) -> Result<f64> {
    if mode == 0 || mode > reduced.spectrum.n_modes() {
        return Err(Error::InsufficientModes {
            available: reduced.spectrum.n_modes(),
            required: mode,
        });
    }
    let k = mode - 1;
    Ok(reduced.a_coef[k]
        + reduced.open_loop_rate(mode) * reduced.b_coef[k]
        + reduced.p_at_1 * reduced.spectrum.dtrace1[k])
}
