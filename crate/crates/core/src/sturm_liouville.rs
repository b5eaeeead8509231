//! Eigenpairs of the Sturm–Liouville operator `A f = -(p f')' + q f` on
//! `(0, 1)` with either `f'(0) = f(1) = 0` or `f(0) = f(1) = 0`.
//!
//! [`solve_spectrum`] discretizes the operator in conservative flux form,
//! which keeps the discrete problem symmetric. It solves on two nested grids
//! and Richardson-extrapolates the eigenvalues. [`analytic_spectrum`] gives
//! the closed forms for `p = 1`, `q = 0`.

use std::f64::consts::{PI, SQRT_2};

use crate::linalg::SymTridiagonal;
use crate::{Error, Exec, Result};

/// Grid used when the caller has no reason to pick another one.
pub const DEFAULT_GRID_SIZE: usize = 2000;

/// Minimum number of grid intervals per requested mode.
pub const POINTS_PER_MODE: usize = 40;

const BOUND_SAMPLES: usize = 20_000;

/// A coefficient function on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Constant(f64),
    /// Coefficients in ascending order: `c0 + c1 x + c2 x² + ...`.
    Polynomial(Vec<f64>),
    /// Values on a uniform grid of `[0, 1]` (first and last sample at the
    /// end points), linearly interpolated in between.
    Sampled(Vec<f64>),
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Constant(c) => *c,
            Profile::Polynomial(c) => c.iter().rev().fold(0.0, |acc, a| acc * x + a),
            Profile::Sampled(v) => {
                if v.len() == 1 {
                    return v[0];
                }
                let cells = (v.len() - 1) as f64;
                let s = (x.clamp(0.0, 1.0) * cells).min(cells);
                let i = (s.floor() as usize).min(v.len() - 2);
                let t = s - i as f64;
                v[i] * (1.0 - t) + v[i + 1] * t
            }
        }
    }

    /// Exact derivative when the profile is given in closed form.
    pub fn derivative(&self) -> Option<Profile> {
        match self {
            Profile::Constant(_) => Some(Profile::Constant(0.0)),
            Profile::Polynomial(c) => Some(if c.len() <= 1 {
                Profile::Constant(0.0)
            } else {
                Profile::Polynomial(c.iter().enumerate().skip(1).map(|(k, a)| k as f64 * a).collect())
            }),
            Profile::Sampled(_) => None,
        }
    }

    pub fn is_constant(&self, value: f64) -> bool {
        match self {
            Profile::Constant(c) => *c == value,
            Profile::Polynomial(c) => {
                c.first().copied().unwrap_or(0.0) == value && c.iter().skip(1).all(|a| *a == 0.0)
            }
            Profile::Sampled(v) => v.iter().all(|a| *a == value),
        }
    }

    /// Samples on the uniform grid `x_i = i / grid_size`, `i = 0..=grid_size`.
    pub fn sample(&self, grid_size: usize) -> Vec<f64> {
        (0..=grid_size)
            .map(|i| self.eval(i as f64 / grid_size as f64))
            .collect()
    }

    fn range(&self) -> (f64, f64) {
        (0..=BOUND_SAMPLES)
            .map(|i| self.eval(i as f64 / BOUND_SAMPLES as f64))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Smoothness {
    C1,
    C2,
}

/// Diffusion `p` and reaction `q` with the bounds `0 < p_star <= p <= p_sup`
/// and `0 <= q <= q_sup`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPair {
    pub p: Profile,
    pub p_prime: Option<Profile>,
    pub q: Profile,
    pub p_star: f64,
    pub p_sup: f64,
    pub q_sup: f64,
    pub smoothness: Smoothness,
}

impl CoefficientPair {
    /// Builds the pair and derives the bounds from a dense sampling of `p` and `q`.
    pub fn new(p: Profile, p_prime: Option<Profile>, q: Profile, smoothness: Smoothness) -> Result<Self> {
        let (p_lo, p_hi) = p.range();
        let (q_lo, q_hi) = q.range();
        if p_lo <= 0.0 {
            return Err(Error::NonPositiveDiffusion { min_p: p_lo });
        }
        if q_lo < 0.0 {
            return Err(Error::CoefficientBounds(format!("q must be nonnegative, min q = {q_lo:e}")));
        }
        let p_prime = p_prime.or_else(|| p.derivative());
        Ok(Self {
            p,
            p_prime,
            q,
            p_star: p_lo,
            p_sup: p_hi,
            q_sup: q_hi,
            smoothness,
        })
    }

    pub fn constant(p: f64, q: f64) -> Result<Self> {
        Self::new(Profile::Constant(p), None, Profile::Constant(q), Smoothness::C2)
    }

    /// Polynomial coefficients in ascending order; polynomials are smooth, so
    /// the pair is tagged `C2`.
    pub fn polynomial(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        Self::new(Profile::Polynomial(p), None, Profile::Polynomial(q), Smoothness::C2)
    }

    /// Replaces the sampled bounds by caller-supplied ones after checking them.
    pub fn with_bounds(mut self, p_star: f64, p_sup: f64, q_sup: f64) -> Result<Self> {
        let (p_lo, p_hi) = self.p.range();
        let (_, q_hi) = self.q.range();
        if p_star <= 0.0 || p_star > p_lo || p_sup < p_hi || q_sup < q_hi {
            return Err(Error::CoefficientBounds(format!(
                "bounds ({p_star}, {p_sup}, {q_sup}) do not enclose p in [{p_lo}, {p_hi}], q <= {q_hi}"
            )));
        }
        self.p_star = p_star;
        self.p_sup = p_sup;
        self.q_sup = q_sup;
        Ok(self)
    }

    /// `p = 1` and `q = 0`, the case covered by [`analytic_spectrum`].
    pub fn is_unit(&self) -> bool {
        self.p.is_constant(1.0) && self.q.is_constant(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BoundarySpec {
    /// `f'(0) = f(1) = 0`
    NeumannDirichlet,
    /// `f(0) = f(1) = 0`
    DirichletDirichlet,
}

impl BoundarySpec {
    fn unit_wavenumber(self, mode: usize) -> f64 {
        match self {
            BoundarySpec::NeumannDirichlet => (mode as f64 - 0.5) * PI,
            BoundarySpec::DirichletDirichlet => mode as f64 * PI,
        }
    }

    /// Eigenvalue of mode `mode` (1-based) for `p = 1`, `q = 0`.
    pub fn unit_lambda(self, mode: usize) -> f64 {
        self.unit_wavenumber(mode).powi(2)
    }

    /// `φ_n(0)` for `p = 1`, `q = 0`.
    pub fn unit_trace0(self, _mode: usize) -> f64 {
        match self {
            BoundarySpec::NeumannDirichlet => SQRT_2,
            BoundarySpec::DirichletDirichlet => 0.0,
        }
    }

    /// `φ_n'(0)` for `p = 1`, `q = 0`.
    pub fn unit_dtrace0(self, mode: usize) -> f64 {
        match self {
            BoundarySpec::NeumannDirichlet => 0.0,
            BoundarySpec::DirichletDirichlet => SQRT_2 * self.unit_wavenumber(mode),
        }
    }

    /// `φ_n'(1)` for `p = 1`, `q = 0`.
    pub fn unit_dtrace1(self, mode: usize) -> f64 {
        let k = self.unit_wavenumber(mode);
        match self {
            BoundarySpec::NeumannDirichlet => -SQRT_2 * k * k.sin(),
            BoundarySpec::DirichletDirichlet => SQRT_2 * k * k.cos(),
        }
    }

    fn unit_mode(self, mode: usize, x: f64) -> f64 {
        let k = self.unit_wavenumber(mode);
        match self {
            BoundarySpec::NeumannDirichlet => SQRT_2 * (k * x).cos(),
            BoundarySpec::DirichletDirichlet => SQRT_2 * (k * x).sin(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SpectrumOrigin {
    /// Closed forms for `p = 1`, `q = 0`; valid for every mode index.
    Analytic,
    FiniteDifference,
}

/// Eigenvalues, unit eigenfunctions sampled on a uniform grid and boundary
/// traces. Mode `n` (1-based) is stored at index `n - 1`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub boundary: BoundarySpec,
    pub origin: SpectrumOrigin,
    pub lambdas: Vec<f64>,
    pub eigenfunctions: Vec<Vec<f64>>,
    /// `φ_n(0)`
    pub trace0: Vec<f64>,
    /// `φ_n'(0)`
    pub dtrace0: Vec<f64>,
    /// `φ_n'(1)`
    pub dtrace1: Vec<f64>,
    pub grid_size: usize,
    /// Composite Simpson weights on the grid.
    pub weights: Vec<f64>,
}

impl Spectrum {
    pub fn n_modes(&self) -> usize {
        self.lambdas.len()
    }

    pub fn h(&self) -> f64 {
        1.0 / self.grid_size as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..=self.grid_size).map(|i| i as f64 / self.grid_size as f64).collect()
    }

    /// Quadrature of a sampled function against the stored weights.
    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        self.check_grid(f)?;
        Ok(f.iter().zip(&self.weights).map(|(a, w)| a * w).sum())
    }

    /// `L²` inner product of two sampled functions.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        self.check_grid(f)?;
        self.check_grid(g)?;
        Ok(f.iter().zip(g).zip(&self.weights).map(|((a, b), w)| a * b * w).sum())
    }

    fn check_grid(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.grid_size + 1 {
            return Err(Error::GridMismatch {
                expected: self.grid_size + 1,
                got: f.len(),
            });
        }
        Ok(())
    }
}

/// Composite Simpson weights on `grid_size` (even) uniform intervals of `[0, 1]`.
pub fn simpson_weights(grid_size: usize) -> Vec<f64> {
    assert!(grid_size >= 2 && grid_size % 2 == 0);
    let h = 1.0 / grid_size as f64;
    (0..=grid_size)
        .map(|i| {
            let c = if i == 0 || i == grid_size {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect()
}

/// Fourth-order finite-difference derivative of samples on a uniform grid.
pub fn grid_derivative(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 5, "need at least five samples");
    (0..n)
        .map(|i| {
            if i >= 2 && i + 2 < n {
                (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h)
            } else if i < 2 {
                let s = &f[i..i + 5];
                (-25.0 * s[0] + 48.0 * s[1] - 36.0 * s[2] + 16.0 * s[3] - 3.0 * s[4]) / (12.0 * h)
            } else {
                let s = &f[i - 4..=i];
                (25.0 * s[4] - 48.0 * s[3] + 36.0 * s[2] - 16.0 * s[1] + 3.0 * s[0]) / (12.0 * h)
            }
        })
        .collect()
}

/// Sixth-order one-sided stencil for `f'(0)`.
const ONE_SIDED_6: [f64; 7] = [-49.0 / 20.0, 6.0, -15.0 / 2.0, 20.0 / 3.0, -15.0 / 4.0, 6.0 / 5.0, -1.0 / 6.0];

fn forward_derivative(f: &[f64], h: f64) -> f64 {
    ONE_SIDED_6.iter().zip(f).map(|(c, v)| c * v).sum::<f64>() / h
}

fn backward_derivative(f: &[f64], h: f64) -> f64 {
    -ONE_SIDED_6.iter().zip(f.iter().rev()).map(|(c, v)| c * v).sum::<f64>() / h
}

fn check_grid_args(n_modes: usize, grid_size: usize) -> Result<()> {
    if n_modes == 0 {
        return Err(Error::InvalidArgument("n_modes must be at least 1".into()));
    }
    if grid_size < 4 || grid_size % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "grid_size must be even and at least 4, got {grid_size}"
        )));
    }
    Ok(())
}

/// Closed-form spectrum for `p = 1`, `q = 0`.
pub fn analytic_spectrum(boundary: BoundarySpec, n_modes: usize, grid_size: usize) -> Result<Spectrum> {
    check_grid_args(n_modes, grid_size)?;
    let h = 1.0 / grid_size as f64;
    let modes = 1..=n_modes;
    Ok(Spectrum {
        boundary,
        origin: SpectrumOrigin::Analytic,
        lambdas: modes.clone().map(|n| boundary.unit_lambda(n)).collect(),
        eigenfunctions: modes
            .clone()
            .map(|n| {
                let mut v: Vec<f64> = (0..=grid_size).map(|i| boundary.unit_mode(n, i as f64 * h)).collect();
                v[grid_size] = 0.0;
                if boundary == BoundarySpec::DirichletDirichlet {
                    v[0] = 0.0;
                }
                v
            })
            .collect(),
        trace0: modes.clone().map(|n| boundary.unit_trace0(n)).collect(),
        dtrace0: modes.clone().map(|n| boundary.unit_dtrace0(n)).collect(),
        dtrace1: modes.map(|n| boundary.unit_dtrace1(n)).collect(),
        grid_size,
        weights: simpson_weights(grid_size),
    })
}

/// Symmetric finite-difference discretization on `m` intervals, plus the
/// map from eigenvectors of the symmetric matrix back to nodal values.
struct Discretization {
    matrix: SymTridiagonal,
    boundary: BoundarySpec,
    m: usize,
}

impl Discretization {
    fn new(coeffs: &CoefficientPair, boundary: BoundarySpec, m: usize) -> Result<Self> {
        let h = 1.0 / m as f64;
        let h2 = h * h;
        let p_half: Vec<f64> = (0..m).map(|i| coeffs.p.eval((i as f64 + 0.5) * h)).collect();
        let min_p = p_half.iter().copied().fold(f64::INFINITY, f64::min);
        if min_p <= 0.0 {
            return Err(Error::NonPositiveDiffusion { min_p });
        }
        let q: Vec<f64> = (0..=m).map(|i| coeffs.q.eval(i as f64 * h)).collect();
        let matrix = match boundary {
            BoundarySpec::DirichletDirichlet => {
                // unknowns f_1 .. f_{m-1}
                let diag = (1..m).map(|i| (p_half[i - 1] + p_half[i]) / h2 + q[i]).collect();
                let off = (1..m - 1).map(|i| -p_half[i] / h2).collect();
                SymTridiagonal::new(diag, off)
            }
            BoundarySpec::NeumannDirichlet => {
                // unknowns f_0 .. f_{m-1}; the mirrored ghost node gives the
                // half-cell row at x = 0, symmetrized by the mass weight 1/2
                let mut diag = vec![2.0 * p_half[0] / h2 + q[0]];
                diag.extend((1..m).map(|i| (p_half[i - 1] + p_half[i]) / h2 + q[i]));
                let mut off = vec![-SQRT_2 * p_half[0] / h2];
                off.extend((1..m - 1).map(|i| -p_half[i] / h2));
                SymTridiagonal::new(diag, off)
            }
        };
        Ok(Self { matrix, boundary, m })
    }

    /// Nodal values `f_0 ..= f_m` of the eigenvector for `lambda`.
    fn nodal_eigenvector(&self, lambda: f64) -> Vec<f64> {
        let g = self.matrix.eigenvector(lambda);
        let mut f = Vec::with_capacity(self.m + 1);
        match self.boundary {
            BoundarySpec::DirichletDirichlet => {
                f.push(0.0);
                f.extend(g);
            }
            BoundarySpec::NeumannDirichlet => {
                f.push(SQRT_2 * g[0]);
                f.extend(g.into_iter().skip(1));
            }
        }
        f.push(0.0);
        f
    }
}

/// Eigenpairs of `-(p f')' + q f` by second-order finite differences on
/// `grid_size` and `2 grid_size` intervals with Richardson extrapolation.
///
/// Eigenfunctions and boundary traces are extrapolated the same way and
/// stored on the `grid_size` grid; traces use sixth-order one-sided stencils.
pub fn solve_spectrum(
    coeffs: &CoefficientPair,
    boundary: BoundarySpec,
    n_modes: usize,
    grid_size: usize,
) -> Result<Spectrum> {
    solve_spectrum_with(coeffs, boundary, n_modes, grid_size, Exec::default())
}

pub fn solve_spectrum_with(
    coeffs: &CoefficientPair,
    boundary: BoundarySpec,
    n_modes: usize,
    grid_size: usize,
    exec: Exec,
) -> Result<Spectrum> {
    check_grid_args(n_modes, grid_size)?;
    let required = POINTS_PER_MODE * n_modes;
    if grid_size < required {
        return Err(Error::ResolutionTooCoarse {
            grid_size,
            n_modes,
            required,
        });
    }
    let coarse = Discretization::new(coeffs, boundary, grid_size)?;
    let fine = Discretization::new(coeffs, boundary, 2 * grid_size)?;
    let weights = simpson_weights(grid_size);
    let h_fine = 0.5 / grid_size as f64;

    struct Mode {
        lambda: f64,
        samples: Vec<f64>,
        trace0: f64,
        dtrace0: f64,
        dtrace1: f64,
    }

    // Normalized, sign-fixed samples on the coarse grid plus (f(0), f'(0), f'(1)).
    let normalized = |f: Vec<f64>, stride: usize, h: f64| {
        let samples: Vec<f64> = f.iter().step_by(stride).copied().collect();
        let norm2: f64 = samples.iter().zip(&weights).map(|(v, w)| v * v * w).sum();
        let d0 = forward_derivative(&f, h);
        let lead = match boundary {
            BoundarySpec::NeumannDirichlet => f[0],
            BoundarySpec::DirichletDirichlet => d0,
        };
        let scale = lead.signum() / norm2.sqrt();
        let traces = [f[0] * scale, d0 * scale, backward_derivative(&f, h) * scale];
        (samples.into_iter().map(|v| v * scale).collect::<Vec<_>>(), traces)
    };

    let modes: Vec<Mode> = exec.map_range(n_modes, |k| {
        let lam_coarse = coarse.matrix.eigenvalue(k);
        let lam_fine = fine.matrix.eigenvalue(k);
        let (fc, tc) = normalized(coarse.nodal_eigenvector(lam_coarse), 1, 2.0 * h_fine);
        let (ff, tf) = normalized(fine.nodal_eigenvector(lam_fine), 2, h_fine);
        let extrapolate = |fine: f64, coarse: f64| (4.0 * fine - coarse) / 3.0;
        let mut samples: Vec<f64> = ff.iter().zip(&fc).map(|(a, b)| extrapolate(*a, *b)).collect();
        let norm = samples.iter().zip(&weights).map(|(v, w)| v * v * w).sum::<f64>().sqrt();
        samples.iter_mut().for_each(|v| *v /= norm);
        let t: Vec<f64> = tf.iter().zip(&tc).map(|(a, b)| extrapolate(*a, *b) / norm).collect();
        let (trace0, dtrace0) = match boundary {
            BoundarySpec::NeumannDirichlet => (t[0], 0.0),
            BoundarySpec::DirichletDirichlet => (0.0, t[1]),
        };
        Mode {
            lambda: extrapolate(lam_fine, lam_coarse),
            samples,
            trace0,
            dtrace0,
            dtrace1: t[2],
        }
    });

    let mut spectrum = Spectrum {
        boundary,
        origin: SpectrumOrigin::FiniteDifference,
        lambdas: Vec::with_capacity(n_modes),
        eigenfunctions: Vec::with_capacity(n_modes),
        trace0: Vec::with_capacity(n_modes),
        dtrace0: Vec::with_capacity(n_modes),
        dtrace1: Vec::with_capacity(n_modes),
        grid_size,
        weights,
    };
    for m in modes {
        spectrum.lambdas.push(m.lambda);
        spectrum.eigenfunctions.push(m.samples);
        spectrum.trace0.push(m.trace0);
        spectrum.dtrace0.push(m.dtrace0);
        spectrum.dtrace1.push(m.dtrace1);
    }
    Ok(spectrum)
}

/// Closed-form spectrum when `p ≡ 1` and `q ≡ 0`, finite differences otherwise.
pub fn compute_spectrum(
    coeffs: &CoefficientPair,
    boundary: BoundarySpec,
    n_modes: usize,
    grid_size: usize,
    exec: Exec,
) -> Result<Spectrum> {
    if coeffs.is_unit() {
        analytic_spectrum(boundary, n_modes, grid_size)
    } else {
        solve_spectrum_with(coeffs, boundary, n_modes, grid_size, exec)
    }
}

/// Distance of `λ_n` to the two sides of `π²(n-1)² p_star <= λ_n <= π² n² p_sup + q_sup`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundMargin {
    pub lower: f64,
    pub upper: f64,
}

pub fn validate_bounds(spectrum: &Spectrum, coeffs: &CoefficientPair) -> Result<Vec<BoundMargin>> {
    if spectrum.n_modes() == 0 {
        return Err(Error::InvalidArgument("empty spectrum".into()));
    }
    let pi2 = PI * PI;
    spectrum
        .lambdas
        .iter()
        .enumerate()
        .map(|(k, &lam)| {
            let n = (k + 1) as f64;
            let lower = lam - pi2 * (n - 1.0).powi(2) * coeffs.p_star;
            let upper = pi2 * n * n * coeffs.p_sup + coeffs.q_sup - lam;
            let tol = -1e-9 * lam.abs().max(1.0);
            if lower < tol || upper < tol || lam < tol {
                Err(Error::BoundViolation {
                    mode: k + 1,
                    lower,
                    upper,
                })
            } else {
                Ok(BoundMargin { lower, upper })
            }
        })
        .collect()
}

/// `⟨f, φ_mode⟩` by composite Simpson quadrature; `mode` is 1-based.
pub fn project(f: &[f64], spectrum: &Spectrum, mode: usize) -> Result<f64> {
    if mode == 0 || mode > spectrum.n_modes() {
        return Err(Error::InsufficientModes {
            available: spectrum.n_modes(),
            required: mode,
        });
    }
    spectrum.inner(f, &spectrum.eigenfunctions[mode - 1])
}
