//! Gain synthesis and closed-loop assembly.
//!
//! The finite-dimensional design state is `col(u, ŵ_1..ŵ_N0)` driven by
//! `v = K Ŵ_a`; the observer estimates `N >= N0 + 1` modes with gains
//! `l_n = 0` for `n > N0`. The certificate state
//! `X = col(Ŵ_a, E^{N0}, Ŵ^{N-N0}, Ẽ^{N-N0})` evolves as
//! `Ẋ = F X + 𝓛 ζ`, where `ζ` is the unmodelled output tail.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::homogenize::{MeasurementKind, ReducedPlant};
use crate::linalg::relative_rank_gap;
use crate::{Error, Result};

const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSet {
    /// Row of length `N0 + 1` acting on `col(u, ŵ_1..ŵ_N0)`.
    pub k: Vec<f64>,
    /// Column of length `N0`.
    pub l: Vec<f64>,
    pub controller_poles: Vec<f64>,
    pub observer_poles: Vec<f64>,
}

impl GainSet {
    pub fn n0(&self) -> usize {
        self.l.len()
    }

    /// Same shape with every gain set to zero (open loop).
    pub fn zeroed(n0: usize) -> Self {
        Self {
            k: vec![0.0; n0 + 1],
            l: vec![0.0; n0],
            controller_poles: Vec::new(),
            observer_poles: Vec::new(),
        }
    }
}

/// How closed-loop poles are chosen.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoleRule {
    /// Controller `{-(δ + k)}`, `k = 1..=N0+1`; observer `{-(δ + k)}`, `k = 1..=N0`.
    #[default]
    Shifted,
    Explicit { controller: Vec<f64>, observer: Vec<f64> },
}

impl PoleRule {
    pub fn poles(&self, n0: usize, delta: f64) -> (Vec<f64>, Vec<f64>) {
        match self {
            PoleRule::Shifted => (
                (1..=n0 + 1).map(|k| -(delta + k as f64)).collect(),
                (1..=n0).map(|k| -(delta + k as f64)).collect(),
            ),
            PoleRule::Explicit { controller, observer } => (controller.clone(), observer.clone()),
        }
    }
}

/// Single-input pole placement: returns `K` with `eig(A + B K) = poles`.
pub fn place_controller(a: &DMatrix<f64>, b: &DVector<f64>, poles: &[f64]) -> Result<DVector<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n || poles.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "placement needs square A ({}x{}), B of length {} and {} poles, got {} and {}",
            n,
            a.ncols(),
            n,
            n,
            b.len(),
            poles.len()
        )));
    }
    let mut ctrb = DMatrix::<f64>::zeros(n, n);
    let mut col = b.clone();
    for j in 0..n {
        ctrb.set_column(j, &col);
        col = a * col;
    }
    let gap = relative_rank_gap(&ctrb);
    if !(gap >= RANK_TOLERANCE) {
        return Err(Error::UncontrollablePair(gap));
    }
    let p_of_a = characteristic_polynomial_at(a, poles);
    let mut e_n = DVector::<f64>::zeros(n);
    e_n[n - 1] = 1.0;
    let row = ctrb
        .transpose()
        .lu()
        .solve(&e_n)
        .ok_or(Error::UncontrollablePair(gap))?;
    Ok(-(p_of_a.transpose() * row))
}

/// Observer gain by duality: returns `L` with `eig(A - L C) = poles`.
pub fn place_observer(a: &DMatrix<f64>, c: &DVector<f64>, poles: &[f64]) -> Result<DVector<f64>> {
    match place_controller(&a.transpose(), c, poles) {
        Ok(k) => Ok(-k),
        Err(Error::UncontrollablePair(gap)) => Err(Error::UnobservablePair(gap)),
        Err(e) => Err(e),
    }
}

/// `Π (A - r I)` evaluated by Horner's scheme on the monic coefficients.
fn characteristic_polynomial_at(a: &DMatrix<f64>, roots: &[f64]) -> DMatrix<f64> {
    // coefficients, highest degree first
    let mut coef = vec![1.0];
    for &r in roots {
        let mut next = coef.clone();
        next.push(0.0);
        for (i, c) in coef.iter().enumerate() {
            next[i + 1] -= r * c;
        }
        coef = next;
    }
    let n = a.nrows();
    let mut acc = DMatrix::<f64>::zeros(n, n);
    for c in coef {
        acc = &acc * a;
        for i in 0..n {
            acc[(i, i)] += c;
        }
    }
    acc
}

/// Finite-dimensional design matrices of the reduced plant.
#[derive(Debug, Clone)]
pub struct DesignMatrices {
    pub a0: DMatrix<f64>,
    pub a1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub c0: DVector<f64>,
}

pub fn design_matrices(reduced: &ReducedPlant) -> DesignMatrices {
    let n0 = reduced.n0;
    let a0 = DMatrix::from_diagonal(&DVector::from_fn(n0, |i, _| reduced.open_loop_rate(i + 1)));
    let mut a1 = DMatrix::<f64>::zeros(n0 + 1, n0 + 1);
    a1.view_mut((1, 1), (n0, n0)).copy_from(&a0);
    for i in 0..n0 {
        a1[(i + 1, 0)] = reduced.a_coef[i];
    }
    let b1 = DVector::from_fn(n0 + 1, |i, _| if i == 0 { 1.0 } else { reduced.b_coef[i - 1] });
    let c0 = DVector::from_fn(n0, |i, _| reduced.out_coef[i]);
    DesignMatrices { a0, a1, b1, c0 }
}

/// Places controller and observer poles for the reduced plant.
pub fn synthesize_gains(reduced: &ReducedPlant, rule: &PoleRule) -> Result<GainSet> {
    let n0 = reduced.n0;
    let delta = reduced.delta();
    let (cp, op) = rule.poles(n0, delta);
    if cp.len() != n0 + 1 || op.len() != n0 {
        return Err(Error::InvalidArgument(format!(
            "need {} controller and {} observer poles, got {} and {}",
            n0 + 1,
            n0,
            cp.len(),
            op.len()
        )));
    }
    if let Some(&pole) = cp.iter().chain(&op).find(|&&p| !(p < -delta)) {
        return Err(Error::PoleTooSlow { pole, neg_delta: -delta });
    }
    let dm = design_matrices(reduced);
    let k = place_controller(&dm.a1, &dm.b1, &cp)?;
    let l = place_observer(&dm.a0, &dm.c0, &op)?;
    Ok(GainSet {
        k: k.iter().copied().collect(),
        l: l.iter().copied().collect(),
        controller_poles: cp,
        observer_poles: op,
    })
}

/// Closed-loop matrices of the certificate state for observer order `N`.
#[derive(Debug, Clone)]
pub struct ClosedLoopMatrices {
    pub n: usize,
    pub n0: usize,
    pub kind: MeasurementKind,
    pub a0: DMatrix<f64>,
    pub a1: DMatrix<f64>,
    pub b1: DVector<f64>,
    /// `a_1..a_N0`
    pub b0a: DVector<f64>,
    /// `b_1..b_N0`
    pub b0b: DVector<f64>,
    /// `a_{N0+1}..a_N`
    pub b2a: DVector<f64>,
    /// `b_{N0+1}..b_N`
    pub b2b: DVector<f64>,
    pub a2: DMatrix<f64>,
    pub c0: DVector<f64>,
    /// Output coefficients of the scaled tail errors.
    pub c1: DVector<f64>,
    /// Factors `s_n` with `Ẽ_n = s_n e_n`, `n = N0+1..N`.
    pub error_scaling: Vec<f64>,
    pub k: DVector<f64>,
    pub l: DVector<f64>,
    pub f: DMatrix<f64>,
    pub lcal: DVector<f64>,
    pub g: DMatrix<f64>,
    /// `‖a‖² + ‖b‖² ‖K‖²`, an upper bound on `G`.
    pub g_bound: f64,
    pub e_row: DVector<f64>,
    pub ktilde_row: DVector<f64>,
}

impl ClosedLoopMatrices {
    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    /// Offsets of the four state blocks.
    pub fn block_offsets(&self) -> [usize; 4] {
        let (n, n0) = (self.n, self.n0);
        [0, n0 + 1, 2 * n0 + 1, n + n0 + 1]
    }
}

pub fn assemble_closed_loop(reduced: &ReducedPlant, gains: &GainSet, n: usize) -> Result<ClosedLoopMatrices> {
    let n0 = reduced.n0;
    if n < n0 + 1 {
        return Err(Error::OrderTooSmall { n, min: n0 + 1 });
    }
    if reduced.spectrum.n_modes() < n + 1 {
        return Err(Error::InsufficientModes {
            available: reduced.spectrum.n_modes(),
            required: n + 1,
        });
    }
    if gains.k.len() != n0 + 1 || gains.l.len() != n0 {
        return Err(Error::DimensionMismatch(format!(
            "gains sized for N0 = {}, plant has N0 = {n0}",
            gains.l.len()
        )));
    }
    let kind = reduced.kind();
    let dm = design_matrices(reduced);
    let m = n - n0;
    let tail = |k: usize| n0 + k;
    let a2 = DMatrix::from_diagonal(&DVector::from_fn(m, |i, _| reduced.open_loop_rate(tail(i) + 1)));
    let b2a = DVector::from_fn(m, |i, _| reduced.a_coef[tail(i)]);
    let b2b = DVector::from_fn(m, |i, _| reduced.b_coef[tail(i)]);
    let error_scaling: Vec<f64> = (0..m)
        .map(|i| kind.error_scaling(reduced.spectrum.lambdas[tail(i)]))
        .collect();
    let c1 = DVector::from_fn(m, |i, _| reduced.out_coef[tail(i)] / error_scaling[i]);
    let k = DVector::from_vec(gains.k.clone());
    let l = DVector::from_vec(gains.l.clone());
    let mut ltilde = DVector::<f64>::zeros(n0 + 1);
    ltilde.rows_mut(1, n0).copy_from(&l);

    let dim = 2 * n + 1;
    let [o1, o2, o3, o4] = [0, n0 + 1, 2 * n0 + 1, n + n0 + 1];
    let mut f = DMatrix::<f64>::zeros(dim, dim);
    f.view_mut((o1, o1), (n0 + 1, n0 + 1))
        .copy_from(&(&dm.a1 + &dm.b1 * k.transpose()));
    f.view_mut((o1, o2), (n0 + 1, n0)).copy_from(&(&ltilde * dm.c0.transpose()));
    f.view_mut((o1, o4), (n0 + 1, m)).copy_from(&(&ltilde * c1.transpose()));
    f.view_mut((o2, o2), (n0, n0))
        .copy_from(&(&dm.a0 - &l * dm.c0.transpose()));
    f.view_mut((o2, o4), (n0, m)).copy_from(&(-(&l * c1.transpose())));
    let mut row3 = &b2b * k.transpose();
    for i in 0..m {
        row3[(i, 0)] += b2a[i];
    }
    f.view_mut((o3, o1), (m, n0 + 1)).copy_from(&row3);
    f.view_mut((o3, o3), (m, m)).copy_from(&a2);
    f.view_mut((o4, o4), (m, m)).copy_from(&a2);

    let mut lcal = DVector::<f64>::zeros(dim);
    lcal.rows_mut(o1, n0 + 1).copy_from(&ltilde);
    lcal.rows_mut(o2, n0).copy_from(&(-&l));

    let mut e_row = DVector::<f64>::zeros(dim);
    e_row[0] = 1.0;
    let mut ktilde_row = DVector::<f64>::zeros(dim);
    ktilde_row.rows_mut(0, n0 + 1).copy_from(&k);
    let g = &e_row * e_row.transpose() * reduced.a_norm2 + &ktilde_row * ktilde_row.transpose() * reduced.b_norm2;
    let g_bound = reduced.a_norm2 + reduced.b_norm2 * k.norm_squared();

    Ok(ClosedLoopMatrices {
        n,
        n0,
        kind,
        b0a: DVector::from_fn(n0, |i, _| reduced.a_coef[i]),
        b0b: DVector::from_fn(n0, |i, _| reduced.b_coef[i]),
        a0: dm.a0,
        a1: dm.a1,
        b1: dm.b1,
        b2a,
        b2b,
        a2,
        c0: dm.c0,
        c1,
        error_scaling,
        k,
        l,
        f,
        lcal,
        g,
        g_bound,
        e_row,
        ktilde_row,
    })
}
