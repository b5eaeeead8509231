use nalgebra::DMatrix;

use crate::{Error, Result};

// Higham (2005) scaling-and-squaring with diagonal Padé approximants.
const THETA: [(usize, f64); 5] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_230e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068e0),
    (13, 5.371_920_351_148_152e0),
];

fn pade_coefficients(m: usize) -> &'static [f64] {
    match m {
        3 => &[120.0, 60.0, 12.0, 1.0],
        5 => &[30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0],
        7 => &[17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0],
        9 => &[
            17643225600.0,
            8821612800.0,
            2075673600.0,
            302702400.0,
            30270240.0,
            2162160.0,
            110880.0,
            3960.0,
            90.0,
            1.0,
        ],
        13 => &[
            64764752532480000.0,
            32382376266240000.0,
            7771770303897600.0,
            1187353796428800.0,
            129060195264000.0,
            10559470521600.0,
            670442572800.0,
            33522128640.0,
            1323241920.0,
            40840800.0,
            960960.0,
            16380.0,
            182.0,
            1.0,
        ],
        _ => unreachable!(),
    }
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a Padé approximant.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch("expm needs a square matrix".into()));
    }
    let ident = DMatrix::<f64>::identity(n, n);
    if n == 0 {
        return Ok(ident);
    }
    let norm = one_norm(a);
    if !norm.is_finite() {
        return Err(Error::InvalidArgument("expm of a non-finite matrix".into()));
    }
    for &(m, theta) in &THETA[..4] {
        if norm <= theta {
            return pade(a, m, &ident);
        }
    }
    let theta13 = THETA[4].1;
    let s = if norm > theta13 {
        (norm / theta13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * 2f64.powi(-s);
    let mut r = pade(&scaled, 13, &ident)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

fn pade(a: &DMatrix<f64>, m: usize, ident: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let b = pade_coefficients(m);
    let a2 = a * a;
    let (u, v) = if m == 13 {
        let a4 = &a2 * &a2;
        let a6 = &a4 * &a2;
        let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
            + &a6 * b[7]
            + &a4 * b[5]
            + &a2 * b[3]
            + ident * b[1];
        let u = a * u_inner;
        let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
            + &a6 * b[6]
            + &a4 * b[4]
            + &a2 * b[2]
            + ident * b[0];
        (u, v)
    } else {
        let mut powers = vec![ident.clone()];
        for _ in 1..=m / 2 {
            let next = powers.last().unwrap() * &a2;
            powers.push(next);
        }
        let mut u_inner = DMatrix::zeros(a.nrows(), a.ncols());
        let mut v = DMatrix::zeros(a.nrows(), a.ncols());
        for (k, p) in powers.iter().enumerate() {
            u_inner += p * b[2 * k + 1];
            v += p * b[2 * k];
        }
        (a * u_inner, v)
    };
    let num = &v + &u;
    let den = &v - &u;
    den.lu()
        .solve(&num)
        .ok_or_else(|| Error::Singular("Padé denominator is singular".into()))
}
