//! SDPA sparse (`.dat-s`) export of the fixed-`α` feasibility problem.
//!
//! Decision vector: the upper triangle of `P` in row-major order, then `β`,
//! then `γ`. Blocks, each required to be positive semidefinite:
//! `-Θ₁`, `P - μI`, `β - μ`, `γ - μ`, `-Θ₂` and, for a Neumann measurement,
//! `Θ₃`. Scalar blocks are written as diagonal blocks of size 1.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use super::{Certificate, ScalarConditions};
use crate::homogenize::{MeasurementKind, ReducedPlant};
use crate::synthesis::ClosedLoopMatrices;
use crate::{Error, Result};

/// Strictness margin `μ` of the positivity blocks.
pub const SDPA_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpaEntry {
    /// 0 for the constant matrix, `k` for the `k`-th variable (1-based).
    pub var: usize,
    /// 1-based.
    pub block: usize,
    /// 1-based, `i <= j`.
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// Problem `min cᵀx  s.t.  Σ_k x_k F_k - F_0 ⪰ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpaProblem {
    pub n_vars: usize,
    /// Negative sizes denote diagonal blocks.
    pub block_sizes: Vec<i64>,
    pub objective: Vec<f64>,
    pub entries: Vec<SdpaEntry>,
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

impl SdpaProblem {
    pub fn n_blocks(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.n_vars);
        let _ = writeln!(out, "{}", self.n_blocks());
        let sizes: Vec<String> = self.block_sizes.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "{}", sizes.join(" "));
        let obj: Vec<String> = self.objective.iter().map(|&v| fmt17(v)).collect();
        let _ = writeln!(out, "{}", obj.join(" "));
        for e in &self.entries {
            let _ = writeln!(out, "{} {} {} {} {}", e.var, e.block, e.i, e.j, fmt17(e.value));
        }
        out
    }

    /// Parses the sparse format, skipping `"` and `*` comment lines and
    /// accepting `,(){}` as separators in the header.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::SdpaFormat(msg.to_string());
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('"') && !l.starts_with('*'));
        let header_tokens = |line: Option<&str>| -> Result<Vec<String>> {
            let line = line.ok_or_else(|| bad("truncated header"))?;
            Ok(line
                .split(|c: char| c.is_whitespace() || ",(){}".contains(c))
                .filter(|t| !t.is_empty())
                .map(str::to_string)
                .collect())
        };
        let first = |tokens: Vec<String>, what: &str| -> Result<String> {
            tokens.into_iter().next().ok_or_else(|| bad(what))
        };
        let n_vars: usize = first(header_tokens(lines.next())?, "missing mDIM")?
            .parse()
            .map_err(|_| bad("mDIM is not an integer"))?;
        let n_blocks: usize = first(header_tokens(lines.next())?, "missing nBLOCK")?
            .parse()
            .map_err(|_| bad("nBLOCK is not an integer"))?;
        let block_sizes = header_tokens(lines.next())?
            .iter()
            .take(n_blocks)
            .map(|t| t.parse::<i64>().map_err(|_| bad("block size is not an integer")))
            .collect::<Result<Vec<_>>>()?;
        if block_sizes.len() != n_blocks || block_sizes.contains(&0) {
            return Err(bad("block sizes do not match nBLOCK"));
        }
        let objective = header_tokens(lines.next())?
            .iter()
            .take(n_vars)
            .map(|t| t.parse::<f64>().map_err(|_| bad("objective entry is not a number")))
            .collect::<Result<Vec<_>>>()?;
        if objective.len() != n_vars {
            return Err(bad("objective row has the wrong length"));
        }
        let mut entries = Vec::new();
        for line in lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 5 {
                return Err(bad(&format!("entry line has {} fields: {line}", t.len())));
            }
            let int = |s: &str| s.parse::<usize>().map_err(|_| bad(&format!("bad index in: {line}")));
            let e = SdpaEntry {
                var: int(t[0])?,
                block: int(t[1])?,
                i: int(t[2])?,
                j: int(t[3])?,
                value: t[4].parse().map_err(|_| bad(&format!("bad value in: {line}")))?,
            };
            if e.var > n_vars || e.block == 0 || e.block > n_blocks {
                return Err(bad(&format!("entry out of range: {line}")));
            }
            let size = block_sizes[e.block - 1].unsigned_abs() as usize;
            let diagonal = block_sizes[e.block - 1] < 0;
            if e.i == 0 || e.i > e.j || e.j > size || (diagonal && e.i != e.j) {
                return Err(bad(&format!("entry outside its block: {line}")));
            }
            entries.push(e);
        }
        Ok(Self {
            n_vars,
            block_sizes,
            objective,
            entries,
        })
    }

    /// Blocks of `Σ_k x_k F_k - F_0` at the point `x` (length `n_vars`).
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        if x.len() != self.n_vars {
            return Err(Error::DimensionMismatch(format!(
                "point has {} entries, problem has {} variables",
                x.len(),
                self.n_vars
            )));
        }
        let mut blocks: Vec<DMatrix<f64>> = self
            .block_sizes
            .iter()
            .map(|&s| {
                let s = s.unsigned_abs() as usize;
                DMatrix::zeros(s, s)
            })
            .collect();
        for e in &self.entries {
            let w = if e.var == 0 { -e.value } else { x[e.var - 1] * e.value };
            let b = &mut blocks[e.block - 1];
            b[(e.i - 1, e.j - 1)] += w;
            if e.i != e.j {
                b[(e.j - 1, e.i - 1)] += w;
            }
        }
        Ok(blocks)
    }
}

/// Number of `P` unknowns for closed-loop dimension `dim`.
fn triangle(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Decision vector of a certificate in the export's variable order.
pub fn certificate_point(cert: &Certificate) -> Vec<f64> {
    let n = cert.p.len();
    let mut x = Vec::with_capacity(triangle(n) + 2);
    for i in 0..n {
        for j in i..n {
            x.push(cert.p[i][j]);
        }
    }
    x.push(cert.beta);
    x.push(cert.gamma);
    x
}

pub fn build_sdpa(model: &ClosedLoopMatrices, reduced: &ReducedPlant, alpha: f64, eps: f64) -> Result<SdpaProblem> {
    let cond = ScalarConditions::new(model, reduced, alpha, eps)?;
    let n = model.dim();
    let n_p = triangle(n);
    let beta_var = n_p + 1;
    let gamma_var = n_p + 2;
    let neumann = model.kind == MeasurementKind::Neumann;
    let mut block_sizes = vec![(n + 1) as i64, n as i64, -1, -1, -1];
    if neumann {
        block_sizes.push(-1);
    }
    let fd = &model.f + DMatrix::<f64>::identity(n, n) * cond.delta;
    let mut entries = Vec::new();
    let mut push_upper = |var: usize, block: usize, m: &DMatrix<f64>| {
        for i in 0..m.nrows() {
            for j in i..m.ncols() {
                let v = m[(i, j)];
                if v != 0.0 {
                    entries.push(SdpaEntry {
                        var,
                        block,
                        i: i + 1,
                        j: j + 1,
                        value: v,
                    });
                }
            }
        }
    };
    // μ on the positivity blocks
    push_upper(0, 2, &(DMatrix::<f64>::identity(n, n) * SDPA_MARGIN));
    push_upper(0, 3, &DMatrix::from_element(1, 1, SDPA_MARGIN));
    push_upper(0, 4, &DMatrix::from_element(1, 1, SDPA_MARGIN));
    let mut var = 0;
    for i in 0..n {
        for j in i..n {
            var += 1;
            let mut e = DMatrix::<f64>::zeros(n, n);
            e[(i, j)] = 1.0;
            e[(j, i)] = 1.0;
            let mut t = DMatrix::<f64>::zeros(n + 1, n + 1);
            t.view_mut((0, 0), (n, n)).copy_from(&(fd.transpose() * &e + &e * &fd));
            let el = &e * &model.lcal;
            t.view_mut((0, n), (n, 1)).copy_from(&el);
            t.view_mut((n, 0), (1, n)).copy_from(&el.transpose());
            push_upper(var, 1, &(-t));
            let mut pe = DMatrix::<f64>::zeros(n, n);
            pe[(i, j)] = 1.0;
            pe[(j, i)] = 1.0;
            push_upper(var, 2, &pe);
        }
    }
    let mut t_beta = DMatrix::<f64>::zeros(n + 1, n + 1);
    t_beta[(n, n)] = 1.0;
    push_upper(beta_var, 1, &t_beta);
    let mut t_gamma = DMatrix::<f64>::zeros(n + 1, n + 1);
    t_gamma.view_mut((0, 0), (n, n)).copy_from(&(&model.g * (-alpha)));
    push_upper(gamma_var, 1, &t_gamma);
    let one = DMatrix::from_element(1, 1, 1.0);
    push_upper(beta_var, 3, &one);
    push_upper(gamma_var, 4, &one);
    // -Θ₂ = -β τ - 2γ r
    push_upper(beta_var, 5, &DMatrix::from_element(1, 1, -cond.tail_weight_at(cond.lambda_next)));
    push_upper(gamma_var, 5, &DMatrix::from_element(1, 1, -2.0 * cond.rate_at(cond.lambda_next)));
    if neumann {
        // Θ₃ = Θ₃(1, 0) β + Θ₃(0, 1) γ, affine with no constant
        let b3 = cond.theta3(1.0, 0.0).unwrap_or(0.0);
        let g3 = cond.theta3(0.0, 1.0).unwrap_or(0.0);
        push_upper(beta_var, 6, &DMatrix::from_element(1, 1, b3));
        push_upper(gamma_var, 6, &DMatrix::from_element(1, 1, g3));
    }
    entries.sort_by_key(|e| (e.var, e.block, e.i, e.j));
    Ok(SdpaProblem {
        n_vars: n_p + 2,
        block_sizes,
        objective: vec![0.0; n_p + 2],
        entries,
    })
}

/// Builds the problem and writes it to `path`.
pub fn export_sdpa(
    model: &ClosedLoopMatrices,
    reduced: &ReducedPlant,
    alpha: f64,
    eps: f64,
    path: &Path,
) -> Result<SdpaProblem> {
    let problem = build_sdpa(model, reduced, alpha, eps)?;
    std::fs::write(path, problem.to_text())?;
    Ok(problem)
}
