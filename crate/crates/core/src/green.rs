//! Green (potential) matrices of finite transient chains, their recognition,
//! and the stability checks: Hadamard powers, `G + c` kernels, restriction.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::betaperm::ScanConfig;
use crate::defaults::ALGEBRAIC_TOL;
use crate::error::{Error, Result};
use crate::idcheck::{id_verdict_with, IdVerdict, IdWitness};
use crate::matcore::{condition_estimate, eigenvalues, invert_matrix, is_m_matrix, MMatrixWitness};
use crate::matrix::KernelMatrix;
use crate::par;
use crate::verdict::{Outcome, Verdict};

/// Sub-Markov one-step kernel of a finite chain with spectral radius below 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TransientChain {
    q: DMatrix<f64>,
}

impl TransientChain {
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        if q.nrows() == 0 || q.nrows() != q.ncols() {
            return Err(Error::Shape {
                rows: q.nrows(),
                cols: q.ncols(),
            });
        }
        for i in 0..q.nrows() {
            for j in 0..q.ncols() {
                let value = q[(i, j)];
                if !value.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                if value < 0.0 {
                    return Err(Error::NegativeEntry { row: i, col: j, value });
                }
            }
        }
        let radius = spectral_radius(&q)?;
        if radius >= 1.0 - ALGEBRAIC_TOL {
            return Err(Error::NotTransient { radius });
        }
        Ok(Self { q })
    }

    pub fn from_kernel(q: &KernelMatrix) -> Result<Self> {
        Self::new(q.matrix().clone())
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.q
    }
}

fn spectral_radius(q: &DMatrix<f64>) -> Result<f64> {
    let k = KernelMatrix::new(q.clone())?;
    Ok(eigenvalues(&k)?
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// Which margins of a random chain kernel are made substochastic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Killing {
    /// Row sums ≤ the bound (the chain is killed at rate 1 − row sum).
    Rows,
    /// Row and column sums ≤ the bound, so counting measure is excessive for
    /// the chain as well as for its dual.
    RowsAndColumns,
}

/// Random sub-Markov kernel: uniform entries, rescaled so that the chosen
/// margins are at most `max_sum` (< 1).
pub fn random_chain<R: Rng + ?Sized>(
    n: usize,
    max_sum: f64,
    killing: Killing,
    rng: &mut R,
) -> Result<TransientChain> {
    if !(max_sum > 0.0 && max_sum < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "margin bound must lie in (0, 1), got {max_sum}"
        )));
    }
    let mut q = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>());
    match killing {
        Killing::Rows => {
            for i in 0..n {
                let target = max_sum * rng.random_range(0.2..=1.0);
                let s = q.row(i).sum();
                q.row_mut(i).scale_mut(target / s);
            }
        }
        Killing::RowsAndColumns => {
            let row_max = (0..n).map(|i| q.row(i).sum()).fold(0.0, f64::max);
            let col_max = (0..n).map(|j| q.column(j).sum()).fold(0.0, f64::max);
            let target = max_sum * rng.random_range(0.2..=1.0);
            q.scale_mut(target / row_max.max(col_max));
        }
    }
    TransientChain::new(q)
}

/// Potential matrix `Σ_k Q^k = (I − Q)⁻¹`.
pub fn green_from_chain(chain: &TransientChain) -> Result<KernelMatrix> {
    let n = chain.dim();
    let m = DMatrix::identity(n, n) - chain.kernel();
    KernelMatrix::new(invert_matrix(&m)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GreenWitness {
    NegativeEntry { row: usize, col: usize, value: f64 },
    Singular { condition: f64 },
    /// `G⁻¹` has a positive off-diagonal entry.
    InverseOffDiagonal { row: usize, col: usize, value: f64 },
}

/// Verdict of the Green recognizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum GreenVerdict {
    /// `G⁻¹` is a row diagonally dominant M-matrix.
    Holds,
    /// `G⁻¹` is an M-matrix but not row diagonally dominant; `D G D` is a
    /// Green matrix for `D = diag(factor)⁻¹`.
    HoldsUpToDensityFactor {
        factor: Vec<f64>,
        row_sum: MMatrixWitness,
    },
    Fails { witness: GreenWitness },
    Inconclusive { reason: String },
}

impl GreenVerdict {
    pub fn holds(&self) -> bool {
        matches!(self, GreenVerdict::Holds)
    }

    /// Only an exact Green matrix counts as holding.
    pub fn outcome(&self) -> Outcome {
        match self {
            GreenVerdict::Holds => Outcome::Holds,
            GreenVerdict::HoldsUpToDensityFactor { .. } | GreenVerdict::Fails { .. } => {
                Outcome::Fails
            }
            GreenVerdict::Inconclusive { .. } => Outcome::Inconclusive,
        }
    }
}

/// Recognizes Green matrices of transient chains: `G ≥ 0`, `G` nonsingular
/// and `G⁻¹` a row diagonally dominant M-matrix. When only the row sums
/// fail, looks for a positive `d` with `(d⁻¹Gd⁻¹)⁻¹ = dG⁻¹d` row diagonally
/// dominant, i.e. `G⁻¹d ≥ 0`; `d = G·1` solves this exactly.
pub fn is_green(g: &KernelMatrix) -> GreenVerdict {
    let m = g.matrix();
    let tol = ALGEBRAIC_TOL * g.max_abs().max(1.0);
    let n = g.dim();
    for i in 0..n {
        for j in 0..n {
            if m[(i, j)] < -tol {
                return GreenVerdict::Fails {
                    witness: GreenWitness::NegativeEntry {
                        row: i,
                        col: j,
                        value: m[(i, j)],
                    },
                };
            }
        }
    }
    let inv = match invert_matrix(m) {
        Ok(inv) => inv,
        Err(_) => {
            return GreenVerdict::Fails {
                witness: GreenWitness::Singular {
                    condition: condition_estimate(m),
                },
            }
        }
    };
    let report = is_m_matrix(&inv);
    match report.off_diagonal {
        Verdict::Holds => {}
        Verdict::Fails {
            witness: MMatrixWitness::Entry { row, col, value },
        } => {
            return GreenVerdict::Fails {
                witness: GreenWitness::InverseOffDiagonal { row, col, value },
            }
        }
        other => return GreenVerdict::Inconclusive {
            reason: format!("unexpected M-matrix screen result {other:?}"),
        },
    }
    let row_sum = match report.diagonally_dominant {
        Verdict::Holds => return GreenVerdict::Holds,
        Verdict::Fails { witness } => witness,
        Verdict::Inconclusive { reason } => return GreenVerdict::Inconclusive { reason },
    };
    let d = m * DVector::from_element(n, 1.0);
    if d.iter().any(|&x| x <= 0.0) {
        return GreenVerdict::Inconclusive {
            reason: "no positive density factor: G·1 has a nonpositive entry".into(),
        };
    }
    let scaled = DMatrix::from_fn(n, n, |i, j| d[i] * inv[(i, j)] * d[j]);
    if is_m_matrix(&scaled).diagonally_dominant.holds() {
        GreenVerdict::HoldsUpToDensityFactor {
            factor: d.iter().copied().collect(),
            row_sum,
        }
    } else {
        GreenVerdict::Inconclusive {
            reason: "density factor G·1 failed verification".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HadamardPower {
    pub matrix: KernelMatrix,
    pub green: GreenVerdict,
}

/// Entrywise power `G(i,j)^β` for `β ≥ 1`, with the Green verdict of the result.
pub fn hadamard_power(g: &KernelMatrix, beta: f64) -> Result<HadamardPower> {
    if !(beta.is_finite() && beta >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "Hadamard exponent must be at least 1, got {beta}"
        )));
    }
    let m = g.matrix();
    for i in 0..g.dim() {
        for j in 0..g.dim() {
            if m[(i, j)] < 0.0 {
                return Err(Error::NegativeEntry {
                    row: i,
                    col: j,
                    value: m[(i, j)],
                });
            }
        }
    }
    let powered = KernelMatrix::with_symmetry(m.map(|x| x.powf(beta)), g.is_symmetric())?;
    let green = is_green(&powered);
    Ok(HadamardPower {
        matrix: powered,
        green,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftedKernelVerdict {
    pub c: f64,
    pub id: IdVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlusConstantWitness {
    pub c: f64,
    pub witness: IdWitness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlusConstantReport {
    pub verdict: Verdict<PlusConstantWitness>,
    pub per_c: Vec<ShiftedKernelVerdict>,
}

/// Runs the infinite-divisibility verdict (index 2) on `G + c` for each `c`;
/// holds iff every shifted kernel holds. `scan` supplies the β grid and
/// multiset bound for kernels that need the β-positivity stage.
pub fn plus_constant_check(
    g: &KernelMatrix,
    c_grid: &[f64],
    scan: &ScanConfig,
) -> Result<PlusConstantReport> {
    if c_grid.is_empty() {
        return Err(Error::InvalidArgument("empty c grid".into()));
    }
    if let Some(c) = c_grid.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
        return Err(Error::InvalidArgument(format!("c must be positive, got {c}")));
    }
    scan.validate()?;
    let per_c = par::map_slice(c_grid, |&c| -> Result<ShiftedKernelVerdict> {
        Ok(ShiftedKernelVerdict {
            c,
            id: id_verdict_with(&g.plus_constant(c), 2.0, scan)?,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let verdict = if let Some(bad) = per_c.iter().find(|v| v.id.outcome() == Outcome::Fails) {
        Verdict::fails(PlusConstantWitness {
            c: bad.c,
            witness: bad
                .id
                .verdict
                .witness()
                .cloned()
                .expect("failing verdict carries a witness"),
        })
    } else if let Some(open) = per_c
        .iter()
        .find(|v| v.id.outcome() == Outcome::Inconclusive)
    {
        Verdict::inconclusive(format!("G + {} is undecided over the scanned range", open.c))
    } else {
        Verdict::Holds
    };
    Ok(PlusConstantReport { verdict, per_c })
}

/// Principal submatrix on `subset` (distinct, in-range indices).
pub fn restriction(g: &KernelMatrix, subset: &[usize]) -> Result<KernelMatrix> {
    if subset.is_empty() {
        return Err(Error::InvalidArgument("empty index subset".into()));
    }
    let mut seen = vec![false; g.dim()];
    for &k in subset {
        if k >= g.dim() {
            return Err(Error::IndexOutOfRange {
                index: k,
                dim: g.dim(),
            });
        }
        if std::mem::replace(&mut seen[k], true) {
            return Err(Error::InvalidArgument(format!("index {k} repeated")));
        }
    }
    KernelMatrix::with_symmetry(g.submatrix(subset)?, g.is_symmetric())
}
