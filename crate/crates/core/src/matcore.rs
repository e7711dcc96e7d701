//! Dense matrix primitives: inversion, resolvents, eigenvalue screens and
//! M-matrix predicates.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::defaults::{ALGEBRAIC_TOL, CONDITION_CAP, EIGEN_TOL, IMAG_CUTOFF};
use crate::error::{Error, Result};
use crate::matrix::{norm_inf, KernelMatrix};
use crate::verdict::Verdict;

const SCHUR_MAX_ITER: usize = 10_000;

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Inverse of a dense square matrix, refusing matrices whose ∞-norm
/// condition estimate exceeds [`CONDITION_CAP`].
pub fn invert_matrix(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let lu = m.clone().lu();
    let inv = lu.try_inverse().ok_or(Error::IllConditioned {
        condition: f64::INFINITY,
    })?;
    let condition = norm_inf(m) * norm_inf(&inv);
    if !condition.is_finite() || condition > CONDITION_CAP {
        return Err(Error::IllConditioned { condition });
    }
    Ok(inv)
}

/// `‖G‖∞ · ‖G⁻¹‖∞`, infinite for singular input.
pub fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    match m.clone().lu().try_inverse() {
        Some(inv) => norm_inf(m) * norm_inf(&inv),
        None => f64::INFINITY,
    }
}

pub fn invert(g: &KernelMatrix) -> Result<KernelMatrix> {
    let mut h = invert_matrix(g.matrix())?;
    if g.is_symmetric() {
        symmetrize(&mut h);
    }
    KernelMatrix::with_symmetry(h, g.is_symmetric())
}

pub fn determinant(m: &DMatrix<f64>) -> f64 {
    m.clone().lu().determinant()
}

/// The α-resolvent `(I + αG)⁻¹G`. At α = 0 the input is returned unchanged.
pub fn resolvent(g: &KernelMatrix, alpha: f64) -> Result<KernelMatrix> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "resolvent parameter must be finite and nonnegative, got {alpha}"
        )));
    }
    if alpha == 0.0 {
        return Ok(g.clone());
    }
    let mut shifted = g.matrix() * alpha;
    for i in 0..g.dim() {
        shifted[(i, i)] += 1.0;
    }
    let condition = condition_estimate(&shifted);
    if !condition.is_finite() || condition > CONDITION_CAP {
        return Err(Error::IllConditioned { condition });
    }
    let mut out = shifted
        .lu()
        .solve(g.matrix())
        .ok_or(Error::IllConditioned {
            condition: f64::INFINITY,
        })?;
    if g.is_symmetric() {
        symmetrize(&mut out);
    }
    KernelMatrix::with_symmetry(out, g.is_symmetric())
}

/// Truncated Neumann expansion `Σ_{k≤K} (−ε)^k M^{k+1}` of the ε-resolvent
/// of `M`; converges to `resolvent(M, ε)` when `ε‖M‖ < 1`.
pub fn resolvent_series(m: &DMatrix<f64>, eps: f64, terms: usize) -> DMatrix<f64> {
    let mut power = m.clone();
    let mut sum = m.clone();
    let mut coeff = 1.0;
    for _ in 1..=terms {
        power = &power * m;
        coeff *= -eps;
        sum += &power * coeff;
    }
    sum
}

/// Resolvents of one base kernel on an increasing α grid.
#[derive(Debug, Clone)]
pub struct ResolventFamily {
    base: KernelMatrix,
    alphas: Vec<f64>,
    members: Vec<KernelMatrix>,
}

impl ResolventFamily {
    pub fn new(base: &KernelMatrix, alphas: &[f64]) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::InvalidArgument("empty α grid".into()));
        }
        if alphas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("α grid must be strictly increasing".into()));
        }
        let members = alphas
            .iter()
            .map(|&a| resolvent(base, a))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            base: base.clone(),
            alphas: alphas.to_vec(),
            members,
        })
    }

    pub fn base(&self) -> &KernelMatrix {
        &self.base
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn members(&self) -> &[KernelMatrix] {
        &self.members
    }

    /// Largest entrywise gap between consecutive members and the shift
    /// identity `G_{α+ε} = (I + εG_α)⁻¹ G_α`.
    pub fn shift_identity_gap(&self) -> Result<f64> {
        let mut worst = 0.0_f64;
        for (k, w) in self.alphas.windows(2).enumerate() {
            let shifted = resolvent(&self.members[k], w[1] - w[0])?;
            let gap = (shifted.matrix() - self.members[k + 1].matrix()).amax();
            worst = worst.max(gap);
        }
        Ok(worst)
    }
}

/// All eigenvalues of `G` (real Schur form; symmetric solver when flagged).
pub fn eigenvalues(g: &KernelMatrix) -> Result<Vec<Complex<f64>>> {
    if g.is_symmetric() {
        return Ok(symmetric_eigenvalues(g.matrix())
            .into_iter()
            .map(|x| Complex::new(x, 0.0))
            .collect());
    }
    let schur = g
        .matrix()
        .clone()
        .try_schur(f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or(Error::EigenNonConvergence)?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Eigenvalues of the symmetric part, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut v: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenWitness {
    pub re: f64,
    pub im: f64,
}

/// Holds iff every (numerically) real eigenvalue is nonnegative.
pub fn real_eigen_nonneg(g: &KernelMatrix) -> Verdict<EigenWitness> {
    let values = match eigenvalues(g) {
        Ok(v) => v,
        Err(e) => return Verdict::inconclusive(e.to_string()),
    };
    let scale = g.norm_inf();
    let tol = EIGEN_TOL * scale;
    let offending = values
        .iter()
        .filter(|z| z.im.abs() <= IMAG_CUTOFF * scale)
        .filter(|z| z.re < -tol)
        .min_by(|a, b| a.re.total_cmp(&b.re));
    match offending {
        Some(z) => Verdict::fails(EigenWitness { re: z.re, im: z.im }),
        None => Verdict::Holds,
    }
}

/// Smallest eigenvalue of a symmetric kernel.
pub fn min_eigenvalue(g: &KernelMatrix) -> f64 {
    symmetric_eigenvalues(g.matrix())[0]
}

/// Positive-semidefinite screen: smallest eigenvalue ≥ −1e−9·‖G‖.
pub fn require_psd(g: &KernelMatrix) -> Result<()> {
    if !g.is_symmetric() {
        return Err(Error::InvalidArgument("kernel must be symmetric".into()));
    }
    let min = min_eigenvalue(g);
    if min < -EIGEN_TOL * g.norm_inf() {
        return Err(Error::NotPositiveSemidefinite {
            min_eigenvalue: min,
        });
    }
    Ok(())
}

/// Positive-definite screen: smallest eigenvalue > 1e−9·‖G‖.
pub fn require_pd(g: &KernelMatrix) -> Result<()> {
    if !g.is_symmetric() {
        return Err(Error::InvalidArgument("kernel must be symmetric".into()));
    }
    let min = min_eigenvalue(g);
    if min <= EIGEN_TOL * g.norm_inf() {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MMatrixWitness {
    Entry { row: usize, col: usize, value: f64 },
    RowSum { row: usize, sum: f64 },
}

/// Both M-matrix sub-verdicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MMatrixReport {
    /// Off-diagonal entries nonpositive.
    pub off_diagonal: Verdict<MMatrixWitness>,
    /// Off-diagonal entries nonpositive and every row sum nonnegative.
    pub diagonally_dominant: Verdict<MMatrixWitness>,
}

pub fn is_m_matrix(m: &DMatrix<f64>) -> MMatrixReport {
    let n = m.nrows();
    let tol = ALGEBRAIC_TOL * m.amax().max(1.0);
    let mut off_diagonal = Verdict::Holds;
    'scan: for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)] > tol {
                off_diagonal = Verdict::fails(MMatrixWitness::Entry {
                    row: i,
                    col: j,
                    value: m[(i, j)],
                });
                break 'scan;
            }
        }
    }
    let diagonally_dominant = if off_diagonal.holds() {
        (0..n)
            .map(|i| (i, m.row(i).sum()))
            .find(|&(_, sum)| sum < -tol)
            .map_or(Verdict::Holds, |(row, sum)| {
                Verdict::fails(MMatrixWitness::RowSum { row, sum })
            })
    } else {
        off_diagonal.clone()
    };
    MMatrixReport {
        off_diagonal,
        diagonally_dominant,
    }
}
