//! Infinite-divisibility verdicts for squared Gaussian and permanental
//! vectors.
//!
//! Symmetric positive definite kernels are decided exactly: `η²` is
//! infinitely divisible iff some signature `σ` makes `σG⁻¹σ` an M-matrix.
//! Nonsymmetric kernels go through a sufficient inverse-M-matrix check, then
//! a range-bounded β-positivity scan, and are otherwise inconclusive.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::betaperm::{
    beta_positivity_scan, id_necessary_battery, BatteryWitness, PositivityReport,
    PositivityWitness, ScanConfig,
};
use crate::defaults::{ALGEBRAIC_TOL, ZERO_TOL};
use crate::error::{Error, Result};
use crate::matcore::{
    invert, invert_matrix, is_m_matrix, real_eigen_nonneg, require_pd, require_psd, EigenWitness,
    MMatrixWitness,
};
use crate::matrix::{KernelMatrix, Signature};
use crate::verdict::{Outcome, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdMethod {
    BapatExact,
    BatteryNecessary,
    InverseMSufficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum IdWitness {
    /// Sign constraints from `G⁻¹` along this cycle cannot all be met.
    OddCycle { cycle: Vec<usize> },
    /// `σG⁻¹σ` still has a positive off-diagonal entry.
    MMatrix(MMatrixWitness),
    NegativeEigenvalue(EigenWitness),
    SignCondition(BatteryWitness),
    NegativePermanent(PositivityWitness),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdVerdict {
    pub verdict: Verdict<IdWitness>,
    pub method: IdMethod,
    pub signature: Option<Signature>,
    /// Present when the β-positivity scan stage ran.
    pub scan: Option<PositivityReport>,
}

impl IdVerdict {
    pub fn outcome(&self) -> Outcome {
        self.verdict.outcome()
    }

    fn failing(method: IdMethod, witness: IdWitness) -> Self {
        Self {
            verdict: Verdict::fails(witness),
            method,
            signature: None,
            scan: None,
        }
    }
}

fn zero_threshold(m: &DMatrix<f64>) -> f64 {
    ZERO_TOL * m.amax()
}

/// Two-colours the graph of "significant" off-diagonal entries so that
/// `σ(i)σ(j) = demand(i, j)` on every edge. Roots of each component get +1.
/// On conflict returns the cycle closed by the offending edge.
fn two_colour(
    n: usize,
    is_edge: impl Fn(usize, usize) -> bool,
    demand: impl Fn(usize, usize) -> i8,
) -> std::result::Result<Vec<i8>, (usize, usize, Vec<usize>)> {
    let mut sign = vec![0i8; n];
    let mut parent = vec![usize::MAX; n];
    let mut depth = vec![0usize; n];
    for root in 0..n {
        if sign[root] != 0 {
            continue;
        }
        sign[root] = 1;
        let mut queue = VecDeque::from([root]);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                if j == i || !is_edge(i, j) {
                    continue;
                }
                let want = sign[i] * demand(i, j);
                if sign[j] == 0 {
                    sign[j] = want;
                    parent[j] = i;
                    depth[j] = depth[i] + 1;
                    queue.push_back(j);
                } else if sign[j] != want {
                    return Err((i, j, tree_cycle(i, j, &parent, &depth)));
                }
            }
        }
    }
    Ok(sign)
}

fn tree_cycle(i: usize, j: usize, parent: &[usize], depth: &[usize]) -> Vec<usize> {
    let (mut a, mut b) = (i, j);
    let (mut left, mut right) = (vec![a], vec![b]);
    while depth[a] > depth[b] {
        a = parent[a];
        left.push(a);
    }
    while depth[b] > depth[a] {
        b = parent[b];
        right.push(b);
    }
    while a != b {
        a = parent[a];
        b = parent[b];
        left.push(a);
        right.push(b);
    }
    right.pop();
    right.reverse();
    left.extend(right);
    left
}

/// Signature `σ` with `σ(i)G(i,j)σ(j) ≥ 0`, built by propagating signs along
/// nonzero entries (zero entries impose nothing; each component is rooted
/// at its smallest index with +1).
pub fn construct_signature(g: &KernelMatrix) -> Result<Signature> {
    let n = g.dim();
    let m = g.matrix();
    let scale = g.max_abs();
    let triple_tol = ALGEBRAIC_TOL * scale.powi(3);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if i == j || j == k || i == k {
                    continue;
                }
                let product = m[(j, i)] * m[(i, k)] * m[(k, j)];
                if product < -triple_tol {
                    return Err(Error::TripleCondition { i, j, k, product });
                }
            }
        }
    }
    let zero = zero_threshold(m);
    let dominant = |i: usize, j: usize| {
        if m[(i, j)].abs() >= m[(j, i)].abs() {
            m[(i, j)]
        } else {
            m[(j, i)]
        }
    };
    let signs = two_colour(
        n,
        |i, j| dominant(i, j).abs() > zero,
        |i, j| if dominant(i, j) > 0.0 { 1 } else { -1 },
    )
    .map_err(|(i, j, _)| Error::SignInconsistent {
        i,
        j,
        near_zero: near_zero_entries(m),
    })?;
    let sigma = Signature::new(signs)?;
    let floor = -ALGEBRAIC_TOL * scale;
    for i in 0..n {
        for j in 0..n {
            let v = f64::from(sigma.get(i)) * m[(i, j)] * f64::from(sigma.get(j));
            if v < floor {
                return Err(Error::SignInconsistent {
                    i,
                    j,
                    near_zero: near_zero_entries(m),
                });
            }
        }
    }
    Ok(sigma)
}

fn near_zero_entries(m: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let cut = 1e-6 * m.amax();
    let mut out = Vec::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j && m[(i, j)] != 0.0 && m[(i, j)].abs() <= cut {
                out.push((i, j));
            }
        }
    }
    out
}

/// Exact test for symmetric positive definite kernels: searches for `σ`
/// making every off-diagonal entry of `σG⁻¹σ` nonpositive.
pub fn bapat_test(g: &KernelMatrix) -> Result<IdVerdict> {
    require_pd(g)?;
    let h = invert(g)?;
    let hm = h.matrix();
    let zero = zero_threshold(hm);
    let colouring = two_colour(
        g.dim(),
        |i, j| hm[(i, j)].abs() > zero,
        |i, j| if hm[(i, j)] < 0.0 { 1 } else { -1 },
    );
    let signs = match colouring {
        Ok(s) => s,
        Err((_, _, cycle)) => {
            return Ok(IdVerdict::failing(
                IdMethod::BapatExact,
                IdWitness::OddCycle { cycle },
            ))
        }
    };
    let sigma = Signature::new(signs)?;
    let conj = h.conjugate(&sigma)?;
    let report = is_m_matrix(conj.matrix());
    Ok(match report.off_diagonal {
        Verdict::Holds => IdVerdict {
            verdict: Verdict::Holds,
            method: IdMethod::BapatExact,
            signature: Some(sigma),
            scan: None,
        },
        Verdict::Fails { witness } => {
            IdVerdict::failing(IdMethod::BapatExact, IdWitness::MMatrix(witness))
        }
        Verdict::Inconclusive { reason } => IdVerdict {
            verdict: Verdict::Inconclusive { reason },
            method: IdMethod::BapatExact,
            signature: None,
            scan: None,
        },
    })
}

/// Infinite-divisibility verdict for the permanental vector with kernel `G`.
///
/// Symmetric positive definite kernels are decided exactly by
/// [`bapat_test`]. For every other kernel the necessary screens (real
/// eigenvalues nonnegative, pairwise and triple sign conditions) run first;
/// the kernel then holds if `σGσ` is the inverse of an M-matrix for the
/// constructed `σ`, fails if the β-positivity scan finds a negative
/// β-permanent (grid = `scan` plus `beta`), and is otherwise inconclusive
/// over the scanned range.
pub fn id_verdict_with(g: &KernelMatrix, beta: f64, scan: &ScanConfig) -> Result<IdVerdict> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidArgument(format!("index β must be positive, got {beta}")));
    }
    if g.is_symmetric() && require_pd(g).is_ok() {
        return bapat_test(g);
    }
    match real_eigen_nonneg(g) {
        Verdict::Holds => {}
        Verdict::Fails { witness } => {
            return Ok(IdVerdict::failing(
                IdMethod::BatteryNecessary,
                IdWitness::NegativeEigenvalue(witness),
            ))
        }
        Verdict::Inconclusive { reason } => {
            return Ok(IdVerdict {
                verdict: Verdict::Inconclusive { reason },
                method: IdMethod::BatteryNecessary,
                signature: None,
                scan: None,
            })
        }
    }
    match id_necessary_battery(g) {
        Verdict::Holds => {}
        Verdict::Fails { witness } => {
            return Ok(IdVerdict::failing(
                IdMethod::BatteryNecessary,
                IdWitness::SignCondition(witness),
            ))
        }
        Verdict::Inconclusive { reason } => {
            return Ok(IdVerdict {
                verdict: Verdict::Inconclusive { reason },
                method: IdMethod::BatteryNecessary,
                signature: None,
                scan: None,
            })
        }
    }
    if let Ok(sigma) = construct_signature(g) {
        let conj = g.conjugate(&sigma)?;
        if let Ok(inv) = invert_matrix(conj.matrix()) {
            if is_m_matrix(&inv).off_diagonal.holds() {
                return Ok(IdVerdict {
                    verdict: Verdict::Holds,
                    method: IdMethod::InverseMSufficient,
                    signature: Some(sigma),
                    scan: None,
                });
            }
        }
    }
    let mut config = scan.clone();
    if !config.betas.contains(&beta) {
        config.betas.push(beta);
        config.betas.sort_by(f64::total_cmp);
    }
    let report = beta_positivity_scan(g, &config)?;
    let verdict = match &report.witness {
        Some(w) => Verdict::fails(IdWitness::NegativePermanent(w.clone())),
        None => Verdict::inconclusive(format!(
            "no negative β-permanent over {} scanned (α, β, multiset) triples",
            report.scanned
        )),
    };
    Ok(IdVerdict {
        verdict,
        method: IdMethod::BatteryNecessary,
        signature: None,
        scan: Some(report),
    })
}

pub fn id_verdict(g: &KernelMatrix, beta: f64) -> Result<IdVerdict> {
    id_verdict_with(g, beta, &ScanConfig::default())
}

/// Symmetric 2×2 kernel `C̄` with the same law for the squared pair:
/// same diagonal, off-diagonal `√(C(1,2)C(2,1))`. Symmetric input is
/// returned unchanged.
pub fn symmetrize_pair_kernel(c: &KernelMatrix) -> Result<KernelMatrix> {
    if c.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: c.dim(),
        });
    }
    if c.get(0, 0) <= 0.0 || c.get(1, 1) <= 0.0 {
        return Err(Error::InvalidArgument(
            "pair kernel needs a positive diagonal".into(),
        ));
    }
    if c.is_symmetric() {
        return Ok(c.clone());
    }
    let product = c.get(0, 1) * c.get(1, 0);
    if product < 0.0 {
        return Err(Error::NegativeCrossProduct { product });
    }
    let off = product.sqrt();
    KernelMatrix::with_symmetry(
        DMatrix::from_row_slice(2, 2, &[c.get(0, 0), off, off, c.get(1, 1)]),
        true,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ShiftedPairWitness {
    NegativeCovariance { covariance: f64 },
    CovarianceAboveVarianceProduct { covariance: f64, bound: f64 },
}

/// Criterion for `((η_x + r)², (η_y + r)²)` to be infinitely divisible for
/// every `r`: `E(η_xη_y) ≥ 0` and `E(η_xη_y) ≤ E(η_x²)E(η_y²)`, applied
/// exactly as printed (a product of variances, not of standard deviations).
pub fn shifted_pair_id_test(
    var_x: f64,
    covariance: f64,
    var_y: f64,
) -> Result<Verdict<ShiftedPairWitness>> {
    if !(var_x.is_finite() && var_x > 0.0 && var_y.is_finite() && var_y > 0.0) {
        return Err(Error::InvalidArgument("variances must be positive".into()));
    }
    if !covariance.is_finite() {
        return Err(Error::InvalidArgument("covariance must be finite".into()));
    }
    let pair = KernelMatrix::from_rows(&[vec![var_x, covariance], vec![covariance, var_y]])?;
    require_psd(&pair)?;
    if covariance < 0.0 {
        return Ok(Verdict::fails(ShiftedPairWitness::NegativeCovariance { covariance }));
    }
    let bound = var_x * var_y;
    if covariance > bound {
        return Ok(Verdict::fails(
            ShiftedPairWitness::CovarianceAboveVarianceProduct { covariance, bound },
        ));
    }
    Ok(Verdict::Holds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::resolvent;

    fn km(rows: &[&[f64]]) -> KernelMatrix {
        KernelMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn tri3() -> KernelMatrix {
        km(&[&[1.0, 0.6, 0.0], &[0.6, 1.0, 0.6], &[0.0, 0.6, 1.0]])
    }

    #[test]
    fn signature_of_nonnegative_kernel_is_positive() {
        let g = km(&[&[1.0, 0.2, 0.0], &[0.2, 1.0, 0.3], &[0.0, 0.3, 1.0]]);
        assert_eq!(construct_signature(&g).unwrap(), Signature::all_positive(3));
    }

    #[test]
    fn signature_recovers_conjugation() {
        let g = km(&[&[2.0, 0.5, 0.3, 0.1], &[0.5, 2.0, 0.4, 0.2], &[0.3, 0.4, 2.0, 0.6], &[0.1, 0.2, 0.6, 2.0]]);
        for mask in 0..16u64 {
            let s0 = Signature::from_mask(4, mask);
            let found = construct_signature(&g.conjugate(&s0).unwrap()).unwrap();
            assert!(found.equivalent(&s0), "mask {mask}");
        }
    }

    #[test]
    fn signature_triple_violation() {
        let g = km(&[&[3.0, 1.0, -1.0], &[1.0, 3.0, 1.0], &[-1.0, 1.0, 3.0]]);
        match construct_signature(&g).unwrap_err() {
            Error::TripleCondition { i, j, k, product } => {
                assert_eq!((i, j, k), (0, 1, 2));
                assert_eq!(product, -1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn signature_handles_components_joined_late() {
        // 0 and 1 only meet through 2, with opposite signs
        let g = km(&[&[1.0, 0.0, 0.5], &[0.0, 1.0, -0.5], &[0.5, -0.5, 1.0]]);
        let s = construct_signature(&g).unwrap();
        assert_eq!(s.signs(), &[1, -1, 1]);
    }

    #[test]
    fn bapat_examples() {
        let v = bapat_test(&km(&[&[1.0, 0.5], &[0.5, 1.0]])).unwrap();
        assert!(v.verdict.holds());
        assert_eq!(v.signature, Some(Signature::all_positive(2)));
        assert_eq!(v.method, IdMethod::BapatExact);

        assert!(bapat_test(&KernelMatrix::diagonal(&[1.0, 3.0, 0.2]).unwrap())
            .unwrap()
            .verdict
            .holds());

        let v = bapat_test(&tri3()).unwrap();
        assert!(v.verdict.is_fails());
        match v.verdict.witness().unwrap() {
            IdWitness::OddCycle { cycle } => {
                let mut c = cycle.clone();
                c.sort();
                assert_eq!(c, vec![0, 1, 2]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tri3_fails_for_every_signature() {
        let g = tri3();
        let h = invert(&g).unwrap();
        for mask in 0..8u64 {
            let s = Signature::from_mask(3, mask);
            let r = is_m_matrix(h.conjugate(&s).unwrap().matrix());
            assert!(r.off_diagonal.is_fails(), "mask {mask}");
        }
    }

    #[test]
    fn bapat_requires_positive_definite() {
        let g = km(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert!(matches!(bapat_test(&g).unwrap_err(), Error::NotPositiveDefinite { .. }));
    }

    #[test]
    fn id_verdict_examples() {
        let v = id_verdict(&KernelMatrix::identity(3), 0.7).unwrap();
        assert!(v.verdict.holds());
        let v = id_verdict(&tri3(), 2.0).unwrap();
        assert_eq!(v.outcome(), Outcome::Fails);
        assert_eq!(v.method, IdMethod::BapatExact);
        assert!(id_verdict(&tri3(), 0.0).is_err());
    }

    #[test]
    fn id_verdict_nonsymmetric_routes() {
        // inverse of a nonsymmetric nonsingular M-matrix
        let m = DMatrix::from_row_slice(3, 3, &[2.0, -0.5, -0.3, -0.2, 1.5, -0.6, -0.4, -0.1, 1.0]);
        let g = KernelMatrix::new(invert_matrix(&m).unwrap()).unwrap();
        assert!(!g.is_symmetric());
        let v = id_verdict(&g, 2.0).unwrap();
        assert!(v.verdict.holds());
        assert_eq!(v.method, IdMethod::InverseMSufficient);

        // pairwise sign condition broken
        let g = km(&[&[1.0, 1.0], &[-1.0, 1.0]]);
        let v = id_verdict(&g, 2.0).unwrap();
        assert_eq!(v.method, IdMethod::BatteryNecessary);
        assert!(matches!(
            v.verdict.witness(),
            Some(IdWitness::SignCondition(BatteryWitness::Pair { .. }))
        ));

        let g = km(&[&[-1.0, 0.0], &[0.0, 1.0]]);
        assert!(matches!(
            id_verdict(&g, 2.0).unwrap().verdict.witness(),
            Some(IdWitness::NegativeEigenvalue(_))
        ));
    }

    #[test]
    fn symmetrize_pair_examples() {
        let c = km(&[&[1.0, 0.3], &[0.3, 2.0]]);
        assert_eq!(symmetrize_pair_kernel(&c).unwrap(), c);
        let c = km(&[&[1.0, 2.0], &[0.5, 1.0]]);
        let cbar = symmetrize_pair_kernel(&c).unwrap();
        assert_eq!(cbar.rows(), vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        // |I + xC| = |I + xC̄| at x = diag(1, 2)
        let x = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0]));
        let i2 = DMatrix::<f64>::identity(2, 2);
        let d1 = (&i2 + &x * c.matrix()).determinant();
        let d2 = (&i2 + &x * cbar.matrix()).determinant();
        assert!((d1 - d2).abs() < 1e-12);
        assert!(matches!(
            symmetrize_pair_kernel(&km(&[&[1.0, -1.0], &[1.0, 1.0]])).unwrap_err(),
            Error::NegativeCrossProduct { .. }
        ));
        assert!(symmetrize_pair_kernel(&KernelMatrix::identity(3)).is_err());
    }

    #[test]
    fn shifted_pair_examples() {
        assert!(shifted_pair_id_test(1.0, 0.0, 1.0).unwrap().holds());
        assert!(matches!(
            shifted_pair_id_test(1.0, -0.5, 1.0).unwrap(),
            Verdict::Fails { witness: ShiftedPairWitness::NegativeCovariance { .. } }
        ));
        assert!(matches!(
            shifted_pair_id_test(0.5, 0.4, 0.5).unwrap(),
            Verdict::Fails { witness: ShiftedPairWitness::CovarianceAboveVarianceProduct { .. } }
        ));
        assert!(bapat_test(&km(&[&[0.5, 0.4], &[0.4, 0.5]])).unwrap().verdict.holds());
        assert!(matches!(
            shifted_pair_id_test(1.0, 2.0, 1.0).unwrap_err(),
            Error::NotPositiveSemidefinite { .. }
        ));
        assert!(shifted_pair_id_test(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn resolvent_of_id_kernel_keeps_signature() {
        let g = km(&[&[1.0, -0.5], &[-0.5, 1.0]]);
        let s = bapat_test(&g).unwrap().signature.unwrap();
        for alpha in [0.5, 2.0] {
            let ga = resolvent(&g, alpha).unwrap();
            let v = bapat_test(&ga).unwrap();
            assert!(v.verdict.holds());
            assert!(v.signature.unwrap().equivalent(&s));
        }
    }
}
