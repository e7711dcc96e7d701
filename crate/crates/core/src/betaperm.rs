//! β-permanents and the β-positivity scan over resolvent families.
//!
//! `per_β(A) = Σ_τ β^{c(τ)} Π_i A(i, τ(i))` where `c(τ)` is the number of
//! cycles of τ. The literal "signature" exponent (`β^{sgn τ}`) is available
//! through [`ExponentConvention::Signature`] for side-by-side comparison.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::defaults::{self, ALGEBRAIC_TOL, NEGATIVITY_TOL, PERMANENT_CAP};
use crate::error::{Error, Result};
use crate::matcore::resolvent;
use crate::matrix::KernelMatrix;
use crate::par;
use crate::verdict::{Outcome, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentConvention {
    /// Exponent = number of cycles of τ (Vere-Jones).
    #[default]
    CycleCount,
    /// Exponent = sgn τ ∈ {−1, +1}.
    Signature,
}

/// All permutations of `0..m` in lexicographic order, with cycle counts and signs.
struct PermTable {
    m: usize,
    images: Vec<u8>,
    cycles: Vec<u8>,
    signs: Vec<i8>,
}

impl PermTable {
    fn build(m: usize) -> Self {
        let mut images = Vec::new();
        let mut cycles = Vec::new();
        let mut signs = Vec::new();
        let mut p: Vec<u8> = (0..m as u8).collect();
        loop {
            let c = cycle_count(&p);
            images.extend_from_slice(&p);
            cycles.push(c as u8);
            signs.push(if (m - c) % 2 == 0 { 1 } else { -1 });
            if !next_permutation(&mut p) {
                break;
            }
        }
        Self {
            m,
            images,
            cycles,
            signs,
        }
    }

    fn len(&self) -> usize {
        self.cycles.len()
    }

    fn perm(&self, k: usize) -> &[u8] {
        &self.images[k * self.m..(k + 1) * self.m]
    }
}

fn cycle_count(p: &[u8]) -> usize {
    let mut seen = [false; 16];
    let mut count = 0;
    for start in 0..p.len() {
        if seen[start] {
            continue;
        }
        count += 1;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = p[i] as usize;
        }
    }
    count
}

fn next_permutation(p: &mut [u8]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

fn table(m: usize) -> &'static PermTable {
    static TABLES: OnceLock<Vec<PermTable>> = OnceLock::new();
    &TABLES.get_or_init(|| (0..=PERMANENT_CAP).map(PermTable::build).collect())[m]
}

fn check_cap(a: &DMatrix<f64>) -> Result<usize> {
    let m = a.nrows();
    if m != a.ncols() {
        return Err(Error::Shape {
            rows: m,
            cols: a.ncols(),
        });
    }
    if m > PERMANENT_CAP {
        return Err(Error::DimensionCap {
            dim: m,
            cap: PERMANENT_CAP,
        });
    }
    Ok(m)
}

/// Cycle-count β-permanent by direct summation over all `m!` permutations.
pub fn beta_permanent(a: &DMatrix<f64>, beta: f64) -> Result<f64> {
    beta_permanent_with(a, beta, ExponentConvention::CycleCount)
}

pub fn beta_permanent_with(
    a: &DMatrix<f64>,
    beta: f64,
    convention: ExponentConvention,
) -> Result<f64> {
    let m = check_cap(a)?;
    let t = table(m);
    let mut sum = 0.0;
    for k in 0..t.len() {
        let perm = t.perm(k);
        let mut prod = 1.0;
        for (i, &j) in perm.iter().enumerate() {
            prod *= a[(i, j as usize)];
        }
        let exponent = match convention {
            ExponentConvention::CycleCount => i32::from(t.cycles[k]),
            ExponentConvention::Signature => i32::from(t.signs[k]),
        };
        sum += beta.powi(exponent) * prod;
    }
    Ok(sum)
}

/// `per_β(A)` grouped by exponent: `per_β(A) = Σ_e coeff_e β^e`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaPolynomial {
    terms: Vec<(i32, f64)>,
}

impl BetaPolynomial {
    pub fn new(a: &DMatrix<f64>, convention: ExponentConvention) -> Result<Self> {
        let m = check_cap(a)?;
        let t = table(m);
        let terms = match convention {
            ExponentConvention::CycleCount => {
                let mut coeffs = vec![0.0; m + 1];
                for k in 0..t.len() {
                    let prod: f64 = t
                        .perm(k)
                        .iter()
                        .enumerate()
                        .map(|(i, &j)| a[(i, j as usize)])
                        .product();
                    coeffs[t.cycles[k] as usize] += prod;
                }
                coeffs
                    .into_iter()
                    .enumerate()
                    .map(|(e, c)| (e as i32, c))
                    .collect()
            }
            ExponentConvention::Signature => {
                let (mut even, mut odd) = (0.0, 0.0);
                for k in 0..t.len() {
                    let prod: f64 = t
                        .perm(k)
                        .iter()
                        .enumerate()
                        .map(|(i, &j)| a[(i, j as usize)])
                        .product();
                    if t.signs[k] > 0 {
                        even += prod;
                    } else {
                        odd += prod;
                    }
                }
                vec![(-1, odd), (1, even)]
            }
        };
        Ok(Self { terms })
    }

    pub fn eval(&self, beta: f64) -> f64 {
        self.terms.iter().map(|&(e, c)| c * beta.powi(e)).sum()
    }

    /// `(exponent, coefficient)` pairs.
    pub fn terms(&self) -> &[(i32, f64)] {
        &self.terms
    }
}

/// Ordinary permanent by Ryser's inclusion–exclusion formula, independent of
/// the permutation tables used by [`beta_permanent`].
pub fn permanent_ryser(a: &DMatrix<f64>) -> Result<f64> {
    let m = a.nrows();
    if m != a.ncols() {
        return Err(Error::Shape {
            rows: m,
            cols: a.ncols(),
        });
    }
    if m > 20 {
        return Err(Error::DimensionCap { dim: m, cap: 20 });
    }
    if m == 0 {
        return Ok(1.0);
    }
    let mut row_sums = vec![0.0; m];
    let mut total = 0.0;
    let mut gray: u32 = 0;
    for k in 1u32..(1 << m) {
        let next = k ^ (k >> 1);
        let col = (gray ^ next).trailing_zeros() as usize;
        let sign = if next & (1 << col) != 0 { 1.0 } else { -1.0 };
        for (i, s) in row_sums.iter_mut().enumerate() {
            *s += sign * a[(i, col)];
        }
        gray = next;
        let prod: f64 = row_sums.iter().product();
        let parity = if (m - next.count_ones() as usize) % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        total += parity * prod;
    }
    Ok(total)
}

/// Sorted list of indices (repetitions allowed) into a kernel of given dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexMultiset(Vec<usize>);

impl IndexMultiset {
    pub fn new(indices: Vec<usize>, dim: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("empty index multiset".into()));
        }
        if indices.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("index multiset must be sorted".into()));
        }
        if let Some(&index) = indices.iter().find(|&&k| k >= dim) {
            return Err(Error::IndexOutOfRange { index, dim });
        }
        Ok(Self(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// All multisets of `0..n` of sizes `1..=m_max`: sizes ascending,
/// lexicographic within each size.
pub fn multisets(n: usize, m_max: usize) -> Vec<IndexMultiset> {
    let mut out = Vec::new();
    for m in 1..=m_max {
        let mut cur = vec![0usize; m];
        if n == 0 {
            break;
        }
        loop {
            out.push(IndexMultiset(cur.clone()));
            // advance to the next non-decreasing sequence
            let mut pos = m;
            while pos > 0 && cur[pos - 1] == n - 1 {
                pos -= 1;
            }
            if pos == 0 {
                break;
            }
            cur[pos - 1] += 1;
            let v = cur[pos - 1];
            for x in &mut cur[pos..] {
                *x = v;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityWitness {
    pub alpha: f64,
    pub beta: f64,
    pub indices: IndexMultiset,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRange {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub m_max: usize,
    pub convention: ExponentConvention,
}

/// Outcome of a β-positivity scan. `verdict` is `holds` only over the
/// recorded range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub verdict: Outcome,
    pub scanned: u64,
    pub witness: Option<PositivityWitness>,
    pub range: ScanRange,
}

impl PositivityReport {
    pub fn to_verdict(&self) -> Verdict<PositivityWitness> {
        match &self.witness {
            Some(w) => Verdict::fails(w.clone()),
            None => Verdict::Holds,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub betas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub m_max: usize,
    pub convention: ExponentConvention,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            betas: defaults::beta_grid(),
            alphas: defaults::alpha_grid(),
            m_max: defaults::M_MAX,
            convention: ExponentConvention::CycleCount,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.betas.is_empty() || self.alphas.is_empty() {
            return Err(Error::InvalidArgument("scan grids must be nonempty".into()));
        }
        if let Some(b) = self.betas.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::InvalidArgument(format!("β must be positive, got {b}")));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return Err(Error::InvalidArgument(format!("α must be nonnegative, got {a}")));
        }
        if self.m_max == 0 || self.m_max > PERMANENT_CAP {
            return Err(Error::DimensionCap {
                dim: self.m_max,
                cap: PERMANENT_CAP,
            });
        }
        Ok(())
    }
}

/// Scans `per_β` of every multiset-indexed submatrix of every resolvent on
/// the grid. Cells `(α, β)` are evaluated independently (in parallel when
/// enabled) and merged in grid order; the first negative value in
/// α-major, then β, then multiset order is the witness.
pub fn beta_positivity_scan(g: &KernelMatrix, config: &ScanConfig) -> Result<PositivityReport> {
    config.validate()?;
    let sets = multisets(g.dim(), config.m_max);
    let per_alpha = par::map_slice(&config.alphas, |&alpha| -> Result<Vec<Option<PositivityWitness>>> {
        let ga = resolvent(g, alpha)?;
        let max_abs = ga.max_abs();
        let polys = sets
            .iter()
            .map(|s| BetaPolynomial::new(&ga.submatrix(s.indices())?, config.convention))
            .collect::<Result<Vec<_>>>()?;
        Ok(config
            .betas
            .iter()
            .map(|&beta| {
                sets.iter().zip(&polys).find_map(|(s, p)| {
                    let value = p.eval(beta);
                    let threshold = NEGATIVITY_TOL * max_abs.powi(s.len() as i32);
                    (value < -threshold).then(|| PositivityWitness {
                        alpha,
                        beta,
                        indices: s.clone(),
                        value,
                    })
                })
            })
            .collect())
    });
    let mut witness = None;
    for cell in per_alpha {
        let cell = cell?;
        if witness.is_none() {
            witness = cell.into_iter().flatten().next();
        }
    }
    let scanned = (config.alphas.len() * config.betas.len() * sets.len()) as u64;
    Ok(PositivityReport {
        verdict: if witness.is_some() {
            Outcome::Fails
        } else {
            Outcome::Holds
        },
        scanned,
        witness,
        range: ScanRange {
            alphas: config.alphas.clone(),
            betas: config.betas.clone(),
            m_max: config.m_max,
            convention: config.convention,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BatteryWitness {
    /// `G_α(i,j)·G_α(j,i) < 0`.
    Pair {
        alpha: f64,
        i: usize,
        j: usize,
        product: f64,
    },
    /// `G_α(j,i)·G_α(j,k)·G_α(k,i) < 0`.
    Triple {
        alpha: f64,
        i: usize,
        j: usize,
        k: usize,
        product: f64,
    },
}

fn sign_conditions(m: &KernelMatrix, alpha: f64) -> Option<BatteryWitness> {
    let n = m.dim();
    let scale = m.max_abs();
    let pair_tol = ALGEBRAIC_TOL * scale * scale;
    for i in 0..n {
        for j in (i + 1)..n {
            let product = m.get(i, j) * m.get(j, i);
            if product < -pair_tol {
                return Some(BatteryWitness::Pair { alpha, i, j, product });
            }
        }
    }
    let triple_tol = pair_tol * scale;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if i == j || j == k || i == k {
                    continue;
                }
                let product = m.get(j, i) * m.get(j, k) * m.get(k, i);
                if product < -triple_tol {
                    return Some(BatteryWitness::Triple {
                        alpha,
                        i,
                        j,
                        k,
                        product,
                    });
                }
            }
        }
    }
    None
}

/// Necessary sign conditions for infinite divisibility: pairwise products
/// `G(i,j)G(j,i) ≥ 0` and triple products `G(j,i)G(j,k)G(k,i) ≥ 0`, on `G`
/// and on its resolvents over `alphas`.
pub fn id_necessary_battery_with(g: &KernelMatrix, alphas: &[f64]) -> Verdict<BatteryWitness> {
    if let Some(w) = sign_conditions(g, 0.0) {
        return Verdict::fails(w);
    }
    for &alpha in alphas.iter().filter(|&&a| a > 0.0) {
        match resolvent(g, alpha) {
            Ok(ga) => {
                if let Some(w) = sign_conditions(&ga, alpha) {
                    return Verdict::fails(w);
                }
            }
            Err(e) => return Verdict::inconclusive(format!("resolvent at α = {alpha}: {e}")),
        }
    }
    Verdict::Holds
}

pub fn id_necessary_battery(g: &KernelMatrix) -> Verdict<BatteryWitness> {
    id_necessary_battery_with(g, &defaults::alpha_grid())
}
