//! Exact sampling of Gaussian vectors and index-2/k permanental vectors,
//! exponential tilting towards resolvent kernels, and the closed-form
//! bivariate Gaussian moments.
//!
//! Every draw `i` owns its own ChaCha8 stream keyed by `(seed, i)`, and all
//! reductions run over fixed-size blocks merged in block order, so batches and
//! estimates are bitwise identical for any worker count.

use std::f64::consts::{FRAC_2_PI, PI};
use std::io::{BufRead, Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::defaults::EIGEN_TOL;
use crate::error::{Error, Result};
use crate::idcheck::symmetrize_pair_kernel;
use crate::matcore::determinant;
use crate::matrix::KernelMatrix;
use crate::par;

/// Draws per work unit. Fixed so that reductions do not depend on threads.
pub const BLOCK: usize = 4096;

const BATCH_FORMAT: &str = "permacheck-batch";
const BATCH_VERSION: u32 = 1;

/// Kernel and index of a permanental vector: Laplace transform
/// `E exp(−½ Σ α_i ψ_i) = |I + αG|^{−1/β}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermanentalSpec {
    pub kernel: KernelMatrix,
    pub index_beta: f64,
}

impl PermanentalSpec {
    pub fn new(kernel: KernelMatrix, index_beta: f64) -> Result<Self> {
        if !(index_beta.is_finite() && index_beta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "index must be positive, got {index_beta}"
            )));
        }
        Ok(Self { kernel, index_beta })
    }

    /// Sum of `k` independent squared centered Gaussian vectors (β = 2/k).
    pub fn squared_gaussian(kernel: KernelMatrix, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        Self::new(kernel, 2.0 / k as f64)
    }

    /// `k` with `β = 2/k`, if there is one.
    pub fn degrees(&self) -> Option<usize> {
        let k = 2.0 / self.index_beta;
        let r = k.round();
        ((k - r).abs() <= 1e-12 * k.max(1.0) && r >= 1.0).then_some(r as usize)
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    /// `|I + diag(x) G|^{−1/β}` for `x ≥ 0`.
    pub fn laplace_transform(&self, x: &[f64]) -> Result<f64> {
        self.kernel.check_dim(x.len())?;
        if let Some(v) = x.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "Laplace argument must be nonnegative, got {v}"
            )));
        }
        let n = self.dim();
        let g = self.kernel.matrix();
        let m = DMatrix::from_fn(n, n, |i, j| f64::from(i == j) + x[i] * g[(i, j)]);
        let det = determinant(&m);
        if det <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "|I + xG| = {det} is not positive"
            )));
        }
        Ok(det.powf(-1.0 / self.index_beta))
    }

    /// Exact tilt normalizer `E exp(−(α/2) Σ ψ_i) = |I + αG|^{−1/β}`.
    pub fn tilt_normalizer(&self, alpha: f64) -> Result<f64> {
        self.laplace_transform(&vec![alpha; self.dim()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BatchKind {
    /// Centered Gaussian `η`; the associated permanental vector is `η²`.
    Gaussian,
    Permanental,
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// `(self − other) / √(se² + se'²)`; zero when both are exact and equal.
    pub fn z_against(&self, other: &Estimate) -> f64 {
        z_score(self.mean - other.mean, self.se.hypot(other.se))
    }

    /// `(self − exact) / se`.
    pub fn z_against_exact(&self, exact: f64) -> f64 {
        z_score(self.mean - exact, self.se)
    }
}

fn z_score(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tilt {
    pub alpha: f64,
    /// Empirical mean of `exp(−(α/2) Σ ψ_i)`, i.e. the normalizer estimate.
    pub normalizer: Estimate,
}

/// `N` draws of dimension `n`, stored row-major, with self-normalized weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    kind: BatchKind,
    spec: PermanentalSpec,
    seed: u64,
    dim: usize,
    draws: Vec<f64>,
    weights: Vec<f64>,
    tilt: Option<Tilt>,
}

impl SampleBatch {
    /// Unweighted batch from raw row-major draws.
    #[cfg(test)]
    pub(crate) fn from_parts(
        kind: BatchKind,
        spec: PermanentalSpec,
        seed: u64,
        dim: usize,
        draws: Vec<f64>,
    ) -> Self {
        let count = draws.len() / dim.max(1);
        Self {
            kind,
            spec,
            seed,
            dim,
            draws,
            weights: vec![1.0; count],
            tilt: None,
        }
    }

    pub fn kind(&self) -> BatchKind {
        self.kind
    }

    pub fn spec(&self) -> &PermanentalSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn draw(&self, i: usize) -> &[f64] {
        &self.draws[i * self.dim..(i + 1) * self.dim]
    }

    pub fn draws(&self) -> &[f64] {
        &self.draws
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tilt(&self) -> Option<&Tilt> {
        self.tilt.as_ref()
    }

    pub fn is_tilted(&self) -> bool {
        self.tilt.is_some()
    }

    /// The permanental vector of draw `i` (`η²` for Gaussian batches).
    pub fn psi(&self, i: usize) -> Vec<f64> {
        let d = self.draw(i);
        match self.kind {
            BatchKind::Gaussian => d.iter().map(|x| x * x).collect(),
            BatchKind::Permanental => d.to_vec(),
        }
    }

    fn psi_sum(&self, i: usize) -> f64 {
        let d = self.draw(i);
        match self.kind {
            BatchKind::Gaussian => d.iter().map(|x| x * x).sum(),
            BatchKind::Permanental => d.iter().sum(),
        }
    }

    /// Block-wise sums of `f(i)`, merged in block order.
    fn block_sum<F>(&self, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        let n = self.len();
        par::map_range(n.div_ceil(BLOCK), |b| {
            (b * BLOCK..n.min((b + 1) * BLOCK)).map(&f).sum::<f64>()
        })
        .into_iter()
        .sum()
    }

    /// Weighted mean of `f(draw)` with a delta-method standard error
    /// `√(Σ w²(f − μ)²) / Σ w`, which reduces to `sd/√N` for unit weights.
    pub fn estimate<F>(&self, f: F) -> Estimate
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        let wsum = self.block_sum(|i| self.weights[i]);
        let mean = self.block_sum(|i| self.weights[i] * f(self.draw(i))) / wsum;
        let ss = self.block_sum(|i| {
            let dev = f(self.draw(i)) - mean;
            let w = self.weights[i];
            w * w * dev * dev
        });
        Estimate {
            mean,
            se: ss.sqrt() / wsum,
        }
    }

    /// Same as [`SampleBatch::estimate`] but `f` sees the permanental vector.
    pub fn estimate_psi<F>(&self, f: F) -> Estimate
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        match self.kind {
            BatchKind::Permanental => self.estimate(f),
            BatchKind::Gaussian => self.estimate(|d| {
                let sq: Vec<f64> = d.iter().map(|x| x * x).collect();
                f(&sq)
            }),
        }
    }

    /// Empirical `E exp(−½ Σ x_i ψ_i)`.
    pub fn laplace_estimate(&self, x: &[f64]) -> Result<Estimate> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok(self.estimate_psi(|p| {
            (-0.5 * p.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()).exp()
        }))
    }

    /// Effective sample size `(Σw)² / Σw²`.
    pub fn ess(&self) -> f64 {
        let s = self.block_sum(|i| self.weights[i]);
        let s2 = self.block_sum(|i| self.weights[i] * self.weights[i]);
        s * s / s2
    }

    /// Writes the batch: one JSON header line, then `N·n` little-endian f64
    /// draws, then `N` weights when the batch is tilted.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let header = BatchHeader {
            format: BATCH_FORMAT.into(),
            version: BATCH_VERSION,
            draws: self.len(),
            dim: self.dim,
            seed: self.seed,
            kind: self.kind,
            spec: self.spec.clone(),
            tilt: self.tilt.clone(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        let mut buf = Vec::with_capacity(8 * (self.draws.len() + self.weights.len()));
        for x in &self.draws {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        if self.tilt.is_some() {
            for w in &self.weights {
                buf.extend_from_slice(&w.to_le_bytes());
            }
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(mut input: R) -> Result<Self> {
        let mut line = String::new();
        input.read_line(&mut line)?;
        let header: BatchHeader = serde_json::from_str(line.trim_end())?;
        if header.format != BATCH_FORMAT || header.version != BATCH_VERSION {
            return Err(Error::Parse(format!(
                "unsupported batch format {} v{}",
                header.format, header.version
            )));
        }
        if header.spec.dim() != header.dim {
            return Err(Error::DimensionMismatch {
                expected: header.spec.dim(),
                actual: header.dim,
            });
        }
        let draws = read_f64s(&mut input, header.draws * header.dim)?;
        let weights = if header.tilt.is_some() {
            read_f64s(&mut input, header.draws)?
        } else {
            vec![1.0; header.draws]
        };
        let mut rest = Vec::new();
        input.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Parse(format!("{} trailing bytes", rest.len())));
        }
        Ok(Self {
            kind: header.kind,
            spec: header.spec,
            seed: header.seed,
            dim: header.dim,
            draws,
            weights,
            tilt: header.tilt,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct BatchHeader {
    format: String,
    version: u32,
    draws: usize,
    dim: usize,
    seed: u64,
    kind: BatchKind,
    spec: PermanentalSpec,
    tilt: Option<Tilt>,
}

fn read_f64s<R: Read>(input: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; 8 * count];
    input
        .read_exact(&mut bytes)
        .map_err(|e| Error::Parse(format!("truncated batch: {e}")))?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

/// The RNG owned by draw `index` of a batch with this seed.
pub fn draw_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `L` with `L Lᵀ = G`, from the symmetric eigendecomposition. Eigenvalues
/// down to `−1e−9·‖G‖` are clipped to zero.
pub fn square_root(g: &KernelMatrix) -> Result<DMatrix<f64>> {
    if !g.is_symmetric() {
        return Err(Error::InvalidArgument(
            "only symmetric kernels can be factored".into(),
        ));
    }
    let eig = g.matrix().clone().symmetric_eigen();
    let tol = EIGEN_TOL * g.norm_inf();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -tol {
        return Err(Error::NotPositiveSemidefinite {
            min_eigenvalue: min,
        });
    }
    let roots = DVector::from_iterator(
        g.dim(),
        eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()),
    );
    let mut l = eig.eigenvectors;
    for (mut col, r) in l.column_iter_mut().zip(roots.iter()) {
        col *= *r;
    }
    Ok(l)
}

fn generate<F>(count: usize, dim: usize, seed: u64, fill: F) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync + Send,
{
    par::map_range(count.div_ceil(BLOCK), |b| {
        let lo = b * BLOCK;
        let hi = count.min(lo + BLOCK);
        let mut out = vec![0.0; (hi - lo) * dim];
        for (row, i) in out.chunks_exact_mut(dim.max(1)).zip(lo..hi) {
            fill(&mut draw_rng(seed, i as u64), row);
        }
        out
    })
    .concat()
}

fn check_count(count: usize) -> Result<()> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    Ok(())
}

fn gaussian_into(l: &DMatrix<f64>, rng: &mut ChaCha8Rng, z: &mut [f64], out: &mut [f64]) {
    for v in z.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o = (0..z.len()).map(|j| l[(i, j)] * z[j]).sum();
    }
}

/// `count` independent centered Gaussian vectors with covariance `G`.
pub fn sample_gaussian(g: &KernelMatrix, count: usize, seed: u64) -> Result<SampleBatch> {
    check_count(count)?;
    let l = square_root(g)?;
    let n = g.dim();
    let draws = generate(count, n, seed, |rng, row| {
        let mut z = vec![0.0; n];
        gaussian_into(&l, rng, &mut z, row);
    });
    Ok(SampleBatch {
        kind: BatchKind::Gaussian,
        spec: PermanentalSpec::new(g.clone(), 2.0)?,
        seed,
        dim: n,
        draws,
        weights: vec![1.0; count],
        tilt: None,
    })
}

/// `count` draws of the permanental vector with index `β = 2/k`: sums of `k`
/// independent squared Gaussian vectors with covariance `G`. A nonsymmetric
/// 2×2 kernel is replaced by its symmetric Laplace-equivalent.
pub fn sample_permanental(spec: &PermanentalSpec, count: usize, seed: u64) -> Result<SampleBatch> {
    check_count(count)?;
    let k = spec.degrees().ok_or_else(|| {
        Error::InvalidArgument(format!(
            "index {} is not of the form 2/k; only 2/k indices can be sampled directly",
            spec.index_beta
        ))
    })?;
    let kernel = if spec.kernel.is_symmetric() {
        spec.kernel.clone()
    } else if spec.dim() == 2 {
        symmetrize_pair_kernel(&spec.kernel)?
    } else {
        return Err(Error::InvalidArgument(
            "nonsymmetric kernels above dimension 2 cannot be sampled".into(),
        ));
    };
    let l = square_root(&kernel)?;
    let n = kernel.dim();
    let draws = generate(count, n, seed, |rng, row| {
        let mut z = vec![0.0; n];
        let mut x = vec![0.0; n];
        row.fill(0.0);
        for _ in 0..k {
            gaussian_into(&l, rng, &mut z, &mut x);
            for (r, v) in row.iter_mut().zip(&x) {
                *r += v * v;
            }
        }
    });
    Ok(SampleBatch {
        kind: BatchKind::Permanental,
        spec: spec.clone(),
        seed,
        dim: n,
        draws,
        weights: vec![1.0; count],
        tilt: None,
    })
}

/// Reweights an untilted batch by `exp(−(α/2) Σ ψ_i)`, self-normalized to sum
/// to `N`. Weighted expectations then estimate those of the permanental
/// vector with kernel `resolvent(G, α)` and the same index.
pub fn tilt_resolvent(batch: &SampleBatch, alpha: f64) -> Result<SampleBatch> {
    if batch.is_tilted() {
        return Err(Error::InvalidArgument("batch is already tilted".into()));
    }
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "α must be nonnegative, got {alpha}"
        )));
    }
    let n = batch.len();
    let logs: Vec<f64> = (0..n).map(|i| -0.5 * alpha * batch.psi_sum(i)).collect();
    let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = logs.iter().map(|l| (l - shift).exp()).collect();
    let unit = SampleBatch {
        weights: vec![1.0; n],
        ..batch.clone()
    };
    let mean = unit.block_sum(|i| scaled[i]) / n as f64;
    let ss = unit.block_sum(|i| (scaled[i] - mean).powi(2));
    let factor = shift.exp();
    let normalizer = Estimate {
        mean: mean * factor,
        se: (ss / (n as f64 - 1.0).max(1.0)).sqrt() / (n as f64).sqrt() * factor,
    };
    Ok(SampleBatch {
        weights: scaled.iter().map(|s| s / mean).collect(),
        tilt: Some(Tilt { alpha, normalizer }),
        ..batch.clone()
    })
}

/// `E|X Y|` for centered jointly Gaussian `X, Y` with standard deviations
/// `σ_i, σ_j` and correlation `ρ` (clamped to `[−1, 1]`):
/// `(2/π) σ_i σ_j (ρ asin ρ + √(1 − ρ²))`.
pub fn abs_product_moment(sigma_i: f64, sigma_j: f64, rho: f64) -> f64 {
    let r = rho.clamp(-1.0, 1.0);
    FRAC_2_PI * sigma_i * sigma_j * (r * r.asin() + (1.0 - r * r).sqrt())
}

/// `E sgn(XY) = (2/π) asin ρ` for centered jointly Gaussian `X, Y`.
pub fn sign_moment(rho: f64) -> f64 {
    2.0 * rho.clamp(-1.0, 1.0).asin() / PI
}

/// Correlation of coordinates `i, j` under `G`.
pub fn correlation(g: &KernelMatrix, i: usize, j: usize) -> f64 {
    g.get(i, j) / (g.get(i, i) * g.get(j, j)).sqrt()
}
