//! Positive-correlation checks: Monte Carlo covariance of increasing
//! functionals, resolvent monotonicity of `E|η_α(i)η_α(j)|`, and lattice
//! (FKG and shifted cross) inequalities on bivariate squared-Gaussian
//! densities.

use std::f64::consts::{LN_2, PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::defaults::{
    JACKKNIFE_GROUPS, LATTICE_POINTS, LATTICE_QUANTILES, LATTICE_TOL, MONOTONE_TOL, Z_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::green::{is_green, GreenVerdict};
use crate::matcore::{require_pd, resolvent};
use crate::matrix::KernelMatrix;
use crate::par;
use crate::sampler::{
    abs_product_moment, correlation, sample_permanental, sign_moment, PermanentalSpec, SampleBatch,
};
use crate::verdict::Verdict;

/// A coordinatewise nondecreasing test function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum IncreasingFunction {
    /// `1{x_c ≥ t_c for every listed c}`.
    Orthant { coords: Vec<usize>, thresholds: Vec<f64> },
    Projection { coord: usize },
    Max,
    Min,
    /// Logistic ramp `1 / (1 + exp(−slope·(x_c − t)))`.
    Soft { coord: usize, threshold: f64, slope: f64 },
}

impl IncreasingFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::Orthant { coords, thresholds } => {
                f64::from(coords.iter().zip(thresholds).all(|(&c, &t)| x[c] >= t))
            }
            Self::Projection { coord } => x[*coord],
            Self::Max => x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Self::Min => x.iter().copied().fold(f64::INFINITY, f64::min),
            Self::Soft {
                coord,
                threshold,
                slope,
            } => 1.0 / (1.0 + (-slope * (x[*coord] - threshold)).exp()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Orthant { coords, thresholds } => {
                let parts: Vec<String> = coords
                    .iter()
                    .zip(thresholds)
                    .map(|(c, t)| format!("x{c}>={t:.6}"))
                    .collect();
                format!("1{{{}}}", parts.join(","))
            }
            Self::Projection { coord } => format!("x{coord}"),
            Self::Max => "max".into(),
            Self::Min => "min".into(),
            Self::Soft {
                coord,
                threshold,
                slope,
            } => format!("soft(x{coord};{threshold:.6},{slope})"),
        }
    }

    fn max_coord(&self) -> Option<usize> {
        match self {
            Self::Orthant { coords, .. } => coords.iter().copied().max(),
            Self::Projection { coord } | Self::Soft { coord, .. } => Some(*coord),
            Self::Max | Self::Min => None,
        }
    }
}

/// How to build a family from a batch's empirical marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyConfig {
    /// Marginal quantile levels for the orthant thresholds.
    pub quantile_levels: Vec<f64>,
    /// Also add the joint orthant at each level.
    pub joint_orthants: bool,
    pub projections: bool,
    pub extremes: bool,
    /// Soft indicators at the marginal medians, scaled by `slope / median`.
    pub soft_slope: Option<f64>,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self {
            quantile_levels: vec![0.25, 0.5, 0.75],
            joint_orthants: false,
            projections: true,
            extremes: true,
            soft_slope: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncreasingFunctionFamily {
    pub members: Vec<IncreasingFunction>,
}

impl IncreasingFunctionFamily {
    pub fn new(members: Vec<IncreasingFunction>) -> Self {
        Self { members }
    }

    /// Instantiates `config` on the permanental marginals of `batch`.
    pub fn from_batch(config: &FamilyConfig, batch: &SampleBatch) -> Result<Self> {
        if let Some(p) = config
            .quantile_levels
            .iter()
            .find(|p| !(**p > 0.0 && **p < 1.0))
        {
            return Err(Error::InvalidArgument(format!(
                "quantile level must lie in (0, 1), got {p}"
            )));
        }
        let n = batch.dim();
        let mut marginals: Vec<Vec<f64>> = vec![Vec::with_capacity(batch.len()); n];
        for i in 0..batch.len() {
            for (c, v) in batch.psi(i).into_iter().enumerate() {
                marginals[c].push(v);
            }
        }
        for m in &mut marginals {
            m.sort_by(f64::total_cmp);
        }
        let quantile = |c: usize, p: f64| {
            let m = &marginals[c];
            m[((p * m.len() as f64) as usize).min(m.len() - 1)]
        };
        let mut members = Vec::new();
        for c in 0..n {
            for &p in &config.quantile_levels {
                members.push(IncreasingFunction::Orthant {
                    coords: vec![c],
                    thresholds: vec![quantile(c, p)],
                });
            }
        }
        if config.joint_orthants && n > 1 {
            for &p in &config.quantile_levels {
                members.push(IncreasingFunction::Orthant {
                    coords: (0..n).collect(),
                    thresholds: (0..n).map(|c| quantile(c, p)).collect(),
                });
            }
        }
        if config.projections {
            members.extend((0..n).map(|coord| IncreasingFunction::Projection { coord }));
        }
        if config.extremes && n > 1 {
            members.push(IncreasingFunction::Max);
            members.push(IncreasingFunction::Min);
        }
        if let Some(slope) = config.soft_slope {
            for c in 0..n {
                let median = quantile(c, 0.5).max(f64::MIN_POSITIVE);
                members.push(IncreasingFunction::Soft {
                    coord: c,
                    threshold: median,
                    slope: slope / median,
                });
            }
        }
        Ok(Self { members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        match self.members.iter().filter_map(|m| m.max_coord()).max() {
            Some(c) if c >= dim => Err(Error::IndexOutOfRange { index: c, dim }),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStat {
    pub first: usize,
    pub second: usize,
    pub covariance: f64,
    pub se: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationWitness {
    pub first: String,
    pub second: String,
    pub covariance: f64,
    pub se: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationReport {
    pub draws: usize,
    pub seed: u64,
    pub threshold: f64,
    pub labels: Vec<String>,
    pub pairs: Vec<PairStat>,
    /// Violation witness is the pair with the smallest z-score, when ≤ threshold.
    pub verdict: Verdict<AssociationWitness>,
}

/// Per-group weighted sums: `Σw`, `Σw·F_a`, `Σw·F_a·F_b` for `a < b`.
struct GroupSums {
    w: f64,
    f: Vec<f64>,
    ff: Vec<f64>,
}

fn pair_index(m: usize) -> Vec<(usize, usize)> {
    (0..m)
        .flat_map(|a| (a + 1..m).map(move |b| (a, b)))
        .collect()
}

fn covariance(w: f64, fa: f64, fb: f64, fab: f64) -> f64 {
    fab / w - (fa / w) * (fb / w)
}

/// Covariances of all member pairs over the batch's permanental vectors,
/// with grouped-jackknife standard errors.
pub fn association_test_batch(
    batch: &SampleBatch,
    family: &IncreasingFunctionFamily,
) -> Result<AssociationReport> {
    family.check_dim(batch.dim())?;
    let m = family.len();
    let pairs = pair_index(m);
    let n = batch.len();
    let groups = JACKKNIFE_GROUPS.min(n);
    let sums = par::map_range(groups, |g| {
        let (lo, hi) = (g * n / groups, (g + 1) * n / groups);
        let mut s = GroupSums {
            w: 0.0,
            f: vec![0.0; m],
            ff: vec![0.0; pairs.len()],
        };
        let mut vals = vec![0.0; m];
        for i in lo..hi {
            let psi = batch.psi(i);
            let w = batch.weights()[i];
            for (v, f) in vals.iter_mut().zip(&family.members) {
                *v = f.eval(&psi);
            }
            s.w += w;
            for (acc, v) in s.f.iter_mut().zip(&vals) {
                *acc += w * v;
            }
            for (acc, &(a, b)) in s.ff.iter_mut().zip(&pairs) {
                *acc += w * vals[a] * vals[b];
            }
        }
        s
    });
    let total_w: f64 = sums.iter().map(|s| s.w).sum();
    let total_f: Vec<f64> = (0..m).map(|a| sums.iter().map(|s| s.f[a]).sum()).collect();
    let stats: Vec<PairStat> = pairs
        .iter()
        .enumerate()
        .map(|(p, &(a, b))| {
            let total_ff: f64 = sums.iter().map(|s| s.ff[p]).sum();
            let cov = covariance(total_w, total_f[a], total_f[b], total_ff);
            let se = if groups > 1 {
                let loo: Vec<f64> = sums
                    .iter()
                    .map(|s| {
                        covariance(
                            total_w - s.w,
                            total_f[a] - s.f[a],
                            total_f[b] - s.f[b],
                            total_ff - s.ff[p],
                        )
                    })
                    .collect();
                let mean = loo.iter().sum::<f64>() / groups as f64;
                let ss: f64 = loo.iter().map(|x| (x - mean).powi(2)).sum();
                (ss * (groups - 1) as f64 / groups as f64).sqrt()
            } else {
                0.0
            };
            let z = if se > 0.0 {
                cov / se
            } else if cov < 0.0 {
                f64::NEG_INFINITY
            } else {
                0.0
            };
            PairStat {
                first: a,
                second: b,
                covariance: cov,
                se,
                z,
            }
        })
        .collect();
    let worst = stats
        .iter()
        .filter(|s| s.z <= Z_THRESHOLD)
        .min_by(|x, y| x.z.total_cmp(&y.z));
    let labels: Vec<String> = family.members.iter().map(IncreasingFunction::label).collect();
    let verdict = match worst {
        Some(s) => Verdict::fails(AssociationWitness {
            first: labels[s.first].clone(),
            second: labels[s.second].clone(),
            covariance: s.covariance,
            se: s.se,
            z: s.z,
        }),
        None => Verdict::Holds,
    };
    Ok(AssociationReport {
        draws: n,
        seed: batch.seed(),
        threshold: Z_THRESHOLD,
        labels,
        pairs: stats,
        verdict,
    })
}

/// Samples `spec` and runs [`association_test_batch`] with the family built
/// from `config` on the same draws.
pub fn association_mc_test(
    spec: &PermanentalSpec,
    config: &FamilyConfig,
    count: usize,
    seed: u64,
) -> Result<AssociationReport> {
    let batch = sample_permanental(spec, count, seed)?;
    let family = IncreasingFunctionFamily::from_batch(config, &batch)?;
    association_test_batch(&batch, &family)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityWitness {
    pub scaling: usize,
    pub d: Vec<f64>,
    pub i: usize,
    pub j: usize,
    pub alpha_from: f64,
    pub alpha_to: f64,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub verdict: Verdict<MonotonicityWitness>,
    pub scalings: usize,
    pub sequences: usize,
    /// Largest relative step `(after − before) / max(1, before)` seen anywhere.
    pub max_step: f64,
}

/// Closed-form `E|η_α(i)η_α(j)|` under `resolvent(G, α)`.
pub fn abs_moment_at(g: &KernelMatrix, alpha: f64, i: usize, j: usize) -> Result<f64> {
    let c = resolvent(g, alpha)?;
    Ok(abs_product_moment(
        c.get(i, i).sqrt(),
        c.get(j, j).sqrt(),
        correlation(&c, i, j),
    ))
}

/// Exact `d/dα E|η_α(i)η_α(j)|`. With `C = G_α`, `P = C²` and `dC/dα = −P`:
/// `−sgnmoment(ρ)·P_ij − (1/π)√(C_ii C_jj (1 − ρ²))·(P_ii/C_ii + P_jj/C_jj)`.
pub fn abs_moment_derivative(g: &KernelMatrix, alpha: f64, i: usize, j: usize) -> Result<f64> {
    let c = resolvent(g, alpha)?;
    let p = c.matrix() * c.matrix();
    let rho = correlation(&c, i, j).clamp(-1.0, 1.0);
    let s = (c.get(i, i) * c.get(j, j)).sqrt();
    let diag = p[(i, i)] / c.get(i, i) + p[(j, j)] / c.get(j, j);
    Ok(-sign_moment(rho) * p[(i, j)] - s * (1.0 - rho * rho).sqrt() * diag / PI)
}

/// Positive diagonal scalings `d_c = 10^u`, `u` uniform on `[−decades, decades]`.
pub fn random_scalings(dim: usize, count: usize, decades: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (0..dim)
                .map(|_| 10f64.powf(rng.random_range(-decades..=decades)))
                .collect()
        })
        .collect()
}

/// For each `D` and pair `i < j`, checks that `α ↦ E|η_α(i)η_α(j)|` under
/// `resolvent(DGD, α)` is nonincreasing along `alphas`. The witness is the
/// first increase in (scaling, pair, α) order.
pub fn resolvent_monotonicity_scan(
    g: &KernelMatrix,
    alphas: &[f64],
    scalings: &[Vec<f64>],
) -> Result<MonotonicityReport> {
    require_pd(g)?;
    if alphas.len() < 2 || alphas.windows(2).any(|w| !(w[0] < w[1])) || alphas[0] < 0.0 {
        return Err(Error::InvalidArgument(
            "α grid must be nonnegative, strictly increasing, with at least 2 points".into(),
        ));
    }
    if scalings.is_empty() {
        return Err(Error::InvalidArgument("empty scaling set".into()));
    }
    let n = g.dim();
    let pairs = pair_index(n);
    let per_d = par::map_slice(scalings, |d| -> Result<(Option<MonotonicityWitness>, f64)> {
        let dgd = g.scale_diagonal(d)?;
        let mut values = vec![vec![0.0; alphas.len()]; pairs.len()];
        for (k, &alpha) in alphas.iter().enumerate() {
            let c = resolvent(&dgd, alpha)?;
            for (p, &(i, j)) in pairs.iter().enumerate() {
                values[p][k] = abs_product_moment(
                    c.get(i, i).sqrt(),
                    c.get(j, j).sqrt(),
                    correlation(&c, i, j),
                );
            }
        }
        let mut first = None;
        let mut max_step = f64::NEG_INFINITY;
        for (p, &(i, j)) in pairs.iter().enumerate() {
            for k in 0..alphas.len() - 1 {
                let (before, after) = (values[p][k], values[p][k + 1]);
                let step = (after - before) / before.max(1.0);
                max_step = max_step.max(step);
                if step > MONOTONE_TOL && first.is_none() {
                    first = Some(MonotonicityWitness {
                        scaling: 0,
                        d: d.clone(),
                        i,
                        j,
                        alpha_from: alphas[k],
                        alpha_to: alphas[k + 1],
                        before,
                        after,
                    });
                }
            }
        }
        Ok((first, max_step))
    });
    let mut witness = None;
    let mut max_step = f64::NEG_INFINITY;
    for (s, r) in per_d.into_iter().enumerate() {
        let (w, step) = r?;
        max_step = max_step.max(step);
        if witness.is_none() {
            witness = w.map(|w| MonotonicityWitness { scaling: s, ..w });
        }
    }
    Ok(MonotonicityReport {
        verdict: witness.map_or(Verdict::Holds, Verdict::fails),
        scalings: scalings.len(),
        sequences: scalings.len() * pairs.len(),
        max_step,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignConditionWitness {
    pub alpha: f64,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// Checks `sgnmoment(ρ_α(i,j)) · (G_α²)(i,j) ≥ −tol` for all `i ≠ j` on the
/// grid, where `G_α²` is the matrix square of the resolvent.
pub fn sign_condition_scan(g: &KernelMatrix, alphas: &[f64]) -> Result<Verdict<SignConditionWitness>> {
    require_pd(g)?;
    for &alpha in alphas {
        let c = resolvent(g, alpha)?;
        let p = c.matrix() * c.matrix();
        let tol = MONOTONE_TOL * p.amax().max(1.0);
        for i in 0..g.dim() {
            for j in 0..g.dim() {
                if i == j {
                    continue;
                }
                let value = sign_moment(correlation(&c, i, j)) * p[(i, j)];
                if value < -tol {
                    return Ok(Verdict::fails(SignConditionWitness { alpha, i, j, value }));
                }
            }
        }
    }
    Ok(Verdict::Holds)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// `P((σZ + r)² ≤ t)`.
pub fn squared_normal_cdf(t: f64, sigma: f64, r: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let s = t.sqrt();
    (normal_cdf((s - r) / sigma) - normal_cdf((-s - r) / sigma)).clamp(0.0, 1.0)
}

/// Quantile of `(σZ + r)²` by bisection.
pub fn squared_normal_quantile(p: f64, sigma: f64, r: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = (r.abs() + 12.0 * sigma).powi(2);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if squared_normal_cdf(mid, sigma, r) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// A density on the open positive quadrant, evaluated in log form.
pub trait BivariateDensity: Sync {
    fn log_density(&self, x: f64, y: f64) -> f64;

    fn density(&self, x: f64, y: f64) -> f64 {
        self.log_density(x, y).exp()
    }
}

impl<F: Fn(f64, f64) -> f64 + Sync> BivariateDensity for F {
    fn log_density(&self, x: f64, y: f64) -> f64 {
        self(x, y).ln()
    }
}

/// Density of `((η₁ + r)², (η₂ + r)²)` for centered Gaussian `η` with a
/// positive definite 2×2 covariance:
/// `Σ_{s₁,s₂ = ±1} φ_G(s₁√x − r, s₂√y − r) / (4√(xy))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredGaussianDensity {
    g: [[f64; 2]; 2],
    det: f64,
    shift: f64,
}

impl SquaredGaussianDensity {
    pub fn new(g: &KernelMatrix, shift: f64) -> Result<Self> {
        if g.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                actual: g.dim(),
            });
        }
        require_pd(g)?;
        let m = [[g.get(0, 0), g.get(0, 1)], [g.get(1, 0), g.get(1, 1)]];
        Ok(Self {
            g: m,
            det: m[0][0] * m[1][1] - m[0][1] * m[1][0],
            shift,
        })
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    fn log_phi(&self, u: f64, v: f64) -> f64 {
        let q = (self.g[1][1] * u * u - 2.0 * self.g[0][1] * u * v + self.g[0][0] * v * v) / self.det;
        -(2.0 * PI).ln() - 0.5 * self.det.ln() - 0.5 * q
    }

    /// Marginal quantile of coordinate `c`.
    pub fn marginal_quantile(&self, c: usize, p: f64) -> f64 {
        squared_normal_quantile(p, self.g[c][c].sqrt(), self.shift)
    }
}

impl BivariateDensity for SquaredGaussianDensity {
    fn log_density(&self, x: f64, y: f64) -> f64 {
        if !(x > 0.0 && y > 0.0) {
            return f64::NEG_INFINITY;
        }
        let (a, b) = (x.sqrt(), y.sqrt());
        let r = self.shift;
        let terms = [
            self.log_phi(a - r, b - r),
            self.log_phi(a - r, -b - r),
            self.log_phi(-a - r, b - r),
            self.log_phi(-a - r, -b - r),
        ];
        let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = terms.iter().map(|t| (t - top).exp()).sum();
        top + sum.ln() - 2.0 * LN_2 - 0.5 * (x.ln() + y.ln())
    }
}

/// Rectangular lattice in the open positive quadrant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

impl LatticeGrid {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        for axis in [&xs, &ys] {
            if axis.is_empty()
                || axis.iter().any(|v| !(v.is_finite() && *v > 0.0))
                || axis.windows(2).any(|w| !(w[0] < w[1]))
            {
                return Err(Error::InvalidArgument(
                    "lattice axes must be nonempty, strictly positive and strictly increasing"
                        .into(),
                ));
            }
        }
        Ok(Self { xs, ys })
    }

    /// Geometric `n × n` grid spanning `[lo, hi]` on each axis.
    pub fn geometric(x_range: (f64, f64), y_range: (f64, f64), n: usize) -> Result<Self> {
        Self::new(
            geometric(x_range.0, x_range.1, n),
            geometric(y_range.0, y_range.1, n),
        )
    }

    /// Default grid covering the marginal quantile band of every density.
    pub fn covering(densities: &[&SquaredGaussianDensity]) -> Result<Self> {
        let (plo, phi) = LATTICE_QUANTILES;
        let range = |c: usize| {
            let lo = densities
                .iter()
                .map(|d| d.marginal_quantile(c, plo))
                .fold(f64::INFINITY, f64::min);
            let hi = densities
                .iter()
                .map(|d| d.marginal_quantile(c, phi))
                .fold(0.0, f64::max);
            (lo, hi)
        };
        Self::geometric(range(0), range(1), LATTICE_POINTS)
    }

    fn table(&self, d: &dyn BivariateDensity) -> Vec<Vec<f64>> {
        par::map_slice(&self.xs, |&x| self.ys.iter().map(|&y| d.log_density(x, y)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeWitness {
    pub x: (f64, f64),
    pub y: (f64, f64),
    /// Logs of the two sides; the inequality is `lhs ≤ rhs`.
    pub log_lhs: f64,
    pub log_rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeReport {
    pub verdict: Verdict<LatticeWitness>,
    pub pairs_checked: u64,
    /// Largest `log_lhs − log_rhs` over all checked pairs.
    pub max_log_gap: f64,
}

/// Shared core: checks `f(x)·h(y) ≤ f(x∨y)·h(x∧y)` on every ordered pair of
/// grid points, from log tables.
fn cross_lattice(grid: &LatticeGrid, f: &[Vec<f64>], h: &[Vec<f64>], symmetric: bool) -> LatticeReport {
    let (nx, ny) = (grid.xs.len(), grid.ys.len());
    let slack = LATTICE_TOL.ln_1p();
    let rows = par::map_range(nx, |a1| {
        let mut first = None;
        let mut gap = f64::NEG_INFINITY;
        let mut count = 0u64;
        for a2 in 0..ny {
            for b1 in 0..nx {
                for b2 in 0..ny {
                    // the FKG inequality only has content on incomparable pairs
                    if symmetric && !(a1 < b1 && a2 > b2) {
                        continue;
                    }
                    count += 1;
                    let lhs = f[a1][a2] + h[b1][b2];
                    let rhs = f[a1.max(b1)][a2.max(b2)] + h[a1.min(b1)][a2.min(b2)];
                    if lhs == f64::NEG_INFINITY {
                        continue;
                    }
                    let g = lhs - rhs;
                    gap = gap.max(g);
                    if g > slack && first.is_none() {
                        first = Some(LatticeWitness {
                            x: (grid.xs[a1], grid.ys[a2]),
                            y: (grid.xs[b1], grid.ys[b2]),
                            log_lhs: lhs,
                            log_rhs: rhs,
                        });
                    }
                }
            }
        }
        (first, gap, count)
    });
    let mut witness = None;
    let mut max_log_gap = f64::NEG_INFINITY;
    let mut pairs_checked = 0;
    for (w, g, c) in rows {
        pairs_checked += c;
        max_log_gap = max_log_gap.max(g);
        if witness.is_none() {
            witness = w;
        }
    }
    LatticeReport {
        verdict: witness.map_or(Verdict::Holds, Verdict::fails),
        pairs_checked,
        max_log_gap,
    }
}

/// FKG lattice condition `h(x)h(y) ≤ h(x∧y)h(x∨y)` over all grid pairs.
pub fn fkg_lattice_test(density: &dyn BivariateDensity, grid: &LatticeGrid) -> LatticeReport {
    let t = grid.table(density);
    cross_lattice(grid, &t, &t, true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftedOrderWitness {
    pub r: f64,
    pub r_prime: f64,
    pub lattice: LatticeWitness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftedPairResult {
    pub r: f64,
    pub r_prime: f64,
    pub grid: LatticeGrid,
    pub report: LatticeReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftedOrderReport {
    pub verdict: Verdict<ShiftedOrderWitness>,
    pub per_pair: Vec<ShiftedPairResult>,
    /// Recognizer verdict on the same kernel, reported alongside.
    pub green: GreenVerdict,
}

/// Cross inequality `f_r(x) f_{r'}(y) ≤ f_r(x∨y) f_{r'}(x∧y)` for the
/// densities `f_r` of `(η + r)²`, over every ordered pair of lattice points
/// and every `(r, r')` with `r ≥ r' ≥ 0`. Without an explicit grid each pair
/// gets the default grid covering both marginal quantile bands.
pub fn shifted_strong_order_test(
    g: &KernelMatrix,
    r_pairs: &[(f64, f64)],
    grid: Option<&LatticeGrid>,
) -> Result<ShiftedOrderReport> {
    if r_pairs.is_empty() {
        return Err(Error::InvalidArgument("no r-pairs given".into()));
    }
    if let Some(&(r, rp)) = r_pairs
        .iter()
        .find(|(r, rp)| !(r.is_finite() && *rp >= 0.0 && r >= rp))
    {
        return Err(Error::InvalidArgument(format!(
            "r-pair ({r}, {rp}) must satisfy r ≥ r' ≥ 0"
        )));
    }
    let mut per_pair = Vec::with_capacity(r_pairs.len());
    for &(r, r_prime) in r_pairs {
        let fr = SquaredGaussianDensity::new(g, r)?;
        let frp = SquaredGaussianDensity::new(g, r_prime)?;
        let grid = match grid {
            Some(grid) => grid.clone(),
            None => LatticeGrid::covering(&[&fr, &frp])?,
        };
        let report = cross_lattice(&grid, &grid.table(&fr), &grid.table(&frp), false);
        per_pair.push(ShiftedPairResult {
            r,
            r_prime,
            grid,
            report,
        });
    }
    let verdict = per_pair
        .iter()
        .find_map(|p| {
            p.report.verdict.witness().map(|w| ShiftedOrderWitness {
                r: p.r,
                r_prime: p.r_prime,
                lattice: w.clone(),
            })
        })
        .map_or(Verdict::Holds, Verdict::fails);
    Ok(ShiftedOrderReport {
        verdict,
        per_pair,
        green: is_green(g),
    })
}
