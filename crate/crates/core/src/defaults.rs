//! Default grids and tolerances. Every report echoes [`Defaults::current`]
//! so a result can be traced back to the settings that produced it.

use serde::{Deserialize, Serialize};

/// Report schema version.
pub const SCHEMA_VERSION: u32 = 1;

/// Absolute tolerance for algebraic identities.
pub const ALGEBRAIC_TOL: f64 = 1e-10;
/// Tolerance for inversion round trips `‖GH − I‖∞`.
pub const INVERSION_TOL: f64 = 1e-8;
/// Condition-number cap above which inversion is refused.
pub const CONDITION_CAP: f64 = 1e12;
/// `|Im λ| ≤ IMAG_CUTOFF·‖G‖` counts as a real eigenvalue.
pub const IMAG_CUTOFF: f64 = 1e-9;
/// Relative tolerance on eigenvalue signs (PSD / PD / real-eigenvalue screens).
pub const EIGEN_TOL: f64 = 1e-9;
/// Largest matrix handed to the permutation-sum β-permanent.
pub const PERMANENT_CAP: usize = 8;
/// β-permanent values below `−NEGATIVITY_TOL·max|entry|^m` are negative.
pub const NEGATIVITY_TOL: f64 = 1e-10;
/// Entries below `ZERO_TOL·max|G|` are treated as zero for sign logic.
pub const ZERO_TOL: f64 = 1e-12;
/// One-sided z-score at or below which an association pair is a violation.
pub const Z_THRESHOLD: f64 = -3.0;
/// Contiguous draw groups for the grouped jackknife.
pub const JACKKNIFE_GROUPS: usize = 100;
/// Relative slack on steps of the `E|η_α(i)η_α(j)|` sequences.
pub const MONOTONE_TOL: f64 = 1e-10;
/// Points per axis of the FKG / strong-order lattice.
pub const LATTICE_POINTS: usize = 40;
/// Marginal quantile levels bounding the lattice.
pub const LATTICE_QUANTILES: (f64, f64) = (0.01, 0.99);
/// Multiplicative slack on lattice inequalities.
pub const LATTICE_TOL: f64 = 1e-9;
/// Largest permanent index multiset size scanned by default.
pub const M_MAX: usize = 5;
/// Seed used when neither `--seed` nor `PERMACHECK_SEED` is given.
pub const DEFAULT_SEED: u64 = 42;

/// β ∈ {0.1, 0.2, …, 2.0}.
pub fn beta_grid() -> Vec<f64> {
    (1..=20).map(|k| f64::from(k) / 10.0).collect()
}

/// α ∈ {0, 0.5, …, 5}.
pub fn alpha_grid() -> Vec<f64> {
    (0..=10).map(|k| f64::from(k) / 2.0).collect()
}

/// Constants added to a kernel by the `G + c` check.
pub fn c_grid() -> Vec<f64> {
    vec![0.25, 0.5, 1.0, 2.0, 4.0]
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Defaults {
    pub schema: u32,
    pub algebraic_tol: f64,
    pub inversion_tol: f64,
    pub condition_cap: f64,
    pub imag_cutoff: f64,
    pub eigen_tol: f64,
    pub permanent_cap: usize,
    pub negativity_tol: f64,
    pub zero_tol: f64,
    pub z_threshold: f64,
    pub jackknife_groups: usize,
    pub monotone_tol: f64,
    pub lattice_points: usize,
    pub lattice_quantiles: (f64, f64),
    pub lattice_tol: f64,
    pub m_max: usize,
    pub beta_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    pub c_grid: Vec<f64>,
    pub seed: u64,
}

impl Defaults {
    pub fn current() -> Self {
        Self {
            schema: SCHEMA_VERSION,
            algebraic_tol: ALGEBRAIC_TOL,
            inversion_tol: INVERSION_TOL,
            condition_cap: CONDITION_CAP,
            imag_cutoff: IMAG_CUTOFF,
            eigen_tol: EIGEN_TOL,
            permanent_cap: PERMANENT_CAP,
            negativity_tol: NEGATIVITY_TOL,
            zero_tol: ZERO_TOL,
            z_threshold: Z_THRESHOLD,
            jackknife_groups: JACKKNIFE_GROUPS,
            monotone_tol: MONOTONE_TOL,
            lattice_points: LATTICE_POINTS,
            lattice_quantiles: LATTICE_QUANTILES,
            lattice_tol: LATTICE_TOL,
            m_max: M_MAX,
            beta_grid: beta_grid(),
            alpha_grid: alpha_grid(),
            c_grid: c_grid(),
            seed: DEFAULT_SEED,
        }
    }
}
