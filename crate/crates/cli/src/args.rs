use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use permacheck_core::betaperm::ExponentConvention;
use permacheck_core::defaults;

/// Infinite divisibility and positive-association checks for squared
/// Gaussian and permanental vectors.
///
/// Exit codes: 0 holds, 1 fails, 2 usage or input error, 3 numeric failure,
/// 4 inconclusive. Errors are reported as a JSON object on stderr.
#[derive(Debug, Parser)]
#[command(name = "permacheck", version)]
pub struct Cli {
    /// Worker threads for data-parallel loops (default: all cores). Results do
    /// not depend on this.
    #[arg(long, global = true, value_parser = parse_threads)]
    pub threads: Option<usize>,

    /// Report rendering. `table` is lossy.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Json)]
    pub format: FormatArg,

    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,

    /// RNG seed for Monte Carlo commands; overrides PERMACHECK_SEED.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    /// β raised to the number of cycles of τ.
    CycleCount,
    /// β raised to the sign of τ.
    Signature,
}

impl From<ConventionArg> for ExponentConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::CycleCount => ExponentConvention::CycleCount,
            ConventionArg::Signature => ExponentConvention::Signature,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Infinite-divisibility verdict for the permanental vector (kernel, β).
    CheckId(CheckIdArgs),
    /// β-permanent of a square matrix; prints the value.
    Perm(PermArgs),
    /// β-positivity scan over resolvents, index multisets and a β grid.
    PermScan(PermScanArgs),
    /// Green matrices of transient chains.
    #[command(subcommand)]
    Green(GreenCommand),
    /// Exact sampling of a squared Gaussian / permanental vector (β = 2/k).
    Sample(SampleArgs),
    /// Monte Carlo covariance test over increasing functionals.
    CheckAssoc(CheckAssocArgs),
    /// Monotonicity in α of E|η_α(i)η_α(j)| under diagonal rescalings.
    ScanMonotone(ScanMonotoneArgs),
    /// Shifted strong stochastic ordering of a 2×2 kernel on a lattice.
    ShiftedOrder(ShiftedOrderArgs),
    /// Shift-infinite-divisibility criterion for a Gaussian couple.
    ShiftedPair(ShiftedPairArgs),
    /// Re-render a JSON report.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct ScanOpts {
    /// α grid: comma list or lo:hi:step [default: 0, 0.5, …, 5].
    #[arg(long, value_parser = parse_grid)]
    pub alphas: Option<Grid>,
    /// β grid: comma list or lo:hi:step [default: 0.1, 0.2, …, 2].
    #[arg(long, value_parser = parse_grid)]
    pub betas: Option<Grid>,
    /// Largest index multiset size.
    #[arg(long, default_value_t = defaults::M_MAX)]
    pub m_max: usize,
    #[arg(long, value_enum, default_value_t = ConventionArg::CycleCount)]
    pub convention: ConventionArg,
}

#[derive(Debug, Args)]
pub struct CheckIdArgs {
    /// Kernel matrix (CSV or JSON).
    #[arg(long, visible_alias = "kernel")]
    pub input: PathBuf,
    /// Index β > 0.
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    #[command(flatten)]
    pub scan: ScanOpts,
}

#[derive(Debug, Args)]
pub struct PermArgs {
    #[arg(long, visible_alias = "kernel")]
    pub input: PathBuf,
    /// Any real β, e.g. −1 for (−1)^m det.
    #[arg(long, allow_negative_numbers = true)]
    pub beta: f64,
    #[arg(long, value_enum, default_value_t = ConventionArg::CycleCount)]
    pub convention: ConventionArg,
}

#[derive(Debug, Args)]
pub struct PermScanArgs {
    #[arg(long, visible_alias = "kernel")]
    pub input: PathBuf,
    #[command(flatten)]
    pub scan: ScanOpts,
}

#[derive(Debug, Subcommand)]
pub enum GreenCommand {
    /// Potential matrix (I − Q)⁻¹ of a sub-Markov kernel Q.
    Gen(GreenGenArgs),
    /// Recognize a Green matrix.
    Check(GreenInputArgs),
    /// Hadamard power G^β entrywise, β ≥ 1.
    Power(GreenPowerArgs),
    /// Infinite divisibility (index 2) of G + c over a grid of c.
    PlusC(GreenPlusArgs),
    /// Principal submatrix on the kept (1-based) indices.
    Restrict(GreenRestrictArgs),
}

#[derive(Debug, Args)]
pub struct GreenGenArgs {
    /// Chain kernel Q (CSV or JSON).
    #[arg(long)]
    pub chain: PathBuf,
    /// Write the matrix as CSV here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GreenInputArgs {
    #[arg(long, visible_alias = "kernel")]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct GreenPowerArgs {
    #[arg(long, visible_alias = "kernel")]
    pub input: PathBuf,
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GreenPlusArgs {
    #[arg(long, visible_alias = "kernel")]
    pub input: PathBuf,
    /// Shifts c > 0, comma list or lo:hi:step [default: 0.25, 0.5, 1, 2, 4].
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<Grid>,
    #[command(flatten)]
    pub scan: ScanOpts,
}

#[derive(Debug, Args)]
pub struct GreenRestrictArgs {
    #[arg(long, visible_alias = "kernel")]
    pub input: PathBuf,
    /// 1-based indices to keep, e.g. 1,3.
    #[arg(long, value_parser = parse_keep)]
    pub keep: Keep,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, visible_alias = "input")]
    pub kernel: PathBuf,
    /// Number of squared Gaussian summands (β = 2/k).
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Number of draws; scientific notation allowed.
    #[arg(long, value_parser = parse_count, default_value = "1000000")]
    pub n: usize,
    /// Tilt towards resolvent(G, α).
    #[arg(long)]
    pub tilt: Option<f64>,
    /// Binary batch output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckAssocArgs {
    #[arg(long, visible_alias = "input")]
    pub kernel: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, value_parser = parse_count, default_value = "1000000")]
    pub n: usize,
    /// Marginal quantile levels for orthant indicators.
    #[arg(long, value_parser = parse_grid, default_value = "0.25,0.5,0.75")]
    pub levels: Grid,
    /// Add joint orthants at each level.
    #[arg(long)]
    pub joint: bool,
    /// Add soft indicators at the medians with this slope.
    #[arg(long)]
    pub soft: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ScanMonotoneArgs {
    #[arg(long, visible_alias = "input")]
    pub kernel: PathBuf,
    #[arg(long, value_parser = parse_grid, default_value = "0:5:0.25")]
    pub alphas: Grid,
    /// `identity`, `random:N`, or explicit scalings `d1,d2;d1,d2`.
    #[arg(long, default_value = "identity")]
    pub scalings: String,
    /// Random scalings are 10^u with u uniform on [−decades, decades].
    #[arg(long, default_value_t = 2.0)]
    pub decades: f64,
}

#[derive(Debug, Args)]
pub struct ShiftedOrderArgs {
    #[arg(long, visible_alias = "input")]
    pub kernel: PathBuf,
    /// Pairs r,r' separated by `;`, each with r ≥ r' ≥ 0.
    #[arg(long, value_parser = parse_r_pairs, default_value = "1,0.5;2,1")]
    pub r_pairs: RPairs,
}

#[derive(Debug, Args)]
pub struct ShiftedPairArgs {
    #[arg(long)]
    pub var_x: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub cov: f64,
    #[arg(long)]
    pub var_y: f64,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Report JSON; `-` for standard input.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct Keep(pub Vec<usize>);

#[derive(Debug, Clone, PartialEq)]
pub struct RPairs(pub Vec<(f64, f64)>);

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("{s:?} is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s:?} is not finite"))
    }
}

fn parse_threads(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) | Err(_) => Err(format!("{s:?} is not a positive thread count")),
        Ok(n) => Ok(n),
    }
}

/// Comma list, or an inclusive `lo:hi:step` range.
pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [lo, hi, step] => {
            let (lo, hi, step) = (parse_f64(lo)?, parse_f64(hi)?, parse_f64(step)?);
            if !(step > 0.0 && hi >= lo) {
                return Err(format!("{s:?} needs lo ≤ hi and step > 0"));
            }
            let n = ((hi - lo) / step + 1e-9).floor() as usize;
            Ok(Grid((0..=n).map(|k| lo + k as f64 * step).collect()))
        }
        [list] => list
            .split(',')
            .map(parse_f64)
            .collect::<Result<Vec<_>, _>>()
            .map(Grid),
        _ => Err(format!("{s:?} is neither a list nor lo:hi:step")),
    }
}

/// Positive integer count, accepting forms like `1e6`.
pub fn parse_count(s: &str) -> Result<usize, String> {
    if let Ok(n) = s.parse::<usize>() {
        return if n > 0 { Ok(n) } else { Err("count must be positive".into()) };
    }
    let v = parse_f64(s)?;
    if v >= 1.0 && v.fract() == 0.0 && v <= 9.007_199_254_740_992e15 {
        Ok(v as usize)
    } else {
        Err(format!("{s:?} is not a positive integer"))
    }
}

pub fn parse_keep(s: &str) -> Result<Keep, String> {
    s.split(',')
        .map(|p| match p.trim().parse::<usize>() {
            Ok(k) if k >= 1 => Ok(k - 1),
            _ => Err(format!("{p:?} is not a 1-based index")),
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Keep)
}

pub fn parse_r_pairs(s: &str) -> Result<RPairs, String> {
    s.split(';')
        .map(|pair| match pair.split(',').collect::<Vec<_>>().as_slice() {
            [r, rp] => Ok((parse_f64(r)?, parse_f64(rp)?)),
            _ => Err(format!("{pair:?} is not r,r'")),
        })
        .collect::<Result<Vec<_>, _>>()
        .map(RPairs)
}
