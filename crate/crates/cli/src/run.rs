use std::fs;
use std::io::{BufWriter, Read};
use std::path::{Path, PathBuf};

use permacheck_core::assoc::{
    association_mc_test, random_scalings, resolvent_monotonicity_scan, shifted_strong_order_test,
    sign_condition_scan, FamilyConfig,
};
use permacheck_core::betaperm::{beta_permanent_with, beta_positivity_scan, ScanConfig};
use permacheck_core::defaults::{self, DEFAULT_SEED};
use permacheck_core::green::{
    green_from_chain, hadamard_power, is_green, plus_constant_check, restriction, TransientChain,
};
use permacheck_core::idcheck::{id_verdict_with, shifted_pair_id_test};
use permacheck_core::report::{render, render_table, Format, Report};
use permacheck_core::sampler::{sample_permanental, tilt_resolvent, PermanentalSpec};
use permacheck_core::{Error, KernelMatrix, Outcome};
use serde::Serialize;
use serde_json::json;

use crate::args::{Cli, Command, FormatArg, GreenCommand, ScanOpts};

pub type CliResult<T> = std::result::Result<T, Failure>;

/// An error with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub kind: String,
    pub message: String,
    pub code: i32,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            kind: e.kind().to_string(),
            message: e.to_string(),
            code: if e.is_numeric() { 3 } else { 2 },
        }
    }
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            kind: "usage".into(),
            message: message.into(),
            code: 2,
        }
    }

    pub fn to_json(&self) -> String {
        json!({"error": {"kind": self.kind, "message": self.message, "exit_code": self.code}})
            .to_string()
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| Failure::from(Error::from(e)))?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| Failure {
        kind: "io".into(),
        message: format!("{}: {e}", path.display()),
        code: 2,
    })
}

fn load(path: &Path) -> CliResult<KernelMatrix> {
    Ok(KernelMatrix::parse(&read_text(path)?)?)
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| Failure {
        kind: "io".into(),
        message: format!("{}: {e}", path.display()),
        code: 2,
    })
}

/// `--seed`, then `PERMACHECK_SEED`, then the built-in default.
pub fn resolve_seed(flag: Option<u64>) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("PERMACHECK_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::usage(format!("PERMACHECK_SEED={v:?} is not a 64-bit integer"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn scan_config(opts: &ScanOpts) -> ScanConfig {
    ScanConfig {
        betas: opts.betas.clone().map_or_else(defaults::beta_grid, |g| g.0),
        alphas: opts.alphas.clone().map_or_else(defaults::alpha_grid, |g| g.0),
        m_max: opts.m_max,
        convention: opts.convention.into(),
    }
}

#[derive(Serialize)]
struct ScanParams {
    alphas: Vec<f64>,
    betas: Vec<f64>,
    m_max: usize,
    convention: permacheck_core::betaperm::ExponentConvention,
}

impl From<&ScanConfig> for ScanParams {
    fn from(c: &ScanConfig) -> Self {
        Self {
            alphas: c.alphas.clone(),
            betas: c.betas.clone(),
            m_max: c.m_max,
            convention: c.convention,
        }
    }
}

fn parse_scalings(spec: &str, dim: usize, decades: f64, seed: u64) -> CliResult<Vec<Vec<f64>>> {
    if spec == "identity" {
        return Ok(vec![vec![1.0; dim]]);
    }
    if let Some(count) = spec.strip_prefix("random:") {
        let count: usize = count
            .parse()
            .ok()
            .filter(|c| *c > 0)
            .ok_or_else(|| Failure::usage(format!("{spec:?}: count must be a positive integer")))?;
        if !(decades.is_finite() && decades >= 0.0) {
            return Err(Failure::usage("--decades must be nonnegative"));
        }
        return Ok(random_scalings(dim, count, decades, seed));
    }
    spec.split(';')
        .map(|d| {
            let v: Vec<f64> = d
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| Failure::usage(format!("{d:?} is not a list of numbers")))?;
            if v.len() != dim || v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(Failure::usage(format!(
                    "scaling {d:?} must have {dim} positive entries"
                )));
            }
            Ok(v)
        })
        .collect()
}

/// What a command produced: the report, plus an optional line for stdout
/// that replaces the report there.
struct Output {
    report: Report,
    value_line: Option<String>,
}

fn output<P: Serialize, R: Serialize>(
    command: &str,
    outcome: Option<Outcome>,
    params: &P,
    result: &R,
) -> CliResult<Output> {
    Ok(Output {
        report: Report::new(command, outcome, params, result)?,
        value_line: None,
    })
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn opt_path(p: &Option<PathBuf>) -> Option<String> {
    p.as_deref().map(path_str)
}

fn dispatch(cli: &Cli) -> CliResult<Output> {
    match &cli.command {
        Command::CheckId(a) => {
            let g = load(&a.input)?;
            let cfg = scan_config(&a.scan);
            let v = id_verdict_with(&g, a.beta, &cfg)?;
            output(
                "check-id",
                Some(v.outcome()),
                &json!({"input": path_str(&a.input), "beta": a.beta, "scan": ScanParams::from(&cfg)}),
                &v,
            )
        }
        Command::Perm(a) => {
            let m = load(&a.input)?;
            let value = beta_permanent_with(m.matrix(), a.beta, a.convention.into())?;
            let conv: permacheck_core::betaperm::ExponentConvention = a.convention.into();
            let mut out = output(
                "perm",
                None,
                &json!({"input": path_str(&a.input), "beta": a.beta, "convention": conv}),
                &json!({"value": value, "dim": m.dim()}),
            )?;
            out.value_line = Some(format!("{value}"));
            Ok(out)
        }
        Command::PermScan(a) => {
            let g = load(&a.input)?;
            let cfg = scan_config(&a.scan);
            let r = beta_positivity_scan(&g, &cfg)?;
            output(
                "perm-scan",
                Some(r.verdict),
                &json!({"input": path_str(&a.input), "scan": ScanParams::from(&cfg)}),
                &r,
            )
        }
        Command::Green(g) => green(g),
        Command::Sample(a) => {
            let seed = resolve_seed(cli.seed)?;
            let spec = PermanentalSpec::squared_gaussian(load(&a.kernel)?, a.k)?;
            let mut batch = sample_permanental(&spec, a.n, seed)?;
            if let Some(alpha) = a.tilt {
                batch = tilt_resolvent(&batch, alpha)?;
            }
            if let Some(path) = &a.out {
                let file = fs::File::create(path).map_err(|e| Failure {
                    kind: "io".into(),
                    message: format!("{}: {e}", path.display()),
                    code: 2,
                })?;
                batch.write_to(BufWriter::new(file))?;
            }
            let means: Vec<_> = (0..batch.dim())
                .map(|c| batch.estimate(move |d| d[c]))
                .collect();
            output(
                "sample",
                None,
                &json!({"kernel": path_str(&a.kernel), "k": a.k, "n": a.n, "seed": seed,
                        "tilt": a.tilt, "out": opt_path(&a.out)}),
                &json!({"draws": batch.len(), "dim": batch.dim(), "index_beta": spec.index_beta,
                        "means": means, "ess": batch.ess(), "tilt": batch.tilt()}),
            )
        }
        Command::CheckAssoc(a) => {
            let seed = resolve_seed(cli.seed)?;
            let spec = PermanentalSpec::squared_gaussian(load(&a.kernel)?, a.k)?;
            let cfg = FamilyConfig {
                quantile_levels: a.levels.0.clone(),
                joint_orthants: a.joint,
                soft_slope: a.soft,
                ..FamilyConfig::default()
            };
            let r = association_mc_test(&spec, &cfg, a.n, seed)?;
            output(
                "check-assoc",
                Some(r.verdict.outcome()),
                &json!({"kernel": path_str(&a.kernel), "k": a.k, "n": a.n, "seed": seed, "family": cfg}),
                &r,
            )
        }
        Command::ScanMonotone(a) => {
            let seed = resolve_seed(cli.seed)?;
            let g = load(&a.kernel)?;
            let scalings = parse_scalings(&a.scalings, g.dim(), a.decades, seed)?;
            let mono = resolvent_monotonicity_scan(&g, &a.alphas.0, &scalings)?;
            let sign = sign_condition_scan(&g, &a.alphas.0)?;
            output(
                "scan-monotone",
                Some(mono.verdict.outcome()),
                &json!({"kernel": path_str(&a.kernel), "alphas": a.alphas.0, "scalings": a.scalings,
                        "decades": a.decades, "seed": seed}),
                &json!({"monotonicity": mono, "sign_condition": sign}),
            )
        }
        Command::ShiftedOrder(a) => {
            let g = load(&a.kernel)?;
            let r = shifted_strong_order_test(&g, &a.r_pairs.0, None)?;
            output(
                "shifted-order",
                Some(r.verdict.outcome()),
                &json!({"kernel": path_str(&a.kernel), "r_pairs": a.r_pairs.0}),
                &r,
            )
        }
        Command::ShiftedPair(a) => {
            let v = shifted_pair_id_test(a.var_x, a.cov, a.var_y)?;
            output(
                "shifted-pair",
                Some(v.outcome()),
                &json!({"var_x": a.var_x, "cov": a.cov, "var_y": a.var_y}),
                &v,
            )
        }
        Command::Render(_) => unreachable!("render is handled before dispatch"),
    }
}

fn green(cmd: &GreenCommand) -> CliResult<Output> {
    match cmd {
        GreenCommand::Gen(a) => {
            let chain = TransientChain::from_kernel(&load(&a.chain)?)?;
            let g = green_from_chain(&chain)?;
            write_matrix(&a.out, &g)?;
            let v = is_green(&g);
            output(
                "green-gen",
                Some(v.outcome()),
                &json!({"chain": path_str(&a.chain), "out": opt_path(&a.out)}),
                &json!({"matrix": g, "green": v}),
            )
        }
        GreenCommand::Check(a) => {
            let g = load(&a.input)?;
            let v = is_green(&g);
            output("green-check", Some(v.outcome()), &json!({"input": path_str(&a.input)}), &v)
        }
        GreenCommand::Power(a) => {
            let h = hadamard_power(&load(&a.input)?, a.beta)?;
            write_matrix(&a.out, &h.matrix)?;
            output(
                "green-power",
                Some(h.green.outcome()),
                &json!({"input": path_str(&a.input), "beta": a.beta, "out": opt_path(&a.out)}),
                &h,
            )
        }
        GreenCommand::PlusC(a) => {
            let g = load(&a.input)?;
            let cfg = scan_config(&a.scan);
            let grid = a.grid.clone().map_or_else(defaults::c_grid, |g| g.0);
            let r = plus_constant_check(&g, &grid, &cfg)?;
            output(
                "green-plus-c",
                Some(r.verdict.outcome()),
                &json!({"input": path_str(&a.input), "grid": grid, "scan": ScanParams::from(&cfg)}),
                &r,
            )
        }
        GreenCommand::Restrict(a) => {
            let g = load(&a.input)?;
            let sub = restriction(&g, &a.keep.0)?;
            write_matrix(&a.out, &sub)?;
            let v = is_green(&sub);
            output(
                "green-restrict",
                Some(v.outcome()),
                &json!({"input": path_str(&a.input), "keep": a.keep.0.iter().map(|k| k + 1).collect::<Vec<_>>(),
                        "out": opt_path(&a.out)}),
                &json!({"indices": a.keep.0, "matrix": sub, "green": v}),
            )
        }
    }
}

fn write_matrix(out: &Option<PathBuf>, m: &KernelMatrix) -> CliResult<()> {
    match out {
        Some(path) => write_file(path, m.to_csv().as_bytes()),
        None => Ok(()),
    }
}

fn format_of(cli: &Cli) -> Format {
    match cli.format {
        FormatArg::Json => Format::Json,
        FormatArg::Table => Format::Table,
    }
}

/// Runs a parsed command line; returns the exit code on success.
pub fn execute(cli: &Cli) -> CliResult<i32> {
    if let Command::Render(a) = &cli.command {
        let text = render(&read_text(&a.input)?, format_of(cli))?;
        emit(cli, &text, None)?;
        return Ok(0);
    }
    let out = dispatch(cli)?;
    let text = match format_of(cli) {
        Format::Json => out.report.to_json(),
        Format::Table => render_table(&out.report),
    };
    emit(cli, &text, out.value_line.as_deref())?;
    Ok(out.report.outcome.map_or(0, Outcome::exit_code))
}

/// With `--report`, the report goes to the file and stdout gets the value
/// line (if any); otherwise the value line replaces the report on stdout.
fn emit(cli: &Cli, text: &str, value_line: Option<&str>) -> CliResult<()> {
    match (&cli.report, value_line) {
        (Some(path), v) => {
            write_file(path, text.as_bytes())?;
            if let Some(v) = v {
                println!("{v}");
            }
        }
        (None, Some(v)) => println!("{v}"),
        (None, None) => print!("{text}"),
    }
    Ok(())
}
