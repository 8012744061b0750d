//! Command-line front end. Exit codes: 0 success, 1 failed check or scan, 2 usage error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::feasibility::{
    closed_form_boundary, empirical_boundary, Direction, AGREEMENT_TOL, DEFAULT_BUDGET, MIN_BUDGET,
};
use crate::regions::{ellipse_residual, s_interval, sample_boundary, PairKind};
use crate::verify::{self, DeviceName, VerifyOptions};

#[derive(Debug, Parser)]
#[command(
    name = "qcompat",
    version,
    about = "Compatibility regions, joint devices and a feasibility oracle"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Export points of a region boundary as CSV.
    Region(RegionArgs),
    /// Build a named joint device and verify its margins.
    Check(CheckArgs),
    /// Compare the numerical oracle with the closed-form boundary.
    Scan(ScanArgs),
    /// Run the self-check suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PairArg {
    Qp,
    Ii,
    Qi,
}

impl From<PairArg> for PairKind {
    fn from(p: PairArg) -> Self {
        match p {
            PairArg::Qp => PairKind::QP,
            PairArg::Ii => PairKind::II,
            PairArg::Qi => PairKind::QI,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DirectionArg {
    Max,
    Min,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Write to this file instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    #[arg(long, value_enum)]
    pub pair: PairArg,
    #[arg(long)]
    pub d: usize,
    /// Allow negative noise parameters.
    #[arg(long)]
    pub extended: bool,
    /// Number of boundary points.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub device: String,
    #[arg(long)]
    pub d: usize,
    /// Noise parameter of parametric devices (default 0.5).
    #[arg(long, allow_negative_numbers = true)]
    pub param: Option<f64>,
    #[arg(long, hide = true)]
    pub inject_fault: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long, value_enum)]
    pub pair: PairArg,
    #[arg(long)]
    pub d: usize,
    /// Comma-separated values of t.
    #[arg(
        long = "t",
        value_delimiter = ',',
        required = true,
        allow_hyphen_values = true
    )]
    pub t_list: Vec<f64>,
    #[arg(long, value_enum, default_value = "max")]
    pub direction: DirectionArg,
    /// Iteration budget per feasibility check.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Also run the slow oracle checks (II at d = 3).
    #[arg(long)]
    pub all: bool,
    /// Comma-separated dimensions.
    #[arg(long = "d", value_delimiter = ',', default_values_t = vec![2, 3])]
    pub d_list: Vec<usize>,
    /// Corrupt the named device before verifying it.
    #[arg(long, hide = true)]
    pub inject_fault: Option<String>,
    #[command(flatten)]
    pub output: Output,
}

/// Failure modes mapped onto exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Io(io::Error),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

/// Parses the process arguments and runs the command.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Runs a parsed command; `Ok(false)` means a check or scan failed.
pub fn run(cli: &Cli) -> Result<bool, Failure> {
    match &cli.command {
        Command::Region(a) => region(a),
        Command::Check(a) => check(a),
        Command::Scan(a) => scan(a),
        Command::Verify(a) => run_verify(a),
    }
}

fn open(output: &Output) -> Result<Box<dyn Write>, Failure> {
    Ok(match &output.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Nine significant digits, trailing zeros dropped, no negative zero.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (8 - magnitude).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        s = s.trim_end_matches('0').trim_end_matches('.').to_string();
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

fn region(a: &RegionArgs) -> Result<bool, Failure> {
    let kind = PairKind::from(a.pair);
    let points = sample_boundary(kind, a.d, a.extended, a.n)?;
    let (s_lo, _) = kind.lower_bounds(a.d)?;
    let k = if kind == PairKind::QP { 1 } else { 2 };
    let mut w = open(&a.output)?;
    writeln!(w, "pair,d,extended,s,t,on_boundary")?;
    for (s, t) in points {
        let on_curve = if a.extended {
            s > s_lo + 1e-9 && s < 1.0 - 1e-9 || ellipse_residual(k, a.d, s, t).abs() < 1e-9
        } else {
            ellipse_residual(k, a.d, s, t).abs() < 1e-9
        };
        writeln!(
            w,
            "{kind},{},{},{},{},{}",
            a.d,
            a.extended,
            format_number(s),
            format_number(t),
            on_curve
        )?;
    }
    w.flush()?;
    Ok(true)
}

fn check(a: &CheckArgs) -> Result<bool, Failure> {
    let name: DeviceName = a.device.parse()?;
    let mut named = verify::build(name, a.d, a.param)?;
    if a.inject_fault {
        verify::inject_fault(&mut named)?;
    }
    let report = verify::check_device(&named)?;
    let passed = report.passed(crate::numkit::STRUCTURAL_TOL);
    let mut w = open(&a.output)?;
    writeln!(w, "device: {name}")?;
    writeln!(w, "d: {}", a.d)?;
    if let Some(p) = named.param {
        writeln!(w, "param: {}", format_number(p))?;
    }
    for m in &report.margins {
        writeln!(w, "{}: residual {:.3e}", m.label, m.residual)?;
    }
    writeln!(
        w,
        "normalization: residual {:.3e}",
        report.normalization_residual
    )?;
    writeln!(w, "psd margin: {:.3e}", report.psd_margin)?;
    for (label, value) in &report.detected {
        let v = value.map_or_else(|| "none".to_string(), format_number);
        writeln!(w, "detected {label}: {v}")?;
    }
    writeln!(w, "result: {}", if passed { "PASS" } else { "FAIL" })?;
    w.flush()?;
    Ok(passed)
}

fn scan(a: &ScanArgs) -> Result<bool, Failure> {
    let kind = PairKind::from(a.pair);
    kind.lower_bounds(a.d)?;
    if a.budget < MIN_BUDGET {
        return Err(Error::Budget(a.budget).into());
    }
    let direction = match a.direction {
        DirectionArg::Max => Direction::Max,
        DirectionArg::Min => Direction::Min,
    };
    use rayon::prelude::*;
    let rows: Vec<Option<(f64, f64)>> = a
        .t_list
        .par_iter()
        .map(|&t| {
            s_interval(kind, a.d, t).ok()?;
            let closed = closed_form_boundary(kind, a.d, t, direction).ok()?;
            let empirical = empirical_boundary(kind, a.d, t, direction, a.budget).ok()?;
            Some((closed, empirical))
        })
        .collect();
    let mut w = open(&a.output)?;
    writeln!(w, "t,s_closed,s_empirical,gap,status")?;
    let mut ok = true;
    for (&t, row) in a.t_list.iter().zip(rows) {
        match row {
            Some((closed, empirical)) => {
                let gap = (closed - empirical).abs();
                let pass = gap <= AGREEMENT_TOL;
                ok &= pass;
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    format_number(t),
                    format_number(closed),
                    format_number(empirical),
                    format_number(gap),
                    if pass { "PASS" } else { "FAIL" }
                )?;
            }
            None => {
                ok = false;
                writeln!(w, "{},,,,SKIP", format_number(t))?;
            }
        }
    }
    w.flush()?;
    Ok(ok)
}

fn run_verify(a: &VerifyArgs) -> Result<bool, Failure> {
    let fault = a
        .inject_fault
        .as_deref()
        .map(str::parse::<DeviceName>)
        .transpose()?;
    let options = VerifyOptions {
        dims: a.d_list.clone(),
        fault,
        long: a.all,
    };
    let reports = verify::run(&options)?;
    let mut w = open(&a.output)?;
    let mut ok = true;
    for r in &reports {
        ok &= r.ok();
        writeln!(
            w,
            "{:<14} {} passed, {} failed, {} skipped: {}",
            r.suite.name(),
            r.passed,
            r.failures.len(),
            r.skipped,
            if r.ok() { "PASS" } else { "FAIL" }
        )?;
        for f in &r.failures {
            writeln!(w, "  {f}")?;
        }
    }
    writeln!(w, "result: {}", if ok { "PASS" } else { "FAIL" })?;
    w.flush()?;
    Ok(ok)
}
