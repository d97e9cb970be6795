//! Command-line front end: dataset and grid CSV formats, the four
//! subcommands, and the exit-code contract (2 for unusable input, 3 for
//! estimator preconditions).

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::data::{DesignKind, Loss, SamplePairs};
use crate::design::{optimal_design, Callable, DesignTarget};
use crate::error::Error;
use crate::estimator::{fit, project_nonneg, DensityGrid};
use crate::quadrature::linspace;
use crate::risk::{risk_report, ClassKind, SmoothnessClass};
use crate::study::{run_study, MonteCarloReport, StudyConfig};

/// Version string written into every output preamble.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A failure with its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Unreadable, malformed or out-of-range input.
    #[error("{0}")]
    Input(String),
    /// The data were read but the estimator cannot run on them.
    #[error("{0}")]
    Estimation(String),
    /// Output could not be written.
    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Estimation(_) => 3,
            CliError::Output(_) => 1,
        }
    }
}

fn input<E: std::fmt::Display>(ctx: impl std::fmt::Display) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Input(format!("{ctx}: {e}"))
}

fn estimation(e: Error) -> CliError {
    CliError::Estimation(e.to_string())
}

fn output<E: std::fmt::Display>(path: &Path) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Output(format!("{}: {e}", path.display()))
}

/// Lossless decimal form: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_else(|| "NA".into())
}

#[derive(Deserialize)]
struct DatasetRow {
    y: f64,
    x: f64,
}

/// Reads a `y,x` CSV with an optional `# design=fixed|random` comment line
/// (random when absent).
pub fn read_dataset(path: &Path) -> Result<SamplePairs, CliError> {
    let text = fs::read_to_string(path).map_err(input(path.display()))?;
    parse_dataset(&text).map_err(|e| match e {
        CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Parses the dataset format from memory.
pub fn parse_dataset(text: &str) -> Result<SamplePairs, CliError> {
    let mut design = DesignKind::Random;
    for line in text.lines().map(str::trim).filter(|l| l.starts_with('#')) {
        if let Some(v) = line.trim_start_matches('#').trim().strip_prefix("design=") {
            design = v.parse().map_err(input("design annotation"))?;
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(input("header"))?.clone();
    if headers.len() != 2 || &headers[0] != "y" || &headers[1] != "x" {
        return Err(CliError::Input(format!(
            "expected header `y,x`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let (mut ys, mut xs) = (Vec::new(), Vec::new());
    for (i, rec) in reader.deserialize::<DatasetRow>().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(input(format!("row {row}")))?;
        if !rec.y.is_finite() || !rec.x.is_finite() {
            return Err(CliError::Input(format!("row {row}: non-finite value")));
        }
        if !(0.0..=1.0).contains(&rec.x) {
            return Err(CliError::Input(format!("row {row}: x = {} lies outside [0, 1]", rec.x)));
        }
        ys.push(rec.y);
        xs.push(rec.x);
    }
    if ys.is_empty() {
        return Err(CliError::Input("no data rows".into()));
    }
    SamplePairs::new(ys, xs, design).map_err(input("dataset"))
}

/// Writes the dataset format.
pub fn write_dataset(path: &Path, data: &SamplePairs) -> Result<(), CliError> {
    let mut s = format!("# design={}\ny,x\n", data.design());
    for (y, x) in data.iter() {
        let _ = writeln!(s, "{},{}", fmt_f64(y), fmt_f64(x));
    }
    fs::write(path, s).map_err(output(path))
}

/// A rectangular grid of estimates with its `# key=value` preamble.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFile {
    pub meta: Vec<(String, String)>,
    pub grid: DensityGrid,
}

impl GridFile {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_csv(&self) -> String {
        let g = &self.grid;
        let mut s = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k}={v}");
        }
        let _ = writeln!(s, "# ny={}\n# nx={}\ny,x,fhat", g.ys.len(), g.xs.len());
        for (iy, y) in g.ys.iter().enumerate() {
            for (ix, x) in g.xs.iter().enumerate() {
                let _ = writeln!(s, "{},{},{}", fmt_f64(*y), fmt_f64(*x), fmt_f64(g.get(iy, ix)));
            }
        }
        s
    }

    /// Parses a grid file, requiring every `(y_i, x_j)` exactly once in
    /// row-major order.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut meta = Vec::new();
        let (mut ny, mut nx) = (None, None);
        for line in text.lines().filter(|l| l.starts_with('#')) {
            let Some((k, v)) = line[1..].trim().split_once('=') else { continue };
            match k {
                "ny" => ny = Some(v.parse::<usize>().map_err(input("ny"))?),
                "nx" => nx = Some(v.parse::<usize>().map_err(input("nx"))?),
                _ => meta.push((k.to_string(), v.to_string())),
            }
        }
        let (ny, nx) = match (ny, nx) {
            (Some(a), Some(b)) if a > 0 && b > 0 => (a, b),
            _ => return Err(CliError::Input("grid preamble lacks ny/nx".into())),
        };
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut ys = Vec::with_capacity(ny);
        let mut xs = Vec::with_capacity(nx);
        let mut values = Vec::with_capacity(ny * nx);
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(input(format!("row {}", i + 1)))?;
            let field = |c: usize| -> Result<f64, CliError> {
                rec.get(c)
                    .ok_or_else(|| CliError::Input(format!("row {}: missing column", i + 1)))?
                    .parse::<f64>()
                    .map_err(input(format!("row {}", i + 1)))
            };
            let (y, x, v) = (field(0)?, field(1)?, field(2)?);
            let (iy, ix) = (i / nx, i % nx);
            if iy >= ny {
                return Err(CliError::Input(format!("row {}: more than ny * nx rows", i + 1)));
            }
            if ix == 0 {
                ys.push(y);
            } else if y.to_bits() != ys[iy].to_bits() {
                return Err(CliError::Input(format!("row {}: y changes within a grid row", i + 1)));
            }
            if iy == 0 {
                xs.push(x);
            } else if x.to_bits() != xs[ix].to_bits() {
                return Err(CliError::Input(format!("row {}: x does not repeat the first row", i + 1)));
            }
            values.push(v);
        }
        if values.len() != ny * nx {
            return Err(CliError::Input(format!(
                "grid has {} values, expected {}",
                values.len(),
                ny * nx
            )));
        }
        Ok(GridFile {
            meta,
            grid: DensityGrid { ys, xs, values },
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "ep-cde", version, about = "Adaptive conditional density estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the estimator to a `y,x` CSV and write its values on a grid.
    Estimate(EstimateArgs),
    /// Sharp minimax risk of a smoothness class.
    Risk(RiskArgs),
    /// Run a Monte Carlo study from a config file.
    Simulate(SimulateArgs),
    /// Optimal design density from sampled scale or mass values.
    Design(DesignArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LossArg {
    Square,
    Line,
}

impl From<LossArg> for Loss {
    fn from(l: LossArg) -> Loss {
        match l {
            LossArg::Square => Loss::Square,
            LossArg::Line => Loss::Line,
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub loss: LossArg,
    /// Response and predictor node counts.
    #[arg(long, num_args = 2, value_names = ["NY", "NX"], default_values_t = [101usize, 101])]
    pub grid: Vec<usize>,
    /// Response range of the grid; `[0, 1]` for the square loss, the data
    /// range widened by a quarter on each side for the line loss.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    pub y_range: Option<Vec<f64>>,
    /// Clip negative values and, under the line loss, renormalise each slice.
    #[arg(long)]
    pub project: bool,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DesignSource {
    Uniform,
    File,
}

#[derive(Debug, Args)]
pub struct RiskArgs {
    /// Class name and parameters: `sobolev MY MX`, `analytic-sobolev GAMMA MX`,
    /// `analytic GY GX`, `uni-sobolev ALPHA`, `uni-analytic GAMMA`,
    /// `bounded-spectrum Q`.
    #[arg(long, num_args = 1.., value_name = "CLASS PARAMS", allow_negative_numbers = true, required = true)]
    pub class: Vec<String>,
    /// Class radius; required by the Sobolev-type classes.
    #[arg(long = "Q")]
    pub radius: Option<f64>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "line")]
    pub loss: LossArg,
    #[arg(long, value_enum, default_value = "uniform")]
    pub design: DesignSource,
    /// `x,p` samples of the design density, for `--design file`.
    #[arg(long)]
    pub design_file: Option<PathBuf>,
    /// Overrides the coefficient of difficulty.
    #[arg(long)]
    pub difficulty: Option<f64>,
    /// Also write the report as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Directory receiving `summary.csv` and `replicates.csv`.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TargetArg {
    Regression,
    Cdensity,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["sigma_file", "mass_file"]))]
pub struct DesignArgs {
    #[arg(long, value_enum)]
    pub target: TargetArg,
    /// `x,sigma` samples of the regression scale function.
    #[arg(long)]
    pub sigma_file: Option<PathBuf>,
    /// `x,mass` samples of `integral_A f(y|x) dy`.
    #[arg(long)]
    pub mass_file: Option<PathBuf>,
    #[arg(long, default_value_t = 201)]
    pub grid: usize,
    /// Defaults to standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Runs a parsed command line, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    match cli.command {
        Command::Estimate(a) => cmd_estimate(&a, out),
        Command::Risk(a) => cmd_risk(&a, out),
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::Design(a) => cmd_design(&a, out),
    }
}

fn say(out: &mut dyn std::io::Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Output(format!("stdout: {e}")))
}

pub fn cmd_estimate(a: &EstimateArgs, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let (ny, nx) = (a.grid[0], a.grid[1]);
    if ny < 2 || nx < 2 {
        return Err(CliError::Input("--grid needs at least 2 nodes per axis".into()));
    }
    let loss = Loss::from(a.loss);
    let data = read_dataset(&a.input)?;
    let (lo, hi) = match (&a.y_range, loss) {
        (Some(r), _) => (r[0], r[1]),
        (None, Loss::Square) => (0.0, 1.0),
        (None, Loss::Line) => {
            let lo = data.y().iter().copied().fold(f64::INFINITY, f64::min);
            let hi = data.y().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let pad = 0.25 * (hi - lo).max(1e-3);
            (lo - pad, hi + pad)
        }
    };
    if !(lo < hi) {
        return Err(CliError::Input(format!("--y-range {lo} {hi} is empty")));
    }
    let fitted = fit(&data, loss, None, None).map_err(estimation)?;
    let mut grid = fitted
        .evaluate_grid(&linspace(lo, hi, ny), &linspace(0.0, 1.0, nx))
        .map_err(estimation)?;
    if a.project {
        let report = project_nonneg(&mut grid, loss);
        if !report.zero_slices.is_empty() {
            log::warn!("{} predictor slices vanished under projection", report.zero_slices.len());
        }
    }
    let s = fitted.schedule();
    let file = GridFile {
        meta: vec![
            ("loss".into(), loss.to_string()),
            ("n".into(), data.len().to_string()),
            ("seed".into(), "none".into()),
            ("version".into(), VERSION.into()),
            ("d_hat".into(), fmt_f64(fitted.difficulty())),
            ("K".into(), s.k_cut().to_string()),
            ("T".into(), s.t_cut().to_string()),
            ("projected".into(), a.project.to_string()),
        ],
        grid,
    };
    fs::write(&a.output, file.to_csv()).map_err(output(&a.output))?;
    say(
        out,
        &format!(
            "n = {}, d_hat = {:.6}, K = {}, T = {}; wrote {} x {} grid to {}\n",
            data.len(),
            fitted.difficulty(),
            s.k_cut(),
            s.t_cut(),
            ny,
            nx,
            a.output.display()
        ),
    )
}

fn class_from_args(a: &RiskArgs) -> Result<SmoothnessClass, CliError> {
    let name = a.class[0].as_str();
    let params = &a.class[1..];
    let want = |k: usize| -> Result<(), CliError> {
        if params.len() == k {
            Ok(())
        } else {
            Err(CliError::Input(format!("class `{name}` takes {k} parameter(s), got {}", params.len())))
        }
    };
    let real = |i: usize| params[i].parse::<f64>().map_err(input(format!("class parameter `{}`", params[i])));
    let order = |i: usize| params[i].parse::<u32>().map_err(input(format!("class order `{}`", params[i])));
    let needs_radius = matches!(name, "sobolev" | "analytic-sobolev" | "uni-sobolev");
    let radius = match (a.radius, needs_radius) {
        (Some(q), _) => q,
        (None, true) => return Err(CliError::Input(format!("class `{name}` requires --Q"))),
        (None, false) => 1.0,
    };
    let kind = match name {
        "sobolev" => {
            want(2)?;
            ClassKind::Sobolev { m_y: order(0)?, m_x: order(1)? }
        }
        "analytic-sobolev" => {
            want(2)?;
            ClassKind::AnalyticSobolev { gamma: real(0)?, m_x: order(1)? }
        }
        "analytic" => {
            want(2)?;
            ClassKind::Analytic { gamma_y: real(0)?, gamma_x: real(1)? }
        }
        "uni-sobolev" => {
            want(1)?;
            ClassKind::UniSobolev { alpha: order(0)? }
        }
        "uni-analytic" => {
            want(1)?;
            ClassKind::UniAnalytic { gamma: real(0)? }
        }
        "bounded-spectrum" => {
            want(1)?;
            ClassKind::BoundedSpectrum { q: real(0)? }
        }
        other => return Err(CliError::Input(format!("unknown class `{other}`"))),
    };
    SmoothnessClass::new(kind, radius).map_err(input("class"))
}

/// Two-column `x,value` samples on `[0, 1]`, sorted by `x`, all positive.
pub fn read_samples(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let text = fs::read_to_string(path).map_err(input(path.display()))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut pts = Vec::new();
    for (i, rec) in reader.deserialize::<(f64, f64)>().enumerate() {
        let (x, v) = rec.map_err(input(format!("{} row {}", path.display(), i + 1)))?;
        if !(0.0..=1.0).contains(&x) || !v.is_finite() {
            return Err(CliError::Input(format!("{} row {}: bad sample ({x}, {v})", path.display(), i + 1)));
        }
        if !(v > 0.0) {
            return Err(CliError::Input(format!("{} row {}: value {v} is not positive", path.display(), i + 1)));
        }
        pts.push((x, v));
    }
    if pts.len() < 2 {
        return Err(CliError::Input(format!("{}: at least two samples are required", path.display())));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(CliError::Input(format!("{}: repeated x value", path.display())));
    }
    Ok(pts)
}

/// Piecewise-linear interpolant, constant beyond the end samples.
fn interpolant(pts: Vec<(f64, f64)>) -> Callable {
    Arc::new(move |x: f64| {
        let i = pts.partition_point(|p| p.0 <= x);
        if i == 0 {
            return pts[0].1;
        }
        if i == pts.len() {
            return pts[i - 1].1;
        }
        let (a, b) = (pts[i - 1], pts[i]);
        a.1 + (x - a.0) / (b.0 - a.0) * (b.1 - a.1)
    })
}

fn trapezoid(xs: &[f64], vs: &[f64]) -> f64 {
    xs.windows(2)
        .zip(vs.windows(2))
        .map(|(x, v)| 0.5 * (x[1] - x[0]) * (v[0] + v[1]))
        .sum()
}

pub fn cmd_risk(a: &RiskArgs, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let class = class_from_args(a)?;
    let loss = Loss::from(a.loss);
    // With f(.|x) carried by [0, 1], both losses reduce d to int 1/p.
    let difficulty = match (a.difficulty, a.design) {
        (Some(d), _) => d,
        (None, DesignSource::Uniform) => 1.0,
        (None, DesignSource::File) => {
            let path = a
                .design_file
                .as_ref()
                .ok_or_else(|| CliError::Input("--design file requires --design-file".into()))?;
            let pts = read_samples(path)?;
            let (xs, ps): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            let mass = trapezoid(&xs, &ps);
            if (mass - 1.0).abs() > 1e-3 || xs[0] != 0.0 || xs[xs.len() - 1] != 1.0 {
                return Err(CliError::Input(format!(
                    "design samples must span [0, 1] and integrate to 1 (got {mass})"
                )));
            }
            let inv: Vec<f64> = ps.iter().map(|p| 1.0 / p).collect();
            trapezoid(&xs, &inv)
        }
    };
    if !(difficulty > 0.0) || !difficulty.is_finite() {
        return Err(CliError::Input(format!("difficulty {difficulty} is not positive")));
    }
    if a.n < 2 {
        return Err(CliError::Input("--n must be at least 2".into()));
    }
    let report = risk_report(&class, difficulty, a.n).map_err(estimation)?;
    let mut text = format!(
        "class: {}\nQ: {}\nn: {}\nloss: {loss}\nd: {:.6}\npinsker: {}\nrisk (closed form): {:.4e}\n",
        a.class.join(" "),
        class.radius(),
        a.n,
        report.coefficient_of_difficulty,
        report.pinsker.map_or("NA".into(), |p| format!("{p:.6}")),
        report.risk_closed_form,
    );
    if let (Some(r), Some(eta), Some(res)) = (report.risk_series, report.eta, report.eta_residual) {
        let _ = writeln!(text, "risk (series): {r:.4e}\neta: {eta:.6e}\nresidual: {res:.2e}");
    }
    say(out, &text)?;
    if let Some(path) = &a.csv {
        let csv = format!(
            "class,Q,n,loss,d,pinsker,risk_closed_form,risk_series,eta,eta_residual\n{},{},{},{},{},{},{},{},{},{}\n",
            a.class.join(" "),
            fmt_f64(class.radius()),
            a.n,
            loss,
            fmt_f64(report.coefficient_of_difficulty),
            fmt_opt(report.pinsker),
            fmt_f64(report.risk_closed_form),
            fmt_opt(report.risk_series),
            fmt_opt(report.eta),
            fmt_opt(report.eta_residual),
        );
        fs::write(path, csv).map_err(output(path))?;
    }
    Ok(())
}

/// Per-`n` summary CSV.
pub fn summary_csv(report: &MonteCarloReport) -> String {
    let mut s = String::from(
        "n,replicates_ok,failures,med_ratio_super,med_ratio_sub,med_ratio_oracle,med_ratio_univariate,mean_ise_ep,mean_ise_oracle,median_bivariate_energy\n",
    );
    for c in &report.cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            c.n,
            c.records.len(),
            c.failures.len(),
            fmt_opt(c.median_ratio_super()),
            fmt_opt(c.median_ratio_sub()),
            fmt_opt(c.median_ratio_oracle()),
            fmt_opt(c.median_ratio_univariate()),
            fmt_opt(c.mean_ise_ep()),
            fmt_opt(c.mean_ise_oracle()),
            fmt_opt(c.median_bivariate_energy()),
        );
    }
    s
}

/// One row per replicate, failures included.
pub fn replicates_csv(report: &MonteCarloReport) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Output(format!("replicates: {e}"));
    w.write_record([
        "n", "replicate", "seed", "ise_ep", "ise_super", "ise_sub", "ise_oracle", "ise_univariate",
        "bivariate_energy", "difficulty", "error",
    ])
    .map_err(io)?;
    for c in &report.cells {
        let mut rows: Vec<(usize, Vec<String>)> = c
            .records
            .iter()
            .map(|r| {
                (
                    r.replicate,
                    vec![
                        r.n.to_string(),
                        r.replicate.to_string(),
                        r.seed.to_string(),
                        fmt_f64(r.ise_ep),
                        fmt_opt(r.ise_super),
                        fmt_opt(r.ise_sub),
                        fmt_opt(r.ise_oracle),
                        fmt_opt(r.ise_univariate),
                        fmt_f64(r.bivariate_energy),
                        fmt_f64(r.difficulty),
                        String::new(),
                    ],
                )
            })
            .collect();
        for (rep, msg) in &c.failures {
            let seed = crate::study::replicate_seed(report.seed, c.n, *rep);
            let mut row = vec![c.n.to_string(), rep.to_string(), seed.to_string()];
            row.extend(std::iter::repeat_n("NA".to_string(), 7));
            row.push(msg.clone());
            rows.push((*rep, row));
        }
        rows.sort_by_key(|r| r.0);
        for (_, row) in rows {
            w.write_record(&row).map_err(io)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output(format!("replicates: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn cmd_simulate(a: &SimulateArgs, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.config).map_err(input(a.config.display()))?;
    let config: StudyConfig = text.parse().map_err(input(a.config.display()))?;
    let report = run_study(&config).map_err(estimation)?;
    fs::create_dir_all(&a.output).map_err(output(&a.output))?;
    let summary = a.output.join("summary.csv");
    fs::write(&summary, summary_csv(&report)).map_err(output(&summary))?;
    let reps = a.output.join("replicates.csv");
    fs::write(&reps, replicates_csv(&report)?).map_err(output(&reps))?;
    let total = config.n_values.len() * config.replicates;
    let failed = report.failure_count();
    say(
        out,
        &format!("{} replicates, {failed} failed; wrote {}\n", total, a.output.display()),
    )?;
    if failed == total {
        return Err(CliError::Estimation("every replicate failed".into()));
    }
    Ok(())
}

pub fn cmd_design(a: &DesignArgs, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    if a.grid < 2 {
        return Err(CliError::Input("--grid needs at least 2 nodes".into()));
    }
    let (path, column) = match (&a.sigma_file, &a.mass_file) {
        (Some(p), None) => (p, "sigma"),
        (None, Some(p)) => (p, "mass"),
        _ => return Err(CliError::Input("give exactly one of --sigma-file, --mass-file".into())),
    };
    let source = interpolant(read_samples(path)?);
    let target = match (a.target, column) {
        (TargetArg::Regression, "sigma") => DesignTarget::Regression(source),
        (TargetArg::Cdensity, "mass") => DesignTarget::ConditionalDensity(source),
        _ => {
            return Err(CliError::Input(
                "--target regression takes --sigma-file, --target cdensity takes --mass-file".into(),
            ))
        }
    };
    let design = optimal_design(target).map_err(input("design"))?;
    let xs = linspace(0.0, 1.0, a.grid);
    let raw: Vec<f64> = xs.iter().map(|&x| design.density(x)).collect();
    let norm = trapezoid(&xs, &raw);
    let mut s = String::from("x,density\n");
    for (x, v) in xs.iter().zip(&raw) {
        let _ = writeln!(s, "{},{}", fmt_f64(*x), fmt_f64(v / norm));
    }
    match &a.output {
        Some(p) => fs::write(p, s).map_err(output(p)),
        None => say(out, &s),
    }
}

/// Entry point shared by the binary: parses `args`, runs, and returns the
/// process exit code.
pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(cli, &mut lock) {
        Ok(()) => {
            let _ = lock.flush();
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
