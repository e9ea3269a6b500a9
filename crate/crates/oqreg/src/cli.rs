//! Command-line interface: dataset ingestion, sampler configuration, and
//! result serialization (summary JSON, draw dumps, trace SVGs).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::diagnostics::{self, TraceSeries};
use crate::error::{Error, Result};
use crate::model::{OrdinalDataset, PriorOr1, PriorOr2};
use crate::or1::{fit_or1, Or1Config, Or1Fit};
use crate::or2::{fit_or2, Or2Config, Or2Fit};
use crate::simulate::{generate_or1_data, generate_or2_data, DgpSpec};

const EXIT_CONFIG: i32 = 2;
const EXIT_NUMERIC: i32 = 3;

#[derive(Parser)]
#[command(
    name = "oqreg",
    version,
    about = "Bayesian quantile regression for ordinal outcomes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an ordinal dataset from a known design and write it as CSV
    Simulate(SimulateArgs),
    /// Fit an ordinal quantile model and write summaries
    Fit(FitArgs),
    /// Average covariate effect of modifying one covariate
    Coveffect(CoveffectArgs),
    /// Re-summarize a previously written draw dump
    Summary(SummaryArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, Debug, ValueEnum)]
enum ModelKind {
    /// Free cut-points, three or more categories
    Or1,
    /// Fixed cut-points, exactly three categories, free scale
    Or2,
}

impl ModelKind {
    fn name(self) -> &'static str {
        match self {
            ModelKind::Or1 => "or1",
            ModelKind::Or2 => "or2",
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    model: ModelKind,
    #[arg(long, default_value_t = 500)]
    n: usize,
    /// Comma-separated true coefficients, intercept first
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_hyphen_values = true)]
    beta: Option<Vec<f64>>,
    /// Comma-separated true cut-points in increasing order
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_hyphen_values = true)]
    cutpoints: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.25)]
    p: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV path (header row, comma-separated)
    #[arg(long)]
    data: PathBuf,
    /// Response column name
    #[arg(long)]
    response: String,
    /// Ordered covariate column names
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    covariates: Vec<String>,
    /// Prepend an intercept column of ones
    #[arg(long, default_value_t = true, overrides_with = "no_intercept")]
    intercept: bool,
    #[arg(long = "no-intercept")]
    no_intercept: bool,
    /// Drop rows with empty cells instead of rejecting the file
    #[arg(long)]
    drop_missing: bool,
}

#[derive(Args)]
struct FitCommonArgs {
    #[arg(long, value_enum)]
    model: ModelKind,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0.25)]
    p: f64,
    #[arg(long, default_value_t = 1125)]
    burn: usize,
    #[arg(long, default_value_t = 4500)]
    mcmc: usize,
    /// MH proposal scale multiplier (or1 only)
    #[arg(long, default_value_t = 1.0)]
    tune: f64,
    /// Upper fixed cut-point (or2 only)
    #[arg(long, default_value_t = 3.0)]
    gamma2: f64,
    /// Coefficient prior mean: scalar or comma-separated vector
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    prior_b0: String,
    /// Coefficient prior covariance: scalar c (meaning c*I) or a matrix file
    #[arg(long, default_value = "10")]
    prior_b0_cov: String,
    /// Cut-point transform prior mean (or1): scalar or vector
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    prior_d0: String,
    /// Cut-point transform prior covariance (or1): scalar or matrix file
    #[arg(long, default_value = "0.25")]
    prior_d0_cov: String,
    /// Scale prior shape n0 (or2)
    #[arg(long, default_value_t = 5.0)]
    prior_n0: f64,
    /// Scale prior scale d0 (or2)
    #[arg(long, default_value_t = 8.0)]
    prior_d0_scale: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Batch-means inefficiency cutoff; omit to skip the computation
    #[arg(long)]
    cutoff: Option<f64>,
    /// Print extra progress lines
    #[arg(long)]
    verbose: bool,
    /// Suppress all console output (files are still written)
    #[arg(long, conflicts_with = "verbose")]
    quiet: bool,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: FitCommonArgs,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Also write the full draw matrix as CSV
    #[arg(long)]
    emit_draws: bool,
    /// Also write one trace SVG per parameter
    #[arg(long)]
    emit_plots: bool,
}

#[derive(Args)]
struct CoveffectArgs {
    #[command(flatten)]
    common: FitCommonArgs,
    /// Covariate to modify (must be one of --covariates)
    #[arg(long)]
    covariate: String,
    /// Amount added to the covariate in the modified design
    #[arg(long, allow_hyphen_values = true)]
    amount: f64,
    /// Output JSON path; omit to print to stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SummaryArgs {
    /// Draw dump written by `fit --emit-draws`
    #[arg(long)]
    draws: PathBuf,
    #[arg(long)]
    burn: usize,
    #[arg(long)]
    cutoff: Option<f64>,
    /// Output JSON path; omit to print to stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Entry point used by both the binary and the integration tests. Returns a
/// process exit code: 0 success, 2 configuration error, 3 numeric failure.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders help/version through the error path too
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Fit(args) => cmd_fit(&args),
        Command::Coveffect(args) => cmd_coveffect(&args),
        Command::Summary(args) => cmd_summary(&args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numeric(_) | Error::NotSpd(_) | Error::DegenerateChain(_) => EXIT_NUMERIC,
                _ => EXIT_CONFIG,
            }
        }
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("OQR_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Domain(format!("OQR_SEED is not a valid seed: {v:?}"))),
        Err(_) => Ok(0),
    }
}

fn config_hash(parts: &[String]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part.as_bytes());
        hasher.update([0u8]);
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

// ---------------------------------------------------------------------------
// dataset I/O

/// Loads a CSV dataset: numeric parse of the selected columns, response
/// recoded to 1..J by its sorted distinct values, optional intercept column
/// prepended.
pub fn load_dataset(
    path: &Path,
    response_col: &str,
    covariate_cols: &[String],
    intercept: bool,
    drop_missing: bool,
) -> Result<OrdinalDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::InvalidData(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::InvalidData(format!("{}: {e}", path.display())))?
        .clone();
    let col_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidData(format!("column {name:?} not found in header")))
    };
    let resp_idx = col_index(response_col)?;
    let cov_idx: Vec<usize> = covariate_cols
        .iter()
        .map(|c| col_index(c))
        .collect::<Result<_>>()?;

    let mut resp_raw: Vec<f64> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    'rows: for (r, record) in reader.records().enumerate() {
        let row_no = r + 2; // header is line 1
        let record = record.map_err(|e| Error::InvalidData(format!("row {row_no}: {e}")))?;
        let mut parsed = Vec::with_capacity(cov_idx.len());
        for (&idx, name) in cov_idx
            .iter()
            .zip(covariate_cols)
            .chain(std::iter::once((&resp_idx, &response_col.to_string())))
        {
            let cell = record.get(idx).unwrap_or("");
            if cell.is_empty() {
                if drop_missing {
                    continue 'rows;
                }
                return Err(Error::InvalidData(format!(
                    "row {row_no}, column {name:?}: empty cell (use --drop-missing to skip such rows)"
                )));
            }
            let v: f64 = cell.parse().map_err(|_| {
                Error::InvalidData(format!(
                    "row {row_no}, column {name:?}: cannot parse {cell:?} as a number"
                ))
            })?;
            parsed.push(v);
        }
        resp_raw.push(parsed.pop().unwrap());
        rows.push(parsed);
    }
    if rows.is_empty() {
        return Err(Error::InvalidData("no usable data rows".into()));
    }

    // recode the response by its sorted distinct values
    let mut levels = resp_raw.clone();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    if levels.len() < 3 {
        return Err(Error::InvalidData(format!(
            "response column {response_col:?} has {} distinct values; need at least 3",
            levels.len()
        )));
    }
    let y: Vec<usize> = resp_raw
        .iter()
        .map(|v| levels.binary_search_by(|l| l.total_cmp(v)).unwrap() + 1)
        .collect();

    let n = rows.len();
    let extra = usize::from(intercept);
    let k = covariate_cols.len() + extra;
    let x = DMatrix::from_fn(n, k, |i, c| {
        if intercept && c == 0 {
            1.0
        } else {
            rows[i][c - extra]
        }
    });
    let mut names = Vec::with_capacity(k);
    if intercept {
        names.push("intercept".to_string());
    }
    names.extend(covariate_cols.iter().cloned());
    OrdinalDataset::new(y, x, names)
}

/// Writes a dataset as CSV with a provenance comment line.
pub fn write_dataset(dataset: &OrdinalDataset, path: &Path, provenance: &str) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "# {provenance}");
    let _ = write!(out, "y");
    for name in dataset.covariate_names() {
        let _ = write!(out, ",{name}");
    }
    let _ = writeln!(out);
    for i in 0..dataset.n() {
        let _ = write!(out, "{}", dataset.y()[i]);
        for c in 0..dataset.k() {
            let _ = write!(out, ",{}", dataset.x()[(i, c)]);
        }
        let _ = writeln!(out);
    }
    fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// prior parsing

fn parse_vector_spec(spec: &str, dim: usize, what: &str) -> Result<DVector<f64>> {
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() == 1 {
        let v: f64 = parts[0]
            .trim()
            .parse()
            .map_err(|_| Error::Domain(format!("{what}: cannot parse {spec:?}")))?;
        return Ok(DVector::from_element(dim, v));
    }
    if parts.len() != dim {
        return Err(Error::Shape(format!(
            "{what}: expected {dim} entries, got {}",
            parts.len()
        )));
    }
    let vals: Vec<f64> = parts
        .iter()
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Domain(format!("{what}: cannot parse entry {s:?}")))
        })
        .collect::<Result<_>>()?;
    Ok(DVector::from_vec(vals))
}

/// A covariance spec is either a scalar c (meaning c*I) or a path to a text
/// file holding a full matrix, one whitespace-separated row per line.
fn parse_cov_spec(spec: &str, dim: usize, what: &str) -> Result<DMatrix<f64>> {
    if let Ok(c) = spec.trim().parse::<f64>() {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("{what}: scalar must be positive, got {c}")));
        }
        return Ok(DMatrix::identity(dim, dim) * c);
    }
    let text = fs::read_to_string(spec)
        .map_err(|e| Error::InvalidData(format!("{what}: cannot read {spec:?}: {e}")))?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|l| {
            l.split_whitespace()
                .map(|t| {
                    t.parse()
                        .map_err(|_| Error::Domain(format!("{what}: bad matrix entry {t:?}")))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Shape(format!(
            "{what}: matrix in {spec:?} is not {dim}x{dim}"
        )));
    }
    Ok(DMatrix::from_fn(dim, dim, |r, c| rows[r][c]))
}

// ---------------------------------------------------------------------------
// summary document

#[derive(Serialize)]
struct ParamEntry {
    name: String,
    post_mean: f64,
    post_std: f64,
    lower_credible: f64,
    upper_credible: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    inefficiency: Option<f64>,
}

#[derive(Serialize)]
struct SummaryDoc {
    model: String,
    quantile: f64,
    burn: usize,
    mcmc: usize,
    seed: u64,
    parameters: Vec<ParamEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    acceptance_rate: Option<f64>,
    log_marg_like: f64,
    dic: f64,
    pd: f64,
    dev_post_mean: f64,
    config_hash: String,
}

fn write_json<T: Serialize>(doc: &T, path: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc)
        .map_err(|e| Error::Numeric(format!("serialization failed: {e}")))?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn print_table(names: &[String], stats: &[diagnostics::ParamStats]) {
    println!("Summary of MCMC draws");
    println!(
        "{:<16} {:>12} {:>12} {:>14} {:>14}",
        "", "Post Mean", "Post Std", "Upper Credible", "Lower Credible"
    );
    for (name, s) in names.iter().zip(stats) {
        println!(
            "{:<16} {:>12.4} {:>12.4} {:>14.4} {:>14.4}",
            name, s.mean, s.sd, s.upper, s.lower
        );
    }
}

// ---------------------------------------------------------------------------
// trace SVG

/// Renders one parameter's post-burn draws as a standalone SVG line plot.
pub fn emit_trace_svg(series: &TraceSeries, path: &Path, provenance: &str) -> Result<()> {
    if series.values.is_empty() {
        return Err(Error::Shape("trace series is empty".into()));
    }
    let (w, h) = (800.0, 300.0);
    let (ml, mr, mt, mb) = (70.0, 15.0, 15.0, 45.0);
    let (pw, ph) = (w - ml - mr, h - mt - mb);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in &series.values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let m = series.values.len();
    let mut points = String::with_capacity(m * 16);
    for (i, &v) in series.values.iter().enumerate() {
        let x = ml + pw * i as f64 / (m.max(2) - 1) as f64;
        let y = mt + ph * (1.0 - (v - lo) / (hi - lo));
        let _ = write!(points, "{x:.2},{y:.2} ");
    }
    let name = xml_escape(&series.name);
    let svg = format!(
        concat!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n",
            "<!-- {prov} -->\n",
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<text x=\"{xc}\" y=\"{xl}\" text-anchor=\"middle\" font-size=\"13\" ",
            "font-family=\"sans-serif\">iteration</text>\n",
            "<text x=\"18\" y=\"{yc}\" text-anchor=\"middle\" font-size=\"13\" ",
            "font-family=\"sans-serif\" transform=\"rotate(-90 18 {yc})\">{name}</text>\n",
            "<text x=\"{ml}\" y=\"{tmin}\" text-anchor=\"end\" font-size=\"11\" ",
            "font-family=\"sans-serif\">{lo:.4}</text>\n",
            "<text x=\"{ml}\" y=\"{tmax}\" text-anchor=\"end\" font-size=\"11\" ",
            "font-family=\"sans-serif\">{hi:.4}</text>\n",
            "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"0.6\" ",
            "points=\"{points}\"/>\n",
            "</svg>\n"
        ),
        prov = xml_escape(provenance),
        w = w,
        h = h,
        xc = ml + pw / 2.0,
        xl = h - 10.0,
        yc = mt + ph / 2.0,
        name = name,
        ml = ml - 5.0,
        tmin = mt + ph,
        tmax = mt + 10.0,
        lo = lo,
        hi = hi,
        points = points.trim_end(),
    );
    fs::write(path, svg)?;
    Ok(())
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace("--", "‑‑")
}

// ---------------------------------------------------------------------------
// draw dumps

fn write_draw_dump(
    names: &[String],
    draws: &DMatrix<f64>,
    path: &Path,
    provenance: &str,
) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "# {provenance}");
    let _ = writeln!(out, "{}", names.join(","));
    for c in 0..draws.ncols() {
        for (r, _) in names.iter().enumerate() {
            if r > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", draws[(r, c)]);
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn read_draw_dump(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidData("draw dump has no header".into()))?;
    let names: Vec<String> = header.split(',').map(str::to_string).collect();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for (i, line) in lines.enumerate() {
        let row: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.parse().map_err(|_| {
                    Error::InvalidData(format!("draw dump row {}: bad value {t:?}", i + 1))
                })
            })
            .collect::<Result<_>>()?;
        if row.len() != names.len() {
            return Err(Error::InvalidData(format!(
                "draw dump row {} has {} values for {} columns",
                i + 1,
                row.len(),
                names.len()
            )));
        }
        values.push(row);
    }
    if values.is_empty() {
        return Err(Error::InvalidData("draw dump has no data rows".into()));
    }
    let draws = DMatrix::from_fn(names.len(), values.len(), |r, c| values[c][r]);
    Ok((names, draws))
}

// ---------------------------------------------------------------------------
// subcommands

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let seed = resolve_seed(args.seed)?;
    let beta = args.beta.clone().unwrap_or_else(|| match args.model {
        ModelKind::Or1 => vec![-4.0, 5.0, 6.0],
        ModelKind::Or2 => vec![-4.0, 6.0, 5.0],
    });
    let cutpoints = args.cutpoints.clone().unwrap_or_else(|| match args.model {
        ModelKind::Or1 => vec![0.0, 2.0, 4.0],
        ModelKind::Or2 => vec![0.0, 3.0],
    });
    let spec = DgpSpec { n: args.n, beta_true: beta, cutpoints_true: cutpoints, p: args.p, seed };
    let sim = match args.model {
        ModelKind::Or1 => generate_or1_data(&spec),
        ModelKind::Or2 => generate_or2_data(&spec),
    }?;
    let hash = config_hash(&[
        format!("simulate {}", args.model.name()),
        format!("{spec:?}"),
    ]);
    let prov = format!("seed={seed} config={hash}");
    write_dataset(&sim.dataset, &args.out, &prov)?;
    if sim.attempts > 1 {
        eprintln!(
            "note: dataset regenerated {} times before all categories appeared",
            sim.attempts
        );
    }
    Ok(())
}

enum FittedModel {
    Or1(Box<Or1Fit>),
    Or2(Box<Or2Fit>),
}

struct FitOutput {
    fitted: FittedModel,
    dataset: OrdinalDataset,
    names: Vec<String>,
    /// params x (burn + mcmc)
    all_draws: DMatrix<f64>,
    seed: u64,
    hash: String,
}

fn run_fit(common: &FitCommonArgs) -> Result<FitOutput> {
    let seed = resolve_seed(common.seed)?;
    let intercept = common.data.intercept && !common.data.no_intercept;
    let dataset = load_dataset(
        &common.data.data,
        &common.data.response,
        &common.data.covariates,
        intercept,
        common.data.drop_missing,
    )?;
    let k = dataset.k();
    let j = dataset.num_outcomes();
    let hash = config_hash(&[
        format!("fit {}", common.model.name()),
        format!("data={}", common.data.data.display()),
        format!("response={}", common.data.response),
        format!("covariates={:?}", common.data.covariates),
        format!("intercept={intercept} drop_missing={}", common.data.drop_missing),
        format!(
            "p={} burn={} mcmc={} tune={} gamma2={}",
            common.p, common.burn, common.mcmc, common.tune, common.gamma2
        ),
        format!(
            "b0={} B0={} d0={} D0={} n0={} d0_scale={}",
            common.prior_b0,
            common.prior_b0_cov,
            common.prior_d0,
            common.prior_d0_cov,
            common.prior_n0,
            common.prior_d0_scale
        ),
        format!("seed={seed}"),
    ]);

    let beta_mean = parse_vector_spec(&common.prior_b0, k, "--prior-b0")?;
    let beta_cov = parse_cov_spec(&common.prior_b0_cov, k, "--prior-b0-cov")?;
    let (fitted, names, all_draws) = match common.model {
        ModelKind::Or1 => {
            let d = j - 2;
            let delta_mean = parse_vector_spec(&common.prior_d0, d, "--prior-d0")?;
            let delta_cov = parse_cov_spec(&common.prior_d0_cov, d, "--prior-d0-cov")?;
            let prior = PriorOr1::new(beta_mean, beta_cov, delta_mean, delta_cov)?;
            let config = Or1Config {
                burn: common.burn,
                mcmc: common.mcmc,
                p: common.p,
                tune: common.tune,
                seed,
            };
            let fit = fit_or1(&dataset, &prior, &config)?;
            let mut draws = DMatrix::zeros(k + d, config.total_sweeps());
            draws.rows_mut(0, k).copy_from(&fit.draws.beta);
            draws.rows_mut(k, d).copy_from(&fit.draws.delta);
            let names = fit.param_names.clone();
            (FittedModel::Or1(Box::new(fit)), names, draws)
        }
        ModelKind::Or2 => {
            let prior = PriorOr2::new(beta_mean, beta_cov, common.prior_n0, common.prior_d0_scale)?;
            let config = Or2Config {
                burn: common.burn,
                mcmc: common.mcmc,
                p: common.p,
                gamma2: common.gamma2,
                seed,
            };
            let fit = fit_or2(&dataset, &prior, &config)?;
            let mut draws = DMatrix::zeros(k + 1, config.total_sweeps());
            draws.rows_mut(0, k).copy_from(&fit.draws.beta);
            draws
                .row_mut(k)
                .copy_from(&fit.draws.sigma.transpose());
            let names = fit.param_names.clone();
            (FittedModel::Or2(Box::new(fit)), names, draws)
        }
    };
    Ok(FitOutput { fitted, dataset, names, all_draws, seed, hash })
}

fn summary_doc(out: &FitOutput, common: &FitCommonArgs) -> Result<SummaryDoc> {
    let (stats, acceptance, lml, dic) = match &out.fitted {
        FittedModel::Or1(f) => (&f.summary, Some(f.acceptance_rate), f.log_marg_like, f.dic),
        FittedModel::Or2(f) => (&f.summary, None, f.log_marg_like, f.dic),
    };
    let inefficiency = match common.cutoff {
        Some(cutoff) => {
            let post = out.all_draws.columns(common.burn, common.mcmc).into_owned();
            Some(diagnostics::inefficiency_factor(&post, cutoff)?)
        }
        None => None,
    };
    let parameters = out
        .names
        .iter()
        .zip(stats)
        .enumerate()
        .map(|(i, (name, s))| ParamEntry {
            name: name.clone(),
            post_mean: s.mean,
            post_std: s.sd,
            lower_credible: s.lower,
            upper_credible: s.upper,
            inefficiency: inefficiency.as_ref().map(|inf| inf.factors[i]),
        })
        .collect();
    Ok(SummaryDoc {
        model: match out.fitted {
            FittedModel::Or1(_) => "or1".into(),
            FittedModel::Or2(_) => "or2".into(),
        },
        quantile: common.p,
        burn: common.burn,
        mcmc: common.mcmc,
        seed: out.seed,
        parameters,
        acceptance_rate: acceptance,
        log_marg_like: lml,
        dic: dic.dic,
        pd: dic.pd,
        dev_post_mean: dic.dev_post_mean,
        config_hash: out.hash.clone(),
    })
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let common = &args.common;
    let out = run_fit(common)?;
    fs::create_dir_all(&args.out)?;
    let doc = summary_doc(&out, common)?;
    write_json(&doc, Some(&args.out.join("summary.json")))?;

    let prov = format!("seed={} config={}", out.seed, out.hash);
    if args.emit_draws {
        write_draw_dump(&out.names, &out.all_draws, &args.out.join("draws.csv"), &prov)?;
    }
    if args.emit_plots {
        let series = diagnostics::trace_export(&out.all_draws, &out.names, common.burn)?;
        for s in &series {
            let file = args.out.join(format!("trace_{}.svg", sanitize(&s.name)));
            emit_trace_svg(s, &file, &prov)?;
        }
    }
    if !common.quiet {
        let stats = match &out.fitted {
            FittedModel::Or1(f) => &f.summary,
            FittedModel::Or2(f) => &f.summary,
        };
        print_table(&out.names, stats);
        if let FittedModel::Or1(f) = &out.fitted {
            println!("MH acceptance rate: {:.2}%", f.acceptance_rate);
        }
        println!("log marginal likelihood: {:.4}", doc.log_marg_like);
        println!("DIC: {:.4} (pd = {:.4})", doc.dic, doc.pd);
        if common.verbose {
            println!("burn-in: {}, retained: {}", common.burn, common.mcmc);
            println!("seed: {}, config hash: {}", out.seed, out.hash);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct CovEffectDoc {
    model: String,
    quantile: f64,
    covariate: String,
    amount: f64,
    effects: Vec<f64>,
    draws_used: usize,
    seed: u64,
    config_hash: String,
}

fn cmd_coveffect(args: &CoveffectArgs) -> Result<()> {
    let common = &args.common;
    let out = run_fit(common)?;
    let col = out
        .dataset
        .covariate_names()
        .iter()
        .position(|n| n == &args.covariate)
        .ok_or_else(|| {
            Error::InvalidData(format!("covariate {:?} is not in the design", args.covariate))
        })?;
    let xmod1 = out.dataset.x().clone();
    let mut xmod2 = xmod1.clone();
    for i in 0..xmod2.nrows() {
        xmod2[(i, col)] += args.amount;
    }
    let result = match &out.fitted {
        FittedModel::Or1(f) => {
            diagnostics::cov_effect_or1(f, &out.dataset, &xmod1, &xmod2, common.p)?
        }
        FittedModel::Or2(f) => {
            diagnostics::cov_effect_or2(f, &out.dataset, &xmod1, &xmod2, common.p)?
        }
    };
    let doc = CovEffectDoc {
        model: common.model.name().into(),
        quantile: common.p,
        covariate: args.covariate.clone(),
        amount: args.amount,
        effects: result.effects,
        draws_used: result.draws_used,
        seed: out.seed,
        config_hash: config_hash(&[out.hash, format!("coveffect {} {}", args.covariate, args.amount)]),
    };
    write_json(&doc, args.out.as_deref())?;
    if !common.quiet && args.out.is_some() {
        for (j, e) in doc.effects.iter().enumerate() {
            println!("category {}: {:+.4}", j + 1, e);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ResummaryDoc {
    burn: usize,
    mcmc: usize,
    parameters: Vec<ParamEntry>,
}

fn cmd_summary(args: &SummaryArgs) -> Result<()> {
    let (names, draws) = read_draw_dump(&args.draws)?;
    let stats = diagnostics::summarize(&draws, args.burn)?;
    let inefficiency = match args.cutoff {
        Some(cutoff) => {
            let post = draws
                .columns(args.burn, draws.ncols() - args.burn)
                .into_owned();
            Some(diagnostics::inefficiency_factor(&post, cutoff)?)
        }
        None => None,
    };
    let parameters = names
        .iter()
        .zip(&stats)
        .enumerate()
        .map(|(i, (name, s))| ParamEntry {
            name: name.clone(),
            post_mean: s.mean,
            post_std: s.sd,
            lower_credible: s.lower,
            upper_credible: s.upper,
            inefficiency: inefficiency.as_ref().map(|inf| inf.factors[i]),
        })
        .collect();
    let doc = ResummaryDoc { burn: args.burn, mcmc: draws.ncols() - args.burn, parameters };
    write_json(&doc, args.out.as_deref())
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_spec_scalar_broadcasts() {
        let v = parse_vector_spec("0", 3, "test").unwrap();
        assert_eq!(v, DVector::zeros(3));
        let v = parse_vector_spec("1,2,3", 3, "test").unwrap();
        assert_eq!(v, DVector::from_vec(vec![1.0, 2.0, 3.0]));
        assert!(parse_vector_spec("1,2", 3, "test").is_err());
    }

    #[test]
    fn cov_spec_scalar_means_scaled_identity() {
        let m = parse_cov_spec("10", 2, "test").unwrap();
        assert_eq!(m, DMatrix::identity(2, 2) * 10.0);
        assert!(parse_cov_spec("-1", 2, "test").is_err());
    }

    #[test]
    fn config_hash_is_order_sensitive_and_stable() {
        let a = config_hash(&["x".into(), "y".into()]);
        let b = config_hash(&["x".into(), "y".into()]);
        let c = config_hash(&["y".into(), "x".into()]);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn sanitize_keeps_word_characters() {
        assert_eq!(sanitize("delta_1"), "delta_1");
        assert_eq!(sanitize("a b/c"), "a_b_c");
    }

    #[test]
    fn response_recode_uses_sorted_distinct_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let mut text = String::from("y,x1\n");
        for (y, x) in [(9, 0.1), (2, 0.9), (5, 0.4), (2, 0.2), (9, 0.6), (5, 0.8)] {
            text.push_str(&format!("{y},{x}\n"));
        }
        fs::write(&path, text).unwrap();
        let ds = load_dataset(&path, "y", &["x1".to_string()], true, false).unwrap();
        assert_eq!(ds.y(), &[3, 1, 2, 1, 3, 2]);
        assert_eq!(ds.covariate_names(), &["intercept".to_string(), "x1".to_string()]);
    }

    #[test]
    fn missing_cells_are_named_or_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        fs::write(&path, "y,x1\n1,0.1\n2,\n3,0.3\n1,0.4\n2,0.5\n3,0.6\n").unwrap();
        let err = load_dataset(&path, "y", &["x1".to_string()], true, false).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 3") && msg.contains("x1"), "{msg}");
        let ds = load_dataset(&path, "y", &["x1".to_string()], true, true).unwrap();
        assert_eq!(ds.n(), 5);
    }

    #[test]
    fn unknown_column_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        fs::write(&path, "y,x1\n1,0.1\n2,0.2\n3,0.3\n").unwrap();
        let err = load_dataset(&path, "y", &["nope".to_string()], true, false).unwrap_err();
        assert!(err.to_string().contains("nope"));
    }

    #[test]
    fn draw_dump_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("draws.csv");
        let names = vec!["a".to_string(), "b".to_string()];
        let draws = DMatrix::from_fn(2, 5, |r, c| {
            (r as f64 + 1.0) * (c as f64 + 0.123456789012345) / 3.0
        });
        write_draw_dump(&names, &draws, &path, "seed=1 config=x").unwrap();
        let (names2, draws2) = read_draw_dump(&path).unwrap();
        assert_eq!(names, names2);
        assert_eq!(draws, draws2);
    }

    #[test]
    fn trace_svg_is_well_formed_and_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let s = TraceSeries {
            name: "beta_1".into(),
            values: (0..4500).map(|i| (i as f64 * 0.01).sin()).collect(),
        };
        let p1 = dir.path().join("a.svg");
        let p2 = dir.path().join("b.svg");
        emit_trace_svg(&s, &p1, "seed=1 config=x").unwrap();
        emit_trace_svg(&s, &p2, "seed=1 config=x").unwrap();
        let a = fs::read(&p1).unwrap();
        let b = fs::read(&p2).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("<?xml"));
        assert_eq!(text.matches("<polyline").count(), 1);
        let pts = text.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split_whitespace().count(), 4500);
        assert!(text.contains("beta_1"));
    }

    #[test]
    fn dataset_round_trip_via_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sim.csv");
        let spec = DgpSpec {
            n: 60,
            beta_true: vec![-4.0, 5.0, 6.0],
            cutpoints_true: vec![0.0, 2.0, 4.0],
            p: 0.25,
            seed: 8,
        };
        let sim = generate_or1_data(&spec).unwrap();
        write_dataset(&sim.dataset, &path, "seed=8 config=x").unwrap();
        let names: Vec<String> = sim.dataset.covariate_names().to_vec();
        let ds = load_dataset(&path, "y", &names, false, false).unwrap();
        assert_eq!(ds.y(), sim.dataset.y());
        assert_eq!(ds.x(), sim.dataset.x());
    }
}
