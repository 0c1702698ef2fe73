//! `schatten`: run trace-inequality scenarios and emit reports or plot data.
//!
//! Exit status: 0 when every scenario passes, 1 when one fails, 2 for usage
//! errors and inputs the command cannot accept, 3 for I/O and file-format errors.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use schatten_core::inequality_suite::{
    file_digest, run_hermitian_bounds, run_range_geometry, run_truncation_convergence, run_von_neumann, Claim,
    ExampleId, ScenarioReport, SuiteParams, TruncationSource,
};
use schatten_core::numerical_range::sample_similarity_range;
use schatten_core::orbit::OrbitParams;
use schatten_core::set_convergence::{epsilon_cover_check, hausdorff_distance, CompactSet};
use schatten_core::spectra::{c_spectrum, eigen_decompose_normal, SpectrumMode};
use schatten_core::{Error, MatrixOperator};

#[derive(Parser, Debug)]
#[command(name = "schatten", version, about = "Trace inequalities, C-numerical ranges and set convergence on finite truncations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// max |tr(A U B V)| against Σ s_j(A) s_j(B)
    VnMax {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Optimizer gain tolerance
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Orbit extremes of tr(C U† T U) for a hermitian pair
    Hermitian {
        #[command(flatten)]
        pair: PairInput,
        /// Optimizer gain tolerance
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Spectrum/range inclusions and star probe for a normal pair
    Range {
        #[command(flatten)]
        pair: PairInput,
        /// Haar samples of the range
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Optimizer gain tolerance
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Hausdorff convergence of S_{C_n}(T_n) over a truncation sweep
    Converge {
        #[command(flatten)]
        pair: PairInput,
        /// Truncation sizes: `a..b` (inclusive) or a comma list
        #[arg(long, value_parser = parse_sizes)]
        n: Sizes,
        /// Threshold on the final Δ
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Hausdorff distance between two sets (JSON, or CSV clouds)
    Hausdorff {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Also report whether each set lies within eps of the other
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Plain number when omitted
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// C-spectrum pairing sums of a normal pair
    Spectrum {
        #[command(flatten)]
        pair: PairInput,
        /// Sample this many random permutations instead of enumerating all
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Run every built-in example scenario
    Demo {
        /// Optimizer gain tolerance
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
struct PairInput {
    /// Matrix file for C
    #[arg(long, requires = "t", conflicts_with = "example")]
    c: Option<PathBuf>,
    /// Matrix file for T
    #[arg(long, requires = "c")]
    t: Option<PathBuf>,
    /// Built-in pair instead of files
    #[arg(long, required_unless_present = "c")]
    example: Option<ExampleId>,
    /// Truncation size for sequence examples
    #[arg(long = "size", default_value_t = 4)]
    size: usize,
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Include wall-clock times in reports
    #[arg(long)]
    timings: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone)]
struct Sizes(Vec<usize>);

fn parse_sizes(s: &str) -> Result<Sizes, String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("bad size {t:?}: {e}"));
    let sizes = if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (parse(a)?, parse(b.strip_prefix('=').unwrap_or(b))?);
        if a > b {
            return Err(format!("empty range {s}"));
        }
        (a..=b).collect()
    } else {
        s.split(',').map(parse).collect::<Result<Vec<_>, _>>()?
    };
    if sizes.contains(&0) {
        return Err("sizes must be positive".into());
    }
    Ok(Sizes(sizes))
}

enum Failure {
    Usage(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Json(_) | Error::Parse(_) => Failure::Io(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn load_matrix(path: &Path) -> Result<MatrixOperator, Failure> {
    MatrixOperator::load(path).map_err(|e| io_failure(path, e))
}

fn load_set(path: &Path) -> Result<CompactSet, Failure> {
    CompactSet::load(path).map_err(|e| io_failure(path, e))
}

impl Common {
    fn params(&self, tol: f64) -> SuiteParams {
        SuiteParams {
            orbit: OrbitParams {
                restarts: self.restarts,
                tol,
                max_iter: self.max_iter,
                seed: self.seed,
            },
            ..SuiteParams::default()
        }
    }
}

/// The operator pair with its provenance recorded in the report.
struct Pair {
    c: MatrixOperator,
    t: MatrixOperator,
    files: Vec<PathBuf>,
    example: Option<ExampleId>,
}

impl PairInput {
    fn load(&self) -> Result<Pair, Failure> {
        match (&self.c, &self.t, self.example) {
            (Some(c), Some(t), _) => Ok(Pair {
                c: load_matrix(c)?,
                t: load_matrix(t)?,
                files: vec![c.clone(), t.clone()],
                example: None,
            }),
            (_, _, Some(id)) => {
                let (c, t) = id.pair(self.size)?;
                Ok(Pair {
                    c,
                    t,
                    files: Vec::new(),
                    example: Some(id),
                })
            }
            _ => Err(Failure::Usage("give --c and --t, or --example".into())),
        }
    }
}

fn annotate(mut report: ScenarioReport, files: &[PathBuf], example: Option<ExampleId>, timings: bool) -> Result<ScenarioReport, Failure> {
    for f in files {
        report.inputs.files.push(file_digest(f).map_err(|e| io_failure(f, e))?);
    }
    if let Some(id) = example {
        report.inputs.example = Some(id.to_string());
    }
    if !timings {
        report.wall_time_secs = None;
    }
    Ok(report)
}

/// Writes `text` to `out` via a sibling temporary file, or to standard output.
fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => {
            let mut tmp = path.as_os_str().to_owned();
            tmp.push(".partial");
            let tmp = PathBuf::from(tmp);
            std::fs::write(&tmp, text).map_err(|e| io_failure(&tmp, e))?;
            std::fs::rename(&tmp, path).map_err(|e| io_failure(path, e))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::Io(format!("standard output: {e}")))
        }
    }
}

fn claim_bounds(c: &Claim) -> (f64, f64) {
    match *c {
        Claim::Scalar(v) => (v, v),
        Claim::Interval { min, max } => (min, max),
    }
}

fn summary_csv(reports: &[ScenarioReport]) -> String {
    let mut out = String::from("scenario,example,claimed_min,claimed_max,achieved_min,achieved_max,abs_gap,rel_gap,tolerance,pass\n");
    for r in reports {
        let (cmin, cmax) = claim_bounds(&r.claimed);
        let (amin, amax) = claim_bounds(&r.achieved);
        out.push_str(&format!(
            "{},{},{cmin},{cmax},{amin},{amax},{},{},{},{}\n",
            r.scenario,
            r.inputs.example.as_deref().unwrap_or(""),
            r.abs_gap,
            r.rel_gap,
            r.tolerance.value,
            r.pass
        ));
    }
    out
}

fn jsonl(reports: &[ScenarioReport]) -> String {
    reports.iter().map(|r| r.to_json_line() + "\n").collect()
}

/// Emits reports and converts their pass flags into the exit status.
fn finish(reports: &[ScenarioReport], common: &Common, csv: Option<String>) -> Result<ExitCode, Failure> {
    let text = match common.format {
        Format::Json => jsonl(reports),
        Format::Csv => csv.unwrap_or_else(|| summary_csv(reports)),
    };
    emit(&text, common.out.as_deref())?;
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.scenario.as_str()).collect();
    if failed.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("failed: {}", failed.join(", "));
        Ok(ExitCode::from(1))
    }
}

fn demo(params: &SuiteParams) -> Result<Vec<ScenarioReport>, Error> {
    type Job = Box<dyn Fn() -> Result<ScenarioReport, Error> + Send + Sync>;
    let with_example = |id: ExampleId, run: fn(&MatrixOperator, &MatrixOperator, &SuiteParams) -> Result<ScenarioReport, Error>| -> Job {
        let params = *params;
        Box::new(move || {
            let (c, t) = id.pair(4)?;
            let mut r = run(&c, &t, &params)?;
            r.inputs.example = Some(id.to_string());
            Ok(r)
        })
    };
    let p = *params;
    let jobs: Vec<Job> = vec![
        with_example(ExampleId::DiagVonNeumann, run_von_neumann),
        with_example(ExampleId::DiagHermitian, run_hermitian_bounds),
        with_example(ExampleId::SignPair, run_hermitian_bounds),
        Box::new(move || {
            let sizes: Vec<usize> = (4..=12).collect();
            run_truncation_convergence(&TruncationSource::Example(ExampleId::Remark), &sizes, &p)
        }),
        with_example(ExampleId::SignPair, run_range_geometry),
    ];
    // results come back in job order whatever the completion order
    jobs.par_iter().map(|job| job()).collect()
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    match cli.command {
        Command::VnMax { a, b, tol, common } => {
            let (ma, mb) = (load_matrix(&a)?, load_matrix(&b)?);
            let report = run_von_neumann(&ma, &mb, &common.params(tol))?;
            let report = annotate(report, &[a, b], None, common.timings)?;
            finish(&[report], &common, None)
        }
        Command::Hermitian { pair, tol, common } => {
            let p = pair.load()?;
            let report = run_hermitian_bounds(&p.c, &p.t, &common.params(tol))?;
            let report = annotate(report, &p.files, p.example, common.timings)?;
            finish(&[report], &common, None)
        }
        Command::Range { pair, samples, tol, common } => {
            let p = pair.load()?;
            let params = SuiteParams {
                samples,
                ..common.params(tol)
            };
            let report = run_range_geometry(&p.c, &p.t, &params)?;
            let report = annotate(report, &p.files, p.example, common.timings)?;
            let csv = match common.format {
                Format::Csv => Some(sample_similarity_range(&p.c, &p.t, samples, common.seed)?.to_csv()),
                Format::Json => None,
            };
            finish(&[report], &common, csv)
        }
        Command::Converge { pair, n, tol, common } => {
            let params = SuiteParams {
                threshold: tol,
                ..common.params(OrbitParams::default().tol)
            };
            let (source, files, example) = match (&pair.c, &pair.t, pair.example) {
                (Some(c), Some(t), _) => (
                    TruncationSource::Pair(load_matrix(c)?, load_matrix(t)?),
                    vec![c.clone(), t.clone()],
                    None,
                ),
                (_, _, Some(id)) => (TruncationSource::Example(id), Vec::new(), Some(id)),
                _ => return Err(Failure::Usage("give --c and --t, or --example".into())),
            };
            let report = run_truncation_convergence(&source, &n.0, &params)?;
            let report = annotate(report, &files, example, common.timings)?;
            let csv = report.delta_table_csv();
            finish(&[report], &common, Some(csv))
        }
        Command::Hausdorff { a, b, eps, out, format } => {
            let (sa, sb) = (load_set(&a)?, load_set(&b)?);
            let d = hausdorff_distance(&sa, &sb)?;
            let cover = eps.map(|e| epsilon_cover_check(&sa, &sb, e)).transpose()?;
            let text = match format {
                None => match cover {
                    Some(c) => format!("{d}\n{c}\n"),
                    None => format!("{d}\n"),
                },
                Some(Format::Json) => {
                    let mut v = serde_json::json!({ "hausdorff": d });
                    if let (Some(e), Some(c)) = (eps, cover) {
                        v["eps"] = serde_json::json!(e);
                        v["eps_cover"] = serde_json::json!(c);
                    }
                    v.to_string() + "\n"
                }
                Some(Format::Csv) => match cover {
                    Some(c) => format!("hausdorff,eps_cover\n{d},{c}\n"),
                    None => format!("hausdorff\n{d}\n"),
                },
            };
            emit(&text, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Spectrum { pair, budget, seed, out, format } => {
            let p = pair.load()?;
            let (sc, _) = eigen_decompose_normal(&p.c)?;
            let (st, _) = eigen_decompose_normal(&p.t)?;
            let mode = match budget {
                Some(budget) => SpectrumMode::Sampled { budget, seed },
                None => SpectrumMode::Exhaustive,
            };
            let spectrum = c_spectrum(&sc, &st, mode)?;
            let text = match format {
                Format::Json => serde_json::to_string(&spectrum).map_err(|e| Failure::Io(e.to_string()))? + "\n",
                Format::Csv => CompactSet::point_cloud(spectrum.points)?.to_csv()?,
            };
            emit(&text, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Demo { tol, common } => {
            let reports = demo(&common.params(tol))?;
            let reports = reports
                .into_iter()
                .map(|r| annotate(r, &[], None, common.timings))
                .collect::<Result<Vec<_>, _>>()?;
            finish(&reports, &common, None)
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("SCHATTEN_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .map_err(|_| Failure::Usage(format!("SCHATTEN_THREADS must be a non-negative integer, got {value:?}")))?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match configure_threads().and_then(|_| run(cli)) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
