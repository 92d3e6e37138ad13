//! Experiment runner for the configlab verification suites.
//!
//! Exit codes: 0 when every verdict passes, 1 when an exact-tier check or a
//! study fails (or `report-diff` finds a difference), 2 for invalid input,
//! refusals and I/O errors. Messages go to standard error; data goes to the
//! output file or standard output.

pub mod config;
pub mod diff;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use configlab::config_space::{enumerate, mixed_poisson_weights, poisson_weights};
use configlab::verify::{default_levels, run_convergence_study, run_suites};
use configlab::{LevyMixture, Outcome, SuiteReport};

pub use config::{ExperimentConfig, FixtureSpec, LevyAtom};
pub use error::{CliError, Result};

#[derive(Parser, Debug)]
#[command(name = "configlab", version, about = "Verification lab for configuration-space calculus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check an experiment configuration and print it in canonical form
    Validate(ExperimentArgs),
    /// List the configurations up to the particle cap as CSV
    Enumerate(ExperimentArgs),
    /// Export the Poisson (or mixed Poisson) weights as CSV
    Measures {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Use the intensity mixture instead of the single intensity s
        #[arg(long)]
        mixed: bool,
    },
    /// Run verification suites and write the JSON report
    Verify {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Record elapsed time in the report (makes it non-reproducible)
        #[arg(long)]
        wall_clock: bool,
    },
    /// Run refinement studies and write one CSV of (level, defect) per study
    Study {
        /// Study ids, or `all`
        #[arg(long = "id", value_delimiter = ',', default_value = "all")]
        ids: Vec<String>,
        /// Refinement levels; defaults to each study's own
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
        /// Output directory
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare two reports; prints nothing when they agree
    ReportDiff { a: PathBuf, b: PathBuf },
}

/// Flags mirroring the fields of [`ExperimentConfig`]; each one overrides the
/// value from `--config`.
#[derive(Args, Debug, Default)]
struct ExperimentArgs {
    /// Experiment configuration JSON
    #[arg(long)]
    config: Option<PathBuf>,
    /// two_state[:rate=R] | circle:n=N[,rate=R] | custom:PATH
    #[arg(long)]
    fixture: Option<String>,
    #[arg(long)]
    n_max: Option<usize>,
    /// Poisson intensity scaling
    #[arg(long = "s")]
    s: Option<f64>,
    /// Intensity mixture atoms as s:weight
    #[arg(long, value_delimiter = ',')]
    levy: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,
    /// Suite names, or `all`
    #[arg(long, value_delimiter = ',')]
    suites: Option<Vec<String>>,
    /// Refinement studies to attach to the report, or `all`
    #[arg(long, value_delimiter = ',')]
    studies: Option<Vec<String>>,
    /// Tolerance override, repeatable
    #[arg(long = "tolerance", value_name = "CHECK_ID=TOL")]
    tolerances: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                ExperimentConfig::from_json(&text).map_err(|e| CliError::BadFile {
                    path: p.clone(),
                    message: e.to_string(),
                })?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(f) = &self.fixture {
            c.fixture = f.parse()?;
        }
        if let Some(levy) = &self.levy {
            c.levy = levy.iter().map(|a| a.parse()).collect::<Result<_>>()?;
        }
        for t in &self.tolerances {
            let (id, tol) = t
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("tolerance '{t}' is not CHECK_ID=TOL")))?;
            let tol = tol
                .parse()
                .map_err(|_| CliError::Config(format!("bad tolerance '{tol}' for {id}")))?;
            c.tolerances.insert(id.to_string(), tol);
        }
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone();
                }
            )*};
        }
        take!(n_max, s, t_grid, suites, studies, seed, threads, samples, mc_samples);
        if self.output.is_some() {
            c.output = self.output.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Validate(exp) => {
            let c = exp.resolve()?;
            c.fixture.build()?;
            output::emit(None, &c.to_json()?)?;
            Ok(0)
        }
        Command::Enumerate(exp) => cmd_enumerate(&exp.resolve()?),
        Command::Measures { exp, mixed } => cmd_measures(&exp.resolve()?, mixed),
        Command::Verify { exp, wall_clock } => cmd_verify(&exp.resolve()?, wall_clock),
        Command::Study { ids, levels, output } => cmd_study(&ids, levels.as_deref(), output.as_deref()),
        Command::ReportDiff { a, b } => cmd_diff(&a, &b),
    }
}

fn cmd_enumerate(c: &ExperimentConfig) -> Result<i32> {
    let path = output::resolve(c.output.as_deref(), "enumerate.csv");
    if let Some(p) = &path {
        output::ensure_parent(p)?;
    }
    let fixture = c.fixture.build()?;
    let space = enumerate(fixture.base(), c.n_max)?;
    let mut csv = String::from("index,sector");
    for s in space.base().states() {
        let _ = write!(csv, ",n_{s}");
    }
    csv.push('\n');
    for (i, cfg) in space.configs().iter().enumerate() {
        let _ = write!(csv, "{i},{}", cfg.total());
        for k in cfg.occupation() {
            let _ = write!(csv, ",{k}");
        }
        csv.push('\n');
    }
    output::emit(path.as_deref(), &csv)?;
    eprintln!(
        "{}: {} configurations in {} sectors",
        fixture.name(),
        space.len(),
        space.sector_ranges().len()
    );
    Ok(0)
}

fn cmd_measures(c: &ExperimentConfig, mixed: bool) -> Result<i32> {
    let path = output::resolve(c.output.as_deref(), "measures.csv");
    if let Some(p) = &path {
        output::ensure_parent(p)?;
    }
    let fixture = c.fixture.build()?;
    let space = enumerate(fixture.base(), c.n_max)?;
    let measure = if mixed {
        let atoms = c.levy.iter().map(|a| (a.s, a.weight)).collect();
        mixed_poisson_weights(&space, &LevyMixture::new(atoms)?)?
    } else {
        poisson_weights(&space, c.s)?
    };
    output::emit(path.as_deref(), &measure.to_csv(&space))?;
    eprintln!(
        "{}: enumerated mass {} with tail bound {:e}",
        fixture.name(),
        measure.total_mass(),
        measure.tail
    );
    Ok(0)
}

fn cmd_verify(c: &ExperimentConfig, wall_clock: bool) -> Result<i32> {
    let path = output::resolve(c.output.as_deref(), "report.json");
    if let Some(p) = &path {
        output::ensure_parent(p)?;
    }
    let start = Instant::now();
    let fixture = c.fixture.build()?;
    let mut report = run_suites(&fixture, &c.suite_list()?, &c.suite_options(), c.threads)?;
    if let Some(id) = c
        .tolerances
        .keys()
        .find(|id| !report.checks.iter().any(|r| &r.report.check_id == *id))
    {
        return Err(CliError::Config(format!("tolerance given for unknown check '{id}'")));
    }
    for id in c.study_list()? {
        report.studies.push(run_convergence_study(id, &default_levels(id))?);
    }
    report.config = serde_json::to_value(c).map_err(configlab::Error::from)?;
    if wall_clock {
        report.wall_clock_seconds = Some(start.elapsed().as_secs_f64());
    }
    output::emit(path.as_deref(), &report.to_canonical_json()?)?;
    eprintln!("{}", summary(&report));
    for r in report.checks.iter().filter(|r| r.outcome == Outcome::Fail) {
        eprintln!(
            "FAIL {} defect={:e} tolerance={:e} at {}",
            r.report.check_id, r.report.max_defect, r.report.tolerance, r.report.witness
        );
    }
    for s in report.studies.iter().filter(|s| !s.pass) {
        eprintln!("FAIL study {} defects={:?}", s.study_id, s.defects);
    }
    Ok(report.exit_code())
}

fn summary(r: &SuiteReport) -> String {
    format!(
        "{}: {} checks, {} pass ({} exact), {} fail, {} defect-only, {} refused",
        r.fixture,
        r.checks.len(),
        r.count(Outcome::Pass),
        r.exact_passes(),
        r.count(Outcome::Fail),
        r.count(Outcome::DefectOnly),
        r.count(Outcome::Refused)
    )
}

fn cmd_study(ids: &[String], levels: Option<&[usize]>, dir: Option<&Path>) -> Result<i32> {
    let dir = dir
        .map(Path::to_path_buf)
        .or_else(output::default_dir)
        .unwrap_or_else(|| PathBuf::from("."));
    if !dir.is_dir() {
        return Err(CliError::BadFile {
            path: dir,
            message: "output directory does not exist".into(),
        });
    }
    let c = ExperimentConfig {
        studies: ids.to_vec(),
        ..ExperimentConfig::default()
    };
    let mut code = 0;
    for id in c.study_list()? {
        let levels = levels.map_or_else(|| default_levels(id), <[usize]>::to_vec);
        let study = run_convergence_study(id, &levels)?;
        output::write_atomic(&dir.join(format!("{id}.csv")), &study.to_csv())?;
        let order = study.fitted_order.map_or("n/a".to_string(), |o| format!("{o:.3}"));
        eprintln!(
            "{} {id}: order={order} defects={:?}",
            if study.pass { "PASS" } else { "FAIL" },
            study.defects
        );
        if !study.pass {
            code = 1;
        }
    }
    Ok(code)
}

fn read_report(path: &Path) -> Result<serde_json::Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |message: String| CliError::BadFile {
        path: path.to_path_buf(),
        message,
    };
    SuiteReport::from_json(&text).map_err(|e| bad(format!("not a report: {e}")))?;
    serde_json::from_str(&text).map_err(|e| bad(e.to_string()))
}

fn cmd_diff(a: &Path, b: &Path) -> Result<i32> {
    let lines = diff::diff_reports(&read_report(a)?, &read_report(b)?);
    let mut text = String::new();
    for l in &lines {
        text.push_str(l);
        text.push('\n');
    }
    output::emit(None, &text)?;
    Ok(i32::from(!lines.is_empty()))
}
