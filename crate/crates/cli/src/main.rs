//! `qsis`: command-line front end for the experiment harness.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qsis_core::bounds::Thm32Report;
use qsis_core::harness::{run_experiment, Experiment, ExperimentConfig, ExperimentKind, MonteCarloReport};
use qsis_core::Error;

#[derive(Parser, Debug)]
#[command(name = "qsis", version, about = "Sampling and reconstruction experiments in local quasi shift-invariant spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the closed-form sampling bounds for the configured space.
    Bounds(Common),
    /// Check the deterministic lemmas on random space elements.
    VerifyLemmas(Common),
    /// Monte Carlo test of a sampling inequality.
    SampleIneq {
        #[arg(long, value_parser = ["32", "33"], default_value = "32")]
        variant: String,
        #[command(flatten)]
        common: Common,
    },
    /// Reconstruct random elements from noiseless average samples.
    Reconstruct {
        /// Also write M, S and the recovered coefficients of trial 0 as CSV
        /// files into this directory.
        #[arg(long, value_name = "DIR")]
        export: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run whatever experiment kind the config names.
    Montecarlo(Common),
    /// Summarize a saved JSON report.
    Report {
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML or JSON experiment config; the built-in reference config if absent.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, env = "QSIS_WORKERS")]
    workers: Option<usize>,
    /// Output file; stdout if absent.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    eta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    zeta: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    p: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    q: Option<f64>,
}

/// Failure with the exit code it maps to.
#[derive(Debug)]
enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl Common {
    fn config(&self, kind: Option<ExperimentKind>) -> Result<ExperimentConfig, Failure> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::reference(),
        };
        if let Some(k) = kind {
            c.kind = k;
        }
        let p = &mut c.params;
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $target = v; })*
            };
        }
        set!(gamma => p.gamma, theta => p.theta, alpha => p.alpha, mu => p.mu, n => p.n, m => p.m);
        if self.eta.is_some() {
            p.eta = self.eta;
        }
        if self.zeta.is_some() {
            p.zeta = self.zeta;
        }
        set!(seed => c.seed, trials => c.trials, p => c.exponents.p, q => c.exponents.q);
        c.validate()?;
        Ok(c)
    }

    fn workers(&self) -> usize {
        self.workers
            .filter(|&w| w > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

fn write_out(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Runtime(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn json_text(value: &serde_json::Value) -> Result<String, Failure> {
    serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))
}

fn emit_report(rep: &MonteCarloReport, common: &Common) -> Result<(), Failure> {
    let text = match common.format {
        Format::Json => rep.to_json()?,
        Format::Csv => {
            let (header, rows) = rep.outcome_table();
            csv_text(&header, &rows)?
        }
    };
    write_out(common.out.as_deref(), &text)
}

fn bounds(common: &Common) -> Result<(), Failure> {
    let config = common.config(Some(ExperimentKind::Bounds))?;
    let exp = Experiment::build(&config)?;
    let t32 = exp.thm32()?;
    let text = match common.format {
        Format::Csv => {
            let header: Vec<String> = Thm32Report::CSV_HEADER.iter().map(|s| s.to_string()).collect();
            csv_text(&header, &[t32.csv_row()])?
        }
        Format::Json => {
            let t33 = exp.thm33()?;
            let value = serde_json::json!({
                "analysis": exp.analysis,
                "inputs": exp.bound_inputs(),
                "thm32": t32,
                "thm33": t33,
            });
            json_text(&value)?
        }
    };
    write_out(common.out.as_deref(), &text)
}

fn run(common: &Common, kind: Option<ExperimentKind>) -> Result<MonteCarloReport, Failure> {
    let config = common.config(kind)?;
    Ok(run_experiment(&config, common.workers())?)
}

fn export_instance(dir: &Path, common: &Common) -> Result<(), Failure> {
    let config = common.config(Some(ExperimentKind::Reconstruct))?;
    let exp = Experiment::build(&config)?;
    let inst = exp.reconstruction_instance(0)?;
    fs::create_dir_all(dir)?;
    let m = &inst.matrix;
    fs::write(dir.join("matrix.csv"), csv_text(&m.csv_header(), &m.csv_rows())?)?;

    let cols = config.params.m;
    let header = ["j", "k", "value"].map(String::from);
    let rows: Vec<Vec<String>> = inst
        .samples
        .iter()
        .enumerate()
        .map(|(r, x)| vec![(r / cols).to_string(), (r % cols).to_string(), format!("{x:?}")])
        .collect();
    fs::write(dir.join("samples.csv"), csv_text(&header, &rows)?)?;

    let header = ["gen", "s", "t", "c_hat", "c_true"].map(String::from);
    let coeffs = &inst.report.coefficients;
    let rows: Vec<Vec<String>> = coeffs
        .columns()
        .iter()
        .zip(coeffs.values().iter().zip(inst.truth.values()))
        .map(|(col, (h, t))| vec![col.gen.to_string(), col.s.to_string(), col.t.to_string(), format!("{h:?}"), format!("{t:?}")])
        .collect();
    fs::write(dir.join("coefficients.csv"), csv_text(&header, &rows)?)?;
    Ok(())
}

fn report(input: &Path, out: Option<&Path>, format: Format) -> Result<(), Failure> {
    let text = fs::read_to_string(input)
        .map_err(|e| Failure::Validation(format!("cannot read report {}: {e}", input.display())))?;
    let rep = MonteCarloReport::from_json(&text)?;
    let text = match format {
        Format::Json => json_text(&serde_json::json!({
            "kind": rep.kind,
            "seed": rep.seed,
            "trials": rep.trials,
            "evaluated": rep.evaluated,
            "successes": rep.successes,
            "membership_failures": rep.membership_failures,
            "injectivity_failures": rep.injectivity_failures,
            "success_rate": rep.success_rate,
            "ci95": rep.ci95,
            "prob_lower": rep.prob_lower,
            "vacuous": rep.vacuous,
            "rate_meets_bound": rep.rate_meets_bound,
            "summary": rep.summary,
        }))?,
        Format::Csv => {
            let (header, rows) = rep.outcome_table();
            csv_text(&header, &rows)?
        }
    };
    write_out(out, &text)
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Bounds(c) => bounds(&c),
        Command::VerifyLemmas(c) => emit_report(&run(&c, Some(ExperimentKind::VerifyLemmas))?, &c),
        Command::SampleIneq { variant, common } => {
            let kind = if variant == "33" {
                ExperimentKind::SamplingInequality33
            } else {
                ExperimentKind::SamplingInequality32
            };
            emit_report(&run(&common, Some(kind))?, &common)
        }
        Command::Reconstruct { export, common } => {
            let rep = run(&common, Some(ExperimentKind::Reconstruct))?;
            if let Some(dir) = export {
                export_instance(&dir, &common)?;
            }
            emit_report(&rep, &common)
        }
        Command::Montecarlo(c) => emit_report(&run(&c, None)?, &c),
        Command::Report { input, out, format } => report(&input, out.as_deref(), format),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
