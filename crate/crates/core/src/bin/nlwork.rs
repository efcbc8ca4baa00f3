use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nonlocal_work::config::{Experiment, ExperimentConfig};
use nonlocal_work::output::{self, Table};
use nonlocal_work::runner;
use nonlocal_work::{Error, Result};

#[derive(Parser)]
#[command(name = "nlwork", version, about = "Partitioned thermodynamics of quasi-statically driven free fermions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one protocol and write the per-point series.
    Run(Common),
    /// Mechanical advantage along a single-parameter protocol.
    Lever(Common),
    /// Compare two protocols that share their endpoints.
    Pathdep(Common),
    /// Repeat the run for every value of the configured sweep.
    Sweep(Common),
    /// Compare the thermodynamics against the many-body reference.
    OracleCheck(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output file; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the number of quadrature intervals (power of two, >= 16).
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Plot,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(g) = self.grid {
            cfg.grid = g;
            cfg.validate()?;
        }
        Ok(cfg)
    }

    fn emit(&self, table: &Table) -> Result<()> {
        let text = match self.format {
            Format::Csv => table.to_csv(),
            Format::Plot => table.to_plotdata(),
        };
        match &self.out {
            Some(path) => output::write_text(path, &text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn warn(lines: &[String]) {
    for w in lines {
        eprintln!("warning: {w}");
    }
}

fn report_summary(exp: &Experiment, summary: &runner::RunSummary) {
    for t in &summary.subsystems {
        eprintln!(
            "{}: dU = {:.10e}  dS = {:.10e}  dN = {:.10e}  W = {:.10e}  power = {:.10e}  nonlocal = {:.10e}",
            t.label, t.delta_u.value, t.delta_s.value, t.delta_n.value, t.work.value, t.power.value, t.nonlocal.value
        );
    }
    eprintln!(
        "W_ext = {:.12e} (+/- {:.1e}), dOmega = {:.12e}, first-law residual on `{}` = {:.1e}",
        summary.external_work.value,
        summary.external_work.error,
        summary.delta_omega,
        exp.drive_label(),
        summary.get(exp.drive_label()).map_or(f64::NAN, |t| t.first_law_residual(&exp.reservoir)),
    );
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(args) => {
            let exp = args.load()?.experiment()?;
            let result = runner::run_protocol(&exp)?;
            warn(&result.summary.warnings);
            report_summary(&exp, &result.summary);
            args.emit(&output::series_table(&result))?;
            if !result.summary.endpoint_ok() {
                return Err(Error::Consistency(format!(
                    "external work and endpoint grand potential differ by {:e}",
                    result.summary.endpoint_residual
                )));
            }
            Ok(())
        }
        Command::Lever(args) => {
            let scan = runner::run_lever_scan(&args.load()?.experiment()?)?;
            warn(&scan.warnings);
            match scan.max_eta() {
                Some(m) => eprintln!("max eta = {m:.6}"),
                None => eprintln!("max eta undefined"),
            }
            args.emit(&output::lever_table(&scan))
        }
        Command::Pathdep(args) => {
            let exps = args.load()?.experiments()?;
            if exps.len() != 2 {
                return Err(Error::Config(format!("pathdep needs two protocols, got {}", exps.len())));
            }
            let cmp = runner::run_path_dependence(&exps[0], &exps[1])?;
            for r in &cmp.rows {
                eprintln!("{} {}: |A - B| = {:.3e}", r.label, r.quantity, r.difference().abs());
            }
            args.emit(&output::path_table(&cmp))
        }
        Command::Sweep(args) => {
            let cfg = args.load()?;
            let sweep = cfg.sweep.as_ref().ok_or_else(|| Error::Config("configuration has no `sweep`".into()))?;
            let result = runner::run_sweep(&cfg.experiment()?, &sweep.parameter, &sweep.values)?;
            for s in &result.summaries {
                warn(&s.warnings);
            }
            args.emit(&output::sweep_table(&result, &cfg.output_quantities()))
        }
        Command::OracleCheck(args) => {
            let rows = runner::oracle_check(&args.load()?.experiment()?, &[0.0, 0.5, 1.0])?;
            let table = Table {
                metadata: vec![("table".into(), "oracle check".into())],
                header: ["s", "quantity", "value", "reference", "tolerance"].map(String::from).to_vec(),
                rows: rows
                    .iter()
                    .map(|r| {
                        use output::Cell::*;
                        vec![Num(r.s), Text(r.quantity.clone()), Num(r.value), Num(r.reference), Num(r.tolerance)]
                    })
                    .collect(),
                curves: Vec::new(),
            };
            args.emit(&table)?;
            let failed: Vec<_> = rows.iter().filter(|r| !r.passed()).collect();
            if failed.is_empty() {
                eprintln!("oracle check passed ({} comparisons)", rows.len());
                Ok(())
            } else {
                Err(Error::Consistency(format!(
                    "{} of {} oracle comparisons failed, first: {} at s = {}",
                    failed.len(),
                    rows.len(),
                    failed[0].quantity,
                    failed[0].s
                )))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
