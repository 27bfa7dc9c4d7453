use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use combodose_core::designs::DesignId;
use combodose_core::engine::{run_study, Execution, MetricsTable, Study};
use combodose_core::history::{Recommendation, TrialHistory};
use combodose_core::report::{self, ReferenceTable, Setting};
use combodose_core::Error;

#[derive(Parser)]
#[command(
    name = "combodose",
    version,
    about = "Dose finding for two-agent combination trials"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation study and write one CSV row per (design, scenario).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base seed; overrides the config file (whose default is 0).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<u32>,
        /// Worker threads; 1 runs sequentially.
        #[arg(long)]
        threads: Option<usize>,
        /// Stop a trial once the recommended dose already holds this many patients.
        #[arg(long, value_name = "N")]
        early_stop: Option<u32>,
    },
    /// Print the next decision for a recorded trial history.
    Decide {
        /// History JSON; `-` reads stdin.
        #[arg(long)]
        history: PathBuf,
        #[arg(long, value_enum, default_value_t = DecideFormat::Text)]
        format: DecideFormat,
    },
    /// Compare simulation results with the published reference values.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value = "standard")]
        setting: String,
        #[arg(long, value_enum, default_value_t = ReportFormat::Markdown)]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the escalation / de-escalation chart of cboin or ckeyboard.
    BoundaryTable {
        #[arg(long, default_value = "cboin")]
        design: String,
        #[arg(long, default_value_t = 0.3)]
        phi: f64,
        /// Largest patient count in the chart.
        #[arg(long, default_value_t = 30)]
        cap: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DecideFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Markdown,
    Csv,
}

/// Exit code 2 for bad input, 3 for failures while running.
enum Failure {
    Config(Error),
    Runtime(Error),
}

type Outcome = Result<(), Failure>;

fn config(e: impl Into<Error>) -> Failure {
    Failure::Config(e.into())
}

fn runtime(e: impl Into<Error>) -> Failure {
    Failure::Runtime(e.into())
}

fn read_input(path: &Path) -> Result<String, Failure> {
    let mut text = String::new();
    if path == Path::new("-") {
        io::stdin().read_to_string(&mut text).map_err(config)?;
    } else {
        text = std::fs::read_to_string(path)
            .map_err(|e| config(Error::Io(format!("{}: {e}", path.display()))))?;
    }
    Ok(text)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(
            File::create(p).map_err(|e| runtime(Error::Io(format!("{}: {e}", p.display()))))?,
        ),
        None => Box::new(io::stdout().lock()),
    })
}

fn simulate(
    config_path: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
    reps: Option<u32>,
    threads: Option<usize>,
    early_stop: Option<u32>,
) -> Outcome {
    let mut study = Study::load(config_path).map_err(config)?;
    if let Some(s) = seed {
        study.config.seed = s;
    }
    if let Some(r) = reps {
        study.config.reps = r;
    }
    if early_stop.is_some() {
        study.config.early_stop_n = early_stop;
    }
    study.validate().map_err(config)?;
    let table = run_study(&study, Execution::with_threads(threads)).map_err(runtime)?;
    table.write_csv(output(out)?).map_err(runtime)
}

fn render_recommendation(r: &Recommendation) -> String {
    let mut s = format!("next: {}\nphase: {}\n", r.decision, r.phase);
    if let Some(size) = r.cohort_size {
        s.push_str(&format!("cohort size: {size}\n"));
    }
    if let Some(mtd) = &r.mtd {
        match (mtd.selected, mtd.estimate) {
            (Some(d), Some(e)) => s.push_str(&format!("mtd: {d} (estimate {e:.3})\n")),
            (Some(d), None) => s.push_str(&format!("mtd: {d}\n")),
            _ => s.push_str("mtd: none\n"),
        }
    }
    s.push_str("estimates (rows: agent B level from highest; columns: agent A level):\n");
    let rows: Vec<_> = r.estimates.rows().collect();
    for (k, row) in rows.iter().enumerate().rev() {
        let cells: Vec<String> = row
            .iter()
            .map(|v| {
                v.map(|x| format!("{x:.3}"))
                    .unwrap_or_else(|| "  -  ".into())
            })
            .collect();
        s.push_str(&format!("  k={} {}\n", k + 1, cells.join(" ")));
    }
    s
}

fn decide(path: &Path, format: DecideFormat) -> Outcome {
    let history = TrialHistory::from_json(&read_input(path)?).map_err(config)?;
    let rec = history.evaluate().map_err(runtime)?;
    let text = match format {
        DecideFormat::Text => render_recommendation(&rec),
        DecideFormat::Json => serde_json::to_string_pretty(&rec).map_err(runtime)? + "\n",
    };
    output(None)?.write_all(text.as_bytes()).map_err(runtime)
}

fn report_cmd(results: &Path, setting: &str, format: ReportFormat, out: Option<&Path>) -> Outcome {
    let setting: Setting = setting.parse().map_err(config)?;
    let table = MetricsTable::read_csv(read_input(results)?.as_bytes()).map_err(config)?;
    let cmp = report::compare(&table, ReferenceTable::embedded(), setting);
    for w in &cmp.warnings {
        eprintln!("warning: {w}");
    }
    let mut w = output(out)?;
    match format {
        ReportFormat::Markdown => w.write_all(cmp.to_markdown().as_bytes()).map_err(runtime),
        ReportFormat::Csv => cmp.write_csv(w).map_err(runtime),
    }
}

fn boundary(design: &str, phi: f64, cap: u32, out: Option<&Path>) -> Outcome {
    let id: DesignId = design.parse().map_err(config)?;
    let rows = report::boundary_table(id, phi, cap).map_err(config)?;
    report::write_boundary_csv(&rows, output(out)?).map_err(runtime)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate {
            config,
            out,
            seed,
            reps,
            threads,
            early_stop,
        } => simulate(config, out.as_deref(), *seed, *reps, *threads, *early_stop),
        Command::Decide { history, format } => decide(history, *format),
        Command::Report {
            results,
            setting,
            format,
            out,
        } => report_cmd(results, setting, *format, out.as_deref()),
        Command::BoundaryTable {
            design,
            phi,
            cap,
            out,
        } => boundary(design, *phi, *cap, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
