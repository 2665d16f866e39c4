use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pathid::scenario::{
    load_scenario, reproduce, run_analyze, run_audit, run_extrapolate, run_simulate, write_audit,
    write_extrapolation, ReportFormat, Scenario,
};
use pathid::TagFormat;

/// Simulate and analyse two-source photon-pair interference over free-space links.
#[derive(Debug, Parser)]
#[command(name = "pathid", version)]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Tags {
    Binary,
    Csv,
}

impl From<Tags> for TagFormat {
    fn from(t: Tags) -> Self {
        match t {
            Tags::Binary => TagFormat::Binary,
            Tags::Csv => TagFormat::Csv,
        }
    }
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file, or the name of a built-in preset (link_2m, link_20m, link_70m).
    #[arg(long)]
    scenario: PathBuf,
    /// Random seed; defaults to the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Format of reports and ground truth.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a phase scan: tag streams, binned traces and ground truth.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Encoding of the tag stream file.
        #[arg(long, value_enum, default_value = "binary")]
        tags: Tags,
    },
    /// Extract visibilities from trace CSVs.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Trace CSV files or directories holding them; defaults to the output directory.
        #[arg(long = "input", num_args = 1..)]
        inputs: Vec<PathBuf>,
    },
    /// Tabulate the beam, coherence and counting figures of a scenario.
    Audit {
        #[command(flatten)]
        common: Common,
    },
    /// Straight-line visibility extrapolation over link distance.
    Extrapolate {
        /// Report files (or directories holding report.json).
        #[arg(long = "report", num_args = 1..)]
        reports: Vec<PathBuf>,
        /// Additional `distance_m:visibility` points, visibility as a fraction.
        #[arg(long = "point", value_parser = parse_point)]
        points: Vec<(f64, f64)>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Simulate and analyse every preset and emit the comparison table.
    Reproduce {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long, value_enum, default_value = "binary")]
        tags: Tags,
    },
}

fn parse_point(s: &str) -> Result<(f64, f64), String> {
    let (d, v) = s.split_once(':').ok_or("expected distance:visibility")?;
    let d = d.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let v = v.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((d, v))
}

/// Exit code of an analysis that produced no visibility.
const EXIT_DEGENERATE: u8 = 3;

fn scenario_and_seed(common: &Common) -> pathid::Result<(Scenario, u64)> {
    let scenario = load_scenario(&common.scenario)?;
    let seed = common.seed.unwrap_or(scenario.seed);
    Ok((scenario, seed))
}

fn run(cli: Cli) -> pathid::Result<ExitCode> {
    match cli.command {
        Command::Simulate { common, tags } => {
            let (scenario, seed) = scenario_and_seed(&common)?;
            let summary = run_simulate(
                &scenario,
                seed,
                &common.out,
                tags.into(),
                common.format.into(),
            )?;
            println!(
                "{}: {} bins, {} signal / {} idler tags, {} coincidences (seed {seed}) -> {}",
                summary.scenario,
                summary.n_bins,
                summary.n_signal,
                summary.n_idler,
                summary.n_coincidences,
                common.out.display()
            );
        }
        Command::Analyze { common, inputs } => {
            let (scenario, seed) = scenario_and_seed(&common)?;
            let inputs = if inputs.is_empty() {
                vec![common.out.clone()]
            } else {
                inputs
            };
            let report = run_analyze(&scenario, &inputs, seed, &common.out, common.format.into())?;
            print!("{}", report.summary());
            if report.degenerate {
                eprintln!("at least one trace has no defined visibility");
                return Ok(ExitCode::from(EXIT_DEGENERATE));
            }
        }
        Command::Audit { common } => {
            let (scenario, _) = scenario_and_seed(&common)?;
            let audit = run_audit(&scenario)?;
            write_audit(&audit, &common.out, common.format.into())?;
            print!("{}", audit.summary());
        }
        Command::Extrapolate {
            reports,
            points,
            out,
            format,
        } => {
            let report = run_extrapolate(&reports, &points)?;
            write_extrapolation(&report, &out, format.into())?;
            print!("{}", report.summary());
        }
        Command::Reproduce {
            seed,
            out,
            format,
            tags,
        } => {
            let result = reproduce(seed, &out, tags.into(), format.into())?;
            print!("{}", result.summary());
            if result
                .rows
                .iter()
                .any(|r| r.trace == "coincidences" && r.visibility.is_none())
            {
                return Ok(ExitCode::from(EXIT_DEGENERATE));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
