use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use vibresc::acceptance;
use vibresc::benchmarks::{scenario_defaults, ScenarioName};
use vibresc::config::{emit_scenario, parse_scenario_with_overrides, strict_from_env, STRICT_ENV};
use vibresc::output::OutputError;
use vibresc::runner::{run_scenario, RunError, RunOptions};
use vibresc::scenario::Scenario;

/// Exit status when an acceptance criterion fails.
const EXIT_CHECK_FAILED: u8 = 1;

#[derive(Parser)]
#[command(
    name = "vibresc",
    version,
    about = "Single-dither extremum seeking simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file; trailing `section.key=value` pairs override it.
    Run {
        config: PathBuf,
        /// Directory for relative output paths.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Print a built-in scenario as a config file.
    Defaults {
        name: ScenarioName,
        /// Write to this file instead of stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run a scenario at several dither frequencies.
    Sweep {
        config: PathBuf,
        /// Comma-separated dither frequencies (rad/s).
        #[arg(long, value_delimiter = ',', required = true)]
        omega: Vec<f64>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Run the acceptance suite, one line per criterion.
    Acceptance {
        /// Only these criterion ids.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn read_config(path: &Path) -> Result<String, RunError> {
    std::fs::read_to_string(path).map_err(|source| {
        RunError::Output(OutputError::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

fn load(path: &Path, overrides: &[String]) -> Result<Scenario, RunError> {
    let text = read_config(path)?;
    Ok(parse_scenario_with_overrides(
        &text,
        overrides,
        strict_from_env(),
    )?)
}

fn report(result: Result<(), RunError>) -> u8 {
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code() as u8
        }
    }
}

fn run(config: &Path, out_dir: Option<PathBuf>, overrides: &[String]) -> Result<(), RunError> {
    let s = load(config, overrides)?;
    let summary = run_scenario(&s, &RunOptions { out_dir })?;
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    );
    Ok(())
}

/// Appends `_w<omega>` to the scenario name and its output file stems.
fn frequency_variant(mut s: Scenario, omega: f64) -> Scenario {
    let tag = format!("_w{omega}");
    let rename = |p: &PathBuf| {
        let stem = p
            .file_stem()
            .map(|v| v.to_string_lossy().into_owned())
            .unwrap_or_default();
        let ext = p
            .extension()
            .map(|v| format!(".{}", v.to_string_lossy()))
            .unwrap_or_default();
        p.with_file_name(format!("{stem}{tag}{ext}"))
    };
    s.name.push_str(&tag);
    s.outputs.csv = s.outputs.csv.as_ref().map(rename);
    s.outputs.svg = s.outputs.svg.as_ref().map(rename);
    s
}

fn sweep(
    config: &Path,
    omegas: &[f64],
    jobs: usize,
    out_dir: Option<PathBuf>,
    overrides: &[String],
) -> u8 {
    let text = match read_config(config) {
        Ok(t) => t,
        Err(e) => return report(Err(e)),
    };
    let scenarios: Result<Vec<Scenario>, RunError> = omegas
        .iter()
        .map(|&w| {
            let mut all = overrides.to_vec();
            all.push(format!("gains.omega={w}"));
            let s = parse_scenario_with_overrides(&text, &all, strict_from_env())?;
            Ok(frequency_variant(s, w))
        })
        .collect();
    let scenarios = match scenarios {
        Ok(s) => s,
        Err(e) => return report(Err(e)),
    };
    let opts = RunOptions { out_dir };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool");
    let results: Vec<(String, Result<(), RunError>)> = pool.install(|| {
        scenarios
            .par_iter()
            .map(|s| (s.name.clone(), run_scenario(s, &opts).map(drop)))
            .collect()
    });
    let mut status = 0;
    for (name, r) in results {
        match r {
            Ok(()) => println!("{name}: ok"),
            Err(e) => {
                println!("{name}: {e}");
                status = status.max(e.exit_code() as u8);
            }
        }
    }
    status
}

fn run_acceptance(only: &[String], jobs: usize) -> u8 {
    let selected: Vec<_> = if only.is_empty() {
        acceptance::CRITERIA.iter().collect()
    } else {
        let mut picked = Vec::new();
        for id in only {
            match acceptance::find(id) {
                Some(c) => picked.push(c),
                None => {
                    eprintln!("error: unknown criterion {id:?}");
                    return 2;
                }
            }
        }
        picked
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool");
    let verdicts: Vec<_> = pool.install(|| selected.par_iter().map(|c| c.run()).collect());
    for v in &verdicts {
        println!("{v}");
    }
    let failed = verdicts.iter().filter(|v| !v.passed).count();
    println!("{} passed, {failed} failed", verdicts.len() - failed);
    if failed == 0 {
        0
    } else {
        EXIT_CHECK_FAILED
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    log::debug!("strict config mode: {} ({STRICT_ENV})", strict_from_env());
    let status = match cli.command {
        Command::Run {
            config,
            out_dir,
            overrides,
        } => report(run(&config, out_dir, &overrides)),
        Command::Defaults { name, output } => {
            let text = emit_scenario(&scenario_defaults(name));
            match output {
                None => {
                    print!("{text}");
                    0
                }
                Some(path) => report(
                    std::fs::write(&path, text)
                        .map_err(|source| RunError::Output(OutputError::Io { path, source })),
                ),
            }
        }
        Command::Sweep {
            config,
            omega,
            jobs,
            out_dir,
            overrides,
        } => sweep(&config, &omega, jobs, out_dir, &overrides),
        Command::Acceptance { only, jobs } => run_acceptance(&only, jobs),
    };
    ExitCode::from(status)
}
