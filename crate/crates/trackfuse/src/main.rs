//! Command-line harness: `simulate` writes a scenario's sensor log,
//! `associate` replays a log (or scenario) through the pipeline, and
//! `report` summarizes an emitted report directory.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use trackfuse::config::RunConfig;
use trackfuse::logio;
use trackfuse::pipeline::{self, PipelineError};
use trackfuse::scenario::{emulate_sensors, export_ground_truth, generate, ScenarioKind};

#[derive(Parser)]
#[command(name = "trackfuse", version, about = "Camera / V2V track-to-track association")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario and write its sensor log (camera.csv, v2v.csv,
    /// host.csv, truth.json) into a directory.
    Simulate {
        /// Scenario name: car_following or ima.
        #[arg(long)]
        scenario: String,
        /// Seed for all simulated noise.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for the log files.
        #[arg(long)]
        out: PathBuf,
        /// Optional config file; simulation knobs are read from it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scenario length in seconds (scenario default if omitted).
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Run the association pipeline per a config file and emit
    /// report.json, timeline.csv, and confidence.csv.
    Associate {
        /// Config file (flat JSON; omitted keys take defaults).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for the report files.
        #[arg(long)]
        out: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config input log directory.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Override the config scenario.
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Print a human-readable summary of an emitted report directory.
    Report {
        /// Directory containing report.json.
        #[arg(long = "in")]
        input: PathBuf,
    },
}

fn exit_code_for(err: &PipelineError) -> u8 {
    match err {
        PipelineError::Config(_) => 2,
        PipelineError::Ingest(_) => 3,
        PipelineError::Scenario(_) => 4,
        PipelineError::Io { .. } => 5,
        _ => 1,
    }
}

fn simulate(
    scenario: String,
    seed: u64,
    out: PathBuf,
    config: Option<PathBuf>,
    duration: Option<f64>,
) -> Result<(), PipelineError> {
    let mut cfg = match config {
        Some(path) => RunConfig::load(&path)?,
        None => RunConfig::default(),
    };
    cfg.scenario = Some(scenario);
    cfg.input_dir = None;
    cfg.seed = seed;
    if duration.is_some() {
        cfg.duration_s = duration;
    }
    cfg.validate()?;

    let kind: ScenarioKind = cfg.scenario_kind().expect("validated scenario name");
    let scenario_cfg = cfg.scenario_config();
    let trajectories = generate(kind, &scenario_cfg);
    let log = emulate_sensors(&trajectories, &scenario_cfg)?;
    let truth = export_ground_truth(&trajectories, &log, &scenario_cfg, cfg.sync_rate_hz);
    logio::write_log(&out, &log)?;
    logio::write_truth(&out, &truth)?;
    println!(
        "wrote {} camera rows, {} BSMs, {} host poses, {} truth ticks to {}",
        log.camera.len(),
        log.bsm.len(),
        log.host.len(),
        truth.tick_count(),
        out.display()
    );
    Ok(())
}

fn associate(
    config: PathBuf,
    out: PathBuf,
    seed: Option<u64>,
    input: Option<PathBuf>,
    scenario: Option<String>,
) -> Result<(), PipelineError> {
    let mut cfg = RunConfig::load(&config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(input) = input {
        cfg.input_dir = Some(input);
        cfg.scenario = None;
    }
    if let Some(scenario) = scenario {
        cfg.scenario = Some(scenario);
        cfg.input_dir = None;
    }
    let report = pipeline::run_pipeline(&cfg)?;
    let paths = pipeline::emit_report(&report, &out)?;
    for p in &paths {
        println!("wrote {}", p.display());
    }
    print_summary(&report);
    Ok(())
}

fn print_summary(report: &pipeline::RunReport) {
    println!(
        "ticks: {}, track updates: {}, gate rejections: {}",
        report.counters.triggers_issued,
        report.counters.track_updates,
        report.counters.gate_rejections
    );
    match &report.tma {
        None => println!("TMA: no ground truth"),
        Some(t) => {
            let agg = t.aggregate();
            match agg.tma_percent() {
                None => println!("TMA: no decisions"),
                Some(p) => {
                    for (vehicle, tally) in &t.per_vehicle {
                        match tally.tma_percent() {
                            Some(v) => println!(
                                "TMA vehicle {vehicle}: {:.1}% ({}/{})",
                                v, tally.correct, tally.total
                            ),
                            None => println!("TMA vehicle {vehicle}: no decisions"),
                        }
                    }
                    println!("TMA aggregate: {:.1}% ({}/{})", p, agg.correct, agg.total);
                }
            }
        }
    }
}

fn report_summary(input: PathBuf) -> Result<(), PipelineError> {
    let path = input.join("report.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|source| PipelineError::Io { path: path.clone(), source })?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| PipelineError::Io {
        path: path.clone(),
        source: std::io::Error::other(e.to_string()),
    })?;

    match &value["tma"] {
        serde_json::Value::Null => println!("TMA: no ground truth"),
        tma => {
            if let Some(note) = tma["note"].as_str() {
                println!("TMA: {note}");
            } else {
                if let Some(per_vehicle) = tma["per_vehicle"].as_object() {
                    for (vehicle, tally) in per_vehicle {
                        println!(
                            "TMA vehicle {vehicle}: {}% ({}/{})",
                            tally["tma_percent"], tally["correct"], tally["total"]
                        );
                    }
                }
                println!(
                    "TMA aggregate: {}% ({}/{})",
                    tma["aggregate"]["tma_percent"],
                    tma["aggregate"]["correct"],
                    tma["aggregate"]["total"]
                );
            }
        }
    }
    println!("counters: {}", value["counters"]);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { scenario, seed, out, config, duration } => {
            simulate(scenario, seed, out, config, duration)
        }
        Command::Associate { config, out, seed, input, scenario } => {
            associate(config, out, seed, input, scenario)
        }
        Command::Report { input } => report_summary(input),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
