use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use gazefuse::agent::{Agent, HttpAgent, Journal, JournalingAgent, MockAgent, RemoteConfig, UreqTransport};
use gazefuse::fusion::weight_curves_csv;
use gazefuse::harness::builder::{bundled, BUNDLED};
use gazefuse::harness::monte_carlo::SUMMARY_CSV_HEADER;
use gazefuse::harness::{monte_carlo, run_scenario, MonteCarloReport, NoiseSweep, RunConfig, RunResult, Scenario};
use gazefuse::responder::RuleBasedResponder;
use log::{info, warn};

const EXIT_UNMET: u8 = 1;
const EXIT_INPUT: u8 = 3;

#[derive(Parser)]
#[command(name = "gazefuse", version, about = "Gaze and speech fusion pipeline runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios (JSON files or bundled names) and report success rates.
    Run(RunArgs),
    /// Print the normalized gaze weight curves as CSV.
    Weights {
        /// Index bounds N to tabulate.
        #[arg(long = "n", value_delimiter = ',', default_values_t = [2usize, 5, 10, 20])]
        bounds: Vec<usize>,
    },
    /// Re-run a scenario against the agent replies recorded in a journal.
    Replay {
        #[arg(long)]
        journal: PathBuf,
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the bundled scenario names.
    List,
    /// Write a bundled scenario as JSON.
    Export {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AgentKind {
    Mock,
    Remote,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(required = true)]
    scenarios: Vec<String>,
    /// Override every scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = AgentKind::Mock)]
    agent: AgentKind,
    /// Per-slot gaze offset sigma in cm; defaults to the scenario's own value.
    #[arg(long)]
    noise_sigma_cm: Option<f64>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    /// Directory for trials.csv, summary.csv and results.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Append every agent exchange to this JSON-lines file.
    #[arg(long)]
    journal: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Weights { bounds } => {
            print!("{}", weight_curves_csv(&bounds));
            Ok(true)
        }
        Command::Replay { journal, scenario, seed } => replay(&journal, &scenario, seed),
        Command::List => {
            BUNDLED.iter().for_each(|n| println!("{n}"));
            Ok(true)
        }
        Command::Export { name, out } => export(&name, out.as_deref()),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_UNMET),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

/// Loads a scenario file, or falls back to a bundled scenario of that name.
fn resolve(spec: &str) -> Result<Scenario, String> {
    let path = Path::new(spec);
    let s = if path.exists() {
        Scenario::load(path).map_err(|e| e.to_string())?
    } else if let Some(s) = bundled(spec) {
        s
    } else {
        return Err(format!("{spec}: no such file or bundled scenario"));
    };
    s.validate().map_err(|e| e.to_string())?;
    Ok(s)
}

fn base_agent(kind: AgentKind) -> Result<Arc<dyn Agent>, String> {
    Ok(match kind {
        AgentKind::Mock => Arc::new(MockAgent::with_fallback(Arc::new(RuleBasedResponder))),
        AgentKind::Remote => {
            let cfg = RemoteConfig::from_env().map_err(|e| e.to_string())?;
            Arc::new(HttpAgent::new(cfg, Arc::new(UreqTransport)))
        }
    })
}

fn run(args: RunArgs) -> Result<bool, String> {
    let scenarios = args.scenarios.iter().map(|s| resolve(s)).collect::<Result<Vec<_>, _>>()?;
    let agent = base_agent(args.agent)?;
    let journal = match &args.journal {
        Some(p) => Some(Arc::new(Journal::create(p).map_err(|e| e.to_string())?)),
        None => None,
    };
    let base = RunConfig { seed: args.seed, ..RunConfig::default() };

    let mut reports = Vec::with_capacity(scenarios.len());
    for s in &scenarios {
        let sweep = NoiseSweep {
            sigmas_cm: vec![args.noise_sigma_cm.unwrap_or(s.noise.gaze_sigma_cm)],
            trials: args.trials as usize,
        };
        let report = match &journal {
            Some(j) => {
                let a = JournalingAgent::new(agent.clone(), j.clone()).for_scenario(s.id.clone());
                monte_carlo(s, &a, &sweep, &base)
            }
            None => monte_carlo(s, &agent, &sweep, &base),
        };
        let m = &report.levels[0].metrics;
        println!(
            "{}: {}/{} trials met expectations ({:.2}%)",
            s.id, m.n_correct, m.n_total, m.success_rate
        );
        for r in report.runs.iter().filter(|r| !r.success).take(1) {
            warn!(
                "{} trial {}: {} failed: {}",
                s.id,
                r.trial,
                r.failure_stage.map(|st| st.as_str()).unwrap_or("?"),
                r.failure.as_deref().unwrap_or("")
            );
        }
        reports.push(report);
    }

    if let Some(dir) = &args.out {
        write_outputs(dir, &reports)?;
        info!("wrote results to {}", dir.display());
    }
    Ok(reports.iter().all(|r| r.runs.iter().all(|x| x.success)))
}

fn write_outputs(dir: &Path, reports: &[MonteCarloReport]) -> Result<(), String> {
    let io = |p: &Path, e: std::io::Error| format!("{}: {e}", p.display());
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;

    let mut trials = String::new();
    let mut summary = format!("{SUMMARY_CSV_HEADER}\n");
    for (i, r) in reports.iter().enumerate() {
        let t = r.trial_csv();
        trials.push_str(if i == 0 { &t } else { t.split_once('\n').map_or("", |(_, rest)| rest) });
        summary.push_str(r.summary_csv().split_once('\n').map_or("", |(_, rest)| rest));
    }
    let runs: Vec<&RunResult> = reports.iter().flat_map(|r| &r.runs).collect();
    let json = serde_json::to_string_pretty(&runs).map_err(|e| e.to_string())?;

    for (name, body) in [("trials.csv", trials), ("summary.csv", summary), ("results.json", json)] {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| io(&p, e))?;
    }
    Ok(())
}

fn replay(journal: &Path, spec: &str, seed: Option<u64>) -> Result<bool, String> {
    let s = resolve(spec)?;
    let agent = MockAgent::from_journal(journal).map_err(|e| e.to_string())?;
    let r = run_scenario(&s, &agent, &RunConfig { seed, ..RunConfig::default() });
    println!("{}", serde_json::to_string_pretty(&r).map_err(|e| e.to_string())?);
    if let (Some(stage), Some(msg)) = (r.failure_stage, &r.failure) {
        eprintln!("{}: {stage} failed: {msg}", s.id);
    }
    Ok(r.success)
}

fn export(name: &str, out: Option<&Path>) -> Result<bool, String> {
    let s = bundled(name).ok_or_else(|| format!("{name}: unknown bundled scenario"))?;
    let json = s.to_json_pretty();
    match out {
        Some(p) => fs::write(p, json + "\n").map_err(|e| format!("{}: {e}", p.display()))?,
        None => println!("{json}"),
    }
    Ok(true)
}
