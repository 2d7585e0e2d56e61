//! Seeded Monte-Carlo noise studies over a scenario.

use serde::{Deserialize, Serialize};

use super::metrics::{success_rate, trial_csv_rows, Metrics, TRIAL_CSV_HEADER};
use super::pipeline::{run_scenario, RunConfig, RunResult};
use super::scenario::Scenario;
use crate::agent::Agent;
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSweep {
    /// Per-slot gaze sigma levels, cm.
    pub sigmas_cm: Vec<f64>,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub sigma_cm: f64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub scenario_id: String,
    pub seed: u64,
    pub levels: Vec<LevelSummary>,
    pub runs: Vec<RunResult>,
}

pub const SUMMARY_CSV_HEADER: &str =
    "scenario_id,sigma_cm,trials,successes,success_rate,gaze_error_mean_cm,gaze_error_std_cm";

impl MonteCarloReport {
    pub fn trial_csv(&self) -> String {
        let mut out = format!("{TRIAL_CSV_HEADER},sigma_cm\n");
        for r in &self.runs {
            for row in trial_csv_rows(r) {
                out.push_str(&format!("{row},{}\n", r.noise_sigma_cm));
            }
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let mut out = format!("{SUMMARY_CSV_HEADER}\n");
        for l in &self.levels {
            let m = &l.metrics;
            out.push_str(&format!(
                "{},{},{},{},{:.4},{},{}\n",
                self.scenario_id,
                l.sigma_cm,
                m.n_total,
                m.n_correct,
                m.success_rate,
                f(m.gaze_error_mean_cm),
                f(m.gaze_error_std_cm)
            ));
        }
        out
    }
}

/// Runs `sweep.trials` trials per noise level. Trial `k` draws from stream
/// `k` of the seed, so results do not depend on scheduling.
pub fn monte_carlo(s: &Scenario, agent: &dyn Agent, sweep: &NoiseSweep, base: &RunConfig) -> MonteCarloReport {
    run_levels(s, agent, sweep, base, true)
}

/// Same as [`monte_carlo`] but always single-threaded.
pub fn monte_carlo_sequential(
    s: &Scenario,
    agent: &dyn Agent,
    sweep: &NoiseSweep,
    base: &RunConfig,
) -> MonteCarloReport {
    run_levels(s, agent, sweep, base, false)
}

fn run_levels(s: &Scenario, agent: &dyn Agent, sweep: &NoiseSweep, base: &RunConfig, parallel: bool) -> MonteCarloReport {
    let jobs: Vec<(f64, u64)> = sweep
        .sigmas_cm
        .iter()
        .flat_map(|&sigma| (0..sweep.trials as u64).map(move |t| (sigma, t)))
        .collect();
    let task = |&(sigma, trial): &(f64, u64)| {
        let cfg = RunConfig { noise_sigma_cm: Some(sigma), trial, ..base.clone() };
        run_scenario(s, agent, &cfg)
    };
    let runs = if parallel { par::map(&jobs, task) } else { par::map_sequential(&jobs, task) };
    let levels = sweep
        .sigmas_cm
        .iter()
        .enumerate()
        .map(|(i, &sigma_cm)| LevelSummary {
            sigma_cm,
            metrics: success_rate(&runs[i * sweep.trials..(i + 1) * sweep.trials]),
        })
        .collect();
    MonteCarloReport { scenario_id: s.id.clone(), seed: base.seed.unwrap_or(s.seed), levels, runs }
}

/// Runs many scenarios, in parallel when enabled; output order follows input order.
pub fn run_batch(scenarios: &[Scenario], agent: &dyn Agent, cfg: &RunConfig) -> Vec<RunResult> {
    par::map(scenarios, |s| run_scenario(s, agent, cfg))
}
