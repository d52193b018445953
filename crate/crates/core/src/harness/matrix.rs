//! Experiment matrix: variants × tasks × seeds, episodes run in parallel.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BackendConfig, ConfigError, RunConfig, Variant};
use super::episode::{run_episode, EpisodeError, EpisodeOptions, EpisodeSpec, TD_NOTE};
use super::transcript::Transcript;
use crate::map::MapSpec;
use crate::world::EpisodeMetrics;

/// Result of a single matrix cell.
#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub label: String,
    pub task: String,
    pub seed: u64,
    pub metrics: Option<EpisodeMetrics>,
    pub error: Option<String>,
    pub transcript: Transcript,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub label: String,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Mean simulation steps over completed episodes.
    pub mean_ss: f64,
    /// Mean travel distance over completed episodes.
    pub mean_td: f64,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub backend: String,
    pub tasks: Vec<String>,
    pub seeds: Vec<u64>,
    pub dummy_count: usize,
    pub td_note: String,
    pub rows: Vec<MatrixRow>,
}

#[derive(Debug, Clone)]
pub struct MatrixRun {
    pub report: MatrixReport,
    /// In variant, task, seed order regardless of scheduling.
    pub episodes: Vec<EpisodeResult>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn summarize(label: &str, results: &[&EpisodeResult]) -> MatrixRow {
    let done: Vec<&EpisodeMetrics> = results.iter().filter_map(|r| r.metrics.as_ref()).collect();
    let successes = done.iter().filter(|m| m.success).count();
    MatrixRow {
        label: label.to_string(),
        episodes: results.len(),
        successes,
        success_rate: if results.is_empty() { 0.0 } else { successes as f64 / results.len() as f64 },
        mean_ss: mean(done.iter().map(|m| m.simulation_steps as f64)),
        mean_td: mean(done.iter().map(|m| m.travel_distance)),
        errors: results.len() - done.len(),
    }
}

fn run_cell(cfg: &RunConfig, variant: &Variant, task: &str, seed: u64) -> EpisodeResult {
    let spec = EpisodeSpec {
        task: task.to_string(),
        seed,
        agents: cfg.agents,
        horizon: cfg.horizon,
        dummy_count: cfg.dummy_count,
        agent_config: cfg.variant_config(variant),
        label: variant.label.clone(),
        map: MapSpec::house(),
    };
    let mut result = EpisodeResult {
        label: variant.label.clone(),
        task: task.to_string(),
        seed,
        metrics: None,
        error: None,
        transcript: Transcript::default(),
    };
    let mut reasoner = match cfg.backend.build() {
        Ok(r) => r,
        Err(e) => {
            result.error = Some(e.to_string());
            return result;
        }
    };
    match run_episode(&spec, reasoner.as_mut(), EpisodeOptions::default()) {
        Ok(out) => {
            result.metrics = Some(out.metrics);
            result.transcript = out.transcript;
        }
        Err(EpisodeError::Reasoner { partial, source, .. }) => {
            result.error = Some(source.to_string());
            result.transcript = *partial;
        }
        Err(e) => result.error = Some(e.to_string()),
    }
    result
}

/// Runs every variant on every task and seed.
pub fn run_matrix(cfg: &RunConfig) -> Result<MatrixRun, ConfigError> {
    cfg.validate()?;
    let variants = cfg.matrix_variants();
    if variants.is_empty() {
        return Err(ConfigError::Invalid("matrix has no variants".into()));
    }
    let cells: Vec<(&Variant, &String, u64)> = variants
        .iter()
        .flat_map(|v| cfg.tasks.iter().flat_map(move |t| cfg.seeds.iter().map(move |&s| (v, t, s))))
        .collect();
    // A recording sink is one append-only file; keep its lines whole and ordered.
    let sequential = matches!(cfg.backend, BackendConfig::Remote { record: Some(_), .. });
    let episodes: Vec<EpisodeResult> = if sequential || cfg.workers == 1 {
        cells.iter().map(|(v, t, s)| run_cell(cfg, v, t, *s)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| ConfigError::Invalid(format!("thread pool: {e}")))?;
        pool.install(|| cells.par_iter().map(|(v, t, s)| run_cell(cfg, v, t, *s)).collect())
    };
    let rows = variants
        .iter()
        .map(|v| {
            let mine: Vec<&EpisodeResult> = episodes.iter().filter(|e| e.label == v.label).collect();
            summarize(&v.label, &mine)
        })
        .collect();
    let report = MatrixReport {
        backend: cfg.backend.label().to_string(),
        tasks: cfg.tasks.clone(),
        seeds: cfg.seeds.clone(),
        dummy_count: cfg.dummy_count,
        td_note: TD_NOTE.into(),
        rows,
    };
    Ok(MatrixRun { report, episodes })
}

impl MatrixReport {
    /// Fixed-width text table, one line per row.
    pub fn to_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max("variant".len());
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:>8}  {:>8}  {:>9}  {:>9}  {:>6}", "variant", "episodes", "success", "mean_SS", "mean_TD", "errors");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<width$}  {:>8}  {:>7.1}%  {:>9.2}  {:>9.2}  {:>6}",
                r.label,
                r.episodes,
                r.success_rate * 100.0,
                r.mean_ss,
                r.mean_td,
                r.errors
            );
        }
        let _ = writeln!(out, "TD: {}", self.td_note);
        out
    }

    pub fn row(&self, label: &str) -> Option<&MatrixRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(label: &str, ss: Option<u32>, success: bool) -> EpisodeResult {
        EpisodeResult {
            label: label.into(),
            task: "t".into(),
            seed: 0,
            metrics: ss.map(|s| EpisodeMetrics { simulation_steps: s, travel_distance: s as f64 / 2.0, success, messages_sent: 0 }),
            error: ss.is_none().then(|| "boom".into()),
            transcript: Transcript::default(),
        }
    }

    #[test]
    fn summary_ignores_errors_in_means() {
        let rs = [result("a", Some(10), true), result("a", Some(20), false), result("a", None, false)];
        let refs: Vec<_> = rs.iter().collect();
        let row = summarize("a", &refs);
        assert_eq!((row.episodes, row.successes, row.errors), (3, 1, 1));
        assert!((row.mean_ss - 15.0).abs() < 1e-12);
        assert!((row.mean_td - 7.5).abs() < 1e-12);
        assert!((row.success_rate - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn table_has_one_line_per_row() {
        let report = MatrixReport {
            backend: "oracle".into(),
            tasks: vec![],
            seeds: vec![],
            dummy_count: 0,
            td_note: TD_NOTE.into(),
            rows: vec![summarize("default", &[]), summarize("no_proximity", &[])],
        };
        let table = report.to_table();
        assert_eq!(table.lines().count(), 4);
        assert!(table.lines().nth(2).unwrap().starts_with("no_proximity"));
    }
}
