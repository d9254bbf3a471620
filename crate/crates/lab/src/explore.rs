use crate::config::{ExperimentConfig, ExploreParams, KindParams, SessionParams};
use crate::error::LabError;
use crate::nts_run::{final_kl, reference, run_sessions};
use crate::output::{csv_bytes, json_bytes, Artifacts};
use crate::stats::median;
use nts_core::nts::{format_float, SessionTrace};
use nts_core::prob::kl_divergence;
use serde::Serialize;

pub const COMPARE_FILE: &str = "explore.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const COMPARE_HEADER: [&str; 5] = ["model_label", "seed", "generations_to_threshold", "final_kl", "total_bits"];

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub label: String,
    pub seed: u64,
    /// First 1-based generation with `KL(Q* || Q_n)` below the threshold;
    /// -1 if never.
    pub generations_to_threshold: i64,
    pub final_kl: f64,
    pub total_bits: u64,
}

pub fn generations_to_threshold(trace: &SessionTrace, threshold: f64) -> i64 {
    trace
        .records
        .iter()
        .find(|r| r.kl_to_target.is_some_and(|kl| kl < threshold))
        .map_or(-1, |r| r.generation as i64)
}

/// Every model over every seed. Sessions with the same seed see the same
/// source words whatever the model.
pub fn simulate_explore(config: &ExperimentConfig) -> Result<Vec<CompareRow>, LabError> {
    let KindParams::Explore(params) = &config.params else {
        return Err(LabError::invalid("kind", "expected explore_compare"));
    };
    let ExploreParams { session, models, kl_threshold } = params;
    let reference = reference(config, session.reference_qstar.as_ref(), session.target_distortion)?;
    let initial_kl = kl_divergence(&reference.qstar, &session.initial)
        .map_err(|e| LabError::invalid("nts.initial", e.to_string()))?;
    let mut rows = Vec::new();
    for (label, model) in models {
        let params = SessionParams { model: model.clone(), ..session.clone() };
        for (seed, trace) in run_sessions(&config.source, &config.distortion, &params, &reference.qstar)? {
            rows.push(CompareRow {
                label: label.clone(),
                seed,
                generations_to_threshold: generations_to_threshold(&trace, *kl_threshold),
                final_kl: final_kl(&trace, initial_kl),
                total_bits: trace.total_bits(),
            });
        }
    }
    Ok(rows)
}

#[derive(Serialize)]
struct ModelSummary<'a> {
    label: &'a str,
    reached: usize,
    median_generations_to_threshold: Option<f64>,
    median_final_kl: f64,
    median_total_bits: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    kind: &'a str,
    kl_threshold: f64,
    models: Vec<ModelSummary<'a>>,
}

pub fn run_explore_compare(config: &ExperimentConfig) -> Result<Artifacts, LabError> {
    let KindParams::Explore(params) = &config.params else {
        return Err(LabError::invalid("kind", "expected explore_compare"));
    };
    let rows = simulate_explore(config)?;
    let mut out = Artifacts::default();
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.label.clone(),
                r.seed.to_string(),
                r.generations_to_threshold.to_string(),
                format_float(r.final_kl),
                r.total_bits.to_string(),
            ]
        })
        .collect();
    out.push(COMPARE_FILE, csv_bytes(&COMPARE_HEADER, &csv_rows));

    let models: Vec<ModelSummary> = params
        .models
        .iter()
        .map(|(label, _)| {
            let mine: Vec<&CompareRow> = rows.iter().filter(|r| &r.label == label).collect();
            let reached: Vec<f64> = mine
                .iter()
                .filter(|r| r.generations_to_threshold > 0)
                .map(|r| r.generations_to_threshold as f64)
                .collect();
            ModelSummary {
                label,
                reached: reached.len(),
                median_generations_to_threshold: (!reached.is_empty()).then(|| median(&reached)),
                median_final_kl: median(&mine.iter().map(|r| r.final_kl).collect::<Vec<_>>()),
                median_total_bits: median(&mine.iter().map(|r| r.total_bits as f64).collect::<Vec<_>>()),
            }
        })
        .collect();
    for m in &models {
        out.summary.push(format!(
            "{}: reached threshold in {}/{} seeds, median final KL {:.6}, median bits {}",
            m.label,
            m.reached,
            params.session.seeds.len(),
            m.median_final_kl,
            m.median_total_bits
        ));
    }
    let summary = Summary { kind: config.kind.name(), kl_threshold: params.kl_threshold, models };
    out.push(SUMMARY_FILE, json_bytes(&summary));
    Ok(out)
}
