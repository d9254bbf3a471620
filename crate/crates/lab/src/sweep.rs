use crate::config::{ExperimentConfig, KindParams, SessionParams};
use crate::error::LabError;
use crate::nts_run::reference;
use crate::output::{csv_bytes, json_bytes, Artifacts};
use crate::stats::{median, quantile};
use nts_core::nts::{format_float, run_session, ModelSpec, UpdatePolicy};
use rayon::prelude::*;
use serde::Serialize;

pub const REDUNDANCY_FILE: &str = "redundancy.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const REDUNDANCY_HEADER: [&str; 3] = ["L", "median_rate_gap", "iqr"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RedundancyRow {
    pub word_length: usize,
    /// Median empirical rate minus `R(P, D)`.
    pub median_rate_gap: f64,
    pub iqr: f64,
    pub median_distortion: f64,
    pub fallback_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub rate_distortion: f64,
    pub qstar: Vec<f64>,
    pub rows: Vec<RedundancyRow>,
}

/// Exploitation-only sessions with the codebook frozen at `Q*`, one cell per
/// (length, seed); rates pooled over seeds at each length.
pub fn simulate_sweep(config: &ExperimentConfig) -> Result<SweepRun, LabError> {
    let KindParams::Sweep(params) = &config.params else {
        return Err(LabError::invalid("kind", "expected redundancy_sweep"));
    };
    let reference = reference(config, params.reference_qstar.as_ref(), params.target_distortion)?;
    let rate_distortion = reference.rate.expect("reference solves R(P, D)");
    let cells: Vec<(usize, u64)> = params
        .word_lengths
        .iter()
        .flat_map(|&l| params.seeds.iter().map(move |&s| (l, s)))
        .collect();
    let traces = cells
        .par_iter()
        .map(|&(word_length, seed)| {
            let session = SessionParams {
                word_length,
                target_distortion: params.target_distortion,
                generations: params.words,
                seeds: vec![seed],
                max_search_index: params.max_search_index,
                initial: reference.qstar.clone(),
                update_policy: UpdatePolicy::Hard,
                model: ModelSpec::Iid,
                adapt: false,
                reference_qstar: None,
            };
            run_session(&config.source, &session.session_config(&config.distortion, seed), None)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let rows = params
        .word_lengths
        .iter()
        .map(|&l| {
            let records: Vec<_> = cells
                .iter()
                .zip(&traces)
                .filter(|((cl, _), _)| *cl == l)
                .flat_map(|(_, t)| t.records.iter())
                .collect();
            let gaps: Vec<f64> = records.iter().map(|r| r.rate - rate_distortion).collect();
            let distortions: Vec<f64> = records.iter().map(|r| r.distortion).collect();
            RedundancyRow {
                word_length: l,
                median_rate_gap: median(&gaps),
                iqr: quantile(&gaps, 0.75) - quantile(&gaps, 0.25),
                median_distortion: median(&distortions),
                fallback_fraction: records.iter().filter(|r| !r.matched).count() as f64 / records.len() as f64,
            }
        })
        .collect();
    Ok(SweepRun { rate_distortion, qstar: reference.qstar.probs().to_vec(), rows })
}

#[derive(Serialize)]
struct Summary<'a> {
    kind: &'a str,
    source: &'a [f64],
    target_distortion: f64,
    rate_distortion: f64,
    reference_qstar: &'a [f64],
    words_per_seed: u64,
    seeds: &'a [u64],
    rows: &'a [RedundancyRow],
}

pub fn run_redundancy_sweep(config: &ExperimentConfig) -> Result<Artifacts, LabError> {
    let KindParams::Sweep(params) = &config.params else {
        return Err(LabError::invalid("kind", "expected redundancy_sweep"));
    };
    let run = simulate_sweep(config)?;
    let mut out = Artifacts::default();
    let rows: Vec<Vec<String>> = run
        .rows
        .iter()
        .map(|r| vec![r.word_length.to_string(), format_float(r.median_rate_gap), format_float(r.iqr)])
        .collect();
    out.push(REDUNDANCY_FILE, csv_bytes(&REDUNDANCY_HEADER, &rows));
    let summary = Summary {
        kind: config.kind.name(),
        source: config.source.probs(),
        target_distortion: params.target_distortion,
        rate_distortion: run.rate_distortion,
        reference_qstar: &run.qstar,
        words_per_seed: params.words,
        seeds: &params.seeds,
        rows: &run.rows,
    };
    out.push(SUMMARY_FILE, json_bytes(&summary));
    for r in &run.rows {
        out.summary.push(format!(
            "L = {}: median rate gap {:.4} bits/symbol (iqr {:.4}), fallback fraction {:.3}",
            r.word_length, r.median_rate_gap, r.iqr, r.fallback_fraction
        ));
    }
    Ok(out)
}
