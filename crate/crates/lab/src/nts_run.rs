use crate::config::{ExperimentConfig, KindParams, SessionParams};
use crate::error::LabError;
use crate::output::{csv_bytes, json_bytes, Artifacts};
use crate::rdf::status_name;
use crate::stats::median;
use nts_core::nts::{format_float, run_session, SessionTrace};
use nts_core::prob::kl_divergence;
use nts_core::rd::solve_at_distortion;
use nts_core::{DistortionMeasure, Distribution};
use rayon::prelude::*;
use serde::Serialize;

pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const AGGREGATE_HEADER: [&str; 5] =
    ["generation", "kl_median", "rate_median", "distortion_median", "fallback_fraction"];

pub fn trace_file(seed: u64) -> String {
    format!("trace_seed_{seed}.csv")
}

/// Target output distribution for the sessions and `R(P, D)` when it was
/// solved here.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub qstar: Distribution,
    pub rate: Option<f64>,
}

/// Uses the configured reference when present, otherwise solves `R(P, D)`.
/// An unconverged solve is a solver error.
pub fn reference(
    config: &ExperimentConfig,
    configured: Option<&Distribution>,
    target: f64,
) -> Result<Reference, LabError> {
    let (point, _) = solve_at_distortion(&config.source, &config.distortion, target, &config.solver)?;
    if !point.converged() {
        return Err(LabError::NonConvergence(format!(
            "reference R(P, {target}): {}",
            status_name(point.status)
        )));
    }
    match configured {
        Some(q) => Ok(Reference { qstar: q.clone(), rate: Some(point.rate) }),
        None => Ok(Reference { qstar: point.output_dist, rate: Some(point.rate) }),
    }
}

/// Runs one session per seed (concurrently), returned in seed-list order.
pub fn run_sessions(
    source: &Distribution,
    distortion: &DistortionMeasure,
    params: &SessionParams,
    qstar: &Distribution,
) -> Result<Vec<(u64, SessionTrace)>, LabError> {
    params
        .seeds
        .par_iter()
        .map(|&seed| {
            let trace = run_session(source, &params.session_config(distortion, seed), Some(qstar))?;
            Ok((seed, trace))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NtsRun {
    pub reference: Reference,
    pub initial_kl: f64,
    pub traces: Vec<(u64, SessionTrace)>,
}

pub fn simulate_nts(config: &ExperimentConfig) -> Result<NtsRun, LabError> {
    let KindParams::Nts(params) = &config.params else {
        return Err(LabError::invalid("kind", "expected nts_run"));
    };
    let reference = reference(config, params.reference_qstar.as_ref(), params.target_distortion)?;
    let initial_kl = kl_divergence(&reference.qstar, &params.initial).map_err(|e| LabError::invalid("nts.initial", e.to_string()))?;
    let traces = run_sessions(&config.source, &config.distortion, params, &reference.qstar)?;
    Ok(NtsRun { reference, initial_kl, traces })
}

/// Per-generation medians across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub generation: u64,
    pub kl_median: f64,
    pub rate_median: f64,
    pub distortion_median: f64,
    pub fallback_fraction: f64,
}

pub fn aggregate(traces: &[(u64, SessionTrace)]) -> Vec<AggregateRow> {
    let generations = traces.iter().map(|(_, t)| t.records.len()).max().unwrap_or(0);
    (0..generations)
        .map(|g| {
            let recs: Vec<_> = traces.iter().filter_map(|(_, t)| t.records.get(g)).collect();
            let col = |f: &dyn Fn(&nts_core::nts::GenerationRecord) -> f64| recs.iter().map(|r| f(r)).collect::<Vec<_>>();
            AggregateRow {
                generation: g as u64 + 1,
                kl_median: median(&col(&|r| r.kl_to_target.unwrap_or(f64::NAN))),
                rate_median: median(&col(&|r| r.rate)),
                distortion_median: median(&col(&|r| r.distortion)),
                fallback_fraction: recs.iter().filter(|r| !r.matched).count() as f64 / recs.len() as f64,
            }
        })
        .collect()
}

#[derive(Serialize)]
struct SeedSummary<'a> {
    seed: u64,
    final_q: &'a [f64],
    final_kl: f64,
    total_bits: u64,
    fallbacks: usize,
}

#[derive(Serialize)]
struct Summary<'a> {
    kind: &'a str,
    source: &'a [f64],
    target_distortion: f64,
    word_length: usize,
    generations: u64,
    reference_qstar: &'a [f64],
    rate_distortion: Option<f64>,
    initial_kl: f64,
    final_kl_median: f64,
    seeds: Vec<SeedSummary<'a>>,
}

pub fn final_kl(trace: &SessionTrace, initial_kl: f64) -> f64 {
    trace.records.last().and_then(|r| r.kl_to_target).unwrap_or(initial_kl)
}

/// One trace CSV per seed, the per-generation aggregate CSV and a JSON
/// summary.
pub fn run_nts(config: &ExperimentConfig) -> Result<Artifacts, LabError> {
    let KindParams::Nts(params) = &config.params else {
        return Err(LabError::invalid("kind", "expected nts_run"));
    };
    let run = simulate_nts(config)?;
    let mut out = Artifacts::default();
    for (seed, trace) in &run.traces {
        let mut bytes = Vec::new();
        trace.write_csv(&mut bytes).expect("in-memory write");
        out.push_seed(trace_file(*seed), bytes, *seed);
    }
    let rows: Vec<Vec<String>> = aggregate(&run.traces)
        .iter()
        .map(|a| {
            vec![
                a.generation.to_string(),
                format_float(a.kl_median),
                format_float(a.rate_median),
                format_float(a.distortion_median),
                format_float(a.fallback_fraction),
            ]
        })
        .collect();
    out.push(AGGREGATE_FILE, csv_bytes(&AGGREGATE_HEADER, &rows));

    let finals: Vec<f64> = run.traces.iter().map(|(_, t)| final_kl(t, run.initial_kl)).collect();
    let summary = Summary {
        kind: config.kind.name(),
        source: config.source.probs(),
        target_distortion: params.target_distortion,
        word_length: params.word_length,
        generations: params.generations,
        reference_qstar: run.reference.qstar.probs(),
        rate_distortion: run.reference.rate,
        initial_kl: run.initial_kl,
        final_kl_median: median(&finals),
        seeds: run
            .traces
            .iter()
            .zip(&finals)
            .map(|((seed, t), &kl)| SeedSummary {
                seed: *seed,
                final_q: t.final_q().probs(),
                final_kl: kl,
                total_bits: t.total_bits(),
                fallbacks: t.fallback_count(),
            })
            .collect(),
    };
    out.push(SUMMARY_FILE, json_bytes(&summary));
    out.summary.push(format!(
        "{} seeds x {} generations: median KL(Q*||Q_final) = {:.6} (KL(Q*||Q0) = {:.6})",
        run.traces.len(),
        params.generations,
        median(&finals),
        run.initial_kl
    ));
    Ok(out)
}
