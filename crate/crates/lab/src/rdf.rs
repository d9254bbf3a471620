use crate::config::{ExperimentConfig, KindParams, RdfTarget};
use crate::error::LabError;
use crate::output::{csv_bytes, json_bytes, Artifacts};
use nts_core::nts::{format_float, format_sig};
use nts_core::rd::{rdf_curve, solve_at_distortion, solve_fixed_slope, ConvergenceTrace};
use nts_core::{Distribution, RdPoint, SolveStatus};
use serde::Serialize;

pub const POINTS_FILE: &str = "points.csv";
pub const TRACE_FILE: &str = "convergence.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const POINTS_HEADER: [&str; 8] =
    ["target_distortion", "slope", "rate", "distortion", "iterations", "status", "q_star", "kl_qstar_q0"];

#[derive(Debug, Clone, PartialEq)]
pub struct RdfRow {
    /// `None` for fixed-slope points.
    pub target: Option<f64>,
    pub point: RdPoint,
    pub trace: ConvergenceTrace,
}

pub fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Converged => "converged",
        SolveStatus::IterationLimit => "iteration_limit",
        SolveStatus::ToleranceUnresolved => "tolerance_unresolved",
    }
}

pub fn join_dist(q: &Distribution) -> String {
    q.probs().iter().map(|&p| format_sig(p, 12)).collect::<Vec<_>>().join(";")
}

/// Solves the configured point or curve.
pub fn solve_rdf(config: &ExperimentConfig) -> Result<Vec<RdfRow>, LabError> {
    let (p, d, opts) = (&config.source, &config.distortion, &config.solver);
    match config.params {
        KindParams::RdfPoint(RdfTarget::Distortion(target)) => {
            let (point, trace) = solve_at_distortion(p, d, target, opts)?;
            Ok(vec![RdfRow { target: Some(target), point, trace }])
        }
        KindParams::RdfPoint(RdfTarget::Slope(s)) => {
            let (point, trace) = solve_fixed_slope(p, d, s, opts)?;
            Ok(vec![RdfRow { target: None, point, trace }])
        }
        KindParams::RdfCurve { n_points } => {
            let (dmax, _) = nts_core::rd::d_max(p, d)?;
            let dmin = d.min_achievable(p);
            let rows = rdf_curve(p, d, n_points, opts)?;
            Ok(rows
                .into_iter()
                .enumerate()
                .map(|(i, (point, trace))| {
                    let target = if i + 1 == n_points {
                        dmax
                    } else {
                        dmin + (dmax - dmin) * i as f64 / (n_points - 1) as f64
                    };
                    RdfRow { target: Some(target), point, trace }
                })
                .collect())
        }
        _ => Err(LabError::invalid("kind", "expected rdf_point or rdf_curve")),
    }
}

#[derive(Serialize)]
struct PointSummary<'a> {
    target_distortion: Option<f64>,
    slope: f64,
    rate: f64,
    distortion: f64,
    iterations: usize,
    status: &'a str,
    q_star: &'a [f64],
    kl_qstar_q0: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    kind: &'a str,
    source: &'a [f64],
    points: Vec<PointSummary<'a>>,
}

/// Points CSV, per-iteration gap CSV and a JSON summary. Any unconverged
/// point is reported as a deferred solver error.
pub fn run_rdf(config: &ExperimentConfig) -> Result<Artifacts, LabError> {
    let rows = solve_rdf(config)?;
    let mut out = Artifacts::default();

    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.target.map(format_float).unwrap_or_default(),
                format_float(r.point.slope),
                format_float(r.point.rate),
                format_float(r.point.distortion),
                r.point.iterations.to_string(),
                status_name(r.point.status).to_string(),
                join_dist(&r.point.output_dist),
                format_float(r.trace.initial_divergence),
            ]
        })
        .collect();
    out.push(POINTS_FILE, csv_bytes(&POINTS_HEADER, &csv_rows));

    let trace_rows: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .flat_map(|(i, r)| {
            r.trace.gaps.iter().enumerate().map(move |(n, g)| vec![i.to_string(), n.to_string(), format_float(*g)])
        })
        .collect();
    out.push(TRACE_FILE, csv_bytes(&["point", "iteration", "gap"], &trace_rows));

    let summary = Summary {
        kind: config.kind.name(),
        source: config.source.probs(),
        points: rows
            .iter()
            .map(|r| PointSummary {
                target_distortion: r.target,
                slope: r.point.slope,
                rate: r.point.rate,
                distortion: r.point.distortion,
                iterations: r.point.iterations,
                status: status_name(r.point.status),
                q_star: r.point.output_dist.probs(),
                kl_qstar_q0: r.trace.initial_divergence,
            })
            .collect(),
    };
    out.push(SUMMARY_FILE, json_bytes(&summary));

    for r in &rows {
        out.summary.push(format!(
            "R = {:.9} bits, D = {:.9}, iterations = {}, KL(Q*||Q0) = {:.9}, {}",
            r.point.rate,
            r.point.distortion,
            r.point.iterations,
            r.trace.initial_divergence,
            status_name(r.point.status)
        ));
    }
    let unconverged: Vec<String> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.point.converged())
        .map(|(i, r)| format!("point {i}: {}", status_name(r.point.status)))
        .collect();
    if !unconverged.is_empty() {
        out.deferred = Some(LabError::NonConvergence(unconverged.join(", ")));
    }
    Ok(out)
}
