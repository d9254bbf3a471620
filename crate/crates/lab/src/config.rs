//! Experiment documents (TOML, `schema_version = 1`).
//!
//! ```toml
//! schema_version = 1
//! kind = "nts_run"          # rdf_point | rdf_curve | nts_run | redundancy_sweep | explore_compare
//! output = "baseline"       # run directory under the output root; defaults to the kind
//!
//! [source]
//! probs = [0.4, 0.6]
//!
//! [distortion]
//! type = "hamming"          # or "matrix" with rows = [[0, 1], [1, 0]]
//!
//! [nts]
//! word_length = 256
//! target_distortion = 0.25
//! generations = 50
//! seeds = [1, 2, 3]
//! update = { policy = "hard" }
//! ```

use crate::error::LabError;
use nts_core::nts::{ModelSpec, NtsConfig, UpdatePolicy};
use nts_core::rd::SolverOptions;
use nts_core::{AnnealSchedule, DistortionMeasure, Distribution};
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::collections::HashSet;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_CURVE_POINTS: usize = 11;
pub const DEFAULT_SWEEP_WORDS: u64 = 1000;

/// Defaults applied by [`parse_config`], shown by `--help`.
pub const DEFAULTS_HELP: &str = "\
Config defaults:
  output                   the experiment kind
  solver.tol               1e-9
  solver.max_iter          100000
  rdf.n_points             11 (rdf_curve)
  nts.max_search_index     1048576
  nts.initial              uniform over the reconstruction alphabet
  nts.update               { policy = \"smoothed\", gamma = 0.1 }
  nts.model                { type = \"iid\" }
  nts.adapt                true
  nts.reference_qstar      solved from source, distortion and target_distortion
  sweep.words              1000
  sweep.max_search_index   1048576
  sweep.reference_qstar    solved from source, distortion and target_distortion";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RdfPoint,
    RdfCurve,
    NtsRun,
    RedundancySweep,
    ExploreCompare,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::RdfPoint => "rdf_point",
            ExperimentKind::RdfCurve => "rdf_curve",
            ExperimentKind::NtsRun => "nts_run",
            ExperimentKind::RedundancySweep => "redundancy_sweep",
            ExperimentKind::ExploreCompare => "explore_compare",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Run directory name, relative to the output root.
    pub output: String,
    pub source: Distribution,
    pub distortion: DistortionMeasure,
    pub solver: SolverOptions,
    pub params: KindParams,
    /// SHA-256 of the document bytes, lowercase hex.
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KindParams {
    RdfPoint(RdfTarget),
    RdfCurve { n_points: usize },
    Nts(SessionParams),
    Sweep(SweepParams),
    Explore(ExploreParams),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RdfTarget {
    Distortion(f64),
    Slope(f64),
}

/// Everything an NTS session needs except the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionParams {
    pub word_length: usize,
    pub target_distortion: f64,
    pub generations: u64,
    pub seeds: Vec<u64>,
    pub max_search_index: u64,
    pub initial: Distribution,
    pub update_policy: UpdatePolicy,
    pub model: ModelSpec,
    pub adapt: bool,
    pub reference_qstar: Option<Distribution>,
}

impl SessionParams {
    pub fn session_config(&self, distortion: &DistortionMeasure, seed: u64) -> NtsConfig {
        NtsConfig {
            word_length: self.word_length,
            target_distortion: self.target_distortion,
            distortion: distortion.clone(),
            model: self.model.clone(),
            initial: self.initial.clone(),
            update_policy: self.update_policy.clone(),
            adapt: self.adapt,
            max_search_index: self.max_search_index,
            session_seed: seed,
            generations: self.generations,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepParams {
    pub word_lengths: Vec<usize>,
    pub target_distortion: f64,
    /// Source words coded per seed at each length.
    pub words: u64,
    pub seeds: Vec<u64>,
    pub max_search_index: u64,
    pub reference_qstar: Option<Distribution>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExploreParams {
    /// Session template; its `model` is replaced by each entry of `models`.
    pub session: SessionParams,
    pub models: Vec<(String, ModelSpec)>,
    pub kl_threshold: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: u32,
    kind: ExperimentKind,
    output: Option<String>,
    source: RawSource,
    distortion: RawDistortion,
    solver: Option<RawSolver>,
    rdf: Option<RawRdf>,
    nts: Option<RawSession>,
    sweep: Option<RawSweep>,
    explore: Option<RawExplore>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    alphabet_size: Option<usize>,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDistortion {
    #[serde(rename = "type")]
    kind: String,
    rows: Option<Vec<Vec<f64>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    tol: Option<f64>,
    max_iter: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRdf {
    target_distortion: Option<f64>,
    slope: Option<f64>,
    n_points: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSession {
    word_length: usize,
    target_distortion: f64,
    generations: u64,
    seeds: Vec<u64>,
    max_search_index: Option<u64>,
    initial: Option<Vec<f64>>,
    update: Option<RawUpdate>,
    model: Option<RawModel>,
    adapt: Option<bool>,
    reference_qstar: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUpdate {
    policy: String,
    gamma: Option<f64>,
    block: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    label: Option<String>,
    #[serde(rename = "type")]
    kind: String,
    schedule: Option<RawSchedule>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    #[serde(rename = "type")]
    kind: String,
    kappa0: f64,
    rate: Option<f64>,
    ratio: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    word_lengths: Vec<usize>,
    target_distortion: f64,
    words: Option<u64>,
    seeds: Vec<u64>,
    max_search_index: Option<u64>,
    reference_qstar: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExplore {
    kl_threshold: f64,
    models: Vec<RawModel>,
}

/// Parses and validates an experiment document, filling defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, LabError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| LabError::Parse(e.to_string()))?;
    if raw.schema_version != SCHEMA_VERSION {
        return Err(LabError::invalid(
            "schema_version",
            format!("unsupported version {}, expected {SCHEMA_VERSION}", raw.schema_version),
        ));
    }
    let kind = raw.kind;
    let output = raw.output.unwrap_or_else(|| kind.name().to_string());
    check_output_name(&output)?;
    let source = parse_source(&raw.source)?;
    let distortion = parse_distortion(&raw.distortion, source.alphabet_size())?;
    if distortion.source_alphabet() != source.alphabet_size() {
        return Err(LabError::invalid(
            "distortion",
            format!(
                "{} source rows, but the source has {} letters",
                distortion.source_alphabet(),
                source.alphabet_size()
            ),
        ));
    }
    let solver = parse_solver(raw.solver)?;

    let allowed: &[&str] = match kind {
        ExperimentKind::RdfPoint | ExperimentKind::RdfCurve => &["rdf"],
        ExperimentKind::NtsRun => &["nts"],
        ExperimentKind::RedundancySweep => &["sweep"],
        ExperimentKind::ExploreCompare => &["nts", "explore"],
    };
    let present = [
        ("rdf", raw.rdf.is_some()),
        ("nts", raw.nts.is_some()),
        ("sweep", raw.sweep.is_some()),
        ("explore", raw.explore.is_some()),
    ];
    for (name, is_present) in present {
        if is_present && !allowed.contains(&name) {
            return Err(LabError::invalid(name, format!("section not used by kind {}", kind.name())));
        }
    }
    let missing = |name: &str| LabError::invalid(name, format!("section required by kind {}", kind.name()));

    let params = match kind {
        ExperimentKind::RdfPoint => {
            let rdf = raw.rdf.ok_or_else(|| missing("rdf"))?;
            if rdf.n_points.is_some() {
                return Err(LabError::invalid("rdf.n_points", "only used by rdf_curve"));
            }
            let target = match (rdf.target_distortion, rdf.slope) {
                (Some(d), None) => {
                    check_nonnegative("rdf.target_distortion", d)?;
                    RdfTarget::Distortion(d)
                }
                (None, Some(s)) => {
                    check_nonnegative("rdf.slope", s)?;
                    RdfTarget::Slope(s)
                }
                _ => {
                    return Err(LabError::invalid(
                        "rdf.target_distortion",
                        "exactly one of target_distortion and slope is required",
                    ))
                }
            };
            KindParams::RdfPoint(target)
        }
        ExperimentKind::RdfCurve => {
            let rdf = raw.rdf.ok_or_else(|| missing("rdf"))?;
            if rdf.target_distortion.is_some() || rdf.slope.is_some() {
                return Err(LabError::invalid("rdf", "rdf_curve takes only n_points"));
            }
            let n_points = rdf.n_points.unwrap_or(DEFAULT_CURVE_POINTS);
            if n_points < 2 {
                return Err(LabError::invalid("rdf.n_points", "must be at least 2"));
            }
            KindParams::RdfCurve { n_points }
        }
        ExperimentKind::NtsRun => {
            let nts = raw.nts.ok_or_else(|| missing("nts"))?;
            KindParams::Nts(parse_session(nts, &distortion)?)
        }
        ExperimentKind::RedundancySweep => {
            let sweep = raw.sweep.ok_or_else(|| missing("sweep"))?;
            KindParams::Sweep(parse_sweep(sweep, &distortion)?)
        }
        ExperimentKind::ExploreCompare => {
            let nts = raw.nts.ok_or_else(|| missing("nts"))?;
            let explore = raw.explore.ok_or_else(|| missing("explore"))?;
            if nts.model.is_some() {
                return Err(LabError::invalid("nts.model", "explore_compare takes its models from explore.models"));
            }
            let session = parse_session(nts, &distortion)?;
            KindParams::Explore(parse_explore(explore, session)?)
        }
    };

    Ok(ExperimentConfig { kind, output, source, distortion, solver, params, digest: digest_hex(text.as_bytes()) })
}

/// Lowercase hex SHA-256.
pub fn digest_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn check_output_name(name: &str) -> Result<(), LabError> {
    let ok = !name.is_empty()
        && name != "."
        && name != ".."
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if ok {
        Ok(())
    } else {
        Err(LabError::invalid("output", "use a plain directory name of [A-Za-z0-9_.-]"))
    }
}

fn check_nonnegative(field: &str, x: f64) -> Result<(), LabError> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(LabError::invalid(field, format!("must be finite and nonnegative, got {x}")))
    }
}

fn check_positive(field: &str, x: f64) -> Result<(), LabError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(LabError::invalid(field, format!("must be finite and positive, got {x}")))
    }
}

fn distribution(field: &str, probs: &[f64]) -> Result<Distribution, LabError> {
    Distribution::from_probs(probs.to_vec()).map_err(|e| LabError::invalid(field, e.to_string()))
}

fn parse_source(raw: &RawSource) -> Result<Distribution, LabError> {
    if let Some(k) = raw.alphabet_size {
        if k != raw.probs.len() {
            return Err(LabError::invalid(
                "source.alphabet_size",
                format!("{k} letters declared, {} probabilities given", raw.probs.len()),
            ));
        }
    }
    distribution("source.probs", &raw.probs)
}

/// `hamming` is square over the source alphabet.
fn parse_distortion(raw: &RawDistortion, source_letters: usize) -> Result<DistortionMeasure, LabError> {
    match (raw.kind.as_str(), &raw.rows) {
        ("hamming", None) => Ok(DistortionMeasure::hamming(source_letters)),
        ("hamming", Some(_)) => Err(LabError::invalid("distortion.rows", "not used with type = \"hamming\"")),
        ("matrix", Some(rows)) => {
            DistortionMeasure::new(rows).map_err(|e| LabError::invalid("distortion.rows", e.to_string()))
        }
        ("matrix", None) => Err(LabError::invalid("distortion.rows", "required with type = \"matrix\"")),
        (other, _) => Err(LabError::invalid(
            "distortion.type",
            format!("unknown measure `{other}`, expected hamming or matrix"),
        )),
    }
}

fn parse_solver(raw: Option<RawSolver>) -> Result<SolverOptions, LabError> {
    let mut opts = SolverOptions::default();
    if let Some(raw) = raw {
        if let Some(tol) = raw.tol {
            check_positive("solver.tol", tol)?;
            opts.tol = tol;
        }
        if let Some(max_iter) = raw.max_iter {
            if max_iter == 0 {
                return Err(LabError::invalid("solver.max_iter", "must be at least 1"));
            }
            opts.max_iter = max_iter;
        }
    }
    Ok(opts)
}

fn check_seeds(field: &str, seeds: &[u64]) -> Result<(), LabError> {
    if seeds.is_empty() {
        return Err(LabError::invalid(field, "at least one seed is required"));
    }
    let mut seen = HashSet::new();
    for &s in seeds {
        if !seen.insert(s) {
            return Err(LabError::invalid(field, format!("duplicate seed {s}")));
        }
    }
    Ok(())
}

fn parse_update(raw: Option<RawUpdate>) -> Result<UpdatePolicy, LabError> {
    let Some(raw) = raw else {
        return Ok(UpdatePolicy::Smoothed { gamma: UpdatePolicy::DEFAULT_GAMMA });
    };
    let policy = match raw.policy.as_str() {
        "hard" => UpdatePolicy::Hard,
        "smoothed" => {
            let gamma = raw.gamma.unwrap_or(UpdatePolicy::DEFAULT_GAMMA);
            if !(gamma > 0.0 && gamma <= 1.0) {
                return Err(LabError::invalid("nts.update.gamma", "must lie in (0, 1]"));
            }
            UpdatePolicy::Smoothed { gamma }
        }
        "block_average" => {
            let block = raw.block.ok_or_else(|| LabError::invalid("nts.update.block", "required by block_average"))?;
            if block == 0 {
                return Err(LabError::invalid("nts.update.block", "must be at least 1"));
            }
            UpdatePolicy::BlockAverage { block }
        }
        other => {
            return Err(LabError::invalid(
                "nts.update.policy",
                format!("unknown policy `{other}`, expected hard, smoothed or block_average"),
            ))
        }
    };
    let stray = match policy {
        UpdatePolicy::Hard => raw.gamma.map(|_| "gamma").or(raw.block.map(|_| "block")),
        UpdatePolicy::Smoothed { .. } => raw.block.map(|_| "block"),
        UpdatePolicy::BlockAverage { .. } => raw.gamma.map(|_| "gamma"),
    };
    if let Some(key) = stray {
        return Err(LabError::invalid(format!("nts.update.{key}"), format!("not used by policy {}", raw.policy)));
    }
    Ok(policy)
}

fn parse_model(field: &str, raw: &RawModel) -> Result<ModelSpec, LabError> {
    let model = match raw.kind.as_str() {
        "iid" => ModelSpec::Iid,
        "uniform_type_classes" => ModelSpec::UniformTypeClasses,
        "type_mixture" => {
            let s = raw
                .schedule
                .as_ref()
                .ok_or_else(|| LabError::invalid(format!("{field}.schedule"), "required by type_mixture"))?;
            let schedule = match (s.kind.as_str(), s.rate, s.ratio) {
                ("constant", None, None) => AnnealSchedule::Constant { kappa0: s.kappa0 },
                ("linear", Some(rate), None) => AnnealSchedule::Linear { kappa0: s.kappa0, rate },
                ("geometric", None, Some(ratio)) => AnnealSchedule::Geometric { kappa0: s.kappa0, ratio },
                _ => {
                    return Err(LabError::invalid(
                        format!("{field}.schedule"),
                        "expected constant {kappa0}, linear {kappa0, rate} or geometric {kappa0, ratio}",
                    ))
                }
            };
            schedule.validate().map_err(|e| LabError::invalid(format!("{field}.schedule"), e.to_string()))?;
            ModelSpec::TypeMixture { schedule }
        }
        other => {
            return Err(LabError::invalid(
                format!("{field}.type"),
                format!("unknown model `{other}`, expected iid, uniform_type_classes or type_mixture"),
            ))
        }
    };
    if raw.schedule.is_some() && !matches!(model, ModelSpec::TypeMixture { .. }) {
        return Err(LabError::invalid(format!("{field}.schedule"), "only used by type_mixture"));
    }
    Ok(model)
}

fn parse_session(raw: RawSession, d: &DistortionMeasure) -> Result<SessionParams, LabError> {
    check_positive("nts.target_distortion", raw.target_distortion)?;
    if raw.word_length == 0 {
        return Err(LabError::invalid("nts.word_length", "must be at least 1"));
    }
    check_seeds("nts.seeds", &raw.seeds)?;
    let k = d.recon_alphabet();
    let initial = match &raw.initial {
        Some(p) => distribution("nts.initial", p)?,
        None => Distribution::uniform(k),
    };
    let reference_qstar = raw.reference_qstar.as_deref().map(|p| distribution("nts.reference_qstar", p)).transpose()?;
    let model = match &raw.model {
        Some(m) => {
            if m.label.is_some() {
                return Err(LabError::invalid("nts.model.label", "labels are only used in explore.models"));
            }
            parse_model("nts.model", m)?
        }
        None => ModelSpec::Iid,
    };
    let params = SessionParams {
        word_length: raw.word_length,
        target_distortion: raw.target_distortion,
        generations: raw.generations,
        seeds: raw.seeds,
        max_search_index: raw.max_search_index.unwrap_or(NtsConfig::DEFAULT_MAX_SEARCH_INDEX),
        initial,
        update_policy: parse_update(raw.update)?,
        model,
        adapt: raw.adapt.unwrap_or(true),
        reference_qstar,
    };
    check_alphabet("nts.initial", &params.initial, k)?;
    if let Some(q) = &params.reference_qstar {
        check_alphabet("nts.reference_qstar", q, k)?;
    }
    params
        .session_config(d, 0)
        .validate()
        .map_err(|e| match e {
            nts_core::nts::NtsError::Config { field, reason } => LabError::invalid(format!("nts.{field}"), reason),
            other => LabError::invalid("nts", other.to_string()),
        })?;
    Ok(params)
}

fn check_alphabet(field: &str, q: &Distribution, k: usize) -> Result<(), LabError> {
    if q.alphabet_size() == k {
        Ok(())
    } else {
        Err(LabError::invalid(
            field,
            format!("{} letters, the reconstruction alphabet has {k}", q.alphabet_size()),
        ))
    }
}

fn parse_sweep(raw: RawSweep, d: &DistortionMeasure) -> Result<SweepParams, LabError> {
    check_positive("sweep.target_distortion", raw.target_distortion)?;
    if raw.word_lengths.is_empty() {
        return Err(LabError::invalid("sweep.word_lengths", "at least one length is required"));
    }
    if raw.word_lengths[0] == 0 || raw.word_lengths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LabError::invalid("sweep.word_lengths", "lengths must be positive and strictly increasing"));
    }
    check_seeds("sweep.seeds", &raw.seeds)?;
    let words = raw.words.unwrap_or(DEFAULT_SWEEP_WORDS);
    if words == 0 {
        return Err(LabError::invalid("sweep.words", "must be at least 1"));
    }
    let max_search_index = raw.max_search_index.unwrap_or(NtsConfig::DEFAULT_MAX_SEARCH_INDEX);
    if max_search_index == 0 {
        return Err(LabError::invalid("sweep.max_search_index", "must be at least 1"));
    }
    let reference_qstar = raw.reference_qstar.as_deref().map(|p| distribution("sweep.reference_qstar", p)).transpose()?;
    if let Some(q) = &reference_qstar {
        check_alphabet("sweep.reference_qstar", q, d.recon_alphabet())?;
    }
    Ok(SweepParams {
        word_lengths: raw.word_lengths,
        target_distortion: raw.target_distortion,
        words,
        seeds: raw.seeds,
        max_search_index,
        reference_qstar,
    })
}

fn parse_explore(raw: RawExplore, session: SessionParams) -> Result<ExploreParams, LabError> {
    if raw.kl_threshold.is_nan() || raw.kl_threshold <= 0.0 {
        return Err(LabError::invalid("explore.kl_threshold", "must be positive"));
    }
    if raw.models.len() < 2 {
        return Err(LabError::invalid("explore.models", "at least two models are required"));
    }
    let mut models = Vec::with_capacity(raw.models.len());
    let mut labels = HashSet::new();
    for (i, m) in raw.models.iter().enumerate() {
        let field = format!("explore.models[{i}]");
        let label = m.label.clone().ok_or_else(|| LabError::invalid(format!("{field}.label"), "required"))?;
        if label.is_empty() || label.contains([',', '"', '\n', '\r']) {
            return Err(LabError::invalid(format!("{field}.label"), "must be nonempty without commas, quotes or newlines"));
        }
        if !labels.insert(label.clone()) {
            return Err(LabError::invalid(format!("{field}.label"), format!("duplicate label `{label}`")));
        }
        models.push((label, parse_model(&field, m)?));
    }
    Ok(ExploreParams { session, models, kl_threshold: raw.kl_threshold })
}
