//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Run with `cargo test -p nts-lab --test acceptance`.

use nts_core::codebook::type_law;
use nts_core::nts::{run_session, Decoder, Encoder, ModelSpec, NtsConfig, UpdatePolicy};
use nts_core::prob::{empirical_type, entropy, kl_divergence, make_distribution, Distribution};
use nts_core::rd::{d_max, mismatched_rate, solve_at_distortion, DistortionMeasure, SolverOptions};
use nts_core::rng::{Stream, StreamKey};
use nts_core::{AnnealSchedule, CodebookModel};
use nts_lab::config::parse_config;
use nts_lab::explore::COMPARE_HEADER;
use nts_lab::stats::median;
use nts_lab::sweep::simulate_sweep;
use nts_lab::run_experiment;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::fs;
use std::time::{Duration, Instant};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn h(p: f64) -> f64 {
    entropy(&make_distribution(&[p, 1.0 - p]).unwrap())
}

fn binary(p0: f64) -> Distribution {
    make_distribution(&[p0, 1.0 - p0]).unwrap()
}

fn random_instance(s: &mut Stream, k: usize) -> (Distribution, DistortionMeasure) {
    let weights: Vec<f64> = (0..k).map(|_| 0.05 + s.next_f64()).collect();
    let rows: Vec<Vec<f64>> = (0..k).map(|_| (0..k).map(|_| s.next_f64()).collect()).collect();
    (Distribution::from_weights(&weights).unwrap(), DistortionMeasure::new(&rows).unwrap())
}

fn secs(d: Duration) -> String {
    format!("{:.1} s", d.as_secs_f64())
}

/// Binary Hamming: R(D) = h(p) - h(D) and Q*(minority) = (p - D)/(1 - 2D).
fn closed_form_rdf() -> Outcome {
    let start = Instant::now();
    let ham = DistortionMeasure::hamming(2);
    let (mut worst_rate, mut worst_q) = (0.0f64, 0.0f64);
    for p in [0.1, 0.2, 0.3, 0.4, 0.5] {
        for frac in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let d = p * frac;
            let (point, _) = solve_at_distortion(&binary(p), &ham, d, &SolverOptions::default()).unwrap();
            worst_rate = worst_rate.max((point.rate - (h(p) - h(d))).abs());
            worst_q = worst_q.max((point.output_dist.probs()[0] - (p - d) / (1.0 - 2.0 * d)).abs());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst_rate < 1e-6 && worst_q < 1e-6 && elapsed < Duration::from_secs(5),
        format!("max |R - (h(p) - h(D))| = {worst_rate:.2e}, max |Q* - (p-D)/(1-2D)| = {worst_q:.2e}, {}", secs(elapsed)),
    )
}

fn telescoping_bound() -> Outcome {
    let start = Instant::now();
    let mut s = StreamKey::from_seed(2).stream();
    let mut violations = Vec::new();
    let mut instances = 0;
    for k in [3, 4] {
        for i in 0..100 {
            let (p, d) = random_instance(&mut s, k);
            let (dmax, _) = d_max(&p, &d).unwrap();
            let dmin = d.min_achievable(&p);
            let target = dmin + (0.1 + 0.8 * s.next_f64()) * (dmax - dmin);
            let (_, trace) = solve_at_distortion(&p, &d, target, &SolverOptions::default()).unwrap();
            let kl0 = trace.initial_divergence;
            let mut sum = 0.0;
            for (n, &g) in trace.gaps.iter().enumerate() {
                sum += g;
                let rising = n > 0 && g > trace.gaps[n - 1];
                if sum > kl0 + 1e-6 || g > kl0 / (n + 1) as f64 + 1e-6 || rising {
                    violations.push(format!("{k}x{k} #{i} at N={}", n + 1));
                    break;
                }
            }
            instances += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        violations.is_empty() && elapsed < Duration::from_secs(30),
        format!("{instances} instances, {} violations {:?}, {}", violations.len(), violations.iter().take(3).collect::<Vec<_>>(), secs(elapsed)),
    )
}

fn dmax_collapse() -> Outcome {
    let mut s = StreamKey::from_seed(3).stream();
    let (mut worst_rate, mut worst_mass) = (0.0f64, 1.0f64);
    for i in 0..50 {
        let (p, d) = random_instance(&mut s, 3 + i % 3);
        let (dmax, centroid) = d_max(&p, &d).unwrap();
        let (point, _) = solve_at_distortion(&p, &d, dmax, &SolverOptions::default()).unwrap();
        worst_rate = worst_rate.max(point.rate.abs());
        worst_mass = worst_mass.min(point.output_dist.probs()[centroid]);
    }
    outcome(
        worst_rate <= 1e-9 && worst_mass >= 1.0 - 1e-9,
        format!("50 instances: max rate {worst_rate:.1e}, min centroid mass {worst_mass}"),
    )
}

fn synchronization() -> Outcome {
    let ham = DistortionMeasure::hamming(2);
    let ternary = DistortionMeasure::new(&[vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]]).unwrap();
    let mut configs = Vec::new();
    let mut c = NtsConfig::new(ham.clone(), 8, 0.25);
    c.max_search_index = 1 << 12;
    configs.push((binary(0.4), c));
    let mut c = NtsConfig::new(ham.clone(), 16, 0.3);
    c.update_policy = UpdatePolicy::Hard;
    c.max_search_index = 1 << 12;
    configs.push((binary(0.3), c));
    let mut c = NtsConfig::new(ham.clone(), 12, 0.3);
    c.model = ModelSpec::TypeMixture { schedule: AnnealSchedule::Geometric { kappa0: 1.0, ratio: 1.01 } };
    c.update_policy = UpdatePolicy::BlockAverage { block: 4 };
    c.max_search_index = 1 << 12;
    configs.push((binary(0.2), c));
    let mut c = NtsConfig::new(ternary, 10, 0.35);
    c.model = ModelSpec::UniformTypeClasses;
    c.update_policy = UpdatePolicy::Smoothed { gamma: 0.3 };
    c.max_search_index = 1 << 12;
    configs.push((make_distribution(&[0.2, 0.3, 0.5]).unwrap(), c));
    let mut c = NtsConfig::new(ham, 24, 0.2);
    c.update_policy = UpdatePolicy::Hard;
    c.max_search_index = 1 << 10;
    configs.push((binary(0.45), c));

    let mut mismatches = 0;
    let mut fallbacks = 0;
    for (i, (p, mut c)) in configs.into_iter().enumerate() {
        c.session_seed = 100 + i as u64;
        c.generations = 1000;
        let source = CodebookModel::iid(p.clone(), c.word_length).unwrap().sampler().unwrap();
        let key = StreamKey::from_seed(c.session_seed).derive(0xACCE);
        let mut enc = Encoder::new(c.clone()).unwrap();
        let mut dec = Decoder::new(c.clone()).unwrap();
        let (mut enc_trace, mut dec_trace) = (Vec::new(), Vec::new());
        for g in 0..1000 {
            let word = source.sample(&mut key.derive(g).stream());
            let e = enc.encode(&word).unwrap();
            fallbacks += usize::from(!e.result.matched);
            let r = dec.decode(e.result.index).unwrap();
            let bits = |q: &Distribution| q.probs().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            enc_trace.push((bits(&enc.state().q), e.result.codeword));
            dec_trace.push((bits(&dec.state().q), r));
        }
        mismatches += enc_trace.iter().zip(&dec_trace).filter(|(a, b)| a != b).count();
        if run_session(&p, &c, None).is_err() {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("5 configs x 1000 generations, {mismatches} differing generations, {fallbacks} fallbacks"))
}

/// Shared by criteria 5 and 6.
fn reference_config(seed: u64) -> NtsConfig {
    let mut c = NtsConfig::new(DistortionMeasure::hamming(2), 256, 0.25);
    c.session_seed = seed;
    c
}

const MATCHED_TYPE_SEARCH: u64 = 1 << 12;
const CONVERGENCE_SEARCH: u64 = 1 << 18;

fn matched_type_improvement() -> Outcome {
    let start = Instant::now();
    let p = binary(0.4);
    let d = DistortionMeasure::hamming(2);
    let mut c = reference_config(5);
    c.adapt = false;
    c.max_search_index = MATCHED_TYPE_SEARCH;
    c.generations = 1000;
    let t = run_session(&p, &c, None).unwrap();
    let mean0 = t.records.iter().map(|r| r.codeword_type.as_distribution().probs()[0]).sum::<f64>() / t.records.len() as f64;
    let r_mean = mismatched_rate(&p, &binary(mean0), &d, 0.25).unwrap();
    let r_q0 = mismatched_rate(&p, &c.initial, &d, 0.25).unwrap();
    outcome(
        r_mean <= r_q0 + 0.02,
        format!(
            "{} searches (M = 2^12, {} fell back): mean type [{mean0:.4}, {:.4}], R(P, mean, D) = {r_mean:.4} vs R(P, Q0, D) + 0.02 = {:.4}, {}",
            t.records.len(),
            t.fallback_count(),
            1.0 - mean0,
            r_q0 + 0.02,
            secs(start.elapsed())
        ),
    )
}

fn convergence_trend() -> Outcome {
    let start = Instant::now();
    let p = binary(0.4);
    let qstar = binary(0.3);
    let kl0 = kl_divergence(&qstar, &Distribution::uniform(2)).unwrap();
    let finals: Vec<f64> = (1..=20)
        .map(|seed| {
            let mut c = reference_config(seed);
            c.update_policy = UpdatePolicy::Hard;
            c.max_search_index = CONVERGENCE_SEARCH;
            c.generations = 50;
            let t = run_session(&p, &c, Some(&qstar)).unwrap();
            t.records.last().unwrap().kl_to_target.unwrap()
        })
        .collect();
    let med = median(&finals);
    let elapsed = start.elapsed();
    outcome(
        med < kl0 / 2.0 && elapsed < Duration::from_secs(120),
        format!("median KL(Q*||Q_50) = {med:.4} vs KL(Q*||Q0)/2 = {:.4} (M = 2^18, seeds 1..20), {}", kl0 / 2.0, secs(elapsed)),
    )
}

fn redundancy_decreases() -> Outcome {
    let start = Instant::now();
    let doc = "schema_version = 1\nkind = \"redundancy_sweep\"\n[source]\nprobs = [0.4, 0.6]\n[distortion]\ntype = \"hamming\"\n\
               [sweep]\nword_lengths = [16, 32, 64, 128]\ntarget_distortion = 0.25\nwords = 1000\nseeds = [1]\n";
    let run = simulate_sweep(&parse_config(doc).unwrap()).unwrap();
    let gaps: Vec<f64> = run.rows.iter().map(|r| r.median_rate_gap).collect();
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    let halved = gaps[3] <= gaps[0] / 2.0;
    let fallbacks: Vec<String> = run.rows.iter().map(|r| format!("{:.3}", r.fallback_fraction)).collect();
    outcome(
        decreasing && halved,
        format!(
            "gaps {:?} at L = 16..128, gap(128) <= gap(16)/2: {halved}, fallback fractions {fallbacks:?}, {}",
            gaps.iter().map(|g| format!("{g:.4}")).collect::<Vec<_>>(),
            secs(start.elapsed())
        ),
    )
}

fn chi_square(expected_probs: &[f64], observed: &[u64], n: u64) -> (f64, usize) {
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (&p, &o) in expected_probs.iter().zip(observed) {
        acc.0 += p * n as f64;
        acc.1 += o as f64;
        if acc.0 >= 5.0 {
            bins.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if let Some(last) = bins.last_mut() {
        last.0 += acc.0;
        last.1 += acc.1;
    }
    let stat = bins.iter().map(|(e, o)| (o - e) * (o - e) / e).sum();
    (stat, bins.len().saturating_sub(1))
}

fn type_law_exactness() -> Outcome {
    let center = binary(0.3);
    let n = 100_000u64;
    let mut failures = Vec::new();
    let mut tests = 0;
    for l in [4, 8, 12] {
        let models = [
            ("iid", CodebookModel::iid(center.clone(), l).unwrap()),
            ("uniform_types", CodebookModel::uniform_types(2, l).unwrap()),
            ("mixture", CodebookModel::type_mixture(center.clone(), 4.0, l).unwrap()),
        ];
        for (name, model) in &models {
            let law = type_law(model).unwrap();
            let sampler = model.sampler().unwrap();
            let key = StreamKey::from_seed(8).derive(l as u64).derive(tests);
            let mut observed = vec![0u64; law.types.len()];
            for i in 0..n {
                let t = empirical_type(&sampler.sample(&mut key.derive(i).stream()), 2).unwrap();
                observed[law.types.iter().position(|c| c.as_slice() == t.counts()).unwrap()] += 1;
            }
            let (stat, df) = chi_square(&law.probs, &observed, n);
            let critical = ChiSquared::new(df as f64).unwrap().inverse_cdf(0.99);
            if stat >= critical {
                failures.push(format!("{name} L={l}: {stat:.1} >= {critical:.1}"));
            }
            tests += 1;
        }
    }
    outcome(failures.is_empty(), format!("{tests} chi-square tests at 0.01, 10^5 draws each, failures {failures:?}"))
}

const DOCS: [&str; 5] = [
    "kind = \"rdf_point\"\n[rdf]\ntarget_distortion = 0.25\n",
    "kind = \"rdf_curve\"\n[rdf]\nn_points = 7\n",
    "kind = \"nts_run\"\n[nts]\nword_length = 24\ntarget_distortion = 0.3\ngenerations = 20\nseeds = [1, 2, 3, 4]\nmax_search_index = 4096\n",
    "kind = \"redundancy_sweep\"\n[sweep]\nword_lengths = [8, 16]\ntarget_distortion = 0.3\nwords = 100\nseeds = [1, 2]\n",
    "kind = \"explore_compare\"\n[nts]\nword_length = 16\ntarget_distortion = 0.3\ngenerations = 10\nseeds = [1, 2]\nmax_search_index = 4096\n\
     [explore]\nkl_threshold = 0.01\nmodels = [{ label = \"iid\", type = \"iid\" }, { label = \"types\", type = \"uniform_type_classes\" }]\n",
];

fn with_source(doc: &str) -> String {
    let (kind, body) = doc.split_once('\n').unwrap();
    format!("schema_version = 1\n{kind}\n[source]\nprobs = [0.4, 0.6]\n[distortion]\ntype = \"hamming\"\n{body}")
}

/// Runs a document twice into fresh directories; returns differing files.
fn rerun_differences(doc: &str) -> (usize, Vec<String>) {
    let config = parse_config(doc).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ma, _) = run_experiment(&config, a.path(), true).unwrap();
    let (mb, _) = run_experiment(&config, b.path(), true).unwrap();
    let mut differ = Vec::new();
    if ma.outputs != mb.outputs {
        differ.push("file list".to_string());
    }
    for name in &ma.outputs {
        let fa = fs::read(a.path().join(&config.output).join(name)).unwrap();
        let fb = fs::read(b.path().join(&config.output).join(name)).unwrap_or_default();
        if fa != fb {
            differ.push(format!("{}/{name}", config.output));
        }
    }
    (ma.outputs.len(), differ)
}

fn determinism() -> Outcome {
    let mut files = 0;
    let mut differ = Vec::new();
    for doc in DOCS {
        let (n, d) = rerun_differences(&with_source(doc));
        files += n;
        differ.extend(d);
    }
    outcome(differ.is_empty(), format!("{} kinds, {files} files compared, differing {differ:?}", DOCS.len()))
}

fn exploration_comparison() -> Outcome {
    // P = [0.2, 0.8]: D_max = 0.2, compared at 0.9 D_max
    let doc = "schema_version = 1\nkind = \"explore_compare\"\n[source]\nprobs = [0.2, 0.8]\n[distortion]\ntype = \"hamming\"\n\
               [nts]\nword_length = 64\ntarget_distortion = 0.18\ngenerations = 30\n\
               seeds = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20]\nmax_search_index = 4096\n\
               [explore]\nkl_threshold = 0.05\n\
               models = [{ label = \"iid_uniform\", type = \"iid\" }, { label = \"uniform_types\", type = \"uniform_type_classes\" }]\n";
    let config = parse_config(doc).unwrap();
    let (_, differ) = rerun_differences(doc);
    let dir = tempfile::tempdir().unwrap();
    let (_, summary) = run_experiment(&config, dir.path(), false).unwrap();
    let csv = fs::read_to_string(dir.path().join("explore_compare/explore.csv")).unwrap();
    let mut lines = csv.lines();
    let header_ok = lines.next() == Some(COMPARE_HEADER.join(",").as_str());
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let well_formed = rows.len() == 40
        && rows.iter().all(|r| {
            r.len() == 5
                && ["iid_uniform", "uniform_types"].contains(&r[0])
                && r[1].parse::<u64>().is_ok_and(|s| (1..=20).contains(&s))
                && r[2].parse::<i64>().is_ok_and(|g| g == -1 || (1..=30).contains(&g))
                && r[3].parse::<f64>().is_ok_and(|kl| kl.is_finite() && kl >= 0.0)
                && r[4].parse::<u64>().is_ok_and(|b| b >= 30)
        });
    outcome(
        header_ok && well_formed && differ.is_empty() && !csv.contains('\r'),
        format!("40 rows well-formed: {well_formed}, rerun identical: {}; {}", differ.is_empty(), summary.join("; ")),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "closed-form binary RDF", closed_form_rdf),
        (2, "telescoping bound", telescoping_bound),
        (3, "D_max collapse", dmax_collapse),
        (4, "encoder/decoder synchronization", synchronization),
        (5, "matched-type improvement", matched_type_improvement),
        (6, "NTS convergence trend", convergence_trend),
        (7, "redundancy decreases with L", redundancy_decreases),
        (8, "type-law exactness", type_law_exactness),
        (9, "end-to-end determinism", determinism),
        (10, "exploration comparison", exploration_comparison),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        let o = check();
        println!("criterion {n:>2} {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
