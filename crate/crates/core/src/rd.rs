//! Rate-distortion computation by alternating minimization.
//!
//! Two forms are provided. The fixed-slope form minimizes `R + s D` for a
//! given slope `s` by the classical Blahut iteration
//!
//! ```text
//! W(y|x) = Q(y) 2^{-s d(x,y)} / Z_x,    Q'(y) = sum_x P(x) W(y|x)
//! ```
//!
//! and stops on Blahut's certified lower/upper bound gap. The fixed-distortion
//! form bisects the slope to hit a target distortion. Its convergence trace is
//! produced by the fixed-distortion iteration, where each step re-solves the
//! slope so that the channel built from `Q_n` has distortion exactly `D`; the
//! rates `R(P, Q_n, D)` of that iteration telescope against `KL(Q* || Q_0)`.

use crate::prob::{kl_bits, Distribution};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RdError {
    #[error("distortion matrix is empty")]
    EmptyMeasure,
    #[error("distortion matrix row {row} has {len} entries, expected {expected}")]
    RaggedMeasure { row: usize, len: usize, expected: usize },
    #[error("distortion d({x},{y}) = {value} must be finite and nonnegative")]
    BadDistortion { x: usize, y: usize, value: f64 },
    #[error("dimension mismatch: {what} has {got} letters, expected {expected}")]
    Dimension { what: &'static str, got: usize, expected: usize },
    #[error("slope must be finite and nonnegative, got {0}")]
    BadSlope(f64),
    #[error("target distortion must be finite and nonnegative, got {0}")]
    BadTarget(f64),
    #[error("tolerance must be positive and max_iter at least 1")]
    BadOptions,
    #[error("row {0} normalizer vanished: output distribution has no usable letter")]
    ZeroNormalizer(usize),
    #[error("target distortion {target} is below the minimum {achievable} achievable on the support")]
    BelowAchievable { target: f64, achievable: f64 },
    #[error("need at least 2 curve points, got {0}")]
    TooFewPoints(usize),
}

/// Nonnegative per-letter distortion `d(x, y)`, row-major over source letters.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionMeasure {
    matrix: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl DistortionMeasure {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self, RdError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map(Vec::len).unwrap_or(0);
        if n_rows == 0 || n_cols == 0 {
            return Err(RdError::EmptyMeasure);
        }
        let mut matrix = Vec::with_capacity(n_rows * n_cols);
        for (x, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(RdError::RaggedMeasure { row: x, len: row.len(), expected: n_cols });
            }
            for (y, &value) in row.iter().enumerate() {
                if !value.is_finite() || value < 0.0 {
                    return Err(RdError::BadDistortion { x, y, value });
                }
                matrix.push(value);
            }
        }
        Ok(DistortionMeasure { matrix, rows: n_rows, cols: n_cols })
    }

    /// `d(x, y) = [x != y]` on an `n`-letter alphabet.
    pub fn hamming(n: usize) -> Self {
        assert!(n > 0);
        let matrix = (0..n * n).map(|i| if i / n == i % n { 0.0 } else { 1.0 }).collect();
        DistortionMeasure { matrix, rows: n, cols: n }
    }

    #[inline(always)]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.matrix[x * self.cols + y]
    }

    #[inline(always)]
    pub fn row(&self, x: usize) -> &[f64] {
        &self.matrix[x * self.cols..(x + 1) * self.cols]
    }

    pub fn source_alphabet(&self) -> usize {
        self.rows
    }

    pub fn recon_alphabet(&self) -> usize {
        self.cols
    }

    pub fn max_entry(&self) -> f64 {
        self.matrix.iter().copied().fold(0.0, f64::max)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.matrix.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    /// `sum_x P(x) min_y d(x, y)`, the smallest distortion any channel attains.
    pub fn min_achievable(&self, p: &Distribution) -> f64 {
        (0..self.rows)
            .map(|x| p.probs()[x] * self.row(x).iter().copied().fold(f64::INFINITY, f64::min))
            .sum()
    }

    fn check_source(&self, p: &Distribution) -> Result<(), RdError> {
        if p.alphabet_size() != self.rows {
            return Err(RdError::Dimension {
                what: "source distribution",
                got: p.alphabet_size(),
                expected: self.rows,
            });
        }
        Ok(())
    }

    fn check_output(&self, q: &Distribution) -> Result<(), RdError> {
        if q.alphabet_size() != self.cols {
            return Err(RdError::Dimension {
                what: "output distribution",
                got: q.alphabet_size(),
                expected: self.cols,
            });
        }
        Ok(())
    }
}

/// Conditional `W(y | x)`, one row per source letter.
#[derive(Debug, Clone, PartialEq)]
pub struct TestChannel {
    rows: Vec<Distribution>,
}

impl TestChannel {
    pub fn rows(&self) -> &[Distribution] {
        &self.rows
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.rows[x].probs()[y]
    }

    /// Output marginal `sum_x P(x) W(.|x)`.
    pub fn marginal(&self, p: &Distribution) -> Distribution {
        let cols = self.rows[0].alphabet_size();
        let mut out = vec![0.0; cols];
        for (px, row) in p.probs().iter().zip(&self.rows) {
            for (o, w) in out.iter_mut().zip(row.probs()) {
                *o += px * w;
            }
        }
        Distribution::renormalized(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    /// `max_iter` reached before the bound gap closed.
    IterationLimit,
    /// The slope bracket could not resolve the target distortion within `tol`.
    ToleranceUnresolved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdPoint {
    pub slope: f64,
    pub rate: f64,
    pub distortion: f64,
    pub output_dist: Distribution,
    pub iterations: usize,
    pub status: SolveStatus,
}

impl RdPoint {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// Per-iteration excess over the optimum plus `KL(Q* || Q_0)`.
///
/// For fixed-distortion solves `gaps[n] = R(P, Q_n, D) - R(P, D)`; for
/// fixed-slope solves it is the excess of the Lagrangian `R + sD`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    pub gaps: Vec<f64>,
    pub initial_divergence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Starting output distribution; uniform when `None`.
    pub initial: Option<Distribution>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-9, max_iter: 100_000, initial: None }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<(), RdError> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(RdError::BadOptions);
        }
        Ok(())
    }

    fn initial_for(&self, d: &DistortionMeasure) -> Result<Distribution, RdError> {
        match &self.initial {
            Some(q) => {
                d.check_output(q)?;
                Ok(q.clone())
            }
            None => Ok(Distribution::uniform(d.recon_alphabet())),
        }
    }
}

/// Initial slope bracket and its expansion ceiling.
pub const SLOPE_BRACKET: f64 = 50.0;
pub const SLOPE_CEILING: f64 = 65_536.0;

/// Letters below this probability count as inactive.
pub const SUPPORT_THRESHOLD: f64 = 1e-6;

/// `D_max = min_y sum_x P(x) d(x, y)` and its lowest-index minimizer.
pub fn d_max(p: &Distribution, d: &DistortionMeasure) -> Result<(f64, usize), RdError> {
    d.check_source(p)?;
    let mut best = (f64::INFINITY, 0);
    for y in 0..d.recon_alphabet() {
        let v: f64 = p.probs().iter().enumerate().map(|(x, px)| px * d.get(x, y)).sum();
        if v < best.0 {
            best = (v, y);
        }
    }
    Ok(best)
}

/// Per-row log-space evaluation of `Q(y) 2^{-s d(x,y)}`.
struct RowKernel<'a> {
    log_q: Vec<f64>,
    d: &'a DistortionMeasure,
    s: f64,
}

impl<'a> RowKernel<'a> {
    fn new(q: &Distribution, d: &'a DistortionMeasure, s: f64) -> Self {
        let log_q = q.probs().iter().map(|&v| if v > 0.0 { v.log2() } else { f64::NEG_INFINITY }).collect();
        RowKernel { log_q, d, s }
    }

    /// Fills `w` with the channel row for `x` and returns `log2 Z_x`.
    fn row(&self, x: usize, w: &mut [f64]) -> Result<f64, RdError> {
        let drow = self.d.row(x);
        let mut m = f64::NEG_INFINITY;
        for ((wy, &lq), &dxy) in w.iter_mut().zip(&self.log_q).zip(drow) {
            *wy = if lq == f64::NEG_INFINITY { f64::NEG_INFINITY } else { lq - self.s * dxy };
            m = m.max(*wy);
        }
        if m == f64::NEG_INFINITY {
            return Err(RdError::ZeroNormalizer(x));
        }
        let mut z = 0.0;
        for wy in w.iter_mut() {
            *wy = (*wy - m).exp2();
            z += *wy;
        }
        for wy in w.iter_mut() {
            *wy /= z;
        }
        Ok(m + z.log2())
    }
}

/// One fixed-slope Blahut update.
pub fn ba_fixed_slope_step(
    p: &Distribution,
    q: &Distribution,
    d: &DistortionMeasure,
    s: f64,
) -> Result<(Distribution, TestChannel), RdError> {
    d.check_source(p)?;
    d.check_output(q)?;
    check_slope(s)?;
    let kernel = RowKernel::new(q, d, s);
    let mut rows = Vec::with_capacity(d.source_alphabet());
    let mut w = vec![0.0; d.recon_alphabet()];
    for x in 0..d.source_alphabet() {
        kernel.row(x, &mut w)?;
        rows.push(Distribution::renormalized(w.clone()));
    }
    let channel = TestChannel { rows };
    Ok((channel.marginal(p), channel))
}

/// `min_W [ sum P W log(W/Q) + s E d ] = -sum_x P(x) log2 Z_x(Q, s)`.
pub fn lagrangian(p: &Distribution, q: &Distribution, d: &DistortionMeasure, s: f64) -> Result<f64, RdError> {
    d.check_source(p)?;
    d.check_output(q)?;
    check_slope(s)?;
    let kernel = RowKernel::new(q, d, s);
    let mut w = vec![0.0; d.recon_alphabet()];
    let mut f = 0.0;
    for (x, &px) in p.probs().iter().enumerate() {
        let log_z = kernel.row(x, &mut w)?;
        f -= px * log_z;
    }
    Ok(f)
}

fn check_slope(s: f64) -> Result<(), RdError> {
    if !s.is_finite() || s < 0.0 {
        return Err(RdError::BadSlope(s));
    }
    Ok(())
}

/// Rate `sum P W log(W/Q)` and distortion of channel `w` with reference `q`.
fn rate_and_distortion(p: &Distribution, q: &Distribution, w: &TestChannel, d: &DistortionMeasure) -> (f64, f64) {
    let mut rate = 0.0;
    let mut dist = 0.0;
    for (x, &px) in p.probs().iter().enumerate() {
        if px == 0.0 {
            continue;
        }
        for (y, &wxy) in w.rows[x].probs().iter().enumerate() {
            if wxy > 0.0 {
                rate += px * wxy * (wxy / q.probs()[y]).log2();
                dist += px * wxy * d.get(x, y);
            }
        }
    }
    (rate.max(0.0), dist)
}

fn centroid_point(p: &Distribution, d: &DistortionMeasure) -> Result<RdPoint, RdError> {
    let (value, centroid) = d_max(p, d)?;
    Ok(RdPoint {
        slope: 0.0,
        rate: 0.0,
        distortion: value,
        output_dist: Distribution::point_mass(d.recon_alphabet(), centroid),
        iterations: 0,
        status: SolveStatus::Converged,
    })
}

/// Minimizes `R + s D` from the configured starting distribution.
///
/// Stops when Blahut's upper bound `F - sum Q' log c` and lower bound
/// `F - max_y log c(y)` on the optimal Lagrangian are within `tol`, where
/// `c(y) = Q'(y) / Q(y)`. At `s = 0` the limiting centroid solution
/// `(D_max, 0)` is returned.
pub fn solve_fixed_slope(
    p: &Distribution,
    d: &DistortionMeasure,
    s: f64,
    opts: &SolverOptions,
) -> Result<(RdPoint, ConvergenceTrace), RdError> {
    d.check_source(p)?;
    check_slope(s)?;
    opts.validate()?;
    let q0 = opts.initial_for(d)?;
    if s == 0.0 {
        let point = centroid_point(p, d)?;
        let initial_divergence = kl_bits(point.output_dist.probs(), q0.probs());
        return Ok((point, ConvergenceTrace { gaps: vec![0.0], initial_divergence }));
    }

    let nx = d.source_alphabet();
    let ny = d.recon_alphabet();
    let mut q = q0.clone();
    let mut objectives = Vec::new();
    let mut w = vec![0.0; ny];
    let mut log_z = vec![0.0; nx];
    let mut status = SolveStatus::IterationLimit;
    let mut iterations = 0;
    loop {
        let kernel = RowKernel::new(&q, d, s);
        let mut next = vec![0.0; ny];
        let mut f = 0.0;
        for x in 0..nx {
            log_z[x] = kernel.row(x, &mut w)?;
            let px = p.probs()[x];
            f -= px * log_z[x];
            for (n, wy) in next.iter_mut().zip(&w) {
                *n += px * wy;
            }
        }
        objectives.push(f);

        // log2 c(y) = log2 sum_x P(x) 2^{-s d(x,y) - log2 Z_x}, in log space so
        // letters with Q(y) = 0 still contribute to the lower bound.
        let mut max_log_c = f64::NEG_INFINITY;
        let mut expected_log_c = 0.0;
        for y in 0..ny {
            let mut m = f64::NEG_INFINITY;
            for x in 0..nx {
                let px = p.probs()[x];
                if px > 0.0 {
                    m = m.max(px.log2() - s * d.get(x, y) - log_z[x]);
                }
            }
            let mut acc = 0.0;
            for x in 0..nx {
                let px = p.probs()[x];
                if px > 0.0 {
                    acc += (px.log2() - s * d.get(x, y) - log_z[x] - m).exp2();
                }
            }
            let log_c = m + acc.log2();
            max_log_c = max_log_c.max(log_c);
            if next[y] > 0.0 {
                expected_log_c += next[y] * log_c;
            }
        }
        let bound_gap = max_log_c - expected_log_c;
        if bound_gap < opts.tol {
            status = SolveStatus::Converged;
            break;
        }
        if iterations == opts.max_iter {
            break;
        }
        q = Distribution::renormalized(next);
        iterations += 1;
    }

    let (_, channel) = ba_fixed_slope_step(p, &q, d, s)?;
    let (rate, distortion) = rate_and_distortion(p, &q, &channel, d);
    let last = *objectives.last().expect("at least one objective");
    let gaps = objectives.iter().map(|f| (f - last).max(0.0)).collect();
    let initial_divergence = kl_bits(q.probs(), q0.probs());
    let point = RdPoint { slope: s, rate, distortion, output_dist: q, iterations, status };
    Ok((point, ConvergenceTrace { gaps, initial_divergence }))
}

/// Solution of the inner problem at fixed `Q` and target distortion.
#[derive(Debug, Clone, PartialEq)]
pub struct MismatchedSolution {
    pub rate: f64,
    pub slope: f64,
    /// Output marginal of the optimal channel; the next iterate of the
    /// fixed-distortion Blahut iteration.
    pub next: Distribution,
}

/// Stable evaluation of the dual `g(s) = -sum P log2 Z_x - s D` and of the
/// distortion of the induced channel.
struct Dual<'a> {
    p: &'a Distribution,
    d: &'a DistortionMeasure,
    log_q: Vec<f64>,
    /// Per-row minimum distortion over the support of Q.
    dmin_row: Vec<f64>,
    dmin: f64,
}

struct DualEval {
    g_plus_sd: f64,
    distortion: f64,
}

impl<'a> Dual<'a> {
    fn new(p: &'a Distribution, q: &Distribution, d: &'a DistortionMeasure) -> Self {
        let log_q: Vec<f64> =
            q.probs().iter().map(|&v| if v > 0.0 { v.log2() } else { f64::NEG_INFINITY }).collect();
        let dmin_row: Vec<f64> = (0..d.source_alphabet())
            .map(|x| {
                d.row(x)
                    .iter()
                    .zip(&log_q)
                    .filter(|(_, &lq)| lq > f64::NEG_INFINITY)
                    .map(|(&v, _)| v)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let dmin = p.probs().iter().zip(&dmin_row).map(|(px, m)| px * m).sum();
        Dual { p, d, log_q, dmin_row, dmin }
    }

    /// Returns `-sum P log2 Z_x` (i.e. `g(s) + sD`) and `D_Q(s)`; when `next`
    /// is given it receives the output marginal.
    fn eval(&self, s: f64, mut next: Option<&mut [f64]>) -> DualEval {
        let ny = self.d.recon_alphabet();
        let mut w = vec![0.0; ny];
        let mut neg_log_z = 0.0;
        let mut distortion = 0.0;
        if let Some(n) = next.as_deref_mut() {
            n.fill(0.0);
        }
        for (x, &px) in self.p.probs().iter().enumerate() {
            if px == 0.0 {
                continue;
            }
            let drow = self.d.row(x);
            let base = self.dmin_row[x];
            let mut z = 0.0;
            for y in 0..ny {
                let lq = self.log_q[y];
                w[y] = if lq == f64::NEG_INFINITY { 0.0 } else { (lq - s * (drow[y] - base)).exp2() };
                z += w[y];
            }
            // log2 Z_x = -s * base + log2 z
            neg_log_z += px * (s * base - z.log2());
            let mut dx = 0.0;
            for y in 0..ny {
                w[y] /= z;
                dx += w[y] * drow[y];
            }
            distortion += px * dx;
            if let Some(n) = next.as_deref_mut() {
                for (ny_, wy) in n.iter_mut().zip(&w) {
                    *ny_ += px * wy;
                }
            }
        }
        DualEval { g_plus_sd: neg_log_z, distortion }
    }
}

fn mismatched_solution(
    p: &Distribution,
    q: &Distribution,
    d: &DistortionMeasure,
    target: f64,
) -> Result<MismatchedSolution, RdError> {
    d.check_source(p)?;
    d.check_output(q)?;
    if !target.is_finite() || target < 0.0 {
        return Err(RdError::BadTarget(target));
    }
    let dual = Dual::new(p, q, d);
    let scale = d.max_entry().max(1.0);
    if target < dual.dmin - 1e-12 * scale {
        return Err(RdError::BelowAchievable { target, achievable: dual.dmin });
    }
    let ny = d.recon_alphabet();
    let mut next = vec![0.0; ny];

    let at_zero = dual.eval(0.0, None);
    if target >= at_zero.distortion {
        return Ok(MismatchedSolution { rate: 0.0, slope: 0.0, next: q.clone() });
    }

    let g = |e: &DualEval, s: f64| e.g_plus_sd - s * target;
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut best = (g(&at_zero, 0.0), 0.0);
    loop {
        let e = dual.eval(hi, None);
        let v = g(&e, hi);
        if v > best.0 {
            best = (v, hi);
        }
        if e.distortion <= target || hi >= 1e12 {
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    // g is concave with g'(s) = D_Q(s) - target; bisect on the sign.
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let e = dual.eval(mid, None);
        let v = g(&e, mid);
        if v > best.0 {
            best = (v, mid);
        }
        if e.distortion > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (rate, slope) = best;
    dual.eval(slope, Some(&mut next));
    Ok(MismatchedSolution { rate: rate.max(0.0), slope, next: Distribution::renormalized(next) })
}

/// `R(P, Q, D)`: the least `sum P W log(W/Q)` over channels supported on
/// `support(Q)` with `E d <= D`.
pub fn mismatched_rate(
    p: &Distribution,
    q: &Distribution,
    d: &DistortionMeasure,
    target: f64,
) -> Result<f64, RdError> {
    mismatched_solution(p, q, d, target).map(|m| m.rate)
}

/// Rate, optimal slope and next iterate for the fixed-distortion iteration.
pub fn fixed_distortion_step(
    p: &Distribution,
    q: &Distribution,
    d: &DistortionMeasure,
    target: f64,
) -> Result<MismatchedSolution, RdError> {
    mismatched_solution(p, q, d, target)
}

/// Solves `R(P, D)` at a target distortion by slope bisection over
/// [`solve_fixed_slope`], then traces the fixed-distortion iteration from
/// the initial distribution.
pub fn solve_at_distortion(
    p: &Distribution,
    d: &DistortionMeasure,
    target: f64,
    opts: &SolverOptions,
) -> Result<(RdPoint, ConvergenceTrace), RdError> {
    d.check_source(p)?;
    opts.validate()?;
    if !target.is_finite() || target < 0.0 {
        return Err(RdError::BadTarget(target));
    }
    let (dmax, _) = d_max(p, d)?;
    let point = if target >= dmax {
        centroid_point(p, d)?
    } else {
        bisect_slope(p, d, target, opts)?
    };
    let trace = fixed_distortion_trace(p, d, target, &point, opts)?;
    Ok((point, trace))
}

fn bisect_slope(
    p: &Distribution,
    d: &DistortionMeasure,
    target: f64,
    opts: &SolverOptions,
) -> Result<RdPoint, RdError> {
    let achievable = d.min_achievable(p);
    if target < achievable - 1e-12 * d.max_entry().max(1.0) {
        return Err(RdError::BelowAchievable { target, achievable });
    }
    let solve = |s: f64| solve_fixed_slope(p, d, s, opts).map(|(pt, _)| pt);
    let mut lo = 0.0;
    let mut hi = SLOPE_BRACKET;
    let mut hi_point = solve(hi)?;
    while hi_point.distortion > target + opts.tol && hi < SLOPE_CEILING {
        lo = hi;
        hi *= 2.0;
        hi_point = solve(hi)?;
    }
    if (hi_point.distortion - target).abs() < opts.tol {
        return Ok(hi_point);
    }
    if hi_point.distortion > target {
        hi_point.status = SolveStatus::ToleranceUnresolved;
        return Ok(hi_point);
    }
    let mut best = hi_point;
    let mut lo_point: Option<RdPoint> = None;
    loop {
        let mid = 0.5 * (lo + hi);
        let pt = solve(mid)?;
        if (pt.distortion - target).abs() < opts.tol {
            return Ok(pt);
        }
        if pt.distortion > target {
            lo = mid;
            lo_point = Some(pt);
        } else {
            hi = mid;
            best = pt;
        }
        if hi - lo <= 1e-13 * hi {
            // D(s) jumps over the target at this resolution.
            let mut closest = match lo_point {
                Some(l) if (l.distortion - target).abs() < (best.distortion - target).abs() => l,
                _ => best,
            };
            closest.status = SolveStatus::ToleranceUnresolved;
            return Ok(closest);
        }
    }
}

fn fixed_distortion_trace(
    p: &Distribution,
    d: &DistortionMeasure,
    target: f64,
    point: &RdPoint,
    opts: &SolverOptions,
) -> Result<ConvergenceTrace, RdError> {
    let q0 = opts.initial_for(d)?;
    let initial_divergence = kl_bits(point.output_dist.probs(), q0.probs());
    // Best available upper bound on R(P, D) exactly at the target.
    let reference = match mismatched_rate(p, &point.output_dist, d, target) {
        Ok(r) => r,
        Err(RdError::BelowAchievable { .. }) => point.rate,
        Err(e) => return Err(e),
    };
    let mut rates: Vec<f64> = Vec::new();
    let mut q = q0;
    for _ in 0..opts.max_iter {
        let step = match fixed_distortion_step(p, &q, d, target) {
            Ok(step) => step,
            Err(RdError::BelowAchievable { .. }) => break,
            Err(e) => return Err(e),
        };
        let stalled = rates.last().is_some_and(|&prev| prev - step.rate <= 1e-15);
        rates.push(step.rate);
        if step.rate - reference <= opts.tol || stalled {
            break;
        }
        q = step.next;
    }
    let floor = rates.iter().copied().fold(reference, f64::min);
    let gaps = rates.iter().map(|r| r - floor).collect();
    Ok(ConvergenceTrace { gaps, initial_divergence })
}

/// `n_points` solutions at distortions evenly spaced on
/// `[min achievable distortion, D_max]`, in grid order.
pub fn rdf_curve(
    p: &Distribution,
    d: &DistortionMeasure,
    n_points: usize,
    opts: &SolverOptions,
) -> Result<Vec<(RdPoint, ConvergenceTrace)>, RdError> {
    if n_points < 2 {
        return Err(RdError::TooFewPoints(n_points));
    }
    let (dmax, _) = d_max(p, d)?;
    let dmin = d.min_achievable(p);
    (0..n_points)
        .into_par_iter()
        .map(|i| {
            let target = if i + 1 == n_points {
                dmax
            } else {
                dmin + (dmax - dmin) * i as f64 / (n_points - 1) as f64
            };
            solve_at_distortion(p, d, target, opts)
        })
        .collect()
}
