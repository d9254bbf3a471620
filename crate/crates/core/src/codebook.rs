//! Sampling laws for random codewords.
//!
//! A codeword of length `L` is drawn either letter by letter from a base
//! distribution (`Iid`), or in two stages: first a type with denominator `L`,
//! then a uniformly random word of that type (Fisher-Yates over the multiset).
//! `UniformTypeClasses` gives every type the same weight; `TypeMixture`
//! weights type `t` by `2^{-kappa KL(t || center)}`, which interpolates between
//! the uniform law (`kappa -> 0`) and words typical for `center`
//! (`kappa -> inf`).

use crate::prob::{
    enumerate_types, kl_bits, log2_binomial, log_type_class_size, type_count, Distribution,
    TypeDistribution,
};
use crate::rng::{half_unit_f64, Stream};
use thiserror::Error;

/// Largest type space [`type_law`] and the mixture sampler will enumerate.
pub const MAX_ENUMERATED_TYPES: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodebookError {
    #[error("word length must be at least 1")]
    ZeroLength,
    #[error("alphabet size must be between 1 and 256, got {0}")]
    BadAlphabet(usize),
    #[error("concentration must be finite and positive, got {0}")]
    BadConcentration(f64),
    #[error("{types} types exceed the enumeration limit {limit}; use sampling estimates")]
    TooManyTypes { types: String, limit: u64 },
    #[error("word has length {got}, model expects {expected}")]
    WordLength { got: usize, expected: usize },
    #[error("word letter {0} is outside the alphabet")]
    LetterOutOfRange(usize),
    #[error("annealing applies to type-mixture models only")]
    NotAMixture,
    #[error("invalid schedule: {0}")]
    BadSchedule(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Iid(Distribution),
    UniformTypeClasses { alphabet: usize },
    TypeMixture { center: Distribution, concentration: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodebookModel {
    kind: ModelKind,
    word_length: usize,
}

impl CodebookModel {
    pub fn new(kind: ModelKind, word_length: usize) -> Result<Self, CodebookError> {
        if word_length == 0 {
            return Err(CodebookError::ZeroLength);
        }
        let alphabet = match &kind {
            ModelKind::Iid(base) => base.alphabet_size(),
            ModelKind::UniformTypeClasses { alphabet } => *alphabet,
            ModelKind::TypeMixture { center, concentration } => {
                if !concentration.is_finite() || *concentration <= 0.0 {
                    return Err(CodebookError::BadConcentration(*concentration));
                }
                center.alphabet_size()
            }
        };
        if alphabet == 0 || alphabet > 256 {
            return Err(CodebookError::BadAlphabet(alphabet));
        }
        Ok(CodebookModel { kind, word_length })
    }

    pub fn iid(base: Distribution, word_length: usize) -> Result<Self, CodebookError> {
        Self::new(ModelKind::Iid(base), word_length)
    }

    pub fn uniform_types(alphabet: usize, word_length: usize) -> Result<Self, CodebookError> {
        Self::new(ModelKind::UniformTypeClasses { alphabet }, word_length)
    }

    pub fn type_mixture(center: Distribution, concentration: f64, word_length: usize) -> Result<Self, CodebookError> {
        Self::new(ModelKind::TypeMixture { center, concentration }, word_length)
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn word_length(&self) -> usize {
        self.word_length
    }

    pub fn alphabet_size(&self) -> usize {
        match &self.kind {
            ModelKind::Iid(base) => base.alphabet_size(),
            ModelKind::UniformTypeClasses { alphabet } => *alphabet,
            ModelKind::TypeMixture { center, .. } => center.alphabet_size(),
        }
    }

    /// Precomputes whatever the model needs to draw codewords quickly.
    pub fn sampler(&self) -> Result<CodewordSampler, CodebookError> {
        let l = self.word_length;
        let inner = match &self.kind {
            ModelKind::Iid(base) => SamplerKind::Iid { cdf: cumulative(base.probs()) },
            ModelKind::UniformTypeClasses { alphabet } => SamplerKind::UniformTypes { alphabet: *alphabet },
            ModelKind::TypeMixture { .. } => {
                let law = type_law(self)?;
                SamplerKind::Table { cdf: cumulative(&law.probs), types: law.types }
            }
        };
        Ok(CodewordSampler { inner, word_length: l })
    }
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    // Pin the tail to exactly 1 from the last positive entry on so a draw
    // in [0, 1) never lands on a zero-probability letter.
    if let Some(last) = probs.iter().rposition(|&p| p > 0.0) {
        for c in &mut cdf[last..] {
            *c = 1.0;
        }
    }
    cdf
}

#[inline(always)]
fn invert(cdf: &[f64], u: f64) -> usize {
    if cdf.len() == 2 {
        return (u >= cdf[0]) as usize;
    }
    cdf.partition_point(|&c| c <= u)
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Iid { cdf: Vec<f64> },
    UniformTypes { alphabet: usize },
    Table { cdf: Vec<f64>, types: Vec<Vec<u32>> },
}

/// Prepared sampler for one model. Draws are pure functions of the stream.
#[derive(Debug, Clone)]
pub struct CodewordSampler {
    inner: SamplerKind,
    word_length: usize,
}

impl CodewordSampler {
    pub fn word_length(&self) -> usize {
        self.word_length
    }

    /// Whether letter `i` depends only on stream word `i` (and can therefore
    /// be generated lazily with [`CodewordSampler::iid_letter`]).
    pub fn is_iid(&self) -> bool {
        matches!(self.inner, SamplerKind::Iid { .. })
    }

    /// Letter at position `pos` of an i.i.d. codeword. Each stream word
    /// yields two letters (32-bit uniforms). Panics for type-based samplers.
    #[inline(always)]
    pub fn iid_letter(&self, stream: &Stream, pos: usize) -> u8 {
        match &self.inner {
            SamplerKind::Iid { cdf } => {
                let w = stream.word_at((pos / 2) as u64);
                invert(cdf, half_unit_f64(w, pos % 2)) as u8
            }
            _ => panic!("iid_letter on a type-based sampler"),
        }
    }

    /// For a binary i.i.d. sampler, the 32-bit threshold `T` such that a
    /// half-word `h` yields letter 1 iff `h >= T`; this reproduces the
    /// floating-point inversion exactly.
    pub fn binary_threshold(&self) -> Option<u64> {
        match &self.inner {
            SamplerKind::Iid { cdf } if cdf.len() == 2 => Some((cdf[0] * (1u64 << 32) as f64).ceil() as u64),
            _ => None,
        }
    }

    /// Both letters carried by stream word `pair` of an i.i.d. codeword.
    #[inline(always)]
    pub fn iid_letter_pair(&self, stream: &Stream, pair: usize) -> (u8, u8) {
        match &self.inner {
            SamplerKind::Iid { cdf } => {
                let w = stream.word_at(pair as u64);
                (invert(cdf, half_unit_f64(w, 0)) as u8, invert(cdf, half_unit_f64(w, 1)) as u8)
            }
            _ => panic!("iid_letter_pair on a type-based sampler"),
        }
    }

    pub fn sample_into(&self, stream: &mut Stream, word: &mut Vec<u8>) {
        let l = self.word_length;
        word.clear();
        match &self.inner {
            SamplerKind::Iid { cdf } => {
                let mut current = 0;
                for pos in 0..l {
                    if pos % 2 == 0 {
                        current = stream.next_u64();
                    }
                    word.push(invert(cdf, half_unit_f64(current, pos % 2)) as u8);
                }
            }
            SamplerKind::UniformTypes { alphabet } => {
                let counts = uniform_composition(stream, l as u32, *alphabet);
                fill_shuffled(stream, &counts, word);
            }
            SamplerKind::Table { cdf, types } => {
                let t = invert(cdf, stream.next_f64());
                fill_shuffled(stream, &types[t], word);
            }
        }
    }

    pub fn sample(&self, stream: &mut Stream) -> Vec<u8> {
        let mut w = Vec::with_capacity(self.word_length);
        self.sample_into(stream, &mut w);
        w
    }
}

/// Uniform composition of `length` into `alphabet` parts: choose the
/// `alphabet - 1` bar positions among `length + alphabet - 1` slots uniformly
/// (Floyd's subset sampling), then read the gaps.
fn uniform_composition(stream: &mut Stream, length: u32, alphabet: usize) -> Vec<u32> {
    let n = length as u64 + alphabet as u64 - 1;
    let k = alphabet as u64 - 1;
    let mut bars: Vec<u64> = Vec::with_capacity(k as usize);
    for j in (n - k)..n {
        let t = stream.below(j + 1);
        if bars.contains(&t) {
            bars.push(j);
        } else {
            bars.push(t);
        }
    }
    bars.sort_unstable();
    let mut counts = Vec::with_capacity(alphabet);
    let mut prev: i64 = -1;
    for &b in &bars {
        counts.push((b as i64 - prev - 1) as u32);
        prev = b as i64;
    }
    counts.push((n as i64 - prev - 1) as u32);
    counts
}

/// Writes the multiset word of `counts` and applies a Fisher-Yates shuffle.
fn fill_shuffled(stream: &mut Stream, counts: &[u32], word: &mut Vec<u8>) {
    word.clear();
    for (letter, &c) in counts.iter().enumerate() {
        word.extend(std::iter::repeat(letter as u8).take(c as usize));
    }
    let l = word.len();
    for i in 0..l.saturating_sub(1) {
        let j = i + stream.below((l - i) as u64) as usize;
        word.swap(i, j);
    }
}

/// Draws one codeword. Builds the sampler on every call; prefer
/// [`CodebookModel::sampler`] when drawing many words from one model.
pub fn sample_codeword(model: &CodebookModel, stream: &mut Stream) -> Result<Vec<u8>, CodebookError> {
    Ok(model.sampler()?.sample(stream))
}

/// Exact law of the codeword type, listed in colexicographic type order.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeLaw {
    pub types: Vec<Vec<u32>>,
    pub probs: Vec<f64>,
}

impl TypeLaw {
    pub fn prob_of(&self, counts: &[u32]) -> Option<f64> {
        self.types.iter().position(|t| t == counts).map(|i| self.probs[i])
    }
}

fn guarded_type_count(alphabet: usize, length: usize) -> Result<u64, CodebookError> {
    match type_count(alphabet, length as u32) {
        Some(n) if n <= MAX_ENUMERATED_TYPES => Ok(n),
        Some(n) => Err(CodebookError::TooManyTypes { types: n.to_string(), limit: MAX_ENUMERATED_TYPES }),
        None => Err(CodebookError::TooManyTypes { types: "> 2^64".into(), limit: MAX_ENUMERATED_TYPES }),
    }
}

/// Probability of each type class under `model`, by enumeration.
pub fn type_law(model: &CodebookModel) -> Result<TypeLaw, CodebookError> {
    let k = model.alphabet_size();
    let l = model.word_length;
    let n = guarded_type_count(k, l)? as usize;
    let types: Vec<Vec<u32>> = enumerate_types(k, l as u32).collect();
    debug_assert_eq!(types.len(), n);
    let log_probs: Vec<f64> = match &model.kind {
        ModelKind::Iid(base) => types.iter().map(|t| iid_type_log_prob(base, t)).collect(),
        ModelKind::UniformTypeClasses { .. } => vec![-(n as f64).log2(); n],
        ModelKind::TypeMixture { center, concentration } => {
            let lw: Vec<f64> = types.iter().map(|t| mixture_log_weight(center, *concentration, t)).collect();
            let m = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = lw.iter().map(|w| (w - m).exp2()).sum();
            let log_z = m + z.log2();
            lw.iter().map(|w| w - log_z).collect()
        }
    };
    let probs = log_probs.iter().map(|lp| lp.exp2()).collect();
    Ok(TypeLaw { types, probs })
}

fn mixture_log_weight(center: &Distribution, concentration: f64, counts: &[u32]) -> f64 {
    let l: u32 = counts.iter().sum();
    let t: Vec<f64> = counts.iter().map(|&c| c as f64 / l as f64).collect();
    let kl = kl_bits(&t, center.probs());
    if kl.is_infinite() {
        f64::NEG_INFINITY
    } else {
        -concentration * kl
    }
}

/// `log2 (|T_t| prod base(i)^{counts[i]})`.
fn iid_type_log_prob(base: &Distribution, counts: &[u32]) -> f64 {
    let mut lp = 0.0;
    for (&c, &b) in counts.iter().zip(base.probs()) {
        if c > 0 {
            if b == 0.0 {
                return f64::NEG_INFINITY;
            }
            lp += c as f64 * b.log2();
        }
    }
    lp + log_type_class_size(&TypeDistribution::new(counts.to_vec()).expect("nonempty type"))
}

/// Exact `log2` probability of `word` under `model`; `-inf` when impossible.
pub fn codeword_log_prob(model: &CodebookModel, word: &[u8]) -> Result<f64, CodebookError> {
    if word.len() != model.word_length {
        return Err(CodebookError::WordLength { got: word.len(), expected: model.word_length });
    }
    let k = model.alphabet_size();
    let t = crate::prob::empirical_type(word, k).map_err(|_| {
        CodebookError::LetterOutOfRange(word.iter().copied().find(|&c| c as usize >= k).unwrap_or(0) as usize)
    })?;
    match &model.kind {
        ModelKind::Iid(base) => {
            Ok(iid_type_log_prob(base, t.counts()) - log_type_class_size(&t))
        }
        ModelKind::UniformTypeClasses { alphabet } => {
            let l = model.word_length as u64;
            let log_types = log2_binomial(l + *alphabet as u64 - 1, *alphabet as u64 - 1);
            Ok(-log_types - log_type_class_size(&t))
        }
        ModelKind::TypeMixture { .. } => {
            let law = type_law(model)?;
            let p = law.prob_of(t.counts()).unwrap_or(0.0);
            Ok(p.log2() - log_type_class_size(&t))
        }
    }
}

/// Concentration as a function of the generation index; non-decreasing.
#[derive(Debug, Clone, PartialEq)]
pub enum AnnealSchedule {
    Constant { kappa0: f64 },
    /// `kappa0 + rate * n`
    Linear { kappa0: f64, rate: f64 },
    /// `kappa0 * ratio^n`, capped at `f64::MAX`
    Geometric { kappa0: f64, ratio: f64 },
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<(), CodebookError> {
        let bad = |m: &str| Err(CodebookError::BadSchedule(m.to_string()));
        match *self {
            AnnealSchedule::Constant { kappa0 }
            | AnnealSchedule::Linear { kappa0, .. }
            | AnnealSchedule::Geometric { kappa0, .. }
                if !(kappa0.is_finite() && kappa0 > 0.0) =>
            {
                bad("kappa0 must be finite and positive")
            }
            AnnealSchedule::Linear { rate, .. } if !(rate.is_finite() && rate >= 0.0) => {
                bad("linear rate must be finite and nonnegative")
            }
            AnnealSchedule::Geometric { ratio, .. } if !(ratio.is_finite() && ratio > 1.0) => {
                bad("geometric ratio must be finite and greater than 1")
            }
            _ => Ok(()),
        }
    }

    pub fn kappa_at(&self, generation: u64) -> f64 {
        match *self {
            AnnealSchedule::Constant { kappa0 } => kappa0,
            AnnealSchedule::Linear { kappa0, rate } => kappa0 + rate * generation as f64,
            AnnealSchedule::Geometric { kappa0, ratio } => {
                let e = generation.min(i32::MAX as u64) as i32;
                (kappa0 * ratio.powi(e)).min(f64::MAX)
            }
        }
    }
}

/// Replaces a mixture's concentration by the schedule's value.
pub fn anneal_model(
    model: &CodebookModel,
    schedule: &AnnealSchedule,
    generation: u64,
) -> Result<CodebookModel, CodebookError> {
    schedule.validate()?;
    match &model.kind {
        ModelKind::TypeMixture { center, .. } => {
            CodebookModel::type_mixture(center.clone(), schedule.kappa_at(generation), model.word_length)
        }
        _ => Err(CodebookError::NotAMixture),
    }
}
