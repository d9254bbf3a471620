use super::NtsError;
use crate::codebook::{AnnealSchedule, CodebookModel};
use crate::prob::Distribution;
use crate::rd::DistortionMeasure;

/// How the matched codeword's type moves the codebook distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum UpdatePolicy {
    /// Adopt the matched type.
    Hard,
    /// `(1 - gamma) Q_n + gamma * type`.
    Smoothed { gamma: f64 },
    /// Mean of the last `block` matched types.
    BlockAverage { block: usize },
}

impl UpdatePolicy {
    pub const DEFAULT_GAMMA: f64 = 0.1;
}

/// Which codebook law a generation uses, given the current `Q_n`.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    /// Codewords i.i.d. from `Q_n`.
    Iid,
    /// Uniform over type classes; ignores `Q_n`.
    UniformTypeClasses,
    /// Exponentially tilted type mixture centred at `Q_n` with concentration
    /// `schedule.kappa_at(n)`.
    TypeMixture { schedule: AnnealSchedule },
}

impl ModelSpec {
    pub fn model_at(&self, q: &Distribution, generation: u64, word_length: usize) -> Result<CodebookModel, NtsError> {
        let model = match self {
            ModelSpec::Iid => CodebookModel::iid(q.clone(), word_length)?,
            ModelSpec::UniformTypeClasses => CodebookModel::uniform_types(q.alphabet_size(), word_length)?,
            ModelSpec::TypeMixture { schedule } => {
                CodebookModel::type_mixture(q.clone(), schedule.kappa_at(generation), word_length)?
            }
        };
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NtsConfig {
    pub word_length: usize,
    pub target_distortion: f64,
    pub distortion: DistortionMeasure,
    pub model: ModelSpec,
    /// `Q_0`, over the reconstruction alphabet.
    pub initial: Distribution,
    pub update_policy: UpdatePolicy,
    /// `false` freezes the codebook at `Q_0` (exploitation only).
    pub adapt: bool,
    pub max_search_index: u64,
    pub session_seed: u64,
    pub generations: u64,
}

impl NtsConfig {
    pub const DEFAULT_MAX_SEARCH_INDEX: u64 = 1 << 20;

    /// Defaults: uniform `Q_0`, i.i.d. codebook, smoothed updates with
    /// `gamma = 0.1`, `M = 2^20`.
    pub fn new(distortion: DistortionMeasure, word_length: usize, target_distortion: f64) -> Self {
        let initial = Distribution::uniform(distortion.recon_alphabet());
        NtsConfig {
            word_length,
            target_distortion,
            distortion,
            model: ModelSpec::Iid,
            initial,
            update_policy: UpdatePolicy::Smoothed { gamma: UpdatePolicy::DEFAULT_GAMMA },
            adapt: true,
            max_search_index: Self::DEFAULT_MAX_SEARCH_INDEX,
            session_seed: 0,
            generations: 0,
        }
    }

    pub fn validate(&self) -> Result<(), NtsError> {
        let fail = |field, reason: &str| Err(NtsError::Config { field, reason: reason.to_string() });
        if self.word_length == 0 {
            return fail("word_length", "must be at least 1");
        }
        if !(self.target_distortion.is_finite() && self.target_distortion > 0.0) {
            return fail("target_distortion", "must be finite and positive");
        }
        if self.max_search_index == 0 {
            return fail("max_search_index", "must be at least 1");
        }
        if self.initial.alphabet_size() != self.distortion.recon_alphabet() {
            return fail("initial", "alphabet differs from the reconstruction alphabet");
        }
        if self.distortion.recon_alphabet() > 256 || self.distortion.source_alphabet() > 256 {
            return fail("distortion", "alphabets are limited to 256 letters");
        }
        match self.update_policy {
            UpdatePolicy::Smoothed { gamma } if !(gamma > 0.0 && gamma <= 1.0) => {
                return fail("update_policy", "smoothing gamma must lie in (0, 1]");
            }
            UpdatePolicy::BlockAverage { block: 0 } => {
                return fail("update_policy", "block must be at least 1");
            }
            _ => {}
        }
        if let ModelSpec::TypeMixture { schedule } = &self.model {
            if let Err(e) = schedule.validate() {
                return fail("model", &e.to_string());
            }
        }
        Ok(())
    }
}
