use super::learning::{learning_update, BlockHistory};
use super::search::{d_match_search, index_code_length, sample_at, source_stream};
use super::trace::{GenerationRecord, SessionTrace};
use super::{MatchResult, NtsConfig, NtsError};
use crate::codebook::{CodebookModel, CodewordSampler};
use crate::prob::{empirical_type, kl_divergence, Distribution};

/// State shared (identically) by encoder and decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct CodecState {
    pub generation: u64,
    pub q: Distribution,
    pub history: BlockHistory,
}

impl CodecState {
    fn new(config: &NtsConfig) -> Self {
        CodecState { generation: 0, q: config.initial.clone(), history: BlockHistory::default() }
    }

    fn sampler(&self, config: &NtsConfig) -> Result<CodewordSampler, NtsError> {
        Ok(self.model(config)?.sampler()?)
    }

    fn model(&self, config: &NtsConfig) -> Result<CodebookModel, NtsError> {
        config.model.model_at(&self.q, self.generation, config.word_length)
    }

    /// Learning phase: identical on both sides, driven by the transmitted
    /// codeword only.
    fn learn(&mut self, config: &NtsConfig, codeword: &[u8]) -> Result<(), NtsError> {
        if config.adapt {
            let t = empirical_type(codeword, config.distortion.recon_alphabet())?;
            self.q = learning_update(&self.q, &t, &config.update_policy, &mut self.history);
        }
        self.generation += 1;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub result: MatchResult,
    pub code_bits: u32,
}

pub struct Encoder {
    config: NtsConfig,
    state: CodecState,
}

impl Encoder {
    pub fn new(config: NtsConfig) -> Result<Self, NtsError> {
        config.validate()?;
        let state = CodecState::new(&config);
        Ok(Encoder { config, state })
    }

    pub fn state(&self) -> &CodecState {
        &self.state
    }

    pub fn current_model(&self) -> Result<CodebookModel, NtsError> {
        self.state.model(&self.config)
    }

    /// Compression phase (d-match search) followed by the learning update.
    pub fn encode(&mut self, source: &[u8]) -> Result<Encoded, NtsError> {
        if source.len() != self.config.word_length {
            return Err(NtsError::Config {
                field: "word_length",
                reason: format!("source word has {} letters", source.len()),
            });
        }
        let sampler = self.state.sampler(&self.config)?;
        let result = d_match_search(source, &self.config, self.state.generation, &sampler);
        self.state.learn(&self.config, &result.codeword)?;
        Ok(Encoded { code_bits: index_code_length(result.index), result })
    }
}

pub struct Decoder {
    config: NtsConfig,
    state: CodecState,
}

impl Decoder {
    pub fn new(config: NtsConfig) -> Result<Self, NtsError> {
        config.validate()?;
        let state = CodecState::new(&config);
        Ok(Decoder { config, state })
    }

    pub fn state(&self) -> &CodecState {
        &self.state
    }

    pub fn decode(&mut self, index: u64) -> Result<Vec<u8>, NtsError> {
        if index == 0 || index > self.config.max_search_index {
            return Err(NtsError::StreamCorruption { index, max: self.config.max_search_index });
        }
        let sampler = self.state.sampler(&self.config)?;
        let word = sample_at(&sampler, self.config.session_seed, self.state.generation, index);
        self.state.learn(&self.config, &word)?;
        Ok(word)
    }
}

/// Runs `config.generations` encode/decode rounds on words drawn i.i.d. from
/// `source`, checking after every round that both sides agree exactly.
pub fn run_session(
    source: &Distribution,
    config: &NtsConfig,
    reference_qstar: Option<&Distribution>,
) -> Result<SessionTrace, NtsError> {
    config.validate()?;
    if source.alphabet_size() != config.distortion.source_alphabet() {
        return Err(NtsError::Config {
            field: "source",
            reason: format!(
                "{} letters, distortion measure expects {}",
                source.alphabet_size(),
                config.distortion.source_alphabet()
            ),
        });
    }
    if let Some(q) = reference_qstar {
        if q.alphabet_size() != config.distortion.recon_alphabet() {
            return Err(NtsError::Config { field: "reference_qstar", reason: "alphabet mismatch".into() });
        }
    }
    let source_sampler = CodebookModel::iid(source.clone(), config.word_length)?.sampler()?;
    let mut encoder = Encoder::new(config.clone())?;
    let mut decoder = Decoder::new(config.clone())?;
    let mut records = Vec::with_capacity(config.generations as usize);

    for generation in 0..config.generations {
        let word = source_sampler.sample(&mut source_stream(config.session_seed, generation));
        let encoded = encoder.encode(&word)?;
        let reconstruction = decoder.decode(encoded.result.index)?;
        if reconstruction != encoded.result.codeword {
            return Err(NtsError::SyncFailure { generation, detail: "reconstruction differs".into() });
        }
        if encoder.state() != decoder.state() {
            return Err(NtsError::SyncFailure { generation, detail: "codebook state differs".into() });
        }
        let q = encoder.state().q.clone();
        let kl_to_target = reference_qstar.map(|qs| kl_divergence(qs, &q)).transpose()?;
        let codeword_type = empirical_type(&reconstruction, config.distortion.recon_alphabet())?;
        records.push(GenerationRecord {
            generation: generation + 1,
            index: encoded.result.index,
            code_bits: encoded.code_bits,
            rate: encoded.code_bits as f64 / config.word_length as f64,
            distortion: encoded.result.distortion,
            matched: encoded.result.matched,
            q,
            kl_to_target,
            codeword_type,
        });
    }
    Ok(SessionTrace { initial: config.initial.clone(), records })
}
