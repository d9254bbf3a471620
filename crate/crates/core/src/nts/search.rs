use super::NtsConfig;
use crate::codebook::{CodebookModel, CodebookError, CodewordSampler};
use crate::rd::DistortionMeasure;
use crate::rng::{Stream, StreamKey};

/// Stream domain tags under the session seed.
pub(crate) const CODEBOOK_DOMAIN: u64 = 0xC0DE_B00C;
pub(crate) const SOURCE_DOMAIN: u64 = 0x50_u64 << 32 | 0x5EED;

/// Substream feeding codeword `index` of generation `generation`.
pub(crate) fn codeword_stream(session_seed: u64, generation: u64, index: u64) -> Stream {
    StreamKey::from_seed(session_seed)
        .derive(CODEBOOK_DOMAIN)
        .derive(generation)
        .derive(index)
        .stream()
}

pub(crate) fn source_stream(session_seed: u64, generation: u64) -> Stream {
    StreamKey::from_seed(session_seed).derive(SOURCE_DOMAIN).derive(generation).stream()
}

pub(crate) fn sample_at(sampler: &CodewordSampler, session_seed: u64, generation: u64, index: u64) -> Vec<u8> {
    sampler.sample(&mut codeword_stream(session_seed, generation, index))
}

/// Codeword `index` (1-based) of the codebook for `generation`. A pure
/// function of its arguments.
pub fn codeword_at(
    session_seed: u64,
    generation: u64,
    index: u64,
    model: &CodebookModel,
) -> Result<Vec<u8>, CodebookError> {
    assert!(index >= 1, "codeword indices start at 1");
    Ok(sample_at(&model.sampler()?, session_seed, generation, index))
}

/// Elias gamma length of `index`: `2 floor(log2 index) + 1`.
pub fn index_code_length(index: u64) -> u32 {
    assert!(index >= 1, "Elias gamma codes positive integers");
    2 * (63 - index.leading_zeros()) + 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub index: u64,
    pub codeword: Vec<u8>,
    /// Average per-letter distortion to the source word.
    pub distortion: f64,
    /// `false` when no codeword within `D` exists among the first `M` and the
    /// lowest-distortion one was returned instead.
    pub matched: bool,
}

/// Finds the first codeword with average distortion at most `D`, or the
/// best of the first `M` (lowest index on ties) when none qualifies.
pub fn d_match_search(
    source: &[u8],
    config: &NtsConfig,
    generation: u64,
    sampler: &CodewordSampler,
) -> MatchResult {
    let l = config.word_length;
    assert_eq!(source.len(), l, "source word length");
    let d = &config.distortion;
    let lf = l as f64;
    let target = config.target_distortion;
    let mut best_sum = f64::INFINITY;
    let mut best_index = 1;
    let mut word = Vec::with_capacity(l);
    let fast = BinaryHamming::new(source, d, sampler);

    for index in 1..=config.max_search_index {
        let mut stream = codeword_stream(config.session_seed, generation, index);
        // Partial sums only grow, so the scan of a codeword stops once it can
        // neither match nor beat the best sum so far.
        let abandon = |partial: f64| partial / lf > target && partial >= best_sum;
        let sum = if let Some(k) = &fast {
            k.distortion(&stream, abandon)
        } else if sampler.is_iid() {
            iid_distortion(source, sampler, &stream, d, abandon)
        } else {
            sampler.sample_into(&mut stream, &mut word);
            word_distortion(source, &word, d, abandon)
        };
        let Some(sum) = sum else { continue };
        if sum / lf <= target {
            let codeword = sample_at(sampler, config.session_seed, generation, index);
            return MatchResult { index, codeword, distortion: sum / lf, matched: true };
        }
        if sum < best_sum {
            best_sum = sum;
            best_index = index;
        }
    }
    let codeword = sample_at(sampler, config.session_seed, generation, best_index);
    MatchResult { index: best_index, codeword, distortion: best_sum / lf, matched: false }
}

/// Bit-parallel scan for binary i.i.d. codebooks under Hamming distortion:
/// 64 letters per block, mismatches by popcount. Produces exactly the same
/// letters and sums as the generic path.
struct BinaryHamming {
    source_bits: Vec<u64>,
    threshold: u64,
    len: usize,
}

impl BinaryHamming {
    fn new(source: &[u8], d: &DistortionMeasure, sampler: &CodewordSampler) -> Option<Self> {
        if *d != DistortionMeasure::hamming(2) {
            return None;
        }
        let threshold = sampler.binary_threshold()?;
        let mut source_bits = vec![0u64; source.len().div_ceil(64)];
        for (i, &x) in source.iter().enumerate() {
            source_bits[i / 64] |= (x as u64 & 1) << (i % 64);
        }
        Some(BinaryHamming { source_bits, threshold, len: source.len() })
    }

    #[inline(always)]
    fn distortion(&self, stream: &Stream, abandon: impl Fn(f64) -> bool) -> Option<f64> {
        let t = self.threshold;
        let mut mismatches = 0u32;
        for (block, &src) in self.source_bits.iter().enumerate() {
            let start = block * 64;
            let n = (self.len - start).min(64);
            let first_pair = (start / 2) as u64;
            let bits = if n == 64 {
                let mut hi = 0u64;
                let mut lo = 0u64;
                for j in 0..32 {
                    let w = stream.word_at(first_pair + j);
                    hi |= (((w >> 32) >= t) as u64) << j;
                    lo |= (((w & 0xFFFF_FFFF) >= t) as u64) << j;
                }
                interleave(hi, lo)
            } else {
                let mut bits = 0u64;
                for j in 0..n.div_ceil(2) {
                    let w = stream.word_at(first_pair + j as u64);
                    bits |= (((w >> 32) >= t) as u64) << (2 * j);
                    bits |= (((w & 0xFFFF_FFFF) >= t) as u64) << (2 * j + 1);
                }
                bits
            };
            let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
            mismatches += ((bits ^ src) & mask).count_ones();
            if abandon(mismatches as f64) {
                return None;
            }
        }
        Some(mismatches as f64)
    }
}

/// Bit `j` of `even` goes to position `2j`, bit `j` of `odd` to `2j + 1`.
#[inline(always)]
fn interleave(even: u64, odd: u64) -> u64 {
    fn spread(mut x: u64) -> u64 {
        x &= 0xFFFF_FFFF;
        x = (x | (x << 16)) & 0x0000_FFFF_0000_FFFF;
        x = (x | (x << 8)) & 0x00FF_00FF_00FF_00FF;
        x = (x | (x << 4)) & 0x0F0F_0F0F_0F0F_0F0F;
        x = (x | (x << 2)) & 0x3333_3333_3333_3333;
        (x | (x << 1)) & 0x5555_5555_5555_5555
    }
    spread(even) | (spread(odd) << 1)
}

#[inline(always)]
fn iid_distortion(
    source: &[u8],
    sampler: &CodewordSampler,
    stream: &Stream,
    d: &DistortionMeasure,
    abandon: impl Fn(f64) -> bool,
) -> Option<f64> {
    let mut sum = 0.0;
    let mut pairs = source.chunks_exact(2);
    for (pair, xs) in pairs.by_ref().enumerate() {
        let (y0, y1) = sampler.iid_letter_pair(stream, pair);
        sum += d.get(xs[0] as usize, y0 as usize) + d.get(xs[1] as usize, y1 as usize);
        if pair % 8 == 7 && abandon(sum) {
            return None;
        }
    }
    if let [x] = pairs.remainder() {
        let y = sampler.iid_letter(stream, source.len() - 1);
        sum += d.get(*x as usize, y as usize);
    }
    Some(sum)
}

#[inline(always)]
fn word_distortion(source: &[u8], word: &[u8], d: &DistortionMeasure, abandon: impl Fn(f64) -> bool) -> Option<f64> {
    let mut sum = 0.0;
    for (pos, (&x, &y)) in source.iter().zip(word).enumerate() {
        sum += d.get(x as usize, y as usize);
        if pos % 16 == 15 && abandon(sum) {
            return None;
        }
    }
    Some(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{make_distribution, Distribution};

    #[test]
    fn interleave_bits() {
        assert_eq!(interleave(0b11, 0), 0b101);
        assert_eq!(interleave(0, 0b11), 0b1010);
        assert_eq!(interleave(u32::MAX as u64, u32::MAX as u64), u64::MAX);
    }

    #[test]
    fn elias_gamma_lengths() {
        assert_eq!(index_code_length(1), 1);
        assert_eq!(index_code_length(2), 3);
        assert_eq!(index_code_length(3), 3);
        assert_eq!(index_code_length(4), 5);
        assert_eq!(index_code_length(255), 15);
        assert_eq!(index_code_length(256), 17);
        assert_eq!(index_code_length(u64::MAX), 127);
    }

    #[test]
    fn codeword_at_is_pure() {
        let m = CodebookModel::iid(make_distribution(&[0.3, 0.7]).unwrap(), 24).unwrap();
        assert_eq!(codeword_at(5, 2, 9, &m).unwrap(), codeword_at(5, 2, 9, &m).unwrap());
        assert_ne!(codeword_at(5, 2, 9, &m).unwrap(), codeword_at(5, 2, 10, &m).unwrap());
        let zeros = CodebookModel::iid(make_distribution(&[1.0, 0.0]).unwrap(), 24).unwrap();
        for index in 1..50 {
            assert_eq!(codeword_at(5, 0, index, &zeros).unwrap(), vec![0; 24]);
        }
    }

    #[test]
    fn codebooks_do_not_repeat_words() {
        // 10^4 words of 32 fair bits: collision probability about 1.2e-2.
        let m = CodebookModel::iid(Distribution::uniform(2), 32).unwrap();
        let s = m.sampler().unwrap();
        let mut words: Vec<Vec<u8>> = Vec::new();
        for generation in 0..100 {
            for index in 1..=100 {
                words.push(sample_at(&s, 2024, generation, index));
            }
        }
        words.sort();
        words.dedup();
        assert_eq!(words.len(), 10_000);
    }

    fn config(l: usize, target: f64, m: u64) -> NtsConfig {
        let mut c = NtsConfig::new(DistortionMeasure::hamming(2), l, target);
        c.max_search_index = m;
        c.session_seed = 77;
        c
    }

    #[test]
    fn generous_distortion_matches_index_one() {
        let c = config(16, 1.0, 100);
        let s = CodebookModel::iid(Distribution::uniform(2), 16).unwrap().sampler().unwrap();
        let r = d_match_search(&[1; 16], &c, 0, &s);
        assert_eq!((r.index, r.matched), (1, true));
        assert_eq!(r.codeword, sample_at(&s, 77, 0, 1));
    }

    #[test]
    fn impossible_match_falls_back_to_best() {
        let mut c = config(8, 0.5, 40);
        c.target_distortion = 0.0;
        let s = CodebookModel::iid(make_distribution(&[1.0, 0.0]).unwrap(), 8).unwrap().sampler().unwrap();
        let r = d_match_search(&[1, 0, 1, 0, 0, 0, 0, 0], &c, 3, &s);
        assert!(!r.matched);
        assert_eq!(r.index, 1);
        assert_eq!(r.distortion, 0.25);
    }

    /// Independent replay: materialize every codeword and scan naively.
    fn replay(source: &[u8], c: &NtsConfig, generation: u64, s: &CodewordSampler) -> (u64, bool, f64) {
        let mut best = (1, f64::INFINITY);
        for index in 1..=c.max_search_index {
            let w = sample_at(s, c.session_seed, generation, index);
            let dist = source.iter().zip(&w).filter(|(a, b)| a != b).count() as f64 / source.len() as f64;
            if dist <= c.target_distortion {
                return (index, true, dist);
            }
            if dist < best.1 {
                best = (index, dist);
            }
        }
        (best.0, false, best.1)
    }

    #[test]
    fn search_agrees_with_replay() {
        let c = config(16, 0.25, 4096);
        let models = [
            CodebookModel::iid(Distribution::uniform(2), 16).unwrap(),
            CodebookModel::uniform_types(2, 16).unwrap(),
            CodebookModel::type_mixture(make_distribution(&[0.3, 0.7]).unwrap(), 3.0, 16).unwrap(),
        ];
        let src_sampler = CodebookModel::iid(make_distribution(&[0.4, 0.6]).unwrap(), 16).unwrap().sampler().unwrap();
        for m in &models {
            let s = m.sampler().unwrap();
            for generation in 0..20 {
                let source = sample_at(&src_sampler, 1, generation, 1);
                let r = d_match_search(&source, &c, generation, &s);
                let (index, matched, dist) = replay(&source, &c, generation, &s);
                assert_eq!((r.index, r.matched, r.distortion), (index, matched, dist));
            }
        }
        // fallback branch at a tight target
        let tight = config(16, 0.01, 256);
        let s = models[0].sampler().unwrap();
        for generation in 0..10 {
            let source = sample_at(&src_sampler, 2, generation, 1);
            let r = d_match_search(&source, &tight, generation, &s);
            let (index, matched, dist) = replay(&source, &tight, generation, &s);
            assert_eq!((r.index, r.matched, r.distortion), (index, matched, dist));
            let first = sample_at(&s, tight.session_seed, generation, 1);
            let first_dist = source.iter().zip(&first).filter(|(a, b)| a != b).count() as f64 / 16.0;
            assert!(r.distortion <= first_dist);
        }
    }
}
