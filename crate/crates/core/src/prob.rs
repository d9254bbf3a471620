//! Finite-alphabet probability primitives.
//!
//! Conventions: logs are base 2, `0 log 0 = 0`, and a divergence whose first
//! argument puts mass outside the support of the second is `f64::INFINITY`
//! (never NaN).

use statrs::function::factorial::ln_factorial;
use std::f64::consts::LN_2;
use thiserror::Error;

/// Tolerance on `sum(probs) == 1` for a valid [`Distribution`].
pub const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbError {
    #[error("empty weight vector")]
    Empty,
    #[error("weight {index} is negative ({value})")]
    Negative { index: usize, value: f64 },
    #[error("weight {index} is not finite ({value})")]
    NotFinite { index: usize, value: f64 },
    #[error("all weights are zero")]
    AllZero,
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("alphabet size mismatch: {left} vs {right}")]
    AlphabetMismatch { left: usize, right: usize },
    #[error("letter {letter} at position {position} is outside alphabet of size {alphabet}")]
    LetterOutOfRange { position: usize, letter: usize, alphabet: usize },
    #[error("empty word")]
    EmptyWord,
    #[error("type counts sum to {sum}, expected length {length}")]
    CountMismatch { sum: u64, length: u64 },
}

/// Probability vector over letters `0..alphabet_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Normalizes nonnegative finite weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self, ProbError> {
        if weights.is_empty() {
            return Err(ProbError::Empty);
        }
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() {
                return Err(ProbError::NotFinite { index, value });
            }
            if value < 0.0 {
                return Err(ProbError::Negative { index, value });
            }
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(ProbError::AllZero);
        }
        Ok(Distribution { probs: weights.iter().map(|w| w / total).collect() })
    }

    /// Accepts an already normalized vector, checking the invariants.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self, ProbError> {
        if probs.is_empty() {
            return Err(ProbError::Empty);
        }
        for (index, &value) in probs.iter().enumerate() {
            if !value.is_finite() {
                return Err(ProbError::NotFinite { index, value });
            }
            if value < 0.0 {
                return Err(ProbError::Negative { index, value });
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(ProbError::NotNormalized(total));
        }
        Ok(Distribution { probs })
    }

    /// Divides by the sum without validation. For vectors produced by
    /// arithmetic on valid distributions (marginals, mixtures).
    pub(crate) fn renormalized(mut probs: Vec<f64>) -> Self {
        let total: f64 = probs.iter().sum();
        debug_assert!(total > 0.0 && total.is_finite());
        for p in &mut probs {
            *p /= total;
        }
        Distribution { probs }
    }

    pub fn uniform(alphabet_size: usize) -> Self {
        assert!(alphabet_size > 0);
        Distribution { probs: vec![1.0 / alphabet_size as f64; alphabet_size] }
    }

    pub fn point_mass(alphabet_size: usize, letter: usize) -> Self {
        assert!(letter < alphabet_size);
        let mut probs = vec![0.0; alphabet_size];
        probs[letter] = 1.0;
        Distribution { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn alphabet_size(&self) -> usize {
        self.probs.len()
    }

    pub fn support_size(&self, threshold: f64) -> usize {
        self.probs.iter().filter(|&&p| p >= threshold).count()
    }

    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// `(1 - gamma) * self + gamma * other`.
    pub fn mix(&self, other: &Distribution, gamma: f64) -> Distribution {
        let probs =
            self.probs.iter().zip(&other.probs).map(|(a, b)| (1.0 - gamma) * a + gamma * b).collect();
        Distribution::renormalized(probs)
    }
}

/// Builds a [`Distribution`] by normalizing `weights`.
pub fn make_distribution(weights: &[f64]) -> Result<Distribution, ProbError> {
    Distribution::from_weights(weights)
}

/// Shannon entropy in bits.
pub fn entropy(p: &Distribution) -> f64 {
    let h: f64 = p.probs.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum();
    h.max(0.0)
}

/// `KL(p || q)` in bits, `+inf` when `p` is not absolutely continuous w.r.t. `q`.
pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<f64, ProbError> {
    if p.alphabet_size() != q.alphabet_size() {
        return Err(ProbError::AlphabetMismatch { left: p.alphabet_size(), right: q.alphabet_size() });
    }
    Ok(kl_bits(&p.probs, &q.probs))
}

pub(crate) fn kl_bits(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            acc += a * (a / b).log2();
        }
    }
    acc.max(0.0)
}

/// Empirical type of a length-`L` word: letter counts plus `L`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeDistribution {
    counts: Vec<u32>,
    length: u32,
}

impl TypeDistribution {
    pub fn new(counts: Vec<u32>) -> Result<Self, ProbError> {
        if counts.is_empty() {
            return Err(ProbError::Empty);
        }
        let sum: u64 = counts.iter().map(|&c| c as u64).sum();
        if sum == 0 {
            return Err(ProbError::EmptyWord);
        }
        Ok(TypeDistribution { counts, length: sum as u32 })
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn length(&self) -> u32 {
        self.length
    }

    pub fn alphabet_size(&self) -> usize {
        self.counts.len()
    }

    pub fn as_distribution(&self) -> Distribution {
        let l = self.length as f64;
        Distribution { probs: self.counts.iter().map(|&c| c as f64 / l).collect() }
    }
}

/// Counts the letters of `word`.
pub fn empirical_type(word: &[u8], alphabet_size: usize) -> Result<TypeDistribution, ProbError> {
    if word.is_empty() {
        return Err(ProbError::EmptyWord);
    }
    let mut counts = vec![0u32; alphabet_size];
    for (position, &letter) in word.iter().enumerate() {
        let letter = letter as usize;
        if letter >= alphabet_size {
            return Err(ProbError::LetterOutOfRange { position, letter, alphabet: alphabet_size });
        }
        counts[letter] += 1;
    }
    Ok(TypeDistribution { counts, length: word.len() as u32 })
}

/// `log2(L! / prod counts[i]!)`, the size of the type class in bits.
pub fn log_type_class_size(t: &TypeDistribution) -> f64 {
    let ln = ln_factorial(t.length as u64)
        - t.counts.iter().map(|&c| ln_factorial(c as u64)).sum::<f64>();
    (ln / LN_2).max(0.0)
}

/// `log2 C(n, k)`.
pub fn log2_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ((ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)) / LN_2).max(0.0)
}

/// Number of types with denominator `length` over `alphabet_size` letters,
/// `C(L + K - 1, K - 1)`, or `None` on u64 overflow.
pub fn type_count(alphabet_size: usize, length: u32) -> Option<u64> {
    let k = alphabet_size.checked_sub(1)? as u64;
    let n = length as u64 + k;
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// All count vectors of `alphabet_size` letters summing to `length`, in
/// colexicographic order (the last letter varies slowest).
pub fn enumerate_types(alphabet_size: usize, length: u32) -> TypeIter {
    assert!(alphabet_size >= 1);
    let mut first = vec![0u32; alphabet_size];
    first[0] = length;
    TypeIter { next: Some(first) }
}

pub struct TypeIter {
    next: Option<Vec<u32>>,
}

impl Iterator for TypeIter {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let current = self.next.take()?;
        // Successor in colex order: find the first nonzero count i among the
        // leading letters, move one unit to i + 1 and sweep the rest of the
        // prefix back into letter 0.
        let k = current.len();
        let mut succ = current.clone();
        let pos = succ[..k - 1].iter().position(|&c| c > 0);
        if let Some(i) = pos {
            let rest = succ[i] - 1;
            succ[i] = 0;
            succ[i + 1] += 1;
            succ[0] = rest;
            self.next = Some(succ);
        }
        Some(current)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn d(v: &[f64]) -> Distribution {
        make_distribution(v).unwrap()
    }

    #[test]
    fn make_distribution_examples() {
        assert_eq!(d(&[2.0, 2.0]).probs(), &[0.5, 0.5]);
        assert_eq!(d(&[1.0, 0.0, 0.0]).probs(), &[1.0, 0.0, 0.0]);
        assert_eq!(d(&[1.0, 3.0]).probs(), &[0.25, 0.75]);
    }

    #[test]
    fn make_distribution_rejects() {
        assert_eq!(make_distribution(&[0.0, 0.0]), Err(ProbError::AllZero));
        assert!(matches!(make_distribution(&[1.0, -0.1]), Err(ProbError::Negative { index: 1, .. })));
        assert!(matches!(make_distribution(&[f64::NAN]), Err(ProbError::NotFinite { index: 0, .. })));
        assert!(matches!(
            make_distribution(&[1.0, f64::INFINITY]),
            Err(ProbError::NotFinite { index: 1, .. })
        ));
        assert_eq!(make_distribution(&[]), Err(ProbError::Empty));
        assert!(Distribution::from_probs(vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&d(&[0.5, 0.5])), 1.0);
        assert_eq!(entropy(&d(&[1.0, 0.0])), 0.0);
        // -0.3 log2 0.3 - 0.7 log2 0.7 evaluated at 30 digits
        assert_abs_diff_eq!(entropy(&d(&[0.3, 0.7])), 0.881290899230692, epsilon = 1e-12);
    }

    #[test]
    fn kl_examples() {
        let half = d(&[0.5, 0.5]);
        assert_eq!(kl_divergence(&half, &half).unwrap(), 0.0);
        assert_eq!(kl_divergence(&d(&[1.0, 0.0]), &d(&[0.0, 1.0])).unwrap(), f64::INFINITY);
        assert_abs_diff_eq!(
            kl_divergence(&half, &d(&[0.25, 0.75])).unwrap(),
            0.207518749639422,
            epsilon = 1e-12
        );
        assert!(kl_divergence(&half, &Distribution::uniform(3)).is_err());
        // zero mass in p is ignored even where q is zero
        assert_eq!(kl_divergence(&d(&[0.0, 1.0]), &d(&[0.0, 1.0])).unwrap(), 0.0);
    }

    #[test]
    fn empirical_type_examples() {
        let t = empirical_type(&[0, 1, 1, 0, 1], 2).unwrap();
        assert_eq!((t.counts(), t.length()), (&[2, 3][..], 5));
        let t = empirical_type(&[0, 0, 0, 0], 3).unwrap();
        assert_eq!(t.counts(), &[4, 0, 0]);
        let t = empirical_type(&[2, 1, 0], 3).unwrap();
        assert_eq!(t.counts(), &[1, 1, 1]);
        assert_eq!(t.as_distribution().probs(), &[1.0 / 3.0; 3]);
        assert!(matches!(
            empirical_type(&[0, 3], 3),
            Err(ProbError::LetterOutOfRange { position: 1, letter: 3, .. })
        ));
        assert_eq!(empirical_type(&[], 2), Err(ProbError::EmptyWord));
    }

    #[test]
    fn type_class_size_examples() {
        let t = |c: Vec<u32>| TypeDistribution::new(c).unwrap();
        assert_abs_diff_eq!(log_type_class_size(&t(vec![1, 1])), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(log_type_class_size(&t(vec![2, 2])), 6f64.log2(), epsilon = 1e-12);
        assert_eq!(log_type_class_size(&t(vec![5, 0])), 0.0);
    }

    fn multinomial_exact(counts: &[u32]) -> u128 {
        let mut acc: u128 = 1;
        let mut n: u128 = 0;
        for &c in counts {
            for i in 1..=c as u128 {
                n += 1;
                acc = acc * n / i;
            }
        }
        acc
    }

    #[test]
    fn type_class_size_matches_integer_arithmetic() {
        for k in 1..=4 {
            for l in 1..=20u32 {
                for counts in enumerate_types(k, l) {
                    let exact = (multinomial_exact(&counts) as f64).log2();
                    let got = log_type_class_size(&TypeDistribution::new(counts.clone()).unwrap());
                    assert!(
                        (got - exact).abs() <= 1e-9 * exact.max(1e-300) || (exact == 0.0 && got == 0.0),
                        "{counts:?}: {got} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn type_enumeration_is_colex_and_complete() {
        let all: Vec<_> = enumerate_types(2, 2).collect();
        assert_eq!(all, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        let all: Vec<_> = enumerate_types(3, 2).collect();
        assert_eq!(
            all,
            vec![vec![2, 0, 0], vec![1, 1, 0], vec![0, 2, 0], vec![1, 0, 1], vec![0, 1, 1], vec![0, 0, 2]]
        );
        for k in 1..=4 {
            for l in 1..=9 {
                let n = enumerate_types(k, l).count() as u64;
                assert_eq!(Some(n), type_count(k, l));
            }
        }
        assert_eq!(type_count(2, 256), Some(257));
        assert_eq!(type_count(1, 7), Some(1));
    }

    #[test]
    fn binary_type_classes_partition_all_words() {
        for l in 1..=12u32 {
            let total: f64 = enumerate_types(2, l)
                .map(|c| (log_type_class_size(&TypeDistribution::new(c).unwrap()) - l as f64).exp2())
                .sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn long_iid_words_have_types_near_the_source() {
        use crate::rng::StreamKey;
        let p = [0.2, 0.5, 0.3];
        let mut within = 0;
        for seed in 0..100 {
            let mut s = StreamKey::from_seed(seed).stream();
            let word: Vec<u8> = (0..100_000)
                .map(|_| {
                    let u = s.next_f64();
                    if u < 0.2 {
                        0
                    } else if u < 0.7 {
                        1
                    } else {
                        2
                    }
                })
                .collect();
            let t = empirical_type(&word, 3).unwrap().as_distribution();
            if t.max_abs_diff(&d(&p)) < 0.01 {
                within += 1;
            }
        }
        assert!(within >= 99, "{within}/100");
    }

    proptest! {
        #[test]
        fn normalization(w in prop::collection::vec(0.0f64..1e6, 1..12)) {
            prop_assume!(w.iter().any(|&x| x > 0.0));
            let p = make_distribution(&w).unwrap();
            prop_assert!((p.probs().iter().sum::<f64>() - 1.0).abs() <= SUM_TOLERANCE);
            prop_assert!(p.probs().iter().all(|&x| x >= 0.0));
        }

        #[test]
        fn gibbs_inequality(pair in (2usize..8).prop_flat_map(|k| (
            prop::collection::vec(1e-3f64..1.0, k),
            prop::collection::vec(1e-3f64..1.0, k),
        ))) {
            let p = make_distribution(&pair.0).unwrap();
            let q = make_distribution(&pair.1).unwrap();
            let kl = kl_divergence(&p, &q).unwrap();
            prop_assert!(kl >= 0.0);
            // Pinsker: small divergence forces small L-infinity distance.
            let linf = p.max_abs_diff(&q);
            prop_assert!(linf <= (2.0 * std::f64::consts::LN_2 * kl).sqrt() + 1e-12);
            prop_assert!(kl_divergence(&p, &p).unwrap() <= 1e-12);
            let h = entropy(&p);
            prop_assert!(h >= 0.0 && h <= (p.alphabet_size() as f64).log2() + 1e-12);
        }
    }
}
