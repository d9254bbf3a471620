use super::UpdatePolicy;
use crate::prob::{Distribution, TypeDistribution};
use std::collections::VecDeque;

/// Recent matched types kept for [`UpdatePolicy::BlockAverage`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BlockHistory {
    types: VecDeque<Distribution>,
}

impl BlockHistory {
    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }
}

/// Next codebook distribution after observing `matched`.
///
/// Block averaging uses the latest type alone until `block` types have been
/// seen, then the mean of the last `block`.
pub fn learning_update(
    q: &Distribution,
    matched: &TypeDistribution,
    policy: &UpdatePolicy,
    history: &mut BlockHistory,
) -> Distribution {
    let t = matched.as_distribution();
    debug_assert_eq!(t.alphabet_size(), q.alphabet_size());
    match *policy {
        UpdatePolicy::Hard => t,
        UpdatePolicy::Smoothed { gamma } if gamma >= 1.0 => t,
        UpdatePolicy::Smoothed { gamma } => q.mix(&t, gamma),
        UpdatePolicy::BlockAverage { block } => {
            history.types.push_back(t.clone());
            while history.types.len() > block {
                history.types.pop_front();
            }
            if history.types.len() < block {
                return t;
            }
            let mut mean = vec![0.0; q.alphabet_size()];
            for h in &history.types {
                for (m, v) in mean.iter_mut().zip(h.probs()) {
                    *m += v;
                }
            }
            Distribution::renormalized(mean)
        }
    }
}
