//! Counter-based keyed random streams.
//!
//! Every random draw in a session is addressed by a key derived from the
//! session seed plus a small tuple of counters (stream domain, generation,
//! codeword index). Output `n` of a stream is `mix64(key + (n + 1) * GOLDEN)`,
//! i.e. SplitMix64 started at `key`, so any position can be reached in O(1).
//!
//! The primitive is frozen: changing `mix64`, `GOLDEN` or the key derivation
//! changes every trace the tools produce.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function (Stafford variant 13).
#[inline(always)]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key of an independent stream. Derived keys are pure functions of the
/// parent key and the tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn from_seed(seed: u64) -> Self {
        StreamKey(mix64(seed ^ 0x6E74_732D_6C61_6221))
    }

    pub fn derive(self, tag: u64) -> Self {
        StreamKey(mix64(self.0.rotate_left(23) ^ mix64(tag.wrapping_add(GOLDEN))))
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    pub fn stream(self) -> Stream {
        Stream { key: self.0, counter: 0 }
    }
}

/// Exclusive deterministic stream of 64-bit words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stream {
    key: u64,
    counter: u64,
}

impl Stream {
    pub fn new(key: StreamKey) -> Self {
        key.stream()
    }

    /// Word at absolute position `pos`, independent of the stream cursor.
    #[inline(always)]
    pub fn word_at(&self, pos: u64) -> u64 {
        mix64(self.key.wrapping_add(pos.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    #[inline(always)]
    pub fn next_u64(&mut self) -> u64 {
        let w = self.word_at(self.counter);
        self.counter = self.counter.wrapping_add(1);
        w
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    #[inline(always)]
    pub fn next_f64(&mut self) -> f64 {
        unit_f64(self.next_u64())
    }

    /// Uniform integer in `[0, n)` by Lemire's multiply-shift with rejection.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        let mut m = (self.next_u64() as u128) * (n as u128);
        let mut low = m as u64;
        if low < n {
            let threshold = n.wrapping_neg() % n;
            while low < threshold {
                m = (self.next_u64() as u128) * (n as u128);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    pub fn position(&self) -> u64 {
        self.counter
    }
}

/// Uniform on `[0, 1)` from the high (`half = 0`) or low (`half = 1`) 32
/// bits of a stream word.
#[inline(always)]
pub fn half_unit_f64(w: u64, half: usize) -> f64 {
    let bits = if half == 0 { w >> 32 } else { w & 0xFFFF_FFFF };
    bits as f64 * (1.0 / (1u64 << 32) as f64)
}

#[inline(always)]
pub fn unit_f64(w: u64) -> f64 {
    (w >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
