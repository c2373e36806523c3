//! Deterministic pseudo-random numbers built on splitmix64.
//!
//! Every stochastic choice in this crate (dataset forging, parameter
//! initialization, batch order) flows from a single `u64` seed through
//! this generator, so identical seeds reproduce identical artifacts
//! bit-for-bit on any platform.
//!
//! The algorithm is Sebastiano Vigna's splitmix64: the state advances by
//! the golden-ratio constant `0x9E3779B97F4A7C15` and each output is the
//! finalized mix of the new state. Substreams are derived by hashing a
//! textual label (FNV-1a) into the parent state, which keeps independent
//! consumers (forge vs. init vs. batch order) decoupled from one another.

/// Splitmix64 generator. Copyable; cloning forks the stream.
#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the label bytes; used only for substream derivation.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    /// Derive an independent substream for `label`.
    ///
    /// The child state is `mix(parent_seed ^ fnv1a(label))`, so substreams
    /// depend on the root seed and the label but not on how much of the
    /// parent stream has been consumed.
    pub fn substream(&self, label: &str) -> Rng {
        Rng {
            state: mix(self.state ^ fnv1a(label.as_bytes())),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform in [0, 1) with 53 bits of mantissa.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal via Box-Muller (one value per call; no caching,
    /// so the stream position is a pure function of call count).
    pub fn normal(&mut self) -> f64 {
        let u1 = loop {
            let u = self.next_f64();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Unbiased integer in [0, n) by rejection.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// Pick one element of a slice.
    pub fn choice<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len())]
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
