//! Counter-based random numbers.
//!
//! Every draw is a pure function of `(seed, stream, counter)`, so results do
//! not depend on evaluation order or on any external RNG crate's internals.
//! Streams are derived from string labels so one seed can feed independent
//! consumers (noise, probes, power iterations).

#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a hash of a label, used to name sub-streams.
pub fn label_hash(label: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { key: splitmix64(seed) }
    }

    /// Independent stream for a labelled consumer.
    pub fn stream(&self, label: &str) -> Self {
        Self { key: splitmix64(self.key ^ label_hash(label)) }
    }

    /// Independent stream for an integer index (e.g. a sinogram bin).
    pub fn substream(&self, index: u64) -> Self {
        Self { key: splitmix64(self.key ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019))) }
    }

    pub fn u64_at(&self, counter: u64) -> u64 {
        splitmix64(self.key ^ splitmix64(counter))
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn uniform_at(&self, counter: u64) -> f64 {
        (self.u64_at(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw by Box-Muller, consuming counters `2c` and `2c + 1`.
    pub fn normal_at(&self, counter: u64) -> f64 {
        let u1 = 1.0 - self.uniform_at(2 * counter);
        let u2 = self.uniform_at(2 * counter + 1);
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
    }
}

/// Sequential reader over a [`CounterRng`].
#[derive(Debug, Clone)]
pub struct RngCursor {
    rng: CounterRng,
    counter: u64,
}

impl RngCursor {
    pub fn new(rng: CounterRng) -> Self {
        Self { rng, counter: 0 }
    }

    pub fn uniform(&mut self) -> f64 {
        let u = self.rng.uniform_at(self.counter);
        self.counter += 1;
        u
    }

    pub fn normal(&mut self) -> f64 {
        let z = self.rng.normal_at(self.counter);
        self.counter += 1;
        z
    }
}
