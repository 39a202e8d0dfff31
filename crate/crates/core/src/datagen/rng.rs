//! Counter-based generator with explicit stream splitting.
//!
//! A stream is a 64-bit key; draw `i` of the stream is `mix(key + (i + 1) * GOLDEN)`,
//! which is exactly SplitMix64 started from state `key`. Child streams get the key
//! `mix(key ^ mix(index + 1))`, so a value is a pure function of the seed, the split
//! path and the draw counter.
//!
//! Uniforms take the top 53 bits: `u = (bits >> 11 + 0.5) / 2^53`, which lies strictly
//! inside `(0, 1)`. Normals use the cosine branch of Box–Muller on two consecutive
//! uniforms: `z = sqrt(-2 ln u1) * cos(2 pi u2)`. The sine branch is discarded so every
//! normal consumes exactly two draws.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    key: u64,
    counter: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            key: mix(seed),
            counter: 0,
        }
    }

    /// Independent child stream; does not advance `self`.
    pub fn split(&self, index: u64) -> Self {
        Self {
            key: mix(self.key ^ mix(index.wrapping_add(1))),
            counter: 0,
        }
    }

    /// Child stream reached through a path of split indices.
    pub fn stream(&self, path: &[u64]) -> Self {
        path.iter().fold(self.clone(), |rng, &i| rng.split(i))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
