//! Deterministic seedable random number generation.
//!
//! The generator is xoshiro256++ with splitmix64 seeding, implemented
//! directly so that identical seeds produce identical streams on every
//! platform. Substreams are derived by key mixing (see [`Prng::fork`]),
//! so adding a new consumer never perturbs existing streams.

use super::Vector;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer; also used as the key-derivation mix.
fn splitmix_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seedable deterministic generator (xoshiro256++ core).
#[derive(Debug, Clone)]
pub struct Prng {
    state: [u64; 4],
    /// Seed this stream was constructed from; used for key derivation.
    stream_seed: u64,
    /// Cached second deviate of the polar Box–Muller transform.
    spare_gaussian: Option<f64>,
}

impl Prng {
    /// Build a generator from a 64-bit seed. State words come from a
    /// splitmix64 sequence started at the seed.
    pub fn from_seed(seed: u64) -> Self {
        let mut s = seed;
        let mut state = [0u64; 4];
        for w in &mut state {
            s = s.wrapping_add(GOLDEN);
            *w = splitmix_mix(s);
        }
        Prng {
            state,
            stream_seed: seed,
            spare_gaussian: None,
        }
    }

    /// Derive an independent substream. The child seed is
    /// `mix(mix(parent_seed) ^ mix(key + GOLDEN))`, so distinct
    /// `(parent, key)` pairs give distinct streams and the derivation
    /// does not consume parent state.
    pub fn fork(&self, key: u64) -> Prng {
        let child = splitmix_mix(splitmix_mix(self.stream_seed) ^ splitmix_mix(key.wrapping_add(GOLDEN)));
        Prng::from_seed(child)
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = s[0]
            .wrapping_add(s[3])
            .rotate_left(23)
            .wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n). Uses rejection to avoid modulo bias.
    pub fn uniform_index(&mut self, n: usize) -> usize {
        assert!(n > 0);
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return (x % n) as usize;
            }
        }
    }

    /// Standard normal deviate via the polar (rejection) form of
    /// Box–Muller. Each accepted pair consumes two uniforms; the second
    /// deviate is cached.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(g) = self.spare_gaussian.take() {
            return g;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare_gaussian = Some(v * f);
                return u * f;
            }
        }
    }
}

/// Vector of `len` i.i.d. standard normal entries.
pub fn sample_gaussian(rng: &mut Prng, len: usize) -> Vector {
    assert!(len >= 1, "sample_gaussian: len must be >= 1");
    Vector::from((0..len).map(|_| rng.gaussian()).collect::<Vec<_>>())
}
