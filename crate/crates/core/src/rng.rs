//! Deterministic randomness.
//!
//! Two flavors share one mixing core (the SplitMix64 finalizer):
//!
//! * [`counter_u64`] is a pure function of `(seed, stream, index, counter)`.
//!   Monte Carlo sampling keys every draw by variable index, sample index and
//!   a per-sample draw counter, so any worker can produce any sample in any
//!   order and the results are identical.
//! * [`StreamRng`] is a tiny sequential generator for places where a stream
//!   is more natural (axiom trials, fuzz case construction). It is still
//!   fully determined by `(seed, stream)`.

pub const GENERATOR: &str = "splitmix64-counter/v1";
pub const KEYING: &str = "seed -> variable index -> sample index -> draw counter";

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer with a pre-add of the golden-ratio increment.
#[inline]
pub fn mix64(v: u64) -> u64 {
    let mut z = v.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stateless draw: four mixing rounds fold the key parts in one at a time.
#[inline]
pub fn counter_u64(seed: u64, stream: u64, index: u64, counter: u64) -> u64 {
    mix64(mix64(mix64(mix64(seed) ^ stream) ^ index) ^ counter)
}

/// Uniform in `[0, 1)` from the top 53 bits.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in `(0, 1]`; safe to pass to `ln`.
#[inline]
pub fn unit_open_f64(bits: u64) -> f64 {
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal pair from two uniforms, `u1` in `(0, 1]`, `u2` in `[0, 1)`.
pub fn box_muller(u1: f64, u2: f64) -> (f64, f64) {
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = std::f64::consts::TAU * u2;
    (r * theta.cos(), r * theta.sin())
}

#[derive(Clone, Debug)]
pub struct StreamRng {
    state: u64,
}

impl StreamRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        StreamRng {
            state: mix64(mix64(seed) ^ stream),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    pub fn next_f64(&mut self) -> f64 {
        unit_f64(self.next_u64())
    }

    /// Uniform in `[0, n)` without modulo bias (Lemire's multiply-shift).
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let mut x = self.next_u64();
        let mut m = (x as u128) * (n as u128);
        let mut low = m as u64;
        if low < n {
            let threshold = n.wrapping_neg() % n;
            while low < threshold {
                x = self.next_u64();
                m = (x as u128) * (n as u128);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    /// Uniform on the inclusive range `[lo, hi]`.
    pub fn range_i64(&mut self, lo: i64, hi: i64) -> i64 {
        assert!(lo <= hi);
        let width = (hi - lo) as u64 + 1;
        lo + self.below(width) as i64
    }

    /// True with probability `numer/denom`.
    pub fn chance(&mut self, numer: u64, denom: u64) -> bool {
        self.below(denom) < numer
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counter_draws_are_reproducible_and_keyed() {
        let a = counter_u64(7, 1, 42, 0);
        assert_eq!(a, counter_u64(7, 1, 42, 0));
        assert_ne!(a, counter_u64(7, 1, 42, 1));
        assert_ne!(a, counter_u64(7, 2, 42, 0));
        assert_ne!(a, counter_u64(8, 1, 42, 0));
    }

    #[test]
    fn stream_rng_is_reproducible() {
        let mut a = StreamRng::new(5, 9);
        let mut b = StreamRng::new(5, 9);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = StreamRng::new(5, 10);
        assert_ne!(StreamRng::new(5, 9).next_u64(), c.next_u64());
    }

    #[test]
    fn unit_ranges() {
        for i in 0..1000u64 {
            let bits = counter_u64(3, 0, i, 0);
            let u = unit_f64(bits);
            assert!((0.0..1.0).contains(&u));
            let v = unit_open_f64(bits);
            assert!(v > 0.0 && v <= 1.0);
        }
        assert_eq!(unit_f64(0), 0.0);
        assert!(unit_open_f64(0) > 0.0);
        assert_eq!(unit_open_f64(u64::MAX), 1.0);
    }

    #[test]
    fn below_is_in_range_and_hits_all_values() {
        let mut rng = StreamRng::new(11, 0);
        let mut seen = [false; 7];
        for _ in 0..1000 {
            let v = rng.below(7);
            assert!(v < 7);
            seen[v as usize] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn range_is_inclusive() {
        let mut rng = StreamRng::new(1, 2);
        let (mut lo_hit, mut hi_hit) = (false, false);
        for _ in 0..2000 {
            let v = rng.range_i64(-3, 3);
            assert!((-3..=3).contains(&v));
            lo_hit |= v == -3;
            hi_hit |= v == 3;
        }
        assert!(lo_hit && hi_hit);
    }

    #[test]
    fn box_muller_looks_standard_normal() {
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let n = 20_000;
        for i in 0..n {
            let u1 = unit_open_f64(counter_u64(99, 0, i, 0));
            let u2 = unit_f64(counter_u64(99, 0, i, 1));
            let (g1, g2) = box_muller(u1, u2);
            assert!(g1.is_finite() && g2.is_finite());
            sum += g1 + g2;
            sumsq += g1 * g1 + g2 * g2;
        }
        let count = (2 * n) as f64;
        let mean = sum / count;
        let var = sumsq / count - mean * mean;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "var {var}");
    }
}
