//! Deterministic, seedable random source.
//!
//! xoshiro256** seeded through SplitMix64. The stream depends only on the
//! seed, never on the platform. Substreams created with [`RandomSource::fork`]
//! are keyed by `(seed, label)` so the parent's position does not matter.

use crate::error::{CoreError, Result};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

// FNV-1a
fn hash_label(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Single-owner pseudo-random stream. Not `Clone` on purpose: parallel
/// consumers each take a [`fork`](RandomSource::fork).
#[derive(Debug)]
pub struct RandomSource {
    seed: u64,
    s: [u64; 4],
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        RandomSource { seed, s }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent substream keyed by `(seed, label)`; `self` is not advanced.
    pub fn fork(&self, label: &str) -> RandomSource {
        let mut sm = self.seed ^ hash_label(label).rotate_left(17);
        let derived = splitmix64(&mut sm) ^ hash_label(label);
        RandomSource::new(derived)
    }

    /// Substream keyed by an index, for per-scene or per-worker streams.
    pub fn fork_indexed(&self, label: &str, index: u64) -> RandomSource {
        let mut sm = self.fork(label).seed.wrapping_add(index.wrapping_mul(GOLDEN_GAMMA));
        RandomSource::new(splitmix64(&mut sm))
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform 1-based index in `1..=n`, exact via rejection of the biased zone.
    pub fn uniform_index(&mut self, n: usize) -> Result<usize> {
        if n == 0 {
            return Err(CoreError::invalid("uniform_index needs n >= 1"));
        }
        let n64 = n as u64;
        // 2^64 mod n: draws below this are rejected so the rest split evenly.
        let threshold = n64.wrapping_neg() % n64;
        loop {
            let x = self.next_u64();
            if x >= threshold {
                return Ok((x % n64) as usize + 1);
            }
        }
    }

    /// Uniform real in `[lo, hi)`.
    pub fn uniform_real(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(CoreError::invalid(format!(
                "uniform_real needs finite lo < hi, got [{lo}, {hi})"
            )));
        }
        loop {
            let v = lo + (hi - lo) * self.next_f64();
            if v < hi {
                return Ok(v);
            }
        }
    }

    /// Standard normal draw (Box-Muller, one value per call).
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.uniform_index(i + 1).expect("i + 1 >= 1") - 1;
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn freq(seed: u64, n: usize, draws: usize) -> Vec<f64> {
        let mut src = RandomSource::new(seed);
        let mut counts = vec![0usize; n];
        for _ in 0..draws {
            counts[src.uniform_index(n).unwrap() - 1] += 1;
        }
        counts.into_iter().map(|c| c as f64 / draws as f64).collect()
    }

    #[test]
    fn single_element_range() {
        let mut src = RandomSource::new(7);
        for _ in 0..100 {
            assert_eq!(src.uniform_index(1).unwrap(), 1);
        }
    }

    #[test]
    fn zero_range_is_rejected() {
        let mut src = RandomSource::new(7);
        assert!(matches!(src.uniform_index(0), Err(CoreError::InvalidArgument(_))));
    }

    #[test]
    fn eight_way_frequencies_within_bound() {
        // p = 1/8, 100k draws: sigma = sqrt(p(1-p)/N) ~ 0.001046, 6 sigma ~ 0.0063.
        for f in freq(11, 8, 100_000) {
            assert!((0.105..=0.145).contains(&f), "{f}");
        }
    }

    #[test]
    fn chi_square_bound_for_small_ranges() {
        let draws = 100_000;
        for n in [2usize, 5, 8, 9] {
            let p = 1.0 / n as f64;
            let sigma = (p * (1.0 - p) / draws as f64).sqrt();
            for f in freq(99 + n as u64, n, draws) {
                assert!((f - p).abs() <= 6.0 * sigma, "n={n} f={f}");
            }
        }
    }

    #[test]
    fn golden_triple_seed_42() {
        let mut src = RandomSource::new(42);
        let triple: Vec<usize> = (0..3).map(|_| src.uniform_index(5).unwrap()).collect();
        assert_eq!(triple, GOLDEN_SEED42_N5);
    }

    // Frozen at first implementation.
    const GOLDEN_SEED42_N5: [usize; 3] = [3, 3, 5];

    #[test]
    fn uniform_real_mean_and_range() {
        let mut src = RandomSource::new(5);
        let draws = 100_000;
        let mut sum = 0.0;
        for _ in 0..draws {
            let v = src.uniform_real(0.0, 1.0).unwrap();
            assert!((0.0..1.0).contains(&v));
            sum += v;
        }
        assert!((sum / draws as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn uniform_real_rejects_bad_range() {
        let mut src = RandomSource::new(5);
        assert!(src.uniform_real(1.0, 1.0).is_err());
        assert!(src.uniform_real(2.0, 1.0).is_err());
        assert!(src.uniform_real(f64::NAN, 1.0).is_err());
        let hi = 1.0;
        assert!(src.uniform_real(hi - f64::EPSILON, hi).is_ok());
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = RandomSource::new(1234);
        let mut b = RandomSource::new(1234);
        for _ in 0..1000 {
            assert_eq!(
                a.uniform_real(-3.0, 3.0).unwrap().to_bits(),
                b.uniform_real(-3.0, 3.0).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn forks_are_keyed_by_label() {
        let mut parent = RandomSource::new(77);
        let mut twd = parent.fork("twd");
        let mut init = parent.fork("init");
        let a: Vec<u64> = (0..8).map(|_| twd.next_u64()).collect();
        let b: Vec<u64> = (0..8).map(|_| init.next_u64()).collect();
        assert_ne!(a, b);

        // Advancing the parent does not change what a fork produces.
        parent.next_u64();
        let mut again = parent.fork("twd");
        let c: Vec<u64> = (0..8).map(|_| again.next_u64()).collect();
        assert_eq!(a, c);
    }

    #[test]
    fn forks_are_uncorrelated() {
        let parent = RandomSource::new(2024);
        let mut a = parent.fork("a");
        let mut b = parent.fork("b");
        let n = 10_000;
        let xs: Vec<f64> = (0..n).map(|_| a.next_f64()).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.next_f64()).collect();
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = ys.iter().sum::<f64>() / n as f64;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (x, y) in xs.iter().zip(&ys) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx).powi(2);
            syy += (y - my).powi(2);
        }
        let r = sxy / (sxx * syy).sqrt();
        assert!(r.abs() < 0.02, "correlation {r}");
    }

    #[test]
    fn normal_moments() {
        let mut src = RandomSource::new(3);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| src.standard_normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.02);
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut src = RandomSource::new(8);
        let mut v: Vec<usize> = (0..50).collect();
        src.shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        assert_ne!(v, sorted);
    }
}
