//! Monte Carlo plumbing shared by the sampling experiments: per-chunk ChaCha streams,
//! exact dyadic continued fractions and ordered mean / standard-error reduction.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::par::map_indexed;

pub const CHUNK: usize = 4096;

/// Stream `chunk` of the generator seeded by `seed`; independent of thread count.
pub fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Runs `f` once per sample, chunk-parallel, returning results in sample order.
pub fn sample<T, F>(samples: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync + Send,
{
    let chunks = samples.div_ceil(CHUNK);
    let parts = map_indexed(chunks, |c| {
        let mut rng = chunk_rng(seed, c);
        let len = CHUNK.min(samples - c * CHUNK);
        (0..len).map(|_| f(&mut rng)).collect::<Vec<T>>()
    });
    parts.into_iter().flatten().collect()
}

/// Sample mean and its standard error (n-1 denominator; 0 for fewer than two samples).
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let d = x - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (x - mean);
    }
    let n = v.len() as f64;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    (mean, libm::sqrt(m2 / (n - 1.0) / n))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarlo {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
    /// Bound on the truncation bias of the mean.
    pub tail_bound: f64,
}

pub const DYADIC_BITS: u32 = 127;

/// α = a / 2^127 with a uniform in [1, 2^127); exact partial quotients by Euclid.
#[derive(Clone, Copy, Debug)]
pub struct DyadicCf {
    prev: u128,
    cur: u128,
}

impl DyadicCf {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        loop {
            let a = rng.gen::<u128>() >> (128 - DYADIC_BITS);
            if a != 0 {
                return DyadicCf { prev: 1u128 << DYADIC_BITS, cur: a };
            }
        }
    }

    pub fn new(num: u128, den: u128) -> Self {
        DyadicCf { prev: den, cur: num }
    }

    /// Current point of the Gauss orbit.
    pub fn x(&self) -> f64 {
        self.cur as f64 / self.prev as f64
    }

    /// Next partial quotient, or None once the orbit reaches 0.
    pub fn next_quotient(&mut self) -> Option<u128> {
        if self.cur == 0 {
            return None;
        }
        let k = self.prev / self.cur;
        let r = self.prev % self.cur;
        self.prev = self.cur;
        self.cur = r;
        Some(k)
    }
}

/// Uniform double in (0,1) (never 0).
pub fn open01<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let x: f64 = rng.gen();
        if x > 0.0 {
            return x;
        }
    }
}
