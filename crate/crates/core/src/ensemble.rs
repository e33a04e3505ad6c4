//! Seeded, scheduling-independent ensemble helpers.
//!
//! Every ensemble member draws from its own ChaCha stream selected by its
//! index, so results do not depend on how rayon distributes the work.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Number of members summed sequentially before the pairwise reduction.
const CHUNK: usize = 32;

/// Stream `index` of the generator seeded by `master`.
pub fn member_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Derives a sub-seed for a named stage of a pipeline.
pub fn derive_seed(master: u64, stage: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = master ^ stage.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Evaluates `f(index, rng)` for every member and returns results in index order.
pub fn map_members<T, F>(master: u64, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> T + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = member_rng(master, i as u64);
            f(i, &mut rng)
        })
        .collect()
}

/// Element-wise accumulator for per-member vectors of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
}

impl Moments {
    pub fn zeros(len: usize) -> Self {
        Moments { n: 0, sum: vec![0.0; len], sum_sq: vec![0.0; len] }
    }

    pub fn push(&mut self, values: &[f64]) {
        self.n += 1;
        for ((s, q), v) in self.sum.iter_mut().zip(&mut self.sum_sq).zip(values) {
            *s += v;
            *q += v * v;
        }
    }

    fn merge(mut self, other: &Moments) -> Self {
        self.n += other.n;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
        self
    }

    pub fn mean(&self) -> Vec<f64> {
        self.sum.iter().map(|s| s / self.n as f64).collect()
    }

    /// Standard error of the mean (sample standard deviation / √n).
    pub fn stderr(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(s, q)| {
                if self.n < 2 {
                    return 0.0;
                }
                let mean = s / n;
                let var = ((q - n * mean * mean) / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            })
            .collect()
    }
}

/// Accumulates per-member vectors with a fixed chunking and a pairwise tree
/// reduction, so the floating-point result is independent of thread count.
pub fn accumulate_members<F>(master: u64, n: usize, len: usize, f: F) -> Moments
where
    F: Fn(usize, &mut ChaCha8Rng) -> Vec<f64> + Sync + Send,
{
    let chunks: Vec<Moments> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = Moments::zeros(len);
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let mut rng = member_rng(master, i as u64);
                acc.push(&f(i, &mut rng));
            }
            acc
        })
        .collect();
    pairwise(chunks, len)
}

fn pairwise(mut level: Vec<Moments>, len: usize) -> Moments {
    if level.is_empty() {
        return Moments::zeros(len);
    }
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        let mut it = level.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a.merge(&b)),
                None => next.push(a),
            }
        }
        level = next;
    }
    level.pop().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = member_rng(7, 3).random();
        let b: u64 = member_rng(7, 3).random();
        let c: u64 = member_rng(7, 4).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn accumulation_is_independent_of_pool_size() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
                accumulate_members(11, 1000, 3, |i, rng| {
                    vec![rng.random::<f64>(), i as f64, rng.random::<f64>().powi(2)]
                })
            })
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn moments_match_direct_computation() {
        let mut m = Moments::zeros(1);
        for v in [1.0, 2.0, 3.0, 4.0] {
            m.push(&[v]);
        }
        assert_eq!(m.mean(), vec![2.5]);
        let var = (1.5f64.powi(2) * 2.0 + 0.5f64.powi(2) * 2.0) / 3.0;
        assert!((m.stderr()[0] - (var / 4.0).sqrt()).abs() < 1e-15);
    }
}
