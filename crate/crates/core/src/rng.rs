//! Counter-addressed Gaussian streams.
//!
//! Every draw is a pure function of `(base_seed, namespace, replication,
//! block, position)`. The key is derived from `base_seed` and the namespace,
//! the ChaCha stream id is the replication index and the word position is
//! `block * words_per_block`, so any block of any replication can be
//! regenerated without touching the others.
//!
//! Normals use the Box-Muller transform on pairs of 53-bit uniforms in
//! `(0, 1]`. Each pair consumes exactly four 32-bit words, which keeps the
//! word accounting per block fixed.

use core::f64::consts::PI;

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use rand_core::{Rng, SeedableRng};

use crate::noise::SeedSpec;

/// Independent families of streams sharing one base seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Namespace {
    /// White-noise increments driving the finite-difference solver.
    Noise,
    /// Per-mode Brownian increments of the spectral oracle.
    Oracle,
    /// Random spot checks of coefficient sets.
    CoefficientCheck,
}

impl Namespace {
    fn tag(self) -> u64 {
        match self {
            Namespace::Noise => 0x6e6f_6973_6500_0001,
            Namespace::Oracle => 0x6f72_6163_6c65_0002,
            Namespace::CoefficientCheck => 0x636f_6566_6600_0003,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn derive_key(base_seed: u64, namespace: Namespace) -> [u8; 32] {
    let mut state = base_seed ^ namespace.tag();
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Number of 32-bit words consumed by `count` normals.
pub fn words_for_normals(count: usize) -> u128 {
    4 * count.div_ceil(2) as u128
}

#[inline]
fn open_unit(bits: u64) -> f64 {
    // (0, 1]: never zero, so the logarithm below is finite.
    ((bits >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
}

/// Standard-normal generator positioned inside a replication's stream.
#[derive(Clone, Debug)]
pub struct GaussianStream {
    rng: ChaCha8Rng,
}

impl GaussianStream {
    /// Stream for `seed` in `namespace`, positioned at its start.
    pub fn new(seed: SeedSpec, namespace: Namespace) -> Self {
        let mut rng = ChaCha8Rng::from_seed(derive_key(seed.base_seed, namespace));
        rng.set_stream(seed.replication);
        Self { rng }
    }

    /// Stream positioned at the start of block `block`, where every block
    /// holds `block_len` normals.
    pub fn at_block(seed: SeedSpec, namespace: Namespace, block_len: usize, block: u64) -> Self {
        let mut stream = Self::new(seed, namespace);
        stream.seek_block(block_len, block);
        stream
    }

    pub fn seek_block(&mut self, block_len: usize, block: u64) {
        self.rng
            .set_word_pos(words_for_normals(block_len) * u128::from(block));
    }

    /// Fills `out` with independent standard normals. An odd trailing slot
    /// discards the second member of its pair.
    pub fn fill(&mut self, out: &mut [f64]) {
        let mut pairs = out.chunks_exact_mut(2);
        for pair in &mut pairs {
            let (a, b) = self.pair();
            pair[0] = a;
            pair[1] = b;
        }
        if let [last] = pairs.into_remainder() {
            *last = self.pair().0;
        }
    }

    /// Fills `out` with normals scaled by `scale`.
    pub fn fill_scaled(&mut self, out: &mut [f64], scale: f64) {
        self.fill(out);
        for v in out.iter_mut() {
            *v *= scale;
        }
    }

    /// Uniform variate in `(0, 1]`.
    pub fn uniform(&mut self) -> f64 {
        open_unit(self.rng.next_u64())
    }

    #[inline]
    fn pair(&mut self) -> (f64, f64) {
        let u1 = open_unit(self.rng.next_u64());
        let u2 = open_unit(self.rng.next_u64());
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        (r * c, r * s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn block_seek_matches_sequential_draws() {
        let seed = SeedSpec::new(7, 3);
        let len = 5;
        let mut seq = GaussianStream::new(seed, Namespace::Noise);
        let mut blocks = vec![vec![0.0; len]; 4];
        for b in blocks.iter_mut() {
            seq.fill(b);
        }
        for (i, b) in blocks.iter().enumerate() {
            let mut direct = vec![0.0; len];
            GaussianStream::at_block(seed, Namespace::Noise, len, i as u64).fill(&mut direct);
            assert_eq!(&direct, b);
        }
    }

    #[test]
    fn namespaces_and_replications_differ() {
        let draw = |seed, ns| {
            let mut v = [0.0; 4];
            GaussianStream::new(seed, ns).fill(&mut v);
            v
        };
        let a = draw(SeedSpec::new(1, 0), Namespace::Noise);
        assert_ne!(a, draw(SeedSpec::new(1, 1), Namespace::Noise));
        assert_ne!(a, draw(SeedSpec::new(1, 0), Namespace::Oracle));
        assert_ne!(a, draw(SeedSpec::new(2, 0), Namespace::Noise));
        assert_eq!(a, draw(SeedSpec::new(1, 0), Namespace::Noise));
    }

    #[test]
    fn standard_normal_moments() {
        let mut s = GaussianStream::new(SeedSpec::new(99, 0), Namespace::Noise);
        let mut v = vec![0.0; 200_000];
        s.fill(&mut v);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        let kurt = v.iter().map(|x| x.powi(4)).sum::<f64>() / n;
        assert!(mean.abs() < 4.0 / n.sqrt());
        assert!((var - 1.0).abs() < 4.0 * (2.0 / n).sqrt());
        assert!((kurt - 3.0).abs() < 4.0 * (96.0 / n).sqrt());
    }
}
