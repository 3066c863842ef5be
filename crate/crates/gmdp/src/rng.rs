//! Deterministic, splittable random number streams.
//!
//! All sampling in the crate goes through a [`SeedStream`]: one root seed,
//! split into independent counter-based streams. Parallel and serial
//! executions of the same workload draw from the same per-stream sequences,
//! so results are reproducible independent of thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::Col;

pub type StreamRng = ChaCha12Rng;

/// Root seed that hands out independent streams by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStream {
    root: u64,
}

impl SeedStream {
    pub fn new(root: u64) -> Self {
        Self { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    /// Independent stream `idx` of the root seed.
    pub fn stream(&self, idx: u64) -> StreamRng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.root);
        rng.set_stream(idx);
        rng
    }

    /// Child seed for a named sub-component, so nested splits stay disjoint.
    pub fn child(&self, tag: u64) -> SeedStream {
        // splitmix64 step keeps children decorrelated from raw stream indices
        let mut z = self.root.wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        SeedStream::new(z ^ (z >> 31))
    }
}

pub fn standard_normal(rng: &mut StreamRng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn standard_normal_vec(rng: &mut StreamRng, n: usize) -> Col {
    Col::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Uniform point on the unit sphere in `n` dimensions.
pub fn unit_sphere(rng: &mut StreamRng, n: usize) -> Col {
    loop {
        let v = standard_normal_vec(rng, n);
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}
