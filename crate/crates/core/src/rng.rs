//! One experiment seed, many independent generators.
//!
//! Every randomized stage draws from its own ChaCha stream of the run seed,
//! so changing, say, the noise realization never perturbs the minibatch
//! order of the solver.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub mod streams {
    pub const BLOBS: u64 = 0;
    pub const NOISE: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const SOLVER: u64 = 3;
    pub const GROUPS: u64 = 4;
    pub const SGD: u64 = 5;
}

pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
