use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Exp1, StandardUniform};

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// The generator is ChaCha12, keyed from `seed` and positioned on the
/// stream `stream_id`, so the output is identical on every platform and
/// distinct stream ids never overlap.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A standard exponential draw.
    pub fn exp1(&mut self) -> f64 {
        self.rng.sample(Exp1)
    }

    /// A uniform draw on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.sample(StandardUniform)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}
