//! Counter-based random streams: every random draw in the pipeline is a
//! pure function of (seed, purpose, index), so results do not depend on
//! scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Permutation = 0x7065_726d_7574_6531,
    Bootstrap = 0x626f_6f74_7374_7261,
    BootstrapNull = 0x626f_6f74_6e75_6c6c,
    Simulation = 0x7369_6d75_6c61_7465,
    Benchmark = 0x6265_6e63_686d_6172,
}

/// ChaCha8 keyed by (seed, stream) and positioned on stream `index`.
pub fn keyed_rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(stream as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Derives an independent 64-bit sub-seed.
pub fn sub_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    use rand::RngCore;
    keyed_rng(seed, stream, index).next_u64()
}
