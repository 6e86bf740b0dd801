use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream families. Each entity draws from its own ChaCha stream keyed by
/// the master seed, so adding nodes never shifts anyone else's draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamKind {
    Sensor = 1,
    Spot = 2,
    Lora = 3,
    Nvis = 4,
    NvisChannel = 5,
    Quantum = 6,
    Consensus = 7,
    Scenario = 8,
    Test = 99,
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn substream(seed: u64, kind: StreamKind, a: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = mix(mix(mix(kind as u64) ^ a) ^ b.rotate_left(17));
    rng.set_stream(id);
    rng
}
