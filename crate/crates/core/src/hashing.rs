//! Stable 64-bit FNV-1a. `std`'s hasher is not guaranteed stable across
//! releases, and embeddings and stub captions must be reproducible forever.

const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a(bytes: &[u8]) -> u64 {
    fnv1a_with_seed(0, bytes)
}

pub fn fnv1a_with_seed(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = OFFSET ^ seed.wrapping_mul(PRIME);
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(PRIME);
    }
    h
}
