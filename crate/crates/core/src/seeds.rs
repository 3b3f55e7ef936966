//! Deterministic seed derivation.
//!
//! Every stochastic decision in the engine is a pure function of a seed
//! derived here, so parallel completion order can never change results and
//! reruns with the same run seed are byte-identical. FNV-1a is used instead
//! of the std hasher because its output is pinned across platforms and
//! toolchain versions.

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x00000100000001b3;

/// FNV-1a over an arbitrary byte stream.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn mix(h: u64, bytes: &[u8]) -> u64 {
    let mut h = h;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    // 0x00 separator keeps ("ab","c") distinct from ("a","bc").
    h ^= 0;
    h.wrapping_mul(FNV_PRIME)
}

/// Seed for one evaluation cell, derived from the run seed, the problem id,
/// and the repeat index.
pub fn cell_seed(run_seed: u64, problem_id: &str, repeat: u32) -> u64 {
    let mut h = mix(FNV_OFFSET, &run_seed.to_le_bytes());
    h = mix(h, problem_id.as_bytes());
    h = mix(h, b"cell");
    mix(h, &repeat.to_le_bytes())
}

/// Seed for one model call, derived from the run (or cell) seed, the problem
/// id, and the call coordinates.
pub fn call_seed(run_seed: u64, problem_id: &str, round: u32, branch: u32, kind_tag: &str) -> u64 {
    let mut h = mix(FNV_OFFSET, &run_seed.to_le_bytes());
    h = mix(h, problem_id.as_bytes());
    h = mix(h, &round.to_le_bytes());
    h = mix(h, &branch.to_le_bytes());
    mix(h, kind_tag.as_bytes())
}

/// Derives an independent stream from a seed using a short tag.
pub fn substream(seed: u64, tag: &str) -> u64 {
    mix(mix(FNV_OFFSET, &seed.to_le_bytes()), tag.as_bytes())
}

/// Maps a seed to the unit interval [0, 1).
pub fn unit(seed: u64) -> f64 {
    // splitmix64 finalizer decorrelates consecutive FNV outputs.
    let mut z = seed.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}
