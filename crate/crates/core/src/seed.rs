//! Seed derivation so that independent random streams never share state.

/// SplitMix64 finalizer applied to `seed` combined with `stream`.
pub fn derive(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub mod stream {
    pub const TRACE: u64 = 1;
    pub const FLUSH: u64 = 2;
    pub const POLICY: u64 = 3;
    pub const REPLAY: u64 = 4;
    pub const DIP: u64 = 5;
}
