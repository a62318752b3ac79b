//! Counter-based random numbers.
//!
//! Every random draw in the crate is a pure function of a key (the user seed)
//! and a counter (mode index, particle index, step, ...). Results therefore do
//! not depend on the order in which work is scheduled across threads.
//!
//! The generator is Philox4x32-10 (Salmon et al., SC'11).

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = (a as u64) * (b as u64);
    ((p >> 32) as u32, p as u32)
}

/// Philox4x32 with 10 rounds.
#[inline]
pub fn philox4x32(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, c[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// Stream of draws keyed by a 64-bit seed.
#[derive(Debug, Clone, Copy)]
pub struct CounterRng {
    key: [u32; 2],
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self {
            key: [seed as u32, (seed >> 32) as u32],
        }
    }

    /// Two 64-bit words for the counter `(a, b)`.
    #[inline]
    pub fn words(&self, a: u64, b: u64) -> [u64; 2] {
        let out = philox4x32([a as u32, (a >> 32) as u32, b as u32, (b >> 32) as u32], self.key);
        [
            (out[0] as u64) | ((out[1] as u64) << 32),
            (out[2] as u64) | ((out[3] as u64) << 32),
        ]
    }

    /// Two uniforms in the open-closed interval (0, 1].
    #[inline]
    pub fn uniforms(&self, a: u64, b: u64) -> [f64; 2] {
        let [w0, w1] = self.words(a, b);
        [to_unit(w0), to_unit(w1)]
    }

    /// Two independent standard normals (Box-Muller).
    #[inline]
    pub fn normals(&self, a: u64, b: u64) -> [f64; 2] {
        let [u1, u2] = self.uniforms(a, b);
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        [r * c, r * s]
    }
}

#[inline]
fn to_unit(w: u64) -> f64 {
    ((w >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Folds a list of small integers into one counter word.
#[inline]
pub fn pack_counter(parts: &[i64]) -> u64 {
    // splitmix64 finaliser chain; parts are signed wavenumbers, indices, ...
    let mut h: u64 = 0x243F_6A88_85A3_08D3;
    for &p in parts {
        h ^= p as u64;
        h = h.wrapping_add(0x9E37_79B9_7F4A_7C15);
        h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn philox_known_answers() {
        // Random123 kat_vectors, philox4x32_10.
        assert_eq!(
            philox4x32([0, 0, 0, 0], [0, 0]),
            [0x6627_e8d5, 0xe169_c58d, 0xbc57_ac4c, 0x9b00_dbd8]
        );
        assert_eq!(
            philox4x32([u32::MAX; 4], [u32::MAX; 2]),
            [0x408f_276d, 0x41c8_3b0e, 0xa20b_c7c6, 0x6d54_51fd]
        );
    }

    #[test]
    fn normals_have_unit_variance() {
        let rng = CounterRng::new(7);
        let n = 200_000u64;
        let (mut s, mut s2) = (0.0, 0.0);
        for i in 0..n {
            for z in rng.normals(i, 3) {
                s += z;
                s2 += z * z;
            }
        }
        let m = s / (2 * n) as f64;
        let v = s2 / (2 * n) as f64 - m * m;
        assert!(m.abs() < 0.01, "mean {m}");
        assert!((v - 1.0).abs() < 0.01, "var {v}");
    }

    #[test]
    fn uniforms_in_half_open_unit_interval() {
        let rng = CounterRng::new(1);
        for i in 0..10_000 {
            for u in rng.uniforms(i, 0) {
                assert!(u > 0.0 && u <= 1.0);
            }
        }
    }
}
