//! Counter-based random streams.
//!
//! Every random quantity in the crate is a pure function of a master seed and
//! a small tuple of counters (trial, level, word, digit, ...). Nothing is
//! carried from one trial to the next, so trials can be evaluated in any order
//! or on any thread and still produce bit-identical results.

use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Domain labels keep streams used for different purposes disjoint.
pub mod domain {
    pub const BONDS: u64 = 0x626f_6e64;
    pub const NU: u64 = 0x6e75_7361;
    pub const SEQUENCE: u64 = 0x7365_7175;
    pub const INDEX: u64 = 0x696e_6478;
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key of one random stream. `at(counter)` is random access into the stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(master_seed: u64, stream: u64) -> Self {
        let base = mix64(master_seed ^ 0xD134_2543_DE82_EF95);
        StreamKey(mix64(base.wrapping_add(mix64(stream.wrapping_add(GOLDEN_GAMMA)))))
    }

    /// Independent sub-stream identified by `label`.
    #[inline]
    pub fn child(self, label: u64) -> Self {
        StreamKey(mix64(self.0 ^ mix64(label.wrapping_mul(GOLDEN_GAMMA) ^ 0x94D0_49BB_1331_11EB)))
    }

    #[inline]
    pub fn at(self, counter: u64) -> u64 {
        mix64(self.0.wrapping_add(counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Sequential generator for samplers that want an `Rng`.
    pub fn rng(self) -> Pcg64Mcg {
        let lo = self.at(0) as u128;
        let hi = self.at(1) as u128;
        Pcg64Mcg::from_seed(((hi << 64) | lo).to_le_bytes())
    }

    pub fn raw(self) -> u64 {
        self.0
    }
}

/// Fixed-point form of a Bernoulli parameter: `u < p` becomes `u < threshold / 2^64`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Threshold {
    Never,
    Always,
    Below(u64),
}

impl Threshold {
    pub fn from_probability(p: f64) -> Self {
        if p <= 0.0 {
            Threshold::Never
        } else if p >= 1.0 {
            Threshold::Always
        } else {
            // p * 2^64 < 2^64 for p < 1, and the cast truncates toward zero.
            match (p * 18_446_744_073_709_551_616.0) as u64 {
                0 => Threshold::Never,
                t => Threshold::Below(t),
            }
        }
    }
}

/// 64 independent Bernoulli bits, bit-sliced.
///
/// Each lane compares a uniform `u = 0.u_0 u_1 u_2 ...` against the binary
/// expansion of the threshold, one digit word at a time; `digit(i)` supplies
/// the i-th digit of all 64 uniforms. A lane is settled at the first digit
/// where the two expansions differ. Only as many digit words are drawn as it
/// takes to settle every lane, about eight on average. Because the uniforms
/// depend only on the digit stream, bits drawn for `p1 <= p2` from the same
/// stream are nested.
#[inline]
pub fn bernoulli_word(threshold: Threshold, mut digit: impl FnMut(u32) -> u64) -> u64 {
    let t = match threshold {
        Threshold::Never => return 0,
        Threshold::Always => return !0,
        Threshold::Below(t) => t,
    };
    let mut result = 0u64;
    let mut undecided = !0u64;
    for i in 0..64u32 {
        let r = digit(i);
        if (t >> (63 - i)) & 1 == 1 {
            result |= undecided & !r;
            undecided &= r;
        } else {
            undecided &= !r;
        }
        // Past the last set digit of the threshold every undecided lane has u >= t.
        if undecided == 0 || t << i << 1 == 0 {
            break;
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let a = StreamKey::new(42, 7);
        assert_eq!(a.at(3), StreamKey::new(42, 7).at(3));
        assert_ne!(a.at(3), StreamKey::new(42, 8).at(3));
        assert_ne!(a.at(3), StreamKey::new(43, 7).at(3));
        assert_ne!(a.child(1).at(0), a.child(2).at(0));
    }

    #[test]
    fn threshold_edges() {
        assert_eq!(Threshold::from_probability(0.0), Threshold::Never);
        assert_eq!(Threshold::from_probability(1.0), Threshold::Always);
        assert_eq!(Threshold::from_probability(0.5), Threshold::Below(1 << 63));
        assert_eq!(bernoulli_word(Threshold::Always, |_| 0), !0);
        assert_eq!(bernoulli_word(Threshold::Never, |_| !0), 0);
    }

    #[test]
    fn half_uses_one_digit() {
        let mut calls = 0;
        let w = bernoulli_word(Threshold::Below(1 << 63), |_| {
            calls += 1;
            0xF0F0_F0F0_0000_FFFF
        });
        assert_eq!(calls, 1);
        assert_eq!(w, !0xF0F0_F0F0_0000_FFFF);
    }

    #[test]
    fn matches_scalar_comparison() {
        // Against the plain per-lane comparison u < t on the same 64-bit uniforms.
        let key = StreamKey::new(1, 2);
        for &p in &[0.1, 0.3, 0.5, 0.64, 0.8, 0.999] {
            let t = match Threshold::from_probability(p) {
                Threshold::Below(t) => t,
                _ => unreachable!(),
            };
            for w in 0..50u64 {
                let digits: Vec<u64> = (0..64).map(|i| key.at(w * 64 + i)).collect();
                let got = bernoulli_word(Threshold::Below(t), |i| digits[i as usize]);
                for lane in 0..64 {
                    let u = (0..64).fold(0u64, |acc, i| (acc << 1) | ((digits[i] >> lane) & 1));
                    assert_eq!((got >> lane) & 1 == 1, u < t, "p={p} word={w} lane={lane}");
                }
            }
        }
    }

    #[test]
    fn nested_in_probability() {
        let key = StreamKey::new(9, 9);
        for w in 0..200u64 {
            let lo = bernoulli_word(Threshold::from_probability(0.55), |i| key.at(w * 64 + i as u64));
            let hi = bernoulli_word(Threshold::from_probability(0.8), |i| key.at(w * 64 + i as u64));
            assert_eq!(lo & !hi, 0);
        }
    }

    #[test]
    fn marginal_frequency() {
        let key = StreamKey::new(5, 0);
        let p = 0.8;
        let words = 20_000u64;
        let ones: u64 = (0..words)
            .map(|w| {
                bernoulli_word(Threshold::from_probability(p), |i| key.at(w * 64 + i as u64)).count_ones() as u64
            })
            .sum();
        let n = (words * 64) as f64;
        let freq = ones as f64 / n;
        let se = (p * (1.0 - p) / n).sqrt();
        assert!((freq - p).abs() < 4.0 * se, "freq {freq}");
    }
}
