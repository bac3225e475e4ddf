//! Bit-interleaved packing of `n` per-process values into one unbounded
//! integer. Bit `b` (least significant first) belongs to process `b mod n`.
//!
//! Two layouts share the word format. The unary layout stores process
//! `i`'s running maximum `K` as ones at positions `v*n + i` for
//! `v = 1..=K`; position `0*n + i` is never used. The binary layout stores
//! bit `j` of process `i`'s value at position `j*n + i`.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// A packed word together with the process count it was packed for.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct InterleavedWord {
    pub raw: BigUint,
    pub n: usize,
}

impl InterleavedWord {
    pub fn new(raw: BigUint, n: usize) -> Self {
        InterleavedWord { raw, n }
    }

    /// Interprets a fetch&add register state; negative states are corrupt.
    pub fn from_state(state: &BigInt, n: usize) -> Result<Self> {
        state
            .to_biguint()
            .map(|raw| InterleavedWord { raw, n })
            .ok_or_else(|| Error::Integrity(format!("negative packed word {state}")))
    }

    fn field_bits(&self, i: usize) -> impl Iterator<Item = bool> + '_ {
        let len = self.raw.bits();
        (0..)
            .map(move |j: u64| j * self.n as u64 + i as u64)
            .take_while(move |&pos| pos < len)
            .map(move |pos| self.raw.bit(pos))
    }
}

fn bit(pos: u64) -> BigInt {
    BigInt::one() << pos
}

fn check_proc(n: usize, i: usize) -> Result<()> {
    if n == 0 || i >= n {
        return Err(Error::Precondition(format!("process {i} out of range for n = {n}")));
    }
    Ok(())
}

/// Amount to add so that process `i`'s unary field grows from `prev` to `k`.
pub fn unary_delta(n: usize, i: usize, prev: u64, k: u64) -> Result<BigInt> {
    check_proc(n, i)?;
    if k <= prev {
        return Err(Error::Precondition(format!("unary delta needs K > prevLocalMax, got K = {k}, prev = {prev}")));
    }
    Ok((prev + 1..=k).map(|v| bit(v * n as u64 + i as u64)).sum())
}

/// Per-process maxima of a unary word.
pub fn decode_unary_max(word: &InterleavedWord) -> Result<Vec<u64>> {
    check_proc(word.n, 0)?;
    (0..word.n)
        .map(|i| {
            let mut bits = word.field_bits(i);
            if bits.next() == Some(true) {
                return Err(Error::Integrity(format!("unary field {i} uses position 0")));
            }
            let mut max = 0u64;
            let mut gap = false;
            for (v, set) in bits.enumerate() {
                match (set, gap) {
                    (true, true) => return Err(Error::Integrity(format!("unary field {i} is not contiguous"))),
                    (true, false) => max = v as u64 + 1,
                    (false, _) => gap = true,
                }
            }
            Ok(max)
        })
        .collect()
}

/// `(posAdj, negAdj)` moving process `i`'s binary field from `prev` to `v`.
pub fn binary_adjust(n: usize, i: usize, prev: u64, v: u64) -> Result<(BigInt, BigInt)> {
    check_proc(n, i)?;
    if v == prev {
        return Err(Error::Precondition(format!("binary adjust needs v != prevVal, both {v}")));
    }
    let width = 64 - (prev | v).leading_zeros() as u64;
    let mut pos = BigInt::zero();
    let mut neg = BigInt::zero();
    for j in 0..width {
        let place = bit(j * n as u64 + i as u64);
        match ((v >> j) & 1, (prev >> j) & 1) {
            (1, 0) => pos += place,
            (0, 1) => neg += place,
            _ => {}
        }
    }
    Ok((pos, neg))
}

/// Per-process values of a binary word.
pub fn decode_binary_view(word: &InterleavedWord) -> Vec<BigUint> {
    (0..word.n)
        .map(|i| {
            word.field_bits(i)
                .enumerate()
                .filter(|(_, set)| *set)
                .fold(BigUint::zero(), |acc, (j, _)| acc | (BigUint::one() << j))
        })
        .collect()
}

/// Packs a full binary view; the inverse of [`decode_binary_view`].
pub fn encode_binary_view(values: &[u64]) -> InterleavedWord {
    let n = values.len();
    let mut raw = BigUint::zero();
    for (i, &v) in values.iter().enumerate() {
        for j in 0..64 {
            if (v >> j) & 1 == 1 {
                raw.set_bit(j * n as u64 + i as u64, true);
            }
        }
    }
    InterleavedWord { raw, n }
}

/// Outcome of [`exhaustive_check`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CodecReport {
    pub cases: usize,
    pub failures: Vec<String>,
}

/// Brute-forces both layouts for every `n <= max_n` and every
/// `(prev, v)` pair below `bound`: round trips, and that an update of one
/// process touches only its own bit positions and leaves every other
/// field unchanged.
pub fn exhaustive_check(max_n: usize, bound: u64) -> CodecReport {
    let mut report = CodecReport::default();
    let fail = |report: &mut CodecReport, msg: String| report.failures.push(msg);
    for n in 1..=max_n {
        // Round trip of every view.
        let views = (bound as usize).pow(n as u32);
        for code in 0..views {
            let view: Vec<u64> = (0..n).map(|i| (code / (bound as usize).pow(i as u32)) as u64 % bound).collect();
            report.cases += 1;
            let w = encode_binary_view(&view);
            let back: Vec<u64> =
                decode_binary_view(&w).iter().map(|v| v.iter_u64_digits().next().unwrap_or(0)).collect();
            if back != view {
                fail(&mut report, format!("binary roundtrip n={n} view={view:?} got {back:?}"));
            }
        }
        for i in 0..n {
            // Other processes hold a fixed non-trivial background.
            let others: Vec<u64> = (0..n).map(|j| if j == i { 0 } else { (j as u64 * 3 + 1) % bound }).collect();
            for prev in 0..bound {
                for v in 0..bound {
                    if v == prev {
                        continue;
                    }
                    report.cases += 1;
                    let Ok((pos, neg)) = binary_adjust(n, i, prev, v) else {
                        fail(&mut report, format!("binary_adjust rejected n={n} i={i} {prev}->{v}"));
                        continue;
                    };
                    for adj in [&pos, &neg] {
                        let bits = adj.magnitude();
                        if (0..bits.bits()).any(|b| bits.bit(b) && b % n as u64 != i as u64) {
                            fail(&mut report, format!("binary adj touches foreign bit n={n} i={i} {prev}->{v}"));
                        }
                    }
                    let mut before = others.clone();
                    before[i] = prev;
                    let mut after = others.clone();
                    after[i] = v;
                    let raw = BigInt::from(encode_binary_view(&before).raw) + pos - neg;
                    let decoded = InterleavedWord::from_state(&raw, n)
                        .map(|w| decode_binary_view(&w))
                        .map(|d| d.iter().map(|x| x.iter_u64_digits().next().unwrap_or(0)).collect::<Vec<_>>());
                    if decoded.as_ref().ok() != Some(&after) {
                        fail(&mut report, format!("binary update n={n} i={i} {prev}->{v} gave {decoded:?}"));
                    }
                    if v > prev {
                        report.cases += 1;
                        let Ok(delta) = unary_delta(n, i, prev, v) else {
                            fail(&mut report, format!("unary_delta rejected n={n} i={i} {prev}->{v}"));
                            continue;
                        };
                        let bits = delta.magnitude();
                        if (0..bits.bits()).any(|b| bits.bit(b) && b % n as u64 != i as u64) {
                            fail(&mut report, format!("unary delta touches foreign bit n={n} i={i} {prev}->{v}"));
                        }
                        let mut raw = BigInt::zero();
                        for (j, &m) in before.iter().enumerate() {
                            if m > 0 {
                                raw += unary_delta(n, j, 0, m).unwrap_or_default();
                            }
                        }
                        raw += delta;
                        let decoded = InterleavedWord::from_state(&raw, n).and_then(|w| decode_unary_max(&w));
                        if decoded.as_ref().ok() != Some(&after) {
                            fail(&mut report, format!("unary update n={n} i={i} {prev}->{v} gave {decoded:?}"));
                        }
                    }
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn word(raw: u64, n: usize) -> InterleavedWord {
        InterleavedWord::new(BigUint::from(raw), n)
    }

    #[test]
    fn unary_delta_examples() {
        assert_eq!(unary_delta(2, 0, 0, 2).unwrap(), BigInt::from(20));
        assert_eq!(unary_delta(2, 1, 1, 2).unwrap(), BigInt::from(32));
        assert_eq!(unary_delta(3, 2, 0, 1).unwrap(), BigInt::from(32));
        assert!(matches!(unary_delta(2, 0, 2, 2), Err(Error::Precondition(_))));
    }

    #[test]
    fn unary_decode_examples() {
        assert_eq!(decode_unary_max(&word(0, 3)).unwrap(), vec![0, 0, 0]);
        assert_eq!(decode_unary_max(&word(20, 2)).unwrap(), vec![2, 0]);
        // p0 at 2 (bits 2, 4), p1 at 1 (bit 3)
        assert_eq!(decode_unary_max(&word(28, 2)).unwrap(), vec![2, 1]);
        // bit 5 alone is p1's value 2 without value 1
        assert!(matches!(decode_unary_max(&word(52, 2)), Err(Error::Integrity(_))));
    }

    #[test]
    fn unary_decode_rejects_gaps_and_position_zero() {
        // p0 bits at values 1 and 3 but not 2
        assert!(matches!(decode_unary_max(&word(4 + 64, 2)), Err(Error::Integrity(_))));
        assert!(matches!(decode_unary_max(&word(1, 2)), Err(Error::Integrity(_))));
    }

    #[test]
    fn binary_adjust_examples() {
        let pair = |n, i, p, v| {
            let (a, b) = binary_adjust(n, i, p, v).unwrap();
            (a, b)
        };
        assert_eq!(pair(2, 1, 1, 2), (BigInt::from(8), BigInt::from(2)));
        assert_eq!(pair(2, 0, 0, 3), (BigInt::from(5), BigInt::from(0)));
        assert_eq!(pair(3, 0, 2, 1), (BigInt::from(1), BigInt::from(8)));
        assert!(matches!(binary_adjust(2, 0, 1, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn binary_decode_examples() {
        assert_eq!(decode_binary_view(&word(0, 2)), vec![BigUint::zero(); 2]);
        let (pos, neg) = binary_adjust(2, 0, 0, 3).unwrap();
        let raw = (pos - neg).to_biguint().unwrap();
        let view = decode_binary_view(&InterleavedWord::new(raw, 2));
        assert_eq!(view, vec![BigUint::from(3u8), BigUint::zero()]);
    }

    #[test]
    fn exhaustive_small_domain() {
        let report = exhaustive_check(4, 8);
        assert!(report.failures.is_empty(), "{:?}", &report.failures[..report.failures.len().min(5)]);
        assert!(report.cases > 0);
    }

    proptest! {
        #[test]
        fn unary_fields_accumulate_independently(
            n in 1usize..=4,
            writes in proptest::collection::vec((0usize..4, 1u64..8), 0..12),
        ) {
            let mut raw = BigInt::zero();
            let mut maxima = vec![0u64; n];
            for (i, k) in writes {
                let i = i % n;
                if k > maxima[i] {
                    raw += unary_delta(n, i, maxima[i], k).unwrap();
                    maxima[i] = k;
                }
            }
            let w = InterleavedWord::from_state(&raw, n).unwrap();
            prop_assert_eq!(decode_unary_max(&w).unwrap(), maxima);
        }

        #[test]
        fn binary_updates_in_any_order_sum(
            n in 1usize..=4,
            updates in proptest::collection::vec((0usize..4, 0u64..256), 0..12),
        ) {
            let mut view = vec![0u64; n];
            let mut deltas = Vec::new();
            for (i, v) in updates {
                let i = i % n;
                if v != view[i] {
                    let (pos, neg) = binary_adjust(n, i, view[i], v).unwrap();
                    deltas.push(pos - neg);
                    view[i] = v;
                }
            }
            // addition commutes, so apply the deltas in reverse
            let raw: BigInt = deltas.iter().rev().sum();
            let w = InterleavedWord::from_state(&raw, n).unwrap();
            let want: Vec<BigUint> = view.iter().map(|&v| BigUint::from(v)).collect();
            prop_assert_eq!(decode_binary_view(&w), want);
            prop_assert_eq!(encode_binary_view(&view), w);
        }
    }
}
