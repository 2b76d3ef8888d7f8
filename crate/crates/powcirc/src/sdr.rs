//! Signed-digit representations over base 2 with digits in {-1, 0, +1}.
//!
//! The compact form (no two adjacent nonzero digits) is the unique
//! normal form used throughout the reduction machinery: two compact
//! representations of equal value are digit-wise identical, and ordering
//! is decided by the most significant differing digit.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Little-endian digit sequence; index `i` carries weight `2^i`.
///
/// Trailing zeros are semantically irrelevant and stripped on normalization.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SignedDigitRep {
    digits: Vec<i8>,
}

impl SignedDigitRep {
    /// Builds a representation from raw digits, which must lie in {-1, 0, +1}.
    pub fn new<I: IntoIterator<Item = i8>>(digits: I) -> Result<Self> {
        let digits: Vec<i8> = digits.into_iter().collect();
        for &d in &digits {
            if !(-1..=1).contains(&d) {
                return Err(Error::BadLabel(d as i64));
            }
        }
        Ok(Self { digits })
    }

    pub fn zero() -> Self {
        Self { digits: Vec::new() }
    }

    /// Plain binary representation of `k`: all nonzero digits share the sign of `k`.
    pub fn from_int(k: &BigInt) -> Self {
        let sign = if k.is_negative() { -1 } else { 1 };
        let digits = k
            .magnitude()
            .to_radix_le(2)
            .into_iter()
            .map(|b| sign * b as i8)
            .collect();
        Self { digits }
    }

    pub fn digits(&self) -> &[i8] {
        &self.digits
    }

    /// The maximal `i` with `digits[i-1] != 0`, i.e. the length after
    /// stripping trailing zeros.
    pub fn digit_length(&self) -> usize {
        self.digits
            .iter()
            .rposition(|&d| d != 0)
            .map_or(0, |i| i + 1)
    }

    /// Drops trailing zeros; the canonical form used for map keys.
    pub fn normalized(mut self) -> Self {
        self.digits.truncate(self.digit_length());
        self
    }

    /// Exact value `sum_i digits[i] * 2^i`.
    pub fn value(&self) -> BigInt {
        let mut acc = BigInt::zero();
        for &d in self.digits.iter().rev() {
            acc = (acc << 1) + d;
        }
        acc
    }

    /// True iff no two adjacent digits are both nonzero.
    pub fn is_compact(&self) -> bool {
        self.digits.windows(2).all(|w| w[0] == 0 || w[1] == 0)
    }

    /// The unique compact representation of the same value.
    ///
    /// A general input is first split into its positive and negative binary
    /// parts whose difference is taken with a schoolbook borrow; the carry
    /// recurrence then runs on the resulting plain binary magnitude.
    pub fn compact(&self) -> Self {
        let pos: Vec<u8> = self.digits.iter().map(|&d| (d == 1) as u8).collect();
        let neg: Vec<u8> = self.digits.iter().map(|&d| (d == -1) as u8).collect();
        let (mag, negative) = sub_binary(&pos, &neg);
        let mut digits = compact_binary(&mag);
        if negative {
            for d in &mut digits {
                *d = -*d;
            }
        }
        Self { digits }.normalized()
    }

    /// Compact representation of `val(self) + val(other)`.
    pub fn add(&self, other: &Self) -> Self {
        let n = self.digits.len().max(other.digits.len());
        let get = |v: &[i8], i: usize| v.get(i).copied().unwrap_or(0);
        let mut pos = vec![0u8; n + 1];
        let mut neg = vec![0u8; n + 1];
        let mut carry_p = 0u8;
        let mut carry_n = 0u8;
        for i in 0..=n {
            let a = get(&self.digits, i);
            let b = get(&other.digits, i);
            let p = (a == 1) as u8 + (b == 1) as u8 + carry_p;
            let q = (a == -1) as u8 + (b == -1) as u8 + carry_n;
            pos[i] = p & 1;
            neg[i] = q & 1;
            carry_p = p >> 1;
            carry_n = q >> 1;
        }
        let (mag, negative) = sub_binary(&pos, &neg);
        let mut digits = compact_binary(&mag);
        if negative {
            for d in &mut digits {
                *d = -*d;
            }
        }
        Self { digits }.normalized()
    }

    pub fn negate(&self) -> Self {
        Self {
            digits: self.digits.iter().map(|&d| -d).collect(),
        }
    }

    /// Ordering of exact values: both sides are made compact, then the most
    /// significant differing digit decides.
    pub fn compare(&self, other: &Self) -> Ordering {
        let a = self.compact();
        let b = other.compact();
        let n = a.digits.len().max(b.digits.len());
        for i in (0..n).rev() {
            let x = a.digits.get(i).copied().unwrap_or(0);
            let y = b.digits.get(i).copied().unwrap_or(0);
            if x != y {
                return x.cmp(&y);
            }
        }
        Ordering::Equal
    }
}

/// Carry recurrence turning a plain binary number into its compact form.
///
/// `c[0] = 0`, `c[i] = (a[i] & a[i-1]) | (c[i-1] & (a[i] | a[i-1]))`, and
/// `b[i] = (a[i] ^ c[i]) * (-1)^{a[i+1]}`; output has one extra digit.
fn compact_binary(bits: &[u8]) -> Vec<i8> {
    let m = bits.len();
    let a = |i: usize| bits.get(i).copied().unwrap_or(0) != 0;
    let mut out = Vec::with_capacity(m + 1);
    let mut carry = false; // c_i at the top of each pass
    for i in 0..=m {
        let ai = a(i);
        let b = if ai ^ carry {
            if a(i + 1) {
                -1
            } else {
                1
            }
        } else {
            0
        };
        out.push(b);
        carry = (a(i + 1) && ai) || (carry && (a(i + 1) || ai));
    }
    out
}

/// Schoolbook subtraction of binary magnitudes; returns (|p - q| bits, p < q).
fn sub_binary(p: &[u8], q: &[u8]) -> (Vec<u8>, bool) {
    let n = p.len().max(q.len());
    let get = |v: &[u8], i: usize| v.get(i).copied().unwrap_or(0);
    let ge = {
        let mut ge = true;
        for i in (0..n).rev() {
            match get(p, i).cmp(&get(q, i)) {
                Ordering::Greater => {
                    ge = true;
                    break;
                }
                Ordering::Less => {
                    ge = false;
                    break;
                }
                Ordering::Equal => {}
            }
        }
        ge
    };
    let (big, small) = if ge { (p, q) } else { (q, p) };
    let mut out = vec![0u8; n];
    let mut borrow = 0i8;
    for i in 0..n {
        let mut d = get(big, i) as i8 - get(small, i) as i8 - borrow;
        borrow = 0;
        if d < 0 {
            d += 2;
            borrow = 1;
        }
        out[i] = d as u8;
    }
    debug_assert_eq!(borrow, 0);
    (out, !ge)
}

/// Maximum value of a compact representation of digit-length at most `n`,
/// `floor(2^(n+1) / 3)`; attained by the alternating pattern ending in 1.
pub fn max_compact(n: u64) -> BigInt {
    ((BigInt::one() << (n + 1)) - 1) / 3
    // floor(2^(n+1)/3): 2^(n+1) mod 3 is 1 or 2, so subtracting 1 first
    // never changes the quotient.
}

/// Enumerates every compact representation of digit-length at most `n` and
/// returns the value -> representation map, checking along the way that no
/// two distinct normalized representations share a value.
pub fn enumerate_compact(n: u64) -> Result<BTreeMap<BigInt, SignedDigitRep>> {
    if n > 24 {
        return Err(Error::EnumerationTooLarge(n));
    }
    let mut map: BTreeMap<BigInt, SignedDigitRep> = BTreeMap::new();
    let mut digits: Vec<i8> = Vec::with_capacity(n as usize);
    fn rec(
        digits: &mut Vec<i8>,
        remaining: usize,
        map: &mut BTreeMap<BigInt, SignedDigitRep>,
    ) -> Result<()> {
        let rep = SignedDigitRep {
            digits: digits.clone(),
        }
        .normalized();
        let value = rep.value();
        if let Some(prev) = map.get(&value) {
            if *prev != rep {
                return Err(Error::PreconditionViolated(format!(
                    "two compact representations share the value {value}"
                )));
            }
        } else {
            map.insert(value, rep);
        }
        if remaining == 0 {
            return Ok(());
        }
        let prev_nonzero = digits.last().is_some_and(|&d| d != 0);
        for d in [-1i8, 0, 1] {
            if d != 0 && prev_nonzero {
                continue;
            }
            digits.push(d);
            rec(digits, remaining - 1, map)?;
            digits.pop();
        }
        Ok(())
    }
    rec(&mut digits, n as usize, &mut map)?;
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sdr(digits: &[i8]) -> SignedDigitRep {
        SignedDigitRep::new(digits.iter().copied()).unwrap()
    }

    #[test]
    fn value_of_examples() {
        assert_eq!(SignedDigitRep::zero().value(), BigInt::zero());
        assert_eq!(sdr(&[1, 1, 1, 0, 1]).value(), BigInt::from(23));
        assert_eq!(sdr(&[-1, 0, 0, -1, 0, 1]).value(), BigInt::from(23));
    }

    #[test]
    fn compactness_predicate() {
        assert!(sdr(&[0, 0, 0]).is_compact());
        assert!(!sdr(&[1, 1]).is_compact());
        assert!(sdr(&[-1, 0, 1]).is_compact());
    }

    #[test]
    fn compact_matches_enumeration_oracle() {
        // Expected digits derived from the oracle: among all compact
        // representations of digit-length <= 6 exactly one has value 23.
        let oracle = enumerate_compact(6).unwrap();
        let expect23 = oracle.get(&BigInt::from(23)).unwrap();
        assert_eq!(expect23, &sdr(&[-1, 0, 0, -1, 0, 1]));
        assert_eq!(sdr(&[1, 1, 1, 0, 1]).compact(), *expect23);

        let expect3 = oracle.get(&BigInt::from(3)).unwrap();
        assert_eq!(expect3, &sdr(&[-1, 0, 1]));
        assert_eq!(sdr(&[1, 1]).compact(), *expect3);

        assert_eq!(sdr(&[0]).compact(), SignedDigitRep::zero());
    }

    #[test]
    fn add_examples() {
        assert_eq!(sdr(&[1]).add(&sdr(&[1])).value(), BigInt::from(2));
        assert_eq!(sdr(&[-1, 0, 1]).add(&sdr(&[1])).value(), BigInt::from(4));
        let a = sdr(&[1, 0, -1, 1]);
        assert_eq!(a.add(&a.negate()), SignedDigitRep::zero());
    }

    #[test]
    fn compare_examples() {
        assert_eq!(sdr(&[1]).compare(&sdr(&[0, 1])), Ordering::Less);
        assert_eq!(sdr(&[-1, 0, 1]).compare(&sdr(&[-1, 0, 1])), Ordering::Equal);
        let mut big = vec![0i8; 40];
        big[0] = 1;
        big[39] = 1;
        assert_eq!(sdr(&big).compare(&sdr(&[1])), Ordering::Greater);
    }

    #[test]
    fn max_compact_values() {
        assert_eq!(max_compact(4), BigInt::from(10));
        assert_eq!(max_compact(0), BigInt::zero());
        assert_eq!(max_compact(1), BigInt::one());
    }

    #[test]
    fn enumeration_small() {
        let m = enumerate_compact(1).unwrap();
        let keys: Vec<BigInt> = m.keys().cloned().collect();
        assert_eq!(
            keys,
            vec![BigInt::from(-1), BigInt::zero(), BigInt::one()]
        );

        // exactly the values -2..=2: digit-length 2 caps at floor(2^3 / 3)
        let m = enumerate_compact(2).unwrap();
        assert_eq!(m.len(), 5);
        assert_eq!(m.keys().max().unwrap(), &BigInt::from(2));

        let m = enumerate_compact(4).unwrap();
        assert_eq!(m.keys().max().unwrap(), &BigInt::from(10));
    }

    #[test]
    fn enumeration_guard() {
        assert!(matches!(
            enumerate_compact(25),
            Err(Error::EnumerationTooLarge(25))
        ));
    }

    #[test]
    fn max_compact_matches_enumeration() {
        for n in 0..=12u64 {
            let m = enumerate_compact(n).unwrap();
            assert_eq!(m.keys().max().unwrap(), &max_compact(n), "n = {n}");
        }
    }

    #[test]
    fn compare_agrees_with_value_on_random_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100_000 {
            let len_a = rng.gen_range(0..=12);
            let len_b = rng.gen_range(0..=12);
            let a = sdr(&(0..len_a).map(|_| rng.gen_range(-1..=1)).collect::<Vec<i8>>());
            let b = sdr(&(0..len_b).map(|_| rng.gen_range(-1..=1)).collect::<Vec<i8>>());
            assert_eq!(a.compare(&b), a.value().cmp(&b.value()));
        }
    }

    proptest! {
        #[test]
        fn compact_preserves_value_and_is_compact(digits in prop::collection::vec(-1i8..=1, 0..16)) {
            let a = sdr(&digits);
            let c = a.compact();
            prop_assert!(c.is_compact());
            prop_assert_eq!(c.value(), a.value());
            prop_assert!(c.digit_length() <= a.digit_length() + 1);
        }

        #[test]
        fn add_is_exact_and_compact(
            xs in prop::collection::vec(-1i8..=1, 0..16),
            ys in prop::collection::vec(-1i8..=1, 0..16),
        ) {
            let a = sdr(&xs);
            let b = sdr(&ys);
            let s = a.add(&b);
            prop_assert!(s.is_compact());
            prop_assert_eq!(s.value(), a.value() + b.value());
        }

        #[test]
        fn compact_bounded_by_max_compact(digits in prop::collection::vec(-1i8..=1, 0..16)) {
            let c = sdr(&digits).compact();
            let n = c.digit_length() as u64;
            prop_assert!(c.value().abs() <= max_compact(n));
        }
    }

    #[test]
    fn uniqueness_up_to_16_digits() {
        // enumerate_compact itself fails on a value collision
        enumerate_compact(16).unwrap();
    }

    #[test]
    fn alternating_pattern_attains_max() {
        for n in 1..=10usize {
            let mut digits = vec![0i8; n];
            digits[n - 1] = 1;
            let mut i = n - 1;
            while i >= 2 {
                i -= 2;
                digits[i] = 1;
            }
            let b = sdr(&digits);
            assert!(b.is_compact());
            assert_eq!(b.value(), max_compact(n as u64));
        }
    }
}
