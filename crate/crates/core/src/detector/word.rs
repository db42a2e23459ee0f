//! Injective integer encoding of traces:
//! `w(s) = sum_i f(s[i]) * n^(i-1)` with letter codes `f` in `1..=n`.
//!
//! Codes drawn from `1..=n` make this bijective base-n numeration, so the
//! encoding is injective over all words. The value grows as `n^len`, hence
//! arbitrary precision.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WordMappingValue(pub BigUint);

impl WordMappingValue {
    pub fn zero() -> Self {
        Self(BigUint::zero())
    }

    pub fn to_u128(&self) -> Option<u128> {
        self.0.to_u128()
    }
}

impl From<u64> for WordMappingValue {
    fn from(v: u64) -> Self {
        Self(BigUint::from(v))
    }
}

impl fmt::Display for WordMappingValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl Serialize for WordMappingValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("letter `{0}` has no code in the letter map")]
pub struct UnknownLetter(pub String);

/// Injective map from activities to codes, plus the alphabet size `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LetterMap {
    codes: HashMap<String, u32>,
    n: u32,
}

impl LetterMap {
    /// Codes `1..=n` following the lexicographic order of `alphabet`.
    pub fn sorted<S: AsRef<str>>(alphabet: &[S]) -> Self {
        let mut letters: Vec<&str> = alphabet.iter().map(AsRef::as_ref).collect();
        letters.sort_unstable();
        letters.dedup();
        let codes = letters
            .iter()
            .enumerate()
            .map(|(i, l)| (l.to_string(), i as u32 + 1))
            .collect();
        Self {
            codes,
            n: letters.len() as u32,
        }
    }

    /// Arbitrary codes. Injectivity of the word map additionally needs the
    /// codes to lie in `1..=n`; this constructor only checks that codes are
    /// distinct and non-zero.
    pub fn new(codes: HashMap<String, u32>) -> Option<Self> {
        let mut seen: Vec<u32> = codes.values().copied().collect();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != codes.len() || seen.first() == Some(&0) {
            return None;
        }
        let n = codes.len() as u32;
        Some(Self { codes, n })
    }

    pub fn code(&self, letter: &str) -> Option<u32> {
        self.codes.get(letter).copied()
    }

    pub fn n(&self) -> u32 {
        self.n
    }
}

/// Word mapping of a trace of activity names.
pub fn word_map<S: AsRef<str>>(
    trace: &[S],
    letters: &LetterMap,
) -> Result<WordMappingValue, UnknownLetter> {
    let codes = trace
        .iter()
        .map(|a| {
            letters
                .code(a.as_ref())
                .ok_or_else(|| UnknownLetter(a.as_ref().to_owned()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(word_map_codes(&codes, letters.n()))
}

/// Word mapping of a trace given directly as letter codes.
pub fn word_map_codes(codes: &[u32], n: u32) -> WordMappingValue {
    let mut acc = WordAccumulator::new(n);
    for &c in codes {
        acc.push(c);
    }
    acc.value()
}

/// Running word-mapping value, updated one letter at a time
/// (`w += code * n^c; c += 1`). Stays in `u128` until it overflows.
#[derive(Debug, Clone)]
pub struct WordAccumulator {
    n: u32,
    repr: Repr,
}

#[derive(Debug, Clone)]
enum Repr {
    Small { value: u128, power: u128 },
    Big { value: BigUint, power: BigUint },
}

impl WordAccumulator {
    pub fn new(n: u32) -> Self {
        Self {
            n,
            repr: Repr::Small { value: 0, power: 1 },
        }
    }

    pub fn reset(&mut self) {
        self.repr = Repr::Small { value: 0, power: 1 };
    }

    pub fn push(&mut self, code: u32) {
        let n = self.n;
        match &mut self.repr {
            Repr::Small { value, power } => {
                let next = (code as u128)
                    .checked_mul(*power)
                    .and_then(|d| value.checked_add(d))
                    .zip(power.checked_mul(n as u128));
                match next {
                    Some((v, p)) => {
                        *value = v;
                        *power = p;
                    }
                    None => {
                        let value = BigUint::from(*value) + BigUint::from(*power) * code;
                        let power = BigUint::from(*power) * n;
                        self.repr = Repr::Big { value, power };
                    }
                }
            }
            Repr::Big { value, power } => {
                *value += &*power * code;
                *power *= n;
            }
        }
    }

    /// The value when it still fits in `u128`.
    pub fn small(&self) -> Option<u128> {
        match self.repr {
            Repr::Small { value, .. } => Some(value),
            Repr::Big { .. } => None,
        }
    }

    pub fn value(&self) -> WordMappingValue {
        match &self.repr {
            Repr::Small { value, .. } => WordMappingValue(BigUint::from(*value)),
            Repr::Big { value, .. } => WordMappingValue(value.clone()),
        }
    }
}

impl Default for WordAccumulator {
    fn default() -> Self {
        Self::new(1)
    }
}
