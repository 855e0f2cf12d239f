//! Subsets of the input index set `{1, ..., d}` and their canonical ordering.
//!
//! A subset is a bit mask: bit `i - 1` is set when input `i` belongs to the
//! subset. Binary configurations `x ∈ {0,1}^d` use the same encoding, so a
//! configuration is also a `usize` mask and indexes the dense probability table
//! directly.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest dimension for which masks are supported at all.
pub const MAX_DIM: usize = 30;

/// Default dimension limit for full (uncapped) enumeration.
pub const DEFAULT_MAX_EXACT_DIM: usize = 14;

/// A subset `A ⊆ {1, ..., d}` encoded as a bit mask.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Subset(u32);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub const fn from_mask(mask: u32) -> Self {
        Subset(mask)
    }

    /// Builds a subset from 1-based input indices.
    pub fn from_indices(indices: &[usize]) -> Result<Self> {
        let mut mask = 0u32;
        for &i in indices {
            if i == 0 || i > MAX_DIM {
                return Err(Error::InvalidSubset(format!(
                    "index {i} outside 1..={MAX_DIM}"
                )));
            }
            mask |= 1 << (i - 1);
        }
        Ok(Subset(mask))
    }

    pub const fn mask(self) -> u32 {
        self.0
    }

    pub const fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// True when 1-based input `i` belongs to the subset.
    pub const fn contains(self, i: usize) -> bool {
        i >= 1 && i <= MAX_DIM && self.0 & (1 << (i - 1)) != 0
    }

    pub const fn is_subset_of(self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    pub const fn union(self, other: Subset) -> Subset {
        Subset(self.0 | other.0)
    }

    pub const fn symmetric_difference(self, other: Subset) -> Subset {
        Subset(self.0 ^ other.0)
    }

    /// 1-based indices in ascending order.
    pub fn indices(self) -> Vec<usize> {
        self.bit_positions().map(|b| b + 1).collect()
    }

    /// 0-based bit positions in ascending order.
    pub fn bit_positions(self) -> impl Iterator<Item = usize> {
        let mut m = self.0;
        std::iter::from_fn(move || {
            if m == 0 {
                None
            } else {
                let b = m.trailing_zeros() as usize;
                m &= m - 1;
                Some(b)
            }
        })
    }

    /// Extracts the bits of configuration `x` that belong to the subset and packs
    /// them contiguously, lowest input first. The result indexes a marginal table
    /// of length `2^|A|`.
    pub fn compress(self, x: usize) -> usize {
        let mut out = 0usize;
        for (k, b) in self.bit_positions().enumerate() {
            out |= ((x >> b) & 1) << k;
        }
        out
    }

    /// Inverse of [`Subset::compress`]: spreads a packed pattern back onto the
    /// subset's bit positions.
    pub fn expand(self, pattern: usize) -> usize {
        let mut out = 0usize;
        for (k, b) in self.bit_positions().enumerate() {
            out |= ((pattern >> k) & 1) << b;
        }
        out
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (k, i) in self.indices().into_iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
        }
        f.write_str("]")
    }
}

impl std::str::FromStr for Subset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let inner = s
            .trim()
            .strip_prefix('[')
            .and_then(|t| t.strip_suffix(']'))
            .ok_or_else(|| Error::InvalidSubset(s.to_string()))?;
        if inner.trim().is_empty() {
            return Ok(Subset::EMPTY);
        }
        let indices = inner
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidSubset(s.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Subset::from_indices(&indices)
    }
}

/// `(-1)^{Σ_{j∈A} x_j}` for configuration mask `x`.
pub fn parity_sign(x: usize, a: Subset) -> f64 {
    if (x as u64 & a.0 as u64).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Number of subsets of cardinality at most `cap` among `d` inputs.
pub fn truncated_count(d: usize, cap: usize) -> usize {
    let mut total = 0usize;
    let mut binom = 1usize;
    for k in 0..=cap.min(d) {
        total += binom;
        binom = binom * (d - k) / (k + 1);
    }
    total
}

/// An ordered list of subsets with constant-time position lookup.
///
/// Orders produced by [`enumerate_subsets`] are graded-lexicographic: ascending
/// cardinality, ties broken by ascending mask. Capping by cardinality therefore
/// yields a prefix of the full order.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsetOrder {
    d: usize,
    cap: Option<usize>,
    subsets: Vec<Subset>,
    position: HashMap<Subset, usize>,
}

impl SubsetOrder {
    /// Wraps an arbitrary list of distinct subsets of `{1..d}`.
    pub fn from_subsets(d: usize, subsets: Vec<Subset>) -> Result<Self> {
        check_dim(d)?;
        let mut position = HashMap::with_capacity(subsets.len());
        for (k, &a) in subsets.iter().enumerate() {
            if d < 32 && a.mask() >> d != 0 {
                return Err(Error::InvalidSubset(format!(
                    "{a} not contained in 1..={d}"
                )));
            }
            if position.insert(a, k).is_some() {
                return Err(Error::InvalidSubset(format!("{a} listed twice")));
            }
        }
        Ok(Self {
            d,
            cap: None,
            subsets,
            position,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn cap(&self) -> Option<usize> {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    pub fn subsets(&self) -> &[Subset] {
        &self.subsets
    }

    pub fn get(&self, k: usize) -> Option<Subset> {
        self.subsets.get(k).copied()
    }

    pub fn position(&self, a: Subset) -> Option<usize> {
        self.position.get(&a).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = Subset> + '_ {
        self.subsets.iter().copied()
    }

    /// Subsets of cardinality at most `cap`, keeping the relative order.
    pub fn capped(&self, cap: usize) -> Result<SubsetOrder> {
        if cap > self.d {
            return Err(Error::InvalidCap { cap, d: self.d });
        }
        let kept = self
            .subsets
            .iter()
            .copied()
            .filter(|a| a.len() <= cap)
            .collect();
        let mut order = SubsetOrder::from_subsets(self.d, kept)?;
        order.cap = Some(self.cap.map_or(cap, |c| c.min(cap)));
        Ok(order)
    }

    /// Positions of the subsets of cardinality at most `cap`.
    pub fn positions_up_to(&self, cap: usize) -> Vec<usize> {
        (0..self.subsets.len())
            .filter(|&k| self.subsets[k].len() <= cap)
            .collect()
    }

    /// True when this order lists every subset of `{1..d}`.
    pub fn is_complete(&self) -> bool {
        self.d < usize::BITS as usize && self.subsets.len() == 1usize << self.d
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 || d > MAX_DIM {
        return Err(Error::InvalidDimension(d));
    }
    Ok(())
}

/// Graded-lexicographic enumeration of subsets of `{1..d}`, optionally capped at
/// cardinality `cap`. Full enumeration is limited to [`DEFAULT_MAX_EXACT_DIM`].
pub fn enumerate_subsets(d: usize, cap: Option<usize>) -> Result<SubsetOrder> {
    enumerate_subsets_with_limit(d, cap, DEFAULT_MAX_EXACT_DIM)
}

/// As [`enumerate_subsets`] with an explicit limit for uncapped enumeration.
pub fn enumerate_subsets_with_limit(
    d: usize,
    cap: Option<usize>,
    max_exact_dim: usize,
) -> Result<SubsetOrder> {
    check_dim(d)?;
    if let Some(c) = cap {
        if c > d {
            return Err(Error::InvalidCap { cap: c, d });
        }
    }
    let effective_cap = match cap {
        Some(c) => c,
        None if d > max_exact_dim => {
            return Err(Error::DimensionTooLarge {
                d,
                limit: max_exact_dim,
            })
        }
        None => d,
    };

    let mut subsets = Vec::with_capacity(truncated_count(d, effective_cap));
    for k in 0..=effective_cap {
        push_combinations(d, k, &mut subsets);
    }
    let mut order = SubsetOrder::from_subsets(d, subsets)?;
    order.cap = cap;
    Ok(order)
}

/// Appends all `k`-subsets of `{1..d}` in ascending mask order.
fn push_combinations(d: usize, k: usize, out: &mut Vec<Subset>) {
    if k == 0 {
        out.push(Subset::EMPTY);
        return;
    }
    // Gosper's hack walks same-popcount masks in increasing numeric order.
    let limit = 1u64 << d;
    let mut m: u64 = (1u64 << k) - 1;
    while m < limit {
        out.push(Subset(m as u32));
        let c = m & m.wrapping_neg();
        let r = m + c;
        m = (((r ^ m) >> 2) / c) | r;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(ix: &[usize]) -> Subset {
        Subset::from_indices(ix).unwrap()
    }

    #[test]
    fn d2_full_order() {
        let o = enumerate_subsets(2, None).unwrap();
        assert_eq!(o.subsets(), &[s(&[]), s(&[1]), s(&[2]), s(&[1, 2])]);
    }

    #[test]
    fn capped_lengths() {
        assert_eq!(enumerate_subsets(10, Some(2)).unwrap().len(), 56);
        let o = enumerate_subsets(3, Some(1)).unwrap();
        assert_eq!(o.subsets(), &[s(&[]), s(&[1]), s(&[2]), s(&[3])]);
        assert_eq!(enumerate_subsets(30, Some(2)).unwrap().len(), 1 + 30 + 435);
    }

    #[test]
    fn full_enumeration_limit() {
        assert!(matches!(
            enumerate_subsets(15, None),
            Err(Error::DimensionTooLarge { d: 15, limit: 14 })
        ));
        assert_eq!(
            enumerate_subsets_with_limit(15, None, 15).unwrap().len(),
            1 << 15
        );
        assert!(enumerate_subsets(31, Some(1)).is_err());
        assert!(enumerate_subsets(0, None).is_err());
        assert!(enumerate_subsets(3, Some(4)).is_err());
    }

    #[test]
    fn parity_examples() {
        assert_eq!(parity_sign(0b11, Subset::EMPTY), 1.0);
        assert_eq!(parity_sign(0b11, s(&[1, 2])), 1.0);
        // x = (1,0,1)
        assert_eq!(parity_sign(0b101, s(&[1, 3])), 1.0);
        assert_eq!(parity_sign(0b101, s(&[1, 2])), -1.0);
    }

    #[test]
    fn display_and_parse() {
        assert_eq!(Subset::EMPTY.to_string(), "[]");
        assert_eq!(s(&[1, 3]).to_string(), "[1,3]");
        assert_eq!("[1, 3]".parse::<Subset>().unwrap(), s(&[1, 3]));
        assert_eq!("[]".parse::<Subset>().unwrap(), Subset::EMPTY);
        assert!("1,3".parse::<Subset>().is_err());
    }

    #[test]
    fn compress_expand() {
        let a = s(&[2, 4]);
        assert_eq!(a.compress(0b1010), 0b11);
        assert_eq!(a.compress(0b0010), 0b01);
        assert_eq!(a.expand(0b10), 0b1000);
    }

    proptest! {
        #[test]
        fn order_is_graded_lex_and_complete(d in 1usize..=10) {
            let o = enumerate_subsets(d, None).unwrap();
            prop_assert_eq!(o.len(), 1 << d);
            prop_assert_eq!(o.get(0), Some(Subset::EMPTY));
            for w in o.subsets().windows(2) {
                prop_assert!((w[0].len(), w[0].mask()) < (w[1].len(), w[1].mask()));
            }
            for (k, a) in o.iter().enumerate() {
                prop_assert_eq!(o.position(a), Some(k));
            }
        }

        #[test]
        fn cap_is_prefix(d in 1usize..=10, c in 0usize..=10) {
            let c = c.min(d);
            let full = enumerate_subsets(d, None).unwrap();
            let capped = enumerate_subsets(d, Some(c)).unwrap();
            prop_assert_eq!(capped.len(), truncated_count(d, c));
            prop_assert_eq!(capped.subsets(), &full.subsets()[..capped.len()]);
        }

        #[test]
        fn parity_is_multiplicative(x in 0usize..1024, a in 0u32..1024, b in 0u32..1024) {
            let (a, b) = (Subset::from_mask(a), Subset::from_mask(b));
            prop_assert_eq!(
                parity_sign(x, a) * parity_sign(x, b),
                parity_sign(x, a.symmetric_difference(b))
            );
        }

        #[test]
        fn compress_roundtrip(x in 0usize..1024, a in 0u32..1024) {
            let a = Subset::from_mask(a);
            prop_assert_eq!(a.expand(a.compress(x)), x & a.mask() as usize);
        }
    }
}
