//! Item encodings and experimental assortment collections.
//!
//! Items are 0-based inside the library. Every serialized form (JSON, CSV,
//! CLI output) uses 1-based labels, see [`crate::io`].

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::error::{NestError, Result};

/// A set of offered items, stored sorted and deduplicated.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assortment(Vec<usize>);

impl Assortment {
    pub fn new(mut items: Vec<usize>, n: usize) -> Result<Self> {
        if let Some(&item) = items.iter().find(|&&i| i >= n) {
            return Err(NestError::ItemOutOfRange { item, n });
        }
        items.sort_unstable();
        items.dedup();
        Ok(Assortment(items))
    }

    pub fn full(n: usize) -> Self {
        Assortment((0..n).collect())
    }

    pub fn items(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, item: usize) -> bool {
        self.0.binary_search(&item).is_ok()
    }

    /// Position of `item` inside the sorted item list.
    pub fn position(&self, item: usize) -> Option<usize> {
        self.0.binary_search(&item).ok()
    }

    pub fn is_full(&self, n: usize) -> bool {
        self.0.len() == n
    }

    /// Membership bitmask, only meaningful for `n <= 64`.
    pub fn mask(&self) -> u64 {
        self.0.iter().fold(0u64, |m, &i| m | (1u64 << i))
    }

    pub fn from_mask(mask: u64) -> Self {
        Assortment((0..64).filter(|&i| mask >> i & 1 == 1).collect())
    }
}

/// Provenance of an assortment inside a design.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DesignLabel {
    Control,
    /// `S_{position,-digit}` with a 1-based digit position.
    Slice { position: usize, digit: usize },
    Randomized(usize),
    /// Leave-one-out design; carries the removed item (0-based).
    LeaveOneOut(usize),
    Incremental(usize),
}

impl fmt::Display for DesignLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DesignLabel::Control => write!(f, "control"),
            DesignLabel::Slice { position, digit } => write!(f, "S({position},-{digit})"),
            DesignLabel::Randomized(k) => write!(f, "random#{}", k + 1),
            DesignLabel::LeaveOneOut(i) => write!(f, "loo#{}", i + 1),
            DesignLabel::Incremental(k) => write!(f, "incremental#{}", k + 1),
        }
    }
}

impl FromStr for DesignLabel {
    type Err = NestError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || NestError::Parse(format!("unrecognized assortment label `{s}`"));
        let one_based = |rest: &str| -> Result<usize> {
            let k: usize = rest.parse().map_err(|_| bad())?;
            k.checked_sub(1).ok_or_else(bad)
        };
        if s == "control" {
            return Ok(DesignLabel::Control);
        }
        if let Some(inner) = s.strip_prefix("S(").and_then(|r| r.strip_suffix(')')) {
            let (pos, digit) = inner.split_once(",-").ok_or_else(bad)?;
            let position: usize = pos.trim().parse().map_err(|_| bad())?;
            let digit: usize = digit.trim().parse().map_err(|_| bad())?;
            if position == 0 {
                return Err(bad());
            }
            return Ok(DesignLabel::Slice { position, digit });
        }
        if let Some(rest) = s.strip_prefix("random#") {
            return Ok(DesignLabel::Randomized(one_based(rest)?));
        }
        if let Some(rest) = s.strip_prefix("loo#") {
            return Ok(DesignLabel::LeaveOneOut(one_based(rest)?));
        }
        if let Some(rest) = s.strip_prefix("incremental#") {
            return Ok(DesignLabel::Incremental(one_based(rest)?));
        }
        Err(bad())
    }
}

impl serde::Serialize for DesignLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for DesignLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Base-`b` digit vectors, one per item.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BaseBEncoding {
    n: usize,
    base: usize,
    digit_count: usize,
    digits: Vec<Vec<usize>>,
}

impl BaseBEncoding {
    /// Builds an encoding from explicit digit vectors, checking distinctness
    /// and digit range.
    pub fn from_digits(base: usize, digits: Vec<Vec<usize>>) -> Result<Self> {
        let n = digits.len();
        check_args(n, base)?;
        let digit_count = min_digit_count(n, base);
        for (i, d) in digits.iter().enumerate() {
            if d.len() != digit_count {
                return Err(NestError::InvalidArgument(format!(
                    "item {} has {} digits, expected {digit_count}",
                    i + 1,
                    d.len()
                )));
            }
            if d.iter().any(|&x| x >= base) {
                return Err(NestError::InvalidArgument(format!(
                    "item {} has a digit outside 0..{base}",
                    i + 1
                )));
            }
        }
        let mut seen = HashMap::with_capacity(n);
        for (i, d) in digits.iter().enumerate() {
            if let Some(j) = seen.insert(d.as_slice(), i) {
                return Err(NestError::InvalidArgument(format!(
                    "items {} and {} share an encoding",
                    j + 1,
                    i + 1
                )));
            }
        }
        Ok(BaseBEncoding {
            n,
            base,
            digit_count,
            digits,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn base(&self) -> usize {
        self.base
    }

    /// Number of digit positions `L`.
    pub fn digit_count(&self) -> usize {
        self.digit_count
    }

    pub fn digits(&self, item: usize) -> &[usize] {
        &self.digits[item]
    }

    /// Digit of `item` at the 1-based `position`.
    pub fn digit(&self, item: usize, position: usize) -> usize {
        self.digits[item][position - 1]
    }

    /// Number of items whose digit at `position` equals `digit`.
    pub fn digit_frequency(&self, position: usize, digit: usize) -> usize {
        self.digits
            .iter()
            .filter(|d| d[position - 1] == digit)
            .count()
    }

    pub fn to_string_of(&self, item: usize) -> String {
        self.digits[item]
            .iter()
            .map(|&d| std::char::from_digit(d as u32, 36).unwrap_or('?'))
            .collect()
    }
}

fn check_args(n: usize, base: usize) -> Result<()> {
    if n == 0 {
        return Err(NestError::InvalidArgument("n must be at least 1".into()));
    }
    if base < 2 {
        return Err(NestError::InvalidArgument("base must be at least 2".into()));
    }
    Ok(())
}

/// Smallest `L >= 1` with `base^L >= n`.
pub fn min_digit_count(n: usize, base: usize) -> usize {
    let mut len = 1;
    let mut cap = base as u128;
    while cap < n as u128 {
        cap *= base as u128;
        len += 1;
    }
    len
}

fn to_base(mut value: usize, base: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = value % base;
        value /= base;
    }
    out
}

/// Item `i` gets the base-`b` representation of `i` (0-based), left-padded.
pub fn naive_encoding(n: usize, base: usize) -> Result<BaseBEncoding> {
    check_args(n, base)?;
    let len = min_digit_count(n, base);
    let digits = (0..n).map(|i| to_base(i, base, len)).collect();
    Ok(BaseBEncoding {
        n,
        base,
        digit_count: len,
        digits,
    })
}

/// First `n` vectors of the block enumeration
/// `(i, (i + j_2) mod b, ..., (i + j_L) mod b)`, where the outer index `t`
/// runs through `(j_2, ..., j_L)` in base `b`.
///
/// Each complete block of `b` consecutive vectors holds every digit exactly
/// once per position, so per-position digit counts never differ by more than
/// one.
pub fn balanced_enumeration(n: usize, base: usize) -> Result<BaseBEncoding> {
    check_args(n, base)?;
    let len = min_digit_count(n, base);
    let mut digits = Vec::with_capacity(n);
    'outer: for t in 0.. {
        let offsets = to_base(t, base, len - 1);
        for i in 0..base {
            let mut v = Vec::with_capacity(len);
            v.push(i);
            v.extend(offsets.iter().map(|&j| (i + j) % base));
            digits.push(v);
            if digits.len() == n {
                break 'outer;
            }
        }
    }
    Ok(BaseBEncoding {
        n,
        base,
        digit_count: len,
        digits,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Experiment {
    pub label: DesignLabel,
    pub assortment: Assortment,
}

/// A control assortment plus an ordered list of experimental assortments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExperimentDesign {
    n: usize,
    base: Option<usize>,
    control: Assortment,
    experiments: Vec<Experiment>,
}

impl ExperimentDesign {
    pub fn new(n: usize, base: Option<usize>, experiments: Vec<Experiment>) -> Result<Self> {
        if n == 0 {
            return Err(NestError::InvalidArgument("n must be at least 1".into()));
        }
        for e in &experiments {
            if e.assortment.is_empty() {
                return Err(NestError::EmptyAssortment);
            }
            if let Some(&item) = e.assortment.items().iter().find(|&&i| i >= n) {
                return Err(NestError::ItemOutOfRange { item, n });
            }
        }
        Ok(ExperimentDesign {
            n,
            base,
            control: Assortment::full(n),
            experiments,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn base(&self) -> Option<usize> {
        self.base
    }

    pub fn control(&self) -> &Assortment {
        &self.control
    }

    pub fn experiments(&self) -> &[Experiment] {
        &self.experiments
    }

    /// Control followed by every experiment that differs from the full
    /// assortment. This is the list that customers are allocated over.
    pub fn offered(&self) -> Vec<(DesignLabel, &Assortment)> {
        std::iter::once((DesignLabel::Control, &self.control))
            .chain(
                self.experiments
                    .iter()
                    .filter(|e| !e.assortment.is_full(self.n))
                    .map(|e| (e.label, &e.assortment)),
            )
            .collect()
    }

    /// Recovers the digit encoding from `S(l,-d)` labels. Fails unless every
    /// experiment is a slice and all `b * L` slices are present.
    pub fn slice_encoding(&self) -> Result<BaseBEncoding> {
        let base = self.base.ok_or(NestError::NotSliceDesign)?;
        let len = min_digit_count(self.n, base);
        let mut digits = vec![vec![usize::MAX; len]; self.n];
        let mut seen = vec![false; base * len];
        for e in &self.experiments {
            let DesignLabel::Slice { position, digit } = e.label else {
                return Err(NestError::NotSliceDesign);
            };
            if position > len || digit >= base {
                return Err(NestError::NotSliceDesign);
            }
            seen[(position - 1) * base + digit] = true;
            for item in 0..self.n {
                if !e.assortment.contains(item) {
                    if digits[item][position - 1] != usize::MAX {
                        return Err(NestError::NotSliceDesign);
                    }
                    digits[item][position - 1] = digit;
                }
            }
        }
        if seen.iter().any(|s| !s) || digits.iter().flatten().any(|&d| d == usize::MAX) {
            return Err(NestError::NotSliceDesign);
        }
        BaseBEncoding::from_digits(base, digits).map_err(|_| NestError::NotSliceDesign)
    }

    /// Index into `experiments` of `S(position,-digit)`.
    pub fn find_slice(&self, position: usize, digit: usize) -> Option<usize> {
        self.experiments
            .iter()
            .position(|e| e.label == DesignLabel::Slice { position, digit })
    }
}

/// `S_{l,-d} = {i : sigma_l(i) != d}` for `l = 1..L`, `d = 0..b-1`, in
/// row-major `(l, d)` order.
pub fn slice_design(encoding: &BaseBEncoding) -> ExperimentDesign {
    let n = encoding.n();
    let mut experiments = Vec::with_capacity(encoding.base() * encoding.digit_count());
    for position in 1..=encoding.digit_count() {
        for digit in 0..encoding.base() {
            let items = (0..n)
                .filter(|&i| encoding.digit(i, position) != digit)
                .collect();
            experiments.push(Experiment {
                label: DesignLabel::Slice { position, digit },
                assortment: Assortment(items),
            });
        }
    }
    ExperimentDesign {
        n,
        base: Some(encoding.base()),
        control: Assortment::full(n),
        experiments,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SizeRule {
    /// Size drawn uniformly from `min..=max`.
    Uniform { min: usize, max: usize },
    Fixed(usize),
    /// `floor(n / 2)`.
    Half,
}

impl SizeRule {
    fn bounds(self, n: usize) -> (usize, usize) {
        match self {
            SizeRule::Uniform { min, max } => (min, max),
            SizeRule::Fixed(k) => (k, k),
            SizeRule::Half => (n / 2, n / 2),
        }
    }
}

/// `count` independently drawn assortments; duplicates across draws are kept.
pub fn randomized_design<R: Rng + ?Sized>(
    n: usize,
    count: usize,
    rule: SizeRule,
    rng: &mut R,
) -> Result<ExperimentDesign> {
    if count == 0 {
        return Err(NestError::InvalidArgument(
            "randomized design needs at least one assortment".into(),
        ));
    }
    let (min, max) = rule.bounds(n);
    if min == 0 || min > max || max > n {
        return Err(NestError::InvalidArgument(format!(
            "assortment sizes {min}..={max} infeasible for n = {n}"
        )));
    }
    let experiments = (0..count)
        .map(|k| {
            let size = rng.random_range(min..=max);
            let items = index::sample(rng, n, size).into_vec();
            Experiment {
                label: DesignLabel::Randomized(k),
                assortment: Assortment::new(items, n).expect("sampled items are in range"),
            }
        })
        .collect();
    ExperimentDesign::new(n, None, experiments)
}

/// `[n] \ {i}` for every item.
pub fn leave_one_out_design(n: usize) -> Result<ExperimentDesign> {
    if n < 2 {
        return Err(NestError::InvalidArgument(
            "leave-one-out needs n >= 2".into(),
        ));
    }
    let experiments = (0..n)
        .map(|drop| Experiment {
            label: DesignLabel::LeaveOneOut(drop),
            assortment: Assortment((0..n).filter(|&i| i != drop).collect()),
        })
        .collect();
    ExperimentDesign::new(n, None, experiments)
}

/// Prefixes `{p(1)}, {p(1), p(2)}, ..., [n]` of a uniformly random
/// permutation `p`.
pub fn incremental_design<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<ExperimentDesign> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    incremental_from_order(&order)
}

pub fn incremental_from_order(order: &[usize]) -> Result<ExperimentDesign> {
    let n = order.len();
    let experiments = (1..=n)
        .map(|k| {
            Ok(Experiment {
                label: DesignLabel::Incremental(k - 1),
                assortment: Assortment::new(order[..k].to_vec(), n)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ExperimentDesign::new(n, None, experiments)
}

/// Ordered pairs `(i, j)` for which no experiment contains `i` but not `j`.
///
/// A pair is unseparated iff the set of experiments containing `i` is a
/// subset of those containing `j`. Identical membership sets are grouped by
/// hashing; proper subset checks only run between different set sizes.
pub fn verify_separation(design: &ExperimentDesign) -> Vec<(usize, usize)> {
    let n = design.n();
    let words = design.experiments().len().div_ceil(64).max(1);
    let mut masks = vec![vec![0u64; words]; n];
    for (k, e) in design.experiments().iter().enumerate() {
        for &i in e.assortment.items() {
            masks[i][k / 64] |= 1 << (k % 64);
        }
    }
    let weight: Vec<u32> = masks
        .iter()
        .map(|m| m.iter().map(|w| w.count_ones()).sum())
        .collect();

    let mut out = Vec::new();
    let mut groups: HashMap<&[u64], Vec<usize>> = HashMap::new();
    for (i, m) in masks.iter().enumerate() {
        groups.entry(m.as_slice()).or_default().push(i);
    }
    for members in groups.values() {
        for &i in members {
            for &j in members {
                if i != j {
                    out.push((i, j));
                }
            }
        }
    }

    let mut by_weight: Vec<usize> = (0..n).collect();
    by_weight.sort_by_key(|&i| weight[i]);
    for (a, &i) in by_weight.iter().enumerate() {
        for &j in &by_weight[a + 1..] {
            if weight[j] == weight[i] {
                continue;
            }
            if masks[i].iter().zip(&masks[j]).all(|(mi, mj)| mi & !mj == 0) {
                out.push((i, j));
            }
        }
    }
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn strings(enc: &BaseBEncoding) -> Vec<String> {
        (0..enc.n()).map(|i| enc.to_string_of(i)).collect()
    }

    fn one_based(a: &Assortment) -> Vec<usize> {
        a.items().iter().map(|i| i + 1).collect()
    }

    #[test]
    fn naive_eight_items_is_binary_count() {
        let enc = naive_encoding(8, 2).unwrap();
        assert_eq!(
            strings(&enc),
            ["000", "001", "010", "011", "100", "101", "110", "111"]
        );
    }

    #[test]
    fn naive_single_item() {
        let enc = naive_encoding(1, 2).unwrap();
        assert_eq!(enc.digit_count(), 1);
        assert_eq!(strings(&enc), ["0"]);
    }

    #[test]
    fn naive_nine_items_needs_four_digits() {
        let enc = naive_encoding(9, 2).unwrap();
        assert_eq!(enc.digit_count(), 4);
        assert_eq!(enc.to_string_of(8), "1000");
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(naive_encoding(0, 2).is_err());
        assert!(naive_encoding(4, 1).is_err());
        assert!(balanced_enumeration(0, 3).is_err());
        assert!(balanced_enumeration(5, 0).is_err());
    }

    #[test]
    fn balanced_five_items() {
        let enc = balanced_enumeration(5, 2).unwrap();
        assert_eq!(strings(&enc), ["000", "111", "001", "110", "010"]);
        for pos in 1..=3 {
            let zeros = enc.digit_frequency(pos, 0);
            let ones = enc.digit_frequency(pos, 1);
            assert!(zeros.abs_diff(ones) <= 1);
        }
    }

    #[test]
    fn balanced_full_blocks_are_exact() {
        for (b, len) in [(2usize, 4u32), (3, 3), (4, 2), (5, 2)] {
            let n = b.pow(len);
            let enc = balanced_enumeration(n, b).unwrap();
            for pos in 1..=len as usize {
                for d in 0..b {
                    assert_eq!(enc.digit_frequency(pos, d), b.pow(len - 1));
                }
            }
        }
    }

    #[test]
    fn balanced_nine_items_slices_have_four_or_five() {
        let design = slice_design(&balanced_enumeration(9, 2).unwrap());
        assert!(design
            .experiments()
            .iter()
            .all(|e| matches!(e.assortment.len(), 4 | 5)));
        let naive = slice_design(&naive_encoding(9, 2).unwrap());
        assert_eq!(one_based(&naive.experiments()[0].assortment), [9]);
    }

    #[test]
    fn slice_design_eight_items() {
        let design = slice_design(&naive_encoding(8, 2).unwrap());
        assert_eq!(design.experiments().len(), 6);
        let rows: Vec<Vec<usize>> = design
            .experiments()
            .iter()
            .map(|e| one_based(&e.assortment))
            .collect();
        assert_eq!(rows[0], [5, 6, 7, 8]);
        assert_eq!(rows[1], [1, 2, 3, 4]);
        assert_eq!(rows[2], [3, 4, 7, 8]);
        assert_eq!(rows[3], [1, 2, 5, 6]);
        assert_eq!(rows[4], [2, 4, 6, 8]);
        assert_eq!(rows[5], [1, 3, 5, 7]);
    }

    #[test]
    fn slice_design_two_items() {
        let design = slice_design(&naive_encoding(2, 2).unwrap());
        let rows: Vec<Vec<usize>> = design
            .experiments()
            .iter()
            .map(|e| one_based(&e.assortment))
            .collect();
        assert_eq!(rows, [vec![2], vec![1]]);
    }

    #[test]
    fn slice_design_nine_items_matches_listing() {
        let design = slice_design(&naive_encoding(9, 2).unwrap());
        let rows: Vec<Vec<usize>> = design
            .experiments()
            .iter()
            .map(|e| one_based(&e.assortment))
            .collect();
        assert_eq!(
            rows,
            [
                vec![9],
                vec![1, 2, 3, 4, 5, 6, 7, 8],
                vec![5, 6, 7, 8],
                vec![1, 2, 3, 4, 9],
                vec![3, 4, 7, 8],
                vec![1, 2, 5, 6, 9],
                vec![2, 4, 6, 8],
                vec![1, 3, 5, 7, 9],
            ]
        );
    }

    #[test]
    fn slice_encoding_round_trips() {
        for (n, b) in [(9, 2), (10, 3), (1, 2), (27, 3)] {
            let enc = balanced_enumeration(n, b).unwrap();
            let design = slice_design(&enc);
            assert_eq!(design.slice_encoding().unwrap(), enc);
        }
        let loo = leave_one_out_design(4).unwrap();
        assert!(matches!(loo.slice_encoding(), Err(NestError::NotSliceDesign)));
    }

    #[test]
    fn randomized_sizes_and_determinism() {
        let rule = SizeRule::Uniform { min: 3, max: 6 };
        let a = randomized_design(10, 9, rule, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = randomized_design(10, 9, rule, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.experiments().len(), 9);
        assert!(a
            .experiments()
            .iter()
            .all(|e| (3..=6).contains(&e.assortment.len())));

        let half = randomized_design(16, 1, SizeRule::Half, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(half.experiments()[0].assortment.len(), 8);

        let err = randomized_design(2, 3, rule, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(err.is_err());
    }

    #[test]
    fn leave_one_out_shapes() {
        let d = leave_one_out_design(3).unwrap();
        let rows: Vec<Vec<usize>> = d.experiments().iter().map(|e| one_based(&e.assortment)).collect();
        assert_eq!(rows, [vec![2, 3], vec![1, 3], vec![1, 2]]);
        let d = leave_one_out_design(10).unwrap();
        assert!(d.experiments().iter().all(|e| e.assortment.len() == 9));
        assert_eq!(d.experiments().len(), 10);
        let d = leave_one_out_design(2).unwrap();
        let rows: Vec<Vec<usize>> = d.experiments().iter().map(|e| one_based(&e.assortment)).collect();
        assert_eq!(rows, [vec![2], vec![1]]);
        assert!(leave_one_out_design(1).is_err());
    }

    #[test]
    fn incremental_prefixes() {
        let d = incremental_from_order(&[0, 1, 2]).unwrap();
        let rows: Vec<Vec<usize>> = d.experiments().iter().map(|e| one_based(&e.assortment)).collect();
        assert_eq!(rows, [vec![1], vec![1, 2], vec![1, 2, 3]]);
        let d = incremental_design(1, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(d.experiments().len(), 1);
        let a = incremental_design(12, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = incremental_design(12, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        // the final prefix equals the control and is not offered twice
        assert_eq!(a.offered().len(), 12);
    }

    #[test]
    fn separation_of_slice_and_control_only() {
        for (n, b) in [(2, 2), (7, 2), (10, 3), (33, 4)] {
            let design = slice_design(&naive_encoding(n, b).unwrap());
            assert!(verify_separation(&design).is_empty());
        }
        let control_only = ExperimentDesign::new(4, None, vec![]).unwrap();
        assert_eq!(verify_separation(&control_only).len(), 12);
    }

    #[test]
    fn separation_of_drinks_days() {
        // AJ=0, OJ=1, milk=2, boba=3; day 2 drops milk and boba, day 3 drops AJ
        let day2 = Assortment::new(vec![0, 1], 4).unwrap();
        let day3 = Assortment::new(vec![1, 2, 3], 4).unwrap();
        let design = ExperimentDesign::new(
            4,
            None,
            vec![
                Experiment { label: DesignLabel::Randomized(0), assortment: day2 },
                Experiment { label: DesignLabel::Randomized(1), assortment: day3 },
            ],
        )
        .unwrap();
        let pairs = verify_separation(&design);
        assert!(pairs.contains(&(2, 3)) && pairs.contains(&(3, 2)));
        // OJ is in both days, so nothing separates anyone from OJ
        assert!(pairs.iter().all(|&(i, j)| (i, j) == (2, 3) || (i, j) == (3, 2) || j == 1));
    }

    #[test]
    fn separation_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.random_range(2..12);
            let g = rng.random_range(1..6);
            let d = randomized_design(n, g, SizeRule::Uniform { min: 1, max: n }, &mut rng).unwrap();
            let mut brute = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if i != j
                        && !d
                            .experiments()
                            .iter()
                            .any(|e| e.assortment.contains(i) && !e.assortment.contains(j))
                    {
                        brute.push((i, j));
                    }
                }
            }
            assert_eq!(verify_separation(&d), brute);
        }
    }

    #[test]
    fn labels_round_trip() {
        for label in [
            DesignLabel::Control,
            DesignLabel::Slice { position: 3, digit: 1 },
            DesignLabel::Randomized(4),
            DesignLabel::LeaveOneOut(0),
            DesignLabel::Incremental(9),
        ] {
            assert_eq!(label.to_string().parse::<DesignLabel>().unwrap(), label);
        }
        assert!("S(0,-1)".parse::<DesignLabel>().is_err());
        assert!("random#0".parse::<DesignLabel>().is_err());
    }
}
