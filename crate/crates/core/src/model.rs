//! Two-level Nested Logit choice models.

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::design::{Assortment, DesignLabel, ExperimentDesign};
use crate::error::{NestError, Result};

/// Disjoint nests covering `0..n`. Each nest is stored sorted; nest order is
/// whatever the caller supplied, see [`NestPartition::canonical`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NestPartition {
    nests: Vec<Vec<usize>>,
    nest_of: Vec<usize>,
}

impl NestPartition {
    pub fn new(n: usize, nests: Vec<Vec<usize>>) -> Result<Self> {
        let mut nest_of = vec![usize::MAX; n];
        let mut sorted = Vec::with_capacity(nests.len());
        for (k, mut nest) in nests.into_iter().enumerate() {
            if nest.is_empty() {
                return Err(NestError::InvalidArgument(format!("nest {k} is empty")));
            }
            nest.sort_unstable();
            for &i in &nest {
                if i >= n {
                    return Err(NestError::ItemOutOfRange { item: i, n });
                }
                if nest_of[i] != usize::MAX {
                    return Err(NestError::InvalidArgument(format!(
                        "item {} appears in more than one nest",
                        i + 1
                    )));
                }
                nest_of[i] = k;
            }
            sorted.push(nest);
        }
        if let Some(i) = nest_of.iter().position(|&k| k == usize::MAX) {
            return Err(NestError::InvalidArgument(format!(
                "item {} is not in any nest",
                i + 1
            )));
        }
        Ok(NestPartition {
            nests: sorted,
            nest_of,
        })
    }

    /// Groups items by an arbitrary per-item label.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut order: Vec<usize> = Vec::new();
        let mut nests: Vec<Vec<usize>> = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            match order.iter().position(|&x| x == l) {
                Some(k) => nests[k].push(i),
                None => {
                    order.push(l);
                    nests.push(vec![i]);
                }
            }
        }
        NestPartition::new(labels.len(), nests).expect("labels cover every item once")
    }

    pub fn singletons(n: usize) -> Self {
        NestPartition::new(n, (0..n).map(|i| vec![i]).collect()).expect("valid")
    }

    pub fn n(&self) -> usize {
        self.nest_of.len()
    }

    pub fn len(&self) -> usize {
        self.nests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nests.is_empty()
    }

    pub fn nests(&self) -> &[Vec<usize>] {
        &self.nests
    }

    pub fn nest(&self, k: usize) -> &[usize] {
        &self.nests[k]
    }

    pub fn nest_of(&self, item: usize) -> usize {
        self.nest_of[item]
    }

    pub fn same_nest(&self, i: usize, j: usize) -> bool {
        self.nest_of[i] == self.nest_of[j]
    }

    /// Nests ordered by their smallest item.
    pub fn canonical(&self) -> NestPartition {
        let mut nests = self.nests.clone();
        nests.sort_unstable_by_key(|nest| nest[0]);
        NestPartition::new(self.n(), nests).expect("reordering keeps validity")
    }

    /// Same grouping regardless of nest order.
    pub fn equivalent(&self, other: &NestPartition) -> bool {
        self.n() == other.n()
            && self.len() == other.len()
            && (0..self.n()).all(|i| {
                (0..self.n()).all(|j| self.same_nest(i, j) == other.same_nest(i, j))
            })
    }
}

/// Nested Logit parameters. `lambda` and `degenerate_weight` are indexed by
/// nest; `degenerate_weight[k]` is required when `lambda[k] == 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct NestedLogitModel {
    partition: NestPartition,
    weights: Vec<f64>,
    lambda: Vec<f64>,
    degenerate_weight: Vec<Option<f64>>,
    outside_option: bool,
}

impl NestedLogitModel {
    pub fn new(
        partition: NestPartition,
        weights: Vec<f64>,
        lambda: Vec<f64>,
        degenerate_weight: Vec<Option<f64>>,
        outside_option: bool,
    ) -> Result<Self> {
        let n = partition.n();
        let k = partition.len();
        if weights.len() != n {
            return Err(NestError::Mismatch(format!(
                "{} weights for {n} items",
                weights.len()
            )));
        }
        if lambda.len() != k || degenerate_weight.len() != k {
            return Err(NestError::Mismatch(format!(
                "{} dissimilarities and {} degenerate weights for {k} nests",
                lambda.len(),
                degenerate_weight.len()
            )));
        }
        if let Some(i) = weights.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(NestError::InvalidArgument(format!(
                "weight of item {} must be positive",
                i + 1
            )));
        }
        for (idx, (&l, d)) in lambda.iter().zip(&degenerate_weight).enumerate() {
            if !(0.0..=1.0).contains(&l) {
                return Err(NestError::InvalidArgument(format!(
                    "dissimilarity {l} of nest {idx} outside [0, 1]"
                )));
            }
            match d {
                Some(v) if !(*v > 0.0 && v.is_finite()) => {
                    return Err(NestError::InvalidArgument(format!(
                        "degenerate weight of nest {idx} must be positive"
                    )))
                }
                None if l == 0.0 => {
                    return Err(NestError::InvalidArgument(format!(
                        "nest {idx} has zero dissimilarity but no nest weight"
                    )))
                }
                _ => {}
            }
        }
        Ok(NestedLogitModel {
            partition,
            weights,
            lambda,
            degenerate_weight,
            outside_option,
        })
    }

    /// Every item in its own nest with dissimilarity 1.
    pub fn multinomial_logit(weights: Vec<f64>, outside_option: bool) -> Result<Self> {
        let n = weights.len();
        NestedLogitModel::new(
            NestPartition::singletons(n),
            weights,
            vec![1.0; n],
            vec![None; n],
            outside_option,
        )
    }

    pub fn n(&self) -> usize {
        self.partition.n()
    }

    pub fn partition(&self) -> &NestPartition {
        &self.partition
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn degenerate_weight(&self) -> &[Option<f64>] {
        &self.degenerate_weight
    }

    pub fn has_outside_option(&self) -> bool {
        self.outside_option
    }

    pub fn with_outside_option(mut self, outside_option: bool) -> Self {
        self.outside_option = outside_option;
        self
    }

    /// `log v_N(S)`, or `None` when the nest contributes nothing.
    pub fn log_nest_weight(&self, nest: usize, assortment: &Assortment) -> Option<f64> {
        let sum: f64 = self
            .partition
            .nest(nest)
            .iter()
            .filter(|&&i| assortment.contains(i))
            .map(|&i| self.weights[i])
            .sum();
        if sum <= 0.0 {
            return None;
        }
        let l = self.lambda[nest];
        if l == 0.0 {
            self.degenerate_weight[nest].map(f64::ln)
        } else {
            Some(l * sum.ln())
        }
    }

    pub fn nest_weight(&self, nest: usize, assortment: &Assortment) -> f64 {
        self.log_nest_weight(nest, assortment).map_or(0.0, f64::exp)
    }

    pub fn choice_probabilities(&self, assortment: &Assortment) -> Result<ChoiceProbabilities> {
        if assortment.is_empty() {
            return Err(NestError::EmptyAssortment);
        }
        if let Some(&item) = assortment.items().last() {
            if item >= self.n() {
                return Err(NestError::ItemOutOfRange { item, n: self.n() });
            }
        }
        let k = self.partition.len();
        let mut inner = vec![0.0; k];
        for &i in assortment.items() {
            inner[self.partition.nest_of(i)] += self.weights[i];
        }
        let logs: Vec<Option<f64>> = (0..k)
            .map(|nest| self.log_nest_weight(nest, assortment))
            .collect();
        let mut top = if self.outside_option { 0.0 } else { f64::NEG_INFINITY };
        for &lw in logs.iter().flatten() {
            top = top.max(lw);
        }
        let mut total = if self.outside_option { (-top).exp() } else { 0.0 };
        for &lw in logs.iter().flatten() {
            total += (lw - top).exp();
        }
        let log_denominator = top + total.ln();
        let nest_prob: Vec<f64> = logs
            .iter()
            .map(|lw| lw.map_or(0.0, |lw| (lw - log_denominator).exp()))
            .collect();
        let probs = assortment
            .items()
            .iter()
            .map(|&i| {
                let nest = self.partition.nest_of(i);
                nest_prob[nest] * self.weights[i] / inner[nest]
            })
            .collect();
        let outside = self
            .outside_option
            .then(|| (-log_denominator).exp());
        Ok(ChoiceProbabilities {
            assortment: assortment.clone(),
            probs,
            outside,
        })
    }

    /// Splits multi-item nests with dissimilarity 1 and folds the dissimilarity
    /// of singleton nests into their weight, leaving choice probabilities
    /// unchanged.
    pub fn normalize_identifiable(&self) -> NestedLogitModel {
        let mut nests = Vec::new();
        let mut lambda = Vec::new();
        let mut degenerate = Vec::new();
        let mut weights = self.weights.clone();
        for (k, nest) in self.partition.nests().iter().enumerate() {
            let l = self.lambda[k];
            if nest.len() == 1 {
                let i = nest[0];
                if l == 0.0 {
                    weights[i] = self.degenerate_weight[k].expect("validated");
                } else if l < 1.0 {
                    weights[i] = (l * weights[i].ln()).exp();
                }
                nests.push(vec![i]);
                lambda.push(1.0);
                degenerate.push(None);
            } else if l >= 1.0 {
                for &i in nest {
                    nests.push(vec![i]);
                    lambda.push(1.0);
                    degenerate.push(None);
                }
            } else {
                nests.push(nest.clone());
                lambda.push(l);
                degenerate.push(if l == 0.0 { self.degenerate_weight[k] } else { None });
            }
        }
        let partition = NestPartition::new(self.n(), nests).expect("same cover");
        NestedLogitModel::new(partition, weights, lambda, degenerate, self.outside_option)
            .expect("normalization keeps parameters valid")
    }

    /// `Mult(N, S) = (sum_N v / sum_{N cap S} v)^(1 - lambda_N)`; `None`
    /// unless the nest is partially inside `S`.
    pub fn multiplier(&self, nest: usize, assortment: &Assortment) -> Option<f64> {
        let members = self.partition.nest(nest);
        let inside: f64 = members
            .iter()
            .filter(|&&i| assortment.contains(i))
            .map(|&i| self.weights[i])
            .sum();
        let offered = members.iter().filter(|&&i| assortment.contains(i)).count();
        if offered == 0 || offered == members.len() {
            return None;
        }
        let all: f64 = members.iter().map(|&i| self.weights[i]).sum();
        Some(((1.0 - self.lambda[nest]) * (all / inside).ln()).exp())
    }

    /// Pairs of partially offered nests whose multipliers coincide within
    /// relative `tolerance` on some experiment.
    pub fn check_general_position(
        &self,
        design: &ExperimentDesign,
        tolerance: f64,
    ) -> Vec<(DesignLabel, usize, usize)> {
        let mut out = Vec::new();
        for e in design.experiments() {
            let mults: Vec<(usize, f64)> = (0..self.partition.len())
                .filter_map(|k| self.multiplier(k, &e.assortment).map(|m| (k, m)))
                .collect();
            for (a, &(k1, m1)) in mults.iter().enumerate() {
                for &(k2, m2) in &mults[a + 1..] {
                    if approx_equal(m1, m2, tolerance) {
                        out.push((e.label, k1, k2));
                    }
                }
            }
        }
        out
    }
}

pub(crate) fn approx_equal(a: f64, b: f64, tolerance: f64) -> bool {
    (a - b).abs() <= tolerance * a.abs().max(b.abs())
}

/// Choice probabilities on a single assortment. `probs` follows the sorted
/// item order of the assortment.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiceProbabilities {
    pub assortment: Assortment,
    pub probs: Vec<f64>,
    pub outside: Option<f64>,
}

impl ChoiceProbabilities {
    /// Probability of `item`, zero when not offered.
    pub fn prob(&self, item: usize) -> f64 {
        self.assortment
            .position(item)
            .map_or(0.0, |p| self.probs[p])
    }

    pub fn outside_prob(&self) -> f64 {
        self.outside.unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum::<f64>() + self.outside_prob()
    }
}

/// Random ground truth: items are shuffled, cut into `K ~ U{1..n/2}`
/// contiguous nests, weights are `U[1, 10]`, dissimilarities `U[0.3, 0.6]`.
/// Singleton nests are then folded into plain items.
pub fn generate_ground_truth<R: Rng + ?Sized>(
    n: usize,
    outside_option: bool,
    rng: &mut R,
) -> Result<NestedLogitModel> {
    if n < 2 {
        return Err(NestError::InvalidArgument(
            "ground truth needs n >= 2".into(),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let k = rng.random_range(1..=n / 2);
    let mut cuts = index::sample(rng, n - 1, k - 1).into_vec();
    cuts.sort_unstable();
    let mut nests = Vec::with_capacity(k);
    let mut start = 0;
    for cut in cuts.into_iter().map(|c| c + 1).chain(std::iter::once(n)) {
        nests.push(order[start..cut].to_vec());
        start = cut;
    }
    let weights = (0..n).map(|_| rng.random_range(1.0..=10.0)).collect();
    let lambda = (0..k).map(|_| rng.random_range(0.3..=0.6)).collect();
    let partition = NestPartition::new(n, nests)?;
    let model = NestedLogitModel::new(partition, weights, lambda, vec![None; k], outside_option)?;
    Ok(model.normalize_identifiable())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{naive_encoding, slice_design};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set(items: &[usize], n: usize) -> Assortment {
        Assortment::new(items.to_vec(), n).unwrap()
    }

    fn two_nest() -> NestedLogitModel {
        let p = NestPartition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        NestedLogitModel::new(p, vec![1.0, 2.0, 3.0, 4.0], vec![0.5, 0.3], vec![None; 2], true)
            .unwrap()
    }

    #[test]
    fn nest_weight_branches() {
        let m = two_nest();
        assert_eq!(m.nest_weight(0, &set(&[2, 3], 4)), 0.0);
        assert!((m.nest_weight(0, &set(&[0, 1], 4)) - 3f64.sqrt()).abs() < 1e-15);

        let p = NestPartition::new(3, vec![vec![0, 1], vec![2]]).unwrap();
        let m = NestedLogitModel::new(p, vec![1.0, 5.0, 2.0], vec![0.0, 1.0], vec![Some(7.0), None], false)
            .unwrap();
        assert!((m.nest_weight(0, &set(&[0], 3)) - 7.0).abs() < 1e-12);
        assert!((m.nest_weight(0, &set(&[0, 1], 3)) - 7.0).abs() < 1e-12);
        assert!((m.nest_weight(1, &set(&[2], 3)) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_lambda_without_weight_rejected() {
        let p = NestPartition::new(2, vec![vec![0, 1]]).unwrap();
        assert!(NestedLogitModel::new(p, vec![1.0, 1.0], vec![0.0], vec![None], true).is_err());
    }

    #[test]
    fn mnl_collapse() {
        let m = NestedLogitModel::multinomial_logit(vec![1.0, 2.0, 3.0], true).unwrap();
        let s = set(&[0, 2], 3);
        let p = m.choice_probabilities(&s).unwrap();
        assert!((p.prob(0) - 1.0 / 5.0).abs() < 1e-15);
        assert!((p.prob(2) - 3.0 / 5.0).abs() < 1e-15);
        assert!((p.outside_prob() - 1.0 / 5.0).abs() < 1e-15);
        assert_eq!(p.prob(1), 0.0);
    }

    #[test]
    fn single_nest_without_outside_is_proportional() {
        let p = NestPartition::new(3, vec![vec![0, 1, 2]]).unwrap();
        let m = NestedLogitModel::new(p, vec![1.0, 2.0, 5.0], vec![0.4], vec![None], false).unwrap();
        let probs = m.choice_probabilities(&Assortment::full(3)).unwrap();
        assert!((probs.prob(2) - 0.625).abs() < 1e-15);
        assert_eq!(probs.outside, None);
    }

    #[test]
    fn empty_assortment_rejected() {
        let m = two_nest();
        assert!(matches!(
            m.choice_probabilities(&set(&[], 4)),
            Err(NestError::EmptyAssortment)
        ));
    }

    #[test]
    fn hand_computed_probabilities() {
        let m = two_nest();
        let s = set(&[0, 1, 2], 4);
        let p = m.choice_probabilities(&s).unwrap();
        let a = 3f64.powf(0.5);
        let b = 3f64.powf(0.3);
        let d = 1.0 + a + b;
        assert!((p.prob(0) - a / d / 3.0).abs() < 1e-15);
        assert!((p.prob(1) - a / d * 2.0 / 3.0).abs() < 1e-15);
        assert!((p.prob(2) - b / d).abs() < 1e-15);
        assert!((p.outside_prob() - 1.0 / d).abs() < 1e-15);
    }

    #[test]
    fn large_weights_do_not_overflow() {
        let p = NestPartition::new(2, vec![vec![0, 1]]).unwrap();
        let m = NestedLogitModel::new(p, vec![1e300, 1e300], vec![1.0], vec![None], true).unwrap();
        let probs = m.choice_probabilities(&Assortment::full(2)).unwrap();
        assert!((probs.prob(0) - 0.5).abs() < 1e-12);
        assert!(probs.outside_prob() >= 0.0);
    }

    #[test]
    fn flattening_two_item_nest() {
        let (vi, vj, l) = (2.0f64, 3.0, 0.4);
        let nested = NestedLogitModel::new(
            NestPartition::new(4, vec![vec![0, 1], vec![2], vec![3]]).unwrap(),
            vec![vi, vj, 1.5, 4.0],
            vec![l, 1.0, 1.0],
            vec![None; 3],
            true,
        )
        .unwrap();
        let f = (vi + vj).powf(l - 1.0);
        let flat =
            NestedLogitModel::multinomial_logit(vec![vi * f, vj * f, 1.5, 4.0], true).unwrap();
        for mask in 1u64..16 {
            let s = Assortment::from_mask(mask);
            if s.contains(0) != s.contains(1) {
                continue;
            }
            let a = nested.choice_probabilities(&s).unwrap();
            let b = flat.choice_probabilities(&s).unwrap();
            for i in 0..4 {
                assert!((a.prob(i) - b.prob(i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normalize_splits_and_folds() {
        let m = NestedLogitModel::new(
            NestPartition::new(3, vec![vec![0, 1], vec![2]]).unwrap(),
            vec![2.0, 3.0, 4.0],
            vec![1.0, 0.5],
            vec![None; 2],
            true,
        )
        .unwrap();
        let norm = m.normalize_identifiable();
        assert_eq!(norm.partition().nests(), &[vec![0], vec![1], vec![2]]);
        assert_eq!(norm.weights()[..2], [2.0, 3.0]);
        assert!((norm.weights()[2] - 2.0).abs() < 1e-15);
        assert_eq!(norm.lambda(), &[1.0, 1.0, 1.0]);
        assert_eq!(norm.normalize_identifiable(), norm);

        let degenerate = NestedLogitModel::new(
            NestPartition::new(2, vec![vec![0], vec![1]]).unwrap(),
            vec![2.0, 3.0],
            vec![0.0, 1.0],
            vec![Some(6.0), None],
            false,
        )
        .unwrap();
        assert_eq!(degenerate.normalize_identifiable().weights(), &[6.0, 3.0]);
    }

    #[test]
    fn general_position_flags_equal_multipliers() {
        // S(1,-0) = {3, 4} keeps half of each nest's weight
        let m = NestedLogitModel::new(
            NestPartition::new(4, vec![vec![0, 2], vec![1, 3]]).unwrap(),
            vec![1.0; 4],
            vec![0.5, 0.5],
            vec![None; 2],
            true,
        )
        .unwrap();
        let design = slice_design(&naive_encoding(4, 2).unwrap());
        let flagged = m.check_general_position(&design, 1e-9);
        assert!(!flagged.is_empty());
        let mult = m.multiplier(0, &design.experiments()[0].assortment).unwrap();
        assert!((mult - 2f64.sqrt()).abs() < 1e-15);

        let fitted = NestedLogitModel::new(
            NestPartition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap(),
            vec![1.0; 4],
            vec![0.5, 0.5],
            vec![None; 2],
            true,
        )
        .unwrap();
        let whole = ExperimentDesign::new(
            4,
            None,
            vec![crate::design::Experiment {
                label: DesignLabel::Randomized(0),
                assortment: set(&[0, 1], 4),
            }],
        )
        .unwrap();
        assert!(fitted.check_general_position(&whole, 1e-9).is_empty());
    }

    #[test]
    fn generator_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 2..30 {
            let m = generate_ground_truth(n, true, &mut rng).unwrap();
            assert_eq!(m.n(), n);
            let w = m.weights();
            let max = w.iter().cloned().fold(f64::MIN, f64::max);
            let min = w.iter().cloned().fold(f64::MAX, f64::min);
            assert!(max / min <= 10.0);
            let multi = m.partition().nests().iter().filter(|x| x.len() > 1).count();
            assert!(multi <= n / 2);
            for (k, nest) in m.partition().nests().iter().enumerate() {
                let l = m.lambda()[k];
                if nest.len() == 1 {
                    assert_eq!(l, 1.0);
                } else {
                    assert!((0.3..=0.6).contains(&l));
                }
            }
        }
        let a = generate_ground_truth(12, true, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = generate_ground_truth(12, true, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(generate_ground_truth(1, true, &mut rng).is_err());
    }

    #[test]
    fn partition_helpers() {
        let p = NestPartition::from_labels(&[3, 1, 3, 2]);
        assert_eq!(p.nests(), &[vec![0, 2], vec![1], vec![3]]);
        let q = NestPartition::new(4, vec![vec![3], vec![2, 0], vec![1]]).unwrap();
        assert!(p.equivalent(&q));
        assert_eq!(q.canonical(), p);
        assert!(NestPartition::new(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(NestPartition::new(3, vec![vec![0, 1]]).is_err());
    }
}
