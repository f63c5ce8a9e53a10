//! RMSE-soft, Rand index and t confidence intervals.

use crate::design::{Assortment, ExperimentDesign};
use crate::error::{NestError, Result};
use crate::model::{ChoiceProbabilities, NestPartition, NestedLogitModel};
use crate::sampling::ProbabilityTable;
use crate::stats::t_upper_quantile;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest `n` for exhaustive subset enumeration.
pub const MAX_EXHAUSTIVE_N: usize = 20;

/// Anything that yields choice probabilities on an assortment.
pub trait ChoicePredictor: Sync {
    fn n(&self) -> usize;
    fn has_outside_option(&self) -> bool;
    fn predict(&self, assortment: &Assortment) -> Result<ChoiceProbabilities>;
}

impl ChoicePredictor for NestedLogitModel {
    fn n(&self) -> usize {
        NestedLogitModel::n(self)
    }

    fn has_outside_option(&self) -> bool {
        NestedLogitModel::has_outside_option(self)
    }

    fn predict(&self, assortment: &Assortment) -> Result<ChoiceProbabilities> {
        self.choice_probabilities(assortment)
    }
}

/// Point estimates: the stored probabilities on observed assortments only.
impl ChoicePredictor for ProbabilityTable {
    fn n(&self) -> usize {
        self.n
    }

    fn has_outside_option(&self) -> bool {
        self.outside_option
    }

    fn predict(&self, assortment: &Assortment) -> Result<ChoiceProbabilities> {
        self.find(assortment).cloned().ok_or_else(|| {
            let items: Vec<String> = assortment.items().iter().map(|i| (i + 1).to_string()).collect();
            NestError::UnobservedAssortment(format!("{{{}}}", items.join(",")))
        })
    }
}

/// Squared error and entry count on one assortment.
fn squared_error(
    a: &dyn ChoicePredictor,
    b: &dyn ChoicePredictor,
    s: &Assortment,
) -> Result<(f64, usize)> {
    let (p, q) = (a.predict(s)?, b.predict(s)?);
    let mut sum: f64 = s.items().iter().map(|&i| (p.prob(i) - q.prob(i)).powi(2)).sum();
    let mut count = s.len();
    if a.has_outside_option() {
        sum += (p.outside_prob() - q.outside_prob()).powi(2);
        count += 1;
    }
    Ok((sum, count))
}

fn check_compatible(a: &dyn ChoicePredictor, b: &dyn ChoicePredictor) -> Result<()> {
    if a.n() != b.n() {
        return Err(NestError::Mismatch(format!("{} items against {}", a.n(), b.n())));
    }
    if a.has_outside_option() != b.has_outside_option() {
        return Err(NestError::Mismatch("outside option present in only one model".into()));
    }
    Ok(())
}

/// Root mean squared difference of choice probabilities over every
/// nonempty assortment and every item in it, the outside option included
/// when present.
pub fn rmse_soft(truth: &dyn ChoicePredictor, est: &dyn ChoicePredictor) -> Result<f64> {
    check_compatible(truth, est)?;
    let n = truth.n();
    if n > MAX_EXHAUSTIVE_N {
        return Err(NestError::InvalidArgument(format!(
            "exhaustive evaluation supports at most {MAX_EXHAUSTIVE_N} items, got {n}"
        )));
    }
    let end = 1u64 << n;
    let stripes = 64.min(end);
    let width = end.div_ceil(stripes);
    // fixed stripes summed in order keep the result independent of scheduling
    let parts = (0..stripes)
        .into_par_iter()
        .map(|k| {
            let (lo, hi) = ((k * width).max(1), ((k + 1) * width).min(end));
            let mut acc = (0.0, 0usize);
            for mask in lo..hi {
                let (e, c) = squared_error(truth, est, &Assortment::from_mask(mask))?;
                acc.0 += e;
                acc.1 += c;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<(f64, usize)>>>()?;
    let (sum, count) = parts
        .into_iter()
        .fold((0.0, 0), |(s, c), (e, k)| (s + e, c + k));
    Ok((sum / count as f64).sqrt())
}

/// RMSE-soft over the listed assortments only.
pub fn rmse_soft_restricted(
    truth: &dyn ChoicePredictor,
    est: &dyn ChoicePredictor,
    assortments: &[Assortment],
) -> Result<f64> {
    check_compatible(truth, est)?;
    if assortments.is_empty() {
        return Err(NestError::InvalidArgument("no assortments to evaluate".into()));
    }
    let (mut sum, mut count) = (0.0, 0);
    for s in assortments {
        let (e, c) = squared_error(truth, est, s)?;
        sum += e;
        count += c;
    }
    Ok((sum / count as f64).sqrt())
}

/// Share of unordered item pairs on which both partitions agree about
/// co-membership.
pub fn rand_index(a: &NestPartition, b: &NestPartition) -> Result<f64> {
    let n = a.n();
    if n != b.n() {
        return Err(NestError::Mismatch(format!("partitions over {n} and {} items", b.n())));
    }
    if n < 2 {
        return Ok(1.0);
    }
    let mut agree = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            if a.same_nest(i, j) == b.same_nest(i, j) {
                agree += 1;
            }
        }
    }
    Ok(agree as f64 / (n * (n - 1) / 2) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn half_width(&self) -> f64 {
        (self.high - self.low) / 2.0
    }

    /// Strictly separated, with `self` entirely below `other`.
    pub fn below(&self, other: &Interval) -> bool {
        self.high < other.low
    }
}

/// `mean -/+ t_{(1-level)/2, k-1} sd / sqrt(k)` with the sample standard
/// deviation.
pub fn confidence_interval(values: &[f64], level: f64) -> Result<Interval> {
    let k = values.len();
    if k < 2 {
        return Err(NestError::InvalidArgument(format!(
            "a confidence interval needs at least 2 values, got {k}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(NestError::InvalidArgument(format!("level {level} must lie in (0, 1)")));
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    let half = t_upper_quantile((1.0 - level) / 2.0, (k - 1) as f64) * var.sqrt() / (k as f64).sqrt();
    Ok(Interval {
        mean,
        low: mean - half,
        high: mean + half,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Absent when `n` exceeds the exhaustive limit and a restricted design
    /// was given.
    pub rmse_soft: Option<f64>,
    pub rmse_soft_restricted: Option<f64>,
    pub rand_index: f64,
}

/// Compares an estimated model with the truth, optionally restricted to the
/// assortments of a design.
pub fn evaluate(
    truth: &NestedLogitModel,
    est: &NestedLogitModel,
    restricted: Option<&ExperimentDesign>,
) -> Result<EvaluationReport> {
    let rmse = if truth.n() > MAX_EXHAUSTIVE_N && restricted.is_some() {
        None
    } else {
        Some(rmse_soft(truth, est)?)
    };
    let restricted = match restricted {
        Some(d) => {
            let sets: Vec<Assortment> = d.offered().into_iter().map(|(_, s)| s.clone()).collect();
            Some(rmse_soft_restricted(truth, est, &sets)?)
        }
        None => None,
    };
    Ok(EvaluationReport {
        rmse_soft: rmse,
        rmse_soft_restricted: restricted,
        rand_index: rand_index(truth.partition(), est.partition())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_ground_truth;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mnl(w: Vec<f64>, outside: bool) -> NestedLogitModel {
        NestedLogitModel::multinomial_logit(w, outside).unwrap()
    }

    #[test]
    fn two_item_hand_enumeration() {
        let (a, b) = (mnl(vec![1.0, 1.0], true), mnl(vec![1.0, 2.0], true));
        // {1}: 1/2,1/2 vs 1/2,1/2; {2}: 1/2,1/2 vs 2/3,1/3; {1,2}: 1/3 each vs 1/4,1/2,1/4
        let d2 = 2.0 * (1.0f64 / 6.0).powi(2);
        let d12 = (1.0f64 / 12.0).powi(2) + (1.0f64 / 6.0).powi(2) + (1.0f64 / 12.0).powi(2);
        let expected = ((d2 + d12) / 7.0).sqrt();
        assert!((rmse_soft(&a, &b).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn identical_and_swapped_models_score_zero() {
        let a = mnl(vec![1.0, 2.0, 2.0, 0.5], true);
        assert_eq!(rmse_soft(&a, &a).unwrap(), 0.0);
        let b = mnl(vec![1.0, 2.0, 2.0, 0.5], true);
        assert_eq!(rmse_soft(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn rejects_large_or_mismatched_inputs() {
        let big = mnl(vec![1.0; 21], true);
        assert!(rmse_soft(&big, &big).is_err());
        assert!(rmse_soft(&mnl(vec![1.0; 3], true), &mnl(vec![1.0; 3], false)).is_err());
        assert!(rmse_soft(&mnl(vec![1.0; 3], true), &mnl(vec![1.0; 4], true)).is_err());
    }

    #[test]
    fn restricted_closed_form() {
        // uniform over k + 1 = 4 entries, two of them moved by +/- e
        let e = 0.05;
        let s = Assortment::full(3);
        let truth = ProbabilityTable {
            n: 3,
            outside_option: true,
            rows: vec![crate::sampling::ProbabilityRow {
                label: crate::design::DesignLabel::Control,
                probs: ChoiceProbabilities {
                    assortment: s.clone(),
                    probs: vec![0.25; 3],
                    outside: Some(0.25),
                },
            }],
        };
        let mut est = truth.clone();
        est.rows[0].probs.probs[0] += e;
        est.rows[0].probs.probs[1] -= e;
        let r = rmse_soft_restricted(&truth, &est, &[s]).unwrap();
        assert!((r - (2.0 * e * e / 4.0).sqrt()).abs() < 1e-15);
        assert!(rmse_soft_restricted(&truth, &est, &[Assortment::full(2)]).is_err());
    }

    #[test]
    fn restricted_to_all_subsets_is_full() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = generate_ground_truth(6, true, &mut rng).unwrap();
        let b = generate_ground_truth(6, true, &mut rng).unwrap();
        let all: Vec<Assortment> = (1..64).map(Assortment::from_mask).collect();
        let (x, y) = (rmse_soft(&a, &b).unwrap(), rmse_soft_restricted(&a, &b, &all).unwrap());
        assert!((x - y).abs() < 1e-14);
    }

    #[test]
    fn rand_index_examples() {
        let singles = NestPartition::singletons(4);
        let one = NestPartition::new(4, vec![vec![0, 1, 2, 3]]).unwrap();
        let two = NestPartition::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        assert_eq!(rand_index(&two, &two).unwrap(), 1.0);
        assert_eq!(rand_index(&singles, &one).unwrap(), 0.0);
        assert!((rand_index(&two, &one).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(rand_index(&two, &NestPartition::singletons(5)).is_err());
    }

    #[test]
    fn interval_examples() {
        let c = confidence_interval(&[0.3; 5], 0.95).unwrap();
        assert_eq!((c.low, c.mean, c.high), (0.3, 0.3, 0.3));
        let c = confidence_interval(&[0.0, 1.0], 0.95).unwrap();
        assert!((c.mean - 0.5).abs() < 1e-15);
        // t_{0.025,1} = 12.7062
        assert!((c.half_width() - 12.706204736 * 0.5f64.sqrt() / 2f64.sqrt()).abs() < 1e-6);
        assert!(confidence_interval(&[1.0], 0.95).is_err());
    }

    #[test]
    fn interval_approaches_normal() {
        let values: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
        let c = confidence_interval(&values, 0.95).unwrap();
        let mean = values.iter().sum::<f64>() / 200.0;
        let sd = (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 199.0).sqrt();
        let normal = 1.959963984540054 * sd / 200f64.sqrt();
        assert!((c.half_width() / normal - 1.0).abs() < 0.01);
    }

    #[test]
    fn point_estimates_reject_unobserved_sets() {
        let m = mnl(vec![1.0, 2.0, 0.5], true);
        let design = crate::design::leave_one_out_design(3).unwrap();
        let table = ProbabilityTable::from_model(&m, &design).unwrap();
        assert!(table.predict(&Assortment::full(3)).is_ok());
        assert!(table.predict(&Assortment::from_mask(0b011)).is_ok());
        assert!(matches!(
            table.predict(&Assortment::from_mask(0b001)),
            Err(NestError::UnobservedAssortment(_))
        ));
    }

    fn partition_strategy() -> impl Strategy<Value = (NestPartition, NestPartition)> {
        (2usize..=12).prop_flat_map(|n| {
            (
                prop::collection::vec(0..n, n),
                prop::collection::vec(0..n, n),
            )
                .prop_map(|(a, b)| (NestPartition::from_labels(&a), NestPartition::from_labels(&b)))
        })
    }

    proptest! {
        #[test]
        fn rand_index_is_symmetric_and_bounded((a, b) in partition_strategy()) {
            let x = rand_index(&a, &b).unwrap();
            prop_assert_eq!(x, rand_index(&b, &a).unwrap());
            prop_assert!((0.0..=1.0).contains(&x));
        }

        #[test]
        fn rmse_is_symmetric_and_nonnegative(seed in any::<u64>(), n in 2usize..7, outside in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = generate_ground_truth(n, outside, &mut rng).unwrap();
            let b = generate_ground_truth(n, outside, &mut rng).unwrap();
            let x = rmse_soft(&a, &b).unwrap();
            prop_assert!(x >= 0.0);
            prop_assert!((x - rmse_soft(&b, &a).unwrap()).abs() < 1e-15);
            prop_assert_eq!(rmse_soft(&a, &a).unwrap(), 0.0);
        }
    }
}
