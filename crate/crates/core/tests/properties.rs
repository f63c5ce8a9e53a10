use nestlab::design::{
    balanced_enumeration, min_digit_count, naive_encoding, slice_design, verify_separation, Assortment,
    BaseBEncoding,
};
use nestlab::harness::{compare_designs, ExperimentConfig, Scheme};
use nestlab::identify::{
    boost_factors, exact_identify_with_outside, exact_identify_without_outside, z_statistic, Alternative,
    EQUALITY_TOLERANCE,
};
use nestlab::model::{generate_ground_truth, NestPartition, NestedLogitModel};
use nestlab::recovery::recover_exact;
use nestlab::sampling::{allocate_customers, empirical_probabilities, sample_choices, ProbabilityTable};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model(n: usize, outside: bool, seed: u64) -> NestedLogitModel {
    generate_ground_truth(n, outside, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// Unnormalized model: singleton nests keep an arbitrary lambda.
fn raw_model(n: usize, outside: bool, seed: u64) -> NestedLogitModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let partition = NestPartition::from_labels(&labels);
    let k = partition.len();
    let weights = (0..n).map(|_| rng.random_range(1.0..10.0)).collect();
    let lambda = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
    NestedLogitModel::new(partition, weights, lambda, vec![None; k], outside).unwrap()
}

fn subsets(n: usize) -> impl Iterator<Item = Assortment> {
    (1..1u64 << n).map(Assortment::from_mask)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn balanced_slices_differ_in_size_by_at_most_one(n in 2usize..=1000, base in 2usize..=5) {
        let design = slice_design(&balanced_enumeration(n, base).unwrap());
        let sizes: Vec<usize> = design.experiments().iter().map(|e| e.assortment.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn balanced_codes_are_distinct(n in 2usize..=1000, base in 2usize..=5) {
        let enc = balanced_enumeration(n, base).unwrap();
        let mut codes: Vec<&[usize]> = (0..n).map(|i| enc.digits(i)).collect();
        codes.sort();
        codes.dedup();
        prop_assert_eq!(codes.len(), n);
    }

    #[test]
    fn slice_designs_have_b_times_l_experiments(n in 2usize..=2000, base in 2usize..=5) {
        for enc in [balanced_enumeration(n, base).unwrap(), naive_encoding(n, base).unwrap()] {
            prop_assert_eq!(slice_design(&enc).experiments().len(), base * min_digit_count(n, base));
        }
    }

    #[test]
    fn any_valid_encoding_separates(n in 2usize..=60, base in 2usize..=4, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = min_digit_count(n, base);
        let mut all: Vec<Vec<usize>> = (0..base.pow(l as u32))
            .map(|mut x| (0..l).map(|_| { let d = x % base; x /= base; d }).collect())
            .collect();
        all.shuffle(&mut rng);
        all.truncate(n);
        let enc = BaseBEncoding::from_digits(base, all).unwrap();
        prop_assert!(verify_separation(&slice_design(&enc)).is_empty());
    }

    #[test]
    fn probabilities_sum_to_one(n in 2usize..=8, outside: bool, seed: u64) {
        let m = model(n, outside, seed);
        for s in subsets(n) {
            let p = m.choice_probabilities(&s).unwrap();
            let total: f64 = s.items().iter().map(|&i| p.prob(i)).sum::<f64>()
                + if outside { p.outside_prob() } else { 0.0 };
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn shrinking_an_assortment_never_lowers_a_probability(n in 2usize..=8, outside: bool, seed: u64) {
        let m = model(n, outside, seed);
        let full = (1u64 << n) - 1;
        for small in 1..=full {
            let s = Assortment::from_mask(small);
            let p = m.choice_probabilities(&s).unwrap();
            // one added item at a time covers every chain of containment
            for extra in (0..n).filter(|&i| small >> i & 1 == 0) {
                let q = m.choice_probabilities(&Assortment::from_mask(small | 1 << extra)).unwrap();
                for &i in s.items() {
                    prop_assert!(p.prob(i) >= q.prob(i) - 1e-15);
                }
            }
        }
    }

    #[test]
    fn flattening_singletons_keeps_choice_probabilities(n in 2usize..=9, outside: bool, seed: u64) {
        let raw = raw_model(n, outside, seed);
        let flat = raw.normalize_identifiable();
        for s in subsets(n) {
            let (p, q) = (raw.choice_probabilities(&s).unwrap(), flat.choice_probabilities(&s).unwrap());
            for &i in s.items() {
                prop_assert!((p.prob(i) - q.prob(i)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn singletons_with_unit_lambda_are_multinomial_logit(
        weights in prop::collection::vec(0.1f64..20.0, 2..=8),
        outside: bool,
    ) {
        let n = weights.len();
        let m = NestedLogitModel::multinomial_logit(weights.clone(), outside).unwrap();
        for s in subsets(n) {
            let p = m.choice_probabilities(&s).unwrap();
            let denom: f64 = s.items().iter().map(|&i| weights[i]).sum::<f64>() + f64::from(u8::from(outside));
            for &i in s.items() {
                prop_assert!((p.prob(i) - weights[i] / denom).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn empirical_rows_sum_to_one(n in 2usize..=16, outside: bool, seed: u64, customers in 100u64..100_000) {
        let m = model(n, outside, seed);
        let design = slice_design(&balanced_enumeration(n, 2).unwrap());
        let alloc = allocate_customers(customers, design.offered().len()).unwrap();
        let table = sample_choices(&m, &design, &alloc, seed).unwrap();
        for row in &table.rows {
            prop_assert_eq!(row.counts.iter().sum::<u64>() + row.outside, row.sample_size);
        }
        for row in &empirical_probabilities(&table).unwrap().rows {
            prop_assert!((row.probs.total() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn sampling_is_reproducible(n in 2usize..=16, seed: u64) {
        let m = model(n, true, seed);
        let design = slice_design(&balanced_enumeration(n, 3).unwrap());
        let alloc = allocate_customers(5000, design.offered().len()).unwrap();
        prop_assert_eq!(
            sample_choices(&m, &design, &alloc, seed).unwrap(),
            sample_choices(&m, &design, &alloc, seed).unwrap()
        );
    }

    #[test]
    fn exact_identification_is_symmetric_and_consistent(n in 2usize..=24, outside: bool, seed: u64) {
        let m = model(n, outside, seed);
        let design = slice_design(&balanced_enumeration(n, 2).unwrap());
        let bf = boost_factors(&ProbabilityTable::from_model(&m, &design).unwrap()).unwrap();
        let id = if outside {
            exact_identify_with_outside(&bf, EQUALITY_TOLERANCE).unwrap()
        } else {
            exact_identify_without_outside(&bf, EQUALITY_TOLERANCE)
        };
        prop_assert!(id.edges.is_symmetric());
        prop_assert!(id.inconsistencies.is_empty());
    }

    #[test]
    fn z_is_antisymmetric_on_sampled_tables(n in 3usize..=12, seed: u64) {
        let m = model(n, true, seed);
        let design = slice_design(&balanced_enumeration(n, 2).unwrap());
        let alloc = allocate_customers(20_000, design.offered().len()).unwrap();
        let table = sample_choices(&m, &design, &alloc, seed).unwrap();
        let control = table.control().unwrap();
        for row in &table.rows[1..] {
            let mut alts = vec![Alternative::Outside];
            alts.extend(row.assortment.items().iter().map(|&i| Alternative::Item(i)));
            for &a in &alts {
                for &b in &alts {
                    if let (Ok(x), Ok(y)) = (z_statistic(row, control, a, b), z_statistic(row, control, b, a)) {
                        prop_assert!(x == -y || (x.is_nan() && y.is_nan()));
                    }
                }
            }
        }
    }

    #[test]
    fn recovery_reproduces_every_subset(n in 3usize..=8, outside: bool, seed: u64) {
        let m = model(n, outside, seed);
        let design = slice_design(&balanced_enumeration(n, 2).unwrap());
        prop_assume!(m.check_general_position(&design, 1e-9).is_empty());
        let probs = ProbabilityTable::from_model(&m, &design).unwrap();
        let rec = recover_exact(&probs, m.partition(), Some(&design)).unwrap();
        prop_assume!(rec.violations.is_empty());
        for s in subsets(n) {
            let (p, q) = (m.choice_probabilities(&s).unwrap(), rec.model.choice_probabilities(&s).unwrap());
            for &i in s.items() {
                prop_assert!((p.prob(i) - q.prob(i)).abs() <= 1e-8);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn comparison_grid_is_complete_and_reproducible(
        instances in 1usize..=3,
        schemes in prop::sample::subsequence(vec![Scheme::Balanced, Scheme::Random, Scheme::LeaveOneOut, Scheme::TwoNest], 1..=3),
        seed: u64,
    ) {
        let customers = vec![2000, 5000];
        let cfg = ExperimentConfig::new(6, schemes.clone(), customers.clone(), instances, seed);
        let a = compare_designs(&cfg).unwrap();
        prop_assert_eq!(a.rows.len(), instances * schemes.len() * customers.len());
        let b = compare_designs(&cfg).unwrap();
        for &t in &customers {
            prop_assert_eq!(a.csv_for(t).unwrap(), b.csv_for(t).unwrap());
        }
    }
}
