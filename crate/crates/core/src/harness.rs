//! End-to-end pipelines and the design-comparison grid.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{
    balanced_enumeration, incremental_design, leave_one_out_design, naive_encoding,
    randomized_design, slice_design, Assortment, ExperimentDesign, SizeRule,
};
use crate::error::{NestError, Result};
use crate::identify::{
    boost_factors, exact_identify_with_outside, exact_identify_without_outside, identify_counts,
    IdentifyMode, TestConfig, EQUALITY_TOLERANCE,
};
use crate::metrics::{confidence_interval, rand_index, rmse_soft, rmse_soft_restricted, Interval, MAX_EXHAUSTIVE_N};
use crate::model::{generate_ground_truth, NestPartition, NestedLogitModel};
use crate::recovery::{recover_exact, recover_least_squares};
use crate::sampling::{
    allocate_customers, empirical_probabilities, sample_choices, smoothed_probabilities,
    ChoiceCountTable, ProbabilityTable,
};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "NESTLAB_THREADS";

/// Pseudo-count added to every cell before least-squares recovery.
pub const SMOOTHING: f64 = 0.5;

/// Sizes the global thread pool from [`THREADS_ENV`] when it is set.
pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .map_err(|_| NestError::InvalidArgument(format!("{THREADS_ENV} = `{value}` is not a count")))?;
    // a pool built earlier in the process wins
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

/// A design paired with an estimation procedure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Slices of the balanced enumeration, identified nests.
    Balanced,
    /// Slices of the naive base-`b` encoding, identified nests.
    Naive,
    /// Randomized assortments, identified nests.
    Random,
    #[serde(rename = "loo")]
    LeaveOneOut,
    Incremental,
    /// Balanced slice data fitted with the fixed half split.
    TwoNest,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Balanced => "balanced",
            Scheme::Naive => "naive",
            Scheme::Random => "random",
            Scheme::LeaveOneOut => "loo",
            Scheme::Incremental => "incremental",
            Scheme::TwoNest => "two_nest",
        }
    }

    fn index(self) -> u64 {
        self as u64
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomSizes {
    /// `floor(n / 2)` items each.
    #[default]
    Half,
    /// Uniform on `3..=6`.
    ThreeToSix,
}

fn default_base() -> usize {
    2
}
fn default_true() -> bool {
    true
}
fn default_mode() -> IdentifyMode {
    IdentifyMode::Noisy
}
fn default_random_count() -> usize {
    8
}
fn default_delta() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    #[serde(default = "default_base")]
    pub base: usize,
    pub schemes: Vec<Scheme>,
    /// Customer budgets `T`.
    pub customers: Vec<u64>,
    pub instances: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub outside_option: bool,
    #[serde(default = "default_mode")]
    pub mode: IdentifyMode,
    #[serde(default)]
    pub test: TestConfig,
    /// Failure probability of the threshold test.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Number of randomized assortments.
    #[serde(default = "default_random_count")]
    pub random_assortments: usize,
    #[serde(default)]
    pub random_sizes: RandomSizes,
    /// Replace sampled counts by exact choice probabilities.
    #[serde(default)]
    pub exact_probabilities: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(n: usize, schemes: Vec<Scheme>, customers: Vec<u64>, instances: usize, seed: u64) -> Self {
        ExperimentConfig {
            n,
            base: default_base(),
            schemes,
            customers,
            instances,
            seed,
            outside_option: true,
            mode: default_mode(),
            test: TestConfig::default(),
            delta: default_delta(),
            random_assortments: default_random_count(),
            random_sizes: RandomSizes::Half,
            exact_probabilities: false,
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NestError::InvalidArgument(m));
        if self.n < 2 {
            return bad(format!("n = {} is below 2", self.n));
        }
        if self.base < 2 {
            return bad(format!("base {} is below 2", self.base));
        }
        if self.schemes.is_empty() || self.customers.is_empty() || self.instances == 0 {
            return bad("schemes, customer budgets and instances must be nonempty".into());
        }
        self.test.validate()?;
        for &scheme in &self.schemes {
            let k = build_design(self, scheme, &mut ChaCha8Rng::seed_from_u64(0))?
                .offered()
                .len() as u64;
            if let Some(&t) = self.customers.iter().find(|&&t| t < k) {
                return bad(format!(
                    "T = {t} is below the {k} assortments of scheme {}",
                    scheme.name()
                ));
            }
        }
        Ok(())
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one value stream, derived from the master seed and a key.
pub fn derive_seed(master: u64, key: &[u64]) -> u64 {
    key.iter().fold(mix(master), |h, &k| mix(h ^ mix(k)))
}

/// Seed of the ground truth for `instance`; shared by every scheme and `T`.
pub fn instance_seed(master: u64, instance: usize) -> u64 {
    derive_seed(master, &[0, instance as u64])
}

/// Seed of one grid cell.
pub fn cell_seed(master: u64, instance: usize, scheme: Scheme, customers: u64) -> u64 {
    derive_seed(master, &[1, instance as u64, scheme.index(), customers])
}

pub fn ground_truth(config: &ExperimentConfig, instance: usize) -> Result<NestedLogitModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(instance_seed(config.seed, instance));
    generate_ground_truth(config.n, config.outside_option, &mut rng)
}

pub fn build_design(
    config: &ExperimentConfig,
    scheme: Scheme,
    rng: &mut ChaCha8Rng,
) -> Result<ExperimentDesign> {
    let n = config.n;
    match scheme {
        Scheme::Balanced | Scheme::TwoNest => Ok(slice_design(&balanced_enumeration(n, config.base)?)),
        Scheme::Naive => Ok(slice_design(&naive_encoding(n, config.base)?)),
        Scheme::Random => {
            let rule = match config.random_sizes {
                RandomSizes::Half => SizeRule::Half,
                RandomSizes::ThreeToSix => SizeRule::Uniform { min: 3, max: 6 },
            };
            randomized_design(n, config.random_assortments, rule, rng)
        }
        Scheme::LeaveOneOut => leave_one_out_design(n),
        Scheme::Incremental => incremental_design(n, rng),
    }
}

/// Items `1..=floor(n/2)` against the rest.
pub fn two_nest_partition(n: usize) -> Result<NestPartition> {
    if n < 2 {
        return Err(NestError::InvalidArgument("the half split needs n >= 2".into()));
    }
    NestPartition::new(n, vec![(0..n / 2).collect(), (n / 2..n).collect()])
}

/// Empirical probabilities of every observed assortment, usable as a
/// predictor on those assortments only.
pub fn point_estimate_baseline(counts: &ChoiceCountTable) -> Result<ProbabilityTable> {
    empirical_probabilities(counts)
}

/// One `(instance, scheme, T)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineRow {
    pub instance: usize,
    pub scheme: Scheme,
    pub customers: u64,
    pub seed: u64,
    /// Nests in the 1-based `1 2|3 4` notation.
    pub partition: String,
    pub nests: usize,
    pub rand_index: f64,
    /// Over every nonempty assortment; empty above the exhaustive limit or
    /// when recovery failed.
    pub rmse_soft: Option<f64>,
    /// Over the design's assortments; the point estimate's when recovery
    /// failed.
    pub rmse_soft_restricted: f64,
    pub recovery_failed: bool,
    pub violations: usize,
}

pub fn format_partition(p: &NestPartition) -> String {
    p.canonical()
        .nests()
        .iter()
        .map(|nest| nest.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("|")
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOutcome {
    pub row: PipelineRow,
    pub model: Option<NestedLogitModel>,
}

/// Design, allocation, sampling, identification, least-squares recovery and
/// evaluation against the truth.
pub fn run_pipeline(
    config: &ExperimentConfig,
    truth: &NestedLogitModel,
    instance: usize,
    scheme: Scheme,
    customers: u64,
    seed: u64,
) -> Result<PipelineOutcome> {
    let n = config.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let design = build_design(config, scheme, &mut rng)?;
    let offered: Vec<Assortment> = design.offered().into_iter().map(|(_, s)| s.clone()).collect();
    let sample_seed = derive_seed(seed, &[2]);

    let (partition, recovered, baseline, violations) = if config.exact_probabilities {
        let probs = ProbabilityTable::from_model(truth, &design)?;
        let partition = match scheme {
            Scheme::TwoNest => two_nest_partition(n)?,
            _ => {
                let bf = boost_factors(&probs)?;
                if truth.has_outside_option() {
                    exact_identify_with_outside(&bf, EQUALITY_TOLERANCE)?.partition
                } else {
                    exact_identify_without_outside(&bf, EQUALITY_TOLERANCE).partition
                }
            }
        };
        let rec = match scheme {
            Scheme::TwoNest => recover_least_squares(&probs, &partition),
            _ => recover_exact(&probs, &partition, Some(&design)),
        };
        let violations = rec.as_ref().map_or(0, |r| r.violations.len());
        (partition, rec.map(|r| r.model), probs, violations)
    } else {
        let alloc = allocate_customers(customers, offered.len())?;
        let counts = sample_choices(truth, &design, &alloc, sample_seed)?;
        let partition = match scheme {
            Scheme::TwoNest => two_nest_partition(n)?,
            _ => identify_counts(&counts, config.mode, &config.test, config.delta)?.partition,
        };
        let rec = recover_least_squares(&smoothed_probabilities(&counts, SMOOTHING)?, &partition);
        let violations = rec.as_ref().map_or(0, |r| r.violations.len());
        (partition, rec.map(|r| r.model), point_estimate_baseline(&counts)?, violations)
    };

    let (model, rmse, restricted, failed) = match recovered {
        Ok(model) => {
            let rmse = if n <= MAX_EXHAUSTIVE_N {
                Some(rmse_soft(truth, &model)?)
            } else {
                None
            };
            let restricted = rmse_soft_restricted(truth, &model, &offered)?;
            (Some(model), rmse, restricted, false)
        }
        Err(_) => (None, None, rmse_soft_restricted(truth, &baseline, &offered)?, true),
    };
    Ok(PipelineOutcome {
        row: PipelineRow {
            instance,
            scheme,
            customers,
            seed,
            partition: format_partition(&partition),
            nests: partition.len(),
            rand_index: rand_index(truth.partition(), &partition)?,
            rmse_soft: rmse,
            rmse_soft_restricted: restricted,
            recovery_failed: failed,
            violations,
        },
        model,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scheme: Scheme,
    pub customers: u64,
    pub instances: usize,
    pub failures: usize,
    /// Absent with fewer than two values.
    pub rmse_soft: Option<Interval>,
    pub rmse_soft_restricted: Option<Interval>,
    pub rand_index: Option<Interval>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub config: ExperimentConfig,
    pub rows: Vec<PipelineRow>,
    pub summary: Vec<SummaryRow>,
}

impl ComparisonReport {
    pub fn summary_for(&self, scheme: Scheme, customers: u64) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|s| s.scheme == scheme && s.customers == customers)
    }

    /// Rows for one budget as CSV.
    pub fn csv_for(&self, customers: u64) -> Result<String> {
        let mut out = csv::Writer::from_writer(Vec::new());
        for row in self.rows.iter().filter(|r| r.customers == customers) {
            out.serialize(row)?;
        }
        let bytes = out.into_inner().map_err(|e| NestError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// `results_T<T>.csv` per budget and `summary.json`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for &t in &self.config.customers {
            let path = dir.join(format!("results_T{t}.csv"));
            fs::write(&path, self.csv_for(t)?)?;
            written.push(path);
        }
        let path = dir.join("summary.json");
        crate::io::write_json(&self.summary, &path)?;
        written.push(path);
        Ok(written)
    }
}

fn interval(values: &[f64]) -> Option<Interval> {
    confidence_interval(values, 0.95).ok()
}

/// Runs every `(instance, scheme, T)` cell in parallel and aggregates per
/// `(scheme, T)`.
pub fn compare_designs(config: &ExperimentConfig) -> Result<ComparisonReport> {
    config.validate()?;
    let truths = (0..config.instances)
        .into_par_iter()
        .map(|i| ground_truth(config, i))
        .collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    for &t in &config.customers {
        for &scheme in &config.schemes {
            for instance in 0..config.instances {
                cells.push((t, scheme, instance));
            }
        }
    }
    let rows = cells
        .into_par_iter()
        .map(|(t, scheme, instance)| {
            let seed = cell_seed(config.seed, instance, scheme, t);
            run_pipeline(config, &truths[instance], instance, scheme, t, seed).map(|o| o.row)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut groups: BTreeMap<(u64, usize), Vec<&PipelineRow>> = BTreeMap::new();
    for r in &rows {
        let pos = config.schemes.iter().position(|&s| s == r.scheme).expect("listed scheme");
        groups.entry((r.customers, pos)).or_default().push(r);
    }
    let order: Vec<u64> = config.customers.clone();
    let mut summary: Vec<SummaryRow> = groups
        .into_iter()
        .map(|((t, pos), g)| {
            let rmse: Vec<f64> = g.iter().filter_map(|r| r.rmse_soft).collect();
            let restricted: Vec<f64> = g.iter().map(|r| r.rmse_soft_restricted).collect();
            let ri: Vec<f64> = g.iter().map(|r| r.rand_index).collect();
            SummaryRow {
                scheme: config.schemes[pos],
                customers: t,
                instances: g.len(),
                failures: g.iter().filter(|r| r.recovery_failed).count(),
                rmse_soft: interval(&rmse),
                rmse_soft_restricted: interval(&restricted),
                rand_index: interval(&ri),
            }
        })
        .collect();
    summary.sort_by_key(|s| {
        (
            order.iter().position(|&t| t == s.customers),
            config.schemes.iter().position(|&x| x == s.scheme),
        )
    });
    let report = ComparisonReport {
        config: config.clone(),
        rows,
        summary,
    };
    if let Some(dir) = &config.output_dir {
        report.write(dir)?;
    }
    Ok(report)
}
