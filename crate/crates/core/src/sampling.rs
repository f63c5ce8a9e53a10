//! Finite choice data drawn from a model under a design.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::design::{Assortment, DesignLabel, ExperimentDesign};
use crate::error::{NestError, Result};
use crate::model::{ChoiceProbabilities, NestedLogitModel};

/// Splits `total` customers over `k` assortments as evenly as possible; the
/// remainder goes one each to the first assortments.
pub fn allocate_customers(total: u64, k: usize) -> Result<Vec<u64>> {
    if k == 0 || total < k as u64 {
        return Err(NestError::InvalidArgument(format!(
            "cannot split {total} customers over {k} assortments"
        )));
    }
    let base = total / k as u64;
    let extra = (total % k as u64) as usize;
    Ok((0..k).map(|i| base + u64::from(i < extra)).collect())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountRow {
    pub label: DesignLabel,
    pub assortment: Assortment,
    pub sample_size: u64,
    /// Counts in the sorted item order of the assortment.
    pub counts: Vec<u64>,
    pub outside: u64,
}

impl CountRow {
    pub fn count(&self, item: usize) -> u64 {
        self.assortment.position(item).map_or(0, |p| self.counts[p])
    }
}

/// Observed choices for the control and each experiment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChoiceCountTable {
    pub n: usize,
    pub outside_option: bool,
    pub rows: Vec<CountRow>,
}

impl ChoiceCountTable {
    pub fn row(&self, label: DesignLabel) -> Option<&CountRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn control(&self) -> Result<&CountRow> {
        self.row(DesignLabel::Control)
            .ok_or_else(|| NestError::UnobservedAssortment("control".into()))
    }

    pub fn total_customers(&self) -> u64 {
        self.rows.iter().map(|r| r.sample_size).sum()
    }
}

/// Multinomial draw of `m` choices, performed as a chain of binomials over
/// the outside option (if any) followed by items in sorted order.
fn multinomial(m: u64, probs: &ChoiceProbabilities, rng: &mut ChaCha8Rng) -> (u64, Vec<u64>) {
    let mut remaining = m;
    let mut mass = 1.0f64;
    let mut draw = |p: f64, remaining: &mut u64, mass: &mut f64| -> u64 {
        if *remaining == 0 || p <= 0.0 {
            *mass -= p.max(0.0);
            return 0;
        }
        let q = (p / *mass).clamp(0.0, 1.0);
        *mass -= p;
        let x = if q >= 1.0 {
            *remaining
        } else {
            Binomial::new(*remaining, q).expect("q in [0, 1]").sample(rng)
        };
        *remaining -= x;
        x
    };
    let outside = match probs.outside {
        Some(p) => draw(p, &mut remaining, &mut mass),
        None => 0,
    };
    let last = probs.probs.len() - 1;
    let counts = probs
        .probs
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            if k == last {
                std::mem::take(&mut remaining)
            } else {
                draw(p, &mut remaining, &mut mass)
            }
        })
        .collect();
    (outside, counts)
}

/// Draws `allocation[k]` choices on the `k`-th offered assortment. Assortment
/// `k` uses ChaCha stream `k` of `seed`, so rows are independent of
/// evaluation order.
pub fn sample_choices(
    model: &NestedLogitModel,
    design: &ExperimentDesign,
    allocation: &[u64],
    seed: u64,
) -> Result<ChoiceCountTable> {
    let offered = design.offered();
    if allocation.len() != offered.len() {
        return Err(NestError::Mismatch(format!(
            "{} sample sizes for {} assortments",
            allocation.len(),
            offered.len()
        )));
    }
    let rows = offered
        .par_iter()
        .zip(allocation.par_iter())
        .enumerate()
        .map(|(k, (&(label, assortment), &m))| {
            let probs = model.choice_probabilities(assortment)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let (outside, counts) = multinomial(m, &probs, &mut rng);
            Ok(CountRow {
                label,
                assortment: assortment.clone(),
                sample_size: m,
                counts,
                outside,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChoiceCountTable {
        n: design.n(),
        outside_option: model.has_outside_option(),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityRow {
    pub label: DesignLabel,
    pub probs: ChoiceProbabilities,
}

/// Choice probabilities (true or empirical) on the control and each
/// experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityTable {
    pub n: usize,
    pub outside_option: bool,
    pub rows: Vec<ProbabilityRow>,
}

impl ProbabilityTable {
    pub fn from_model(model: &NestedLogitModel, design: &ExperimentDesign) -> Result<Self> {
        let rows = design
            .offered()
            .into_iter()
            .map(|(label, s)| {
                Ok(ProbabilityRow {
                    label,
                    probs: model.choice_probabilities(s)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ProbabilityTable {
            n: model.n(),
            outside_option: model.has_outside_option(),
            rows,
        })
    }

    pub fn row(&self, label: DesignLabel) -> Option<&ChoiceProbabilities> {
        self.rows.iter().find(|r| r.label == label).map(|r| &r.probs)
    }

    pub fn control(&self) -> Result<&ChoiceProbabilities> {
        self.row(DesignLabel::Control)
            .ok_or_else(|| NestError::UnobservedAssortment("control".into()))
    }

    pub fn find(&self, assortment: &Assortment) -> Option<&ChoiceProbabilities> {
        self.rows
            .iter()
            .find(|r| &r.probs.assortment == assortment)
            .map(|r| &r.probs)
    }
}

/// Counts `round(m_S * phi(i, S))` with the rounding residue absorbed by the
/// last item: the deterministic large-sample limit of [`sample_choices`].
pub fn expected_counts(
    model: &NestedLogitModel,
    design: &ExperimentDesign,
    allocation: &[u64],
) -> Result<ChoiceCountTable> {
    let offered = design.offered();
    if allocation.len() != offered.len() {
        return Err(NestError::Mismatch(format!(
            "{} sample sizes for {} assortments",
            allocation.len(),
            offered.len()
        )));
    }
    let rows = offered
        .iter()
        .zip(allocation)
        .map(|(&(label, assortment), &m)| {
            let probs = model.choice_probabilities(assortment)?;
            let round = |p: f64| (p * m as f64).round() as u64;
            let outside = probs.outside.map_or(0, round);
            let mut counts: Vec<u64> = probs.probs.iter().map(|&p| round(p)).collect();
            let used = outside + counts.iter().sum::<u64>();
            let last = counts.last_mut().expect("assortments are nonempty");
            *last = (*last + m).saturating_sub(used);
            let total = outside + counts.iter().sum::<u64>();
            Ok(CountRow {
                label,
                assortment: assortment.clone(),
                sample_size: total,
                counts,
                outside,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChoiceCountTable {
        n: design.n(),
        outside_option: model.has_outside_option(),
        rows,
    })
}

/// `X(i, S) / m_S` on every assortment.
pub fn empirical_probabilities(table: &ChoiceCountTable) -> Result<ProbabilityTable> {
    smoothed_probabilities(table, 0.0)
}

/// `(X(i, S) + a) / (m_S + a * categories)`; `a = 0` gives the plain
/// empirical frequencies.
pub fn smoothed_probabilities(table: &ChoiceCountTable, pseudo_count: f64) -> Result<ProbabilityTable> {
    let rows = table
        .rows
        .iter()
        .map(|r| {
            if r.sample_size == 0 {
                return Err(NestError::NoObservations(r.label.to_string()));
            }
            let categories = r.counts.len() + usize::from(table.outside_option);
            let denom = r.sample_size as f64 + pseudo_count * categories as f64;
            let f = |x: u64| (x as f64 + pseudo_count) / denom;
            Ok(ProbabilityRow {
                label: r.label,
                probs: ChoiceProbabilities {
                    assortment: r.assortment.clone(),
                    probs: r.counts.iter().map(|&x| f(x)).collect(),
                    outside: table.outside_option.then(|| f(r.outside)),
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProbabilityTable {
        n: table.n,
        outside_option: table.outside_option,
        rows,
    })
}
