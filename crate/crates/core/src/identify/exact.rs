//! Deductive nest identification from boost-factor comparisons.

use super::boost::BoostTable;
use super::edge::EdgeMatrix;
use super::ztest::{z_statistic, Alternative, ZThreshold};
use super::Identification;
use crate::design::{Assortment, DesignLabel};
use crate::error::{NestError, Result};
use crate::model::approx_equal;
use crate::sampling::{ChoiceCountTable, CountRow};

/// Boost-factor comparisons on each experiment. `None` means the data carry
/// no evidence either way.
pub trait BoostEvidence {
    fn experiments(&self) -> usize;
    fn assortment(&self, s: usize) -> &Assortment;
    /// `BF(i, S) == BF(j, S)`.
    fn equal(&self, s: usize, i: usize, j: usize) -> Option<bool>;
    /// `BF(i, S) == BF(0, S)`.
    fn equal_outside(&self, s: usize, i: usize) -> Option<bool>;
    /// `BF(i, S) > BF(0, S)`.
    fn above_outside(&self, s: usize, i: usize) -> Option<bool>;
    /// Items attaining the smallest boost factor in `S`.
    fn min_set(&self, s: usize) -> Vec<usize>;
}

/// Comparisons on exact boost factors up to a relative tolerance.
pub struct ExactEvidence<'a> {
    table: &'a BoostTable,
    tolerance: f64,
}

impl<'a> ExactEvidence<'a> {
    pub fn new(table: &'a BoostTable, tolerance: f64) -> Self {
        ExactEvidence { table, tolerance }
    }
}

impl BoostEvidence for ExactEvidence<'_> {
    fn experiments(&self) -> usize {
        self.table.rows.len()
    }

    fn assortment(&self, s: usize) -> &Assortment {
        &self.table.rows[s].assortment
    }

    fn equal(&self, s: usize, i: usize, j: usize) -> Option<bool> {
        let row = &self.table.rows[s];
        Some(approx_equal(row.factor(i), row.factor(j), self.tolerance))
    }

    fn equal_outside(&self, s: usize, i: usize) -> Option<bool> {
        let row = &self.table.rows[s];
        row.outside
            .map(|b0| approx_equal(row.factor(i), b0, self.tolerance))
    }

    fn above_outside(&self, s: usize, i: usize) -> Option<bool> {
        let row = &self.table.rows[s];
        row.outside.map(|b0| {
            let bf = row.factor(i);
            bf > b0 && !approx_equal(bf, b0, self.tolerance)
        })
    }

    fn min_set(&self, s: usize) -> Vec<usize> {
        self.table.rows[s].min_set(self.tolerance)
    }
}

/// Comparisons by thresholding `|z|` at a fixed cutoff.
pub struct ThresholdEvidence<'a> {
    rows: Vec<&'a CountRow>,
    control: &'a CountRow,
    threshold: f64,
}

impl<'a> ThresholdEvidence<'a> {
    pub fn new(table: &'a ChoiceCountTable, threshold: f64) -> Result<Self> {
        let control = table.control()?;
        let rows = experiment_rows(table);
        Ok(ThresholdEvidence {
            rows,
            control,
            threshold,
        })
    }

    /// Cutoff `8 sqrt(3 log(2K / delta))` for this table.
    pub fn theorem(table: &'a ChoiceCountTable, delta: f64) -> Result<Self> {
        let experiments = experiment_rows(table).len();
        let t = ZThreshold::new(experiments, table.n, delta);
        Self::new(table, t.threshold)
    }

    fn z(&self, s: usize, a: Alternative, b: Alternative) -> Option<f64> {
        z_statistic(self.rows[s], self.control, a, b)
            .ok()
            .filter(|z| !z.is_nan())
    }

    fn empirical_boost(&self, s: usize, i: usize) -> f64 {
        let row = self.rows[s];
        let fs = row.count(i) as f64 / row.sample_size as f64;
        let fnn = self.control.count(i) as f64 / self.control.sample_size as f64;
        fs / fnn
    }
}

pub(crate) fn experiment_rows(table: &ChoiceCountTable) -> Vec<&CountRow> {
    table
        .rows
        .iter()
        .filter(|r| r.label != DesignLabel::Control && !r.assortment.is_full(table.n))
        .collect()
}

impl BoostEvidence for ThresholdEvidence<'_> {
    fn experiments(&self) -> usize {
        self.rows.len()
    }

    fn assortment(&self, s: usize) -> &Assortment {
        &self.rows[s].assortment
    }

    fn equal(&self, s: usize, i: usize, j: usize) -> Option<bool> {
        self.z(s, Alternative::Item(i), Alternative::Item(j))
            .map(|z| z.abs() <= self.threshold)
    }

    fn equal_outside(&self, s: usize, i: usize) -> Option<bool> {
        self.z(s, Alternative::Item(i), Alternative::Outside)
            .map(|z| z.abs() <= self.threshold)
    }

    fn above_outside(&self, s: usize, i: usize) -> Option<bool> {
        self.z(s, Alternative::Item(i), Alternative::Outside)
            .map(|z| z > self.threshold)
    }

    /// The item with the smallest empirical boost factor together with every
    /// item not distinguishable from it.
    fn min_set(&self, s: usize) -> Vec<usize> {
        let items = self.rows[s].assortment.items();
        let Some(&lowest) = items.iter().min_by(|&&a, &&b| {
            self.empirical_boost(s, a)
                .partial_cmp(&self.empirical_boost(s, b))
                .unwrap_or(std::cmp::Ordering::Equal)
        }) else {
            return Vec::new();
        };
        items
            .iter()
            .copied()
            .filter(|&k| k == lowest || self.equal(s, k, lowest) == Some(true))
            .collect()
    }
}

fn finish(mut edges: EdgeMatrix) -> Identification {
    edges.one_hop_transitivity();
    edges.identify_missing_pairs();
    edges.nulls_to_zero();
    let inconsistencies = edges.inconsistent_triangles();
    let partition = edges.components();
    Identification {
        edges,
        partition,
        inconsistencies,
    }
}

/// Deductions with an outside option: unequal boosts separate, equal boosts
/// above the outside option's join, and items whose boost equals the
/// outside option's are separated from everything not offered.
pub fn identify_with_outside<E: BoostEvidence>(n: usize, evidence: &E) -> Identification {
    let mut edges = EdgeMatrix::new(n);
    for s in 0..evidence.experiments() {
        let items = evidence.assortment(s).items();
        for (a, &i) in items.iter().enumerate() {
            for &j in &items[a + 1..] {
                match evidence.equal(s, i, j) {
                    Some(false) => edges.set(i, j, 0.0),
                    Some(true)
                        if evidence.above_outside(s, i) == Some(true)
                            && evidence.above_outside(s, j) == Some(true) =>
                    {
                        edges.set(i, j, 1.0)
                    }
                    _ => {}
                }
            }
        }
        let offered = evidence.assortment(s);
        for &i in items {
            if evidence.equal_outside(s, i) == Some(true) {
                for k in (0..n).filter(|&k| !offered.contains(k)) {
                    edges.set(i, k, 0.0);
                }
            }
        }
    }
    finish(edges)
}

/// Deductions without an outside option, using the minimum boost factor in
/// each assortment as the reference.
pub fn identify_without_outside<E: BoostEvidence>(n: usize, evidence: &E) -> Identification {
    let mut edges = EdgeMatrix::new(n);
    let min_sets: Vec<Vec<usize>> = (0..evidence.experiments())
        .map(|s| evidence.min_set(s))
        .collect();
    for (s, min_set) in min_sets.iter().enumerate() {
        let items = evidence.assortment(s).items();
        for (a, &i) in items.iter().enumerate() {
            for &j in &items[a + 1..] {
                match evidence.equal(s, i, j) {
                    Some(false) => edges.set(i, j, 0.0),
                    Some(true) if !min_set.contains(&i) && !min_set.contains(&j) => {
                        edges.set(i, j, 1.0)
                    }
                    _ => {}
                }
            }
        }
    }
    for (s, min_set) in min_sets.iter().enumerate() {
        let split = min_set.iter().enumerate().any(|(a, &i)| {
            min_set[a + 1..].iter().any(|&j| edges.get(i, j) == 0.0)
        });
        if split {
            let offered = evidence.assortment(s);
            for &i in min_set {
                for k in (0..n).filter(|&k| !offered.contains(k)) {
                    edges.set(i, k, 0.0);
                }
            }
        } else {
            for (a, &i) in min_set.iter().enumerate() {
                for &j in &min_set[a + 1..] {
                    edges.set(i, j, 1.0);
                }
            }
        }
    }
    finish(edges)
}

/// Exact identification with an outside option from true boost factors.
pub fn exact_identify_with_outside(table: &BoostTable, tolerance: f64) -> Result<Identification> {
    if !table.outside_option || table.rows.iter().any(|r| r.outside.is_none()) {
        return Err(NestError::InvalidArgument(
            "boost factors of the outside option are required".into(),
        ));
    }
    Ok(identify_with_outside(table.n, &ExactEvidence::new(table, tolerance)))
}

/// Exact identification without an outside option from true boost factors.
pub fn exact_identify_without_outside(table: &BoostTable, tolerance: f64) -> Identification {
    identify_without_outside(table.n, &ExactEvidence::new(table, tolerance))
}
