//! Nest identification from sampled counts with p-value edge weights.

use super::edge::EdgeMatrix;
use super::exact::experiment_rows;
use super::walktrap::community_detect;
use super::ztest::{p_value_equal, p_value_leq_outside};
use super::Identification;
use crate::error::{NestError, Result};
use crate::sampling::{ChoiceCountTable, CountRow};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    /// Equality is rejected when `p_eq <= alpha`.
    pub alpha: f64,
    /// No boost is accepted when `p_leq > beta`.
    pub beta: f64,
    pub walk_length: usize,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            alpha: 0.05,
            beta: 0.95,
            walk_length: 4,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| (0.0..=1.0).contains(&x);
        if !ok(self.alpha) || !ok(self.beta) {
            return Err(NestError::InvalidArgument(format!(
                "alpha = {} and beta = {} must lie in [0, 1]",
                self.alpha, self.beta
            )));
        }
        if self.walk_length == 0 {
            return Err(NestError::InvalidArgument("walk length must be positive".into()));
        }
        Ok(())
    }
}

fn check_table(table: &ChoiceCountTable) -> Result<(&CountRow, Vec<&CountRow>)> {
    let control = table.control()?;
    if control.sample_size == 0 {
        return Err(NestError::NoObservations(control.label.to_string()));
    }
    let rows = experiment_rows(table);
    if let Some(r) = rows.iter().find(|r| r.sample_size == 0) {
        return Err(NestError::NoObservations(r.label.to_string()));
    }
    Ok((control, rows))
}

fn finish(mut edges: EdgeMatrix, config: &TestConfig) -> Result<Identification> {
    edges.nulls_to_zero();
    let partition = community_detect(&edges.weights(), config.walk_length)?;
    let inconsistencies = edges.inconsistent_triangles();
    Ok(Identification {
        edges,
        partition,
        inconsistencies,
    })
}

/// p-value edge weights with outside-option tests, then Walktrap.
/// Tests whose statistic is undefined are skipped.
pub fn noisy_identify_with_outside(
    table: &ChoiceCountTable,
    config: &TestConfig,
) -> Result<Identification> {
    config.validate()?;
    if !table.outside_option {
        return Err(NestError::InvalidArgument(
            "counts of the outside option are required".into(),
        ));
    }
    let (control, rows) = check_table(table)?;
    let n = table.n;
    let mut edges = EdgeMatrix::new(n);
    for row in rows {
        let items = row.assortment.items();
        let p_leq: Vec<Option<f64>> = items
            .iter()
            .map(|&i| p_value_leq_outside(row, control, i).ok().filter(|p| !p.is_nan()))
            .collect();
        for a in 0..items.len() {
            for b in a + 1..items.len() {
                let (i, j) = (items[a], items[b]);
                let Some(p_eq) = p_value_equal(row, control, i, j).ok().filter(|p| !p.is_nan())
                else {
                    continue;
                };
                if p_eq <= config.alpha {
                    edges.set(i, j, 0.0);
                } else {
                    let boosted = matches!((p_leq[a], p_leq[b]),
                        (Some(x), Some(y)) if x.max(y) <= config.alpha);
                    edges.set_min(i, j, if boosted { 1.0 } else { p_eq });
                }
            }
        }
        for (a, &i) in items.iter().enumerate() {
            if let Some(p) = p_leq[a].filter(|&p| p > config.beta) {
                for k in (0..n).filter(|&k| !row.assortment.contains(k)) {
                    edges.set_min(i, k, 1.0 - p);
                }
            }
        }
    }
    edges.one_hop_transitivity_noisy();
    finish(edges, config)
}

/// p-value edge weights from pairwise equality tests only, then Walktrap.
pub fn noisy_identify_without_outside(
    table: &ChoiceCountTable,
    config: &TestConfig,
) -> Result<Identification> {
    config.validate()?;
    let (control, rows) = check_table(table)?;
    let mut edges = EdgeMatrix::new(table.n);
    for row in rows {
        let items = row.assortment.items();
        for (a, &i) in items.iter().enumerate() {
            for &j in &items[a + 1..] {
                let Some(p_eq) = p_value_equal(row, control, i, j).ok().filter(|p| !p.is_nan())
                else {
                    continue;
                };
                if p_eq <= config.alpha {
                    edges.set(i, j, 0.0);
                } else {
                    edges.set_min(i, j, p_eq);
                }
            }
        }
    }
    finish(edges, config)
}
