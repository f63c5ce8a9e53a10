//! Boost factors, pairwise tests and nest identification.

mod boost;
mod edge;
mod exact;
mod noisy;
mod walktrap;
mod ztest;

pub use boost::{boost_factors, BoostRow, BoostTable};
pub use edge::{EdgeMatrix, NULL};
pub use exact::{
    exact_identify_with_outside, exact_identify_without_outside, identify_with_outside,
    identify_without_outside, BoostEvidence, ExactEvidence, ThresholdEvidence,
};
pub use noisy::{noisy_identify_with_outside, noisy_identify_without_outside, TestConfig};
pub use walktrap::{community_detect, modularity};
pub use ztest::{
    p_value_equal, p_value_leq_outside, separation_constants, z_from_frequencies, z_statistic,
    Alternative, ZThreshold,
};

use crate::error::{NestError, Result};
use crate::model::NestPartition;
use crate::sampling::{empirical_probabilities, ChoiceCountTable};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

#[derive(Clone, Debug, PartialEq)]
pub struct Identification {
    pub edges: EdgeMatrix,
    pub partition: NestPartition,
    /// Triangles `[i, j, k]` with two 1-edges and one 0-edge.
    pub inconsistencies: Vec<[usize; 3]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdentifyMode {
    /// Empirical frequencies treated as exact probabilities.
    Exact,
    /// p-value weights and Walktrap.
    Noisy,
    /// Exact deductions driven by the `|z|` threshold test.
    ZTheorem,
}

impl FromStr for IdentifyMode {
    type Err = NestError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(IdentifyMode::Exact),
            "noisy" => Ok(IdentifyMode::Noisy),
            "ztheorem" => Ok(IdentifyMode::ZTheorem),
            _ => Err(NestError::Parse(format!("unknown identification mode `{s}`"))),
        }
    }
}

/// Relative tolerance for comparing exact boost factors.
pub const EQUALITY_TOLERANCE: f64 = 1e-9;

/// Runs the algorithm selected by `mode` on a count table. `delta` is the
/// failure probability of the threshold test.
pub fn identify_counts(
    table: &ChoiceCountTable,
    mode: IdentifyMode,
    config: &TestConfig,
    delta: f64,
) -> Result<Identification> {
    let outside = table.outside_option;
    match mode {
        IdentifyMode::Exact => {
            let bf = boost_factors(&empirical_probabilities(table)?)?;
            if outside {
                exact_identify_with_outside(&bf, EQUALITY_TOLERANCE)
            } else {
                Ok(exact_identify_without_outside(&bf, EQUALITY_TOLERANCE))
            }
        }
        IdentifyMode::Noisy if outside => noisy_identify_with_outside(table, config),
        IdentifyMode::Noisy => noisy_identify_without_outside(table, config),
        IdentifyMode::ZTheorem => {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(NestError::InvalidArgument(format!(
                    "delta = {delta} must lie in (0, 1)"
                )));
            }
            let evidence = ThresholdEvidence::theorem(table, delta)?;
            Ok(if outside {
                identify_with_outside(table.n, &evidence)
            } else {
                identify_without_outside(table.n, &evidence)
            })
        }
    }
}
