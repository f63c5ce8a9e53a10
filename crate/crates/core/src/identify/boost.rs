use crate::design::{Assortment, DesignLabel};
use crate::error::{NestError, Result};
use crate::model::approx_equal;
use crate::sampling::ProbabilityTable;

/// `BF(i, S) = phi(i, S) / phi(i, [n])` on one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct BoostRow {
    pub label: DesignLabel,
    pub assortment: Assortment,
    /// Follows the sorted item order of the assortment.
    pub factors: Vec<f64>,
    pub outside: Option<f64>,
}

impl BoostRow {
    pub fn factor(&self, item: usize) -> f64 {
        self.factors[self.assortment.position(item).expect("item offered")]
    }

    pub fn min_factor(&self) -> f64 {
        self.factors.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Items whose boost factor equals the minimum within `tolerance`.
    pub fn min_set(&self, tolerance: f64) -> Vec<usize> {
        let min = self.min_factor();
        self.assortment
            .items()
            .iter()
            .zip(&self.factors)
            .filter(|&(_, &f)| approx_equal(f, min, tolerance))
            .map(|(&i, _)| i)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoostTable {
    pub n: usize,
    pub outside_option: bool,
    pub rows: Vec<BoostRow>,
}

/// Boost factors on every experiment other than the control. Experiments
/// equal to the full assortment carry no information and are skipped.
pub fn boost_factors(probs: &ProbabilityTable) -> Result<BoostTable> {
    let control = probs.control()?;
    let mut rows = Vec::new();
    for row in &probs.rows {
        if row.label == DesignLabel::Control || row.probs.assortment.is_full(probs.n) {
            continue;
        }
        let factors = row
            .probs
            .assortment
            .items()
            .iter()
            .zip(&row.probs.probs)
            .map(|(&i, &p)| {
                let base = control.prob(i);
                if base > 0.0 {
                    Ok(p / base)
                } else {
                    Err(NestError::ZeroControlProbability { item: i + 1 })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let outside = match (row.probs.outside, control.outside) {
            (Some(p), Some(base)) if base > 0.0 => Some(p / base),
            (Some(_), Some(_)) => return Err(NestError::ZeroControlProbability { item: 0 }),
            _ => None,
        };
        rows.push(BoostRow {
            label: row.label,
            assortment: row.probs.assortment.clone(),
            factors,
            outside,
        });
    }
    Ok(BoostTable {
        n: probs.n,
        outside_option: probs.outside_option,
        rows,
    })
}
