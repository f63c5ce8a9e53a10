//! Pooled two-proportion test comparing boost factors from counts.

use crate::design::{DesignLabel, ExperimentDesign};
use crate::error::{NestError, Result};
use crate::model::NestedLogitModel;
use crate::sampling::{CountRow, ProbabilityTable};
use crate::stats::{normal_upper_tail, two_sided_p};

/// A choice alternative: the outside option or an item.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Alternative {
    Outside,
    Item(usize),
}

fn frequency(row: &CountRow, a: Alternative) -> f64 {
    let x = match a {
        Alternative::Outside => row.outside,
        Alternative::Item(i) => row.count(i),
    };
    x as f64 / row.sample_size as f64
}

/// `z(i > j, S)` from the four empirical frequencies and the two sample
/// sizes. `None` when either pooled frequency `fi + fj` is zero.
pub fn z_from_frequencies(
    fi_s: f64,
    fj_s: f64,
    fi_n: f64,
    fj_n: f64,
    m_s: f64,
    m_n: f64,
) -> Option<f64> {
    let pair_s = fi_s + fj_s;
    let pair_n = fi_n + fj_n;
    if pair_s <= 0.0 || pair_n <= 0.0 {
        return None;
    }
    let total = pair_s + pair_n;
    let pooled_i = (fi_s + fi_n) / total;
    let pooled_j = (fj_s + fj_n) / total;
    let numerator = fi_s / pair_s - fi_n / pair_n;
    let variance = pooled_i * pooled_j * ((1.0 / m_s) / pair_s + (1.0 / m_n) / pair_n);
    Some(numerator / variance.sqrt())
}

/// `z(i > j, S)` with `row` the experiment and `control` the full
/// assortment. The statistic is evaluated with the smaller alternative
/// first and negated otherwise, so swapping `i` and `j` flips the sign
/// exactly.
///
/// May return NaN when one of the two alternatives was never chosen in
/// either assortment; callers treat that as no evidence.
pub fn z_statistic(
    row: &CountRow,
    control: &CountRow,
    i: Alternative,
    j: Alternative,
) -> Result<f64> {
    let (a, b, sign) = if i <= j { (i, j, 1.0) } else { (j, i, -1.0) };
    let z = z_from_frequencies(
        frequency(row, a),
        frequency(row, b),
        frequency(control, a),
        frequency(control, b),
        row.sample_size as f64,
        control.sample_size as f64,
    )
    .ok_or_else(|| {
        let id = |x: Alternative| match x {
            Alternative::Outside => 0,
            Alternative::Item(k) => k + 1,
        };
        NestError::ZeroDenominator {
            i: id(i),
            j: id(j),
            label: row.label.to_string(),
        }
    })?;
    Ok(sign * z)
}

/// `2 (1 - Phi(|z(i > j, S)|))`.
pub fn p_value_equal(row: &CountRow, control: &CountRow, i: usize, j: usize) -> Result<f64> {
    z_statistic(row, control, Alternative::Item(i), Alternative::Item(j)).map(two_sided_p)
}

/// `1 - Phi(z(i > 0, S))`: small values indicate `BF(i, S) > BF(0, S)`.
pub fn p_value_leq_outside(row: &CountRow, control: &CountRow, i: usize) -> Result<f64> {
    z_statistic(row, control, Alternative::Item(i), Alternative::Outside).map(normal_upper_tail)
}

/// Constants of the finite-sample threshold test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZThreshold {
    /// Number of union-bounded events `(|S| + 1)(n + 1 + C(n + 1, 2))`.
    pub events: f64,
    pub delta: f64,
    /// `8 sqrt(3 log(2K / delta))`.
    pub threshold: f64,
}

impl ZThreshold {
    pub fn new(experiments: usize, n: usize, delta: f64) -> Self {
        let n1 = (n + 1) as f64;
        let events = (experiments as f64 + 1.0) * (n1 + n1 * (n1 - 1.0) / 2.0);
        let threshold = 8.0 * (3.0 * (2.0 * events / delta).ln()).sqrt();
        ZThreshold {
            events,
            delta,
            threshold,
        }
    }

    /// `ceil(3 C^2 log(2K / delta) / (rho Delta^2))`.
    pub fn sample_size(&self, c: f64, rho: f64, gap: f64) -> u64 {
        (3.0 * c * c * (2.0 * self.events / self.delta).ln() / (rho * gap * gap)).ceil() as u64
    }
}

/// Smallest control probability `rho` over items and the outside option, and
/// the smallest gap `Delta` of the conditional pair probabilities over all
/// pairs whose boost factors differ (relative `tolerance`).
pub fn separation_constants(
    model: &NestedLogitModel,
    design: &ExperimentDesign,
    tolerance: f64,
) -> Result<(f64, f64)> {
    let table = ProbabilityTable::from_model(model, design)?;
    let control = table.control()?;
    let mut rho = control.probs.iter().cloned().fold(f64::INFINITY, f64::min);
    if let Some(p0) = control.outside {
        rho = rho.min(p0);
    }
    let prob = |p: &crate::model::ChoiceProbabilities, a: Alternative| match a {
        Alternative::Outside => p.outside_prob(),
        Alternative::Item(i) => p.prob(i),
    };
    let mut gap = f64::INFINITY;
    for row in &table.rows {
        if row.label == DesignLabel::Control || row.probs.assortment.is_full(table.n) {
            continue;
        }
        let alts = alternatives(row.probs.assortment.items(), table.outside_option);
        for (x, &a) in alts.iter().enumerate() {
            for &b in &alts[x + 1..] {
                let bf_a = prob(&row.probs, a) / prob(control, a);
                let bf_b = prob(&row.probs, b) / prob(control, b);
                if crate::model::approx_equal(bf_a, bf_b, tolerance) {
                    continue;
                }
                let (pa_s, pb_s) = (prob(&row.probs, a), prob(&row.probs, b));
                let (pa_n, pb_n) = (prob(control, a), prob(control, b));
                let d = (pa_s / (pa_s + pb_s) - pa_n / (pa_n + pb_n)).abs();
                gap = gap.min(d);
            }
        }
    }
    Ok((rho, gap))
}

pub(crate) fn alternatives(items: &[usize], outside: bool) -> Vec<Alternative> {
    let mut alts: Vec<Alternative> = Vec::with_capacity(items.len() + 1);
    if outside {
        alts.push(Alternative::Outside);
    }
    alts.extend(items.iter().map(|&i| Alternative::Item(i)));
    alts
}
