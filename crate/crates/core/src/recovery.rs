//! Recovery of item weights, dissimilarities and degenerate nest weights once
//! the nest partition is known.

use crate::design::{Assortment, DesignLabel, ExperimentDesign};
use crate::error::{NestError, Result};
use crate::model::{ChoiceProbabilities, NestPartition, NestedLogitModel};
use crate::sampling::ProbabilityTable;
use serde::Serialize;

/// Normalized determinant below which a system counts as singular.
pub const SINGULAR_TOLERANCE: f64 = 1e-10;
/// Allowed spread of the anchor dissimilarity across systems.
pub const ANCHOR_TOLERANCE: f64 = 1e-8;
/// Roundoff allowance outside `[0, 1]` for exact recovery.
pub const CLAMP_TOLERANCE: f64 = 1e-9;
/// Least-squares dissimilarities below this are treated as zero.
pub const NOISY_LAMBDA_FLOOR: f64 = 0.01;

/// `w_i = phi(i, [n]) / phi(i_N, [n])` with `i_N` the lowest item of each
/// nest.
pub fn within_nest_weights(control: &ChoiceProbabilities, partition: &NestPartition) -> Result<Vec<f64>> {
    let mut w = vec![0.0; partition.n()];
    for nest in partition.nests() {
        let base = control.prob(nest[0]);
        for &i in nest {
            let p = control.prob(i);
            if !(p > 0.0) || !(base > 0.0) {
                let item = if p > 0.0 { nest[0] } else { i };
                return Err(NestError::ZeroControlProbability { item: item + 1 });
            }
            w[i] = p / base;
        }
    }
    Ok(w)
}

/// Reference for the nest-share ratios: the outside option when present,
/// otherwise a nest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    Outside,
    Nest(usize),
}

/// The outside option, or the nest holding item 0.
pub fn choose_anchor(partition: &NestPartition, outside_option: bool) -> Anchor {
    if outside_option {
        Anchor::Outside
    } else {
        Anchor::Nest(partition.nest_of(0))
    }
}

fn cut(nest: &[usize], s: &Assortment) -> Vec<usize> {
    nest.iter().copied().filter(|&i| s.contains(i)).collect()
}

/// Both assortments are strict, meet both nests, cut each nest partially at
/// least once, and induce distinct intersection pairs, the second of which
/// is not `(N, N')`.
pub fn satisfies_pair_conditions(
    n: usize,
    nest: &[usize],
    other: &[usize],
    s: &Assortment,
    t: &Assortment,
) -> bool {
    if s.is_full(n) || t.is_full(n) {
        return false;
    }
    let (ns, nt, os, ot) = (cut(nest, s), cut(nest, t), cut(other, s), cut(other, t));
    if ns.is_empty() || nt.is_empty() || os.is_empty() || ot.is_empty() {
        return false;
    }
    let partial_n = ns.len() < nest.len() || nt.len() < nest.len();
    let partial_o = os.len() < other.len() || ot.len() < other.len();
    let full_second = nt.len() == nest.len() && ot.len() == other.len();
    partial_n && partial_o && (ns, os) != (nt, ot) && !full_second
}

/// Indices into `design.experiments()` of two assortments satisfying
/// [`satisfies_pair_conditions`] for nests of at least two items. Slice
/// designs use the digit-position construction; other designs, or a failed
/// construction, fall back to exhaustive search.
pub fn find_assortment_pair(
    design: &ExperimentDesign,
    nest: &[usize],
    other: &[usize],
) -> Result<(usize, usize)> {
    if nest.len() < 2 || other.len() < 2 {
        return Err(NestError::InvalidArgument(
            "both nests need at least two items".into(),
        ));
    }
    let n = design.n();
    let exps = design.experiments();
    let valid = |x: usize, y: usize| {
        satisfies_pair_conditions(n, nest, other, &exps[x].assortment, &exps[y].assortment)
    };
    if let Ok(enc) = design.slice_encoding() {
        for (a, &i) in nest.iter().enumerate() {
            for &i2 in &nest[a + 1..] {
                for (b, &j) in other.iter().enumerate() {
                    for &j2 in &other[b + 1..] {
                        if let Some((x, y)) = constructive_pair(design, &enc, [i, i2], [j, j2]) {
                            if valid(x, y) {
                                return Ok((x, y));
                            }
                        }
                    }
                }
            }
        }
    }
    for x in 0..exps.len() {
        for y in 0..exps.len() {
            if x != y && valid(x, y) {
                return Ok((x, y));
            }
        }
    }
    Err(NestError::NoAssortmentPair(nest[0] + 1, other[0] + 1))
}

fn constructive_pair(
    design: &ExperimentDesign,
    enc: &crate::design::BaseBEncoding,
    [i, i2]: [usize; 2],
    [j, j2]: [usize; 2],
) -> Option<(usize, usize)> {
    let len = enc.digit_count();
    let d = |item: usize, l: usize| enc.digit(item, l);
    let slice = |l: usize, digit: usize| design.find_slice(l, digit);
    if let Some(l) = (1..=len).find(|&l| d(i, l) != d(i2, l) && d(j, l) != d(j2, l)) {
        return if d(i, l) == d(j, l) {
            Some((slice(l, d(i, l))?, slice(l, d(i2, l))?))
        } else {
            Some((slice(l, d(i, l))?, slice(l, d(j, l))?))
        };
    }
    let li = (1..=len).find(|&l| d(i, l) != d(i2, l))?;
    let lj = (1..=len).find(|&l| d(j, l) != d(j2, l))?;
    // j, j2 agree at li and i, i2 agree at lj: drop whichever digit keeps
    // the other nest on offer
    let first = if d(j, li) != d(i, li) { d(i, li) } else { d(i2, li) };
    let second = if d(i, lj) != d(j, lj) { d(j, lj) } else { d(j2, lj) };
    Some((slice(li, first)?, slice(lj, second)?))
}

/// One observed assortment `T`: `y_T = lambda_anchor A_T - lambda_N B_T - s_N`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemRow {
    pub label: DesignLabel,
    /// `log sum_{anchor cap T} w`, zero for the outside option.
    pub a: f64,
    /// `log sum_{N cap T} w`.
    pub b: f64,
    /// `log(P(anchor | T) / P(N | T))`.
    pub y: f64,
}

/// The linear system relating one nest to the anchor.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecoverySystem {
    pub anchor: Anchor,
    pub nest: usize,
    /// `lambda_anchor` is unknown: the anchor is a nest of two or more items.
    pub anchor_free: bool,
    /// `lambda_N` is unknown: the nest has two or more items.
    pub nest_free: bool,
    /// Assortments meeting both the anchor and the nest.
    pub rows: Vec<SystemRow>,
}

impl RecoverySystem {
    pub fn build(
        probs: &ProbabilityTable,
        partition: &NestPartition,
        weights: &[f64],
        anchor: Anchor,
        nest: usize,
    ) -> Result<Self> {
        let members = partition.nest(nest);
        let share = |p: &ChoiceProbabilities, items: &[usize]| -> (f64, f64) {
            let inside: Vec<usize> = cut(items, &p.assortment);
            (
                inside.iter().map(|&i| p.prob(i)).sum(),
                inside.iter().map(|&i| weights[i]).sum(),
            )
        };
        let mut rows = Vec::new();
        for row in &probs.rows {
            let p = &row.probs;
            let (pn, wn) = share(p, members);
            let (pa, wa) = match anchor {
                Anchor::Outside => (p.outside_prob(), 1.0),
                Anchor::Nest(k) => share(p, partition.nest(k)),
            };
            if wn <= 0.0 || wa <= 0.0 {
                continue;
            }
            if !(pn > 0.0 && pa > 0.0) {
                return Err(NestError::InvalidArgument(format!(
                    "nest share is zero on `{}`",
                    row.label
                )));
            }
            rows.push(SystemRow {
                label: row.label,
                a: wa.ln(),
                b: wn.ln(),
                y: (pa / pn).ln(),
            });
        }
        let anchor_free = matches!(anchor, Anchor::Nest(k) if partition.nest(k).len() > 1);
        Ok(RecoverySystem {
            anchor,
            nest,
            anchor_free,
            nest_free: members.len() > 1,
            rows,
        })
    }

    pub fn unknowns(&self) -> usize {
        1 + usize::from(self.anchor_free) + usize::from(self.nest_free)
    }

    /// Coefficients of the free unknowns, ordered `(lambda_anchor, lambda_N,
    /// s_N)`; fixed dissimilarities are moved into the right-hand side.
    fn equation(&self, row: &SystemRow, fixed: Fixed) -> (Vec<f64>, f64) {
        let mut coef = Vec::with_capacity(3);
        let mut rhs = row.y;
        match (self.anchor_free, fixed.anchor) {
            (true, None) => coef.push(row.a),
            (_, Some(l)) => rhs -= l * row.a,
            _ => {}
        }
        match (self.nest_free, fixed.nest) {
            (true, None) => coef.push(-row.b),
            (_, Some(l)) => rhs += l * row.b,
            _ => {}
        }
        coef.push(-1.0);
        (coef, rhs)
    }

    fn unpack(&self, x: &[f64], fixed: Fixed) -> NestSolution {
        let mut it = x.iter().copied();
        let lambda_anchor = match (self.anchor_free, fixed.anchor) {
            (true, None) => it.next(),
            (_, l) => l,
        };
        let lambda = match (self.nest_free, fixed.nest) {
            (true, None) => it.next().expect("unknown present"),
            (_, Some(l)) => l,
            (false, None) => 1.0,
        };
        NestSolution {
            lambda_anchor: if self.anchor_free { lambda_anchor } else { None },
            lambda,
            s: it.next().expect("s is always unknown"),
            rows: Vec::new(),
            normalized_det: None,
        }
    }

    /// Exact solution from the square subsystem on `rows` (indices into
    /// [`Self::rows`]).
    pub fn solve_rows(&self, rows: &[usize]) -> Result<NestSolution> {
        let k = self.unknowns();
        if rows.len() != k {
            return Err(NestError::Mismatch(format!("{} rows for {k} unknowns", rows.len())));
        }
        let (m, rhs): (Vec<Vec<f64>>, Vec<f64>) = rows
            .iter()
            .map(|&r| self.equation(&self.rows[r], Fixed::default()))
            .unzip();
        let ndet = normalized_det(&m);
        if ndet < SINGULAR_TOLERANCE {
            return Err(NestError::Singular {
                nest: self.nest,
                det: ndet,
            });
        }
        let x = solve_square(m, rhs).ok_or(NestError::Singular {
            nest: self.nest,
            det: ndet,
        })?;
        let mut sol = self.unpack(&x, Fixed::default());
        sol.rows = rows.iter().map(|&r| self.rows[r].label).collect();
        sol.normalized_det = Some(ndet);
        Ok(sol)
    }

    /// The square subsystem with the largest normalized determinant.
    pub fn best_rows(&self) -> Option<(Vec<usize>, f64)> {
        let k = self.unknowns();
        let mut best: Option<(Vec<usize>, f64)> = None;
        for combo in combinations(self.rows.len(), k) {
            let m: Vec<Vec<f64>> = combo
                .iter()
                .map(|&r| self.equation(&self.rows[r], Fixed::default()).0)
                .collect();
            let d = normalized_det(&m);
            if best.as_ref().is_none_or(|(_, b)| d > *b) {
                best = Some((combo, d));
            }
        }
        best
    }

    /// Least-squares fit over all rows with optional fixed dissimilarities;
    /// `None` when the free columns are rank-deficient.
    pub fn least_squares(&self, anchor: Option<f64>, nest: Option<f64>) -> Option<NestSolution> {
        let fixed = Fixed { anchor, nest };
        let (m, rhs): (Vec<Vec<f64>>, Vec<f64>) =
            self.rows.iter().map(|r| self.equation(r, fixed)).unzip();
        let x = least_squares(&m, &rhs)?;
        let mut sol = self.unpack(&x, fixed);
        sol.rows = self.rows.iter().map(|r| r.label).collect();
        Some(sol)
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Fixed {
    anchor: Option<f64>,
    nest: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NestSolution {
    /// `None` when the anchor dissimilarity is not part of the system.
    pub lambda_anchor: Option<f64>,
    pub lambda: f64,
    /// `lambda_N log c_N`, or `log v_N` when `lambda_N = 0`.
    pub s: f64,
    pub rows: Vec<DesignLabel>,
    pub normalized_det: Option<f64>,
}

/// Conditions flagged during recovery; a model is still produced.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// No square subsystem is nonsingular; the nest was fitted by least
    /// squares instead.
    Singular { nest: usize, normalized_det: f64 },
    AnchorDisagreement { min: f64, max: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Recovery {
    pub model: NestedLogitModel,
    pub anchor: Anchor,
    pub lambda_anchor: f64,
    pub anchor_estimates: Vec<f64>,
    pub solutions: Vec<Option<NestSolution>>,
    pub violations: Vec<Violation>,
}

fn nest_systems(
    probs: &ProbabilityTable,
    partition: &NestPartition,
) -> Result<(Vec<f64>, Anchor, Vec<Option<RecoverySystem>>)> {
    if partition.n() != probs.n {
        return Err(NestError::Mismatch(format!(
            "partition over {} items, probabilities over {}",
            partition.n(),
            probs.n
        )));
    }
    let weights = within_nest_weights(probs.control()?, partition)?;
    let anchor = choose_anchor(partition, probs.outside_option);
    let systems = (0..partition.len())
        .map(|k| {
            if anchor == Anchor::Nest(k) {
                Ok(None)
            } else {
                RecoverySystem::build(probs, partition, &weights, anchor, k).map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((weights, anchor, systems))
}

/// Exact recovery from exact probabilities. Each nest uses the constructive assortment pair
/// with the control when both it and the anchor have two or more items and
/// `design` is a slice design, otherwise the best-conditioned square
/// subsystem.
pub fn recover_exact(
    probs: &ProbabilityTable,
    partition: &NestPartition,
    design: Option<&ExperimentDesign>,
) -> Result<Recovery> {
    let (weights, anchor, systems) = nest_systems(probs, partition)?;
    let mut violations = Vec::new();
    let mut fallback = Vec::new();
    let mut solutions = Vec::with_capacity(systems.len());
    for sys in &systems {
        let Some(sys) = sys else {
            solutions.push(None);
            continue;
        };
        let paired = match (anchor, design) {
            (Anchor::Nest(a), Some(d)) if sys.anchor_free && sys.nest_free => {
                pair_rows(sys, d, partition.nest(a), partition.nest(sys.nest))
            }
            _ => None,
        };
        let solved = paired
            .and_then(|rows| sys.solve_rows(&rows).ok())
            .map(Ok)
            .unwrap_or_else(|| match sys.best_rows() {
                Some((rows, _)) => sys.solve_rows(&rows),
                None => Err(NestError::Singular {
                    nest: sys.nest,
                    det: 0.0,
                }),
            });
        let sol = match solved {
            Ok(sol) => sol,
            Err(NestError::Singular { nest, det }) => {
                violations.push(Violation::Singular {
                    nest,
                    normalized_det: det,
                });
                fallback.push(sys.nest);
                fallback_fit(sys)
            }
            Err(e) => return Err(e),
        };
        solutions.push(Some(sol));
    }
    let is_fallback = |k: usize| fallback.contains(&k);
    let estimates: Vec<f64> = solutions
        .iter()
        .enumerate()
        .filter(|(k, _)| !is_fallback(*k))
        .filter_map(|(_, s)| s.as_ref()?.lambda_anchor)
        .collect();
    let fallback_estimates: Vec<f64> = solutions
        .iter()
        .flatten()
        .filter_map(|s| s.lambda_anchor)
        .collect();
    let lambda_anchor = if estimates.is_empty() {
        if fallback_estimates.is_empty() {
            1.0
        } else {
            snap_noisy(fallback_estimates.iter().sum::<f64>() / fallback_estimates.len() as f64)
        }
    } else {
        let min = estimates.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = estimates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max - min > ANCHOR_TOLERANCE {
            violations.push(Violation::AnchorDisagreement { min, max });
        }
        estimates.iter().sum::<f64>() / estimates.len() as f64
    };
    let lambda_anchor = snap_exact(lambda_anchor, anchor_index(anchor).unwrap_or(0))?;
    let params = solutions
        .iter()
        .enumerate()
        .map(|(k, s)| match s {
            Some(s) if is_fallback(k) => Ok(Some((snap_noisy(s.lambda), s.s))),
            Some(s) => Ok(Some((snap_exact(s.lambda, k)?, s.s))),
            None => Ok(None),
        })
        .collect::<Result<Vec<_>>>()?;
    let model = assemble(partition, &weights, probs.outside_option, lambda_anchor, &params)?;
    Ok(Recovery {
        model,
        anchor,
        lambda_anchor,
        anchor_estimates: estimates,
        solutions,
        violations,
    })
}

fn pair_rows(
    sys: &RecoverySystem,
    design: &ExperimentDesign,
    anchor: &[usize],
    nest: &[usize],
) -> Option<Vec<usize>> {
    design.slice_encoding().ok()?;
    let (x, y) = find_assortment_pair(design, anchor, nest).ok()?;
    let find = |label: DesignLabel| sys.rows.iter().position(|r| r.label == label);
    let exps = design.experiments();
    Some(vec![
        find(DesignLabel::Control)?,
        find(exps[x].label)?,
        find(exps[y].label)?,
    ])
}

fn fallback_fit(sys: &RecoverySystem) -> NestSolution {
    sys.least_squares(None, None)
        .or_else(|| sys.least_squares(None, Some(1.0)))
        .or_else(|| sys.least_squares(Some(1.0), Some(1.0)))
        .expect("a system with one unknown and at least one row is solvable")
}

fn anchor_index(anchor: Anchor) -> Option<usize> {
    match anchor {
        Anchor::Nest(k) => Some(k),
        Anchor::Outside => None,
    }
}

fn snap_exact(lambda: f64, nest: usize) -> Result<f64> {
    if lambda.abs() <= CLAMP_TOLERANCE {
        Ok(0.0)
    } else if lambda > 1.0 && lambda <= 1.0 + CLAMP_TOLERANCE {
        Ok(1.0)
    } else if (0.0..=1.0).contains(&lambda) {
        Ok(lambda)
    } else {
        Err(NestError::DissimilarityOutOfRange { nest, value: lambda })
    }
}

fn snap_noisy(lambda: f64) -> f64 {
    let l = lambda.clamp(0.0, 1.0);
    if l < NOISY_LAMBDA_FLOOR {
        0.0
    } else {
        l
    }
}

/// Least-squares recovery over every observed assortment, for empirical
/// probabilities. The anchor dissimilarity is averaged over systems, each
/// nest is then refitted with it fixed, and dissimilarities are clamped to
/// `[0, 1]` with `s_N` refitted after clamping. A rank-deficient nest gets
/// dissimilarity 1.
pub fn recover_least_squares(probs: &ProbabilityTable, partition: &NestPartition) -> Result<Recovery> {
    let (weights, anchor, systems) = nest_systems(probs, partition)?;
    let first: Vec<Option<NestSolution>> = systems
        .iter()
        .map(|s| s.as_ref().map(fallback_fit))
        .collect();
    let estimates: Vec<f64> = first.iter().flatten().filter_map(|s| s.lambda_anchor).collect();
    let lambda_anchor = if estimates.is_empty() {
        1.0
    } else {
        snap_noisy(estimates.iter().sum::<f64>() / estimates.len() as f64)
    };
    let mut solutions = Vec::with_capacity(systems.len());
    let mut params = Vec::with_capacity(systems.len());
    for sys in &systems {
        let Some(sys) = sys else {
            solutions.push(None);
            params.push(None);
            continue;
        };
        let fixed_anchor = sys.anchor_free.then_some(lambda_anchor);
        let fit = sys
            .least_squares(fixed_anchor, None)
            .or_else(|| sys.least_squares(fixed_anchor, Some(1.0)))
            .expect("s alone is always identifiable");
        let lambda = snap_noisy(fit.lambda);
        let fit = if lambda != fit.lambda {
            sys.least_squares(fixed_anchor, Some(lambda))
                .expect("s alone is always identifiable")
        } else {
            fit
        };
        params.push(Some((fit.lambda, fit.s)));
        solutions.push(Some(fit));
    }
    let model = assemble(partition, &weights, probs.outside_option, lambda_anchor, &params)?;
    Ok(Recovery {
        model,
        anchor,
        lambda_anchor,
        anchor_estimates: estimates,
        solutions,
        violations: Vec::new(),
    })
}

/// Builds the model from `w`, the anchor dissimilarity and `(lambda_N, s_N)`
/// per non-anchor nest (`None` marks the anchor nest).
fn assemble(
    partition: &NestPartition,
    w: &[f64],
    outside_option: bool,
    lambda_anchor: f64,
    params: &[Option<(f64, f64)>],
) -> Result<NestedLogitModel> {
    let mut weights = w.to_vec();
    let mut lambda = Vec::with_capacity(params.len());
    let mut degenerate = Vec::with_capacity(params.len());
    for (k, p) in params.iter().enumerate() {
        let members = partition.nest(k);
        let (l, s) = match *p {
            None => {
                let l = if members.len() == 1 { 1.0 } else { lambda_anchor };
                lambda.push(l);
                degenerate.push((l == 0.0).then_some(1.0));
                continue;
            }
            Some(x) => x,
        };
        let scale = if l > 0.0 { (s / l).exp() } else { f64::NAN };
        let w_max = members.iter().map(|&i| w[i]).fold(0.0, f64::max);
        if l > 0.0 && scale > 0.0 && (scale * w_max).is_finite() {
            for &i in members {
                weights[i] = scale * w[i];
            }
            lambda.push(l);
            degenerate.push(None);
        } else {
            lambda.push(0.0);
            degenerate.push(Some(s.exp()));
        }
    }
    NestedLogitModel::new(partition.clone(), weights, lambda, degenerate, outside_option)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(m: &[Vec<f64>]) -> f64 {
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let n = a.len();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))
            .expect("nonempty");
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        det *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for j in c..n {
                a[r][j] -= f * a[c][j];
            }
        }
    }
    det
}

/// `|det M| / prod_i ||row_i||`, in `[0, 1]`.
fn normalized_det(m: &[Vec<f64>]) -> f64 {
    let norms: f64 = m
        .iter()
        .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
        .product();
    if norms == 0.0 {
        0.0
    } else {
        determinant(m).abs() / norms
    }
}

fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = a.len();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))?;
        if a[p][c] == 0.0 {
            return None;
        }
        a.swap(p, c);
        b.swap(p, c);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for j in c..n {
                a[r][j] -= f * a[c][j];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|j| a[r][j] * x[j]).sum();
        x[r] = (b[r] - tail) / a[r][r];
    }
    Some(x)
}

/// Normal equations; `None` when `X^T X` is numerically singular.
fn least_squares(x: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    let k = x.first()?.len();
    if x.len() < k {
        return None;
    }
    let mut xtx = vec![vec![0.0; k]; k];
    let mut xty = vec![0.0; k];
    for (row, &t) in x.iter().zip(y) {
        for a in 0..k {
            xty[a] += row[a] * t;
            for b in 0..k {
                xtx[a][b] += row[a] * row[b];
            }
        }
    }
    if normalized_det(&xtx) < 1e-12 {
        return None;
    }
    solve_square(xtx, xty)
}
