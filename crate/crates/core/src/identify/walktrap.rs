//! Walktrap agglomerative clustering with a modularity-maximizing cut.

use crate::error::{NestError, Result};
use crate::model::NestPartition;

/// Newman-Girvan modularity of `labels` on the weighted graph `weights`,
/// self-loops included.
pub fn modularity(weights: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = weights.len();
    let degree: Vec<f64> = weights.iter().map(|r| r.iter().sum()).collect();
    let total: f64 = degree.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                q += weights[i][j] - degree[i] * degree[j] / total;
            }
        }
    }
    q / total
}

fn validate(weights: &[Vec<f64>]) -> Result<()> {
    let n = weights.len();
    for (i, row) in weights.iter().enumerate() {
        if row.len() != n {
            return Err(NestError::InvalidArgument("weight matrix is not square".into()));
        }
        for (j, &w) in row.iter().enumerate() {
            if !(w.is_finite() && w >= 0.0) {
                return Err(NestError::InvalidArgument(format!(
                    "weight ({}, {}) = {w} is not a nonnegative number",
                    i + 1,
                    j + 1
                )));
            }
            if w != weights[j][i] {
                return Err(NestError::InvalidArgument("weight matrix is not symmetric".into()));
            }
        }
    }
    Ok(())
}

struct Community {
    members: Vec<usize>,
    /// `P^t` row averaged over members.
    walk: Vec<f64>,
}

/// Walktrap with walks of length `walk_length` on the graph whose diagonal is
/// taken from `weights` as given. The dendrogram is cut where modularity is
/// largest; on ties the coarser cut wins.
pub fn community_detect(weights: &[Vec<f64>], walk_length: usize) -> Result<NestPartition> {
    validate(weights)?;
    let n = weights.len();
    if n == 0 {
        return Err(NestError::InvalidArgument("empty weight matrix".into()));
    }
    let degree: Vec<f64> = weights.iter().map(|r| r.iter().sum()).collect();
    if let Some(i) = degree.iter().position(|&d| d <= 0.0) {
        return Err(NestError::InvalidArgument(format!(
            "item {} has no edge weight, not even a self-loop",
            i + 1
        )));
    }
    let transition: Vec<Vec<f64>> = (0..n)
        .map(|i| weights[i].iter().map(|w| w / degree[i]).collect())
        .collect();
    let mut walk: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _ in 0..walk_length {
        walk = walk
            .iter()
            .map(|row| {
                (0..n)
                    .map(|j| (0..n).map(|k| row[k] * transition[k][j]).sum())
                    .collect()
            })
            .collect();
    }

    let distance = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .zip(&degree)
            .map(|((x, y), d)| (x - y) * (x - y) / d)
            .sum()
    };

    let mut communities: Vec<Option<Community>> = walk
        .into_iter()
        .enumerate()
        .map(|(i, w)| {
            Some(Community {
                members: vec![i],
                walk: w,
            })
        })
        .collect();
    // weight between live communities, keyed by community id
    let mut links: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { weights[i][j] }).collect())
        .collect();

    let mut labels: Vec<usize> = (0..n).collect();
    let mut best_labels = labels.clone();
    let mut best_q = modularity(weights, &labels);

    loop {
        let live: Vec<usize> = (0..communities.len())
            .filter(|&c| communities[c].is_some())
            .collect();
        let mut best: Option<(f64, usize, usize)> = None;
        for (x, &a) in live.iter().enumerate() {
            for &b in &live[x + 1..] {
                if links[a][b] <= 0.0 {
                    continue;
                }
                let (ca, cb) = (communities[a].as_ref().unwrap(), communities[b].as_ref().unwrap());
                let (sa, sb) = (ca.members.len() as f64, cb.members.len() as f64);
                let sigma = sa * sb / (sa + sb) * distance(&ca.walk, &cb.walk) / n as f64;
                if best.is_none_or(|(s, _, _)| sigma < s) {
                    best = Some((sigma, a, b));
                }
            }
        }
        let Some((_, a, b)) = best else { break };
        let ca = communities[a].take().unwrap();
        let cb = communities[b].take().unwrap();
        let (sa, sb) = (ca.members.len() as f64, cb.members.len() as f64);
        let walk: Vec<f64> = ca
            .walk
            .iter()
            .zip(&cb.walk)
            .map(|(x, y)| (sa * x + sb * y) / (sa + sb))
            .collect();
        let mut members = ca.members;
        members.extend(cb.members);
        let id = communities.len();
        for row in links.iter_mut() {
            let w = row[a] + row[b];
            row.push(w);
        }
        let new_row: Vec<f64> = (0..=id)
            .map(|c| if c == id { 0.0 } else { links[c][id] })
            .collect();
        links.push(new_row);
        for &m in &members {
            labels[m] = id;
        }
        communities.push(Some(Community { members, walk }));

        let q = modularity(weights, &labels);
        if q >= best_q - 1e-12 {
            best_q = q.max(best_q);
            best_labels = labels.clone();
        }
    }
    Ok(NestPartition::from_labels(&best_labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blocks(sizes: &[usize]) -> (Vec<Vec<f64>>, Vec<usize>) {
        let labels: Vec<usize> = sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
            .collect();
        let n = labels.len();
        let w = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if labels[i] == labels[j] { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        (w, labels)
    }

    #[test]
    fn recovers_disjoint_cliques() {
        let (w, labels) = blocks(&[3, 2, 4, 1]);
        let p = community_detect(&w, 4).unwrap();
        assert!(p.equivalent(&NestPartition::from_labels(&labels)));
    }

    #[test]
    fn complete_graph_is_one_community() {
        let w = vec![vec![1.0; 5]; 5];
        assert_eq!(community_detect(&w, 4).unwrap().len(), 1);
    }

    #[test]
    fn isolated_items_stay_apart() {
        let (w, _) = blocks(&[1, 1, 1]);
        assert_eq!(community_detect(&w, 4).unwrap().len(), 3);
    }

    #[test]
    fn weak_bridge_is_cut() {
        let (mut w, labels) = blocks(&[4, 4]);
        w[0][5] = 0.1;
        w[5][0] = 0.1;
        let p = community_detect(&w, 4).unwrap();
        assert!(p.equivalent(&NestPartition::from_labels(&labels)));
    }

    #[test]
    fn modularity_of_two_cliques() {
        // two disjoint K2 with self-loops: W = 8, degrees 2
        let (w, labels) = blocks(&[2, 2]);
        let q = modularity(&w, &labels);
        let expected = (2.0 * (4.0 - 4.0 * 4.0 / 8.0)) / 8.0;
        assert!((q - expected).abs() < 1e-15);
    }

    #[test]
    fn rejects_asymmetric_input() {
        let w = vec![vec![1.0, 0.2], vec![0.3, 1.0]];
        assert!(community_detect(&w, 4).is_err());
    }
}
