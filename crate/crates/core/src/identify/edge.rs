use crate::model::NestPartition;

/// Marker for an undetermined relation.
pub const NULL: f64 = 2.0;

/// Symmetric pairwise relation matrix. Exact algorithms store 0, 1 or
/// [`NULL`]; noisy ones additionally store confidences in `(0, 1)`. The
/// diagonal is ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMatrix {
    n: usize,
    data: Vec<f64>,
}

impl EdgeMatrix {
    pub fn new(n: usize) -> Self {
        EdgeMatrix {
            n,
            data: vec![NULL; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut m = EdgeMatrix::new(n);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m.data[i * n + j] = v;
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn is_null(&self, i: usize, j: usize) -> bool {
        self.get(i, j) == NULL
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        if i != j {
            self.data[i * self.n + j] = v;
            self.data[j * self.n + i] = v;
        }
    }

    /// `E[i, j] = min(v, E[i, j])`, with null counting as 2.
    pub fn set_min(&mut self, i: usize, j: usize, v: f64) {
        let cur = self.get(i, j);
        if v < cur {
            self.set(i, j, v);
        }
    }

    fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).map(move |j| (i, j)))
    }

    /// Null pairs sharing a third item already linked to both by a 1.
    pub fn one_hop_transitivity(&mut self) -> usize {
        let promote: Vec<(usize, usize)> = self
            .pairs()
            .filter(|&(i, j)| self.is_null(i, j) && self.has_common_neighbour(i, j))
            .collect();
        for &(i, j) in &promote {
            self.set(i, j, 1.0);
        }
        promote.len()
    }

    /// Like [`Self::one_hop_transitivity`] but also overrides fractional
    /// confidences; only entries equal to exactly 1.0 count as links and
    /// zeros are never changed.
    pub fn one_hop_transitivity_noisy(&mut self) -> usize {
        let promote: Vec<(usize, usize)> = self
            .pairs()
            .filter(|&(i, j)| {
                let e = self.get(i, j);
                e != 0.0 && e != 1.0 && self.has_common_neighbour(i, j)
            })
            .collect();
        for &(i, j) in &promote {
            self.set(i, j, 1.0);
        }
        promote.len()
    }

    fn has_common_neighbour(&self, i: usize, j: usize) -> bool {
        (0..self.n).any(|k| k != i && k != j && self.get(i, k) == 1.0 && self.get(j, k) == 1.0)
    }

    /// Null pairs where neither item has any confirmed nest-mate.
    pub fn identify_missing_pairs(&mut self) -> usize {
        let promote: Vec<(usize, usize)> = self
            .pairs()
            .filter(|&(i, j)| {
                self.is_null(i, j)
                    && (0..self.n).all(|k| {
                        k == i || k == j || (self.get(i, k) != 1.0 && self.get(j, k) != 1.0)
                    })
            })
            .collect();
        for &(i, j) in &promote {
            self.set(i, j, 1.0);
        }
        promote.len()
    }

    pub fn nulls_to_zero(&mut self) {
        for (i, j) in self.pairs().collect::<Vec<_>>() {
            if self.is_null(i, j) {
                self.set(i, j, 0.0);
            }
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.pairs().all(|(i, j)| self.get(i, j) == self.get(j, i))
    }

    /// Connected components of the graph whose edges are the entries equal
    /// to 1.
    pub fn components(&self) -> NestPartition {
        let mut label: Vec<usize> = (0..self.n).collect();
        fn root(label: &mut [usize], mut x: usize) -> usize {
            while label[x] != x {
                label[x] = label[label[x]];
                x = label[x];
            }
            x
        }
        for (i, j) in self.pairs().collect::<Vec<_>>() {
            if self.get(i, j) == 1.0 {
                let (a, b) = (root(&mut label, i), root(&mut label, j));
                label[a.max(b)] = a.min(b);
            }
        }
        let roots: Vec<usize> = (0..self.n).map(|i| root(&mut label, i)).collect();
        NestPartition::from_labels(&roots)
    }

    /// Triangles `i < j < k` with two edges equal to 1 and the third 0.
    pub fn inconsistent_triangles(&self) -> Vec<[usize; 3]> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                for k in j + 1..self.n {
                    let e = [self.get(i, j), self.get(j, k), self.get(i, k)];
                    let ones = e.iter().filter(|&&x| x == 1.0).count();
                    let zeros = e.iter().filter(|&&x| x == 0.0).count();
                    if ones == 2 && zeros == 1 {
                        out.push([i, j, k]);
                    }
                }
            }
        }
        out
    }

    /// Weight matrix for community detection: nulls become 0 and the
    /// diagonal is 1.
    pub fn weights(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| {
                (0..self.n)
                    .map(|j| match self.get(i, j) {
                        _ if i == j => 1.0,
                        v if v == NULL => 0.0,
                        v => v,
                    })
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_updates() {
        let mut e = EdgeMatrix::new(3);
        e.set(0, 2, 1.0);
        assert_eq!(e.get(2, 0), 1.0);
        e.set_min(0, 1, 0.3);
        e.set_min(1, 0, 0.7);
        assert_eq!(e.get(0, 1), 0.3);
        assert!(e.is_symmetric());
    }

    #[test]
    fn transitivity_uses_snapshot() {
        // 0-3 only gains a common neighbour once 0-2 is promoted, which
        // must not happen within the same pass
        let mut e = EdgeMatrix::new(4);
        e.set(0, 1, 1.0);
        e.set(1, 2, 1.0);
        e.set(3, 2, 1.0);
        assert_eq!(e.one_hop_transitivity(), 2);
        assert_eq!(e.get(0, 2), 1.0);
        assert_eq!(e.get(1, 3), 1.0);
        assert!(e.is_null(0, 3));
    }

    #[test]
    fn missing_pairs_only_for_isolated_items() {
        let mut e = EdgeMatrix::new(4);
        e.set(0, 1, 1.0);
        e.set(0, 2, 0.0);
        e.set(0, 3, 0.0);
        e.set(1, 2, 0.0);
        e.set(1, 3, 0.0);
        assert_eq!(e.identify_missing_pairs(), 1);
        assert_eq!(e.get(2, 3), 1.0);
        let p = e.components();
        assert_eq!(p.nests(), &[vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn noisy_transitivity_ignores_fractions() {
        let mut e = EdgeMatrix::new(3);
        e.set(0, 1, 1.0);
        e.set(1, 2, 0.99);
        e.set(0, 2, 0.4);
        assert_eq!(e.one_hop_transitivity_noisy(), 0);
        e.set(1, 2, 1.0);
        assert_eq!(e.one_hop_transitivity_noisy(), 1);
        assert_eq!(e.get(0, 2), 1.0);
        let mut z = EdgeMatrix::new(3);
        z.set(0, 1, 1.0);
        z.set(1, 2, 1.0);
        z.set(0, 2, 0.0);
        assert_eq!(z.one_hop_transitivity_noisy(), 0);
        assert_eq!(z.inconsistent_triangles(), vec![[0, 1, 2]]);
    }

    #[test]
    fn weights_fill_nulls_and_diagonal() {
        let mut e = EdgeMatrix::new(2);
        assert_eq!(e.weights(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        e.set(0, 1, 0.25);
        assert_eq!(e.weights()[1][0], 0.25);
    }
}
