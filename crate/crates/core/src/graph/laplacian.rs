use ndarray::Array2;

use super::Graph;

/// Symmetric sparse matrix in CSR form with explicit values.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.offsets[i]..self.offsets[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(pos) => self.vals[r.start + pos],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for p in self.offsets[i]..self.offsets[i + 1] {
                acc += self.vals[p] * x[self.cols[p]];
            }
            y[i] = acc;
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                a[[i, j]] = v;
            }
        }
        a
    }

    /// Rows that hold no nonzero entry.
    pub fn zero_rows(&self) -> Vec<usize> {
        (0..self.n)
            .filter(|&i| self.row(i).all(|(_, v)| v == 0.0))
            .collect()
    }
}

/// `L = I − D^{-1/2} A D^{-1/2}`, with isolated nodes given an all-zero row and column.
pub fn normalized_laplacian(graph: &Graph) -> CsrMatrix {
    let n = graph.n();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| match graph.degree(i) {
            0 => 0.0,
            d => 1.0 / (d as f64).sqrt(),
        })
        .collect();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(graph.num_edges() * 2 + n);
    let mut vals = Vec::with_capacity(cols.capacity());
    offsets.push(0);
    for i in 0..n {
        let nb = graph.neighbors(i);
        let split = nb.partition_point(|&j| j < i);
        for &j in &nb[..split] {
            cols.push(j);
            vals.push(-inv_sqrt[i] * inv_sqrt[j]);
        }
        if !nb.is_empty() {
            cols.push(i);
            vals.push(1.0);
        }
        for &j in &nb[split..] {
            cols.push(j);
            vals.push(-inv_sqrt[i] * inv_sqrt[j]);
        }
        offsets.push(cols.len());
    }
    CsrMatrix { n, offsets, cols, vals }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn k2_laplacian() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        assert_eq!(normalized_laplacian(&g).to_dense(), array![[1.0, -1.0], [-1.0, 1.0]]);
    }

    #[test]
    fn k3_laplacian() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let l = normalized_laplacian(&g).to_dense();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { -0.5 };
                assert!((l[[i, j]] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn isolated_node_has_zero_row() {
        let g = Graph::from_edges(3, &[(0, 1)]).unwrap();
        let l = normalized_laplacian(&g);
        assert_eq!(l.zero_rows(), vec![2]);
        assert!(l.to_dense().column(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matvec_matches_dense() {
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)]).unwrap();
        let l = normalized_laplacian(&g);
        let x = [0.3, -1.0, 2.0, 0.5, -0.7];
        let mut y = [0.0; 5];
        l.matvec(&x, &mut y);
        let dense = l.to_dense().dot(&ndarray::arr1(&x));
        for i in 0..5 {
            assert!((y[i] - dense[i]).abs() < 1e-14);
        }
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (2usize..40).prop_flat_map(|n| {
            proptest::collection::vec((0..n, 0..n), 0..120).prop_map(move |raw| {
                let edges: Vec<_> = raw.into_iter().filter(|(u, v)| u != v).collect();
                Graph::from_edges(n, &edges).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn rayleigh_quotient_in_range(g in arb_graph(), seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let l = normalized_laplacian(&g);
            let x: Vec<f64> = (0..g.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut y = vec![0.0; g.n()];
            l.matvec(&x, &mut y);
            let quad: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
            let norm2: f64 = x.iter().map(|a| a * a).sum();
            prop_assert!(quad >= -1e-10 * norm2.max(1.0));
            prop_assert!(quad <= 2.0 * norm2 + 1e-10);
        }

        #[test]
        fn laplacian_is_symmetric(g in arb_graph()) {
            let l = normalized_laplacian(&g);
            for i in 0..g.n() {
                for (j, v) in l.row(i) {
                    prop_assert_eq!(v, l.get(j, i));
                }
            }
        }
    }
}
