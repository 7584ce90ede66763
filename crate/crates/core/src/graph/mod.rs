//! Undirected simple graphs in CSR form, generators, homophily measures and I/O.

mod features;
mod generate;
mod io;
mod laplacian;

pub use features::{gen_features, FeatureGenParams, FeatureMode};
pub use generate::{pa_generate, sbm_from_homophily, sbm_generate, PaParams, SbmParams};
pub use io::{load_graph, save_graph};
pub use laplacian::{normalized_laplacian, CsrMatrix};

use ndarray::Array2;

use crate::error::{Error, Result};

/// Undirected, unweighted graph without self-loops.
///
/// Neighbor lists are stored in CSR form and kept strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    pub features: Option<Array2<f64>>,
    pub labels: Option<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from an edge list. Self-loops are rejected, duplicate
    /// and reversed copies of an edge collapse to one.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::from_edges_counting(n, edges).map(|(g, _)| g)
    }

    /// Like [`Graph::from_edges`] but also returns how many duplicates were dropped.
    pub fn from_edges_counting(n: usize, edges: &[(usize, usize)]) -> Result<(Self, usize)> {
        let mut pairs = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Parameter(format!("edge ({u}, {v}) out of range for n = {n}")));
            }
            if u == v {
                return Err(Error::Parameter(format!("self-loop at node {u}")));
            }
            pairs.push((u.min(v), u.max(v)));
        }
        pairs.sort_unstable();
        let before = pairs.len();
        pairs.dedup();
        let duplicates = before - pairs.len();

        let mut degree = vec![0usize; n];
        for &(u, v) in &pairs {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut fill = offsets[..n].to_vec();
        let mut neighbors = vec![0usize; offsets[n]];
        for &(u, v) in &pairs {
            neighbors[fill[u]] = v;
            fill[u] += 1;
            neighbors[fill[v]] = u;
            fill[v] += 1;
        }
        for i in 0..n {
            neighbors[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        Ok((
            Graph {
                n,
                offsets,
                neighbors,
                features: None,
                labels: None,
            },
            duplicates,
        ))
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::Parameter(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_features(mut self, features: Array2<f64>) -> Result<Self> {
        if features.nrows() != self.n {
            return Err(Error::Parameter(format!(
                "feature matrix has {} rows for {} nodes",
                features.nrows(),
                self.n
            )));
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.degree(i)).collect()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    pub fn min_degree(&self) -> usize {
        (0..self.n).map(|i| self.degree(i)).min().unwrap_or(0)
    }

    pub fn mean_degree(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.neighbors.len() as f64 / self.n as f64
    }

    pub fn isolated_nodes(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.degree(i) == 0).collect()
    }

    pub fn num_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().copied().max().map_or(0, |m| m + 1))
    }

    pub fn labels_or_err(&self) -> Result<&[usize]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::Config("graph has no labels".into()))
    }

    pub fn features_or_err(&self) -> Result<&Array2<f64>> {
        self.features
            .as_ref()
            .ok_or_else(|| Error::Config("graph has no features".into()))
    }

    /// Connected component index per node, numbered in order of first node.
    pub fn components(&self) -> Vec<usize> {
        let mut comp = vec![usize::MAX; self.n];
        let mut next = 0;
        let mut stack = Vec::new();
        for s in 0..self.n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = next;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &v in self.neighbors(u) {
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn is_connected(&self) -> bool {
        self.n == 0 || self.components().iter().all(|&c| c == 0)
    }

    /// Checks the structural invariants: symmetry, no self-loops, strictly
    /// increasing neighbor lists, labels in range.
    pub fn validate(&self) -> Result<()> {
        for u in 0..self.n {
            let nb = self.neighbors(u);
            if nb.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Parameter(format!("neighbors of {u} not strictly increasing")));
            }
            for &v in nb {
                if v == u {
                    return Err(Error::Parameter(format!("self-loop at {u}")));
                }
                if v >= self.n || !self.has_edge(v, u) {
                    return Err(Error::Parameter(format!("edge ({u}, {v}) not symmetric")));
                }
            }
        }
        Ok(())
    }
}

/// Fraction of edges whose endpoints share a label.
pub fn edge_homophily(graph: &Graph) -> Result<f64> {
    let labels = graph.labels_or_err()?;
    let m = graph.num_edges();
    if m == 0 {
        return Err(Error::UndefinedMeasure("edge homophily of a graph with no edges".into()));
    }
    let same = graph.edges().filter(|&(u, v)| labels[u] == labels[v]).count();
    Ok(same as f64 / m as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalHomophily {
    pub value: f64,
    /// Isolated nodes get value 0 and this flag.
    pub isolated: bool,
}

/// Fraction of a node's neighbors that share its label.
pub fn local_homophily(graph: &Graph, node: usize) -> Result<LocalHomophily> {
    let labels = graph.labels_or_err()?;
    let nb = graph.neighbors(node);
    if nb.is_empty() {
        return Ok(LocalHomophily {
            value: 0.0,
            isolated: true,
        });
    }
    let same = nb.iter().filter(|&&v| labels[v] == labels[node]).count();
    Ok(LocalHomophily {
        value: same as f64 / nb.len() as f64,
        isolated: false,
    })
}

/// Quintile index (0..5) of each node's local homophily. Nodes are ranked
/// by value with ties broken by node index; rank r lands in bucket ⌊5r/n⌋.
pub fn quintile_bucketing(graph: &Graph) -> Result<Vec<usize>> {
    let n = graph.n();
    let values = (0..n)
        .map(|i| local_homophily(graph, i).map(|h| h.value))
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut bucket = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        bucket[i] = rank * 5 / n;
    }
    Ok(bucket)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle(labels: Vec<usize>) -> Graph {
        Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)])
            .unwrap()
            .with_labels(labels)
            .unwrap()
    }

    fn k22() -> Graph {
        Graph::from_edges(4, &[(0, 2), (0, 3), (1, 2), (1, 3)])
            .unwrap()
            .with_labels(vec![0, 0, 1, 1])
            .unwrap()
    }

    #[test]
    fn csr_is_symmetric_and_sorted() {
        let (g, dups) = Graph::from_edges_counting(5, &[(3, 1), (0, 4), (1, 3), (2, 0)]).unwrap();
        assert_eq!(dups, 1);
        assert_eq!(g.num_edges(), 3);
        assert_eq!(g.neighbors(0), &[2, 4]);
        assert_eq!(g.neighbors(3), &[1]);
        g.validate().unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 2), (0, 4), (1, 3)]);
    }

    #[test]
    fn rejects_self_loops_and_out_of_range() {
        assert!(matches!(Graph::from_edges(3, &[(1, 1)]), Err(Error::Parameter(_))));
        assert!(matches!(Graph::from_edges(3, &[(0, 3)]), Err(Error::Parameter(_))));
    }

    #[test]
    fn edge_homophily_examples() {
        assert_eq!(edge_homophily(&triangle(vec![0, 0, 0])).unwrap(), 1.0);
        assert_eq!(edge_homophily(&k22()).unwrap(), 0.0);
        assert!((edge_homophily(&triangle(vec![0, 0, 1])).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let empty = Graph::from_edges(3, &[]).unwrap().with_labels(vec![0, 0, 0]).unwrap();
        assert!(matches!(edge_homophily(&empty), Err(Error::UndefinedMeasure(_))));
    }

    #[test]
    fn local_homophily_examples() {
        // star: center 0 with three same-label leaves and one other
        let star = Graph::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)])
            .unwrap()
            .with_labels(vec![0, 0, 0, 0, 1])
            .unwrap();
        assert_eq!(local_homophily(&star, 0).unwrap().value, 0.75);
        let hub = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)])
            .unwrap()
            .with_labels(vec![1, 1, 1, 1])
            .unwrap();
        assert_eq!(local_homophily(&hub, 0).unwrap().value, 1.0);
        assert_eq!(local_homophily(&k22(), 2).unwrap().value, 0.0);

        let iso = Graph::from_edges(2, &[]).unwrap().with_labels(vec![0, 1]).unwrap();
        let h = local_homophily(&iso, 1).unwrap();
        assert!(h.isolated);
        assert_eq!(h.value, 0.0);
    }

    #[test]
    fn quintiles_break_ties_by_index() {
        let g = Graph::from_edges(10, &[]).unwrap().with_labels(vec![0; 10]).unwrap();
        // all values tie at 0, so rank == index
        assert_eq!(quintile_bucketing(&g).unwrap(), vec![0, 0, 1, 1, 2, 2, 3, 3, 4, 4]);
    }

    #[test]
    fn components_of_two_cliques() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert_eq!(g.components(), vec![0, 0, 1, 1]);
        assert!(!g.is_connected());
    }
}
