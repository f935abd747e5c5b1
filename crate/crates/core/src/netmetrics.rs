//! Binary networks from synchronization matrices and their node measures.
//!
//! Channels `i` and `j` are connected when their normalized CPTE is at most
//! the threshold: lower CPTE means stronger synchronization.

use serde::{Deserialize, Serialize};

use crate::cpte::SyncMatrix;
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::Real;

const EC_MAX_ITER: usize = 10_000;

/// Symmetric 0/1 adjacency with an empty diagonal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryNetwork {
    pub n: usize,
    adjacency: Vec<bool>,
    threshold: Option<u64>,
}

impl BinaryNetwork {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            adjacency: vec![false; n * n],
            threshold: None,
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::empty(n);
        for &(i, j) in edges {
            g.set_edge(i, j, true);
        }
        g
    }

    pub fn complete(n: usize) -> Self {
        let edges: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        Self::from_edges(n, &edges)
    }

    pub fn set_edge(&mut self, i: usize, j: usize, on: bool) {
        assert!(i != j, "self-loops are not allowed");
        self.adjacency[i * self.n + j] = on;
        self.adjacency[j * self.n + i] = on;
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n + j]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i * self.n..(i + 1) * self.n]
            .iter()
            .filter(|&&e| e)
            .count()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().filter(|&&e| e).count() / 2
    }

    /// Threshold used to build the network, when it came from [`binarize`].
    pub fn threshold_value(&self) -> Option<f64> {
        self.threshold.map(f64::from_bits)
    }

    /// Adjacency as a row-major 0/1 matrix.
    pub fn to_dense<T: Real>(&self) -> Vec<T> {
        self.adjacency
            .iter()
            .map(|&e| if e { T::one() } else { T::zero() })
            .collect()
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut g = Self::empty(self.n);
        g.threshold = self.threshold;
        for i in 0..self.n {
            for j in 0..self.n {
                if self.has_edge(i, j) {
                    g.adjacency[perm[i] * self.n + perm[j]] = true;
                }
            }
        }
        g
    }
}

/// Connects `i != j` whenever `m(i, j) <= th`.
pub fn binarize<T: Real>(m: &SyncMatrix<T>, th: f64) -> Result<BinaryNetwork> {
    if !(0.0..=1.0).contains(&th) {
        return Err(Error::ThresholdOutOfRange(th));
    }
    let t = T::lit(th);
    let mut g = BinaryNetwork::empty(m.n);
    g.threshold = Some(th.to_bits());
    for i in 0..m.n {
        for j in i + 1..m.n {
            if m.get(i, j) <= t {
                g.set_edge(i, j, true);
            }
        }
    }
    Ok(g)
}

/// `2 t_k / (p_k (p_k - 1))`; zero for nodes of degree below 2.
pub fn clustering_coefficients<T: Real>(g: &BinaryNetwork) -> Vec<T> {
    (0..g.n)
        .map(|k| {
            let nbrs: Vec<usize> = (0..g.n).filter(|&j| g.has_edge(k, j)).collect();
            let p = nbrs.len();
            if p < 2 {
                return T::zero();
            }
            let mut triangles = 0usize;
            for (a, &u) in nbrs.iter().enumerate() {
                for &w in &nbrs[a + 1..] {
                    if g.has_edge(u, w) {
                        triangles += 1;
                    }
                }
            }
            T::lit(2.0 * triangles as f64) / T::lit((p * (p - 1)) as f64)
        })
        .collect()
}

/// Diagonal of `exp(A)`: closed walks through each node weighted by `1/l!`.
pub fn subgraph_centrality<T: Real>(g: &BinaryNetwork) -> Result<Vec<T>> {
    let eig = symmetric_eigen(&g.to_dense::<T>(), g.n)?;
    let exps: Vec<T> = eig.eigenvalues.iter().map(|l| l.exp()).collect();
    Ok((0..g.n)
        .map(|k| {
            let mut terms: Vec<T> = (0..g.n)
                .map(|j| {
                    let v = eig.vector_entry(k, j);
                    v * v * exps[j]
                })
                .collect();
            terms.sort_by(|a, b| a.partial_cmp(b).unwrap());
            terms.into_iter().sum()
        })
        .collect())
}

/// Trace of `exp(A)`.
pub fn estrada_index<T: Real>(g: &BinaryNetwork) -> Result<T> {
    Ok(subgraph_centrality::<T>(g)?.into_iter().sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenvectorCentrality<T> {
    /// Nonnegative, maximum entry 1 (all zero on an edgeless network).
    pub values: Vec<T>,
    pub eigenvalue: T,
    pub iterations: usize,
    /// Set when the network has no edges.
    pub degenerate: bool,
}

/// Perron vector of the adjacency by power iteration on `A + I`, started from
/// the uniform vector. The shift keeps bipartite graphs from oscillating
/// without changing the eigenvectors.
pub fn eigenvector_centrality<T: Real>(g: &BinaryNetwork) -> Result<EigenvectorCentrality<T>> {
    let n = g.n;
    if g.edge_count() == 0 {
        return Ok(EigenvectorCentrality {
            values: vec![T::zero(); n],
            eigenvalue: T::zero(),
            iterations: 0,
            degenerate: true,
        });
    }
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
    let nbrs: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| g.has_edge(i, j)).collect())
        .collect();
    let mut v = vec![T::one(); n];
    let mut next = vec![T::zero(); n];
    for it in 1..=EC_MAX_ITER {
        for i in 0..n {
            next[i] = v[i] + nbrs[i].iter().map(|&j| v[j]).sum::<T>();
        }
        let peak = next.iter().copied().fold(T::zero(), T::max);
        let mut diff = T::zero();
        for i in 0..n {
            next[i] = next[i] / peak;
            diff = diff.max((next[i] - v[i]).abs());
        }
        std::mem::swap(&mut v, &mut next);
        if diff < tol {
            let av: Vec<T> = (0..n)
                .map(|i| nbrs[i].iter().map(|&j| v[j]).sum::<T>())
                .collect();
            let num: T = v.iter().zip(&av).map(|(a, b)| *a * *b).sum();
            let den: T = v.iter().map(|a| *a * *a).sum();
            return Ok(EigenvectorCentrality {
                values: v,
                eigenvalue: num / den,
                iterations: it,
                degenerate: false,
            });
        }
    }
    Err(Error::NoConvergence(EC_MAX_ITER))
}

/// Active edges over `n (n - 1) / 2`.
pub fn connectivity_density<T: Real>(g: &BinaryNetwork) -> T {
    let possible = g.n * g.n.saturating_sub(1) / 2;
    if possible == 0 {
        return T::zero();
    }
    T::lit(g.edge_count() as f64) / T::lit(possible as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeMeasures<T> {
    pub cc: Vec<T>,
    pub sc: Vec<T>,
    pub ec: Vec<T>,
    pub ec_degenerate: bool,
}

pub fn node_measures<T: Real>(g: &BinaryNetwork) -> Result<NodeMeasures<T>> {
    let ec = eigenvector_centrality(g)?;
    Ok(NodeMeasures {
        cc: clustering_coefficients(g),
        sc: subgraph_centrality(g)?,
        ec: ec.values,
        ec_degenerate: ec.degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Group;

    fn matrix3(vals: [f64; 3]) -> SyncMatrix<f64> {
        SyncMatrix::from_upper_triangle(3, &vals, "s", Group::GroupA, "all", 0, vec![]).unwrap()
    }

    #[test]
    fn binarize_examples() {
        let m = matrix3([0.0, 0.5, 1.0]);
        assert_eq!(binarize(&m, 0.5).unwrap().edge_count(), 2);
        assert_eq!(binarize(&m, 1.0).unwrap().edge_count(), 3);
        assert_eq!(binarize(&m, 0.0).unwrap().edge_count(), 1);
        assert!(matches!(binarize(&m, 1.5), Err(Error::ThresholdOutOfRange(_))));
        assert!(binarize(&m, -0.1).is_err());
        assert_eq!(binarize(&m, 0.5).unwrap().threshold_value(), Some(0.5));
    }

    #[test]
    fn clustering_examples() {
        let k3 = BinaryNetwork::complete(3);
        assert_eq!(clustering_coefficients::<f64>(&k3), vec![1.0; 3]);
        let path = BinaryNetwork::from_edges(3, &[(0, 1), (1, 2)]);
        assert_eq!(clustering_coefficients::<f64>(&path), vec![0.0; 3]);
    }

    #[test]
    fn subgraph_examples() {
        let sc = subgraph_centrality::<f64>(&BinaryNetwork::empty(4)).unwrap();
        assert!(sc.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let e = std::f64::consts::E;
        let want = e * e / 3.0 + 2.0 / (3.0 * e);
        for v in subgraph_centrality::<f64>(&BinaryNetwork::complete(3)).unwrap() {
            assert!((v - want).abs() < 1e-12);
            assert!((v - 2.7082).abs() < 1e-4);
        }
        let ei = estrada_index::<f64>(&BinaryNetwork::complete(3)).unwrap();
        assert!((ei - 3.0 * want).abs() < 1e-12);
    }

    #[test]
    fn eigenvector_examples() {
        let ec = eigenvector_centrality::<f64>(&BinaryNetwork::complete(4)).unwrap();
        assert!(ec.values.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!((ec.eigenvalue - 3.0).abs() < 1e-12);

        let star = BinaryNetwork::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        let ec = eigenvector_centrality::<f64>(&star).unwrap();
        assert!((ec.values[0] - 1.0).abs() < 1e-9);
        for v in &ec.values[1..] {
            assert!((v - 0.5).abs() < 1e-9);
        }
        assert!((ec.eigenvalue - 2.0).abs() < 1e-9);

        let empty = eigenvector_centrality::<f64>(&BinaryNetwork::empty(3)).unwrap();
        assert!(empty.degenerate);
        assert_eq!(empty.values, vec![0.0; 3]);
    }

    #[test]
    fn density_examples() {
        let g = BinaryNetwork::complete(19);
        assert_eq!(g.edge_count(), 171);
        assert_eq!(connectivity_density::<f64>(&g), 1.0);
        assert_eq!(connectivity_density::<f64>(&BinaryNetwork::empty(19)), 0.0);
        let g = BinaryNetwork::from_edges(3, &[(0, 1), (1, 2)]);
        assert!((connectivity_density::<f64>(&g) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn complete_graph_measures() {
        let m = node_measures::<f64>(&BinaryNetwork::complete(6)).unwrap();
        assert!(m.cc.iter().all(|&v| v == 1.0));
        assert!(m.ec.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(m.sc.iter().all(|&v| v > 1.0));
    }

    #[test]
    fn isolated_nodes_have_unit_sc() {
        let g = BinaryNetwork::from_edges(4, &[(0, 1)]);
        let sc = subgraph_centrality::<f64>(&g).unwrap();
        assert!((sc[2] - 1.0).abs() < 1e-14 && (sc[3] - 1.0).abs() < 1e-14);
        assert!(sc[0] > 1.0 && sc[1] > 1.0);
    }
}
