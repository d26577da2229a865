//! Symmetric k-NN graph and unnormalized Laplacian over target samples.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{EdaError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EdgeWeighting {
    /// `A_ij = 1` for every kept edge.
    #[default]
    Binary,
    /// `A_ij = exp(−‖x_i − x_j‖² / t)` for every kept edge.
    Heat { t: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianGraph {
    adjacency: DMatrix<f64>,
    degree: DVector<f64>,
    laplacian: DMatrix<f64>,
    k: usize,
}

impl LaplacianGraph {
    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn degree(&self) -> &DVector<f64> {
        &self.degree
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.nrows() == 0
    }

    /// Graph on `n` nodes without edges (the manifold term vanishes).
    pub fn edgeless(n: usize) -> Self {
        Self {
            adjacency: DMatrix::zeros(n, n),
            degree: DVector::zeros(n),
            laplacian: DMatrix::zeros(n, n),
            k: 0,
        }
    }

    /// Builds `D` and `L = D − A` from a symmetric adjacency matrix.
    pub fn from_adjacency(adjacency: DMatrix<f64>, k: usize) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n {
            return Err(EdaError::Shape("adjacency must be square".into()));
        }
        if (&adjacency - adjacency.transpose()).abs().max() > 0.0 {
            return Err(EdaError::Shape("adjacency must be symmetric".into()));
        }
        let degree = DVector::from_iterator(n, adjacency.row_iter().map(|r| r.sum()));
        let laplacian = DMatrix::from_diagonal(&degree) - &adjacency;
        Ok(Self {
            adjacency,
            degree,
            laplacian,
            k,
        })
    }

    /// Undirected edges `i < j` with their weights, one per line.
    pub fn edge_list(&self) -> String {
        let mut out = String::new();
        let n = self.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.adjacency[(i, j)];
                if w != 0.0 {
                    let _ = writeln!(out, "{i} {j} {w}");
                }
            }
        }
        out
    }

    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.edge_list()).map_err(|e| EdaError::io(path, e))
    }
}

fn squared_distances(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.ncols();
    DMatrix::from_fn(n, n, |i, j| (x.column(i) - x.column(j)).norm_squared())
}

/// Connects `i` and `j` when either is among the other's `k` nearest
/// neighbours (Euclidean, self excluded, ties to the lower index).
pub fn build_knn_graph(x: &Dataset, k: usize, weighting: EdgeWeighting) -> Result<LaplacianGraph> {
    let n = x.len();
    if k == 0 || k >= n {
        return Err(EdaError::Parameter(format!(
            "k-NN graph needs 1 <= k < n (k = {k}, n = {n})"
        )));
    }
    if let EdgeWeighting::Heat { t } = weighting {
        if !(t > 0.0) {
            return Err(EdaError::Parameter("heat kernel width must be positive".into()));
        }
    }
    let dist = squared_distances(x.features());
    let mut adjacency = DMatrix::zeros(n, n);
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        order.sort_by(|&a, &b| dist[(i, a)].total_cmp(&dist[(i, b)]).then(a.cmp(&b)));
        for &j in &order[..k] {
            let w = match weighting {
                EdgeWeighting::Binary => 1.0,
                EdgeWeighting::Heat { t } => (-dist[(i, j)] / t).exp(),
            };
            adjacency[(i, j)] = w;
            adjacency[(j, i)] = w;
        }
    }
    LaplacianGraph::from_adjacency(adjacency, k)
}
