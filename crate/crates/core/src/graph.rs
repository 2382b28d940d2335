//! Prior network, its normalized Laplacian and the spectral basis reused by
//! every estimator.
//!
//! The normalized Laplacian is `(D - A) / d_bar` where `D` holds the node
//! degrees and `d_bar` is the mean degree. Its eigenvectors `U` (columns) and
//! eigenvalues `tau_1 >= ... >= tau_p >= 0` define the coordinates in which all
//! shrinkage operators are diagonal.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::sym_eigen_desc;

/// Eigenvalues below this are classified as zero.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-8;

/// Undirected, unweighted network over `p` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    p: usize,
    adjacency: DMatrix<f64>,
}

impl Network {
    /// Build from a list of node pairs. Each pair sets both `A_ij` and `A_ji`;
    /// duplicates are harmless.
    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter("network needs p >= 1".into()));
        }
        let mut adjacency = DMatrix::zeros(p, p);
        for &(i, j) in edges {
            for index in [i, j] {
                if index >= p {
                    return Err(Error::NodeOutOfRange { index, p });
                }
            }
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            adjacency[(i, j)] = 1.0;
            adjacency[(j, i)] = 1.0;
        }
        Ok(Self { p, adjacency })
    }

    /// Build from a dense square 0/1 matrix.
    pub fn from_dense(adjacency: DMatrix<f64>) -> Result<Self> {
        let p = adjacency.nrows();
        if p == 0 || adjacency.ncols() != p {
            return Err(Error::Dimension(format!(
                "adjacency must be square and non-empty, got {}x{}",
                adjacency.nrows(),
                adjacency.ncols()
            )));
        }
        for i in 0..p {
            for j in 0..p {
                let v = adjacency[(i, j)];
                if v != 0.0 && v != 1.0 {
                    return Err(Error::NonBinaryAdjacency {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
        }
        for i in 0..p {
            if adjacency[(i, i)] != 0.0 {
                return Err(Error::SelfLoop(i));
            }
            for j in (i + 1)..p {
                if adjacency[(i, j)] != adjacency[(j, i)] {
                    return Err(Error::AsymmetricAdjacency(i, j));
                }
            }
        }
        Ok(Self { p, adjacency })
    }

    /// Network with no edges.
    pub fn empty(p: usize) -> Self {
        Self {
            p,
            adjacency: DMatrix::zeros(p, p),
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[(i, j)] != 0.0
    }

    pub fn degrees(&self) -> Vec<f64> {
        self.adjacency.row_iter().map(|row| row.sum()).collect()
    }

    pub fn mean_degree(&self) -> f64 {
        self.degrees().iter().sum::<f64>() / self.p as f64
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        let twice: f64 = self.adjacency.iter().sum();
        (twice / 2.0).round() as usize
    }

    /// Edges `(i, j)` with `i < j`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.p {
            for j in (i + 1)..self.p {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Connected components counted by breadth-first search.
    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.p];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for start in 0..self.p {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for v in 0..self.p {
                    if !seen[v] && self.has_edge(u, v) {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
        count
    }

    /// Unnormalized Laplacian `D - A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = -self.adjacency.clone();
        for (i, d) in self.degrees().into_iter().enumerate() {
            l[(i, i)] = d;
        }
        l
    }
}

/// Spectral decomposition of the normalized Laplacian.
#[derive(Debug, Clone, Serialize)]
pub struct LaplacianSpectrum {
    #[serde(skip)]
    eigvecs: DMatrix<f64>,
    eigvals: Vec<f64>,
    mean_degree: f64,
    empty_network: bool,
}

impl LaplacianSpectrum {
    /// Spectrum of `(D - A) / d_bar`, eigenvalues nonincreasing.
    ///
    /// For a network without edges the normalized Laplacian is undefined; the
    /// spectrum falls back to `tau = 0`, `U = I` and sets `empty_network`, so
    /// that every shrinkage operator reduces to the identity.
    pub fn new(net: &Network) -> Self {
        let p = net.p();
        let mean_degree = net.mean_degree();
        if mean_degree == 0.0 {
            return Self {
                eigvecs: DMatrix::identity(p, p),
                eigvals: vec![0.0; p],
                mean_degree,
                empty_network: true,
            };
        }
        let ln = net.laplacian() / mean_degree;
        let (vals, vecs) = sym_eigen_desc(ln);
        // the Laplacian is PSD; clamp solver noise below zero
        let eigvals = vals.iter().map(|&v| v.max(0.0)).collect();
        Self {
            eigvecs: vecs,
            eigvals,
            mean_degree,
            empty_network: false,
        }
    }

    /// Build directly from an orthonormal basis and eigenvalues. Used for
    /// synthetic spectra in tests and diagnostics.
    pub fn from_parts(eigvecs: DMatrix<f64>, eigvals: Vec<f64>, mean_degree: f64) -> Result<Self> {
        let p = eigvals.len();
        if eigvecs.nrows() != p || eigvecs.ncols() != p {
            return Err(Error::Dimension(format!(
                "basis is {}x{} but {} eigenvalues given",
                eigvecs.nrows(),
                eigvecs.ncols(),
                p
            )));
        }
        if eigvals.windows(2).any(|w| w[0] < w[1]) || eigvals.iter().any(|&t| t < 0.0) {
            return Err(Error::InvalidParameter(
                "eigenvalues must be nonnegative and nonincreasing".into(),
            ));
        }
        Ok(Self {
            eigvecs,
            eigvals,
            mean_degree,
            empty_network: mean_degree == 0.0,
        })
    }

    pub fn p(&self) -> usize {
        self.eigvals.len()
    }

    /// Orthonormal eigenvectors as columns.
    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    pub fn eigvals(&self) -> &[f64] {
        &self.eigvals
    }

    pub fn mean_degree(&self) -> f64 {
        self.mean_degree
    }

    pub fn is_empty_network(&self) -> bool {
        self.empty_network
    }

    /// Number of eigenvalues classified as zero.
    pub fn zero_count(&self) -> usize {
        self.eigvals
            .iter()
            .filter(|&&t| t < ZERO_EIGENVALUE_TOL)
            .count()
    }

    /// `U^T B`: loadings expressed in the spectral basis.
    pub fn rotate(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if b.nrows() != self.p() {
            return Err(Error::Dimension(format!(
                "loadings have {} rows, spectrum has p = {}",
                b.nrows(),
                self.p()
            )));
        }
        Ok(self.eigvecs.tr_mul(b))
    }

    /// `U diag(tau) U^T`, which equals the normalized Laplacian.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.eigvecs.clone();
        for (j, &t) in self.eigvals.iter().enumerate() {
            scaled.column_mut(j).scale_mut(t);
        }
        scaled * self.eigvecs.transpose()
    }

    /// Squared row norms of `U^T B`.
    pub fn rotated_row_norms(&self, b: &DMatrix<f64>) -> Result<DVector<f64>> {
        let bt = self.rotate(b)?;
        Ok(DVector::from_iterator(
            bt.nrows(),
            bt.row_iter().map(|row| row.norm_squared()),
        ))
    }
}

/// Network cohesion penalty `sum_i sum_j A_ij ||b_i - b_j||^2`, evaluated in the
/// spectral basis as `2 d_bar sum_j tau_j ||(U^T B)_j||^2`.
pub fn penalty_quadratic(b: &DMatrix<f64>, net: &Network, spec: &LaplacianSpectrum) -> Result<f64> {
    if net.p() != spec.p() {
        return Err(Error::Dimension(format!(
            "network has p = {}, spectrum has p = {}",
            net.p(),
            spec.p()
        )));
    }
    let norms = spec.rotated_row_norms(b)?;
    let weighted: f64 = spec
        .eigvals()
        .iter()
        .zip(norms.iter())
        .map(|(t, n)| t * n)
        .sum();
    Ok(2.0 * spec.mean_degree() * weighted)
}
