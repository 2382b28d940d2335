//! Plain and network-penalized principal component estimators.
//!
//! Both penalties lead to a shrinkage operator `D^{-1}` that is diagonal in the
//! Laplacian eigenbasis `U`, with weights `w_j`:
//!
//! * Laplacian: `w_j = 1 / (1 + alpha * tau_j)`
//! * Projection: `w_j = 1 / (1 + alpha)` on the leading `p - m` eigenvectors,
//!   `w_j = 1` on the trailing `m`.
//!
//! Given `X~ = X U`, the factor scores are `sqrt(T)` times the leading `r`
//! eigenvectors of `X~ diag(w) X~^T` and the loadings are
//! `T^{-1} U diag(w) X~^T F`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LaplacianSpectrum;
use crate::linalg::{sym_eigen_desc, weighted_gram};

/// Eigen-gaps below this are reported as degenerate.
pub const DEGENERATE_GAP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    None,
    Laplacian,
    Projection,
}

impl PenaltyKind {
    /// Method label used in reports: `pca`, `lap` or `proj`.
    pub fn label(self) -> &'static str {
        match self {
            PenaltyKind::None => "pca",
            PenaltyKind::Laplacian => "lap",
            PenaltyKind::Projection => "proj",
        }
    }
}

impl fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PenaltyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pca" | "none" => Ok(PenaltyKind::None),
            "lap" | "laplacian" => Ok(PenaltyKind::Laplacian),
            "proj" | "projection" => Ok(PenaltyKind::Projection),
            other => Err(Error::InvalidParameter(format!("unknown method '{other}'"))),
        }
    }
}

/// Diagonal (in the `U` basis) representation of `D^{-1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShrinkageOperator {
    kind: PenaltyKind,
    alpha: f64,
    m: usize,
    #[serde(skip)]
    weights: Vec<f64>,
}

impl ShrinkageOperator {
    /// Build the weights for `kind` from a Laplacian spectrum.
    ///
    /// `m` is only used by the projection penalty. On the empty-network
    /// fallback spectrum every kind yields the identity.
    pub fn new(spec: &LaplacianSpectrum, kind: PenaltyKind, alpha: f64, m: usize) -> Result<Self> {
        let p = spec.p();
        if !(alpha >= 0.0) || alpha.is_infinite() {
            return Err(Error::InvalidParameter(format!(
                "alpha must be finite and >= 0, got {alpha}"
            )));
        }
        if kind == PenaltyKind::Projection && m > p {
            return Err(Error::InvalidParameter(format!("m = {m} outside [0, {p}]")));
        }
        let weights = match kind {
            PenaltyKind::None => vec![1.0; p],
            _ if spec.is_empty_network() => vec![1.0; p],
            PenaltyKind::Laplacian => spec
                .eigvals()
                .iter()
                .map(|&t| 1.0 / (1.0 + alpha * t))
                .collect(),
            PenaltyKind::Projection => (0..p)
                .map(|j| if j < p - m { 1.0 / (1.0 + alpha) } else { 1.0 })
                .collect(),
        };
        let (alpha, m) = match kind {
            PenaltyKind::None => (0.0, 0),
            PenaltyKind::Laplacian => (alpha, 0),
            PenaltyKind::Projection => (alpha, m),
        };
        Ok(Self {
            kind,
            alpha,
            m,
            weights,
        })
    }

    pub fn identity(p: usize) -> Self {
        Self {
            kind: PenaltyKind::None,
            alpha: 0.0,
            m: 0,
            weights: vec![1.0; p],
        }
    }

    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn p(&self) -> usize {
        self.weights.len()
    }

    /// `tr(D^{-1})`
    pub fn trace_inv(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `tr(D^{-2})`
    pub fn trace_inv_sq(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    /// Dense `U diag(w) U^T`.
    pub fn dense_inverse(&self, spec: &LaplacianSpectrum) -> DMatrix<f64> {
        let u = spec.eigvecs();
        weighted_gram(u, &self.weights)
    }
}

/// A panel together with its coordinates in the Laplacian eigenbasis.
///
/// `X~ = X U` is formed once so that a whole tuning grid can be fitted
/// without touching `p x p` matrices again.
#[derive(Debug, Clone)]
pub struct SpectralPanel<'a> {
    x: &'a DMatrix<f64>,
    spec: &'a LaplacianSpectrum,
    rotated: DMatrix<f64>,
}

impl<'a> SpectralPanel<'a> {
    pub fn new(x: &'a DMatrix<f64>, spec: &'a LaplacianSpectrum) -> Result<Self> {
        if x.ncols() != spec.p() {
            return Err(Error::Dimension(format!(
                "panel has {} columns, spectrum has p = {}",
                x.ncols(),
                spec.p()
            )));
        }
        if x.nrows() == 0 {
            return Err(Error::Dimension("panel has no rows".into()));
        }
        check_finite(x)?;
        let rotated = x * spec.eigvecs();
        Ok(Self { x, spec, rotated })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        self.x
    }

    pub fn spectrum(&self) -> &LaplacianSpectrum {
        self.spec
    }

    /// `X U`
    pub fn rotated(&self) -> &DMatrix<f64> {
        &self.rotated
    }

    pub fn t(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// `X D^{-1} X^T`, computed as `X~ diag(w) X~^T`.
    pub fn gram(&self, op: &ShrinkageOperator) -> DMatrix<f64> {
        weighted_gram(&self.rotated, op.weights())
    }

    /// Gram matrix of the leading `k` rotated columns and of the remaining
    /// ones. The projection penalty's Gram matrix is
    /// `head / (1 + alpha) + tail` with `k = p - m`.
    pub fn split_gram(&self, k: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let p = self.p();
        let head = self.rotated.columns(0, k);
        let tail = self.rotated.columns(k, p - k);
        (&head * head.transpose(), &tail * tail.transpose())
    }

    pub fn check_rank(&self, r: usize) -> Result<()> {
        let limit = self.t().min(self.p());
        if r == 0 || r >= limit {
            return Err(Error::InvalidParameter(format!(
                "r = {r} must satisfy 1 <= r < min(T, p) = {limit}"
            )));
        }
        Ok(())
    }

    pub fn fit(&self, op: &ShrinkageOperator, r: usize) -> Result<FactorEstimate> {
        let gram = self.gram(op);
        self.fit_with_gram(gram, op, r)
    }

    /// Fit from a precomputed `X D^{-1} X^T`.
    pub fn fit_with_gram(
        &self,
        gram: DMatrix<f64>,
        op: &ShrinkageOperator,
        r: usize,
    ) -> Result<FactorEstimate> {
        self.check_rank(r)?;
        if op.p() != self.p() {
            return Err(Error::Dimension(format!(
                "operator has p = {}, panel has p = {}",
                op.p(),
                self.p()
            )));
        }
        let t = self.t();
        let p = self.p();
        let (vals, vecs) = sym_eigen_desc(gram);
        let scale = 1.0 / (p as f64 * t as f64);
        let gram_eigvals: Vec<f64> = vals.iter().map(|v| v * scale).collect();

        let scores = vecs.columns(0, r) * (t as f64).sqrt();
        // U diag(w) X~^T F / T
        let mut rotated_loadings = self.rotated.tr_mul(&scores) / t as f64;
        for (j, &w) in op.weights().iter().enumerate() {
            rotated_loadings.row_mut(j).scale_mut(w);
        }
        let loadings = self.spec.eigvecs() * &rotated_loadings;

        let gap = gram_eigvals[r - 1] - gram_eigvals[r];
        Ok(FactorEstimate {
            scores,
            loadings,
            operator: op.clone(),
            eigvals: gram_eigvals[..r].to_vec(),
            gram_eigvals,
            degenerate_gap: gap < DEGENERATE_GAP,
        })
    }
}

/// Factor scores, loadings and the operator they were computed with.
#[derive(Debug, Clone)]
pub struct FactorEstimate {
    /// `F^`, T x r, with `F^T F / T = I`.
    pub scores: DMatrix<f64>,
    /// `B^`, p x r.
    pub loadings: DMatrix<f64>,
    pub operator: ShrinkageOperator,
    /// Leading `r` eigenvalues of `(pT)^{-1} X D^{-1} X^T`.
    pub eigvals: Vec<f64>,
    /// All `T` eigenvalues of `(pT)^{-1} X D^{-1} X^T`.
    pub gram_eigvals: Vec<f64>,
    /// `lambda_r - lambda_{r+1}` fell below [`DEGENERATE_GAP`].
    pub degenerate_gap: bool,
}

impl FactorEstimate {
    pub fn r(&self) -> usize {
        self.scores.ncols()
    }

    /// `C^ = F^ B^^T`
    pub fn common_components(&self) -> DMatrix<f64> {
        &self.scores * self.loadings.transpose()
    }

    /// `||X - C^||_F^2`
    pub fn residual_sum_squares(&self, x: &DMatrix<f64>) -> f64 {
        (x - self.common_components()).norm_squared()
    }
}

/// Fit `r` factors to `x` with shrinkage operator `op`.
pub fn fit(
    x: &DMatrix<f64>,
    spec: &LaplacianSpectrum,
    op: &ShrinkageOperator,
    r: usize,
) -> Result<FactorEstimate> {
    SpectralPanel::new(x, spec)?.fit(op, r)
}

/// Penalized least-squares objective
/// `(pT)^{-1} ||X - F B^T||^2 + (alpha / p) * penalty(B)`.
///
/// `F` must satisfy `F^T F / T = I` to within `1e-6`.
pub fn objective_q2(
    x: &DMatrix<f64>,
    f: &DMatrix<f64>,
    b: &DMatrix<f64>,
    spec: &LaplacianSpectrum,
    op: &ShrinkageOperator,
) -> Result<f64> {
    let (t, p) = x.shape();
    if f.nrows() != t || b.nrows() != p || f.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "X is {t}x{p}, F is {}x{}, B is {}x{}",
            f.nrows(),
            f.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let r = f.ncols();
    let gram = f.tr_mul(f) / t as f64;
    let dev = (gram - DMatrix::<f64>::identity(r, r)).amax();
    if dev > 1e-6 {
        return Err(Error::NotOrthonormal(dev));
    }
    let loss = (x - f * b.transpose()).norm_squared() / (p as f64 * t as f64);
    let penalty = match op.kind() {
        PenaltyKind::None => 0.0,
        _ if spec.is_empty_network() => 0.0,
        PenaltyKind::Laplacian => {
            let norms = spec.rotated_row_norms(b)?;
            spec.eigvals()
                .iter()
                .zip(norms.iter())
                .map(|(t, n)| t * n)
                .sum::<f64>()
        }
        PenaltyKind::Projection => {
            let norms = spec.rotated_row_norms(b)?;
            norms.iter().take(p - op.m()).sum::<f64>()
        }
    };
    Ok(loss + op.alpha() / p as f64 * penalty)
}

pub(crate) fn check_finite(x: &DMatrix<f64>) -> Result<()> {
    for col in 0..x.ncols() {
        for row in 0..x.nrows() {
            if !x[(row, col)].is_finite() {
                return Err(Error::NonFinite { row, col });
            }
        }
    }
    Ok(())
}

/// `F^T F / T` deviation from the identity, max-abs.
pub fn orthonormality_error(f: &DMatrix<f64>) -> f64 {
    let r = f.ncols();
    let t = f.nrows() as f64;
    (f.tr_mul(f) / t - DMatrix::<f64>::identity(r, r)).amax()
}
