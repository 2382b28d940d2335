//! Data-driven tuning and factor-number selection.
//!
//! Tuning parameters are chosen by the `C_L` criterion
//! `(pT)^{-1} ||X - C^||^2 + 2 r sigma^2 tr(D^{-1}) / (pT)`, with `sigma^2`
//! replaced by the residual variance of a plain PCA fit. The number of factors
//! is chosen by the eigenvalue-ratio rule, optionally re-run on the shrunk Gram
//! matrix after tuning ("one step further").
//!
//! The oracle quantities (`oracle_alpha`, `h_value`, `assumption_e_eigs`) need
//! the true loadings and are meant for simulation diagnostics.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{FactorEstimate, PenaltyKind, ShrinkageOperator, SpectralPanel};
use crate::graph::LaplacianSpectrum;
use crate::linalg::sym_eigen_desc;

/// Default upper bound on the number of factors searched.
pub const DEFAULT_K_MAX: usize = 10;

/// Eigenvalues `lambda_{k+1} < ZERO_RATIO_TOL * lambda_1` make the ratio infinite.
pub const ZERO_RATIO_TOL: f64 = 1e-12;

/// Tuning grids for `alpha` and the projection truncation `m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grids {
    pub alphas: Vec<f64>,
    pub ms: Vec<usize>,
}

impl Grids {
    /// `alpha in {1/b - 1 : b = 0.05, 0.10, ..., 1} U {p}` and
    /// `m in {round(p^q) : q = 0.1, ..., 0.9}`, both sorted and deduplicated.
    pub fn default_for(p: usize) -> Self {
        let mut alphas: Vec<f64> = (1..=20).map(|k| 20.0 / k as f64 - 1.0).collect();
        alphas.push(p as f64);
        alphas.sort_by(f64::total_cmp);
        alphas.dedup();

        let mut ms: Vec<usize> = (1..=9)
            .map(|q| (p as f64).powf(q as f64 / 10.0).round() as usize)
            .collect();
        ms.sort_unstable();
        ms.dedup();
        Self { alphas, ms }
    }

    /// Single-point grid.
    pub fn fixed(alpha: f64, m: usize) -> Self {
        Self {
            alphas: vec![alpha],
            ms: vec![m],
        }
    }
}

/// Default tuning grids for a panel with `p` series.
pub fn default_grids(p: usize) -> Grids {
    Grids::default_for(p)
}

/// One evaluated grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoredPoint {
    pub alpha: f64,
    pub m: usize,
    pub score: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TuningResult {
    pub kind: PenaltyKind,
    pub alpha_star: f64,
    pub m_star: usize,
    pub score: f64,
    pub sigma2_hat: f64,
    pub score_table: Vec<ScoredPoint>,
}

impl TuningResult {
    pub fn operator(&self, spec: &LaplacianSpectrum) -> Result<ShrinkageOperator> {
        ShrinkageOperator::new(spec, self.kind, self.alpha_star, self.m_star)
    }
}

/// `C_L` score together with its bias-corrected companion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClScore {
    pub score: f64,
    /// `score - sigma^2`: an estimate of `(pT)^{-1} ||C - C^||^2`.
    pub adjusted_error: f64,
}

/// Residual variance of the plain PCA fit with `r` factors.
pub fn estimate_noise_variance(panel: &SpectralPanel<'_>, r: usize) -> Result<f64> {
    let op = ShrinkageOperator::identity(panel.p());
    let est = panel.fit(&op, r)?;
    let (t, p) = (panel.t() as f64, panel.p() as f64);
    Ok(est.residual_sum_squares(panel.x()) / (p * t))
}

/// `C_L` criterion for a fitted estimate.
pub fn cl_score(
    x: &DMatrix<f64>,
    est: &FactorEstimate,
    op: &ShrinkageOperator,
    sigma2: f64,
    r: usize,
) -> Result<ClScore> {
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidParameter(format!("sigma2 must be >= 0, got {sigma2}")));
    }
    let (t, p) = x.shape();
    let rss = est.residual_sum_squares(x);
    Ok(cl_from_rss(rss, op.trace_inv(), sigma2, r, p, t))
}

fn cl_from_rss(rss: f64, trace_inv: f64, sigma2: f64, r: usize, p: usize, t: usize) -> ClScore {
    let pt = p as f64 * t as f64;
    let score = rss / pt + 2.0 * r as f64 * sigma2 * trace_inv / pt;
    ClScore {
        score,
        adjusted_error: score - sigma2,
    }
}

/// Residual sum of squares in the rotated coordinates, `||X~ - F B~^T||^2`.
/// Equal to `||X - F B^T||^2` because `U` is orthonormal.
fn rotated_rss(panel: &SpectralPanel<'_>, est: &FactorEstimate) -> f64 {
    let rotated_loadings = panel.spectrum().eigvecs().tr_mul(&est.loadings);
    (panel.rotated() - &est.scores * rotated_loadings.transpose()).norm_squared()
}

/// Select `(alpha, m)` minimizing the `C_L` criterion over `grids`.
///
/// `sigma^2` is estimated once from the plain PCA fit with the same `r`.
/// Ties go to the smaller `alpha`, then the smaller `m`.
pub fn tune(
    panel: &SpectralPanel<'_>,
    kind: PenaltyKind,
    r: usize,
    grids: &Grids,
) -> Result<TuningResult> {
    let sigma2 = estimate_noise_variance(panel, r)?;
    tune_with_sigma2(panel, kind, r, grids, sigma2)
}

/// [`tune`] with a caller-supplied noise variance.
pub fn tune_with_sigma2(
    panel: &SpectralPanel<'_>,
    kind: PenaltyKind,
    r: usize,
    grids: &Grids,
    sigma2: f64,
) -> Result<TuningResult> {
    if kind == PenaltyKind::None {
        return Err(Error::InvalidParameter(
            "tuning needs a laplacian or projection penalty".into(),
        ));
    }
    if grids.alphas.is_empty() || (kind == PenaltyKind::Projection && grids.ms.is_empty()) {
        return Err(Error::EmptyGrid);
    }
    panel.check_rank(r)?;
    let spec = panel.spectrum();
    let p = panel.p();
    let t = panel.t();

    let score_table: Vec<ScoredPoint> = match kind {
        PenaltyKind::Laplacian => grids
            .alphas
            .par_iter()
            .map(|&alpha| {
                let op = ShrinkageOperator::new(spec, kind, alpha, 0)?;
                let est = panel.fit(&op, r)?;
                let cl = cl_from_rss(rotated_rss(panel, &est), op.trace_inv(), sigma2, r, p, t);
                Ok(ScoredPoint {
                    alpha: op.alpha(),
                    m: 0,
                    score: cl.score,
                })
            })
            .collect::<Result<_>>()?,
        PenaltyKind::Projection => {
            let mut ms = grids.ms.clone();
            ms.sort_unstable();
            ms.dedup();
            if let Some(&bad) = ms.iter().find(|&&m| m > p) {
                return Err(Error::InvalidParameter(format!("m = {bad} outside [0, {p}]")));
            }
            let splits: Vec<(DMatrix<f64>, DMatrix<f64>)> =
                ms.par_iter().map(|&m| panel.split_gram(p - m)).collect();
            let points: Vec<(f64, usize, usize)> = sorted_alphas(&grids.alphas)
                .into_iter()
                .flat_map(|a| ms.iter().enumerate().map(move |(i, &m)| (a, i, m)))
                .collect();
            points
                .par_iter()
                .map(|&(alpha, i, m)| {
                    let op = ShrinkageOperator::new(spec, kind, alpha, m)?;
                    let (head, tail) = &splits[i];
                    let gram = head / (1.0 + op.alpha()) + tail;
                    let gram = if spec.is_empty_network() { head + tail } else { gram };
                    let est = panel.fit_with_gram(gram, &op, r)?;
                    let cl = cl_from_rss(rotated_rss(panel, &est), op.trace_inv(), sigma2, r, p, t);
                    Ok(ScoredPoint {
                        alpha: op.alpha(),
                        m,
                        score: cl.score,
                    })
                })
                .collect::<Result<_>>()?
        }
        PenaltyKind::None => unreachable!(),
    };
    let score_table = if kind == PenaltyKind::Laplacian {
        let mut table = score_table;
        table.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
        table
    } else {
        score_table
    };

    let best = argmin_point(&score_table);
    Ok(TuningResult {
        kind,
        alpha_star: best.alpha,
        m_star: best.m,
        score: best.score,
        sigma2_hat: sigma2,
        score_table,
    })
}

fn sorted_alphas(alphas: &[f64]) -> Vec<f64> {
    let mut a = alphas.to_vec();
    a.sort_by(f64::total_cmp);
    a.dedup();
    a
}

/// Minimum score; ties broken by smaller alpha then smaller m.
fn argmin_point(table: &[ScoredPoint]) -> ScoredPoint {
    let mut best = table[0];
    for pt in &table[1..] {
        let better = pt.score < best.score
            || (pt.score == best.score
                && (pt.alpha < best.alpha || (pt.alpha == best.alpha && pt.m < best.m)));
        if better {
            best = *pt;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    Er,
    OneStepLap,
    OneStepProj,
}

impl SelectionMethod {
    pub fn label(self) -> &'static str {
        match self {
            SelectionMethod::Er => "er",
            SelectionMethod::OneStepLap => "lap",
            SelectionMethod::OneStepProj => "proj",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorCountResult {
    pub r_hat: usize,
    /// `lambda_k / lambda_{k+1}` for `k = 1..=k_max`; infinite ratios
    /// serialize as `null`.
    pub ratios: Vec<f64>,
    pub method: SelectionMethod,
}

/// Eigenvalue-ratio selection from eigenvalues sorted in nonincreasing order.
///
/// Needs at least `k_max + 1` eigenvalues. A denominator below
/// `ZERO_RATIO_TOL * lambda_1` counts as zero and gives an infinite ratio; the
/// first maximal ratio wins.
pub fn er_from_eigenvalues(eigvals: &[f64], k_max: usize) -> Result<(usize, Vec<f64>)> {
    if k_max == 0 || eigvals.len() < k_max + 1 {
        return Err(Error::InvalidParameter(format!(
            "k_max = {k_max} needs 1 <= k_max and k_max + 1 <= {} eigenvalues",
            eigvals.len()
        )));
    }
    let cutoff = ZERO_RATIO_TOL * eigvals[0].max(0.0);
    let ratios: Vec<f64> = (0..k_max)
        .map(|k| {
            let denom = eigvals[k + 1];
            if denom <= cutoff {
                if eigvals[k] <= cutoff {
                    // 0 / 0 carries no information
                    1.0
                } else {
                    f64::INFINITY
                }
            } else {
                eigvals[k] / denom
            }
        })
        .collect();
    let mut best = 0;
    for (k, &ratio) in ratios.iter().enumerate() {
        if ratio > ratios[best] {
            best = k;
        }
    }
    Ok((best + 1, ratios))
}

/// Eigenvalue-ratio estimate of the number of factors on `X D^{-1} X^T`.
pub fn select_r_er(
    panel: &SpectralPanel<'_>,
    op: &ShrinkageOperator,
    k_max: usize,
) -> Result<FactorCountResult> {
    let limit = panel.t().min(panel.p());
    if k_max == 0 || k_max + 1 > limit {
        return Err(Error::InvalidParameter(format!(
            "k_max = {k_max} must satisfy 1 <= k_max and k_max + 1 <= min(T, p) = {limit}"
        )));
    }
    let (vals, _) = sym_eigen_desc(panel.gram(op));
    let (r_hat, ratios) = er_from_eigenvalues(vals.as_slice(), k_max)?;
    let method = match op.kind() {
        PenaltyKind::None => SelectionMethod::Er,
        PenaltyKind::Laplacian => SelectionMethod::OneStepLap,
        PenaltyKind::Projection => SelectionMethod::OneStepProj,
    };
    Ok(FactorCountResult {
        r_hat,
        ratios,
        method,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OneStepResult {
    /// Plain eigenvalue-ratio pilot estimate.
    pub pilot: FactorCountResult,
    /// Tuning at the `r` that produced `result`.
    pub tuning: TuningResult,
    pub result: FactorCountResult,
    /// `r` after each stage: pilot, then each shrunk re-estimate.
    pub path: Vec<usize>,
    /// The last extra iteration returned the same `r` it started from.
    pub fixed_point: bool,
}

/// "One step further": pilot ER, `C_L` tuning at the pilot `r`, then ER on
/// the shrunk Gram matrix.
///
/// `extra_steps` repeats tune-and-reselect starting from the latest
/// estimate; it never stops early so the iteration count is explicit.
pub fn select_r_one_step(
    panel: &SpectralPanel<'_>,
    kind: PenaltyKind,
    k_max: usize,
    grids: &Grids,
    extra_steps: usize,
) -> Result<OneStepResult> {
    let pilot = select_r_er(panel, &ShrinkageOperator::identity(panel.p()), k_max)?;
    let mut path = vec![pilot.r_hat];
    let mut r = pilot.r_hat;
    let mut tuning = tune(panel, kind, r, grids)?;
    let mut result = select_r_er(panel, &tuning.operator(panel.spectrum())?, k_max)?;
    path.push(result.r_hat);
    let mut fixed_point = result.r_hat == r;
    for _ in 0..extra_steps {
        r = result.r_hat;
        let next_tuning = tune(panel, kind, r, grids)?;
        let next = select_r_er(panel, &next_tuning.operator(panel.spectrum())?, k_max)?;
        fixed_point = next.r_hat == r;
        path.push(next.r_hat);
        tuning = next_tuning;
        result = next;
    }
    Ok(OneStepResult {
        pilot,
        tuning,
        result,
        path,
        fixed_point,
    })
}

/// Oracle tuning parameter; `unbounded` when no shrinkage bias exists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleAlpha {
    pub value: f64,
    pub unbounded: bool,
}

impl OracleAlpha {
    /// The oracle value, or `cap` when unbounded.
    pub fn capped(&self, cap: f64) -> f64 {
        if self.unbounded {
            cap
        } else {
            self.value
        }
    }
}

/// Bias-variance balancing `alpha` given the true loadings.
///
/// Projection: `p / (T ||U_1^T B||_F^2)`. Laplacian:
/// `1 / (T max_j tau_j ||(U^T B)_j||^2)`.
pub fn oracle_alpha(
    kind: PenaltyKind,
    b: &DMatrix<f64>,
    spec: &LaplacianSpectrum,
    t: usize,
    m: usize,
) -> Result<OracleAlpha> {
    let p = spec.p();
    let norms = spec.rotated_row_norms(b)?;
    let denom = match kind {
        PenaltyKind::Projection => {
            if m > p {
                return Err(Error::InvalidParameter(format!("m = {m} outside [0, {p}]")));
            }
            let head: f64 = norms.iter().take(p - m).sum();
            t as f64 * head / p as f64
        }
        PenaltyKind::Laplacian => {
            let peak = spec
                .eigvals()
                .iter()
                .zip(norms.iter())
                .map(|(tau, n)| tau * n)
                .fold(0.0, f64::max);
            t as f64 * peak
        }
        PenaltyKind::None => {
            return Err(Error::InvalidParameter("no oracle alpha for plain PCA".into()))
        }
    };
    if denom > 0.0 {
        Ok(OracleAlpha {
            value: 1.0 / denom,
            unbounded: false,
        })
    } else {
        Ok(OracleAlpha {
            value: f64::INFINITY,
            unbounded: true,
        })
    }
}

/// Loading-error rate `p^{-1} ||(D^{-1} - I) B||^2 + tr(D^{-2}) / (pT)`.
pub fn h_value(
    b: &DMatrix<f64>,
    spec: &LaplacianSpectrum,
    op: &ShrinkageOperator,
    t: usize,
) -> Result<f64> {
    let p = spec.p() as f64;
    let norms = spec.rotated_row_norms(b)?;
    let bias: f64 = op
        .weights()
        .iter()
        .zip(norms.iter())
        .map(|(w, n)| (1.0 - w).powi(2) * n)
        .sum();
    Ok(bias / p + op.trace_inv_sq() / (p * t as f64))
}

/// Eigenvalues of `p^{-1} B^T D^{-1} B`, nonincreasing.
pub fn assumption_e_eigs(
    b: &DMatrix<f64>,
    spec: &LaplacianSpectrum,
    op: &ShrinkageOperator,
) -> Result<Vec<f64>> {
    let rotated = spec.rotate(b)?;
    let mut weighted = rotated.clone();
    for (j, &w) in op.weights().iter().enumerate() {
        weighted.row_mut(j).scale_mut(w);
    }
    let s = rotated.tr_mul(&weighted) / spec.p() as f64;
    let (vals, _) = sym_eigen_desc(s);
    Ok(vals.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Network;
    use approx::assert_abs_diff_eq;

    #[test]
    fn default_grid_contents() {
        let g = default_grids(100);
        for a in [0.0, 1.0, 19.0, 100.0] {
            assert!(g.alphas.iter().any(|&x| (x - a).abs() < 1e-12), "missing {a}");
        }
        assert_eq!(g.alphas.len(), 21);
        assert!(g.alphas.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(g.ms, vec![2, 3, 4, 6, 10, 16, 25, 40, 63]);

        let g = default_grids(4);
        assert_eq!(g.ms.iter().filter(|&&m| m == 1).count(), 1);
        assert!(g.ms.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn cl_arithmetic() {
        let cl = cl_from_rss(0.0, 4.0 / 3.0, 1.0, 1, 2, 2);
        assert_abs_diff_eq!(cl.score, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cl.adjusted_error, -1.0 / 3.0, epsilon = 1e-15);

        // kind none: tr = p
        let cl = cl_from_rss(12.0, 4.0, 0.5, 2, 4, 3);
        assert_abs_diff_eq!(cl.score, 12.0 / 12.0 + 2.0 * 2.0 * 0.5 / 3.0, epsilon = 1e-15);

        let lo = cl_from_rss(3.0, 1.0, 0.5, 1, 4, 3);
        let hi = cl_from_rss(3.0, 2.0, 0.5, 1, 4, 3);
        assert!(lo.score < hi.score);
    }

    #[test]
    fn er_examples() {
        let (r, ratios) = er_from_eigenvalues(&[10.0, 5.0, 1.0, 0.5, 0.4], 4).unwrap();
        assert_eq!(r, 2);
        for (got, want) in ratios.iter().zip([2.0, 5.0, 2.0, 1.25]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
        let (r, ratios) = er_from_eigenvalues(&[8.0, 4.0, 0.0, 0.0], 3).unwrap();
        assert_eq!(r, 2);
        assert!(ratios[1].is_infinite());
        let (r, _) = er_from_eigenvalues(&[3.0; 6], 5).unwrap();
        assert_eq!(r, 1);
        assert!(er_from_eigenvalues(&[1.0, 0.5], 2).is_err());
        assert!(er_from_eigenvalues(&[1.0, 0.5], 0).is_err());
    }

    #[test]
    fn oracle_alpha_examples() {
        // projection: p = 100, T = 50, ||U_1^T B||^2 = 2 -> alpha = 1
        let p = 100;
        let spec = LaplacianSpectrum::from_parts(
            DMatrix::identity(p, p),
            (0..p).map(|j| (p - j) as f64).collect(),
            1.0,
        )
        .unwrap();
        let mut b = DMatrix::zeros(p, 1);
        b[(0, 0)] = 1.0;
        b[(1, 0)] = 1.0;
        b[(99, 0)] = 7.0;
        let oa = oracle_alpha(PenaltyKind::Projection, &b, &spec, 50, 10).unwrap();
        assert!(!oa.unbounded);
        assert_abs_diff_eq!(oa.value, 1.0, epsilon = 1e-12);

        // laplacian with loadings only on the zero eigenvalue
        let mut tau: Vec<f64> = (0..p).map(|j| (p - j) as f64).collect();
        tau[p - 1] = 0.0;
        let spec = LaplacianSpectrum::from_parts(DMatrix::identity(p, p), tau, 1.0).unwrap();
        let mut b = DMatrix::zeros(p, 2);
        b[(99, 0)] = 3.0;
        let oa = oracle_alpha(PenaltyKind::Laplacian, &b, &spec, 50, 0).unwrap();
        assert!(oa.unbounded);
        assert_eq!(oa.capped(100.0), 100.0);
    }

    #[test]
    fn h_value_without_shrinkage() {
        let net = Network::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let spec = LaplacianSpectrum::new(&net);
        let b = DMatrix::from_fn(4, 2, |i, k| (i * 2 + k) as f64 - 1.5);
        let op = ShrinkageOperator::new(&spec, PenaltyKind::Laplacian, 0.0, 0).unwrap();
        assert_abs_diff_eq!(h_value(&b, &spec, &op, 20).unwrap(), 1.0 / 20.0, epsilon = 1e-15);
    }

    #[test]
    fn assumption_e_identity_case() {
        let p = 4;
        let spec = LaplacianSpectrum::new(&Network::from_edges(p, &[(0, 1), (2, 3)]).unwrap());
        // B^T B / p = I_2
        let mut b = DMatrix::zeros(p, 2);
        b[(0, 0)] = 2.0;
        b[(1, 1)] = 2.0;
        let eigs = assumption_e_eigs(&b, &spec, &ShrinkageOperator::identity(p)).unwrap();
        for e in eigs {
            assert_abs_diff_eq!(e, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn tie_break_prefers_small_alpha_then_m() {
        let table = vec![
            ScoredPoint { alpha: 1.0, m: 3, score: 0.5 },
            ScoredPoint { alpha: 1.0, m: 2, score: 0.5 },
            ScoredPoint { alpha: 2.0, m: 1, score: 0.5 },
            ScoredPoint { alpha: 0.5, m: 9, score: 0.7 },
        ];
        let best = argmin_point(&table);
        assert_eq!((best.alpha, best.m), (1.0, 2));
    }
}
