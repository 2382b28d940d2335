//! Rolling out-of-sample validation on a real panel.
//!
//! For every target row `t >= window`, loadings are fitted on the preceding
//! `window` rows, the factor vector of row `t` is obtained by least squares
//! on those loadings, and the step's squared error, cross-sectional `R^2` and
//! loading drift are recorded.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{PenaltyKind, ShrinkageOperator, SpectralPanel};
use crate::graph::LaplacianSpectrum;
use crate::tuning::{cl_score, estimate_noise_variance, tune, Grids};

/// Demean each column and scale it to unit sample standard deviation
/// (denominator `T - 1`).
pub fn standardize(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let t = x.nrows();
    if t < 2 {
        return Err(Error::Dimension("standardization needs at least two rows".into()));
    }
    let mut out = x.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / (t - 1) as f64).sqrt();
        if !(sd > 0.0) {
            return Err(Error::ConstantColumn(j));
        }
        col.unscale_mut(sd);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationConfig {
    pub method: PenaltyKind,
    pub window: usize,
    pub r: usize,
    /// Fixed `alpha`; tuned by `C_L` when absent.
    pub alpha: Option<f64>,
    /// Fixed projection truncation; tuned with `alpha` when absent.
    pub m: Option<usize>,
    pub grids: Grids,
    /// Re-tune inside every window instead of once on the first window.
    pub retune: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    /// Row index of the predicted observation.
    pub step: usize,
    pub mse: f64,
    pub r2: f64,
    /// `(pr)^{-1} ||B_t - B_{t-1}||^2` after sign alignment; absent on the
    /// first step.
    pub b_drift: Option<f64>,
    pub alpha: f64,
    pub m: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub config: ValidationConfig,
    pub steps: Vec<StepRecord>,
    pub ave_mse: f64,
    pub ave_r2: f64,
    pub var_b: f64,
    /// Full-sample `C_L` adjusted error.
    pub adj_error: f64,
    pub sigma2_hat: f64,
    pub trace_d_inv: f64,
    pub alpha: f64,
    pub m: usize,
}

/// Least-squares factor vector of `x` on `b`, with the residual vector.
fn regress_row(b: &DMatrix<f64>, x: &DVector<f64>, step: usize) -> Result<(DVector<f64>, DVector<f64>)> {
    let btb = b.tr_mul(b);
    let chol = btb.cholesky().ok_or(Error::SingularLoadings(step))?;
    let f = chol.solve(&b.tr_mul(x));
    let resid = x - b * &f;
    Ok((f, resid))
}

/// Flip columns of `b` whose inner product with the matching column of
/// `reference` is negative.
pub fn align_columns(b: &mut DMatrix<f64>, reference: &DMatrix<f64>) {
    for k in 0..b.ncols() {
        if b.column(k).dot(&reference.column(k)) < 0.0 {
            b.column_mut(k).neg_mut();
        }
    }
}

fn operator_for(
    panel: &SpectralPanel<'_>,
    config: &ValidationConfig,
) -> Result<ShrinkageOperator> {
    let spec = panel.spectrum();
    match (config.method, config.alpha, config.m) {
        (PenaltyKind::None, _, _) => Ok(ShrinkageOperator::identity(panel.p())),
        (PenaltyKind::Laplacian, Some(alpha), _) => {
            ShrinkageOperator::new(spec, PenaltyKind::Laplacian, alpha, 0)
        }
        (PenaltyKind::Projection, Some(alpha), Some(m)) => {
            ShrinkageOperator::new(spec, PenaltyKind::Projection, alpha, m)
        }
        (kind, alpha, m) => {
            let mut grids = config.grids.clone();
            if let Some(a) = alpha {
                grids.alphas = vec![a];
            }
            if let Some(m) = m {
                grids.ms = vec![m];
            }
            tune(panel, kind, config.r, &grids)?.operator(spec)
        }
    }
}

pub fn recursive_validate(
    x: &DMatrix<f64>,
    spec: &LaplacianSpectrum,
    config: &ValidationConfig,
) -> Result<ValidationReport> {
    let (t, p) = x.shape();
    if config.window >= t {
        return Err(Error::InvalidParameter(format!(
            "window = {} must be smaller than T = {t}",
            config.window
        )));
    }
    if config.r == 0 || config.r >= config.window.min(p) {
        return Err(Error::InvalidParameter(format!(
            "r = {} must satisfy 1 <= r < min(window, p)",
            config.r
        )));
    }
    let full = SpectralPanel::new(x, spec)?;

    let first_window = x.rows(0, config.window).clone_owned();
    let fixed_op = operator_for(&SpectralPanel::new(&first_window, spec)?, config)?;

    // fits are independent; alignment below is sequential
    let fits: Vec<(usize, DMatrix<f64>, f64, usize)> = (config.window..t)
        .into_par_iter()
        .map(|step| {
            let train = x.rows(step - config.window, config.window).clone_owned();
            let panel = SpectralPanel::new(&train, spec)?;
            let op = if config.retune {
                operator_for(&panel, config)?
            } else {
                fixed_op.clone()
            };
            let est = panel.fit(&op, config.r)?;
            Ok((step, est.loadings, op.alpha(), op.m()))
        })
        .collect::<Result<_>>()?;

    let r = config.r as f64;
    let mut steps = Vec::with_capacity(fits.len());
    let mut previous: Option<DMatrix<f64>> = None;
    for (step, mut loadings, alpha, m) in fits {
        let row = x.row(step).transpose();
        let (_, resid) = regress_row(&loadings, &row, step)?;
        let rss = resid.norm_squared();
        let mean = row.mean();
        let tss = row.map(|v| v - mean).norm_squared();
        let r2 = if tss > 0.0 {
            1.0 - rss / tss
        } else if rss == 0.0 {
            1.0
        } else {
            f64::NEG_INFINITY
        };
        let b_drift = previous.as_ref().map(|prev| {
            align_columns(&mut loadings, prev);
            (&loadings - prev).norm_squared() / (p as f64 * r)
        });
        steps.push(StepRecord {
            step,
            mse: rss / p as f64,
            r2,
            b_drift,
            alpha,
            m,
        });
        previous = Some(loadings);
    }

    let n = steps.len() as f64;
    let ave_mse = steps.iter().map(|s| s.mse).sum::<f64>() / n;
    let ave_r2 = steps.iter().map(|s| s.r2).sum::<f64>() / n;
    let drifts: Vec<f64> = steps.iter().filter_map(|s| s.b_drift).collect();
    let var_b = if drifts.is_empty() {
        0.0
    } else {
        drifts.iter().sum::<f64>() / drifts.len() as f64
    };

    let sigma2_hat = estimate_noise_variance(&full, config.r)?;
    let full_fit = full.fit(&fixed_op, config.r)?;
    let adj_error = cl_score(x, &full_fit, &fixed_op, sigma2_hat, config.r)?.adjusted_error;

    Ok(ValidationReport {
        config: config.clone(),
        steps,
        ave_mse,
        ave_r2,
        var_b,
        adj_error,
        sigma2_hat,
        trace_d_inv: fixed_op.trace_inv(),
        alpha: fixed_op.alpha(),
        m: fixed_op.m(),
    })
}
