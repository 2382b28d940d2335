//! Monte Carlo harness: data-generating processes, error metrics and the
//! replication runner.
//!
//! Four network/loading designs are available:
//!
//! 1. Erdős–Rényi(0.5) network, iid standard-normal loadings (the network is
//!    irrelevant).
//! 2. Same network; loadings concentrated on the 50 trailing Laplacian
//!    eigenvectors.
//! 3. 50 random groups, nodes linked iff they share a group.
//! 4. 50 isolated nodes; the rest are active (a clique) or inactive (sparse).
//!
//! In designs 3 and 4 the loadings are built so that `tau_j ||b~_j||^2` is the
//! same for every non-null eigenvector.
//!
//! Replication `k` draws from `ChaCha8Rng::seed_from_u64(seed)` switched to
//! stream `k`, so results do not depend on thread scheduling.

use std::fmt;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{PenaltyKind, ShrinkageOperator, SpectralPanel};
use crate::graph::{LaplacianSpectrum, Network};
use crate::tuning::{select_r_er, select_r_one_step, tune, Grids, DEFAULT_K_MAX};

/// Nodes with eigenvalue below this count towards the null space in designs 3/4.
pub const NULL_SPACE_CUTOFF: f64 = 0.001;
/// Number of groups in design 3 and isolated nodes in design 4.
pub const GROUPS: usize = 50;
/// AR(1) coefficient of the factor processes.
pub const FACTOR_AR: f64 = 0.2;
/// Off-diagonal value of the banded error mixing matrices.
pub const BAND_VALUE: f64 = 0.2;
/// Bandwidth of the error mixing matrices.
pub const BANDWIDTH: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    One,
    Two,
    Three,
    Four,
}

impl Case {
    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(Case::One),
            2 => Ok(Case::Two),
            3 => Ok(Case::Three),
            4 => Ok(Case::Four),
            _ => Err(Error::InvalidParameter(format!("case must be 1..=4, got {i}"))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Case::One => 1,
            Case::Two => 2,
            Case::Three => 3,
            Case::Four => 4,
        }
    }

    fn check_p(self, p: usize) -> Result<()> {
        let ok = match self {
            Case::One => p >= 2,
            Case::Two | Case::Four => p > GROUPS,
            Case::Three => p >= GROUPS,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "p = {p} too small for case {}",
                self.index()
            )))
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

impl Serialize for Case {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.index())
    }
}

/// RNG for replication `k` of a run seeded with `seed`.
pub fn replication_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Prior network for `case`.
pub fn gen_network<R: Rng + ?Sized>(case: Case, p: usize, rng: &mut R) -> Result<Network> {
    case.check_p(p)?;
    let mut edges = Vec::new();
    match case {
        Case::One | Case::Two => {
            for i in 1..p {
                for j in 0..i {
                    if rng.random_bool(0.5) {
                        edges.push((i, j));
                    }
                }
            }
        }
        Case::Three => {
            let group: Vec<usize> = (0..p).map(|_| rng.random_range(0..GROUPS)).collect();
            for i in 1..p {
                for j in 0..i {
                    if group[i] == group[j] {
                        edges.push((i, j));
                    }
                }
            }
        }
        Case::Four => {
            let labelled = p - GROUPS;
            let active: Vec<bool> = (0..labelled).map(|_| rng.random_bool(0.5)).collect();
            for i in 1..labelled {
                for j in 0..i {
                    let linked = match (active[i], active[j]) {
                        (true, true) => true,
                        (false, false) => rng.random_bool(0.1),
                        _ => false,
                    };
                    if linked {
                        edges.push((i, j));
                    }
                }
            }
        }
    }
    Network::from_edges(p, &edges)
}

/// `rows x cols` matrix with orthonormal columns, from the QR factor of a
/// standard-normal draw.
pub fn random_orthonormal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let z = DMatrix::from_fn(rows, cols, |_, _| normal(rng));
    z.qr().q()
}

/// True loading matrix for `case`, built on the spectrum of the network
/// returned by [`gen_network`].
pub fn gen_loadings<R: Rng + ?Sized>(
    case: Case,
    spec: &LaplacianSpectrum,
    p: usize,
    r: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    case.check_p(p)?;
    if spec.p() != p {
        return Err(Error::Dimension(format!(
            "spectrum has p = {}, expected {p}",
            spec.p()
        )));
    }
    let u = spec.eigvecs();
    let sqrt_p = (p as f64).sqrt();
    match case {
        Case::One => Ok(DMatrix::from_fn(p, r, |_, _| normal(rng))),
        Case::Two => {
            let split = p - GROUPS;
            let gamma1 = random_orthonormal(split, r, rng);
            let gamma2 = random_orthonormal(GROUPS, r, rng);
            let head = u.columns(0, split) * gamma1;
            let tail = u.columns(split, GROUPS) * gamma2;
            Ok(head * (0.25 * sqrt_p) + tail * sqrt_p)
        }
        Case::Three | Case::Four => {
            let d = spec
                .eigvals()
                .iter()
                .filter(|&&t| t < NULL_SPACE_CUTOFF)
                .count();
            if d == 0 || d == p || d < r {
                return Err(Error::InvalidParameter(format!(
                    "null-space dimension d = {d} unusable for p = {p}, r = {r}"
                )));
            }
            let split = p - d;
            let gamma1 = DMatrix::from_fn(split, r, |j, _| spec.eigvals()[j].powf(-0.5));
            let gamma2 = random_orthonormal(d, r, rng);
            let s = (p * r) as f64 / gamma1.norm_squared();
            let head = u.columns(0, split) * gamma1;
            let tail = u.columns(split, d) * gamma2;
            Ok(head * (0.25 * s.sqrt()) + tail * sqrt_p)
        }
    }
}

/// `T x r` factor scores, each column an independent stationary AR(1) with
/// coefficient 0.2 and standard-normal innovations.
pub fn gen_factors<R: Rng + ?Sized>(t: usize, r: usize, rng: &mut R) -> DMatrix<f64> {
    let stationary_sd = (1.0 / (1.0 - FACTOR_AR * FACTOR_AR)).sqrt();
    let mut f = DMatrix::zeros(t, r);
    for k in 0..r {
        if t == 0 {
            break;
        }
        f[(0, k)] = stationary_sd * normal(rng);
        for s in 1..t {
            f[(s, k)] = FACTOR_AR * f[(s - 1, k)] + normal(rng);
        }
    }
    f
}

/// Dependence structure of the idiosyncratic errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorStructure {
    /// `E = P_1 eps P_2` with banded `P`s.
    Banded,
    /// `E = eps`.
    Iid,
}

/// `n x n` banded mixing matrix: 1 on the diagonal, 0.2 within distance 2.
pub fn banded_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => 1.0,
        d if d <= BANDWIDTH => BAND_VALUE,
        _ => 0.0,
    })
}

fn band_coef(d: usize) -> f64 {
    if d == 0 {
        1.0
    } else {
        BAND_VALUE
    }
}

/// `P_1 eps P_2` with `eps` iid `N(0, sigma_e2)`.
pub fn gen_errors<R: Rng + ?Sized>(t: usize, p: usize, sigma_e2: f64, rng: &mut R) -> DMatrix<f64> {
    gen_errors_with(ErrorStructure::Banded, t, p, sigma_e2, rng)
}

pub fn gen_errors_with<R: Rng + ?Sized>(
    structure: ErrorStructure,
    t: usize,
    p: usize,
    sigma_e2: f64,
    rng: &mut R,
) -> DMatrix<f64> {
    let sd = sigma_e2.sqrt();
    // row-major draw order
    let eps = DMatrix::from_row_iterator(t, p, (0..t * p).map(|_| sd * normal(rng)));
    match structure {
        ErrorStructure::Iid => eps,
        ErrorStructure::Banded => {
            let mut left = DMatrix::<f64>::zeros(t, p);
            for i in 0..t {
                let lo = i.saturating_sub(BANDWIDTH);
                let hi = (i + BANDWIDTH).min(t - 1);
                for s in lo..=hi {
                    let c = band_coef(i.abs_diff(s));
                    for j in 0..p {
                        left[(i, j)] += c * eps[(s, j)];
                    }
                }
            }
            let mut out = DMatrix::<f64>::zeros(t, p);
            for j in 0..p {
                let lo = j.saturating_sub(BANDWIDTH);
                let hi = (j + BANDWIDTH).min(p - 1);
                for s in lo..=hi {
                    let c = band_coef(j.abs_diff(s));
                    for i in 0..t {
                        out[(i, j)] += c * left[(i, s)];
                    }
                }
            }
            out
        }
    }
}

/// `(pT)^{-1} ||C^ - C||_F^2`
pub fn mse_common(c_hat: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<f64> {
    if c_hat.shape() != c.shape() {
        return Err(Error::Dimension(format!(
            "estimate is {:?}, truth is {:?}",
            c_hat.shape(),
            c.shape()
        )));
    }
    let n = (c.nrows() * c.ncols()) as f64;
    Ok((c_hat - c).norm_squared() / n)
}

/// Which parts of the study a run performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Studies {
    /// Common-component MSE of pca/lap/proj at the true `r`.
    pub mse: bool,
    /// Factor-number selection: ER and one-step-further.
    pub select_r: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationConfig {
    pub case: Case,
    pub p: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub r: usize,
    pub sigma_e2: f64,
    pub reps: usize,
    pub seed: u64,
    pub grids: Grids,
    pub k_max: usize,
    pub errors: ErrorStructure,
    pub studies: Studies,
}

impl SimulationConfig {
    /// Defaults: `r = 3`, `sigma_e^2 = 1`, default grids, `k_max = 10`,
    /// banded errors, both studies.
    pub fn new(case: Case, p: usize, t: usize, reps: usize, seed: u64) -> Self {
        Self {
            case,
            p,
            t,
            r: 3,
            sigma_e2: 1.0,
            reps,
            seed,
            grids: Grids::default_for(p),
            k_max: DEFAULT_K_MAX,
            errors: ErrorStructure::Banded,
            studies: Studies {
                mse: true,
                select_r: true,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.case.check_p(self.p)?;
        let limit = self.t.min(self.p);
        if self.r == 0 || self.r >= limit {
            return Err(Error::InvalidParameter(format!(
                "r = {} must satisfy 1 <= r < min(T, p) = {limit}",
                self.r
            )));
        }
        if self.t < 3 {
            return Err(Error::InvalidParameter("T must be at least 3".into()));
        }
        if !(self.sigma_e2 > 0.0) {
            return Err(Error::InvalidParameter("sigma_e2 must be positive".into()));
        }
        if self.reps == 0 {
            return Err(Error::InvalidParameter("reps must be positive".into()));
        }
        if self.studies.select_r && (self.k_max == 0 || self.k_max + 1 > limit) {
            return Err(Error::InvalidParameter(format!(
                "k_max = {} must satisfy k_max + 1 <= min(T, p) = {limit}",
                self.k_max
            )));
        }
        Ok(())
    }
}

/// Draw one synthetic panel. Returns `(network, loadings, factors, X)`.
pub fn generate_panel<R: Rng + ?Sized>(
    config: &SimulationConfig,
    rng: &mut R,
) -> Result<(Network, LaplacianSpectrum, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let net = gen_network(config.case, config.p, rng)?;
    let spec = LaplacianSpectrum::new(&net);
    let b = gen_loadings(config.case, &spec, config.p, config.r, rng)?;
    let f = gen_factors(config.t, config.r, rng);
    let e = gen_errors_with(config.errors, config.t, config.p, config.sigma_e2, rng);
    let x = &f * b.transpose() + e;
    Ok((net, spec, b, f, x))
}

/// Outcome of a single replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replication {
    pub index: usize,
    /// MSE for pca, lap, proj.
    pub mse: Option<[f64; 3]>,
    /// Tuned `(alpha, m)` for lap and proj.
    pub tuned: Option<[(f64, usize); 2]>,
    /// Selected `r` for er, one-step lap, one-step proj.
    pub r_hat: Option<[usize; 3]>,
}

pub fn run_replication(config: &SimulationConfig, index: usize) -> Result<Replication> {
    let mut rng = replication_rng(config.seed, index as u64);
    let (_, spec, b, f, x) = generate_panel(config, &mut rng)?;
    let panel = SpectralPanel::new(&x, &spec)?;
    let r = config.r;

    let (mse, tuned) = if config.studies.mse {
        let truth = &f * b.transpose();
        let pca = panel.fit(&ShrinkageOperator::identity(config.p), r)?;
        let lap_tuning = tune(&panel, PenaltyKind::Laplacian, r, &config.grids)?;
        let lap = panel.fit(&lap_tuning.operator(&spec)?, r)?;
        let proj_tuning = tune(&panel, PenaltyKind::Projection, r, &config.grids)?;
        let proj = panel.fit(&proj_tuning.operator(&spec)?, r)?;
        (
            Some([
                mse_common(&pca.common_components(), &truth)?,
                mse_common(&lap.common_components(), &truth)?,
                mse_common(&proj.common_components(), &truth)?,
            ]),
            Some([
                (lap_tuning.alpha_star, lap_tuning.m_star),
                (proj_tuning.alpha_star, proj_tuning.m_star),
            ]),
        )
    } else {
        (None, None)
    };

    let r_hat = if config.studies.select_r {
        let er = select_r_er(&panel, &ShrinkageOperator::identity(config.p), config.k_max)?;
        let lap = select_r_one_step(&panel, PenaltyKind::Laplacian, config.k_max, &config.grids, 0)?;
        let proj =
            select_r_one_step(&panel, PenaltyKind::Projection, config.k_max, &config.grids, 0)?;
        Some([er.r_hat, lap.result.r_hat, proj.result.r_hat])
    } else {
        None
    };

    Ok(Replication {
        index,
        mse,
        tuned,
        r_hat,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MseSummary {
    pub method: PenaltyKind,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionSummary {
    /// `er`, `lap` or `proj`.
    pub method: &'static str,
    pub mean_r: f64,
    pub under: usize,
    pub over: usize,
}

impl SelectionSummary {
    /// `a(b|c)`: mean estimate, under- and over-estimation counts.
    pub fn triple(&self) -> String {
        format!("{:.3}({}|{})", self.mean_r, self.under, self.over)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    pub mse: Vec<MseSummary>,
    pub selection: Vec<SelectionSummary>,
    pub replications: Vec<Replication>,
    pub elapsed_secs: f64,
}

impl SimulationReport {
    pub fn mse_for(&self, method: PenaltyKind) -> Option<&MseSummary> {
        self.mse.iter().find(|s| s.method == method)
    }

    pub fn selection_for(&self, method: &str) -> Option<&SelectionSummary> {
        self.selection.iter().find(|s| s.method == method)
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Run every replication (in parallel) and aggregate in replication order.
pub fn run_case(config: &SimulationConfig) -> Result<SimulationReport> {
    config.validate()?;
    let start = Instant::now();
    let replications: Vec<Replication> = (0..config.reps)
        .into_par_iter()
        .map(|k| run_replication(config, k))
        .collect::<Result<_>>()?;

    let mut mse = Vec::new();
    if config.studies.mse {
        let kinds = [PenaltyKind::None, PenaltyKind::Laplacian, PenaltyKind::Projection];
        for (i, method) in kinds.into_iter().enumerate() {
            let values: Vec<f64> = replications.iter().filter_map(|rep| rep.mse.map(|m| m[i])).collect();
            let (mean, sd) = mean_sd(&values);
            mse.push(MseSummary {
                method,
                mean,
                sd,
                min: values.iter().copied().fold(f64::INFINITY, f64::min),
                max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            });
        }
    }

    let mut selection = Vec::new();
    if config.studies.select_r {
        for (i, method) in ["er", "lap", "proj"].into_iter().enumerate() {
            let values: Vec<usize> = replications.iter().filter_map(|rep| rep.r_hat.map(|r| r[i])).collect();
            let mean_r = values.iter().sum::<usize>() as f64 / values.len() as f64;
            selection.push(SelectionSummary {
                method,
                mean_r,
                under: values.iter().filter(|&&r| r < config.r).count(),
                over: values.iter().filter(|&&r| r > config.r).count(),
            });
        }
    }

    Ok(SimulationReport {
        config: config.clone(),
        mse,
        selection,
        replications,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

/// Approximate loading MSE of a block-structured design with closed-form
/// eigenvalues, split into its leading term and its null-space tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockMse {
    pub leading: f64,
    pub tail: f64,
    pub total: f64,
}

/// Analytic MSE for `q` fully connected groups with relative sizes
/// `thetas` (summing to one) and `tau_j ||b~_j||^2 = z` on every non-null
/// eigenvector.
///
/// Group `k` contributes eigenvalue `theta_k / mean(theta)` with weight
/// `p theta_k`, so `w_k = mean(theta) / theta_k` and `w_bar = 1`. The
/// Laplacian penalty uses `alpha = 1/(Tz)`, the projection penalty `m = q` and
/// `alpha = 1/(T z w_bar)`.
pub fn appendix_b_mse(kind: PenaltyKind, thetas: &[f64], z: f64, p: usize, t: usize) -> Result<BlockMse> {
    if thetas.is_empty() || thetas.iter().any(|&th| !(th > 0.0 && th < 1.0)) {
        return Err(Error::InvalidParameter("group shares must lie in (0, 1)".into()));
    }
    let total_share: f64 = thetas.iter().sum();
    if (total_share - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "group shares must sum to 1, got {total_share}"
        )));
    }
    if !(z > 0.0) || p == 0 || t == 0 {
        return Err(Error::InvalidParameter("z, p and T must be positive".into()));
    }
    let q = thetas.len() as f64;
    let (pf, tf) = (p as f64, t as f64);
    let theta_bar = total_share / q;
    let c = 1.0 / (tf * z);
    let weights: Vec<(f64, f64)> = thetas.iter().map(|&th| (pf * th, theta_bar / th)).collect();
    let w_bar = weights.iter().map(|(mult, w)| mult * w).sum::<f64>() / pf;
    let null_share = q / (pf * tf);
    let (leading, tail) = match kind {
        PenaltyKind::Laplacian => {
            let sum: f64 = weights.iter().map(|(mult, w)| mult * w / (w + c)).sum();
            (sum / (pf * tf), null_share)
        }
        PenaltyKind::Projection => {
            let alpha = 1.0 / (tf * z * w_bar);
            let shrink = alpha / (1.0 + alpha);
            (w_bar / (w_bar + c) / tf, shrink * shrink * null_share)
        }
        PenaltyKind::None => {
            return Err(Error::InvalidParameter("block MSE needs a penalty kind".into()))
        }
    };
    Ok(BlockMse {
        leading,
        tail,
        total: leading + tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn case_four_structure() {
        let mut rng = replication_rng(7, 0);
        let p = 120;
        let net = gen_network(Case::Four, p, &mut rng).unwrap();
        let deg = net.degrees();
        assert!(deg[p - GROUPS..].iter().all(|&d| d == 0.0));
        assert!(matches!(
            gen_network(Case::Four, 50, &mut rng),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn zero_noise_errors() {
        let mut rng = replication_rng(1, 0);
        let e = gen_errors(6, 5, 0.0, &mut rng);
        assert!(e.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn banded_matrix_shape() {
        let p1 = banded_matrix(8);
        for i in 0..8 {
            let nnz = p1.row(i).iter().filter(|&&v| v != 0.0).count();
            assert!(nnz <= 5);
            assert_eq!(p1[(i, i)], 1.0);
        }
        let bands: std::collections::BTreeSet<i64> = (0..8)
            .flat_map(|i| (0..8).map(move |j| (i, j)))
            .filter(|&(i, j)| p1[(i, j)] != 0.0)
            .map(|(i, j)| i as i64 - j as i64)
            .collect();
        assert_eq!(bands.len(), 5);
    }

    #[test]
    fn banded_errors_match_dense_product() {
        // same stream, dense multiplication
        let (t, p) = (7, 6);
        let mut a = replication_rng(3, 2);
        let e = gen_errors(t, p, 2.0, &mut a);
        let mut b = replication_rng(3, 2);
        let eps = gen_errors_with(ErrorStructure::Iid, t, p, 2.0, &mut b);
        let dense = banded_matrix(t) * eps * banded_matrix(p);
        assert!(crate::linalg::max_abs_diff(&e, &dense) < 1e-12);
    }

    #[test]
    fn mse_examples() {
        let c = DMatrix::from_fn(3, 4, |i, j| (i * j) as f64);
        assert_eq!(mse_common(&c, &c).unwrap(), 0.0);
        let shifted = c.map(|v| v + 1.0);
        assert_abs_diff_eq!(mse_common(&shifted, &c).unwrap(), 1.0, epsilon = 1e-15);
        assert!(mse_common(&c, &DMatrix::zeros(4, 3)).is_err());
    }

    #[test]
    fn factors_are_deterministic() {
        let a = gen_factors(40, 3, &mut replication_rng(11, 5));
        let b = gen_factors(40, 3, &mut replication_rng(11, 5));
        assert_eq!(a, b);
        let c = gen_factors(40, 3, &mut replication_rng(11, 6));
        assert_ne!(a, c);
    }

    #[test]
    fn block_mse_limits() {
        let thetas = [0.25; 4];
        let (p, t) = (200, 50);
        let lap = appendix_b_mse(PenaltyKind::Laplacian, &thetas, 0.1, p, t).unwrap();
        let proj = appendix_b_mse(PenaltyKind::Projection, &thetas, 0.1, p, t).unwrap();
        assert_abs_diff_eq!(lap.leading, proj.leading, epsilon = 1e-12);

        let far = appendix_b_mse(PenaltyKind::Laplacian, &thetas, 1e12, p, t).unwrap();
        let q = thetas.len() as f64;
        assert_abs_diff_eq!(far.total, 1.0 / t as f64 + q / (p * t) as f64, epsilon = 1e-12);

        assert!(appendix_b_mse(PenaltyKind::Laplacian, &[0.5, 1.0], 0.1, p, t).is_err());
        assert!(appendix_b_mse(PenaltyKind::Laplacian, &[0.5, 0.4], 0.1, p, t).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimulationConfig::new(Case::One, 20, 10, 2, 0);
        cfg.k_max = 10;
        assert!(cfg.validate().is_err());
        cfg.k_max = 5;
        assert!(cfg.validate().is_ok());
        cfg.r = 10;
        assert!(cfg.validate().is_err());
    }
}
