mod common;

use common::{normal_matrix, random_network, rng};
use nalgebra::DMatrix;
use netfactor::simulation::{gen_loadings, gen_network, replication_rng, Case, GROUPS};
use netfactor::tuning::{select_r_one_step, tune_with_sigma2, ScoredPoint};
use netfactor::{
    assumption_e_eigs, cl_score, default_grids, estimate_noise_variance, h_value, oracle_alpha,
    select_r_er, tune, Grids, LaplacianSpectrum, PenaltyKind, ShrinkageOperator, SpectralPanel,
};
use proptest::prelude::*;

fn panel_setup(seed: u64, t: usize, p: usize) -> (DMatrix<f64>, LaplacianSpectrum) {
    let mut r = rng(seed);
    let net = random_network(p, 0.2, &mut r);
    let spec = LaplacianSpectrum::new(&net);
    let f = normal_matrix(t, 3, &mut r);
    let b = normal_matrix(p, 3, &mut r);
    let x = &f * b.transpose() * 0.8 + normal_matrix(t, p, &mut r);
    (x, spec)
}

#[test]
fn noise_variance_of_exact_rank_panel_is_zero() {
    let mut r = rng(1);
    let x = normal_matrix(12, 2, &mut r) * normal_matrix(2, 30, &mut r);
    let spec = LaplacianSpectrum::new(&random_network(30, 0.2, &mut r));
    let panel = SpectralPanel::new(&x, &spec).unwrap();
    assert!(estimate_noise_variance(&panel, 2).unwrap() < 1e-12);
}

#[test]
fn noise_variance_is_quadratic_in_scale() {
    let (x, spec) = panel_setup(2, 15, 25);
    let s1 = estimate_noise_variance(&SpectralPanel::new(&x, &spec).unwrap(), 3).unwrap();
    let scaled = &x * 2.5;
    let s2 = estimate_noise_variance(&SpectralPanel::new(&scaled, &spec).unwrap(), 3).unwrap();
    assert!((s2 - 6.25 * s1).abs() < 1e-10 * s2);
}

#[test]
fn noise_variance_of_pure_noise() {
    // the leading eigen-directions absorb part of the noise
    let spec = LaplacianSpectrum::new(&netfactor::Network::empty(200));
    for seed in 0..50 {
        let x = normal_matrix(50, 200, &mut rng(seed));
        let panel = SpectralPanel::new(&x, &spec).unwrap();
        let s = estimate_noise_variance(&panel, 3).unwrap();
        assert!(s > 0.8 && s < 1.0, "seed {seed}: {s}");
    }
}

#[test]
fn cl_of_plain_fit_is_inflated_sigma() {
    let (x, spec) = panel_setup(3, 20, 30);
    let panel = SpectralPanel::new(&x, &spec).unwrap();
    let op = ShrinkageOperator::identity(30);
    let est = panel.fit(&op, 3).unwrap();
    let sigma2 = estimate_noise_variance(&panel, 3).unwrap();
    let cl = cl_score(&x, &est, &op, sigma2, 3).unwrap();
    assert!((cl.score - sigma2 * (1.0 + 6.0 / 20.0)).abs() < 1e-13);
    assert!((cl.adjusted_error - sigma2 * 6.0 / 20.0).abs() < 1e-13);
}

#[test]
fn tuning_returns_table_minimum() {
    let (x, spec) = panel_setup(4, 20, 40);
    let panel = SpectralPanel::new(&x, &spec).unwrap();
    let grids = default_grids(40);
    let sigma2 = estimate_noise_variance(&panel, 3).unwrap();
    let op = ShrinkageOperator::identity(40);
    let pca_score = cl_score(&x, &panel.fit(&op, 3).unwrap(), &op, sigma2, 3).unwrap().score;
    for kind in [PenaltyKind::Laplacian, PenaltyKind::Projection] {
        let res = tune(&panel, kind, 3, &grids).unwrap();
        let min = res.score_table.iter().map(|s| s.score).fold(f64::INFINITY, f64::min);
        assert_eq!(res.score, min);
        assert!(res.score <= pca_score + 1e-15);
        let expected_len = match kind {
            PenaltyKind::Laplacian => grids.alphas.len(),
            _ => grids.alphas.len() * grids.ms.len(),
        };
        assert_eq!(res.score_table.len(), expected_len);
        // the winning point re-fits to the same score
        let best = res.operator(&spec).unwrap();
        let again = cl_score(&x, &panel.fit(&best, 3).unwrap(), &best, sigma2, 3).unwrap();
        assert!((again.score - res.score).abs() < 1e-12);
    }
}

#[test]
fn single_point_grid() {
    let (x, spec) = panel_setup(5, 15, 20);
    let panel = SpectralPanel::new(&x, &spec).unwrap();
    let res = tune(&panel, PenaltyKind::Projection, 2, &Grids::fixed(3.0, 4)).unwrap();
    assert_eq!((res.alpha_star, res.m_star), (3.0, 4));
    let empty = Grids { alphas: vec![], ms: vec![1] };
    assert!(tune(&panel, PenaltyKind::Laplacian, 2, &empty).is_err());
}

#[test]
fn tuning_is_deterministic() {
    let (x, spec) = panel_setup(6, 20, 40);
    let panel = SpectralPanel::new(&x, &spec).unwrap();
    let a = tune(&panel, PenaltyKind::Projection, 3, &default_grids(40)).unwrap();
    let b = tune(&panel, PenaltyKind::Projection, 3, &default_grids(40)).unwrap();
    let key = |t: &[ScoredPoint]| t.iter().map(|s| (s.alpha.to_bits(), s.m, s.score.to_bits())).collect::<Vec<_>>();
    assert_eq!(key(&a.score_table), key(&b.score_table));
}

#[test]
fn noiseless_misaligned_loadings_select_no_shrinkage() {
    // loadings in the span of the largest-eigenvalue eigenvectors: shrinkage
    // only adds bias
    let mut r = rng(7);
    let p = 40;
    let net = random_network(p, 0.3, &mut r);
    let spec = LaplacianSpectrum::new(&net);
    let b = spec.eigvecs().columns(0, 2) * DMatrix::from_row_slice(2, 2, &[3.0, 1.0, -1.0, 2.0]);
    let x = normal_matrix(20, 2, &mut r) * b.transpose();
    let panel = SpectralPanel::new(&x, &spec).unwrap();
    let sigma2 = estimate_noise_variance(&panel, 2).unwrap();
    assert!(sigma2 < 1e-20);
    for kind in [PenaltyKind::Laplacian, PenaltyKind::Projection] {
        let res = tune(&panel, kind, 2, &default_grids(p)).unwrap();
        assert_eq!(res.alpha_star, 0.0, "{kind}");
    }
    // with the exact sigma^2 = 0 the criterion is the residual alone
    let res = tune_with_sigma2(&panel, PenaltyKind::Laplacian, 2, &default_grids(p), 0.0).unwrap();
    assert_eq!(res.alpha_star, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn er_is_scale_free(seed in any::<u64>(), scale in 1e-3f64..1e3) {
        let (x, spec) = panel_setup(seed, 20, 30);
        let scaled = &x * scale;
        let op = ShrinkageOperator::new(&spec, PenaltyKind::Laplacian, 0.5, 0).unwrap();
        let a = select_r_er(&SpectralPanel::new(&x, &spec).unwrap(), &op, 8).unwrap();
        let b = select_r_er(&SpectralPanel::new(&scaled, &spec).unwrap(), &op, 8).unwrap();
        prop_assert_eq!(a.r_hat, b.r_hat);
        for (u, v) in a.ratios.iter().zip(&b.ratios) {
            prop_assert!((u - v).abs() <= 1e-8 * u.abs());
        }
    }
}

#[test]
fn er_rejects_bad_k_max() {
    let (x, spec) = panel_setup(8, 10, 30);
    let panel = SpectralPanel::new(&x, &spec).unwrap();
    let op = ShrinkageOperator::identity(30);
    assert!(select_r_er(&panel, &op, 10).is_err());
    assert!(select_r_er(&panel, &op, 0).is_err());
    assert!(select_r_er(&panel, &op, 9).is_ok());
}

#[test]
fn one_step_with_zero_alpha_is_plain_er() {
    let (x, spec) = panel_setup(9, 30, 60);
    let panel = SpectralPanel::new(&x, &spec).unwrap();
    let grids = Grids { alphas: vec![0.0], ms: vec![5] };
    let plain = select_r_er(&panel, &ShrinkageOperator::identity(60), 10).unwrap();
    for kind in [PenaltyKind::Laplacian, PenaltyKind::Projection] {
        let res = select_r_one_step(&panel, kind, 10, &grids, 0).unwrap();
        assert_eq!(res.tuning.alpha_star, 0.0);
        assert_eq!(res.result.r_hat, plain.r_hat);
        assert_eq!(res.result.ratios, plain.ratios);
        assert_eq!(res.path.len(), 2);
    }
}

#[test]
fn one_step_reaches_fixed_point_on_grouped_design() {
    use netfactor::simulation::{generate_panel, SimulationConfig};
    let mut cfg = SimulationConfig::new(Case::Three, 300, 50, 40, 515);
    cfg.sigma_e2 = 4.0;
    let mut stable = 0;
    for k in 0..cfg.reps {
        let (_, spec, _, _, x) = generate_panel(&cfg, &mut replication_rng(cfg.seed, k as u64)).unwrap();
        let panel = SpectralPanel::new(&x, &spec).unwrap();
        let res = select_r_one_step(&panel, PenaltyKind::Laplacian, 10, &cfg.grids, 1).unwrap();
        assert_eq!(res.path.len(), 3);
        if res.fixed_point {
            stable += 1;
        }
    }
    assert!(stable as f64 >= 0.95 * cfg.reps as f64, "{stable}/{}", cfg.reps);
}

#[test]
fn projection_h_matches_closed_form() {
    let mut r = rng(10);
    let (p, t, m) = (30, 12, 7);
    let spec = LaplacianSpectrum::new(&random_network(p, 0.3, &mut r));
    let b = normal_matrix(p, 3, &mut r);
    let head: f64 = spec.rotate(&b).unwrap().rows(0, p - m).norm_squared();
    for alpha in [0.0, 0.3, 2.0, 17.0] {
        let op = ShrinkageOperator::new(&spec, PenaltyKind::Projection, alpha, m).unwrap();
        let (pf, tf) = (p as f64, t as f64);
        let s = 1.0 + alpha;
        let closed = alpha * alpha * head / (pf * s * s) + (pf - m as f64) / (pf * tf * s * s) + m as f64 / (pf * tf);
        let h = h_value(&b, &spec, &op, t).unwrap();
        assert!((h - closed).abs() < 1e-12, "{h} vs {closed}");
    }
}

#[test]
fn h_value_dense_oracle() {
    let mut r = rng(11);
    let p = 20;
    let spec = LaplacianSpectrum::new(&random_network(p, 0.3, &mut r));
    let b = normal_matrix(p, 2, &mut r);
    let op = ShrinkageOperator::new(&spec, PenaltyKind::Laplacian, 1.7, 0).unwrap();
    let d_inv = op.dense_inverse(&spec);
    let eye = DMatrix::<f64>::identity(p, p);
    let dense = ((&d_inv - &eye) * &b).norm_squared() / p as f64 + (&d_inv * &d_inv).trace() / (p as f64 * 9.0);
    assert!((h_value(&b, &spec, &op, 9).unwrap() - dense).abs() < 1e-12);
}

#[test]
fn assumption_e_matches_dense_computation() {
    let mut r = rng(12);
    let p = 25;
    let net = random_network(p, 0.3, &mut r);
    let spec = LaplacianSpectrum::new(&net);
    let b = normal_matrix(p, 3, &mut r);
    let op = ShrinkageOperator::new(&spec, PenaltyKind::Laplacian, 2.0, 0).unwrap();
    let d = DMatrix::<f64>::identity(p, p) + net.laplacian() / net.mean_degree() * 2.0;
    let s = b.transpose() * d.try_inverse().unwrap() * &b / p as f64;
    let mut dense: Vec<f64> = s.symmetric_eigen().eigenvalues.iter().copied().collect();
    dense.sort_by(|a, b| b.total_cmp(a));
    let fast = assumption_e_eigs(&b, &spec, &op).unwrap();
    for (x, y) in fast.iter().zip(&dense) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn projection_leaves_tail_loadings_alone() {
    let mut r = rng(13);
    let (p, m) = (30, 6);
    let spec = LaplacianSpectrum::new(&random_network(p, 0.3, &mut r));
    let b = spec.eigvecs().columns(p - m, m) * normal_matrix(m, 2, &mut r);
    let op = ShrinkageOperator::new(&spec, PenaltyKind::Projection, 4.0, m).unwrap();
    let shrunk = assumption_e_eigs(&b, &spec, &op).unwrap();
    let plain = assumption_e_eigs(&b, &spec, &ShrinkageOperator::identity(p)).unwrap();
    for (x, y) in shrunk.iter().zip(&plain) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn grouped_design_oracle_alpha() {
    let (p, t, r) = (200, 50, 3);
    let mut g = replication_rng(14, 0);
    let net = gen_network(Case::Three, p, &mut g).unwrap();
    let spec = LaplacianSpectrum::new(&net);
    let b = gen_loadings(Case::Three, &spec, p, r, &mut g).unwrap();
    let d = spec.eigvals().iter().filter(|&&t| t < 0.001).count();
    let inv_sum: f64 = spec.eigvals()[..p - d].iter().map(|t| 1.0 / t).sum();
    let z = 0.0625 * (r * p) as f64 / inv_sum;
    let oa = oracle_alpha(PenaltyKind::Laplacian, &b, &spec, t, 0).unwrap();
    assert!((oa.value - 1.0 / (t as f64 * z)).abs() < 1e-8 * oa.value);
    assert!(d <= GROUPS);
}
