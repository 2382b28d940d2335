#![allow(dead_code)]

use nalgebra::DMatrix;
use netfactor::{Network, PenaltyKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn random_network(p: usize, density: f64, rng: &mut impl Rng) -> Network {
    let mut edges = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            if rng.random_bool(density) {
                edges.push((i, j));
            }
        }
    }
    Network::from_edges(p, &edges).unwrap()
}

/// Connected components by union-find over the edge list.
pub fn union_find_components(net: &Network) -> usize {
    let p = net.p();
    let mut parent: Vec<usize> = (0..p).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (i, j) in net.edges() {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a] = b;
        }
    }
    (0..p).filter(|&i| find(&mut parent, i) == i).count()
}

/// `sum_i sum_j A_ij ||b_i - b_j||^2` by direct double loop.
pub fn brute_force_penalty(net: &Network, b: &DMatrix<f64>) -> f64 {
    let p = net.p();
    let mut total = 0.0;
    for i in 0..p {
        for j in 0..p {
            if net.has_edge(i, j) {
                total += (b.row(i) - b.row(j)).norm_squared();
            }
        }
    }
    total
}

/// Explicit `D` for the penalty, built from the Laplacian and (for the
/// projection penalty) the leading `p - m` eigenvectors, then inverted densely.
pub fn dense_d_inverse(
    net: &Network,
    u: &DMatrix<f64>,
    kind: PenaltyKind,
    alpha: f64,
    m: usize,
) -> DMatrix<f64> {
    let p = net.p();
    let d = match kind {
        PenaltyKind::None => DMatrix::identity(p, p),
        PenaltyKind::Laplacian => {
            let ln = net.laplacian() / net.mean_degree();
            DMatrix::identity(p, p) + ln * alpha
        }
        PenaltyKind::Projection => {
            let u1 = u.columns(0, p - m);
            DMatrix::identity(p, p) + &u1 * u1.transpose() * alpha
        }
    };
    d.try_inverse().expect("D is positive definite")
}

/// Reference fit: leading eigenvectors of `X D^{-1} X^T` formed densely.
pub fn dense_common_components(x: &DMatrix<f64>, d_inv: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let t = x.nrows() as f64;
    let g = x * d_inv * x.transpose();
    let eig = g.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut f = DMatrix::zeros(x.nrows(), r);
    for (k, &i) in order.iter().take(r).enumerate() {
        f.set_column(k, &(eig.eigenvectors.column(i) * t.sqrt()));
    }
    let b = d_inv * x.transpose() * &f / t;
    f * b.transpose()
}

pub fn max_abs(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}
