#![allow(dead_code, clippy::needless_range_loop)]

use hubscan::matrix::SymmetricMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cyclic Jacobi rotations on a dense copy. Returns eigenvalues in descending
/// order with matching eigenvectors as columns (`vecs[row][col]`).
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = a.len();
    let mut m = a.to_vec();
    let mut v = vec![vec![0.0; p]; p];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..p)
            .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for i in 0..p {
            for j in i + 1..p {
                if m[i][j].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[j][j] - m[i][i]) / (2.0 * m[i][j]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..p {
                    let (mki, mkj) = (m[k][i], m[k][j]);
                    m[k][i] = c * mki - s * mkj;
                    m[k][j] = s * mki + c * mkj;
                }
                for k in 0..p {
                    let (mik, mjk) = (m[i][k], m[j][k]);
                    m[i][k] = c * mik - s * mjk;
                    m[j][k] = s * mik + c * mjk;
                }
                for row in v.iter_mut() {
                    let (vi, vj) = (row[i], row[j]);
                    row[i] = c * vi - s * vj;
                    row[j] = s * vi + c * vj;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| m[y][y].total_cmp(&m[x][x]));
    let values = order.iter().map(|&k| m[k][k]).collect();
    let vecs = (0..p)
        .map(|r| order.iter().map(|&k| v[r][k]).collect())
        .collect();
    (values, vecs)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Symmetric matrix with entries uniform on [-1, 1].
pub fn random_symmetric(rng: &mut ChaCha8Rng, p: usize) -> SymmetricMatrix {
    let mut rows = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..=i {
            let v = rng.random_range(-1.0..1.0);
            rows[i][j] = v;
            rows[j][i] = v;
        }
    }
    SymmetricMatrix::from_rows(&rows).unwrap()
}

/// Diagonally dominant precision with variable 0 as the only hub.
pub fn one_hub_theta(p: usize, link: f64, diag: f64) -> SymmetricMatrix {
    SymmetricMatrix::from_fn(p, |i, j| {
        if i == j {
            diag
        } else if i == 0 || j == 0 {
            link
        } else {
            0.0
        }
    })
    .unwrap()
}
