#![allow(clippy::needless_range_loop)]

mod common;

use common::{jacobi_eigen, one_hub_theta};
use hubscan::estimators::{
    apply_mask, sample_correlation, sample_covariance, screen_variables, screening_scores,
    threshold_mask, DataMatrix, Mask,
};
use hubscan::ipchd::{detect, influence_measures, select_hubs, IpchdConfig, Kappa, Rho, SMode};
use hubscan::matrix::{cholesky, cov_to_corr, invert_spd, symmetric_eigen, SymmetricMatrix};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn sym_strategy(max_p: usize) -> impl Strategy<Value = SymmetricMatrix> {
    (2..=max_p).prop_flat_map(|p| {
        prop::collection::vec(-1.0f64..1.0, p * p)
            .prop_map(move |v| SymmetricMatrix::from_fn(p, |i, j| v[i * p + j]).unwrap())
    })
}

fn spd_strategy(max_p: usize) -> impl Strategy<Value = SymmetricMatrix> {
    sym_strategy(max_p).prop_map(|a| {
        let m = a.as_dmatrix();
        let p = a.dim();
        SymmetricMatrix::from_dmatrix(m * m.transpose() + DMatrix::identity(p, p) * 0.5).unwrap()
    })
}

fn data_strategy(max_n: usize, max_p: usize) -> impl Strategy<Value = DataMatrix> {
    (3..=max_n, 2..=max_p).prop_flat_map(|(n, p)| {
        prop::collection::vec(-5.0f64..5.0, n * p)
            .prop_map(move |v| DataMatrix::new(DMatrix::from_row_slice(n, p, &v)).unwrap())
    })
}

/// Smallest relative gap between consecutive eigenvalues.
fn min_gap(a: &SymmetricMatrix) -> f64 {
    let g = symmetric_eigen(a).unwrap().eigenvalues().to_vec();
    g.windows(2)
        .map(|w| (w[0] - w[1]) / w[0].abs().max(1.0))
        .fold(f64::INFINITY, f64::min)
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigen_reconstructs_and_matches_jacobi(a in sym_strategy(12)) {
        let eig = symmetric_eigen(&a).unwrap();
        prop_assert!(max_abs_diff(&eig.reconstruct(), a.as_dmatrix()) < 1e-10);
        let v = eig.vectors();
        let p = a.dim();
        prop_assert!(max_abs_diff(&(v.transpose() * v), &DMatrix::identity(p, p)) < 1e-10);
        prop_assert!(eig.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
        let (oracle, _) = jacobi_eigen(&a.to_rows());
        for (x, y) in eig.eigenvalues().iter().zip(&oracle) {
            prop_assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn spd_inverse_round_trip(a in spd_strategy(10)) {
        let inv = invert_spd(&a).unwrap();
        let p = a.dim();
        let prod = a.as_dmatrix() * inv.as_dmatrix();
        prop_assert!(max_abs_diff(&prod, &DMatrix::identity(p, p)) < 1e-8);
        let l = cholesky(&a).unwrap();
        let llt = l.as_dmatrix() * l.as_dmatrix().transpose();
        prop_assert!(max_abs_diff(&llt, a.as_dmatrix()) < 1e-10);
    }

    #[test]
    fn correlation_is_bounded_with_unit_diagonal(a in spd_strategy(10)) {
        let r = cov_to_corr(&a).unwrap();
        for i in 0..r.dim() {
            prop_assert_eq!(r.get(i, i), 1.0);
            for j in 0..r.dim() {
                prop_assert!(r.get(i, j).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn sample_covariance_is_psd(x in data_strategy(12, 8)) {
        let s = sample_covariance(&x).unwrap();
        let eig = symmetric_eigen(&s).unwrap();
        let scale = s.max_abs().max(1.0);
        prop_assert!(eig.eigenvalues().iter().all(|&g| g >= -1e-10 * scale));
    }

    #[test]
    fn screening_is_permutation_equivariant(a in sym_strategy(10), shift in 0usize..10) {
        let p = a.dim();
        let perm: Vec<usize> = (0..p).map(|i| (i + shift) % p).collect();
        let b = a.permuted(&perm).unwrap();
        let sa = screening_scores(&a);
        let sb = screening_scores(&b);
        for i in 0..p {
            prop_assert_eq!(sb[i], sa[perm[i]]);
        }
        let t = (p / 2).max(1);
        let mut sel_a = screen_variables(&a, t).unwrap().selected;
        let mut sel_b: Vec<usize> = screen_variables(&b, t).unwrap().selected.iter().map(|&i| perm[i]).collect();
        let mut sorted = sa.clone();
        sorted.sort_by(|x, y| y.total_cmp(x));
        // the selected set is only determined when the cut is not a tie
        if t == p || sorted[t - 1] != sorted[t] {
            sel_a.sort_unstable();
            sel_b.sort_unstable();
            prop_assert_eq!(sel_a, sel_b);
        }
    }

    #[test]
    fn threshold_mask_shrinks_as_xi_grows(x in data_strategy(20, 8), lo in 0.0f64..3.0, extra in 0.0f64..3.0) {
        let s = sample_correlation(&x);
        prop_assume!(s.is_ok());
        let s = s.unwrap();
        let small = threshold_mask(&s, lo, x.n()).unwrap();
        let big = threshold_mask(&s, lo + extra, x.n()).unwrap();
        for i in 0..s.dim() {
            prop_assert!(big.keeps(i, i));
            for j in 0..s.dim() {
                prop_assert!(!big.keeps(i, j) || small.keeps(i, j));
            }
        }
    }

    #[test]
    fn apply_mask_matches_entrywise_product(a in sym_strategy(8), bits in prop::collection::vec(any::<bool>(), 64)) {
        let p = a.dim();
        let mask = Mask::from_fn(p, |i, j| bits[i.max(j) * 8 + i.min(j)]);
        let out = apply_mask(&mask, &a).unwrap();
        for i in 0..p {
            for j in 0..p {
                let m = if i == j || bits[i.max(j) * 8 + i.min(j)] { 1.0 } else { 0.0 };
                prop_assert_eq!(out.get(i, j), m * a.get(i, j));
            }
        }
    }

    #[test]
    fn influence_is_normalized_and_monotone(a in sym_strategy(15)) {
        let eig = symmetric_eigen(&a).unwrap();
        let p = a.dim();
        let mut prev = vec![0.0; p];
        for s in 1..=p {
            let w = influence_measures(&eig, s).unwrap();
            let total: f64 = w.iter().sum();
            prop_assert!((total - s as f64).abs() < 1e-8);
            for k in 0..p {
                prop_assert!(w[k] >= 0.0 && w[k] <= 1.0 + 1e-10);
                prop_assert!(w[k] >= prev[k]);
            }
            prev = w;
        }
    }

    #[test]
    fn detect_is_permutation_equivariant(a in spd_strategy(10), shift in 1usize..10) {
        let p = a.dim();
        prop_assume!(min_gap(&a) > 1e-6);
        let cfg = IpchdConfig { kappa: Kappa::Fixed(0.3), ..IpchdConfig::default() };
        let perm: Vec<usize> = (0..p).map(|i| (i + shift) % p).collect();
        let ra = detect(&a, &cfg).unwrap();
        let rb = detect(&a.permuted(&perm).unwrap(), &cfg).unwrap();
        prop_assert_eq!(ra.s_hat, rb.s_hat);
        for i in 0..p {
            prop_assert!((rb.influence[i] - ra.influence[perm[i]]).abs() < 1e-8);
        }
        let min_margin = ra.influence.iter().map(|w| (w - 0.3).abs()).fold(f64::INFINITY, f64::min);
        if min_margin > 1e-6 {
            let mut mapped: Vec<usize> = rb.hubs.iter().map(|&h| perm[h]).collect();
            mapped.sort_unstable();
            prop_assert_eq!(mapped, ra.hubs);
        }
    }

    #[test]
    fn correlation_detect_ignores_column_scaling(x in data_strategy(30, 6), scales in prop::collection::vec(0.1f64..10.0, 6)) {
        let r = sample_correlation(&x);
        prop_assume!(r.as_ref().is_ok_and(|r| min_gap(r) > 1e-6));
        let mut y = x.values().clone();
        for j in 0..x.p() {
            y.column_mut(j).scale_mut(scales[j]);
        }
        let y = DataMatrix::new(y).unwrap();
        let cfg = IpchdConfig { rho: Rho::Fixed(1.0), s_mode: SMode::Fixed(1), kappa: Kappa::Fixed(0.4), ..IpchdConfig::default() };
        let a = detect(&r.unwrap(), &cfg).unwrap();
        let b = detect(&sample_correlation(&y).unwrap(), &cfg).unwrap();
        for (u, v) in a.influence.iter().zip(&b.influence) {
            prop_assert!((u - v).abs() < 1e-6);
        }
    }
}

#[test]
fn jacobi_oracle_diagonalizes() {
    let a = vec![
        vec![4.0, 1.0, 0.5],
        vec![1.0, 3.0, 0.2],
        vec![0.5, 0.2, 1.0],
    ];
    let (vals, vecs) = jacobi_eigen(&a);
    for c in 0..3 {
        for r in 0..3 {
            let av: f64 = (0..3).map(|k| a[r][k] * vecs[k][c]).sum();
            assert!((av - vals[c] * vecs[r][c]).abs() < 1e-12);
        }
    }
}

#[test]
fn one_hub_precision_is_found_by_the_ratio_rule() {
    let theta = one_hub_theta(10, 1.5, 6.0);
    let sigma = invert_spd(&theta).unwrap();

    // independent eigen oracle on sigma: the hub spike is the smallest eigenvalue
    let (gamma, vecs) = jacobi_eigen(&sigma.to_rows());
    let p = 10;
    let ratios: Vec<f64> = (1..=p / 2)
        .map(|i| gamma[p - i - 1] / gamma[p - i])
        .collect();
    let argmax = (0..ratios.len())
        .max_by(|&a, &b| ratios[a].total_cmp(&ratios[b]))
        .unwrap();
    assert_eq!(argmax, 0);
    let omega: Vec<f64> = (0..p).map(|k| vecs[k][p - 1].powi(2)).collect();
    assert!(omega[1..].iter().all(|&w| w < omega[0]));

    let res = detect(&sigma, &IpchdConfig::default()).unwrap();
    assert_eq!(res.s_hat, 1);
    assert!(!res.fallback);
    assert_eq!(res.hubs, vec![0]);
    for (a, b) in res.influence.iter().zip(&omega) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn identity_takes_the_fallback_branch() {
    let res = detect(&SymmetricMatrix::identity(10), &IpchdConfig::default()).unwrap();
    assert!(res.fallback);
    assert_eq!(res.s_hat, 2);
    assert!((res.influence.iter().sum::<f64>() - 2.0).abs() < 1e-12);
}

#[test]
fn select_hubs_is_monotone_in_kappa() {
    let w = [0.9, 0.1, 0.5, 0.5, 0.0];
    let mut last = select_hubs(&w, 0.0);
    for k in [0.1, 0.3, 0.5, 0.7, 1.0] {
        let cur = select_hubs(&w, k);
        assert!(cur.iter().all(|h| last.contains(h)));
        last = cur;
    }
}
