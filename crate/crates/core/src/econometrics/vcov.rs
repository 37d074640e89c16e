//! Sandwich variance estimators over an [`OlsFit`].

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ols::OlsFit;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VcovKind {
    Ols,
    Hc1,
    Cluster,
    TwoWayCluster,
    NeweyWest,
}

/// Score of observation `i`: `w_i e_i x_i`.
fn score(fit: &OlsFit, i: usize) -> DVector<f64> {
    fit.x.row(i).transpose() * (fit.weight(i) * fit.resid[i])
}

fn sandwich(fit: &OlsFit, meat: &DMatrix<f64>, factor: f64) -> DMatrix<f64> {
    let v = &fit.bread * meat * &fit.bread * factor;
    symmetrize(v)
}

fn symmetrize(v: DMatrix<f64>) -> DMatrix<f64> {
    (&v + v.transpose()) * 0.5
}

fn resid_df(fit: &OlsFit) -> Result<f64> {
    let (n, k) = (fit.n(), fit.k());
    if n <= k {
        return Err(Error::invalid(format!("{n} observations leave no residual degrees of freedom for {k} parameters")));
    }
    Ok((n - k) as f64)
}

/// Classical `s^2 (X'WX)^-1` with `s^2 = sum w e^2 / (N - K)`.
pub fn vcov_ols(fit: &OlsFit) -> Result<DMatrix<f64>> {
    let df = resid_df(fit)?;
    let ssr: f64 = (0..fit.n()).map(|i| fit.weight(i) * fit.resid[i].powi(2)).sum();
    Ok(symmetrize(&fit.bread * (ssr / df)))
}

/// Heteroskedasticity-robust sandwich scaled by `N / (N - K)`.
pub fn vcov_hc1(fit: &OlsFit) -> Result<DMatrix<f64>> {
    let df = resid_df(fit)?;
    let k = fit.x.ncols();
    let mut meat = DMatrix::zeros(k, k);
    for i in 0..fit.n() {
        let s = score(fit, i);
        meat.ger(1.0, &s, &s, 1.0);
    }
    Ok(sandwich(fit, &meat, fit.n() as f64 / df))
}

fn cluster_meat<K: Ord>(fit: &OlsFit, ids: &[K]) -> (DMatrix<f64>, usize) {
    let k = fit.x.ncols();
    let mut sums: BTreeMap<&K, DVector<f64>> = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        let s = score(fit, i);
        match sums.get_mut(id) {
            Some(acc) => *acc += s,
            None => {
                sums.insert(id, s);
            }
        }
    }
    let mut meat = DMatrix::zeros(k, k);
    for s in sums.values() {
        meat.ger(1.0, s, s, 1.0);
    }
    (meat, sums.len())
}

/// Number of distinct cluster ids.
pub fn cluster_count<K: Ord>(ids: &[K]) -> usize {
    ids.iter().collect::<std::collections::BTreeSet<_>>().len()
}

/// One-way cluster-robust sandwich with factor `G/(G-1) * (N-1)/(N-K)`.
pub fn vcov_cluster<K: Ord>(fit: &OlsFit, ids: &[K]) -> Result<DMatrix<f64>> {
    if ids.len() != fit.n() {
        return Err(Error::Shape(format!("{} cluster ids for {} observations", ids.len(), fit.n())));
    }
    let df = resid_df(fit)?;
    let (meat, g) = cluster_meat(fit, ids);
    if g < 2 {
        return Err(Error::invalid("cluster-robust variance needs at least two clusters"));
    }
    let (g, n) = (g as f64, fit.n() as f64);
    Ok(sandwich(fit, &meat, g / (g - 1.0) * (n - 1.0) / df))
}

/// Two-way cluster-robust variance `V_a + V_b - V_ab`, where `V_ab`
/// clusters on the intersection. Each component carries its own
/// small-sample factor. An indefinite result has its negative eigenvalues
/// set to zero; the returned flag tells whether that happened.
pub fn vcov_twoway<A: Ord, B: Ord>(fit: &OlsFit, a: &[A], b: &[B]) -> Result<(DMatrix<f64>, bool)> {
    Ok(psd_repair(vcov_twoway_unrepaired(fit, a, b)?))
}

pub(crate) fn vcov_twoway_unrepaired<A: Ord, B: Ord>(fit: &OlsFit, a: &[A], b: &[B]) -> Result<DMatrix<f64>> {
    let va = vcov_cluster(fit, a)?;
    let vb = vcov_cluster(fit, b)?;
    let ab: Vec<(&A, &B)> = a.iter().zip(b).collect();
    let vab = if cluster_count(&ab) < 2 {
        DMatrix::zeros(va.nrows(), va.ncols())
    } else {
        vcov_cluster(fit, &ab)?
    };
    Ok(symmetrize(va + vb - vab))
}

/// Zero the negative eigenvalues of a symmetric matrix.
pub fn psd_repair(v: DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let eig = v.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return (v, false);
    }
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let r = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    (symmetrize(r), true)
}

/// Bartlett-kernel HAC sandwich over the observations in their stored
/// order, scaled by `N / (N - K)` so that lag 0 is HC1.
pub fn vcov_newey_west(fit: &OlsFit, lag: usize) -> Result<DMatrix<f64>> {
    let n = fit.n();
    if n <= lag {
        return Err(Error::invalid(format!("Newey-West lag {lag} needs more than {lag} periods, got {n}")));
    }
    let df = resid_df(fit)?;
    let k = fit.x.ncols();
    let scores: Vec<DVector<f64>> = (0..n).map(|i| score(fit, i)).collect();
    let mut meat = DMatrix::zeros(k, k);
    for s in &scores {
        meat.ger(1.0, s, s, 1.0);
    }
    for l in 1..=lag {
        let w = 1.0 - l as f64 / (lag as f64 + 1.0);
        let mut gamma = DMatrix::zeros(k, k);
        for i in l..n {
            gamma.ger(1.0, &scores[i], &scores[i - l], 1.0);
        }
        meat += (&gamma + gamma.transpose()) * w;
    }
    Ok(sandwich(fit, &meat, n as f64 / df))
}

/// Standard errors from the diagonal.
pub fn std_errors(v: &DMatrix<f64>) -> Vec<f64> {
    (0..v.nrows()).map(|j| v[(j, j)].max(0.0).sqrt()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econometrics::ols::ols;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fit(x: &[f64], y: &[f64], k: usize) -> OlsFit {
        let n = y.len();
        let names: Vec<String> = (0..k).map(|j| format!("x{j}")).collect();
        ols(DMatrix::from_row_slice(n, k, x), &DVector::from_row_slice(y), None, &names, None).unwrap()
    }

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) {
        assert_eq!(a.shape(), b.shape());
        for (p, q) in a.iter().zip(b.iter()) {
            assert!((p - q).abs() <= tol * (1.0 + q.abs()), "{a} vs {b}");
        }
    }

    /// Intercept-only regression: every estimator is a scalar formula.
    fn intercept_fit(y: &[f64]) -> OlsFit {
        fit(&vec![1.0; y.len()], y, 1)
    }

    #[test]
    fn one_way_matches_hand_sandwich() {
        // y = [1, 3, 2, 6], mean 3, residuals [-2, 0, -1, 3]
        // clusters {0,1} sum -2, {2,3} sum 2; bread 1/4
        // meat 8, factor 2/1 * 3/3 = 2 => 2 * 8 / 16 = 1
        let f = intercept_fit(&[1.0, 3.0, 2.0, 6.0]);
        let v = vcov_cluster(&f, &[0, 0, 1, 1]).unwrap();
        assert_relative_eq!(v[(0, 0)], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn one_way_with_slope_matches_direct_formula() {
        let x = [1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 4.0];
        let y = [1.0, 2.0, 2.5, 5.0];
        let f = fit(&x, &y, 2);
        let ids = [7, 7, 9, 9];
        let xm = DMatrix::from_row_slice(4, 2, &x);
        let bread = (xm.transpose() * &xm).try_inverse().unwrap();
        let e = &f.resid;
        let s0 = xm.row(0).transpose() * e[0] + xm.row(1).transpose() * e[1];
        let s1 = xm.row(2).transpose() * e[2] + xm.row(3).transpose() * e[3];
        let meat = &s0 * s0.transpose() + &s1 * s1.transpose();
        let expect = &bread * meat * &bread * (2.0 / 1.0 * 3.0 / 2.0);
        close(&vcov_cluster(&f, &ids).unwrap(), &expect, 1e-10);
    }

    #[test]
    fn singleton_clusters_equal_hc1() {
        let x = [1.0, 0.3, 1.0, 1.2, 1.0, -0.7, 1.0, 2.2, 1.0, 0.1, 1.0, 0.9];
        let y = [0.5, 1.9, -0.2, 3.1, 0.4, 1.0];
        let f = fit(&x, &y, 2);
        let ids: Vec<usize> = (0..6).collect();
        close(&vcov_cluster(&f, &ids).unwrap(), &vcov_hc1(&f).unwrap(), 1e-12);
    }

    #[test]
    fn single_cluster_is_an_error() {
        let f = intercept_fit(&[1.0, 2.0, 4.0]);
        assert!(vcov_cluster(&f, &[1, 1, 1]).is_err());
    }

    #[test]
    fn two_way_matches_hand_sandwich() {
        // 2 x 3 grid, intercept only. y = [1, 4, 2, 7, 3, 1], mean 3
        // e = [-2, 1, -1, 4, 0, -2], N = 6, K = 1
        // a = [0,0,0,1,1,1]: sums -2, 2 => meat 8, factor 2 * 5/5 = 2
        // b = [0,1,2,0,1,2]: sums 2, 1, -3 => meat 14, factor 3/2
        // ab singletons: meat 26, factor 6/5 * 5/5 = 6/5
        // V = (2*8 + 1.5*14 - 1.2*26) / 36
        let f = intercept_fit(&[1.0, 4.0, 2.0, 7.0, 3.0, 1.0]);
        let (v, repaired) = vcov_twoway(&f, &[0, 0, 0, 1, 1, 1], &[0, 1, 2, 0, 1, 2]).unwrap();
        assert!(!repaired);
        assert_relative_eq!(v[(0, 0)], (16.0 + 21.0 - 31.2) / 36.0, max_relative = 1e-12);
    }

    #[test]
    fn two_way_reductions() {
        let x = [1.0, 0.3, 1.0, 1.2, 1.0, -0.7, 1.0, 2.2, 1.0, 0.1, 1.0, 0.9, 1.0, 1.5];
        let y = [0.5, 1.9, -0.2, 3.1, 0.4, 1.0, 2.0];
        let f = fit(&x, &y, 2);
        let a = [0, 0, 1, 1, 2, 2, 2];
        let va = vcov_cluster(&f, &a).unwrap();
        let singles: Vec<usize> = (0..7).collect();
        close(&vcov_twoway(&f, &a, &singles).unwrap().0, &va, 1e-10);
        close(&vcov_twoway(&f, &a, &a).unwrap().0, &va, 1e-10);
    }

    #[test]
    fn lag_zero_is_hc1() {
        let x = [1.0, 0.3, 1.0, 1.2, 1.0, -0.7, 1.0, 2.2, 1.0, 0.1];
        let y = [0.5, 1.9, -0.2, 3.1, 0.4];
        let f = fit(&x, &y, 2);
        assert_eq!(vcov_newey_west(&f, 0).unwrap(), vcov_hc1(&f).unwrap());
    }

    #[test]
    fn newey_west_matches_hand_sandwich() {
        // intercept only, e = [1, -1, 2, 0, -2], mean of y removed
        // gamma_0 = 10, gamma_1 = -1 - 2 + 0 + 0 = -3, gamma_2 = 2 + 0 - 4 = -2
        // lag 2 weights 2/3, 1/3 => meat 10 + 2(2/3)(-3) + 2(1/3)(-2) = 14/3
        // V = 5/4 * (14/3) / 25
        let f = intercept_fit(&[4.0, 2.0, 5.0, 3.0, 1.0]);
        assert!(f.resid.iter().zip([1.0, -1.0, 2.0, 0.0, -2.0]).all(|(a, b)| (a - b).abs() < 1e-12));
        let v = vcov_newey_west(&f, 2).unwrap();
        assert_relative_eq!(v[(0, 0)], 1.25 * (14.0 / 3.0) / 25.0, max_relative = 1e-12);
    }

    #[test]
    fn newey_west_needs_enough_periods() {
        let f = intercept_fit(&[1.0, 2.0, 3.0]);
        assert!(vcov_newey_west(&f, 3).is_err());
    }

    #[test]
    fn repair_clips_negative_eigenvalues() {
        let v = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let (r, changed) = psd_repair(v);
        assert!(changed);
        let eig = r.symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-12));
    }

    proptest! {
        #[test]
        fn estimators_are_symmetric_and_order_invariant(
            rows in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0, 0usize..4, 0usize..3), 10..30),
            shift in 1usize..9,
        ) {
            let n = rows.len();
            let build = |rows: &[(f64, f64, usize, usize)]| {
                let x: Vec<f64> = rows.iter().flat_map(|r| [1.0, r.0]).collect();
                let y: Vec<f64> = rows.iter().map(|r| r.1).collect();
                fit(&x, &y, 2)
            };
            let mut rot = rows.clone();
            rot.rotate_left(shift % n);
            let f1 = build(&rows);
            let f2 = build(&rot);
            let a1: Vec<usize> = rows.iter().map(|r| r.2).collect();
            let b1: Vec<usize> = rows.iter().map(|r| r.3).collect();
            let a2: Vec<usize> = rot.iter().map(|r| r.2).collect();
            let b2: Vec<usize> = rot.iter().map(|r| r.3).collect();
            prop_assume!(cluster_count(&a1) >= 2 && cluster_count(&b1) >= 2);
            let pairs = [
                (vcov_hc1(&f1).unwrap(), vcov_hc1(&f2).unwrap()),
                (vcov_cluster(&f1, &a1).unwrap(), vcov_cluster(&f2, &a2).unwrap()),
                (vcov_twoway(&f1, &a1, &b1).unwrap().0, vcov_twoway(&f2, &a2, &b2).unwrap().0),
            ];
            for (v1, v2) in pairs {
                prop_assert!((&v1 - v1.transpose()).amax() == 0.0);
                prop_assert!((0..2).all(|j| v1[(j, j)] >= 0.0));
                prop_assert!((&v1 - &v2).amax() <= 1e-10 * (1.0 + v1.amax()));
            }
        }
    }
}
