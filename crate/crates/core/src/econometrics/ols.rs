//! Weighted least squares through a QR factorization, with the residuals
//! and bread kept for the variance estimators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative size of `|R_jj|` below which a column counts as a linear
/// combination of the columns before it.
pub const COLLINEARITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub names: Vec<String>,
    pub coef: DVector<f64>,
    /// Design actually used (after any fixed-effect transform), unweighted.
    pub x: DMatrix<f64>,
    /// Unweighted residuals `y - X b`.
    pub resid: DVector<f64>,
    pub weights: Option<Vec<f64>>,
    /// `(X'WX)^-1`.
    pub bread: DMatrix<f64>,
    /// Degrees of freedom absorbed by fixed effects, counted in `K`.
    pub absorbed: usize,
}

impl OlsFit {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// `K`: explicit regressors plus absorbed fixed effects.
    pub fn k(&self) -> usize {
        self.x.ncols() + self.absorbed
    }

    pub fn df_resid(&self) -> usize {
        self.n().saturating_sub(self.k())
    }

    pub(crate) fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }
}

/// Least squares of `y` on `x` with optional observation weights.
/// `ref_norms` gives, per column, the scale against which a vanishing
/// column is judged (for example its norm before demeaning); by default
/// the column's own norm. A rank-deficient design is an error naming the
/// first column that adds nothing.
pub fn ols(
    x: DMatrix<f64>,
    y: &DVector<f64>,
    weights: Option<&[f64]>,
    names: &[String],
    ref_norms: Option<&[f64]>,
) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if names.len() != k {
        return Err(Error::Shape(format!("{} names for {k} columns", names.len())));
    }
    if y.len() != n {
        return Err(Error::Shape(format!("{} responses for {n} rows", y.len())));
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::Shape(format!("{} weights for {n} rows", w.len())));
        }
        if w.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("weights must be positive and finite"));
        }
    }
    if k == 0 {
        return Err(Error::invalid("no regressors"));
    }
    if n < k {
        return Err(Error::Collinear(names[n].clone()));
    }
    let sw: Vec<f64> = match weights {
        Some(w) => w.iter().map(|v| v.sqrt()).collect(),
        None => vec![1.0; n],
    };
    let mut xw = x.clone();
    let mut yw = y.clone();
    for i in 0..n {
        xw.row_mut(i).scale_mut(sw[i]);
        yw[i] *= sw[i];
    }
    let qr = xw.clone().qr();
    let r = qr.r();
    for j in 0..k {
        let scale = match ref_norms {
            Some(r) => r[j],
            None => xw.column(j).norm(),
        };
        if r[(j, j)].abs() <= COLLINEARITY_TOL * scale.max(f64::MIN_POSITIVE) || scale == 0.0 {
            return Err(Error::Collinear(names[j].clone()));
        }
    }
    let qty = qr.q().transpose() * &yw;
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Collinear(names[k - 1].clone()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::Collinear(names[k - 1].clone()))?;
    let bread = &r_inv * r_inv.transpose();
    let resid = y - &x * &coef;
    Ok(OlsFit {
        names: names.to_vec(),
        coef,
        x,
        resid,
        weights: weights.map(<[f64]>::to_vec),
        bread,
        absorbed: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|j| format!("x{j}")).collect()
    }

    #[test]
    fn exact_fit() {
        let x = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let y = DVector::from_vec(vec![2.0, 4.0, 6.0, 8.0]);
        let fit = ols(x, &y, None, &names(1), None).unwrap();
        assert!((fit.coef[0] - 2.0).abs() < 1e-14);
        assert!(fit.resid.iter().all(|e| e.abs() < 1e-14));
    }

    #[test]
    fn equal_weights_change_nothing() {
        let x = DMatrix::from_row_slice(5, 2, &[1.0, 0.3, 1.0, 1.2, 1.0, -0.7, 1.0, 2.2, 1.0, 0.1]);
        let y = DVector::from_vec(vec![0.5, 1.9, -0.2, 3.1, 0.4]);
        let a = ols(x.clone(), &y, None, &names(2), None).unwrap();
        let b = ols(x, &y, Some(&[3.0; 5]), &names(2), None).unwrap();
        assert!((a.coef - b.coef).amax() < 1e-13);
    }

    #[test]
    fn weights_match_replicated_rows() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let y = DVector::from_vec(vec![0.0, 2.0, 3.0]);
        let w = ols(x, &y, Some(&[1.0, 2.0, 1.0]), &names(2), None).unwrap();
        let xr = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0]);
        let yr = DVector::from_vec(vec![0.0, 2.0, 2.0, 3.0]);
        let r = ols(xr, &yr, None, &names(2), None).unwrap();
        assert!((w.coef - r.coef).amax() < 1e-13);
    }

    #[test]
    fn collinear_term_is_named() {
        let x = DMatrix::from_row_slice(4, 3, &[
            1.0, 0.0, 1.0, //
            1.0, 1.0, 0.0, //
            1.0, 0.0, 1.0, //
            1.0, 1.0, 0.0,
        ]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let err = ols(x, &y, None, &["const".into(), "a".into(), "b".into()], None)
            .err()
            .unwrap();
        assert!(err.to_string().contains("`b`"), "{err}");
    }
}
