//! The variance estimators on a tiny regression where every number can be
//! checked by hand.
//!
//!     cargo run --example variance_estimators

use nalgebra::{DMatrix, DVector};
use normlens::econometrics::{
    ols, std_errors, vcov_cluster, vcov_hc1, vcov_newey_west, vcov_ols, vcov_twoway,
};

fn main() -> normlens::Result<()> {
    let y = DVector::from_vec(vec![1.0, 4.0, 2.0, 7.0, 3.0, 1.0]);
    let x = DMatrix::from_fn(6, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
    let names = vec!["Constant".to_string(), "t".to_string()];
    let fit = ols(x, &y, None, &names, None)?;
    println!("coefficients {:?}", fit.coef.as_slice());

    let day = [0, 0, 0, 1, 1, 1];
    let user = [0, 1, 2, 0, 1, 2];
    let show = |label: &str, v: &DMatrix<f64>| {
        let se = std_errors(v);
        println!("{label:<24}{:>10.4}{:>10.4}", se[0], se[1]);
    };
    show("classical", &vcov_ols(&fit)?);
    show("heteroskedasticity", &vcov_hc1(&fit)?);
    show("cluster on day", &vcov_cluster(&fit, &day)?);
    show("cluster on user", &vcov_cluster(&fit, &user)?);
    let (two, repaired) = vcov_twoway(&fit, &day, &user)?;
    show(if repaired { "two-way (repaired)" } else { "two-way" }, &two);
    show("Newey-West lag 0", &vcov_newey_west(&fit, 0)?);
    show("Newey-West lag 2", &vcov_newey_west(&fit, 2)?);
    Ok(())
}
