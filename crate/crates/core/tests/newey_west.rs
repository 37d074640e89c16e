use nalgebra::{DMatrix, DVector};
use normlens::econometrics::{ols, std_errors, vcov_newey_west, vcov_ols};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const T: usize = 200;

fn series(rng: &mut ChaCha8Rng, rho: f64) -> Vec<f64> {
    let n = Normal::new(0.0, 1.0).unwrap();
    let mut prev = 0.0;
    (0..T + 50)
        .map(|_| {
            prev = rho * prev + n.sample(rng);
            prev
        })
        .skip(50)
        .collect()
}

fn fit_trend(y: &[f64]) -> normlens::econometrics::OlsFit {
    let x = DMatrix::from_fn(T, 2, |i, j| if j == 0 { 1.0 } else { i as f64 / T as f64 });
    ols(x, &DVector::from_row_slice(y), None, &["Constant".into(), "t".into()], None).unwrap()
}

#[test]
fn white_noise_hac_matches_sampling_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let reps = 500;
    let (mut coefs, mut vars) = (Vec::with_capacity(reps), Vec::with_capacity(reps));
    for _ in 0..reps {
        let f = fit_trend(&series(&mut rng, 0.0));
        coefs.push(f.coef[1]);
        vars.push(vcov_newey_west(&f, 4).unwrap()[(1, 1)]);
    }
    let mean = coefs.iter().sum::<f64>() / reps as f64;
    let mc = coefs.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    let hac = vars.iter().sum::<f64>() / reps as f64;
    assert!((hac / mc - 1.0).abs() < 0.10, "mean HAC variance {hac} vs Monte Carlo {mc}");
}

#[test]
fn autocorrelated_errors_widen_hac_over_classical() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let reps = 200;
    let wider = (0..reps)
        .filter(|_| {
            let f = fit_trend(&series(&mut rng, 0.5));
            std_errors(&vcov_newey_west(&f, 4).unwrap())[0] > std_errors(&vcov_ols(&f).unwrap())[0]
        })
        .count();
    assert!(wider as f64 >= 0.95 * reps as f64, "HAC wider in {wider}/{reps}");
}
