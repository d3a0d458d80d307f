use refprior_core::functional::{density_from_fn, mutual_info_mc, McParams};
use refprior_core::models::GaussianLocation;
use refprior_core::{make_grid, AlphaParams, GridDensity, ParamSpace};

fn uniform_prior() -> GridDensity {
    let s = ParamSpace::interval(-1.0, 1.0).unwrap();
    let g = make_grid(&s, None, 201).unwrap();
    density_from_fn(&s, &g, |_| 1.0).unwrap().normalize().unwrap()
}

fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    (0..=n)
        .map(|i| h / 3.0 * if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 })
        .collect()
}

/// `I_{D_α}` of a unit-variance Gaussian location model with the uniform
/// prior on `[−1, 1]`. The sample mean is sufficient, so the divergence
/// reduces to `(E[x^α] − 1)/(α(α−1))` with
/// `E[x^α] = ∫π(θ) ∫ φ_k(ȳ−θ)^{1−α} m(ȳ)^α dȳ dθ`.
fn oracle(k: usize, alpha: f64) -> f64 {
    let sd = 1.0 / (k as f64).sqrt();
    let phi = |z: f64| (-0.5 * (z / sd).powi(2)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
    let nt = 800;
    let ht = 2.0 / nt as f64;
    let wt = simpson_weights(nt, ht);
    let thetas: Vec<f64> = (0..=nt).map(|i| -1.0 + i as f64 * ht).collect();
    let (ylo, yhi) = (-1.0 - 10.0 * sd, 1.0 + 10.0 * sd);
    let ny = 2400;
    let hy = (yhi - ylo) / ny as f64;
    let wy = simpson_weights(ny, hy);
    let mut expect = 0.0;
    for (iy, w_y) in wy.iter().enumerate() {
        let y = ylo + iy as f64 * hy;
        let m: f64 = thetas.iter().zip(&wt).map(|(t, w)| 0.5 * w * phi(y - t)).sum();
        let inner: f64 = thetas.iter().zip(&wt).map(|(t, w)| 0.5 * w * phi(y - t).powf(1.0 - alpha)).sum();
        expect += w_y * inner * m.powf(alpha);
    }
    (expect - 1.0) / (alpha * (alpha - 1.0))
}

#[test]
fn k10_value_matches_the_double_integral() {
    let m = GaussianLocation::new(1.0).unwrap();
    let alpha = AlphaParams::new(0.5).unwrap();
    let est = mutual_info_mc(&m, &uniform_prior(), 10, alpha, McParams { seed: 4, ..Default::default() }).unwrap();
    let exact = oracle(10, 0.5);
    assert!(est.value > 0.0);
    assert!(
        (est.value - exact).abs() < 3.0 * est.std_error,
        "estimate {} ± {} vs oracle {exact}",
        est.value,
        est.std_error
    );
}

#[test]
fn doubling_outer_draws_halves_the_variance() {
    let m = GaussianLocation::new(1.0).unwrap();
    let alpha = AlphaParams::new(0.5).unwrap();
    let prior = uniform_prior();
    let var = |n_outer| {
        let mc = McParams { n_outer, n_inner: 50, seed: 6 };
        mutual_info_mc(&m, &prior, 10, alpha, mc).unwrap().std_error.powi(2)
    };
    let ratio = var(1000) / var(2000);
    assert!((1.6..2.5).contains(&ratio), "variance ratio {ratio}");
}
