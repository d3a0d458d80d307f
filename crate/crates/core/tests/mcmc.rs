use refprior_core::constrain::NestOptions;
use refprior_core::mcmc::{log_posterior, propriety_probe, rw_metropolis, MetropolisOptions, ProbeVerdict};
use refprior_core::models::two_piece::{twopiece_jeffreys_value, twopiece_proper_prior_value, twopiece_sample};
use refprior_core::models::{GaussianLocation, TwoPiece, TwoPieceParams};
use refprior_core::{CompactNest, Model};

#[test]
fn five_state_step_target_is_stationary() {
    let p: [f64; 5] = [0.1, 0.25, 0.3, 0.05, 0.3];
    let target = |t: &[f64]| {
        if (0.0..5.0).contains(&t[0]) {
            p[t[0] as usize].ln()
        } else {
            f64::NEG_INFINITY
        }
    };
    let opts = MetropolisOptions {
        n_draws: 1_000_000,
        n_burn: 5_000,
        seed: 17,
        ..Default::default()
    };
    let chain = rw_metropolis(&target, &[2.5], &opts).unwrap();
    let mut counts = [0usize; 5];
    for d in &chain.draws {
        counts[d[0] as usize] += 1;
    }
    let n = chain.len() as f64;
    let tv = 0.5 * counts.iter().zip(&p).map(|(&c, &q)| (c as f64 / n - q).abs()).sum::<f64>();
    assert!(tv < 0.02, "total variation {tv}, counts {counts:?}");
}

#[test]
fn flat_prior_location_posterior_centres_on_the_sample_mean() {
    let m = GaussianLocation::new(1.0).unwrap();
    let data: Vec<f64> = (0..50).map(|i| 0.7 + ((i * 37) % 50) as f64 / 25.0 - 1.0).collect();
    let flat = |_: &[f64]| 0.0;
    let lp = log_posterior(&flat, &m, &data);
    let chain = rw_metropolis(&lp, &[0.0], &MetropolisOptions { seed: 3, ..Default::default() }).unwrap();
    let ybar = data.iter().sum::<f64>() / 50.0;
    // posterior is N(ȳ, 1/50)
    let se = (1.0 / 50.0f64).sqrt() / chain.ess(0).sqrt();
    assert!((chain.mean(0) - ybar).abs() < 3.0 * se, "{} vs {ybar}", chain.mean(0));
}

#[test]
fn two_piece_posterior_location_sits_inside_the_data() {
    let m = TwoPiece::new();
    let data = twopiece_sample(&TwoPieceParams::new(2.0, 2.0, 2.0).unwrap(), 50, 50);
    let prior = |t: &[f64]| twopiece_proper_prior_value(0.3, t).ln();
    let lp = log_posterior(&prior, &m, &data);
    assert!(lp(&[2.0, 2.0, 2.0]).is_finite());
    let opts = MetropolisOptions {
        seed: 8,
        log_axes: vec![1, 2],
        ..Default::default()
    };
    let chain = rw_metropolis(&lp, &[2.0, 2.0, 2.0], &opts).unwrap();
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mu = chain.mean(0);
    assert!(lo < mu && mu < hi, "posterior mean {mu} outside [{lo}, {hi}]");
    assert!((0.0..=1.0).contains(&chain.acceptance_rate));
    assert_eq!(chain.draws.len(), chain.log_post.len());
}

#[test]
fn jeffreys_posterior_is_flagged_improper_and_the_constrained_one_proper() {
    let m = TwoPiece::new();
    let nest = CompactNest::new(m.space().clone());
    let jeffreys = |t: &[f64]| twopiece_jeffreys_value(t).ln();
    let constrained = |t: &[f64]| twopiece_proper_prior_value(0.3, t).ln();
    for k in [5, 15, 50] {
        let data = twopiece_sample(&TwoPieceParams::new(2.0, 2.0, 2.0).unwrap(), k, k as u64);
        let j = propriety_probe(&jeffreys, &m, &data, &nest, NestOptions::default()).unwrap();
        let p = propriety_probe(&constrained, &m, &data, &nest, NestOptions::default()).unwrap();
        assert_eq!(j.verdict, ProbeVerdict::ImproperSuspected, "k = {k}: {:?}", j.test.ratios);
        assert_eq!(p.verdict, ProbeVerdict::Proper, "k = {k}: {:?}", p.test.ratios);
    }
}
