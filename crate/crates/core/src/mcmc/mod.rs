//! Posterior sampling by adaptive component-wise random-walk Metropolis,
//! kernel density estimates of the draws, and numerical propriety probes.

mod kde;
mod probe;

pub use kde::{kde_values, posterior_density_1d, silverman_bandwidth};
pub use probe::{propriety_probe, ProbeResult, ProbeVerdict};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{stream_rng, Model};

/// Unnormalized log posterior `Σ ln ℓ(y_i|θ) + ln π(θ)`, equal to `−∞`
/// outside the parameter space or where the prior vanishes.
pub fn log_posterior<'a>(
    log_prior: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    model: &'a dyn Model,
    data: &'a [f64],
) -> impl Fn(&[f64]) -> f64 + Sync + 'a {
    move |theta: &[f64]| {
        if !model.space().contains(theta) {
            return f64::NEG_INFINITY;
        }
        let lp = log_prior(theta);
        if lp == f64::NEG_INFINITY || lp.is_nan() {
            return f64::NEG_INFINITY;
        }
        lp + model.dataset_log_likelihood(data, theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetropolisOptions {
    pub n_draws: usize,
    pub n_burn: usize,
    pub seed: u64,
    pub adapt: bool,
    /// Axes sampled as `ln θ`, with the Jacobian added to the target.
    pub log_axes: Vec<usize>,
    pub initial_step: f64,
}

impl Default for MetropolisOptions {
    fn default() -> Self {
        MetropolisOptions {
            n_draws: 20_000,
            n_burn: 5_000,
            seed: 0,
            adapt: true,
            log_axes: Vec::new(),
            initial_step: 0.5,
        }
    }
}

/// Acceptance rate the step sizes are tuned toward during burn-in.
pub const TARGET_ACCEPTANCE: f64 = 0.3;
/// Consecutive sweeps without any accepted move that abort the chain.
pub const STUCK_SWEEPS: usize = 1000;
const TUNING_RECORD_EVERY: usize = 50;

#[derive(Debug, Clone, Serialize)]
pub struct Chain {
    pub draws: Vec<Vec<f64>>,
    pub log_post: Vec<f64>,
    /// Fraction of accepted component moves after burn-in.
    pub acceptance_rate: f64,
    pub seed: u64,
    /// Step sizes (on the sampling scale) every few burn-in sweeps, ending
    /// with the frozen values.
    pub tuning: Vec<Vec<f64>>,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn column(&self, axis: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d[axis]).collect()
    }

    pub fn mean(&self, axis: usize) -> f64 {
        self.draws.iter().map(|d| d[axis]).sum::<f64>() / self.len() as f64
    }

    /// Effective sample size of one coordinate.
    pub fn ess(&self, axis: usize) -> f64 {
        effective_sample_size(&self.column(axis))
    }
}

/// Component-wise Gaussian random-walk Metropolis.
///
/// With `adapt`, the log step size of each component moves by
/// `t^{−0.6}·(accepted − 0.3)` after its proposal in burn-in sweep `t`, and
/// is frozen afterwards. Draws are recorded on the original scale.
pub fn rw_metropolis(log_post: &dyn Fn(&[f64]) -> f64, init: &[f64], opts: &MetropolisOptions) -> Result<Chain> {
    let d = init.len();
    if d == 0 {
        return Err(Error::invalid("empty initial point"));
    }
    if let Some(&a) = opts.log_axes.iter().find(|&&a| a >= d || !(init[a] > 0.0)) {
        return Err(Error::invalid(format!("log-scale axis {a} needs a positive initial coordinate")));
    }
    if !(opts.initial_step > 0.0) {
        return Err(Error::invalid("initial step must be positive"));
    }
    let is_log: Vec<bool> = (0..d).map(|a| opts.log_axes.contains(&a)).collect();
    let to_theta = |z: &[f64], out: &mut [f64]| {
        for a in 0..d {
            out[a] = if is_log[a] { z[a].exp() } else { z[a] };
        }
    };
    // target on the sampling scale, plus the value on the original scale
    let target = |z: &[f64], theta: &mut [f64]| -> (f64, f64) {
        to_theta(z, theta);
        let lp = log_post(theta);
        let jac: f64 = (0..d).filter(|&a| is_log[a]).map(|a| z[a]).sum();
        (lp + jac, lp)
    };

    let mut z: Vec<f64> = (0..d).map(|a| if is_log[a] { init[a].ln() } else { init[a] }).collect();
    let mut theta = vec![0.0; d];
    let (mut cur, mut cur_lp) = target(&z, &mut theta);
    if !cur.is_finite() {
        return Err(Error::non_finite("log posterior at the initial point", init));
    }
    let mut log_step = vec![opts.initial_step.ln(); d];
    let mut rng = stream_rng(opts.seed, 0);
    let mut draws = Vec::with_capacity(opts.n_draws);
    let mut log_posts = Vec::with_capacity(opts.n_draws);
    let mut tuning = Vec::new();
    let mut accepted_after_burn = 0usize;
    let mut stuck = 0usize;

    for sweep in 0..opts.n_burn + opts.n_draws {
        let burning = sweep < opts.n_burn;
        let mut any = false;
        for c in 0..d {
            let old = z[c];
            let eps: f64 = rng.sample(StandardNormal);
            z[c] = old + log_step[c].exp() * eps;
            let (prop, prop_lp) = target(&z, &mut theta);
            let u: f64 = rng.random();
            let accept = prop.is_finite() && u.ln() < prop - cur;
            if accept {
                cur = prop;
                cur_lp = prop_lp;
                any = true;
                if !burning {
                    accepted_after_burn += 1;
                }
            } else {
                z[c] = old;
            }
            if burning && opts.adapt {
                let gain = ((sweep + 1) as f64).powf(-0.6);
                log_step[c] += gain * (f64::from(u8::from(accept)) - TARGET_ACCEPTANCE);
            }
        }
        stuck = if any { 0 } else { stuck + 1 };
        if stuck >= STUCK_SWEEPS {
            return Err(Error::StuckChain(stuck));
        }
        if burning && sweep % TUNING_RECORD_EVERY == 0 {
            tuning.push(log_step.iter().map(|s| s.exp()).collect());
        }
        if !burning {
            to_theta(&z, &mut theta);
            draws.push(theta.clone());
            log_posts.push(cur_lp);
        }
    }
    tuning.push(log_step.iter().map(|s| s.exp()).collect());
    let proposals = (opts.n_draws * d).max(1);
    Ok(Chain {
        draws,
        log_post: log_posts,
        acceptance_rate: accepted_after_burn as f64 / proposals as f64,
        seed: opts.seed,
        tuning,
    })
}

/// ESS from autocorrelations summed in adjacent pairs until a pair sum
/// turns negative (initial positive sequence).
pub fn effective_sample_size(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return n as f64;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = xs.iter().map(|x| x - mean).collect();
    let var = c.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if var == 0.0 {
        return n as f64;
    }
    let rho = |lag: usize| -> f64 { c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / (n as f64 * var) };
    let mut tau = -1.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = rho(lag) + rho(lag + 1);
        if pair < 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    n as f64 / tau.max(1.0 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_normal(t: &[f64]) -> f64 {
        -0.5 * t[0] * t[0]
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let opts = MetropolisOptions {
            n_draws: 500,
            n_burn: 100,
            seed: 9,
            ..Default::default()
        };
        let a = rw_metropolis(&std_normal, &[0.3], &opts).unwrap();
        let b = rw_metropolis(&std_normal, &[0.3], &opts).unwrap();
        assert_eq!(a.draws, b.draws);
        assert_eq!(a.log_post, b.log_post);
        assert_eq!(a.draws.len(), a.log_post.len());
    }

    #[test]
    fn standard_normal_moments() {
        let opts = MetropolisOptions {
            seed: 3,
            ..Default::default()
        };
        let ch = rw_metropolis(&std_normal, &[2.0], &opts).unwrap();
        let ess = ch.ess(0);
        let m = ch.mean(0);
        let v = ch.draws.iter().map(|d| (d[0] - m).powi(2)).sum::<f64>() / ch.len() as f64;
        assert!(m.abs() < 3.0 / ess.sqrt(), "mean {m} ess {ess}");
        assert!((v - 1.0).abs() < 0.1, "var {v}");
        assert!((ch.acceptance_rate - TARGET_ACCEPTANCE).abs() < 0.1);
    }

    #[test]
    fn log_axis_targets_original_density() {
        // Exp(1) sampled through ln θ
        let opts = MetropolisOptions {
            seed: 5,
            log_axes: vec![0],
            ..Default::default()
        };
        let lp = |t: &[f64]| if t[0] > 0.0 { -t[0] } else { f64::NEG_INFINITY };
        let ch = rw_metropolis(&lp, &[1.0], &opts).unwrap();
        assert!((ch.mean(0) - 1.0).abs() < 4.0 / ch.ess(0).sqrt());
    }

    #[test]
    fn stuck_chain_and_bad_init() {
        let lp = |t: &[f64]| if t[0] == 0.0 { 0.0 } else { f64::NEG_INFINITY };
        let r = rw_metropolis(&lp, &[0.0], &MetropolisOptions::default());
        assert!(matches!(r, Err(Error::StuckChain(STUCK_SWEEPS))));
        assert!(rw_metropolis(&|_| f64::NEG_INFINITY, &[0.0], &MetropolisOptions::default()).is_err());
    }

    #[test]
    fn ess_of_independent_draws() {
        let mut rng = stream_rng(1, 0);
        let xs: Vec<f64> = (0..4000).map(|_| rng.sample(StandardNormal)).collect();
        let ess = effective_sample_size(&xs);
        assert!(ess > 3000.0 && ess < 5500.0, "{ess}");
    }
}
