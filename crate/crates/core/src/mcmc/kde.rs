use crate::density::{GridDensity, Properness};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::space::ParamSpace;

use super::Chain;

const MIN_DRAWS: usize = 500;
const KDE_POINTS: usize = 512;

/// Silverman's rule `0.9·min(sd, IQR/1.34)·n^{−1/5}`.
pub fn silverman_bandwidth(xs: &[f64]) -> Result<f64> {
    let n = xs.len();
    if n < 2 {
        return Err(Error::DegenerateChain(format!("{n} draws")));
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = p * (n - 1) as f64;
        let (i, f) = (h.floor() as usize, h.fract());
        sorted[i] + f * (sorted[(i + 1).min(n - 1)] - sorted[i])
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * (n as f64).powf(-0.2);
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::DegenerateChain(format!("draws have spread {sd}")));
    }
    Ok(h)
}

/// Gaussian kernel density estimate with bandwidth `h` at `points`.
pub fn kde_values(xs: &[f64], h: f64, points: &[f64]) -> Vec<f64> {
    let norm = 1.0 / (xs.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    points
        .iter()
        .map(|&p| {
            xs.iter()
                .map(|&x| {
                    let z = (p - x) / h;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect()
}

/// Normalized KDE of one coordinate of a chain on 512 points spanning the
/// draws plus three bandwidths on each side.
pub fn posterior_density_1d(chain: &Chain, axis: usize) -> Result<GridDensity> {
    if chain.len() < MIN_DRAWS {
        return Err(Error::invalid(format!(
            "chain has {} draws, at least {MIN_DRAWS} are needed",
            chain.len()
        )));
    }
    let xs = chain.column(axis);
    let h = silverman_bandwidth(&xs)?;
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let (lo, hi) = (lo - 3.0 * h, hi + 3.0 * h);
    let points: Vec<f64> = (0..KDE_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (KDE_POINTS - 1) as f64)
        .collect();
    let values = kde_values(&xs, h, &points);
    let grid = Grid::new(vec![points])?;
    Ok(GridDensity::from_values(ParamSpace::interval(lo, hi)?, grid, values)?
        .normalize()?
        .with_properness(Properness::Proper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::stream_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn chain_of(xs: Vec<f64>) -> Chain {
        Chain {
            log_post: vec![0.0; xs.len()],
            draws: xs.into_iter().map(|x| vec![x]).collect(),
            acceptance_rate: 1.0,
            seed: 0,
            tuning: Vec::new(),
        }
    }

    #[test]
    fn constant_chain_is_degenerate() {
        let r = posterior_density_1d(&chain_of(vec![1.5; 600]), 0);
        assert!(matches!(r, Err(Error::DegenerateChain(_))));
    }

    #[test]
    fn short_chain_rejected() {
        assert!(posterior_density_1d(&chain_of((0..100).map(f64::from).collect()), 0).is_err());
    }

    #[test]
    fn gaussian_draws_recover_density() {
        let mut rng = stream_rng(11, 0);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        let d = posterior_density_1d(&chain_of(xs), 0).unwrap();
        let sup = d
            .grid()
            .axis(0)
            .iter()
            .zip(d.values())
            .map(|(x, v)| (v - (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()).abs())
            .fold(0.0, f64::max);
        assert!(sup < 0.05, "{sup}");
    }
}
