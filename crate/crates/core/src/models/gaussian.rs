use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{Model, SimRng};
use crate::space::{Edge, ParamSpace};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `N(θ, σ²)` with known σ.
#[derive(Debug, Clone)]
pub struct GaussianLocation {
    sigma: f64,
    space: ParamSpace,
}

impl GaussianLocation {
    pub fn new(sigma: f64) -> Result<Self> {
        check_positive("sigma", sigma)?;
        Ok(GaussianLocation {
            sigma,
            space: ParamSpace::interval(f64::NEG_INFINITY, f64::INFINITY)?,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl Model for GaussianLocation {
    fn name(&self) -> &str {
        "gaussian_location"
    }

    fn space(&self) -> &ParamSpace {
        &self.space
    }

    fn log_likelihood(&self, y: f64, theta: &[f64]) -> f64 {
        let z = (y - theta[0]) / self.sigma;
        -HALF_LN_2PI - self.sigma.ln() - 0.5 * z * z
    }

    fn dataset_log_likelihood(&self, ys: &[f64], theta: &[f64]) -> f64 {
        let inv_var = 1.0 / (self.sigma * self.sigma);
        let ss: f64 = ys.iter().map(|y| (y - theta[0]) * (y - theta[0])).sum();
        -(ys.len() as f64) * (HALF_LN_2PI + self.sigma.ln()) - 0.5 * ss * inv_var
    }

    fn sample(&self, theta: &[f64], rng: &mut SimRng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        theta[0] + self.sigma * z
    }

    fn closed_form_fisher(&self, _theta: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(1, 1, 1.0 / (self.sigma * self.sigma)))
    }
}

/// `N(μ, σ²)` with known μ and parameter σ > 0.
#[derive(Debug, Clone)]
pub struct GaussianScale {
    mu: f64,
    space: ParamSpace,
}

impl GaussianScale {
    pub fn new(mu: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::invalid("mu must be finite"));
        }
        Ok(GaussianScale {
            mu,
            space: ParamSpace::interval(0.0, f64::INFINITY)?.with_power_law(Edge::lower(0)),
        })
    }
}

impl Model for GaussianScale {
    fn name(&self) -> &str {
        "gaussian_scale"
    }

    fn space(&self) -> &ParamSpace {
        &self.space
    }

    fn log_likelihood(&self, y: f64, theta: &[f64]) -> f64 {
        let s = theta[0];
        if s <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let z = (y - self.mu) / s;
        -HALF_LN_2PI - s.ln() - 0.5 * z * z
    }

    fn sample(&self, theta: &[f64], rng: &mut SimRng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mu + theta[0] * z
    }

    fn closed_form_fisher(&self, theta: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(1, 1, 2.0 / (theta[0] * theta[0])))
    }
}

/// `N(μ, σ²)` with parameter `(μ, σ)`. Its Fisher matrix is diagonal, so
/// the two coordinates form independent blocks.
#[derive(Debug, Clone)]
pub struct GaussianLocationScale {
    space: ParamSpace,
}

impl GaussianLocationScale {
    pub fn new() -> Self {
        GaussianLocationScale {
            space: ParamSpace::new(vec![f64::NEG_INFINITY, 0.0], vec![f64::INFINITY; 2])
                .expect("static bounds")
                .with_power_law(Edge::lower(1)),
        }
    }
}

impl Default for GaussianLocationScale {
    fn default() -> Self {
        Self::new()
    }
}

impl Model for GaussianLocationScale {
    fn name(&self) -> &str {
        "gaussian_location_scale"
    }

    fn space(&self) -> &ParamSpace {
        &self.space
    }

    fn log_likelihood(&self, y: f64, theta: &[f64]) -> f64 {
        let s = theta[1];
        if s <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let z = (y - theta[0]) / s;
        -HALF_LN_2PI - s.ln() - 0.5 * z * z
    }

    fn sample(&self, theta: &[f64], rng: &mut SimRng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        theta[0] + theta[1] * z
    }

    fn closed_form_fisher(&self, theta: &[f64]) -> Option<DMatrix<f64>> {
        let v = 1.0 / (theta[1] * theta[1]);
        Some(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![v, 2.0 * v])))
    }
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be a positive finite number, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * f(lo + i as f64 * h)
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn likelihoods_integrate_to_one() {
        let loc = GaussianLocation::new(1.5).unwrap();
        let sc = GaussianScale::new(0.3).unwrap();
        let ls = GaussianLocationScale::new();
        let a = integrate(|y| loc.log_likelihood(y, &[0.7]).exp(), -20.0, 20.0, 20000);
        let b = integrate(|y| sc.log_likelihood(y, &[2.0]).exp(), -30.0, 30.0, 20000);
        let c = integrate(|y| ls.log_likelihood(y, &[-1.0, 0.5]).exp(), -10.0, 10.0, 20000);
        for v in [a, b, c] {
            assert!((v - 1.0).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn dataset_override_matches_sum() {
        let loc = GaussianLocation::new(0.8).unwrap();
        let ys = [0.1, -0.4, 2.3, 1.1];
        let direct: f64 = ys.iter().map(|&y| loc.log_likelihood(y, &[0.3])).sum();
        assert!((loc.dataset_log_likelihood(&ys, &[0.3]) - direct).abs() < 1e-12);
    }
}
