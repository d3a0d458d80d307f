//! The two-piece location-scale model with a standard Gaussian kernel:
//!
//! ```text
//! ℓ(y|μ,σ₁,σ₂) = 2/(σ₁+σ₂) · [ f((y−μ)/σ₁) 1{y<μ} + f((y−μ)/σ₂) 1{y>μ} ]
//! ```
//!
//! Its Fisher matrix has the structure
//!
//! ```text
//!        ⎡ α₁/(σ₁σ₂)     −2α₃/(σ₁S)            2α₃/(σ₂S)          ⎤
//! I(θ) = ⎢               α₂/(σ₁S)+σ₂/(σ₁S²)    −1/S²              ⎥ ,  S = σ₁+σ₂,
//!        ⎣ sym.                                α₂/(σ₂S)+σ₁/(σ₂S²) ⎦
//! ```
//!
//! whence `J ∝ 1/(σ₁σ₂(σ₁+σ₂))`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::density::{GridDensity, Properness};
use crate::error::{Error, Result};
use crate::fisher::{fisher_info, FisherMethod};
use crate::grid::Grid;
use crate::model::{Model, SimRng};
use crate::space::{AlphaParams, Edge, ParamSpace};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `(α₁, α₂, α₃)` for the Gaussian kernel.
pub const FISHER_CONSTANTS: [f64; 3] = [1.0, 2.0, 0.797_884_560_802_865_4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPieceParams {
    pub mu: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl TwoPieceParams {
    pub fn new(mu: f64, sigma1: f64, sigma2: f64) -> Result<Self> {
        if !mu.is_finite() || !(sigma1 > 0.0 && sigma1.is_finite()) || !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::invalid(format!(
                "two-piece parameters need finite mu and positive scales, got ({mu}, {sigma1}, {sigma2})"
            )));
        }
        Ok(TwoPieceParams { mu, sigma1, sigma2 })
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.mu, self.sigma1, self.sigma2]
    }
}

#[derive(Debug, Clone)]
pub struct TwoPiece {
    space: ParamSpace,
}

impl TwoPiece {
    pub fn new() -> Self {
        TwoPiece {
            space: ParamSpace::new(vec![f64::NEG_INFINITY, 0.0, 0.0], vec![f64::INFINITY; 3])
                .expect("static bounds")
                .with_power_law(Edge::lower(1))
                .with_power_law(Edge::lower(2)),
        }
    }
}

impl Default for TwoPiece {
    fn default() -> Self {
        Self::new()
    }
}

pub fn twopiece_loglik(y: f64, p: &TwoPieceParams) -> f64 {
    log_density(y, p.mu, p.sigma1, p.sigma2)
}

fn log_density(y: f64, mu: f64, s1: f64, s2: f64) -> f64 {
    if s1 <= 0.0 || s2 <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let s = if y < mu { s1 } else { s2 };
    let z = (y - mu) / s;
    std::f64::consts::LN_2 - (s1 + s2).ln() - HALF_LN_2PI - 0.5 * z * z
}

impl Model for TwoPiece {
    fn name(&self) -> &str {
        "two_piece"
    }

    fn space(&self) -> &ParamSpace {
        &self.space
    }

    fn log_likelihood(&self, y: f64, theta: &[f64]) -> f64 {
        log_density(y, theta[0], theta[1], theta[2])
    }

    fn sample(&self, theta: &[f64], rng: &mut SimRng) -> f64 {
        let (mu, s1, s2) = (theta[0], theta[1], theta[2]);
        let left = rng.random::<f64>() < s1 / (s1 + s2);
        let z: f64 = StandardNormal.sample(rng);
        if left {
            mu - s1 * z.abs()
        } else {
            mu + s2 * z.abs()
        }
    }

    fn closed_form_fisher(&self, theta: &[f64]) -> Option<DMatrix<f64>> {
        Some(structured_fisher(FISHER_CONSTANTS, theta[1], theta[2]))
    }
}

/// Fisher matrix of the structural pattern for given constants.
pub fn structured_fisher(c: [f64; 3], s1: f64, s2: f64) -> DMatrix<f64> {
    let [a1, a2, a3] = c;
    let s = s1 + s2;
    let m01 = -2.0 * a3 / (s1 * s);
    let m02 = 2.0 * a3 / (s2 * s);
    let m12 = -1.0 / (s * s);
    DMatrix::from_row_slice(
        3,
        3,
        &[
            a1 / (s1 * s2),
            m01,
            m02,
            m01,
            a2 / (s1 * s) + s2 / (s1 * s * s),
            m12,
            m02,
            m12,
            a2 / (s2 * s) + s1 / (s2 * s * s),
        ],
    )
}

/// `n` draws from the model at `p`.
pub fn twopiece_sample(p: &TwoPieceParams, n: usize, seed: u64) -> Vec<f64> {
    let m = TwoPiece::new();
    let theta = p.to_vec();
    let mut rng = crate::model::stream_rng(seed, 0);
    (0..n).map(|_| m.sample(&theta, &mut rng)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct FisherConstants {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub std_errors: [f64; 3],
    /// The `(σ₁,σ₂)` entry, which the pattern fixes at `−1/S²`.
    pub cross_scale_entry: f64,
    pub cross_scale_std_error: f64,
}

impl FisherConstants {
    pub fn values(&self) -> [f64; 3] {
        [self.alpha1, self.alpha2, self.alpha3]
    }
}

/// Extracts `(α₁, α₂, α₃)` from a Monte Carlo Fisher matrix at `(0, 1, 1)`.
pub fn twopiece_fisher_constants(mc_samples: usize, seed: u64) -> Result<FisherConstants> {
    let m = TwoPiece::new();
    let est = fisher_info(&m, &[0.0, 1.0, 1.0], FisherMethod::McScore, mc_samples, seed)?;
    let (i, se) = (&est.matrix, &est.std_error);
    // at σ₁ = σ₂ = 1: I00 = α₁, I02 − I01 = 2α₃, I11 + I22 = α₂ + 1/2
    let alpha1 = i[(0, 0)];
    let alpha3 = 0.5 * (i[(0, 2)] - i[(0, 1)]);
    let alpha2 = i[(1, 1)] + i[(2, 2)] - 0.5;
    let std_errors = [
        se[(0, 0)],
        (se[(1, 1)].powi(2) + se[(2, 2)].powi(2)).sqrt(),
        0.5 * (se[(0, 1)].powi(2) + se[(0, 2)].powi(2)).sqrt(),
    ];
    for (name, v) in [("alpha1", alpha1), ("alpha2", alpha2), ("alpha3", alpha3)] {
        if !(v > 0.0) {
            return Err(Error::StructureMismatch(format!("{name} extracted as {v}")));
        }
    }
    Ok(FisherConstants {
        alpha1,
        alpha2,
        alpha3,
        std_errors,
        cross_scale_entry: i[(1, 2)],
        cross_scale_std_error: se[(1, 2)],
    })
}

/// The constants from one-dimensional quadrature of their defining
/// integrals over the half-normal kernel:
/// `α₁ = 2∫z²f`, `α₂ = 2∫z⁴f − 1`, `α₃ = ∫z³f`, all over `(0, ∞)`.
pub fn twopiece_fisher_constants_quadrature() -> [f64; 3] {
    let moment = |p: i32| {
        let (n, hi) = (20_000, 40.0);
        let h = hi / n as f64;
        let f = |z: f64| z.powi(p) * (-0.5 * z * z - HALF_LN_2PI).exp();
        // composite Simpson
        let mut acc = f(0.0) + f(hi);
        for k in 1..n {
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
        }
        acc * h / 3.0
    };
    [2.0 * moment(2), 2.0 * moment(4) - 1.0, moment(3)]
}

/// Jeffreys density in the plotting normalization `J(1,1,1) = 2`.
pub fn twopiece_jeffreys_value(theta: &[f64]) -> f64 {
    let (s1, s2) = (theta[1], theta[2]);
    4.0 / (s1 * s2 * (s1 + s2))
}

pub fn twopiece_jeffreys(space: &ParamSpace, grid: &Grid) -> Result<GridDensity> {
    check_grid(grid)?;
    let vals = (0..grid.len()).map(|i| twopiece_jeffreys_value(&grid.node(i))).collect();
    Ok(GridDensity::from_values(space.clone(), grid.clone(), vals)?.with_properness(Properness::Improper))
}

/// `γ = ε/α` indexing the properized two-piece priors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPieceGamma {
    gamma: f64,
    alpha: AlphaParams,
}

impl TwoPieceGamma {
    pub fn new(gamma: f64, alpha: AlphaParams) -> Result<Self> {
        let upper = 1.0 / (1.0 + alpha.value());
        if !(gamma > 0.0 && gamma < upper) {
            return Err(Error::invalid(format!(
                "gamma must lie in (0, {upper:.6}) for alpha = {}, got {gamma}",
                alpha.value()
            )));
        }
        Ok(TwoPieceGamma { gamma, alpha })
    }

    pub fn from_epsilon(epsilon: f64, alpha: AlphaParams) -> Result<Self> {
        Self::new(epsilon / alpha.value(), alpha)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> AlphaParams {
        self.alpha
    }

    pub fn epsilon(&self) -> f64 {
        self.gamma * self.alpha.value()
    }
}

/// `π*_γ(μ,σ₁,σ₂) = (σ₁σ₂)^{γ−1}/(σ₁+σ₂)`.
pub fn twopiece_proper_prior_value(gamma: f64, theta: &[f64]) -> f64 {
    let (s1, s2) = (theta[1], theta[2]);
    (s1 * s2).powf(gamma - 1.0) / (s1 + s2)
}

/// `π*_γ` on a grid. Flagged improper: it is flat in μ and, jointly in
/// `(σ₁,σ₂)`, homogeneous of degree `2γ−3`; integrability holds along each
/// scale axis separately.
pub fn twopiece_proper_prior(gamma: &TwoPieceGamma, space: &ParamSpace, grid: &Grid) -> Result<GridDensity> {
    check_grid(grid)?;
    let g = gamma.gamma();
    let vals = (0..grid.len())
        .map(|i| twopiece_proper_prior_value(g, &grid.node(i)))
        .collect();
    Ok(GridDensity::from_values(space.clone(), grid.clone(), vals)?.with_properness(Properness::Improper))
}

fn check_grid(grid: &Grid) -> Result<()> {
    if grid.dim() != 3 {
        return Err(Error::GridMismatch(format!("two-piece grids are 3-D, got {}", grid.dim())));
    }
    if grid.axis(1)[0] <= 0.0 || grid.axis(2)[0] <= 0.0 {
        return Err(Error::invalid("two-piece scale axes must be positive"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loglik_at_mode_and_symmetric_case() {
        let p = TwoPieceParams::new(0.3, 1.0, 1.0).unwrap();
        assert!((twopiece_loglik(0.3, &p) + HALF_LN_2PI).abs() < 1e-15);
        let p = TwoPieceParams::new(1.0, 2.5, 2.5).unwrap();
        for y in [-3.0, 0.0, 1.0, 4.2] {
            let z: f64 = (y - 1.0) / 2.5;
            let gauss = -HALF_LN_2PI - 2.5f64.ln() - 0.5 * z * z;
            assert!((twopiece_loglik(y, &p) - gauss).abs() < 1e-13);
        }
    }

    #[test]
    fn left_branch_ignores_sigma2_beyond_normalizer() {
        let a = TwoPieceParams::new(0.0, 1.0, 2.0).unwrap();
        let b = TwoPieceParams::new(0.0, 1.0, 5.0).unwrap();
        for y in [-0.1, -1.0, -3.0] {
            let diff = twopiece_loglik(y, &a) - twopiece_loglik(y, &b);
            assert!((diff - (6.0f64 / 3.0).ln()).abs() < 1e-13);
        }
    }

    #[test]
    fn likelihood_integrates_to_one() {
        let (n, lo, hi) = (200_000, -40.0, 60.0);
        let h = (hi - lo) / n as f64;
        let p = TwoPieceParams::new(1.0, 2.0, 5.0).unwrap();
        let total: f64 = (0..n).map(|i| twopiece_loglik(lo + (i as f64 + 0.5) * h, &p).exp()).sum::<f64>() * h;
        assert!((total - 1.0).abs() < 1e-8);
    }

    #[test]
    fn jeffreys_plot_normalization() {
        assert_eq!(twopiece_jeffreys_value(&[0.0, 1.0, 1.0]), 2.0);
        assert_eq!(twopiece_jeffreys_value(&[5.0, 1.0, 1.0]), 2.0);
        let r = twopiece_jeffreys_value(&[0.0, 1.0, 1.0]) / twopiece_jeffreys_value(&[0.0, 2.0, 2.0]);
        assert!((r - 8.0).abs() < 1e-14);
    }

    #[test]
    fn quadrature_constants() {
        let q = twopiece_fisher_constants_quadrature();
        for (a, b) in q.iter().zip(FISHER_CONSTANTS) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn determinant_gives_jeffreys_shape() {
        for (s1, s2) in [(1.0, 1.0), (0.3, 2.0), (4.0, 0.5)] {
            let det = structured_fisher(FISHER_CONSTANTS, s1, s2).determinant();
            let j = det.sqrt() * s1 * s2 * (s1 + s2);
            let j0 = structured_fisher(FISHER_CONSTANTS, 1.0, 1.0).determinant().sqrt() * 2.0;
            assert!((j / j0 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_range() {
        let a = AlphaParams::new(0.5).unwrap();
        assert!(TwoPieceGamma::new(0.5, a).is_ok());
        assert!(TwoPieceGamma::new(2.0 / 3.0, a).is_err());
        assert!(TwoPieceGamma::new(0.0, a).is_err());
        let g = TwoPieceGamma::from_epsilon(0.15, a).unwrap();
        assert!((g.gamma() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn proper_prior_sigma2_tail_exponent() {
        for gamma in [0.1, 0.3, 0.6] {
            let f = |s2: f64| twopiece_proper_prior_value(gamma, &[0.0, 1.0, s2]).ln();
            let slope = (f(1e9) - f(1e8)) / 10f64.ln();
            assert!((slope - (gamma - 2.0)).abs() < 1e-6);
        }
    }
}
