//! The asymptotic mutual-information functional
//! `l(π) = C_α ∫ π^{1+α} J^{−α}` and Monte Carlo estimates of the finite-k
//! `D_α` mutual information it is the limit of.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::density::GridDensity;
use crate::error::{Error, Result};
use crate::grid::{log_sum_exp, log_trapezoid, Grid};
use crate::model::{stream_rng, Model, SimRng};
use crate::space::AlphaParams;

/// `C_α = (2π)^{dα/2} (1−α)^{−d/2} / (α(α−1))`, negative for α in (0,1).
pub fn c_alpha(alpha: AlphaParams, d: usize) -> f64 {
    let a = alpha.value();
    let d = d as f64;
    (2.0 * std::f64::consts::PI).powf(d * a / 2.0) * (1.0 - a).powf(-d / 2.0) / (a * (a - 1.0))
}

/// `f_α(x) = (x^α − αx − (1−α)) / (α(α−1))`.
pub fn f_alpha(alpha: AlphaParams, x: f64) -> f64 {
    if x == 0.0 {
        return 1.0 / alpha.value();
    }
    f_alpha_log(alpha, x.ln())
}

/// `f_α(e^r)`, accurate for `r` near zero.
pub fn f_alpha_log(alpha: AlphaParams, r: f64) -> f64 {
    let a = alpha.value();
    if r == f64::NEG_INFINITY {
        return 1.0 / a;
    }
    if r.abs() < 1e-4 {
        // second-order Taylor expansion around x = 1: f ≈ r²/2 · (1 + r(1+α)/3)
        return 0.5 * r * r * (1.0 + r * (1.0 + a) / 3.0);
    }
    ((a * r).exp_m1() - a * r.exp_m1()) / (a * (a - 1.0))
}

/// `f_α(x) + (x−1)/(α−1) = (x^α − 1)/(α(α−1))` at `x = e^r`.
///
/// Under `y ~ ℓ` the ratio `x = p(y)/ℓ(y)` of a normalized marginal has mean
/// one, so this has the same expectation as `f_α(x)`. It drops the `−αx`
/// term, whose rare huge values otherwise dominate the sample mean.
pub fn f_alpha_centered_log(alpha: AlphaParams, r: f64) -> f64 {
    let a = alpha.value();
    (a * r).exp_m1() / (a * (a - 1.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct LValue {
    pub value: f64,
    pub alpha: f64,
    #[serde(rename = "box")]
    pub bx: Vec<(f64, f64)>,
    pub quadrature_error_estimate: f64,
}

/// `l(π)` by trapezoidal quadrature of `π^{1+α}J^{−α}`, done per node in
/// the log domain. The prior is used as given, so pass a normalized one.
pub fn l_functional(prior: &GridDensity, jeffreys: &GridDensity, alpha: AlphaParams) -> Result<LValue> {
    if prior.grid() != jeffreys.grid() {
        return Err(Error::GridMismatch("prior and Jeffreys density live on different grids".into()));
    }
    let a = alpha.value();
    let grid = prior.grid();
    let mut logs = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let (lp, lj) = (prior.log_value(i), jeffreys.log_value(i));
        if lp == f64::NEG_INFINITY {
            logs.push(f64::NEG_INFINITY);
        } else if lj == f64::NEG_INFINITY {
            return Err(Error::DivergentIntegrand(grid.node(i)));
        } else {
            logs.push((1.0 + a) * lp - a * lj);
        }
    }
    let c = c_alpha(alpha, grid.dim());
    let li = log_trapezoid(grid, &logs);
    let value = c * li.exp();
    let quadrature_error_estimate = match grid.coarsened() {
        Some((coarse, map)) => {
            let cl: Vec<f64> = map.iter().map(|&i| logs[i]).collect();
            (value - c * log_trapezoid(&coarse, &cl).exp()).abs() / 3.0
        }
        None => f64::NAN,
    };
    Ok(LValue {
        value,
        alpha: a,
        bx: grid.bounding_box(),
        quadrature_error_estimate,
    })
}

/// Maximizer of `l` over proper densities on a grid, by projected gradient
/// ascent on the weighted simplex `{π ≥ 0, Σ w_i π_i = 1}`.
#[derive(Debug, Clone)]
pub struct Maximizer {
    pub prior: GridDensity,
    pub iterations: usize,
    pub converged: bool,
}

pub fn maximize_l_projected_gradient(
    jeffreys: &GridDensity,
    alpha: AlphaParams,
    max_iter: usize,
    tol: f64,
) -> Result<Maximizer> {
    let grid = jeffreys.grid();
    let a = alpha.value();
    let c = c_alpha(alpha, grid.dim());
    let w = grid.trapezoid_weights();
    let jm: Vec<f64> = jeffreys.log_values().iter().map(|l| (-a * l).exp()).collect();
    if jm.iter().any(|v| !v.is_finite()) {
        return Err(Error::DivergentIntegrand(vec![]));
    }
    let objective = |p: &[f64]| -> f64 {
        c * p.iter().zip(&w).zip(&jm).map(|((p, w), j)| w * p.powf(1.0 + a) * j).sum::<f64>()
    };
    let total_w: f64 = w.iter().sum();
    let mut p = vec![1.0 / total_w; grid.len()];
    let mut f = objective(&p);
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    let mut grad = vec![0.0; p.len()];
    for it in 0..max_iter {
        iterations = it + 1;
        // gradient in the w-weighted inner product
        for i in 0..p.len() {
            grad[i] = c * (1.0 + a) * p[i].powf(a) * jm[i];
        }
        step *= 2.0;
        let (next, f_next) = loop {
            let x: Vec<f64> = p.iter().zip(&grad).map(|(p, g)| p + step * g).collect();
            let cand = project_weighted_simplex(&x, &w);
            let fc = objective(&cand);
            let dir: f64 = cand.iter().zip(&p).zip(&w).map(|((c, p), w)| w * (c - p) * (c - p)).sum();
            if fc >= f + 0.5 * dir / step || step < 1e-300 {
                break (cand, fc);
            }
            step *= 0.5;
        };
        let change = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        p = next;
        f = f_next;
        if change < tol {
            converged = true;
            break;
        }
    }
    let prior = GridDensity::from_values(jeffreys.space().clone(), grid.clone(), p)?.normalize()?;
    Ok(Maximizer {
        prior,
        iterations,
        converged,
    })
}

/// Euclidean projection in the `w`-weighted norm onto `{p ≥ 0, Σ w p = 1}`:
/// `p = max(x − τ, 0)` with `τ` found by bisection.
pub(crate) fn project_weighted_simplex(x: &[f64], w: &[f64]) -> Vec<f64> {
    let mass = |tau: f64| -> f64 { x.iter().zip(w).map(|(x, w)| w * (x - tau).max(0.0)).sum() };
    let xmax = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total_w: f64 = w.iter().sum();
    let mut lo = x.iter().copied().fold(f64::INFINITY, f64::min) - 1.0 / total_w;
    let mut hi = xmax;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * (1.0 + hi.abs()) {
            break;
        }
    }
    let tau = 0.5 * (lo + hi);
    let p: Vec<f64> = x.iter().map(|x| (x - tau).max(0.0)).collect();
    let m: f64 = p.iter().zip(w).map(|(p, w)| p * w).sum();
    p.iter().map(|v| v / m).collect()
}

/// Sample of `f_α` ratios for one `θ`.
#[derive(Debug, Clone, Copy)]
struct InnerStats {
    mean_f: f64,
    excluded: usize,
}

fn divergence_inner(
    model: &dyn Model,
    theta: &[f64],
    k: usize,
    marginal_logpdf: &(dyn Fn(&[f64]) -> f64 + Sync),
    alpha: AlphaParams,
    n_inner: usize,
    rng: &mut SimRng,
) -> Result<InnerStats> {
    let mut ys = vec![0.0; k];
    let mut acc = 0.0;
    let mut used = 0usize;
    for _ in 0..n_inner {
        for y in ys.iter_mut() {
            *y = model.sample(theta, rng);
        }
        let r = marginal_logpdf(&ys) - model.dataset_log_likelihood(&ys, theta);
        let f = f_alpha_centered_log(alpha, r);
        if r.is_nan() || r == f64::INFINITY || !f.is_finite() {
            continue;
        }
        acc += f;
        used += 1;
    }
    let excluded = n_inner - used;
    if excluded * 100 > n_inner || used == 0 {
        return Err(Error::TooManyExclusions {
            excluded,
            total: n_inner,
        });
    }
    Ok(InnerStats {
        mean_f: acc / used as f64,
        excluded,
    })
}

/// `D_α(ℓ_k(·|θ) ‖ p_k)` from `n_inner` datasets of size `k` drawn at `θ`.
///
/// Averages `f_α(x) + (x−1)/(α−1)` with `x = p_k(y)/ℓ_k(y|θ)`, which equals
/// the expectation of `f_α(x)` whenever `marginal_logpdf` is a normalized
/// density (see [`f_alpha_centered_log`]).
pub fn alpha_divergence_mc(
    model: &dyn Model,
    theta: &[f64],
    k: usize,
    marginal_logpdf: &(dyn Fn(&[f64]) -> f64 + Sync),
    alpha: AlphaParams,
    n_inner: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = stream_rng(seed, 0);
    Ok(divergence_inner(model, theta, k, marginal_logpdf, alpha, n_inner, &mut rng)?.mean_f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McParams {
    pub n_outer: usize,
    pub n_inner: usize,
    pub seed: u64,
}

impl Default for McParams {
    fn default() -> Self {
        McParams {
            n_outer: 2000,
            n_inner: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MutualInfoEstimate {
    pub value: f64,
    pub std_error: f64,
    pub k: usize,
    pub n_outer: usize,
    pub n_inner: usize,
    pub alpha: f64,
    /// Datasets dropped for non-finite ratios, over all outer draws.
    pub excluded: usize,
}

impl MutualInfoEstimate {
    /// `I − 1/(α(1−α))`: the part of `I` that vanishes as `k → ∞`.
    pub fn centered(&self) -> f64 {
        self.value - 1.0 / (self.alpha * (1.0 - self.alpha))
    }
}

/// Discrete prior masses `w_i π_i / Σ w π` on the grid nodes.
fn prior_masses(prior: &GridDensity) -> Vec<f64> {
    let w = prior.grid().trapezoid_weights();
    let logs = prior.log_values();
    let lm: Vec<f64> = w.iter().zip(&logs).map(|(w, l)| w.ln() + l).collect();
    let z = log_sum_exp(lm.iter().copied());
    lm.iter().map(|l| (l - z).exp()).collect()
}

/// `I_{D_α}(π|k)`: average over `n_outer` draws `θ ~ π` of the inner
/// divergence estimate. The marginal of a dataset is the quadrature
/// `Σ_i m_i ℓ_k(y|θ_i)` with the prior's trapezoid masses `m_i`.
pub fn mutual_info_mc(
    model: &dyn Model,
    prior: &GridDensity,
    k: usize,
    alpha: AlphaParams,
    mc: McParams,
) -> Result<MutualInfoEstimate> {
    if prior.grid().dim() != model.space().dim() {
        return Err(Error::GridMismatch("prior grid does not match the model dimension".into()));
    }
    if mc.n_outer < 2 || mc.n_inner < 1 {
        return Err(Error::invalid("need n_outer >= 2 and n_inner >= 1"));
    }
    let masses = prior_masses(prior);
    let grid = prior.grid();
    let support: Vec<(f64, Vec<f64>)> = masses
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0.0)
        .map(|(i, &m)| (m.ln(), grid.node(i)))
        .collect();
    let marginal = |ys: &[f64]| -> f64 {
        log_sum_exp(support.iter().map(|(lm, th)| lm + model.dataset_log_likelihood(ys, th)))
    };
    let cdf: Vec<f64> = masses
        .iter()
        .scan(0.0, |acc, m| {
            *acc += m;
            Some(*acc)
        })
        .collect();
    let draws: Vec<Result<InnerStats>> = (0..mc.n_outer)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(mc.seed, j as u64);
            let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
            let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            let theta = grid.node(idx);
            divergence_inner(model, &theta, k, &marginal, alpha, mc.n_inner, &mut rng)
        })
        .collect();
    let mut vals = Vec::with_capacity(mc.n_outer);
    let mut excluded = 0;
    for d in draws {
        let s = d?;
        excluded += s.excluded;
        vals.push(s.mean_f);
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok(MutualInfoEstimate {
        value: mean,
        std_error: (var / n).sqrt(),
        k,
        n_outer: mc.n_outer,
        n_inner: mc.n_inner,
        alpha: alpha.value(),
        excluded,
    })
}

/// One row of the large-`k` limit table.
#[derive(Debug, Clone, Serialize)]
pub struct LimitRow {
    pub k: usize,
    /// `k^{dα/2}(I − 1/(α(1−α)))`, the quantity converging to `l(π)`.
    pub scaled_mi: f64,
    pub std_error: f64,
    pub l_value: f64,
    /// `| |scaled_mi| − |l| | / |l|`.
    pub gap: f64,
    /// `(scaled_mi − l) / |l|`.
    pub signed_gap: f64,
    /// `k^{dα/2}·I` without centering.
    pub raw_scaled_mi: f64,
    /// `| raw_scaled_mi − |l| | / |l|`.
    pub raw_gap: f64,
    /// Gap above 50%: `k` is far from the asymptotic regime.
    pub non_asymptotic: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitCheck {
    pub rows: Vec<LimitRow>,
    pub l_value: f64,
    /// Gaps shrink along the schedule.
    pub gap_decreasing: bool,
    pub sign_convention: &'static str,
}

pub const SIGN_CONVENTION: &str = "I_{D_alpha}(pi|k) tends to 1/(alpha(1-alpha)) and the centered, scaled \
     k^{d alpha/2}(I - 1/(alpha(1-alpha))) tends to l(pi) < 0; gap compares magnitudes, signed_gap keeps signs";

pub fn mutual_info_limit_check(
    model: &dyn Model,
    prior: &GridDensity,
    jeffreys: &GridDensity,
    alpha: AlphaParams,
    k_schedule: &[usize],
    mc: McParams,
) -> Result<LimitCheck> {
    let l = l_functional(prior, jeffreys, alpha)?.value;
    let d = prior.grid().dim() as f64;
    let a = alpha.value();
    let mut rows = Vec::with_capacity(k_schedule.len());
    for &k in k_schedule {
        let est = mutual_info_mc(model, prior, k, alpha, mc)?;
        let scale = (k as f64).powf(d * a / 2.0);
        let scaled = scale * est.centered();
        let gap = (scaled.abs() - l.abs()).abs() / l.abs();
        let raw = scale * est.value;
        rows.push(LimitRow {
            k,
            scaled_mi: scaled,
            std_error: scale * est.std_error,
            l_value: l,
            gap,
            signed_gap: (scaled - l) / l.abs(),
            raw_scaled_mi: raw,
            raw_gap: (raw - l.abs()).abs() / l.abs(),
            non_asymptotic: gap > 0.5,
        });
    }
    let gap_decreasing = rows.windows(2).all(|w| w[1].gap < w[0].gap);
    Ok(LimitCheck {
        rows,
        l_value: l,
        gap_decreasing,
        sign_convention: SIGN_CONVENTION,
    })
}

/// A grid density from a closure, for tests and callers building priors.
pub fn density_from_fn(
    space: &crate::space::ParamSpace,
    grid: &Grid,
    f: impl Fn(&[f64]) -> f64,
) -> Result<GridDensity> {
    GridDensity::from_values(space.clone(), grid.clone(), (0..grid.len()).map(|i| f(&grid.node(i))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ParamSpace;
    use proptest::prelude::{prop_assert, prop_assume, proptest};

    fn half() -> AlphaParams {
        AlphaParams::new(0.5).unwrap()
    }

    #[test]
    fn c_alpha_values() {
        assert!((c_alpha(half(), 1) + 8.956_121_079_361_981).abs() < 1e-12);
        assert!((c_alpha(half(), 2) + 8.0 * (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        for a in [0.01, 0.3, 0.99] {
            for d in 1..5 {
                assert!(c_alpha(AlphaParams::new(a).unwrap(), d) < 0.0);
            }
        }
    }

    #[test]
    fn f_alpha_stable_form() {
        let a = AlphaParams::new(0.3).unwrap();
        assert_eq!(f_alpha(a, 1.0), 0.0);
        for x in [1e-6f64, 0.2, 0.99999, 1.00001, 1.5, 40.0] {
            let direct = (x.powf(0.3) - 0.3 * x - 0.7) / (0.3 * (0.3 - 1.0));
            assert!((f_alpha(a, x) - direct).abs() < 1e-9 * (1.0 + direct.abs()), "{x}");
            assert!(f_alpha(a, x) >= 0.0);
        }
        assert!((f_alpha(a, 0.0) - 1.0 / 0.3).abs() < 1e-15);
    }

    fn unit_line(n: usize) -> (ParamSpace, Grid) {
        let s = ParamSpace::interval(0.0, 1.0).unwrap();
        let g = crate::grid::make_grid(&s, None, n).unwrap();
        (s, g)
    }

    #[test]
    fn l_of_uniform_with_flat_jeffreys() {
        let (s, g) = unit_line(11);
        let one = density_from_fn(&s, &g, |_| 1.0).unwrap();
        let l = l_functional(&one, &one, half()).unwrap();
        assert!((l.value - c_alpha(half(), 1)).abs() < 1e-14);
    }

    #[test]
    fn l_of_normalized_jeffreys() {
        let s = ParamSpace::interval(0.1, 10.0).unwrap();
        let g = crate::grid::make_grid(&s, None, 101).unwrap();
        let j = density_from_fn(&s, &g, |t| 3.0 / t[0]).unwrap();
        let p = j.normalize().unwrap();
        let l = l_functional(&p, &j, half()).unwrap();
        let want = c_alpha(half(), 1) * j.integral().powf(-0.5);
        assert!((l.value / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn divergent_integrand() {
        let (s, g) = unit_line(9);
        let p = density_from_fn(&s, &g, |_| 1.0).unwrap();
        let j = density_from_fn(&s, &g, |t| t[0]).unwrap();
        assert!(matches!(l_functional(&p, &j, half()), Err(Error::DivergentIntegrand(_))));
    }

    #[test]
    fn mixture_identity_on_disjoint_supports() {
        let n = 41;
        let s = ParamSpace::interval(0.0, 2.0).unwrap();
        let g = crate::grid::make_grid(&s, None, n).unwrap();
        let j = density_from_fn(&s, &g, |t| 1.0 + t[0] * t[0]).unwrap();
        let p1 = density_from_fn(&s, &g, |t| if t[0] < 0.99 { 1.0 + t[0] } else { 0.0 }).unwrap().normalize().unwrap();
        let p0 = density_from_fn(&s, &g, |t| if t[0] > 1.01 { 3.0 - t[0] } else { 0.0 }).unwrap().normalize().unwrap();
        for t in [0.2, 0.5, 0.9] {
            let m = GridDensity::mixture(&p1, &p0, t).unwrap();
            let lm = l_functional(&m, &j, half()).unwrap().value;
            let want = t.powf(1.5) * l_functional(&p1, &j, half()).unwrap().value
                + (1.0 - t).powf(1.5) * l_functional(&p0, &j, half()).unwrap().value;
            assert!((lm - want).abs() < 1e-12 * want.abs());
        }
    }

    #[test]
    fn jeffreys_beats_feasible_perturbations() {
        use rand::SeedableRng;
        let s = ParamSpace::interval(0.5, 3.0).unwrap();
        let g = crate::grid::make_grid(&s, None, 61).unwrap();
        let j = density_from_fn(&s, &g, |t| 1.0 / t[0]).unwrap();
        let pj = j.normalize().unwrap();
        let lj = l_functional(&pj, &j, half()).unwrap().value;
        let w = g.trapezoid_weights();
        let base = pj.values();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let mut v: Vec<f64> = (0..g.len()).map(|_| rng.random::<f64>() - 0.5).collect();
            let mean = v.iter().zip(&w).map(|(v, w)| v * w).sum::<f64>() / w.iter().sum::<f64>();
            v.iter_mut().for_each(|x| *x -= mean);
            let scale = 0.5 * base.iter().zip(&v).map(|(b, v)| b / v.abs()).fold(f64::INFINITY, f64::min);
            let p: Vec<f64> = base.iter().zip(&v).map(|(b, v)| b + scale * v).collect();
            let d = GridDensity::from_values(s.clone(), g.clone(), p).unwrap();
            assert!(l_functional(&d, &j, half()).unwrap().value < lj);
        }
    }

    #[test]
    fn projected_gradient_finds_jeffreys() {
        let s = ParamSpace::interval(0.1, 10.0).unwrap();
        let g = crate::grid::make_grid(&s, None, 201).unwrap();
        let j = density_from_fn(&s, &g, |t| 2f64.sqrt() / t[0]).unwrap();
        let m = maximize_l_projected_gradient(&j, half(), 200_000, 1e-13).unwrap();
        assert!(m.converged);
        let want = j.normalize().unwrap();
        let err = m.prior.values().iter().zip(want.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-5, "sup error {err}");
    }

    #[test]
    fn projection_lands_on_simplex() {
        let x = [0.3, -2.0, 5.0, 1.0];
        let w = [0.5, 1.0, 1.0, 0.5];
        let p = project_weighted_simplex(&x, &w);
        assert!(p.iter().all(|&v| v >= 0.0));
        assert!((p.iter().zip(&w).map(|(p, w)| p * w).sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn point_mass_marginal_has_zero_divergence() {
        let m = crate::models::GaussianLocation::new(1.0).unwrap();
        let marginal = |ys: &[f64]| m.dataset_log_likelihood(ys, &[0.2]);
        let d = alpha_divergence_mc(&m, &[0.2], 5, &marginal, half(), 50, 1).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn flat_likelihood_gives_zero_information() {
        // σ huge relative to the prior support: data carry no information
        let m = crate::models::GaussianLocation::new(1e6).unwrap();
        let s = ParamSpace::interval(-1.0, 1.0).unwrap();
        let g = crate::grid::make_grid(&s, None, 21).unwrap();
        let p = density_from_fn(&s, &g, |_| 1.0).unwrap().normalize().unwrap();
        let mc = McParams { n_outer: 200, n_inner: 10, seed: 3 };
        let e = mutual_info_mc(&m, &p, 2, half(), mc).unwrap();
        assert!(e.value.abs() <= 3.0 * e.std_error + 1e-12, "{} ± {}", e.value, e.std_error);
    }

    #[test]
    fn empty_schedule() {
        let m = crate::models::GaussianLocation::new(1.0).unwrap();
        let s = ParamSpace::interval(-1.0, 1.0).unwrap();
        let g = crate::grid::make_grid(&s, None, 21).unwrap();
        let p = density_from_fn(&s, &g, |_| 1.0).unwrap().normalize().unwrap();
        let c = mutual_info_limit_check(&m, &p, &p, half(), &[], McParams::default()).unwrap();
        assert!(c.rows.is_empty());
    }

    proptest! {
        #[test]
        fn l_is_strictly_concave(
            a in proptest::collection::vec(0.1f64..5.0, 15),
            b in proptest::collection::vec(0.1f64..5.0, 15),
        ) {
            let s = ParamSpace::interval(0.0, 1.0).unwrap();
            let g = crate::grid::make_grid(&s, None, 15).unwrap();
            let j = density_from_fn(&s, &g, |t| 1.0 + t[0]).unwrap();
            let p1 = GridDensity::from_values(s.clone(), g.clone(), a).unwrap().normalize().unwrap();
            let p2 = GridDensity::from_values(s.clone(), g.clone(), b).unwrap().normalize().unwrap();
            let dist = p1.values().iter().zip(p2.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            prop_assume!(dist > 1e-3);
            let mid = GridDensity::mixture(&p1, &p2, 0.5).unwrap();
            let l1 = l_functional(&p1, &j, half()).unwrap().value;
            let l2 = l_functional(&p2, &j, half()).unwrap().value;
            let lm = l_functional(&mid, &j, half()).unwrap().value;
            prop_assert!(lm > 0.5 * (l1 + l2) + 1e-10 * lm.abs());
        }
    }
}
