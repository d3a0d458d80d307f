//! Maximizers of `l` over constrained prior classes.
//!
//! * [`solve_constrained_reference`]: moment constraints `∫πg_j = c_j` on a
//!   compact box, solved in the Lagrange form `π = J(λ₀+Σλ_j g_j)^{1/α}`.
//! * [`tail`]: decay exponents of Jeffreys densities and the power-law quasi
//!   reference priors built from them.
//! * [`properize`]: `π ∝ J g^{1/α}` for a moment function `g`, with numerical
//!   checks of the integrability hypotheses along a compact nest.

pub mod hypothesis;
pub mod properize;
pub mod tail;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::Serialize;

use crate::density::{GridDensity, Properness};
use crate::error::{Error, Result};
use crate::functional::{l_functional, LValue};
use crate::grid::Grid;
use crate::model::stream_rng;
use crate::space::AlphaParams;

pub use hypothesis::{nest_test, ratio_test, HypothesisTest, NestOptions, Verdict};
pub use properize::{
    properize, quasi_properize, BoxSolution, PointFn, ProperizeReport, QuadratureValue, QuasiReport,
};
pub use tail::{
    default_psi_interval, estimate_decay_exponent, estimate_decay_exponent_fn, power_quasi_reference, psi_argmax,
    psi_evaluate, unit_nest_edge, Boundary, DecayDiagnostics, PowerLawTail,
};

/// Pointwise constraint function `θ ↦ g(θ)`.
pub type ConstraintFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Moment constraints `∫ π g_j = c_j`, `j = 1..p`, on top of `∫ π = 1`.
#[derive(Clone, Default)]
pub struct ConstraintSpec {
    names: Vec<String>,
    functions: Vec<ConstraintFn>,
    targets: Vec<f64>,
}

impl std::fmt::Debug for ConstraintSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConstraintSpec")
            .field("names", &self.names)
            .field("targets", &self.targets)
            .finish()
    }
}

/// Largest condition number accepted for the Gram matrix of `{1, g_1, …}`.
const GRAM_CONDITION_LIMIT: f64 = 1e8;

impl ConstraintSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static, target: f64) -> Self {
        self.names.push(name.into());
        self.functions.push(Arc::new(g));
        self.targets.push(target);
        self
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Rows `1, g_1, …, g_p` evaluated at every grid node.
    pub fn design(&self, grid: &Grid) -> Result<Vec<Vec<f64>>> {
        let mut rows = vec![vec![1.0; grid.len()]];
        for (name, g) in self.names.iter().zip(&self.functions) {
            let row: Vec<f64> = (0..grid.len()).map(|i| g(&grid.node(i))).collect();
            if let Some(i) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::non_finite(format!("constraint function {name}"), &grid.node(i)));
            }
            rows.push(row);
        }
        Ok(rows)
    }

    /// Checks linear independence of `{1, g_1, …, g_p}` on the grid through
    /// the condition number of their (diagonally scaled) weighted Gram matrix.
    pub fn check_independence(&self, grid: &Grid) -> Result<()> {
        let rows = self.design(grid)?;
        let w = grid.trapezoid_weights();
        gram_condition(&rows, &w).and_then(|c| {
            if c > GRAM_CONDITION_LIMIT {
                Err(Error::DependentConstraints(c))
            } else {
                Ok(())
            }
        })
    }
}

fn gram_condition(rows: &[Vec<f64>], w: &[f64]) -> Result<f64> {
    let m = rows.len();
    let mut gram = DMatrix::<f64>::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let v: f64 = rows[a].iter().zip(&rows[b]).zip(w).map(|((x, y), w)| w * x * y).sum();
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
    }
    let d: Vec<f64> = (0..m).map(|a| gram[(a, a)].sqrt()).collect();
    if d.iter().any(|&v| !(v > 0.0)) {
        return Ok(f64::INFINITY);
    }
    let scaled = DMatrix::from_fn(m, m, |a, b| gram[(a, b)] / (d[a] * d[b]));
    let eig = SymmetricEigen::new(scaled).eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    Ok(if lo > 0.0 { hi / lo } else { f64::INFINITY })
}

#[derive(Debug, Clone, Serialize)]
pub struct LagrangeSolution {
    /// `(λ₀, λ₁, …, λ_p)`.
    pub lambdas: Vec<f64>,
    #[serde(skip)]
    pub prior: GridDensity,
    /// `∫π − 1, ∫πg_1 − c_1, …` by the grid quadrature.
    pub residuals: Vec<f64>,
    pub l_value: LValue,
    pub iterations: usize,
    /// `λ₀+Σλ_j g_j < 0` on cells of positive measure: the returned prior
    /// is the clamped form and lies on the boundary of the class.
    pub boundary_of_class: bool,
    pub warnings: Vec<String>,
}

const MAX_NEWTON_ITER: usize = 200;
const MIN_STEP: f64 = 1.0 / 1_048_576.0;
const RESIDUAL_TOL: f64 = 1e-11;

/// Solves `∫π = 1`, `∫πg_j = c_j` for `π = J·max(λ·g, 0)^{1/α}` by damped
/// Newton iteration on `λ`, starting from `λ₀ = (∫J)^{−α}`, `λ_j = 0`.
///
/// The constraint map is the gradient of the convex dual
/// `G(λ) = α/(1+α) ∫J(λ·g)_+^{1+1/α} − λ·c`, so its Jacobian
/// `(1/α)∫J(λ·g)_+^{1/α−1} g gᵀ` is positive semi-definite.
pub fn solve_constrained_reference(
    jeffreys: &GridDensity,
    spec: &ConstraintSpec,
    alpha: AlphaParams,
) -> Result<LagrangeSolution> {
    let grid = jeffreys.grid();
    let n = grid.len();
    let a = alpha.value();
    let jv = jeffreys.values();
    if let Some(i) = jv.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid(format!(
            "Jeffreys density must be finite and strictly positive on the box, got {} at {:?}",
            jv[i],
            grid.node(i)
        )));
    }
    spec.check_independence(grid)?;
    let rows = spec.design(grid)?;
    let w = grid.trapezoid_weights();
    let mut targets = vec![1.0];
    targets.extend_from_slice(&spec.targets);
    let m = rows.len();

    // each target must lie strictly inside the range of its function
    for j in 1..m {
        let (lo, hi) = rows[j]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if !(targets[j] > lo && targets[j] < hi) {
            return Err(Error::Infeasible(format!(
                "target {} of {} is outside the open range ({lo}, {hi}) of the function on the box",
                targets[j],
                spec.names[j - 1]
            )));
        }
    }

    let inv_a = 1.0 / a;
    let base = |lam: &[f64], i: usize| -> f64 { (0..m).map(|j| lam[j] * rows[j][i]).sum() };
    let residual = |lam: &[f64]| -> Vec<f64> {
        let mut r = vec![0.0; m];
        for i in 0..n {
            let u = base(lam, i);
            if u > 0.0 {
                let p = w[i] * jv[i] * u.powf(inv_a);
                for j in 0..m {
                    r[j] += p * rows[j][i];
                }
            }
        }
        r.iter().zip(&targets).map(|(r, c)| r - c).collect()
    };
    let norm = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>().sqrt();

    let jint: f64 = jv.iter().zip(&w).map(|(j, w)| j * w).sum();
    let mut lam = vec![0.0; m];
    lam[0] = jint.powf(-a);
    let mut r = residual(&lam);
    let mut iterations = 0;
    while r.iter().map(|v| v.abs()).fold(0.0, f64::max) > RESIDUAL_TOL {
        if iterations >= MAX_NEWTON_ITER {
            return Err(Error::Stagnation {
                iterations,
                residuals: r,
            });
        }
        iterations += 1;
        let mut jac = DMatrix::<f64>::zeros(m, m);
        for i in 0..n {
            let u = base(&lam, i);
            if u > 0.0 {
                let p = inv_a * w[i] * jv[i] * u.powf(inv_a - 1.0);
                for j in 0..m {
                    for k in j..m {
                        jac[(j, k)] += p * rows[j][i] * rows[k][i];
                    }
                }
            }
        }
        for j in 0..m {
            for k in 0..j {
                jac[(j, k)] = jac[(k, j)];
            }
        }
        let rhs = DVector::from_iterator(m, r.iter().map(|v| -v));
        let delta = match jac.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => match jac.lu().solve(&rhs) {
                Some(d) => d,
                None => {
                    return Err(Error::Infeasible(format!(
                        "constraint map is singular at lambda = {lam:?}; no strictly positive density meets the targets"
                    )))
                }
            },
        };
        let r_norm = norm(&r);
        let mut step = 1.0;
        loop {
            let cand: Vec<f64> = lam.iter().zip(delta.iter()).map(|(l, d)| l + step * d).collect();
            let rc = residual(&cand);
            if norm(&rc) < r_norm {
                lam = cand;
                r = rc;
                break;
            }
            step *= 0.5;
            if step < MIN_STEP {
                return Err(stalled(iterations, r, &lam));
            }
        }
        if lam.iter().any(|v| !v.is_finite() || v.abs() > 1e150) {
            return Err(Error::Infeasible(format!("multipliers diverge: {lam:?}")));
        }
    }

    let mut boundary_of_class = false;
    let values: Vec<f64> = (0..n)
        .map(|i| {
            let u = base(&lam, i);
            if u < 0.0 && w[i] > 0.0 {
                boundary_of_class = true;
            }
            jv[i] * u.max(0.0).powf(inv_a)
        })
        .collect();
    let mut warnings = Vec::new();
    if boundary_of_class {
        warnings.push(
            "boundary-of-class solution: lambda_0 + sum lambda_j g_j is negative on part of the box; \
             the prior is the clamped form and the positivity hypothesis of the Lagrange form fails"
                .to_string(),
        );
    }
    let prior = GridDensity::from_values(jeffreys.space().clone(), grid.clone(), values)?
        .with_properness(Properness::Proper);
    let l_value = l_functional(&prior, jeffreys, alpha)?;
    Ok(LagrangeSolution {
        lambdas: lam,
        prior,
        residuals: r,
        l_value,
        iterations,
        boundary_of_class,
        warnings,
    })
}

fn stalled(iterations: usize, residuals: Vec<f64>, lam: &[f64]) -> Error {
    // a Newton direction that cannot reduce the residual at all signals
    // targets outside the attainable moment set
    if lam.iter().skip(1).any(|v| v.abs() > 1e6 * lam[0].abs().max(1.0)) {
        Error::Infeasible(format!("multipliers run away: {lam:?}"))
    } else {
        Error::Stagnation { iterations, residuals }
    }
}

/// Random densities meeting the same constraints as `solution`:
/// `π* + εv` with `v` supported on `{π* > 0}`, projected onto the null
/// space of the constraint functionals, and `ε` small enough to keep the
/// result non-negative.
pub fn feasible_perturbations(
    solution: &LagrangeSolution,
    spec: &ConstraintSpec,
    count: usize,
    seed: u64,
) -> Result<Vec<GridDensity>> {
    let prior = &solution.prior;
    let grid = prior.grid();
    let rows = spec.design(grid)?;
    let w = grid.trapezoid_weights();
    let base = prior.values();
    let support: Vec<usize> = (0..grid.len()).filter(|&i| base[i] > 0.0 && w[i] > 0.0).collect();
    let m = rows.len();
    // A v = 0 with A_{j,s} = w_s g_j(s) over support nodes
    let a = DMatrix::from_fn(m, support.len(), |j, s| w[support[s]] * rows[j][support[s]]);
    let aat = &a * a.transpose();
    let aat_inv = aat
        .try_inverse()
        .ok_or_else(|| Error::DependentConstraints(f64::INFINITY))?;
    let mut out = Vec::with_capacity(count);
    for c in 0..count {
        let mut rng = stream_rng(seed, c as u64);
        let v = DVector::from_iterator(
            support.len(),
            support.iter().map(|&i| base[i] * (rng.random::<f64>() - 0.5)),
        );
        let v = &v - a.transpose() * (&aat_inv * (&a * &v));
        let limit = support
            .iter()
            .enumerate()
            .filter(|(s, _)| v[*s] < 0.0)
            .map(|(s, &i)| base[i] / -v[s])
            .fold(f64::INFINITY, f64::min);
        let eps = rng.random_range(0.05..0.9) * limit.min(1e6);
        let mut vals = base.clone();
        for (s, &i) in support.iter().enumerate() {
            vals[i] = (base[i] + eps * v[s]).max(0.0);
        }
        out.push(
            GridDensity::from_values(prior.space().clone(), grid.clone(), vals)?
                .with_properness(Properness::Proper),
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::{c_alpha, density_from_fn};
    use crate::grid::make_grid;
    use crate::space::ParamSpace;

    fn half() -> AlphaParams {
        AlphaParams::new(0.5).unwrap()
    }

    #[test]
    fn normalization_only_gives_normalized_jeffreys() {
        let s = ParamSpace::interval(0.1, 10.0).unwrap();
        let g = make_grid(&s, None, 201).unwrap();
        let j = density_from_fn(&s, &g, |t| 1.0 / t[0]).unwrap();
        let sol = solve_constrained_reference(&j, &ConstraintSpec::new(), half()).unwrap();
        let jn = j.normalize().unwrap();
        let err = sol.prior.values().iter().zip(jn.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6);
        assert!((sol.lambdas[0] - j.integral().powf(-0.5)).abs() < 1e-12);
        assert!((sol.l_value.value - c_alpha(half(), 1) * j.integral().powf(-0.5)).abs() < 1e-10);
    }

    #[test]
    fn moment_matched_targets_give_zero_multipliers() {
        let s = ParamSpace::interval(0.5, 2.0).unwrap();
        let g = make_grid(&s, None, 101).unwrap();
        let j = density_from_fn(&s, &g, |t| 1.0 / t[0]).unwrap();
        let jn = j.normalize().unwrap();
        let mean: f64 = g.trapezoid_weights().iter().zip(jn.values()).enumerate().map(|(i, (w, p))| w * p * g.node(i)[0]).sum();
        let spec = ConstraintSpec::new().with("theta", |t| t[0], mean);
        let sol = solve_constrained_reference(&j, &spec, half()).unwrap();
        assert!(sol.lambdas[1].abs() < 1e-10);
        assert!((sol.lambdas[0] - j.integral().powf(-0.5)).abs() < 1e-10);
    }

    #[test]
    fn infeasible_and_dependent() {
        let s = ParamSpace::interval(0.0, 1.0).unwrap();
        let g = make_grid(&s, None, 51).unwrap();
        let j = density_from_fn(&s, &g, |_| 1.0).unwrap();
        let spec = ConstraintSpec::new().with("theta", |t| t[0], 1.5);
        assert!(matches!(solve_constrained_reference(&j, &spec, half()), Err(Error::Infeasible(_))));
        let spec = ConstraintSpec::new().with("two", |_| 2.0, 2.0);
        assert!(matches!(
            solve_constrained_reference(&j, &spec, half()),
            Err(Error::DependentConstraints(_))
        ));
    }

    #[test]
    fn perturbations_stay_feasible() {
        let s = ParamSpace::interval(0.0, 1.0).unwrap();
        let g = make_grid(&s, None, 40).unwrap();
        let j = density_from_fn(&s, &g, |t| 1.0 + t[0]).unwrap();
        let spec = ConstraintSpec::new().with("theta", |t| t[0], 0.4);
        let sol = solve_constrained_reference(&j, &spec, half()).unwrap();
        assert!(sol.residuals.iter().all(|r| r.abs() < 1e-8));
        let w = g.trapezoid_weights();
        for p in feasible_perturbations(&sol, &spec, 20, 9).unwrap() {
            let vals = p.values();
            let mass: f64 = vals.iter().zip(&w).map(|(v, w)| v * w).sum();
            let mom: f64 = vals.iter().zip(&w).enumerate().map(|(i, (v, w))| v * w * g.node(i)[0]).sum();
            assert!((mass - 1.0).abs() < 1e-10 && (mom - 0.4).abs() < 1e-10);
            assert!(l_functional(&p, &j, half()).unwrap().value < sol.l_value.value);
        }
    }

    #[test]
    fn clamped_solution_is_flagged() {
        // a strongly skewed target forces λ₀ + λ₁θ below zero near θ = 0
        let s = ParamSpace::interval(0.0, 1.0).unwrap();
        let g = make_grid(&s, None, 101).unwrap();
        let j = density_from_fn(&s, &g, |_| 1.0).unwrap();
        let spec = ConstraintSpec::new().with("theta", |t| t[0], 0.85);
        let sol = solve_constrained_reference(&j, &spec, half()).unwrap();
        assert!(sol.boundary_of_class);
        assert!(!sol.warnings.is_empty());
        assert!(sol.residuals.iter().all(|r| r.abs() < 1e-8));
    }
}
