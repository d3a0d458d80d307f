//! Fisher information and Jeffreys densities.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::GridDensity;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{stream_rng, Model, SimRng};
use crate::space::ParamSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FisherMethod {
    ClosedForm,
    McScore,
    FiniteDifference,
}

pub const DEFAULT_MC_SAMPLES: usize = 100_000;

#[derive(Debug, Clone)]
pub struct FisherEstimate {
    pub matrix: DMatrix<f64>,
    /// Monte Carlo standard error of each entry; zero for closed forms.
    pub std_error: DMatrix<f64>,
}

/// `I(θ)` for `model`, by closed form or a Monte Carlo average over
/// `mc_samples` draws `y ~ ℓ(·|θ)`.
pub fn fisher_info(
    model: &dyn Model,
    theta: &[f64],
    method: FisherMethod,
    mc_samples: usize,
    seed: u64,
) -> Result<FisherEstimate> {
    let mut rng = stream_rng(seed, 0);
    fisher_with_rng(model, theta, method, mc_samples, &mut rng)
}

pub(crate) fn fisher_with_rng(
    model: &dyn Model,
    theta: &[f64],
    method: FisherMethod,
    mc_samples: usize,
    rng: &mut SimRng,
) -> Result<FisherEstimate> {
    let space = model.space();
    if theta.len() != space.dim() {
        return Err(Error::invalid(format!(
            "theta has {} coordinates, model expects {}",
            theta.len(),
            space.dim()
        )));
    }
    if !space.is_interior(theta) {
        return Err(Error::BoundaryPoint(theta.to_vec()));
    }
    let d = theta.len();
    match method {
        FisherMethod::ClosedForm => {
            let m = model.closed_form_fisher(theta).ok_or_else(|| {
                Error::invalid(format!("model {} has no closed-form Fisher information", model.name()))
            })?;
            Ok(FisherEstimate {
                matrix: m,
                std_error: DMatrix::zeros(d, d),
            })
        }
        FisherMethod::McScore | FisherMethod::FiniteDifference => {
            if mc_samples < 2 {
                return Err(Error::invalid("mc_samples must be at least 2"));
            }
            let steps = steps(space, theta, if method == FisherMethod::McScore { 1e-5 } else { 1e-4 });
            let mut sum = DMatrix::<f64>::zeros(d, d);
            let mut sum_sq = DMatrix::<f64>::zeros(d, d);
            let mut term = DMatrix::<f64>::zeros(d, d);
            let mut work = theta.to_vec();
            let mut score = vec![0.0; d];
            for _ in 0..mc_samples {
                let y = model.sample(theta, rng);
                if method == FisherMethod::McScore {
                    for j in 0..d {
                        work[j] = theta[j] + steps[j];
                        let up = model.log_likelihood(y, &work);
                        work[j] = theta[j] - steps[j];
                        let dn = model.log_likelihood(y, &work);
                        work[j] = theta[j];
                        score[j] = (up - dn) / (2.0 * steps[j]);
                    }
                    for a in 0..d {
                        for b in 0..d {
                            term[(a, b)] = score[a] * score[b];
                        }
                    }
                } else {
                    neg_hessian(model, y, theta, &steps, &mut work, &mut term);
                }
                if let Some(bad) = term.iter().find(|v| !v.is_finite()) {
                    return Err(Error::non_finite(
                        format!("log-likelihood derivative ({bad}) at y = {y}"),
                        theta,
                    ));
                }
                sum += &term;
                sum_sq += term.component_mul(&term);
            }
            let n = mc_samples as f64;
            let mean = &sum / n;
            let var = (&sum_sq / n - mean.component_mul(&mean)) * (n / (n - 1.0));
            let se = var.map(|v| (v.max(0.0) / n).sqrt());
            let sym = (&mean + mean.transpose()) * 0.5;
            Ok(FisherEstimate {
                matrix: sym,
                std_error: se,
            })
        }
    }
}

/// Difference steps `rel·(1+|θ_i|)`, shortened to stay inside the space.
fn steps(space: &ParamSpace, theta: &[f64], rel: f64) -> Vec<f64> {
    theta
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let h = rel * (1.0 + t.abs());
            let room = (t - space.lower()[i]).min(space.upper()[i] - t);
            h.min(0.5 * room)
        })
        .collect()
}

fn neg_hessian(model: &dyn Model, y: f64, theta: &[f64], h: &[f64], work: &mut [f64], out: &mut DMatrix<f64>) {
    let d = theta.len();
    let f0 = model.log_likelihood(y, theta);
    let eval = |work: &mut [f64], da: (usize, f64), db: Option<(usize, f64)>| {
        work[da.0] += da.1;
        if let Some((b, s)) = db {
            work[b] += s;
        }
        let v = model.log_likelihood(y, work);
        work.copy_from_slice(theta);
        v
    };
    for a in 0..d {
        let up = eval(work, (a, h[a]), None);
        let dn = eval(work, (a, -h[a]), None);
        out[(a, a)] = -(up - 2.0 * f0 + dn) / (h[a] * h[a]);
        for b in (a + 1)..d {
            let pp = eval(work, (a, h[a]), Some((b, h[b])));
            let pm = eval(work, (a, h[a]), Some((b, -h[b])));
            let mp = eval(work, (a, -h[a]), Some((b, h[b])));
            let mm = eval(work, (a, -h[a]), Some((b, -h[b])));
            let v = -(pp - pm - mp + mm) / (4.0 * h[a] * h[b]);
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
}

/// A model together with the way its Fisher information is evaluated.
#[derive(Clone, Copy)]
pub struct FisherField<'a> {
    pub model: &'a dyn Model,
    pub method: FisherMethod,
    pub mc_samples: usize,
    pub seed: u64,
}

impl<'a> FisherField<'a> {
    pub fn new(model: &'a dyn Model, method: FisherMethod) -> Self {
        FisherField {
            model,
            method,
            mc_samples: DEFAULT_MC_SAMPLES,
            seed: 0,
        }
    }

    pub fn with_mc(mut self, mc_samples: usize, seed: u64) -> Self {
        self.mc_samples = mc_samples;
        self.seed = seed;
        self
    }

    /// `I(θ)` using random stream `stream` of the field's seed.
    pub fn evaluate(&self, theta: &[f64], stream: u64) -> Result<FisherEstimate> {
        let mut rng = stream_rng(self.seed, stream);
        fisher_with_rng(self.model, theta, self.method, self.mc_samples, &mut rng)
    }
}

/// Jeffreys density together with the nodes whose determinant was clamped.
#[derive(Debug, Clone)]
pub struct JeffreysGrid {
    pub density: GridDensity,
    /// Flat indices of nodes where `det I ≤ 0` was clamped to zero.
    pub clamped: Vec<usize>,
}

/// `sqrt|det I(θ)|` at every node. Node `i` draws from random stream `i`.
pub fn jeffreys_density(field: &FisherField, grid: &Grid) -> Result<JeffreysGrid> {
    let space = field.model.space();
    if grid.dim() != space.dim() {
        return Err(Error::GridMismatch(format!(
            "grid dimension {} does not match model dimension {}",
            grid.dim(),
            space.dim()
        )));
    }
    let per_node: Vec<Result<(f64, bool)>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let theta = grid.node(i);
            let est = field.evaluate(&theta, i as u64)?;
            let det = est.matrix.determinant();
            if !det.is_finite() {
                return Err(Error::non_finite("Fisher determinant", &theta));
            }
            Ok(if det > 0.0 { (det.sqrt(), false) } else { (0.0, true) })
        })
        .collect();
    let mut values = Vec::with_capacity(grid.len());
    let mut clamped = Vec::new();
    for (i, r) in per_node.into_iter().enumerate() {
        let (v, flag) = r?;
        if flag {
            clamped.push(i);
        }
        values.push(v);
    }
    let density = GridDensity::from_values(space.clone(), grid.clone(), values)?;
    Ok(JeffreysGrid { density, clamped })
}

/// Jeffreys value `sqrt|det I(θ)|` at one point, using stream 0.
pub fn jeffreys_value(field: &FisherField, theta: &[f64]) -> Result<f64> {
    let det = field.evaluate(theta, 0)?.matrix.determinant();
    if !det.is_finite() {
        return Err(Error::non_finite("Fisher determinant", theta));
    }
    Ok(det.max(0.0).sqrt())
}
