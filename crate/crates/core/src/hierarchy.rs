//! Two-block sequential reference priors on a compact box.
//!
//! With `θ = (θ₁, θ₂)` split into blocks, the construction takes the
//! conditional Jeffreys density `π₁(θ₁|θ₂)` of the model with `θ₂` fixed,
//! integrates it out of the likelihood to obtain a model `ℓ₂(y|θ₂)` for the
//! second block alone, and uses the Jeffreys density of that model as
//! `π₂(θ₂)`. The result is the product `π₁(θ₁|θ₂)·π₂(θ₂)`.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::density::{GridDensity, Properness};
use crate::error::{Error, Result};
use crate::fisher::{fisher_with_rng, FisherMethod};
use crate::grid::{axis_nodes, log_sum_exp, Grid};
use crate::model::{stream_rng, Model};
use crate::space::{AlphaParams, ParamSpace};

/// Partition of the parameter axes into an inner block (conditioned first)
/// and an outer block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockOrdering {
    block1: Vec<usize>,
    block2: Vec<usize>,
}

impl BlockOrdering {
    pub fn new(block1: Vec<usize>, block2: Vec<usize>, dim: usize) -> Result<Self> {
        let mut all: Vec<usize> = block1.iter().chain(&block2).copied().collect();
        all.sort_unstable();
        if all != (0..dim).collect::<Vec<_>>() {
            return Err(Error::invalid(format!(
                "blocks {block1:?} and {block2:?} do not partition the {dim} axes"
            )));
        }
        if block1.is_empty() || block1.len() > 2 || block2.len() > 2 {
            return Err(Error::invalid(
                "the first block needs one or two axes and the second at most two",
            ));
        }
        Ok(BlockOrdering { block1, block2 })
    }

    pub fn block1(&self) -> &[usize] {
        &self.block1
    }

    pub fn block2(&self) -> &[usize] {
        &self.block2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct HierarchyOptions {
    pub block1_nodes: usize,
    pub block2_nodes: usize,
    /// Draws per second-block node for the marginal model's Fisher
    /// information.
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for HierarchyOptions {
    fn default() -> Self {
        HierarchyOptions {
            block1_nodes: 21,
            block2_nodes: 9,
            mc_samples: 20_000,
            seed: 0,
        }
    }
}

/// Replacement for the conditional Jeffreys density: given the first-block
/// grid and a second-block point, returns unnormalized density values at the
/// grid nodes.
pub type ConditionalPrior<'a> = &'a (dyn Fn(&Grid, &[f64]) -> Result<Vec<f64>> + Sync);

#[derive(Debug, Clone)]
pub struct SequentialReference {
    /// Joint density on the full grid, normalized on the box.
    pub density: GridDensity,
    /// `π₂` on the second-block grid (absent for a single block).
    pub marginal: Option<GridDensity>,
    /// Monte Carlo standard error of `π₂` relative to its value, per node.
    pub marginal_rel_error: Vec<f64>,
    pub ordering: BlockOrdering,
    pub alpha: f64,
}

/// Two-block sequential reference prior of `model` on the compact box `bx`.
///
/// On a compact box the reference prior of each step is the normalized
/// Jeffreys density of that step's model, whatever `alpha`; it is recorded
/// for reporting. The marginal model uses a single observation.
pub fn sequential_reference(
    model: &dyn Model,
    ordering: &BlockOrdering,
    alpha: AlphaParams,
    bx: &[(f64, f64)],
    opts: HierarchyOptions,
    conditional_override: Option<ConditionalPrior>,
) -> Result<SequentialReference> {
    let space = model.space();
    let d = space.dim();
    if bx.len() != d || ordering.block1.len() + ordering.block2.len() != d {
        return Err(Error::invalid("box and ordering must match the model dimension"));
    }
    if bx.iter().any(|(lo, hi)| !lo.is_finite() || !hi.is_finite()) {
        return Err(Error::CompactifyFirst(bx.iter().map(|b| b.1).collect()));
    }
    if !space.contains_box(bx) || bx.iter().any(|(lo, hi)| !(lo < hi)) {
        return Err(Error::invalid(format!("box {bx:?} is not inside the parameter space")));
    }
    if opts.block1_nodes < 2 || (!ordering.block2.is_empty() && opts.block2_nodes < 2) {
        return Err(Error::invalid("need at least 2 nodes per axis"));
    }
    let axis_grid = |axes: &[usize], n: usize| -> Result<Grid> {
        Grid::new(axes.iter().map(|&a| axis_nodes(space, a, bx[a].0, bx[a].1, n)).collect())
    };
    let g1 = axis_grid(&ordering.block1, opts.block1_nodes)?;
    let w1 = g1.trapezoid_weights();

    let conditional = Conditional {
        model,
        ordering,
        grid: &g1,
        weights: &w1,
        user: conditional_override,
    };

    if ordering.block2.is_empty() {
        let logs = conditional.log_masses(&[])?;
        let lw: Vec<f64> = logs.iter().zip(&w1).map(|(l, w)| l - w.ln()).collect();
        let density = GridDensity::from_log_values(ParamSpace::from_box(bx)?, g1, lw)?
            .normalize()?
            .with_properness(Properness::Proper);
        return Ok(SequentialReference {
            density,
            marginal: None,
            marginal_rel_error: Vec::new(),
            ordering: ordering.clone(),
            alpha: alpha.value(),
        });
    }

    let g2 = axis_grid(&ordering.block2, opts.block2_nodes)?;
    let d2 = g2.dim();
    let per_node: Vec<Result<(f64, f64, Vec<f64>)>> = (0..g2.len())
        .into_par_iter()
        .map(|i| {
            let t2 = g2.node(i);
            let (det, rel) = marginal_fisher_det(&conditional, &t2, opts, i as u64)?;
            let cond = conditional.log_masses(&t2)?;
            Ok((det, rel, cond))
        })
        .collect();
    let mut j2 = Vec::with_capacity(g2.len());
    let mut rel_err = Vec::with_capacity(g2.len());
    let mut conds = Vec::with_capacity(g2.len());
    for (i, r) in per_node.into_iter().enumerate() {
        let (det, rel, cond) = r?;
        if !(det > 0.0) {
            return Err(Error::non_finite("marginal model Fisher determinant", &g2.node(i)));
        }
        j2.push(det.sqrt());
        rel_err.push(0.5 * rel);
        conds.push(cond);
    }
    let bx2: Vec<(f64, f64)> = ordering.block2.iter().map(|&a| bx[a]).collect();
    let marginal = GridDensity::from_values(ParamSpace::from_box(&bx2)?, g2.clone(), j2)?
        .normalize()?
        .with_properness(Properness::Proper);

    // joint grid in the model's axis order
    let mut axes = vec![Vec::new(); d];
    for (k, &a) in ordering.block1.iter().enumerate() {
        axes[a] = g1.axis(k).to_vec();
    }
    for (k, &a) in ordering.block2.iter().enumerate() {
        axes[a] = g2.axis(k).to_vec();
    }
    let joint = Grid::new(axes)?;
    let mut idx1 = vec![0usize; g1.dim()];
    let mut idx2 = vec![0usize; d2];
    let logs: Vec<f64> = (0..joint.len())
        .map(|flat| {
            let idx = joint.multi_index(flat);
            for (k, &a) in ordering.block1.iter().enumerate() {
                idx1[k] = idx[a];
            }
            for (k, &a) in ordering.block2.iter().enumerate() {
                idx2[k] = idx[a];
            }
            let (i1, i2) = (g1.flat_index(&idx1), g2.flat_index(&idx2));
            // conditional masses divided by weights are normalized densities
            conds[i2][i1] - w1[i1].ln() + marginal.log_value(i2)
        })
        .collect();
    let density = GridDensity::from_log_values(ParamSpace::from_box(bx)?, joint, logs)?
        .with_properness(Properness::Proper);
    Ok(SequentialReference {
        density,
        marginal: Some(marginal),
        marginal_rel_error: rel_err,
        ordering: ordering.clone(),
        alpha: alpha.value(),
    })
}

struct Conditional<'a> {
    model: &'a dyn Model,
    ordering: &'a BlockOrdering,
    grid: &'a Grid,
    weights: &'a [f64],
    user: Option<ConditionalPrior<'a>>,
}

impl Conditional<'_> {
    fn full_theta(&self, t1: &[f64], t2: &[f64], out: &mut [f64]) {
        for (k, &a) in self.ordering.block1.iter().enumerate() {
            out[a] = t1[k];
        }
        for (k, &a) in self.ordering.block2.iter().enumerate() {
            out[a] = t2[k];
        }
    }

    /// Log quadrature masses `ln(w_s·π₁(θ₁ˢ|θ₂))` of the normalized
    /// conditional prior on the first-block grid.
    fn log_masses(&self, t2: &[f64]) -> Result<Vec<f64>> {
        let n = self.grid.len();
        let values: Vec<f64> = match self.user {
            Some(f) => f(self.grid, t2)?,
            None => {
                let d = self.model.space().dim();
                let mut theta = vec![0.0; d];
                let mut t1 = vec![0.0; self.grid.dim()];
                let mut out = Vec::with_capacity(n);
                for s in 0..n {
                    self.grid.node_into(s, &mut t1);
                    self.full_theta(&t1, t2, &mut theta);
                    out.push(self.block_jeffreys(&theta, s as u64)?);
                }
                out
            }
        };
        if values.len() != n {
            return Err(Error::invalid(format!(
                "conditional prior returned {} values for {n} nodes",
                values.len()
            )));
        }
        let logs: Vec<f64> = values.iter().zip(self.weights).map(|(v, w)| v.ln() + w.ln()).collect();
        if logs.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
            return Err(Error::non_finite("conditional prior", t2));
        }
        let total = log_sum_exp(logs.iter().copied());
        if !total.is_finite() {
            return Err(Error::CannotNormalize(total.exp()));
        }
        Ok(logs.into_iter().map(|l| l - total).collect())
    }

    /// `sqrt det` of the first-block sub-matrix of `I(θ)`.
    fn block_jeffreys(&self, theta: &[f64], stream: u64) -> Result<f64> {
        let full = match self.model.closed_form_fisher(theta) {
            Some(m) => m,
            None => {
                let mut rng = stream_rng(u64::MAX, stream);
                fisher_with_rng(self.model, theta, FisherMethod::McScore, 20_000, &mut rng)?.matrix
            }
        };
        let b = &self.ordering.block1;
        let sub = DMatrix::from_fn(b.len(), b.len(), |r, c| full[(b[r], b[c])]);
        let det = sub.determinant();
        if !det.is_finite() {
            return Err(Error::non_finite("block Fisher determinant", theta));
        }
        Ok(det.max(0.0).sqrt())
    }

    /// `ln ℓ₂(y|θ₂)` given the conditional log masses at `θ₂`.
    fn marginal_loglik(&self, y: f64, t2: &[f64], log_masses: &[f64], theta: &mut [f64], t1: &mut [f64]) -> f64 {
        let terms = (0..self.grid.len()).map(|s| {
            self.grid.node_into(s, t1);
            self.full_theta(t1, t2, theta);
            log_masses[s] + self.model.log_likelihood(y, theta)
        });
        log_sum_exp(terms)
    }
}

/// Determinant of the marginal model's Fisher matrix at `t2` by averaging
/// outer products of finite-difference scores over `y ~ ℓ₂(·|θ₂)`, and the
/// relative standard error of that determinant.
fn marginal_fisher_det(c: &Conditional, t2: &[f64], opts: HierarchyOptions, stream: u64) -> Result<(f64, f64)> {
    let d2 = t2.len();
    let d = c.model.space().dim();
    let n = opts.mc_samples.max(2);
    let base = c.log_masses(t2)?;
    let steps: Vec<f64> = t2.iter().map(|x| 1e-5 * (1.0 + x.abs())).collect();
    let mut shifted = Vec::with_capacity(d2);
    for k in 0..d2 {
        let mut plus = t2.to_vec();
        let mut minus = t2.to_vec();
        plus[k] += steps[k];
        minus[k] -= steps[k];
        let (mp, mm) = (c.log_masses(&plus)?, c.log_masses(&minus)?);
        shifted.push((plus, minus, mp, mm));
    }
    let cdf: Vec<f64> = base
        .iter()
        .scan(0.0, |acc, l| {
            *acc += l.exp();
            Some(*acc)
        })
        .collect();
    let total = *cdf.last().unwrap();

    let mut rng = stream_rng(opts.seed, stream);
    let mut theta = vec![0.0; d];
    let mut t1 = vec![0.0; c.grid.dim()];
    let mut sum = DMatrix::<f64>::zeros(d2, d2);
    let mut scores: Vec<Vec<f64>> = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random::<f64>() * total;
        let s = cdf.partition_point(|&p| p < u).min(cdf.len() - 1);
        c.grid.node_into(s, &mut t1);
        c.full_theta(&t1, t2, &mut theta);
        let y = c.model.sample(&theta, &mut rng);
        let mut score = vec![0.0; d2];
        for (k, (plus, minus, mp, mm)) in shifted.iter().enumerate() {
            let lp = c.marginal_loglik(y, plus, mp, &mut theta, &mut t1);
            let lm = c.marginal_loglik(y, minus, mm, &mut theta, &mut t1);
            score[k] = (lp - lm) / (2.0 * steps[k]);
        }
        if score.iter().any(|v| !v.is_finite()) {
            return Err(Error::CompactifyFirst(t2.to_vec()));
        }
        for a in 0..d2 {
            for b in 0..d2 {
                sum[(a, b)] += score[a] * score[b];
            }
        }
        scores.push(score);
    }
    let fisher = sum / n as f64;
    let det = fisher.determinant();
    // delta-method spread of det through per-draw contributions
    let inv = fisher.clone().try_inverse().unwrap_or_else(|| DMatrix::zeros(d2, d2));
    let contrib: Vec<f64> = scores
        .iter()
        .map(|s| {
            let v = nalgebra::DVector::from_column_slice(s);
            (v.transpose() * &inv * &v)[(0, 0)]
        })
        .collect();
    let mean = contrib.iter().sum::<f64>() / n as f64;
    let var = contrib.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((det, (var / n as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{GaussianLocationScale, TwoPiece};

    fn half() -> AlphaParams {
        AlphaParams::new(0.5).unwrap()
    }

    #[test]
    fn ordering_validation() {
        assert!(BlockOrdering::new(vec![0], vec![1], 2).is_ok());
        assert!(BlockOrdering::new(vec![0], vec![0], 2).is_err());
        assert!(BlockOrdering::new(vec![], vec![0, 1], 2).is_err());
        assert!(BlockOrdering::new(vec![0, 1, 2], vec![], 3).is_err());
    }

    #[test]
    fn single_block_is_plain_jeffreys() {
        let m = GaussianLocationScale::new();
        let ord = BlockOrdering::new(vec![0, 1], vec![], 2).unwrap();
        let bx = [(-1.0, 1.0), (0.5, 2.0)];
        let r = sequential_reference(&m, &ord, half(), &bx, HierarchyOptions::default(), None).unwrap();
        assert!((r.density.integral() - 1.0).abs() < 1e-12);
        // Jeffreys of the location-scale model is ∝ 1/σ²
        let g = r.density.grid();
        let expect = GridDensity::from_values(
            r.density.space().clone(),
            g.clone(),
            (0..g.len()).map(|i| g.node(i)[1].powi(-2)).collect(),
        )
        .unwrap()
        .normalize()
        .unwrap();
        let (a, b) = (r.density.values(), expect.values());
        let sup = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(sup < 1e-6, "{sup}");
    }

    #[test]
    fn conditional_slices_are_normalized() {
        let m = TwoPiece::new();
        let ord = BlockOrdering::new(vec![1, 2], vec![0], 3).unwrap();
        let bx = [(-1.0, 1.0), (0.5, 2.0), (0.5, 2.0)];
        let opts = HierarchyOptions {
            block1_nodes: 9,
            block2_nodes: 3,
            mc_samples: 500,
            seed: 1,
        };
        let r = sequential_reference(&m, &ord, half(), &bx, opts, None).unwrap();
        assert!((r.density.integral() - 1.0).abs() < 1e-10);
        let marg = r.marginal.unwrap();
        assert!((marg.integral() - 1.0).abs() < 1e-12);
    }
}
