//! Numerical convergence tests for integrals over a compact nest.
//!
//! An integral over the whole space is the limit of its integrals over the
//! nest boxes `Θ_i`. Each shell `Θ_i \ Θ_{i−1}` adds an increment `Δ_i`; on
//! the log-spaced default nest a power-law tail gives geometric increments,
//! so the ratios `Δ_{i+1}/Δ_i` settle to a constant that is below one for a
//! convergent tail and at least one for a divergent one.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{log_add_exp, NestedGrid};
use crate::space::CompactNest;

/// Last shell ratios at or above this mark a divergent integral.
pub const DIVERGENT_RATIO: f64 = 0.95;
/// Last shell ratios at or below this mark a convergent integral.
pub const CONVERGENT_RATIO: f64 = 0.9;
/// Number of trailing ratios that must agree.
pub const RUN_LENGTH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Convergent,
    Divergent,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisTest {
    pub integral: String,
    pub verdict: Verdict,
    /// `ln ∫_{Θ_i}` for each nest box.
    pub log_partial_integrals: Vec<f64>,
    /// `Δ_{i+1}/Δ_i` for shells `i ≥ 1`.
    pub ratios: Vec<f64>,
    /// Geometric tail estimate `Δ_last·r/(1−r)`, infinite when `r ≥ 1`.
    pub tail_estimate: f64,
    /// Integral over the deepest box.
    pub total: f64,
}

/// Applies the ratio test to the log shell integrals `ln Δ_0, ln Δ_1, …`
/// where `Δ_0` is the integral over the first box.
pub fn ratio_test(integral: impl Into<String>, log_shells: &[f64]) -> HypothesisTest {
    let mut partial = Vec::with_capacity(log_shells.len());
    let mut acc = f64::NEG_INFINITY;
    for &s in log_shells {
        acc = log_add_exp(acc, s);
        partial.push(acc);
    }
    let ratios: Vec<f64> = log_shells
        .windows(2)
        .skip(1)
        .map(|w| match (w[0] == f64::NEG_INFINITY, w[1] == f64::NEG_INFINITY) {
            (_, true) => 0.0,
            (true, false) => f64::INFINITY,
            _ => (w[1] - w[0]).exp(),
        })
        .collect();
    let last_shell = log_shells.last().copied().unwrap_or(f64::NEG_INFINITY);
    let total_log = partial.last().copied().unwrap_or(f64::NEG_INFINITY);
    let tail = ratios.last().copied().unwrap_or(f64::NAN);
    let tail_estimate = if tail < 1.0 {
        (last_shell + tail.ln() - (1.0 - tail).ln()).exp()
    } else {
        f64::INFINITY
    };
    let verdict = if !total_log.is_finite() && total_log > 0.0 {
        Verdict::Divergent
    } else if ratios.len() < RUN_LENGTH {
        Verdict::Inconclusive
    } else {
        let recent = &ratios[ratios.len() - RUN_LENGTH..];
        if recent.iter().all(|&r| r >= DIVERGENT_RATIO) {
            Verdict::Divergent
        } else if recent.iter().all(|&r| r <= CONVERGENT_RATIO) || last_shell - total_log <= (1e-12f64).ln() {
            Verdict::Convergent
        } else {
            Verdict::Inconclusive
        }
    };
    HypothesisTest {
        integral: integral.into(),
        verdict,
        log_partial_integrals: partial,
        ratios,
        tail_estimate,
        total: total_log.exp(),
    }
}

/// Resolution of the grid used for integrals over a compact nest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct NestOptions {
    /// Index of the deepest box.
    pub depth: usize,
    /// Nodes added per nest step on each moving edge.
    pub per_step: usize,
    /// Nodes per axis on the first box.
    pub inner_nodes: usize,
}

impl Default for NestOptions {
    fn default() -> Self {
        NestOptions {
            depth: 6,
            per_step: 8,
            inner_nodes: 17,
        }
    }
}

/// Log-values of a function at every node of the nested grid, evaluated in
/// parallel, with non-finite results reported at their coordinates.
pub(crate) fn eval_log_on(
    ng: &NestedGrid,
    context: &str,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<Vec<f64>> {
    let g = &ng.grid;
    let vals: Vec<f64> = (0..g.len()).into_par_iter().map(|i| f(&g.node(i))).collect();
    if let Some(i) = vals.iter().position(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::non_finite(context, &g.node(i)));
    }
    Ok(vals)
}

/// Ratio test of `∫ exp(log_f)` along the nest.
pub fn nest_test(
    integral: &str,
    nest: &CompactNest,
    opts: NestOptions,
    log_f: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<HypothesisTest> {
    let ng = NestedGrid::new(nest, opts.depth, opts.per_step, opts.inner_nodes)?;
    let logs = eval_log_on(&ng, integral, log_f)?;
    Ok(ratio_test(integral, &ng.log_shell_integrals(&logs)))
}
