//! Properized reference priors `π* ∝ J·g^{1/α}` built from a positive
//! moment function `g`.

use serde::Serialize;

use super::hypothesis::{eval_log_on, ratio_test, HypothesisTest, NestOptions, Verdict};
use super::{solve_constrained_reference, ConstraintSpec};
use crate::density::{GridDensity, Properness};
use crate::error::{Error, Result};
use crate::grid::{grid_on_box, log_trapezoid, Grid, NestedGrid};
use crate::space::{AlphaParams, CompactNest};

pub type PointFn<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

const KL_ALTERNATIVE: &str =
    "KL-divergence variant (not computed): pi*(theta) proportional to J(theta)*exp(sum_j lambda_j g_j(theta))";

/// A nest integral by trapezoid quadrature over the deepest box, with an
/// error estimate from the same rule on every other node.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuadratureValue {
    pub value: f64,
    pub error_estimate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProperizeReport {
    pub alpha: f64,
    /// `∫Jg^{1/α}` and `∫Jg^{1+1/α}`.
    pub hypothesis_tests: Vec<HypothesisTest>,
    /// `∫Jg`, which decides whether `∫πg < ∞` restricts the class.
    pub moment_test: HypothesisTest,
    /// `c = ∫Jg^{1+1/α} / ∫Jg^{1/α}` over the deepest nest box.
    pub c: f64,
    pub c_error_estimate: f64,
    pub integrals: [QuadratureValue; 2],
    pub deepest_box: Vec<(f64, f64)>,
    pub properness: Properness,
    pub class_statement: String,
    pub alternative: String,
    pub warnings: Vec<String>,
}

/// Lagrange-form check on one nest box.
#[derive(Debug, Clone, Serialize)]
pub struct BoxSolution {
    pub nest_index: usize,
    pub c: f64,
    pub lambdas: Vec<f64>,
    /// `λ₀ + λ₁g > 0` throughout the box.
    pub positive: bool,
    pub message: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct QuasiReport {
    pub alpha: f64,
    /// `∫Jg` (must diverge) and `∫Jg^{1+1/α}` (must converge).
    pub hypothesis_tests: Vec<HypothesisTest>,
    /// `(E[g^{1/α}])^α` under `Jg` on the deepest shell, relative to the
    /// same mean on the first box.
    pub g_vanishing_ratio: f64,
    /// `∫π*g`, the second hypothesis integral, over the deepest box.
    pub prior_moment: QuadratureValue,
    pub prior_moment_finite: bool,
    pub c_sequence: Vec<f64>,
    pub box_solutions: Vec<BoxSolution>,
    pub alternative: String,
    pub warnings: Vec<String>,
}

struct NestEvaluation {
    ng: NestedGrid,
    log_j: Vec<f64>,
    log_g: Vec<f64>,
}

fn evaluate(j: PointFn, g: PointFn, nest: &CompactNest, opts: NestOptions) -> Result<NestEvaluation> {
    let ng = NestedGrid::new(nest, opts.depth, opts.per_step, opts.inner_nodes)?;
    let log_j = eval_log_on(&ng, "Jeffreys density", &|t| j(t).ln())?;
    let gv = eval_log_on(&ng, "g", &|t| g(t))?;
    if let Some(i) = gv.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::NonPositiveG {
            value: gv[i],
            at: ng.grid.node(i),
        });
    }
    Ok(NestEvaluation {
        ng,
        log_j,
        log_g: gv.iter().map(|v| v.ln()).collect(),
    })
}

impl NestEvaluation {
    /// `ln(J·g^p)` at every node.
    fn log_jg(&self, p: f64) -> Vec<f64> {
        self.log_j.iter().zip(&self.log_g).map(|(j, g)| j + p * g).collect()
    }

    fn test(&self, name: &str, logs: &[f64]) -> HypothesisTest {
        ratio_test(name, &self.ng.log_shell_integrals(logs))
    }

    fn integral(&self, logs: &[f64]) -> QuadratureValue {
        let grid = &self.ng.grid;
        let value = log_trapezoid(grid, logs).exp();
        let error_estimate = match grid.coarsened() {
            Some((coarse, map)) => {
                let cl: Vec<f64> = map.iter().map(|&i| logs[i]).collect();
                (value - log_trapezoid(&coarse, &cl).exp()).abs() / 3.0
            }
            None => f64::NAN,
        };
        QuadratureValue { value, error_estimate }
    }

    /// Nest level of each node: the first box that contains it.
    fn node_levels(&self) -> Vec<usize> {
        let g = &self.ng.grid;
        (0..g.len())
            .map(|flat| {
                let idx = g.multi_index(flat);
                (0..self.ng.ranges.len())
                    .find(|&lvl| {
                        idx.iter()
                            .zip(&self.ng.ranges[lvl])
                            .all(|(&k, &(a, b))| a <= k && k <= b)
                    })
                    .unwrap_or(usize::MAX)
            })
            .collect()
    }
}

fn integral_name(p: &str) -> String {
    format!("integral of J*g^{p}")
}

/// `π* ∝ J·g^{1/α}`, after checking numerically along `nest` that
/// `∫Jg^{1/α}` and `∫Jg^{1+1/α}` are finite.
///
/// The density lives on the grid of the deepest nest box. It is flagged
/// proper when `∫Jg^{1/α}` converges along the nest.
pub fn properize(
    j: PointFn,
    g: PointFn,
    alpha: AlphaParams,
    nest: &CompactNest,
    opts: NestOptions,
) -> Result<(GridDensity, ProperizeReport)> {
    let a = alpha.value();
    let ev = evaluate(j, g, nest, opts)?;
    let log_h1 = ev.log_jg(1.0 / a);
    let log_h2 = ev.log_jg(1.0 + 1.0 / a);
    let names = [integral_name("(1/alpha)"), integral_name("(1+1/alpha)")];
    let tests = [ev.test(&names[0], &log_h1), ev.test(&names[1], &log_h2)];
    let mut warnings = Vec::new();
    for t in &tests {
        match t.verdict {
            Verdict::Divergent => {
                return Err(Error::HypothesisFailed {
                    integral: t.integral.clone(),
                    detail: format!("diverges along the nest (last shell ratios {:?})", tail_ratios(t)),
                })
            }
            Verdict::Inconclusive => warnings.push(format!(
                "{} is inconclusive along the nest (last shell ratios {:?})",
                t.integral,
                tail_ratios(t)
            )),
            Verdict::Convergent => {}
        }
    }
    let moment_test = ev.test(&integral_name("1"), &ev.log_jg(1.0));
    let class_statement = match moment_test.verdict {
        Verdict::Convergent => "integral of J*g converges: the class of priors with finite integral of pi*g \
                                contains the Jeffreys-weighted priors"
            .to_string(),
        Verdict::Divergent => "integral of J*g diverges: pi* is the reference prior over the priors with \
                               finite integral of pi*g"
            .to_string(),
        Verdict::Inconclusive => "integral of J*g is inconclusive along the nest".to_string(),
    };
    let i1 = ev.integral(&log_h1);
    let i2 = ev.integral(&log_h2);
    let c = i2.value / i1.value;
    let c_error_estimate = c * (i1.error_estimate / i1.value + i2.error_estimate / i2.value);
    let properness = if tests[0].verdict == Verdict::Convergent {
        Properness::Proper
    } else {
        Properness::Unknown
    };
    let density = GridDensity::from_log_values(nest.space().clone(), ev.ng.grid.clone(), log_h1)?
        .with_properness(properness);
    let report = ProperizeReport {
        alpha: a,
        hypothesis_tests: tests.to_vec(),
        moment_test,
        c,
        c_error_estimate,
        integrals: [i1, i2],
        deepest_box: nest.box_at(opts.depth),
        properness,
        class_statement,
        alternative: KL_ALTERNATIVE.to_string(),
        warnings,
    };
    Ok((density, report))
}

fn tail_ratios(t: &HypothesisTest) -> Vec<f64> {
    t.ratios.iter().rev().take(3).rev().copied().collect()
}

/// Largest shell-to-first-box ratio of the `g` scale still read as vanishing.
const VANISH_RATIO: f64 = 0.1;

/// Quasi reference prior `π* ∝ J·g^{1/α}` for a `g` that vanishes at the
/// improper boundary, where `∫Jg` diverges but `∫Jg^{1+1/α}` converges.
///
/// `c_sequence` gives the moment targets on the nest boxes; by default every
/// box uses `∫_{Θ_0} Jg^{1+1/α} / ∫_{Θ_0} Jg^{1/α}`. Each box's Lagrange
/// solution is reported with its positivity flag.
pub fn quasi_properize(
    j: PointFn,
    g: PointFn,
    alpha: AlphaParams,
    nest: &CompactNest,
    opts: NestOptions,
    c_sequence: Option<&[f64]>,
) -> Result<(GridDensity, QuasiReport)> {
    let a = alpha.value();
    let ev = evaluate(j, g, nest, opts)?;
    let log_h1 = ev.log_jg(1.0 / a);
    let log_h2 = ev.log_jg(1.0 + 1.0 / a);
    let t_g = ev.test(&integral_name("1"), &ev.log_jg(1.0));
    let t_2 = ev.test(&integral_name("(1+1/alpha)"), &log_h2);
    let mut warnings = Vec::new();
    match t_g.verdict {
        Verdict::Divergent => {}
        Verdict::Convergent => {
            return Err(Error::HypothesisFailed {
                integral: t_g.integral.clone(),
                detail: "converges along the nest, so properize applies instead".into(),
            })
        }
        Verdict::Inconclusive => {
            return Err(Error::HypothesisFailed {
                integral: t_g.integral.clone(),
                detail: format!("divergence not established (last shell ratios {:?})", tail_ratios(&t_g)),
            })
        }
    }
    match t_2.verdict {
        Verdict::Convergent => {}
        Verdict::Divergent => {
            return Err(Error::HypothesisFailed {
                integral: t_2.integral.clone(),
                detail: format!("diverges along the nest (last shell ratios {:?})", tail_ratios(&t_2)),
            })
        }
        Verdict::Inconclusive => warnings.push(format!(
            "{} is inconclusive along the nest (last shell ratios {:?})",
            t_2.integral,
            tail_ratios(&t_2)
        )),
    }

    // Jg-weighted mean of g^{1/α} on the deepest shell against the first box
    let depth = opts.depth;
    let s_g = ev.ng.log_shell_integrals(&ev.log_jg(1.0));
    let s_2 = ev.ng.log_shell_integrals(&log_h2);
    let g_vanishing_ratio = if depth == 0 {
        1.0
    } else {
        (a * ((s_2[depth] - s_g[depth]) - (s_2[0] - s_g[0]))).exp()
    };
    if !(g_vanishing_ratio <= VANISH_RATIO) {
        return Err(Error::GMustVanish(g_vanishing_ratio));
    }

    let c_sequence: Vec<f64> = match c_sequence {
        Some(cs) => {
            if cs.len() <= depth {
                return Err(Error::invalid(format!(
                    "c sequence has {} entries, the nest needs {}",
                    cs.len(),
                    depth + 1
                )));
            }
            if let Some(c) = cs.iter().find(|c| !(**c > 0.0) || !c.is_finite()) {
                return Err(Error::invalid(format!("c sequence entries must be positive, got {c}")));
            }
            cs[..=depth].to_vec()
        }
        None => {
            let inner: Vec<bool> = ev.node_levels().iter().map(|l| *l == 0).collect();
            let c0 = box0_ratio(&ev, &inner, &log_h1, &log_h2)?;
            vec![c0; depth + 1]
        }
    };

    let space = nest.space();
    let box_solutions = (0..=depth)
        .map(|i| {
            let bx = nest.box_at(i);
            let solved = grid_on_box(space, &bx, opts.inner_nodes).and_then(|grid| {
                let spec = ConstraintSpec::new().with("g", tabulated(g, &grid), c_sequence[i]);
                let jd = jeffreys_on(j, space, grid)?;
                solve_constrained_reference(&jd, &spec, alpha)
            });
            match solved {
                Ok(sol) => BoxSolution {
                    nest_index: i,
                    c: c_sequence[i],
                    positive: !sol.boundary_of_class,
                    lambdas: sol.lambdas,
                    message: None,
                },
                Err(e) => BoxSolution {
                    nest_index: i,
                    c: c_sequence[i],
                    lambdas: Vec::new(),
                    positive: false,
                    message: Some(e.to_string()),
                },
            }
        })
        .collect();

    let prior_moment = ev.integral(&log_h2);
    let density = GridDensity::from_log_values(space.clone(), ev.ng.grid.clone(), log_h1)?
        .with_properness(Properness::Improper);
    let report = QuasiReport {
        alpha: a,
        prior_moment_finite: t_2.verdict == Verdict::Convergent && prior_moment.value.is_finite(),
        hypothesis_tests: vec![t_g, t_2],
        g_vanishing_ratio,
        prior_moment,
        c_sequence,
        box_solutions,
        alternative: KL_ALTERNATIVE.to_string(),
        warnings,
    };
    Ok((density, report))
}

/// Ratio of the two hypothesis integrals over the first nest box.
fn box0_ratio(ev: &NestEvaluation, inner: &[bool], log_h1: &[f64], log_h2: &[f64]) -> Result<f64> {
    let r = &ev.ng.ranges[0];
    let axes: Vec<Vec<f64>> = r
        .iter()
        .enumerate()
        .map(|(ax, &(a, b))| ev.ng.grid.axis(ax)[a..=b].to_vec())
        .collect();
    let sub = Grid::new(axes)?;
    let pick = |logs: &[f64]| -> Vec<f64> {
        logs.iter()
            .zip(inner)
            .filter(|(_, keep)| **keep)
            .map(|(v, _)| *v)
            .collect()
    };
    // nodes of level 0 are exactly the box-0 sub-grid, in row-major order
    Ok((log_trapezoid(&sub, &pick(log_h2)) - log_trapezoid(&sub, &pick(log_h1))).exp())
}

fn jeffreys_on(j: PointFn, space: &crate::space::ParamSpace, grid: Grid) -> Result<GridDensity> {
    let vals = (0..grid.len()).map(|i| j(&grid.node(i))).collect();
    GridDensity::from_values(space.clone(), grid, vals)
}

/// `g` tabulated at the nodes of `grid`, as an owned closure that the
/// constraint solver can hold. Only node coordinates are looked up.
fn tabulated(g: PointFn, grid: &Grid) -> impl Fn(&[f64]) -> f64 + Send + Sync + 'static {
    let values: Vec<f64> = (0..grid.len()).map(|i| g(&grid.node(i))).collect();
    let grid = grid.clone();
    move |t: &[f64]| {
        let idx: Vec<usize> = t
            .iter()
            .enumerate()
            .map(|(a, x)| grid.axis(a).binary_search_by(|v| v.total_cmp(x)).unwrap_or(0))
            .collect();
        values[grid.flat_index(&idx)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{Edge, ParamSpace};

    fn unit_nest() -> CompactNest {
        CompactNest::new(ParamSpace::interval(0.0, 1.0).unwrap().with_power_law(Edge::lower(0)))
    }

    fn half() -> AlphaParams {
        AlphaParams::new(0.5).unwrap()
    }

    #[test]
    fn power_moment_on_unit_interval() {
        let nest = unit_nest();
        for beta in [0.1, 0.3, 1.0] {
            let g = move |t: &[f64]| t[0].powf(beta);
            let (d, rep) = properize(&|t| 1.0 / t[0], &g, half(), &nest, NestOptions::default()).unwrap();
            assert_eq!(rep.properness, Properness::Proper);
            let expect = GridDensity::from_values(
                nest.space().clone(),
                d.grid().clone(),
                d.grid().axis(0).iter().map(|t| t.powf(beta / 0.5 - 1.0)).collect(),
            )
            .unwrap();
            assert!(d.class_log_distance(&expect).unwrap() < 1e-12);
            // c = ∫θ^{3β−1}/∫θ^{2β−1} on [θ_6, 1]
            let lo: f64 = nest.box_at(6)[0].0;
            let oracle = ((1.0 - lo.powf(3.0 * beta)) / (3.0 * beta)) / ((1.0 - lo.powf(2.0 * beta)) / (2.0 * beta));
            assert!((rep.c - oracle).abs() <= 3.0 * rep.c_error_estimate + 1e-9, "{} {} {}", rep.c, oracle, rep.c_error_estimate);
        }
    }

    #[test]
    fn constant_moment_fails() {
        let r = properize(&|t| 1.0 / t[0], &|_| 1.0, half(), &unit_nest(), NestOptions::default());
        match r {
            Err(Error::HypothesisFailed { integral, .. }) => assert!(integral.contains("1/alpha")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_positive_g() {
        let r = properize(&|t| 1.0 / t[0], &|t| t[0] - 0.5, half(), &unit_nest(), NestOptions::default());
        assert!(matches!(r, Err(Error::NonPositiveG { .. })));
    }

    #[test]
    fn quasi_examples() {
        let nest = unit_nest();
        let opts = NestOptions::default();
        let r = quasi_properize(&|t| 1.0 / t[0], &|t| t[0].sqrt(), half(), &nest, opts, None);
        assert!(matches!(r, Err(Error::HypothesisFailed { .. })));

        let (d, rep) = quasi_properize(&|t| t[0].powi(-2), &|t| t[0], half(), &nest, opts, None).unwrap();
        let v = d.max_scaled_values();
        assert!(v.iter().all(|x| (x - 1.0).abs() < 1e-12));
        assert!(rep.prior_moment_finite);
        let lo = nest.box_at(opts.depth)[0].0;
        assert!((rep.prior_moment.value - (1.0 - lo * lo) / 2.0).abs() < 1e-3);
        assert_eq!(rep.box_solutions.len(), opts.depth + 1);

        assert!(rep.g_vanishing_ratio < 1e-3);
    }

    #[test]
    fn g_bounded_away_fails() {
        let r = quasi_properize(&|t| 1.0 / t[0], &|t| 1.0 / (1.0 + t[0]), half(), &unit_nest(), NestOptions::default(), None);
        assert!(matches!(r, Err(Error::HypothesisFailed { .. })));
    }
}
