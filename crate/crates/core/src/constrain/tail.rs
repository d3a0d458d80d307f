//! Decay rates of Jeffreys densities at a boundary point and the power-law
//! quasi reference priors they determine.

use serde::Serialize;

use crate::density::{GridDensity, Properness};
use crate::error::{Error, Result};
use crate::grid::{log_integral_loglinear, Grid};
use crate::space::{AlphaParams, CompactNest, Edge, ParamSpace};

/// A boundary point of a one-dimensional parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Finite(f64),
    PosInf,
    NegInf,
}

impl Boundary {
    /// `ln|θ − b|`, or `ln|θ|` for an infinite boundary.
    fn log_distance(self, theta: f64) -> f64 {
        match self {
            Boundary::Finite(b) => (theta - b).abs().ln(),
            Boundary::PosInf | Boundary::NegInf => theta.abs().ln(),
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Boundary::Finite(_))
    }
}

/// `J(θ) ~ C|θ−b|^a` as `θ → b` (or `C|θ|^a` for infinite `b`).
#[derive(Debug, Clone, Serialize)]
pub struct PowerLawTail {
    pub boundary: Boundary,
    pub exponent: f64,
    pub match_constant: f64,
    pub fit_window: (f64, f64),
    pub fit_residual: f64,
    pub nodes_used: usize,
}

/// Regression tolerance on the RMS residual of the log-log fit.
pub const TAIL_FIT_TOLERANCE: f64 = 0.05;

/// Least-squares fit of `ln J` against `ln|θ−b|` over the nodes inside
/// `window` (given in `θ` coordinates).
pub fn estimate_decay_exponent(
    thetas: &[f64],
    values: &[f64],
    boundary: Boundary,
    window: (f64, f64),
) -> Result<PowerLawTail> {
    if thetas.len() != values.len() {
        return Err(Error::invalid("thetas and values differ in length"));
    }
    let (lo, hi) = (window.0.min(window.1), window.0.max(window.1));
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in thetas.iter().zip(values) {
        if t >= lo && t <= hi {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("Jeffreys value {v} at {t} must be positive and finite")));
            }
            let x = boundary.log_distance(t);
            if !x.is_finite() {
                return Err(Error::BoundaryPoint(vec![t]));
            }
            xs.push(x);
            ys.push(v.ln());
        }
    }
    if xs.len() < 10 {
        return Err(Error::invalid(format!(
            "fit window [{lo}, {hi}] holds {} nodes, at least 10 are needed",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::invalid("fit window nodes are all at the same distance from the boundary"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    if rms > TAIL_FIT_TOLERANCE {
        return Err(Error::TailNotPowerLaw(rms));
    }
    Ok(PowerLawTail {
        boundary,
        exponent: slope,
        match_constant: intercept.exp(),
        fit_window: (lo, hi),
        fit_residual: rms,
        nodes_used: xs.len(),
    })
}

/// Samples `j` at `n` log-spaced distances from the boundary across `window`
/// and fits the decay exponent.
pub fn estimate_decay_exponent_fn(
    j: &dyn Fn(f64) -> f64,
    boundary: Boundary,
    window: (f64, f64),
    n: usize,
) -> Result<PowerLawTail> {
    let (lo, hi) = (window.0.min(window.1), window.0.max(window.1));
    let thetas: Vec<f64> = match boundary {
        Boundary::Finite(b) => {
            let (d0, d1) = ((lo - b).abs(), (hi - b).abs());
            let (dmin, dmax) = (d0.min(d1), d0.max(d1));
            let sign = if lo >= b { 1.0 } else { -1.0 };
            log_space(dmin, dmax, n).into_iter().map(|d| b + sign * d).collect()
        }
        Boundary::PosInf => log_space(lo, hi, n),
        Boundary::NegInf => log_space(-hi, -lo, n).into_iter().map(|d| -d).collect(),
    };
    if thetas.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("fit window must be finite and on one side of the boundary"));
    }
    let values: Vec<f64> = thetas.iter().map(|&t| j(t)).collect();
    estimate_decay_exponent(&thetas, &values, boundary, (lo, hi))
}

fn log_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n.max(2) - 1) as f64).exp())
        .collect()
}

/// The power density `|θ−b|^a` (or `|θ|^a`) on `grid`, flagged improper.
pub fn power_quasi_reference(tail: &PowerLawTail, space: &ParamSpace, grid: &Grid) -> Result<GridDensity> {
    let a = tail.exponent;
    match tail.boundary {
        Boundary::Finite(_) if a > -1.0 => {
            return Err(Error::DecayRegime(format!(
                "exponent {a} > -1 at a finite boundary \
                 makes the Jeffreys density integrable there (the proper-limit case)"
            )))
        }
        Boundary::PosInf | Boundary::NegInf if a < -1.0 => {
            return Err(Error::DecayRegime(format!(
                "exponent {a} < -1 at an infinite boundary \
                 makes the Jeffreys density integrable there (the proper-limit case)"
            )))
        }
        _ => {}
    }
    if grid.dim() != 1 || space.dim() != 1 {
        return Err(Error::invalid("power-law quasi reference priors are one-dimensional"));
    }
    let logs = grid
        .axis(0)
        .iter()
        .map(|&t| a * tail.boundary.log_distance(t))
        .collect();
    Ok(GridDensity::from_log_values(space.clone(), grid.clone(), logs)?.with_properness(Properness::Improper))
}

/// Lower edge `θ_i = 10^{−(i+1)}` of the default nest of `(0, 1]`.
pub fn unit_nest_edge(nest_index: usize) -> f64 {
    let space = ParamSpace::interval(0.0, 1.0)
        .expect("static bounds")
        .with_power_law(Edge::lower(0));
    CompactNest::new(space).edge_at(Edge::lower(0), nest_index)
}

/// Nodes per unit of `ln θ` in the ψ quadratures.
const PSI_NODES_PER_LOG_UNIT: f64 = 200.0;

/// `ψ_i(u)` and `ψ̃_i(u)` on `Θ_i = [θ_i, 1]`:
///
/// ```text
/// ψ_i(u) = −∫ J^{−α} θ^{u(1+α)} / (∫ θ^u)^{1+α}
/// ```
///
/// and `ψ̃_i` with `θ^{−aα}` in place of `J^{−α}`.
pub fn psi_evaluate(
    j: &dyn Fn(f64) -> f64,
    a: f64,
    alpha: AlphaParams,
    nest_index: usize,
    u: f64,
) -> Result<(f64, f64)> {
    let theta_i = unit_nest_edge(nest_index);
    let pre = PsiQuadrature::new(j, theta_i, alpha)?;
    Ok(pre.eval(a, u))
}

/// Precomputed `ln J` on a uniform grid in `s = ln θ`.
struct PsiQuadrature {
    s: Vec<f64>,
    log_j: Vec<f64>,
    alpha: f64,
}

impl PsiQuadrature {
    fn new(j: &dyn Fn(f64) -> f64, theta_i: f64, alpha: AlphaParams) -> Result<Self> {
        let s0 = theta_i.ln();
        let n = ((-s0) * PSI_NODES_PER_LOG_UNIT).ceil().max(200.0) as usize + 1;
        let s: Vec<f64> = (0..n).map(|k| s0 * (1.0 - k as f64 / (n - 1) as f64)).collect();
        let mut log_j = Vec::with_capacity(n);
        for &sk in &s {
            let v = j(sk.exp());
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::non_finite("Jeffreys density in psi integrals", &[sk.exp()]));
            }
            log_j.push(v.ln());
        }
        Ok(PsiQuadrature {
            s,
            log_j,
            alpha: alpha.value(),
        })
    }

    fn eval(&self, a: f64, u: f64) -> (f64, f64) {
        let al = self.alpha;
        // dθ = θ ds
        let num: Vec<f64> = self
            .s
            .iter()
            .zip(&self.log_j)
            .map(|(s, lj)| -al * lj + (u * (1.0 + al) + 1.0) * s)
            .collect();
        let num_tilde: Vec<f64> = self.s.iter().map(|s| (-a * al + u * (1.0 + al) + 1.0) * s).collect();
        let den: Vec<f64> = self.s.iter().map(|s| (u + 1.0) * s).collect();
        let ld = log_integral_loglinear(&self.s, &den);
        let psi = -(log_integral_loglinear(&self.s, &num) - (1.0 + al) * ld).exp();
        let psi_t = -(log_integral_loglinear(&self.s, &num_tilde) - (1.0 + al) * ld).exp();
        (psi, psi_t)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayDiagnostics {
    pub nest_index: usize,
    pub theta_i: f64,
    pub u_grid: Vec<f64>,
    pub psi_values: Vec<f64>,
    pub psi_tilde_values: Vec<f64>,
    pub argmax: f64,
    pub psi_max: f64,
}

/// Default ψ search interval `[a−3, min(a+3, u_m − 10⁻³)]`, with
/// `u_m = (αa−1)/(1+α)` applied when `a < −1`.
pub fn default_psi_interval(a: f64, alpha: AlphaParams) -> (f64, f64) {
    let al = alpha.value();
    let hi = if a < -1.0 {
        (a + 3.0).min((al * a - 1.0) / (1.0 + al) - 1e-3)
    } else {
        a + 3.0
    };
    (a - 3.0, hi)
}

const PSI_SWEEP_POINTS: usize = 121;

/// Maximizes `ψ_i` over `u`: a sweep of the interval followed by golden
/// section search around the best sweep point.
pub fn psi_argmax(
    j: &dyn Fn(f64) -> f64,
    a: f64,
    alpha: AlphaParams,
    nest_index: usize,
    interval: Option<(f64, f64)>,
) -> Result<DecayDiagnostics> {
    let (lo, hi) = interval.unwrap_or_else(|| default_psi_interval(a, alpha));
    if !(lo < hi) {
        return Err(Error::invalid(format!("empty search interval [{lo}, {hi}]")));
    }
    if !(a >= lo && a <= hi) {
        return Err(Error::invalid(format!("search interval [{lo}, {hi}] must contain a = {a}")));
    }
    let theta_i = unit_nest_edge(nest_index);
    let q = PsiQuadrature::new(j, theta_i, alpha)?;
    let u_grid: Vec<f64> = (0..PSI_SWEEP_POINTS)
        .map(|k| lo + (hi - lo) * k as f64 / (PSI_SWEEP_POINTS - 1) as f64)
        .collect();
    let mut psi_values = Vec::with_capacity(PSI_SWEEP_POINTS);
    let mut psi_tilde_values = Vec::with_capacity(PSI_SWEEP_POINTS);
    for &u in &u_grid {
        let (p, pt) = q.eval(a, u);
        if !p.is_finite() || !pt.is_finite() {
            return Err(Error::non_finite("psi", &[u]));
        }
        psi_values.push(p);
        psi_tilde_values.push(pt);
    }
    let best = psi_values
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .map(|(k, _)| k)
        .unwrap();
    if best == 0 || best == PSI_SWEEP_POINTS - 1 {
        return Err(Error::EnlargeSearchInterval(u_grid[best]));
    }
    let f = |u: f64| q.eval(a, u).0;
    let (argmax, psi_max) = golden_max(&f, u_grid[best - 1], u_grid[best + 1], 1e-9);
    Ok(DecayDiagnostics {
        nest_index,
        theta_i,
        u_grid,
        psi_values,
        psi_tilde_values,
        argmax,
        psi_max,
    })
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half() -> AlphaParams {
        AlphaParams::new(0.5).unwrap()
    }

    #[test]
    fn exact_power_law_fit() {
        let t = estimate_decay_exponent_fn(&|t| 1.0 / t, Boundary::Finite(0.0), (1e-6, 1e-2), 40).unwrap();
        assert!((t.exponent + 1.0).abs() < 1e-12);
        assert!((t.match_constant - 1.0).abs() < 1e-10);
        for window in [(1e-9, 1e-7), (1e-3, 0.5), (2.0, 50.0)] {
            let t = estimate_decay_exponent_fn(&|t| 3.5 * t.powf(-1.7), Boundary::Finite(0.0), window, 25).unwrap();
            assert!((t.exponent + 1.7).abs() < 1e-6 && (t.match_constant - 3.5).abs() < 1e-6);
        }
    }

    #[test]
    fn corrected_power_law_fit() {
        let j = |t: f64| t.powf(-1.5) * (1.0 + t);
        let t = estimate_decay_exponent_fn(&j, Boundary::Finite(0.0), (1e-6, 1e-3), 30).unwrap();
        assert!((t.exponent + 1.5).abs() < 0.01);
    }

    #[test]
    fn exponential_tail_is_rejected() {
        let r = estimate_decay_exponent_fn(&|t| (-t).exp(), Boundary::PosInf, (1.0, 50.0), 40);
        assert!(matches!(r, Err(Error::TailNotPowerLaw(_))));
    }

    #[test]
    fn too_few_nodes() {
        assert!(estimate_decay_exponent_fn(&|t| 1.0 / t, Boundary::Finite(0.0), (1e-3, 1e-2), 9).is_err());
    }

    fn tail(boundary: Boundary, exponent: f64) -> PowerLawTail {
        PowerLawTail {
            boundary,
            exponent,
            match_constant: 1.0,
            fit_window: (0.0, 0.0),
            fit_residual: 0.0,
            nodes_used: 10,
        }
    }

    #[test]
    fn quasi_reference_regimes() {
        let s = ParamSpace::interval(0.0, f64::INFINITY).unwrap().with_power_law(Edge::lower(0));
        let g = crate::grid::make_grid(&s, Some(2), 21).unwrap();
        for b in [Boundary::Finite(0.0), Boundary::PosInf] {
            let d = power_quasi_reference(&tail(b, -1.0), &s, &g).unwrap();
            for (x, v) in g.axis(0).iter().zip(d.values()) {
                assert!((v * x - 1.0).abs() < 1e-12);
            }
            assert_eq!(d.properness(), Properness::Improper);
        }
        assert!(matches!(
            power_quasi_reference(&tail(Boundary::Finite(0.0), -0.5), &s, &g),
            Err(Error::DecayRegime(_))
        ));
        assert!(matches!(
            power_quasi_reference(&tail(Boundary::PosInf, -1.5), &s, &g),
            Err(Error::DecayRegime(_))
        ));
    }

    #[test]
    fn psi_coincides_for_exact_power_law() {
        for u in [-3.5, -2.0, -1.6] {
            let (p, pt) = psi_evaluate(&|t| t.powi(-2), -2.0, half(), 3, u).unwrap();
            assert!(p < 0.0);
            assert!((p - pt).abs() <= 1e-12 * p.abs());
        }
    }

    #[test]
    fn psi_tilde_scaled_limit() {
        // θ_i^{α(a+1)} ψ̃_i(a) → −|a+1|^α
        let a = -2.0;
        for (i, tol) in [(3usize, 1e-3), (7, 1e-7)] {
            let th = unit_nest_edge(i);
            let (_, pt) = psi_evaluate(&|t| t.powf(a), a, half(), i, a).unwrap();
            let scaled = th.powf(0.5 * (a + 1.0)) * pt;
            assert!((scaled + 1.0).abs() < tol, "{scaled}");
        }
    }

    #[test]
    fn psi_argmax_exact_power_law() {
        for i in [1usize, 3, 5] {
            let d = psi_argmax(&|t| t.powi(-2), -2.0, half(), i, None).unwrap();
            assert!((d.argmax + 2.0).abs() < 1e-5, "i={i}: {}", d.argmax);
        }
    }

    #[test]
    fn psi_argmax_edge_error() {
        let r = psi_argmax(&|t| t.powi(-2), -2.0, half(), 3, Some((-2.0, -1.9)));
        assert!(matches!(r, Err(Error::EnlargeSearchInterval(_))));
    }
}
