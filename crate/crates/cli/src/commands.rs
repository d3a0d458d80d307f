//! One function per subcommand.

use std::path::Path;

use refprior_core::constrain::{
    estimate_decay_exponent_fn, feasible_perturbations, power_quasi_reference, properize as properize_prior,
    psi_argmax, quasi_properize, solve_constrained_reference, Boundary, ConstraintSpec, NestOptions, Verdict,
};
use refprior_core::fisher::{jeffreys_density, jeffreys_value, FisherField, FisherMethod, DEFAULT_MC_SAMPLES};
use refprior_core::functional::{l_functional, mutual_info_limit_check, McParams};
use refprior_core::grid::grid_on_box;
use refprior_core::hierarchy::{sequential_reference, BlockOrdering, HierarchyOptions};
use refprior_core::mcmc::{kde_values, log_posterior, rw_metropolis, silverman_bandwidth, MetropolisOptions};
use refprior_core::models::two_piece::{twopiece_proper_prior_value, twopiece_sample};
use refprior_core::models::{Family, TwoPiece, TwoPieceGamma, TwoPieceParams};
use refprior_core::{AlphaParams, CompactNest, Edge, Grid, GridDensity, Model, ParamSpace, Side};
use serde_json::{json, Value};

use crate::config::{BoundaryConfig, FunctionConfig, LoadedConfig, PriorChoice};
use crate::plot::LinePlot;
use crate::report::{write_csv, write_text};
use crate::{CliError, Outcome};

struct Setup {
    model: Box<dyn Model>,
    window: Vec<(f64, f64)>,
    alpha: AlphaParams,
    method: FisherMethod,
}

fn setup(cfg: &LoadedConfig) -> Result<Setup, CliError> {
    let model = cfg.model.build()?;
    let window = cfg.model.window_box()?;
    let alpha = AlphaParams::new(cfg.run.alpha)?;
    let center: Vec<f64> = window.iter().map(|(a, b)| 0.5 * (a + b)).collect();
    let method = if model.closed_form_fisher(&center).is_some() {
        FisherMethod::ClosedForm
    } else {
        FisherMethod::McScore
    };
    Ok(Setup {
        model,
        window,
        alpha,
        method,
    })
}

impl Setup {
    fn field(&self, seed: u64) -> FisherField<'_> {
        FisherField::new(self.model.as_ref(), self.method).with_mc(DEFAULT_MC_SAMPLES, seed)
    }

    fn window_grid(&self, nodes: usize) -> Result<Grid, CliError> {
        Ok(grid_on_box(self.model.space(), &self.window, nodes)?)
    }

    fn window_space(&self) -> Result<ParamSpace, CliError> {
        Ok(ParamSpace::from_box(&self.window)?)
    }
}

fn axis_names(d: usize) -> Vec<String> {
    (0..d).map(|a| format!("theta{a}")).collect()
}

fn write_density(path: &Path, d: &GridDensity) -> Result<(), CliError> {
    let g = d.grid();
    let mut header = axis_names(g.dim());
    header.push("log_density".into());
    header.push("density".into());
    let n = d.normalize().ok();
    write_csv(
        path,
        &header,
        (0..g.len()).map(|i| {
            let mut row = g.node(i);
            row.push(d.log_value(i));
            row.push(n.as_ref().map_or(f64::NAN, |n| n.value(i)));
            row
        }),
    )
}

/// One-dimensional slices through the middle node along each axis, scaled
/// to a maximum of one.
fn slice_plot(title: &str, d: &GridDensity) -> LinePlot {
    let g = d.grid();
    let mid: Vec<usize> = g.shape().iter().map(|n| n / 2).collect();
    let mut plot = LinePlot::new(title, "coordinate", "density (slice maximum = 1)");
    for a in 0..g.dim() {
        let mut idx = mid.clone();
        let logs: Vec<f64> = (0..g.axis(a).len())
            .map(|k| {
                idx[a] = k;
                d.log_value(g.flat_index(&idx))
            })
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        plot.add(
            format!("theta{a}"),
            g.axis(a).to_vec(),
            logs.iter().map(|l| (l - max).exp()).collect(),
        );
    }
    plot
}

fn verdict_label(v: Verdict) -> &'static str {
    match v {
        Verdict::Convergent => "integrable",
        Verdict::Divergent => "improper",
        Verdict::Inconclusive => "inconclusive",
    }
}

pub fn jeffreys(cfg: &LoadedConfig, out: &Path) -> Result<Outcome, CliError> {
    let s = setup(cfg)?;
    let grid = s.window_grid(cfg.run.nodes)?;
    let field = s.field(cfg.run.seed);
    let jg = jeffreys_density(&field, &grid)?;
    let density = GridDensity::from_log_values(s.window_space()?, grid.clone(), jg.density.log_values())?;
    write_density(&out.join("jeffreys.csv"), &density)?;
    write_text(
        &out.join("jeffreys.svg"),
        &slice_plot(&format!("Jeffreys density slices, {}", s.model.name()), &density).to_svg(),
    )?;

    let space = s.model.space();
    let mut boundaries = Vec::new();
    for edge in space.open_edges() {
        let sub = space.window_with_edges(&s.window, &[edge])?;
        let nest = CompactNest::new(sub);
        let opts = NestOptions {
            depth: cfg.run.nest_depth,
            ..Default::default()
        };
        let t = refprior_core::constrain::nest_test("Jeffreys density", &nest, opts, &|t| {
            jeffreys_value(&field, t).map_or(f64::NAN, f64::ln)
        })?;
        let side = match edge.side {
            Side::Lower => "lower",
            Side::Upper => "upper",
        };
        println!(
            "axis {} {side} edge ({}): {}",
            edge.axis,
            space.bound(edge),
            verdict_label(t.verdict)
        );
        boundaries.push(json!({
            "axis": edge.axis,
            "side": side,
            "bound": bound_json(space.bound(edge)),
            "verdict": verdict_label(t.verdict),
            "ratios": t.ratios,
        }));
    }
    let mut warnings = Vec::new();
    if !jg.clamped.is_empty() {
        warnings.push(format!("{} nodes had a non-positive Fisher determinant", jg.clamped.len()));
    }
    Ok(Outcome {
        results: json!({
            "model": s.model.name(),
            "fisher_method": s.method,
            "window": s.window,
            "nodes": grid.len(),
            "boundaries": boundaries,
            "files": ["jeffreys.csv", "jeffreys.svg"],
        }),
        warnings,
    })
}

fn bound_json(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn function_of(f: &FunctionConfig) -> impl Fn(&[f64]) -> f64 + Send + Sync + 'static {
    let f = f.clone();
    move |t: &[f64]| f.eval(t)
}

pub fn constrain(cfg: &LoadedConfig, out: &Path) -> Result<Outcome, CliError> {
    let s = setup(cfg)?;
    let dim = s.model.space().dim();
    let grid = s.window_grid(cfg.run.nodes)?;
    let jg = jeffreys_density(&s.field(cfg.run.seed), &grid)?;
    let jeffreys = GridDensity::from_log_values(s.window_space()?, grid, jg.density.log_values())?;
    let mut spec = ConstraintSpec::new();
    for c in &cfg.run.constraints {
        c.function.validate(dim)?;
        spec = spec.with(c.function.label(), function_of(&c.function), c.target);
    }
    let sol = solve_constrained_reference(&jeffreys, &spec, s.alpha)?;
    let perturbed = feasible_perturbations(&sol, &spec, 100, cfg.run.seed)?;
    let best_other = perturbed
        .iter()
        .map(|p| l_functional(p, &jeffreys, s.alpha).map(|l| l.value))
        .collect::<refprior_core::Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    write_density(&out.join("prior.csv"), &sol.prior)?;
    write_text(
        &out.join("prior.svg"),
        &slice_plot("Constrained reference prior slices", &sol.prior).to_svg(),
    )?;
    Ok(Outcome {
        results: json!({
            "constraints": spec.names(),
            "targets": spec.targets(),
            "solution": sol,
            "perturbations": perturbed.len(),
            "max_perturbed_l": best_other,
            "optimality_margin": sol.l_value.value - best_other,
            "files": ["prior.csv", "prior.svg"],
        }),
        warnings: sol.warnings.clone(),
    })
}

fn nest_options(cfg: &LoadedConfig) -> NestOptions {
    NestOptions {
        depth: cfg.run.nest_depth,
        ..Default::default()
    }
}

pub fn properize(cfg: &LoadedConfig, out: &Path) -> Result<Outcome, CliError> {
    let s = setup(cfg)?;
    let pc = cfg
        .run
        .properize
        .as_ref()
        .ok_or_else(|| CliError::Config("missing 'properize' section".into()))?;
    let dim = s.model.space().dim();
    pc.g.validate(dim)?;
    if pc.expand_axes.iter().any(|a| *a >= dim) {
        return Err(CliError::Config(format!("expand_axes must lie in 0..{dim}")));
    }
    let edges: Vec<Edge> = pc
        .expand_axes
        .iter()
        .flat_map(|&a| [Edge::lower(a), Edge::upper(a)])
        .filter(|e| s.model.space().is_open(*e))
        .collect();
    let nest = CompactNest::new(s.model.space().window_with_edges(&s.window, &edges)?);
    let field = s.field(cfg.run.seed);
    let j = |t: &[f64]| jeffreys_value(&field, t).unwrap_or(f64::NAN);
    let g = |t: &[f64]| pc.g.eval(t);
    let opts = nest_options(cfg);
    let (density, report, warnings) = if pc.quasi {
        let (d, r) = quasi_properize(&j, &g, s.alpha, &nest, opts, pc.c_sequence.as_deref())?;
        let w = r.warnings.clone();
        (d, serde_json::to_value(&r).unwrap_or(Value::Null), w)
    } else {
        let (d, r) = properize_prior(&j, &g, s.alpha, &nest, opts)?;
        let w = r.warnings.clone();
        (d, serde_json::to_value(&r).unwrap_or(Value::Null), w)
    };
    // two-piece with g = (σ₁σ₂)^ε has the closed form π*_γ, γ = ε/α
    let closed_form = match (&cfg.model.family, &pc.g) {
        (Family::TwoPiece, FunctionConfig::ProductPower { axes, power }) if sorted(axes) == vec![1, 2] => {
            let gamma = power / s.alpha.value();
            let grid = density.grid();
            let cf = GridDensity::from_values(
                density.space().clone(),
                grid.clone(),
                (0..grid.len()).map(|i| twopiece_proper_prior_value(gamma, &grid.node(i))).collect(),
            )?;
            Some(json!({ "gamma": gamma, "log_ratio_half_range": density.class_log_distance(&cf)? }))
        }
        _ => None,
    };
    write_density(&out.join("prior.csv"), &density)?;
    write_text(
        &out.join("prior.svg"),
        &slice_plot("Properized prior slices", &density).to_svg(),
    )?;
    Ok(Outcome {
        results: json!({
            "g": pc.g.label(),
            "quasi": pc.quasi,
            "nest_depth": opts.depth,
            "report": report,
            "closed_form": closed_form,
            "files": ["prior.csv", "prior.svg"],
        }),
        warnings,
    })
}

fn sorted(v: &[usize]) -> Vec<usize> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v
}

pub fn decay(cfg: &LoadedConfig, out: &Path) -> Result<Outcome, CliError> {
    let s = setup(cfg)?;
    let dc = cfg
        .run
        .decay
        .as_ref()
        .ok_or_else(|| CliError::Config("missing 'decay' section".into()))?;
    let dim = s.model.space().dim();
    if dc.axis >= dim {
        return Err(CliError::Config(format!("decay axis must lie in 0..{dim}")));
    }
    let fixed = match &dc.fixed {
        Some(f) if f.len() == dim => f.clone(),
        Some(f) => return Err(CliError::Config(format!("'fixed' has {} values, model has {dim}", f.len()))),
        None => s.window.iter().map(|(a, b)| 0.5 * (a + b)).collect(),
    };
    let boundary = match dc.boundary {
        BoundaryConfig::Inf => Boundary::PosInf,
        BoundaryConfig::NegInf => Boundary::NegInf,
        BoundaryConfig::Finite(b) => Boundary::Finite(b),
    };
    let field = s.field(cfg.run.seed);
    let along = |x: f64| {
        let mut t = fixed.clone();
        t[dc.axis] = x;
        jeffreys_value(&field, &t).unwrap_or(f64::NAN)
    };
    let tail = estimate_decay_exponent_fn(&along, boundary, (dc.window[0], dc.window[1]), dc.fit_nodes)?;
    let mut warnings = Vec::new();

    let (wlo, whi) = s.window[dc.axis];
    let axis_space = ParamSpace::interval(wlo, whi)?;
    let axis_grid = Grid::new(vec![grid_on_box(&axis_space, &[(wlo, whi)], cfg.run.nodes)?.axis(0).to_vec()])?;
    let quasi = match power_quasi_reference(&tail, &axis_space, &axis_grid) {
        Ok(d) => {
            write_density(&out.join("quasi_prior.csv"), &d)?;
            json!({ "exponent": tail.exponent, "file": "quasi_prior.csv" })
        }
        Err(e @ refprior_core::Error::DecayRegime(_)) => {
            warnings.push(e.to_string());
            Value::Null
        }
        Err(e) => return Err(e.into()),
    };

    let mut psi = Vec::new();
    if !dc.psi_nest_indices.is_empty() {
        if boundary != Boundary::Finite(0.0) {
            return Err(CliError::Config("psi diagnostics need a boundary at 0".into()));
        }
        let mut plot = LinePlot::new("psi_i(u)", "u", "psi");
        for &i in &dc.psi_nest_indices {
            let d = psi_argmax(&along, tail.exponent, s.alpha, i, None)?;
            plot.add(format!("theta_i = {:e}", d.theta_i), d.u_grid.clone(), d.psi_values.clone());
            psi.push(d);
        }
        write_text(&out.join("psi.svg"), &plot.to_svg())?;
    }

    let xs = log_nodes(boundary, dc.window, dc.fit_nodes);
    write_csv(
        &out.join("tail.csv"),
        &["theta".into(), "jeffreys".into(), "fit".into()],
        xs.iter().map(|&x| {
            let dist = match boundary {
                Boundary::Finite(b) => (x - b).abs(),
                _ => x.abs(),
            };
            vec![x, along(x), tail.match_constant * dist.powf(tail.exponent)]
        }),
    )?;
    Ok(Outcome {
        results: json!({
            "axis": dc.axis,
            "fixed": fixed,
            "tail": tail,
            "quasi_reference": quasi,
            "psi": psi,
            "files": ["tail.csv"],
        }),
        warnings,
    })
}

fn log_nodes(boundary: Boundary, window: [f64; 2], n: usize) -> Vec<f64> {
    let (lo, hi) = (window[0].min(window[1]), window[0].max(window[1]));
    let off = match boundary {
        Boundary::Finite(b) if lo >= b => b,
        _ => 0.0,
    };
    let (a, b) = ((lo - off).max(f64::MIN_POSITIVE).ln(), (hi - off).ln());
    (0..n.max(2))
        .map(|i| off + (a + (b - a) * i as f64 / (n.max(2) - 1) as f64).exp())
        .collect()
}

pub fn hierarchy(cfg: &LoadedConfig, out: &Path) -> Result<Outcome, CliError> {
    let s = setup(cfg)?;
    let hc = cfg
        .run
        .hierarchy
        .as_ref()
        .ok_or_else(|| CliError::Config("missing 'hierarchy' section".into()))?;
    let dim = s.model.space().dim();
    let ordering = BlockOrdering::new(hc.block1.clone(), hc.block2.clone(), dim)?;
    let defaults = HierarchyOptions::default();
    let opts = HierarchyOptions {
        block1_nodes: hc.block1_nodes.unwrap_or(defaults.block1_nodes),
        block2_nodes: hc.block2_nodes.unwrap_or(defaults.block2_nodes),
        mc_samples: hc.mc_samples.unwrap_or(defaults.mc_samples),
        seed: cfg.run.seed,
    };
    let r = sequential_reference(s.model.as_ref(), &ordering, s.alpha, &s.window, opts, None)?;
    let reference = if cfg.model.family == Family::TwoPiece && sorted(&hc.block1) == vec![1, 2] {
        let g = r.density.grid();
        let p = GridDensity::from_values(
            r.density.space().clone(),
            g.clone(),
            (0..g.len()).map(|i| twopiece_proper_prior_value(0.5, &g.node(i))).collect(),
        )?;
        Some(json!({ "gamma": 0.5, "log_ratio_half_range": r.density.class_log_distance(&p)? }))
    } else {
        None
    };
    write_density(&out.join("prior.csv"), &r.density)?;
    write_text(
        &out.join("prior.svg"),
        &slice_plot("Sequential reference prior slices", &r.density).to_svg(),
    )?;
    Ok(Outcome {
        results: json!({
            "ordering": r.ordering,
            "options": opts,
            "marginal": r.marginal.as_ref().map(|m| m.values()),
            "marginal_rel_error": r.marginal_rel_error,
            "two_piece_reference": reference,
            "files": ["prior.csv", "prior.svg"],
        }),
        warnings: Vec::new(),
    })
}

pub fn mutualinfo(cfg: &LoadedConfig, out: &Path) -> Result<Outcome, CliError> {
    let s = setup(cfg)?;
    let mc = cfg
        .run
        .mutualinfo
        .as_ref()
        .ok_or_else(|| CliError::Config("missing 'mutualinfo' section".into()))?;
    if mc.k_schedule.is_empty() || mc.k_schedule.contains(&0) {
        return Err(CliError::Config("k_schedule needs positive entries".into()));
    }
    let grid = s.window_grid(cfg.run.nodes)?;
    let jg = jeffreys_density(&s.field(cfg.run.seed), &grid)?;
    let jeffreys = GridDensity::from_log_values(s.window_space()?, grid.clone(), jg.density.log_values())?;
    let prior = match mc.prior {
        PriorChoice::Uniform => GridDensity::from_values(s.window_space()?, grid, vec![1.0; jeffreys.len()])?,
        PriorChoice::Jeffreys => jeffreys.clone(),
    }
    .normalize()?;
    let params = McParams {
        n_outer: mc.n_outer,
        n_inner: mc.n_inner,
        seed: cfg.run.seed,
    };
    let check = mutual_info_limit_check(s.model.as_ref(), &prior, &jeffreys, s.alpha, &mc.k_schedule, params)?;
    write_csv(
        &out.join("mutualinfo.csv"),
        &["k", "scaled_mi", "std_error", "l_value", "gap", "raw_scaled_mi"]
            .map(String::from),
        check
            .rows
            .iter()
            .map(|r| vec![r.k as f64, r.scaled_mi, r.std_error, r.l_value, r.gap, r.raw_scaled_mi]),
    )?;
    let warnings = check
        .rows
        .iter()
        .filter(|r| r.non_asymptotic)
        .map(|r| format!("k = {} is far from the asymptotic regime (gap {:.3})", r.k, r.gap))
        .collect();
    Ok(Outcome {
        results: json!({ "limit_check": check, "files": ["mutualinfo.csv"] }),
        warnings,
    })
}

/// Seed of the dataset of size `k`.
pub fn dataset_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(k as u64)
}

/// Seed of every chain run on the dataset of size `k`: shared across γ so
/// the comparison uses common random numbers.
pub fn chain_seed(seed: u64, k: usize) -> u64 {
    dataset_seed(seed, k).wrapping_add(0x5eed)
}

const SENSITIVITY_POINTS: usize = 400;

pub fn sensitivity(cfg: &LoadedConfig, out: &Path) -> Result<Outcome, CliError> {
    if cfg.model.family != Family::TwoPiece {
        return Err(CliError::Config("sensitivity runs on the two_piece family".into()));
    }
    let sc = cfg
        .run
        .sensitivity
        .as_ref()
        .ok_or_else(|| CliError::Config("missing 'sensitivity' section".into()))?;
    if sc.gammas.is_empty() || sc.ks.is_empty() || sc.axis > 2 {
        return Err(CliError::Config("sensitivity needs gammas, ks and an axis in 0..3".into()));
    }
    let alpha = AlphaParams::new(cfg.run.alpha)?;
    for &g in &sc.gammas {
        TwoPieceGamma::new(g, alpha)?;
    }
    let model = TwoPiece::new();
    let star = TwoPieceParams::new(sc.theta_star[0], sc.theta_star[1], sc.theta_star[2])?;
    let mut per_k = Vec::new();
    let mut summary_rows = Vec::new();
    for &k in &sc.ks {
        if k == 0 {
            return Err(CliError::Config("dataset sizes must be positive".into()));
        }
        let data = twopiece_sample(&star, k, dataset_seed(cfg.run.seed, k));
        write_csv(&out.join(format!("data_k{k}.csv")), &["y".into()], data.iter().map(|y| vec![*y]))?;
        let mean = data.iter().sum::<f64>() / k as f64;
        let sd = (data.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / k as f64).sqrt().max(0.1);
        let init = [mean, sd, sd];
        let opts = MetropolisOptions {
            n_draws: sc.n_draws,
            n_burn: sc.n_burn,
            seed: chain_seed(cfg.run.seed, k),
            adapt: true,
            log_axes: vec![1, 2],
            initial_step: 0.5,
        };
        let mut columns = Vec::new();
        let mut chains_info = Vec::new();
        for &g in &sc.gammas {
            let lp = move |t: &[f64]| twopiece_proper_prior_value(g, t).ln();
            let post = log_posterior(&lp, &model, &data);
            let chain = rw_metropolis(&post, &init, &opts)?;
            chains_info.push(json!({
                "gamma": g,
                "acceptance_rate": chain.acceptance_rate,
                "posterior_mean": (0..3).map(|a| chain.mean(a)).collect::<Vec<_>>(),
                "ess": chain.ess(sc.axis),
            }));
            columns.push(chain.column(sc.axis));
        }
        // common grid and bandwidth for every γ at this k
        let pooled: Vec<f64> = columns.iter().flatten().copied().collect();
        let h = silverman_bandwidth(&pooled)?;
        let mut sorted_pool = pooled.clone();
        sorted_pool.sort_by(f64::total_cmp);
        let hi = sorted_pool[((sorted_pool.len() - 1) as f64 * 0.995) as usize] + 3.0 * h;
        let lo = if sc.axis == 0 {
            sorted_pool[0] - 3.0 * h
        } else {
            (sorted_pool[0] - 3.0 * h).max(0.0)
        };
        let xs: Vec<f64> = (0..SENSITIVITY_POINTS)
            .map(|i| lo + (hi - lo) * i as f64 / (SENSITIVITY_POINTS - 1) as f64)
            .collect();
        let curves: Vec<Vec<f64>> = columns.iter().map(|c| kde_values(c, h, &xs)).collect();
        let mut plot = LinePlot::new(format!("Posterior of theta{}, k = {k}", sc.axis), format!("theta{}", sc.axis), "density");
        for (g, curve) in sc.gammas.iter().zip(&curves) {
            write_csv(
                &out.join(format!("kde_k{k}_gamma{g}.csv")),
                &["x".into(), "density".into()],
                xs.iter().zip(curve).map(|(x, v)| vec![*x, *v]),
            )?;
            plot.add(format!("gamma = {g}"), xs.clone(), curve.clone());
        }
        write_text(&out.join(format!("sensitivity_k{k}.svg")), &plot.to_svg())?;
        let mut max_sup: f64 = 0.0;
        for a in 0..curves.len() {
            for b in a + 1..curves.len() {
                let sup = curves[a]
                    .iter()
                    .zip(&curves[b])
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                max_sup = max_sup.max(sup);
                summary_rows.push(vec![k as f64, sc.gammas[a], sc.gammas[b], sup]);
            }
        }
        per_k.push(json!({
            "k": k,
            "bandwidth": h,
            "max_sup_distance": max_sup,
            "chains": chains_info,
        }));
    }
    write_csv(
        &out.join("summary.csv"),
        &["k", "gamma_a", "gamma_b", "sup_distance"].map(String::from),
        summary_rows,
    )?;
    Ok(Outcome {
        results: json!({
            "axis": sc.axis,
            "gammas": sc.gammas,
            "theta_star": sc.theta_star,
            "per_k": per_k,
            "files": ["summary.csv"],
        }),
        warnings: Vec::new(),
    })
}
