//! Rectangular tensor grids and the trapezoidal quadrature used throughout
//! the crate. Integrals of densities with extreme dynamic range are done in
//! the log domain.

use crate::error::{Error, Result};
use crate::space::{CompactNest, Edge, ParamSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Vec<f64>>,
}

impl Grid {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::invalid("grid needs at least one axis"));
        }
        for (i, ax) in axes.iter().enumerate() {
            if ax.len() < 2 {
                return Err(Error::invalid(format!("grid axis {i} needs at least 2 nodes")));
            }
            if ax.iter().any(|x| !x.is_finite()) || ax.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!(
                    "grid axis {i} must be finite and strictly increasing"
                )));
            }
        }
        Ok(Grid { axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, i: usize) -> &[f64] {
        &self.axes[i]
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major multi-index (last axis fastest).
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            let n = self.axes[a].len();
            idx[a] = flat % n;
            flat /= n;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, ax)| acc * ax.len() + i)
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.node_into(flat, &mut out);
        out
    }

    pub fn node_into(&self, mut flat: usize, out: &mut [f64]) {
        for a in (0..self.dim()).rev() {
            let n = self.axes[a].len();
            out[a] = self.axes[a][flat % n];
            flat /= n;
        }
    }

    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        self.axes
            .iter()
            .map(|ax| (ax[0], ax[ax.len() - 1]))
            .collect()
    }

    /// Tensor-product trapezoid weights, flattened in node order.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let per_axis: Vec<Vec<f64>> = self.axes.iter().map(|ax| axis_trapezoid_weights(ax)).collect();
        (0..self.len())
            .map(|flat| {
                let idx = self.multi_index(flat);
                idx.iter()
                    .zip(&per_axis)
                    .map(|(&i, w)| w[i])
                    .product()
            })
            .collect()
    }

    /// Grid made of a subset of this grid's axes, in the given order.
    pub fn sub_grid(&self, axes: &[usize]) -> Result<Grid> {
        Grid::new(axes.iter().map(|&a| self.axes[a].clone()).collect())
    }

    /// Every other node on each axis, keeping both end nodes.
    pub(crate) fn coarsened(&self) -> Option<(Grid, Vec<usize>)> {
        let mut keep: Vec<Vec<usize>> = Vec::with_capacity(self.dim());
        for ax in &self.axes {
            if ax.len() < 3 {
                return None;
            }
            let mut k: Vec<usize> = (0..ax.len()).step_by(2).collect();
            if *k.last().unwrap() != ax.len() - 1 {
                k.push(ax.len() - 1);
            }
            keep.push(k);
        }
        let g = Grid::new(
            keep.iter()
                .zip(&self.axes)
                .map(|(k, ax)| k.iter().map(|&i| ax[i]).collect())
                .collect(),
        )
        .ok()?;
        let map = (0..g.len())
            .map(|flat| {
                let idx = g.multi_index(flat);
                let orig: Vec<usize> = idx.iter().enumerate().map(|(a, &i)| keep[a][i]).collect();
                self.flat_index(&orig)
            })
            .collect();
        Some((g, map))
    }
}

pub fn axis_trapezoid_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let h = nodes[i + 1] - nodes[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

pub fn log_sum_exp<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let v: Vec<f64> = it.into_iter().collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if m == f64::INFINITY {
        return f64::INFINITY;
    }
    m + v.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Trapezoidal integral of node values over the grid.
pub fn trapezoid(grid: &Grid, values: &[f64]) -> f64 {
    grid.trapezoid_weights()
        .iter()
        .zip(values)
        .map(|(w, v)| w * v)
        .sum()
}

/// Log of the trapezoidal integral of `exp(log_values)`.
pub fn log_trapezoid(grid: &Grid, log_values: &[f64]) -> f64 {
    let w = grid.trapezoid_weights();
    log_sum_exp(w.iter().zip(log_values).map(|(w, lv)| w.ln() + lv))
}

/// `ln((e^δ − 1)/δ)` evaluated without cancellation.
fn log_expm1_ratio(delta: f64) -> f64 {
    if delta.abs() < 1e-8 {
        0.5 * delta
    } else if delta > 0.0 {
        delta + (-(-delta).exp_m1()).ln() - delta.ln()
    } else {
        (-delta.exp_m1()).ln() - (-delta).ln()
    }
}

/// Log of `∫ exp(L(s)) ds` where `L` is the piecewise-linear interpolant of
/// `log_values` on `nodes`. Exact for exponentials in `s`, hence for power
/// laws integrated in logarithmic coordinates.
pub fn log_integral_loglinear(nodes: &[f64], log_values: &[f64]) -> f64 {
    log_sum_exp(nodes.windows(2).zip(log_values.windows(2)).map(|(x, l)| {
        let h = x[1] - x[0];
        if l[0] == f64::NEG_INFINITY && l[1] == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        if l[0] == f64::NEG_INFINITY || l[1] == f64::NEG_INFINITY {
            // degenerate cell: fall back to the trapezoid rule
            return (0.5 * h).ln() + log_add_exp(l[0], l[1]);
        }
        h.ln() + l[0] + log_expm1_ratio(l[1] - l[0])
    }))
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect();
    v[n - 1] = b;
    v
}

fn geomspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    let mut v: Vec<f64> = (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect();
    v[0] = a;
    v[n - 1] = b;
    v
}

/// Nodes on `[lo, hi]` for one axis: geometric toward a power-law edge of the
/// space, uniform otherwise.
pub(crate) fn axis_nodes(space: &ParamSpace, axis: usize, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if space.doubly_singular(axis) {
        let (b, c) = (space.lower()[axis], space.upper()[axis]);
        let mid = 0.5 * (b + c);
        if lo > b && hi < c && lo < mid && hi > mid {
            let n_left = n / 2 + 1;
            let n_right = n - n_left + 1;
            let mut left: Vec<f64> = geomspace(lo - b, mid - b, n_left).into_iter().map(|d| b + d).collect();
            let right: Vec<f64> = geomspace(c - hi, c - mid, n_right.max(2))
                .into_iter()
                .rev()
                .map(|d| c - d)
                .collect();
            left.pop();
            left.extend(right);
            if left.windows(2).all(|w| w[0] < w[1]) {
                return left;
            }
        }
        return linspace(lo, hi, n);
    }
    match space.spacing_anchor(axis) {
        Some((anchor, dir)) => {
            let (d_lo, d_hi) = if dir > 0.0 {
                (lo - anchor, hi - anchor)
            } else {
                (anchor - hi, anchor - lo)
            };
            if d_lo > 0.0 && d_hi > d_lo {
                let g = geomspace(d_lo, d_hi, n);
                if dir > 0.0 {
                    g.into_iter().map(|d| anchor + d).collect()
                } else {
                    g.into_iter().rev().map(|d| anchor - d).collect()
                }
            } else {
                linspace(lo, hi, n)
            }
        }
        None => linspace(lo, hi, n),
    }
}

/// Per-axis nodes spanning a box, using the spacing rule of the space.
pub fn grid_on_box(space: &ParamSpace, bx: &[(f64, f64)], nodes_per_axis: usize) -> Result<Grid> {
    if nodes_per_axis < 2 {
        return Err(Error::invalid("need at least 2 nodes per axis"));
    }
    if bx.len() != space.dim() {
        return Err(Error::invalid("box dimension does not match the space"));
    }
    Grid::new(
        bx.iter()
            .enumerate()
            .map(|(a, &(lo, hi))| axis_nodes(space, a, lo, hi, nodes_per_axis))
            .collect(),
    )
}

/// Nodes spanning the `nest_index`-th box of the default nest of `space`.
///
/// Without a nest index the space itself must be compact.
pub fn make_grid(space: &ParamSpace, nest_index: Option<usize>, nodes_per_axis: usize) -> Result<Grid> {
    if nodes_per_axis < 8 {
        return Err(Error::invalid(format!(
            "nodes_per_axis must be at least 8, got {nodes_per_axis}"
        )));
    }
    let bx = match nest_index {
        Some(i) => CompactNest::new(space.clone()).box_at(i),
        None if space.is_compact() => space
            .lower()
            .iter()
            .zip(space.upper())
            .map(|(&l, &u)| (l, u))
            .collect(),
        None => return Err(Error::CompactBoxRequired),
    };
    grid_on_box(space, &bx, nodes_per_axis)
}

/// A grid on the deepest box of a nest such that every shallower box edge
/// is a node, with the index range of each box.
#[derive(Debug, Clone)]
pub struct NestedGrid {
    pub grid: Grid,
    /// `ranges[i][axis] = (first, last)` node indices of box `i`, inclusive.
    pub ranges: Vec<Vec<(usize, usize)>>,
}

impl NestedGrid {
    /// `per_step` nodes are inserted between successive edges of a moving
    /// side; the innermost box gets `inner_nodes` nodes per axis.
    pub fn new(nest: &CompactNest, depth: usize, per_step: usize, inner_nodes: usize) -> Result<Self> {
        if per_step < 1 || inner_nodes < 2 {
            return Err(Error::invalid("nested grid needs per_step >= 1 and inner_nodes >= 2"));
        }
        let space = nest.space();
        let mut axes = Vec::with_capacity(space.dim());
        let mut axis_ranges: Vec<Vec<(usize, usize)>> = Vec::with_capacity(space.dim());
        for axis in 0..space.dim() {
            let lo_moves = space.is_open(Edge::lower(axis));
            let hi_moves = space.is_open(Edge::upper(axis));
            let (lo0, hi0) = (nest.edge_at(Edge::lower(axis), 0), nest.edge_at(Edge::upper(axis), 0));
            let mut nodes: Vec<f64> = axis_nodes(space, axis, lo0, hi0, inner_nodes);
            let mut lower_added = vec![0usize; depth + 1];
            if lo_moves {
                for i in 1..=depth {
                    let a = nest.edge_at(Edge::lower(axis), i);
                    let b = nest.edge_at(Edge::lower(axis), i - 1);
                    let seg = axis_nodes(space, axis, a, b, per_step + 1);
                    let mut seg = seg[..seg.len() - 1].to_vec();
                    lower_added[i] = lower_added[i - 1] + seg.len();
                    seg.extend(nodes);
                    nodes = seg;
                }
            }
            let inner_len = nodes.len() - lower_added[depth];
            let mut upper_added = vec![0usize; depth + 1];
            if hi_moves {
                for i in 1..=depth {
                    let a = nest.edge_at(Edge::upper(axis), i - 1);
                    let b = nest.edge_at(Edge::upper(axis), i);
                    let seg = axis_nodes(space, axis, a, b, per_step + 1);
                    upper_added[i] = upper_added[i - 1] + seg.len() - 1;
                    nodes.extend_from_slice(&seg[1..]);
                }
            }
            let total_lower = lower_added[depth];
            let ranges = (0..=depth)
                .map(|i| {
                    let first = total_lower - lower_added[i];
                    let last = total_lower + inner_len - 1 + upper_added[i];
                    (first, last)
                })
                .collect();
            axes.push(nodes);
            axis_ranges.push(ranges);
        }
        let grid = Grid::new(axes)?;
        let ranges = (0..=depth)
            .map(|i| axis_ranges.iter().map(|r| r[i]).collect())
            .collect();
        Ok(NestedGrid { grid, ranges })
    }

    pub fn depth(&self) -> usize {
        self.ranges.len() - 1
    }

    /// Log of the trapezoid integral over each shell `Θ_i \ Θ_{i-1}` (shell 0
    /// is `Θ_0` itself), accumulated cell by cell so increments carry no
    /// cancellation error.
    pub fn log_shell_integrals(&self, log_values: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let d = g.dim();
        let shape = g.shape();
        // per-axis, per-cell: the first nest level whose range covers the cell
        let cell_level: Vec<Vec<usize>> = (0..d)
            .map(|a| {
                (0..shape[a] - 1)
                    .map(|c| {
                        (0..self.ranges.len())
                            .find(|&i| self.ranges[i][a].0 <= c && c < self.ranges[i][a].1)
                            .unwrap_or(usize::MAX)
                    })
                    .collect()
            })
            .collect();
        let n_cells: usize = shape.iter().map(|n| n - 1).product();
        let mut shells: Vec<Vec<f64>> = vec![Vec::new(); self.ranges.len()];
        let ln2d = d as f64 * std::f64::consts::LN_2;
        let mut cidx = vec![0usize; d];
        let mut corner = vec![0usize; d];
        let mut corner_logs = Vec::with_capacity(1 << d);
        for cell in 0..n_cells {
            let mut rem = cell;
            for a in (0..d).rev() {
                cidx[a] = rem % (shape[a] - 1);
                rem /= shape[a] - 1;
            }
            let level = (0..d).map(|a| cell_level[a][cidx[a]]).max().unwrap();
            if level == usize::MAX {
                continue;
            }
            let mut log_vol = 0.0;
            for a in 0..d {
                let ax = g.axis(a);
                log_vol += (ax[cidx[a] + 1] - ax[cidx[a]]).ln();
            }
            corner_logs.clear();
            for mask in 0..(1usize << d) {
                for a in 0..d {
                    corner[a] = cidx[a] + ((mask >> a) & 1);
                }
                corner_logs.push(log_values[g.flat_index(&corner)]);
            }
            let lse = log_sum_exp(corner_logs.iter().copied());
            if lse > f64::NEG_INFINITY {
                shells[level].push(log_vol + lse - ln2d);
            }
        }
        shells.into_iter().map(log_sum_exp).collect()
    }
}
