//! Parameter spaces, α parameters and compact exhaustions.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Lower,
    Upper,
}

impl Side {
    fn idx(self) -> usize {
        match self {
            Side::Lower => 0,
            Side::Upper => 1,
        }
    }
}

/// A boundary edge of a box domain: one side of one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub axis: usize,
    pub side: Side,
}

impl Edge {
    pub fn lower(axis: usize) -> Self {
        Edge {
            axis,
            side: Side::Lower,
        }
    }

    pub fn upper(axis: usize) -> Self {
        Edge {
            axis,
            side: Side::Upper,
        }
    }
}

/// Box domain in ℝ^d with possibly infinite edges.
///
/// Each edge is either closed (the bound belongs to the space) or open.
/// Infinite edges are always open. An edge may additionally carry a
/// power-law marker, which makes grids geometrically spaced toward it.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
    open: Vec<[bool; 2]>,
    power_law: Vec<[bool; 2]>,
}

impl ParamSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::invalid(format!(
                "bounds must be non-empty and of equal length (got {} and {})",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(Error::invalid(format!(
                    "axis {i}: lower bound {lo} must be below upper bound {hi}"
                )));
            }
        }
        let open = lower
            .iter()
            .zip(&upper)
            .map(|(lo, hi)| [lo.is_infinite(), hi.is_infinite()])
            .collect();
        let power_law = vec![[false; 2]; lower.len()];
        Ok(ParamSpace {
            lower,
            upper,
            open,
            power_law,
        })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    /// Compact space from a list of `(lo, hi)` pairs, all edges closed.
    pub fn from_box(bx: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            bx.iter().map(|b| b.0).collect(),
            bx.iter().map(|b| b.1).collect(),
        )
    }

    pub fn with_open(mut self, edge: Edge) -> Self {
        self.open[edge.axis][edge.side.idx()] = true;
        self
    }

    /// Marks an edge as a power-law singularity. The edge becomes open.
    pub fn with_power_law(mut self, edge: Edge) -> Self {
        self.open[edge.axis][edge.side.idx()] = true;
        self.power_law[edge.axis][edge.side.idx()] = true;
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn bound(&self, edge: Edge) -> f64 {
        match edge.side {
            Side::Lower => self.lower[edge.axis],
            Side::Upper => self.upper[edge.axis],
        }
    }

    pub fn is_open(&self, edge: Edge) -> bool {
        self.open[edge.axis][edge.side.idx()]
    }

    pub fn has_power_law(&self, edge: Edge) -> bool {
        self.power_law[edge.axis][edge.side.idx()]
    }

    /// Edges that a compact exhaustion has to move: open edges.
    pub fn open_edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for axis in 0..self.dim() {
            for side in [Side::Lower, Side::Upper] {
                let e = Edge { axis, side };
                if self.is_open(e) {
                    out.push(e);
                }
            }
        }
        out
    }

    pub fn is_compact(&self) -> bool {
        self.open.iter().all(|o| !o[0] && !o[1])
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta.iter().enumerate().all(|(i, &t)| {
                let lo_ok = if self.open[i][0] {
                    t > self.lower[i]
                } else {
                    t >= self.lower[i]
                };
                let hi_ok = if self.open[i][1] {
                    t < self.upper[i]
                } else {
                    t <= self.upper[i]
                };
                lo_ok && hi_ok
            })
    }

    /// Strict interior: every coordinate strictly between its bounds.
    pub fn is_interior(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .enumerate()
                .all(|(i, &t)| t.is_finite() && t > self.lower[i] && t < self.upper[i])
    }

    pub fn contains_box(&self, bx: &[(f64, f64)]) -> bool {
        bx.len() == self.dim()
            && bx.iter().enumerate().all(|(i, &(lo, hi))| {
                lo <= hi
                    && lo.is_finite()
                    && hi.is_finite()
                    && lo >= self.lower[i]
                    && hi <= self.upper[i]
                    && !(self.open[i][0] && lo == self.lower[i])
                    && !(self.open[i][1] && hi == self.upper[i])
            })
    }

    /// The compact `window` with the listed edges replaced by this space's
    /// edges, keeping their open and power-law markers.
    ///
    /// A nest of the result moves only the listed edges.
    pub fn window_with_edges(&self, window: &[(f64, f64)], edges: &[Edge]) -> Result<ParamSpace> {
        if window.len() != self.dim() {
            return Err(Error::invalid("window dimension does not match the space"));
        }
        if !self.contains_box(window) {
            return Err(Error::invalid(format!("window {window:?} is not inside the space")));
        }
        let mut lower: Vec<f64> = window.iter().map(|w| w.0).collect();
        let mut upper: Vec<f64> = window.iter().map(|w| w.1).collect();
        for e in edges {
            if e.axis >= self.dim() {
                return Err(Error::invalid(format!("edge on axis {} outside the space", e.axis)));
            }
            match e.side {
                Side::Lower => lower[e.axis] = self.lower[e.axis],
                Side::Upper => upper[e.axis] = self.upper[e.axis],
            }
        }
        let mut out = ParamSpace::new(lower, upper)?;
        for e in edges {
            let i = e.side.idx();
            out.open[e.axis][i] = self.open[e.axis][i];
            out.power_law[e.axis][i] = self.power_law[e.axis][i];
        }
        Ok(out)
    }

    /// Spacing anchor of an axis: the finite bound that grids should be
    /// geometrically refined toward, with the direction pointing inward.
    pub(crate) fn spacing_anchor(&self, axis: usize) -> Option<(f64, f64)> {
        let (lo, hi) = (self.lower[axis], self.upper[axis]);
        let [pl_lo, pl_hi] = self.power_law[axis];
        if lo.is_finite() && (pl_lo || (hi.is_infinite() && pl_hi)) && !(pl_hi && hi.is_finite()) {
            Some((lo, 1.0))
        } else if hi.is_finite() && (pl_hi || (lo.is_infinite() && pl_lo)) && !(pl_lo && lo.is_finite())
        {
            Some((hi, -1.0))
        } else {
            None
        }
    }

    /// Both finite bounds of the axis carry power-law markers.
    pub(crate) fn doubly_singular(&self, axis: usize) -> bool {
        self.power_law[axis][0]
            && self.power_law[axis][1]
            && self.lower[axis].is_finite()
            && self.upper[axis].is_finite()
    }
}

/// α of the α-divergence, restricted to the open unit interval.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AlphaParams(f64);

impl AlphaParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(AlphaParams(alpha))
        } else {
            Err(Error::invalid(format!("alpha must lie in (0,1), got {alpha}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Openly increasing sequence of compact boxes exhausting a space.
///
/// Finite open edges at `b` move as `|θ_i − b| = s·10^{-(i+1)}` where `s`
/// is `min(1, width)`; infinite edges grow as `10^{i+1}` from the nearest
/// of zero and the opposite bound. Closed edges stay put.
#[derive(Debug, Clone)]
pub struct CompactNest {
    space: ParamSpace,
}

impl CompactNest {
    pub fn new(space: ParamSpace) -> Self {
        CompactNest { space }
    }

    pub fn space(&self) -> &ParamSpace {
        &self.space
    }

    pub fn box_at(&self, i: usize) -> Vec<(f64, f64)> {
        (0..self.space.dim())
            .map(|axis| (self.edge_at(Edge::lower(axis), i), self.edge_at(Edge::upper(axis), i)))
            .collect()
    }

    /// Coordinate of one box edge at nest index `i`.
    pub fn edge_at(&self, edge: Edge, i: usize) -> f64 {
        let s = &self.space;
        let (lo, hi) = (s.lower[edge.axis], s.upper[edge.axis]);
        let width = hi - lo;
        let scale = if width.is_finite() { width.min(1.0) } else { 1.0 };
        let shrink = scale * 10f64.powi(-(i as i32 + 1));
        let grow = 10f64.powi(i as i32 + 1);
        match edge.side {
            Side::Lower => {
                if lo.is_infinite() {
                    let anchor = if hi.is_finite() { hi.min(0.0) } else { 0.0 };
                    anchor - grow
                } else if s.is_open(edge) {
                    lo + shrink
                } else {
                    lo
                }
            }
            Side::Upper => {
                if hi.is_infinite() {
                    let anchor = if lo.is_finite() { lo.max(0.0) } else { 0.0 };
                    anchor + grow
                } else if s.is_open(edge) {
                    hi - shrink
                } else {
                    hi
                }
            }
        }
    }

    /// `Θ_i ⊂ interior(Θ_{i+1})` relative to the space: every moving edge
    /// moves strictly outward, closed edges coincide.
    pub fn is_openly_increasing_at(&self, i: usize) -> bool {
        let a = self.box_at(i);
        let b = self.box_at(i + 1);
        (0..self.space.dim()).all(|axis| {
            let lo_ok = if self.space.is_open(Edge::lower(axis)) {
                b[axis].0 < a[axis].0
            } else {
                b[axis].0 == a[axis].0
            };
            let hi_ok = if self.space.is_open(Edge::upper(axis)) {
                b[axis].1 > a[axis].1
            } else {
                b[axis].1 == a[axis].1
            };
            lo_ok && hi_ok && b[axis].0 < b[axis].1
        })
    }
}
