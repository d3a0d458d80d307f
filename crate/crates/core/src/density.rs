//! Non-negative densities on tensor grids, carried up to a positive factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{log_add_exp, log_trapezoid, Grid};
use crate::space::ParamSpace;

/// Dynamic range beyond which values are kept as logarithms.
const LOG_RANGE_THRESHOLD: f64 = 1e300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Properness {
    Proper,
    Improper,
    Unknown,
}

#[derive(Debug, Clone)]
pub struct GridDensity {
    space: ParamSpace,
    grid: Grid,
    /// Plain values, or natural logs when `log_scale` is set.
    data: Vec<f64>,
    log_scale: bool,
    properness: Properness,
}

impl GridDensity {
    /// Builds a density from plain node values (row-major, last axis fastest).
    pub fn from_values(space: ParamSpace, grid: Grid, values: Vec<f64>) -> Result<Self> {
        check_shape(&space, &grid, values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(format!(
                "density value {} at node {:?} is not a finite non-negative number",
                values[i],
                grid.node(i)
            )));
        }
        let max = values.iter().copied().fold(0.0, f64::max);
        if max <= 0.0 {
            return Err(Error::invalid("density is identically zero"));
        }
        let min_pos = values
            .iter()
            .copied()
            .filter(|&v| v > 0.0)
            .fold(f64::INFINITY, f64::min);
        let log_scale = max / min_pos > LOG_RANGE_THRESHOLD;
        let data = if log_scale {
            values.iter().map(|v| v.ln()).collect()
        } else {
            values
        };
        Ok(GridDensity {
            space,
            grid,
            data,
            log_scale,
            properness: Properness::Unknown,
        })
    }

    /// Builds a density from log values; `-inf` marks a zero.
    pub fn from_log_values(space: ParamSpace, grid: Grid, log_values: Vec<f64>) -> Result<Self> {
        check_shape(&space, &grid, log_values.len())?;
        if let Some(i) = log_values.iter().position(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::non_finite("log density", &grid.node(i)));
        }
        let max = log_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::invalid("density is identically zero"));
        }
        let min = log_values
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(f64::INFINITY, f64::min);
        let log_scale = max - min > LOG_RANGE_THRESHOLD.ln() || max > 700.0 || max < -700.0;
        let data = if log_scale {
            log_values
        } else {
            log_values.iter().map(|v| v.exp()).collect()
        };
        Ok(GridDensity {
            space,
            grid,
            data,
            log_scale,
            properness: Properness::Unknown,
        })
    }

    pub fn with_properness(mut self, properness: Properness) -> Self {
        self.properness = properness;
        self
    }

    pub fn space(&self) -> &ParamSpace {
        &self.space
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn is_log_scale(&self) -> bool {
        self.log_scale
    }

    pub fn properness(&self) -> Properness {
        self.properness
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn log_value(&self, i: usize) -> f64 {
        if self.log_scale {
            self.data[i]
        } else {
            self.data[i].ln()
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.log_scale {
            self.data[i].exp()
        } else {
            self.data[i]
        }
    }

    pub fn log_values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.log_value(i)).collect()
    }

    /// Plain values. May under- or overflow for log-scale densities.
    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i)).collect()
    }

    /// Values divided by their maximum, always finite and in `[0, 1]`.
    pub fn max_scaled_values(&self) -> Vec<f64> {
        let logs = self.log_values();
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        logs.iter().map(|l| (l - m).exp()).collect()
    }

    pub fn log_integral(&self) -> f64 {
        log_trapezoid(&self.grid, &self.log_values())
    }

    pub fn integral(&self) -> f64 {
        self.log_integral().exp()
    }

    /// Rescales to unit trapezoidal mass.
    pub fn normalize(&self) -> Result<GridDensity> {
        let lz = self.log_integral();
        if !lz.is_finite() {
            return Err(Error::CannotNormalize(lz.exp()));
        }
        let data = if self.log_scale {
            self.data.iter().map(|l| l - lz).collect()
        } else {
            let z = lz.exp();
            if z.is_finite() && z > 0.0 {
                self.data.iter().map(|v| v / z).collect()
            } else {
                self.data.iter().map(|v| (v.ln() - lz).exp()).collect()
            }
        };
        Ok(GridDensity {
            space: self.space.clone(),
            grid: self.grid.clone(),
            data,
            log_scale: self.log_scale,
            properness: Properness::Proper,
        })
    }

    /// Restriction to a compact sub-box, re-normalized. Box edges that fall
    /// between nodes become new nodes, valued by multilinear interpolation.
    pub fn restrict_renormalize(&self, bx: &[(f64, f64)]) -> Result<GridDensity> {
        if bx.len() != self.grid.dim() {
            return Err(Error::invalid("box dimension does not match the density"));
        }
        let bb = self.grid.bounding_box();
        let mut axes = Vec::with_capacity(bx.len());
        for (a, (&(lo, hi), &(glo, ghi))) in bx.iter().zip(&bb).enumerate() {
            if !(lo < hi) || lo < glo || hi > ghi {
                return Err(Error::invalid(format!(
                    "box [{lo}, {hi}] on axis {a} is not inside the grid range [{glo}, {ghi}]"
                )));
            }
            let mut nodes = vec![lo];
            nodes.extend(self.grid.axis(a).iter().copied().filter(|&x| x > lo && x < hi));
            nodes.push(hi);
            axes.push(nodes);
        }
        let grid = Grid::new(axes)?;
        let logs: Vec<f64> = (0..grid.len())
            .map(|i| self.interpolate_log(&grid.node(i)))
            .collect();
        let space = ParamSpace::from_box(bx)?;
        let restricted = match GridDensity::from_log_values(space, grid, logs) {
            Ok(d) => d,
            Err(Error::InvalidInput(_)) => return Err(Error::NullRestriction),
            Err(e) => return Err(e),
        };
        match restricted.normalize() {
            Err(Error::CannotNormalize(_)) => Err(Error::NullRestriction),
            other => other,
        }
    }

    /// Multilinear interpolation at a point inside the grid's bounding box.
    /// Interpolates plain values, or logs for log-scale densities.
    fn interpolate_log(&self, x: &[f64]) -> f64 {
        let d = self.grid.dim();
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for a in 0..d {
            let ax = self.grid.axis(a);
            let j = ax.partition_point(|&n| n <= x[a]).clamp(1, ax.len() - 1) - 1;
            base[a] = j;
            frac[a] = ((x[a] - ax[j]) / (ax[j + 1] - ax[j])).clamp(0.0, 1.0);
        }
        let mut acc = 0.0;
        let mut idx = vec![0usize; d];
        for mask in 0..(1usize << d) {
            let mut w = 1.0;
            for a in 0..d {
                let up = (mask >> a) & 1 == 1;
                idx[a] = base[a] + up as usize;
                w *= if up { frac[a] } else { 1.0 - frac[a] };
            }
            if w == 0.0 {
                continue;
            }
            let v = self.data[self.grid.flat_index(&idx)];
            if self.log_scale && v == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            acc += w * v;
        }
        if self.log_scale {
            acc
        } else {
            acc.ln()
        }
    }

    /// Pointwise `t·d1 + (1−t)·d2` of two densities on the same grid.
    pub fn mixture(d1: &GridDensity, d2: &GridDensity, t: f64) -> Result<GridDensity> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid(format!("mixture weight {t} outside [0,1]")));
        }
        if d1.grid != d2.grid {
            return Err(Error::GridMismatch("mixture components live on different grids".into()));
        }
        let (lt, lu) = (t.ln(), (1.0 - t).ln());
        let logs = (0..d1.len())
            .map(|i| log_add_exp(lt + d1.log_value(i), lu + d2.log_value(i)))
            .collect();
        Ok(GridDensity::from_log_values(d1.space.clone(), d1.grid.clone(), logs)?
            .with_properness(Properness::Proper))
    }

    /// Density-class equality: max-normalized values agree in sup-norm
    /// within `1e-9`.
    pub fn class_eq(&self, other: &GridDensity) -> bool {
        self.grid == other.grid
            && self
                .max_scaled_values()
                .iter()
                .zip(other.max_scaled_values())
                .all(|(a, b)| (a - b).abs() <= 1e-9)
    }

    /// Smallest sup-norm distance between `ln self` and `ln other + k` over
    /// constants `k`: half the range of the log ratio. Infinite when the
    /// supports differ.
    pub fn class_log_distance(&self, other: &GridDensity) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("densities live on different grids".into()));
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..self.len() {
            let (a, b) = (self.log_value(i), other.log_value(i));
            match (a.is_finite(), b.is_finite()) {
                (true, true) => {
                    lo = lo.min(a - b);
                    hi = hi.max(a - b);
                }
                (false, false) => {}
                _ => return Ok(f64::INFINITY),
            }
        }
        Ok(if hi >= lo { 0.5 * (hi - lo) } else { 0.0 })
    }
}

fn check_shape(space: &ParamSpace, grid: &Grid, n: usize) -> Result<()> {
    if space.dim() != grid.dim() {
        return Err(Error::GridMismatch(format!(
            "space has dimension {} but grid has {}",
            space.dim(),
            grid.dim()
        )));
    }
    if n != grid.len() {
        return Err(Error::GridMismatch(format!(
            "{n} values for a grid of {} nodes",
            grid.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::trapezoid;
    use proptest::prelude::*;

    fn line(lo: f64, hi: f64, n: usize) -> (ParamSpace, Grid) {
        let nodes = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        (ParamSpace::interval(lo, hi).unwrap(), Grid::new(vec![nodes]).unwrap())
    }

    fn geo(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
            .collect()
    }

    #[test]
    fn normalize_constant() {
        let (s, g) = line(0.0, 1.0, 11);
        let d = GridDensity::from_values(s, g, vec![2.0; 11]).unwrap().normalize().unwrap();
        assert!(d.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
        assert_eq!(d.properness(), Properness::Proper);
    }

    #[test]
    fn normalize_linear() {
        let (s, g) = line(0.0, 1.0, 21);
        let vals = g.axis(0).to_vec();
        let d = GridDensity::from_values(s, g.clone(), vals).unwrap().normalize().unwrap();
        for (x, v) in g.axis(0).iter().zip(d.values()) {
            assert!((v - 2.0 * x).abs() < 1e-12);
        }
        assert!((trapezoid(&g, &d.values()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_inverse_square() {
        let nodes = geo(1e-6, 1.0, 4001);
        let g = Grid::new(vec![nodes.clone()]).unwrap();
        let s = ParamSpace::interval(0.0, 1.0).unwrap();
        let vals: Vec<f64> = nodes.iter().map(|t| t.powi(-2)).collect();
        let d = GridDensity::from_values(s, g, vals).unwrap().normalize().unwrap();
        let c = d.value(0) * nodes[0].powi(2);
        assert!((c / (1.0 / (1e6 - 1.0)) - 1.0).abs() < 1e-5, "normalizer {c}");
    }

    #[test]
    fn normalize_errors() {
        let (s, g) = line(0.0, 1.0, 3);
        assert!(GridDensity::from_values(s.clone(), g.clone(), vec![0.0; 3]).is_err());
        assert!(GridDensity::from_values(s, g, vec![1.0, f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn log_storage_for_extreme_range() {
        let (s, g) = line(0.0, 1.0, 3);
        let d = GridDensity::from_log_values(s, g, vec![0.0, -800.0, -1500.0]).unwrap();
        assert!(d.is_log_scale());
        let n = d.normalize().unwrap();
        assert!((n.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn restrict_uniform() {
        let (s, g) = line(0.0, 2.0, 21);
        let d = GridDensity::from_values(s, g, vec![1.0; 21]).unwrap();
        let r = d.restrict_renormalize(&[(0.0, 1.0)]).unwrap();
        assert_eq!(r.grid().bounding_box(), vec![(0.0, 1.0)]);
        assert!(r.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn restrict_inverse() {
        let a = 1e-3;
        let nodes = geo(1e-4, 1.0, 20001);
        let g = Grid::new(vec![nodes.clone()]).unwrap();
        let s = ParamSpace::interval(0.0, 1.0).unwrap();
        let d = GridDensity::from_values(s, g, nodes.iter().map(|t| 1.0 / t).collect()).unwrap();
        let r = d.restrict_renormalize(&[(a, 1.0)]).unwrap();
        let z = (1.0 / a).ln();
        for (x, v) in r.grid().axis(0).iter().zip(r.values()).step_by(97) {
            assert!((v * x * z - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn restrict_linear_and_idempotent() {
        let (s, g) = line(0.0, 1.0, 41);
        let d = GridDensity::from_values(s, g.clone(), g.axis(0).to_vec()).unwrap();
        let r = d.restrict_renormalize(&[(0.5, 1.0)]).unwrap();
        for (x, v) in r.grid().axis(0).iter().zip(r.values()) {
            assert!((v - x / 0.375).abs() < 1e-12);
        }
        let rr = r.restrict_renormalize(&[(0.5, 1.0)]).unwrap();
        assert!(rr.class_eq(&r));
        assert!(rr.values().iter().zip(r.values()).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn restrict_null_mass() {
        let (s, g) = line(0.0, 2.0, 21);
        let vals: Vec<f64> = g.axis(0).iter().map(|&x| if x > 1.05 { 1.0 } else { 0.0 }).collect();
        let d = GridDensity::from_values(s, g, vals).unwrap();
        assert!(matches!(d.restrict_renormalize(&[(0.0, 1.0)]), Err(Error::NullRestriction)));
    }

    #[test]
    fn mixture_cases() {
        let nodes: Vec<f64> = (0..=40).map(|i| i as f64 * 0.05).collect();
        let g = Grid::new(vec![nodes.clone()]).unwrap();
        let s = ParamSpace::interval(0.0, 2.0).unwrap();
        // disjoint uniforms, each with unit mass on its half of the grid
        let left: Vec<f64> = nodes.iter().map(|&x| if x <= 1.0 { 1.0 } else { 0.0 }).collect();
        let right: Vec<f64> = nodes.iter().map(|&x| if x >= 1.0 { 1.0 } else { 0.0 }).collect();
        let d1 = GridDensity::from_values(s.clone(), g.clone(), left).unwrap();
        let d2 = GridDensity::from_values(s.clone(), g.clone(), right).unwrap();
        let m = GridDensity::mixture(&d1, &d2, 0.5).unwrap();
        for (x, v) in nodes.iter().zip(m.values()) {
            let want = if (*x - 1.0).abs() < 1e-12 { 1.0 } else { 0.5 };
            assert!((v - want).abs() < 1e-15);
        }
        assert!(GridDensity::mixture(&d1, &d2, 1.0).unwrap().class_eq(&d1));
        assert!(GridDensity::mixture(&d1, &d2, 0.0).unwrap().class_eq(&d2));
        let (s3, g3) = line(0.0, 2.0, 5);
        let d3 = GridDensity::from_values(s3, g3, vec![1.0; 5]).unwrap();
        assert!(matches!(GridDensity::mixture(&d1, &d3, 0.5), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn class_distance() {
        let (s, g) = line(1.0, 2.0, 11);
        let a: Vec<f64> = g.axis(0).iter().map(|x| x * x).collect();
        let b: Vec<f64> = a.iter().map(|v| 3.0 * v).collect();
        let da = GridDensity::from_values(s.clone(), g.clone(), a).unwrap();
        let db = GridDensity::from_values(s, g, b).unwrap();
        assert!(da.class_eq(&db));
        assert!(da.class_log_distance(&db).unwrap() < 1e-14);
    }

    proptest! {
        #[test]
        fn normalize_is_scale_invariant(
            vals in proptest::collection::vec(0.01f64..100.0, 12),
            c in 1e-6f64..1e6,
        ) {
            let (s, g) = line(-1.0, 2.0, 12);
            let d = GridDensity::from_values(s.clone(), g.clone(), vals.clone()).unwrap();
            let dc = GridDensity::from_values(s, g, vals.iter().map(|v| v * c).collect()).unwrap();
            let (n1, n2) = (d.normalize().unwrap(), dc.normalize().unwrap());
            for (a, b) in n1.values().iter().zip(n2.values()) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
            }
            prop_assert!((n1.integral() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn restriction_is_idempotent(lo in 0.0f64..0.9, w in 0.05f64..1.0) {
            let hi = (lo + w).min(1.0);
            let (s, g) = line(0.0, 1.0, 23);
            let vals: Vec<f64> = g.axis(0).iter().map(|x| 1.0 + x.sin()).collect();
            let d = GridDensity::from_values(s, g, vals).unwrap();
            let r = d.restrict_renormalize(&[(lo, hi)]).unwrap();
            let rr = r.restrict_renormalize(&[(lo, hi)]).unwrap();
            for (a, b) in r.values().iter().zip(rr.values()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
