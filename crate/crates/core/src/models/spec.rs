use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::models::{GaussianLocation, GaussianLocationScale, GaussianScale, TwoPiece};
use crate::space::ParamSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    GaussianLocation,
    GaussianScale,
    GaussianLocationScale,
    TwoPiece,
}

/// JSON description of a built-in model plus the compact working window
/// used for grid computations.
///
/// ```json
/// { "family": "two_piece", "window": [[-1, 1], [0.1, 10], [0.1, 10]] }
/// ```
///
/// New families are added by extending [`Family`] and [`ModelSpec::build`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: Family,
    /// Known standard deviation of `gaussian_location`.
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Known mean of `gaussian_scale`.
    #[serde(default)]
    pub mu: Option<f64>,
    /// Per-axis `[lo, hi]` working box.
    #[serde(default)]
    pub window: Option<Vec<[f64; 2]>>,
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ModelSpec =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("model spec: {e}")))?;
        spec.build()?;
        Ok(spec)
    }

    pub fn build(&self) -> Result<Box<dyn Model>> {
        let model: Box<dyn Model> = match self.family {
            Family::GaussianLocation => Box::new(GaussianLocation::new(self.sigma.unwrap_or(1.0))?),
            Family::GaussianScale => Box::new(GaussianScale::new(self.mu.unwrap_or(0.0))?),
            Family::GaussianLocationScale => Box::new(GaussianLocationScale::new()),
            Family::TwoPiece => Box::new(TwoPiece::new()),
        };
        if let Some(w) = &self.window {
            self.window_for(model.space(), w)?;
        }
        Ok(model)
    }

    /// The working window, defaulting per family when absent.
    pub fn window_box(&self) -> Result<Vec<(f64, f64)>> {
        let model = self.build()?;
        match &self.window {
            Some(w) => self.window_for(model.space(), w),
            None => Ok(match self.family {
                Family::GaussianLocation => vec![(-1.0, 1.0)],
                Family::GaussianScale => vec![(0.1, 10.0)],
                Family::GaussianLocationScale => vec![(-1.0, 1.0), (0.1, 10.0)],
                Family::TwoPiece => vec![(-1.0, 1.0), (0.1, 10.0), (0.1, 10.0)],
            }),
        }
    }

    fn window_for(&self, space: &ParamSpace, w: &[[f64; 2]]) -> Result<Vec<(f64, f64)>> {
        if w.len() != space.dim() {
            return Err(Error::invalid(format!(
                "window has {} axes, model {:?} has {}",
                w.len(),
                self.family,
                space.dim()
            )));
        }
        let bx: Vec<(f64, f64)> = w.iter().map(|p| (p[0], p[1])).collect();
        if !space.contains_box(&bx) {
            return Err(Error::invalid(format!(
                "window {bx:?} must be a non-degenerate compact box inside the parameter space"
            )));
        }
        Ok(bx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_build() {
        let s = ModelSpec::from_json(r#"{"family":"gaussian_scale","mu":1.0}"#).unwrap();
        assert_eq!(s.build().unwrap().name(), "gaussian_scale");
        assert_eq!(s.window_box().unwrap(), vec![(0.1, 10.0)]);
        let s = ModelSpec::from_json(r#"{"family":"two_piece","window":[[0,1],[0.5,2],[0.5,2]]}"#).unwrap();
        assert_eq!(s.window_box().unwrap()[1], (0.5, 2.0));
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(ModelSpec::from_json(r#"{"family":"custom"}"#).is_err());
        assert!(ModelSpec::from_json(r#"{"family":"gaussian_scale","window":[[0,1]]}"#).is_err());
        assert!(ModelSpec::from_json(r#"{"family":"gaussian_location","sigma":-1}"#).is_err());
        assert!(ModelSpec::from_json("{not json").is_err());
    }
}
