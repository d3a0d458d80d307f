use serde::Serialize;

use crate::constrain::{nest_test, HypothesisTest, NestOptions, Verdict};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::space::CompactNest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeVerdict {
    Proper,
    ImproperSuspected,
    Inconclusive,
}

impl From<Verdict> for ProbeVerdict {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Convergent => ProbeVerdict::Proper,
            Verdict::Divergent => ProbeVerdict::ImproperSuspected,
            Verdict::Inconclusive => ProbeVerdict::Inconclusive,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeResult {
    pub verdict: ProbeVerdict,
    pub test: HypothesisTest,
}

/// Ratio test of the unnormalized posterior `Π ℓ(y_i|θ)·π(θ)` over the nest
/// boxes.
pub fn propriety_probe(
    log_prior: &(dyn Fn(&[f64]) -> f64 + Sync),
    model: &dyn Model,
    data: &[f64],
    nest: &CompactNest,
    opts: NestOptions,
) -> Result<ProbeResult> {
    if nest.space().dim() != model.space().dim() {
        return Err(Error::invalid("nest and model dimensions differ"));
    }
    let f = |t: &[f64]| {
        let lp = log_prior(t);
        if lp == f64::NEG_INFINITY {
            lp
        } else {
            lp + model.dataset_log_likelihood(data, t)
        }
    };
    let test = nest_test("posterior", nest, opts, &f)?;
    Ok(ProbeResult {
        verdict: test.verdict.into(),
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::GaussianLocation;
    use crate::space::ParamSpace;

    #[test]
    fn proper_prior_bounded_likelihood() {
        let m = GaussianLocation::new(1.0).unwrap();
        let nest = CompactNest::new(ParamSpace::interval(f64::NEG_INFINITY, f64::INFINITY).unwrap());
        let lp = |t: &[f64]| -0.5 * t[0] * t[0];
        let r = propriety_probe(&lp, &m, &[0.2, -0.1], &nest, NestOptions::default()).unwrap();
        assert_eq!(r.verdict, ProbeVerdict::Proper);
    }
}
