//! Region predictors: a mixture over relative-pose features plus a
//! log-likelihood threshold.

use alloc::string::String;
use alloc::vec::Vec;

use rand_core::RngCore;

use super::gmm::Mixture;
use crate::model::{RelPoseFeature, FEATURE_DIM};

pub type TypePair = (String, String);

#[derive(Clone, Debug, PartialEq)]
pub struct RcrPredictor {
    pub pair: TypePair,
    /// 1-based index within the pair, in component order.
    pub index: usize,
    pub mixture: Mixture,
    /// Membership threshold on the mixture log-density.
    pub eps: f64,
}

impl RcrPredictor {
    pub fn log_density(&self, x: &RelPoseFeature) -> f64 {
        self.mixture.log_density(x)
    }

    pub fn contains(&self, x: &RelPoseFeature) -> bool {
        self.log_density(x) >= self.eps
    }

    /// Draws a feature; the heading part is renormalised onto the unit circle.
    pub fn sample<R: RngCore>(&self, r: &mut R) -> RelPoseFeature {
        let mut x = [0.0; FEATURE_DIM];
        self.mixture.sample(r, &mut x);
        normalize_heading(&mut x);
        x
    }

    /// Mean of the heaviest component, heading renormalised.
    pub fn mode(&self) -> RelPoseFeature {
        let g = &self.mixture.components[self.mixture.heaviest()];
        let mut x = [g.mean[0], g.mean[1], g.mean[2], g.mean[3]];
        normalize_heading(&mut x);
        x
    }
}

pub fn normalize_heading(x: &mut RelPoseFeature) {
    let n = libm::hypot(x[2], x[3]);
    if n > 1e-12 {
        x[2] /= n;
        x[3] /= n;
    } else {
        x[2] = 1.0;
        x[3] = 0.0;
    }
}

/// Rank used to order types inside a pair: robot bodies first, surfaces last.
pub fn type_rank(ty: &str) -> (u8, &str) {
    match ty {
        crate::model::BASE => (0, ty),
        crate::model::GRIPPER => (1, ty),
        crate::model::SURFACE => (3, ty),
        _ => (2, ty),
    }
}

/// All type pairs `(a, b)` with `rank(a) <= rank(b)` over `types`.
pub fn type_pairs(types: &[String]) -> Vec<TypePair> {
    let mut ts: Vec<&String> = types.iter().collect();
    ts.sort_by(|a, b| type_rank(a).cmp(&type_rank(b)));
    ts.dedup();
    let mut out = Vec::new();
    for i in 0..ts.len() {
        for j in i..ts.len() {
            out.push((ts[i].clone(), ts[j].clone()));
        }
    }
    out
}
