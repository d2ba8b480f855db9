//! Relational critical regions: occupancy statistics over relative poses,
//! thresholded into connected components, each fitted with a Gaussian mixture
//! that acts as a membership test and a sampler.

pub mod gmm;
pub mod occupancy;
pub mod predictor;

pub use gmm::{fit_gmm, EmOptions, Gaussian, GmmError, GmmFit, Mixture};
pub use occupancy::{build_grid, label_components, Component, OccupancyGrid};
pub use predictor::{type_pairs, type_rank, RcrPredictor, TypePair};

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::model::{featurize, RelPoseFeature, Trajectory, FEATURE_DIM};
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct CriticalityParams {
    /// Visit-fraction threshold.
    pub theta: f64,
    /// Cells per non-degenerate feature axis.
    pub resolution: usize,
    /// Fraction of member samples allowed below the membership threshold.
    pub eps_quantile: f64,
    /// Covariance floor.
    pub reg: f64,
    /// Bounding-box margin as a fraction of the span, per side.
    pub margin: f64,
    /// At most this many observed features per component are used for fitting.
    pub samples: usize,
    /// Upper bound on mixture components per region.
    pub max_components: usize,
    /// Use failed demonstrations as well.
    pub include_failed: bool,
    pub seed: u64,
}

impl Default for CriticalityParams {
    fn default() -> CriticalityParams {
        CriticalityParams {
            theta: 0.6,
            resolution: 24,
            eps_quantile: 0.0,
            reg: 1e-6,
            margin: 0.05,
            samples: 2000,
            max_components: 8,
            include_failed: false,
            seed: 0,
        }
    }
}

impl CriticalityParams {
    pub fn validate(&self) -> Result<(), LearnError> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(LearnError::InvalidParams("theta must lie in (0, 1]"));
        }
        if self.resolution < 4 {
            return Err(LearnError::InvalidParams("resolution must be at least 4"));
        }
        if !(self.eps_quantile >= 0.0 && self.eps_quantile < 1.0) {
            return Err(LearnError::InvalidParams("eps_quantile must lie in [0, 1)"));
        }
        if self.samples < 4 {
            return Err(LearnError::InvalidParams("need at least 4 fit samples"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LearnError {
    /// No usable (successful) demonstration.
    EmptyInput,
    InvalidParams(&'static str),
    Gmm(GmmError),
}

impl fmt::Display for LearnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnError::EmptyInput => write!(f, "no successful demonstrations to learn from"),
            LearnError::InvalidParams(m) => write!(f, "invalid criticality parameters: {m}"),
            LearnError::Gmm(e) => write!(f, "mixture fit failed: {e}"),
        }
    }
}

impl From<GmmError> for LearnError {
    fn from(e: GmmError) -> Self {
        LearnError::Gmm(e)
    }
}

/// Everything learned for one type pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PairModel {
    pub pair: TypePair,
    pub grid: OccupancyGrid,
    pub components: Vec<Component>,
    pub predictors: Vec<RcrPredictor>,
}

/// Demonstrations that count as observed solutions under `params`.
pub fn usable<'a>(demos: &'a [Trajectory], params: &CriticalityParams) -> Vec<&'a Trajectory> {
    demos.iter().filter(|d| params.include_failed || d.success).collect()
}

/// Per trajectory, all instance-pair features of one type pair.
pub fn pair_features(demos: &[&Trajectory], pair: &TypePair) -> Vec<Vec<RelPoseFeature>> {
    demos
        .iter()
        .map(|t| {
            let mut out = Vec::new();
            for (i, di) in t.objects.iter().enumerate() {
                if di.ty != pair.0 {
                    continue;
                }
                for (j, dj) in t.objects.iter().enumerate() {
                    if i == j || dj.ty != pair.1 {
                        continue;
                    }
                    out.extend(t.states.iter().map(|s| featurize(di, &s.poses[i], dj, &s.poses[j])));
                }
            }
            out
        })
        .collect()
}

/// True iff no instance pair of `pair` ever changes its relative pose, i.e.
/// both objects stay put in every trajectory. Such pairs carry no evidence.
pub fn pair_is_static(demos: &[&Trajectory], pair: &TypePair) -> bool {
    let still = |t: &Trajectory, i: usize| t.states.iter().all(|s| s.poses[i] == t.states[0].poses[i]);
    demos.iter().all(|t| t.objects.iter().enumerate().all(|(i, o)| (o.ty != pair.0 && o.ty != pair.1) || still(t, i)))
}

/// Number of face-connected critical sub-blobs of `comp` at twice the resolution.
pub fn sub_blob_count(grid: &OccupancyGrid, comp: &Component, trajs: &[Vec<RelPoseFeature>], theta: f64) -> usize {
    let mut cmin = [usize::MAX; FEATURE_DIM];
    let mut cmax = [0usize; FEATURE_DIM];
    for &c in &comp.cells {
        let co = grid.coords(c);
        for a in 0..FEATURE_DIM {
            cmin[a] = cmin[a].min(co[a]);
            cmax[a] = cmax[a].max(co[a]);
        }
    }
    let mut lo = [0.0; FEATURE_DIM];
    let mut hi = [0.0; FEATURE_DIM];
    let mut res = [1; FEATURE_DIM];
    for a in 0..FEATURE_DIM {
        let w = grid.cell_width(a);
        lo[a] = grid.lo[a] + cmin[a] as f64 * w;
        hi[a] = grid.lo[a] + (cmax[a] + 1) as f64 * w;
        let factor = if grid.res[a] > 1 { 2 } else { 1 };
        res[a] = (cmax[a] - cmin[a] + 1) * factor;
    }
    let mut fine = OccupancyGrid::empty(lo, hi, res);
    let inside: Vec<Vec<RelPoseFeature>> = trajs
        .iter()
        .map(|t| {
            t.iter()
                .filter(|x| grid.cell_in(x).is_some_and(|c| comp.cells.binary_search(&c).is_ok()))
                .copied()
                .collect()
        })
        .collect();
    occupancy::accumulate(&mut fine, &inside);
    label_components(&fine, theta).len().max(1)
}

/// Observed features that fall inside a component's cells, one per time
/// step, subsampled uniformly without replacement down to at most `n`.
pub fn component_samples(
    grid: &OccupancyGrid,
    comp: &Component,
    trajs: &[Vec<RelPoseFeature>],
    n: usize,
    seed: u64,
) -> Vec<f64> {
    let mut pts: Vec<&RelPoseFeature> = trajs
        .iter()
        .flatten()
        .filter(|x| grid.cell_in(x).is_some_and(|c| comp.cells.binary_search(&c).is_ok()))
        .collect();
    if pts.len() > n {
        let mut r = rng::stream(seed, &[0x5a]);
        for i in 0..n {
            let j = i + rng::index(&mut r, pts.len() - i);
            pts.swap(i, j);
        }
        pts.truncate(n);
    }
    pts.into_iter().flat_map(|x| x.iter().copied()).collect()
}

/// Relative slack below the quantile log-density. Held objects repeat one
/// feature for many steps, so the quantile often lands on such a run; recomputed
/// poses then differ from it by rounding alone and must not fall outside.
pub const EPS_SLACK: f64 = 1e-9;

/// The `q`-quantile (lower interpolation) of `values`.
pub fn lower_quantile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let i = libm::floor(q * values.len() as f64) as usize;
    values[i.min(values.len() - 1)]
}

/// Learns grid, components and predictors for every type pair present in the
/// demonstrations.
pub fn learn_pair_models(demos: &[Trajectory], params: &CriticalityParams) -> Result<Vec<PairModel>, LearnError> {
    params.validate()?;
    let used = usable(demos, params);
    if used.is_empty() {
        return Err(LearnError::EmptyInput);
    }
    let mut types: Vec<String> = Vec::new();
    for t in &used {
        for o in &t.objects {
            if !types.contains(&o.ty) {
                types.push(o.ty.clone());
            }
        }
    }
    let mut out = Vec::new();
    for (pi, pair) in type_pairs(&types).into_iter().enumerate() {
        if pair_is_static(&used, &pair) {
            continue;
        }
        let trajs = pair_features(&used, &pair);
        let grid = match build_grid(&trajs, params.resolution, params.margin) {
            Some(g) => g,
            None => continue,
        };
        let components = label_components(&grid, params.theta);
        let mut predictors = Vec::new();
        for comp in &components {
            let seed = rng::derive_seed(params.seed, &[pi as u64, comp.id as u64]);
            let samples = component_samples(&grid, comp, &trajs, params.samples, seed);
            let k = sub_blob_count(&grid, comp, &trajs, params.theta)
                .min(params.max_components)
                .min(samples.len() / (4 * FEATURE_DIM))
                .max(1);
            let fit = fit_gmm(&samples, FEATURE_DIM, k, &EmOptions { reg: params.reg, seed, ..EmOptions::default() })?;
            let mut ll: Vec<f64> = samples.chunks(FEATURE_DIM).map(|x| fit.mixture.log_density(x)).collect();
            let q = lower_quantile(&mut ll, params.eps_quantile);
            let eps = q - EPS_SLACK * q.abs().max(1.0);
            predictors.push(RcrPredictor { pair: pair.clone(), index: comp.id + 1, mixture: fit.mixture, eps });
        }
        out.push(PairModel { pair, grid, components, predictors });
    }
    Ok(out)
}

/// Predictors per type pair (pairs without critical regions are omitted).
pub fn learn_predictors(
    demos: &[Trajectory],
    params: &CriticalityParams,
) -> Result<BTreeMap<TypePair, Vec<RcrPredictor>>, LearnError> {
    Ok(learn_pair_models(demos, params)?
        .into_iter()
        .filter(|m| !m.predictors.is_empty())
        .map(|m| (m.pair, m.predictors))
        .collect())
}
