//! Gaussian mixtures fitted by EM with k-means++ seeding.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use rand_core::RngCore;

use crate::linalg::{chol_log_det, cholesky, clamp_eigenvalues, forward_solve};
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian {
    pub mean: Vec<f64>,
    /// Row-major `d x d`.
    pub cov: Vec<f64>,
    chol: Vec<f64>,
    log_norm: f64,
}

impl Gaussian {
    /// Fails if `cov` is not positive-definite.
    pub fn new(mean: Vec<f64>, cov: Vec<f64>) -> Option<Gaussian> {
        let d = mean.len();
        let chol = cholesky(&cov, d)?;
        let log_norm = -0.5 * (d as f64 * libm::log(2.0 * PI) + chol_log_det(&chol, d));
        Some(Gaussian { mean, cov, chol, log_norm })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Squared Mahalanobis distance.
    pub fn mahalanobis2(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut v = [0.0f64; 16];
        let mut z = [0.0f64; 16];
        assert!(d <= 16, "dimension above 16 is not supported");
        for i in 0..d {
            v[i] = x[i] - self.mean[i];
        }
        forward_solve(&self.chol, d, &v[..d], &mut z[..d]);
        z[..d].iter().map(|a| a * a).sum()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.log_norm - 0.5 * self.mahalanobis2(x)
    }

    pub fn sample<R: RngCore>(&self, r: &mut R, out: &mut [f64]) {
        let d = self.dim();
        let z: Vec<f64> = (0..d).map(|_| rng::normal(r)).collect();
        for i in 0..d {
            let mut s = self.mean[i];
            for k in 0..=i {
                s += self.chol[i * d + k] * z[k];
            }
            out[i] = s;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mixture {
    pub weights: Vec<f64>,
    pub components: Vec<Gaussian>,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + libm::log(xs.iter().map(|x| libm::exp(x - m)).sum::<f64>())
}

impl Mixture {
    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut terms = [0.0f64; 64];
        let n = self.components.len();
        if n > terms.len() {
            let v: Vec<f64> = self.terms(x).collect();
            return log_sum_exp(&v);
        }
        for (t, v) in terms.iter_mut().zip(self.terms(x)) {
            *t = v;
        }
        log_sum_exp(&terms[..n])
    }

    fn terms<'a>(&'a self, x: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        self.weights.iter().zip(&self.components).map(move |(w, g)| libm::log(*w) + g.log_density(x))
    }

    /// Index of the heaviest component (lowest index on ties).
    pub fn heaviest(&self) -> usize {
        let mut best = 0;
        for i in 1..self.weights.len() {
            if self.weights[i] > self.weights[best] {
                best = i;
            }
        }
        best
    }

    pub fn sample<R: RngCore>(&self, r: &mut R, out: &mut [f64]) {
        let u = rng::uniform01(r);
        let mut acc = 0.0;
        let mut k = self.components.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                k = i;
                break;
            }
        }
        self.components[k].sample(r, out);
    }

    /// Mixture mean.
    pub fn mean(&self) -> Vec<f64> {
        let d = self.dim();
        let mut m = vec![0.0; d];
        for (w, g) in self.weights.iter().zip(&self.components) {
            for i in 0..d {
                m[i] += w * g.mean[i];
            }
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GmmError {
    TooFewSamples { samples: usize, k: usize },
    BadShape,
    NotPositiveDefinite,
}

impl fmt::Display for GmmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GmmError::TooFewSamples { samples, k } => {
                write!(f, "{samples} samples cannot support {k} components (need 4 per component)")
            }
            GmmError::BadShape => write!(f, "sample buffer length is not a multiple of the dimension"),
            GmmError::NotPositiveDefinite => write!(f, "covariance lost positive-definiteness"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmOptions {
    pub max_iter: usize,
    /// Stop once an iteration improves the total log-likelihood by less than
    /// `tol * max(1, |ll|)`. Zero runs all iterations.
    pub tol: f64,
    pub reg: f64,
    pub seed: u64,
}

impl Default for EmOptions {
    fn default() -> EmOptions {
        EmOptions { max_iter: 200, tol: 1e-10, reg: 1e-6, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GmmFit {
    pub mixture: Mixture,
    /// Total log-likelihood at the start of every iteration, plus the final value.
    pub log_likelihood: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn distinct_count(samples: &[f64], d: usize, cap: usize) -> usize {
    let mut seen: Vec<&[f64]> = Vec::new();
    for s in samples.chunks(d) {
        if !seen.contains(&s) {
            seen.push(s);
            if seen.len() >= cap {
                break;
            }
        }
    }
    seen.len()
}

/// k-means++ seeding: indices of the chosen centres.
fn kmeans_pp<R: RngCore>(samples: &[f64], d: usize, k: usize, r: &mut R) -> Vec<usize> {
    let n = samples.len() / d;
    let mut centers = vec![rng::index(r, n)];
    let mut dist: Vec<f64> =
        (0..n).map(|i| sq_dist(&samples[i * d..(i + 1) * d], &samples[centers[0] * d..(centers[0] + 1) * d])).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total <= 0.0 {
            rng::index(r, n)
        } else {
            let u = rng::uniform01(r) * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, w) in dist.iter().enumerate() {
                acc += w;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            pick
        };
        centers.push(next);
        for i in 0..n {
            let dd = sq_dist(&samples[i * d..(i + 1) * d], &samples[next * d..(next + 1) * d]);
            if dd < dist[i] {
                dist[i] = dd;
            }
        }
    }
    centers
}

/// Weighted mean and covariance, projected onto `cov >= reg * I`.
fn moments(samples: &[f64], d: usize, resp: &[f64], nk: f64, reg: f64) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len() / d;
    let mut mean = vec![0.0; d];
    for i in 0..n {
        let w = resp[i];
        if w == 0.0 {
            continue;
        }
        for a in 0..d {
            mean[a] += w * samples[i * d + a];
        }
    }
    for m in mean.iter_mut() {
        *m /= nk;
    }
    let mut cov = vec![0.0; d * d];
    for i in 0..n {
        let w = resp[i];
        if w == 0.0 {
            continue;
        }
        let x = &samples[i * d..(i + 1) * d];
        for a in 0..d {
            let da = x[a] - mean[a];
            for b in a..d {
                cov[a * d + b] += w * da * (x[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[a * d + b] / nk;
            cov[a * d + b] = v;
            cov[b * d + a] = v;
        }
    }
    (mean, clamp_eigenvalues(&cov, d, reg))
}

/// Fits a `k`-component mixture to `samples` (flat, row-major, dimension `d`).
///
/// The M-step maximises the expected log-likelihood over covariances
/// constrained to `cov >= reg * I`, so the log-likelihood trace is
/// nondecreasing. Fewer distinct samples than `k` reduce `k`.
pub fn fit_gmm(samples: &[f64], d: usize, k: usize, opts: &EmOptions) -> Result<GmmFit, GmmError> {
    if d == 0 || !samples.len().is_multiple_of(d) {
        return Err(GmmError::BadShape);
    }
    let n = samples.len() / d;
    let k = k.max(1);
    if n < 4 * k {
        return Err(GmmError::TooFewSamples { samples: n, k });
    }
    let k = distinct_count(samples, d, k).max(1);
    let mut r = rng::stream(opts.seed, &[0x6e6d]);
    let centers = kmeans_pp(samples, d, k, &mut r);

    // Hard assignment to the nearest seed gives the starting parameters.
    let mut resp = vec![0.0; n * k];
    for i in 0..n {
        let x = &samples[i * d..(i + 1) * d];
        let mut best = 0;
        let mut bd = f64::INFINITY;
        for (j, &c) in centers.iter().enumerate() {
            let dd = sq_dist(x, &samples[c * d..(c + 1) * d]);
            if dd < bd {
                bd = dd;
                best = j;
            }
        }
        resp[best * n + i] = 1.0;
    }
    let mut weights = vec![0.0; k];
    let mut comps: Vec<Gaussian> = Vec::with_capacity(k);
    for j in 0..k {
        let nk: f64 = resp[j * n..(j + 1) * n].iter().sum();
        let (mean, cov) = if nk > 0.0 {
            moments(samples, d, &resp[j * n..(j + 1) * n], nk, opts.reg)
        } else {
            let c = centers[j];
            let mut cov = vec![0.0; d * d];
            for a in 0..d {
                cov[a * d + a] = opts.reg;
            }
            (samples[c * d..(c + 1) * d].to_vec(), cov)
        };
        weights[j] = nk / n as f64;
        comps.push(Gaussian::new(mean, cov).ok_or(GmmError::NotPositiveDefinite)?);
    }

    let mut trace = Vec::new();
    let mut logp = vec![0.0; k];
    for it in 0..=opts.max_iter {
        // E-step.
        let mut ll = 0.0;
        let mut comp = 0.0;
        for i in 0..n {
            let x = &samples[i * d..(i + 1) * d];
            for j in 0..k {
                logp[j] =
                    if weights[j] > 0.0 { libm::log(weights[j]) + comps[j].log_density(x) } else { f64::NEG_INFINITY };
            }
            let lse = log_sum_exp(&logp);
            // Neumaier summation keeps the trace free of rounding wobble.
            let t = ll + lse;
            if ll.abs() >= lse.abs() {
                comp += (ll - t) + lse;
            } else {
                comp += (lse - t) + ll;
            }
            ll = t;
            for j in 0..k {
                resp[j * n + i] = libm::exp(logp[j] - lse);
            }
        }
        let ll = ll + comp;
        let converged =
            trace.last().map(|&prev: &f64| ll - prev < opts.tol * libm::fmax(1.0, libm::fabs(ll))).unwrap_or(false);
        trace.push(ll);
        if it == opts.max_iter || converged {
            break;
        }
        // M-step.
        for j in 0..k {
            let nk: f64 = resp[j * n..(j + 1) * n].iter().sum();
            if nk <= 1e-12 {
                weights[j] = 0.0;
                continue;
            }
            let (mean, cov) = moments(samples, d, &resp[j * n..(j + 1) * n], nk, opts.reg);
            weights[j] = nk / n as f64;
            comps[j] = Gaussian::new(mean, cov).ok_or(GmmError::NotPositiveDefinite)?;
        }
    }

    let mut kept_w = Vec::new();
    let mut kept_c = Vec::new();
    for (w, c) in weights.into_iter().zip(comps) {
        if w > 1e-12 {
            kept_w.push(w);
            kept_c.push(c);
        }
    }
    let total: f64 = kept_w.iter().sum();
    for w in kept_w.iter_mut() {
        *w /= total;
    }
    Ok(GmmFit { mixture: Mixture { weights: kept_w, components: kept_c }, log_likelihood: trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_cluster_gets_floored_covariance() {
        let v = [0.3, -0.2, 1.0, 0.0];
        let samples: Vec<f64> = (0..40).flat_map(|_| v).collect();
        let fit = fit_gmm(&samples, 4, 3, &EmOptions::default()).unwrap();
        assert_eq!(fit.mixture.components.len(), 1);
        let g = &fit.mixture.components[0];
        for a in 0..4 {
            assert!((g.mean[a] - v[a]).abs() < 1e-15);
            for b in 0..4 {
                let want = if a == b { 1e-6 } else { 0.0 };
                assert!((g.cov[a * 4 + b] - want).abs() < 1e-18);
            }
        }
    }

    #[test]
    fn too_few_samples_rejected() {
        let s = vec![0.0; 4 * 7];
        assert_eq!(fit_gmm(&s, 4, 2, &EmOptions::default()).unwrap_err(), GmmError::TooFewSamples { samples: 7, k: 2 });
    }
}
