//! Small dense symmetric-matrix helpers (row-major `d x d` slices).

use alloc::vec;
use alloc::vec::Vec;

/// Lower Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * d + i] = libm::sqrt(s);
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// `log det A` from its Cholesky factor.
pub fn chol_log_det(l: &[f64], d: usize) -> f64 {
    (0..d).map(|i| 2.0 * libm::log(l[i * d + i])).sum()
}

/// Solves `L z = v` by forward substitution.
pub fn forward_solve(l: &[f64], d: usize, v: &[f64], z: &mut [f64]) {
    for i in 0..d {
        let mut s = v[i];
        for k in 0..i {
            s -= l[i * d + k] * z[k];
        }
        z[i] = s / l[i * d + i];
    }
}

/// Symmetric eigen-decomposition by cyclic Jacobi rotations.
/// Returns eigenvalues and the column-eigenvector matrix (row-major).
pub fn sym_eigen(a: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                off += m[i * d + j] * m[i * d + j];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = m[p * d + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[p * d + p];
                let aqq = m[q * d + q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + libm::sqrt(1.0 + tau * tau))
                } else {
                    -1.0 / (-tau + libm::sqrt(1.0 + tau * tau))
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = t * c;
                for k in 0..d {
                    let mkp = m[k * d + p];
                    let mkq = m[k * d + q];
                    m[k * d + p] = c * mkp - s * mkq;
                    m[k * d + q] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let mpk = m[p * d + k];
                    let mqk = m[q * d + k];
                    m[p * d + k] = c * mpk - s * mqk;
                    m[q * d + k] = s * mpk + c * mqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let vals = (0..d).map(|i| m[i * d + i]).collect();
    (vals, v)
}

/// Projects a symmetric matrix onto `{S : S >= floor * I}` by clamping eigenvalues.
pub fn clamp_eigenvalues(a: &[f64], d: usize, floor: f64) -> Vec<f64> {
    let (vals, vecs) = sym_eigen(a, d);
    let mut out = vec![0.0; d * d];
    for k in 0..d {
        let lam = if vals[k] > floor { vals[k] } else { floor };
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] += lam * vecs[i * d + k] * vecs[j * d + k];
            }
        }
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let s = 0.5 * (out[i * d + j] + out[j * d + i]);
            out[i * d + j] = s;
            out[j * d + i] = s;
        }
    }
    out
}

pub fn min_eigenvalue(a: &[f64], d: usize) -> f64 {
    sym_eigen(a, d).0.into_iter().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_reconstructs() {
        let a = [4.0, 2.0, 0.6, 2.0, 2.0, 0.5, 0.6, 0.5, 3.0];
        let l = cholesky(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| l[i * 3 + k] * l[j * 3 + k]).sum();
                assert!((s - a[i * 3 + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eigen_reconstructs_and_clamps() {
        let a = [2.0, 1.0, 1.0, 2.0];
        let (vals, _) = sym_eigen(&a, 2);
        let mut v = vals.clone();
        v.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((v[0] - 1.0).abs() < 1e-12 && (v[1] - 3.0).abs() < 1e-12);
        let c = clamp_eigenvalues(&a, 2, 1.5);
        assert!((min_eigenvalue(&c, 2) - 1.5).abs() < 1e-12);
        let z = clamp_eigenvalues(&[0.0; 4], 2, 1e-6);
        assert!((z[0] - 1e-6).abs() < 1e-18 && z[1].abs() < 1e-18);
    }
}
