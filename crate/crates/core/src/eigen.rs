//! Cyclic Jacobi eigensolver for small dense symmetric matrices.

use serde::{Deserialize, Serialize};

use crate::tensor::SymMatrix;

const MAX_SWEEPS: usize = 100;
const OFF_REL_TOL: f64 = 1e-13;

/// Eigenvalues in ascending order with matching orthonormal eigenvectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
}

impl Spectrum {
    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().unwrap_or(&0.0)
    }
    pub fn min(&self) -> f64 {
        *self.eigenvalues.first().unwrap_or(&0.0)
    }
}

/// Diagonalises `a` by cyclic Jacobi rotations. Sweeps stop once the
/// off-diagonal Frobenius mass drops below 1e-13·‖A‖_F, or after 100 sweeps.
pub fn jacobi_eigen(a: &SymMatrix) -> Spectrum {
    let n = a.dim();
    let mut m: Vec<f64> = a.entries().to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let fro = a.frob_norm();
    let threshold = OFF_REL_TOL * fro;

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += 2.0 * m[p * n + q] * m[p * n + q];
            }
        }
        if off.sqrt() <= threshold || fro == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                // stable rotation angle (Rutishauser)
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]));
    Spectrum {
        eigenvalues: order.iter().map(|&i| m[i * n + i]).collect(),
        eigenvectors: order.iter().map(|&i| (0..n).map(|k| v[k * n + i]).collect()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_and_two_by_two() {
        let s = jacobi_eigen(&SymMatrix::diag(&[3.0, -1.0, 2.0]));
        assert_eq!(s.eigenvalues, vec![-1.0, 2.0, 3.0]);
        let s = jacobi_eigen(&SymMatrix::new(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap());
        assert!((s.eigenvalues[0] + 1.0).abs() < 1e-15);
        assert!((s.eigenvalues[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_matrix() {
        let s = jacobi_eigen(&SymMatrix::zeros(3));
        assert_eq!(s.eigenvalues, vec![0.0; 3]);
    }
}
