//! Closed-form spectrum of ξ∨R and the two alternative expressions for its
//! largest eigenvalue.

use serde::{Deserialize, Serialize};

use crate::eigen::Spectrum;
use crate::error::{Error, Result};
use crate::tensor::Direction;
use crate::vecops::{self, norm, sgn, ZERO_TOL};

/// Spectrum of ξ∨R together with its largest eigenvalue computed three ways.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VeeSpectrum {
    pub spectrum: Spectrum,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    /// max σ from the eigenvalue formula
    pub max_closed: f64,
    /// max σ via the s(R)-representation
    pub max_signed: f64,
    /// max σ via the min over ± representation
    pub max_minpm: f64,
}

/// −½(|R| − ξᵀR)
pub fn lambda_minus(xi: &Direction, r: &[f64]) -> f64 {
    -0.5 * (norm(r) - xi.along(r))
}

/// ½(|R| + ξᵀR)
pub fn lambda_plus(xi: &Direction, r: &[f64]) -> f64 {
    0.5 * (norm(r) + xi.along(r))
}

/// max σ(ξ∨R) for N ≥ 2; for N = 1 the positive part of the single eigenvalue.
/// Always nonnegative.
pub fn max_sigma(xi: &Direction, r: &[f64]) -> f64 {
    if xi.dim() == 1 {
        (xi.as_slice()[0] * r[0]).max(0.0)
    } else {
        lambda_plus(xi, r)
    }
}

/// (ξᵀR)⁺ + |R|/4 · |sgn(R) − s(R)ξ|², s(R) = 2(sgn ξᵀR)⁺ − 1.
pub fn max_sigma_signed(xi: &Direction, r: &[f64]) -> f64 {
    let a = xi.along(r);
    let s = 2.0 * sgn(a).max(0.0) - 1.0;
    let d = vecops::axpy(&vecops::sgn_vec(r), -s, xi.as_slice());
    a.max(0.0) + 0.25 * norm(r) * vecops::dot(&d, &d)
}

/// max{ξᵀR, 0} + |R|/4 · min |sgn(R) ± ξ|².
pub fn max_sigma_minpm(xi: &Direction, r: &[f64]) -> f64 {
    let u = vecops::sgn_vec(r);
    let p = vecops::add(&u, xi.as_slice());
    let m = vecops::sub(&u, xi.as_slice());
    let best = vecops::dot(&p, &p).min(vecops::dot(&m, &m));
    xi.along(r).max(0.0) + 0.25 * norm(r) * best
}

/// Eigen-decomposition of ξ∨R without a generic solver. In the orthonormal
/// frame {ξ, ρ̂} with ρ̂ = sgn(ξ^⊥R), the nonzero eigenvectors sit at the
/// half angle between ξ and sgn(R); this form stays accurate when R is
/// nearly parallel to ξ.
pub fn vee_spectrum(xi: &Direction, r: &[f64]) -> Result<VeeSpectrum> {
    let n = xi.dim();
    if r.len() != n {
        return Err(Error::Dimension(format!("vee_spectrum: R has length {}, expected {n}", r.len())));
    }
    if !vecops::all_finite(r) {
        return Err(Error::NonFinite("vee_spectrum input".into()));
    }
    let rn = norm(r);
    let lm = lambda_minus(xi, r);
    let lp = lambda_plus(xi, r);

    let spectrum = if n == 1 {
        Spectrum { eigenvalues: vec![xi.as_slice()[0] * r[0]], eigenvectors: vec![vec![1.0]] }
    } else if rn < ZERO_TOL {
        Spectrum {
            eigenvalues: vec![0.0; n],
            eigenvectors: (0..n).map(|k| vecops::unit(n, k)).collect(),
        }
    } else {
        // a second projection pass: when R is nearly parallel to ξ the first
        // leaves a component along ξ of relative size ε|R|/|ξ^⊥R|
        let perp = xi.perp(&xi.perp(r));
        let pn = norm(&perp);
        let rho_hat = if pn > ZERO_TOL * rn.max(1.0) {
            vecops::scale(&perp, 1.0 / pn)
        } else {
            vecops::orthonormal_complement(&[xi.to_vec()], n).remove(0)
        };
        let theta = pn.atan2(xi.along(r));
        let (ch, sh) = ((0.5 * theta).cos(), (0.5 * theta).sin());
        let e_plus = vecops::axpy(&vecops::scale(xi.as_slice(), ch), sh, &rho_hat);
        let e_minus = vecops::axpy(&vecops::scale(xi.as_slice(), -sh), ch, &rho_hat);
        let zeros = vecops::orthonormal_complement(&[e_plus.clone(), e_minus.clone()], n);
        let mut pairs: Vec<(f64, Vec<f64>)> = vec![(lm, e_minus), (lp, e_plus)];
        pairs.extend(zeros.into_iter().map(|z| (0.0, z)));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Spectrum {
            eigenvalues: pairs.iter().map(|p| p.0).collect(),
            eigenvectors: pairs.into_iter().map(|p| p.1).collect(),
        }
    };

    let max_closed = max_sigma(xi, r);
    let max_signed = max_sigma_signed(xi, r);
    let max_minpm = max_sigma_minpm(xi, r);
    let tol = 1e-12 * rn.max(1.0);
    // the representations describe max(σ ∪ {0}), which for N = 1 differs from the lone eigenvalue
    if (max_closed - max_signed).abs() > tol || (max_closed - max_minpm).abs() > tol {
        return Err(Error::Diagnostic(format!(
            "max eigenvalue representations disagree: {max_closed} / {max_signed} / {max_minpm}"
        )));
    }
    Ok(VeeSpectrum { spectrum, lambda_minus: lm, lambda_plus: lp, max_closed, max_signed, max_minpm })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_cases() {
        let xi = Direction::basis(2, 0);
        let s = vee_spectrum(&xi, &[3.0, 0.0]).unwrap();
        assert_eq!(s.spectrum.eigenvalues, vec![0.0, 3.0]);
        let s = vee_spectrum(&xi, &[-2.0, 0.0]).unwrap();
        assert_eq!(s.max_signed, 0.0);
        assert_eq!(s.spectrum.eigenvalues, vec![-2.0, 0.0]);
    }

    #[test]
    fn nearly_parallel_eigenvectors() {
        let xi = Direction::normalized(&[0.6, 0.8, 0.0]).unwrap();
        for c in [1.5, -1.5] {
            let r = vecops::axpy(&vecops::scale(xi.as_slice(), c), 1e-9, &[0.3, -0.7, 1.1]);
            let s = crate::tensor::vee(xi.as_slice(), &r).unwrap();
            let vs = vee_spectrum(&xi, &r).unwrap();
            for (l, v) in vs.spectrum.eigenvalues.iter().zip(&vs.spectrum.eigenvectors) {
                assert!(norm(&vecops::axpy(&s.mul_vec(v), -l, v)) < 1e-14);
            }
        }
    }

    #[test]
    fn scalar_case() {
        let s = vee_spectrum(&Direction::basis(1, 0), &[-2.0]).unwrap();
        assert_eq!(s.spectrum.eigenvalues, vec![-2.0]);
        assert_eq!(s.max_closed, 0.0);
    }
}
