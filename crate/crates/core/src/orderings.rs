//! Positivity and rank-one positivity of fourth-order forms, and the induced
//! orderings on ξ∨v and ξ∨𝐗.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling;
use crate::spectrum;
use crate::tensor::{vee_hess, BiForm, Direction, HessTensor};
use crate::vecops::{self, norm};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifierOptions {
    pub multistarts: usize,
    pub max_iters: usize,
    pub improvement_tol: f64,
    pub tol: f64,
}

impl Default for CertifierOptions {
    fn default() -> Self {
        Self { multistarts: 64, max_iters: 200, improvement_tol: 1e-12, tol: 1e-9 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankOneVerdict {
    /// No negative rank-one direction found over the start set.
    Positive,
    /// An explicit witness with negative value exists.
    Indefinite,
}

/// Result of the rank-one minimisation. Indefiniteness is exact (the witness
/// reproduces `min_value`); positivity holds only up to start-set coverage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankOneCertificate {
    pub verdict: RankOneVerdict,
    pub min_value: f64,
    pub witness_eta: Vec<f64>,
    pub witness_w: Vec<f64>,
    pub multistart_count: usize,
}

struct Descent {
    value: f64,
    eta: Vec<f64>,
    w: Vec<f64>,
}

/// Alternating exact block minimisation from one start.
fn descend(xi: &BiForm, eta0: Vec<f64>, w0: Vec<f64>, eta_first: bool, opts: &CertifierOptions) -> Descent {
    let (mut eta, mut w) = (eta0, w0);
    let mut value = xi.rank_one_value(&eta, &w);
    let scale = xi.norm().max(1.0);
    for _ in 0..opts.max_iters {
        let before = value;
        for step in 0..2 {
            if (step == 0) == eta_first {
                eta = xi.m_of_w(&w).eigen().eigenvectors[0].clone();
            } else {
                w = xi.k_of_eta(&eta).eigen().eigenvectors[0].clone();
            }
        }
        value = xi.rank_one_value(&eta, &w);
        if before - value < opts.improvement_tol * scale {
            break;
        }
    }
    Descent { value, eta, w }
}

/// Approximates min over unit η, w of Ξ:(η⊗w)⊗(η⊗w).
pub fn min_rank_one_value(xi: &BiForm, opts: &CertifierOptions) -> Result<RankOneCertificate> {
    let (nb, ns) = (xi.big(), xi.small());
    // deterministic start set: Halton pairs then coordinate pairs
    let mut starts: Vec<(Vec<f64>, Vec<f64>, bool)> = (0..opts.multistarts)
        .map(|k| {
            let eta = sampling::halton_unit(2 * k as u64 + 1, nb);
            let w = sampling::halton_unit(2 * k as u64 + 2, ns);
            (eta, w, k % 2 == 0)
        })
        .collect();
    for a in 0..nb {
        for i in 0..ns {
            starts.push((vecops::unit(nb, a), vecops::unit(ns, i), false));
        }
    }
    let results: Vec<Descent> =
        starts.into_par_iter().map(|(eta, w, first)| descend(xi, eta, w, first, opts)).collect();
    let best = results
        .into_iter()
        .enumerate()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
        .map(|(_, d)| d)
        .expect("nonempty start set");
    if !best.value.is_finite() {
        return Err(Error::NonFinite("rank-one minimisation".into()));
    }
    let count = opts.multistarts + nb * ns;
    let verdict = if best.value >= -opts.tol { RankOneVerdict::Positive } else { RankOneVerdict::Indefinite };
    Ok(RankOneCertificate {
        verdict,
        min_value: best.value,
        witness_eta: best.eta,
        witness_w: best.w,
        multistart_count: count,
    })
}

/// True iff the flattening is positive semidefinite (min eigenvalue ≥ −1e−10).
pub fn is_positive(xi: &BiForm) -> bool {
    xi.flatten().min_eig() >= -1e-10
}

/// Outcome of an induced-ordering test with the per-route verdicts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InducedVerdict {
    pub holds: bool,
    /// ξᵀv for vectors; the largest eigenvalue of ξᵀ𝐗 for Hessians.
    pub decomposition: f64,
    pub routes: Vec<bool>,
}

fn unanimous(what: &str, routes: Vec<bool>, decomposition: f64) -> Result<InducedVerdict> {
    let holds = routes[0];
    if routes.iter().any(|&r| r != holds) {
        return Err(Error::Diagnostic(format!("{what}: equivalent formulations disagree {routes:?}")));
    }
    Ok(InducedVerdict { holds, decomposition, routes })
}

/// ξ∨v ≤ 0, evaluated through four equivalent conditions.
pub fn vee_nonpos_vector(xi: &Direction, v: &[f64], tol: f64) -> Result<InducedVerdict> {
    if v.len() != xi.dim() {
        return Err(Error::Dimension("vee_nonpos_vector".into()));
    }
    let t = tol * norm(v).max(1.0);
    let a = xi.along(v);
    let sigma = spectrum::vee_spectrum(xi, v)?.spectrum.max();
    let r1 = sigma <= t;
    let r2 = norm(&vecops::axpy(v, -a, xi.as_slice())) <= t && a <= t;
    let r3 = norm(&xi.perp(v)) <= t && a <= t;
    let r4 = norm(&vecops::axpy(v, norm(v), xi.as_slice())) <= t;
    unanimous("vee_nonpos_vector", vec![r1, r2, r3, r4], a)
}

/// ξ∨𝐗 ≤ 0, evaluated by the rank-one certifier, by the decomposition
/// ξ^⊥𝐗 = 0 with ξᵀ𝐗 ⪯ 0, and by the flattened eigenvalues.
pub fn vee_nonpos_hess(xi: &Direction, x: &HessTensor, opts: &CertifierOptions) -> Result<InducedVerdict> {
    let form = vee_hess(xi, x)?;
    let t = opts.tol * x.norm().max(1.0);
    let cert = min_rank_one_value(&form.neg(), &CertifierOptions { tol: t, ..*opts })?;
    let r1 = cert.verdict == RankOneVerdict::Positive;
    let top = x.left(xi.as_slice()).max_eig();
    let r2 = x.perp(xi).norm() <= t && top <= t;
    let r3 = form.flatten().max_eig() <= t;
    unanimous("vee_nonpos_hess", vec![r1, r2, r3], top)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::SymMatrix;

    #[test]
    fn identity_and_negation() {
        let o = CertifierOptions::default();
        let c = min_rank_one_value(&BiForm::identity(2, 3), &o).unwrap();
        assert!((c.min_value - 1.0).abs() < 1e-12);
        let c = min_rank_one_value(&BiForm::identity(2, 3).neg(), &o).unwrap();
        assert_eq!(c.verdict, RankOneVerdict::Indefinite);
        assert!((c.min_value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn hess_examples() {
        let o = CertifierOptions::default();
        let xi = Direction::normalized(&[1.0, 2.0]).unwrap();
        let m = SymMatrix::identity(2).scale(-1.0);
        assert!(vee_nonpos_hess(&xi, &HessTensor::outer(xi.as_slice(), &m), &o).unwrap().holds);
        let eta = [-2.0 / 5f64.sqrt(), 1.0 / 5f64.sqrt()];
        assert!(!vee_nonpos_hess(&xi, &HessTensor::outer(&eta, &m), &o).unwrap().holds);
        assert!(!vee_nonpos_hess(&xi, &HessTensor::outer(xi.as_slice(), &SymMatrix::identity(2)), &o).unwrap().holds);
    }
}
