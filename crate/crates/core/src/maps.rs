//! Evaluable maps u: Ω ⊆ ℝ^n → ℝ^N with optional analytic derivatives.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling;
use crate::tensor::{GradMatrix, HessTensor, SymMatrix};
use crate::vecops;

/// Region on which a map may be evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Whole,
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl Domain {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Whole => true,
            Domain::Ball { center, radius } => vecops::norm(&vecops::sub(x, center)) <= *radius,
            Domain::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| v >= l && v <= h),
        }
    }

    /// Distance from `x` to the complement (infinite for the whole space).
    pub fn depth(&self, x: &[f64]) -> f64 {
        match self {
            Domain::Whole => f64::INFINITY,
            Domain::Ball { center, radius } => radius - vecops::norm(&vecops::sub(x, center)),
            Domain::Box { lo, hi } => {
                x.iter().zip(lo.iter().zip(hi)).map(|(v, (l, h))| (v - l).min(h - v)).fold(f64::INFINITY, f64::min)
            }
        }
    }
}

pub trait VectorMap: Send + Sync {
    /// n
    fn input_dim(&self) -> usize;
    /// N
    fn output_dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Vec<f64>;
    fn grad(&self, _x: &[f64]) -> Option<GradMatrix> {
        None
    }
    fn hess(&self, _x: &[f64]) -> Option<HessTensor> {
        None
    }
    fn domain(&self) -> Domain {
        Domain::Whole
    }
}

pub type MapHandle = Arc<dyn VectorMap>;

type EvalFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64]) -> GradMatrix + Send + Sync>;
type HessFn = Arc<dyn Fn(&[f64]) -> HessTensor + Send + Sync>;

/// A map assembled from closures.
#[derive(Clone)]
pub struct FnMap {
    n: usize,
    big: usize,
    eval: EvalFn,
    grad: Option<GradFn>,
    hess: Option<HessFn>,
    domain: Domain,
}

impl FnMap {
    pub fn new(n: usize, big: usize, eval: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self { n, big, eval: Arc::new(eval), grad: None, hess: None, domain: Domain::Whole }
    }
    pub fn with_grad(mut self, g: impl Fn(&[f64]) -> GradMatrix + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(g));
        self
    }
    pub fn with_hess(mut self, h: impl Fn(&[f64]) -> HessTensor + Send + Sync + 'static) -> Self {
        self.hess = Some(Arc::new(h));
        self
    }
    pub fn with_domain(mut self, d: Domain) -> Self {
        self.domain = d;
        self
    }
    pub fn handle(self) -> MapHandle {
        Arc::new(self)
    }
}

impl VectorMap for FnMap {
    fn input_dim(&self) -> usize {
        self.n
    }
    fn output_dim(&self) -> usize {
        self.big
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.eval)(x)
    }
    fn grad(&self, x: &[f64]) -> Option<GradMatrix> {
        self.grad.as_ref().map(|g| g(x))
    }
    fn hess(&self, x: &[f64]) -> Option<HessTensor> {
        self.hess.as_ref().map(|h| h(x))
    }
    fn domain(&self) -> Domain {
        self.domain.clone()
    }
}

/// Evaluates `u` with domain and finiteness checks.
pub fn eval_checked(u: &dyn VectorMap, x: &[f64]) -> Result<Vec<f64>> {
    if !u.domain().contains(x) {
        return Err(Error::OutOfDomain(x.to_vec()));
    }
    let v = u.eval(x);
    if v.len() != u.output_dim() {
        return Err(Error::Dimension(format!("map returned {} values, expected {}", v.len(), u.output_dim())));
    }
    if !vecops::all_finite(&v) {
        return Err(Error::NonFinite(format!("map value at {x:?}")));
    }
    Ok(v)
}

/// Composition v ↦ Mu with a fixed linear map given by its rows.
pub struct LinearImage {
    pub inner: MapHandle,
    pub rows: Vec<Vec<f64>>,
}

impl VectorMap for LinearImage {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.rows.len()
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let v = self.inner.eval(x);
        self.rows.iter().map(|r| vecops::dot(r, &v)).collect()
    }
    fn grad(&self, x: &[f64]) -> Option<GradMatrix> {
        let g = self.inner.grad(x)?;
        let n = self.input_dim();
        let rows: Vec<Vec<f64>> = self.rows.iter().map(|r| g.left(r)).collect();
        GradMatrix::from_rows(&rows).ok().or_else(|| Some(GradMatrix::zeros(self.rows.len(), n)))
    }
    fn hess(&self, x: &[f64]) -> Option<HessTensor> {
        let h = self.inner.hess(x)?;
        let comps: Vec<SymMatrix> = self.rows.iter().map(|r| h.left(r)).collect();
        HessTensor::from_components(&comps).ok()
    }
    fn domain(&self) -> Domain {
        self.inner.domain()
    }
}

/// ηᵀu as a scalar map.
pub fn project_scalar(u: &MapHandle, eta: &[f64]) -> MapHandle {
    Arc::new(LinearImage { inner: u.clone(), rows: vec![eta.to_vec()] })
}

/// Mu for the matrix with the given rows (e.g. e^⊥u with the rows of I − e⊗e).
pub fn linear_image(u: &MapHandle, rows: Vec<Vec<f64>>) -> MapHandle {
    Arc::new(LinearImage { inner: u.clone(), rows })
}

/// Central difference gradient with step h.
pub fn fd_grad(u: &dyn VectorMap, x: &[f64], h: f64) -> GradMatrix {
    let (n, nb) = (u.input_dim(), u.output_dim());
    let mut e = vec![0.0; nb * n];
    for i in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        let (fp, fm) = (u.eval(&xp), u.eval(&xm));
        for a in 0..nb {
            e[a * n + i] = (fp[a] - fm[a]) / (2.0 * h);
        }
    }
    GradMatrix::new(nb, n, e).unwrap_or_else(|_| GradMatrix::zeros(nb, n))
}

/// Central difference Hessian with step h.
pub fn fd_hess(u: &dyn VectorMap, x: &[f64], h: f64) -> HessTensor {
    let (n, nb) = (u.input_dim(), u.output_dim());
    let f0 = u.eval(x);
    let mut e = vec![0.0; nb * n * n];
    let shift = |di: usize, si: f64, dj: usize, sj: f64| {
        let mut y = x.to_vec();
        y[di] += si * h;
        y[dj] += sj * h;
        u.eval(&y)
    };
    for i in 0..n {
        for j in 0..=i {
            let vals: Vec<f64> = if i == j {
                let (fp, fm) = (shift(i, 1.0, i, 0.0), shift(i, -1.0, i, 0.0));
                (0..nb).map(|a| (fp[a] - 2.0 * f0[a] + fm[a]) / (h * h)).collect()
            } else {
                let pp = shift(i, 1.0, j, 1.0);
                let pm = shift(i, 1.0, j, -1.0);
                let mp = shift(i, -1.0, j, 1.0);
                let mm = shift(i, -1.0, j, -1.0);
                (0..nb).map(|a| (pp[a] - pm[a] - mp[a] + mm[a]) / (4.0 * h * h)).collect()
            };
            for a in 0..nb {
                e[(a * n + i) * n + j] = vals[a];
                e[(a * n + j) * n + i] = vals[a];
            }
        }
    }
    HessTensor::new(nb, n, e).unwrap_or_else(|_| HessTensor::zeros(nb, n))
}

/// Sanity gate: supplied derivatives must match central differences within
/// 1e−5 (relative to the derivative size) at `points`.
pub fn check_derivatives(u: &dyn VectorMap, points: &[Vec<f64>]) -> Result<()> {
    for x in points {
        if let Some(g) = u.grad(x) {
            let fd = fd_grad(u, x, 1e-6);
            let err = g.sub(&fd).norm();
            if err > 1e-5 * g.norm().max(1.0) {
                return Err(Error::InvalidInput(format!("gradient disagrees with finite differences at {x:?} ({err:e})")));
            }
        }
        if let Some(hs) = u.hess(x) {
            let fd = fd_hess(u, x, 1e-4);
            let err = hs.sub(&fd).norm();
            if err > 1e-5 * hs.norm().max(1.0) {
                return Err(Error::InvalidInput(format!("hessian disagrees with finite differences at {x:?} ({err:e})")));
            }
        }
    }
    Ok(())
}

/// The sanity gate at 10 seeded random points of the box `center ± radius`
/// intersected with the domain.
pub fn sanity_gate(u: &dyn VectorMap, center: &[f64], radius: f64, seed: u64) -> Result<()> {
    use rand::Rng;
    let mut rng = sampling::stream_rng(seed, sampling::stream_id("sanity_gate"));
    let mut pts = Vec::new();
    let mut tries = 0;
    while pts.len() < 10 && tries < 1000 {
        tries += 1;
        let x: Vec<f64> = center.iter().map(|c| c + radius * (2.0 * rng.random::<f64>() - 1.0)).collect();
        if u.domain().depth(&x) > 1e-3 {
            pts.push(x);
        }
    }
    check_derivatives(u, &pts)
}
