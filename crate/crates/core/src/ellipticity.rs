//! Degenerate ellipticity of nonlinearities F(x, η, P, 𝐗), the built-in
//! eigenvalue systems, ξ-envelopes and the contact-solution verifier.
//!
//! Convention: F is nondecreasing in 𝐗 and contact solutions satisfy
//! ξ*F ≥ 0 on every contact jet. [`SignConvention::Reversed`] handles
//! nonlinearities written in the opposite (nonincreasing) convention.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jets::{self, JetCandidate, RadiiSchedule};
use crate::maps::{self, VectorMap};
use crate::orderings::{min_rank_one_value, CertifierOptions, RankOneVerdict};
use crate::sampling::{self, stream_rng, stream_id};
use crate::tensor::{BiForm, Direction, GradMatrix, HessTensor, SymMatrix};
use crate::vecops::{self, norm};

/// Where the Hessian argument of a nonlinearity may range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessDomain {
    All,
    /// Every component X_α positive semidefinite (min eigenvalue ≥ −1e−10).
    ComponentwisePsd,
}

impl HessDomain {
    pub fn contains(&self, x: &HessTensor) -> bool {
        match self {
            HessDomain::All => true,
            HessDomain::ComponentwisePsd => (0..x.big()).all(|a| x.component(a).min_eig() >= -1e-10),
        }
    }
}

pub trait Nonlinearity: Send + Sync {
    /// N
    fn big(&self) -> usize;
    /// n
    fn small(&self) -> usize;
    fn eval(&self, x: &[f64], eta: &[f64], p: &GradMatrix, hx: &HessTensor) -> Vec<f64>;
    fn continuity_declared(&self) -> bool {
        true
    }
    fn first_order_only(&self) -> bool {
        false
    }
    fn hess_domain(&self) -> HessDomain {
        HessDomain::All
    }
}

pub type NonlinearityHandle = Arc<dyn Nonlinearity>;

type EvalF = Arc<dyn Fn(&[f64], &[f64], &GradMatrix, &HessTensor) -> Vec<f64> + Send + Sync>;

/// Nonlinearity assembled from a closure.
#[derive(Clone)]
pub struct FnNonlinearity {
    pub big: usize,
    pub small: usize,
    pub f: EvalF,
    pub continuous: bool,
    pub first_order: bool,
    pub domain: HessDomain,
}

impl FnNonlinearity {
    pub fn new(
        big: usize,
        small: usize,
        f: impl Fn(&[f64], &[f64], &GradMatrix, &HessTensor) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self { big, small, f: Arc::new(f), continuous: true, first_order: false, domain: HessDomain::All }
    }
    pub fn discontinuous(mut self) -> Self {
        self.continuous = false;
        self
    }
    pub fn first_order(mut self) -> Self {
        self.first_order = true;
        self
    }
    pub fn handle(self) -> NonlinearityHandle {
        Arc::new(self)
    }
}

impl Nonlinearity for FnNonlinearity {
    fn big(&self) -> usize {
        self.big
    }
    fn small(&self) -> usize {
        self.small
    }
    fn eval(&self, x: &[f64], eta: &[f64], p: &GradMatrix, hx: &HessTensor) -> Vec<f64> {
        (self.f)(x, eta, p, hx)
    }
    fn continuity_declared(&self) -> bool {
        self.continuous
    }
    fn first_order_only(&self) -> bool {
        self.first_order
    }
    fn hess_domain(&self) -> HessDomain {
        self.domain
    }
}

/// F(𝐗) = A:𝐗 + B for constant coefficients.
pub fn quasilinear(a: BiForm, b: Vec<f64>) -> NonlinearityHandle {
    let (big, small) = (a.big(), a.small());
    FnNonlinearity::new(big, small, move |_, _, _, hx| vecops::add(&a.apply_hess(hx), &b)).handle()
}

/// Quasilinear coefficients depending on (x, η, P).
pub struct QuasilinearCoefficients {
    pub a: Arc<dyn Fn(&[f64], &[f64], &GradMatrix) -> BiForm + Send + Sync>,
    pub b: Arc<dyn Fn(&[f64], &[f64], &GradMatrix) -> Vec<f64> + Send + Sync>,
}

impl QuasilinearCoefficients {
    pub fn nonlinearity(self, big: usize, small: usize) -> NonlinearityHandle {
        FnNonlinearity::new(big, small, move |x, eta, p, hx| {
            vecops::add(&(self.a)(x, eta, p).apply_hess(hx), &(self.b)(x, eta, p))
        })
        .handle()
    }
}

// ---------------------------------------------------------------------------
// Functions of the eigenvalues

type EigFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type LowerOrder = Arc<dyn Fn(&[f64], &[f64], &GradMatrix) -> Vec<f64> + Send + Sync>;

/// g_α applied to the ascending eigenvalues of X_α, of homogeneity `degree`.
#[derive(Clone)]
pub struct EigenFunction {
    pub name: String,
    pub g: EigFn,
    pub degree: f64,
    pub domain: HessDomain,
}

impl EigenFunction {
    /// l ↦ l_n
    pub fn max_eig() -> Self {
        Self { name: "max_eig".into(), g: Arc::new(|l| l[l.len() - 1]), degree: 1.0, domain: HessDomain::All }
    }
    /// l ↦ l_1^{2p+1}
    pub fn min_eig_power(p: u32) -> Self {
        let k = 2 * p as i32 + 1;
        Self { name: format!("min_eig_pow{k}"), g: Arc::new(move |l| l[0].powi(k)), degree: k as f64, domain: HessDomain::All }
    }
    /// l ↦ l_1 ⋯ l_n on convex components
    pub fn determinant(n: usize) -> Self {
        Self {
            name: "det".into(),
            g: Arc::new(|l| l.iter().product()),
            degree: n as f64,
            domain: HessDomain::ComponentwisePsd,
        }
    }
    /// l ↦ (l_1 + ⋯ + l_n)^{2p+1}
    pub fn laplacian_power(p: u32) -> Self {
        let k = 2 * p as i32 + 1;
        Self {
            name: format!("laplacian_pow{k}"),
            g: Arc::new(move |l| l.iter().sum::<f64>().powi(k)),
            degree: k as f64,
            domain: HessDomain::All,
        }
    }
}

/// Outcome of the self-tests run before an eigenvalue nonlinearity is built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EigenFlags {
    /// `None` when the domain is not symmetric under l ↦ −l.
    pub odd_verified: Option<bool>,
    pub homogeneous_verified: bool,
    pub monotone_verified: bool,
}

/// Sampled checks of oddness, homogeneity (sgn(g)|g|^{1/d} positively
/// 1-homogeneous) and monotonicity in each argument.
pub fn eigen_self_tests(g: &EigenFunction, n: usize, seed: u64) -> EigenFlags {
    let mut rng = stream_rng(seed, stream_id(&format!("eigen_self_test/{}", g.name)));
    let mut odd = true;
    let mut homog = true;
    let mut mono = true;
    for _ in 0..200 {
        let mut l = sampling::normal_vec(&mut rng, n);
        if g.domain == HessDomain::ComponentwisePsd {
            l.iter_mut().for_each(|v| *v = v.abs());
        }
        l.sort_by(f64::total_cmp);
        let gl = (g.g)(&l);
        let scale = gl.abs().max(1.0);
        if g.domain == HessDomain::All {
            // oddness of g as a function of its positional arguments
            let neg: Vec<f64> = l.iter().map(|v| -v).collect();
            if ((g.g)(&neg) + gl).abs() > 1e-10 * scale {
                odd = false;
            }
        }
        let t: f64 = 0.1 + 3.0 * rng.random::<f64>();
        let tl: Vec<f64> = l.iter().map(|v| t * v).collect();
        let root = |v: f64| v.signum() * v.abs().powf(1.0 / g.degree);
        if (root((g.g)(&tl)) - t * root(gl)).abs() > 1e-9 * (t * root(gl).abs()).max(1.0) {
            homog = false;
        }
        for j in 0..n {
            let h = 1e-6 * l[j].abs().max(1.0);
            let mut up = l.clone();
            up[j] += h;
            // keep the arguments ordered
            if j + 1 < n && up[j] > up[j + 1] {
                continue;
            }
            if (g.g)(&up) < gl - 1e-10 * scale {
                mono = false;
            }
        }
    }
    EigenFlags {
        odd_verified: (g.domain == HessDomain::All).then_some(odd),
        homogeneous_verified: homog,
        monotone_verified: mono,
    }
}

/// F_α = g_α(λ(X_α)) − h_α(x, η, P).
pub struct EigenNonlinearity {
    pub small: usize,
    pub components: Vec<EigenFunction>,
    pub lower: LowerOrder,
    pub flags: Vec<EigenFlags>,
}

impl Nonlinearity for EigenNonlinearity {
    fn big(&self) -> usize {
        self.components.len()
    }
    fn small(&self) -> usize {
        self.small
    }
    fn eval(&self, x: &[f64], eta: &[f64], p: &GradMatrix, hx: &HessTensor) -> Vec<f64> {
        let h = (self.lower)(x, eta, p);
        self.components
            .iter()
            .enumerate()
            .map(|(a, g)| (g.g)(&hx.component(a).eigen().eigenvalues) - h[a])
            .collect()
    }
    fn hess_domain(&self) -> HessDomain {
        if self.components.iter().any(|g| g.domain == HessDomain::ComponentwisePsd) {
            HessDomain::ComponentwisePsd
        } else {
            HessDomain::All
        }
    }
}

/// Builds F_α = g_α(λ(X_α)) − h_α after the self-tests; refuses functions
/// that fail any applicable test.
pub fn eigen_nonlinearity(
    small: usize,
    components: Vec<EigenFunction>,
    lower: impl Fn(&[f64], &[f64], &GradMatrix) -> Vec<f64> + Send + Sync + 'static,
) -> Result<EigenNonlinearity> {
    if components.is_empty() {
        return Err(Error::InvalidInput("no components".into()));
    }
    let mut flags = Vec::new();
    for g in &components {
        let f = eigen_self_tests(g, small, 0);
        if f.odd_verified == Some(false) || !f.homogeneous_verified || !f.monotone_verified {
            return Err(Error::InvalidInput(format!("eigenvalue function {} failed its self-tests: {f:?}", g.name)));
        }
        flags.push(f);
    }
    Ok(EigenNonlinearity { small, components, lower: Arc::new(lower), flags })
}

/// Constant lower-order term h.
pub fn constant_h(h: Vec<f64>) -> impl Fn(&[f64], &[f64], &GradMatrix) -> Vec<f64> + Send + Sync + 'static {
    move |_, _, _| h.clone()
}

// ---------------------------------------------------------------------------
// Sampled ellipticity

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EllipticityVerdict {
    /// No violation over the sampling budget; not a proof.
    CertifiedSampled,
    Violated,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// (F(𝐗) − F(𝐘))ᵀ(𝐗 − 𝐘) ⪰ 0 on differences η⊗M, M = ±PSD.
    Direct,
    /// ξᵀ(F(𝐗) − F(𝐘)) ≤ 0 whenever 𝐗 − 𝐘 = ξ⊗K with K ⪯ 0.
    Directional,
}

/// Replayable witness. 𝐗 − 𝐘 = `diff_dir` ⊗ `diff_mat`; `value` is the
/// amount of violation (positive).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub route: Route,
    pub x: Vec<f64>,
    pub eta: Vec<f64>,
    pub p: GradMatrix,
    pub hx: HessTensor,
    pub hy: HessTensor,
    pub diff_dir: Vec<f64>,
    pub diff_mat: SymMatrix,
    /// Test vector (direct route).
    pub w: Option<Vec<f64>>,
    /// Direction (directional route).
    pub xi: Option<Vec<f64>>,
    pub value: f64,
}

/// Re-evaluates the violation amount of a witness.
pub fn replay(f: &dyn Nonlinearity, ce: &Counterexample) -> f64 {
    let df = vecops::sub(&f.eval(&ce.x, &ce.eta, &ce.p, &ce.hx), &f.eval(&ce.x, &ce.eta, &ce.p, &ce.hy));
    match ce.route {
        Route::Direct => {
            let w = ce.w.as_ref().expect("direct witness has w");
            let d = ce.hx.sub(&ce.hy).left(&df);
            -d.bilinear(w, w)
        }
        Route::Directional => vecops::dot(ce.xi.as_ref().expect("directional witness has ξ"), &df),
    }
}

/// Rewrites a witness of one route as a witness of the other.
pub fn convert(f: &dyn Nonlinearity, ce: &Counterexample) -> Option<Counterexample> {
    let mut out = ce.clone();
    match ce.route {
        Route::Direct => {
            let w = ce.w.as_ref()?;
            let q = ce.diff_mat.bilinear(w, w);
            let s = if q >= 0.0 { -1.0 } else { 1.0 };
            let en = norm(&ce.diff_dir);
            if en == 0.0 {
                return None;
            }
            let xi = vecops::scale(&ce.diff_dir, s / en);
            out.route = Route::Directional;
            out.diff_mat = ce.diff_mat.scale(s * en);
            out.diff_dir = xi.clone();
            out.xi = Some(xi);
            out.w = None;
        }
        Route::Directional => {
            let spec = ce.diff_mat.eigen();
            out.route = Route::Direct;
            out.w = Some(spec.eigenvectors[0].clone());
            out.xi = None;
        }
    }
    out.value = replay(f, &out);
    Some(out)
}

/// Ranges for the sampled arguments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArgumentSampler {
    pub x_center: Vec<f64>,
    pub x_radius: f64,
    pub eta_scale: f64,
    pub p_scale: f64,
    pub hess_scale: f64,
}

impl ArgumentSampler {
    pub fn standard(n: usize) -> Self {
        Self { x_center: vec![0.0; n], x_radius: 1.0, eta_scale: 1.0, p_scale: 1.0, hess_scale: 1.0 }
    }

    fn draw(&self, rng: &mut ChaCha8Rng, big: usize, small: usize, domain: HessDomain) -> (Vec<f64>, Vec<f64>, GradMatrix, HessTensor) {
        let x: Vec<f64> = self.x_center.iter().map(|c| c + self.x_radius * (2.0 * rng.random::<f64>() - 1.0)).collect();
        let eta = vecops::scale(&sampling::normal_vec(rng, big), self.eta_scale);
        let p = sampling::gaussian_matrix(rng, big, small).scale(self.p_scale);
        let hx = match domain {
            HessDomain::All => sampling::gaussian_hess(rng, big, small).scale(self.hess_scale),
            HessDomain::ComponentwisePsd => {
                let comps: Vec<SymMatrix> = (0..big)
                    .map(|_| {
                        let size = self.hess_scale * 3.0 * rng.random::<f64>();
                        sampling::psd_matrix(rng, small, size)
                    })
                    .collect();
                HessTensor::from_components(&comps).expect("consistent")
            }
        };
        (x, eta, p, hx)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticityOptions {
    pub budget: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for EllipticityOptions {
    fn default() -> Self {
        Self { budget: 10_000, seed: 0, tol: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouteSummary {
    pub route: Route,
    pub samples: usize,
    pub skipped: usize,
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticityReport {
    pub verdict: EllipticityVerdict,
    pub counterexample: Option<Counterexample>,
    pub samples_used: usize,
    pub routes: Vec<RouteSummary>,
    /// The worst witness, converted to the other route, still violates.
    pub conversion_confirmed: Option<bool>,
}

const DIFF_SIZES: [f64; 3] = [0.1, 1.0, 10.0];

fn run_route(f: &dyn Nonlinearity, route: Route, sampler: &ArgumentSampler, opts: &EllipticityOptions) -> (RouteSummary, Option<Counterexample>) {
    let (big, small) = (f.big(), f.small());
    let domain = f.hess_domain();
    let label = match route {
        Route::Direct => "ellipticity/direct",
        Route::Directional => "ellipticity/directional",
    };
    // fixed-size chunks keep the result independent of the thread count
    let chunk = 256;
    let chunks = opts.budget.div_ceil(chunk);
    let results: Vec<(usize, usize, usize, Option<Counterexample>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(opts.seed, stream_id(label).wrapping_add(c as u64));
            let (mut used, mut skipped, mut bad) = (0, 0, 0);
            let mut worst: Option<Counterexample> = None;
            for _ in 0..chunk.min(opts.budget - c * chunk) {
                let (x, eta, p, hx) = sampler.draw(&mut rng, big, small, domain);
                let size = DIFF_SIZES[rng.random_range(0..DIFF_SIZES.len())];
                let (dir, mat) = match route {
                    Route::Direct => {
                        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        (sampling::normal_vec(&mut rng, big), sampling::psd_matrix(&mut rng, small, size).scale(sign))
                    }
                    Route::Directional => {
                        (sampling::unit_vec(&mut rng, big), sampling::psd_matrix(&mut rng, small, size).scale(-1.0))
                    }
                };
                let hy = hx.sub(&HessTensor::outer(&dir, &mat));
                if !domain.contains(&hx) || !domain.contains(&hy) {
                    skipped += 1;
                    continue;
                }
                used += 1;
                let fx = f.eval(&x, &eta, &p, &hx);
                let fy = f.eval(&x, &eta, &p, &hy);
                let df = vecops::sub(&fx, &fy);
                let scale = (norm(&fx) + norm(&fy)).max(1.0) * mat.frob_norm().max(1.0) * norm(&dir).max(1.0);
                let tol = opts.tol * scale;
                let (value, w, xi) = match route {
                    Route::Direct => {
                        let d = mat.scale(vecops::dot(&dir, &df));
                        let spec = d.eigen();
                        (-spec.eigenvalues[0], Some(spec.eigenvectors[0].clone()), None)
                    }
                    Route::Directional => (vecops::dot(&dir, &df), None, Some(dir.clone())),
                };
                if value > tol {
                    bad += 1;
                    if worst.as_ref().is_none_or(|wc| value > wc.value) {
                        worst = Some(Counterexample {
                            route,
                            x,
                            eta,
                            p,
                            hx,
                            hy,
                            diff_dir: dir,
                            diff_mat: mat,
                            w,
                            xi,
                            value,
                        });
                    }
                }
            }
            (used, skipped, bad, worst)
        })
        .collect();
    let mut summary = RouteSummary { route, samples: 0, skipped: 0, violations: 0 };
    let mut worst: Option<Counterexample> = None;
    for (u, s, b, w) in results {
        summary.samples += u;
        summary.skipped += s;
        summary.violations += b;
        if let Some(w) = w {
            if worst.as_ref().is_none_or(|c| w.value > c.value) {
                worst = Some(w);
            }
        }
    }
    (summary, worst)
}

/// Samples both ellipticity routes over the budget.
pub fn check_ellipticity_sampled(
    f: &dyn Nonlinearity,
    sampler: &ArgumentSampler,
    opts: &EllipticityOptions,
) -> Result<EllipticityReport> {
    if sampler.x_center.len() != f.small() {
        return Err(Error::Dimension("sampler centre has the wrong dimension".into()));
    }
    let (sa, ca) = run_route(f, Route::Direct, sampler, opts);
    let (sb, cb) = run_route(f, Route::Directional, sampler, opts);
    let samples_used = sa.samples + sb.samples;
    let worst = match (ca, cb) {
        (Some(a), Some(b)) => Some(if a.value >= b.value { a } else { b }),
        (a, b) => a.or(b),
    };
    let conversion_confirmed = worst.as_ref().map(|w| convert(f, w).is_some_and(|c| c.value > 0.0));
    let verdict = if worst.is_some() {
        EllipticityVerdict::Violated
    } else if samples_used == 0 {
        EllipticityVerdict::Inconclusive
    } else {
        EllipticityVerdict::CertifiedSampled
    };
    Ok(EllipticityReport { verdict, counterexample: worst, samples_used, routes: vec![sa, sb], conversion_confirmed })
}

/// Both routes for the constant-coefficient quasilinear map 𝐗 ↦ A:𝐗.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasilinearReport {
    pub verdict: EllipticityVerdict,
    /// Rank-one minimum from the alternating certifier.
    pub certifier_min: f64,
    /// Rank-one minimum from sampling with gradient polish.
    pub sampled_min: f64,
    /// ξ and w realising the sampled minimum.
    pub witness: (Vec<f64>, Vec<f64>),
    pub is_positive: bool,
}

fn polish(a: &BiForm, mut eta: Vec<f64>, mut w: Vec<f64>, step: f64) -> (f64, Vec<f64>, Vec<f64>) {
    let proj = |g: Vec<f64>, v: &[f64]| vecops::axpy(&g, -vecops::dot(&g, v), v);
    let mut val = a.rank_one_value(&eta, &w);
    for _ in 0..300 {
        let ge = proj(vecops::scale(&a.m_of_w(&w).mul_vec(&eta), 2.0), &eta);
        let gw = proj(vecops::scale(&a.k_of_eta(&eta).mul_vec(&w), 2.0), &w);
        let ne = vecops::sgn_vec(&vecops::axpy(&eta, -step, &ge));
        let nw = vecops::sgn_vec(&vecops::axpy(&w, -step, &gw));
        let nv = a.rank_one_value(&ne, &nw);
        if nv > val - 1e-15 * a.norm().max(1.0) {
            break;
        }
        (eta, w, val) = (ne, nw, nv);
    }
    (val, eta, w)
}

pub fn check_quasilinear(a: &BiForm, seed: u64) -> Result<QuasilinearReport> {
    let opts = CertifierOptions::default();
    let cert = min_rank_one_value(a, &opts)?;
    let (big, small) = (a.big(), a.small());
    let mut rng = stream_rng(seed, stream_id("quasilinear/sampled"));
    let mut pool: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..2000)
        .map(|_| {
            let e = sampling::unit_vec(&mut rng, big);
            let w = sampling::unit_vec(&mut rng, small);
            (a.rank_one_value(&e, &w), e, w)
        })
        .collect();
    pool.sort_by(|x, y| x.0.total_cmp(&y.0));
    let step = 0.25 / a.flatten().eigen().eigenvalues.iter().fold(1e-12f64, |m, v| m.max(v.abs()));
    let best = pool
        .into_iter()
        .take(16)
        .map(|(_, e, w)| polish(a, e, w, step))
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .expect("nonempty pool");
    let tol = opts.tol * a.norm().max(1.0);
    let sampled_neg = best.0 < -tol;
    let cert_neg = cert.verdict == RankOneVerdict::Indefinite;
    if sampled_neg != cert_neg {
        return Err(Error::Diagnostic(format!(
            "quasilinear routes disagree: certifier min {} vs sampled min {}",
            cert.min_value, best.0
        )));
    }
    Ok(QuasilinearReport {
        verdict: if cert_neg { EllipticityVerdict::Violated } else { EllipticityVerdict::CertifiedSampled },
        certifier_min: cert.min_value,
        sampled_min: best.0,
        witness: (best.1, best.2),
        is_positive: crate::orderings::is_positive(a),
    })
}

// ---------------------------------------------------------------------------
// ξ-envelope

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeEstimate {
    pub value: f64,
    /// max of ξᵀF over the two finest ε-balls
    pub sampled: f64,
    pub levels: Vec<(f64, f64)>,
    /// For declared-continuous F: |sampled − ξᵀF(point)| within tolerance.
    pub cross_check: Option<bool>,
}

pub const ENVELOPE_EPS: [f64; 5] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];
pub const ENVELOPE_SAMPLES: usize = 64;

/// Upper envelope of ξᵀF at a point, estimated on shrinking balls in the
/// sum of the four argument norms.
pub fn xi_envelope(
    f: &dyn Nonlinearity,
    xi: &Direction,
    x: &[f64],
    eta: &[f64],
    p: &GradMatrix,
    hx: &HessTensor,
    eps: &[f64],
    seed: u64,
) -> EnvelopeEstimate {
    let center = xi.along(&f.eval(x, eta, p, hx));
    let domain = f.hess_domain();
    let mut rng = stream_rng(seed, stream_id("xi_envelope"));
    let mut levels = Vec::new();
    for &e in eps {
        let mut best = if domain.contains(hx) { center } else { f64::NEG_INFINITY };
        for _ in 0..ENVELOPE_SAMPLES {
            // split the radius over the four blocks
            let mut parts: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
            let total: f64 = parts.iter().sum::<f64>() + rng.random::<f64>();
            parts.iter_mut().for_each(|v| *v *= e / total);
            let y = vecops::axpy(x, parts[0], &sampling::unit_vec(&mut rng, x.len()));
            let th = vecops::axpy(eta, parts[1], &sampling::unit_vec(&mut rng, eta.len()));
            let dq = sampling::gaussian_matrix(&mut rng, p.big(), p.small());
            let q = p.add(&dq.scale(parts[2] / dq.norm().max(1e-300)));
            let dy = sampling::gaussian_hess(&mut rng, hx.big(), hx.small());
            let hy = hx.add(&dy.scale(parts[3] / dy.norm().max(1e-300)));
            if !domain.contains(&hy) {
                continue;
            }
            best = best.max(xi.along(&f.eval(&y, &th, &q, &hy)));
        }
        levels.push((e, best));
    }
    let sampled = levels.iter().rev().take(2).map(|l| l.1).fold(f64::NEG_INFINITY, f64::max);
    if f.continuity_declared() {
        let ok = (sampled - center).abs() <= 1e-3 * center.abs().max(1.0);
        EnvelopeEstimate { value: center, sampled, levels, cross_check: Some(ok) }
    } else {
        EnvelopeEstimate { value: sampled, sampled, levels, cross_check: None }
    }
}

// ---------------------------------------------------------------------------
// Contact-solution verifier

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConvention {
    /// ξ*F ≥ 0 with F nondecreasing in 𝐗.
    Contact,
    /// F is given nonincreasing in 𝐗; −F is tested.
    Reversed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionOptions {
    /// Random directions added to the ± coordinate vectors.
    pub random_directions: usize,
    /// Random PSD matrices per nonzero size.
    pub psd_per_size: usize,
    pub seed: u64,
    pub tol: f64,
    pub convention: SignConvention,
}

impl Default for SolutionOptions {
    fn default() -> Self {
        Self { random_directions: 4, psd_per_size: 2, seed: 0, tol: 1e-8, convention: SignConvention::Contact }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionViolation {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
    pub p: GradMatrix,
    pub hx: Option<HessTensor>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub consistent: bool,
    pub min_margin: f64,
    pub evaluated: usize,
    pub skipped: usize,
    pub violations: Vec<SolutionViolation>,
}

/// Directions used by the verifier: ± coordinate vectors plus random ones.
pub fn verifier_directions(big: usize, extra: usize, rng: &mut ChaCha8Rng) -> Vec<Direction> {
    let mut out: Vec<Direction> = (0..big).flat_map(|k| [Direction::basis(big, k), Direction::basis(big, k).neg()]).collect();
    out.extend((0..extra).map(|_| sampling::direction(rng, big)));
    out
}

/// Jet candidates at a point for a given direction.
pub type CandidateSource<'a> = &'a (dyn Fn(&[f64], &Direction) -> Vec<JetCandidate> + Sync);

/// Evaluates the envelope margin on every jet candidate at every point and
/// direction. Smooth maps use the ray (Du, D²u + ξ⊗A); otherwise `source`
/// supplies candidates which must pass the membership test.
pub fn verify_contact_solution(
    u: &dyn VectorMap,
    f: &dyn Nonlinearity,
    points: &[Vec<f64>],
    source: Option<CandidateSource<'_>>,
    s: &RadiiSchedule,
    opts: &SolutionOptions,
) -> Result<SolutionReport> {
    if u.input_dim() != f.small() || u.output_dim() != f.big() {
        return Err(Error::Dimension("map and nonlinearity disagree".into()));
    }
    let (big, small) = (f.big(), f.small());
    let mut rng = stream_rng(opts.seed, stream_id("verify_contact_solution"));
    let dirs = verifier_directions(big, opts.random_directions, &mut rng);
    let mut psd: Vec<SymMatrix> = vec![SymMatrix::zeros(small)];
    for &size in &sampling::PSD_SIZES[1..] {
        for _ in 0..opts.psd_per_size {
            psd.push(sampling::psd_matrix(&mut rng, small, size));
        }
    }
    let sign = match opts.convention {
        SignConvention::Contact => 1.0,
        SignConvention::Reversed => -1.0,
    };
    let domain = f.hess_domain();
    let mut report = SolutionReport { consistent: true, min_margin: f64::INFINITY, evaluated: 0, skipped: 0, violations: vec![] };
    for x in points {
        let ux = maps::eval_checked(u, x)?;
        for xi in &dirs {
            let cands: Vec<JetCandidate> = match source {
                Some(src) => {
                    let cs = src(x, xi);
                    for c in &cs {
                        if !jets::test_membership(u, c, s)?.member {
                            return Err(Error::Unverified(format!("candidate at {x:?} failed the membership test")));
                        }
                    }
                    cs
                }
                None => {
                    let fam = jets::jet_enumerate_smooth(u, x, xi)?;
                    if f.first_order_only() {
                        vec![JetCandidate::first(x.clone(), xi.clone(), fam.gradient.clone())?]
                    } else {
                        psd.iter().map(|a| fam.candidate(a)).collect::<Result<_>>()?
                    }
                }
            };
            for c in cands {
                let hx = c.x.clone().unwrap_or_else(|| HessTensor::zeros(big, small));
                if !domain.contains(&hx) {
                    report.skipped += 1;
                    continue;
                }
                // ξᵀ(−F) = (−ξ)ᵀF, so the reversed convention mirrors the direction
                let dir = if sign > 0.0 { xi.clone() } else { xi.neg() };
                let value = if f.continuity_declared() {
                    dir.along(&f.eval(x, &ux, &c.p, &hx))
                } else {
                    xi_envelope(f, &dir, x, &ux, &c.p, &hx, &ENVELOPE_EPS, opts.seed).value
                };
                report.evaluated += 1;
                report.min_margin = report.min_margin.min(value);
                if value < -opts.tol {
                    report.consistent = false;
                    report.violations.push(SolutionViolation { x: x.clone(), xi: xi.to_vec(), p: c.p.clone(), hx: c.x.clone(), value });
                }
            }
        }
    }
    Ok(report)
}

/// Both directions of the classical/contact consistency on a smooth map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// max |F(x, u, Du, D²u)| over the points
    pub classical_residual: f64,
    pub classical: bool,
    /// The verifier run on F itself.
    pub solution: SolutionReport,
    /// The verifier reports a violation once a unit residual is injected.
    pub contrapositive_fired: bool,
}

impl ConsistencyReport {
    /// Classical solutions pass the verifier and the injected residual is caught.
    pub fn passes(&self) -> bool {
        (!self.classical || self.solution.consistent) && self.contrapositive_fired
    }
}

pub fn consistency_suite(
    u: &dyn VectorMap,
    f: &NonlinearityHandle,
    points: &[Vec<f64>],
    s: &RadiiSchedule,
    opts: &SolutionOptions,
) -> Result<ConsistencyReport> {
    let mut residual = 0.0f64;
    for x in points {
        let ux = maps::eval_checked(u, x)?;
        let p = u.grad(x).ok_or_else(|| Error::MissingDerivatives("gradient".into()))?;
        let h = u.hess(x).ok_or_else(|| Error::MissingDerivatives("hessian".into()))?;
        residual = residual.max(norm(&f.eval(x, &ux, &p, &h)));
    }
    let classical = residual <= opts.tol.max(1e-8);
    let solution = verify_contact_solution(u, f.as_ref(), points, None, s, opts)?;
    let inner = f.clone();
    let injected = FnNonlinearity {
        big: f.big(),
        small: f.small(),
        f: Arc::new(move |x, eta, p, hx| {
            let mut v = inner.eval(x, eta, p, hx);
            v[0] -= 1.0;
            v
        }),
        continuous: f.continuity_declared(),
        first_order: f.first_order_only(),
        domain: f.hess_domain(),
    };
    let fired = !verify_contact_solution(u, &injected, points, None, s, opts)?.consistent;
    Ok(ConsistencyReport { classical_residual: residual, classical, solution, contrapositive_fired: fired })
}
