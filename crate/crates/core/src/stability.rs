//! Approximate derivatives, projections onto hyperplanes and the behaviour of
//! contact jets under mollification.

use std::num::NonZeroUsize;
use std::sync::Arc;

use gauss_quad::legendre::GaussLegendre;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::fit::loglog_slope;
use crate::jets::{test_membership, DecayRow, JetCandidate, JetStatus, RadiiSchedule};
use crate::maps::{eval_checked, linear_image, Domain, MapHandle, VectorMap};
use crate::orderings::{vee_nonpos_hess, CertifierOptions, InducedVerdict};
use crate::tensor::{project_perp, Direction, GradMatrix, HessTensor, SymMatrix};
use crate::vecops::{self, norm};

// ---------------------------------------------------------------------------
// Approximate jets

/// Candidate approximate derivative (P) or pair (P, 𝐗) at a point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxJetCandidate {
    pub base_point: Vec<f64>,
    pub p: GradMatrix,
    pub x: Option<HessTensor>,
    pub order: u8,
}

impl ApproxJetCandidate {
    pub fn first(base_point: Vec<f64>, p: GradMatrix) -> Result<Self> {
        let c = Self { base_point, p, x: None, order: 1 };
        c.validate()?;
        Ok(c)
    }

    pub fn second(base_point: Vec<f64>, p: GradMatrix, x: HessTensor) -> Result<Self> {
        let c = Self { base_point, p, x: Some(x), order: 2 };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let (nb, n) = (self.p.big(), self.p.small());
        if self.base_point.len() != n {
            return Err(Error::Dimension(format!("approximate jet: P is {nb}x{n}, x has {}", self.base_point.len())));
        }
        match (self.order, &self.x) {
            (1, _) => Ok(()),
            (2, Some(x)) if x.big() == nb && x.small() == n => Ok(()),
            (2, Some(_)) => Err(Error::Dimension("approximate jet: 𝐗 does not match P".into())),
            (2, None) => Err(Error::InvalidInput("order 2 approximate jet without 𝐗".into())),
            (o, _) => Err(Error::InvalidInput(format!("order must be 1 or 2, got {o}"))),
        }
    }
}

/// Radii r_k = 1/(θ + k·period), k ≥ k₀, chosen so that an oscillation with
/// phase 1/r sits at θ on every radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonantRadii {
    pub theta: f64,
    pub period: f64,
    pub count: usize,
}

impl ResonantRadii {
    /// Radii where cos(1/r) equals `level` (clamped to [−1, 1]).
    pub fn cosine_level(level: f64, count: usize) -> Self {
        Self { theta: level.clamp(-1.0, 1.0).acos(), period: std::f64::consts::TAU, count }
    }

    /// The first `count` radii not exceeding `r_max`.
    pub fn radii(&self, r_max: f64) -> Vec<f64> {
        let k0 = ((1.0 / r_max - self.theta) / self.period).ceil().max(1.0) as usize;
        (k0..k0 + self.count).map(|k| 1.0 / (self.theta + self.period * k as f64)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxVerdict {
    pub member: bool,
    pub status: JetStatus,
    /// Smallest observed max-ratio, net of rounding noise.
    pub min_ratio: f64,
    pub best_radius: Option<f64>,
    /// Rows sorted from coarse to fine.
    pub table: Vec<DecayRow>,
}

/// Tests liminf_{r→0} max_{|z|=r} |u(x+z) − u(x) − Pz (− ½𝐗:z⊗z)| / r^p = 0.
///
/// The liminf is realised as a minimum over the schedule radii together with
/// the optional resonant radii. This differs from [`test_membership`], which
/// needs decay along the whole schedule.
pub fn test_approx_jet(
    u: &dyn VectorMap,
    c: &ApproxJetCandidate,
    s: &RadiiSchedule,
    resonant: Option<&ResonantRadii>,
) -> Result<ApproxVerdict> {
    c.validate()?;
    let n = c.p.small();
    s.validate(n)?;
    if u.input_dim() != n || u.output_dim() != c.p.big() {
        return Err(Error::Dimension(format!(
            "map is ℝ^{} → ℝ^{}, approximate jet expects ℝ^{n} → ℝ^{}",
            u.input_dim(),
            u.output_dim(),
            c.p.big()
        )));
    }
    let u0 = eval_checked(u, &c.base_point)?;
    let mut radii = s.radii();
    if let Some(res) = resonant {
        radii.extend(res.radii(s.r0));
    }
    radii.sort_by(|a, b| b.total_cmp(a));
    let dirs = s.directions(n);
    let domain = u.domain();
    let p = c.order as i32;
    let rows: Result<Vec<Option<(f64, f64, f64)>>> = radii
        .par_iter()
        .map(|&r| {
            let (mut worst, mut noise, mut kept) = (0.0f64, 0.0f64, 0usize);
            for d in &dirs {
                let z = vecops::scale(d, r);
                let y = vecops::add(&c.base_point, &z);
                if !domain.contains(&y) {
                    continue;
                }
                let uy = u.eval(&y);
                if uy.len() != u0.len() || !vecops::all_finite(&uy) {
                    return Err(Error::NonFinite(format!("map value at {y:?}")));
                }
                let pz = c.p.apply(&z);
                let mut q: Vec<f64> = (0..u0.len()).map(|a| uy[a] - u0[a] - pz[a]).collect();
                let mut mag = norm(&uy) + norm(&u0) + norm(&pz);
                if let (2, Some(x)) = (c.order, &c.x) {
                    let xz = x.quadratic(&z);
                    q = vecops::axpy(&q, -0.5, &xz);
                    mag += 0.5 * norm(&xz);
                }
                worst = worst.max(norm(&q));
                noise = noise.max(8.0 * f64::EPSILON * mag);
                kept += 1;
            }
            let scale = r.powi(p);
            Ok((kept > n).then_some((r, worst / scale, noise / scale)))
        })
        .collect();
    let rows = rows?;
    let table: Vec<DecayRow> = rows
        .iter()
        .zip(&radii)
        .map(|(row, &r)| DecayRow { radius: r, max_ratio: row.map_or(f64::NAN, |v| v.1) })
        .collect();
    let best = rows.iter().flatten().map(|&(r, ratio, noise)| (r, (ratio - noise).max(0.0))).min_by(|a, b| a.1.total_cmp(&b.1));
    let Some((best_r, min_ratio)) = best else {
        return Ok(ApproxVerdict { member: false, status: JetStatus::Inconclusive, min_ratio: f64::NAN, best_radius: None, table });
    };
    let member = min_ratio < s.decay_tol;
    Ok(ApproxVerdict {
        member,
        status: if member { JetStatus::Member } else { JetStatus::NonMember },
        min_ratio,
        best_radius: Some(best_r),
        table,
    })
}

// ---------------------------------------------------------------------------
// Relation on hyperplanes

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationStatus {
    Holds,
    Violated,
    /// e = ±ξ without second order data: nothing is claimed.
    NotAsserted,
    /// One of the inputs failed its own membership test.
    Unverified,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperplaneReport {
    pub status: RelationStatus,
    pub jet_verified: bool,
    pub approx_verified: bool,
    /// |e^⊥ξ| below 1e−9.
    pub excluded: bool,
    /// |Q − e^⊥P|
    pub first_order_defect: f64,
    /// Induced ordering of sgn(e^⊥ξ) ∨ (𝐘 − e^⊥𝐗), when both inputs are second order.
    pub second_order: Option<InducedVerdict>,
    /// |η^⊥(𝐘 − e^⊥𝐗)| for η = sgn(e^⊥ξ): the part that must vanish.
    pub hyperplane_defect: Option<f64>,
}

/// Tolerance on Q = e^⊥P.
pub const RELATION_TOL: f64 = 1e-6;

/// Checks that a contact jet (P, 𝐗) in direction ξ and an approximate jet
/// (Q, 𝐘) of e^⊥u are related by Q = e^⊥P and, at second order, by
/// sgn(e^⊥ξ) ∨ (𝐘 − e^⊥𝐗) ≤ 0.
///
/// Both inputs are verified first: the jet by [`test_membership`] on u and
/// the approximate jet by [`test_approx_jet`] on e^⊥u.
pub fn hyperplane_relation(
    u: &MapHandle,
    jet: &JetCandidate,
    e: &Direction,
    approx: &ApproxJetCandidate,
    s: &RadiiSchedule,
    resonant: Option<&ResonantRadii>,
) -> Result<HyperplaneReport> {
    let nb = jet.big();
    if e.dim() != nb || approx.p.big() != nb || approx.p.small() != jet.small() {
        return Err(Error::Dimension("hyperplane relation: e, P and Q must share N and n".into()));
    }
    let eperp = project_perp(e);
    let rows: Vec<Vec<f64>> = (0..nb).map(|a| (0..nb).map(|b| eperp.get(a, b)).collect()).collect();
    let projected = linear_image(u, rows);
    let jet_verified = test_membership(u.as_ref(), jet, s)?.member;
    let approx_verified = test_approx_jet(projected.as_ref(), approx, s, resonant)?.member;

    let e_xi = eperp.mul_vec(jet.direction.as_slice());
    let excluded = norm(&e_xi) < 1e-9;
    let first_order_defect = approx.p.sub(&jet.p.left_mul(&eperp)).norm();

    let (mut second_order, mut hyperplane_defect) = (None, None);
    if !excluded {
        if let (Some(x), Some(y)) = (&jet.x, &approx.x) {
            let eta = Direction::normalized(&e_xi)?;
            let diff = y.sub(&x.left_mul(&eperp));
            hyperplane_defect = Some(diff.perp(&eta).norm());
            second_order = Some(vee_nonpos_hess(&eta, &diff, &CertifierOptions::default())?);
        }
    }

    let second_data = jet.order == 2 && jet.x.is_some();
    let status = if !jet_verified || !approx_verified {
        RelationStatus::Unverified
    } else if excluded && !second_data {
        RelationStatus::NotAsserted
    } else if first_order_defect <= RELATION_TOL && second_order.as_ref().is_none_or(|v| v.holds) {
        RelationStatus::Holds
    } else {
        RelationStatus::Violated
    };
    Ok(HyperplaneReport {
        status,
        jet_verified,
        approx_verified,
        excluded,
        first_order_defect,
        second_order,
        hyperplane_defect,
    })
}

// ---------------------------------------------------------------------------
// Mollification

/// Bump c_n (1 − |t|²)^power on the unit ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpKernel {
    pub power: u32,
}

impl Default for BumpKernel {
    fn default() -> Self {
        Self { power: 4 }
    }
}

/// Gauss–Legendre nodes per axis (radial nodes and angles in the plane).
pub const QUADRATURE_NODES: usize = 32;

/// Tolerance on the quadrature integral of the normalised kernel.
pub const NORMALISATION_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
struct Node {
    t: Vec<f64>,
    k: f64,
    dk: Vec<f64>,
    d2k: Vec<f64>,
}

impl BumpKernel {
    /// 1 / ∫_{B₁} (1 − |t|²)^power dt.
    pub fn normalisation(&self, n: usize) -> f64 {
        let p = self.power as f64;
        let h = n as f64 / 2.0;
        gamma(p + 1.0 + h) / (std::f64::consts::PI.powf(h) * gamma(p + 1.0))
    }

    /// Quadrature nodes on the unit ball of ℝ^n with weights folded into the
    /// kernel values and kernel derivatives.
    fn nodes(&self, n: usize) -> Result<Vec<Node>> {
        if self.power < 3 {
            return Err(Error::InvalidInput("bump power must be at least 3 for a C² mollifier".into()));
        }
        let gl = GaussLegendre::new(NonZeroUsize::new(QUADRATURE_NODES).expect("nonzero"));
        let pairs = gl.as_node_weight_pairs();
        let raw: Vec<(Vec<f64>, f64)> = match n {
            1 => pairs.iter().map(|&(x, w)| (vec![x], w)).collect(),
            2 => {
                let m = QUADRATURE_NODES;
                let dphi = std::f64::consts::TAU / m as f64;
                let mut v = Vec::with_capacity(m * pairs.len());
                for &(x, w) in pairs {
                    let rho = 0.5 * (1.0 + x);
                    for j in 0..m {
                        let phi = (j as f64 + 0.5) * dphi;
                        v.push((vec![rho * phi.cos(), rho * phi.sin()], 0.5 * w * rho * dphi));
                    }
                }
                v
            }
            _ => return Err(Error::InvalidInput(format!("mollification is implemented for n ≤ 2, got n = {n}"))),
        };
        let c = self.normalisation(n);
        let p = self.power as i32;
        let pf = p as f64;
        Ok(raw
            .into_iter()
            .map(|(t, w)| {
                let s = 1.0 - vecops::dot(&t, &t);
                let cw = c * w;
                let k = cw * s.powi(p);
                let dk = t.iter().map(|ti| -2.0 * pf * cw * ti * s.powi(p - 1)).collect();
                let mut d2k = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        d2k[i * n + j] =
                            cw * (-2.0 * pf * delta * s.powi(p - 1) + 4.0 * pf * (pf - 1.0) * t[i] * t[j] * s.powi(p - 2));
                    }
                }
                Node { t, k, dk, d2k }
            })
            .collect())
    }

    /// Quadrature value of the normalised kernel integral minus one.
    pub fn normalisation_error(&self, n: usize) -> Result<f64> {
        Ok(self.nodes(n)?.iter().map(|q| q.k).sum::<f64>() - 1.0)
    }
}

/// Kernel and decreasing list of scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MollifierFamily {
    pub kernel: BumpKernel,
    pub scales: Vec<f64>,
}

impl MollifierFamily {
    pub fn new(kernel: BumpKernel, scales: Vec<f64>) -> Result<Self> {
        let ok = !scales.is_empty()
            && scales.iter().all(|s| s.is_finite() && *s > 0.0)
            && scales.windows(2).all(|w| w[1] < w[0]);
        if !ok {
            return Err(Error::InvalidInput(format!("scales must be positive and strictly decreasing: {scales:?}")));
        }
        Ok(Self { kernel, scales })
    }

    /// Geometric scales ε₀·factorᵏ.
    pub fn geometric(eps0: f64, factor: f64, count: usize) -> Result<Self> {
        Self::new(BumpKernel::default(), (0..count).map(|k| eps0 * factor.powi(k as i32)).collect())
    }

    pub fn apply(&self, u: &MapHandle) -> Result<Vec<MapHandle>> {
        self.scales.iter().map(|&s| mollify_with(u, self.kernel, s)).collect()
    }
}

/// u_ε = η_ε * u evaluated by quadrature, with derivatives obtained by
/// differentiating the kernel.
pub struct Mollified {
    inner: MapHandle,
    scale: f64,
    nodes: Arc<Vec<Node>>,
    domain: Domain,
}

impl Mollified {
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Σ_q weight_q · u(x − ε t_q) for each output component.
    fn accumulate(&self, x: &[f64], weight: impl Fn(&Node) -> f64) -> Vec<f64> {
        let mut acc = vec![0.0; self.inner.output_dim()];
        for q in self.nodes.iter() {
            let y = vecops::axpy(x, -self.scale, &q.t);
            let w = weight(q);
            for (a, v) in self.inner.eval(&y).into_iter().enumerate() {
                acc[a] += w * v;
            }
        }
        acc
    }
}

impl VectorMap for Mollified {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.accumulate(x, |q| q.k)
    }
    fn grad(&self, x: &[f64]) -> Option<GradMatrix> {
        let (n, nb) = (self.input_dim(), self.output_dim());
        let mut e = vec![0.0; nb * n];
        for i in 0..n {
            let col = self.accumulate(x, |q| q.dk[i] / self.scale);
            for a in 0..nb {
                e[a * n + i] = col[a];
            }
        }
        GradMatrix::new(nb, n, e).ok()
    }
    fn hess(&self, x: &[f64]) -> Option<HessTensor> {
        let (n, nb) = (self.input_dim(), self.output_dim());
        let mut e = vec![0.0; nb * n * n];
        let s2 = self.scale * self.scale;
        for i in 0..n {
            for j in 0..=i {
                let col = self.accumulate(x, |q| q.d2k[i * n + j] / s2);
                for a in 0..nb {
                    e[(a * n + i) * n + j] = col[a];
                    e[(a * n + j) * n + i] = col[a];
                }
            }
        }
        HessTensor::new(nb, n, e).ok()
    }
    fn domain(&self) -> Domain {
        self.domain.clone()
    }
}

fn shrink(d: &Domain, eps: f64) -> Result<Domain> {
    let out = match d {
        Domain::Whole => Domain::Whole,
        Domain::Ball { center, radius } => Domain::Ball { center: center.clone(), radius: radius - eps },
        Domain::Box { lo, hi } => Domain::Box {
            lo: lo.iter().map(|v| v + eps).collect(),
            hi: hi.iter().map(|v| v - eps).collect(),
        },
    };
    let empty = match &out {
        Domain::Whole => false,
        Domain::Ball { radius, .. } => *radius <= 0.0,
        Domain::Box { lo, hi } => lo.iter().zip(hi).any(|(l, h)| l > h),
    };
    if empty {
        return Err(Error::InvalidInput(format!("scale {eps} leaves an empty domain")));
    }
    Ok(out)
}

/// Mollifies with the default (1 − |t|²)⁴ bump at scale ε.
pub fn mollify(u: &MapHandle, scale: f64) -> Result<MapHandle> {
    mollify_with(u, BumpKernel::default(), scale)
}

pub fn mollify_with(u: &MapHandle, kernel: BumpKernel, scale: f64) -> Result<MapHandle> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidInput(format!("mollifier scale must be positive, got {scale}")));
    }
    let n = u.input_dim();
    let nodes = kernel.nodes(n)?;
    let err: f64 = nodes.iter().map(|q| q.k).sum::<f64>() - 1.0;
    if err.abs() > NORMALISATION_TOL {
        return Err(Error::Diagnostic(format!("kernel quadrature integrates to 1 + {err:e}")));
    }
    let domain = shrink(&u.domain(), scale)?;
    Ok(Arc::new(Mollified { inner: u.clone(), scale, nodes: Arc::new(nodes), domain }))
}

// ---------------------------------------------------------------------------
// Approximation of contact jets under mollification

/// Optional data for checking the hyperplane hypothesis along the sequence:
/// a direction e and a candidate Q for an approximate jet of e^⊥u at x.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperplaneHypothesis {
    pub e: Direction,
    pub q: GradMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub scale: f64,
    pub x_m: Vec<f64>,
    /// The maximiser lies strictly inside the search ball.
    pub interior: bool,
    /// |ξᵀDu_m(x_m) − D(test)(x_m)|: zero at an exact interior maximum.
    pub first_order_gap: f64,
    /// Isotropic lift added to X_m so that X_m ⪰ ξᵀD²u_m(x_m).
    pub lift: f64,
    pub member: bool,
    /// |ξᵀP_m − ξᵀP|
    pub along_p_error: f64,
    /// |X_m − ξᵀ𝐗|
    pub along_x_error: f64,
    /// |ξ^⊥P_m − ξ^⊥P|
    pub perp_p_error: f64,
    /// |ξ^⊥𝐗_m − ξ^⊥𝐗|
    pub perp_x_error: f64,
    /// |ξ^⊥𝐗_m|
    pub perp_x_norm: f64,
    /// |e^⊥Du_m(x_m) − Q| when a hypothesis is supplied.
    pub hypothesis_distance: Option<f64>,
    /// Gradient errors this small are within the localisation accuracy of
    /// x_m and count as zero.
    pub resolution: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproximationReport {
    pub rows: Vec<ScaleRow>,
    /// (P_m, ξᵀ𝐗_m) → (P, ξᵀ𝐗) when the hypothesis holds; only the ξᵀ part
    /// of P otherwise.
    pub along_converges: bool,
    pub along_rate: Option<f64>,
    pub perp_converges: bool,
    pub perp_rate: Option<f64>,
    /// Q verified as an approximate jet of e^⊥u at x.
    pub hypothesis_verified: Option<bool>,
    pub inconclusive: bool,
}

/// Errors below this count as zero in convergence trends.
pub const CONVERGENCE_FLOOR: f64 = 1e-8;

/// True when the errors (ordered from coarse to fine scale) tend to zero:
/// either the finest is below [`CONVERGENCE_FLOOR`] or its row floor, or the
/// log-log slope against the scale exceeds 1/4 with the finest below the
/// coarsest.
fn trend(scales: &[f64], errors: &[f64], floors: &[f64]) -> (bool, Option<f64>) {
    let null = |i: usize| errors[i] <= CONVERGENCE_FLOOR.max(floors[i]);
    let pts: Vec<(f64, f64)> = (0..errors.len()).filter(|&i| !null(i)).map(|i| (scales[i], errors[i])).collect();
    let rate = loglog_slope(&pts);
    let (Some(first), Some(last)) = (errors.first(), errors.last()) else { return (false, None) };
    let ok = null(errors.len() - 1) || (rate.is_some_and(|r| r > 0.25) && last < first);
    (ok, rate)
}

/// Maximises `f` over the ball of radius `r` about `c`: a grid followed by
/// golden section (n = 1) or compass search (n ≥ 2).
fn maximise(f: &dyn Fn(&[f64]) -> f64, c: &[f64], r: f64) -> (Vec<f64>, f64) {
    let n = c.len();
    if n == 1 {
        let g = 81;
        let pts: Vec<f64> = (0..g).map(|i| c[0] - r + 2.0 * r * i as f64 / (g - 1) as f64).collect();
        let vals: Vec<f64> = pts.iter().map(|&y| f(&[y])).collect();
        let best = (0..g).max_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap_or(0);
        let (mut a, mut b) = (pts[best.saturating_sub(1)], pts[(best + 1).min(g - 1)]);
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = b - phi * (b - a);
        let mut x2 = a + phi * (b - a);
        let (mut f1, mut f2) = (f(&[x1]), f(&[x2]));
        for _ in 0..80 {
            if f1 >= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - phi * (b - a);
                f1 = f(&[x1]);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + phi * (b - a);
                f2 = f(&[x2]);
            }
        }
        let mut cand = vec![(pts[best], vals[best]), (x1, f1), (x2, f2)];
        cand.sort_by(|p, q| q.1.total_cmp(&p.1));
        return (vec![cand[0].0], cand[0].1);
    }
    let g = 21usize;
    let inside = |y: &[f64]| norm(&vecops::sub(y, c)) <= r;
    let mut best = (c.to_vec(), f(c));
    let mut idx = vec![0usize; n];
    loop {
        let y: Vec<f64> = (0..n).map(|i| c[i] - r + 2.0 * r * idx[i] as f64 / (g - 1) as f64).collect();
        if inside(&y) {
            let v = f(&y);
            if v > best.1 {
                best = (y, v);
            }
        }
        let mut k = 0;
        while k < n {
            idx[k] += 1;
            if idx[k] < g {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == n {
            break;
        }
    }
    let mut h = r / (g - 1) as f64;
    while h > 1e-10 * r {
        let mut improved = false;
        for i in 0..n {
            for sgn in [1.0, -1.0] {
                let mut y = best.0.clone();
                y[i] += sgn * h;
                if inside(&y) {
                    let v = f(&y);
                    if v > best.1 {
                        best = (y, v);
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    best
}

/// Runs the perturbed-maximum construction along a sequence of mollifications.
///
/// For each scale ε the point x_m maximises
/// ξᵀu_m(y) − ξᵀP(y−x) − ½ξᵀ𝐗:(y−x)⊗(y−x) − ε|y−x|² − |y−x|⁴ over
/// |y − x| ≤ 2ε. The vanishing quadratic term keeps the maximum resolvable
/// where ξᵀu_m matches the quadratic exactly; the quartic alone would leave
/// x_m fixed only to the fourth root of the rounding error.
/// With d = x_m − x the scalar second order datum is
/// X_m = ξᵀ𝐗 + 2εI + 4|d|²I + 8d⊗d, raised isotropically if needed so that
/// X_m ⪰ ξᵀD²u_m(x_m), which is membership for the C² map u_m. Then
/// (P_m, 𝐗_m) = (Du_m(x_m), D²(ξ^⊥u_m)(x_m) + ξ⊗X_m).
pub fn approximation_experiment(
    u: &MapHandle,
    jet: &JetCandidate,
    scales: &[f64],
    s: &RadiiSchedule,
    hypothesis: Option<&HyperplaneHypothesis>,
) -> Result<ApproximationReport> {
    let Some(xt) = jet.x.clone().filter(|_| jet.order == 2) else {
        return Err(Error::InvalidInput("approximation experiment needs a second order jet".into()));
    };
    let family = MollifierFamily::new(BumpKernel::default(), scales.to_vec())?;
    let verdict = test_membership(u.as_ref(), jet, s)?;
    if !verdict.member {
        return Err(Error::Unverified(format!("jet is not a verified member ({:?})", verdict.status)));
    }
    let xi = &jet.direction;
    let x = &jet.base_point;
    let n = jet.small();
    let p_along = jet.p.left(xi.as_slice());
    let x_along = xt.left(xi.as_slice());
    let p_perp = jet.p.perp(xi);
    let x_perp = xt.perp(xi);

    let hypothesis_verified = match hypothesis {
        Some(h) => {
            let eperp = project_perp(&h.e);
            let rows: Vec<Vec<f64>> = (0..jet.big()).map(|a| (0..jet.big()).map(|b| eperp.get(a, b)).collect()).collect();
            let c = ApproxJetCandidate::first(x.clone(), h.q.clone())?;
            Some(test_approx_jet(linear_image(u, rows).as_ref(), &c, s, None)?.member)
        }
        None => None,
    };

    let rows: Result<Vec<Option<ScaleRow>>> = family
        .scales
        .par_iter()
        .map(|&eps| {
            let um = mollify_with(u, family.kernel, eps)?;
            let dom = um.domain();
            let test = |y: &[f64]| {
                if !dom.contains(y) {
                    return f64::NEG_INFINITY;
                }
                let d = vecops::sub(y, x);
                let d2 = vecops::dot(&d, &d);
                xi.along(&um.eval(y)) - vecops::dot(&p_along, &d) - 0.5 * x_along.bilinear(&d, &d) - eps * d2 - d2 * d2
            };
            let radius = 2.0 * eps;
            let (xm, val) = maximise(&test, x, radius);
            if !val.is_finite() {
                return Ok(None);
            }
            let (Some(g), Some(h)) = (um.grad(&xm), um.hess(&xm)) else { return Ok(None) };
            let d = vecops::sub(&xm, x);
            let d2 = vecops::dot(&d, &d);
            let xd = x_along.mul_vec(&d);
            let test_grad: Vec<f64> = (0..n).map(|i| p_along[i] + xd[i] + 2.0 * eps * d[i] + 4.0 * d2 * d[i]).collect();
            let p_m = g.left(xi.as_slice());
            let first_order_gap = norm(&vecops::sub(&p_m, &test_grad));
            let base = x_along.add(&SymMatrix::identity(n).scale(2.0 * eps + 4.0 * d2)).add(&SymMatrix::outer_self(&d).scale(8.0));
            let xi_hess = h.left(xi.as_slice());
            let lift = xi_hess.sub(&base).max_eig().max(0.0);
            let x_m = base.add(&SymMatrix::identity(n).scale(lift));
            let member = x_m.sub(&xi_hess).min_eig() >= -1e-9 * x_m.frob_norm().max(1.0);
            let big_x_m = h.perp(xi).add(&HessTensor::outer(xi.as_slice(), &x_m));
            let perp_x_m = big_x_m.perp(xi);
            let hypothesis_distance = hypothesis.map(|hy| g.left_mul(&project_perp(&hy.e)).sub(&hy.q).norm());
            // rounding in the test value leaves x_m uncertain by about √(noise/ε)
            let noise = 64.0 * f64::EPSILON * norm(&um.eval(&xm)).max(1.0);
            let resolution = (h.norm() + 1.0) * (noise / eps).sqrt();
            Ok(Some(ScaleRow {
                scale: eps,
                interior: norm(&d) < radius * (1.0 - 1e-3),
                x_m: xm,
                first_order_gap,
                lift,
                member,
                along_p_error: norm(&vecops::sub(&p_m, &p_along)),
                along_x_error: x_m.sub(&x_along).frob_norm(),
                perp_p_error: g.perp(xi).sub(&p_perp).norm(),
                perp_x_error: perp_x_m.sub(&x_perp).norm(),
                perp_x_norm: perp_x_m.norm(),
                hypothesis_distance,
                resolution,
            }))
        })
        .collect();
    let rows = rows?;
    let inconclusive = rows.iter().any(|r| r.as_ref().is_none_or(|r| !r.member));
    let rows: Vec<ScaleRow> = rows.into_iter().flatten().collect();
    let sc: Vec<f64> = rows.iter().map(|r| r.scale).collect();
    // without the hyperplane hypothesis only the ξ-components of P are claimed
    let claim_perp_p = hypothesis_verified == Some(true);
    let along: Vec<f64> = rows
        .iter()
        .map(|r| {
            let pe = if claim_perp_p { r.along_p_error.hypot(r.perp_p_error) } else { r.along_p_error };
            pe.max(r.along_x_error)
        })
        .collect();
    let perp: Vec<f64> = rows.iter().map(|r| r.perp_p_error.max(r.perp_x_error)).collect();
    // the resolution only excuses gradient errors; Hessian errors must be small on their own
    let floors = |x_err: &dyn Fn(&ScaleRow) -> f64| -> Vec<f64> {
        rows.iter().map(|r| if x_err(r) <= CONVERGENCE_FLOOR { r.resolution } else { 0.0 }).collect()
    };
    let (along_converges, along_rate) = trend(&sc, &along, &floors(&|r| r.along_x_error));
    let (perp_converges, perp_rate) = trend(&sc, &perp, &floors(&|r| r.perp_x_error));
    Ok(ApproximationReport { rows, along_converges, along_rate, perp_converges, perp_rate, hypothesis_verified, inconclusive })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::maps::FnMap;

    #[test]
    fn kernel_integrates_to_one() {
        for n in 1..=2 {
            assert!(BumpKernel::default().normalisation_error(n).unwrap().abs() < 1e-12);
        }
        assert!(BumpKernel::default().nodes(3).is_err());
    }

    #[test]
    fn affine_maps_are_reproduced() {
        let u = FnMap::new(2, 2, |x| vec![1.0 + 2.0 * x[0] - x[1], 0.5 * x[1]]).handle();
        let um = mollify(&u, 0.3).unwrap();
        let x = [0.4, -0.7];
        let (a, b) = (u.eval(&x), um.eval(&x));
        assert!(norm(&vecops::sub(&a, &b)) < 1e-8);
        let g = um.grad(&x).unwrap();
        let exact = GradMatrix::new(2, 2, vec![2.0, -1.0, 0.0, 0.5]).unwrap();
        assert!(g.sub(&exact).norm() < 1e-8);
        assert!(um.hess(&x).unwrap().norm() < 1e-8);
    }

    #[test]
    fn absolute_value_is_lifted() {
        let u = FnMap::new(1, 1, |x| vec![x[0].abs()]).handle();
        let eps = 0.1;
        let um = mollify(&u, eps).unwrap();
        // ε c₁ ∫|t|(1 − t²)⁴ dt = ε c₁/5 with c₁ = Γ(11/2)/(24√π)
        let exact = eps * 1.23046875 / 5.0;
        let v = um.eval(&[0.0])[0];
        // the kink sits between nodes, so the rule is only accurate to about 0.4%
        assert!(v > 0.0 && (v - exact).abs() < 1e-2 * exact, "{v} vs {exact}");
        for eps in [0.1, 0.05, 0.025] {
            let um = mollify(&u, eps).unwrap();
            let sup = (-20..=20).map(|i| {
                let z = i as f64 * 0.01;
                (um.eval(&[z])[0] - z.abs()).abs()
            });
            assert!(sup.fold(0.0, f64::max) <= 0.25 * eps);
        }
    }

    #[test]
    fn oscillating_line_resonant_radii() {
        let u = fixtures::oscillating_line();
        let s = RadiiSchedule::for_dim(1);
        let check = |p: f64| {
            let c = ApproxJetCandidate::first(vec![0.0], GradMatrix::new(1, 1, vec![p]).unwrap()).unwrap();
            test_approx_jet(u.as_ref(), &c, &s, Some(&ResonantRadii::cosine_level(p, 8))).unwrap().member
        };
        assert!(check(0.3));
        assert!(check(1.0));
        assert!(!check(1.5));
    }

    #[test]
    fn holder_well_perp_hessian_does_not_converge() {
        let u = fixtures::holder_well(0.5);
        let xi = Direction::basis(2, 0);
        let x = HessTensor::new(2, 1, vec![0.0, 2.0]).unwrap();
        let jet = JetCandidate::second(vec![0.0], xi.clone(), GradMatrix::zeros(2, 1), x).unwrap();
        let s = RadiiSchedule { count: 24, ..RadiiSchedule::for_dim(1) };
        let hyp = HyperplaneHypothesis { e: xi, q: GradMatrix::zeros(2, 1) };
        let rep = approximation_experiment(&u, &jet, &[0.1, 0.05, 0.025, 0.0125], &s, Some(&hyp)).unwrap();
        assert!(rep.along_converges && !rep.perp_converges && !rep.inconclusive);
        for r in &rep.rows {
            assert_eq!(r.perp_x_norm, 0.0);
            assert!((r.perp_x_error - 2.0).abs() < 1e-12);
        }
    }
}
