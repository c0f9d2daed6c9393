//! Contact maps: smooth test maps touching u at x in direction ξ under cone
//! control, their equivalence with contact jets, remainder absorption, the
//! derivative calculus and the rigidity dichotomy.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::loglog_slope;
use crate::jets::{self, JetCandidate, RadiiSchedule};
use crate::maps::{self, Domain, MapHandle, VectorMap};
use crate::orderings::{vee_nonpos_hess, CertifierOptions, InducedVerdict};
use crate::tensor::{Direction, GradMatrix, HessTensor, SymMatrix};
use crate::vecops::{self, norm};

#[derive(Clone)]
pub struct ContactCandidate {
    pub psi: MapHandle,
    pub base_point: Vec<f64>,
    pub direction: Direction,
    pub order: u8,
}

impl std::fmt::Debug for ContactCandidate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ContactCandidate")
            .field("base_point", &self.base_point)
            .field("direction", &self.direction)
            .field("order", &self.order)
            .finish_non_exhaustive()
    }
}

impl ContactCandidate {
    pub fn new(psi: MapHandle, base_point: Vec<f64>, direction: Direction, order: u8) -> Result<Self> {
        if !(order == 1 || order == 2) {
            return Err(Error::InvalidInput(format!("order must be 1 or 2, got {order}")));
        }
        if psi.input_dim() != base_point.len() || psi.output_dim() != direction.dim() {
            return Err(Error::Dimension("contact candidate dimensions".into()));
        }
        Ok(Self { psi, base_point, direction, order })
    }

    /// ψ(x) = u(x) within 1e−10.
    pub fn touches(&self, u: &dyn VectorMap) -> Result<bool> {
        let a = maps::eval_checked(u, &self.base_point)?;
        let b = self.psi.eval(&self.base_point);
        Ok(norm(&vecops::sub(&a, &b)) <= 1e-10 * norm(&a).max(1.0))
    }
}

/// Cone slopes L with the neighbourhood radius each may use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeSchedule {
    pub slopes: Vec<f64>,
    pub radius_per_slope: Vec<f64>,
}

impl Default for ConeSchedule {
    fn default() -> Self {
        let slopes: Vec<f64> = (0..5).map(|k| 0.5f64.powi(k)).collect();
        Self { radius_per_slope: vec![1.0; slopes.len()], slopes }
    }
}

impl ConeSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = !self.slopes.is_empty()
            && self.slopes.len() == self.radius_per_slope.len()
            && self.slopes.iter().all(|&l| l > 0.0)
            && self.radius_per_slope.iter().all(|&r| r > 0.0)
            && self.slopes.windows(2).all(|w| w[1] < w[0]);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid cone schedule {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeResult {
    pub slope: f64,
    /// Largest schedule radius inside which the cone inequality held.
    pub radius: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactVerdict {
    pub holds: bool,
    pub per_slope: Vec<SlopeResult>,
    pub finest_slope_passed: Option<f64>,
}

/// Per-sample data of u − ψ: |ξ^⊥(u−ψ)|², −ξᵀ(u−ψ) and a rounding bound.
struct ConeSample {
    perp_sq: f64,
    depth: f64,
    noise: f64,
}

fn cone_samples(u: &dyn VectorMap, c: &ContactCandidate, s: &RadiiSchedule) -> Result<Vec<(f64, Vec<ConeSample>)>> {
    let n = c.base_point.len();
    s.validate(n)?;
    if u.input_dim() != n || u.output_dim() != c.direction.dim() {
        return Err(Error::Dimension("contact map and u disagree".into()));
    }
    if !c.touches(u)? {
        return Err(Error::InvalidInput("ψ(x) differs from u(x)".into()));
    }
    let dirs = s.directions(n);
    let domain = u.domain();
    let xi = &c.direction;
    s.radii()
        .into_par_iter()
        .map(|r| {
            let mut out = Vec::new();
            for d in &dirs {
                let y = vecops::axpy(&c.base_point, r, d);
                if !domain.contains(&y) {
                    continue;
                }
                let uy = u.eval(&y);
                let py = c.psi.eval(&y);
                if !vecops::all_finite(&uy) || !vecops::all_finite(&py) {
                    return Err(Error::NonFinite(format!("evaluation at {y:?}")));
                }
                let w = vecops::sub(&uy, &py);
                let perp = norm(&xi.perp(&w));
                out.push(ConeSample {
                    perp_sq: perp * perp,
                    depth: -xi.along(&w),
                    noise: 8.0 * f64::EPSILON * (norm(&uy) + norm(&py)),
                });
            }
            Ok((r, out))
        })
        .collect()
}

fn cone_holds(smp: &ConeSample, bound: f64) -> bool {
    // bound = L|y−x| (first order) or L²|y−x|² (second order)
    let slack = 2.0 * smp.noise * (smp.perp_sq.sqrt() + bound) + smp.noise * smp.noise;
    smp.perp_sq <= bound * smp.depth + slack
}

/// For each slope L, the largest schedule radius r such that the cone
/// inequality holds at every sample of every schedule radius ≤ r. A slope
/// passes when at least the two finest radii pass.
pub fn is_contact_map(
    u: &dyn VectorMap,
    c: &ContactCandidate,
    cones: &ConeSchedule,
    s: &RadiiSchedule,
) -> Result<ContactVerdict> {
    cones.validate()?;
    let rows = cone_samples(u, c, s)?;
    let per_slope: Vec<SlopeResult> = cones
        .slopes
        .iter()
        .zip(&cones.radius_per_slope)
        .map(|(&l, &cap)| {
            let mut passing = None;
            let mut run = 0;
            // walk from the finest radius outwards
            for (r, smp) in rows.iter().rev().filter(|(r, _)| *r <= cap) {
                let bound = if c.order == 1 { l * r } else { l * l * r * r };
                if !smp.iter().all(|x| cone_holds(x, bound)) {
                    break;
                }
                run += 1;
                passing = Some(*r);
            }
            SlopeResult { slope: l, radius: if run >= 2 { passing } else { None } }
        })
        .collect();
    let holds = per_slope.iter().all(|p| p.radius.is_some());
    let finest_slope_passed =
        per_slope.iter().filter(|p| p.radius.is_some()).map(|p| p.slope).fold(None, |m: Option<f64>, l| {
            Some(m.map_or(l, |m| m.min(l)))
        });
    Ok(ContactVerdict { holds, per_slope, finest_slope_passed })
}

/// (Dψ(x), D²ψ(x)) as a jet candidate of the same order.
pub fn jet_from_contact_map(c: &ContactCandidate) -> Result<JetCandidate> {
    let x = &c.base_point;
    let p = c.psi.grad(x).ok_or_else(|| Error::MissingDerivatives("contact map gradient".into()))?;
    if c.order == 1 {
        return JetCandidate::first(x.clone(), c.direction.clone(), p);
    }
    let h = c.psi.hess(x).ok_or_else(|| Error::MissingDerivatives("contact map hessian".into()))?;
    JetCandidate::second(x.clone(), c.direction.clone(), p, h)
}

/// u(x) + Pz + ½𝐗:z⊗z + C|z|^q ξ, z = y − x.
pub struct TaylorBump {
    pub base_point: Vec<f64>,
    pub value: Vec<f64>,
    pub p: GradMatrix,
    pub x: Option<HessTensor>,
    pub direction: Direction,
    pub coeff: f64,
    pub power: f64,
    pub domain: Domain,
}

impl TaylorBump {
    fn offset(&self, y: &[f64]) -> Vec<f64> {
        vecops::sub(y, &self.base_point)
    }
}

impl VectorMap for TaylorBump {
    fn input_dim(&self) -> usize {
        self.base_point.len()
    }
    fn output_dim(&self) -> usize {
        self.value.len()
    }
    fn eval(&self, y: &[f64]) -> Vec<f64> {
        let z = self.offset(y);
        let mut v = vecops::add(&self.value, &self.p.apply(&z));
        if let Some(x) = &self.x {
            v = vecops::axpy(&v, 0.5, &x.quadratic(&z));
        }
        vecops::axpy(&v, self.coeff * norm(&z).powf(self.power), self.direction.as_slice())
    }
    fn grad(&self, y: &[f64]) -> Option<GradMatrix> {
        let z = self.offset(y);
        let r = norm(&z);
        let mut g = self.p.clone();
        if let Some(x) = &self.x {
            let rows: Vec<Vec<f64>> = (0..x.big()).map(|a| x.component(a).mul_vec(&z)).collect();
            g = g.add(&GradMatrix::from_rows(&rows).ok()?);
        }
        if r > 0.0 {
            let s = self.coeff * self.power * r.powf(self.power - 2.0);
            g = g.add(&GradMatrix::outer(self.direction.as_slice(), &vecops::scale(&z, s)));
        }
        Some(g)
    }
    fn hess(&self, y: &[f64]) -> Option<HessTensor> {
        let x = self.x.as_ref()?;
        if self.power < 2.0 {
            return None;
        }
        let z = self.offset(y);
        let r = norm(&z);
        let n = z.len();
        let bump = if r > 0.0 {
            let q = self.power;
            let a = self.coeff * q * r.powf(q - 2.0);
            let b = self.coeff * q * (q - 2.0) * r.powf(q - 4.0);
            SymMatrix::identity(n).scale(a).add(&SymMatrix::outer_self(&z).scale(b))
        } else if self.power == 2.0 {
            SymMatrix::identity(n).scale(2.0 * self.coeff)
        } else {
            SymMatrix::zeros(n)
        };
        Some(x.add(&HessTensor::outer(self.direction.as_slice(), &bump)))
    }
    fn domain(&self) -> Domain {
        self.domain.clone()
    }
}

/// Power law C r^γ dominating `table` (pairs (r, value/r^p)), with γ set to
/// 0.8·min(slope, 1) of the table's decay and C floored at 1e−3.
fn power_majorant(table: &[(f64, f64)]) -> (f64, f64) {
    let positive: Vec<(f64, f64)> = table.iter().copied().filter(|p| p.1 > 1e-300).collect();
    let gamma = match loglog_slope(&positive) {
        Some(s) if s > 0.0 => 0.8 * s.min(1.0),
        Some(_) => 0.0,
        None => 1.0,
    };
    let coeff = table.iter().map(|(r, v)| v / r.powf(gamma)).fold(1e-3, f64::max);
    (coeff, gamma.max(1e-3))
}

/// Builds u(x) + Pz + ½𝐗:z⊗z + σ̂(|z|)|z|^p ξ from a verified jet. The
/// modulus is a power law σ̂(r) = C r^γ lying above the coupled-inequality
/// envelope at every schedule radius, which keeps ψ twice differentiable.
pub fn contact_map_from_jet(u: &MapHandle, jc: &JetCandidate, s: &RadiiSchedule) -> Result<ContactCandidate> {
    let v = jets::test_membership(u.as_ref(), jc, s)?;
    if !v.member {
        return Err(Error::Unverified(format!("jet candidate is not a member ({:?})", v.status)));
    }
    let env = jets::test_structural(u.as_ref(), jc, s)?;
    let table: Vec<(f64, f64)> = env.decay_table.iter().map(|r| (r.radius, r.max_ratio)).collect();
    let (coeff, gamma) = power_majorant(&table);
    let value = maps::eval_checked(u.as_ref(), &jc.base_point)?;
    let bump = TaylorBump {
        base_point: jc.base_point.clone(),
        value,
        p: jc.p.clone(),
        x: if jc.order == 2 { jc.x.clone() } else { None },
        direction: jc.direction.clone(),
        coeff,
        power: jc.order as f64 + gamma,
        domain: Domain::Whole,
    };
    ContactCandidate::new(Arc::new(bump), jc.base_point.clone(), jc.direction.clone(), jc.order)
}

/// T₂ψ + 2(ρ + |ξ^⊥R₂ψ|)ξ with ρ(z) = C|z|^q.
pub struct AbsorbedMap {
    pub psi: MapHandle,
    pub base_point: Vec<f64>,
    pub direction: Direction,
    pub value: Vec<f64>,
    pub p: GradMatrix,
    pub x: HessTensor,
    pub coeff: f64,
    pub power: f64,
}

impl AbsorbedMap {
    fn taylor(&self, z: &[f64]) -> Vec<f64> {
        vecops::axpy(&vecops::add(&self.value, &self.p.apply(z)), 0.5, &self.x.quadratic(z))
    }
}

impl VectorMap for AbsorbedMap {
    fn input_dim(&self) -> usize {
        self.base_point.len()
    }
    fn output_dim(&self) -> usize {
        self.value.len()
    }
    fn eval(&self, y: &[f64]) -> Vec<f64> {
        let z = vecops::sub(y, &self.base_point);
        let t = self.taylor(&z);
        let rem = vecops::sub(&self.psi.eval(y), &t);
        let lift = 2.0 * (self.coeff * norm(&z).powf(self.power) + norm(&self.direction.perp(&rem)));
        vecops::axpy(&t, lift, self.direction.as_slice())
    }
    fn grad(&self, y: &[f64]) -> Option<GradMatrix> {
        let z = vecops::sub(y, &self.base_point);
        let n = z.len();
        let xi = &self.direction;
        let rows: Vec<Vec<f64>> = (0..self.x.big()).map(|a| self.x.component(a).mul_vec(&z)).collect();
        let dt = self.p.add(&GradMatrix::from_rows(&rows).ok()?);
        let rem = vecops::sub(&self.psi.eval(y), &self.taylor(&z));
        let v = xi.perp(&rem);
        let vn = norm(&v);
        let mut lift = vec![0.0; n];
        if vn > 0.0 {
            let j = self.psi.grad(y)?.sub(&dt).perp(xi);
            lift = vecops::scale(&j.left(&v), 1.0 / vn);
        }
        let r = norm(&z);
        if r > 0.0 {
            lift = vecops::axpy(&lift, self.coeff * self.power * r.powf(self.power - 2.0), &z);
        }
        Some(dt.add(&GradMatrix::outer(xi.as_slice(), &vecops::scale(&lift, 2.0))))
    }
    fn hess(&self, y: &[f64]) -> Option<HessTensor> {
        let z = vecops::sub(y, &self.base_point);
        let n = z.len();
        let xi = &self.direction;
        let rows: Vec<Vec<f64>> = (0..self.x.big()).map(|a| self.x.component(a).mul_vec(&z)).collect();
        let dt = self.p.add(&GradMatrix::from_rows(&rows).ok()?);
        let rem = vecops::sub(&self.psi.eval(y), &self.taylor(&z));
        let v = xi.perp(&rem);
        let vn = norm(&v);
        let mut lift = SymMatrix::zeros(n);
        if vn > 0.0 {
            // ∇²|v| = (JᵀJ + Σ v_α ∇²v_α)/|v| − (Jᵀv)(Jᵀv)ᵀ/|v|³
            let j = self.psi.grad(y)?.sub(&dt).perp(xi);
            let hv = self.psi.hess(y)?.sub(&self.x).perp(xi);
            let jtj = SymMatrix::from_fn(n, |a, b| (0..j.big()).map(|k| j.get(k, a) * j.get(k, b)).sum());
            let jv = j.left(&v);
            lift = jtj.add(&hv.left(&v)).scale(1.0 / vn).sub(&SymMatrix::outer_self(&jv).scale(1.0 / vn.powi(3)));
        }
        let r = norm(&z);
        let q = self.power;
        if r > 0.0 {
            let a = self.coeff * q * r.powf(q - 2.0);
            let b = self.coeff * q * (q - 2.0) * r.powf(q - 4.0);
            lift = lift.add(&SymMatrix::identity(n).scale(a)).add(&SymMatrix::outer_self(&z).scale(b));
        }
        Some(self.x.add(&HessTensor::outer(xi.as_slice(), &lift.scale(2.0))))
    }
    fn domain(&self) -> Domain {
        self.psi.domain()
    }
}

#[derive(Clone, Debug)]
pub struct Absorbed {
    pub candidate: ContactCandidate,
    /// max of |ψ̂ − ψ|, |Dψ̂ − Dψ|, |D²ψ̂ − D²ψ| at x.
    pub jet_defect: f64,
    /// Central-difference check of Dψ̂(x) against Dψ(x).
    pub fd_gradient_defect: f64,
    /// Largest |ξ^⊥R₂ψ̂| over the schedule samples.
    pub perp_remainder: f64,
}

/// Moves the whole second order remainder of a verified contact map onto ξ.
/// ρ is a power-law majorant of both (ξᵀR₂ψ)⁺ and the coupling threshold of
/// u − ψ on the schedule.
pub fn absorb_remainder(
    u: &MapHandle,
    c: &ContactCandidate,
    cones: &ConeSchedule,
    s: &RadiiSchedule,
) -> Result<Absorbed> {
    if c.order != 2 {
        return Err(Error::InvalidInput("remainder absorption needs a second contact map".into()));
    }
    if !is_contact_map(u.as_ref(), c, cones, s)?.holds {
        return Err(Error::Unverified("input is not a contact map on this schedule".into()));
    }
    let x0 = &c.base_point;
    let xi = &c.direction;
    let value = c.psi.eval(x0);
    let p = c.psi.grad(x0).ok_or_else(|| Error::MissingDerivatives("ψ gradient".into()))?;
    let hx = c.psi.hess(x0).ok_or_else(|| Error::MissingDerivatives("ψ hessian".into()))?;
    let n = x0.len();
    let dirs = s.directions(n);
    let domain = u.domain();
    let mut table = Vec::new();
    for r in s.radii() {
        let mut need = 0.0f64;
        for d in &dirs {
            let z = vecops::scale(d, r);
            let y = vecops::add(x0, &z);
            if !domain.contains(&y) {
                continue;
            }
            let t = vecops::axpy(&vecops::add(&value, &p.apply(&z)), 0.5, &hx.quadratic(&z));
            let py = c.psi.eval(&y);
            let rem = vecops::sub(&py, &t);
            need = need.max(xi.along(&rem));
            let w = vecops::sub(&u.eval(&y), &py);
            let b = norm(&xi.perp(&w));
            let depth = -xi.along(&w);
            if b > 0.0 && depth > 0.0 {
                need = need.max(b * b / depth);
            }
        }
        table.push((r, need / (r * r)));
    }
    let (coeff, gamma) = power_majorant(&table);
    let map = AbsorbedMap {
        psi: c.psi.clone(),
        base_point: x0.clone(),
        direction: xi.clone(),
        value: value.clone(),
        p: p.clone(),
        x: hx.clone(),
        coeff,
        power: 2.0 + gamma,
    };
    let v0 = norm(&vecops::sub(&map.eval(x0), &value));
    let g0 = map.grad(x0).map(|g| g.sub(&p).norm()).unwrap_or(f64::INFINITY);
    let h0 = map.hess(x0).map(|h| h.sub(&hx).norm()).unwrap_or(f64::INFINITY);
    let fd_gradient_defect = maps::fd_grad(&map, x0, 1e-6).sub(&p).norm();
    let mut perp_remainder = 0.0f64;
    for r in s.radii() {
        for d in &dirs {
            let z = vecops::scale(d, r);
            let t = vecops::axpy(&vecops::add(&value, &p.apply(&z)), 0.5, &hx.quadratic(&z));
            let rem = vecops::sub(&map.eval(&vecops::add(x0, &z)), &t);
            perp_remainder = perp_remainder.max(norm(&xi.perp(&rem)));
        }
    }
    let candidate = ContactCandidate::new(Arc::new(map), x0.clone(), xi.clone(), 2)?;
    Ok(Absorbed { candidate, jet_defect: v0.max(g0).max(h0), fd_gradient_defect, perp_remainder })
}

/// Derivative relations between u and a candidate contact map at x.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalculusReport {
    pub contact: ContactVerdict,
    /// |D(u − ψ)(x)|
    pub gradient_defect: f64,
    /// ξ∨D²(u − ψ)(x) ≤ 0 (second order only).
    pub hessian_ordering: Option<InducedVerdict>,
    /// The four rank-one decomposition identities, in order: the gradient
    /// factorisation, the Hessian factorisation, the vanishing ξ-gradient and
    /// the ξ-Hessian sign.
    pub identities: Vec<bool>,
    /// max eigenvalue of ξᵀD²(u − ψ)(x)
    pub xi_hessian_top: Option<f64>,
    /// The implications that must hold all do.
    pub consistent: bool,
}

/// Tolerance for derivative equalities.
pub const DERIVATIVE_TOL: f64 = 1e-8;
/// Margin for strict negativity in the converse direction.
pub const STRICT_MARGIN: f64 = 1e-6;

pub fn contact_calculus_check(
    u: &MapHandle,
    c: &ContactCandidate,
    cones: &ConeSchedule,
    s: &RadiiSchedule,
) -> Result<CalculusReport> {
    let x = &c.base_point;
    let xi = &c.direction;
    let du = u.grad(x).ok_or_else(|| Error::MissingDerivatives("u gradient".into()))?;
    let dpsi = c.psi.grad(x).ok_or_else(|| Error::MissingDerivatives("ψ gradient".into()))?;
    let dd = du.sub(&dpsi);
    let gradient_defect = dd.norm();
    let contact = is_contact_map(u.as_ref(), c, cones, s)?;
    let grad_factored = dd.sub(&GradMatrix::outer(xi.as_slice(), &dd.left(xi.as_slice()))).norm() <= DERIVATIVE_TOL;
    let grad_xi_zero = norm(&dd.left(xi.as_slice())) <= DERIVATIVE_TOL;

    if c.order == 1 {
        let zero = gradient_defect <= DERIVATIVE_TOL;
        let consistent = contact.holds == zero;
        return Ok(CalculusReport {
            contact,
            gradient_defect,
            hessian_ordering: None,
            identities: vec![grad_factored, grad_xi_zero],
            xi_hessian_top: None,
            consistent,
        });
    }

    let hu = u.hess(x).ok_or_else(|| Error::MissingDerivatives("u hessian".into()))?;
    let hpsi = c.psi.hess(x).ok_or_else(|| Error::MissingDerivatives("ψ hessian".into()))?;
    let hd = hu.sub(&hpsi);
    let ordering = vee_nonpos_hess(xi, &hd, &CertifierOptions::default())?;
    let xi_h = hd.left(xi.as_slice());
    let top = xi_h.max_eig();
    let scale = hd.norm().max(1.0);
    let hess_factored = hd.sub(&HessTensor::outer(xi.as_slice(), &xi_h)).norm() <= DERIVATIVE_TOL * scale;
    let xi_nonpos = top <= 1e-9 * scale;
    let identities = vec![grad_factored, hess_factored, grad_xi_zero, xi_nonpos];
    let second_order = gradient_defect <= DERIVATIVE_TOL && ordering.holds;
    let strict = top < -STRICT_MARGIN;
    let forward = !contact.holds || (second_order && identities.iter().all(|&b| b));
    let converse = !(second_order && strict) || contact.holds;
    let rank_one_converse = !(identities.iter().all(|&b| b) && strict) || contact.holds;
    Ok(CalculusReport {
        contact,
        gradient_defect,
        hessian_ordering: Some(ordering),
        identities,
        xi_hessian_top: Some(top),
        consistent: forward && converse && rank_one_converse,
    })
}

/// ψ + ε|y − x|²ξ, so that u − ψ loses ε|y − x|²ξ and its ξ-Hessian drops by 2εI.
pub fn strictify(c: &ContactCandidate, eps: f64) -> Result<ContactCandidate> {
    let psi = c.psi.clone();
    let (psi_g, psi_h) = (c.psi.clone(), c.psi.clone());
    let x0 = c.base_point.clone();
    let x1 = x0.clone();
    let xi = c.direction.to_vec();
    let (xi1, xi2) = (xi.clone(), xi.clone());
    let n = x0.len();
    let map = maps::FnMap::new(n, xi.len(), move |y| {
        let z = vecops::sub(y, &x0);
        vecops::axpy(&psi.eval(y), eps * vecops::dot(&z, &z), &xi)
    })
    .with_grad(move |y| {
        let z = vecops::sub(y, &x1);
        let g = psi_g.grad(y).unwrap_or_else(|| maps::fd_grad(psi_g.as_ref(), y, 1e-6));
        g.add(&GradMatrix::outer(&xi1, &vecops::scale(&z, 2.0 * eps)))
    })
    .with_hess(move |y| {
        let h = psi_h.hess(y).unwrap_or_else(|| maps::fd_hess(psi_h.as_ref(), y, 1e-4));
        h.add(&HessTensor::outer(&xi2, &SymMatrix::identity(n).scale(2.0 * eps)))
    })
    .with_domain(c.psi.domain())
    .handle();
    ContactCandidate::new(map, c.base_point.clone(), c.direction.clone(), c.order)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport {
    /// Estimated liminf of −ξᵀ(u − ψ)/|y − x|² (may be +∞).
    pub l_minus: f64,
    /// Estimated limsup of the same ratio (may be +∞).
    pub l_plus: f64,
    pub perturbed_still_contact: bool,
    /// Whether the dichotomy's forced conclusion held (vacuous unless
    /// l^− exceeds [`RIGIDITY_THRESHOLD`]).
    pub consistent: bool,
}

pub const RIGIDITY_THRESHOLD: f64 = 1e6;

/// Estimates l^± on the finest three radii and tests the perturbation
/// ψ̂ = ψ + ½ξ^⊥𝐗:(y − x)⊗(y − x).
pub fn rigidity_dichotomy(
    u: &MapHandle,
    c: &ContactCandidate,
    x: &HessTensor,
    cones: &ConeSchedule,
    s: &RadiiSchedule,
) -> Result<RigidityReport> {
    let n = c.base_point.len();
    if x.big() != c.direction.dim() || x.small() != n {
        return Err(Error::Dimension("perturbation tensor".into()));
    }
    let rows = cone_samples(u.as_ref(), c, s)?;
    let mins: Vec<(f64, f64)> = rows
        .iter()
        .map(|(r, smp)| (*r, smp.iter().map(|q| q.depth).fold(f64::INFINITY, f64::min) / (r * r)))
        .collect();
    let maxs: Vec<(f64, f64)> = rows
        .iter()
        .map(|(r, smp)| (*r, smp.iter().map(|q| q.depth).fold(f64::NEG_INFINITY, f64::max) / (r * r)))
        .collect();
    let tail = |v: &[(f64, f64)]| v[v.len().saturating_sub(3)..].to_vec();
    let diverging = |v: &[(f64, f64)]| v.iter().all(|p| p.1 > 0.0) && loglog_slope(v).is_some_and(|sl| sl < -0.1);
    let (tmin, tmax) = (tail(&mins), tail(&maxs));
    let l_minus = if diverging(&tmin) { f64::INFINITY } else { tmin.iter().map(|p| p.1).fold(f64::INFINITY, f64::min) };
    let l_plus = if diverging(&tmax) { f64::INFINITY } else { tmax.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max) };

    let perp = x.perp(&c.direction);
    let base = c.base_point.clone();
    let (b1, b2) = (base.clone(), base.clone());
    let (psi, psi_g, psi_h) = (c.psi.clone(), c.psi.clone(), c.psi.clone());
    let (p0, p1, p2) = (perp.clone(), perp.clone(), perp);
    let map = maps::FnMap::new(n, c.direction.dim(), move |y| {
        let z = vecops::sub(y, &base);
        vecops::axpy(&psi.eval(y), 0.5, &p0.quadratic(&z))
    })
    .with_grad(move |y| {
        let z = vecops::sub(y, &b1);
        let rows: Vec<Vec<f64>> = (0..p1.big()).map(|a| p1.component(a).mul_vec(&z)).collect();
        let g = psi_g.grad(y).unwrap_or_else(|| maps::fd_grad(psi_g.as_ref(), y, 1e-6));
        g.add(&GradMatrix::from_rows(&rows).expect("consistent rows"))
    })
    .with_hess(move |y| {
        let _ = &b2;
        let h = psi_h.hess(y).unwrap_or_else(|| maps::fd_hess(psi_h.as_ref(), y, 1e-4));
        h.add(&p2)
    })
    .with_domain(c.psi.domain())
    .handle();
    let perturbed = ContactCandidate::new(map, c.base_point.clone(), c.direction.clone(), 2)?;
    let perturbed_still_contact = is_contact_map(u.as_ref(), &perturbed, cones, s)?.holds;
    let consistent = !(l_minus > RIGIDITY_THRESHOLD) || perturbed_still_contact;
    Ok(RigidityReport { l_minus, l_plus, perturbed_still_contact, consistent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{holder_well, perp_parabola};

    fn deep() -> RadiiSchedule {
        RadiiSchedule { count: 24, ..RadiiSchedule::for_dim(1) }
    }

    #[test]
    fn holder_well_contact_maps() {
        let u = holder_well(0.5);
        let xi = Direction::basis(2, 0);
        let ok = ContactCandidate::new(perp_parabola(1.0), vec![0.0], xi.clone(), 2).unwrap();
        let v = is_contact_map(u.as_ref(), &ok, &ConeSchedule::default(), &deep()).unwrap();
        assert!(v.holds, "{v:?}");
        let bad = maps::FnMap::new(1, 2, |x| vec![x[0] * x[0], x[0]]).handle();
        let bad = ContactCandidate::new(bad, vec![0.0], xi, 2).unwrap();
        assert!(!is_contact_map(u.as_ref(), &bad, &ConeSchedule::default(), &deep()).unwrap().holds);
    }
}
