//! Numerical membership tests for first and second order contact jets.
//!
//! A candidate (P, 𝐗) at x in direction ξ is a member when
//! max σ(ξ∨Q(z)) = o(|z|^p), with Q the Taylor remainder. Limits are probed
//! on a geometric schedule of radii; see [`decide`] for the decision rule.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::loglog_slope;
use crate::maps::{MapHandle, VectorMap};
use crate::sampling;
use crate::spectrum::max_sigma;
use crate::tensor::{Direction, GradMatrix, HessTensor, SymMatrix};
use crate::vecops::{self, norm, ZERO_TOL};

/// Element of the first (order 1) or second (order 2) contact jet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JetCandidate {
    pub base_point: Vec<f64>,
    pub direction: Direction,
    pub p: GradMatrix,
    pub x: Option<HessTensor>,
    pub order: u8,
}

impl JetCandidate {
    pub fn first(base_point: Vec<f64>, direction: Direction, p: GradMatrix) -> Result<Self> {
        let c = Self { base_point, direction, p, x: None, order: 1 };
        c.validate()?;
        Ok(c)
    }

    pub fn second(base_point: Vec<f64>, direction: Direction, p: GradMatrix, x: HessTensor) -> Result<Self> {
        let c = Self { base_point, direction, p, x: Some(x), order: 2 };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let (nb, n) = (self.p.big(), self.p.small());
        if self.direction.dim() != nb || self.base_point.len() != n {
            return Err(Error::Dimension(format!(
                "candidate: P is {nb}x{n}, ξ has {} entries, x has {}",
                self.direction.dim(),
                self.base_point.len()
            )));
        }
        match (self.order, &self.x) {
            (1, _) => Ok(()),
            (2, Some(x)) if x.big() == nb && x.small() == n => Ok(()),
            (2, Some(_)) => Err(Error::Dimension("candidate: 𝐗 does not match P".into())),
            (2, None) => Err(Error::InvalidInput("order 2 candidate without 𝐗".into())),
            (o, _) => Err(Error::InvalidInput(format!("order must be 1 or 2, got {o}"))),
        }
    }

    pub fn big(&self) -> usize {
        self.p.big()
    }

    pub fn small(&self) -> usize {
        self.p.small()
    }

    /// Same data with the direction reversed.
    pub fn with_direction(&self, xi: Direction) -> Self {
        Self { direction: xi, ..self.clone() }
    }
}

/// Geometric radii r_k = r0·factor^k sampled on spheres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiiSchedule {
    pub r0: f64,
    pub factor: f64,
    pub count: usize,
    pub sphere_samples: usize,
    pub decay_tol: f64,
}

impl Default for RadiiSchedule {
    fn default() -> Self {
        Self { r0: 0.1, factor: 0.5, count: 10, sphere_samples: 16, decay_tol: 1e-3 }
    }
}

impl RadiiSchedule {
    /// Default schedule with max(2n, 16) sphere samples.
    pub fn for_dim(n: usize) -> Self {
        Self { sphere_samples: (2 * n).max(16), ..Self::default() }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let ok = self.r0 > 0.0
            && self.r0.is_finite()
            && self.factor > 0.0
            && self.factor < 1.0
            && self.count >= 4
            && self.sphere_samples >= 2 * n
            && self.decay_tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid radii schedule {self:?}")))
        }
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.r0 * self.factor.powi(k as i32)).collect()
    }

    pub fn directions(&self, n: usize) -> Vec<Vec<f64>> {
        sampling::sphere_points(n, self.sphere_samples)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JetStatus {
    Member,
    NonMember,
    /// Decaying but still above tolerance at the finest radii, or too few
    /// in-domain samples.
    Inconclusive,
    /// A stated hypothesis was checked and failed; no claim about the target.
    HypothesisFailed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub radius: f64,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JetVerdict {
    pub member: bool,
    pub status: JetStatus,
    pub decay_table: Vec<DecayRow>,
    pub fitted_exponent: Option<f64>,
}

/// One radius of a sweep: observed ratio (`None` when too few samples survive
/// the domain restriction) and the round-off level of that ratio.
#[derive(Clone, Copy, Debug)]
pub struct SweepRow {
    pub radius: f64,
    pub ratio: Option<f64>,
    pub noise: f64,
}

/// Slope above which a ratio table counts as decaying.
pub const DECAY_SLOPE: f64 = 0.25;

/// Decision rule shared by all decay tests.
///
/// A row is null when its ratio is below min(1e−10, 1e−2·tol) or below its
/// round-off level. If both finest rows are null the quantity vanishes to
/// working precision. Otherwise the verdict needs the two finest ratios below
/// `tol` and a log-log slope above [`DECAY_SLOPE`], fitted over the finest
/// half of the schedule (at least three radii) with null rows left out.
pub fn decide(rows: &[SweepRow], tol: f64) -> JetVerdict {
    let table: Vec<DecayRow> =
        rows.iter().map(|r| DecayRow { radius: r.radius, max_ratio: r.ratio.unwrap_or(f64::NAN) }).collect();
    let verdict = |status: JetStatus, slope: Option<f64>| JetVerdict {
        member: status == JetStatus::Member,
        status,
        decay_table: table.clone(),
        fitted_exponent: slope,
    };
    if rows.len() < 2 || rows.iter().any(|r| r.ratio.is_none()) {
        return verdict(JetStatus::Inconclusive, None);
    }
    let floor = 1e-10f64.min(1e-2 * tol);
    let is_null = |r: &SweepRow| r.ratio.unwrap() <= floor.max(r.noise);
    // rows are ordered from coarse to fine
    let finest = &rows[rows.len() - 2..];
    if finest.iter().all(is_null) {
        return verdict(JetStatus::Member, None);
    }
    let half = rows.len().div_ceil(2).max(3).min(rows.len());
    let fit: Vec<(f64, f64)> =
        rows[rows.len() - half..].iter().filter(|r| !is_null(r)).map(|r| (r.radius, r.ratio.unwrap())).collect();
    let slope = loglog_slope(&fit);
    let decaying = slope.is_none_or(|s| s > DECAY_SLOPE);
    let below = finest.iter().all(|r| r.ratio.unwrap() < tol);
    let status = match (below, decaying) {
        (true, true) => JetStatus::Member,
        (false, true) => JetStatus::Inconclusive,
        _ => JetStatus::NonMember,
    };
    verdict(status, slope)
}

/// Q(z) = u(x+z) − u(x) − Pz (− ½𝐗:z⊗z at order 2).
pub fn remainder(u: &dyn VectorMap, c: &JetCandidate, z: &[f64]) -> Result<Vec<f64>> {
    let u0 = crate::maps::eval_checked(u, &c.base_point)?;
    let y = vecops::add(&c.base_point, z);
    let uy = crate::maps::eval_checked(u, &y)?;
    Ok(remainder_from(c, &u0, &uy, z).0)
}

/// Remainder from precomputed values, with a bound on its rounding error.
fn remainder_from(c: &JetCandidate, u0: &[f64], uy: &[f64], z: &[f64]) -> (Vec<f64>, f64) {
    let pz = c.p.apply(z);
    let mut q: Vec<f64> = (0..u0.len()).map(|a| uy[a] - u0[a] - pz[a]).collect();
    let mut mag = norm(uy) + norm(u0) + norm(&pz);
    if c.order == 2 {
        if let Some(x) = &c.x {
            let xz = x.quadratic(z);
            q = vecops::axpy(&q, -0.5, &xz);
            mag += 0.5 * norm(&xz);
        }
    }
    (q, 8.0 * f64::EPSILON * mag)
}

/// Remainders of the candidate at every schedule radius. `None` marks radii
/// with fewer than n+1 in-domain samples.
pub struct RemainderSweep {
    pub radii: Vec<f64>,
    pub samples: Vec<Option<Vec<(Vec<f64>, Vec<f64>, f64)>>>,
}

/// Evaluates the remainder on all schedule spheres. Each sample holds the
/// offset z, Q(z) and its rounding level.
pub fn sweep(u: &dyn VectorMap, c: &JetCandidate, s: &RadiiSchedule) -> Result<RemainderSweep> {
    c.validate()?;
    let n = c.small();
    s.validate(n)?;
    if u.input_dim() != n || u.output_dim() != c.big() {
        return Err(Error::Dimension(format!(
            "map is ℝ^{} → ℝ^{}, candidate expects ℝ^{n} → ℝ^{}",
            u.input_dim(),
            u.output_dim(),
            c.big()
        )));
    }
    let u0 = crate::maps::eval_checked(u, &c.base_point)?;
    let dirs = s.directions(n);
    let radii = s.radii();
    let domain = u.domain();
    let samples: Result<Vec<_>> = radii
        .par_iter()
        .map(|&r| {
            let mut out = Vec::with_capacity(dirs.len());
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
                let (q, noise) = remainder_from(c, &u0, &uy, &z);
                out.push((z, q, noise));
            }
            Ok((out.len() > n).then_some(out))
        })
        .collect();
    Ok(RemainderSweep { radii, samples: samples? })
}

/// Applies a per-sample functional, normalised by r^p, and takes the max
/// over each sphere.
fn ratio_rows(sw: &RemainderSweep, p: i32, f: impl Fn(&[f64]) -> f64) -> Vec<SweepRow> {
    sw.radii
        .iter()
        .zip(&sw.samples)
        .map(|(&r, smp)| {
            let scale = r.powi(p);
            match smp {
                None => SweepRow { radius: r, ratio: None, noise: 0.0 },
                Some(v) => {
                    let ratio = v.iter().map(|(_, q, _)| f(q)).fold(0.0, f64::max) / scale;
                    let noise = v.iter().map(|s| s.2).fold(0.0, f64::max) / scale;
                    SweepRow { radius: r, ratio: Some(ratio), noise }
                }
            }
        })
        .collect()
}

/// Tests max σ(ξ∨Q(z)) = o(|z|^p) on the schedule.
pub fn test_membership(u: &dyn VectorMap, c: &JetCandidate, s: &RadiiSchedule) -> Result<JetVerdict> {
    let sw = sweep(u, c, s)?;
    let xi = &c.direction;
    let rows = ratio_rows(&sw, c.order as i32, |q| max_sigma(xi, q));
    Ok(decide(&rows, s.decay_tol))
}

/// Smallest ρ ≥ 0 with a ≤ −b²/ρ + ρ, where a = ξᵀQ and b = |ξ^⊥Q|.
fn coupled_threshold(xi: &Direction, q: &[f64]) -> f64 {
    let a = xi.along(q);
    let b = norm(&xi.perp(q));
    // an absolute cut-off here would drop real ξ^⊥ parts at small radii
    if b == 0.0 {
        return a.max(0.0);
    }
    // rationalised root, stable for a < 0
    let disc = (a * a + 4.0 * b * b).sqrt();
    if a >= 0.0 {
        0.5 * (a + disc)
    } else {
        2.0 * b * b / (disc - a)
    }
}

/// Tests the coupled scalar inequality
/// ξᵀQ ≤ −|ξ^⊥Q|²/(σ(r)r^p) + σ(r)r^p
/// with σ(r) the running maximum of the observed thresholds over radii ≤ r,
/// floored at 1e−12. The verdict is the decay verdict of σ.
pub fn test_structural(u: &dyn VectorMap, c: &JetCandidate, s: &RadiiSchedule) -> Result<JetVerdict> {
    let sw = sweep(u, c, s)?;
    let xi = &c.direction;
    let p = c.order as i32;
    let observed = ratio_rows(&sw, p, |q| coupled_threshold(xi, q));
    // envelope over finer radii (rows run coarse to fine)
    let mut env = observed.clone();
    let mut running = 0.0f64;
    for row in env.iter_mut().rev() {
        if let Some(v) = row.ratio {
            running = running.max(v);
            row.ratio = Some(running);
        }
    }
    // the fitted modulus must satisfy the inequality at every sample
    for ((row, smp), &r) in env.iter().zip(&sw.samples).zip(&sw.radii) {
        let (Some(sigma), Some(smp)) = (row.ratio, smp) else { continue };
        // a positive modulus for the check only; the decision sees the raw envelope
        let m = sigma.max(1e-12) * r.powi(p);
        for (_, q, noise) in smp {
            let a = xi.along(q);
            let b = norm(&xi.perp(q));
            if a > -b * b / m + m + 4.0 * noise + 1e-12 * m {
                return Err(Error::Diagnostic(format!("fitted modulus violates the coupled inequality at r = {r}")));
            }
        }
    }
    Ok(decide(&env, s.decay_tol))
}

/// The four equivalent decay conditions on a remainder map R with R(0) = 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalentForms {
    /// max σ(ξ∨R), the two-part scalar form, the (ρ, σ) factorisation and
    /// the split along T = {|ξ^⊥R| ≤ |ξᵀR|}, in that order.
    pub verdicts: Vec<JetVerdict>,
    /// Largest relative error of |R| rebuilt from (ρ, ξᵀR).
    pub reconstruction_error: f64,
}

impl EquivalentForms {
    pub fn holds(&self) -> [bool; 4] {
        [0, 1, 2, 3].map(|k| self.verdicts[k].member)
    }

    pub fn unanimous(&self) -> bool {
        let h = self.holds();
        h.iter().all(|&b| b == h[0])
    }
}

/// Evaluates the four forms on R around 0 with exponent p.
pub fn theorem31_forms(r: &MapHandle, xi: &Direction, p: u8, s: &RadiiSchedule) -> Result<EquivalentForms> {
    let n = r.input_dim();
    if r.output_dim() != xi.dim() {
        return Err(Error::Dimension("remainder map and direction disagree".into()));
    }
    if !(p == 1 || p == 2) {
        return Err(Error::InvalidInput(format!("order must be 1 or 2, got {p}")));
    }
    let r0 = crate::maps::eval_checked(r.as_ref(), &vec![0.0; n])?;
    if norm(&r0) > 1e-12 {
        return Err(Error::InvalidInput("remainder map must vanish at 0".into()));
    }
    // the zero candidate on R has remainder R itself
    let c = JetCandidate::first(vec![0.0; n], xi.clone(), GradMatrix::zeros(xi.dim(), n))?;
    let sw = sweep(r.as_ref(), &c, s)?;
    forms_from_sweep(&sw, xi, p, s)
}

/// The four decay forms on the remainder of `c` relative to `u`.
///
/// Unlike [`theorem31_forms`] this sees the magnitude of `u` itself, so the
/// rounding left over when an exact jet is subtracted counts as noise.
pub fn theorem31_forms_of(u: &dyn VectorMap, c: &JetCandidate, s: &RadiiSchedule) -> Result<EquivalentForms> {
    let sw = sweep(u, c, s)?;
    forms_from_sweep(&sw, &c.direction, c.order, s)
}

fn forms_from_sweep(sw: &RemainderSweep, xi: &Direction, p: u8, s: &RadiiSchedule) -> Result<EquivalentForms> {
    let pi = p as i32;

    let form_i = |q: &[f64]| max_sigma(xi, q);
    let form_ii = |q: &[f64]| {
        let rn = norm(q);
        let perp = norm(&xi.perp(q));
        let tail = if rn < ZERO_TOL { 0.0 } else { perp * perp / rn };
        xi.along(q).max(0.0).max(tail)
    };
    let rho_sq = |q: &[f64]| {
        let rn = norm(q);
        if rn < ZERO_TOL {
            0.0
        } else {
            let perp = norm(&xi.perp(q));
            perp * perp / rn
        }
    };
    let form_iii = |q: &[f64]| rho_sq(q).max(xi.along(q).max(0.0));
    let form_iv = |q: &[f64]| {
        let a = xi.along(q);
        let perp = norm(&xi.perp(q));
        if perp <= a.abs() {
            let tail = if a.abs() < ZERO_TOL { 0.0 } else { perp * perp / a.abs() };
            a.max(0.0).max(tail)
        } else {
            norm(q)
        }
    };

    let mut recon = 0.0f64;
    for smp in sw.samples.iter().flatten() {
        for (_, q, _) in smp {
            let half = 0.5 * rho_sq(q);
            let a = xi.along(q);
            let rebuilt = half + (half * half + a * a).sqrt();
            recon = recon.max((rebuilt - norm(q)).abs() / norm(q).max(1.0));
        }
    }
    if recon > 1e-10 {
        return Err(Error::Diagnostic(format!("|R| reconstruction off by {recon:e}")));
    }

    let verdicts = vec![
        decide(&ratio_rows(sw, pi, form_i), s.decay_tol),
        decide(&ratio_rows(sw, pi, form_ii), s.decay_tol),
        decide(&ratio_rows(sw, pi, form_iii), s.decay_tol),
        decide(&ratio_rows(sw, pi, form_iv), s.decay_tol),
    ];
    Ok(EquivalentForms { verdicts, reconstruction_error: recon })
}

/// The ray {(Du(x), D²u(x) + ξ⊗A) : A ⪰ 0} of a twice differentiable map.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothJetFamily {
    pub base_point: Vec<f64>,
    pub direction: Direction,
    pub gradient: GradMatrix,
    pub hessian: HessTensor,
}

impl SmoothJetFamily {
    /// Member generated by the PSD matrix `a`; other matrices are rejected.
    pub fn candidate(&self, a: &SymMatrix) -> Result<JetCandidate> {
        if a.dim() != self.base_point.len() {
            return Err(Error::Dimension("ray parameter has wrong size".into()));
        }
        let m = a.min_eig();
        if m < -1e-12 * a.frob_norm().max(1.0) {
            return Err(Error::InvalidInput(format!("ray parameter is not positive semidefinite (min eigenvalue {m})")));
        }
        let x = self.hessian.add(&HessTensor::outer(self.direction.as_slice(), a));
        JetCandidate::second(self.base_point.clone(), self.direction.clone(), self.gradient.clone(), x)
    }

    /// The classical pair (Du(x), D²u(x)).
    pub fn classical(&self) -> JetCandidate {
        let n = self.base_point.len();
        self.candidate(&SymMatrix::zeros(n)).expect("zero is positive semidefinite")
    }
}

pub fn jet_enumerate_smooth(u: &dyn VectorMap, x: &[f64], xi: &Direction) -> Result<SmoothJetFamily> {
    if x.len() != u.input_dim() || xi.dim() != u.output_dim() {
        return Err(Error::Dimension("jet_enumerate_smooth".into()));
    }
    let g = u.grad(x).ok_or_else(|| Error::MissingDerivatives("gradient".into()))?;
    let h = u.hess(x).ok_or_else(|| Error::MissingDerivatives("hessian".into()))?;
    Ok(SmoothJetFamily { base_point: x.to_vec(), direction: xi.clone(), gradient: g, hessian: h })
}

/// Tests (P, 𝐗 − η⊗A) for η ⊥ ξ after checking the scalar hypothesis
/// (ηᵀP, ηᵀ𝐗 − ½A) in the upper semijet of ηᵀu.
pub fn perp_modify(
    u: &MapHandle,
    c: &JetCandidate,
    eta: &Direction,
    a: &SymMatrix,
    s: &RadiiSchedule,
) -> Result<JetVerdict> {
    c.validate()?;
    let x = c.x.as_ref().ok_or_else(|| Error::InvalidInput("perp_modify needs an order 2 candidate".into()))?;
    if eta.dim() != c.big() || a.dim() != c.small() {
        return Err(Error::Dimension("perp_modify".into()));
    }
    let dot = c.direction.along(eta.as_slice());
    if dot.abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("η is not perpendicular to ξ (ηᵀξ = {dot})")));
    }
    if a.min_eig() < -1e-12 * a.frob_norm().max(1.0) {
        return Err(Error::InvalidInput("A must be positive semidefinite".into()));
    }
    let scalar = crate::maps::project_scalar(u, eta.as_slice());
    let hyp_p = GradMatrix::new(1, c.small(), c.p.left(eta.as_slice()))?;
    let hyp_x = HessTensor::from_components(&[x.left(eta.as_slice()).sub(&a.scale(0.5))])?;
    let hyp = JetCandidate::second(c.base_point.clone(), Direction::basis(1, 0), hyp_p, hyp_x)?;
    let hv = test_membership(scalar.as_ref(), &hyp, s)?;
    if !hv.member {
        return Ok(JetVerdict { member: false, status: JetStatus::HypothesisFailed, ..hv });
    }
    let modified = JetCandidate::second(
        c.base_point.clone(),
        c.direction.clone(),
        c.p.clone(),
        x.sub(&HessTensor::outer(eta.as_slice(), a)),
    )?;
    test_membership(u.as_ref(), &modified, s)
}

/// Classical second order upper semijet test for a scalar map:
/// f(x+z) ≤ f(x) + p·z + ½Xz·z + o(|z|²).
pub fn classical_superjet(f: &dyn VectorMap, x: &[f64], p: &[f64], hx: &SymMatrix, s: &RadiiSchedule) -> Result<JetVerdict> {
    if f.output_dim() != 1 || p.len() != x.len() || hx.dim() != x.len() {
        return Err(Error::Dimension("classical_superjet".into()));
    }
    let n = x.len();
    s.validate(n)?;
    let f0 = crate::maps::eval_checked(f, x)?[0];
    let dirs = s.directions(n);
    let domain = f.domain();
    let rows: Vec<SweepRow> = s
        .radii()
        .into_iter()
        .map(|r| {
            let mut worst = 0.0f64;
            let mut noise = 0.0f64;
            let mut count = 0;
            for d in &dirs {
                let z = vecops::scale(d, r);
                let y = vecops::add(x, &z);
                if !domain.contains(&y) {
                    continue;
                }
                count += 1;
                let fy = f.eval(&y)[0];
                let lin = vecops::dot(p, &z);
                let quad = 0.5 * hx.bilinear(&z, &z);
                worst = worst.max(fy - f0 - lin - quad);
                noise = noise.max(8.0 * f64::EPSILON * (fy.abs() + f0.abs() + lin.abs() + quad.abs()));
            }
            let scale = r * r;
            SweepRow { radius: r, ratio: (count > n).then_some(worst / scale), noise: noise / scale }
        })
        .collect();
    Ok(decide(&rows, s.decay_tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::Kink;
    use crate::maps::FnMap;

    fn kink() -> Kink {
        Kink::new(vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0])
    }

    #[test]
    fn cubic_remainder() {
        let u = FnMap::new(1, 1, |x| vec![x[0].powi(3)]);
        let c = JetCandidate::first(vec![0.0], Direction::basis(1, 0), GradMatrix::zeros(1, 1)).unwrap();
        let q = remainder(&u, &c, &[0.1]).unwrap();
        assert!((q[0] - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn kink_first_order() {
        let k = kink();
        let u = k.map();
        let s = RadiiSchedule::for_dim(1);
        let xi = k.jet_direction();
        let member = |t: f64, xi: &Direction| {
            let c = JetCandidate::first(vec![0.0], xi.clone(), k.gradient(t)).unwrap();
            test_membership(u.as_ref(), &c, &s).unwrap().member
        };
        assert!(member(0.0, &xi));
        assert!(member(1.0, &xi));
        assert!(!member(2.0, &xi));
        assert!(!member(0.0, &Direction::basis(2, 0)));
    }

    #[test]
    fn holder_structural() {
        let u = crate::fixtures::holder_well(0.5);
        let s = RadiiSchedule::for_dim(1);
        let c = JetCandidate::second(vec![0.0], Direction::basis(2, 0), GradMatrix::zeros(2, 1), HessTensor::zeros(2, 1))
            .unwrap();
        assert!(test_structural(u.as_ref(), &c, &s).unwrap().member);
        let flipped = c.with_direction(Direction::basis(2, 0).neg());
        assert!(!test_structural(u.as_ref(), &flipped, &s).unwrap().member);
        assert!(!test_membership(u.as_ref(), &flipped, &s).unwrap().member);
    }

    #[test]
    fn decide_handles_null_and_slow_tables() {
        let rows = |f: &dyn Fn(f64) -> f64| -> Vec<SweepRow> {
            (0..10)
                .map(|k| {
                    let r = 0.1 * 0.5f64.powi(k);
                    SweepRow { radius: r, ratio: Some(f(r)), noise: 0.0 }
                })
                .collect()
        };
        assert!(decide(&rows(&|_| 0.0), 1e-3).member);
        assert!(decide(&rows(&|r| r), 1e-3).member);
        assert_eq!(decide(&rows(&|_| 1e-5), 1e-3).status, JetStatus::NonMember);
        assert_eq!(decide(&rows(&|r| r), 1e-12).status, JetStatus::Inconclusive);
    }
}
