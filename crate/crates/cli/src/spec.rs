//! Problem specifications (schema version 1) and the maps and
//! nonlinearities they name.

use std::sync::Arc;

use contact_core::ellipticity::{
    constant_h, eigen_nonlinearity, EigenFunction, FnNonlinearity, NonlinearityHandle,
};
use contact_core::fixtures::{self, Kink};
use contact_core::jets::RadiiSchedule;
use contact_core::maps::{FnMap, MapHandle};
use contact_core::tensor::{Direction, GradMatrix, HessTensor, SymMatrix, MAX_DIM};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const SCHEMA: u32 = 1;

/// Builtin names accepted in `map.builtin` and `nonlinearity.builtin`.
pub const MAP_BUILTINS: [&str; 4] = ["example19", "remark44", "example41", "custom_piecewise"];
pub const NONLINEARITY_BUILTINS: [&str; 4] = ["laplacian_power", "max_eig_system", "min_eig_system", "det_system"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub schema: u32,
    #[serde(default)]
    pub seed: u64,
    pub dims: Dims,
    pub map: MapSpec,
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<DirectionsSpec>,
    #[serde(default)]
    pub schedule: ScheduleOverrides,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    #[serde(rename = "N")]
    pub big: usize,
    pub n: usize,
}

/// `{"list": [[...], ...]}` or `{"sphere": count}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionsSpec {
    List(Vec<Vec<f64>>),
    Sphere(usize),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sphere_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_tol: Option<f64>,
}

impl ScheduleOverrides {
    pub fn apply(&self, base: RadiiSchedule) -> RadiiSchedule {
        RadiiSchedule {
            r0: self.r0.unwrap_or(base.r0),
            factor: self.factor.unwrap_or(base.factor),
            count: self.count.unwrap_or(base.count),
            sphere_samples: self.sphere_samples.unwrap_or(base.sphere_samples),
            decay_tol: self.decay_tol.unwrap_or(base.decay_tol),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub builtin: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub params: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySpec {
    pub builtin: String,
    /// Odd power 2p+1 for the power builtins.
    #[serde(default)]
    pub p: u32,
    /// Constant lower-order term, one entry per component (zeros by default).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<f64>>,
    /// Multiplies F; a negative factor reverses ellipticity.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

fn is_one(v: &f64) -> bool {
    *v == 1.0
}

fn two() -> u8 {
    2
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    Member,
    NonMember,
}

/// A jet candidate. `x` lists one symmetric n×n matrix per component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JetSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expect>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expect>,
}

/// Extra radii 1/(θ + k·period). Without θ the radii are tuned to
/// cos(1/r) = P for scalar candidates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonantSpec {
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisSpec {
    pub e: Vec<f64>,
    pub q: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxExpect {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub along: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perp: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckSpec {
    /// Membership of explicit candidates in the contact jets of the map.
    JetMembership {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        candidates: Vec<JetSpec>,
    },
    /// First-order candidates P(t) of the kink map, optionally with the
    /// second-order strata at each t; expectations come from the closed form.
    TGrid {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        t: Vec<f64>,
        #[serde(default)]
        strata: bool,
    },
    ContactMap {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        psi: MapSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        point: Option<Vec<f64>>,
        direction: Vec<f64>,
        #[serde(default = "two")]
        order: u8,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect: Option<bool>,
    },
    Ellipticity {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        nonlinearity: NonlinearitySpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        budget: Option<usize>,
    },
    /// The map as a contact solution of F = 0 at `points`.
    ContactSolution {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        nonlinearity: NonlinearitySpec,
    },
    ApproxJet {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        candidates: Vec<ApproxSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resonant: Option<ResonantSpec>,
    },
    Approximation {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        jet: JetSpec,
        scales: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hypothesis: Option<HypothesisSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect: Option<ApproxExpect>,
    },
}

impl CheckSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            CheckSpec::JetMembership { .. } => "jet_membership",
            CheckSpec::TGrid { .. } => "t_grid",
            CheckSpec::ContactMap { .. } => "contact_map",
            CheckSpec::Ellipticity { .. } => "ellipticity",
            CheckSpec::ContactSolution { .. } => "contact_solution",
            CheckSpec::ApproxJet { .. } => "approx_jet",
            CheckSpec::Approximation { .. } => "approximation",
        }
    }

    fn explicit_id(&self) -> Option<&String> {
        match self {
            CheckSpec::JetMembership { id, .. }
            | CheckSpec::TGrid { id, .. }
            | CheckSpec::ContactMap { id, .. }
            | CheckSpec::Ellipticity { id, .. }
            | CheckSpec::ContactSolution { id, .. }
            | CheckSpec::ApproxJet { id, .. }
            | CheckSpec::Approximation { id, .. } => id.as_ref(),
        }
    }

    /// The explicit id, or `<kind>-<index>`.
    pub fn id(&self, index: usize) -> String {
        self.explicit_id().cloned().unwrap_or_else(|| format!("{}-{index}", self.kind()))
    }
}

/// Reads and validates a specification.
pub fn parse(text: &str) -> CliResult<ProblemSpec> {
    let spec: ProblemSpec = serde_json::from_str(text).map_err(|e| CliError::from_json(&e))?;
    spec.validate()?;
    Ok(spec)
}

fn check_vec(path: &str, v: &[f64], len: usize) -> CliResult<()> {
    if v.len() != len {
        return Err(CliError::input(path, format!("expected {len} entries, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(CliError::input(path, "entries must be finite"));
    }
    Ok(())
}

impl ProblemSpec {
    pub fn validate(&self) -> CliResult<()> {
        if self.schema != SCHEMA {
            return Err(CliError::input("schema", format!("unsupported schema version {}, expected {SCHEMA}", self.schema)));
        }
        let Dims { big, n } = self.dims;
        for (name, v) in [("dims.N", big), ("dims.n", n)] {
            if v == 0 || v > MAX_DIM {
                return Err(CliError::input(name, format!("{v} is outside 1..={MAX_DIM}")));
            }
        }
        let map = self.build_map()?;
        if map.handle.input_dim() != n || map.handle.output_dim() != big {
            return Err(CliError::input(
                "dims",
                format!(
                    "map `{}` is R^{} -> R^{}, dims say R^{n} -> R^{big}",
                    self.map.builtin,
                    map.handle.input_dim(),
                    map.handle.output_dim()
                ),
            ));
        }
        for (i, p) in self.points.iter().enumerate() {
            check_vec(&format!("points[{i}]"), p, n)?;
        }
        match &self.directions {
            Some(DirectionsSpec::List(ds)) => {
                for (i, d) in ds.iter().enumerate() {
                    let path = format!("directions.list[{i}]");
                    check_vec(&path, d, big)?;
                    Direction::normalized(d).map_err(|e| CliError::input(path, e))?;
                }
            }
            Some(DirectionsSpec::Sphere(0)) => return Err(CliError::input("directions.sphere", "count must be positive")),
            _ => {}
        }
        self.schedule_for(None).validate(n).map_err(|e| CliError::input("schedule", e))?;
        let mut seen = std::collections::BTreeSet::new();
        for (i, c) in self.checks.iter().enumerate() {
            let id = c.id(i);
            if !seen.insert(id.clone()) {
                return Err(CliError::input(format!("checks[{i}].id"), format!("duplicate id `{id}`")));
            }
            self.validate_check(i, c, &map)?;
        }
        Ok(())
    }

    fn validate_check(&self, i: usize, c: &CheckSpec, map: &BuiltMap) -> CliResult<()> {
        let path = |f: &str| format!("checks[{i}].{f}");
        match c {
            CheckSpec::JetMembership { candidates, .. } => {
                for (k, js) in candidates.iter().enumerate() {
                    self.jet_candidates(js, map, &path(&format!("candidates[{k}]")))?;
                }
            }
            CheckSpec::TGrid { t, .. } => {
                if map.kink.is_none() {
                    return Err(CliError::input(path("kind"), "t_grid needs the example19 map"));
                }
                if t.iter().any(|v| !v.is_finite()) {
                    return Err(CliError::input(path("t"), "entries must be finite"));
                }
            }
            CheckSpec::ContactMap { psi, point, direction, order, .. } => {
                let built = build_map(psi, &path("psi"))?;
                if built.handle.input_dim() != self.dims.n || built.handle.output_dim() != self.dims.big {
                    return Err(CliError::input(path("psi"), "psi must have the same dimensions as the map"));
                }
                self.point_or_default(point.as_ref(), &path("point"))?;
                check_vec(&path("direction"), direction, self.dims.big)?;
                Direction::normalized(direction).map_err(|e| CliError::input(path("direction"), e))?;
                if !(*order == 1 || *order == 2) {
                    return Err(CliError::input(path("order"), "order must be 1 or 2"));
                }
            }
            CheckSpec::Ellipticity { nonlinearity, budget, .. } => {
                build_nonlinearity(nonlinearity, self.dims, &path("nonlinearity"))?;
                if *budget == Some(0) {
                    return Err(CliError::input(path("budget"), "budget must be positive"));
                }
            }
            CheckSpec::ContactSolution { nonlinearity, .. } => {
                build_nonlinearity(nonlinearity, self.dims, &path("nonlinearity"))?;
                if map.handle.grad(&vec![0.0; self.dims.n]).is_none() || map.handle.hess(&vec![0.0; self.dims.n]).is_none() {
                    return Err(CliError::input(path("kind"), "contact_solution needs a map with analytic derivatives (custom_piecewise)"));
                }
                if self.points.is_empty() {
                    return Err(CliError::input("points", "contact_solution needs at least one point"));
                }
            }
            CheckSpec::ApproxJet { candidates, resonant, .. } => {
                for (k, a) in candidates.iter().enumerate() {
                    self.approx_candidate(a, &path(&format!("candidates[{k}]")))?;
                }
                if let Some(r) = resonant {
                    if r.count == 0 {
                        return Err(CliError::input(path("resonant.count"), "count must be positive"));
                    }
                    if r.theta.is_none() && (self.dims.big != 1 || self.dims.n != 1) {
                        return Err(CliError::input(path("resonant.theta"), "theta is required unless N = n = 1"));
                    }
                    if r.period.is_some_and(|p| p <= 0.0 || !p.is_finite()) {
                        return Err(CliError::input(path("resonant.period"), "period must be positive"));
                    }
                }
            }
            CheckSpec::Approximation { jet, scales, hypothesis, .. } => {
                let cands = self.jet_candidates(jet, map, &path("jet"))?;
                if cands.len() != 1 || cands[0].0.order != 2 {
                    return Err(CliError::input(path("jet"), "needs exactly one second-order candidate with a direction"));
                }
                if self.dims.n > 2 {
                    return Err(CliError::input(path("kind"), "mollification is available for n <= 2"));
                }
                if scales.is_empty() || scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                    return Err(CliError::input(path("scales"), "needs positive finite scales"));
                }
                if let Some(h) = hypothesis {
                    self.hypothesis(h, &path("hypothesis"))?;
                }
            }
        }
        Ok(())
    }

    /// The default schedule for the map's n with overrides and an optional
    /// tolerance override on top.
    pub fn schedule_for(&self, tol: Option<f64>) -> RadiiSchedule {
        let mut s = self.schedule.apply(RadiiSchedule::for_dim(self.dims.n));
        if let Some(t) = tol {
            s.decay_tol = t;
        }
        s
    }

    pub fn build_map(&self) -> CliResult<BuiltMap> {
        build_map(&self.map, "map")
    }

    pub fn point_or_default(&self, p: Option<&Vec<f64>>, path: &str) -> CliResult<Vec<f64>> {
        let x = match p {
            Some(p) => p.clone(),
            None => self.points.first().cloned().unwrap_or_else(|| vec![0.0; self.dims.n]),
        };
        check_vec(path, &x, self.dims.n)?;
        Ok(x)
    }

    /// Directions listed at the top level, if any.
    pub fn direction_list(&self) -> Vec<Direction> {
        match &self.directions {
            Some(DirectionsSpec::List(ds)) => ds.iter().filter_map(|d| Direction::normalized(d).ok()).collect(),
            Some(DirectionsSpec::Sphere(k)) => contact_core::sampling::sphere_points(self.dims.big, *k)
                .into_iter()
                .filter_map(|d| Direction::normalized(&d).ok())
                .collect(),
            None => vec![],
        }
    }

    /// Expands a jet spec into candidates. Without an explicit direction the
    /// candidate is repeated over the top-level directions, or uses the kink
    /// direction for example19.
    pub fn jet_candidates(
        &self,
        js: &JetSpec,
        map: &BuiltMap,
        path: &str,
    ) -> CliResult<Vec<(contact_core::jets::JetCandidate, Option<Expect>)>> {
        use contact_core::jets::JetCandidate;
        let x = self.point_or_default(js.point.as_ref(), &format!("{path}.point"))?;
        let p = grad_matrix(&js.p, self.dims, &format!("{path}.p"))?;
        let hx = js.x.as_ref().map(|x| hess_tensor(x, self.dims, &format!("{path}.x"))).transpose()?;
        let dirs = match &js.direction {
            Some(d) => {
                check_vec(&format!("{path}.direction"), d, self.dims.big)?;
                vec![Direction::normalized(d).map_err(|e| CliError::input(format!("{path}.direction"), e))?]
            }
            None => {
                let list = self.direction_list();
                match (&map.kink, list.is_empty()) {
                    (_, false) => list,
                    (Some(k), true) => vec![k.jet_direction()],
                    (None, true) => {
                        return Err(CliError::input(format!("{path}.direction"), "no direction given and no top-level directions"))
                    }
                }
            }
        };
        dirs.into_iter()
            .map(|xi| {
                let c = match &hx {
                    Some(h) => JetCandidate::second(x.clone(), xi, p.clone(), h.clone()),
                    None => JetCandidate::first(x.clone(), xi, p.clone()),
                };
                c.map(|c| (c, js.expect)).map_err(|e| CliError::input(path, e))
            })
            .collect()
    }

    pub fn approx_candidate(&self, a: &ApproxSpec, path: &str) -> CliResult<contact_core::stability::ApproxJetCandidate> {
        use contact_core::stability::ApproxJetCandidate;
        let x = self.point_or_default(a.point.as_ref(), &format!("{path}.point"))?;
        let p = grad_matrix(&a.p, self.dims, &format!("{path}.p"))?;
        let c = match &a.x {
            Some(h) => ApproxJetCandidate::second(x, p, hess_tensor(h, self.dims, &format!("{path}.x"))?),
            None => ApproxJetCandidate::first(x, p),
        };
        c.map_err(|e| CliError::input(path, e))
    }

    pub fn hypothesis(&self, h: &HypothesisSpec, path: &str) -> CliResult<contact_core::stability::HyperplaneHypothesis> {
        check_vec(&format!("{path}.e"), &h.e, self.dims.big)?;
        let e = Direction::normalized(&h.e).map_err(|err| CliError::input(format!("{path}.e"), err))?;
        let q = grad_matrix(&h.q, self.dims, &format!("{path}.q"))?;
        Ok(contact_core::stability::HyperplaneHypothesis { e, q })
    }
}

/// N rows of n entries.
pub fn grad_matrix(rows: &[Vec<f64>], dims: Dims, path: &str) -> CliResult<GradMatrix> {
    if rows.len() != dims.big {
        return Err(CliError::input(path, format!("expected {} rows, got {}", dims.big, rows.len())));
    }
    for (a, r) in rows.iter().enumerate() {
        check_vec(&format!("{path}[{a}]"), r, dims.n)?;
    }
    GradMatrix::from_rows(rows).map_err(|e| CliError::input(path, e))
}

/// N symmetric n×n matrices.
pub fn hess_tensor(comps: &[Vec<Vec<f64>>], dims: Dims, path: &str) -> CliResult<HessTensor> {
    if comps.len() != dims.big {
        return Err(CliError::input(path, format!("expected {} matrices, got {}", dims.big, comps.len())));
    }
    let mut mats = Vec::with_capacity(comps.len());
    for (a, m) in comps.iter().enumerate() {
        let p = format!("{path}[{a}]");
        if m.len() != dims.n {
            return Err(CliError::input(&p, format!("expected {} rows, got {}", dims.n, m.len())));
        }
        let mut flat = Vec::with_capacity(dims.n * dims.n);
        for (i, row) in m.iter().enumerate() {
            check_vec(&format!("{p}[{i}]"), row, dims.n)?;
            flat.extend_from_slice(row);
        }
        mats.push(SymMatrix::new(dims.n, flat).map_err(|e| CliError::input(&p, e))?);
    }
    HessTensor::from_components(&mats).map_err(|e| CliError::input(path, e))
}

// ---------------------------------------------------------------------------
// Maps

/// A constructed map, with the kink data when it is the example19 builtin.
#[derive(Clone)]
pub struct BuiltMap {
    pub handle: MapHandle,
    pub kink: Option<Kink>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KinkParams {
    a: Vec<f64>,
    b: Vec<f64>,
    #[serde(default)]
    c: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HolderParams {
    #[serde(default = "half")]
    alpha: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Halfspace {
    normal: Vec<f64>,
    offset: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Monomial {
    coef: f64,
    powers: Vec<u32>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Region {
    #[serde(default)]
    halfspaces: Vec<Halfspace>,
    /// One polynomial (list of monomials) per output component.
    components: Vec<Vec<Monomial>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PiecewiseParams {
    regions: Vec<Region>,
}

fn params<T: for<'de> Deserialize<'de>>(v: &Value, path: &str) -> CliResult<T> {
    let v = if v.is_null() { Value::Object(Default::default()) } else { v.clone() };
    serde_json::from_value(v).map_err(|e| CliError::input(format!("{path}.params"), e))
}

pub fn build_map(m: &MapSpec, path: &str) -> CliResult<BuiltMap> {
    match m.builtin.as_str() {
        "example19" => {
            let p: KinkParams = params(&m.params, path)?;
            let big = p.a.len();
            if big == 0 || big > MAX_DIM {
                return Err(CliError::input(format!("{path}.params.a"), format!("length must be within 1..={MAX_DIM}")));
            }
            check_vec(&format!("{path}.params.a"), &p.a, big)?;
            check_vec(&format!("{path}.params.b"), &p.b, big)?;
            let c = p.c.unwrap_or_else(|| vec![0.0; big]);
            check_vec(&format!("{path}.params.c"), &c, big)?;
            if p.a.iter().zip(&p.b).all(|(a, b)| a + b == 0.0) {
                return Err(CliError::input(format!("{path}.params"), "a + b must be nonzero"));
            }
            let k = Kink::new(p.a, p.b, c);
            Ok(BuiltMap { handle: k.map(), kink: Some(k) })
        }
        "remark44" => {
            let _: NoParams = params(&m.params, path)?;
            Ok(BuiltMap { handle: fixtures::oscillating_line(), kink: None })
        }
        "example41" => {
            let p: HolderParams = params(&m.params, path)?;
            if !(p.alpha > 0.0 && p.alpha < 1.0) {
                return Err(CliError::input(format!("{path}.params.alpha"), "alpha must lie in (0, 1)"));
            }
            Ok(BuiltMap { handle: fixtures::holder_well(p.alpha), kink: None })
        }
        "custom_piecewise" => {
            let p: PiecewiseParams = params(&m.params, path)?;
            Ok(BuiltMap { handle: piecewise(p.regions, &format!("{path}.params"))?, kink: None })
        }
        other if NONLINEARITY_BUILTINS.contains(&other) => {
            Err(CliError::input(format!("{path}.builtin"), format!("`{other}` names a nonlinearity, not a map")))
        }
        other => Err(CliError::input(
            format!("{path}.builtin"),
            format!("unknown builtin `{other}`; expected one of {MAP_BUILTINS:?}"),
        )),
    }
}

/// ∂^d of a monomial, d a list of at most two coordinate indices.
fn mono_deriv(m: &Monomial, x: &[f64], d: &[usize]) -> f64 {
    let mut pw: Vec<i64> = m.powers.iter().map(|&p| p as i64).collect();
    let mut c = m.coef;
    for &i in d {
        c *= pw[i] as f64;
        pw[i] -= 1;
        if c == 0.0 {
            return 0.0;
        }
    }
    pw.iter().zip(x).fold(c, |acc, (&p, &v)| acc * v.powi(p as i32))
}

fn piecewise(regions: Vec<Region>, path: &str) -> CliResult<MapHandle> {
    if regions.is_empty() {
        return Err(CliError::input(format!("{path}.regions"), "needs at least one region"));
    }
    let big = regions[0].components.len();
    let mut n: Option<usize> = None;
    for (r, reg) in regions.iter().enumerate() {
        let rp = format!("{path}.regions[{r}]");
        if reg.components.len() != big || big == 0 || big > MAX_DIM {
            return Err(CliError::input(format!("{rp}.components"), "every region needs the same number (1..=16) of components"));
        }
        for (a, comp) in reg.components.iter().enumerate() {
            for (k, m) in comp.iter().enumerate() {
                let mp = format!("{rp}.components[{a}][{k}]");
                match n {
                    None => n = Some(m.powers.len()),
                    Some(d) if d != m.powers.len() => {
                        return Err(CliError::input(format!("{mp}.powers"), format!("expected {d} powers, got {}", m.powers.len())))
                    }
                    _ => {}
                }
                if !m.coef.is_finite() {
                    return Err(CliError::input(format!("{mp}.coef"), "must be finite"));
                }
            }
        }
        for (h, hs) in reg.halfspaces.iter().enumerate() {
            if !hs.offset.is_finite() || hs.normal.iter().any(|v| !v.is_finite()) {
                return Err(CliError::input(format!("{rp}.halfspaces[{h}]"), "must be finite"));
            }
        }
    }
    let n = n.ok_or_else(|| CliError::input(format!("{path}.regions"), "no monomials: the input dimension is undetermined"))?;
    if n == 0 || n > MAX_DIM {
        return Err(CliError::input(format!("{path}.regions"), format!("input dimension {n} is outside 1..={MAX_DIM}")));
    }
    for (r, reg) in regions.iter().enumerate() {
        for (h, hs) in reg.halfspaces.iter().enumerate() {
            check_vec(&format!("{path}.regions[{r}].halfspaces[{h}].normal"), &hs.normal, n)?;
        }
    }
    let regions = Arc::new(regions);
    // first region whose halfspaces normal·x <= offset all hold
    let locate = {
        let regions = regions.clone();
        move |x: &[f64]| {
            regions.iter().position(|reg| {
                reg.halfspaces.iter().all(|h| h.normal.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() <= h.offset)
            })
        }
    };
    let (l1, l2, l3) = (locate.clone(), locate.clone(), locate);
    let (r1, r2, r3) = (regions.clone(), regions.clone(), regions);
    let eval = move |x: &[f64]| match l1(x) {
        Some(r) => r1[r].components.iter().map(|c| c.iter().map(|m| mono_deriv(m, x, &[])).sum()).collect(),
        None => vec![f64::NAN; big],
    };
    let grad = move |x: &[f64]| {
        let mut e = vec![0.0; big * n];
        if let Some(r) = l2(x) {
            for (a, c) in r2[r].components.iter().enumerate() {
                for i in 0..n {
                    e[a * n + i] = c.iter().map(|m| mono_deriv(m, x, &[i])).sum();
                }
            }
        }
        // overflow surfaces through the value check on evaluation
        GradMatrix::new(big, n, e).unwrap_or_else(|_| GradMatrix::zeros(big, n))
    };
    let hess = move |x: &[f64]| {
        let comps: Vec<SymMatrix> = match l3(x) {
            Some(r) => r3[r]
                .components
                .iter()
                .map(|c| SymMatrix::from_fn(n, |i, j| c.iter().map(|m| mono_deriv(m, x, &[i, j])).sum()))
                .collect(),
            None => vec![SymMatrix::zeros(n); big],
        };
        HessTensor::from_components(&comps).unwrap_or_else(|_| HessTensor::zeros(big, n))
    };
    Ok(FnMap::new(n, big, eval).with_grad(grad).with_hess(hess).handle())
}

// ---------------------------------------------------------------------------
// Nonlinearities

pub fn build_nonlinearity(s: &NonlinearitySpec, dims: Dims, path: &str) -> CliResult<NonlinearityHandle> {
    let Dims { big, n } = dims;
    let g = match s.builtin.as_str() {
        "laplacian_power" => EigenFunction::laplacian_power(s.p),
        "max_eig_system" => EigenFunction::max_eig(),
        "min_eig_system" => EigenFunction::min_eig_power(s.p),
        "det_system" => EigenFunction::determinant(n),
        other if MAP_BUILTINS.contains(&other) => {
            return Err(CliError::input(format!("{path}.builtin"), format!("`{other}` names a map, not a nonlinearity")))
        }
        other => {
            return Err(CliError::input(
                format!("{path}.builtin"),
                format!("unknown builtin `{other}`; expected one of {NONLINEARITY_BUILTINS:?}"),
            ))
        }
    };
    if s.p > 4 {
        return Err(CliError::input(format!("{path}.p"), "p must be at most 4"));
    }
    let h = s.h.clone().unwrap_or_else(|| vec![0.0; big]);
    check_vec(&format!("{path}.h"), &h, big)?;
    if !s.scale.is_finite() || s.scale == 0.0 {
        return Err(CliError::input(format!("{path}.scale"), "scale must be finite and nonzero"));
    }
    let f = eigen_nonlinearity(n, vec![g; big], constant_h(h)).map_err(|e| CliError::input(path, e))?;
    let f: NonlinearityHandle = Arc::new(f);
    if s.scale == 1.0 {
        return Ok(f);
    }
    let (scale, domain) = (s.scale, f.hess_domain());
    let inner = f.clone();
    let mut scaled = FnNonlinearity::new(big, n, move |x, eta, p, hx| {
        inner.eval(x, eta, p, hx).into_iter().map(|v| scale * v).collect()
    });
    scaled.domain = domain;
    Ok(scaled.handle())
}
