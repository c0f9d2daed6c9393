//! The built-in acceptance battery. Each row bundles one family of closed-form
//! results and reports a single verdict with its supporting counts.

use std::collections::BTreeMap;
use std::time::Instant;

use contact_core::contact::{
    contact_calculus_check, contact_map_from_jet, is_contact_map, jet_from_contact_map, strictify, ConeSchedule, ContactCandidate,
};
use contact_core::eigen::jacobi_eigen;
use contact_core::ellipticity::{
    check_ellipticity_sampled, check_quasilinear, replay, verify_contact_solution, ArgumentSampler, EllipticityOptions,
    EllipticityVerdict, SolutionOptions,
};
use contact_core::fixtures;
use contact_core::jets::{jet_enumerate_smooth, test_membership, test_structural, theorem31_forms_of, JetStatus, RadiiSchedule};
use contact_core::maps::{FnMap, MapHandle};
use contact_core::orderings::{is_positive, min_rank_one_value, vee_nonpos_hess, vee_nonpos_vector, CertifierOptions, RankOneVerdict};
use contact_core::sampling::{self, stream_rng};
use contact_core::spectrum::vee_spectrum;
use contact_core::stability::{approximation_experiment, test_approx_jet, ApproxJetCandidate, HyperplaneHypothesis, ResonantRadii};
use contact_core::tensor::{complement_projection, frame_expand, vee, BiForm, Direction, GradMatrix, HessTensor, SymMatrix};
use contact_core::{vecops, Error as CoreError};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cases::{battery_points, equivalence_cases, kink_cases, suite_kinks, t_grid};
use crate::error::{CliError, CliResult};
use crate::report::{finite, CheckResult, DecayTable, RunReport, Verdict, Witness};
use crate::run::check_seed;
use crate::spec::{build_nonlinearity, Dims, NonlinearitySpec};

pub const DEFAULT_SEED: u64 = 1;

/// Deliberate defects used to show that the battery notices them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Flip the sign of the smaller closed-form eigenvalue of ξ∨R.
    LambdaMinusSign,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Replaces the decay tolerance of every radii schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<Fault>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { seed: DEFAULT_SEED, decay_tol: None, fault: None }
    }
}

impl SuiteOptions {
    fn schedule(&self, n: usize) -> RadiiSchedule {
        let mut s = RadiiSchedule::for_dim(n);
        if let Some(t) = self.decay_tol {
            s.decay_tol = t;
        }
        s
    }

    fn deep_schedule(&self, n: usize) -> RadiiSchedule {
        RadiiSchedule { count: 24, ..self.schedule(n) }
    }
}

pub const ROW_IDS: [&str; 10] = [
    "vee-spectra",
    "induced-order-unanimity",
    "determinant-form-strictness",
    "kink-jet-oracle",
    "smooth-jet-rays",
    "jet-test-equivalence",
    "elliptic-systems",
    "classical-consistency",
    "contact-map-round-trip",
    "approximation-stability",
];

fn row_title(id: &str) -> &'static str {
    match id {
        "vee-spectra" => "closed-form spectrum of ξ∨R against a Jacobi solver",
        "induced-order-unanimity" => "equivalent forms of ξ∨v ≤ 0 and ξ∨𝐗 ≤ 0 agree",
        "determinant-form-strictness" => "rank-one positive but not positive determinant form",
        "kink-jet-oracle" => "kink map jets against the closed-form description",
        "smooth-jet-rays" => "classical jets and their rays on smooth maps",
        "jet-test-equivalence" => "membership, structural and decay-form tests agree",
        "elliptic-systems" => "eigenvalue systems are degenerate elliptic",
        "classical-consistency" => "classical solutions are contact solutions",
        "contact-map-round-trip" => "contact maps and jets correspond",
        "approximation-stability" => "approximate jets and stability under mollification",
        _ => "unknown row",
    }
}

/// Outcome of one row before it is wrapped into a check result.
struct Row {
    verdict: Verdict,
    margin: Option<f64>,
    details: Value,
    decay: Vec<DecayTable>,
    witness: Option<Witness>,
}

impl Row {
    fn new(ok: bool, details: Value) -> Self {
        let verdict = if ok { Verdict::Passed } else { Verdict::Violated };
        Self { verdict, margin: None, details, decay: vec![], witness: None }
    }

    fn margin(mut self, m: f64) -> Self {
        self.margin = finite(m);
        self
    }

    /// Records the first failing case as the witness.
    fn first_failure(mut self, failures: &[(String, Value)]) -> Self {
        if self.verdict == Verdict::Violated {
            if let Some((case, detail)) = failures.first() {
                self.witness = Some(Witness::SuiteCase { case: case.clone(), detail: detail.clone() });
            }
        }
        self
    }
}

/// Runs one row by id.
pub fn run_row(id: &str, opts: &SuiteOptions) -> CliResult<CheckResult> {
    let seed = check_seed(opts.seed, id);
    let run = match id {
        "vee-spectra" => vee_spectra(opts, seed),
        "induced-order-unanimity" => induced_orders(seed),
        "determinant-form-strictness" => determinant_strictness(),
        "kink-jet-oracle" => kink_oracle(opts),
        "smooth-jet-rays" => smooth_rays(opts, seed),
        "jet-test-equivalence" => jet_equivalence(opts, seed),
        "elliptic-systems" => elliptic_systems(seed),
        "classical-consistency" => classical_consistency(opts, seed),
        "contact-map-round-trip" => round_trip(opts, seed),
        "approximation-stability" => approximation_stability(opts, seed),
        other => return Err(CliError::input("--check", format!("unknown suite row `{other}`; expected one of {ROW_IDS:?}"))),
    };
    let row = run.unwrap_or_else(|e| Row {
        verdict: Verdict::Inconclusive,
        margin: None,
        details: json!({ "error": e.to_string() }),
        decay: vec![],
        witness: None,
    });
    // a row that finished with an inconclusive sub-verdict keeps it
    Ok(CheckResult {
        id: id.to_string(),
        title: row_title(id).into(),
        verdict: row.verdict,
        margin: row.margin,
        seed,
        details: row.details,
        decay: row.decay,
        witness: row.witness,
    })
}

/// Runs every row in order; rows parallelise internally.
pub fn run_suite(opts: &SuiteOptions) -> CliResult<RunReport> {
    let start = Instant::now();
    let mut checks = Vec::new();
    let mut times = BTreeMap::new();
    for id in ROW_IDS {
        let t = Instant::now();
        checks.push(run_row(id, opts)?);
        times.insert(id.to_string(), t.elapsed().as_secs_f64());
    }
    times.insert("total".into(), start.elapsed().as_secs_f64());
    Ok(RunReport::new(opts.seed, None, Some(opts.clone()), checks, times))
}

fn case_rng(seed: u64, i: usize) -> rand_chacha::ChaCha8Rng {
    stream_rng(seed, i as u64)
}

// ---------------------------------------------------------------------------
// Spectra

const SPECTRUM_TOL: f64 = 1e-10;

/// Largest relative deviation between the closed forms and the Jacobi
/// solver for one (ξ, R), with the eigenvector residual.
fn spectrum_case(fault: bool, seed: u64, i: usize) -> Result<(f64, f64), String> {
    let mut rng = case_rng(seed, i);
    let n = 2 + i % 4;
    let xi = sampling::direction(&mut rng, n);
    let g = sampling::normal_vec(&mut rng, n);
    let c = 1.0 + rng.random::<f64>();
    let r = match i % 10 {
        0 => vecops::scale(xi.as_slice(), c),
        1 => vecops::scale(xi.as_slice(), -c),
        2 => vecops::axpy(&vecops::scale(xi.as_slice(), c), 1e-9, &g),
        3 => vecops::axpy(&vecops::scale(xi.as_slice(), -c), 1e-9, &g),
        4 => vecops::scale(&g, 1e-8),
        5 => vecops::scale(&g, 1e6),
        _ => g,
    };
    let vs = vee_spectrum(&xi, &r).map_err(|e| e.to_string())?;
    let scale = vecops::norm(&r).max(1.0);
    let lm = if fault { -vs.lambda_minus } else { vs.lambda_minus };
    let mut closed = vec![0.0; n];
    closed[0] = lm;
    closed[n - 1] = vs.lambda_plus;
    closed.sort_by(f64::total_cmp);
    let s = vee(xi.as_slice(), &r).map_err(|e| e.to_string())?;
    let mut jac = jacobi_eigen(&s).eigenvalues;
    jac.sort_by(f64::total_cmp);
    let top = jac[n - 1];
    let mut err = closed.iter().zip(&jac).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    for m in [vs.max_closed, vs.max_signed, vs.max_minpm] {
        err = err.max((m - top).abs());
    }
    let resid = vs
        .spectrum
        .eigenvalues
        .iter()
        .zip(&vs.spectrum.eigenvectors)
        .map(|(l, v)| vecops::norm(&vecops::axpy(&s.mul_vec(v), -l, v)))
        .fold(0.0, f64::max);
    Ok((err / scale, resid / scale))
}

fn vee_spectra(opts: &SuiteOptions, seed: u64) -> Result<Row, CoreError> {
    const CASES: usize = 10_000;
    let fault = opts.fault == Some(Fault::LambdaMinusSign);
    let results: Vec<Result<(f64, f64), String>> = (0..CASES).into_par_iter().map(|i| spectrum_case(fault, seed, i)).collect();
    let (mut worst_eig, mut worst_vec) = (0.0f64, 0.0f64);
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok((e, v)) => {
                worst_eig = worst_eig.max(e);
                worst_vec = worst_vec.max(v);
                if e > SPECTRUM_TOL || v > SPECTRUM_TOL {
                    failures.push((format!("case-{i}"), json!({ "eigenvalue_error": e, "eigenvector_residual": v })));
                }
            }
            Err(msg) => failures.push((format!("case-{i}"), json!({ "error": msg }))),
        }
    }
    let details = json!({
        "cases": CASES,
        "failures": failures.len(),
        "max_eigenvalue_error": worst_eig,
        "max_eigenvector_residual": worst_vec,
        "tolerance": SPECTRUM_TOL,
    });
    Ok(Row::new(failures.is_empty(), details).margin(SPECTRUM_TOL - worst_eig.max(worst_vec)).first_failure(&failures))
}

// ---------------------------------------------------------------------------
// Induced orderings

/// A unit vector orthogonal to ξ (requires N ≥ 2).
fn orthogonal_unit(rng: &mut impl Rng, xi: &Direction) -> Vec<f64> {
    loop {
        let w = xi.perp(&sampling::normal_vec(rng, xi.dim()));
        let nw = vecops::norm(&w);
        if nw > 1e-3 {
            return vecops::scale(&w, 1.0 / nw);
        }
    }
}

fn induced_orders(seed: u64) -> Result<Row, CoreError> {
    const PER_SIGN: usize = 500;
    let copts = CertifierOptions::default();
    // vectors: v = −cξ holds; v = cξ or −cξ + w⊥ fails
    let vec_cases: Vec<(bool, Result<bool, String>)> = (0..2 * PER_SIGN)
        .into_par_iter()
        .map(|i| {
            let mut rng = case_rng(seed, i);
            let big = 1 + i % 4;
            let xi = sampling::direction(&mut rng, big);
            let c = 0.1 + 2.0 * rng.random::<f64>();
            let positive = i < PER_SIGN;
            let v = if positive {
                vecops::scale(xi.as_slice(), -c)
            } else if big == 1 || i % 2 == 0 {
                vecops::scale(xi.as_slice(), c)
            } else {
                let w = orthogonal_unit(&mut rng, &xi);
                vecops::axpy(&vecops::scale(xi.as_slice(), -c), 0.1 + rng.random::<f64>(), &w)
            };
            (positive, vee_nonpos_vector(&xi, &v, copts.tol).map(|r| r.holds).map_err(|e| e.to_string()))
        })
        .collect();
    // Hessians: ξ⊗K with K ⪯ 0 holds; a positive direction in K or a ξ^⊥ part fails
    let hess_cases: Vec<(bool, Result<bool, String>)> = (0..2 * PER_SIGN)
        .into_par_iter()
        .map(|i| {
            let mut rng = case_rng(seed, 10_000 + i);
            let (big, small) = (1 + i % 3, 1 + (i / 3) % 3);
            let xi = sampling::direction(&mut rng, big);
            let size = 0.1 + 2.0 * rng.random::<f64>();
            let psd = sampling::psd_matrix(&mut rng, small, size);
            let positive = i < PER_SIGN;
            let x = if positive {
                HessTensor::outer(xi.as_slice(), &psd.scale(-1.0))
            } else if big == 1 || i % 2 == 0 {
                let e = sampling::unit_vec(&mut rng, small);
                let bump = psd.max_eig() + 0.1 + rng.random::<f64>();
                HessTensor::outer(xi.as_slice(), &psd.scale(-1.0).add(&SymMatrix::outer_self(&e).scale(bump)))
            } else {
                let w = orthogonal_unit(&mut rng, &xi);
                let mut m = sampling::gaussian_sym(&mut rng, small);
                if m.frob_norm() < 0.1 {
                    m = SymMatrix::identity(small);
                }
                HessTensor::outer(xi.as_slice(), &psd.scale(-1.0)).add(&HessTensor::outer(&w, &m))
            };
            (positive, vee_nonpos_hess(&xi, &x, &copts).map(|r| r.holds).map_err(|e| e.to_string()))
        })
        .collect();
    let mut failures = Vec::new();
    let mut disagreements = 0;
    for (kind, cases) in [("vector", &vec_cases), ("hessian", &hess_cases)] {
        for (i, (expect, got)) in cases.iter().enumerate() {
            match got {
                Ok(h) if h == expect => {}
                Ok(h) => failures.push((format!("{kind}-{i}"), json!({ "expected": expect, "holds": h }))),
                Err(msg) => {
                    disagreements += 1;
                    failures.push((format!("{kind}-{i}"), json!({ "error": msg })));
                }
            }
        }
    }
    let details = json!({
        "vector_cases": vec_cases.len(),
        "hessian_cases": hess_cases.len(),
        "positive_cases": 2 * PER_SIGN,
        "negative_cases": 2 * PER_SIGN,
        "disagreements": disagreements,
        "misclassified": failures.len() - disagreements,
    });
    Ok(Row::new(failures.is_empty(), details).first_failure(&failures))
}

// ---------------------------------------------------------------------------
// Determinant form

fn determinant_strictness() -> Result<Row, CoreError> {
    let d = BiForm::determinant_form();
    let copts = CertifierOptions::default();
    let unit = |deg: usize| {
        let a = (deg as f64).to_radians();
        [a.cos(), a.sin()]
    };
    let grid_min = (0..360)
        .into_par_iter()
        .map(|i| (0..360).map(|j| d.rank_one_value(&unit(i), &unit(j))).fold(f64::INFINITY, f64::min))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let cert = min_rank_one_value(&d, &copts)?;
    let flat_min = d.flatten().min_eig();
    let id = BiForm::identity(2, 2);
    let id_cert = min_rank_one_value(&id, &copts)?;
    let neg_cert = min_rank_one_value(&id.neg(), &copts)?;
    let checks = [
        ("grid_min", grid_min >= -1e-9),
        ("certified_rank_one_positive", cert.verdict == RankOneVerdict::Positive),
        ("flattened_min_eig", flat_min <= -0.4),
        ("not_positive", !is_positive(&d)),
        ("identity_positive", is_positive(&id) && id_cert.verdict == RankOneVerdict::Positive),
        ("negated_identity_indefinite", !is_positive(&id.neg()) && neg_cert.verdict == RankOneVerdict::Indefinite),
    ];
    let failures: Vec<(String, Value)> = checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| (n.to_string(), json!({}))).collect();
    let details = json!({
        "grid_points": 360 * 360,
        "grid_min": grid_min,
        "certifier_min": cert.min_value,
        "flattened_min_eig": flat_min,
        "identity_certifier_min": id_cert.min_value,
        "negated_identity_certifier_min": neg_cert.min_value,
        "checks": checks.iter().map(|(n, ok)| json!({ "name": n, "ok": ok })).collect::<Vec<_>>(),
    });
    Ok(Row::new(failures.is_empty(), details).margin(grid_min + 1e-9).first_failure(&failures))
}

// ---------------------------------------------------------------------------
// Kink jets

fn kink_oracle(opts: &SuiteOptions) -> Result<Row, CoreError> {
    let s = opts.schedule(1);
    let kinks = suite_kinks();
    let cases: Vec<(usize, String, _, bool)> = kinks
        .iter()
        .enumerate()
        .flat_map(|(k, kink)| kink_cases(kink, &t_grid(), true).into_iter().map(move |(l, c, e)| (k, l, c, e)))
        .collect();
    let verdicts: Vec<Result<_, CoreError>> = cases.par_iter().map(|(k, _, c, _)| test_membership(kinks[*k].map().as_ref(), c, &s)).collect();
    let mut failures = Vec::new();
    let mut inconclusive = 0;
    let mut members: Vec<Vec<f64>> = vec![vec![]; kinks.len()];
    let mut decay = Vec::new();
    for ((k, label, c, expect), v) in cases.iter().zip(verdicts) {
        let v = v?;
        if v.status == JetStatus::Inconclusive {
            inconclusive += 1;
        } else if v.member != *expect {
            failures.push((format!("kink{k}/{label}"), json!({ "expected_member": expect, "status": v.status, "p": c.p.entries() })));
        }
        if let Some(t) = label.strip_suffix("/first").and_then(|l| l.strip_prefix("t=")) {
            if v.member {
                members[*k].push(t.parse::<f64>().unwrap_or(f64::NAN));
            }
            if *k == 0 {
                decay.push(DecayTable::new(label.clone(), v.status, v.fitted_exponent, &v.decay_table));
            }
        }
    }
    let details = json!({
        "cases": cases.len(),
        "mismatches": failures.len(),
        "inconclusive": inconclusive,
        "decay_tol": s.decay_tol,
        "first_order_member_t": members,
    });
    let mut row = Row::new(failures.is_empty(), details).first_failure(&failures);
    if row.verdict == Verdict::Passed && inconclusive > 0 {
        row.verdict = Verdict::Inconclusive;
    }
    row.decay = decay;
    Ok(row)
}

// ---------------------------------------------------------------------------
// Smooth maps

const RAY_SIZES: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];

fn smooth_rays(opts: &SuiteOptions, seed: u64) -> Result<Row, CoreError> {
    let copts = CertifierOptions::default();
    let jobs: Vec<(usize, String, MapHandle, Vec<f64>)> = battery_points()
        .into_iter()
        .flat_map(|(name, u, x)| (0..8).map(move |k| (k, name.clone(), u.clone(), x.clone())))
        .collect();
    let results: Vec<Result<Vec<(String, bool, JetStatus)>, CoreError>> = jobs
        .par_iter()
        .enumerate()
        .map(|(j, (k, name, u, x))| {
            let s = opts.schedule(x.len());
            let mut rng = case_rng(seed, j);
            let xi = sampling::direction(&mut rng, u.output_dim());
            let mut out = Vec::new();
            let mut rays = Vec::new();
            for (sign, dir) in [("+", xi.clone()), ("-", xi.neg())] {
                let fam = jet_enumerate_smooth(u.as_ref(), x, &dir)?;
                let classical = fam.classical();
                let v = test_membership(u.as_ref(), &classical, &s)?;
                out.push((format!("{name}/xi{k}{sign}/classical"), v.member, v.status));
                let mut xs = Vec::new();
                for size in RAY_SIZES {
                    let c = fam.candidate(&sampling::psd_matrix(&mut rng, x.len(), size))?;
                    let v = test_membership(u.as_ref(), &c, &s)?;
                    out.push((format!("{name}/xi{k}{sign}/ray{size}"), v.member, v.status));
                    xs.push((v.member, c.x.expect("second order")));
                }
                rays.push(xs);
            }
            // both signs passing forces ξ∨(𝐘 − 𝐗) ≤ 0
            for (m, ((pa, xa), (pb, xb))) in rays[0].iter().zip(&rays[1]).enumerate() {
                if *pa && *pb {
                    let v = vee_nonpos_hess(&xi, &xb.sub(xa), &copts)?;
                    out.push((format!("{name}/xi{k}/two_sided{m}"), v.holds, JetStatus::Member));
                }
            }
            Ok(out)
        })
        .collect();
    let mut failures = Vec::new();
    let (mut total, mut inconclusive, mut two_sided) = (0, 0, 0);
    for r in results {
        for (label, ok, status) in r? {
            total += 1;
            two_sided += label.contains("two_sided") as usize;
            if status == JetStatus::Inconclusive {
                inconclusive += 1;
            } else if !ok {
                failures.push((label, json!({ "status": status })));
            }
        }
    }
    let details = json!({
        "fixtures": 10,
        "directions_per_fixture": 8,
        "checks": total,
        "two_sided_checks": two_sided,
        "failures": failures.len(),
        "inconclusive": inconclusive,
    });
    let mut row = Row::new(failures.is_empty(), details).first_failure(&failures);
    if row.verdict == Verdict::Passed && inconclusive > 0 {
        row.verdict = Verdict::Inconclusive;
    }
    Ok(row)
}

fn jet_equivalence(opts: &SuiteOptions, seed: u64) -> Result<Row, CoreError> {
    let cases = equivalence_cases(seed);
    let results: Vec<Result<(bool, bool, [bool; 4], bool, JetStatus), CoreError>> = cases
        .par_iter()
        .map(|(name, u, c)| {
            // the Hölder remainder decays like r^½ and needs the finer radii
            let s = if name.starts_with("holder") { opts.deep_schedule(c.small()) } else { opts.schedule(c.small()) };
            let a = test_membership(u.as_ref(), c, &s)?;
            let b = test_structural(u.as_ref(), c, &s)?;
            let f = theorem31_forms_of(u.as_ref(), c, &s)?;
            Ok((a.member, b.member, f.holds(), f.unanimous(), a.status))
        })
        .collect();
    let mut failures = Vec::new();
    let mut members = 0;
    let mut inconclusive = Vec::new();
    for ((name, _, _), r) in cases.iter().zip(results) {
        let (a, b, forms, unanimous, status) = r?;
        members += a as usize;
        if status == JetStatus::Inconclusive {
            inconclusive.push(name.clone());
        }
        if a != b || !unanimous || forms[0] != a {
            failures.push((name.clone(), json!({ "membership": a, "structural": b, "forms": forms })));
        }
    }
    let details = json!({
        "fixtures": cases.len(),
        "members": members,
        "non_members": cases.len() - members,
        "inconclusive": inconclusive,
        "disagreements": failures.len(),
    });
    let mut row = Row::new(failures.is_empty(), details).first_failure(&failures);
    if row.verdict == Verdict::Passed && !inconclusive.is_empty() {
        row.verdict = Verdict::Inconclusive;
    }
    Ok(row)
}

// ---------------------------------------------------------------------------
// Ellipticity

/// A builtin system with power exponent 1 (p = 0).
fn system(builtin: &str, h: Option<Vec<f64>>, scale: f64) -> NonlinearitySpec {
    NonlinearitySpec { builtin: builtin.into(), p: 0, h, scale }
}

fn input_failure(e: CliError) -> CoreError {
    CoreError::InvalidInput(e.to_string())
}

/// Random Ξ: a Gram form, a generic symmetric form or a rank-one positive
/// form with a determinant part.
fn random_biform(rng: &mut impl Rng, i: usize) -> BiForm {
    let (big, small) = (1 + i % 3, 1 + (i / 3) % 3);
    let d = big * small;
    match i % 4 {
        0 => {
            let g: Vec<Vec<f64>> = (0..d).map(|_| sampling::normal_vec(rng, d)).collect();
            BiForm::from_fn(big, small, |a, k, b, l| {
                let (p, q) = (a * small + k, b * small + l);
                (0..d).map(|m| g[p][m] * g[q][m]).sum()
            })
        }
        1 if big == 2 && small == 2 => BiForm::identity(2, 2).scale(0.1).add(&BiForm::determinant_form().scale(2.0 * rng.random::<f64>() - 1.0)),
        _ => {
            let m = sampling::gaussian_sym(rng, d);
            BiForm::from_fn(big, small, |a, k, b, l| m.get(a * small + k, b * small + l))
        }
    }
}

fn elliptic_systems(seed: u64) -> Result<Row, CoreError> {
    const BUDGET: usize = 10_000;
    let mut jobs = Vec::new();
    for n in [2usize, 3] {
        for b in ["laplacian_power", "max_eig_system", "min_eig_system", "det_system"] {
            jobs.push((n, system(b, Some(vec![1.0, -1.0]), 1.0)));
        }
    }
    let runs: Vec<Result<(String, EllipticityVerdict, usize), CoreError>> = jobs
        .par_iter()
        .enumerate()
        .map(|(j, (n, spec))| {
            let f = build_nonlinearity(spec, Dims { big: 2, n: *n }, "suite").map_err(input_failure)?;
            let o = EllipticityOptions { budget: BUDGET, seed: seed.wrapping_add(j as u64), ..Default::default() };
            let r = check_ellipticity_sampled(f.as_ref(), &ArgumentSampler::standard(*n), &o)?;
            Ok((format!("{}/n{n}", spec.builtin), r.verdict, r.samples_used))
        })
        .collect();
    let mut failures = Vec::new();
    let mut systems = Vec::new();
    for r in runs {
        let (name, verdict, used) = r?;
        if verdict != EllipticityVerdict::CertifiedSampled {
            failures.push((name.clone(), json!({ "verdict": verdict })));
        }
        systems.push(json!({ "system": name, "verdict": verdict, "samples": used }));
    }
    // the negated Laplacian must be caught, and its witness must replay
    let neg = system("laplacian_power", Some(vec![1.0, -1.0]), -1.0);
    let f = build_nonlinearity(&neg, Dims { big: 2, n: 2 }, "suite").map_err(input_failure)?;
    let rep = check_ellipticity_sampled(f.as_ref(), &ArgumentSampler::standard(2), &EllipticityOptions { budget: BUDGET, seed, ..Default::default() })?;
    let replayed = rep.counterexample.as_ref().map(|ce| replay(f.as_ref(), ce));
    let caught = rep.verdict == EllipticityVerdict::Violated && replayed.is_some_and(|v| v > 0.0) && rep.conversion_confirmed == Some(true);
    if !caught {
        failures.push(("negated_laplacian".into(), json!({ "verdict": rep.verdict, "replayed": replayed })));
    }
    // two routes on constant-coefficient quasilinear maps
    let quasi: Vec<Result<bool, String>> = (0..500)
        .into_par_iter()
        .map(|i| {
            let mut rng = case_rng(seed, 100 + i);
            let a = random_biform(&mut rng, i);
            check_quasilinear(&a, seed.wrapping_add(i as u64)).map(|r| r.verdict == EllipticityVerdict::CertifiedSampled).map_err(|e| e.to_string())
        })
        .collect();
    let mut quasi_elliptic = 0;
    for (i, q) in quasi.iter().enumerate() {
        match q {
            Ok(e) => quasi_elliptic += *e as usize,
            Err(msg) => failures.push((format!("quasilinear-{i}"), json!({ "error": msg }))),
        }
    }
    let details = json!({
        "budget": BUDGET,
        "systems": systems,
        "negated_laplacian": {
            "verdict": rep.verdict,
            "replayed_violation": replayed,
            "conversion_confirmed": rep.conversion_confirmed,
        },
        "quasilinear_forms": quasi.len(),
        "quasilinear_elliptic": quasi_elliptic,
        "failures": failures.len(),
    });
    let mut row = Row::new(failures.is_empty(), details).first_failure(&failures);
    if row.verdict == Verdict::Passed {
        if let Some(ce) = rep.counterexample {
            row.witness = Some(Witness::Ellipticity { nonlinearity: neg, big: 2, small: 2, counterexample: ce });
        }
    }
    Ok(row)
}

/// u(x) = (|x|², |x|²) on the plane with exact derivatives.
pub fn double_paraboloid() -> MapHandle {
    FnMap::new(2, 2, |x| {
        let r = vecops::dot(x, x);
        vec![r, r]
    })
    .with_grad(|x| GradMatrix::from_rows(&[vecops::scale(x, 2.0), vecops::scale(x, 2.0)]).expect("finite"))
    .with_hess(|_| {
        let two = SymMatrix::identity(2).scale(2.0);
        HessTensor::from_components(&[two.clone(), two]).expect("symmetric")
    })
    .handle()
}

pub const CONSISTENCY_POINTS: [[f64; 2]; 3] = [[0.3, -0.2], [0.0, 0.0], [-0.5, 0.4]];

fn classical_consistency(opts: &SuiteOptions, seed: u64) -> Result<Row, CoreError> {
    let u = double_paraboloid();
    let points: Vec<Vec<f64>> = CONSISTENCY_POINTS.iter().map(|p| p.to_vec()).collect();
    let s = opts.schedule(2);
    let sopts = SolutionOptions { seed, ..Default::default() };
    let dims = Dims { big: 2, n: 2 };
    let good = system("laplacian_power", Some(vec![4.0, 4.0]), 1.0);
    let f = build_nonlinearity(&good, dims, "suite").map_err(input_failure)?;
    let ok = verify_contact_solution(u.as_ref(), f.as_ref(), &points, None, &s, &sopts)?;
    let bad = system("laplacian_power", Some(vec![4.0, 5.0]), 1.0);
    let g = build_nonlinearity(&bad, dims, "suite").map_err(input_failure)?;
    let mutant = verify_contact_solution(u.as_ref(), g.as_ref(), &points, None, &s, &sopts)?;
    let d2u = u.hess(&points[0]).expect("analytic");
    let hit = mutant.violations.iter().find(|v| {
        vecops::norm(&vecops::sub(&v.xi, &[0.0, 1.0])) < 1e-12 && v.hx.as_ref().is_some_and(|h| h.sub(&d2u).norm() < 1e-12) && v.value <= -0.9
    });
    let mut failures = Vec::new();
    if !(ok.consistent && ok.min_margin >= -1e-8) {
        failures.push(("h=(4,4)".to_string(), json!({ "min_margin": finite(ok.min_margin), "violations": ok.violations.len() })));
    }
    if mutant.consistent || hit.is_none() {
        failures.push(("h=(4,5)".to_string(), json!({ "consistent": mutant.consistent, "min_margin": finite(mutant.min_margin) })));
    }
    let details = json!({
        "points": points,
        "consistent_min_margin": finite(ok.min_margin),
        "consistent_evaluated": ok.evaluated,
        "mutant_min_margin": finite(mutant.min_margin),
        "mutant_violations": mutant.violations.len(),
        "mutant_witness_value": hit.map(|v| v.value),
    });
    let mut row = Row::new(failures.is_empty(), details).margin(ok.min_margin).first_failure(&failures);
    if row.verdict == Verdict::Passed {
        if let Some(v) = hit {
            row.witness = Some(Witness::Solution { nonlinearity: bad, violation: v.clone() });
        }
    }
    Ok(row)
}

// ---------------------------------------------------------------------------
// Contact maps

fn round_trip(opts: &SuiteOptions, seed: u64) -> Result<Row, CoreError> {
    let cones = ConeSchedule::default();
    let battery: Vec<(String, MapHandle, Vec<f64>)> = fixtures::smooth_battery()
        .into_iter()
        .map(|(name, m)| {
            let x = (0..m.input_dim()).map(|i| 0.2 - 0.1 * i as f64).collect();
            (name, m, x)
        })
        .collect();
    let results: Vec<Result<Vec<(String, bool)>, CoreError>> = battery
        .par_iter()
        .enumerate()
        .map(|(j, (name, u, x))| {
            let s = opts.schedule(x.len());
            let mut rng = case_rng(seed, j);
            let xi = sampling::direction(&mut rng, u.output_dim());
            let fam = jet_enumerate_smooth(u.as_ref(), x, &xi)?;
            let mut out = Vec::new();
            for (label, jc) in [("classical", fam.classical()), ("ray", fam.candidate(&sampling::psd_matrix(&mut rng, x.len(), 1.0))?)] {
                let c = contact_map_from_jet(u, &jc, &s)?;
                out.push((format!("{name}/{label}/contact"), is_contact_map(u.as_ref(), &c, &cones, &s)?.holds));
                let back = jet_from_contact_map(&c)?;
                let same = back.p.sub(&jc.p).norm() < 1e-8
                    && match (&back.x, &jc.x) {
                        (Some(a), Some(b)) => a.sub(b).norm() < 1e-8,
                        _ => false,
                    };
                out.push((format!("{name}/{label}/identity"), same));
            }
            // a strict contact map forces the jet relations
            let same = ContactCandidate::new(u.clone(), x.clone(), xi.clone(), 2)?;
            let rep = contact_calculus_check(u, &strictify(&same, 0.5)?, &cones, &s)?;
            out.push((format!("{name}/strict_forward"), rep.consistent && rep.contact.holds));
            Ok(out)
        })
        .collect();
    let mut failures = Vec::new();
    let mut total = 0;
    for r in results {
        for (label, ok) in r? {
            total += 1;
            if !ok {
                failures.push((label, json!({})));
            }
        }
    }
    // the Hölder well and its quadratic contact map
    let holder = fixtures::holder_well(0.5);
    let psi = ContactCandidate::new(fixtures::perp_parabola(1.0), vec![0.0], Direction::basis(2, 0), 2)?;
    let holder_ok = is_contact_map(holder.as_ref(), &psi, &cones, &opts.deep_schedule(1))?.holds;
    if !holder_ok {
        failures.push(("holder_well/perp_parabola".into(), json!({})));
    }
    let details = json!({
        "jets": 2 * battery.len(),
        "checks": total + 1,
        "failures": failures.len(),
        "holder_contact_map": holder_ok,
    });
    Ok(Row::new(failures.is_empty(), details).first_failure(&failures))
}

// ---------------------------------------------------------------------------
// Stability

/// Scales of the mollification sweep; the last one keeps 2ε below 1e-2.
pub const APPROX_SCALES: [f64; 4] = [0.04, 0.02, 0.01, 0.004];

fn approximation_stability(opts: &SuiteOptions, seed: u64) -> Result<Row, CoreError> {
    let mut failures = Vec::new();
    // oscillating line: accepted slopes form [−1, 1] up to the grid step
    let u = fixtures::oscillating_line();
    let s = opts.schedule(1);
    let grid: Vec<f64> = (-30..=30).map(|k| k as f64 * 0.05).collect();
    let accepted: Vec<Result<(f64, bool, JetStatus), CoreError>> = grid
        .par_iter()
        .map(|&p| {
            let c = ApproxJetCandidate::first(vec![0.0], GradMatrix::new(1, 1, vec![p])?)?;
            let v = test_approx_jet(u.as_ref(), &c, &s, Some(&ResonantRadii::cosine_level(p, 8)))?;
            Ok((p, v.member, v.status))
        })
        .collect();
    let mut members = Vec::new();
    let mut inconclusive = 0;
    for a in accepted {
        let (p, m, st) = a?;
        inconclusive += (st == JetStatus::Inconclusive) as usize;
        if m {
            members.push(p);
        }
    }
    let (lo, hi) = (members.first().copied(), members.last().copied());
    let interval_ok = match (lo, hi) {
        (Some(lo), Some(hi)) => {
            (lo + 1.0).abs() <= 0.05 + 1e-12 && (hi - 1.0).abs() <= 0.05 + 1e-12 && members.len() == ((hi - lo) / 0.05).round() as usize + 1
        }
        _ => false,
    };
    if !interval_ok {
        failures.push(("oscillating_line".to_string(), json!({ "accepted": members })));
    }
    // Hölder well: (P_m, ξᵀ𝐗_m) converge, ξ^⊥𝐗_m stays 0 against a target of 2k
    let holder = fixtures::holder_well(0.5);
    let xi = Direction::basis(2, 0);
    let jet = contact_core::jets::JetCandidate::second(vec![0.0], xi.clone(), GradMatrix::zeros(2, 1), HessTensor::new(2, 1, vec![0.0, 2.0])?)?;
    let hyp = HyperplaneHypothesis { e: xi, q: GradMatrix::zeros(2, 1) };
    let rep = approximation_experiment(&holder, &jet, &APPROX_SCALES, &opts.deep_schedule(1), Some(&hyp))?;
    let last = rep.rows.last();
    let final_along = last.map(|r| r.along_p_error.max(r.along_x_error));
    let perp_zero = rep.rows.iter().all(|r| r.perp_x_norm == 0.0);
    let perp_gap = last.map(|r| r.perp_x_error);
    let approx_ok = !rep.inconclusive
        && rep.along_converges
        && !rep.perp_converges
        && final_along.is_some_and(|e| e < 1e-2)
        && perp_zero
        && perp_gap.is_some_and(|g| (g - 2.0).abs() < 1e-9);
    if !approx_ok {
        failures.push((
            "holder_well/approximation".to_string(),
            json!({ "along": rep.along_converges, "perp": rep.perp_converges, "final_along_error": final_along, "perp_x_error": perp_gap }),
        ));
    }
    // frame expansion reconstructs a
    let frames: Vec<Result<f64, CoreError>> = (0..1000)
        .into_par_iter()
        .map(|i| {
            let mut rng = case_rng(seed, i);
            let n = 2 + i % 4;
            let xi = sampling::direction(&mut rng, n);
            let eta = loop {
                let e = sampling::direction(&mut rng, n);
                if xi.along(e.as_slice()).abs() < 0.99 {
                    break e;
                }
            };
            let a = sampling::normal_vec(&mut rng, n);
            let pi = complement_projection(&xi, &eta)?;
            let (l, m, pa) = frame_expand(&a, &xi, &eta, &pi)?;
            let rebuilt = vecops::add(&vecops::axpy(&vecops::scale(xi.as_slice(), l), m, eta.as_slice()), &pa);
            Ok(vecops::norm(&vecops::sub(&rebuilt, &a)) / vecops::norm(&a).max(1.0))
        })
        .collect();
    let mut frame_max = 0.0f64;
    for f in frames {
        frame_max = frame_max.max(f?);
    }
    if frame_max >= 1e-12 {
        failures.push(("frame_expand".to_string(), json!({ "residual": frame_max })));
    }
    let details = json!({
        "slope_grid_step": 0.05,
        "accepted_interval": [lo, hi],
        "inconclusive_slopes": inconclusive,
        "scales": APPROX_SCALES,
        "along_converges": rep.along_converges,
        "perp_converges": rep.perp_converges,
        "hypothesis_verified": rep.hypothesis_verified,
        "final_along_error": final_along,
        "perp_x_norm_zero": perp_zero,
        "final_perp_x_error": perp_gap,
        "frames": 1000,
        "frame_residual": frame_max,
    });
    Ok(Row::new(failures.is_empty(), details).first_failure(&failures))
}
