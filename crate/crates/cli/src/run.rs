//! Execution of the checks listed in a problem specification.

use std::collections::BTreeMap;
use std::time::Instant;

use contact_core::contact::{is_contact_map, ConeSchedule, ContactCandidate};
use contact_core::ellipticity::{
    check_ellipticity_sampled, verify_contact_solution, ArgumentSampler, EllipticityOptions, EllipticityVerdict,
    SolutionOptions,
};
use contact_core::jets::{test_membership, JetCandidate, JetStatus, RadiiSchedule};
use contact_core::sampling::stream_id;
use contact_core::stability::{approximation_experiment, test_approx_jet, ResonantRadii};
use contact_core::tensor::Direction;
use contact_core::Error as CoreError;
use rayon::prelude::*;
use serde_json::json;

use crate::cases::kink_cases;
use crate::error::{CliError, CliResult};
use crate::report::{finite, CheckResult, DecayTable, RunReport, Verdict, Witness};
use crate::spec::{build_map, build_nonlinearity, CheckSpec, Expect, ProblemSpec};

/// Command-line overrides applied on top of the specification.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub decay_tol: Option<f64>,
}

/// Folds the overrides into the specification so that the report records
/// exactly what was run.
pub fn effective_spec(mut spec: ProblemSpec, o: RunOverrides) -> CliResult<ProblemSpec> {
    if let Some(s) = o.seed {
        spec.seed = s;
    }
    if let Some(t) = o.decay_tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(CliError::input("--tol", "tolerance must be positive and finite"));
        }
        spec.schedule.decay_tol = Some(t);
    }
    spec.validate()?;
    Ok(spec)
}

/// Seed of one check, derived from the spec seed and the check id so that
/// checks are independent of their order and of each other.
pub fn check_seed(seed: u64, id: &str) -> u64 {
    seed ^ stream_id(id)
}

/// Runs every check; checks execute in parallel and are merged in order.
pub fn run_spec(spec: &ProblemSpec) -> CliResult<RunReport> {
    let start = Instant::now();
    let results: Vec<CliResult<(CheckResult, f64)>> = (0..spec.checks.len())
        .into_par_iter()
        .map(|i| {
            let t = Instant::now();
            run_check(spec, i).map(|c| (c, t.elapsed().as_secs_f64()))
        })
        .collect();
    let mut checks = Vec::with_capacity(results.len());
    let mut times = BTreeMap::new();
    for r in results {
        let (c, secs) = r?;
        times.insert(c.id.clone(), secs);
        checks.push(c);
    }
    times.insert("total".into(), start.elapsed().as_secs_f64());
    Ok(RunReport::new(spec.seed, Some(spec.clone()), None, checks, times))
}

fn core_failure(path: &str, e: CoreError) -> Result<String, CliError> {
    match e {
        CoreError::Dimension(_) | CoreError::InvalidInput(_) | CoreError::Asymmetric { .. } | CoreError::MissingDerivatives(_) => {
            Err(CliError::input(path, e))
        }
        other => Ok(other.to_string()),
    }
}

/// Runs check `i`. Input problems surface as errors; numerical trouble
/// (non-finite values, internal disagreement, unverified inputs) makes the
/// check inconclusive.
pub fn run_check(spec: &ProblemSpec, i: usize) -> CliResult<CheckResult> {
    let c = &spec.checks[i];
    let id = c.id(i);
    let seed = check_seed(spec.seed, &id);
    let path = format!("checks[{i}]");
    let mut out = CheckResult {
        id: id.clone(),
        title: title(c).into(),
        verdict: Verdict::Inconclusive,
        margin: None,
        seed,
        details: json!({}),
        decay: vec![],
        witness: None,
    };
    match execute(spec, c, seed, &path, &mut out) {
        Ok(()) => Ok(out),
        Err(Failure::Input(e)) => Err(e),
        Err(Failure::Core(e)) => {
            let msg = core_failure(&path, e)?;
            out.verdict = Verdict::Inconclusive;
            out.details = json!({ "error": msg });
            out.decay.clear();
            out.witness = None;
            Ok(out)
        }
    }
}

fn title(c: &CheckSpec) -> &'static str {
    match c {
        CheckSpec::JetMembership { .. } => "contact jet membership of explicit candidates",
        CheckSpec::TGrid { .. } => "kink map jets against the closed-form description",
        CheckSpec::ContactMap { .. } => "contact map test",
        CheckSpec::Ellipticity { .. } => "sampled degenerate ellipticity",
        CheckSpec::ContactSolution { .. } => "contact solution verifier",
        CheckSpec::ApproxJet { .. } => "approximate jet membership",
        CheckSpec::Approximation { .. } => "stability of jets under mollification",
    }
}

enum Failure {
    Input(CliError),
    Core(CoreError),
}

impl From<CliError> for Failure {
    fn from(e: CliError) -> Self {
        Failure::Input(e)
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        Failure::Core(e)
    }
}

/// Outcome of a list of candidates with optional expectations.
struct Tally {
    definite_mismatch: Option<(JetCandidate, bool, JetStatus)>,
    inconclusive: usize,
    members: usize,
    non_members: usize,
    mismatches: usize,
}

fn status_name(s: JetStatus) -> &'static str {
    match s {
        JetStatus::Member => "member",
        JetStatus::NonMember => "non_member",
        JetStatus::Inconclusive => "inconclusive",
        JetStatus::HypothesisFailed => "hypothesis_failed",
    }
}

fn jet_check(
    u: &dyn contact_core::maps::VectorMap,
    cands: Vec<(String, JetCandidate, Option<bool>)>,
    s: &RadiiSchedule,
    out: &mut CheckResult,
) -> Result<(), Failure> {
    let verdicts: Vec<Result<_, CoreError>> = cands.par_iter().map(|(_, c, _)| test_membership(u, c, s)).collect();
    let mut tally = Tally { definite_mismatch: None, inconclusive: 0, members: 0, non_members: 0, mismatches: 0 };
    let mut rows = Vec::new();
    for ((label, c, expect), v) in cands.into_iter().zip(verdicts) {
        let v = v?;
        match v.status {
            JetStatus::Member => tally.members += 1,
            JetStatus::NonMember | JetStatus::HypothesisFailed => tally.non_members += 1,
            JetStatus::Inconclusive => tally.inconclusive += 1,
        }
        let definite = v.status != JetStatus::Inconclusive;
        let agrees = expect.map(|e| !definite || e == v.member);
        if agrees == Some(false) {
            tally.mismatches += 1;
            if tally.definite_mismatch.is_none() {
                tally.definite_mismatch = Some((c.clone(), expect.unwrap(), v.status));
            }
        }
        rows.push(json!({
            "label": label,
            "status": status_name(v.status),
            "expected_member": expect,
            "fitted_exponent": v.fitted_exponent.and_then(finite),
        }));
        out.decay.push(DecayTable::new(label, v.status, v.fitted_exponent, &v.decay_table));
    }
    out.verdict = if tally.mismatches > 0 {
        Verdict::Violated
    } else if tally.inconclusive > 0 || rows.is_empty() {
        Verdict::Inconclusive
    } else {
        Verdict::Passed
    };
    if let Some((candidate, expected_member, status)) = tally.definite_mismatch {
        out.witness = Some(Witness::Jet { candidate, expected_member, status });
    }
    out.details = json!({
        "candidates": rows,
        "members": tally.members,
        "non_members": tally.non_members,
        "inconclusive": tally.inconclusive,
        "mismatches": tally.mismatches,
        "decay_tol": s.decay_tol,
    });
    Ok(())
}

fn execute(spec: &ProblemSpec, c: &CheckSpec, seed: u64, path: &str, out: &mut CheckResult) -> Result<(), Failure> {
    let map = spec.build_map()?;
    let u = map.handle.clone();
    let s = spec.schedule_for(None);
    match c {
        CheckSpec::JetMembership { candidates, .. } => {
            let mut cands = Vec::new();
            for (k, js) in candidates.iter().enumerate() {
                for (m, (cand, expect)) in spec.jet_candidates(js, &map, &format!("{path}.candidates[{k}]"))?.into_iter().enumerate() {
                    cands.push((format!("c{k}.{m}"), cand, expect.map(|e| e == Expect::Member)));
                }
            }
            jet_check(u.as_ref(), cands, &s, out)
        }
        CheckSpec::TGrid { t, strata, .. } => {
            let k = map.kink.as_ref().ok_or_else(|| CliError::input(format!("{path}.kind"), "t_grid needs the example19 map"))?;
            let cands = kink_cases(k, t, *strata).into_iter().map(|(l, c, e)| (l, c, Some(e))).collect();
            jet_check(u.as_ref(), cands, &s, out)?;
            // members of the first-order grid, as t values
            let members: Vec<f64> = t
                .iter()
                .copied()
                .filter(|tv| {
                    out.details["candidates"].as_array().is_some_and(|rows| {
                        rows.iter().any(|r| r["label"] == format!("t={tv}/first") && r["status"] == "member")
                    })
                })
                .collect();
            out.details["first_order_members"] = json!(members);
            Ok(())
        }
        CheckSpec::ContactMap { psi, point, direction, order, expect, .. } => {
            let psi = build_map(psi, &format!("{path}.psi"))?;
            let x = spec.point_or_default(point.as_ref(), &format!("{path}.point"))?;
            let xi = Direction::normalized(direction)?;
            let cand = ContactCandidate::new(psi.handle, x, xi, *order)?;
            let v = is_contact_map(u.as_ref(), &cand, &ConeSchedule::default(), &s)?;
            out.verdict = match expect {
                Some(e) if *e != v.holds => Verdict::Violated,
                _ => Verdict::Passed,
            };
            if out.verdict == Verdict::Violated {
                out.witness = Some(Witness::ContactMap { expected: expect.unwrap(), observed: v.holds });
            }
            out.details = json!({ "holds": v.holds, "expected": expect, "verdict": serde_json::to_value(&v).unwrap_or_default() });
            Ok(())
        }
        CheckSpec::Ellipticity { nonlinearity, budget, .. } => {
            let f = build_nonlinearity(nonlinearity, spec.dims, &format!("{path}.nonlinearity"))?;
            let opts = EllipticityOptions { budget: budget.unwrap_or(10_000), seed, ..Default::default() };
            let rep = check_ellipticity_sampled(f.as_ref(), &ArgumentSampler::standard(spec.dims.n), &opts)?;
            out.verdict = match rep.verdict {
                EllipticityVerdict::CertifiedSampled => Verdict::Passed,
                EllipticityVerdict::Violated => Verdict::Violated,
                EllipticityVerdict::Inconclusive => Verdict::Inconclusive,
            };
            out.margin = rep.counterexample.as_ref().map(|ce| -ce.value);
            out.details = json!({
                "samples_used": rep.samples_used,
                "routes": rep.routes,
                "conversion_confirmed": rep.conversion_confirmed,
            });
            if let Some(ce) = rep.counterexample {
                out.witness = Some(Witness::Ellipticity {
                    nonlinearity: nonlinearity.clone(),
                    big: spec.dims.big,
                    small: spec.dims.n,
                    counterexample: ce,
                });
            }
            Ok(())
        }
        CheckSpec::ContactSolution { nonlinearity, .. } => {
            let f = build_nonlinearity(nonlinearity, spec.dims, &format!("{path}.nonlinearity"))?;
            let extra = match &spec.directions {
                Some(crate::spec::DirectionsSpec::Sphere(k)) => *k,
                _ => 4,
            };
            let opts = SolutionOptions { seed, random_directions: extra, ..Default::default() };
            let rep = verify_contact_solution(u.as_ref(), f.as_ref(), &spec.points, None, &s, &opts)?;
            out.verdict = if rep.evaluated == 0 {
                Verdict::Inconclusive
            } else if rep.consistent {
                Verdict::Passed
            } else {
                Verdict::Violated
            };
            out.margin = finite(rep.min_margin);
            // the worst violation is the witness
            let worst = rep.violations.iter().min_by(|a, b| a.value.total_cmp(&b.value)).cloned();
            out.details = json!({
                "evaluated": rep.evaluated,
                "skipped": rep.skipped,
                "violations": rep.violations.len(),
                "min_margin": finite(rep.min_margin),
            });
            if let Some(v) = worst {
                out.witness = Some(Witness::Solution { nonlinearity: nonlinearity.clone(), violation: v });
            }
            Ok(())
        }
        CheckSpec::ApproxJet { candidates, resonant, .. } => {
            let mut cands = Vec::new();
            for (k, a) in candidates.iter().enumerate() {
                let c = spec.approx_candidate(a, &format!("{path}.candidates[{k}]"))?;
                let res = resonant.as_ref().map(|r| match r.theta {
                    Some(theta) => ResonantRadii { theta, period: r.period.unwrap_or(std::f64::consts::TAU), count: r.count },
                    None => ResonantRadii::cosine_level(c.p.get(0, 0), r.count),
                });
                cands.push((format!("c{k}"), c, res, a.expect.map(|e| e == Expect::Member)));
            }
            let verdicts: Vec<Result<_, CoreError>> =
                cands.par_iter().map(|(_, c, r, _)| test_approx_jet(u.as_ref(), c, &s, r.as_ref())).collect();
            let mut rows = Vec::new();
            let (mut mismatches, mut inconclusive) = (0, 0);
            for ((label, c, res, expect), v) in cands.into_iter().zip(verdicts) {
                let v = v?;
                if v.status == JetStatus::Inconclusive {
                    inconclusive += 1;
                } else if expect.is_some_and(|e| e != v.member) {
                    mismatches += 1;
                    if out.witness.is_none() {
                        out.witness = Some(Witness::ApproxJet { candidate: c.clone(), resonant: res, expected_member: expect.unwrap(), member: v.member });
                    }
                }
                rows.push(json!({
                    "label": label,
                    "p": c.p.entries(),
                    "member": v.member,
                    "status": status_name(v.status),
                    "min_ratio": finite(v.min_ratio),
                    "expected_member": expect,
                }));
                out.decay.push(DecayTable::new(label, v.status, None, &v.table));
            }
            out.verdict = if mismatches > 0 {
                Verdict::Violated
            } else if inconclusive > 0 || rows.is_empty() {
                Verdict::Inconclusive
            } else {
                Verdict::Passed
            };
            out.details = json!({ "candidates": rows, "mismatches": mismatches, "inconclusive": inconclusive });
            Ok(())
        }
        CheckSpec::Approximation { jet, scales, hypothesis, expect, .. } => {
            let (cand, _) = spec.jet_candidates(jet, &map, &format!("{path}.jet"))?.remove(0);
            let hyp = hypothesis.as_ref().map(|h| spec.hypothesis(h, &format!("{path}.hypothesis"))).transpose()?;
            let rep = approximation_experiment(&u, &cand, scales, &s, hyp.as_ref())?;
            let exp = expect.unwrap_or_default();
            let mismatch = exp.along.is_some_and(|a| a != rep.along_converges) || exp.perp.is_some_and(|p| p != rep.perp_converges);
            out.verdict = if rep.inconclusive {
                Verdict::Inconclusive
            } else if mismatch {
                Verdict::Violated
            } else {
                Verdict::Passed
            };
            if mismatch && !rep.inconclusive {
                out.witness = Some(Witness::Approximation { expected: exp, along: rep.along_converges, perp: rep.perp_converges });
            }
            let last = rep.rows.last();
            out.details = json!({
                "along_converges": rep.along_converges,
                "along_rate": rep.along_rate.and_then(finite),
                "perp_converges": rep.perp_converges,
                "perp_rate": rep.perp_rate.and_then(finite),
                "hypothesis_verified": rep.hypothesis_verified,
                "final_along_p_error": last.map(|r| r.along_p_error),
                "final_along_x_error": last.map(|r| r.along_x_error),
                "final_perp_x_norm": last.map(|r| r.perp_x_norm),
                "rows": rep.rows,
            });
            Ok(())
        }
    }
}
