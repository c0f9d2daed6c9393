//! Re-running a recorded check and re-confirming its witness.

use contact_core::ellipticity::replay as replay_counterexample;
use contact_core::jets::test_membership;
use contact_core::maps::MapHandle;
use contact_core::stability::test_approx_jet;
use contact_core::vecops;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::report::{CheckResult, RunReport, Verdict, Witness};
use crate::run::run_check;
use crate::spec::{build_nonlinearity, Dims, ProblemSpec};
use crate::suite::{double_paraboloid, run_row};

#[derive(Clone, Debug, Serialize)]
pub struct ReplayOutcome {
    pub id: String,
    pub verdict: Verdict,
    /// The rerun serialises to exactly the recorded result.
    pub reproduced: bool,
    /// The witness still shows what it claims; `None` when there is none.
    pub witness_confirmed: Option<bool>,
    pub notes: Vec<String>,
}

impl ReplayOutcome {
    /// Violations additionally need a confirmed witness.
    pub fn success(&self) -> bool {
        let witness_ok = match (self.verdict, self.witness_confirmed) {
            (Verdict::Violated, c) => c == Some(true),
            (_, c) => c != Some(false),
        };
        self.reproduced && witness_ok
    }

    pub fn exit_code(&self) -> i32 {
        if self.success() {
            0
        } else {
            1
        }
    }
}

/// Reads a report and replays the check `id`.
pub fn replay_text(report: &str, id: &str) -> CliResult<ReplayOutcome> {
    let r: RunReport = serde_json::from_str(report).map_err(|e| CliError::from_json(&e))?;
    replay_report(&r, id)
}

pub fn replay_report(r: &RunReport, id: &str) -> CliResult<ReplayOutcome> {
    let original = r.check(id).ok_or_else(|| {
        let ids: Vec<&str> = r.checks.iter().map(|c| c.id.as_str()).collect();
        CliError::input("--check", format!("no check `{id}` in the report; available: {ids:?}"))
    })?;
    let (rerun, map) = match (&r.spec, &r.suite) {
        (Some(spec), _) => {
            spec.validate()?;
            let i = (0..spec.checks.len())
                .find(|&i| spec.checks[i].id(i) == id)
                .ok_or_else(|| CliError::input("--check", format!("`{id}` is not in the embedded specification")))?;
            (run_check(spec, i)?, Some(spec.build_map()?.handle))
        }
        (None, Some(opts)) => (run_row(id, opts)?, None),
        (None, None) => return Err(CliError::input("report", "the report embeds neither a specification nor suite options")),
    };
    let reproduced = serde_json::to_string(&rerun).ok() == serde_json::to_string(original).ok();
    let mut notes = Vec::new();
    if !reproduced {
        notes.push(diff_note(original, &rerun));
    }
    let witness_confirmed = original.witness.as_ref().map(|w| match confirm(w, r.spec.as_ref(), map.as_ref()) {
        Ok(msg) => {
            notes.extend(msg);
            true
        }
        Err(msg) => {
            notes.push(msg);
            false
        }
    });
    Ok(ReplayOutcome { id: id.to_string(), verdict: original.verdict, reproduced, witness_confirmed, notes })
}

fn diff_note(a: &CheckResult, b: &CheckResult) -> String {
    if a.verdict != b.verdict {
        format!("verdict changed from {:?} to {:?}", a.verdict, b.verdict)
    } else {
        "verdict unchanged but the recorded details differ".into()
    }
}

/// Checks the witness independently of the rerun; the error explains why it
/// no longer holds.
fn confirm(w: &Witness, spec: Option<&ProblemSpec>, map: Option<&MapHandle>) -> Result<Option<String>, String> {
    match w {
        Witness::Ellipticity { nonlinearity, big, small, counterexample } => {
            let f = match build_nonlinearity(nonlinearity, Dims { big: *big, n: *small }, "witness.nonlinearity") {
                Ok(f) => f,
                Err(e) => return Err(e.to_string()),
            };
            let v = replay_counterexample(f.as_ref(), counterexample);
            if v > 0.0 {
                Ok(Some(format!("counterexample replays with violation {v:e}")))
            } else {
                Err(format!("counterexample no longer violates ({v:e})"))
            }
        }
        Witness::Solution { nonlinearity, violation } => {
            // suite witnesses come from the double paraboloid
            let u = map.cloned().unwrap_or_else(double_paraboloid);
            let dims = Dims { big: u.output_dim(), n: u.input_dim() };
            let f = match build_nonlinearity(nonlinearity, dims, "witness.nonlinearity") {
                Ok(f) => f,
                Err(e) => return Err(e.to_string()),
            };
            let Some(hx) = &violation.hx else { return Err("first-order witness cannot be re-evaluated".into()) };
            let ux = u.eval(&violation.x);
            let fx = f.eval(&violation.x, &ux, &violation.p, hx);
            let v = vecops::dot(&violation.xi, &fx);
            if v < 0.0 && (v - violation.value).abs() <= 1e-12 * v.abs().max(1.0) {
                Ok(Some(format!("ξᵀF = {v} at the recorded jet")))
            } else {
                Err(format!("ξᵀF = {v}, recorded {}", violation.value))
            }
        }
        Witness::Jet { candidate, expected_member, status } => {
            let (Some(spec), Some(u)) = (spec, map) else { return Err("jet witness without a specification".into()) };
            match test_membership(u.as_ref(), candidate, &spec.schedule_for(None)) {
                Ok(v) if v.status == *status && v.member != *expected_member => Ok(None),
                Ok(v) => Err(format!("membership now {:?}", v.status)),
                Err(e) => Err(e.to_string()),
            }
        }
        Witness::ApproxJet { candidate, resonant, expected_member, .. } => {
            let (Some(spec), Some(u)) = (spec, map) else { return Err("approximate jet witness without a specification".into()) };
            match test_approx_jet(u.as_ref(), candidate, &spec.schedule_for(None), resonant.as_ref()) {
                Ok(v) if v.member != *expected_member => Ok(None),
                Ok(v) => Err(format!("approximate membership now {}", v.member)),
                Err(e) => Err(e.to_string()),
            }
        }
        // these carry no independent data; reproduction is the confirmation
        Witness::ContactMap { .. } | Witness::Approximation { .. } | Witness::SuiteCase { .. } => Ok(None),
    }
}
