//! Report structures and their JSON, CSV and SVG renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use contact_core::ellipticity::{Counterexample, SolutionViolation};
use contact_core::jets::{DecayRow, JetCandidate, JetStatus};
use contact_core::stability::{ApproxJetCandidate, ResonantRadii};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};
use crate::spec::{ApproxExpect, NonlinearitySpec, ProblemSpec};
use crate::suite::SuiteOptions;

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Passed,
    Violated,
    Inconclusive,
}

/// One radius of a decay table; `max_ratio` is absent when too few samples
/// survived the domain restriction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub radius: f64,
    pub max_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    pub label: String,
    pub status: JetStatus,
    pub slope: Option<f64>,
    pub rows: Vec<TableRow>,
}

impl DecayTable {
    pub fn new(label: impl Into<String>, status: JetStatus, slope: Option<f64>, rows: &[DecayRow]) -> Self {
        Self {
            label: label.into(),
            status,
            slope: slope.filter(|s| s.is_finite()),
            rows: rows.iter().map(|r| TableRow { radius: r.radius, max_ratio: finite(r.max_ratio) }).collect(),
        }
    }
}

/// Data that lets `replay` re-confirm a verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    /// A candidate whose membership verdict contradicts its expectation.
    Jet { candidate: JetCandidate, expected_member: bool, status: JetStatus },
    ContactMap { expected: bool, observed: bool },
    /// A pair violating degenerate ellipticity of the named nonlinearity.
    Ellipticity { nonlinearity: NonlinearitySpec, big: usize, small: usize, counterexample: Counterexample },
    /// A contact jet on which ξᵀF < 0.
    Solution { nonlinearity: NonlinearitySpec, violation: SolutionViolation },
    ApproxJet { candidate: ApproxJetCandidate, resonant: Option<ResonantRadii>, expected_member: bool, member: bool },
    Approximation { expected: ApproxExpect, along: bool, perp: bool },
    /// First offending case of a suite row.
    SuiteCase { case: String, detail: Value },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: String,
    pub title: String,
    pub verdict: Verdict,
    /// Signed distance to the decision threshold; positive means passed.
    pub margin: Option<f64>,
    pub seed: u64,
    pub details: Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub decay: Vec<DecayTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub cli: String,
    pub core: String,
}

impl Default for Versions {
    fn default() -> Self {
        Self { cli: env!("CARGO_PKG_VERSION").into(), core: contact_core::VERSION.into() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub passed: usize,
    pub violated: usize,
    pub inconclusive: usize,
    pub exit_code: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: u32,
    pub versions: Versions,
    pub seed: u64,
    /// The effective specification (after command-line overrides) for `run`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<ProblemSpec>,
    /// Options of a `paper-suite` run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<SuiteOptions>,
    pub checks: Vec<CheckResult>,
    pub summary: Summary,
    /// Seconds per check id and in total. The only nondeterministic field.
    pub wall_times: BTreeMap<String, f64>,
}

/// 0 when everything passed, 1 on any violation, 2 when something (or
/// everything, including an empty run) is inconclusive.
pub fn exit_code(checks: &[CheckResult]) -> i32 {
    if checks.iter().any(|c| c.verdict == Verdict::Violated) {
        1
    } else if checks.is_empty() || checks.iter().any(|c| c.verdict == Verdict::Inconclusive) {
        2
    } else {
        0
    }
}

pub fn summarise(checks: &[CheckResult]) -> Summary {
    let count = |v: Verdict| checks.iter().filter(|c| c.verdict == v).count();
    Summary {
        passed: count(Verdict::Passed),
        violated: count(Verdict::Violated),
        inconclusive: count(Verdict::Inconclusive),
        exit_code: exit_code(checks),
    }
}

pub fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl RunReport {
    pub fn new(seed: u64, spec: Option<ProblemSpec>, suite: Option<SuiteOptions>, checks: Vec<CheckResult>, wall_times: BTreeMap<String, f64>) -> Self {
        let summary = summarise(&checks);
        Self { schema: REPORT_SCHEMA, versions: Versions::default(), seed, spec, suite, checks, summary, wall_times }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialise") + "\n"
    }

    /// The JSON with wall-times removed; identical inputs give identical bytes.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.wall_times.clear();
        c.to_json()
    }

    pub fn check(&self, id: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.id == id)
    }

    /// Writes report.json, decay.csv and, with `plots`, one SVG per check
    /// that has decay tables.
    pub fn write(&self, dir: &Path, plots: bool) -> CliResult<()> {
        let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        std::fs::write(dir.join("report.json"), self.to_json()).map_err(io)?;
        std::fs::write(dir.join("decay.csv"), decay_csv(&self.checks)).map_err(io)?;
        if plots {
            for c in self.checks.iter().filter(|c| !c.decay.is_empty()) {
                std::fs::write(dir.join(format!("{}.svg", file_stem(&c.id))), decay_svg(c)).map_err(io)?;
            }
        }
        Ok(())
    }
}

fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Columns check_id, radius, max_ratio; one line per radius of every table.
pub fn decay_csv(checks: &[CheckResult]) -> String {
    let mut out = String::from("check_id,radius,max_ratio\n");
    for c in checks {
        for t in &c.decay {
            let id = csv_field(&format!("{}/{}", c.id, t.label));
            for r in &t.rows {
                let ratio = r.max_ratio.map(|v| format!("{v:e}")).unwrap_or_default();
                let _ = writeln!(out, "{id},{:e},{ratio}", r.radius);
            }
        }
    }
    out
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Log-log plot of every decay table of a check, one polyline each, with
/// the fitted slope in the legend. Zero ratios cannot be drawn and are left out.
pub fn decay_svg(c: &CheckResult) -> String {
    let (w, h) = (720.0, 440.0);
    let (left, right, top, bottom) = (70.0, 230.0, 30.0, 50.0);
    let pts: Vec<(f64, f64)> = c
        .decay
        .iter()
        .flat_map(|t| t.rows.iter().filter_map(|r| r.max_ratio.filter(|v| *v > 0.0).map(|v| (r.radius.log10(), v.log10()))))
        .collect();
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{left}\" y=\"18\" font-size=\"13\">{}</text>\n",
        xml_escape(&c.id)
    );
    if pts.is_empty() {
        s += "<text x=\"80\" y=\"120\">no positive ratios to plot</text>\n</svg>\n";
        return s;
    }
    let bounds = |f: fn(&(f64, f64)) -> f64| {
        let lo = pts.iter().map(f).fold(f64::INFINITY, f64::min).floor();
        let hi = pts.iter().map(f).fold(f64::NEG_INFINITY, f64::max).ceil();
        if hi > lo { (lo, hi) } else { (lo - 1.0, hi + 1.0) }
    };
    let (x0, x1) = bounds(|p| p.0);
    let (y0, y1) = bounds(|p| p.1);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let sx = |v: f64| left + (v - x0) / (x1 - x0) * pw;
    let sy = |v: f64| top + (y1 - v) / (y1 - y0) * ph;
    let _ = writeln!(s, "<rect x=\"{left}\" y=\"{top}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>");
    let mut d = x0;
    while d <= x1 {
        let _ = writeln!(
            s,
            "<line x1=\"{0:.1}\" y1=\"{1:.1}\" x2=\"{0:.1}\" y2=\"{2:.1}\" stroke=\"#ddd\"/><text x=\"{0:.1}\" y=\"{3:.1}\" text-anchor=\"middle\">1e{4}</text>",
            sx(d), top, top + ph, top + ph + 16.0, d as i64
        );
        d += 1.0;
    }
    let mut d = y0;
    while d <= y1 {
        let _ = writeln!(
            s,
            "<line x1=\"{0:.1}\" y1=\"{1:.1}\" x2=\"{2:.1}\" y2=\"{1:.1}\" stroke=\"#ddd\"/><text x=\"{3:.1}\" y=\"{4:.1}\" text-anchor=\"end\">1e{5}</text>",
            left, sy(d), left + pw, left - 6.0, sy(d) + 4.0, d as i64
        );
        d += 1.0;
    }
    let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">radius</text>", left + pw / 2.0, h - 10.0);
    let _ = writeln!(s, "<text x=\"14\" y=\"{:.1}\" transform=\"rotate(-90 14 {:.1})\" text-anchor=\"middle\">max ratio</text>", top + ph / 2.0, top + ph / 2.0);
    for (k, t) in c.decay.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let line: Vec<String> = t
            .rows
            .iter()
            .filter_map(|r| r.max_ratio.filter(|v| *v > 0.0).map(|v| format!("{:.1},{:.1}", sx(r.radius.log10()), sy(v.log10()))))
            .collect();
        if !line.is_empty() {
            let _ = writeln!(s, "<polyline points=\"{}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\"/>", line.join(" "));
        }
        let slope = t.slope.map(|v| format!("slope {v:.2}")).unwrap_or_else(|| "no slope".into());
        let ly = top + 14.0 * k as f64 + 8.0;
        if ly < h - 10.0 {
            let _ = writeln!(
                s,
                "<line x1=\"{0:.1}\" y1=\"{1:.1}\" x2=\"{2:.1}\" y2=\"{1:.1}\" stroke=\"{colour}\" stroke-width=\"2\"/><text x=\"{3:.1}\" y=\"{4:.1}\">{5}: {6}</text>",
                w - right + 10.0, ly, w - right + 28.0, w - right + 32.0, ly + 4.0, xml_escape(&t.label), slope
            );
        }
    }
    s += "</svg>\n";
    s
}

/// Fixed-width summary table: id, verdict, margin, seconds.
pub fn summary_table(r: &RunReport) -> String {
    let width = r.checks.iter().map(|c| c.id.len()).max().unwrap_or(2).max(2);
    let mut out = format!("{:<width$}  {:<12}  {:>12}  {:>9}\n", "id", "verdict", "margin", "seconds");
    for c in &r.checks {
        let verdict = match c.verdict {
            Verdict::Passed => "passed",
            Verdict::Violated => "VIOLATED",
            Verdict::Inconclusive => "inconclusive",
        };
        let margin = c.margin.map(|m| format!("{m:.3e}")).unwrap_or_else(|| "-".into());
        let secs = r.wall_times.get(&c.id).map(|t| format!("{t:.2}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(out, "{:<width$}  {verdict:<12}  {margin:>12}  {secs:>9}", c.id);
    }
    let _ = writeln!(
        out,
        "{} passed, {} violated, {} inconclusive (exit {})",
        r.summary.passed, r.summary.violated, r.summary.inconclusive, r.summary.exit_code
    );
    out
}
