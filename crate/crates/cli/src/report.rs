//! Report schema shared by every subcommand: a versioned list of check
//! entries rendered either as stable plain text or as JSON. All numbers
//! are embedded as pre-formatted strings so the emitted bytes are
//! identical across runs and survive a parse/re-emit round trip.

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Tag for entries that exercise infrastructure rather than a result
/// about the model geometry.
pub const PLUMBING: &str = "plumbing";

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ReportEntry {
    /// Stable kebab-case identifier of the check.
    pub id: String,
    /// Human-readable rendering of the inputs the check ran on.
    pub inputs: String,
    /// Verdict or computed value summary.
    pub verdict: String,
    /// Numeric interval attached to the check (bounds, witness range, or
    /// value +/- error), formatted; `["-", "-"]` when not applicable.
    pub interval: [String; 2],
    /// Domain anchor naming the fact being checked, or "plumbing".
    pub anchor: String,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub entries: Vec<ReportEntry>,
    pub pass: bool,
}

impl Report {
    pub fn new(command: &str, entries: Vec<ReportEntry>) -> Report {
        let pass = entries.iter().all(|e| e.pass);
        Report { schema_version: SCHEMA_VERSION, command: command.to_string(), entries, pass }
    }

    /// Stable plain-text rendering. No ANSI escapes are ever emitted, so
    /// `NO_COLOR` is honored unconditionally.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("expmix report (schema {}): {}\n", self.schema_version, self.command));
        for e in &self.entries {
            let status = if e.pass { "PASS" } else { "FAIL" };
            out.push_str(&format!(
                "  {status} {} | anchor: {} | inputs: {} | verdict: {} | interval: ({}, {})\n",
                e.id, e.anchor, e.inputs, e.verdict, e.interval[0], e.interval[1]
            ));
        }
        let passed = self.entries.iter().filter(|e| e.pass).count();
        out.push_str(&format!(
            "result: {} ({passed}/{} checks)\n",
            if self.pass { "PASS" } else { "FAIL" },
            self.entries.len()
        ));
        out
    }

    pub fn render_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }
}

/// Deterministic number formatting for report fields: integers print
/// bare, everything else with seven decimals, infinities as `inf`.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else if v == v.trunc() && v.abs() < 1e12 {
        format!("{}", v as i64)
    } else {
        format!("{v:.7}")
    }
}

pub fn interval_of(pair: Option<(f64, f64)>) -> [String; 2] {
    match pair {
        Some((lo, hi)) => [fmt_num(lo), fmt_num(hi)],
        None => ["-".to_string(), "-".to_string()],
    }
}

pub fn entry(
    id: &str,
    inputs: String,
    verdict: String,
    interval: Option<(f64, f64)>,
    anchor: &str,
    pass: bool,
) -> ReportEntry {
    ReportEntry {
        id: id.to_string(),
        inputs,
        verdict,
        interval: interval_of(interval),
        anchor: anchor.to_string(),
        pass,
    }
}
