//! Verification reports: one entry per checked axiom, with worst violation,
//! witness, and the tolerance in force. Serializes to deterministic
//! key-value text for the command line.

use std::fmt;

use nalgebra::DVector;

/// Verdict of a single check.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Pass,
    Fail,
    /// The check could not be carried out (e.g. a rank hypothesis failed);
    /// counts as a failure for the overall verdict.
    Error(String),
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => write!(f, "pass"),
            Verdict::Fail => write!(f, "fail"),
            Verdict::Error(_) => write!(f, "error"),
        }
    }
}

/// Result of one verification check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub verdict: Verdict,
    /// Worst violation magnitude observed (0 when clean).
    pub worst: f64,
    /// Tolerance the check was run at.
    pub tolerance: f64,
    /// Point attaining the worst violation, when the check failed.
    pub witness: Option<DVector<f64>>,
    /// Free-form diagnostic.
    pub detail: String,
}

impl CheckResult {
    pub fn pass(name: &str, worst: f64, tolerance: f64) -> Self {
        CheckResult {
            name: name.into(),
            verdict: Verdict::Pass,
            worst,
            tolerance,
            witness: None,
            detail: String::new(),
        }
    }

    pub fn fail(name: &str, worst: f64, tolerance: f64, witness: Option<DVector<f64>>) -> Self {
        CheckResult {
            name: name.into(),
            verdict: Verdict::Fail,
            worst,
            tolerance,
            witness,
            detail: String::new(),
        }
    }

    pub fn error(name: &str, message: impl Into<String>) -> Self {
        let message = message.into();
        CheckResult {
            name: name.into(),
            verdict: Verdict::Error(message.clone()),
            worst: f64::NAN,
            tolerance: f64::NAN,
            witness: None,
            detail: message,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn judged(
        name: &str,
        pass: bool,
        worst: f64,
        tolerance: f64,
        witness: Option<DVector<f64>>,
    ) -> Self {
        if pass {
            CheckResult::pass(name, worst, tolerance)
        } else {
            CheckResult::fail(name, worst, tolerance, witness)
        }
    }
}

/// Aggregate report over all axioms of one system.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub subject: String,
    pub seed: u64,
    pub sample_count: usize,
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn overall_pass(&self) -> bool {
        self.checks.iter().all(|c| c.verdict.passed())
    }

    pub fn push(&mut self, check: CheckResult) {
        self.checks.push(check);
    }
}

fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.6e}")
    }
}

fn fmt_vector(v: &DVector<f64>) -> String {
    v.iter()
        .map(|x| fmt_float(*x))
        .collect::<Vec<_>>()
        .join(" ")
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "subject = {}", self.subject)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "samples = {}", self.sample_count)?;
        writeln!(
            f,
            "overall = {}",
            if self.overall_pass() { "pass" } else { "fail" }
        )?;
        for c in &self.checks {
            writeln!(f, "check.{}.verdict = {}", c.name, c.verdict)?;
            writeln!(f, "check.{}.worst = {}", c.name, fmt_float(c.worst))?;
            writeln!(f, "check.{}.tolerance = {}", c.name, fmt_float(c.tolerance))?;
            if let Some(w) = &c.witness {
                writeln!(f, "check.{}.witness = {}", c.name, fmt_vector(w))?;
            }
            if !c.detail.is_empty() {
                writeln!(f, "check.{}.detail = {}", c.name, c.detail)?;
            }
        }
        Ok(())
    }
}
