//! Numerical checks of the growth lemmas and the escaping-set theorems,
//! reported as structured pass/fail records.

mod lemmas;
mod sets;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::itinerary::ItineraryError;
use crate::modulus::ModulusError;
use crate::orbit::OrbitError;
use crate::raster::RasterError;

pub use lemmas::{
    verify_en_inequality, verify_mmseq_lemma, verify_remark_counterexample, EnConfig, MmseqConfig,
    REMARK_F_MINUS_4, REMARK_LOGLOG_MINUS_4, REMARK_LOGLOG_MINUS_6, REMARK_MAP,
};
pub use sets::{
    boundary_identities_from_rasters, verify_boundary_identities, verify_components,
    verify_invariance_and_disjointness, BoundaryConfig, InvarianceConfig,
};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("invalid check input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Modulus(#[from] ModulusError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Itinerary(#[from] ItineraryError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Not run to a verdict, e.g. a violated precondition or a truncated
    /// sequence.
    Skipped(String),
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Pass => f.write_str("pass"),
            Status::Fail => f.write_str("fail"),
            Status::Skipped(_) => f.write_str("skipped"),
        }
    }
}

/// Outcome of one check, with every raw measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub check_name: String,
    /// The mathematical statement under test.
    pub anchor: String,
    pub status: Status,
    pub measured: Vec<(String, f64)>,
    pub tolerance: f64,
    pub artifacts: Vec<PathBuf>,
    /// Individual failures or excluded samples, one line each.
    pub exceptions: Vec<String>,
}

/// Plain decimal in `[1e-4, 1e16)`, scientific otherwise.
pub fn format_value(v: f64) -> String {
    if !v.is_finite() || v == 0.0 || (1e-4..1e16).contains(&v.abs()) {
        format!("{}", v + 0.0)
    } else {
        format!("{v:e}")
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " "))
}

impl VerificationReport {
    pub fn new(check_name: &str, anchor: &str, tolerance: f64) -> Self {
        Self {
            check_name: check_name.to_string(),
            anchor: anchor.to_string(),
            status: Status::Pass,
            measured: Vec::new(),
            tolerance,
            artifacts: Vec::new(),
            exceptions: Vec::new(),
        }
    }

    pub fn for_check(check: Check, tolerance: f64) -> Self {
        Self::new(check.name(), check.anchor(), tolerance)
    }

    pub fn measure(&mut self, key: &str, value: f64) {
        self.measured.push((key.to_string(), value));
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.measured.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    /// Downgrades a pass to a failure; never upgrades.
    pub fn fail_unless(&mut self, ok: bool) {
        if !ok && self.status == Status::Pass {
            self.status = Status::Fail;
        }
    }

    pub fn skip(&mut self, reason: impl Into<String>) {
        self.status = Status::Skipped(reason.into());
    }

    pub fn is_failure(&self) -> bool {
        self.status == Status::Fail
    }

    /// One line: `check=.. status=.. [reason=".."] anchor=".." tolerance=..`
    /// followed by the measured `key=value` pairs in insertion order.
    pub fn record(&self) -> String {
        let mut s = format!("check={} status={}", self.check_name, self.status);
        if let Status::Skipped(reason) = &self.status {
            s.push_str(&format!(" reason={}", quote(reason)));
        }
        s.push_str(&format!(" anchor={} tolerance={}", quote(&self.anchor), format_value(self.tolerance)));
        for (k, v) in &self.measured {
            s.push_str(&format!(" {k}={}", format_value(*v)));
        }
        s.push_str(&format!(" exceptions={}", self.exceptions.len()));
        for a in &self.artifacts {
            s.push_str(&format!(" artifact={}", quote(&a.display().to_string())));
        }
        s
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.record())
    }
}

/// 1 if any report failed, else 0.
pub fn exit_code(reports: &[VerificationReport]) -> i32 {
    i32::from(reports.iter().any(VerificationReport::is_failure))
}

/// Named checks of the default suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Check {
    MmseqLemma,
    EnInequality,
    RemarkCounterexample,
    BoundaryIdentities,
    ComponentsUnbounded,
    InvarianceDisjointness,
}

impl Check {
    pub const ALL: [Check; 6] = [
        Check::MmseqLemma,
        Check::EnInequality,
        Check::RemarkCounterexample,
        Check::BoundaryIdentities,
        Check::ComponentsUnbounded,
        Check::InvarianceDisjointness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::MmseqLemma => "mmseq_lemma",
            Check::EnInequality => "en_inequality",
            Check::RemarkCounterexample => "remark_counterexample",
            Check::BoundaryIdentities => "boundary_identities",
            Check::ComponentsUnbounded => "components_unbounded",
            Check::InvarianceDisjointness => "invariance_disjointness",
        }
    }

    /// The statement the check tests, as embedded in its report.
    pub fn anchor(self) -> &'static str {
        match self {
            Check::MmseqLemma => "M_{j,k}(r,f) > r^2 for r > R(f); (R_n) strictly increasing; R'_n > R_n for R' > R",
            Check::EnInequality => "log(log R_n / log S_{n-1}) >= E_n",
            Check::RemarkCounterexample => "M_{0,0}(r, f^2) >= exp exp(e^{r/2})",
            Check::BoundaryIdentities => "J(f) = boundary A_e(f) = boundary A(f); J(f) = J(f^p)",
            Check::ComponentsUnbounded => "every component of A_e(f) is S-unbounded (frame or puncture disk contact)",
            Check::InvarianceDisjointness => {
                "A_e(f) completely invariant up to shift; independent of R > R(f); A_e, A_e' disjoint unless e ~ e'"
            }
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = VerifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| VerifyError::Invalid(format!("unknown check {s:?}")))
    }
}
