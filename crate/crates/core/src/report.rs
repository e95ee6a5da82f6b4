//! Named pass/fail checks shared by the pipelines, the CLI and the acceptance run.

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    /// `value ≤ bound` when true, `value ≥ bound` otherwise.
    pub upper: bool,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Check {
        Check {
            name: name.into(),
            value,
            bound,
            upper: true,
            passed: value <= bound,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Check {
        Check {
            name: name.into(),
            value,
            bound,
            upper: false,
            passed: value >= bound,
        }
    }

    /// `name value <= bound PASS`
    pub fn line(&self) -> String {
        format!(
            "{} {:.6e} {} {:.6e} {}",
            self.name,
            self.value,
            if self.upper { "<=" } else { ">=" },
            self.bound,
            if self.passed { "PASS" } else { "FAIL" }
        )
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}
