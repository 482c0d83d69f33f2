//! Structured pass/fail records for numerically verified inequalities.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditStatus {
    Pass,
    Fail,
    /// The audit's hypotheses were not met by the data (for example an
    /// empty smallness window); neither a pass nor a violation.
    NotApplicable,
}

/// One verified inequality: `value` compared against `bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub name: String,
    pub status: AuditStatus,
    pub checks: Vec<Check>,
    /// Fitted constants, keyed by name.
    pub constants: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl AuditReport {
    pub fn new(name: impl Into<String>) -> Self {
        AuditReport {
            name: name.into(),
            status: AuditStatus::Pass,
            checks: Vec::new(),
            constants: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn not_applicable(name: impl Into<String>, reason: impl Into<String>) -> Self {
        let mut r = AuditReport::new(name);
        r.status = AuditStatus::NotApplicable;
        r.notes.push(reason.into());
        r
    }

    /// `value <= bound`
    pub fn check_le(&mut self, name: impl Into<String>, value: f64, bound: f64) -> bool {
        self.push(name, value, bound, value <= bound, String::new())
    }

    /// `value < bound`
    pub fn check_lt(&mut self, name: impl Into<String>, value: f64, bound: f64) -> bool {
        self.push(name, value, bound, value < bound, String::new())
    }

    /// `value >= bound`
    pub fn check_ge(&mut self, name: impl Into<String>, value: f64, bound: f64) -> bool {
        self.push(name, value, bound, value >= bound, String::new())
    }

    /// `value > bound`
    pub fn check_gt(&mut self, name: impl Into<String>, value: f64, bound: f64) -> bool {
        self.push(name, value, bound, value > bound, String::new())
    }

    pub fn check_flag(&mut self, name: impl Into<String>, ok: bool, detail: impl Into<String>) -> bool {
        let v = if ok { 1.0 } else { 0.0 };
        self.push(name, v, 1.0, ok, detail.into())
    }

    fn push(&mut self, name: impl Into<String>, value: f64, bound: f64, passed: bool, detail: String) -> bool {
        self.checks.push(Check { name: name.into(), value, bound, passed, detail });
        if !passed && self.status == AuditStatus::Pass {
            self.status = AuditStatus::Fail;
        }
        passed
    }

    pub fn constant(&mut self, name: impl Into<String>, value: f64) {
        self.constants.insert(name.into(), value);
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn passed(&self) -> bool {
        self.status == AuditStatus::Pass
    }

    pub fn failed(&self) -> bool {
        self.status == AuditStatus::Fail
    }

    /// Names of the failing checks.
    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_failure_flips_status() {
        let mut r = AuditReport::new("demo");
        assert!(r.check_le("a", 1.0, 2.0));
        assert!(r.passed());
        assert!(!r.check_lt("b", 3.0, 3.0));
        assert!(r.failed());
        assert_eq!(r.failures(), vec!["b"]);
        r.check_le("c", 0.0, 1.0);
        assert!(r.failed());
    }
}
