use serde::{Deserialize, Serialize};

/// One named numerical check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Outcome of a verification suite.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub name: String,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn new(name: impl Into<String>) -> Self {
        VerifyReport {
            name: name.into(),
            checks: Vec::new(),
        }
    }

    /// Records `value <= tolerance`. NaN fails.
    pub fn check_le(&mut self, name: impl Into<String>, value: f64, tolerance: f64) -> bool {
        let passed = value <= tolerance;
        self.checks.push(Check {
            name: name.into(),
            value,
            tolerance,
            passed,
        });
        passed
    }

    /// Records a boolean condition (value 1 for true, 0 for false).
    pub fn check_true(&mut self, name: impl Into<String>, ok: bool) -> bool {
        self.checks.push(Check {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            tolerance: 1.0,
            passed: ok,
        });
        ok
    }

    pub fn merge(&mut self, other: VerifyReport) {
        let prefix = other.name;
        self.checks.extend(other.checks.into_iter().map(|mut c| {
            c.name = format!("{prefix}/{}", c.name);
            c
        }));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}
