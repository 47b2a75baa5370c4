//! Run summaries and the checks embedded in presets.

use serde_json::{json, Map, Value};

use crate::export::fmt_num;

/// One numeric or exact expectation and how the run compared with it.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub actual: String,
    pub pass: bool,
}

impl Check {
    /// `|actual - target| <= tol`.
    pub fn near(name: &str, actual: f64, target: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            expected: format!("{}±{}", fmt_num(target), fmt_num(tol)),
            actual: fmt_num(actual),
            pass: (actual - target).abs() <= tol,
        }
    }

    pub fn at_most(name: &str, actual: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            expected: format!("<= {}", fmt_num(bound)),
            actual: fmt_num(actual),
            pass: actual <= bound,
        }
    }

    pub fn exact<T: PartialEq + std::fmt::Debug>(name: &str, actual: T, expected: T) -> Self {
        Self {
            name: name.into(),
            expected: format!("{expected:?}"),
            actual: format!("{actual:?}"),
            pass: actual == expected,
        }
    }

    pub fn holds(name: &str, pass: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            expected: "true".into(),
            actual: detail,
            pass,
        }
    }
}

/// Ordered `key=value` entries plus checks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub entries: Vec<(String, String)>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn entry(&mut self, key: &str, value: impl Into<String>) {
        self.entries.push((key.into(), value.into()));
    }

    pub fn number(&mut self, key: &str, value: f64) {
        self.entry(key, fmt_num(value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(&format!("{k}={v}\n"));
        }
        for c in &self.checks {
            out.push_str(&format!(
                "check {} {}: actual {}, expected {}\n",
                c.name,
                if c.pass { "PASS" } else { "FAIL" },
                c.actual,
                c.expected
            ));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let mut entries = Map::new();
        for (k, v) in &self.entries {
            entries.insert(k.clone(), Value::String(v.clone()));
        }
        let checks: Vec<Value> = self
            .checks
            .iter()
            .map(|c| {
                json!({
                    "name": c.name,
                    "expected": c.expected,
                    "actual": c.actual,
                    "pass": c.pass,
                })
            })
            .collect();
        json!({ "summary": entries, "checks": checks, "passed": self.passed() })
    }
}
