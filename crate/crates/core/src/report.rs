//! Run reports: one JSON document per CLI invocation.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Inconclusive => 2,
        }
    }
}

pub const EXIT_USAGE: i32 = 3;

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    /// Everything that determines the result: flags, budgets, seed and the
    /// contents of input files.
    pub config: Value,
    pub config_hash: String,
    pub verdict: Verdict,
    /// Exactness labels for approximate quantities ("exact", "upper",
    /// "inconclusive", ...).
    pub labels: BTreeMap<String, String>,
    pub result: Value,
    pub witness: Option<Value>,
    pub wall_time_ms: u128,
}

/// SHA-256 of the compact serialization. `serde_json` maps are ordered, so
/// equal configs hash equally.
pub fn config_hash(config: &Value) -> String {
    let bytes = serde_json::to_vec(config).expect("serializable");
    hex::encode(Sha256::digest(bytes))
}

/// What a command computes, before the runner stamps config and timing.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub verdict: Verdict,
    pub labels: BTreeMap<String, String>,
    pub result: Value,
    pub witness: Option<Value>,
}

impl Outcome {
    pub fn new(verdict: Verdict, result: Value) -> Self {
        Outcome { verdict, labels: BTreeMap::new(), result, witness: None }
    }

    pub fn pass(result: Value) -> Self {
        Self::new(Verdict::Pass, result)
    }

    /// Pass when `ok`, otherwise a failure carrying `witness`.
    pub fn check(ok: bool, result: Value, witness: Option<Value>) -> Self {
        let mut o = Self::new(if ok { Verdict::Pass } else { Verdict::Fail }, result);
        if !ok {
            o.witness = Some(witness.unwrap_or(Value::Null));
        }
        o
    }

    pub fn label(mut self, key: &str, value: impl Into<String>) -> Self {
        self.labels.insert(key.to_string(), value.into());
        self
    }

    pub fn into_report(self, command: String, config: Value, wall_time_ms: u128) -> Report {
        Report {
            config_hash: config_hash(&config),
            command,
            config,
            verdict: self.verdict,
            labels: self.labels,
            result: self.result,
            witness: self.witness,
            wall_time_ms,
        }
    }
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn hash_ignores_wall_time_and_key_order() {
        let a = json!({"x": 1, "y": [1, 2]});
        let b: Value = serde_json::from_str(r#"{"y":[1,2],"x":1}"#).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        let r1 = Outcome::pass(json!(null)).into_report("c".into(), a.clone(), 5);
        let r2 = Outcome::pass(json!(null)).into_report("c".into(), a, 999);
        assert_eq!(r1.config_hash, r2.config_hash);
        assert_eq!(r1.config_hash.len(), 64);
    }

    #[test]
    fn failures_carry_witnesses() {
        let o = Outcome::check(false, json!({}), None);
        assert_eq!(o.verdict, Verdict::Fail);
        assert!(o.witness.is_some());
        assert_eq!(Outcome::check(true, json!({}), Some(json!(1))).witness, None);
        assert_eq!([Verdict::Pass, Verdict::Fail, Verdict::Inconclusive].map(Verdict::exit_code), [0, 1, 2]);
    }
}
