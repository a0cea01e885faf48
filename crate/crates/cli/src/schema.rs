//! Scenario file format.
//!
//! ```json
//! {
//!   "agents": [{"id": "r1", "capacity": 3}],
//!   "goods": ["p1", "p2"],
//!   "declared": {"r1": {"p1": 10}},
//!   "true": {"r1": {"p1": 10}}
//! }
//! ```
//!
//! Scores are sparse; a missing entry means the agent did not author the
//! good (score −1). That sentinel is never written back out.

use std::collections::BTreeMap;

use fairshare::model::{Scenario, TypeVector, NOT_AUTHORED};
use serde::{Deserialize, Serialize, Serializer};

use crate::CliError;

type Scores<S> = BTreeMap<String, BTreeMap<String, S>>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    agents: Vec<RawAgent>,
    goods: Vec<String>,
    #[serde(default)]
    declared: Scores<f64>,
    #[serde(rename = "true")]
    truth: Option<Scores<f64>>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    id: String,
    capacity: i64,
}

#[derive(Serialize)]
struct OutFile<'a> {
    agents: Vec<RawAgent>,
    goods: &'a [String],
    declared: Scores<Score>,
    #[serde(rename = "true", skip_serializing_if = "Option::is_none")]
    truth: Option<Scores<Score>>,
}

/// Integral scores are written without a fractional part.
struct Score(f64);

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.fract() == 0.0 && self.0.abs() < 9.0e15 {
            s.serialize_i64(self.0 as i64)
        } else {
            s.serialize_f64(self.0)
        }
    }
}

/// A parsed, validated scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub scenario: Scenario,
    pub declared: TypeVector,
    pub truth: Option<TypeVector>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: RawFile = serde_json::from_str(text).map_err(|e| CliError::Input(format!("malformed scenario: {e}")))?;
        let mut agents = Vec::with_capacity(raw.agents.len());
        for a in &raw.agents {
            if a.capacity <= 0 || a.capacity > u32::MAX as i64 {
                return Err(CliError::Input(format!(
                    "agent `{}`: capacity must be a positive integer, got {}",
                    a.id, a.capacity
                )));
            }
            agents.push((a.id.clone(), a.capacity as u32));
        }
        let scenario = Scenario::new(agents, raw.goods.iter().cloned())?;
        let declared = scores(&scenario, &raw.declared, "declared")?;
        let truth = raw.truth.as_ref().map(|t| scores(&scenario, t, "true")).transpose()?;
        Ok(ScenarioFile {
            scenario,
            declared,
            truth,
        })
    }

    pub fn to_json(&self) -> String {
        let s = &self.scenario;
        let out = OutFile {
            agents: s
                .agents()
                .iter()
                .enumerate()
                .map(|(i, id)| RawAgent {
                    id: id.clone(),
                    capacity: s.capacity(i) as i64,
                })
                .collect(),
            goods: s.goods(),
            declared: sparse(s, &self.declared),
            truth: self.truth.as_ref().map(|t| sparse(s, t)),
        };
        serde_json::to_string_pretty(&out).expect("scenario serialises")
    }

    pub fn require_truth(&self, command: &str) -> Result<&TypeVector, CliError> {
        self.truth
            .as_ref()
            .ok_or_else(|| CliError::Input(format!("`{command}` needs true scores (key \"true\")")))
    }
}

fn scores(s: &Scenario, raw: &Scores<f64>, key: &str) -> Result<TypeVector, CliError> {
    let entries = raw
        .iter()
        .flat_map(|(a, row)| row.iter().map(move |(g, &x)| (a.as_str(), g.as_str(), x)));
    TypeVector::from_sparse(s, entries).map_err(|e| CliError::Input(format!("in \"{key}\": {e}")))
}

fn sparse(s: &Scenario, t: &TypeVector) -> Scores<Score> {
    let mut out = BTreeMap::new();
    for (i, a) in s.agents().iter().enumerate() {
        let row: BTreeMap<String, Score> = s
            .goods()
            .iter()
            .enumerate()
            .filter(|&(g, _)| t.get(i, g) != NOT_AUTHORED)
            .map(|(g, id)| (id.clone(), Score(t.get(i, g))))
            .collect();
        if !row.is_empty() {
            out.insert(a.clone(), row);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"{
        "agents": [{"id": "a", "capacity": 2}, {"id": "b", "capacity": 1}],
        "goods": ["x", "y", "z"],
        "declared": {"a": {"x": 4, "y": 0.5}, "b": {"z": 3}},
        "true": {"a": {"x": 4, "y": 0.5}, "b": {"z": 2, "x": 0}}
    }"#;

    #[test]
    fn parses_sparse_scores() {
        let f = ScenarioFile::parse(SMALL).unwrap();
        assert_eq!(f.declared.row(0), &[4.0, 0.5, -1.0]);
        assert_eq!(f.truth.as_ref().unwrap().row(1), &[0.0, -1.0, 2.0]);
    }

    #[test]
    fn round_trip_is_identity() {
        let f = ScenarioFile::parse(SMALL).unwrap();
        let text = f.to_json();
        assert!(!text.contains("-1"));
        assert_eq!(ScenarioFile::parse(&text).unwrap(), f);
        assert_eq!(ScenarioFile::parse(&text).unwrap().to_json(), text);
    }

    #[test]
    fn explicit_sentinel_is_dropped() {
        let f = ScenarioFile::parse(r#"{"agents":[{"id":"a","capacity":1}],"goods":["x"],"declared":{"a":{"x":-1}}}"#)
            .unwrap();
        assert!(!f.to_json().contains("\"x\": -1"));
        assert!(f.truth.is_none());
    }

    #[test]
    fn reports_position_of_syntax_errors() {
        let err = ScenarioFile::parse("{\n  \"agents\": [\n  oops]}").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn rejects_bad_capacity_and_unknown_ids() {
        let zero = r#"{"agents":[{"id":"a","capacity":0}],"goods":[]}"#;
        assert!(ScenarioFile::parse(zero).unwrap_err().to_string().contains("capacity"));
        let neg = r#"{"agents":[{"id":"a","capacity":-2}],"goods":[]}"#;
        assert!(ScenarioFile::parse(neg).is_err());
        let unknown = r#"{"agents":[{"id":"a","capacity":1}],"goods":["x"],"declared":{"a":{"q":1}}}"#;
        assert!(ScenarioFile::parse(unknown).unwrap_err().to_string().contains("declared"));
    }
}
