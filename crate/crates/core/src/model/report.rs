use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordKind {
    Exact,
    Interval,
    Estimate,
}

/// How a record's value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Brute force over all coalitions.
    Exact,
    /// Agent interested in nothing: value 0.
    EmptyInterest,
    /// Agent whose solo optimum equals its marginal to the grand coalition.
    Separable,
    /// Neighbourhood-profile bounds.
    Bounds,
    /// `[marg({i},N), opt({i})]`, used beyond the neighbourhood cutoff.
    BoundsFallback,
    /// Permutation sampler with median of runs and budget-balance scaling.
    Fpras,
    /// Per-agent sampler with Hoeffding sample sizes.
    RangeSampler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub agent: String,
    pub kind: RecordKind,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lb: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ub: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fallback: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
}

impl AgentRecord {
    pub fn exact(agent: impl Into<String>, method: Method, value: f64) -> Self {
        Self {
            agent: agent.into(),
            kind: RecordKind::Exact,
            method,
            value: Some(value),
            lb: None,
            ub: None,
            fallback: false,
            epsilon: None,
            delta: None,
            samples: None,
        }
    }

    /// Interval record; `lb` is capped at `ub`.
    pub fn interval(
        agent: impl Into<String>,
        lb: Option<f64>,
        ub: Option<f64>,
        fallback: bool,
    ) -> Self {
        let lb = match (lb, ub) {
            (Some(l), Some(u)) => Some(l.min(u)),
            (l, _) => l,
        };
        Self {
            agent: agent.into(),
            kind: RecordKind::Interval,
            method: if fallback {
                Method::BoundsFallback
            } else {
                Method::Bounds
            },
            value: None,
            lb,
            ub,
            fallback,
            epsilon: None,
            delta: None,
            samples: None,
        }
    }

    pub fn estimate(
        agent: impl Into<String>,
        method: Method,
        value: f64,
        epsilon: f64,
        delta: f64,
        samples: u64,
    ) -> Self {
        Self {
            agent: agent.into(),
            kind: RecordKind::Estimate,
            method,
            value: Some(value),
            lb: None,
            ub: None,
            fallback: false,
            epsilon: Some(epsilon),
            delta: Some(delta),
            samples: Some(samples),
        }
    }

    /// Attaches an interval, clamping the point value into it.
    pub fn with_interval(mut self, lb: f64, ub: f64, fallback: bool) -> Self {
        let lb = lb.min(ub);
        self.lb = Some(lb);
        self.ub = Some(ub);
        self.fallback = fallback;
        if let Some(v) = self.value {
            self.value = Some(v.clamp(lb, ub));
        }
        self
    }

    /// The value to use as a point estimate: the value itself, or the common
    /// bound when an interval has collapsed.
    pub fn point(&self) -> Option<f64> {
        self.value.or(match (self.lb, self.ub) {
            (Some(l), Some(u)) if l == u => Some(l),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportMeta {
    pub command: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grand_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default)]
    pub matchings: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contributions: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shortcut_hits: Option<u64>,
    #[serde(default)]
    pub wall_time_secs: f64,
    /// Seconds spent per pipeline stage.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub stages: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl ReportMeta {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            ..Self::default()
        }
    }
}

/// Per-agent results of one solver run (or of a merged pipeline run).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ShapleyReport {
    pub meta: ReportMeta,
    pub agents: Vec<AgentRecord>,
}

impl ShapleyReport {
    pub fn new(meta: ReportMeta, agents: Vec<AgentRecord>) -> Self {
        Self { meta, agents }
    }

    pub fn get(&self, agent: &str) -> Option<&AgentRecord> {
        self.agents.iter().find(|r| r.agent == agent)
    }

    pub fn values(&self) -> Vec<Option<f64>> {
        self.agents.iter().map(AgentRecord::point).collect()
    }

    /// Sum of point values; `None` if some agent has none.
    pub fn total(&self) -> Option<f64> {
        self.agents.iter().map(AgentRecord::point).sum()
    }

    /// Same report with wall-clock fields zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.meta.wall_time_secs = 0.0;
        r.meta.stages.clear();
        r
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text).map_err(Error::from)
    }

    /// Plot data: `agent,exact,lb,ub,estimate` with empty cells for missing
    /// fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("agent,exact,lb,ub,estimate\n");
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.agents {
            let (exact, estimate) = match r.kind {
                RecordKind::Exact => (r.value, None),
                RecordKind::Estimate => (None, r.value),
                RecordKind::Interval => (r.point(), None),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                csv_escape(&r.agent),
                cell(exact),
                cell(r.lb),
                cell(r.ub),
                cell(estimate)
            );
        }
        out
    }
}

/// Error of one agent's value against the reference report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentError {
    pub agent: String,
    pub value: f64,
    pub reference: f64,
    pub abs_error: f64,
    /// `|value - reference| / |reference|`, or the absolute error when the
    /// reference is zero.
    pub rel_error: f64,
}

/// Agent-by-agent comparison of two reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub agents: Vec<AgentError>,
    /// Maximum relative error over compared agents (`X`).
    pub max_rel_error: f64,
    /// Mean relative error over compared agents (`Y`).
    pub mean_rel_error: f64,
    pub max_abs_error: f64,
    /// Agents without a point value in either report.
    pub skipped: Vec<String>,
}

impl ShapleyReport {
    /// Compares `self` against `reference`. Both must cover the same agents,
    /// in any order.
    pub fn compare(&self, reference: &ShapleyReport) -> Result<Comparison> {
        let mine: BTreeMap<&str, &AgentRecord> =
            self.agents.iter().map(|r| (r.agent.as_str(), r)).collect();
        let theirs: BTreeMap<&str, &AgentRecord> = reference
            .agents
            .iter()
            .map(|r| (r.agent.as_str(), r))
            .collect();
        let only =
            |a: &BTreeMap<&str, &AgentRecord>, b: &BTreeMap<&str, &AgentRecord>| -> Vec<String> {
                a.keys()
                    .filter(|k| !b.contains_key(*k))
                    .map(|k| k.to_string())
                    .collect()
            };
        let (left, right) = (only(&mine, &theirs), only(&theirs, &mine));
        if !left.is_empty() || !right.is_empty() || mine.len() != self.agents.len() {
            return Err(Error::MismatchedAgents(format!(
                "only in the first report: {left:?}; only in the reference: {right:?}"
            )));
        }
        let mut agents = Vec::new();
        let mut skipped = Vec::new();
        for record in &self.agents {
            match (record.point(), theirs[record.agent.as_str()].point()) {
                (Some(value), Some(reference)) => {
                    let abs_error = (value - reference).abs();
                    let rel_error = if reference == 0.0 {
                        abs_error
                    } else {
                        abs_error / reference.abs()
                    };
                    agents.push(AgentError {
                        agent: record.agent.clone(),
                        value,
                        reference,
                        abs_error,
                        rel_error,
                    });
                }
                _ => skipped.push(record.agent.clone()),
            }
        }
        let max_rel_error = agents.iter().map(|e| e.rel_error).fold(0.0, f64::max);
        let max_abs_error = agents.iter().map(|e| e.abs_error).fold(0.0, f64::max);
        let mean_rel_error = match agents.len() {
            0 => 0.0,
            len => agents.iter().map(|e| e.rel_error).sum::<f64>() / len as f64,
        };
        Ok(Comparison {
            agents,
            max_rel_error,
            mean_rel_error,
            max_abs_error,
            skipped,
        })
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let mut meta = ReportMeta::new("exact");
        meta.grand_value = Some(6.0);
        let report = ShapleyReport::new(
            meta,
            vec![
                AgentRecord::exact("a1", Method::Exact, 2.5),
                AgentRecord::interval("a2", Some(1.0), Some(2.0), false),
                AgentRecord::estimate("a3", Method::Fpras, 1.0, 0.3, 0.01, 42),
            ],
        );
        let back = ShapleyReport::from_json(&report.to_json()).unwrap();
        assert_eq!(report, back);
    }

    #[test]
    fn estimate_is_clamped_into_interval() {
        let r = AgentRecord::estimate("a", Method::RangeSampler, 5.0, 0.1, 0.01, 10)
            .with_interval(1.0, 4.0, false);
        assert_eq!(r.value, Some(4.0));
        assert_eq!((r.lb, r.ub), (Some(1.0), Some(4.0)));
    }

    #[test]
    fn collapsed_interval_has_a_point_value() {
        assert_eq!(
            AgentRecord::interval("a", Some(2.0), Some(2.0), false).point(),
            Some(2.0)
        );
        assert_eq!(
            AgentRecord::interval("a", Some(1.0), Some(2.0), false).point(),
            None
        );
    }

    #[test]
    fn csv_has_one_row_per_agent() {
        let report = ShapleyReport::new(
            ReportMeta::new("solve"),
            vec![
                AgentRecord::exact("x,y", Method::Exact, 1.5),
                AgentRecord::interval("z", Some(1.0), Some(2.0), true),
            ],
        );
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.contains("\"x,y\",1.5,,,"));
        assert!(csv.contains("z,,1,2,"));
    }

    fn exact_report(values: &[(&str, f64)]) -> ShapleyReport {
        let agents = values
            .iter()
            .map(|(a, v)| AgentRecord::exact(*a, Method::Exact, *v))
            .collect();
        ShapleyReport::new(ReportMeta::new("exact"), agents)
    }

    #[test]
    fn identical_reports_compare_to_zero() {
        let r = exact_report(&[("a", 2.5), ("b", 2.5), ("c", 1.0)]);
        let c = r.compare(&r).unwrap();
        assert_eq!(
            (c.max_rel_error, c.mean_rel_error, c.max_abs_error),
            (0.0, 0.0, 0.0)
        );
        assert_eq!(c.agents.len(), 3);
    }

    #[test]
    fn comparison_ignores_order_and_uses_relative_errors() {
        let reference = exact_report(&[("a", 2.0), ("b", 4.0), ("z", 0.0)]);
        let other = exact_report(&[("b", 3.0), ("z", 0.5), ("a", 2.0)]);
        let c = other.compare(&reference).unwrap();
        assert_eq!(c.max_rel_error, 0.5);
        assert!((c.mean_rel_error - 0.25).abs() < 1e-15);
        assert_eq!(c.max_abs_error, 1.0);
    }

    #[test]
    fn mismatched_agent_sets_are_rejected() {
        let a = exact_report(&[("a", 1.0), ("b", 1.0)]);
        let b = exact_report(&[("a", 1.0), ("c", 1.0)]);
        assert!(matches!(a.compare(&b), Err(Error::MismatchedAgents(_))));
    }

    #[test]
    fn open_intervals_are_skipped() {
        let mut a = exact_report(&[("a", 1.0)]);
        a.agents
            .push(AgentRecord::interval("b", Some(0.0), Some(1.0), false));
        let b = exact_report(&[("a", 1.0), ("b", 0.5)]);
        let c = a.compare(&b).unwrap();
        assert_eq!(c.skipped, vec!["b".to_string()]);
    }
}
