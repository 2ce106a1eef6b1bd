//! Machine-readable run reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::commands::{Command, RunConfig};
use crate::error::Error;

/// What a residual norm is checked against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
    Reported,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquationNorm {
    pub tag: String,
    pub max: f64,
    pub l2: f64,
    pub bound: Bound,
    /// `None` for reported-only lines.
    pub pass: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl EquationNorm {
    pub fn new(tag: &str, max: f64, l2: f64, bound: Bound) -> Self {
        let pass = match bound {
            Bound::AtMost(t) => Some(max <= t),
            Bound::AtLeast(t) => Some(max >= t),
            Bound::Reported => None,
        };
        Self {
            tag: tag.into(),
            max,
            l2,
            bound,
            pass,
            note: None,
        }
    }

    /// Max and root-mean-square of `|v|` over a sample set.
    pub fn from_samples(tag: &str, values: &[f64], bound: Bound) -> Self {
        let (max, l2) = sample_norms(values);
        Self::new(tag, max, l2, bound)
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

pub fn sample_norms(values: &[f64]) -> (f64, f64) {
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ms = values.iter().map(|v| v * v).sum::<f64>() / values.len().max(1) as f64;
    (max, ms.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub h: f64,
    pub error: f64,
}

/// Errors over a refinement sequence with observed orders
/// `log(e_i/e_{i+1}) / log(h_i/h_{i+1})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub tag: String,
    pub levels: Vec<Level>,
    /// `None` where either error is at the rounding floor.
    pub orders: Vec<Option<f64>>,
    /// Least-squares slope of `log e` against `log h` over levels above the floor.
    pub fitted_order: Option<f64>,
    pub floor: f64,
    /// The finest error is at or below `floor`.
    pub saturated: bool,
    pub accepted_order: Option<[f64; 2]>,
    pub pass: Option<bool>,
}

impl ConvergenceTable {
    pub fn new(
        tag: &str,
        levels: Vec<Level>,
        floor: f64,
        accepted_order: Option<[f64; 2]>,
    ) -> Self {
        let above = |l: &Level| l.error > floor;
        let orders = levels
            .windows(2)
            .map(|w| {
                (above(&w[0]) && above(&w[1]))
                    .then(|| (w[0].error / w[1].error).ln() / (w[0].h / w[1].h).ln())
            })
            .collect();
        let pts: Vec<(f64, f64)> = levels
            .iter()
            .filter(|l| above(l))
            .map(|l| (l.h.ln(), l.error.ln()))
            .collect();
        let fitted_order = (pts.len() >= 2).then(|| {
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            sxy / sxx
        });
        let saturated = levels.last().is_some_and(|l| !above(l));
        let pass = accepted_order
            .map(|[lo, hi]| saturated || fitted_order.is_some_and(|p| (lo..=hi).contains(&p)));
        Self {
            tag: tag.into(),
            levels,
            orders,
            fitted_order,
            floor,
            saturated,
            accepted_order,
            pass,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: Command,
    pub config: RunConfig,
    pub seed: u64,
    pub equations: Vec<EquationNorm>,
    pub convergence: Vec<ConvergenceTable>,
    /// Scalar statistics that carry no tolerance.
    pub stats: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    /// Artifacts written to the output directory.
    pub files: Vec<String>,
    pub pass: bool,
    /// Seconds; the only field that varies between identical runs.
    pub wall_time: f64,
}

impl Report {
    pub fn new(cfg: &RunConfig) -> Self {
        Self {
            command: cfg.command,
            config: cfg.clone(),
            seed: cfg.seed,
            equations: Vec::new(),
            convergence: Vec::new(),
            stats: BTreeMap::new(),
            warnings: Vec::new(),
            files: Vec::new(),
            pass: true,
            wall_time: 0.0,
        }
    }

    pub fn push(&mut self, eq: EquationNorm) {
        self.equations.push(eq);
    }

    pub fn stat(&mut self, key: &str, value: f64) {
        self.stats.insert(key.into(), value);
    }

    pub(crate) fn finish(&mut self) {
        self.pass = self
            .equations
            .iter()
            .filter_map(|e| e.pass)
            .chain(self.convergence.iter().filter_map(|c| c.pass))
            .all(|p| p);
    }

    pub fn failures(&self) -> Vec<&str> {
        let eq = self
            .equations
            .iter()
            .filter(|e| e.pass == Some(false))
            .map(|e| e.tag.as_str());
        let cv = self
            .convergence
            .iter()
            .filter(|c| c.pass == Some(false))
            .map(|c| c.tag.as_str());
        eq.chain(cv).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON without `wall_time`; byte-identical for identical configs.
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v.as_object_mut().expect("object").remove("wall_time");
        serde_json::to_string_pretty(&v).expect("report serializes")
    }

    /// 0 when every declared tolerance passes, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }

    /// One line per checked quantity.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for e in &self.equations {
            let verdict = match e.pass {
                Some(true) => "pass",
                Some(false) => "FAIL",
                None => "info",
            };
            let bound = match e.bound {
                Bound::AtMost(t) => format!("<= {t:.1e}"),
                Bound::AtLeast(t) => format!(">= {t:.1e}"),
                Bound::Reported => String::new(),
            };
            s += &format!(
                "{verdict:4} {:<14} max {:.3e}  l2 {:.3e}  {bound}\n",
                e.tag, e.max, e.l2
            );
        }
        for c in &self.convergence {
            let verdict = match c.pass {
                Some(true) => "pass",
                Some(false) => "FAIL",
                None => "info",
            };
            let order = match (c.saturated, c.fitted_order) {
                (true, _) => "saturated".to_string(),
                (false, Some(p)) => format!("order {p:.2}"),
                (false, None) => "order n/a".to_string(),
            };
            let errs: Vec<String> = c
                .levels
                .iter()
                .map(|l| format!("{:.2e}", l.error))
                .collect();
            s += &format!(
                "{verdict:4} {:<14} {order}  errors [{}]\n",
                c.tag,
                errs.join(", ")
            );
        }
        for w in &self.warnings {
            s += &format!("warning: {w}\n");
        }
        s
    }
}

/// Process exit code for a failed run: 3 when a solver or integrator gave
/// up, 2 for configuration, input and I/O problems.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::NotConverged { .. } | Error::StepRejected { .. } => 3,
        _ => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn levels(errs: &[f64]) -> Vec<Level> {
        errs.iter()
            .enumerate()
            .map(|(i, &e)| Level {
                h: 0.5f64.powi(i as i32),
                error: e,
            })
            .collect()
    }

    #[test]
    fn second_order_sequence() {
        let t = ConvergenceTable::new(
            "x",
            levels(&[1e-2, 2.5e-3, 6.25e-4]),
            1e-12,
            Some([1.7, 2.3]),
        );
        assert!(t.orders.iter().all(|o| (o.unwrap() - 2.0).abs() < 1e-12));
        assert!((t.fitted_order.unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(t.pass, Some(true));
        assert!(!t.saturated);
    }

    #[test]
    fn rounding_floor_saturates() {
        let t = ConvergenceTable::new("x", levels(&[1e-15, 3e-15, 2e-14]), 1e-12, Some([1.7, 2.3]));
        assert!(t.saturated && t.fitted_order.is_none() && t.orders.iter().all(Option::is_none));
        assert_eq!(t.pass, Some(true));
        let first_order =
            ConvergenceTable::new("x", levels(&[1e-2, 5e-3, 2.5e-3]), 1e-12, Some([1.7, 2.3]));
        assert_eq!(first_order.pass, Some(false));
    }

    #[test]
    fn bounds() {
        assert_eq!(
            EquationNorm::new("a", 1.0, 1.0, Bound::AtMost(0.5)).pass,
            Some(false)
        );
        assert_eq!(
            EquationNorm::new("a", 1.0, 1.0, Bound::AtLeast(0.5)).pass,
            Some(true)
        );
        assert_eq!(EquationNorm::new("a", 1.0, 1.0, Bound::Reported).pass, None);
        let (m, r) = sample_norms(&[3.0, -4.0]);
        assert_eq!(m, 4.0);
        assert!((r - (12.5f64).sqrt()).abs() < 1e-15);
    }
}
