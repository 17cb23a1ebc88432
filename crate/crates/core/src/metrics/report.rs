use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{MetricsError, Prf};

/// Metric columns in report order.
pub const METRICS: [&str; 6] = ["rouge2_p", "rouge2_r", "rouge2_f1", "fact_p", "fact_r", "fact_f1"];
/// Aggregate rows in report order.
pub const STATS: [&str; 4] = ["min", "median", "mean", "max"];

/// Scores of one summary against its reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleScores {
    pub id: usize,
    pub rouge2_p: f64,
    pub rouge2_r: f64,
    pub rouge2_f1: f64,
    pub fact_p: f64,
    pub fact_r: f64,
    pub fact_f1: f64,
}

impl ExampleScores {
    pub fn new(id: usize, rouge2: Prf, fact: Prf) -> Self {
        Self {
            id,
            rouge2_p: rouge2.precision,
            rouge2_r: rouge2.recall,
            rouge2_f1: rouge2.f1,
            fact_p: fact.precision,
            fact_r: fact.recall,
            fact_f1: fact.f1,
        }
    }

    /// Values in [`METRICS`] order.
    pub fn values(&self) -> [f64; 6] {
        [self.rouge2_p, self.rouge2_r, self.rouge2_f1, self.fact_p, self.fact_r, self.fact_f1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub min: f64,
    pub median: f64,
    pub mean: f64,
    pub max: f64,
}

impl Aggregate {
    /// Values in [`STATS`] order.
    pub fn values(&self) -> [f64; 4] {
        [self.min, self.median, self.mean, self.max]
    }
}

/// Min, median (mean of the middle pair for even counts), mean and max.
pub fn aggregate(values: &[f64]) -> Result<Aggregate, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::InvalidArgument("cannot aggregate an empty list".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Ok(Aggregate {
        min: sorted[0],
        median,
        mean: sorted.iter().sum::<f64>() / n as f64,
        max: sorted[n - 1],
    })
}

/// Per-metric aggregates; serialises as `{metric: {min, median, mean, max}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub rouge2_p: Aggregate,
    pub rouge2_r: Aggregate,
    pub rouge2_f1: Aggregate,
    pub fact_p: Aggregate,
    pub fact_r: Aggregate,
    pub fact_f1: Aggregate,
}

impl Aggregates {
    pub fn get(&self, metric: &str) -> Option<&Aggregate> {
        Some(match metric {
            "rouge2_p" => &self.rouge2_p,
            "rouge2_r" => &self.rouge2_r,
            "rouge2_f1" => &self.rouge2_f1,
            "fact_p" => &self.fact_p,
            "fact_r" => &self.fact_r,
            "fact_f1" => &self.fact_f1,
            _ => return None,
        })
    }
}

fn percent(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreReport {
    pub examples: Vec<ExampleScores>,
    pub aggregates: Aggregates,
}

impl ScoreReport {
    pub fn new(examples: Vec<ExampleScores>) -> Result<Self, MetricsError> {
        let column = |k: usize| aggregate(&examples.iter().map(|e| e.values()[k]).collect::<Vec<_>>());
        let aggregates = Aggregates {
            rouge2_p: column(0)?,
            rouge2_r: column(1)?,
            rouge2_f1: column(2)?,
            fact_p: column(3)?,
            fact_r: column(4)?,
            fact_f1: column(5)?,
        };
        Ok(Self { examples, aggregates })
    }

    /// Per-example CSV with an `id` column followed by [`METRICS`].
    pub fn to_csv(&self) -> Result<Vec<u8>, MetricsError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for e in &self.examples {
            w.serialize(e)?;
        }
        w.into_inner().map_err(|e| MetricsError::Format(e.to_string()))
    }

    pub fn from_csv<R: Read>(reader: R) -> Result<Self, MetricsError> {
        let examples = csv::Reader::from_reader(reader)
            .deserialize()
            .collect::<Result<Vec<ExampleScores>, _>>()?;
        Self::new(examples)
    }

    pub fn aggregate_json(&self) -> String {
        serde_json::to_string_pretty(&self.aggregates).expect("aggregates serialise") + "\n"
    }

    /// Long-format series for plotting: one row per metric and example, in
    /// file order, with that metric's median repeated for a reference line.
    pub fn series_csv(&self) -> String {
        let mut s = String::from("metric,index,id,value,median\n");
        for (k, metric) in METRICS.iter().enumerate() {
            let median = self.aggregates.get(metric).expect("known metric").median;
            for (i, e) in self.examples.iter().enumerate() {
                let _ = writeln!(s, "{metric},{i},{},{},{median}", e.id, e.values()[k]);
            }
        }
        s
    }

    /// Aggregates as a ×100 table with two decimals.
    pub fn render_text(&self) -> String {
        let mut s = format!("{:<8}", "");
        for m in METRICS {
            let _ = write!(s, "{m:>11}");
        }
        s.push('\n');
        for (r, stat) in ["Min", "Median", "Mean", "Max"].iter().enumerate() {
            let _ = write!(s, "{stat:<8}");
            for m in METRICS {
                let _ = write!(s, "{:>11}", percent(self.aggregates.get(m).expect("known metric").values()[r]));
            }
            s.push('\n');
        }
        s
    }
}

/// One row of a comparison CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    /// `aggregate` or `delta`.
    pub section: String,
    pub metric: String,
    /// A statistic name for aggregates, an example id for deltas.
    pub key: String,
    pub model: String,
    pub value: f64,
}

/// Side-by-side aggregates of several models, plus per-example differences
/// of every model from the first.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn new(models: &[(String, ScoreReport)]) -> Result<Self, MetricsError> {
        if models.len() < 2 {
            return Err(MetricsError::InvalidArgument("comparison needs at least two models".into()));
        }
        let ids = |r: &ScoreReport| r.examples.iter().map(|e| e.id).collect::<BTreeSet<_>>();
        let base_ids = ids(&models[0].1);
        for (name, r) in &models[1..] {
            let other = ids(r);
            if other != base_ids {
                let missing: Vec<usize> = base_ids.symmetric_difference(&other).copied().collect();
                return Err(MetricsError::IdMismatch {
                    context: format!("{} vs {name}", models[0].0),
                    ids: missing,
                });
            }
        }
        let mut rows = Vec::new();
        for metric in METRICS {
            for (name, r) in models {
                let agg = r.aggregates.get(metric).expect("known metric");
                for (stat, v) in STATS.iter().zip(agg.values()) {
                    rows.push(ComparisonRow {
                        section: "aggregate".into(),
                        metric: metric.into(),
                        key: (*stat).into(),
                        model: name.clone(),
                        value: v,
                    });
                }
            }
        }
        let (_, base) = &models[0];
        for (k, metric) in METRICS.iter().enumerate() {
            for (name, r) in &models[1..] {
                for e in &base.examples {
                    let other = r.examples.iter().find(|o| o.id == e.id).expect("ids checked");
                    rows.push(ComparisonRow {
                        section: "delta".into(),
                        metric: (*metric).into(),
                        key: e.id.to_string(),
                        model: name.clone(),
                        value: other.values()[k] - e.values()[k],
                    });
                }
            }
        }
        Ok(Self { rows })
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, MetricsError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.into_inner().map_err(|e| MetricsError::Format(e.to_string()))
    }

    pub fn from_csv<R: Read>(reader: R) -> Result<Self, MetricsError> {
        let rows = csv::Reader::from_reader(reader)
            .deserialize()
            .collect::<Result<Vec<ComparisonRow>, _>>()?;
        Ok(Self { rows })
    }

    fn models(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in self.rows.iter().filter(|r| r.section == "aggregate") {
            if !out.contains(&r.model.as_str()) {
                out.push(&r.model);
            }
        }
        out
    }

    /// One ×100 table per metric, models as columns.
    pub fn render_text(&self) -> String {
        let models = self.models();
        let width = models.iter().map(|m| m.len()).max().unwrap_or(0).max(8) + 2;
        let mut s = String::new();
        for metric in METRICS {
            let _ = write!(s, "{metric:<10}");
            for m in &models {
                let _ = write!(s, "{m:>width$}");
            }
            s.push('\n');
            for (stat, label) in STATS.iter().zip(["Min", "Median", "Mean", "Max"]) {
                let _ = write!(s, "{label:<10}");
                for m in &models {
                    let v = self
                        .rows
                        .iter()
                        .find(|r| r.section == "aggregate" && r.metric == metric && r.key == *stat && r.model == *m)
                        .map_or(f64::NAN, |r| r.value);
                    let _ = write!(s, "{:>width$}", percent(v));
                }
                s.push('\n');
            }
            s.push('\n');
        }
        s
    }
}
