//! Experiment reports and their JSON and CSV encodings.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::Result;

/// One checked inequality `lhs ≤ rhs + tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub key: String,
    pub inequality: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Constant the right side was multiplied by.
    pub constant: f64,
    /// `rhs - lhs`.
    pub margin: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Both sides are exact (not search or grid estimates).
    pub certified: bool,
    /// Counts toward the pass rate; unasserted records are measurements.
    pub asserted: bool,
}

impl Record {
    pub fn check(
        key: impl Into<String>,
        inequality: impl Into<String>,
        lhs: f64,
        rhs: f64,
        constant: f64,
        tolerance: f64,
        certified: bool,
    ) -> Self {
        Record {
            key: key.into(),
            inequality: inequality.into(),
            lhs,
            rhs,
            constant,
            margin: rhs - lhs,
            tolerance,
            pass: lhs <= rhs + tolerance,
            certified,
            asserted: true,
        }
    }

    /// A measured value reported next to a reference, not asserted.
    pub fn measure(key: impl Into<String>, what: impl Into<String>, value: f64, reference: f64) -> Self {
        Record {
            asserted: false,
            pass: true,
            ..Record::check(key, what, value, reference, 1.0, 0.0, false)
        }
    }
}

/// Status of the discretization or sampling assumption an experiment's
/// inequalities depend on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Premise {
    pub description: String,
    pub certified: bool,
    /// Measured constant of the premise, if it has one.
    pub constant: Option<f64>,
    pub points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub asserted: usize,
    pub passed: usize,
    pub pass_rate: f64,
    pub all_pass: bool,
}

impl Summary {
    pub fn of(premise: &Premise, records: &[Record]) -> Self {
        let asserted = records.iter().filter(|r| r.asserted).count();
        let passed = records.iter().filter(|r| r.asserted && r.pass).count();
        Summary {
            asserted,
            passed,
            pass_rate: if asserted == 0 { 1.0 } else { passed as f64 / asserted as f64 },
            all_pass: premise.certified && passed == asserted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport<C> {
    pub experiment: String,
    pub seed: u64,
    pub config: C,
    pub premise: Premise,
    pub records: Vec<Record>,
    pub summary: Summary,
    /// Named derived quantities such as fitted slopes.
    pub derived: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_seconds: Option<f64>,
}

impl<C> ExperimentReport<C> {
    /// Sorts the records by key and recomputes the summary.
    pub fn new(
        experiment: impl Into<String>,
        seed: u64,
        config: C,
        premise: Premise,
        mut records: Vec<Record>,
        derived: BTreeMap<String, f64>,
    ) -> Self {
        records.sort_by(|a, b| a.key.cmp(&b.key));
        let summary = Summary::of(&premise, &records);
        ExperimentReport {
            experiment: experiment.into(),
            seed,
            config,
            premise,
            records,
            summary,
            derived,
            wall_time_seconds: None,
        }
    }
}

/// Pretty JSON with every float written with 17 significant digits.
struct Precise(PrettyFormatter<'static>);

impl Formatter for Precise {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes any value as pretty JSON with full float precision.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Precise(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("JSON output is UTF-8"))
}

/// Column order of [`to_csv`].
pub const CSV_COLUMNS: [&str; 10] = [
    "key",
    "inequality",
    "lhs",
    "rhs",
    "constant",
    "margin",
    "tolerance",
    "pass",
    "certified",
    "asserted",
];

/// One row per record in the order of [`CSV_COLUMNS`].
pub fn to_csv(records: &[Record]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    let f = |x: f64| format!("{x:.16e}");
    for r in records {
        w.write_record([
            r.key.clone(),
            r.inequality.clone(),
            f(r.lhs),
            f(r.rhs),
            f(r.constant),
            f(r.margin),
            f(r.tolerance),
            r.pass.to_string(),
            r.certified.to_string(),
            r.asserted.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

/// Parses records written by [`to_csv`].
pub fn records_from_csv(text: &str) -> Result<Vec<Record>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentReport<String> {
        let premise = Premise {
            description: "test".into(),
            certified: true,
            constant: Some(0.5),
            points: Some(3),
        };
        let records = vec![
            Record::check("b", "x <= y", 0.1, 1.0 / 3.0, 5.0, 1e-8, true),
            Record::check("a", "x <= y", 2.0, 1.0, 1.0, 0.0, false),
            Record::measure("c", "slope", -1.25, -1.2),
        ];
        ExperimentReport::new("demo", 3, "cfg".to_string(), premise, records, BTreeMap::new())
    }

    #[test]
    fn records_are_sorted_and_counted() {
        let r = sample();
        assert_eq!(r.records[0].key, "a");
        assert_eq!((r.summary.asserted, r.summary.passed), (2, 1));
        assert!(!r.summary.all_pass);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let r = sample();
        let text = to_json(&r).unwrap();
        assert!(text.contains("3.3333333333333331e-1"));
        let back: ExperimentReport<String> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn csv_round_trip_and_empty() {
        let r = sample();
        let text = to_csv(&r.records).unwrap();
        assert!(text.starts_with("key,inequality,lhs,rhs,constant,margin,tolerance,pass,certified,asserted\n"));
        assert_eq!(records_from_csv(&text).unwrap(), r.records);
        let empty = to_csv(&[]).unwrap();
        assert!(records_from_csv(&empty).unwrap().is_empty());
    }
}
