//! File formats: forecast records (JSON lines), run tables, score tables and
//! leaderboards (comma-delimited, UTF-8, LF line endings).
//!
//! A forecast record is one JSON object per line:
//!
//! ```text
//! {"id": "a1", "y": 3.2, "forecast": {"type": "histogram", "edges": [0, 1, 4], "probs": [0.3, 0.7]}}
//! {"id": "a2", "y": 1.0, "forecast": {"type": "quantiles", "levels": [0.1, 0.5, 0.9], "values": [0.2, 1.1, 2.0]}}
//! {"id": "a3", "y": 0.5, "forecast": {"type": "samples", "values": [0.1, 0.4, 0.4, 0.9]}}
//! ```

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::forecast::{
    DiscreteForecast, HistogramForecast, QuantileForecast, SampleForecast,
};
use crate::ranking::{LeaderboardRow, RunRecord};
use crate::scoring::BatchScores;

/// A forecast in the form its model produced it.
#[derive(Debug, Clone, PartialEq)]
pub enum ForecastForm {
    Histogram(HistogramForecast),
    Quantiles(QuantileForecast),
    Samples(SampleForecast),
}

impl ForecastForm {
    pub fn kind(&self) -> &'static str {
        match self {
            ForecastForm::Histogram(_) => "histogram",
            ForecastForm::Quantiles(_) => "quantiles",
            ForecastForm::Samples(_) => "samples",
        }
    }

    pub fn to_discrete(&self) -> DiscreteForecast {
        match self {
            ForecastForm::Histogram(h) => h.to_discrete(),
            ForecastForm::Quantiles(q) => q.to_discrete(),
            ForecastForm::Samples(s) => s.to_discrete(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            ForecastForm::Histogram(h) => {
                json!({"type": "histogram", "edges": h.edges(), "probs": h.probs()})
            }
            ForecastForm::Quantiles(q) => {
                json!({"type": "quantiles", "levels": q.levels(), "values": q.values()})
            }
            ForecastForm::Samples(s) => json!({"type": "samples", "values": s.values()}),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRecord {
    pub id: String,
    pub target: f64,
    pub forecast: ForecastForm,
    /// 1-based line in the source file; 0 for records built in memory.
    pub line: usize,
}

impl ForecastRecord {
    pub fn new(id: impl Into<String>, target: f64, forecast: ForecastForm) -> Self {
        Self {
            id: id.into(),
            target,
            forecast,
            line: 0,
        }
    }
}

const FORM_KEYS: &[(&str, &[&str])] = &[
    ("histogram", &["edges", "probs"]),
    ("quantiles", &["levels", "values"]),
    ("samples", &["values"]),
];

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn number_array(obj: &Map<String, Value>, key: &str, line: usize) -> Result<Vec<f64>> {
    let arr = obj
        .get(key)
        .ok_or_else(|| parse_err(line, format!("missing `{key}`")))?
        .as_array()
        .ok_or_else(|| parse_err(line, format!("`{key}` must be an array")))?;
    arr.iter()
        .map(|v| {
            v.as_f64()
                .ok_or_else(|| parse_err(line, format!("`{key}` holds a non-number: {v}")))
        })
        .collect()
}

fn parse_form(value: &Value, line: usize) -> Result<ForecastForm> {
    let obj = match value {
        Value::Object(obj) => obj,
        Value::Array(forms) if forms.len() > 1 => return Err(Error::AmbiguousForm { line }),
        Value::Array(forms) if forms.len() == 1 => return parse_form(&forms[0], line),
        _ => return Err(parse_err(line, "`forecast` must be an object")),
    };
    let kind = obj
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| parse_err(line, "forecast is missing a string `type`"))?;
    let own_keys = FORM_KEYS
        .iter()
        .find(|(k, _)| *k == kind)
        .map(|(_, keys)| *keys)
        .ok_or_else(|| Error::UnknownForm {
            line,
            form: kind.to_string(),
        })?;
    let foreign = FORM_KEYS
        .iter()
        .flat_map(|(_, keys)| keys.iter())
        .any(|key| !own_keys.contains(key) && obj.contains_key(*key));
    if foreign {
        return Err(Error::AmbiguousForm { line });
    }
    let form = match kind {
        "histogram" => HistogramForecast::new(
            number_array(obj, "edges", line)?,
            number_array(obj, "probs", line)?,
        )
        .map(ForecastForm::Histogram),
        "quantiles" => QuantileForecast::new(
            number_array(obj, "levels", line)?,
            number_array(obj, "values", line)?,
        )
        .map(ForecastForm::Quantiles),
        _ => SampleForecast::new(number_array(obj, "values", line)?).map(ForecastForm::Samples),
    };
    form.map_err(|e| parse_err(line, e.to_string()))
}

/// Parses one JSON-lines forecast record.
pub fn parse_forecast_line(text: &str, line: usize) -> Result<ForecastRecord> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| parse_err(line, format!("invalid JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| parse_err(line, "record must be a JSON object"))?;
    let id = match obj.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        Some(_) => return Err(parse_err(line, "`id` must be a string")),
        None => return Err(parse_err(line, "missing `id`")),
    };
    let target = obj
        .get("y")
        .and_then(Value::as_f64)
        .ok_or_else(|| parse_err(line, "missing or non-numeric `y`"))?;
    if !target.is_finite() {
        return Err(parse_err(line, "`y` must be finite"));
    }
    let form = obj
        .get("forecast")
        .ok_or_else(|| parse_err(line, "missing `forecast`"))?;
    Ok(ForecastRecord {
        id,
        target,
        forecast: parse_form(form, line)?,
        line,
    })
}

/// Reads forecast records in file order. Blank lines are skipped.
pub fn parse_forecasts<R: Read>(reader: R) -> Result<Vec<ForecastRecord>> {
    let mut records = Vec::new();
    for (i, text) in BufReader::new(reader).lines().enumerate() {
        let text = text?;
        if text.trim().is_empty() {
            continue;
        }
        records.push(parse_forecast_line(&text, i + 1)?);
    }
    Ok(records)
}

pub fn read_forecasts(path: impl AsRef<Path>) -> Result<Vec<ForecastRecord>> {
    parse_forecasts(File::open(path)?)
}

pub fn write_forecasts<W: Write>(records: &[ForecastRecord], writer: W) -> Result<()> {
    let mut out = BufWriter::new(writer);
    for r in records {
        let value = json!({"id": r.id, "y": r.target, "forecast": r.forecast.to_json()});
        serde_json::to_writer(&mut out, &value).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub const RUN_HEADER: [&str; 5] = ["model", "dataset", "fold", "metric", "value"];

fn csv_writer<W: Write>(writer: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer)
}

/// Reads run rows with their line numbers, checking the header and values
/// but not key uniqueness.
pub fn scan_runs<R: Read>(reader: R) -> Result<Vec<(usize, RunRecord)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(RUN_HEADER.iter().copied()) {
        return Err(Error::BadHeader(header.iter().collect::<Vec<_>>().join(",")));
    }
    let mut rows = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != 5 {
            return Err(parse_err(line, format!("expected 5 fields, got {}", row.len())));
        }
        let fold = row[2].parse::<u32>().map_err(|_| Error::InvalidValue {
            line,
            value: row[2].to_string(),
        })?;
        let value = row[4]
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::InvalidValue {
                line,
                value: row[4].to_string(),
            })?;
        rows.push((
            line,
            RunRecord {
                model: row[0].to_string(),
                dataset: row[1].to_string(),
                fold,
                metric: row[3].to_string(),
                value,
            },
        ));
    }
    Ok(rows)
}

/// A repeated (model, dataset, fold, metric) key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuplicateRun {
    pub key: String,
    pub first_line: usize,
    pub line: usize,
}

/// Every row whose key was already used by an earlier row.
pub fn duplicate_runs(rows: &[(usize, RunRecord)]) -> Vec<DuplicateRun> {
    let mut seen: HashMap<(&str, &str, u32, &str), usize> = HashMap::new();
    let mut dups = Vec::new();
    for (line, r) in rows {
        let key = (r.model.as_str(), r.dataset.as_str(), r.fold, r.metric.as_str());
        if let Some(&first_line) = seen.get(&key) {
            dups.push(DuplicateRun {
                key: format!("({}, {}, {}, {})", r.model, r.dataset, r.fold, r.metric),
                first_line,
                line: *line,
            });
        } else {
            seen.insert(key, *line);
        }
    }
    dups
}

pub fn parse_runs<R: Read>(reader: R) -> Result<Vec<RunRecord>> {
    let rows = scan_runs(reader)?;
    if let Some(d) = duplicate_runs(&rows).into_iter().next() {
        return Err(Error::DuplicateKey {
            key: d.key,
            first_line: d.first_line,
            line: d.line,
        });
    }
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

pub fn read_runs(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    parse_runs(File::open(path)?)
}

/// Values are written at full round-trip precision.
pub fn write_runs<W: Write>(records: &[RunRecord], writer: W) -> Result<()> {
    let mut w = csv_writer(writer);
    w.write_record(RUN_HEADER)?;
    for r in records {
        w.write_record([
            r.model.as_str(),
            r.dataset.as_str(),
            &r.fold.to_string(),
            r.metric.as_str(),
            &r.value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const LEADERBOARD_HEADER: [&str; 5] = ["Rank", "Model", "p-value", "Observed", "AverageRank"];
const WIDE_HEADER: [&str; 3] = ["p-value_full", "Observed_full", "AverageRank_full"];

/// Three decimals, ties to even on the exact binary value.
pub fn fmt3(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

/// Leaderboard table. `wide` appends full-precision copies of the numeric
/// columns.
pub fn write_leaderboard_to<W: Write>(rows: &[LeaderboardRow], wide: bool, writer: W) -> Result<()> {
    let mut w = csv_writer(writer);
    let mut header: Vec<&str> = LEADERBOARD_HEADER.to_vec();
    if wide {
        header.extend(WIDE_HEADER);
    }
    w.write_record(&header)?;
    for row in rows {
        let mut fields = vec![
            row.rank.to_string(),
            row.model.clone(),
            fmt3(row.p_value),
            fmt3(row.observed),
            fmt3(row.average_rank),
        ];
        if wide {
            fields.extend([
                row.p_value.to_string(),
                row.observed.to_string(),
                row.average_rank.to_string(),
            ]);
        }
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn format_leaderboard(rows: &[LeaderboardRow], wide: bool) -> String {
    let mut buf = Vec::new();
    write_leaderboard_to(rows, wide, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8 output")
}

pub fn write_leaderboard(rows: &[LeaderboardRow], path: impl AsRef<Path>) -> Result<()> {
    write_leaderboard_to(rows, false, File::create(path)?)
}

/// Score table: one row per instance, then a `mean` row with each metric's
/// batch aggregate. Undefined values are left empty.
pub fn write_scores<W: Write>(scores: &BatchScores, writer: W) -> Result<()> {
    let mut w = csv_writer(writer);
    let mut header = vec!["id".to_string(), "y".to_string()];
    header.extend(scores.results.iter().map(|r| r.metric.clone()));
    w.write_record(&header)?;
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (i, id) in scores.ids.iter().enumerate() {
        let mut fields = vec![id.clone(), scores.targets[i].to_string()];
        fields.extend(scores.results.iter().map(|r| cell(r.values[i])));
        w.write_record(&fields)?;
    }
    let mut fields = vec!["mean".to_string(), String::new()];
    fields.extend(scores.results.iter().map(|r| cell(r.aggregate)));
    w.write_record(&fields)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(model: &str, dataset: &str, fold: u32, value: f64) -> RunRecord {
        RunRecord {
            model: model.into(),
            dataset: dataset.into(),
            fold,
            metric: "crps".into(),
            value,
        }
    }

    #[test]
    fn empty_forecast_file_is_empty_stream() {
        assert!(parse_forecasts("".as_bytes()).unwrap().is_empty());
        assert!(parse_forecasts("\n  \n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn reads_each_form() {
        let text = r#"{"id":"a","y":0.5,"forecast":{"type":"histogram","edges":[0,1],"probs":[1]}}
{"id":7,"y":1.0,"forecast":{"type":"quantiles","levels":[0.25,0.75],"values":[0,2]}}

{"id":"c","y":2,"forecast":{"type":"samples","values":[1,2,3]}}"#;
        let recs = parse_forecasts(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].forecast.kind(), "histogram");
        assert_eq!(recs[1].id, "7");
        assert_eq!(recs[2].line, 4);
        assert_eq!(recs[2].target, 2.0);
    }

    #[test]
    fn forecast_parse_errors_carry_line_numbers() {
        let text = "{\"id\":\"a\",\"y\":0.5,\"forecast\":{\"type\":\"samples\",\"values\":[1]}}\nnot json";
        assert!(matches!(
            parse_forecasts(text.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        let bad_hist = r#"{"id":"a","y":0,"forecast":{"type":"histogram","edges":[1,0],"probs":[1]}}"#;
        assert!(matches!(
            parse_forecast_line(bad_hist, 9),
            Err(Error::Parse { line: 9, .. })
        ));
    }

    #[test]
    fn unknown_and_ambiguous_forms() {
        let unknown = r#"{"id":"a","y":0,"forecast":{"type":"gaussian","mu":0}}"#;
        assert!(matches!(
            parse_forecast_line(unknown, 1),
            Err(Error::UnknownForm { line: 1, .. })
        ));
        let both = r#"{"id":"a","y":0,"forecast":{"type":"histogram","edges":[0,1],"probs":[1],"levels":[0.5],"values":[0]}}"#;
        assert!(matches!(
            parse_forecast_line(both, 3),
            Err(Error::AmbiguousForm { line: 3 })
        ));
        let two = r#"{"id":"a","y":0,"forecast":[{"type":"samples","values":[0]},{"type":"samples","values":[1]}]}"#;
        assert!(matches!(
            parse_forecast_line(two, 1),
            Err(Error::AmbiguousForm { .. })
        ));
    }

    #[test]
    fn forecast_records_round_trip() {
        let recs = vec![
            ForecastRecord::new(
                "h",
                0.3,
                ForecastForm::Histogram(HistogramForecast::new(vec![0.0, 0.1, 1.0], vec![0.3, 0.7]).unwrap()),
            ),
            ForecastRecord::new(
                "q",
                -2.0,
                ForecastForm::Quantiles(QuantileForecast::new(vec![0.1, 0.9], vec![-3.0, 1.0 / 3.0]).unwrap()),
            ),
        ];
        let mut buf = Vec::new();
        write_forecasts(&recs, &mut buf).unwrap();
        let back = parse_forecasts(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in recs.iter().zip(&back) {
            assert_eq!((&a.id, a.target, &a.forecast), (&b.id, b.target, &b.forecast));
        }
    }

    #[test]
    fn read_runs_examples() {
        let ok = "model,dataset,fold,metric,value\nA,d1,0,crps,1.5\nB,d1,0,crps,2\n";
        assert_eq!(parse_runs(ok.as_bytes()).unwrap().len(), 2);

        let dup = "model,dataset,fold,metric,value\nA,d1,0,crps,1.5\nA,d1,0,crps,2\n";
        match parse_runs(dup.as_bytes()) {
            Err(Error::DuplicateKey { first_line, line, .. }) => assert_eq!((first_line, line), (2, 3)),
            other => panic!("{other:?}"),
        }

        let nan = "model,dataset,fold,metric,value\nA,d1,0,crps,NaN\n";
        assert!(matches!(parse_runs(nan.as_bytes()), Err(Error::InvalidValue { line: 2, .. })));

        let header = "model,dataset,metric,value\nA,d1,crps,1\n";
        assert!(matches!(parse_runs(header.as_bytes()), Err(Error::BadHeader(_))));

        let fold = "model,dataset,fold,metric,value\nA,d1,-1,crps,1\n";
        assert!(matches!(parse_runs(fold.as_bytes()), Err(Error::InvalidValue { .. })));
    }

    #[test]
    fn runs_round_trip_at_full_precision() {
        let recs = vec![
            run("A", "d,1", 0, 0.1 + 0.2),
            run("B", "d2", 3, -1e-300),
            run("C", "d2", 4, 12345.678901234567),
        ];
        let mut buf = Vec::new();
        write_runs(&recs, &mut buf).unwrap();
        assert_eq!(parse_runs(buf.as_slice()).unwrap(), recs);
    }

    #[test]
    fn leaderboard_formatting() {
        let row = LeaderboardRow {
            rank: 1,
            model: "m".into(),
            p_value: 0.000049,
            observed: 1.234567,
            average_rank: 1.4,
        };
        assert_eq!(
            format_leaderboard(std::slice::from_ref(&row), false),
            "Rank,Model,p-value,Observed,AverageRank\n1,m,0.000,1.235,1.400\n"
        );
        assert_eq!(
            format_leaderboard(&[], false),
            "Rank,Model,p-value,Observed,AverageRank\n"
        );
        let second = LeaderboardRow {
            rank: 2,
            model: "n".into(),
            p_value: 1.0,
            observed: 2.0,
            average_rank: 1.6,
        };
        let text = format_leaderboard(&[row, second], false);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[2], "2,n,1.000,2.000,1.600");
    }

    #[test]
    fn fmt3_rounds_ties_to_even() {
        assert_eq!(fmt3(0.0625), "0.062");
        assert_eq!(fmt3(0.1875), "0.188");
        assert_eq!(fmt3(1.0 / 20001.0), "0.000");
        assert_eq!(fmt3(-0.0001), "0.000");
    }

    #[test]
    fn wide_leaderboard_has_full_precision_columns() {
        let row = LeaderboardRow {
            rank: 1,
            model: "m".into(),
            p_value: 0.25,
            observed: 1.0 / 3.0,
            average_rank: 1.5,
        };
        let text = format_leaderboard(&[row], true);
        assert!(text.starts_with("Rank,Model,p-value,Observed,AverageRank,p-value_full,"));
        assert!(text.contains("0.3333333333333333"));
    }
}
