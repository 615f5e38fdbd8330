//! Readers and writers for every file contract in the pipeline.
//!
//! All writes are atomic: content goes to a sibling temp file which is then
//! renamed over the destination, so a crashed run never leaves a torn file.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attribution::{ImportanceReport, ShapResult, SummaryPoint};
use crate::event_catalog::{Event, RawEvent};
use crate::features::{CalendarContext, FeatureMatrix, FeatureSet, HolidaySpan, WeatherRecord};
use crate::matrix::Matrix;
use crate::models::{ArimaModel, Ensemble, Forest, LinearModel};
use crate::popularity::{PopularityMetrics, Post};
use crate::rolling::{AblationRow, GridRow, ModelSpec, RollingReport};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl IoError {
    fn format(path: &Path, message: impl Into<String>) -> Self {
        IoError::Format { path: path.to_path_buf(), message: message.into() }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io { path: path.to_path_buf(), source }
    }
}

/// Write bytes to a sibling temp file, then rename over `path`.
pub fn atomic_write(path: &Path, content: &[u8]) -> Result<(), IoError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    }
    let file_name = path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| IoError::io(&tmp, e))?;
        f.write_all(content).map_err(|e| IoError::io(&tmp, e))?;
        f.flush().map_err(|e| IoError::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| IoError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut body = serde_json::to_vec_pretty(value)
        .map_err(|e| IoError::format(path, e.to_string()))?;
    body.push(b'\n');
    atomic_write(path, &body)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let body = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    serde_json::from_str(&body).map_err(|e| IoError::format(path, e.to_string()))
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), IoError> {
    let mut body = Vec::new();
    for item in items {
        serde_json::to_writer(&mut body, item).map_err(|e| IoError::format(path, e.to_string()))?;
        body.push(b'\n');
    }
    atomic_write(path, &body)
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    let body = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    body.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line)
                .map_err(|e| IoError::format(path, format!("line {}: {e}", i + 1)))
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).map_err(|e| IoError::format(path, e.to_string()))?;
    }
    let body = writer.into_inner().map_err(|e| IoError::format(path, e.to_string()))?;
    atomic_write(path, &body)
}

fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => {
            IoError::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()))
        }
        _ => IoError::format(path, e.to_string()),
    })?;
    reader
        .deserialize()
        .map(|r| r.map_err(|e| IoError::format(path, e.to_string())))
        .collect()
}

// --- events ---

/// `events_raw.jsonl`: one raw event per line. Ids must be unique and
/// non-empty, time text non-empty.
pub fn read_raw_events(path: &Path) -> Result<Vec<RawEvent>, IoError> {
    let events: Vec<RawEvent> = read_jsonl(path)?;
    let mut seen = std::collections::BTreeSet::new();
    for e in &events {
        if e.event_id.trim().is_empty() {
            return Err(IoError::format(path, "raw event with empty event_id"));
        }
        if e.raw_time_text.trim().is_empty() {
            return Err(IoError::format(path, format!("event {} has empty raw_time_text", e.event_id)));
        }
        if !seen.insert(e.event_id.as_str()) {
            return Err(IoError::format(path, format!("duplicate event id {}", e.event_id)));
        }
    }
    Ok(events)
}

pub fn write_raw_events(path: &Path, events: &[RawEvent]) -> Result<(), IoError> {
    write_jsonl(path, events)
}

/// `events.json`: array of structured events.
pub fn write_events(path: &Path, events: &[Event]) -> Result<(), IoError> {
    write_json(path, &events)
}

pub fn read_events(path: &Path) -> Result<Vec<Event>, IoError> {
    let events: Vec<Event> = read_json(path)?;
    crate::event_catalog::validate_catalog(&events)
        .map_err(|e| IoError::format(path, e.to_string()))?;
    Ok(events)
}

// --- posts & relevance ---

pub fn write_posts(path: &Path, posts: &[Post]) -> Result<(), IoError> {
    write_jsonl(path, posts)
}

pub fn read_posts(path: &Path) -> Result<Vec<Post>, IoError> {
    read_jsonl(path)
}

/// One row of `relevance.csv`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceRecord {
    pub event_id: String,
    pub post_id: String,
    pub related: u8,
}

pub fn write_relevance(path: &Path, records: &[RelevanceRecord]) -> Result<(), IoError> {
    write_csv(path, records)
}

pub fn read_relevance(path: &Path) -> Result<Vec<RelevanceRecord>, IoError> {
    read_csv(path)
}

// --- popularity ---

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PopularityRow {
    event_id: String,
    sub_id: usize,
    overall: f64,
    promotional: f64,
    womp: f64,
}

/// `popularity.csv`: one row per session; overall and promotional repeat on
/// every session row of their event.
pub fn write_popularity(path: &Path, metrics: &[PopularityMetrics]) -> Result<(), IoError> {
    let mut rows = Vec::new();
    for m in metrics {
        for (i, &womp) in m.wom_per_session.iter().enumerate() {
            rows.push(PopularityRow {
                event_id: m.event_id.clone(),
                sub_id: i + 1,
                overall: m.overall,
                promotional: m.promotional,
                womp,
            });
        }
    }
    write_csv(path, &rows)
}

/// Read back per-event metrics. The file stores redistributed values only,
/// so `wom_raw` comes back empty.
pub fn read_popularity(path: &Path) -> Result<Vec<PopularityMetrics>, IoError> {
    let rows: Vec<PopularityRow> = read_csv(path)?;
    let mut by_event: BTreeMap<String, Vec<PopularityRow>> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for row in rows {
        if !by_event.contains_key(&row.event_id) {
            order.push(row.event_id.clone());
        }
        by_event.entry(row.event_id.clone()).or_default().push(row);
    }
    order
        .into_iter()
        .map(|event_id| {
            let mut rows = by_event.remove(&event_id).unwrap();
            rows.sort_by_key(|r| r.sub_id);
            for (i, r) in rows.iter().enumerate() {
                if r.sub_id != i + 1 {
                    return Err(IoError::format(
                        path,
                        format!("event {event_id}: sub ids are not consecutive from 1"),
                    ));
                }
            }
            Ok(PopularityMetrics {
                event_id,
                overall: rows[0].overall,
                promotional: rows[0].promotional,
                wom_per_session: rows.iter().map(|r| r.womp).collect(),
                wom_raw: Vec::new(),
            })
        })
        .collect()
}

// --- flows ---

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRow {
    pub date: NaiveDate,
    pub arrivals: f64,
    #[serde(default)]
    pub segment: Option<String>,
}

pub fn write_flows(path: &Path, rows: &[FlowRow]) -> Result<(), IoError> {
    write_csv(path, rows)
}

/// Load the daily flow series for one segment. Files without a segment
/// column hold a single unnamed series; `segment` must then be `None` or
/// `"all"`.
pub fn read_flows(path: &Path, segment: Option<&str>) -> Result<BTreeMap<NaiveDate, f64>, IoError> {
    let rows: Vec<FlowRow> = read_csv(path)?;
    let wanted = segment.unwrap_or("all");
    let has_segments = rows.iter().any(|r| r.segment.is_some());
    let mut flows = BTreeMap::new();
    for row in &rows {
        let keep = if has_segments {
            row.segment.as_deref() == Some(wanted)
        } else {
            wanted == "all"
        };
        if keep && flows.insert(row.date, row.arrivals).is_some() {
            return Err(IoError::format(path, format!("duplicate flow date {}", row.date)));
        }
    }
    if flows.is_empty() {
        let mut available: Vec<String> =
            rows.iter().filter_map(|r| r.segment.clone()).collect();
        available.sort();
        available.dedup();
        return Err(IoError::format(
            path,
            format!("no rows for segment {wanted:?}; available: {available:?}"),
        ));
    }
    Ok(flows)
}

// --- weather ---

pub fn write_weather(path: &Path, rows: &[WeatherRecord]) -> Result<(), IoError> {
    write_csv(path, rows)
}

pub fn read_weather(path: &Path) -> Result<BTreeMap<NaiveDate, WeatherRecord>, IoError> {
    let rows: Vec<WeatherRecord> = read_csv(path)?;
    let mut map = BTreeMap::new();
    for row in rows {
        if map.insert(row.date, row.clone()).is_some() {
            return Err(IoError::format(path, format!("duplicate weather date {}", row.date)));
        }
    }
    Ok(map)
}

// --- holidays ---

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct HolidayRow {
    start: NaiveDate,
    end: NaiveDate,
    name: String,
    kind: String,
}

pub fn write_holidays(
    path: &Path,
    public: &[HolidaySpan],
    school: &[HolidaySpan],
) -> Result<(), IoError> {
    let mut rows = Vec::new();
    for (spans, kind) in [(public, "public"), (school, "school")] {
        for s in spans {
            rows.push(HolidayRow {
                start: s.start,
                end: s.end,
                name: s.name.clone(),
                kind: kind.into(),
            });
        }
    }
    write_csv(path, &rows)
}

pub fn read_holidays(path: &Path) -> Result<CalendarContext, IoError> {
    let rows: Vec<HolidayRow> = read_csv(path)?;
    let mut public = Vec::new();
    let mut school = Vec::new();
    for row in rows {
        let span = HolidaySpan { name: row.name.clone(), start: row.start, end: row.end };
        match row.kind.as_str() {
            "public" => public.push(span),
            "school" => school.push(span),
            other => {
                return Err(IoError::format(path, format!("unknown holiday kind {other:?}")));
            }
        }
    }
    CalendarContext::new(public, school).map_err(|e| IoError::format(path, e.to_string()))
}

// --- feature matrices ---

/// `features_FS{k}.csv`: date, every feature column, then the target.
pub fn write_feature_matrix(path: &Path, matrix: &FeatureMatrix) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["date".to_string()];
    header.extend(matrix.columns.iter().cloned());
    header.push("target".into());
    writer.write_record(&header).map_err(|e| IoError::format(path, e.to_string()))?;
    for i in 0..matrix.n_rows() {
        let mut record = vec![matrix.dates[i].to_string()];
        record.extend(matrix.values.row(i).iter().map(|v| format!("{v}")));
        record.push(format!("{}", matrix.target[i]));
        writer.write_record(&record).map_err(|e| IoError::format(path, e.to_string()))?;
    }
    let body = writer.into_inner().map_err(|e| IoError::format(path, e.to_string()))?;
    atomic_write(path, &body)
}

pub fn read_feature_matrix(path: &Path, expected: FeatureSet) -> Result<FeatureMatrix, IoError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| IoError::format(path, e.to_string()))?;
    let header: Vec<String> =
        reader.headers().map_err(|e| IoError::format(path, e.to_string()))?.iter().map(String::from).collect();
    let expected_cols = expected.column_names();
    let want: Vec<String> = std::iter::once("date".to_string())
        .chain(expected_cols.iter().cloned())
        .chain(std::iter::once("target".to_string()))
        .collect();
    if header != want {
        return Err(IoError::format(
            path,
            format!("header does not match feature set {}: {header:?}", expected.name()),
        ));
    }
    let mut dates = Vec::new();
    let mut rows = Vec::new();
    let mut target = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| IoError::format(path, e.to_string()))?;
        let parse_err =
            |e: String| IoError::format(path, format!("row {}: {e}", i + 1));
        let date: NaiveDate =
            record[0].parse().map_err(|e: chrono::ParseError| parse_err(e.to_string()))?;
        let mut row = Vec::with_capacity(expected_cols.len());
        for j in 1..=expected_cols.len() {
            row.push(record[j].parse::<f64>().map_err(|e| parse_err(e.to_string()))?);
        }
        let y: f64 = record[expected_cols.len() + 1]
            .parse()
            .map_err(|e: std::num::ParseFloatError| parse_err(e.to_string()))?;
        dates.push(date);
        rows.push(row);
        target.push(y);
    }
    Ok(FeatureMatrix {
        feature_set: expected,
        dates,
        columns: expected_cols,
        values: Matrix::from_rows(&rows),
        target,
    })
}

// --- model files ---

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SavedModel {
    Gbdt(Ensemble),
    Linear(LinearModel),
    Rf(Forest),
    Arima(ArimaModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub model: SavedModel,
}

pub fn write_model(path: &Path, model: &SavedModel) -> Result<(), IoError> {
    write_json(path, &ModelFile { format_version: MODEL_FORMAT_VERSION, model: model.clone() })
}

pub fn read_model(path: &Path) -> Result<SavedModel, IoError> {
    let file: ModelFile = read_json(path)?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(IoError::format(
            path,
            format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                file.format_version
            ),
        ));
    }
    Ok(file.model)
}

// --- reports ---

/// `rolling_report.json` with the model spec echoed alongside the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingReportFile {
    pub model: ModelSpec,
    pub report: RollingReport,
}

pub fn write_rolling_report(path: &Path, file: &RollingReportFile) -> Result<(), IoError> {
    write_json(path, file)
}

pub fn write_grid_results(path: &Path, rows: &[GridRow]) -> Result<(), IoError> {
    write_csv(path, rows)
}

pub fn read_grid_results(path: &Path) -> Result<Vec<GridRow>, IoError> {
    read_csv(path)
}

pub fn write_ablation(path: &Path, rows: &[AblationRow]) -> Result<(), IoError> {
    write_csv(path, rows)
}

/// `shap_values.csv`: sample index, date column when available, one column
/// per feature.
pub fn write_shap_values(
    path: &Path,
    shap: &ShapResult,
    dates: Option<&[NaiveDate]>,
) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["sample".to_string()];
    if dates.is_some() {
        header.push("date".into());
    }
    header.extend(shap.feature_names.iter().cloned());
    writer.write_record(&header).map_err(|e| IoError::format(path, e.to_string()))?;
    for i in 0..shap.contributions.n_rows() {
        let mut record = vec![i.to_string()];
        if let Some(dates) = dates {
            record.push(dates[i].to_string());
        }
        record.extend(shap.contributions.row(i).iter().map(|v| format!("{v}")));
        writer.write_record(&record).map_err(|e| IoError::format(path, e.to_string()))?;
    }
    let body = writer.into_inner().map_err(|e| IoError::format(path, e.to_string()))?;
    atomic_write(path, &body)
}

pub fn write_importance(path: &Path, report: &ImportanceReport) -> Result<(), IoError> {
    write_json(path, report)
}

pub fn write_summary_points(path: &Path, points: &[SummaryPoint]) -> Result<(), IoError> {
    write_csv(path, points)
}
