//! Event-log loading and activity-trace construction.
//!
//! The tool reads timestamped event logs from local JSONL or CSV files,
//! restricts them to an analysis window and groups them into per-user
//! activity traces. Malformed rows are skipped and counted, never fatal.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground-truth flag carried by labelled corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Coordinated,
    Normal,
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "coordinated" => Ok(Label::Coordinated),
            "normal" => Ok(Label::Normal),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Coordinated => write!(f, "coordinated"),
            Label::Normal => write!(f, "normal"),
        }
    }
}

/// One interaction made by a user: the unit record of the input logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub user_id: String,
    /// Seconds since epoch. Sub-second precision in the input is truncated.
    pub timestamp: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

/// Half-open analysis window `[t_start, t_end)` in epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisWindow {
    t_start: i64,
    t_end: i64,
}

impl AnalysisWindow {
    pub fn new(t_start: i64, t_end: i64) -> Result<Self> {
        if t_start >= t_end {
            return Err(Error::InvalidParameter(format!(
                "analysis window requires t_start < t_end, got [{t_start}, {t_end})"
            )));
        }
        Ok(AnalysisWindow { t_start, t_end })
    }

    pub fn t_start(&self) -> i64 {
        self.t_start
    }

    pub fn t_end(&self) -> i64 {
        self.t_end
    }

    pub fn len_secs(&self) -> i64 {
        self.t_end - self.t_start
    }

    /// Half-open containment: `t_end` itself is outside.
    pub fn contains(&self, t: i64) -> bool {
        t >= self.t_start && t < self.t_end
    }
}

/// A user's event timestamps inside the analysis window, ascending.
/// Duplicates are allowed (two posts in the same second).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityTrace {
    pub user_id: String,
    pub timestamps: Vec<i64>,
}

impl ActivityTrace {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

/// Input file formats accepted by [`load_events`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Jsonl,
    Csv,
}

impl InputFormat {
    /// Infer the format from a file extension (`.jsonl`/`.json` vs `.csv`).
    pub fn from_path(path: &Path) -> Option<InputFormat> {
        match path.extension()?.to_str()? {
            "jsonl" | "json" | "ndjson" => Some(InputFormat::Jsonl),
            "csv" => Some(InputFormat::Csv),
            _ => None,
        }
    }
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(InputFormat::Jsonl),
            "csv" => Ok(InputFormat::Csv),
            other => Err(format!("unknown input format {other:?} (expected jsonl|csv)")),
        }
    }
}

/// Result of loading an event log: well-formed rows in file order plus the
/// number of malformed rows that were skipped.
#[derive(Debug)]
pub struct LoadReport {
    pub events: Vec<Event>,
    pub skipped: usize,
}

/// Load an event log. Unreadable files are fatal; malformed rows are skipped
/// with a warning and counted in the report.
pub fn load_events(path: &Path, format: InputFormat) -> Result<LoadReport> {
    match format {
        InputFormat::Jsonl => load_jsonl(path),
        InputFormat::Csv => load_csv(path),
    }
}

/// Validate invariants shared by both formats. Returns an error string for
/// malformed rows.
fn validate_event(event: Event) -> std::result::Result<Event, String> {
    if event.user_id.is_empty() {
        return Err("empty user_id".into());
    }
    if event.timestamp < 0 {
        return Err(format!("negative timestamp {}", event.timestamp));
    }
    Ok(event)
}

fn load_jsonl(path: &Path) -> Result<LoadReport> {
    #[derive(Deserialize)]
    struct RawEvent {
        user_id: String,
        timestamp: serde_json::Number,
        #[serde(default)]
        text: Option<String>,
        #[serde(default)]
        lang: Option<String>,
        #[serde(default)]
        label: Option<String>,
    }

    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut events = Vec::new();
    let mut skipped = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: std::result::Result<Event, String> = serde_json::from_str::<RawEvent>(&line)
            .map_err(|e| e.to_string())
            .and_then(|raw| {
                let timestamp = raw
                    .timestamp
                    .as_i64()
                    .or_else(|| raw.timestamp.as_f64().map(|f| f.trunc() as i64))
                    .ok_or_else(|| format!("unrepresentable timestamp {}", raw.timestamp))?;
                let label = match raw.label {
                    None => None,
                    Some(s) => Some(s.parse::<Label>()?),
                };
                Ok(Event {
                    user_id: raw.user_id,
                    timestamp,
                    text: raw.text,
                    lang: raw.lang,
                    label,
                })
            })
            .and_then(validate_event);
        match parsed {
            Ok(event) => events.push(event),
            Err(reason) => {
                skipped += 1;
                log::warn!("{}:{}: skipping malformed row: {reason}", path.display(), lineno + 1);
            }
        }
    }
    Ok(LoadReport { events, skipped })
}

fn load_csv(path: &Path) -> Result<LoadReport> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);

    let headers = reader
        .headers()
        .map_err(|e| Error::schema(path, format!("unreadable header: {e}")))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let user_col = col("user_id").ok_or_else(|| Error::schema(path, "missing column user_id"))?;
    let ts_col = col("timestamp").ok_or_else(|| Error::schema(path, "missing column timestamp"))?;
    let text_col = col("text");
    let lang_col = col("lang");
    let label_col = col("label");

    // Unquoted empty fields mean absent.
    let opt = |record: &csv::StringRecord, idx: Option<usize>| -> Option<String> {
        idx.and_then(|i| record.get(i))
            .filter(|s| !s.is_empty())
            .map(str::to_owned)
    };

    let mut events = Vec::new();
    let mut skipped = 0usize;
    for (rowno, record) in reader.records().enumerate() {
        let parsed: std::result::Result<Event, String> = record
            .map_err(|e| e.to_string())
            .and_then(|record| {
                let user_id = record
                    .get(user_col)
                    .ok_or("missing user_id field")?
                    .to_owned();
                let ts_text = record.get(ts_col).ok_or("missing timestamp field")?.trim();
                let timestamp = ts_text
                    .parse::<i64>()
                    .or_else(|_| ts_text.parse::<f64>().map(|f| f.trunc() as i64))
                    .map_err(|_| format!("non-numeric timestamp {ts_text:?}"))?;
                let label = match opt(&record, label_col) {
                    None => None,
                    Some(s) => Some(s.parse::<Label>()?),
                };
                Ok(Event {
                    user_id,
                    timestamp,
                    text: opt(&record, text_col),
                    lang: opt(&record, lang_col),
                    label,
                })
            })
            .and_then(validate_event);
        match parsed {
            Ok(event) => events.push(event),
            Err(reason) => {
                skipped += 1;
                log::warn!("{}:{}: skipping malformed row: {reason}", path.display(), rowno + 2);
            }
        }
    }
    Ok(LoadReport { events, skipped })
}

/// Group in-window events into per-user traces with ascending timestamps.
/// Events outside the half-open window are dropped.
pub fn build_traces(events: &[Event], window: &AnalysisWindow) -> BTreeMap<String, ActivityTrace> {
    let mut traces: BTreeMap<String, ActivityTrace> = BTreeMap::new();
    for event in events {
        if !window.contains(event.timestamp) {
            continue;
        }
        traces
            .entry(event.user_id.clone())
            .or_insert_with(|| ActivityTrace {
                user_id: event.user_id.clone(),
                timestamps: Vec::new(),
            })
            .timestamps
            .push(event.timestamp);
    }
    for trace in traces.values_mut() {
        trace.timestamps.sort_unstable();
    }
    traces
}

/// Ground-truth label per user, taken from the first labelled event of each
/// user in file order.
pub fn user_labels(events: &[Event]) -> BTreeMap<String, Label> {
    let mut labels = BTreeMap::new();
    for event in events {
        if let Some(label) = event.label {
            labels.entry(event.user_id.clone()).or_insert(label);
        }
    }
    labels
}

/// Select the most-active users for analysis, ranked by in-window event count
/// with ties broken by ascending user id.
///
/// With labels present, returns the `n_coordinated` most-active coordinated
/// users followed by the `n_normal` most-active normal users. Without labels
/// (empty map), returns the `n_coordinated + n_normal` most active users. If
/// a class has fewer users than requested, all available are returned with a
/// warning.
pub fn select_top_users(
    traces: &BTreeMap<String, ActivityTrace>,
    labels: &BTreeMap<String, Label>,
    n_coordinated: usize,
    n_normal: usize,
) -> Vec<String> {
    let ranked = |pool: Vec<(&String, usize)>| -> Vec<String> {
        let mut pool = pool;
        pool.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        pool.into_iter().map(|(id, _)| id.clone()).collect()
    };

    if labels.is_empty() {
        let all: Vec<(&String, usize)> = traces.iter().map(|(id, t)| (id, t.len())).collect();
        let mut out = ranked(all);
        out.truncate(n_coordinated + n_normal);
        return out;
    }

    let pool_for = |want: Label| -> Vec<(&String, usize)> {
        traces
            .iter()
            .filter(|(id, _)| labels.get(*id) == Some(&want))
            .map(|(id, t)| (id, t.len()))
            .collect()
    };

    let mut coordinated = ranked(pool_for(Label::Coordinated));
    if coordinated.len() < n_coordinated {
        log::warn!(
            "requested {n_coordinated} coordinated users but only {} are labelled",
            coordinated.len()
        );
    }
    coordinated.truncate(n_coordinated);

    let mut normal = ranked(pool_for(Label::Normal));
    if normal.len() < n_normal {
        log::warn!(
            "requested {n_normal} normal users but only {} are labelled",
            normal.len()
        );
    }
    normal.truncate(n_normal);

    coordinated.extend(normal);
    coordinated
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn event(user: &str, t: i64) -> Event {
        Event {
            user_id: user.into(),
            timestamp: t,
            text: None,
            lang: None,
            label: None,
        }
    }

    #[test]
    fn csv_row_maps_fields_directly() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "user_id,timestamp,text,lang,label").unwrap();
        writeln!(f, "u1,1500000000,\"hello\",en,coordinated").unwrap();
        let report = load_events(f.path(), InputFormat::Csv).unwrap();
        assert_eq!(report.skipped, 0);
        assert_eq!(
            report.events,
            vec![Event {
                user_id: "u1".into(),
                timestamp: 1_500_000_000,
                text: Some("hello".into()),
                lang: Some("en".into()),
                label: Some(Label::Coordinated),
            }]
        );
    }

    #[test]
    fn empty_file_loads_empty() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "user_id,timestamp").unwrap();
        let report = load_events(f.path(), InputFormat::Csv).unwrap();
        assert!(report.events.is_empty());
        assert_eq!(report.skipped, 0);

        let f = tempfile::NamedTempFile::new().unwrap();
        let report = load_events(f.path(), InputFormat::Jsonl).unwrap();
        assert!(report.events.is_empty());
        assert_eq!(report.skipped, 0);
    }

    #[test]
    fn malformed_rows_are_skipped_and_counted() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "user_id,timestamp").unwrap();
        writeln!(f, "u1,notanumber").unwrap();
        writeln!(f, "u2,12").unwrap();
        let report = load_events(f.path(), InputFormat::Csv).unwrap();
        assert_eq!(report.skipped, 1);
        assert_eq!(report.events.len(), 1);
        assert_eq!(report.events[0].user_id, "u2");
    }

    #[test]
    fn jsonl_truncates_subsecond_timestamps() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"user_id":"u1","timestamp":1500000000.9}}"#).unwrap();
        writeln!(f, r#"{{"user_id":"","timestamp":5}}"#).unwrap();
        writeln!(f, r#"{{"user_id":"u2","timestamp":-3}}"#).unwrap();
        let report = load_events(f.path(), InputFormat::Jsonl).unwrap();
        assert_eq!(report.skipped, 2);
        assert_eq!(report.events[0].timestamp, 1_500_000_000);
    }

    #[test]
    fn missing_required_column_is_fatal() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "user_id,when").unwrap();
        writeln!(f, "u1,5").unwrap();
        assert!(matches!(
            load_events(f.path(), InputFormat::Csv),
            Err(Error::Schema { .. })
        ));
    }

    #[test]
    fn traces_sort_and_group() {
        let events = vec![event("u1", 5), event("u1", 3), event("u2", 7)];
        let window = AnalysisWindow::new(0, 10).unwrap();
        let traces = build_traces(&events, &window);
        assert_eq!(traces["u1"].timestamps, vec![3, 5]);
        assert_eq!(traces["u2"].timestamps, vec![7]);
    }

    #[test]
    fn window_is_half_open() {
        let events = vec![event("u1", 10)];
        let window = AnalysisWindow::new(0, 10).unwrap();
        assert!(build_traces(&events, &window).is_empty());
    }

    #[test]
    fn all_events_before_window_yield_empty_map() {
        let events = vec![event("u1", 1), event("u2", 2)];
        let window = AnalysisWindow::new(5, 10).unwrap();
        assert!(build_traces(&events, &window).is_empty());
    }

    #[test]
    fn trace_lengths_conserve_in_window_events() {
        let events: Vec<Event> = (0..50)
            .map(|i| event(if i % 3 == 0 { "a" } else { "b" }, i * 7 % 40))
            .collect();
        let window = AnalysisWindow::new(5, 30).unwrap();
        let traces = build_traces(&events, &window);
        let expected = events.iter().filter(|e| window.contains(e.timestamp)).count();
        let total: usize = traces.values().map(|t| t.len()).sum();
        assert_eq!(total, expected);
    }

    #[test]
    fn top_users_picks_most_active_per_class() {
        let mut events = Vec::new();
        for _ in 0..10 {
            events.push(event("a", 1));
        }
        for _ in 0..5 {
            events.push(event("b", 1));
        }
        for _ in 0..8 {
            events.push(event("c", 1));
        }
        events.push(Event { label: Some(Label::Coordinated), ..event("a", 1) });
        events.push(Event { label: Some(Label::Coordinated), ..event("b", 1) });
        events.push(Event { label: Some(Label::Normal), ..event("c", 1) });
        let window = AnalysisWindow::new(0, 10).unwrap();
        let traces = build_traces(&events, &window);
        let labels = user_labels(&events);
        assert_eq!(select_top_users(&traces, &labels, 1, 1), vec!["a", "c"]);
    }

    #[test]
    fn top_users_ties_break_lexicographically() {
        let events = vec![event("zed", 1), event("abe", 2), event("mid", 3)];
        let window = AnalysisWindow::new(0, 10).unwrap();
        let traces = build_traces(&events, &window);
        let selected = select_top_users(&traces, &BTreeMap::new(), 2, 0);
        assert_eq!(selected, vec!["abe", "mid"]);
    }

    #[test]
    fn top_users_short_class_returns_available() {
        let mut events = vec![event("a", 1), event("b", 2)];
        events.push(Event { label: Some(Label::Coordinated), ..event("a", 1) });
        events.push(Event { label: Some(Label::Normal), ..event("b", 1) });
        let window = AnalysisWindow::new(0, 10).unwrap();
        let traces = build_traces(&events, &window);
        let labels = user_labels(&events);
        let selected = select_top_users(&traces, &labels, 5, 5);
        assert_eq!(selected, vec!["a", "b"]);
    }
}
