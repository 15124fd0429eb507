//! JSON-lines post ingestion and the matching writers.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{CourseSchedule, Dataset, PostEvent};
use crate::error::{Error, Result};
use crate::text::Preprocessor;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPost {
    post_id: u64,
    student_id: Value,
    thread_id: Value,
    timestamp: f64,
    text: String,
    #[serde(default)]
    parent_post_id: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawWeek {
    start_ts: f64,
    text: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawSchedule {
    weeks: Vec<RawWeek>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdMapEntry {
    pub external_id: String,
    pub dense_id: usize,
    pub kind: String,
}

/// External ids may be JSON integers or strings.
fn external_id(v: &Value) -> std::result::Result<String, String> {
    match v {
        Value::String(s) if !s.is_empty() => Ok(s.clone()),
        Value::Number(n) if n.is_u64() || n.is_i64() => Ok(n.to_string()),
        other => Err(format!("id must be an integer or non-empty string, got {other}")),
    }
}

fn json_id(s: &str) -> Value {
    s.parse::<u64>()
        .map(Value::from)
        .unwrap_or_else(|_| Value::from(s))
}

fn read_schedule(path: &Path, pre: &Preprocessor) -> Result<CourseSchedule> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: RawSchedule = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let (docs, starts) = raw
        .weeks
        .into_iter()
        .map(|w| (pre.preprocess(&w.text), w.start_ts))
        .unzip();
    CourseSchedule::new(docs, starts)
}

pub fn ingest_jsonl(path: impl AsRef<Path>, schedule_path: impl AsRef<Path>) -> Result<Dataset> {
    ingest_jsonl_with(path, schedule_path, &Preprocessor::default())
}

/// Reads posts and the course schedule, re-indexing students and threads densely in
/// order of first appearance along the sorted timeline.
pub fn ingest_jsonl_with(
    path: impl AsRef<Path>,
    schedule_path: impl AsRef<Path>,
    pre: &Preprocessor,
) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut raw = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let post: RawPost = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let student = external_id(&post.student_id).map_err(|m| parse_err(format!("student_id: {m}")))?;
        let thread = external_id(&post.thread_id).map_err(|m| parse_err(format!("thread_id: {m}")))?;
        if !post.timestamp.is_finite() || post.timestamp < 0.0 {
            return Err(parse_err(format!("timestamp {} must be finite and non-negative", post.timestamp)));
        }
        raw.push((post, student, thread));
    }
    if raw.is_empty() {
        return Err(Error::EmptyDataset(format!("{} contains no posts", path.display())));
    }
    let course = read_schedule(schedule_path.as_ref(), pre)?;

    raw.sort_by(|a, b| {
        a.0.timestamp
            .total_cmp(&b.0.timestamp)
            .then(a.0.post_id.cmp(&b.0.post_id))
    });
    let mut students: Vec<String> = Vec::new();
    let mut threads: Vec<String> = Vec::new();
    let mut student_ix: HashMap<String, usize> = HashMap::new();
    let mut thread_ix: HashMap<String, usize> = HashMap::new();
    let mut events = Vec::with_capacity(raw.len());
    for (post, student, thread) in raw {
        let s = *student_ix.entry(student.clone()).or_insert_with(|| {
            students.push(student);
            students.len() - 1
        });
        let t = *thread_ix.entry(thread.clone()).or_insert_with(|| {
            threads.push(thread);
            threads.len() - 1
        });
        events.push(PostEvent {
            post_id: post.post_id,
            student: s,
            thread: t,
            timestamp: post.timestamp,
            tokens: pre.preprocess(&post.text),
            parent_post_id: post.parent_post_id,
        });
    }
    Dataset::new(events, students, threads, course)
}

/// Writes events in the ingestion format with external ids and space-joined tokens.
pub fn write_jsonl(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for e in ds.events() {
        let mut obj = serde_json::Map::new();
        obj.insert("post_id".into(), e.post_id.into());
        obj.insert("student_id".into(), json_id(&ds.student_ids()[e.student]));
        obj.insert("thread_id".into(), json_id(&ds.thread_ids()[e.thread]));
        obj.insert("timestamp".into(), e.timestamp.into());
        obj.insert("text".into(), e.tokens.join(" ").into());
        if let Some(parent) = e.parent_post_id {
            obj.insert("parent_post_id".into(), parent.into());
        }
        serde_json::to_writer(&mut out, &Value::Object(obj))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_schedule(course: &CourseSchedule, path: impl AsRef<Path>) -> Result<()> {
    write_schedule_text(
        course
            .week_boundaries()
            .iter()
            .zip(course.week_docs())
            .map(|(&start_ts, doc)| (start_ts, doc.join(" "))),
        path,
    )
}

/// Writes a schedule file from raw `(start_ts, text)` weeks.
pub fn write_schedule_text(weeks: impl IntoIterator<Item = (f64, String)>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let raw = RawSchedule {
        weeks: weeks
            .into_iter()
            .map(|(start_ts, text)| RawWeek { start_ts, text })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&raw)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// CSV `external_id,dense_id,kind` with students first, then threads.
pub fn write_id_map(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    let rows = ds
        .student_ids()
        .iter()
        .enumerate()
        .map(|(i, s)| (s, i, "student"))
        .chain(ds.thread_ids().iter().enumerate().map(|(i, s)| (s, i, "thread")));
    for (external_id, dense_id, kind) in rows {
        w.serialize(IdMapEntry {
            external_id: external_id.clone(),
            dense_id,
            kind: kind.to_owned(),
        })?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}
