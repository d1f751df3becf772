//! Readers and writers for the tool's file interfaces: the JSONL event
//! schema, the shared edge/decision CSV, convergence curves, partitions,
//! score matrices and evaluation outputs. All writers emit stable-ordered
//! rows so identical runs produce identical bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::ccm::CrossMapResult;
use crate::error::{Error, Result};
use crate::eval::{EdgeRecord, Histogram, RocCurve};
use crate::graph::NodeDegreeReport;
use crate::ingest::{Event, Label};
use crate::series::BinnedSeries;

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write events in the standard JSONL schema.
pub fn write_events_jsonl(path: &Path, events: &[Event]) -> Result<()> {
    let mut w = create(path)?;
    for event in events {
        let line = serde_json::to_string(event).expect("events serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    finish(w, path)
}

/// Shared edge/decision schema: `source,mapper,rho_max,slope,decision`.
pub fn write_edges_csv(path: &Path, records: &[EdgeRecord]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "source,mapper,rho_max,slope,decision").map_err(|e| Error::io(path, e))?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.source,
            r.mapper,
            opt(r.rho_max),
            opt(r.slope),
            r.decision
        )
        .map_err(|e| Error::io(path, e))?;
    }
    finish(w, path)
}

pub fn read_edges_csv(path: &Path) -> Result<Vec<EdgeRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::schema(path, e.to_string()))?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::schema(path, format!("missing column {name}")))
    };
    let (src, map, rho, slope, dec) = (
        col("source")?,
        col("mapper")?,
        col("rho_max")?,
        col("slope")?,
        col("decision")?,
    );
    let parse_opt = |s: &str, name: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse::<f64>()
                .map(Some)
                .map_err(|_| Error::schema(path, format!("bad {name} value {s:?}")))
        }
    };
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::schema(path, e.to_string()))?;
        let get = |i: usize| row.get(i).unwrap_or_default();
        records.push(EdgeRecord {
            source: get(src).to_owned(),
            mapper: get(map).to_owned(),
            rho_max: parse_opt(get(rho), "rho_max")?,
            slope: parse_opt(get(slope), "slope")?,
            decision: get(dec)
                .parse::<bool>()
                .map_err(|_| Error::schema(path, format!("bad decision value {:?}", get(dec))))?,
        });
    }
    Ok(records)
}

/// Long-format convergence export for rho-vs-library plots:
/// `source,mapper,library_length,rho`.
pub fn write_convergence_csv(path: &Path, results: &[CrossMapResult]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "source,mapper,library_length,rho").map_err(|e| Error::io(path, e))?;
    for r in results {
        for &(lib, rho) in &r.rho_by_library {
            writeln!(w, "{},{},{},{}", r.source, r.mapper, lib, opt(rho))
                .map_err(|e| Error::io(path, e))?;
        }
    }
    finish(w, path)
}

pub fn write_degree_csv(path: &Path, reports: &[NodeDegreeReport]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "user_id,indegree,outdegree,net_degree").map_err(|e| Error::io(path, e))?;
    for r in reports {
        writeln!(w, "{},{},{},{}", r.user_id, r.indegree, r.outdegree, r.net_degree)
            .map_err(|e| Error::io(path, e))?;
    }
    finish(w, path)
}

/// Partition file: `user_id,cluster`.
pub fn write_partition_csv<C: std::fmt::Display>(
    path: &Path,
    partition: &BTreeMap<String, C>,
) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "user_id,cluster").map_err(|e| Error::io(path, e))?;
    for (user, cluster) in partition {
        writeln!(w, "{user},{cluster}").map_err(|e| Error::io(path, e))?;
    }
    finish(w, path)
}

pub fn read_partition_csv(path: &Path) -> Result<BTreeMap<String, String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::schema(path, e.to_string()))?
        .clone();
    let user = headers
        .iter()
        .position(|h| h == "user_id")
        .ok_or_else(|| Error::schema(path, "missing column user_id"))?;
    let cluster = headers
        .iter()
        .position(|h| h == "cluster")
        .ok_or_else(|| Error::schema(path, "missing column cluster"))?;
    let mut partition = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::schema(path, e.to_string()))?;
        partition.insert(
            row.get(user).unwrap_or_default().to_owned(),
            row.get(cluster).unwrap_or_default().to_owned(),
        );
    }
    Ok(partition)
}

/// Ground-truth influence edges: `source,target`.
pub fn write_ground_truth_csv(path: &Path, edges: &[(String, String)]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "source,target").map_err(|e| Error::io(path, e))?;
    for (s, t) in edges {
        writeln!(w, "{s},{t}").map_err(|e| Error::io(path, e))?;
    }
    finish(w, path)
}

pub fn read_ground_truth_csv(path: &Path) -> Result<Vec<(String, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut edges = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::schema(path, e.to_string()))?;
        edges.push((
            row.get(0).unwrap_or_default().to_owned(),
            row.get(1).unwrap_or_default().to_owned(),
        ));
    }
    Ok(edges)
}

/// External per-pair score matrix: `source,target,score`. Used to run other
/// detectors' outputs through the same evaluation pipeline.
pub fn read_score_matrix_csv(path: &Path) -> Result<Vec<(String, String, f64)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::schema(path, e.to_string()))?
        .clone();
    for required in ["source", "target", "score"] {
        if !headers.iter().any(|h| h == required) {
            return Err(Error::schema(path, format!("missing column {required}")));
        }
    }
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (src, tgt, score) = (col("source"), col("target"), col("score"));
    let mut entries = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::schema(path, e.to_string()))?;
        let value = row.get(score).unwrap_or_default();
        let value = value
            .parse::<f64>()
            .map_err(|_| Error::schema(path, format!("bad score value {value:?}")))?;
        entries.push((
            row.get(src).unwrap_or_default().to_owned(),
            row.get(tgt).unwrap_or_default().to_owned(),
            value,
        ));
    }
    Ok(entries)
}

pub fn write_marked_users(path: &Path, marked: &BTreeSet<String>) -> Result<()> {
    let mut w = create(path)?;
    for user in marked {
        writeln!(w, "{user}").map_err(|e| Error::io(path, e))?;
    }
    finish(w, path)
}

/// Binned matrix dump: rows are users, columns are bins.
pub fn write_binned_csv(path: &Path, series: &[BinnedSeries]) -> Result<()> {
    let mut w = create(path)?;
    let n_bins = series.first().map_or(0, |s| s.len());
    let header: Vec<String> = (0..n_bins).map(|i| format!("bin_{i}")).collect();
    writeln!(w, "user_id,{}", header.join(",")).map_err(|e| Error::io(path, e))?;
    for s in series {
        let row: Vec<String> = s.values.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{},{}", s.user_id, row.join(",")).map_err(|e| Error::io(path, e))?;
    }
    finish(w, path)
}

pub fn write_roc_csv(path: &Path, curve: &RocCurve) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "threshold,fpr,tpr").map_err(|e| Error::io(path, e))?;
    for (t, (fpr, tpr)) in curve.thresholds.iter().zip(&curve.points) {
        writeln!(w, "{t},{fpr},{tpr}").map_err(|e| Error::io(path, e))?;
    }
    finish(w, path)
}

pub fn write_histogram_csv(path: &Path, hist: &Histogram) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "bin_start,bin_end,count").map_err(|e| Error::io(path, e))?;
    for (i, &count) in hist.counts.iter().enumerate() {
        let start = hist.bin_start(i);
        let end = start + hist.bin_width;
        writeln!(w, "{start},{end},{count}").map_err(|e| Error::io(path, e))?;
    }
    finish(w, path)
}

pub fn write_agreement_csv(path: &Path, curve: &[(f64, f64)]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "threshold,agreed_proportion").map_err(|e| Error::io(path, e))?;
    for (t, p) in curve {
        writeln!(w, "{t},{p}").map_err(|e| Error::io(path, e))?;
    }
    finish(w, path)
}

/// Labels file: `user_id,label`.
pub fn read_labels_csv(path: &Path) -> Result<BTreeMap<String, Label>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut labels = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::schema(path, e.to_string()))?;
        let user = row.get(0).unwrap_or_default().to_owned();
        let label = row.get(1).unwrap_or_default();
        let label = label
            .parse::<Label>()
            .map_err(|e| Error::schema(path, e))?;
        labels.insert(user, label);
    }
    Ok(labels)
}

/// Pair agreement file: `user_a,user_b,agreed` with a boolean third column.
pub fn read_pair_agreement_csv(path: &Path) -> Result<BTreeMap<(String, String), bool>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut agreement = BTreeMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::schema(path, e.to_string()))?;
        let a = row.get(0).unwrap_or_default().to_owned();
        let b = row.get(1).unwrap_or_default().to_owned();
        let flag = row.get(2).unwrap_or_default();
        let flag = flag
            .parse::<bool>()
            .map_err(|_| Error::schema(path, format!("bad agreed value {flag:?}")))?;
        let key = if a <= b { (a, b) } else { (b, a) };
        agreement.insert(key, flag);
    }
    Ok(agreement)
}
