//! The `cluster` subcommand: standalone topic clustering of users, topic
//! count selection by silhouette, and adjusted-Rand comparison of
//! partitions.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;

use coordmap_core::ingest::{self, InputFormat};
use coordmap_core::io;
use coordmap_core::topics;

use crate::common::{ensure_dir, parse_time, with_pool, ArtifactEntry, Manifest};

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClusterArgs {
    /// Input event log with text metadata.
    #[arg(long)]
    pub input: Option<PathBuf>,

    #[arg(long)]
    pub format: Option<InputFormat>,

    #[arg(long)]
    pub window_start: Option<String>,

    #[arg(long)]
    pub window_end: Option<String>,

    /// Fixed topic count (default 5 when no candidates are given).
    #[arg(long)]
    pub topics: Option<usize>,

    /// Candidate topic counts; the best by mean silhouette is chosen.
    #[arg(long, value_delimiter = ',')]
    pub candidates: Vec<usize>,

    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    #[arg(long, default_value_t = 400)]
    pub max_iter: usize,

    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,

    /// Stop-word file overriding the built-in English+Russian lists.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,

    /// Compare the computed partition against this partition CSV (ARI).
    #[arg(long)]
    pub compare: Option<PathBuf>,

    /// Compute the adjusted Rand index of two partition CSVs and exit.
    #[arg(long, num_args = 2)]
    pub ari: Vec<PathBuf>,

    #[arg(long)]
    #[serde(skip_serializing)]
    pub threads: Option<usize>,

    /// Output directory (topics.json + partition.csv). Excluded from the
    /// config echo.
    #[arg(long)]
    #[serde(skip_serializing)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterOutcome {
    pub n_topics: Option<usize>,
    pub silhouette_scores: Vec<topics::TopicCountScore>,
    pub ari: Option<f64>,
}

pub fn cmd_cluster(args: &ClusterArgs) -> Result<ClusterOutcome> {
    if args.ari.len() == 2 {
        let a = io::read_partition_csv(&args.ari[0])?;
        let b = io::read_partition_csv(&args.ari[1])?;
        let ari = topics::compare_partitions(&a, &b)?;
        println!("adjusted_rand_index {ari}");
        return Ok(ClusterOutcome {
            n_topics: None,
            silhouette_scores: Vec::new(),
            ari: Some(ari),
        });
    }

    let input = args
        .input
        .as_ref()
        .context("--input is required unless --ari is used")?;
    let output = args
        .output
        .as_ref()
        .context("--output is required unless --ari is used")?;
    ensure_dir(output)?;

    let format = args
        .format
        .or_else(|| InputFormat::from_path(input))
        .context("cannot infer input format; pass --format")?;
    let report = ingest::load_events(input, format)?;
    let events = report.events;
    if events.is_empty() {
        bail!("no events loaded from {}", input.display());
    }
    let t_start = match &args.window_start {
        Some(s) => parse_time(s)?,
        None => events.iter().map(|e| e.timestamp).min().unwrap(),
    };
    let t_end = match &args.window_end {
        Some(s) => parse_time(s)?,
        None => events.iter().map(|e| e.timestamp).max().unwrap() + 1,
    };
    let window = ingest::AnalysisWindow::new(t_start, t_end)?;

    let stopwords = match &args.stopwords {
        Some(path) => topics::load_stopwords(path)?,
        None => topics::builtin_stopwords(),
    };

    let mut docs = Vec::new();
    let mut user_docs: BTreeMap<String, String> = BTreeMap::new();
    for event in &events {
        if !window.contains(event.timestamp) {
            continue;
        }
        let Some(text) = event.text.as_deref().filter(|t| !t.trim().is_empty()) else {
            continue;
        };
        docs.push((format!("{}#{}", event.user_id, docs.len()), text.to_owned()));
        let slot = user_docs.entry(event.user_id.clone()).or_default();
        if !slot.is_empty() {
            slot.push(' ');
        }
        slot.push_str(text);
    }
    if docs.is_empty() {
        bail!("no events with text metadata inside the window");
    }

    let corpus = topics::build_tfidf(&docs, &stopwords)?;
    let (n, scores) = with_pool(args.threads, || -> coordmap_core::Result<_> {
        if args.candidates.is_empty() {
            Ok((args.topics.unwrap_or(5), Vec::new()))
        } else {
            topics::choose_topic_count(&corpus, &args.candidates, args.max_iter, args.tol, args.seed)
        }
    })??;
    let model = with_pool(args.threads, || {
        topics::fit_nmf(&corpus, n, args.max_iter, args.tol, args.seed)
    })??;
    let assignment = topics::assign_user_topics(&model, &corpus, &user_docs, &stopwords);

    let topic_report = topics::topic_report(&model, &assignment);
    std::fs::write(
        output.join("topics.json"),
        serde_json::to_string_pretty(&topic_report)? + "\n",
    )?;
    io::write_partition_csv(&output.join("partition.csv"), &assignment.assigned)?;

    let ari = match &args.compare {
        Some(path) => {
            let other = io::read_partition_csv(path)?;
            let shared: BTreeSet<&String> = assignment
                .assigned
                .keys()
                .filter(|k| other.contains_key(*k))
                .collect();
            let ours: BTreeMap<String, usize> = assignment
                .assigned
                .iter()
                .filter(|(k, _)| shared.contains(k))
                .map(|(k, &v)| (k.clone(), v))
                .collect();
            let theirs: BTreeMap<String, String> = other
                .into_iter()
                .filter(|(k, _)| shared.contains(k))
                .collect();
            let ari = topics::compare_partitions(&ours, &theirs)?;
            println!("adjusted_rand_index {ari}");
            Some(ari)
        }
        None => None,
    };

    let outcome = ClusterOutcome {
        n_topics: Some(n),
        silhouette_scores: scores,
        ari,
    };
    let manifest = Manifest {
        tool: "coordmap".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: args.clone(),
        stats: outcome.clone(),
        artifacts: vec![
            ArtifactEntry {
                name: "topics.json".into(),
                deterministic: true,
            },
            ArtifactEntry {
                name: "partition.csv".into(),
                deterministic: true,
            },
        ],
    };
    crate::common::write_manifest(output, &manifest)?;
    Ok(outcome)
}
