//! The `detect` subcommand: ingest -> series -> (topic pair filter) ->
//! cross map / baseline -> influence graph, with all exports written to an
//! output bundle directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use coordmap_core::baselines;
use coordmap_core::ccm::{self, CrossMapResult, EmbeddingParams};
use coordmap_core::eval::EdgeRecord;
use coordmap_core::graph::{build_graph_from_records, NodeAttributes};
use coordmap_core::ingest::{self, AnalysisWindow, Event, InputFormat};
use coordmap_core::io;
use coordmap_core::series::{bin_trace, split, BinnedSeries, SplitSeries, TrainRatio};
use coordmap_core::topics;

use crate::common::{ensure_dir, parse_time, with_pool, ArtifactEntry, Manifest};

/// Detection method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Convergent cross mapping over all pairs.
    Ccm,
    /// CCM restricted to intra-topic pairs (TF-IDF + NMF clustering).
    CcmNmf,
    /// Granger causality over all pairs.
    Gc,
    /// Majority-language classifier (no pairs).
    Lang,
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "ccm" => Ok(Method::Ccm),
            "ccm+nmf" | "ccm-nmf" => Ok(Method::CcmNmf),
            "gc" => Ok(Method::Gc),
            "lang" => Ok(Method::Lang),
            other => Err(format!(
                "unknown method {other:?} (expected ccm|ccm+nmf|gc|lang)"
            )),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Ccm => write!(f, "ccm"),
            Method::CcmNmf => write!(f, "ccm+nmf"),
            Method::Gc => write!(f, "gc"),
            Method::Lang => write!(f, "lang"),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DetectArgs {
    /// Input event log (JSONL or CSV).
    #[arg(long)]
    pub input: PathBuf,

    /// Input format; inferred from the extension when omitted.
    #[arg(long)]
    pub format: Option<InputFormat>,

    /// Analysis window start (epoch seconds or ISO-8601). Defaults to the
    /// earliest event.
    #[arg(long)]
    pub window_start: Option<String>,

    /// Analysis window end, exclusive. Defaults to just after the latest
    /// event.
    #[arg(long)]
    pub window_end: Option<String>,

    /// Bin size I in seconds.
    #[arg(long, default_value_t = 3600)]
    pub bin_width: i64,

    /// Embedding dimension E.
    #[arg(long, default_value_t = 10)]
    pub embedding_dim: usize,

    /// Embedding lag tau, in bins.
    #[arg(long, default_value_t = 1)]
    pub tau: usize,

    /// Influence-score threshold theta.
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,

    /// Train/test split, e.g. 3:1.
    #[arg(long, default_value = "3:1")]
    pub train_ratio: TrainRatio,

    /// ccm | ccm+nmf | gc | lang.
    #[arg(long, default_value = "ccm")]
    pub method: Method,

    /// Topic count n for ccm+nmf.
    #[arg(long, default_value_t = 5)]
    pub topics: usize,

    /// Seed for all randomness (NMF initialization).
    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Select the N most-active labelled-coordinated users...
    #[arg(long)]
    pub n_coordinated: Option<usize>,

    /// ...mixed with the N most-active labelled-normal users. Without both
    /// flags every user in the window is analysed.
    #[arg(long)]
    pub n_normal: Option<usize>,

    /// Granger maximum lag in bins; defaults to the embedding dimension.
    #[arg(long)]
    pub max_lag: Option<usize>,

    /// Granger significance level.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Language treated as coordinated by the lang baseline.
    #[arg(long, default_value = "ru")]
    pub coordinated_lang: String,

    /// Stop-word file overriding the built-in English+Russian lists.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,

    /// Cap on rayon worker threads. Not part of the config echo: worker
    /// count never changes results.
    #[arg(long)]
    #[serde(skip_serializing)]
    pub threads: Option<usize>,

    /// Also dump the binned user-by-bin count matrix.
    #[arg(long, default_value_t = false)]
    pub dump_binned: bool,

    /// Output bundle directory. Not part of the config echo so identical
    /// runs into different directories stay byte-identical.
    #[arg(long)]
    #[serde(skip_serializing)]
    pub output: PathBuf,
}

/// Deterministic run statistics, echoed in the manifest.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DetectStats {
    pub users: usize,
    pub full_pairs: usize,
    pub pairs_scanned: usize,
    pub edges: usize,
    pub marked: usize,
}

#[derive(Debug, Clone)]
pub struct DetectSummary {
    pub out_dir: PathBuf,
    pub stats: DetectStats,
    pub wall_ms: u64,
}

pub fn cmd_detect(args: &DetectArgs) -> Result<DetectSummary> {
    let started = Instant::now();
    ensure_dir(&args.output)?;

    let format = resolve_format(&args.input, args.format)?;
    let report = ingest::load_events(&args.input, format)?;
    if report.skipped > 0 {
        log::warn!("skipped {} malformed rows", report.skipped);
    }
    let events = report.events;
    if events.is_empty() {
        bail!("no events loaded from {}", args.input.display());
    }

    let window = resolve_window(&events, args.window_start.as_deref(), args.window_end.as_deref())?;
    let traces = ingest::build_traces(&events, &window);
    let labels = ingest::user_labels(&events);

    let selected: Vec<String> = match (args.n_coordinated, args.n_normal) {
        (None, None) => traces.keys().cloned().collect(),
        (nc, nn) => ingest::select_top_users(&traces, &labels, nc.unwrap_or(0), nn.unwrap_or(0)),
    };
    if selected.len() < 2 && args.method != Method::Lang {
        bail!("need at least 2 users in the window, got {}", selected.len());
    }

    let binned: Vec<BinnedSeries> = selected
        .iter()
        .map(|id| bin_trace(&traces[id], &window, args.bin_width))
        .collect::<coordmap_core::Result<_>>()?;

    if args.dump_binned {
        io::write_binned_csv(&args.output.join("binned.csv"), &binned)?;
    }

    let stopwords = match &args.stopwords {
        Some(path) => topics::load_stopwords(path)?,
        None => topics::builtin_stopwords(),
    };

    let selected_set: BTreeSet<&String> = selected.iter().collect();
    let full_pairs = selected.len() * selected.len().saturating_sub(1) / 2;

    let mut artifacts: Vec<ArtifactEntry> = Vec::new();
    let push = |artifacts: &mut Vec<ArtifactEntry>, name: &str| {
        artifacts.push(ArtifactEntry {
            name: name.to_owned(),
            deterministic: true,
        });
    };
    if args.dump_binned {
        push(&mut artifacts, "binned.csv");
    }

    // Run the selected detector, producing directional edge records.
    let mut pairs_scanned = full_pairs;
    let mut topic_assignment: Option<BTreeMap<String, usize>> = None;
    let records: Vec<EdgeRecord> = match args.method {
        Method::Ccm | Method::CcmNmf => {
            let pair_filter = if args.method == Method::CcmNmf {
                let (filter, assignment) = topic_filter(
                    args,
                    &events,
                    &window,
                    &selected_set,
                    &stopwords,
                    &args.output,
                    &mut artifacts,
                )?;
                pairs_scanned = filter.len();
                topic_assignment = Some(assignment);
                Some(filter)
            } else {
                None
            };
            let params = EmbeddingParams::new(args.embedding_dim, args.tau)?;
            let users: Vec<SplitSeries> = binned
                .iter()
                .cloned()
                .map(|b| split(b, args.train_ratio))
                .collect();
            let schedule = ccm::default_library_schedule(&params, users[0].train_len())?;
            let results: Vec<CrossMapResult> = with_pool(args.threads, || {
                ccm::pairwise_scan(&users, &params, &schedule, args.theta, pair_filter.as_ref())
            })??;
            io::write_convergence_csv(&args.output.join("convergence.csv"), &results)?;
            push(&mut artifacts, "convergence.csv");
            results.iter().map(EdgeRecord::from).collect()
        }
        Method::Gc => {
            let max_lag = args.max_lag.unwrap_or(args.embedding_dim);
            let mut records = Vec::with_capacity(full_pairs * 2);
            let mut order: Vec<usize> = (0..binned.len()).collect();
            order.sort_by(|&a, &b| binned[a].user_id.cmp(&binned[b].user_id));
            for (pos, &i) in order.iter().enumerate() {
                for &j in &order[pos + 1..] {
                    let (fwd, bwd) =
                        baselines::granger_pair(&binned[i], &binned[j], max_lag, args.alpha)?;
                    records.push(EdgeRecord::from(&fwd));
                    records.push(EdgeRecord::from(&bwd));
                }
            }
            records
        }
        Method::Lang => {
            pairs_scanned = 0;
            let in_window: Vec<Event> = events
                .iter()
                .filter(|e| window.contains(e.timestamp) && selected_set.contains(&e.user_id))
                .cloned()
                .collect();
            let decisions =
                baselines::language_classifier(&baselines::language_counts(&in_window), &args.coordinated_lang);
            let path = args.output.join("lang_decisions.csv");
            let mut body = String::from("user_id,coordinated,note\n");
            for d in &decisions {
                body.push_str(&format!(
                    "{},{},{}\n",
                    d.user_id,
                    d.coordinated,
                    d.note.as_deref().unwrap_or_default()
                ));
            }
            std::fs::write(&path, body)?;
            push(&mut artifacts, "lang_decisions.csv");

            // No pairwise structure: marked users come straight from the
            // classifier; the edge file stays empty in the shared schema.
            let marked: BTreeSet<String> = decisions
                .iter()
                .filter(|d| d.coordinated)
                .map(|d| d.user_id.clone())
                .collect();
            io::write_marked_users(&args.output.join("marked_users.txt"), &marked)?;
            Vec::new()
        }
    };

    io::write_edges_csv(&args.output.join("edges.csv"), &records)?;
    push(&mut artifacts, "edges.csv");

    // Influence graph, marking, degrees, communities, exports.
    let mut graph = build_graph_from_records(&records);
    graph.set_labels(&labels);
    let marked = if args.method == Method::Lang {
        // Written above from the classifier decisions.
        let path = args.output.join("marked_users.txt");
        let text = std::fs::read_to_string(&path)?;
        text.lines().map(str::to_owned).collect()
    } else {
        let marked = graph.mark_coordinated();
        io::write_marked_users(&args.output.join("marked_users.txt"), &marked)?;
        marked
    };
    push(&mut artifacts, "marked_users.txt");

    let degrees = graph.rank_by_net_degree();
    io::write_degree_csv(&args.output.join("degrees.csv"), &degrees)?;
    push(&mut artifacts, "degrees.csv");

    let communities = graph.detect_communities(1.0);
    io::write_partition_csv(&args.output.join("communities.csv"), &communities)?;
    push(&mut artifacts, "communities.csv");

    let net_degrees: BTreeMap<String, i64> = degrees
        .iter()
        .map(|d| (d.user_id.clone(), d.net_degree))
        .collect();
    let attrs = NodeAttributes {
        communities: Some(&communities),
        topics: topic_assignment.as_ref(),
        net_degrees: Some(&net_degrees),
    };
    std::fs::write(args.output.join("graph.dot"), graph.to_dot(&attrs))?;
    push(&mut artifacts, "graph.dot");
    std::fs::write(args.output.join("graph.graphml"), graph.to_graphml(&attrs))?;
    push(&mut artifacts, "graph.graphml");

    artifacts.push(ArtifactEntry {
        name: "runtime.json".into(),
        deterministic: false,
    });

    let stats = DetectStats {
        users: selected.len(),
        full_pairs,
        pairs_scanned,
        edges: graph.edges().len(),
        marked: marked.len(),
    };
    let manifest = Manifest {
        tool: "coordmap".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: args.clone(),
        stats,
        artifacts,
    };
    crate::common::write_manifest(&args.output, &manifest)?;

    let wall_ms = started.elapsed().as_millis() as u64;
    crate::common::write_runtime(&args.output, wall_ms)?;

    log::info!(
        "method {}: {} users, {} pairs scanned, {} edges, {} marked in {} ms",
        args.method,
        stats.users,
        stats.pairs_scanned,
        stats.edges,
        stats.marked,
        wall_ms
    );
    Ok(DetectSummary {
        out_dir: args.output.clone(),
        stats,
        wall_ms,
    })
}

fn resolve_format(input: &PathBuf, format: Option<InputFormat>) -> Result<InputFormat> {
    format
        .or_else(|| InputFormat::from_path(input))
        .with_context(|| {
            format!(
                "cannot infer format of {}; pass --format jsonl|csv",
                input.display()
            )
        })
}

fn resolve_window(
    events: &[Event],
    start: Option<&str>,
    end: Option<&str>,
) -> Result<AnalysisWindow> {
    let t_start = match start {
        Some(s) => parse_time(s)?,
        None => events.iter().map(|e| e.timestamp).min().unwrap(),
    };
    let t_end = match end {
        Some(s) => parse_time(s)?,
        None => events.iter().map(|e| e.timestamp).max().unwrap() + 1,
    };
    Ok(AnalysisWindow::new(t_start, t_end)?)
}

/// Fit the topic model on per-tweet documents of the selected users, assign
/// users by their concatenated text and derive the intra-topic pair set plus
/// the per-user topic labels.
#[allow(clippy::type_complexity)]
fn topic_filter(
    args: &DetectArgs,
    events: &[Event],
    window: &AnalysisWindow,
    selected: &BTreeSet<&String>,
    stopwords: &BTreeSet<String>,
    out_dir: &std::path::Path,
    artifacts: &mut Vec<ArtifactEntry>,
) -> Result<(BTreeSet<(String, String)>, BTreeMap<String, usize>)> {
    let mut docs: Vec<(String, String)> = Vec::new();
    let mut user_docs: BTreeMap<String, String> = BTreeMap::new();
    for event in events {
        if !window.contains(event.timestamp) || !selected.contains(&event.user_id) {
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
        bail!("method ccm+nmf requires text metadata, but no selected event has text");
    }

    let corpus = topics::build_tfidf(&docs, stopwords)?;
    let model = with_pool(args.threads, || {
        topics::fit_nmf(&corpus, args.topics, 400, 1e-5, args.seed)
    })??;
    let assignment = topics::assign_user_topics(&model, &corpus, &user_docs, stopwords);

    let report = topics::topic_report(&model, &assignment);
    std::fs::write(
        out_dir.join("topics.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    artifacts.push(ArtifactEntry {
        name: "topics.json".into(),
        deterministic: true,
    });
    io::write_partition_csv(out_dir.join("partition.csv").as_path(), &assignment.assigned)?;
    artifacts.push(ArtifactEntry {
        name: "partition.csv".into(),
        deterministic: true,
    });

    let filter = topics::topic_pair_filter(&assignment);
    Ok((filter, assignment.assigned))
}
