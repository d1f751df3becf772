//! The `eval` subcommand: score one or more detection bundles (or external
//! score matrices) against ground-truth labels, writing a metrics report
//! plus ROC, histogram and agreement curves.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;

use coordmap_core::eval::{
    self, detected_pairs, pair_breakdown, user_metrics, EdgeRecord, PairBreakdown, UserMetrics,
};
use coordmap_core::ingest::{self, InputFormat, Label};
use coordmap_core::io;

use crate::common::{ensure_dir, read_runtime, ArtifactEntry, Manifest};

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    /// Detection bundle directory (repeatable for side-by-side comparison).
    #[arg(long = "bundle")]
    pub bundles: Vec<PathBuf>,

    /// External per-pair score matrix CSV `source,target,score`
    /// (repeatable); run through the identical ROC pipeline.
    #[arg(long = "scores")]
    pub score_matrices: Vec<PathBuf>,

    /// Event log carrying ground-truth labels.
    #[arg(long)]
    pub events: Option<PathBuf>,

    /// Event log format override.
    #[arg(long)]
    pub format: Option<InputFormat>,

    /// Labels CSV `user_id,label` (alternative to --events).
    #[arg(long)]
    pub labels: Option<PathBuf>,

    /// Pair agreement CSV `user_a,user_b,agreed` for semantic-agreement
    /// curves.
    #[arg(long)]
    pub pair_agreement: Option<PathBuf>,

    /// Influence-score histogram bin width.
    #[arg(long, default_value_t = 0.005)]
    pub histogram_bin_width: f64,

    /// Output directory. Excluded from the config echo.
    #[arg(long)]
    #[serde(skip_serializing)]
    pub output: PathBuf,
}

/// Per-source evaluation report; `None` fields do not apply to that source
/// kind (score matrices have no decisions, hence no breakdown or marking).
#[derive(Debug, Clone, Serialize)]
pub struct SourceReport {
    pub name: String,
    pub kind: String,
    pub detected_pairs: Option<usize>,
    pub marked_users: Option<usize>,
    pub breakdown: Option<PairBreakdown>,
    pub user_metrics: Option<UserMetrics>,
    /// `None` when the source carries no scores to sweep (e.g. the language
    /// baseline) or labels cover only one class.
    pub auc: Option<f64>,
    pub youden_threshold: Option<f64>,
    pub youden_j: Option<f64>,
    pub detect_runtime_ms: Option<u64>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EvalStats {
    pub sources: usize,
    pub labelled_users: usize,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<Vec<SourceReport>> {
    if args.bundles.is_empty() && args.score_matrices.is_empty() {
        bail!("nothing to evaluate: pass --bundle and/or --scores");
    }
    ensure_dir(&args.output)?;
    let labels = load_labels(args)?;
    if labels.is_empty() {
        bail!("no ground-truth labels found; pass --events or --labels");
    }
    let agreement = match &args.pair_agreement {
        Some(path) => Some(io::read_pair_agreement_csv(path)?),
        None => None,
    };

    let mut artifacts: Vec<ArtifactEntry> = Vec::new();
    let mut reports = Vec::new();
    let mut used_names = BTreeSet::new();

    for bundle in &args.bundles {
        let name = unique_name(source_name(bundle), &mut used_names);
        let records = io::read_edges_csv(&bundle.join("edges.csv"))?;
        let marked = read_marked(bundle)?;
        let report = evaluate_bundle(
            args,
            &name,
            &records,
            marked,
            &labels,
            agreement.as_ref(),
            read_runtime(bundle),
            &mut artifacts,
        )?;
        reports.push(report);
    }

    for path in &args.score_matrices {
        let name = unique_name(source_name(path), &mut used_names);
        let entries = io::read_score_matrix_csv(path)?;
        let scores = eval::user_scores_from_matrix(&entries);
        let curve = eval::roc(&scores, &labels, None)?;
        io::write_roc_csv(&args.output.join(format!("roc_{name}.csv")), &curve)?;
        artifacts.push(ArtifactEntry {
            name: format!("roc_{name}.csv"),
            deterministic: true,
        });
        let (auc, youden_threshold, youden_j) =
            (Some(curve.auc), Some(curve.youden_threshold), Some(curve.youden_j));
        let values: Vec<f64> = entries.iter().map(|(_, _, s)| *s).collect();
        let hist = eval::score_histogram(&values, args.histogram_bin_width)?;
        io::write_histogram_csv(&args.output.join(format!("histogram_{name}.csv")), &hist)?;
        artifacts.push(ArtifactEntry {
            name: format!("histogram_{name}.csv"),
            deterministic: true,
        });
        reports.push(SourceReport {
            name,
            kind: "scores".into(),
            detected_pairs: None,
            marked_users: None,
            breakdown: None,
            user_metrics: None,
            auc,
            youden_threshold,
            youden_j,
            detect_runtime_ms: None,
        });
    }

    let body = serde_json::to_string_pretty(&reports)?;
    std::fs::write(args.output.join("metrics.json"), body + "\n")?;
    artifacts.push(ArtifactEntry {
        name: "metrics.json".into(),
        deterministic: true,
    });

    let manifest = Manifest {
        tool: "coordmap".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: args.clone(),
        stats: EvalStats {
            sources: reports.len(),
            labelled_users: labels.len(),
        },
        artifacts,
    };
    crate::common::write_manifest(&args.output, &manifest)?;

    print_table(&reports);
    Ok(reports)
}

#[allow(clippy::too_many_arguments)]
fn evaluate_bundle(
    args: &EvalArgs,
    name: &str,
    records: &[EdgeRecord],
    marked: Option<BTreeSet<String>>,
    labels: &BTreeMap<String, Label>,
    agreement: Option<&BTreeMap<(String, String), bool>>,
    runtime: Option<u64>,
    artifacts: &mut Vec<ArtifactEntry>,
) -> Result<SourceReport> {
    let pairs = detected_pairs(records);
    let breakdown = pair_breakdown(&pairs, labels);

    // Fall back to the marking rule when the bundle has no marked list.
    let marked = marked.unwrap_or_else(|| {
        let mut set = BTreeSet::new();
        for (a, b) in &pairs {
            set.insert(a.clone());
            set.insert(b.clone());
        }
        set
    });
    let metrics = user_metrics(&marked, labels);

    // Sweep the ROC only when the bundle carries pairwise scores; the
    // language baseline emits decisions without scores.
    let mut auc = None;
    let mut youden_threshold = None;
    let mut youden_j = None;
    if !records.is_empty() {
        let scores = eval::user_scores(records);
        let curve = eval::roc(&scores, labels, None)?;
        io::write_roc_csv(&args.output.join(format!("roc_{name}.csv")), &curve)?;
        artifacts.push(ArtifactEntry {
            name: format!("roc_{name}.csv"),
            deterministic: true,
        });
        auc = Some(curve.auc);
        youden_threshold = Some(curve.youden_threshold);
        youden_j = Some(curve.youden_j);
    }

    let rho_values: Vec<f64> = records.iter().filter_map(|r| r.rho_max).collect();
    let hist = eval::score_histogram(&rho_values, args.histogram_bin_width)?;
    io::write_histogram_csv(&args.output.join(format!("histogram_{name}.csv")), &hist)?;
    artifacts.push(ArtifactEntry {
        name: format!("histogram_{name}.csv"),
        deterministic: true,
    });

    if let Some(agreement) = agreement {
        let pair_scores = eval::pair_scores(records);
        let grid: Vec<f64> = (0..20).map(|i| i as f64 * 0.05).collect();
        let agreement_curve = eval::semantic_agreement_curve(&pair_scores, agreement, &grid)?;
        io::write_agreement_csv(
            &args.output.join(format!("agreement_{name}.csv")),
            &agreement_curve,
        )?;
        artifacts.push(ArtifactEntry {
            name: format!("agreement_{name}.csv"),
            deterministic: true,
        });
    }

    Ok(SourceReport {
        name: name.to_owned(),
        kind: "bundle".into(),
        detected_pairs: Some(pairs.len()),
        marked_users: Some(marked.len()),
        breakdown: Some(breakdown),
        user_metrics: Some(metrics),
        auc,
        youden_threshold,
        youden_j,
        detect_runtime_ms: runtime,
    })
}

fn load_labels(args: &EvalArgs) -> Result<BTreeMap<String, Label>> {
    if let Some(path) = &args.labels {
        return Ok(io::read_labels_csv(path)?);
    }
    if let Some(path) = &args.events {
        let format = args
            .format
            .or_else(|| InputFormat::from_path(path))
            .context("cannot infer event log format; pass --format")?;
        let report = ingest::load_events(path, format)?;
        return Ok(ingest::user_labels(&report.events));
    }
    Ok(BTreeMap::new())
}

fn read_marked(bundle: &Path) -> Result<Option<BTreeSet<String>>> {
    let path = bundle.join("marked_users.txt");
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path)?;
    Ok(Some(
        text.lines()
            .filter(|l| !l.is_empty())
            .map(str::to_owned)
            .collect(),
    ))
}

fn source_name(path: &Path) -> String {
    path.file_stem()
        .or_else(|| path.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "source".into())
        .replace(['/', '\\', ' '], "_")
}

fn unique_name(base: String, used: &mut BTreeSet<String>) -> String {
    let mut name = base.clone();
    let mut i = 1;
    while !used.insert(name.clone()) {
        i += 1;
        name = format!("{base}_{i}");
    }
    name
}

fn print_table(reports: &[SourceReport]) {
    println!(
        "{:<18} {:>9} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>10}",
        "source", "precision", "recall", "f1", "auc", "youden", "pairs", "marked", "runtime_ms"
    );
    for r in reports {
        let (p, rec, f1) = r
            .user_metrics
            .map(|m| (m.precision, m.recall, m.f1))
            .unwrap_or((f64::NAN, f64::NAN, f64::NAN));
        println!(
            "{:<18} {:>9.3} {:>7.3} {:>7.3} {:>7} {:>7} {:>7} {:>7} {:>10}",
            r.name,
            p,
            rec,
            f1,
            r.auc.map_or("-".into(), |v| format!("{v:.4}")),
            r.youden_threshold.map_or("-".into(), |v| format!("{v:.3}")),
            r.detected_pairs.map_or("-".into(), |v| v.to_string()),
            r.marked_users.map_or("-".into(), |v| v.to_string()),
            r.detect_runtime_ms.map_or("-".into(), |v| v.to_string()),
        );
    }
}
