//! Scoring of detections against ground truth: pair-category breakdowns,
//! user-level precision/recall, ROC/AUC with the Youden-optimal threshold,
//! influence-score histograms and semantic-agreement curves.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ccm::CrossMapResult;
use crate::error::{Error, Result};
use crate::ingest::Label;

/// One directional detection record in the shared edge schema
/// (`source,mapper,rho_max,slope,decision`). Cross-map results, Granger
/// results and re-loaded CSV exports all reduce to this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub source: String,
    pub mapper: String,
    pub rho_max: Option<f64>,
    pub slope: Option<f64>,
    pub decision: bool,
}

impl From<&CrossMapResult> for EdgeRecord {
    fn from(r: &CrossMapResult) -> Self {
        EdgeRecord {
            source: r.source.clone(),
            mapper: r.mapper.clone(),
            rho_max: r.rho_max,
            slope: r.slope,
            decision: r.decision,
        }
    }
}

fn unordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_owned(), b.to_owned())
    } else {
        (b.to_owned(), a.to_owned())
    }
}

/// Unordered pairs detected in either direction.
pub fn detected_pairs(records: &[EdgeRecord]) -> BTreeSet<(String, String)> {
    records
        .iter()
        .filter(|r| r.decision)
        .map(|r| unordered(&r.source, &r.mapper))
        .collect()
}

/// Per-user influence score: the maximum rho over the user's incident
/// directional results whose slope test passes. Users with no passing
/// incident result score -1 (never detected at any threshold in [0, 1]).
pub fn user_scores(records: &[EdgeRecord]) -> BTreeMap<String, f64> {
    let mut scores: BTreeMap<String, f64> = BTreeMap::new();
    for r in records {
        scores.entry(r.source.clone()).or_insert(-1.0);
        scores.entry(r.mapper.clone()).or_insert(-1.0);
        if let (Some(slope), Some(rho)) = (r.slope, r.rho_max) {
            if slope > 0.0 {
                for id in [&r.source, &r.mapper] {
                    let slot = scores.get_mut(id).unwrap();
                    if rho > *slot {
                        *slot = rho;
                    }
                }
            }
        }
    }
    scores
}

/// Per-pair influence score: maximum rho over the pair's slope-passing
/// directions, -1 when neither direction passes.
pub fn pair_scores(records: &[EdgeRecord]) -> BTreeMap<(String, String), f64> {
    let mut scores: BTreeMap<(String, String), f64> = BTreeMap::new();
    for r in records {
        let key = unordered(&r.source, &r.mapper);
        let slot = scores.entry(key).or_insert(-1.0);
        if let (Some(slope), Some(rho)) = (r.slope, r.rho_max) {
            if slope > 0.0 && rho > *slot {
                *slot = rho;
            }
        }
    }
    scores
}

/// Per-user score from an external per-pair score matrix: the maximum score
/// over the user's incident entries. Feeds the same ROC pipeline as the
/// cross-map scores.
pub fn user_scores_from_matrix(entries: &[(String, String, f64)]) -> BTreeMap<String, f64> {
    let mut scores: BTreeMap<String, f64> = BTreeMap::new();
    for (a, b, score) in entries {
        for id in [a, b] {
            let slot = scores.entry(id.clone()).or_insert(f64::NEG_INFINITY);
            if *score > *slot {
                *slot = *score;
            }
        }
    }
    scores
}

/// Detected-pair counts by ground-truth category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairBreakdown {
    /// coordinated-coordinated
    pub cc: usize,
    /// coordinated-normal
    pub cn: usize,
    /// normal-normal
    pub nn: usize,
    /// pairs with an unlabeled endpoint, excluded from the categories
    pub unlabeled: usize,
}

pub fn pair_breakdown(
    pairs: &BTreeSet<(String, String)>,
    labels: &BTreeMap<String, Label>,
) -> PairBreakdown {
    let mut out = PairBreakdown::default();
    for (a, b) in pairs {
        match (labels.get(a), labels.get(b)) {
            (Some(Label::Coordinated), Some(Label::Coordinated)) => out.cc += 1,
            (Some(Label::Normal), Some(Label::Normal)) => out.nn += 1,
            (Some(_), Some(_)) => out.cn += 1,
            _ => out.unlabeled += 1,
        }
    }
    out
}

/// User-level classification metrics over the predicted coordinated set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_count: usize,
    /// False when no labelled user was predicted positive; precision is then
    /// reported as 0.
    pub precision_defined: bool,
    /// Predicted users that carry no ground-truth label (excluded above).
    pub unlabeled_predicted: usize,
}

pub fn user_metrics(
    predicted: &BTreeSet<String>,
    labels: &BTreeMap<String, Label>,
) -> UserMetrics {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut unlabeled = 0usize;
    for user in predicted {
        match labels.get(user) {
            Some(Label::Coordinated) => tp += 1,
            Some(Label::Normal) => fp += 1,
            None => unlabeled += 1,
        }
    }
    let fn_count = labels
        .iter()
        .filter(|(user, &label)| label == Label::Coordinated && !predicted.contains(*user))
        .count();
    let precision_defined = tp + fp > 0;
    let precision = if precision_defined {
        tp as f64 / (tp + fp) as f64
    } else {
        0.0
    };
    let recall = if tp + fn_count > 0 {
        tp as f64 / (tp + fn_count) as f64
    } else {
        0.0
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    UserMetrics {
        precision,
        recall,
        f1,
        tp,
        fp,
        fn_count,
        precision_defined,
        unlabeled_predicted: unlabeled,
    }
}

/// ROC curve with trapezoid AUC and the Youden-optimal operating threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Thresholds in descending order.
    pub thresholds: Vec<f64>,
    /// `(fpr, tpr)` aligned with `thresholds`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
    pub youden_threshold: f64,
    pub youden_j: f64,
}

/// Sweep thresholds over per-user scores: a user is predicted positive at
/// threshold `t` when its score is at least `t`. The default grid is the
/// sorted unique scores plus the {0, 1} endpoints.
pub fn roc(
    scores: &BTreeMap<String, f64>,
    labels: &BTreeMap<String, Label>,
    grid: Option<&[f64]>,
) -> Result<RocCurve> {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (user, &score) in scores {
        match labels.get(user) {
            Some(Label::Coordinated) => pos.push(score),
            Some(Label::Normal) => neg.push(score),
            None => {}
        }
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Degenerate(
            "ROC needs at least one positive and one negative label".into(),
        ));
    }

    let thresholds: Vec<f64> = match grid {
        Some(g) => {
            let mut g = g.to_vec();
            g.sort_by(|a, b| b.total_cmp(a));
            g.dedup();
            g
        }
        None => {
            let mut g: Vec<f64> = scores.values().copied().chain([0.0, 1.0]).collect();
            g.sort_by(|a, b| b.total_cmp(a));
            g.dedup();
            g
        }
    };

    let p = pos.len() as f64;
    let n = neg.len() as f64;
    let mut points = Vec::with_capacity(thresholds.len());
    let mut youden_threshold = thresholds[0];
    let mut youden_j = f64::NEG_INFINITY;
    for &t in &thresholds {
        let tpr = pos.iter().filter(|&&s| s >= t).count() as f64 / p;
        let fpr = neg.iter().filter(|&&s| s >= t).count() as f64 / n;
        if tpr - fpr > youden_j {
            youden_j = tpr - fpr;
            youden_threshold = t;
        }
        points.push((fpr, tpr));
    }

    // Trapezoid rule over the curve closed at (0,0) and (1,1).
    let mut curve = Vec::with_capacity(points.len() + 2);
    curve.push((0.0, 0.0));
    curve.extend(points.iter().copied());
    curve.push((1.0, 1.0));
    let mut auc = 0.0;
    for w in curve.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        auc += (x1 - x0) * (y0 + y1) / 2.0;
    }

    Ok(RocCurve {
        thresholds,
        points,
        auc,
        youden_threshold,
        youden_j,
    })
}

/// Histogram of influence scores over [-1, 1] with fixed-width bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn bin_start(&self, i: usize) -> f64 {
        -1.0 + i as f64 * self.bin_width
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn score_histogram(scores: &[f64], bin_width: f64) -> Result<Histogram> {
    if bin_width <= 0.0 || !bin_width.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "histogram bin width must be positive, got {bin_width}"
        )));
    }
    let n_bins = (2.0 / bin_width).ceil() as usize;
    let mut counts = vec![0u64; n_bins];
    for &s in scores {
        let clamped = s.clamp(-1.0, 1.0);
        let idx = (((clamped + 1.0) / bin_width).floor() as usize).min(n_bins - 1);
        counts[idx] += 1;
    }
    Ok(Histogram { bin_width, counts })
}

/// For each threshold, the fraction of detected pairs (score >= t) whose
/// agreement flag is true. Thresholds with no detected pair are omitted.
pub fn semantic_agreement_curve(
    pair_scores: &BTreeMap<(String, String), f64>,
    agreement: &BTreeMap<(String, String), bool>,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    for pair in pair_scores.keys() {
        if !agreement.contains_key(pair) {
            return Err(Error::InvalidParameter(format!(
                "agreement labels missing pair ({}, {})",
                pair.0, pair.1
            )));
        }
    }
    let mut curve = Vec::new();
    for &t in grid {
        let mut detected = 0usize;
        let mut agreed = 0usize;
        for (pair, &score) in pair_scores {
            if score >= t {
                detected += 1;
                if agreement[pair] {
                    agreed += 1;
                }
            }
        }
        if detected > 0 {
            curve.push((t, agreed as f64 / detected as f64));
        }
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn labels(entries: &[(&str, Label)]) -> BTreeMap<String, Label> {
        entries.iter().map(|(u, l)| (u.to_string(), *l)).collect()
    }

    fn record(source: &str, mapper: &str, rho: f64, slope: f64, decision: bool) -> EdgeRecord {
        EdgeRecord {
            source: source.into(),
            mapper: mapper.into(),
            rho_max: Some(rho),
            slope: Some(slope),
            decision,
        }
    }

    #[test]
    fn breakdown_counts_categories() {
        let pairs: BTreeSet<(String, String)> =
            [("a".to_string(), "b".to_string())].into_iter().collect();
        let l = labels(&[("a", Label::Coordinated), ("b", Label::Coordinated)]);
        let breakdown = pair_breakdown(&pairs, &l);
        assert_eq!(breakdown.cc, 1);
        assert_eq!(breakdown.cn + breakdown.nn + breakdown.unlabeled, 0);
    }

    #[test]
    fn breakdown_of_empty_detections_is_zero() {
        let breakdown = pair_breakdown(&BTreeSet::new(), &labels(&[("a", Label::Normal)]));
        assert_eq!(breakdown, PairBreakdown::default());
    }

    #[test]
    fn breakdown_categories_are_exhaustive_and_disjoint() {
        let mut pairs = BTreeSet::new();
        pairs.insert(("a".to_string(), "b".to_string()));
        pairs.insert(("a".to_string(), "c".to_string()));
        pairs.insert(("b".to_string(), "c".to_string()));
        pairs.insert(("a".to_string(), "x".to_string()));
        let l = labels(&[
            ("a", Label::Coordinated),
            ("b", Label::Normal),
            ("c", Label::Coordinated),
        ]);
        let b = pair_breakdown(&pairs, &l);
        assert_eq!(b.cc + b.cn + b.nn + b.unlabeled, pairs.len());
        assert_eq!((b.cc, b.cn, b.nn, b.unlabeled), (1, 2, 0, 1));
    }

    #[test]
    fn perfect_prediction_scores_one() {
        let l = labels(&[("a", Label::Coordinated), ("b", Label::Normal)]);
        let predicted: BTreeSet<String> = ["a".to_string()].into();
        let m = user_metrics(&predicted, &l);
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn empty_prediction_flags_precision() {
        let l = labels(&[("a", Label::Coordinated)]);
        let m = user_metrics(&BTreeSet::new(), &l);
        assert!(!m.precision_defined);
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.recall, 0.0);
    }

    #[test]
    fn metrics_match_hand_arithmetic() {
        // TP=132, FP=33, FN=68 -> P=0.8, R=0.66, F1=2PR/(P+R).
        let mut l = BTreeMap::new();
        let mut predicted = BTreeSet::new();
        for i in 0..132 {
            let u = format!("tp{i:03}");
            l.insert(u.clone(), Label::Coordinated);
            predicted.insert(u);
        }
        for i in 0..33 {
            let u = format!("fp{i:03}");
            l.insert(u.clone(), Label::Normal);
            predicted.insert(u);
        }
        for i in 0..68 {
            l.insert(format!("fn{i:03}"), Label::Coordinated);
        }
        let m = user_metrics(&predicted, &l);
        assert!((m.precision - 0.800).abs() < 1e-12);
        assert!((m.recall - 0.660).abs() < 1e-12);
        let expected_f1 = 2.0 * 0.8 * 0.66 / (0.8 + 0.66);
        assert!((m.f1 - expected_f1).abs() < 1e-12);
        assert!((m.f1 - 0.723).abs() < 5e-4);
        // Harmonic-mean identity.
        assert!((m.f1 - 2.0 * m.precision * m.recall / (m.precision + m.recall)).abs() < 1e-15);
    }

    #[test]
    fn perfectly_separating_scores_have_auc_one() {
        let mut scores = BTreeMap::new();
        let mut l = BTreeMap::new();
        for i in 0..10 {
            let u = format!("p{i}");
            scores.insert(u.clone(), 0.9);
            l.insert(u, Label::Coordinated);
            let u = format!("n{i}");
            scores.insert(u.clone(), 0.1);
            l.insert(u, Label::Normal);
        }
        let curve = roc(&scores, &l, None).unwrap();
        assert!((curve.auc - 1.0).abs() < 1e-12);
        assert!((curve.youden_j - 1.0).abs() < 1e-12);
        assert!(curve.youden_threshold > 0.1 && curve.youden_threshold <= 0.9);
    }

    #[test]
    fn random_scores_have_auc_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut scores = BTreeMap::new();
        let mut l = BTreeMap::new();
        for i in 0..1000 {
            let u = format!("u{i:04}");
            scores.insert(u.clone(), rng.gen_range(0.0..1.0));
            l.insert(
                u,
                if rng.gen_bool(0.5) {
                    Label::Coordinated
                } else {
                    Label::Normal
                },
            );
        }
        let curve = roc(&scores, &l, None).unwrap();
        assert!((curve.auc - 0.5).abs() < 0.05, "auc = {}", curve.auc);
    }

    #[test]
    fn single_class_labels_error() {
        let scores: BTreeMap<String, f64> = [("a".to_string(), 0.5)].into();
        let l = labels(&[("a", Label::Coordinated)]);
        assert!(matches!(roc(&scores, &l, None), Err(Error::Degenerate(_))));
    }

    #[test]
    fn roc_points_are_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut scores = BTreeMap::new();
        let mut l = BTreeMap::new();
        for i in 0..50 {
            let u = format!("u{i:02}");
            scores.insert(u.clone(), rng.gen_range(0.0..1.0));
            l.insert(
                u,
                if i % 3 == 0 {
                    Label::Coordinated
                } else {
                    Label::Normal
                },
            );
        }
        let curve = roc(&scores, &l, None).unwrap();
        for w in curve.points.windows(2) {
            assert!(w[1].0 >= w[0].0);
            assert!(w[1].1 >= w[0].1);
        }
    }

    #[test]
    fn close_scores_share_a_histogram_bin() {
        let h = score_histogram(&[0.1, 0.1002], 0.005).unwrap();
        assert_eq!(h.total(), 2);
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
    }

    #[test]
    fn empty_scores_make_an_empty_histogram() {
        let h = score_histogram(&[], 0.005).unwrap();
        assert_eq!(h.total(), 0);
    }

    #[test]
    fn histogram_conserves_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let scores: Vec<f64> = (0..500).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h = score_histogram(&scores, 0.01).unwrap();
        assert_eq!(h.total(), 500);
    }

    #[test]
    fn uniform_scores_fill_bins_roughly_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let scores: Vec<f64> = (0..20_000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h = score_histogram(&scores, 0.25).unwrap();
        let expected = 20_000.0 / h.counts.len() as f64;
        for &c in &h.counts {
            assert!(
                (c as f64 - expected).abs() < 5.0 * expected.sqrt(),
                "bin count {c} vs expected {expected}"
            );
        }
    }

    #[test]
    fn user_scores_take_max_over_slope_passing_results() {
        let records = vec![
            record("a", "b", 0.9, -0.1, false), // negative slope: ignored
            record("a", "b", 0.6, 0.2, true),
            record("b", "c", 0.4, 0.3, false),
        ];
        let scores = user_scores(&records);
        assert_eq!(scores["a"], 0.6);
        assert_eq!(scores["b"], 0.6);
        assert_eq!(scores["c"], 0.4);
    }

    #[test]
    fn agreement_curve_all_agreed_is_one() {
        let mut ps = BTreeMap::new();
        ps.insert(("a".to_string(), "b".to_string()), 0.7);
        ps.insert(("a".to_string(), "c".to_string()), 0.9);
        let mut agree = BTreeMap::new();
        agree.insert(("a".to_string(), "b".to_string()), true);
        agree.insert(("a".to_string(), "c".to_string()), true);
        let curve = semantic_agreement_curve(&ps, &agree, &[0.5, 0.8]).unwrap();
        assert_eq!(curve, vec![(0.5, 1.0), (0.8, 1.0)]);
    }

    #[test]
    fn agreement_curve_steps_at_constructed_boundary() {
        // agreement <=> score > 0.6
        let mut ps = BTreeMap::new();
        let mut agree = BTreeMap::new();
        for i in 0..10 {
            let pair = (format!("a{i}"), format!("b{i}"));
            let score = 0.3 + 0.05 * i as f64; // 0.3 .. 0.75
            ps.insert(pair.clone(), score);
            agree.insert(pair, score > 0.6);
        }
        let curve = semantic_agreement_curve(&ps, &agree, &[0.0, 0.65]).unwrap();
        assert!(curve[0].1 < 1.0);
        assert_eq!(curve[1].1, 1.0);
    }

    #[test]
    fn agreement_curve_requires_full_coverage() {
        let mut ps = BTreeMap::new();
        ps.insert(("a".to_string(), "b".to_string()), 0.7);
        let err = semantic_agreement_curve(&ps, &BTreeMap::new(), &[0.5]);
        assert!(err.is_err());
    }

    #[test]
    fn agreement_curve_omits_empty_thresholds() {
        let mut ps = BTreeMap::new();
        ps.insert(("a".to_string(), "b".to_string()), 0.4);
        let mut agree = BTreeMap::new();
        agree.insert(("a".to_string(), "b".to_string()), true);
        let curve = semantic_agreement_curve(&ps, &agree, &[0.5, 0.9]).unwrap();
        assert!(curve.is_empty());
    }
}
