//! Baseline detectors for head-to-head comparison: pairwise Granger
//! causality on the same binned series, and the naive majority-language
//! classifier.

use std::collections::BTreeMap;

use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};
use crate::ingest::Event;
use crate::series::BinnedSeries;
use crate::stats::lstsq_rss;

/// Outcome of one directional Granger test `source => target`.
#[derive(Debug, Clone, PartialEq)]
pub struct GcResult {
    pub source: String,
    pub target: String,
    pub f_stat: Option<f64>,
    pub p_value: Option<f64>,
    pub max_lag: usize,
    pub alpha: f64,
    /// `p_value < alpha`; false when the test is undefined.
    pub decision: bool,
    pub note: Option<String>,
}

/// Test both directions of a pair: restricted AR(`max_lag`) of the target
/// against the unrestricted model augmented with the source's lags, F-test on
/// the exclusion restriction.
pub fn granger_pair(
    u1: &BinnedSeries,
    u2: &BinnedSeries,
    max_lag: usize,
    alpha: f64,
) -> Result<(GcResult, GcResult)> {
    if u1.len() != u2.len() {
        return Err(Error::InvalidParameter(format!(
            "series lengths differ: {} vs {}",
            u1.len(),
            u2.len()
        )));
    }
    if max_lag < 1 {
        return Err(Error::InvalidParameter("max_lag must be at least 1".into()));
    }
    if u1.len() <= 3 * max_lag + 1 {
        return Err(Error::InvalidParameter(format!(
            "series length {} leaves no residual degrees of freedom at lag {max_lag}",
            u1.len()
        )));
    }
    let x1 = standardize(&u1.to_f64());
    let x2 = standardize(&u2.to_f64());
    let forward = granger_direction(&u1.user_id, &u2.user_id, &x1, &x2, max_lag, alpha);
    let backward = granger_direction(&u2.user_id, &u1.user_id, &x2, &x1, max_lag, alpha);
    Ok((forward, backward))
}

/// Center and, when the spread allows, rescale a series. Affine-neutral for
/// the F statistic; purely a conditioning step for the normal equations.
fn standardize(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
    values.iter().map(|v| (v - mean) / scale).collect()
}

/// Does `x` Granger-cause `y`?
fn granger_direction(
    source: &str,
    target: &str,
    x: &[f64],
    y: &[f64],
    p: usize,
    alpha: f64,
) -> GcResult {
    let undefined = |note: &str| GcResult {
        source: source.to_owned(),
        target: target.to_owned(),
        f_stat: None,
        p_value: None,
        max_lag: p,
        alpha,
        decision: false,
        note: Some(note.to_owned()),
    };

    let n = y.len();
    let rows = n - p;
    let restricted_cols = 1 + p;
    let unrestricted_cols = 1 + 2 * p;

    let mut restricted = Vec::with_capacity(rows * restricted_cols);
    let mut unrestricted = Vec::with_capacity(rows * unrestricted_cols);
    let mut response = Vec::with_capacity(rows);
    for t in p..n {
        response.push(y[t]);
        restricted.push(1.0);
        unrestricted.push(1.0);
        for lag in 1..=p {
            restricted.push(y[t - lag]);
            unrestricted.push(y[t - lag]);
        }
        for lag in 1..=p {
            unrestricted.push(x[t - lag]);
        }
    }

    let rss_r = match lstsq_rss(&restricted, restricted_cols, &response) {
        Some(v) => v,
        None => return undefined("singular design matrix"),
    };
    let rss_u = match lstsq_rss(&unrestricted, unrestricted_cols, &response) {
        Some(v) => v,
        None => return undefined("singular design matrix"),
    };

    let df1 = p as f64;
    let df2 = (rows - unrestricted_cols) as f64;
    let numerator = ((rss_r - rss_u).max(0.0)) / df1;
    let p_value;
    let f_stat;
    if rss_u <= f64::EPSILON * rows as f64 {
        // The unrestricted model fits (numerically) perfectly.
        if numerator > 0.0 {
            f_stat = f64::INFINITY;
            p_value = 0.0;
        } else {
            f_stat = 0.0;
            p_value = 1.0;
        }
    } else {
        let f = numerator / (rss_u / df2);
        let dist = FisherSnedecor::new(df1, df2).expect("valid F degrees of freedom");
        f_stat = f;
        p_value = 1.0 - dist.cdf(f);
    }

    GcResult {
        source: source.to_owned(),
        target: target.to_owned(),
        f_stat: Some(f_stat),
        p_value: Some(p_value),
        max_lag: p,
        alpha,
        decision: p_value < alpha,
        note: None,
    }
}

impl From<&GcResult> for crate::eval::EdgeRecord {
    /// Map a Granger result onto the shared edge schema for drop-in
    /// evaluation: the score column carries `1 - p` and the slope column the
    /// F statistic.
    fn from(r: &GcResult) -> Self {
        crate::eval::EdgeRecord {
            source: r.source.clone(),
            mapper: r.target.clone(),
            rho_max: r.p_value.map(|p| 1.0 - p),
            slope: r.f_stat,
            decision: r.decision,
        }
    }
}

/// Per-user outcome of the majority-language classifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LangDecision {
    pub user_id: String,
    pub coordinated: bool,
    pub note: Option<String>,
}

/// Per-user language histograms from raw events.
pub fn language_counts(events: &[Event]) -> BTreeMap<String, BTreeMap<String, usize>> {
    let mut counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for event in events {
        let per_user = counts.entry(event.user_id.clone()).or_default();
        if let Some(lang) = &event.lang {
            *per_user.entry(lang.clone()).or_insert(0) += 1;
        }
    }
    counts
}

/// Classify a user as coordinated when their strict-majority language equals
/// `coordinated_lang`. Ties and missing metadata classify as normal, with a
/// note for the latter.
pub fn language_classifier(
    lang_counts: &BTreeMap<String, BTreeMap<String, usize>>,
    coordinated_lang: &str,
) -> Vec<LangDecision> {
    lang_counts
        .iter()
        .map(|(user, langs)| {
            if langs.is_empty() {
                return LangDecision {
                    user_id: user.clone(),
                    coordinated: false,
                    note: Some("no language metadata".into()),
                };
            }
            let target = langs.get(coordinated_lang).copied().unwrap_or(0);
            let strict_majority = langs
                .iter()
                .filter(|(lang, _)| lang.as_str() != coordinated_lang)
                .all(|(_, &count)| target > count)
                && target > 0;
            LangDecision {
                user_id: user.clone(),
                coordinated: strict_majority,
                note: None,
            }
        })
        .collect()
}
