//! Convergent cross mapping between ordered user pairs.
//!
//! Each binned series is lagged into a shadow manifold. For a candidate
//! influence flow `u1 => u2`, the test-segment values of `u1` are predicted
//! from `u2`'s manifold with a simplex-weighted nearest-neighbour model at a
//! growing schedule of library lengths; the flow is asserted when the
//! correlation between predictions and truth trends upward and its maximum
//! clears the decision threshold.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::series::SplitSeries;
use crate::stats::{ols_slope, pearson};

/// Lagged-coordinate embedding parameters. The neighbour count is pinned to
/// `E + 1` (a simplex around the query point).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbeddingParams {
    embedding_dim: usize,
    lag: usize,
}

impl EmbeddingParams {
    pub fn new(embedding_dim: usize, lag: usize) -> Result<Self> {
        if embedding_dim <= 1 {
            return Err(Error::InvalidParameter(format!(
                "embedding dimension must exceed 1, got {embedding_dim}"
            )));
        }
        if lag < 1 {
            return Err(Error::InvalidParameter(format!(
                "lag must be at least 1, got {lag}"
            )));
        }
        Ok(EmbeddingParams { embedding_dim, lag })
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding_dim
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    /// k = E + 1, always.
    pub fn neighbor_count(&self) -> usize {
        self.embedding_dim + 1
    }

    /// Bins of history a point reaches back: `(E - 1) * tau`.
    pub fn history_span(&self) -> usize {
        (self.embedding_dim - 1) * self.lag
    }

    /// Shortest series that still embeds to two points.
    pub fn min_series_len(&self) -> usize {
        self.history_span() + 2
    }
}

/// Shadow manifold: the ordered lagged-coordinate points of one series.
///
/// Point `i` corresponds to series index `offset + i` and holds
/// `[x(t), x(t - tau), ..., x(t - (E-1) tau)]`, newest coordinate first.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowManifold {
    user_id: String,
    dim: usize,
    offset: usize,
    points: Vec<f64>,
}

impl ShadowManifold {
    pub fn user_id(&self) -> &str {
        &self.user_id
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Series index of the first (and hence `i`-th) embeddable point.
    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn time_index(&self, i: usize) -> usize {
        self.offset + i
    }
}

/// Embed a series into its shadow manifold.
pub fn embed(user_id: &str, values: &[f64], params: &EmbeddingParams) -> Result<ShadowManifold> {
    let min = params.min_series_len();
    if values.len() < min {
        return Err(Error::InsufficientHistory {
            len: values.len(),
            min,
        });
    }
    let dim = params.embedding_dim();
    let offset = params.history_span();
    let n_points = values.len() - offset;
    let mut points = Vec::with_capacity(n_points * dim);
    for t in offset..values.len() {
        for c in 0..dim {
            points.push(values[t - c * params.lag()]);
        }
    }
    Ok(ShadowManifold {
        user_id: user_id.to_owned(),
        dim,
        offset,
        points,
    })
}

/// Precomputed simplex neighbourhoods for a batch of query points: for each
/// query, `k` library-point indices and their normalized weights.
struct Neighborhoods {
    k: usize,
    indices: Vec<u32>,
    weights: Vec<f64>,
}

impl Neighborhoods {
    fn query(&self, q: usize) -> (&[u32], &[f64]) {
        let span = q * self.k..(q + 1) * self.k;
        (&self.indices[span.clone()], &self.weights[span])
    }

    fn n_queries(&self) -> usize {
        self.indices.len() / self.k
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k nearest library points of each query under Euclidean distance, ties
/// broken by lower index; weights are `exp(-d_i / d_min)` normalized to sum
/// one, degrading to uniform weights over exact matches when `d_min = 0`.
fn build_neighborhoods(
    mapper: &ShadowManifold,
    library_length: usize,
    query_times: &[usize],
    k: usize,
) -> Neighborhoods {
    let mut indices = Vec::with_capacity(query_times.len() * k);
    let mut weights = Vec::with_capacity(query_times.len() * k);
    let mut scratch: Vec<(f64, u32)> = Vec::with_capacity(library_length);

    for &qt in query_times {
        let query = mapper.point(qt - mapper.offset());
        scratch.clear();
        for idx in 0..library_length {
            scratch.push((sq_dist(mapper.point(idx), query), idx as u32));
        }
        let by_dist_then_idx =
            |a: &(f64, u32), b: &(f64, u32)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if scratch.len() > k {
            scratch.select_nth_unstable_by(k - 1, by_dist_then_idx);
            scratch.truncate(k);
        }
        scratch.sort_unstable_by(by_dist_then_idx);

        let d_min = scratch[0].0.sqrt();
        if d_min > 0.0 {
            let mut total = 0.0;
            let base = weights.len();
            for &(d2, idx) in scratch.iter() {
                let w = (-(d2.sqrt()) / d_min).exp();
                total += w;
                indices.push(idx);
                weights.push(w);
            }
            for w in &mut weights[base..] {
                *w /= total;
            }
        } else {
            let exact = scratch.iter().filter(|(d2, _)| *d2 == 0.0).count();
            let w_exact = 1.0 / exact as f64;
            for &(d2, idx) in scratch.iter() {
                indices.push(idx);
                weights.push(if d2 == 0.0 { w_exact } else { 0.0 });
            }
        }
    }
    Neighborhoods {
        k,
        indices,
        weights,
    }
}

fn predict(neigh: &Neighborhoods, target: &[f64], offset: usize) -> Vec<f64> {
    (0..neigh.n_queries())
        .map(|q| {
            let (idx, w) = neigh.query(q);
            idx.iter()
                .zip(w)
                .map(|(&i, &wi)| wi * target[offset + i as usize])
                .sum()
        })
        .collect()
}

/// Predict the target user's series values at `query_times` from the mapper's
/// manifold, using only the first `library_length` manifold points as the
/// library.
pub fn cross_map_predict(
    target: &[f64],
    mapper: &ShadowManifold,
    library_length: usize,
    query_times: &[usize],
    params: &EmbeddingParams,
) -> Result<Vec<f64>> {
    let k = params.neighbor_count();
    if library_length > mapper.len() {
        return Err(Error::InvalidParameter(format!(
            "library length {library_length} exceeds manifold size {}",
            mapper.len()
        )));
    }
    if library_length < k {
        return Err(Error::InvalidParameter(format!(
            "library length {library_length} is smaller than the neighbour count {k}"
        )));
    }
    if target.len() < mapper.offset() + library_length {
        return Err(Error::InvalidParameter(
            "target series does not cover the library time range".into(),
        ));
    }
    for &qt in query_times {
        if qt < mapper.offset() || qt - mapper.offset() >= mapper.len() {
            return Err(Error::InvalidParameter(format!(
                "query time {qt} is not embeddable on the mapper manifold"
            )));
        }
    }
    let neigh = build_neighborhoods(mapper, library_length, query_times, k);
    Ok(predict(&neigh, target, mapper.offset()))
}

/// The simplex neighbourhood of each query point as used by
/// [`cross_map_predict`]: `k` library-point indices with their normalized
/// weights, in ascending (distance, index) order.
pub fn simplex_neighborhoods(
    mapper: &ShadowManifold,
    library_length: usize,
    query_times: &[usize],
    params: &EmbeddingParams,
) -> Result<Vec<Vec<(usize, f64)>>> {
    let k = params.neighbor_count();
    if library_length > mapper.len() || library_length < k {
        return Err(Error::InvalidParameter(format!(
            "library length {library_length} invalid for manifold of {} points with k = {k}",
            mapper.len()
        )));
    }
    let neigh = build_neighborhoods(mapper, library_length, query_times, k);
    Ok((0..neigh.n_queries())
        .map(|q| {
            let (idx, w) = neigh.query(q);
            idx.iter().map(|&i| i as usize).zip(w.iter().copied()).collect()
        })
        .collect())
}

/// Directional cross-map outcome for the candidate flow `source => mapper`,
/// computed by predicting the source's series from the mapper's manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossMapResult {
    pub source: String,
    pub mapper: String,
    /// Correlation per library length; `None` marks an undefined correlation
    /// (zero-variance predictions or truth), dropped from the regression.
    pub rho_by_library: Vec<(usize, Option<f64>)>,
    /// OLS gradient of rho over library length; `None` with fewer than two
    /// defined correlations.
    pub slope: Option<f64>,
    pub rho_max: Option<f64>,
    /// `slope > 0 && rho_max >= theta`.
    pub decision: bool,
    pub note: Option<String>,
}

/// Evenly spaced library schedule from `max(2(E+1), (E-1)tau + E + 2)` up to
/// the full train-manifold size, at most [`SCHEDULE_POINTS`] lengths.
pub const SCHEDULE_POINTS: usize = 10;

pub fn default_library_schedule(params: &EmbeddingParams, train_len: usize) -> Result<Vec<usize>> {
    let l_min = (2 * params.neighbor_count()).max(params.history_span() + params.embedding_dim() + 2);
    let manifold_len = train_len.saturating_sub(params.history_span());
    if manifold_len < l_min {
        return Err(Error::InsufficientHistory {
            len: train_len,
            min: l_min + params.history_span(),
        });
    }
    let l_max = manifold_len;
    let mut schedule = Vec::with_capacity(SCHEDULE_POINTS);
    for i in 0..SCHEDULE_POINTS {
        let frac = i as f64 / (SCHEDULE_POINTS - 1) as f64;
        let l = l_min as f64 + frac * (l_max - l_min) as f64;
        let l = l.round() as usize;
        if schedule.last() != Some(&l) {
            schedule.push(l);
        }
    }
    Ok(schedule)
}

fn validate_schedule(schedule: &[usize], params: &EmbeddingParams, train_len: usize) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::InvalidParameter("empty library schedule".into()));
    }
    if !schedule.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidParameter(
            "library schedule must be strictly increasing".into(),
        ));
    }
    let k = params.neighbor_count();
    if schedule[0] < k {
        return Err(Error::InvalidParameter(format!(
            "smallest library length {} is below the neighbour count {k}",
            schedule[0]
        )));
    }
    let manifold_len = train_len.saturating_sub(params.history_span());
    if *schedule.last().unwrap() > manifold_len {
        return Err(Error::InvalidParameter(format!(
            "largest library length {} exceeds the train manifold size {manifold_len}",
            schedule.last().unwrap()
        )));
    }
    Ok(())
}

/// Per-mapper state reused across all sources cross-mapped through it: the
/// manifold plus one neighbourhood table per library length. Immutable after
/// construction.
struct MapperContext {
    offset: usize,
    per_library: Vec<Neighborhoods>,
}

impl MapperContext {
    fn build(
        manifold: &ShadowManifold,
        schedule: &[usize],
        query_times: &[usize],
        k: usize,
    ) -> Self {
        let per_library = schedule
            .iter()
            .map(|&lib| build_neighborhoods(manifold, lib, query_times, k))
            .collect();
        MapperContext {
            offset: manifold.offset(),
            per_library,
        }
    }
}

fn direction_result(
    source_id: &str,
    mapper_id: &str,
    ctx: &MapperContext,
    schedule: &[usize],
    source_values: &[f64],
    truth: &[f64],
    theta: f64,
) -> CrossMapResult {
    let mut rho_by_library = Vec::with_capacity(schedule.len());
    for (neigh, &lib) in ctx.per_library.iter().zip(schedule) {
        let preds = predict(neigh, source_values, ctx.offset);
        rho_by_library.push((lib, pearson(&preds, truth)));
    }
    assemble_result(source_id, mapper_id, rho_by_library, theta)
}

fn assemble_result(
    source_id: &str,
    mapper_id: &str,
    rho_by_library: Vec<(usize, Option<f64>)>,
    theta: f64,
) -> CrossMapResult {
    let valid: Vec<(f64, f64)> = rho_by_library
        .iter()
        .filter_map(|&(lib, rho)| rho.map(|r| (lib as f64, r)))
        .collect();
    let rho_max = valid
        .iter()
        .map(|&(_, r)| r)
        .max_by(f64::total_cmp);
    if valid.len() < 2 {
        return CrossMapResult {
            source: source_id.to_owned(),
            mapper: mapper_id.to_owned(),
            rho_by_library,
            slope: None,
            rho_max,
            decision: false,
            note: Some("insufficient valid correlations".into()),
        };
    }
    let (libs, rhos): (Vec<f64>, Vec<f64>) = valid.into_iter().unzip();
    let slope = ols_slope(&libs, &rhos);
    let decision = matches!((slope, rho_max), (Some(s), Some(r)) if s > 0.0 && r >= theta);
    CrossMapResult {
        source: source_id.to_owned(),
        mapper: mapper_id.to_owned(),
        rho_by_library,
        slope,
        rho_max,
        decision,
        note: None,
    }
}

fn failed_result(source_id: &str, mapper_id: &str, note: &str) -> CrossMapResult {
    CrossMapResult {
        source: source_id.to_owned(),
        mapper: mapper_id.to_owned(),
        rho_by_library: Vec::new(),
        slope: None,
        rho_max: None,
        decision: false,
        note: Some(note.to_owned()),
    }
}

fn check_pair_shapes(users: &[&SplitSeries]) -> Result<(usize, usize)> {
    let len = users[0].len();
    let train_len = users[0].train_len();
    for u in users {
        if u.len() != len || u.train_len() != train_len {
            return Err(Error::InvalidParameter(format!(
                "series shapes differ: {} has {}/{} bins, {} has {}/{}",
                users[0].user_id(),
                train_len,
                len,
                u.user_id(),
                u.train_len(),
                u.len()
            )));
        }
    }
    if train_len >= len {
        return Err(Error::InvalidParameter(
            "empty test segment: nothing to predict".into(),
        ));
    }
    Ok((len, train_len))
}

/// Cross map a pair in both directions. Returns the results asserting
/// `u1 => u2` and `u2 => u1`, in that order.
pub fn ccm_pair(
    u1: &SplitSeries,
    u2: &SplitSeries,
    params: &EmbeddingParams,
    schedule: &[usize],
    theta: f64,
) -> Result<(CrossMapResult, CrossMapResult)> {
    let (len, train_len) = check_pair_shapes(&[u1, u2])?;
    validate_schedule(schedule, params, train_len)?;
    let query_times: Vec<usize> = (train_len..len).collect();
    let k = params.neighbor_count();

    let x1 = u1.values_f64();
    let x2 = u2.values_f64();
    let m1 = embed(u1.user_id(), &x1, params)?;
    let m2 = embed(u2.user_id(), &x2, params)?;
    let ctx1 = MapperContext::build(&m1, schedule, &query_times, k);
    let ctx2 = MapperContext::build(&m2, schedule, &query_times, k);

    let truth1: Vec<f64> = query_times.iter().map(|&t| x1[t]).collect();
    let truth2: Vec<f64> = query_times.iter().map(|&t| x2[t]).collect();

    let forward = direction_result(u1.user_id(), u2.user_id(), &ctx2, schedule, &x1, &truth1, theta);
    let backward = direction_result(u2.user_id(), u1.user_id(), &ctx1, schedule, &x2, &truth2, theta);
    Ok((forward, backward))
}

/// Cross map every unordered pair (restricted to `pair_filter` when given),
/// emitting both directional results per pair in a deterministic order:
/// pairs sorted by user id, the lexicographically smaller source first.
///
/// Pairs are scheduled by mapper so each user's neighbourhood tables are
/// computed once and shared across all its partners; a filtered scan is
/// therefore bit-identical to the unfiltered scan restricted to the same
/// pairs.
pub fn pairwise_scan(
    users: &[SplitSeries],
    params: &EmbeddingParams,
    schedule: &[usize],
    theta: f64,
    pair_filter: Option<&BTreeSet<(String, String)>>,
) -> Result<Vec<CrossMapResult>> {
    if users.len() < 2 {
        return Err(Error::InvalidParameter(
            "pairwise scan needs at least 2 users".into(),
        ));
    }
    {
        let mut seen = BTreeSet::new();
        for u in users {
            if !seen.insert(u.user_id()) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate user id {:?}",
                    u.user_id()
                )));
            }
        }
    }
    let refs: Vec<&SplitSeries> = users.iter().collect();
    let (len, train_len) = check_pair_shapes(&refs)?;
    validate_schedule(schedule, params, train_len)?;

    let mut order: Vec<usize> = (0..users.len()).collect();
    order.sort_by(|&a, &b| users[a].user_id().cmp(users[b].user_id()));

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if let Some(filter) = pair_filter {
                let key = (
                    users[i].user_id().to_owned(),
                    users[j].user_id().to_owned(),
                );
                if !filter.contains(&key) {
                    continue;
                }
            }
            pairs.push((i, j));
        }
    }

    let values: Vec<Vec<f64>> = users.iter().map(|u| u.values_f64()).collect();
    let manifolds: Vec<Result<ShadowManifold>> = users
        .iter()
        .zip(&values)
        .map(|(u, v)| embed(u.user_id(), v, params))
        .collect();

    let query_times: Vec<usize> = (train_len..len).collect();
    let truths: Vec<Vec<f64>> = values
        .iter()
        .map(|v| query_times.iter().map(|&t| v[t]).collect())
        .collect();
    let k = params.neighbor_count();

    // Directions grouped by mapper: mapper -> sources.
    let mut by_mapper: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(i, j) in &pairs {
        by_mapper.entry(j).or_default().push(i);
        by_mapper.entry(i).or_default().push(j);
    }
    let groups: Vec<(usize, Vec<usize>)> = by_mapper.into_iter().collect();

    let computed: Vec<Vec<((usize, usize), CrossMapResult)>> = groups
        .par_iter()
        .map(|(mapper, sources)| {
            let mapper_id = users[*mapper].user_id();
            match &manifolds[*mapper] {
                Err(e) => sources
                    .iter()
                    .map(|&src| {
                        let note = format!("embedding failed for mapper: {e}");
                        ((src, *mapper), failed_result(users[src].user_id(), mapper_id, &note))
                    })
                    .collect(),
                Ok(manifold) => {
                    let ctx = MapperContext::build(manifold, schedule, &query_times, k);
                    sources
                        .iter()
                        .map(|&src| {
                            let result = direction_result(
                                users[src].user_id(),
                                mapper_id,
                                &ctx,
                                schedule,
                                &values[src],
                                &truths[src],
                                theta,
                            );
                            ((src, *mapper), result)
                        })
                        .collect()
                }
            }
        })
        .collect();

    let mut by_direction: BTreeMap<(usize, usize), CrossMapResult> = BTreeMap::new();
    for group in computed {
        for (key, result) in group {
            by_direction.insert(key, result);
        }
    }

    let mut results = Vec::with_capacity(pairs.len() * 2);
    for (i, j) in pairs {
        results.push(by_direction.remove(&(i, j)).expect("forward result"));
        results.push(by_direction.remove(&(j, i)).expect("backward result"));
    }
    Ok(results)
}
