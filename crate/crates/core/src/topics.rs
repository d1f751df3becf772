//! Topic clustering of users via TF-IDF + NMF, used to prune the pairwise
//! cross-map search space, plus partition comparison (adjusted Rand index).
//!
//! The model is fitted on per-tweet documents; users are then assigned by
//! transforming their concatenated text against the fitted term-topic matrix.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

const EPS: f64 = 1e-12;

/// Built-in English + Russian stop-word lists.
pub fn builtin_stopwords() -> BTreeSet<String> {
    let mut set = BTreeSet::new();
    for list in [
        include_str!("../data/stopwords_en.txt"),
        include_str!("../data/stopwords_ru.txt"),
    ] {
        set.extend(list.lines().map(|l| l.trim().to_owned()).filter(|l| !l.is_empty()));
    }
    set
}

/// Load a user-supplied stop-word file, one term per line.
pub fn load_stopwords(path: &Path) -> Result<BTreeSet<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect())
}

/// Lowercase, strip URLs and @mentions, split on non-alphanumerics (Unicode,
/// so Cyrillic survives) and keep tokens of at least two characters.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let lower = word.to_lowercase();
        if lower.starts_with("http://")
            || lower.starts_with("https://")
            || lower.starts_with("www.")
            || lower.starts_with('@')
        {
            continue;
        }
        let mut current = String::new();
        let mut current_chars = 0usize;
        for ch in lower.chars() {
            if ch.is_alphanumeric() {
                current.push(ch);
                current_chars += 1;
            } else {
                if current_chars >= 2 {
                    tokens.push(std::mem::take(&mut current));
                } else {
                    current.clear();
                }
                current_chars = 0;
            }
        }
        if current_chars >= 2 {
            tokens.push(current);
        }
    }
    tokens
}

/// Document-term matrix with smoothed-idf TF-IDF weights, rows L2-normalized.
#[derive(Debug, Clone)]
pub struct TfidfCorpus {
    vocabulary: BTreeMap<String, usize>,
    terms: Vec<String>,
    idf: Vec<f64>,
    matrix: Array2<f64>,
    doc_ids: Vec<String>,
    empty: Vec<bool>,
}

impl TfidfCorpus {
    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    /// Documents that vectorized to a zero row (nothing but stop-words).
    pub fn empty_doc_ids(&self) -> Vec<&String> {
        self.doc_ids
            .iter()
            .zip(&self.empty)
            .filter_map(|(id, &e)| e.then_some(id))
            .collect()
    }

    pub(crate) fn is_empty_doc(&self, idx: usize) -> bool {
        self.empty[idx]
    }

    /// Wrap an arbitrary non-negative matrix as a corpus, for factorizing
    /// data that does not come from text. Rows get synthetic document ids.
    pub fn from_matrix(matrix: Array2<f64>) -> Self {
        let (n_docs, n_terms) = matrix.dim();
        let terms: Vec<String> = (0..n_terms).map(|i| format!("t{i:03}")).collect();
        let vocabulary = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        TfidfCorpus {
            vocabulary,
            terms,
            idf: vec![1.0; n_terms],
            empty: matrix
                .rows()
                .into_iter()
                .map(|r| r.iter().all(|&v| v == 0.0))
                .collect(),
            doc_ids: (0..n_docs).map(|i| format!("d{i}")).collect(),
            matrix,
        }
    }

    /// TF-IDF vector for unseen text under this corpus's vocabulary, L2
    /// normalized. `None` when no known token survives filtering.
    pub fn vectorize(&self, text: &str, stopwords: &BTreeSet<String>) -> Option<Array1<f64>> {
        let mut row: Array1<f64> = Array1::zeros(self.n_terms());
        let mut any = false;
        for token in tokenize(text) {
            if stopwords.contains(&token) {
                continue;
            }
            if let Some(&col) = self.vocabulary.get(&token) {
                row[col] += self.idf[col];
                any = true;
            }
        }
        if !any {
            return None;
        }
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row /= norm;
        }
        Some(row)
    }
}

/// Build the TF-IDF corpus: tf is the raw count, idf is the smoothed
/// `ln((1 + D) / (1 + df)) + 1`.
pub fn build_tfidf(docs: &[(String, String)], stopwords: &BTreeSet<String>) -> Result<TfidfCorpus> {
    if docs.is_empty() {
        return Err(Error::Degenerate("no documents given".into()));
    }
    let tokenized: Vec<Vec<String>> = docs
        .iter()
        .map(|(_, text)| {
            tokenize(text)
                .into_iter()
                .filter(|t| !stopwords.contains(t))
                .collect()
        })
        .collect();
    if tokenized.iter().all(|t| t.is_empty()) {
        return Err(Error::Degenerate(
            "all documents are empty after stop-word filtering".into(),
        ));
    }

    let mut vocabulary: BTreeMap<String, usize> = BTreeMap::new();
    for tokens in &tokenized {
        for t in tokens {
            let next = vocabulary.len();
            vocabulary.entry(t.clone()).or_insert(next);
        }
    }
    // Re-index in sorted term order for a stable vocabulary.
    let terms: Vec<String> = vocabulary.keys().cloned().collect();
    for (i, term) in terms.iter().enumerate() {
        *vocabulary.get_mut(term).unwrap() = i;
    }

    let n_docs = docs.len();
    let n_terms = terms.len();
    let mut df = vec![0usize; n_terms];
    for tokens in &tokenized {
        let unique: BTreeSet<&String> = tokens.iter().collect();
        for t in unique {
            df[vocabulary[t]] += 1;
        }
    }
    let idf: Vec<f64> = df
        .iter()
        .map(|&d| ((1.0 + n_docs as f64) / (1.0 + d as f64)).ln() + 1.0)
        .collect();

    let mut matrix: Array2<f64> = Array2::zeros((n_docs, n_terms));
    let mut empty = vec![false; n_docs];
    for (row, tokens) in tokenized.iter().enumerate() {
        if tokens.is_empty() {
            empty[row] = true;
            continue;
        }
        for t in tokens {
            let col = vocabulary[t];
            matrix[(row, col)] += idf[col];
        }
        let norm = matrix.row(row).dot(&matrix.row(row)).sqrt();
        if norm > 0.0 {
            matrix.row_mut(row).mapv_inplace(|v| v / norm);
        }
    }

    Ok(TfidfCorpus {
        vocabulary,
        terms,
        idf,
        matrix,
        doc_ids: docs.iter().map(|(id, _)| id.clone()).collect(),
        empty,
    })
}

/// Fitted NMF factors: `V ~ W H` with `W: docs x n` and `H: n x terms`, both
/// entrywise non-negative.
#[derive(Debug, Clone)]
pub struct TopicModel {
    w: Array2<f64>,
    h: Array2<f64>,
    n_topics: usize,
    objective_history: Vec<f64>,
    top_terms: Vec<Vec<String>>,
}

impl TopicModel {
    pub fn n_topics(&self) -> usize {
        self.n_topics
    }

    pub fn w(&self) -> &Array2<f64> {
        &self.w
    }

    pub fn h(&self) -> &Array2<f64> {
        &self.h
    }

    /// Frobenius reconstruction error after each iteration, starting with the
    /// initial factorization. Non-increasing by the multiplicative-update
    /// guarantee.
    pub fn objective_history(&self) -> &[f64] {
        &self.objective_history
    }

    pub fn reconstruction_error(&self) -> f64 {
        *self.objective_history.last().unwrap()
    }

    /// Top 10 terms per topic by weight in `H`.
    pub fn top_terms(&self) -> &[Vec<String>] {
        &self.top_terms
    }

    /// Per-document topic by argmax over `W` rows, ties to the lowest index.
    pub fn doc_topics(&self) -> Vec<usize> {
        self.w.rows().into_iter().map(|row| argmax(row.iter().copied())).collect()
    }

    /// Project a TF-IDF vector into topic space: non-negative least squares
    /// against `H` via multiplicative updates with `H` held fixed.
    pub fn transform(&self, v: &Array1<f64>) -> Array1<f64> {
        let n = self.n_topics;
        let hht = self.h.dot(&self.h.t());
        let vht = self.h.dot(v); // == v H^T, length n
        let mut w = Array1::from_elem(n, 1.0 / n as f64);
        for _ in 0..200 {
            let denom = hht.dot(&w) + EPS;
            let next = &w * &vht / &denom;
            let delta = (&next - &w).mapv(f64::abs).sum();
            w = next;
            if delta < 1e-10 {
                break;
            }
        }
        w
    }
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    best
}

fn frobenius_error(v: &Array2<f64>, w: &Array2<f64>, h: &Array2<f64>) -> f64 {
    let diff = v - &w.dot(h);
    diff.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Fit NMF with Lee-Seung multiplicative updates minimizing the Frobenius
/// reconstruction error. Initialization is seeded uniform random in (0, 1].
pub fn fit_nmf(
    corpus: &TfidfCorpus,
    n: usize,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> Result<TopicModel> {
    let v = corpus.matrix();
    let (n_docs, n_terms) = v.dim();
    if n < 1 || n > n_docs.min(n_terms) {
        return Err(Error::InvalidParameter(format!(
            "topic count {n} out of range 1..={}",
            n_docs.min(n_terms)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = || 1.0 - rng.gen::<f64>();
    let mut w = Array2::from_shape_simple_fn((n_docs, n), &mut uniform);
    let mut h = Array2::from_shape_simple_fn((n, n_terms), &mut uniform);

    let mut history = vec![frobenius_error(v, &w, &h)];
    for _ in 0..max_iter {
        // W <- W . (V H^T) / (W H H^T)
        let hht = h.dot(&h.t());
        let numer_w = v.dot(&h.t());
        let denom_w = w.dot(&hht) + EPS;
        w = &w * &numer_w / &denom_w;

        // H <- H . (W^T V) / (W^T W H)
        let wtw = w.t().dot(&w);
        let numer_h = w.t().dot(v);
        let denom_h = wtw.dot(&h) + EPS;
        h = &h * &numer_h / &denom_h;

        let err = frobenius_error(v, &w, &h);
        let prev = *history.last().unwrap();
        history.push(err);
        if prev > 0.0 && (prev - err) / prev < tol {
            break;
        }
    }

    let top_terms = (0..n)
        .map(|topic| {
            let mut weighted: Vec<(f64, usize)> = h
                .row(topic)
                .iter()
                .enumerate()
                .map(|(i, &w)| (w, i))
                .collect();
            weighted.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            weighted
                .into_iter()
                .take(10)
                .map(|(_, i)| corpus.terms()[i].clone())
                .collect()
        })
        .collect();

    Ok(TopicModel {
        w,
        h,
        n_topics: n,
        objective_history: history,
        top_terms,
    })
}

/// Per-user topic assignment; users whose concatenated text vectorizes to
/// nothing land in the unassigned bucket and are excluded from pair
/// generation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserTopicAssignment {
    pub assigned: BTreeMap<String, usize>,
    pub unassigned: BTreeSet<String>,
}

/// Assign each user the argmax topic of their concatenated document.
pub fn assign_user_topics(
    model: &TopicModel,
    corpus: &TfidfCorpus,
    user_docs: &BTreeMap<String, String>,
    stopwords: &BTreeSet<String>,
) -> UserTopicAssignment {
    let users: Vec<(&String, &String)> = user_docs.iter().collect();
    let results: Vec<(String, Option<usize>)> = users
        .par_iter()
        .map(|(user, text)| {
            let topic = corpus
                .vectorize(text, stopwords)
                .map(|v| argmax(model.transform(&v).iter().copied()));
            ((*user).clone(), topic)
        })
        .collect();
    let mut assignment = UserTopicAssignment {
        assigned: BTreeMap::new(),
        unassigned: BTreeSet::new(),
    };
    for (user, topic) in results {
        match topic {
            Some(t) => {
                assignment.assigned.insert(user, t);
            }
            None => {
                assignment.unassigned.insert(user);
            }
        }
    }
    assignment
}

/// Silhouette score of one candidate topic count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopicCountScore {
    pub n: usize,
    pub silhouette: f64,
}

/// Mean silhouette over points in topic-weight space, by the definitional
/// double loop. Returns -1 when fewer than two non-empty clusters exist.
fn mean_silhouette(points: &[Vec<f64>], labels: &[usize]) -> f64 {
    let distinct: BTreeSet<usize> = labels.iter().copied().collect();
    if distinct.len() < 2 {
        return -1.0;
    }
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let mut total = 0.0;
    for i in 0..points.len() {
        let mut intra_sum = 0.0;
        let mut intra_n = 0usize;
        let mut inter: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
        for j in 0..points.len() {
            if i == j {
                continue;
            }
            let d = dist(&points[i], &points[j]);
            if labels[j] == labels[i] {
                intra_sum += d;
                intra_n += 1;
            } else {
                let slot = inter.entry(labels[j]).or_insert((0.0, 0));
                slot.0 += d;
                slot.1 += 1;
            }
        }
        if intra_n == 0 {
            continue; // singleton cluster: s_i = 0 by convention
        }
        let a = intra_sum / intra_n as f64;
        let b = inter
            .values()
            .map(|&(sum, n)| sum / n as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    total / points.len() as f64
}

/// Fit each candidate topic count and pick the one maximizing the mean
/// silhouette of the per-document topic assignment (ties to the smallest n).
pub fn choose_topic_count(
    corpus: &TfidfCorpus,
    candidates: &[usize],
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> Result<(usize, Vec<TopicCountScore>)> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("no candidate topic counts".into()));
    }
    let mut candidates: Vec<usize> = candidates.to_vec();
    candidates.sort_unstable();
    candidates.dedup();

    let scores: Vec<Result<TopicCountScore>> = candidates
        .par_iter()
        .map(|&n| {
            let model = fit_nmf(corpus, n, max_iter, tol, seed.wrapping_add(n as u64))?;
            let labels_all = model.doc_topics();
            let mut points = Vec::new();
            let mut labels = Vec::new();
            for (idx, label) in labels_all.iter().enumerate() {
                if corpus.is_empty_doc(idx) {
                    continue;
                }
                points.push(model.w().row(idx).to_vec());
                labels.push(*label);
            }
            Ok(TopicCountScore {
                n,
                silhouette: mean_silhouette(&points, &labels),
            })
        })
        .collect();
    let scores: Vec<TopicCountScore> = scores.into_iter().collect::<Result<_>>()?;

    let mut best = &scores[0];
    for s in &scores[1..] {
        if s.silhouette > best.silhouette {
            best = s;
        }
    }
    Ok((best.n, scores))
}

/// All unordered user pairs sharing a topic label; unassigned users are
/// excluded. Keys are ordered `(smaller id, larger id)`.
pub fn topic_pair_filter(assignment: &UserTopicAssignment) -> BTreeSet<(String, String)> {
    let mut by_topic: BTreeMap<usize, Vec<&String>> = BTreeMap::new();
    for (user, &topic) in &assignment.assigned {
        by_topic.entry(topic).or_default().push(user);
    }
    let mut pairs = BTreeSet::new();
    for members in by_topic.values() {
        for (i, a) in members.iter().enumerate() {
            for b in &members[i + 1..] {
                pairs.insert(((*a).clone(), (*b).clone()));
            }
        }
    }
    pairs
}

/// Adjusted Rand index between two partitions of the same element set, by the
/// pair-counting contingency-table formula with chance correction.
pub fn compare_partitions<A: Ord, B: Ord>(
    p1: &BTreeMap<String, A>,
    p2: &BTreeMap<String, B>,
) -> Result<f64> {
    if p1.len() != p2.len() || !p1.keys().eq(p2.keys()) {
        return Err(Error::InvalidParameter(
            "partitions cover different element sets".into(),
        ));
    }
    let mut a_index: BTreeMap<&A, usize> = BTreeMap::new();
    let mut b_index: BTreeMap<&B, usize> = BTreeMap::new();
    let mut contingency: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for (element, la) in p1 {
        let lb = &p2[element];
        let next_a = a_index.len();
        let ia = *a_index.entry(la).or_insert(next_a);
        let next_b = b_index.len();
        let ib = *b_index.entry(lb).or_insert(next_b);
        *contingency.entry((ia, ib)).or_insert(0) += 1;
    }
    let comb2 = |x: u64| -> f64 { (x as f64) * (x as f64 - 1.0) / 2.0 };

    let mut row_sums: BTreeMap<usize, u64> = BTreeMap::new();
    let mut col_sums: BTreeMap<usize, u64> = BTreeMap::new();
    let mut sum_ij = 0.0;
    for (&(i, j), &count) in &contingency {
        *row_sums.entry(i).or_insert(0) += count;
        *col_sums.entry(j).or_insert(0) += count;
        sum_ij += comb2(count);
    }
    let sum_a: f64 = row_sums.values().map(|&c| comb2(c)).sum();
    let sum_b: f64 = col_sums.values().map(|&c| comb2(c)).sum();
    let total = comb2(p1.len() as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((sum_ij - expected) / denom)
}

/// JSON-facing summary: per-topic top terms, per-topic user share, per-user
/// assignment.
#[derive(Debug, Clone, Serialize)]
pub struct TopicReport {
    pub n_topics: usize,
    pub topics: Vec<TopicSummary>,
    pub assignments: BTreeMap<String, usize>,
    pub unassigned: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TopicSummary {
    pub topic: usize,
    pub top_terms: Vec<String>,
    pub user_count: usize,
    pub user_share: f64,
}

pub fn topic_report(model: &TopicModel, assignment: &UserTopicAssignment) -> TopicReport {
    let total = assignment.assigned.len() + assignment.unassigned.len();
    let mut counts = vec![0usize; model.n_topics()];
    for &topic in assignment.assigned.values() {
        counts[topic] += 1;
    }
    let topics = (0..model.n_topics())
        .map(|topic| TopicSummary {
            topic,
            top_terms: model.top_terms()[topic].clone(),
            user_count: counts[topic],
            user_share: if total > 0 {
                counts[topic] as f64 / total as f64
            } else {
                0.0
            },
        })
        .collect();
    TopicReport {
        n_topics: model.n_topics(),
        topics,
        assignments: assignment.assigned.clone(),
        unassigned: assignment.unassigned.iter().cloned().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn docs(texts: &[&str]) -> Vec<(String, String)> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| (format!("d{i}"), t.to_string()))
            .collect()
    }

    fn no_stopwords() -> BTreeSet<String> {
        BTreeSet::new()
    }

    #[test]
    fn tokenizer_handles_urls_mentions_and_cyrillic() {
        let tokens = tokenize("Check https://example.com @user ПРИВЕТ мир x it's fine");
        assert_eq!(tokens, vec!["check", "привет", "мир", "it", "fine"]);
    }

    #[test]
    fn common_terms_get_lower_idf() {
        let corpus = build_tfidf(&docs(&["aa bb", "aa cc"]), &no_stopwords()).unwrap();
        let v = corpus.vocabulary();
        let idf = corpus.idf();
        assert!(idf[v["aa"]] < idf[v["bb"]]);
        assert!(idf[v["aa"]] < idf[v["cc"]]);
    }

    #[test]
    fn single_document_rows_are_unit_norm_with_uniform_idf() {
        let corpus = build_tfidf(&docs(&["aa bb cc"]), &no_stopwords()).unwrap();
        let idf = corpus.idf();
        assert!(idf.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-15));
        let row = corpus.matrix().row(0);
        let norm: f64 = row.dot(&row);
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stopword_only_document_is_flagged() {
        let stop: BTreeSet<String> = ["the", "and"].iter().map(|s| s.to_string()).collect();
        let corpus = build_tfidf(&docs(&["the and", "real content"]), &stop).unwrap();
        assert_eq!(corpus.empty_doc_ids(), vec!["d0"]);
        assert!(corpus.matrix().row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn all_empty_documents_is_an_error() {
        let stop: BTreeSet<String> = ["the"].iter().map(|s| s.to_string()).collect();
        assert!(matches!(
            build_tfidf(&docs(&["the", "the the"]), &stop),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn nmf_objective_is_monotone_nonincreasing() {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = Array2::from_shape_simple_fn((12, 9), || rng.gen_range(0.0..1.0));
            let corpus = TfidfCorpus::from_matrix(v);
            let model = fit_nmf(&corpus, 3, 120, 0.0, seed).unwrap();
            let history = model.objective_history();
            for w in history.windows(2) {
                assert!(
                    w[1] <= w[0] * (1.0 + 1e-12) + 1e-12,
                    "objective increased: {} -> {} (seed {seed})",
                    w[0],
                    w[1]
                );
            }
            assert!(model.w().iter().all(|&x| x >= 0.0));
            assert!(model.h().iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn nmf_recovers_exact_low_rank_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w0 = Array2::from_shape_simple_fn((10, 2), || rng.gen_range(0.1..1.0));
        let h0 = Array2::from_shape_simple_fn((2, 8), || rng.gen_range(0.1..1.0));
        let v = w0.dot(&h0);
        let corpus = TfidfCorpus::from_matrix(v);
        let model = fit_nmf(&corpus, 2, 20_000, 0.0, 3).unwrap();
        assert!(
            model.reconstruction_error() <= 1e-6,
            "error = {}",
            model.reconstruction_error()
        );
    }

    /// Best rank-1 non-negative approximation by alternating optimization
    /// (power iteration on a non-negative matrix converges to the leading
    /// singular pair, which is entrywise non-negative).
    fn rank_one_oracle_error(v: &Array2<f64>) -> f64 {
        let (rows, cols) = v.dim();
        let mut w = Array1::from_elem(rows, 1.0);
        let mut h = Array1::from_elem(cols, 1.0);
        for _ in 0..500 {
            h = v.t().dot(&w) / w.dot(&w);
            h.mapv_inplace(|x| x.max(0.0));
            w = v.dot(&h) / h.dot(&h);
            w.mapv_inplace(|x| x.max(0.0));
        }
        let mut err = 0.0;
        for r in 0..rows {
            for c in 0..cols {
                let d: f64 = v[(r, c)] - w[r] * h[c];
                err += d * d;
            }
        }
        err.sqrt()
    }

    #[test]
    fn rank_one_nmf_matches_alternating_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let v = Array2::from_shape_simple_fn((9, 7), || rng.gen_range(0.0..2.0));
        let oracle = rank_one_oracle_error(&v);
        let corpus = TfidfCorpus::from_matrix(v);
        let model = fit_nmf(&corpus, 1, 5000, 0.0, 5).unwrap();
        assert!(
            (model.reconstruction_error() - oracle).abs() < 1e-4,
            "nmf {} vs oracle {oracle}",
            model.reconstruction_error()
        );
    }

    #[test]
    fn nmf_rejects_out_of_range_topic_counts() {
        let corpus = build_tfidf(&docs(&["aa bb", "cc dd"]), &no_stopwords()).unwrap();
        assert!(fit_nmf(&corpus, 0, 10, 0.0, 1).is_err());
        assert!(fit_nmf(&corpus, 3, 10, 0.0, 1).is_err());
    }

    #[test]
    fn pure_topic_text_is_assigned_to_that_topic() {
        let corpus = build_tfidf(
            &docs(&[
                "apple banana cherry",
                "apple banana date",
                "rocket launch orbit",
                "rocket orbit booster",
            ]),
            &no_stopwords(),
        )
        .unwrap();
        let model = fit_nmf(&corpus, 2, 500, 1e-9, 1).unwrap();
        let mut user_docs = BTreeMap::new();
        user_docs.insert("fruit_fan".to_string(), "apple banana banana cherry".to_string());
        user_docs.insert("space_fan".to_string(), "rocket orbit launch".to_string());
        let assignment = assign_user_topics(&model, &corpus, &user_docs, &no_stopwords());
        let f = assignment.assigned["fruit_fan"];
        let s = assignment.assigned["space_fan"];
        assert_ne!(f, s, "disjoint vocabularies must separate");
    }

    #[test]
    fn unknown_text_lands_in_unassigned_bucket() {
        let corpus = build_tfidf(&docs(&["aa bb", "cc dd"]), &no_stopwords()).unwrap();
        let model = fit_nmf(&corpus, 2, 100, 1e-9, 1).unwrap();
        let mut user_docs = BTreeMap::new();
        user_docs.insert("ghost".to_string(), "zz yy xx".to_string());
        let assignment = assign_user_topics(&model, &corpus, &user_docs, &no_stopwords());
        assert!(assignment.assigned.is_empty());
        assert!(assignment.unassigned.contains("ghost"));
    }

    #[test]
    fn chooses_two_topics_for_two_term_blocks() {
        // Two well-separated term blocks. Shared anchors dominate each block
        // and the per-document variant term is unique, so intra-block points
        // are equidistant: any finer split scores a lower silhouette.
        let mut texts = Vec::new();
        for i in 0..8 {
            texts.push(format!("aa aa bb bb cc cc u{i}"));
        }
        for i in 0..8 {
            texts.push(format!("pp pp qq qq rr rr v{i}"));
        }
        let docs: Vec<(String, String)> = texts
            .into_iter()
            .enumerate()
            .map(|(i, t)| (format!("d{i}"), t))
            .collect();
        let corpus = build_tfidf(&docs, &no_stopwords()).unwrap();
        let (n, scores) = choose_topic_count(&corpus, &[2, 3, 4], 400, 1e-9, 9).unwrap();
        assert_eq!(n, 2, "scores: {scores:?}");
        assert!(scores.iter().all(|s| s.silhouette >= -1.0 && s.silhouette <= 1.0));
    }

    #[test]
    fn single_candidate_is_returned_trivially() {
        let corpus = build_tfidf(
            &docs(&["aa bb cc dd ee", "ff gg hh ii jj", "aa ff bb gg"]),
            &no_stopwords(),
        )
        .unwrap();
        let (n, scores) = choose_topic_count(&corpus, &[2], 200, 1e-9, 3).unwrap();
        assert_eq!(n, 2);
        assert_eq!(scores.len(), 1);
    }

    #[test]
    fn pair_filter_basics() {
        let mut assignment = UserTopicAssignment {
            assigned: BTreeMap::new(),
            unassigned: BTreeSet::new(),
        };
        assignment.assigned.insert("a".into(), 0);
        assignment.assigned.insert("b".into(), 0);
        assignment.assigned.insert("c".into(), 1);
        let pairs = topic_pair_filter(&assignment);
        assert_eq!(pairs.len(), 1);
        assert!(pairs.contains(&("a".to_string(), "b".to_string())));
    }

    #[test]
    fn pair_filter_five_equal_clusters_of_eighty() {
        let mut assignment = UserTopicAssignment {
            assigned: BTreeMap::new(),
            unassigned: BTreeSet::new(),
        };
        for i in 0..400usize {
            assignment.assigned.insert(format!("u{i:03}"), i % 5);
        }
        let pairs = topic_pair_filter(&assignment);
        assert_eq!(pairs.len(), 5 * (80 * 79) / 2);
        assert_eq!(pairs.len(), 15_800);
    }

    #[test]
    fn single_cluster_filter_is_the_full_pair_set() {
        let mut assignment = UserTopicAssignment {
            assigned: BTreeMap::new(),
            unassigned: BTreeSet::new(),
        };
        for i in 0..10usize {
            assignment.assigned.insert(format!("u{i}"), 0);
        }
        assert_eq!(topic_pair_filter(&assignment).len(), 45);
    }

    #[test]
    fn ari_identical_partitions_is_exactly_one() {
        let p: BTreeMap<String, usize> = (0..12).map(|i| (format!("u{i}"), i % 3)).collect();
        assert_eq!(compare_partitions(&p, &p).unwrap(), 1.0);
    }

    #[test]
    fn ari_singletons_vs_monolithic_is_exactly_zero() {
        let singles: BTreeMap<String, usize> = (0..6).map(|i| (format!("u{i}"), i)).collect();
        let mono: BTreeMap<String, usize> = (0..6).map(|i| (format!("u{i}"), 0)).collect();
        assert_eq!(compare_partitions(&singles, &mono).unwrap(), 0.0);
    }

    #[test]
    fn ari_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let p1: BTreeMap<String, usize> =
                (0..20).map(|i| (format!("u{i}"), rng.gen_range(0..4))).collect();
            let p2: BTreeMap<String, usize> =
                (0..20).map(|i| (format!("u{i}"), rng.gen_range(0..4))).collect();
            let ab = compare_partitions(&p1, &p2).unwrap();
            let ba = compare_partitions(&p2, &p1).unwrap();
            assert!((ab - ba).abs() < 1e-15);
            assert!((-1.0..=1.0).contains(&ab));
        }
    }

    #[test]
    fn ari_mismatched_elements_is_an_error() {
        let p1: BTreeMap<String, usize> = [("a".to_string(), 0)].into();
        let p2: BTreeMap<String, usize> = [("b".to_string(), 0)].into();
        assert!(compare_partitions(&p1, &p2).is_err());
    }
}
