//! Score-instability analysis over reasoning texts: tokenization, seeded
//! k-means over embeddings, class-based TF-IDF keywords, and per-cluster
//! score statistics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::stats::{dispersion, Estimator};

pub const STOPWORDS_VERSION: &str = "v1";
const STOPWORDS_EN: &str = include_str!("../stopwords/en.txt");
const STOPWORDS_ZH: &str = include_str!("../stopwords/zh.txt");

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TopicError {
    #[error("need at least k={k} documents, got {n}")]
    TooFewDocuments { k: usize, n: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("vector {index} has dimension {got}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
    #[error("vector {0} has a non-finite component")]
    NonFinite(usize),
    #[error("no terms in any cluster")]
    EmptyVocabulary,
    #[error("{scores} scores for {docs} documents")]
    Misaligned { docs: usize, scores: usize },
}

/// Pluggable tokenization strategy.
pub trait Tokenizer {
    fn tokenize(&self, text: &str) -> Vec<String>;
}

/// Latin runs split on non-alphanumerics and lowercased; CJK runs become
/// overlapping character bigrams (a lone CJK character stays a unigram).
/// Stopwords and purely numeric tokens are dropped.
#[derive(Debug, Clone)]
pub struct BigramTokenizer {
    stopwords: BTreeSet<String>,
}

impl Default for BigramTokenizer {
    fn default() -> Self {
        let stopwords = STOPWORDS_EN
            .lines()
            .chain(STOPWORDS_ZH.lines())
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(ToString::to_string)
            .collect();
        BigramTokenizer { stopwords }
    }
}

impl BigramTokenizer {
    pub fn with_stopwords(stopwords: impl IntoIterator<Item = String>) -> Self {
        BigramTokenizer { stopwords: stopwords.into_iter().collect() }
    }
}

fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0x20000..=0x2A6DF)
}

#[derive(PartialEq, Clone, Copy)]
enum Run {
    None,
    Latin,
    Cjk,
}

impl Tokenizer for BigramTokenizer {
    fn tokenize(&self, text: &str) -> Vec<String> {
        let mut raw = Vec::new();
        let mut buf: Vec<char> = Vec::new();
        let mut run = Run::None;
        let flush = |run: Run, buf: &mut Vec<char>, raw: &mut Vec<String>| {
            match run {
                Run::Latin => raw.push(buf.iter().collect::<String>().to_lowercase()),
                Run::Cjk if buf.len() == 1 => raw.push(buf.iter().collect()),
                Run::Cjk => raw.extend(buf.windows(2).map(|w| w.iter().collect::<String>())),
                Run::None => {}
            }
            buf.clear();
        };
        for c in text.chars() {
            let kind = if is_cjk(c) {
                Run::Cjk
            } else if c.is_alphanumeric() {
                Run::Latin
            } else {
                Run::None
            };
            if kind != run {
                flush(run, &mut buf, &mut raw);
                run = kind;
            }
            if kind != Run::None {
                buf.push(c);
            }
        }
        flush(run, &mut buf, &mut raw);
        raw.into_iter()
            .filter(|t| !self.stopwords.contains(t) && !t.chars().all(|c| c.is_numeric()))
            .collect()
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    BigramTokenizer::default().tokenize(text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub k: usize,
    pub seed: u64,
    /// Cluster index per document, in input order.
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub iterations: usize,
    /// Within-cluster sum of squares after each assignment step.
    pub inertia_trace: Vec<f64>,
}

impl ClusterAssignment {
    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, &c)| c == cluster)
            .map(|(i, _)| i)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, sq_dist(p, &centroids[0]));
    for (j, c) in centroids.iter().enumerate().skip(1) {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn seed_centroids(vectors: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = vectors.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = vectors.iter().map(|v| sq_dist(v, &vectors[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if acc >= target && *d > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        chosen.push(next);
        for (i, v) in vectors.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(v, &vectors[next]));
        }
    }
    chosen.into_iter().map(|i| vectors[i].clone()).collect()
}

const MAX_ITERATIONS: usize = 100;
const SHIFT_TOLERANCE: f64 = 1e-6;

/// Lloyd's k-means with k-means++ seeding from a ChaCha8 stream keyed by
/// `seed`. Stops when no centroid moves more than 1e-6 or after 100
/// iterations. A cluster that empties is re-seeded with the point farthest
/// from its centroid among clusters that can spare one.
pub fn cluster_embeddings(vectors: &[Vec<f64>], k: usize, seed: u64) -> Result<ClusterAssignment, TopicError> {
    if k == 0 {
        return Err(TopicError::ZeroK);
    }
    if vectors.len() < k {
        return Err(TopicError::TooFewDocuments { k, n: vectors.len() });
    }
    let dim = vectors[0].len();
    for (index, v) in vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(TopicError::DimensionMismatch { index, expected: dim, got: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(TopicError::NonFinite(index));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(vectors, k, &mut rng);
    let mut labels = vec![0usize; vectors.len()];
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        let mut inertia = 0.0;
        let mut dists = vec![0.0; vectors.len()];
        for (i, v) in vectors.iter().enumerate() {
            let (j, d) = nearest(v, &centroids);
            labels[i] = j;
            dists[i] = d;
            inertia += d;
        }
        trace.push(inertia);
        if iterations == MAX_ITERATIONS {
            break;
        }
        iterations += 1;

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (v, &j) in vectors.iter().zip(&labels) {
            counts[j] += 1;
            for (s, x) in sums[j].iter_mut().zip(v) {
                *s += x;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                continue;
            }
            let donor = (0..vectors.len())
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| dists[a].partial_cmp(&dists[b]).unwrap_or(Ordering::Equal).then(b.cmp(&a)));
            if let Some(i) = donor {
                let from = labels[i];
                counts[from] -= 1;
                for (s, x) in sums[from].iter_mut().zip(&vectors[i]) {
                    *s -= x;
                }
                labels[i] = j;
                dists[i] = 0.0;
                counts[j] = 1;
                sums[j] = vectors[i].clone();
            }
        }
        let mut shift: f64 = 0.0;
        for j in 0..k {
            if counts[j] == 0 {
                continue;
            }
            let next: Vec<f64> = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            shift = shift.max(libm::sqrt(sq_dist(&next, &centroids[j])));
            centroids[j] = next;
        }
        if shift < SHIFT_TOLERANCE {
            // One last assignment against the settled centroids.
            let mut inertia = 0.0;
            for (i, v) in vectors.iter().enumerate() {
                let (j, d) = nearest(v, &centroids);
                labels[i] = j;
                inertia += d;
            }
            trace.push(inertia);
            break;
        }
    }
    Ok(ClusterAssignment { k, seed, labels, centroids, iterations, inertia_trace: trace })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyword {
    pub term: String,
    pub weight: f64,
}

/// Top keywords per cluster, by descending weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordSet {
    pub clusters: Vec<Vec<Keyword>>,
}

/// Class-based TF-IDF: `w(t, c) = tf(t, c) · ln(1 + A / f(t))` with `tf`
/// the raw count of `t` in cluster `c`, `f(t)` its count across all
/// clusters and `A` the mean number of terms per cluster. Ties are broken by
/// term.
pub fn ctfidf_keywords<S: AsRef<str>>(cluster_terms: &[Vec<S>], top_n: usize) -> Result<KeywordSet, TopicError> {
    let total_terms: usize = cluster_terms.iter().map(Vec::len).sum();
    if total_terms == 0 {
        return Err(TopicError::EmptyVocabulary);
    }
    let avg = total_terms as f64 / cluster_terms.len() as f64;
    let per_cluster: Vec<BTreeMap<&str, usize>> = cluster_terms
        .iter()
        .map(|terms| {
            let mut tf = BTreeMap::new();
            for t in terms {
                *tf.entry(t.as_ref()).or_insert(0) += 1;
            }
            tf
        })
        .collect();
    let mut global: BTreeMap<&str, usize> = BTreeMap::new();
    for tf in &per_cluster {
        for (t, n) in tf {
            *global.entry(t).or_insert(0) += n;
        }
    }
    let clusters = per_cluster
        .iter()
        .map(|tf| {
            let mut scored: Vec<Keyword> = tf
                .iter()
                .map(|(t, &n)| Keyword {
                    term: t.to_string(),
                    weight: n as f64 * libm::log(1.0 + avg / global[t] as f64),
                })
                .collect();
            scored.sort_by(|a, b| {
                b.weight
                    .partial_cmp(&a.weight)
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| a.term.cmp(&b.term))
            });
            scored.truncate(top_n);
            scored
        })
        .collect();
    Ok(KeywordSet { clusters })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStat {
    pub cluster: usize,
    pub count: usize,
    pub mean: f64,
    /// Sample variance; `None` for singleton clusters.
    pub variance: Option<f64>,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterScores {
    pub clusters: Vec<ClusterStat>,
    /// Largest minus smallest cluster mean.
    pub delta: f64,
}

pub fn cluster_score_stats(assignment: &ClusterAssignment, scores: &[f64]) -> Result<ClusterScores, TopicError> {
    if scores.len() != assignment.labels.len() {
        return Err(TopicError::Misaligned { docs: assignment.labels.len(), scores: scores.len() });
    }
    let mut clusters = Vec::new();
    for c in 0..assignment.k {
        let xs: Vec<f64> = assignment.members(c).map(|i| scores[i]).collect();
        if xs.is_empty() {
            continue;
        }
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        clusters.push(ClusterStat {
            cluster: c,
            count: xs.len(),
            mean,
            variance: dispersion(&xs, Estimator::Sample).ok().map(|d| d.variance),
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        });
    }
    let hi = clusters.iter().map(|c| c.mean).fold(f64::NEG_INFINITY, f64::max);
    let lo = clusters.iter().map(|c| c.mean).fold(f64::INFINITY, f64::min);
    let delta = if clusters.is_empty() { 0.0 } else { hi - lo };
    Ok(ClusterScores { clusters, delta })
}

/// How many cluster keyword lists each term appears in, most frequent
/// first (ties by term).
pub fn word_frequencies(sets: &[KeywordSet]) -> Vec<(String, usize)> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for set in sets {
        for cluster in &set.clusters {
            for kw in cluster {
                *counts.entry(kw.term.as_str()).or_insert(0) += 1;
            }
        }
    }
    let mut out: Vec<(String, usize)> = counts.into_iter().map(|(t, n)| (t.to_string(), n)).collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}
