//! Complete-linkage agglomerative clustering over a precomputed distance
//! matrix, and silhouette scores for the resulting partitions.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::RangeInclusive;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-9;

/// Labeled dense dissimilarity matrix: symmetric, non-negative, zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    labels: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl DistanceMatrix {
    pub fn new(labels: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        let n = labels.len();
        if values.len() != n || values.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidArgument(format!(
                "distance matrix must be {n}x{n} to match its labels"
            )));
        }
        for i in 0..n {
            if values[i][i] != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "non-zero diagonal at {}",
                    labels[i]
                )));
            }
            for j in 0..i {
                let (a, b) = (values[i][j], values[j][i]);
                if !(a >= 0.0 && b >= 0.0) || !a.is_finite() || !b.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "distance between {} and {} is not a finite non-negative number",
                        labels[i], labels[j]
                    )));
                }
                if (a - b).abs() > SYMMETRY_TOL * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::InvalidArgument(format!(
                        "asymmetric distances between {} and {}",
                        labels[i], labels[j]
                    )));
                }
            }
        }
        Ok(Self { labels, values })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    /// Reorder so that new index `i` holds old index `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let labels = order.iter().map(|&i| self.labels[i].clone()).collect();
        let values = order
            .iter()
            .map(|&i| order.iter().map(|&j| self.values[i][j]).collect())
            .collect();
        Self::new(labels, values)
    }

    /// Labeled square CSV; values at round-trip precision.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_labeled_matrix(path, &self.labels, &self.values)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let (labels, values) = read_labeled_matrix(path)?;
        Self::new(labels, values)
    }
}

pub(crate) fn write_labeled_matrix(
    path: impl AsRef<Path>,
    labels: &[String],
    values: &[Vec<f64>],
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let header: Vec<&str> = std::iter::once("id").chain(labels.iter().map(String::as_str)).collect();
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for (label, row) in labels.iter().zip(values) {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{},{}", label, cells.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub(crate) fn read_labeled_matrix(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let labels: Vec<String> = reader
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .skip(1)
        .map(str::to_string)
        .collect();
    let mut values = Vec::with_capacity(labels.len());
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        if record.get(0) != labels.get(row).map(String::as_str) {
            return Err(Error::Parse {
                path: path.into(),
                line: row as u64 + 2,
                message: "row label does not match column order".into(),
            });
        }
        let parsed = record
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                path: path.into(),
                line: row as u64 + 2,
                message: e.to_string(),
            })?;
        values.push(parsed);
    }
    Ok((labels, values))
}

/// One agglomeration step. Leaves are `0..n`; the cluster created by merge `s`
/// gets id `n + s`. `left` is the side holding the lower-indexed point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

/// Full complete-linkage merge sequence (`n - 1` merges).
///
/// At every step the pair of clusters with the smallest proximity merges; ties
/// go to the pair whose lowest member indices are lexicographically smallest.
pub fn linkage(d: &DistanceMatrix) -> Vec<Merge> {
    let n = d.len();
    // Clusters are keyed by their lowest member index.
    let mut prox: Vec<Vec<f64>> = d.rows().to_vec();
    let mut active: Vec<bool> = vec![true; n];
    let mut node_id: Vec<usize> = (0..n).collect();
    let mut size: Vec<usize> = vec![1; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for step in 0..n.saturating_sub(1) {
        let mut best = (f64::INFINITY, usize::MAX, usize::MAX);
        for i in (0..n).filter(|&i| active[i]) {
            for j in (i + 1..n).filter(|&j| active[j]) {
                if prox[i][j] < best.0 {
                    best = (prox[i][j], i, j);
                }
            }
        }
        let (height, a, b) = best;
        // infinite proximities are rejected by DistanceMatrix, so a pair always exists
        debug_assert!(a < b && b < n);
        merges.push(Merge {
            left: node_id[a],
            right: node_id[b],
            height,
            size: size[a] + size[b],
        });
        active[b] = false;
        size[a] += size[b];
        node_id[a] = n + step;
        for c in (0..n).filter(|&c| active[c] && c != a) {
            let updated = prox[a][c].max(prox[b][c]);
            prox[a][c] = updated;
            prox[c][a] = updated;
        }
    }
    merges
}

/// Flat assignment after applying the first `n - k` merges. Clusters are
/// numbered `0..k` in order of their lowest member index.
pub fn cut_tree(merges: &[Merge], n: usize, k: usize) -> Vec<usize> {
    // union-find over node ids, leaves and internal nodes alike
    let mut parent: Vec<usize> = (0..n + merges.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (s, m) in merges.iter().take(n - k).enumerate() {
        let node = n + s;
        let l = find(&mut parent, m.left);
        let r = find(&mut parent, m.right);
        parent[l] = node;
        parent[r] = node;
    }
    let mut numbering: BTreeMap<usize, usize> = BTreeMap::new();
    (0..n)
        .map(|i| {
            let root = find(&mut parent, i);
            let next = numbering.len();
            *numbering.entry(root).or_insert(next)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSolution {
    pub labels: Vec<String>,
    pub merges: Vec<Merge>,
    pub k: usize,
    /// Cluster index per label, `0..k`.
    pub assignment: Vec<usize>,
    pub silhouette: Vec<f64>,
    pub mean_silhouette: f64,
}

impl ClusterSolution {
    pub fn members(&self, cluster: usize) -> impl Iterator<Item = &str> + '_ {
        self.labels
            .iter()
            .zip(&self.assignment)
            .filter(move |(_, c)| **c == cluster)
            .map(|(l, _)| l.as_str())
    }

    /// `{k, assignment: {id: cluster}, silhouette: {id: s}, mean_silhouette}`, clusters 1-based.
    pub fn to_json(&self) -> serde_json::Value {
        let assignment: serde_json::Map<String, serde_json::Value> = self
            .labels
            .iter()
            .zip(&self.assignment)
            .map(|(l, c)| (l.clone(), serde_json::json!(c + 1)))
            .collect();
        let silhouette: serde_json::Map<String, serde_json::Value> = self
            .labels
            .iter()
            .zip(&self.silhouette)
            .map(|(l, s)| (l.clone(), serde_json::json!(s)))
            .collect();
        serde_json::json!({
            "k": self.k,
            "assignment": assignment,
            "silhouette": silhouette,
            "mean_silhouette": self.mean_silhouette,
        })
    }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cluster count {k} outside 1..={n}"
        )));
    }
    Ok(())
}

/// Complete-linkage clustering cut at `k` clusters, with silhouettes.
pub fn hcluster(d: &DistanceMatrix, k: usize) -> Result<ClusterSolution> {
    check_k(d.len(), k)?;
    let merges = linkage(d);
    solution_from_tree(d, merges, k)
}

fn solution_from_tree(d: &DistanceMatrix, merges: Vec<Merge>, k: usize) -> Result<ClusterSolution> {
    let assignment = cut_tree(&merges, d.len(), k);
    let (silhouette, mean_silhouette) = silhouette(d, &assignment)?;
    Ok(ClusterSolution {
        labels: d.labels().to_vec(),
        merges,
        k,
        assignment,
        silhouette,
        mean_silhouette,
    })
}

/// Per-point silhouette and their mean. Points alone in their cluster score 0,
/// as does everything when there is a single cluster.
pub fn silhouette(d: &DistanceMatrix, assignment: &[usize]) -> Result<(Vec<f64>, f64)> {
    let n = d.len();
    if assignment.len() != n {
        return Err(Error::InvalidArgument(format!(
            "assignment has {} entries for {n} points",
            assignment.len()
        )));
    }
    if n == 0 {
        return Err(Error::Empty("silhouette of an empty matrix".into()));
    }
    let n_clusters = assignment.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; n_clusters];
    for &c in assignment {
        sizes[c] += 1;
    }
    let distinct = sizes.iter().filter(|&&s| s > 0).count();

    let mut scores = vec![0.0; n];
    let mut sums = vec![0.0; n_clusters];
    for i in 0..n {
        let own = assignment[i];
        if distinct < 2 || sizes[own] == 1 {
            continue;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            sums[assignment[j]] += d.get(i, j);
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..n_clusters)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        scores[i] = if denom > 0.0 { (b - a) / denom } else { 0.0 };
    }
    let mean = scores.iter().sum::<f64>() / n as f64;
    Ok((scores, mean))
}

/// Silhouette for an assignment keyed by label.
pub fn silhouette_by_label(
    d: &DistanceMatrix,
    assignment: &BTreeMap<String, usize>,
) -> Result<(Vec<f64>, f64)> {
    if assignment.len() != d.len() {
        return Err(Error::InvalidArgument(format!(
            "assignment covers {} labels, matrix has {}",
            assignment.len(),
            d.len()
        )));
    }
    let flat = d
        .labels()
        .iter()
        .map(|l| {
            assignment
                .get(l)
                .copied()
                .ok_or_else(|| Error::InvalidArgument(format!("label {l} has no cluster")))
        })
        .collect::<Result<Vec<_>>>()?;
    silhouette(d, &flat)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KScore {
    pub k: usize,
    pub mean_silhouette: f64,
    pub best: bool,
}

/// Mean silhouette for every `k` in range; the highest is flagged (smallest `k` on ties).
pub fn select_k(d: &DistanceMatrix, k_range: RangeInclusive<usize>) -> Result<Vec<KScore>> {
    let n = d.len();
    let (lo, hi) = (*k_range.start(), *k_range.end());
    if lo < 2 || hi < lo || hi + 1 > n {
        return Err(Error::InvalidArgument(format!(
            "k range {lo}..={hi} must lie within 2..={}",
            n.saturating_sub(1)
        )));
    }
    let merges = linkage(d);
    let mut scores = k_range
        .map(|k| {
            let assignment = cut_tree(&merges, n, k);
            silhouette(d, &assignment).map(|(_, mean)| KScore {
                k,
                mean_silhouette: mean,
                best: false,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = scores
        .iter()
        .enumerate()
        .fold(0, |b, (i, s)| if s.mean_silhouette > scores[b].mean_silhouette { i } else { b });
    scores[best].best = true;
    Ok(scores)
}
