//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use stationtrend::dtw::{DtwConfig, LocalDistance};

/// Minimum over every monotone path from (1,1) to (n,m), enumerated explicitly.
pub fn dtw_brute_force(x: &[f64], y: &[f64], cfg: &DtwConfig) -> f64 {
    let local = |i: usize, j: usize| match cfg.local_distance {
        LocalDistance::Manhattan => (x[i] - y[j]).abs(),
        LocalDistance::Euclidean => ((x[i] - y[j]) * (x[i] - y[j])).sqrt(),
    };
    let penalty = |i: usize, j: usize| {
        let d = i as f64 - j as f64;
        cfg.lambda * d * d
    };
    let mut best = f64::INFINITY;
    let mut paths = Vec::new();
    let mut path = vec![(0usize, 0usize)];
    collect_paths(x.len(), y.len(), &mut path, &mut paths);
    for p in paths {
        // the first cell is reached by a diagonal step from the virtual origin
        let mut cost = cfg.weights.diagonal * local(0, 0) + penalty(0, 0);
        for w in p.windows(2) {
            let ((i0, j0), (i1, j1)) = (w[0], w[1]);
            let weight = match (i1 - i0, j1 - j0) {
                (1, 0) => cfg.weights.horizontal,
                (0, 1) => cfg.weights.vertical,
                _ => cfg.weights.diagonal,
            };
            cost += weight * local(i1, j1) + penalty(i1, j1);
        }
        best = best.min(cost);
    }
    best
}

fn collect_paths(n: usize, m: usize, path: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
    let (i, j) = *path.last().unwrap();
    if (i, j) == (n - 1, m - 1) {
        out.push(path.clone());
        return;
    }
    for (di, dj) in [(1, 0), (0, 1), (1, 1)] {
        if i + di < n && j + dj < m {
            path.push((i + di, j + dj));
            collect_paths(n, m, path, out);
            path.pop();
        }
    }
}

/// Naive complete linkage: cluster distance recomputed from members at every
/// step. Returns the flat assignment for every k from n down to 1, clusters
/// numbered by their lowest member.
pub fn naive_complete_linkage(d: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = d.len();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut by_k = vec![Vec::new(); n + 1];
    by_k[n] = flat(&clusters, n);
    while clusters.len() > 1 {
        // clusters stay sorted by lowest member, so index order is label order
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut dist = f64::NEG_INFINITY;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        dist = dist.max(d[i][j]);
                    }
                }
                if best.is_none_or(|(bd, _, _)| dist < bd) {
                    best = Some((dist, a, b));
                }
            }
        }
        let (_, a, b) = best.unwrap();
        let moved = clusters.remove(b);
        clusters[a].extend(moved);
        clusters[a].sort_unstable();
        clusters.sort_by_key(|c| c[0]);
        by_k[clusters.len()] = flat(&clusters, n);
    }
    by_k
}

fn flat(clusters: &[Vec<usize>], n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for (c, members) in clusters.iter().enumerate() {
        for &i in members {
            out[i] = c;
        }
    }
    out
}

/// Silhouette by the textbook two-loop definition.
pub fn silhouette_direct(d: &[Vec<f64>], assignment: &[usize]) -> Vec<f64> {
    let n = d.len();
    let clusters: std::collections::BTreeSet<usize> = assignment.iter().copied().collect();
    (0..n)
        .map(|i| {
            let own = assignment[i];
            let mates: Vec<usize> = (0..n).filter(|&j| j != i && assignment[j] == own).collect();
            if mates.is_empty() || clusters.len() < 2 {
                return 0.0;
            }
            let a = mates.iter().map(|&j| d[i][j]).sum::<f64>() / mates.len() as f64;
            let mut b = f64::INFINITY;
            for &c in clusters.iter().filter(|&&c| c != own) {
                let others: Vec<usize> = (0..n).filter(|&j| assignment[j] == c).collect();
                b = b.min(others.iter().map(|&j| d[i][j]).sum::<f64>() / others.len() as f64);
            }
            if a.max(b) == 0.0 {
                0.0
            } else {
                (b - a) / a.max(b)
            }
        })
        .collect()
}

/// Mann-Kendall S by enumerating all pairs.
pub fn mk_s_brute(x: &[f64]) -> i64 {
    let mut s = 0;
    for j in 0..x.len() {
        for i in 0..j {
            s += (x[j] - x[i]).partial_cmp(&0.0).map_or(0, |o| o as i64);
        }
    }
    s
}

/// Slope from the 2x2 normal equations solved by Cramer's rule, t = 1..n.
pub fn ols_slope_cramer(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let (mut st, mut stt, mut sy, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for (i, v) in y.iter().enumerate() {
        let t = (i + 1) as f64;
        st += t;
        stt += t * t;
        sy += v;
        sty += t * v;
    }
    (n * sty - st * sy) / (n * stt - st * st)
}

/// Pearson correlation, for comparisons only.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Recursively collect files under `root` as (relative path, bytes), sorted.
pub fn read_tree(root: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &std::path::Path, dir: &std::path::Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}
