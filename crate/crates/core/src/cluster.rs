//! PCA reduction, HDBSCAN clustering, 2-D projection and pair evaluation.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClusterError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("too few points: {n} < min_cluster_size {min}")]
    TooFewPoints { n: usize, min: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown id {0}")]
    UnknownId(String),
    #[error("malformed assignment line {0}")]
    Malformed(usize),
}

// ---------------------------------------------------------------- PCA

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Per-dimension divisor when fitted with standardization.
    pub scale: Option<Vec<f64>>,
    /// Orthonormal rows, strongest first.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// Set when all rows were identical (zero total variance).
    pub degenerate: bool,
}

impl PcaModel {
    fn prepare(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, x)| {
                let c = x - self.mean[j];
                match &self.scale {
                    Some(s) => c / s[j],
                    None => c,
                }
            })
            .collect()
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        let x = self.prepare(row);
        self.components.iter().map(|c| c.iter().zip(&x).map(|(a, b)| a * b).sum()).collect()
    }

    /// Maps scores back to the input space.
    pub fn inverse_transform(&self, scores: &[f64]) -> Vec<f64> {
        let d = self.mean.len();
        let mut x = vec![0.0; d];
        for (s, c) in scores.iter().zip(&self.components) {
            for j in 0..d {
                x[j] += s * c[j];
            }
        }
        for j in 0..d {
            if let Some(sc) = &self.scale {
                x[j] *= sc[j];
            }
            x[j] += self.mean[j];
        }
        x
    }
}

struct Decomposition {
    mean: Vec<f64>,
    scale: Option<Vec<f64>>,
    /// (singular value, right singular vector), descending.
    axes: Vec<(f64, Vec<f64>)>,
    total: f64,
    n: usize,
}

fn check_rows(rows: &[Vec<f64>]) -> Result<usize, ClusterError> {
    if rows.len() < 2 {
        return Err(ClusterError::DegenerateInput(format!("need at least 2 rows, got {}", rows.len())));
    }
    let d = rows[0].len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(ClusterError::DegenerateInput("rows must share a non-zero dimension".into()));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(ClusterError::DegenerateInput("non-finite value".into()));
    }
    Ok(d)
}

fn decompose(rows: &[Vec<f64>], standardize: bool) -> Result<Decomposition, ClusterError> {
    let d = check_rows(rows)?;
    let n = rows.len();
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let scale = standardize.then(|| {
        (0..d)
            .map(|j| {
                let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n as f64;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect::<Vec<f64>>()
    });
    let x = DMatrix::from_fn(n, d, |i, j| {
        let c = rows[i][j] - mean[j];
        match &scale {
            Some(s) => c / s[j],
            None => c,
        }
    });
    let total = x.norm_squared();
    let svd = x.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut axes: Vec<(f64, Vec<f64>)> = svd
        .singular_values
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let mut v: Vec<f64> = v_t.row(k).iter().copied().collect();
            // Sign convention: largest-magnitude entry positive.
            let pivot = v.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
            if pivot < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            (s, v)
        })
        .collect();
    axes.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(Decomposition { mean, scale, axes, total, n })
}

/// Fits PCA keeping the fewest components whose cumulative explained
/// variance ratio reaches `variance_target`, and returns the scores.
pub fn pca_fit_transform(
    rows: &[Vec<f64>],
    variance_target: f64,
    standardize: bool,
) -> Result<(PcaModel, Vec<Vec<f64>>), ClusterError> {
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(ClusterError::InvalidParameter(format!("variance target {variance_target} not in (0, 1]")));
    }
    let dec = decompose(rows, standardize)?;
    let d = dec.mean.len();
    let var_of = |s: f64| s * s / (dec.n as f64 - 1.0);
    let model = if dec.total <= 0.0 {
        let mut e0 = vec![0.0; d];
        e0[0] = 1.0;
        PcaModel {
            mean: dec.mean,
            scale: dec.scale,
            components: vec![e0],
            explained_variance: vec![0.0],
            explained_variance_ratio: vec![0.0],
            degenerate: true,
        }
    } else {
        let mut cum = 0.0;
        let mut kept = Vec::new();
        for (s, v) in dec.axes {
            let ratio = s * s / dec.total;
            cum += ratio;
            kept.push((s, ratio, v));
            if cum >= variance_target - 1e-12 {
                break;
            }
        }
        PcaModel {
            mean: dec.mean,
            scale: dec.scale,
            explained_variance: kept.iter().map(|k| var_of(k.0)).collect(),
            explained_variance_ratio: kept.iter().map(|k| k.1).collect(),
            components: kept.into_iter().map(|k| k.2).collect(),
            degenerate: false,
        }
    };
    let scores = rows.iter().map(|r| model.transform(r)).collect();
    Ok((model, scores))
}

/// Scores on the first two principal axes (zero-padded for rank < 2).
pub fn project_2d(rows: &[Vec<f64>]) -> Result<Vec<[f64; 2]>, ClusterError> {
    let dec = decompose(rows, false)?;
    let axis = |k: usize| dec.axes.get(k).filter(|a| a.0 > 1e-12 * dec.total.sqrt().max(1.0)).map(|a| &a.1);
    let (a0, a1) = (axis(0), axis(1));
    Ok(rows
        .iter()
        .map(|r| {
            let x: Vec<f64> = r.iter().zip(&dec.mean).map(|(v, m)| v - m).collect();
            let dot = |a: Option<&Vec<f64>>| a.map_or(0.0, |a| a.iter().zip(&x).map(|(p, q)| p * q).sum());
            [dot(a0), dot(a1)]
        })
        .collect())
}

// ---------------------------------------------------------------- HDBSCAN

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HdbscanParams {
    pub min_cluster_size: usize,
    /// Neighbor count for core distances, the point itself included.
    pub min_samples: usize,
}

impl Default for HdbscanParams {
    fn default() -> Self {
        HdbscanParams { min_cluster_size: 5, min_samples: 2 }
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Distance to the `k`-th nearest point, counting the point itself first.
pub fn core_distances(points: &[Vec<f64>], k: usize) -> Vec<f64> {
    points
        .par_iter()
        .map(|p| {
            let mut d: Vec<f64> = points.iter().map(|q| euclidean(p, q)).collect();
            let idx = (k.max(1) - 1).min(d.len() - 1);
            let (_, kth, _) = d.select_nth_unstable_by(idx, f64::total_cmp);
            *kth
        })
        .collect()
}

/// Minimum spanning tree over mutual reachability (Prim, O(n²)).
/// Edges are returned sorted by weight, then by endpoints.
pub fn mutual_reachability_mst(points: &[Vec<f64>], core: &[f64]) -> Vec<(usize, usize, f64)> {
    let n = points.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut cur = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let updates: Vec<(usize, f64)> = (0..n)
            .into_par_iter()
            .filter(|&j| !in_tree[j])
            .map(|j| (j, euclidean(&points[cur], &points[j]).max(core[cur]).max(core[j])))
            .collect();
        for (j, w) in updates {
            if w < best[j] {
                best[j] = w;
                from[j] = cur;
            }
        }
        let mut next = usize::MAX;
        for j in 0..n {
            if !in_tree[j] && (next == usize::MAX || best[j] < best[next]) {
                next = j;
            }
        }
        in_tree[next] = true;
        edges.push((from[next].min(next), from[next].max(next), best[next]));
        cur = next;
    }
    edges.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    edges
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CondensedEntry {
    pub parent: usize,
    /// A point index (< n) or a cluster id (≥ n).
    pub child: usize,
    pub lambda: f64,
    pub size: usize,
}

/// Condensed cluster tree plus selection, as produced by [`hdbscan_tree`].
#[derive(Debug, Clone)]
pub struct HdbscanTree {
    pub n: usize,
    pub entries: Vec<CondensedEntry>,
    pub stability: BTreeMap<usize, f64>,
    pub selected: Vec<usize>,
    pub labels: Vec<Option<usize>>,
}

fn lambda_of(w: f64, cap: f64) -> f64 {
    if w > 0.0 {
        (1.0 / w).min(cap)
    } else {
        cap
    }
}

pub fn hdbscan(points: &[Vec<f64>], params: HdbscanParams) -> Result<Vec<Option<usize>>, ClusterError> {
    Ok(hdbscan_tree(points, params)?.labels)
}

pub fn hdbscan_tree(points: &[Vec<f64>], params: HdbscanParams) -> Result<HdbscanTree, ClusterError> {
    let n = points.len();
    let mcs = params.min_cluster_size;
    if mcs < 2 || params.min_samples < 1 {
        return Err(ClusterError::InvalidParameter("min_cluster_size ≥ 2 and min_samples ≥ 1 required".into()));
    }
    if n < mcs {
        return Err(ClusterError::TooFewPoints { n, min: mcs });
    }
    if let Some(d) = points.first().map(Vec::len) {
        if points.iter().any(|p| p.len() != d || p.iter().any(|x| !x.is_finite())) {
            return Err(ClusterError::DegenerateInput("ragged or non-finite points".into()));
        }
    }
    let core = core_distances(points, params.min_samples);
    let edges = mutual_reachability_mst(points, &core);

    // Zero distances get a finite lambda far above every real split, scaled
    // with the data so that uniform rescaling keeps the tree's shape.
    let min_pos = edges.iter().map(|e| e.2).filter(|&w| w > 0.0).fold(f64::INFINITY, f64::min);
    let cap = if min_pos.is_finite() { 1e6 / min_pos } else { 1.0 };

    // Single-linkage dendrogram: node n + i is the i-th merge.
    let mut parent: Vec<usize> = (0..2 * n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut merges: Vec<(usize, usize, f64, usize)> = Vec::with_capacity(n - 1);
    let mut size = vec![1usize; 2 * n];
    for (a, b, w) in &edges {
        let (ra, rb) = (find(&mut parent, *a), find(&mut parent, *b));
        let node = n + merges.len();
        parent[ra] = node;
        parent[rb] = node;
        size[node] = size[ra] + size[rb];
        merges.push((ra, rb, *w, size[node]));
    }

    let leaves = |node: usize, out: &mut Vec<usize>| {
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if x < n {
                out.push(x);
            } else {
                let (l, r, _, _) = merges[x - n];
                stack.push(r);
                stack.push(l);
            }
        }
    };

    // Condense top-down. Cluster ids start at n (root).
    let root_cluster = n;
    let mut next_cluster = n + 1;
    let mut entries = Vec::new();
    let mut birth: HashMap<usize, f64> = HashMap::from([(root_cluster, 0.0)]);
    let mut stack = Vec::new();
    if n == 1 {
        entries.push(CondensedEntry { parent: root_cluster, child: 0, lambda: cap, size: 1 });
    } else {
        stack.push((2 * n - 2, root_cluster));
    }
    while let Some((node, cluster)) = stack.pop() {
        let (l, r, w, _) = merges[node - n];
        let lambda = lambda_of(w, cap);
        let (sl, sr) = (size[l], size[r]);
        let fall_out = |child: usize, entries: &mut Vec<CondensedEntry>| {
            let mut pts = Vec::new();
            leaves(child, &mut pts);
            for p in pts {
                entries.push(CondensedEntry { parent: cluster, child: p, lambda, size: 1 });
            }
        };
        match (sl >= mcs, sr >= mcs) {
            (true, true) => {
                for (child, sz) in [(l, sl), (r, sr)] {
                    let c = next_cluster;
                    next_cluster += 1;
                    birth.insert(c, lambda);
                    entries.push(CondensedEntry { parent: cluster, child: c, lambda, size: sz });
                    stack.push((child, c));
                }
            }
            (false, false) => {
                fall_out(l, &mut entries);
                fall_out(r, &mut entries);
            }
            (true, false) => {
                fall_out(r, &mut entries);
                stack.push((l, cluster));
            }
            (false, true) => {
                fall_out(l, &mut entries);
                stack.push((r, cluster));
            }
        }
    }

    // Stability: sum over departures of (lambda - birth) * size.
    let mut stability: BTreeMap<usize, f64> = (root_cluster..next_cluster).map(|c| (c, 0.0)).collect();
    let mut children: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut cluster_parent: HashMap<usize, usize> = HashMap::new();
    for e in &entries {
        *stability.get_mut(&e.parent).unwrap() += (e.lambda - birth[&e.parent]) * e.size as f64;
        if e.child >= n {
            children.entry(e.parent).or_default().push(e.child);
            cluster_parent.insert(e.child, e.parent);
        }
    }

    // Excess-of-mass selection, bottom-up; the root is not a candidate.
    let mut is_selected: BTreeMap<usize, bool> = stability.keys().map(|&c| (c, c != root_cluster)).collect();
    let mut effective = stability.clone();
    for c in (root_cluster + 1..next_cluster).rev() {
        let kids = children.get(&c).cloned().unwrap_or_default();
        let child_sum: f64 = kids.iter().map(|k| effective[k]).sum();
        if child_sum > stability[&c] {
            is_selected.insert(c, false);
            effective.insert(c, child_sum);
        } else {
            let mut desc = kids;
            while let Some(k) = desc.pop() {
                is_selected.insert(k, false);
                desc.extend(children.get(&k).cloned().unwrap_or_default());
            }
        }
    }
    // Coincident points: with no split below the root, each group of at
    // least min_cluster_size points at zero mutual reachability distance
    // is a cluster of its own.
    let mut coincident: Vec<Option<usize>> = vec![None; n];
    if next_cluster == root_cluster + 1 {
        let mut uf: Vec<usize> = (0..n).collect();
        for (a, b, w) in &edges {
            if *w == 0.0 {
                let (ra, rb) = (find(&mut uf, *a), find(&mut uf, *b));
                uf[ra.max(rb)] = ra.min(rb);
            }
        }
        let roots: Vec<usize> = (0..n).map(|p| find(&mut uf, p)).collect();
        for p in 0..n {
            if roots.iter().filter(|&&r| r == roots[p]).count() >= mcs {
                // Synthetic ids above every condensed cluster id.
                coincident[p] = Some(next_cluster + roots[p]);
            }
        }
    }

    // Label each point by its selected ancestor-or-self cluster.
    let mut fell_from = vec![root_cluster; n];
    for e in &entries {
        if e.child < n {
            fell_from[e.child] = e.parent;
        }
    }
    let mut raw: Vec<Option<usize>> = vec![None; n];
    for p in 0..n {
        let mut c = Some(fell_from[p]);
        while let Some(cc) = c {
            if is_selected[&cc] {
                raw[p] = Some(cc);
                break;
            }
            c = cluster_parent.get(&cc).copied();
        }
    }
    for p in 0..n {
        if coincident[p].is_some() {
            raw[p] = coincident[p];
        }
    }
    // Dense labels in order of each cluster's first member.
    let mut dense: HashMap<usize, usize> = HashMap::new();
    let labels = raw
        .iter()
        .map(|r| {
            r.map(|c| {
                let next = dense.len();
                *dense.entry(c).or_insert(next)
            })
        })
        .collect();
    let selected = is_selected.iter().filter(|(_, &s)| s).map(|(&c, _)| c).collect();
    Ok(HdbscanTree { n, entries, stability, selected, labels })
}

// ---------------------------------------------------------------- assignments

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub ids: Vec<String>,
    /// `None` marks an outlier.
    pub labels: Vec<Option<usize>>,
}

impl ClusterAssignment {
    pub fn new(ids: Vec<String>, labels: Vec<Option<usize>>) -> Self {
        assert_eq!(ids.len(), labels.len());
        ClusterAssignment { ids, labels }
    }

    pub fn label_of(&self, id: &str) -> Result<Option<usize>, ClusterError> {
        self.ids
            .iter()
            .position(|i| i == id)
            .map(|p| self.labels[p])
            .ok_or_else(|| ClusterError::UnknownId(id.to_string()))
    }

    pub fn cluster_count(&self) -> usize {
        self.labels.iter().flatten().max().map_or(0, |m| m + 1)
    }

    pub fn outlier_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    /// Member ids per cluster label.
    pub fn clusters(&self) -> BTreeMap<usize, Vec<String>> {
        let mut out: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        for (id, l) in self.ids.iter().zip(&self.labels) {
            if let Some(l) = l {
                out.entry(*l).or_default().push(id.clone());
            }
        }
        out
    }

    /// `id,label` lines with `-1` for outliers.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("id,label\n");
        for (id, l) in self.ids.iter().zip(&self.labels) {
            let l = l.map_or("-1".to_string(), |l| l.to_string());
            s.push_str(&format!("{id},{l}\n"));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, ClusterError> {
        let mut ids = Vec::new();
        let mut labels = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 && line.trim() == "id,label" || line.trim().is_empty() {
                continue;
            }
            let (id, l) = line.split_once(',').ok_or(ClusterError::Malformed(i + 1))?;
            let l: i64 = l.trim().parse().map_err(|_| ClusterError::Malformed(i + 1))?;
            ids.push(id.to_string());
            labels.push(usize::try_from(l).ok());
        }
        Ok(ClusterAssignment { ids, labels })
    }
}

/// Clusters labelled rows.
pub fn cluster_ids(ids: &[String], points: &[Vec<f64>], params: HdbscanParams) -> Result<ClusterAssignment, ClusterError> {
    Ok(ClusterAssignment::new(ids.to_vec(), hdbscan(points, params)?))
}

// ---------------------------------------------------------------- pair evaluation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expectation {
    Similar,
    Different,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub a: String,
    pub b: String,
    pub expected: Expectation,
    pub predicted: Expectation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub accuracy: f64,
    /// 0 when nothing is predicted similar.
    pub precision: f64,
    /// 0 when nothing is expected similar.
    pub recall: f64,
}

impl PairMetrics {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        PairMetrics {
            tp,
            fp,
            tn,
            fn_,
            accuracy: ratio(tp + tn, tp + fp + tn + fn_),
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
        }
    }
}

/// A pair is predicted similar iff both ids share a non-outlier cluster.
pub fn evaluate_pairs(
    assignment: &ClusterAssignment,
    pairs: &[(String, String, Expectation)],
) -> Result<(PairMetrics, Vec<PairVerdict>), ClusterError> {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    let mut verdicts = Vec::with_capacity(pairs.len());
    for (a, b, expected) in pairs {
        let (la, lb) = (assignment.label_of(a)?, assignment.label_of(b)?);
        let predicted = match (la, lb) {
            (Some(x), Some(y)) if x == y => Expectation::Similar,
            _ => Expectation::Different,
        };
        match (expected, predicted) {
            (Expectation::Similar, Expectation::Similar) => tp += 1,
            (Expectation::Different, Expectation::Similar) => fp += 1,
            (Expectation::Different, Expectation::Different) => tn += 1,
            (Expectation::Similar, Expectation::Different) => fn_ += 1,
        }
        verdicts.push(PairVerdict { a: a.clone(), b: b.clone(), expected: *expected, predicted });
    }
    Ok((PairMetrics::from_counts(tp, fp, tn, fn_), verdicts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gauss(rng: &mut ChaCha8Rng) -> f64 {
        // Box-Muller
        let (u, v): (f64, f64) = (rng.gen_range(1e-12..1.0), rng.gen());
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }

    fn blobs(seed: u64, centers: &[(f64, f64)], per: usize, spread: f64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        centers
            .iter()
            .flat_map(|&(cx, cy)| (0..per).map(|_| (cx, cy)).collect::<Vec<_>>())
            .map(|(cx, cy)| vec![cx + spread * gauss(&mut rng), cy + spread * gauss(&mut rng)])
            .collect()
    }

    /// Covariance eigenvalues, descending, computed without SVD.
    fn cov_eigenvalues(rows: &[Vec<f64>]) -> Vec<f64> {
        let (n, d) = (rows.len(), rows[0].len());
        let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
        let cov = DMatrix::from_fn(d, d, |a, b| {
            rows.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / (n as f64 - 1.0)
        });
        let mut ev: Vec<f64> = cov.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    #[test]
    fn rank_one_data_needs_one_component() {
        let dir: Vec<f64> = (0..768).map(|j| ((j % 7) as f64 - 3.0) / 10.0).collect();
        let rows: Vec<Vec<f64>> = (0..10).map(|i| dir.iter().map(|x| x * (i as f64 - 4.5)).collect()).collect();
        let (m, scores) = pca_fit_transform(&rows, 0.95, false).unwrap();
        assert_eq!(m.components.len(), 1);
        assert!((m.explained_variance_ratio[0] - 1.0).abs() < 1e-12);
        assert_eq!(scores[0].len(), 1);
        let p = project_2d(&rows).unwrap();
        assert!(p.iter().all(|q| q[1] == 0.0));
    }

    #[test]
    fn isotropic_gaussian_in_768_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rows: Vec<Vec<f64>> = (0..400)
            .map(|_| {
                let mut r = vec![0.0; 768];
                for x in r.iter_mut().take(3) {
                    *x = gauss(&mut rng);
                }
                r
            })
            .collect();
        let (m, _) = pca_fit_transform(&rows, 0.95, false).unwrap();
        assert_eq!(m.components.len(), 3);
        let ev = cov_eigenvalues(&rows.iter().map(|r| r[..3].to_vec()).collect::<Vec<_>>());
        for (a, b) in m.explained_variance.iter().zip(&ev) {
            assert!((a - b).abs() < 1e-9 * b.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn identical_rows_are_flagged() {
        let rows = vec![vec![1.0, 2.0]; 4];
        let (m, scores) = pca_fit_transform(&rows, 0.95, false).unwrap();
        assert!(m.degenerate);
        assert_eq!(m.components.len(), 1);
        assert!(scores.iter().all(|s| s == &[0.0]));
        assert!(matches!(pca_fit_transform(&rows[..1], 0.95, false), Err(ClusterError::DegenerateInput(_))));
    }

    #[test]
    fn standardization_passes_constant_dimensions() {
        let rows = vec![vec![0.0, 5.0, 100.0], vec![1.0, 5.0, 300.0], vec![2.0, 5.0, 200.0]];
        let (m, _) = pca_fit_transform(&rows, 1.0, true).unwrap();
        assert_eq!(m.scale.as_ref().unwrap()[1], 1.0);
        assert!(m.explained_variance_ratio.iter().sum::<f64>() <= 1.0 + 1e-12);
    }

    #[test]
    fn mirrored_pair_projection() {
        let mut a = vec![0.0; 6];
        let mut b = vec![0.0; 6];
        a[0] = 1.0;
        b[1] = 1.0;
        let p = project_2d(&[a, b]).unwrap();
        assert!((p[0][0] + p[1][0]).abs() < 1e-12 && (p[0][1] + p[1][1]).abs() < 1e-12);
        assert!((p[0][0].abs() - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn projection_variance_matches_top_two_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..50).map(|_| (0..10).map(|j| gauss(&mut rng) * (j + 1) as f64).collect()).collect();
        let p = project_2d(&rows).unwrap();
        let var: f64 = (0..2).map(|k| p.iter().map(|q| q[k] * q[k]).sum::<f64>() / 49.0).sum();
        let ev = cov_eigenvalues(&rows);
        assert!((var - ev[0] - ev[1]).abs() < 1e-8 * var);
    }

    #[test]
    fn two_blobs() {
        let pts = blobs(1, &[(0.0, 0.0), (50.0, 50.0)], 20, 1.0);
        let labels = hdbscan(&pts, HdbscanParams::default()).unwrap();
        assert_eq!(labels.iter().flatten().max(), Some(&1));
        assert!(labels.iter().filter(|l| l.is_none()).count() <= 2);
        assert!(labels[..20].iter().flatten().all(|&l| l == labels[0].unwrap()));
        assert!(labels[20..].iter().flatten().all(|&l| l != labels[0].unwrap()));
    }

    #[test]
    fn identical_points_form_one_cluster() {
        let labels = hdbscan(&vec![vec![3.0, 3.0]; 5], HdbscanParams::default()).unwrap();
        assert_eq!(labels, vec![Some(0); 5]);
    }

    #[test]
    fn four_plus_one_are_all_outliers() {
        let mut pts = vec![vec![0.0, 0.0], vec![0.1, 0.0], vec![0.0, 0.1], vec![0.1, 0.1]];
        pts.push(vec![100.0, 100.0]);
        assert_eq!(hdbscan(&pts, HdbscanParams::default()).unwrap(), vec![None; 5]);
        assert!(matches!(hdbscan(&pts[..4], HdbscanParams::default()), Err(ClusterError::TooFewPoints { .. })));
    }

    #[test]
    fn pair_metrics() {
        let a = ClusterAssignment::new(
            ["a", "b", "c", "d", "e"].iter().map(|s| s.to_string()).collect(),
            vec![Some(3), Some(3), None, Some(1), Some(1)],
        );
        let p = |x: &str, y: &str, e| (x.to_string(), y.to_string(), e);
        use Expectation::*;
        let (m, v) = evaluate_pairs(&a, &[p("a", "b", Similar), p("d", "e", Similar), p("a", "c", Similar), p("d", "e", Different)]).unwrap();
        assert_eq!(v[0].predicted, Similar);
        assert_eq!(v[2].predicted, Different);
        assert_eq!((m.tp, m.fp, m.fn_, m.tn), (2, 1, 1, 0));
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-12 && (m.recall - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(evaluate_pairs(&a, &[p("a", "zz", Similar)]).unwrap_err(), ClusterError::UnknownId("zz".into()));
    }

    #[test]
    fn assignment_csv() {
        let a = ClusterAssignment::new(vec!["x".into(), "y".into()], vec![Some(0), None]);
        assert_eq!(a.to_csv(), "id,label\nx,0\ny,-1\n");
        assert_eq!(ClusterAssignment::from_csv(&a.to_csv()).unwrap(), a);
    }

    fn same_partition(a: &[Option<usize>], b: &[Option<usize>]) -> bool {
        let mut map = HashMap::new();
        let mut rev = HashMap::new();
        a.iter().zip(b).all(|(x, y)| match (x, y) {
            (None, None) => true,
            (Some(x), Some(y)) => *map.entry(*x).or_insert(*y) == *y && *rev.entry(*y).or_insert(*x) == *x,
            _ => false,
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn permutation_and_scale_invariance(seed in any::<u64>(), shift in 1usize..39) {
            let pts = blobs(seed, &[(0.0, 0.0), (8.0, 0.0), (0.0, 9.0)], 13, 1.0);
            let params = HdbscanParams::default();
            let base = hdbscan(&pts, params).unwrap();
            for l in base.iter().flatten() {
                prop_assert!(base.iter().filter(|x| **x == Some(*l)).count() >= 5);
            }
            let mut rotated = pts.clone();
            rotated.rotate_left(shift);
            let mut back = hdbscan(&rotated, params).unwrap();
            back.rotate_right(shift);
            prop_assert!(same_partition(&base, &back));
            let doubled: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|x| 2.0 * x).collect()).collect();
            prop_assert!(same_partition(&base, &hdbscan(&doubled, params).unwrap()));
        }

        #[test]
        fn pca_reconstruction_loss(seed in any::<u64>(), target in 0.5f64..0.99) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..30).map(|_| (0..8).map(|j| gauss(&mut rng) * (8 - j) as f64).collect()).collect();
            let (m, scores) = pca_fit_transform(&rows, target, false).unwrap();
            for (i, a) in m.components.iter().enumerate() {
                for (j, b) in m.components.iter().enumerate() {
                    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((dot - want).abs() < 1e-8);
                }
            }
            let total: f64 = rows.iter().map(|r| r.iter().zip(&m.mean).map(|(x, mu)| (x - mu).powi(2)).sum::<f64>()).sum();
            let lost: f64 = rows.iter().zip(&scores).map(|(r, s)| euclidean(r, &m.inverse_transform(s)).powi(2)).sum();
            let kept: f64 = m.explained_variance_ratio.iter().sum();
            prop_assert!((lost / total - (1.0 - kept)).abs() < 1e-6);
        }
    }
}
