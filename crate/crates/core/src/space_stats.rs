//! Embedding-space statistics: variance, k-means with silhouette-selected k,
//! separation/cohesion dispersion, and PCA projection.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::batch::map_batches;
use crate::corpus::{ClusterAssignment, NOISE_CLUSTER};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("{found} point(s) available, need at least {needed}")]
    TooFewPoints { found: usize, needed: usize },
    #[error("vector {index} has dimension {actual}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, actual: usize },
    #[error("assignment covers {actual} point(s), expected {expected}")]
    AssignmentLength { expected: usize, actual: usize },
    #[error("silhouette needs at least two clusters")]
    SingleCluster,
    #[error("non-finite coordinate in vector {0}")]
    NonFinite(usize),
}

pub type Result<T> = std::result::Result<T, SpaceError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Definition,
    Sentence,
    Token,
}

impl Representation {
    pub fn as_str(self) -> &'static str {
        match self {
            Representation::Definition => "definition",
            Representation::Sentence => "sentence",
            Representation::Token => "token",
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Representation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "definition" | "definitions" => Ok(Representation::Definition),
            "sentence" | "sentences" => Ok(Representation::Sentence),
            "token" | "tokens" => Ok(Representation::Token),
            other => Err(format!("unknown representation {other:?}")),
        }
    }
}

fn check_space(vectors: &[Vec<f64>]) -> Result<usize> {
    let dim = vectors.first().map_or(0, Vec::len);
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(SpaceError::DimensionMismatch { index: i, expected: dim, actual: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(SpaceError::NonFinite(i));
        }
    }
    Ok(dim)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn mean_of<'a>(points: impl Iterator<Item = &'a Vec<f64>>, dim: usize) -> Vec<f64> {
    let mut sum = vec![0.0; dim];
    let mut n = 0usize;
    for p in points {
        for (s, x) in sum.iter_mut().zip(p) {
            *s += x;
        }
        n += 1;
    }
    if n > 0 {
        sum.iter_mut().for_each(|s| *s /= n as f64);
    }
    sum
}

/// Number of distinct points (bitwise comparison).
pub fn distinct_points(vectors: &[Vec<f64>]) -> usize {
    vectors.iter().map(|v| v.iter().map(|x| x.to_bits()).collect::<Vec<u64>>()).collect::<BTreeSet<_>>().len()
}

/// Mean per-dimension variance about the centroid, and its square root.
pub fn space_variance(vectors: &[Vec<f64>]) -> Result<(f64, f64)> {
    let dim = check_space(vectors)?;
    if vectors.is_empty() {
        return Err(SpaceError::TooFewPoints { found: 0, needed: 1 });
    }
    if dim == 0 {
        return Ok((0.0, 0.0));
    }
    let c = mean_of(vectors.iter(), dim);
    let total: f64 = vectors.iter().map(|v| sq_dist(v, &c)).sum();
    let variance = total / (vectors.len() * dim) as f64;
    Ok((variance, variance.sqrt()))
}

#[derive(Debug, Clone)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iterations: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self { restarts: 10, max_iterations: 300 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignment: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub wcss: f64,
    /// Restart that produced this result.
    pub restart: usize,
    /// WCSS after each assignment step of the winning restart.
    pub wcss_trace: Vec<f64>,
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_init(vectors: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = vectors.len();
    let mut centers = vec![vectors[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = vectors.iter().map(|v| sq_dist(v, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && *d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = vectors[pick].clone();
        for (d, v) in d2.iter_mut().zip(vectors) {
            *d = d.min(sq_dist(v, &c));
        }
        centers.push(c);
    }
    centers
}

fn lloyd(
    vectors: &[Vec<f64>],
    mut centers: Vec<Vec<f64>>,
    max_iterations: usize,
) -> (Vec<usize>, Vec<Vec<f64>>, f64, Vec<f64>) {
    let k = centers.len();
    let dim = vectors[0].len();
    let mut assignment: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    for _ in 0..max_iterations {
        let mut wcss = 0.0;
        let next: Vec<usize> = vectors
            .iter()
            .map(|v| {
                let (j, d) = nearest(v, &centers);
                wcss += d;
                j
            })
            .collect();
        trace.push(wcss);
        let stable = next == assignment;
        assignment = next;
        if stable {
            break;
        }
        let mut counts = vec![0usize; k];
        for &a in &assignment {
            counts[a] += 1;
        }
        for (j, center) in centers.iter_mut().enumerate() {
            if counts[j] > 0 {
                *center = mean_of(vectors.iter().zip(&assignment).filter(|(_, a)| **a == j).map(|(v, _)| v), dim);
            }
        }
        // Empty clusters move to the points farthest from their own centers.
        let mut taken = BTreeSet::new();
        for j in 0..k {
            if counts[j] > 0 {
                continue;
            }
            let far = (0..vectors.len())
                .filter(|i| !taken.contains(i))
                .map(|i| (i, sq_dist(&vectors[i], &centers[assignment[i]])))
                .fold(None::<(usize, f64)>, |best, (i, d)| match best {
                    Some((_, bd)) if bd >= d => best,
                    _ => Some((i, d)),
                });
            if let Some((i, _)) = far {
                taken.insert(i);
                centers[j] = vectors[i].clone();
            }
        }
    }
    let wcss = vectors.iter().zip(&assignment).map(|(v, &a)| sq_dist(v, &centers[a])).sum();
    (assignment, centers, wcss, trace)
}

/// k-means++ seeded Lloyd iterations; the restart with the lowest WCSS wins
/// (earliest on ties). Restart `r` uses ChaCha8 stream `r` of `seed`.
pub fn kmeans(vectors: &[Vec<f64>], k: usize, seed: u64, config: &KMeansConfig) -> Result<KMeansResult> {
    check_space(vectors)?;
    let k = k.max(1);
    if vectors.len() < k.max(2) {
        return Err(SpaceError::TooFewPoints { found: vectors.len(), needed: k.max(2) });
    }
    let mut best: Option<KMeansResult> = None;
    for restart in 0..config.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart as u64);
        let init = plus_plus_init(vectors, k, &mut rng);
        let (assignment, centers, wcss, wcss_trace) = lloyd(vectors, init, config.max_iterations.max(1));
        if best.as_ref().is_none_or(|b| wcss < b.wcss) {
            best = Some(KMeansResult { assignment, centers, wcss, restart, wcss_trace });
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Mean silhouette with Euclidean distances. Points in singleton clusters
/// score 0, as do points with a = b = 0.
pub fn silhouette(vectors: &[Vec<f64>], assignment: &[usize]) -> Result<f64> {
    check_space(vectors)?;
    if assignment.len() != vectors.len() {
        return Err(SpaceError::AssignmentLength { expected: vectors.len(), actual: assignment.len() });
    }
    let labels: BTreeSet<usize> = assignment.iter().copied().collect();
    if labels.len() < 2 {
        return Err(SpaceError::SingleCluster);
    }
    let slot: HashMap<usize, usize> = labels.iter().enumerate().map(|(i, l)| (*l, i)).collect();
    let mut sizes = vec![0usize; labels.len()];
    for a in assignment {
        sizes[slot[a]] += 1;
    }
    let n = vectors.len();
    let mut total = 0.0;
    for i in 0..n {
        let own = slot[&assignment[i]];
        if sizes[own] == 1 {
            continue;
        }
        let mut sums = vec![0.0; labels.len()];
        for j in 0..n {
            if j != i {
                sums[slot[&assignment[j]]] += sq_dist(&vectors[i], &vectors[j]).sqrt();
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b =
            (0..labels.len()).filter(|&c| c != own).map(|c| sums[c] / sizes[c] as f64).fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}

#[derive(Debug, Clone)]
pub struct KSelectConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub kmeans: KMeansConfig,
    /// Values of k evaluated concurrently.
    pub jobs: usize,
}

impl Default for KSelectConfig {
    fn default() -> Self {
        Self { k_min: 2, k_max: 25, kmeans: KMeansConfig::default(), jobs: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSelection {
    pub k: usize,
    pub assignment: Vec<usize>,
    pub silhouette: f64,
    /// Silhouette for every k tried, ascending k.
    pub scores: Vec<(usize, f64)>,
}

/// Runs k-means for every k in range and keeps the best silhouette (smallest
/// k on ties). The range is clipped to [2, n − 1] and to the number of
/// distinct points; spaces with fewer than 3 distinct points are rejected.
pub fn select_k(vectors: &[Vec<f64>], seed: u64, config: &KSelectConfig) -> Result<KSelection> {
    check_space(vectors)?;
    let distinct = distinct_points(vectors);
    if distinct < 3 {
        return Err(SpaceError::TooFewPoints { found: distinct, needed: 3 });
    }
    let lo = config.k_min.max(2);
    let hi = config.k_max.min(vectors.len() - 1).min(distinct);
    if lo > hi {
        return Err(SpaceError::TooFewPoints { found: vectors.len(), needed: lo + 1 });
    }
    let ks: Vec<usize> = (lo..=hi).collect();
    let runs = map_batches(ks.len(), 1, config.jobs.max(1), |range| {
        let k = ks[range.start];
        let km = kmeans(vectors, k, seed, &config.kmeans)?;
        let s = silhouette(vectors, &km.assignment)?;
        Ok((k, km.assignment, s))
    });
    let mut best: Option<(usize, Vec<usize>, f64)> = None;
    let mut scores = Vec::with_capacity(ks.len());
    for run in runs {
        let (k, assignment, s) = run?;
        scores.push((k, s));
        if best.as_ref().is_none_or(|b| s > b.2) {
            best = Some((k, assignment, s));
        }
    }
    let (k, assignment, silhouette) = best.expect("non-empty k range");
    Ok(KSelection { k, assignment, silhouette, scores })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dispersion {
    /// B = (1/n) Σ_k n_k ‖c_k − c‖²
    pub separation: f64,
    /// W = (1/n) Σ_k Σ_{x∈k} ‖x − c_k‖²
    pub cohesion: f64,
    /// B / W, undefined when W < 1e−12.
    pub ratio: Option<f64>,
}

pub const COHESION_EPSILON: f64 = 1e-12;

pub fn dispersion<L: Ord + Copy>(vectors: &[Vec<f64>], assignment: &[L]) -> Result<Dispersion> {
    let dim = check_space(vectors)?;
    if assignment.len() != vectors.len() {
        return Err(SpaceError::AssignmentLength { expected: vectors.len(), actual: assignment.len() });
    }
    if vectors.is_empty() {
        return Err(SpaceError::TooFewPoints { found: 0, needed: 1 });
    }
    let n = vectors.len() as f64;
    let c = mean_of(vectors.iter(), dim);
    let mut groups: BTreeMap<L, Vec<&Vec<f64>>> = BTreeMap::new();
    for (v, a) in vectors.iter().zip(assignment) {
        groups.entry(*a).or_default().push(v);
    }
    let (mut w, mut b) = (0.0, 0.0);
    for members in groups.values() {
        let ck = mean_of(members.iter().copied(), dim);
        w += members.iter().map(|x| sq_dist(x, &ck)).sum::<f64>();
        b += members.len() as f64 * sq_dist(&ck, &c);
    }
    let (separation, cohesion) = (b / n, w / n);
    Ok(Dispersion { separation, cohesion, ratio: (cohesion >= COHESION_EPSILON).then(|| separation / cohesion) })
}

/// Dispersion under gold clusters; noise and unassigned points are left out.
pub fn dwug_cluster_dispersion(
    vectors: &[Vec<f64>],
    usage_ids: &[String],
    gold: &[ClusterAssignment],
) -> Result<Dispersion> {
    let cluster: HashMap<&str, i64> = gold.iter().map(|g| (g.usage_id.as_str(), g.cluster)).collect();
    let mut kept = Vec::new();
    let mut labels = Vec::new();
    for (v, id) in vectors.iter().zip(usage_ids) {
        if let Some(&c) = cluster.get(id.as_str()) {
            if c != NOISE_CLUSTER {
                kept.push(v.clone());
                labels.push(c);
            }
        }
    }
    dispersion(&kept, &labels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// One row per input point, `components.len()` coordinates each.
    pub points: Vec<Vec<f64>>,
    pub components: Vec<Vec<f64>>,
    /// Variance along each retained component (divisor n).
    pub explained_variance: Vec<f64>,
    pub explained_ratio: Vec<f64>,
    /// Fewer than the requested dimensions carried variance.
    pub rank_deficient: bool,
}

/// Principal-component projection. Eigenvectors come from a symmetric
/// eigendecomposition of the covariance (or of the Gram matrix when there
/// are fewer points than dimensions); each is signed so that its
/// largest-magnitude coordinate is positive.
pub fn pca_project(vectors: &[Vec<f64>], dims: usize) -> Result<Projection> {
    let d = check_space(vectors)?;
    let n = vectors.len();
    if n < 2 {
        return Err(SpaceError::TooFewPoints { found: n, needed: 2 });
    }
    let c = mean_of(vectors.iter(), d);
    let x = DMatrix::from_fn(n, d, |i, j| vectors[i][j] - c[j]);
    let total: f64 = x.iter().map(|v| v * v).sum::<f64>() / n as f64;

    let use_gram = n < d;
    let m = if use_gram { &x * x.transpose() } else { x.transpose() * &x } / n as f64;
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let tol = 1e-10 * eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);

    let mut components = Vec::new();
    let mut explained_variance = Vec::new();
    for &idx in order.iter().take(dims) {
        let lambda = eig.eigenvalues[idx];
        if lambda <= tol {
            break;
        }
        let mut axis: Vec<f64> = if use_gram {
            // Right singular vector from the left one: v = Xᵀu / ‖Xᵀu‖.
            let u = eig.eigenvectors.column(idx);
            let v = x.transpose() * u;
            let norm = v.norm();
            v.iter().map(|a| a / norm).collect()
        } else {
            eig.eigenvectors.column(idx).iter().copied().collect()
        };
        let lead = axis
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, v)| if v.abs() > bv.abs() { (i, *v) } else { (bi, bv) });
        if lead.1 < 0.0 {
            axis.iter_mut().for_each(|a| *a = -*a);
        }
        components.push(axis);
        explained_variance.push(lambda);
    }
    let points = (0..n)
        .map(|i| components.iter().map(|axis| axis.iter().enumerate().map(|(j, a)| a * x[(i, j)]).sum()).collect())
        .collect();
    let explained_ratio = explained_variance.iter().map(|v| if total > 0.0 { v / total } else { 0.0 }).collect();
    Ok(Projection { points, rank_deficient: components.len() < dims, components, explained_variance, explained_ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpaceReport {
    pub lemma: String,
    pub representation: Representation,
    pub n: usize,
    pub variance: f64,
    pub std: f64,
    pub k_opt: usize,
    pub silhouette: f64,
    pub separation: f64,
    pub cohesion: f64,
    pub ratio: Option<f64>,
}

/// Variance, silhouette-selected k-means and the dispersion of that
/// clustering for one space.
pub fn analyze_space(
    lemma: &str,
    representation: Representation,
    vectors: &[Vec<f64>],
    seed: u64,
    config: &KSelectConfig,
) -> Result<(SpaceReport, KSelection)> {
    let (variance, std) = space_variance(vectors)?;
    let sel = select_k(vectors, seed, config)?;
    let disp = dispersion(vectors, &sel.assignment)?;
    Ok((
        SpaceReport {
            lemma: lemma.to_string(),
            representation,
            n: vectors.len(),
            variance,
            std,
            k_opt: sel.k,
            silhouette: sel.silhouette,
            separation: disp.separation,
            cohesion: disp.cohesion,
            ratio: disp.ratio,
        },
        sel,
    ))
}

pub const REPORT_HEADER: &str =
    "lemma\trepresentation\tn\tvariance\tstd\tk_opt\tsilhouette\tseparation\tcohesion\tratio";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// Report rows plus a closing `MEAN` row per representation: column means
/// over lemmas, the ratio averaged over lemmas where it is defined.
pub fn report_tsv(reports: &[SpaceReport]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.lemma,
            r.representation,
            r.n,
            r.variance,
            r.std,
            r.k_opt,
            r.silhouette,
            r.separation,
            r.cohesion,
            opt(r.ratio)
        ));
    }
    let reps: BTreeSet<Representation> = reports.iter().map(|r| r.representation).collect();
    for rep in reps {
        let rows: Vec<&SpaceReport> = reports.iter().filter(|r| r.representation == rep).collect();
        let m = |f: &dyn Fn(&SpaceReport) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / rows.len() as f64;
        let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
        let ratio = (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64);
        out.push_str(&format!(
            "MEAN\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            rep,
            m(&|r| r.n as f64),
            m(&|r| r.variance),
            m(&|r| r.std),
            m(&|r| r.k_opt as f64),
            m(&|r| r.silhouette),
            m(&|r| r.separation),
            m(&|r| r.cohesion),
            opt(ratio)
        ));
    }
    out
}

/// Projection TSV: usage_id, x, y, cluster. Missing coordinates print as 0.
pub fn projection_tsv(usage_ids: &[String], projection: &Projection, clusters: &[i64]) -> String {
    let mut out = String::from("usage_id\tx\ty\tcluster\n");
    for (i, id) in usage_ids.iter().enumerate() {
        let p = &projection.points[i];
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            id,
            p.first().copied().unwrap_or(0.0),
            p.get(1).copied().unwrap_or(0.0),
            clusters[i]
        ));
    }
    out
}
