//! Similarity graph over small cells and spectral clustering.
//!
//! Two small cells are linked when they lie within `epsilon_d` of each other.
//! Linked pairs get a Gaussian distance similarity and a load similarity,
//! combined geometrically with weight `theta`; unlinked pairs always have zero
//! similarity. The partition comes from k-means on the eigenvectors of the
//! smallest Laplacian eigenvalues, with `k` chosen at the largest eigengap.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coordination::elect_head;
use crate::eigen::{symmetric_eigen, SymmetricEigen};
use crate::error::{invalid, Error, Result};
use crate::netmodel::{BsId, Orthogonality, Position};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadSign {
    /// `exp(-d^2 / 2 sigma^2)`: equal loads are most similar.
    #[default]
    Gaussian,
    /// `exp(+d^2 / 2 sigma^2)`, grows with the load difference.
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianKind {
    /// `L = D - S`.
    #[default]
    Standard,
    /// `l_bb' = sum_k (s_bk - s_bb') = d_b - n s_bb'`, symmetrised.
    Scaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimilarityConfig {
    pub epsilon_d: f64,
    pub sigma_d: f64,
    pub sigma_l: f64,
    pub theta: f64,
    pub load_sign: LoadSign,
    pub laplacian: LaplacianKind,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        Self {
            epsilon_d: 250.0,
            sigma_d: 300.0,
            sigma_l: 1.0,
            theta: 0.5,
            load_sign: LoadSign::Gaussian,
            laplacian: LaplacianKind::Standard,
        }
    }
}

impl SimilarityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(invalid(format!("theta must be in [0, 1], got {}", self.theta)));
        }
        if !(self.sigma_d > 0.0 && self.sigma_l > 0.0) {
            return Err(invalid("sigma_d and sigma_l must be positive"));
        }
        if !(self.epsilon_d > 0.0) {
            return Err(invalid("epsilon_d must be positive"));
        }
        Ok(())
    }
}

/// `e_bb' = 1` iff `b != b'` and the two sites are at most `epsilon_d` apart.
pub fn build_adjacency(positions: &[Position], epsilon_d: f64) -> DMatrix<f64> {
    let n = positions.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i != j && positions[i].distance(&positions[j]) <= epsilon_d {
            1.0
        } else {
            0.0
        }
    })
}

pub fn distance_similarity(
    positions: &[Position],
    adjacency: &DMatrix<f64>,
    sigma_d: f64,
) -> DMatrix<f64> {
    let n = positions.len();
    DMatrix::from_fn(n, n, |i, j| {
        if adjacency[(i, j)] == 0.0 {
            return 0.0;
        }
        let d = positions[i].distance(&positions[j]);
        (-d * d / (2.0 * sigma_d * sigma_d)).exp()
    })
}

pub fn load_similarity(loads: &[f64], sigma_l: f64, sign: LoadSign) -> DMatrix<f64> {
    let n = loads.len();
    let sign = match sign {
        LoadSign::Gaussian => -1.0,
        LoadSign::PaperLiteral => 1.0,
    };
    DMatrix::from_fn(n, n, |i, j| {
        let d = loads[i] - loads[j];
        (sign * d * d / (2.0 * sigma_l * sigma_l)).exp()
    })
}

/// `s = (s^d)^theta * (s^l)^(1 - theta)` on linked pairs, exactly zero elsewhere.
pub fn joint_similarity(
    s_dist: &DMatrix<f64>,
    s_load: &DMatrix<f64>,
    adjacency: &DMatrix<f64>,
    theta: f64,
) -> DMatrix<f64> {
    DMatrix::from_fn(s_dist.nrows(), s_dist.ncols(), |i, j| {
        if adjacency[(i, j)] == 0.0 {
            0.0
        } else if theta == 1.0 {
            s_dist[(i, j)]
        } else if theta == 0.0 {
            s_load[(i, j)]
        } else {
            s_dist[(i, j)].powf(theta) * s_load[(i, j)].powf(1.0 - theta)
        }
    })
}

pub fn laplacian(s: &DMatrix<f64>, kind: LaplacianKind) -> DMatrix<f64> {
    let n = s.nrows();
    let degree: Vec<f64> = (0..n).map(|i| s.row(i).sum()).collect();
    match kind {
        LaplacianKind::Standard => DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                degree[i] - s[(i, i)]
            } else {
                -s[(i, j)]
            }
        }),
        LaplacianKind::Scaled => {
            let raw = DMatrix::from_fn(n, n, |i, j| degree[i] - n as f64 * s[(i, j)]);
            (&raw + raw.transpose()) * 0.5
        }
    }
}

/// Eigengap heuristic: the 1-based `i` maximising `|l_{i+1} - l_i|` over the
/// ascending spectrum. Ties go to the smaller `i`; fewer than two eigenvalues
/// give `k = n`.
pub fn select_k(eigenvalues: &[f64]) -> usize {
    if eigenvalues.len() < 2 {
        return eigenvalues.len();
    }
    let mut best = 1;
    let mut best_gap = f64::NEG_INFINITY;
    for (i, w) in eigenvalues.windows(2).enumerate() {
        let gap = (w[1] - w[0]).abs();
        if gap > best_gap {
            best_gap = gap;
            best = i + 1;
        }
    }
    best
}

/// Number of numerically zero eigenvalues; for `D - S` this is the number of
/// connected components of the graph.
pub fn zero_eigenvalues(eigenvalues: &[f64]) -> usize {
    let scale = eigenvalues.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    eigenvalues.iter().filter(|v| v.abs() <= 1e-9 * scale).count()
}

/// Every intermediate matrix of one clustering round, for inspection and dumps.
#[derive(Debug, Clone)]
pub struct SimilarityGraph {
    pub ids: Vec<BsId>,
    pub adjacency: DMatrix<f64>,
    pub s_dist: DMatrix<f64>,
    pub s_load: DMatrix<f64>,
    pub s_joint: DMatrix<f64>,
    pub laplacian: DMatrix<f64>,
    pub eigen: SymmetricEigen,
}

impl SimilarityGraph {
    /// `ids`, `positions` and `loads` are parallel slices over the small cells.
    pub fn build(
        ids: &[BsId],
        positions: &[Position],
        loads: &[f64],
        cfg: &SimilarityConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if ids.len() != positions.len() || ids.len() != loads.len() {
            return Err(invalid("ids, positions and loads must have equal length"));
        }
        let adjacency = build_adjacency(positions, cfg.epsilon_d);
        let s_dist = distance_similarity(positions, &adjacency, cfg.sigma_d);
        let s_load = load_similarity(loads, cfg.sigma_l, cfg.load_sign);
        let s_joint = joint_similarity(&s_dist, &s_load, &adjacency, cfg.theta);
        let laplacian = laplacian(&s_joint, cfg.laplacian);
        let eigen = symmetric_eigen(&laplacian)?;
        Ok(Self {
            ids: ids.to_vec(),
            adjacency,
            s_dist,
            s_load,
            s_joint,
            laplacian,
            eigen,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen.values
    }
}

/// Disjoint, non-empty clusters of base stations, each with a head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterPartition {
    pub clusters: Vec<Vec<BsId>>,
    pub heads: Vec<BsId>,
    pub epoch: u64,
}

impl ClusterPartition {
    /// Sorts each cluster, orders clusters by their smallest member and elects
    /// heads from `loads` (indexed by [`BsId`]).
    pub fn new(mut clusters: Vec<Vec<BsId>>, loads: &[f64], epoch: u64) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for c in &mut clusters {
            if c.is_empty() {
                return Err(Error::EmptyCluster);
            }
            c.sort_unstable();
            for &b in c.iter() {
                if !seen.insert(b) {
                    return Err(invalid(format!("base station {b} is in two clusters")));
                }
            }
        }
        clusters.sort_by_key(|c| c[0]);
        let heads = clusters
            .iter()
            .map(|c| elect_head(c, loads))
            .collect::<Result<_>>()?;
        Ok(Self {
            clusters,
            heads,
            epoch,
        })
    }

    pub fn singletons(ids: &[BsId], loads: &[f64], epoch: u64) -> Result<Self> {
        Self::new(ids.iter().map(|&b| vec![b]).collect(), loads, epoch)
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn mean_size(&self) -> f64 {
        if self.clusters.is_empty() {
            return 0.0;
        }
        self.clusters.iter().map(Vec::len).sum::<usize>() as f64 / self.clusters.len() as f64
    }

    /// True when the clusters exactly cover `ids` with no overlap.
    pub fn covers_exactly(&self, ids: &[BsId]) -> bool {
        let mut members: Vec<BsId> = self.clusters.iter().flatten().copied().collect();
        members.sort_unstable();
        let mut expected = ids.to_vec();
        expected.sort_unstable();
        members == expected
    }

    pub fn orthogonality(&self, n_stations: usize) -> Orthogonality {
        Orthogonality::from_groups(n_stations, &self.clusters)
    }

    pub fn cluster_index_of(&self, bs: BsId) -> Option<usize> {
        self.clusters.iter().position(|c| c.contains(&bs))
    }
}

/// Output of [`spectral_cluster`] over local indices `0..n`.
#[derive(Debug, Clone)]
pub struct SpectralClustering {
    pub k: usize,
    pub labels: Vec<usize>,
    pub eigen: SymmetricEigen,
}

impl SpectralClustering {
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            groups[l].push(i);
        }
        groups.retain(|g| !g.is_empty());
        groups
    }
}

/// Spectral clustering of a similarity matrix. `k = None` selects the cluster
/// count by eigengap; a `k` above the node count is clamped.
pub fn spectral_cluster<R: Rng + ?Sized>(
    s: &DMatrix<f64>,
    k: Option<usize>,
    kind: LaplacianKind,
    rng: &mut R,
) -> Result<SpectralClustering> {
    let eigen = symmetric_eigen(&laplacian(s, kind))?;
    Ok(cluster_from_eigen(eigen, k, kind, rng))
}

fn cluster_from_eigen<R: Rng + ?Sized>(
    eigen: SymmetricEigen,
    k: Option<usize>,
    kind: LaplacianKind,
    rng: &mut R,
) -> SpectralClustering {
    let n = eigen.values.len();
    if n == 0 {
        return SpectralClustering {
            k: 0,
            labels: Vec::new(),
            eigen,
        };
    }
    let k = k
        .unwrap_or_else(|| match kind {
            // Disconnected parts of the graph are never merged.
            LaplacianKind::Standard => select_k(&eigen.values).max(zero_eigenvalues(&eigen.values)),
            LaplacianKind::Scaled => select_k(&eigen.values),
        })
        .clamp(1, n);
    let embedding = eigen.vectors.columns(0, k).clone_owned();
    let labels = kmeans_best_of(&embedding, k, rng, KMEANS_MAX_ITER, KMEANS_RESTARTS);
    SpectralClustering { k, labels, eigen }
}

/// Builds the similarity graph for the given small cells and partitions them.
pub fn cluster_small_cells<R: Rng + ?Sized>(
    ids: &[BsId],
    positions: &[Position],
    loads_hat: &[f64],
    head_loads: &[f64],
    cfg: &SimilarityConfig,
    epoch: u64,
    rng: &mut R,
) -> Result<(ClusterPartition, SimilarityGraph)> {
    let graph = SimilarityGraph::build(ids, positions, loads_hat, cfg)?;
    let sc = cluster_from_eigen(graph.eigen.clone(), None, cfg.laplacian, rng);
    let clusters = sc
        .groups()
        .into_iter()
        .map(|g| g.into_iter().map(|i| ids[i]).collect())
        .collect();
    let partition = ClusterPartition::new(clusters, head_loads, epoch)?;
    Ok((partition, graph))
}

pub const KMEANS_MAX_ITER: usize = 100;
pub const KMEANS_RESTARTS: usize = 10;

/// Within-cluster sum of squared distances to the cluster means.
pub fn inertia(points: &DMatrix<f64>, labels: &[usize]) -> f64 {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let dim = points.ncols();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(points.row(i).iter()) {
            *s += x;
        }
    }
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            points
                .row(i)
                .iter()
                .zip(&sums[l])
                .map(|(x, s)| (x - s / counts[l] as f64).powi(2))
                .sum::<f64>()
        })
        .sum()
}

/// Best of `restarts` independent [`kmeans`] runs by [`inertia`]; the earliest
/// run wins ties.
pub fn kmeans_best_of<R: Rng + ?Sized>(
    points: &DMatrix<f64>,
    k: usize,
    rng: &mut R,
    max_iter: usize,
    restarts: usize,
) -> Vec<usize> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..restarts.max(1) {
        let labels = kmeans(points, k, rng, max_iter);
        let score = inertia(points, &labels);
        if best.as_ref().is_none_or(|(b, _)| score < *b - 1e-12) {
            best = Some((score, labels));
        }
    }
    best.map(|(_, l)| l).unwrap_or_default()
}

/// Lloyd's k-means on the rows of `points` with k-means++ seeding.
///
/// Returns labels renumbered so cluster ids appear in order of first
/// occurrence. An emptied cluster steals the point of the largest cluster
/// farthest from that cluster's centre.
pub fn kmeans<R: Rng + ?Sized>(
    points: &DMatrix<f64>,
    k: usize,
    rng: &mut R,
    max_iter: usize,
) -> Vec<usize> {
    let n = points.nrows();
    if n == 0 || k == 0 {
        return vec![0; n];
    }
    let k = k.min(n);
    let dim = points.ncols();
    let row = |i: usize| points.row(i);
    let dist2 = |i: usize, c: &[f64]| -> f64 {
        row(i).iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum()
    };

    // k-means++ seeding.
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    centers.push(row(first).iter().copied().collect());
    while centers.len() < k {
        let d: Vec<f64> = (0..n)
            .map(|i| centers.iter().map(|c| dist2(i, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &di) in d.iter().enumerate() {
                if di > 0.0 && target < di {
                    pick = i;
                    break;
                }
                target -= di;
            }
            if d[pick] == 0.0 {
                pick = d.iter().rposition(|&x| x > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            chosen.iter().position(|c| !c).unwrap_or(0)
        };
        chosen[pick] = true;
        centers.push(row(pick).iter().copied().collect());
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for i in 0..n {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = dist2(i, center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }

        // Repair empty clusters.
        loop {
            let mut sizes = vec![0usize; k];
            for &l in &labels {
                sizes[l] += 1;
            }
            let Some(empty) = sizes.iter().position(|&s| s == 0) else {
                break;
            };
            let largest = (0..k).max_by_key(|&c| (sizes[c], std::cmp::Reverse(c))).unwrap();
            let far = (0..n)
                .filter(|&i| labels[i] == largest)
                .max_by(|&a, &b| {
                    dist2(a, &centers[largest])
                        .total_cmp(&dist2(b, &centers[largest]))
                        .then(b.cmp(&a))
                })
                .unwrap();
            labels[far] = empty;
            centers[empty] = row(far).iter().copied().collect();
            changed = true;
        }

        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
            let mut mean = vec![0.0; dim];
            for &i in &members {
                for (m, x) in mean.iter_mut().zip(row(i).iter()) {
                    *m += x;
                }
            }
            for m in &mut mean {
                *m /= members.len() as f64;
            }
            *center = mean;
        }

        if !changed {
            break;
        }
    }

    // Renumber by first occurrence.
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for l in &mut labels {
        if map[*l] == usize::MAX {
            map[*l] = next;
            next += 1;
        }
        *l = map[*l];
    }
    labels
}
