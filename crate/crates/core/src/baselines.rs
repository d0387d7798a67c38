//! Comparison predictors: random labels, k-means clustering of the power
//! surface, k-nearest neighbours and RBF label propagation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::exec::Execution;
pub use crate::features::Standardizer;
use crate::features::{base_features, pca_fit, DatasetRow, FeatureSchema, PcaModel};

/// Uniform random binary labels.
pub fn p_rand<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<u8> {
    (0..n).map(|_| u8::from(rng.random::<bool>())).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn check_matrix(points: &[Vec<f64>]) -> Result<usize> {
    let d = points.first().map(Vec::len).ok_or_else(|| invalid("no points"))?;
    if points.iter().any(|p| p.len() != d) {
        return Err(invalid("ragged point rows"));
    }
    if points.iter().flatten().any(|x| !x.is_finite()) {
        return Err(invalid("non-finite coordinate"));
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub centroids: Vec<Vec<f64>>,
    pub feature_axes: Vec<String>,
    pub inertia: f64,
    pub assignments: Vec<usize>,
    pub iterations: usize,
    /// Inertia after every assignment step of the winning restart.
    pub inertia_trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub max_iter: usize,
    pub restarts: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig { max_iter: 300, restarts: 10 }
    }
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut inertia = 0.0;
    let labels = points
        .iter()
        .map(|p| {
            let (best, d) = centroids
                .iter()
                .map(|c| sq_dist(p, c))
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, d)| if d < acc.1 { (i, d) } else { acc });
            inertia += d;
            best
        })
        .collect();
    (labels, inertia)
}

fn plus_plus<R: Rng + ?Sized>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = d2.iter().rposition(|d| *d > 0.0).unwrap_or(0);
            for (i, d) in d2.iter().enumerate() {
                if *d > 0.0 && u < *d {
                    chosen = i;
                    break;
                }
                u -= d;
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[pick].clone();
        for (slot, p) in d2.iter_mut().zip(points) {
            *slot = slot.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> ClusterModel {
    let (k, d) = (centroids.len(), points[0].len());
    let (mut labels, inertia) = assign(points, &centroids);
    let mut trace = vec![inertia];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut next: Vec<Vec<f64>> = Vec::with_capacity(k);
        for c in 0..k {
            if counts[c] > 0 {
                next.push(sums[c].iter().map(|s| s / counts[c] as f64).collect());
            } else {
                // empty cluster: restart it at the point worst served so far
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        sq_dist(&points[a], &centroids[labels[a]]).total_cmp(&sq_dist(&points[b], &centroids[labels[b]]))
                    })
                    .expect("nonempty");
                next.push(points[far].clone());
            }
        }
        centroids = next;
        let (new_labels, inertia) = assign(points, &centroids);
        trace.push(inertia);
        if new_labels == labels {
            break;
        }
        labels = new_labels;
    }
    let (labels, inertia) = assign(points, &centroids);
    ClusterModel { centroids, feature_axes: Vec::new(), inertia, assignments: labels, iterations, inertia_trace: trace }
}

/// k-means++ seeding followed by Lloyd iterations; best of several restarts.
pub fn kmeans_with<R: Rng + ?Sized>(
    points: &[Vec<f64>],
    k_clusters: usize,
    config: KMeansConfig,
    rng: &mut R,
) -> Result<ClusterModel> {
    check_matrix(points)?;
    if k_clusters == 0 || k_clusters > points.len() {
        return Err(invalid(format!("need 1 <= k_clusters <= rows, got k={k_clusters}, rows={}", points.len())));
    }
    if config.restarts == 0 {
        return Err(invalid("restarts must be positive"));
    }
    let mut best: Option<ClusterModel> = None;
    for _ in 0..config.restarts {
        let model = lloyd(points, plus_plus(points, k_clusters, rng), config.max_iter);
        if best.as_ref().is_none_or(|b| model.inertia < b.inertia) {
            best = Some(model);
        }
    }
    Ok(best.expect("at least one restart"))
}

pub fn kmeans<R: Rng + ?Sized>(points: &[Vec<f64>], k_clusters: usize, rng: &mut R) -> Result<ClusterModel> {
    kmeans_with(points, k_clusters, KMeansConfig::default(), rng)
}

/// Which coordinates the power clustering runs on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterAxes {
    /// First principal component and the scaled weight, both z-scored.
    #[default]
    Pc1ScaledWeight,
    /// Every retained principal component.
    AllPcs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerClustering {
    pub model: ClusterModel,
    pub pca: PcaModel,
    pub axes: ClusterAxes,
}

/// Cluster the parameter points without looking at their power.
pub fn power_cluster<R: Rng + ?Sized>(
    rows: &[DatasetRow],
    variance_target: f64,
    k_clusters: usize,
    axes: ClusterAxes,
    rng: &mut R,
) -> Result<PowerClustering> {
    let first = rows.first().ok_or_else(|| invalid("empty dataset"))?;
    let k = first.point.beta.len();
    let base: Vec<Vec<f64>> = rows.iter().map(|r| base_features(&r.point)).collect();
    let pca = pca_fit(&base, variance_target)?;
    let schema = FeatureSchema::new(k, pca.n_components());
    let pcs = pca.transform(&base)?;
    let (points, names) = match axes {
        ClusterAxes::Pc1ScaledWeight => {
            let raw: Vec<Vec<f64>> = base.iter().zip(&pcs).map(|(b, p)| vec![p[0], b[schema.scaled_weight_index()]]).collect();
            (Standardizer::fit(&raw)?.transform(&raw), vec!["pc_1".to_string(), "scaled_weight".to_string()])
        }
        ClusterAxes::AllPcs => (pcs, (1..=pca.n_components()).map(|i| format!("pc_{i}")).collect()),
    };
    let mut model = kmeans(&points, k_clusters, rng)?;
    model.feature_axes = names;
    Ok(PowerClustering { model, pca, axes })
}

/// Majority true label per cluster (ties and empty clusters map to 0).
pub fn cluster_class_map(assignments: &[usize], truth: &[u8], k_clusters: usize) -> Result<Vec<u8>> {
    if assignments.len() != truth.len() {
        return Err(invalid("assignment/label length mismatch"));
    }
    let mut votes = vec![(0usize, 0usize); k_clusters];
    for (&c, &t) in assignments.iter().zip(truth) {
        let v = votes.get_mut(c).ok_or_else(|| invalid("cluster index out of range"))?;
        if t != 0 {
            v.1 += 1;
        } else {
            v.0 += 1;
        }
    }
    Ok(votes.iter().map(|(neg, pos)| u8::from(pos > neg)).collect())
}

/// Majority vote among the nearest training rows (Euclidean). A tied vote
/// drops the farthest neighbour and votes again; an exhausted tie gives 0.
pub fn kneighbors_classify(
    train_x: &[Vec<f64>],
    train_y: &[u8],
    test_x: &[Vec<f64>],
    n_neighbors: usize,
) -> Result<Vec<u8>> {
    let d = check_matrix(train_x).map_err(|_| invalid("empty or malformed training set"))?;
    if train_x.len() != train_y.len() {
        return Err(invalid("training rows and labels differ in length"));
    }
    if n_neighbors == 0 || n_neighbors > train_x.len() {
        return Err(invalid(format!("n_neighbors must be in 1..={}", train_x.len())));
    }
    if test_x.iter().any(|r| r.len() != d) {
        return Err(invalid("test feature width differs from training"));
    }
    Ok(Execution::default().map(test_x.len(), |t| {
        let q = &test_x[t];
        let mut order: Vec<(f64, usize)> = train_x.iter().enumerate().map(|(i, x)| (sq_dist(q, x), i)).collect();
        order.select_nth_unstable_by(n_neighbors - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut near: Vec<(f64, usize)> = order[..n_neighbors].to_vec();
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut m = near.len();
        while m > 0 {
            let pos = near[..m].iter().filter(|(_, i)| train_y[*i] != 0).count();
            let neg = m - pos;
            if pos != neg {
                return u8::from(pos > neg);
            }
            m -= 1;
        }
        0
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    pub gamma: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig { gamma: 20.0, max_iter: 1000, tol: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationModel {
    pub kernel_gamma: f64,
    pub labeled: Vec<usize>,
    /// Per-row class distribution.
    pub distributions: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub iterations: usize,
    pub converged: bool,
}

/// Transductive label propagation over a dense RBF graph.
///
/// `labels[i]` is `Some(class)` for labeled rows. Labeled rows are clamped
/// to their one-hot distribution after every step.
pub fn label_propagation(x: &[Vec<f64>], labels: &[Option<u8>], config: PropagationConfig) -> Result<PropagationModel> {
    check_matrix(x)?;
    if x.len() != labels.len() {
        return Err(invalid("feature rows and labels differ in length"));
    }
    if !(config.gamma > 0.0) || !(config.tol > 0.0) {
        return Err(invalid("gamma and tol must be positive"));
    }
    let labeled: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_some()).collect();
    if labeled.is_empty() {
        return Err(invalid("label propagation needs at least one labeled row"));
    }
    let classes = labels.iter().flatten().map(|c| *c as usize).max().unwrap_or(0).max(1) + 1;
    let n = x.len();
    let exec = Execution::default();
    let transition: Vec<Vec<f64>> = exec.map(n, |i| {
        let mut row: Vec<f64> = x.iter().map(|xj| (-config.gamma * sq_dist(&x[i], xj)).exp()).collect();
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|w| *w /= s);
        row
    });
    let one_hot = |c: u8| {
        let mut v = vec![0.0; classes];
        v[c as usize] = 1.0;
        v
    };
    let mut y: Vec<Vec<f64>> = labels.iter().map(|l| l.map_or_else(|| vec![0.0; classes], one_hot)).collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iter {
        iterations += 1;
        let next: Vec<Vec<f64>> = exec.map(n, |i| match labels[i] {
            Some(c) => one_hot(c),
            None => {
                let mut acc = vec![0.0; classes];
                for (w, yj) in transition[i].iter().zip(&y) {
                    if *w != 0.0 {
                        for (a, v) in acc.iter_mut().zip(yj) {
                            *a += w * v;
                        }
                    }
                }
                acc
            }
        });
        let change = next.iter().zip(&y).flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q).abs())).fold(0.0, f64::max);
        y = next;
        if change < config.tol {
            converged = true;
            break;
        }
    }
    let distributions: Vec<Vec<f64>> = y
        .into_iter()
        .map(|row| {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter().map(|v| v / s).collect()
            } else {
                vec![1.0 / classes as f64; classes]
            }
        })
        .collect();
    let out: Vec<u8> = distributions
        .iter()
        .map(|d| d.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (c, v)| if *v > acc.1 { (c, *v) } else { acc }).0 as u8)
        .collect();
    Ok(PropagationModel { kernel_gamma: config.gamma, labeled, distributions, labels: out, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn p_rand_reproducible() {
        let a = p_rand(50, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, p_rand(50, &mut ChaCha8Rng::seed_from_u64(1)));
        assert!(p_rand(0, &mut ChaCha8Rng::seed_from_u64(1)).is_empty());
    }

    #[test]
    fn kmeans_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts = vec![vec![1.0, 2.0], vec![3.0, -1.0], vec![0.5, 0.5]];
        assert_eq!(kmeans(&pts, 3, &mut rng).unwrap().inertia, 0.0);
        let one = kmeans(&pts[..1], 1, &mut rng).unwrap();
        assert_eq!(one.centroids, vec![vec![1.0, 2.0]]);
        assert!(kmeans(&pts, 4, &mut rng).is_err());
        assert!(kmeans(&pts, 0, &mut rng).is_err());
    }

    #[test]
    fn duplicate_points_still_fill_every_cluster() {
        let pts = vec![vec![0.0]; 5];
        let m = kmeans(&pts, 3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(m.inertia, 0.0);
        assert_eq!(m.centroids.len(), 3);
    }

    #[test]
    fn class_map_majority() {
        assert_eq!(cluster_class_map(&[0, 0, 1, 1, 1], &[1, 1, 0, 0, 1], 3).unwrap(), vec![1, 0, 0]);
    }

    #[test]
    fn knn_trivial_cases() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0], vec![4.0], vec![5.0], vec![6.0], vec![7.0], vec![8.0], vec![9.0]];
        let y = vec![1, 1, 1, 0, 0, 0, 0, 0, 0, 0];
        assert_eq!(kneighbors_classify(&x, &y, &[vec![1.0]], 1).unwrap(), vec![1]);
        assert_eq!(kneighbors_classify(&x, &y, &[vec![0.0], vec![9.0]], 10).unwrap(), vec![0, 0]);
        // 2 neighbours split 1-1: the nearer one decides
        assert_eq!(kneighbors_classify(&x, &y, &[vec![2.4]], 2).unwrap(), vec![1]);
        assert!(kneighbors_classify(&[], &[], &[vec![0.0]], 1).is_err());
        assert!(kneighbors_classify(&x, &y, &[vec![0.0]], 11).is_err());
    }

    #[test]
    fn propagation_all_labeled_is_identity() {
        let x = vec![vec![0.0], vec![0.1], vec![5.0]];
        let l = vec![Some(1), Some(0), Some(1)];
        let m = label_propagation(&x, &l, PropagationConfig::default()).unwrap();
        assert_eq!(m.labels, vec![1, 0, 1]);
        assert!(label_propagation(&x, &[None, None, None], PropagationConfig::default()).is_err());
    }
}
