use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once the relative objective decrease falls to or below this.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_iter: 100,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    /// `k×p`
    pub centroids: DenseMatrix,
    /// Nearest centroid for every point (lowest index on ties).
    pub assignments: Vec<usize>,
    /// `Σ‖point − centroid[assignment]‖²` for the returned centroids.
    pub objective: f64,
    /// Objective after each assignment step, in order.
    pub history: Vec<f64>,
}

/// Lloyd's algorithm with k-means++ seeding.
///
/// Every assignment step is recorded in `history`; the sequence is monotone
/// non-increasing. A centroid that loses all its points is moved onto the
/// point currently farthest from its own centroid.
pub fn kmeans(points: &DenseMatrix, k: usize, config: KMeansConfig) -> Result<KMeans> {
    let (m, p) = points.shape();
    if k == 0 || k > m {
        return Err(Error::arg(format!("k = {k} must be in 1..={m}")));
    }
    if config.max_iter == 0 {
        return Err(Error::arg("max_iter must be at least 1"));
    }
    let mut rng = SplitMix64::new(config.seed);
    let mut centroids = plus_plus_init(points, k, &mut rng);
    let mut assignments = vec![0usize; m];
    let mut dists = vec![0.0; m];
    let mut history = Vec::new();

    for iter in 0..config.max_iter {
        let changed = assign(points, &centroids, &mut assignments, &mut dists);
        let objective: f64 = dists.iter().sum();
        let prev = history.last().copied();
        history.push(objective);
        if iter > 0 && !changed {
            break;
        }
        if let Some(prev) = prev {
            if prev - objective <= config.tol * prev.abs() {
                break;
            }
        }
        if objective == 0.0 || iter + 1 == config.max_iter {
            break;
        }
        update(points, &mut centroids, &assignments, &dists, k, p);
    }

    let objective = *history.last().expect("at least one iteration");
    Ok(KMeans {
        centroids,
        assignments,
        objective,
        history,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_init(points: &DenseMatrix, k: usize, rng: &mut SplitMix64) -> DenseMatrix {
    let m = points.rows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.below(m));
    let mut d2: Vec<f64> = (0..m).map(|i| sq_dist(points.row(i), points.row(chosen[0]))).collect();
    while chosen.len() < k {
        let next = rng.weighted_index(&d2).unwrap_or_else(|| {
            // All remaining mass is zero (duplicate points): take the first unused index.
            (0..m).find(|i| !chosen.contains(i)).expect("k <= m")
        });
        chosen.push(next);
        let c = points.row(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), c));
        }
    }
    points.select_rows(&chosen)
}

/// Returns whether any assignment changed.
fn assign(points: &DenseMatrix, centroids: &DenseMatrix, assignments: &mut [usize], dists: &mut [f64]) -> bool {
    let mut changed = false;
    for i in 0..points.rows() {
        let x = points.row(i);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..centroids.rows() {
            let d = sq_dist(x, centroids.row(c));
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        changed |= assignments[i] != best;
        assignments[i] = best;
        dists[i] = best_d;
    }
    changed
}

fn update(points: &DenseMatrix, centroids: &mut DenseMatrix, assignments: &[usize], dists: &[f64], k: usize, p: usize) {
    let mut sums = DenseMatrix::zeros(k, p);
    let mut counts = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        counts[a] += 1;
        for (s, x) in sums.row_mut(a).iter_mut().zip(points.row(i)) {
            *s += x;
        }
    }
    let mut taken = vec![false; points.rows()];
    for c in 0..k {
        if counts[c] > 0 {
            let n = counts[c] as f64;
            for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                *dst = s / n;
            }
        } else {
            // Empty cluster: reseed at the farthest not-yet-used point.
            let far = (0..points.rows())
                .filter(|&i| !taken[i])
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if dists[b] >= dists[i] => Some(b),
                    _ => Some(i),
                })
                .expect("k <= m");
            taken[far] = true;
            centroids.row_mut(c).copy_from_slice(points.row(far));
        }
    }
}
