use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FeatureImage;
use crate::{Error, Result};

/// Pixels used to fit the codebook; larger images are subsampled.
pub const KMEANS_SAMPLE_CAP: usize = 100_000;

/// Bin centroids in feature space. Serialized as `{dim, centroids}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub dim: usize,
    pub centroids: Vec<Vec<f64>>,
}

impl Codebook {
    pub fn new(centroids: Vec<Vec<f64>>) -> Result<Self> {
        let dim = centroids.first().map(Vec::len).ok_or_else(|| Error::InvalidParameter("empty codebook".into()))?;
        if dim == 0 || centroids.iter().any(|c| c.len() != dim || c.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidParameter("codebook centroids must share a positive dimension".into()));
        }
        Ok(Self { dim, centroids })
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    /// Nearest centroid, ties to the lowest index.
    pub fn nearest(&self, f: &[f64]) -> usize {
        nearest(&self.centroids, f).0
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[Vec<f64>], f: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, f);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn count_distinct_at_least(points: &[&[f64]], m: usize) -> bool {
    let mut seen = HashSet::new();
    for p in points {
        seen.insert(p.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        if seen.len() >= m {
            return true;
        }
    }
    false
}

/// K-means++ seeding followed by Lloyd iterations until the assignment stops
/// changing or `max_iter` is reached. Deterministic for a given seed.
pub fn kmeans(features: &FeatureImage, m: usize, seed: u64, max_iter: usize) -> Result<Codebook> {
    if m == 0 {
        return Err(Error::InvalidParameter("codebook needs at least one bin".into()));
    }
    let n = features.pixels();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<&[f64]> = (0..n).map(|x| features.feature(x)).collect();
    let mut points: Vec<&[f64]> = if n > KMEANS_SAMPLE_CAP {
        let mut idx = rand::seq::index::sample(&mut rng, n, KMEANS_SAMPLE_CAP).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|x| all[x]).collect()
    } else {
        all.clone()
    };
    if !count_distinct_at_least(&points, m) {
        if points.len() < n && count_distinct_at_least(&all, m) {
            points = all;
        } else {
            return Err(Error::InvalidParameter(format!(
                "requested {m} bins but the image has fewer distinct feature vectors"
            )));
        }
    }

    let mut centroids = seed_plus_plus(&points, m, &mut rng);
    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..max_iter {
        let next: Vec<(usize, f64)> = points.par_iter().map(|p| nearest(&centroids, p)).collect();
        let changed = next.iter().zip(&labels).any(|(a, b)| a.0 != *b);
        for (l, a) in labels.iter_mut().zip(&next) {
            *l = a.0;
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; features.dim]; m];
        let mut counts = vec![0usize; m];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p.iter()) {
                *s += v;
            }
        }
        // Empty clusters take the point farthest from its centroid.
        let mut dist: Vec<f64> = next.iter().map(|a| a.1).collect();
        for k in 0..m {
            if counts[k] == 0 {
                let far = dist
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |b, (i, &d)| if d > b.1 { (i, d) } else { b })
                    .0;
                sums[k] = points[far].to_vec();
                counts[k] = 1;
                dist[far] = 0.0;
                labels[far] = usize::MAX;
            }
        }
        for k in 0..m {
            centroids[k] = sums[k].iter().map(|s| s / counts[k] as f64).collect();
        }
    }
    Codebook::new(centroids)
}

fn seed_plus_plus(points: &[&[f64]], m: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].to_vec()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < m {
        let total: f64 = d2.iter().sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &d) in d2.iter().enumerate() {
            if d <= 0.0 {
                continue;
            }
            acc += d;
            pick = Some(i);
            if acc > target {
                break;
            }
        }
        // A point at distance zero is never picked, so centroids stay distinct.
        let c = points[pick.expect("enough distinct points")].to_vec();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fi(points: &[[f64; 2]]) -> FeatureImage {
        FeatureImage {
            width: points.len(),
            height: 1,
            dim: 2,
            values: points.iter().flat_map(|p| p.iter().copied()).collect(),
        }
    }

    #[test]
    fn separates_two_clouds() {
        let f = fi(&[[0.0, 0.0], [1.0, 0.0], [10.0, 10.0], [11.0, 10.0]]);
        let cb = kmeans(&f, 2, 3, 100).unwrap();
        let mut c = cb.centroids.clone();
        c.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(c, vec![vec![0.5, 0.0], vec![10.5, 10.0]]);
    }

    #[test]
    fn all_distinct_points_become_centroids() {
        let pts = [[0.0, 1.0], [2.0, 3.0], [5.0, -1.0]];
        let cb = kmeans(&fi(&pts), 3, 11, 50).unwrap();
        let mut c = cb.centroids.clone();
        c.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(c, pts.iter().map(|p| p.to_vec()).collect::<Vec<_>>());
    }

    #[test]
    fn deterministic_and_checks_distinct() {
        let pts: Vec<[f64; 2]> = (0..200).map(|i| [(i % 17) as f64, (i % 5) as f64 * 0.3]).collect();
        let f = fi(&pts);
        assert_eq!(kmeans(&f, 6, 9, 100).unwrap(), kmeans(&f, 6, 9, 100).unwrap());
        let dup = fi(&[[1.0, 1.0], [1.0, 1.0], [2.0, 2.0]]);
        assert!(kmeans(&dup, 3, 0, 10).is_err());
        assert!(kmeans(&dup, 2, 0, 10).is_ok());
    }

    #[test]
    fn objective_does_not_increase_with_iterations() {
        let pts: Vec<[f64; 2]> =
            (0..300).map(|i| [((i * 37) % 101) as f64, ((i * 53) % 97) as f64]).collect();
        let f = fi(&pts);
        let objective = |cb: &Codebook| -> f64 {
            pts.iter().map(|p| nearest(&cb.centroids, p).1).sum()
        };
        let mut last = f64::INFINITY;
        for it in 1..8 {
            let o = objective(&kmeans(&f, 5, 4, it).unwrap());
            assert!(o <= last + 1e-9, "iteration {it}: {o} > {last}");
            last = o;
        }
    }
}
