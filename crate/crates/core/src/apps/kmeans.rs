//! Seeded k-means over 16-dimensional points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub type Block = [f32; 16];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KmeansError {
    #[error("cannot pick {k} centroids from {points} points")]
    TooFewPoints { k: usize, points: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub centroids: Vec<Block>,
    /// Within-cluster squared error after each assignment step.
    pub history: Vec<f64>,
    pub iterations: usize,
}

impl Codebook {
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.centroids.iter().flatten().flat_map(|v| v.to_le_bytes()).collect()
    }
}

pub fn dist2(a: &Block, b: &Block) -> f64 {
    a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum()
}

/// Index of the nearest centroid; ties go to the lowest index.
pub fn nearest(p: &Block, centroids: &[Block]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = dist2(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// k-means++ seeding then Lloyd iterations until assignments stop changing
/// or `max_iter` is reached. A cluster left empty is re-seeded with the
/// point farthest from its centroid.
pub fn kmeans(points: &[Block], k: usize, seed: u64, max_iter: usize) -> Result<Codebook, KmeansError> {
    if k > points.len() || k == 0 && !points.is_empty() {
        return Err(KmeansError::TooFewPoints { k, points: points.len() });
    }
    if k == 0 {
        return Ok(Codebook { centroids: Vec::new(), history: Vec::new(), iterations: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Block> = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())]);
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random_range(0.0..total);
            let mut chosen = d2.iter().rposition(|&d| d > 0.0).expect("positive total");
            for (i, &d) in d2.iter().enumerate() {
                if r < d {
                    chosen = i;
                    break;
                }
                r -= d;
            }
            chosen
        } else {
            // every point coincides with a centroid already
            rng.random_range(0..points.len())
        };
        centroids.push(points[pick]);
        let c = centroids.last().expect("just pushed");
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, c));
        }
    }

    let mut assign: Vec<usize> = vec![usize::MAX; points.len()];
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let mut changed = false;
        let mut dist = vec![0.0f64; points.len()];
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centroids);
            dist[i] = d;
            if assign[i] != c {
                assign[i] = c;
                changed = true;
            }
        }
        history.push(dist.iter().sum());
        if !changed || iterations == max_iter {
            break;
        }
        iterations += 1;

        let mut sums = vec![[0.0f64; 16]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += *v as f64;
            }
        }
        let mut taken = vec![false; points.len()];
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = std::array::from_fn(|j| (sums[c][j] / counts[c] as f64) as f32);
            } else {
                let far = (0..points.len())
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                    .expect("k <= number of points");
                taken[far] = true;
                dist[far] = 0.0;
                centroids[c] = points[far];
            }
        }
    }
    Ok(Codebook { centroids, history, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(rng: &mut ChaCha8Rng, centre: f32, n: usize) -> Vec<Block> {
        (0..n).map(|_| std::array::from_fn(|_| centre + rng.random_range(-0.5..0.5))).collect()
    }

    #[test]
    fn separated_clouds_find_their_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = cloud(&mut rng, -10.0, 40);
        let b = cloud(&mut rng, 10.0, 60);
        let pts: Vec<Block> = a.iter().chain(&b).copied().collect();
        let mean = |s: &[Block]| -> [f64; 16] { std::array::from_fn(|j| s.iter().map(|p| p[j] as f64).sum::<f64>() / s.len() as f64) };
        let (ma, mb) = (mean(&a), mean(&b));
        let cb = kmeans(&pts, 2, 3, 20).unwrap();
        for c in &cb.centroids {
            let m = if c[0] < 0.0 { &ma } else { &mb };
            for j in 0..16 {
                assert!((c[j] as f64 - m[j]).abs() < 1e-6, "{} vs {}", c[j], m[j]);
            }
        }
    }

    #[test]
    fn distinct_points_as_centroids_give_zero_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let distinct = cloud(&mut rng, 0.0, 12);
        let pts: Vec<Block> = distinct.iter().cycle().take(36).copied().collect();
        let cb = kmeans(&pts, 12, 9, 20).unwrap();
        assert_eq!(*cb.history.last().unwrap(), 0.0);
    }

    #[test]
    fn error_never_increases_and_runs_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Block> = (0..300).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect();
        let a = kmeans(&pts, 16, 1, 20).unwrap();
        for w in a.history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "{:?}", a.history);
        }
        let b = kmeans(&pts, 16, 1, 20).unwrap();
        assert_eq!(a.to_le_bytes(), b.to_le_bytes());
        assert_ne!(a.to_le_bytes(), kmeans(&pts, 16, 2, 20).unwrap().to_le_bytes());
    }

    #[test]
    fn too_few_points() {
        assert_eq!(kmeans(&[[0.0; 16]], 2, 0, 20), Err(KmeansError::TooFewPoints { k: 2, points: 1 }));
        let same = vec![[1.0f32; 16]; 5];
        let cb = kmeans(&same, 3, 0, 20).unwrap();
        assert_eq!(cb.centroids.len(), 3);
        assert_eq!(*cb.history.last().unwrap(), 0.0);
    }
}
