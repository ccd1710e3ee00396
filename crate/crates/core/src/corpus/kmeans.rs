//! Lloyd's k-means with k-means++ seeding, and the two-cluster
//! statement/question labeling rule built on it.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Intonation;
use crate::error::{Error, Result};
use crate::features::ProsodyFeatureVector;

pub const KMEANS_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squares after every centroid update.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    centroids
        .iter()
        .enumerate()
        .map(|(j, c)| (j, sq_dist(p, c)))
        .fold(
            (0, f64::INFINITY),
            |best, cur| if cur.1 < best.1 { cur } else { best },
        )
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    while centroids.len() < k {
        let d2: Vec<f64> = points.iter().map(|p| nearest(p, &centroids).1).collect();
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            return Err(Error::DegenerateClusters(
                "all points coincide with the chosen centroids".into(),
            ));
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = d2.len() - 1;
        for (i, d) in d2.iter().enumerate() {
            if *d > 0.0 && target < *d {
                pick = i;
                break;
            }
            target -= d;
        }
        // guard against rounding landing on a zero-weight tail point
        if d2[pick] <= 0.0 {
            pick = d2.iter().rposition(|d| *d > 0.0).expect("total > 0");
        }
        centroids.push(points[pick].clone());
    }
    Ok(centroids)
}

/// Clusters `points` into `k` groups. The input is visited in a canonical
/// (lexicographic) order so the result does not depend on the order of
/// `points`; assignments are reported in the caller's order.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iters: usize) -> Result<KMeansFit> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if points.len() < k.max(2) {
        return Err(Error::TooFew {
            needed: k.max(2),
            got: points.len(),
        });
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: p.len(),
        });
    }
    if points.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("k-means input".into()));
    }

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| lex_cmp(&points[a], &points[b]));
    let sorted: Vec<Vec<f64>> = order.iter().map(|&i| points[i].clone()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(&sorted, k, &mut rng)?;
    let mut assign: Vec<usize> = sorted.iter().map(|p| nearest(p, &centroids).0).collect();
    let mut trace = Vec::new();
    let mut iterations = 0;

    loop {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in sorted.iter().zip(&assign) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        trace.push(
            sorted
                .iter()
                .zip(&assign)
                .map(|(p, &a)| sq_dist(p, &centroids[a]))
                .sum(),
        );

        let next: Vec<usize> = sorted.iter().map(|p| nearest(p, &centroids).0).collect();
        if next == assign || iterations >= max_iters {
            break;
        }
        assign = next;
    }

    let mut assignments = vec![0; points.len()];
    for (pos, &orig) in order.iter().enumerate() {
        assignments[orig] = assign[pos];
    }
    Ok(KMeansFit {
        centroids,
        assignments,
        objective_trace: trace,
        iterations,
    })
}

/// Splits prosody vectors into two clusters and names the one with the higher
/// mean terminal slope `question`. Features are clustered in their natural
/// units, where the Hz/s slope dominates the geometry.
pub fn kmeans_label(features: &[ProsodyFeatureVector], seed: u64) -> Result<Vec<Intonation>> {
    if features.len() < 2 {
        return Err(Error::TooFew {
            needed: 2,
            got: features.len(),
        });
    }
    let points: Vec<Vec<f64>> = features.iter().map(|f| f.to_vec()).collect();
    let fit = kmeans(&points, 2, seed, KMEANS_MAX_ITERS)?;

    let slope = ProsodyFeatureVector::TERMINAL_SLOPE;
    let (c0, c1) = (&fit.centroids[0], &fit.centroids[1]);
    if c0 == c1 || fit.assignments.iter().all(|&a| a == fit.assignments[0]) {
        return Err(Error::DegenerateClusters("both centroids coincide".into()));
    }
    let question_cluster = match c0[slope].total_cmp(&c1[slope]) {
        Ordering::Greater => 0,
        Ordering::Less => 1,
        Ordering::Equal => {
            return Err(Error::DegenerateClusters(
                "clusters have equal mean terminal slope".into(),
            ))
        }
    };
    Ok(fit
        .assignments
        .iter()
        .map(|&a| {
            if a == question_cluster {
                Intonation::Question
            } else {
                Intonation::Statement
            }
        })
        .collect())
}
