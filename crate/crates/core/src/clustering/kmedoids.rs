//! Lloyd-style k-medoids.
//!
//! Each iteration assigns every point to its nearest medoid, then moves each
//! medoid to the member with the smallest summed (weighted) distance to its
//! cluster. Ties go to the lowest cluster index and the lowest member index;
//! a medoid always belongs to its own cluster, so no cluster is ever empty.

use std::collections::HashMap;

use rand::seq::index::sample;
use rayon::prelude::*;

use super::distance::{euclidean, DistanceSpec};
use super::Partition;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITER: usize = 100;

/// Partition plus the convergence record.
#[derive(Debug, Clone, PartialEq)]
pub struct KMedoidsRun {
    pub partition: Partition,
    /// Total within-cluster cost after every assignment step.
    pub cost_trace: Vec<f64>,
    pub converged: bool,
}

impl KMedoidsRun {
    pub fn cost(&self) -> f64 {
        self.cost_trace.last().copied().unwrap_or(0.0)
    }
}

/// `k` distinct indices drawn uniformly, sorted ascending.
pub fn initial_medoids(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = crate::seed::rng(seed, &[0x6b6d]);
    let mut idx = sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

pub fn k_medoids(points: &[Vec<f64>], k: usize, spec: &DistanceSpec, seed: u64, max_iter: usize) -> Result<Partition> {
    Ok(k_medoids_run(points, k, spec, seed, max_iter)?.partition)
}

pub fn k_medoids_run(points: &[Vec<f64>], k: usize, spec: &DistanceSpec, seed: u64, max_iter: usize) -> Result<KMedoidsRun> {
    validate(points, k, spec)?;
    if let DistanceSpec::BinnedEuclidean(grid) = spec {
        // collapse points that share a bin cell, keeping first-seen order
        let mut cells: HashMap<Vec<u32>, usize> = HashMap::new();
        let mut reps: Vec<Vec<f64>> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        let mut first: Vec<usize> = Vec::new();
        let mut rep_of = Vec::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            let cell = grid.cell(p);
            let r = *cells.entry(cell).or_insert_with(|| {
                reps.push(grid.represent(p));
                weights.push(0.0);
                first.push(i);
                reps.len() - 1
            });
            weights[r] += 1.0;
            rep_of.push(r);
        }
        if reps.len() >= k {
            let init = initial_medoids(reps.len(), k, seed);
            let rep_run = lloyd(reps.len(), Some(&weights), init, |a, b| euclidean(&reps[a], &reps[b]), max_iter);
            let assignment = rep_of.iter().map(|&r| rep_run.partition.assignment()[r]).collect();
            let medoids = rep_run.partition.medoids().unwrap().iter().map(|&m| first[m]).collect();
            return Ok(KMedoidsRun { partition: Partition::with_medoids(k, assignment, medoids), ..rep_run });
        }
        let reps: Vec<Vec<f64>> = points.iter().map(|p| grid.represent(p)).collect();
        let init = initial_medoids(points.len(), k, seed);
        return Ok(lloyd(points.len(), None, init, |a, b| euclidean(&reps[a], &reps[b]), max_iter));
    }
    let init = initial_medoids(points.len(), k, seed);
    Ok(k_medoids_from(points, init, spec, max_iter))
}

/// Run from a given sorted medoid set, without bin collapsing.
pub fn k_medoids_from(points: &[Vec<f64>], init: Vec<usize>, spec: &DistanceSpec, max_iter: usize) -> KMedoidsRun {
    match spec {
        DistanceSpec::Euclidean => {
            let d = points.first().map_or(0, Vec::len);
            let flat: Vec<f64> = points.iter().flatten().copied().collect();
            lloyd(points.len(), None, init, |a, b| euclidean(&flat[a * d..(a + 1) * d], &flat[b * d..(b + 1) * d]), max_iter)
        }
        DistanceSpec::BinnedEuclidean(g) => {
            let reps: Vec<Vec<f64>> = points.iter().map(|p| g.represent(p)).collect();
            lloyd(points.len(), None, init, |a, b| euclidean(&reps[a], &reps[b]), max_iter)
        }
        DistanceSpec::Gower(g) => lloyd(points.len(), None, init, |a, b| g.distance(&points[a], &points[b]), max_iter),
    }
}

fn validate(points: &[Vec<f64>], k: usize, spec: &DistanceSpec) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if k > points.len() {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds the {} points", points.len())));
    }
    let d = points[0].len();
    for p in points {
        if p.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: p.len() });
        }
        spec.check(p)?;
    }
    Ok(())
}

fn nearest<D: Fn(usize, usize) -> f64>(i: usize, medoids: &[usize], dist: &D) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, &m) in medoids.iter().enumerate() {
        let d = dist(i, m);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn lloyd<D>(n: usize, weights: Option<&[f64]>, init: Vec<usize>, dist: D, max_iter: usize) -> KMedoidsRun
where
    D: Fn(usize, usize) -> f64 + Sync,
{
    let k = init.len();
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let mut medoids = init;
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for (j, &m) in medoids.iter().enumerate() {
        owner[m] = Some(j);
    }

    let mut best: Vec<(usize, f64)> = (0..n)
        .into_par_iter()
        .map(|i| match owner[i] {
            Some(j) => (j, 0.0),
            None => nearest(i, &medoids, &dist),
        })
        .collect();
    let total = |best: &[(usize, f64)]| best.iter().enumerate().map(|(i, b)| w(i) * b.1).sum::<f64>();
    let mut cost_trace = vec![total(&best)];
    let mut converged = false;

    for _ in 0..max_iter {
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, b) in best.iter().enumerate() {
            members[b.0].push(i);
        }
        let new_medoids: Vec<usize> = members
            .par_iter()
            .map(|m| {
                let mut arg = (m[0], f64::INFINITY);
                for &c in m {
                    let s: f64 = m.iter().map(|&u| w(u) * dist(u, c)).sum();
                    if s < arg.1 {
                        arg = (c, s);
                    }
                }
                arg.0
            })
            .collect();
        let moved: Vec<usize> = (0..k).filter(|&j| new_medoids[j] != medoids[j]).collect();
        if moved.is_empty() {
            converged = true;
            break;
        }
        for &j in &moved {
            owner[medoids[j]] = None;
        }
        for &j in &moved {
            owner[new_medoids[j]] = Some(j);
        }
        medoids = new_medoids;
        let mut is_moved = vec![false; k];
        moved.iter().for_each(|&j| is_moved[j] = true);

        best = best
            .par_iter()
            .enumerate()
            .map(|(i, &(cur, d_cur))| {
                if let Some(j) = owner[i] {
                    return (j, 0.0);
                }
                if is_moved[cur] {
                    return nearest(i, &medoids, &dist);
                }
                // only distances to moved medoids can change the answer
                let mut b = (cur, d_cur);
                for &j in &moved {
                    let d = dist(i, medoids[j]);
                    if d < b.1 || (d == b.1 && j < b.0) {
                        b = (j, d);
                    }
                }
                b
            })
            .collect();
        cost_trace.push(total(&best));
    }
    let assignment = best.iter().map(|b| b.0).collect();
    KMedoidsRun { partition: Partition::with_medoids(k, assignment, medoids), cost_trace, converged }
}
