//! Partitioning entities into clusters and averaging clusters into proxies.

pub mod distance;
pub mod kmedoids;
pub mod study;

use rand::Rng;

use crate::error::{Error, Result};

pub use distance::{distance, euclidean, zscore, BinGrid, DistanceSpec, GowerColumn, GowerSpace, Standardization};
pub use kmedoids::{initial_medoids, k_medoids, k_medoids_from, k_medoids_run, KMedoidsRun, DEFAULT_MAX_ITER};
pub use study::mean_medoid_gap;

/// `⌈n/ρ⌉`.
pub fn cluster_count(n: usize, rho: usize) -> Result<usize> {
    if n == 0 || rho == 0 {
        return Err(Error::InvalidArgument(format!("cluster_count needs n >= 1 and rho >= 1, got n={n}, rho={rho}")));
    }
    Ok(n.div_ceil(rho))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    k: usize,
    assignment: Vec<usize>,
    medoids: Option<Vec<usize>>,
}

impl Partition {
    pub fn new(k: usize, assignment: Vec<usize>) -> Self {
        Self { k, assignment, medoids: None }
    }

    pub fn with_medoids(k: usize, assignment: Vec<usize>, medoids: Vec<usize>) -> Self {
        Self { k, assignment, medoids: Some(medoids) }
    }

    /// Every entity in its own cluster, in order.
    pub fn singletons(n: usize) -> Self {
        Self::with_medoids(n, (0..n).collect(), (0..n).collect())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn medoids(&self) -> Option<&[usize]> {
        self.medoids.as_deref()
    }

    /// Member indices per cluster, ascending; empty clusters included.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &g) in self.assignment.iter().enumerate() {
            out[g].push(i);
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.k];
        for &g in &self.assignment {
            out[g] += 1;
        }
        out
    }

    /// Check that `n` entities are each assigned to one of `k` clusters and,
    /// when `medoid_laws` is set, that each cluster holds its own medoid.
    pub fn check_laws(&self, n: usize, medoid_laws: bool) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidArgument(format!("partition law violated: {m}")));
        if self.assignment.len() != n {
            return fail(format!("{} assignments for {n} entities", self.assignment.len()));
        }
        if let Some(g) = self.assignment.iter().find(|&&g| g >= self.k) {
            return fail(format!("cluster index {g} outside 0..{}", self.k));
        }
        if medoid_laws {
            let Some(medoids) = &self.medoids else {
                return fail("no medoids recorded".into());
            };
            if medoids.len() != self.k {
                return fail(format!("{} medoids for k = {}", medoids.len(), self.k));
            }
            for (g, &m) in medoids.iter().enumerate() {
                if self.assignment.get(m) != Some(&g) {
                    return fail(format!("medoid {m} is not in its cluster {g}"));
                }
            }
        }
        Ok(())
    }
}

/// Each entity independently uniform over `0..k`. Empty clusters are kept.
pub fn random_partition(n: usize, k: usize, seed: u64) -> Result<Partition> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut rng = crate::seed::rng(seed, &[0x726e64]);
    Ok(Partition::new(k, (0..n).map(|_| rng.random_range(0..k)).collect()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxyEntity {
    pub cluster: usize,
    pub members: Vec<usize>,
    pub x: Vec<f64>,
    pub y: Option<f64>,
}

/// Compensated (Neumaier) running sum; a single term is returned exactly.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// One proxy per non-empty cluster, in cluster order.
pub fn make_proxies(partition: &Partition, features: &[Vec<f64>], outcomes: Option<&[f64]>) -> Result<Vec<ProxyEntity>> {
    if features.len() != partition.len() {
        return Err(Error::DimensionMismatch { expected: partition.len(), got: features.len() });
    }
    if let Some(y) = outcomes {
        if y.len() != partition.len() {
            return Err(Error::DimensionMismatch { expected: partition.len(), got: y.len() });
        }
    }
    let d = features.first().map_or(0, Vec::len);
    let mut out = Vec::new();
    for (g, members) in partition.members().into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let n = members.len() as f64;
        let mut acc = vec![CompensatedSum::default(); d];
        for &i in &members {
            if features[i].len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: features[i].len() });
            }
            for (a, &v) in acc.iter_mut().zip(&features[i]) {
                a.add(v);
            }
        }
        let x = acc.iter().map(|a| a.value() / n).collect();
        let y = outcomes.map(|y| {
            let mut s = CompensatedSum::default();
            members.iter().for_each(|&i| s.add(y[i]));
            s.value() / n
        });
        out.push(ProxyEntity { cluster: g, members, x, y });
    }
    Ok(out)
}
