use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn euclidean(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Per-dimension mean and standard deviation of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardization {
    pub fn fit(points: &[Vec<f64>]) -> Self {
        let d = points.first().map_or(0, Vec::len);
        let n = points.len() as f64;
        let mut mean = vec![0.0; d];
        for p in points {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut sd = vec![0.0; d];
        for p in points {
            for ((s, v), m) in sd.iter_mut().zip(p).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        sd.iter_mut().for_each(|s| *s = (*s / n).sqrt());
        Self { mean, sd }
    }

    /// Z-score; constant dimensions are only centred.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.sd)
            .map(|((v, m), s)| if *s > 0.0 { (v - m) / s } else { v - m })
            .collect()
    }
}

pub fn zscore(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let st = Standardization::fit(points);
    points.iter().map(|p| st.apply(p)).collect()
}

/// Equal-width bins over a batch's per-dimension range.
#[derive(Debug, Clone, PartialEq)]
pub struct BinGrid {
    bins: usize,
    lo: Vec<f64>,
    width: Vec<f64>,
}

impl BinGrid {
    pub fn fit(points: &[Vec<f64>], bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 bins, got {bins}")));
        }
        let d = points.first().map_or(0, Vec::len);
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for p in points {
            for (i, &v) in p.iter().enumerate() {
                lo[i] = lo[i].min(v);
                hi[i] = hi[i].max(v);
            }
        }
        let width = lo.iter().zip(&hi).map(|(l, h)| (h - l) / bins as f64).collect();
        Ok(Self { bins, lo, width })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn dims(&self) -> usize {
        self.lo.len()
    }

    pub fn cell(&self, x: &[f64]) -> Vec<u32> {
        x.iter()
            .zip(&self.lo)
            .zip(&self.width)
            .map(|((v, l), w)| if *w > 0.0 { ((v - l) / w).floor().clamp(0.0, (self.bins - 1) as f64) as u32 } else { 0 })
            .collect()
    }

    /// Bin-centre representative of `x`.
    pub fn represent(&self, x: &[f64]) -> Vec<f64> {
        self.cell(x)
            .iter()
            .zip(&self.lo)
            .zip(&self.width)
            .map(|((&b, l), w)| l + (f64::from(b) + 0.5) * w)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GowerColumn {
    Numeric { index: usize },
    /// Indicator block of one categorical (or a single boolean column);
    /// dissimilarity is 0 when the blocks are equal, 1 otherwise.
    Categorical { start: usize, end: usize },
}

impl GowerColumn {
    pub fn categorical(block: Range<usize>) -> Self {
        GowerColumn::Categorical { start: block.start, end: block.end }
    }
}

/// Gower feature space with numeric ranges taken from one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct GowerSpace {
    columns: Vec<GowerColumn>,
    ranges: Vec<f64>,
    width: usize,
}

impl GowerSpace {
    pub fn fit(layout: &[GowerColumn], points: &[Vec<f64>]) -> Result<Self> {
        let width = layout
            .iter()
            .map(|c| match c {
                GowerColumn::Numeric { index } => index + 1,
                GowerColumn::Categorical { end, .. } => *end,
            })
            .max()
            .unwrap_or(0);
        let mut columns = Vec::new();
        let mut ranges = Vec::new();
        for c in layout {
            match *c {
                GowerColumn::Numeric { index } => {
                    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[index]), hi.max(p[index])));
                    // zero-range dimensions drop out of the average
                    if hi > lo {
                        columns.push(*c);
                        ranges.push(hi - lo);
                    }
                }
                GowerColumn::Categorical { start, end } => {
                    if start >= end {
                        return Err(Error::InvalidArgument(format!("empty categorical block {start}..{end}")));
                    }
                    columns.push(*c);
                    ranges.push(1.0);
                }
            }
        }
        Ok(Self { columns, ranges, width })
    }

    /// Space with explicit numeric ranges.
    pub fn with_ranges(columns: Vec<GowerColumn>, ranges: Vec<f64>) -> Result<Self> {
        if columns.len() != ranges.len() {
            return Err(Error::DimensionMismatch { expected: columns.len(), got: ranges.len() });
        }
        let width = columns
            .iter()
            .map(|c| match c {
                GowerColumn::Numeric { index } => index + 1,
                GowerColumn::Categorical { end, .. } => *end,
            })
            .max()
            .unwrap_or(0);
        let keep: Vec<_> = columns.into_iter().zip(ranges).filter(|(c, r)| matches!(c, GowerColumn::Categorical { .. }) || *r > 0.0).collect();
        let (columns, ranges) = keep.into_iter().unzip();
        Ok(Self { columns, ranges, width })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn active_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        if self.columns.is_empty() {
            return 0.0;
        }
        let mut total = 0.0;
        for (c, r) in self.columns.iter().zip(&self.ranges) {
            total += match *c {
                GowerColumn::Numeric { index } => ((x[index] - y[index]).abs() / r).min(1.0),
                GowerColumn::Categorical { start, end } => {
                    if x[start..end] == y[start..end] {
                        0.0
                    } else {
                        1.0
                    }
                }
            };
        }
        total / self.columns.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DistanceSpec {
    Euclidean,
    BinnedEuclidean(BinGrid),
    Gower(GowerSpace),
}

impl DistanceSpec {
    pub(crate) fn expected_dims(&self) -> Option<usize> {
        match self {
            DistanceSpec::Euclidean => None,
            DistanceSpec::BinnedEuclidean(g) => Some(g.dims()),
            DistanceSpec::Gower(g) => Some(g.width()),
        }
    }

    pub(crate) fn check(&self, x: &[f64]) -> Result<()> {
        match self.expected_dims() {
            Some(d) if x.len() != d => Err(Error::DimensionMismatch { expected: d, got: x.len() }),
            _ => Ok(()),
        }
    }
}

pub fn distance(x: &[f64], y: &[f64], spec: &DistanceSpec) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    spec.check(x)?;
    Ok(match spec {
        DistanceSpec::Euclidean => euclidean(x, y),
        DistanceSpec::BinnedEuclidean(g) => euclidean(&g.represent(x), &g.represent(y)),
        DistanceSpec::Gower(g) => g.distance(x, y),
    })
}
