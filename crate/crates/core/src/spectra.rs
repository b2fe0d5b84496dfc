//! Distances between spectra and multiplicity-respecting eigenvalue matching.

use serde::Serialize;

use crate::{Error, Result};

/// Truncated spectrum: the computed eigenvalues plus a tail bound
/// `τ = (λ_{m+1} + 1)⁻¹` standing in for everything not computed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSet {
    pub eigenvalues: Vec<f64>,
    pub tail: f64,
}

impl SpectrumSet {
    /// Sorts, clamps tiny negatives to zero and derives the tail from `next`,
    /// the first eigenvalue not kept.
    pub fn new(mut eigenvalues: Vec<f64>, next: f64) -> Result<SpectrumSet> {
        if eigenvalues.iter().chain([&next]).any(|l| !(l.is_finite() && *l >= -1e-9)) {
            return Err(Error::Domain("spectrum entries must be finite and nonnegative".into()));
        }
        eigenvalues.iter_mut().for_each(|l| *l = l.max(0.0));
        eigenvalues.sort_by(f64::total_cmp);
        Ok(SpectrumSet {
            eigenvalues,
            tail: 1.0 / (next.max(0.0) + 1.0),
        })
    }

    /// Splits a list of `m + 1` ascending eigenvalues into `m` kept values and a tail.
    pub fn from_computed(values: &[f64]) -> Result<SpectrumSet> {
        match values.split_last() {
            Some((&next, kept)) if !kept.is_empty() => SpectrumSet::new(kept.to_vec(), next),
            _ => Err(Error::UndefinedDistance("need at least two eigenvalues to form a tail".into())),
        }
    }

    pub fn with_tail(eigenvalues: Vec<f64>, tail: f64) -> SpectrumSet {
        let mut eigenvalues = eigenvalues;
        eigenvalues.sort_by(f64::total_cmp);
        SpectrumSet { eigenvalues, tail }
    }

    /// Points `(λ + 1)⁻¹` together with the tail interval `[0, τ]`.
    pub fn transformed(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = self.eigenvalues.iter().map(|l| {
            let t = 1.0 / (l + 1.0);
            (t, t)
        }).collect();
        out.push((0.0, self.tail));
        out
    }
}

/// Closed intervals `[a, b]`; points are degenerate intervals.
fn directed(from: &[(f64, f64)], to: &[(f64, f64)]) -> f64 {
    // sup over x in `from` of dist(x, to). dist(·, to) is piecewise linear,
    // so the sup over an interval is attained at its ends or at a midpoint
    // between two consecutive pieces of `to` lying inside it.
    let mut sorted: Vec<(f64, f64)> = to.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let dist = |x: f64| {
        sorted
            .iter()
            .map(|&(a, b)| if x < a { a - x } else if x > b { x - b } else { 0.0 })
            .fold(f64::INFINITY, f64::min)
    };
    let mut worst: f64 = 0.0;
    for &(a, b) in from {
        worst = worst.max(dist(a)).max(dist(b));
        for w in sorted.windows(2) {
            let (lo, hi) = (w[0].1, w[1].0);
            if hi > lo {
                let mid = 0.5 * (lo + hi);
                if mid >= a && mid <= b {
                    worst = worst.max(dist(mid));
                }
            }
        }
    }
    worst
}

fn interval_hausdorff(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::UndefinedDistance("Hausdorff distance of an empty set".into()));
    }
    Ok(directed(a, b).max(directed(b, a)))
}

/// Hausdorff distance between finite point sets.
pub fn hausdorff(a: &[f64], b: &[f64]) -> Result<f64> {
    let pa: Vec<(f64, f64)> = a.iter().map(|&x| (x, x)).collect();
    let pb: Vec<(f64, f64)> = b.iter().map(|&x| (x, x)).collect();
    interval_hausdorff(&pa, &pb)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dbar {
    pub distance: f64,
    /// Bound on what the truncated tails can hide, `max(τ_A, τ_B)`.
    pub truncation_error: f64,
}

/// Hausdorff distance of the resolvent-transformed spectra.
pub fn dbar(a: &SpectrumSet, b: &SpectrumSet) -> Result<Dbar> {
    if a.eigenvalues.is_empty() || b.eigenvalues.is_empty() {
        return Err(Error::UndefinedDistance("empty spectrum".into()));
    }
    Ok(Dbar {
        distance: interval_hausdorff(&a.transformed(), &b.transformed())?,
        truncation_error: a.tail.max(b.tail),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pairing {
    pub a: usize,
    pub b: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchReport {
    pub pairs: Vec<Pairing>,
    pub unpaired_a: Vec<usize>,
    pub unpaired_b: Vec<usize>,
    pub eta: f64,
}

/// Greedy nearest-neighbour pairing: candidate pairs within `η` are taken in
/// order of increasing gap, each eigenvalue used at most once.
pub fn match_eigenvalues(a: &[f64], b: &[f64], eta: f64) -> Result<MatchReport> {
    if !(eta > 0.0) {
        return Err(Error::Domain(format!("matching threshold must be positive, got {eta}")));
    }
    let mut candidates = Vec::new();
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            let gap = (x - y).abs();
            if gap <= eta {
                candidates.push((gap, i, j));
            }
        }
    }
    candidates.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut pairs = Vec::new();
    for (gap, i, j) in candidates {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            pairs.push(Pairing { a: i, b: j, gap });
        }
    }
    pairs.sort_by_key(|p| p.a);
    Ok(MatchReport {
        pairs,
        unpaired_a: (0..a.len()).filter(|&i| !used_a[i]).collect(),
        unpaired_b: (0..b.len()).filter(|&j| !used_b[j]).collect(),
        eta,
    })
}
