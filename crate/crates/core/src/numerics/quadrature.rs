//! Midpoint-rule posteriors on low-dimensional boxes.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GridPosterior {
    dim: usize,
    /// Node coordinates, `dim` values per node.
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Midpoints of an equal-width partition of each axis, in row-major order
/// (last axis fastest). Returns a flat `len * dim` vector.
pub fn midpoint_nodes(bounds: &[(f64, f64)], resolution: &[usize]) -> Result<Vec<f64>> {
    if bounds.is_empty() || bounds.len() > 3 || bounds.len() != resolution.len() {
        return Err(Error::param(
            "quadrature needs 1 to 3 axes with one resolution each",
        ));
    }
    for (&(lo, hi), &r) in bounds.iter().zip(resolution) {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) || r == 0 {
            return Err(Error::param(format!(
                "bad quadrature axis ({lo}, {hi}) x {r}"
            )));
        }
    }
    let axes: Vec<Vec<f64>> = bounds
        .iter()
        .zip(resolution)
        .map(|(&(lo, hi), &r)| {
            let h = (hi - lo) / r as f64;
            (0..r).map(|i| lo + (i as f64 + 0.5) * h).collect()
        })
        .collect();
    let total: usize = resolution.iter().product();
    let dim = bounds.len();
    let mut out = Vec::with_capacity(total * dim);
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        out.extend(idx.iter().enumerate().map(|(a, &i)| axes[a][i]));
        for a in (0..dim).rev() {
            idx[a] += 1;
            if idx[a] < resolution[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    Ok(out)
}

/// Normalize unnormalized log-weights; `-inf` entries get zero weight.
pub fn normalize_log_weights(logw: &[f64]) -> Result<Vec<f64>> {
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::ZeroPosteriorMass);
    }
    let mut w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    Ok(w)
}

impl GridPosterior {
    /// Posterior with weights proportional to `exp(loglik) * exp(log_prior)` at each node.
    pub fn compute(
        loglik: impl Fn(&[f64]) -> f64,
        log_prior: impl Fn(&[f64]) -> f64,
        bounds: &[(f64, f64)],
        resolution: &[usize],
    ) -> Result<Self> {
        let nodes = midpoint_nodes(bounds, resolution)?;
        let dim = bounds.len();
        let logw: Vec<f64> = nodes
            .chunks(dim)
            .map(|x| {
                let lp = log_prior(x);
                if lp == f64::NEG_INFINITY {
                    lp
                } else {
                    loglik(x) + lp
                }
            })
            .map(|l| if l.is_nan() { f64::NEG_INFINITY } else { l })
            .collect();
        Self::from_log_weights(dim, nodes, &logw)
    }

    pub fn from_log_weights(dim: usize, nodes: Vec<f64>, logw: &[f64]) -> Result<Self> {
        if dim == 0 || nodes.len() != logw.len() * dim {
            return Err(Error::ShapeMismatch("nodes and weights disagree".into()));
        }
        Ok(GridPosterior {
            dim,
            nodes,
            weights: normalize_log_weights(logw)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn expect(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.nodes
            .chunks(self.dim)
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(x, w)| w * f(x))
            .sum()
    }

    pub fn mean(&self) -> Vec<f64> {
        (0..self.dim).map(|a| self.expect(|x| x[a])).collect()
    }
}
