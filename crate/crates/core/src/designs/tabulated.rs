//! Grid posteriors for models with a handful of parameters: the toxicity
//! surface is tabulated at every quadrature node once per design.

use super::common::Surface;
use crate::error::{Error, Result};
use crate::grid::{Dose, DoseGrid, DoseMatrix};
use crate::numerics::quadrature::{midpoint_nodes, normalize_log_weights};
use crate::trial::TrialState;

#[derive(Debug, Clone)]
pub(crate) struct TabulatedModel {
    grid: DoseGrid,
    nodes: usize,
    /// Dose-major tables: entry `dose * nodes + i`.
    p: Vec<f64>,
    ln_p: Vec<f64>,
    ln_q: Vec<f64>,
}

impl TabulatedModel {
    /// Uniform prior over the box, surface `f(theta, dose)`.
    pub fn new(
        grid: DoseGrid,
        bounds: &[(f64, f64)],
        resolution: &[usize],
        f: impl Fn(&[f64], Dose) -> f64,
    ) -> Result<Self> {
        let coords = midpoint_nodes(bounds, resolution)?;
        let dim = bounds.len();
        let nodes = coords.len() / dim;
        let mut p = Vec::with_capacity(nodes * grid.len());
        for d in grid.doses() {
            for x in coords.chunks(dim) {
                let v = f(x, d);
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::param(format!("surface left [0,1] at {d}: {v}")));
                }
                p.push(v);
            }
        }
        let ln_p = p.iter().map(|v| v.ln()).collect();
        let ln_q = p.iter().map(|v| (-v).ln_1p()).collect();
        Ok(TabulatedModel {
            grid,
            nodes,
            p,
            ln_p,
            ln_q,
        })
    }

    fn weights(&self, state: &TrialState) -> Result<Vec<f64>> {
        let mut logw = vec![0.0; self.nodes];
        for (d, n, y) in state.counts() {
            let base = self.grid.index(d) * self.nodes;
            let (y, f) = (f64::from(y), f64::from(n - y));
            let lp = &self.ln_p[base..base + self.nodes];
            let lq = &self.ln_q[base..base + self.nodes];
            for ((w, a), b) in logw.iter_mut().zip(lp).zip(lq) {
                // 0 * ln 0 contributes nothing.
                if y > 0.0 {
                    *w += y * a;
                }
                if f > 0.0 {
                    *w += f * b;
                }
            }
        }
        normalize_log_weights(&logw)
    }

    pub fn surface(&self, state: &TrialState, phi: f64) -> Result<Surface> {
        let w = self.weights(state)?;
        let g = self.grid;
        let mut mean = DoseMatrix::filled(g, 0.0);
        let mut below = DoseMatrix::filled(g, 0.0);
        let mut above = DoseMatrix::filled(g, 0.0);
        for d in g.doses() {
            let base = g.index(d) * self.nodes;
            let (mut m, mut lo, mut hi) = (0.0, 0.0, 0.0);
            for (wi, p) in w.iter().zip(&self.p[base..base + self.nodes]) {
                m += wi * p;
                if *p < phi {
                    lo += wi;
                } else if *p > phi {
                    hi += wi;
                }
            }
            mean[d] = m;
            below[d] = lo;
            above[d] = hi;
        }
        Ok(Surface {
            mean,
            below,
            above,
            window: None,
        })
    }
}
