//! One-parameter CRM machinery over complete orderings of the dose grid.
//!
//! An ordering lays the `J*K` combinations on a line; the power working model
//! `psi_t(a) = s_t^exp(a)` then assigns skeleton value `s_t` to the dose in
//! position `t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Dose, DoseGrid};
use crate::numerics::quadrature::{midpoint_nodes, normalize_log_weights};
use crate::numerics::{crm_skeleton, SkeletonSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderingKind {
    Rows,
    Columns,
    UpDiagonals,
    DownDiagonals,
    AlternatingDownUp,
    AlternatingUpDown,
    /// Built from data, e.g. a bootstrap ordering.
    Data,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ordering {
    pub kind: OrderingKind,
    doses: Vec<Dose>,
    /// Position of each grid index in `doses`.
    position: Vec<usize>,
}

impl Ordering {
    pub fn new(grid: DoseGrid, kind: OrderingKind, doses: Vec<Dose>) -> Result<Self> {
        if doses.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "ordering has {} doses, grid has {}",
                doses.len(),
                grid.len()
            )));
        }
        let mut position = vec![usize::MAX; grid.len()];
        for (t, d) in doses.iter().enumerate() {
            grid.check(*d)?;
            let i = grid.index(*d);
            if position[i] != usize::MAX {
                return Err(Error::param(format!(
                    "dose {d} appears twice in an ordering"
                )));
            }
            position[i] = t;
        }
        let o = Ordering {
            kind,
            doses,
            position,
        };
        if !o.respects_partial_order(grid) {
            return Err(Error::param("ordering contradicts the partial order"));
        }
        Ok(o)
    }

    pub fn doses(&self) -> &[Dose] {
        &self.doses
    }

    pub fn len(&self) -> usize {
        self.doses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doses.is_empty()
    }

    /// 0-based position of the dose with grid index `i`.
    pub fn position_of_index(&self, i: usize) -> usize {
        self.position[i]
    }

    /// Dose `(j,k)` comes before `(j',k')` whenever `j <= j'` and `k <= k'`.
    pub fn respects_partial_order(&self, grid: DoseGrid) -> bool {
        grid.doses().all(|a| {
            grid.doses().all(|b| {
                a == b
                    || !a.precedes_or_eq(b)
                    || self.position[grid.index(a)] < self.position[grid.index(b)]
            })
        })
    }
}

/// Members of zone `z` (where `j + k - 1 = z`) from the largest `j` down.
fn zone_up(grid: DoseGrid, z: usize) -> Vec<Dose> {
    (1..=grid.j_levels)
        .rev()
        .filter_map(|j| {
            let k = (z + 1).checked_sub(j)?;
            (k >= 1 && k <= grid.k_levels).then(|| Dose::new(j, k))
        })
        .collect()
}

/// The six standard orderings.
pub fn enumerate_orderings(grid: DoseGrid) -> Vec<Ordering> {
    let zones = grid.j_levels + grid.k_levels - 1;
    let diag = |down_at: &dyn Fn(usize) -> bool| -> Vec<Dose> {
        let mut out = Vec::with_capacity(grid.len());
        for z in 1..=zones {
            let mut members = zone_up(grid, z);
            if down_at(z) {
                members.reverse();
            }
            out.extend(members);
        }
        out
    };
    let rows: Vec<Dose> = (1..=grid.k_levels)
        .flat_map(|k| (1..=grid.j_levels).map(move |j| Dose::new(j, k)))
        .collect();
    let columns: Vec<Dose> = (1..=grid.j_levels)
        .flat_map(|j| (1..=grid.k_levels).map(move |k| Dose::new(j, k)))
        .collect();
    let make = |kind, doses| {
        Ordering::new(grid, kind, doses).expect("standard orderings respect the partial order")
    };
    vec![
        make(OrderingKind::Rows, rows),
        make(OrderingKind::Columns, columns),
        make(OrderingKind::UpDiagonals, diag(&|_| false)),
        make(OrderingKind::DownDiagonals, diag(&|_| true)),
        make(OrderingKind::AlternatingDownUp, diag(&|z| z % 2 == 0)),
        make(OrderingKind::AlternatingUpDown, diag(&|z| z % 2 == 1)),
    ]
}

/// Skeleton settings with the MTD position defaulting to about 70% of the line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkeletonChoice {
    pub half_width: f64,
    /// 1-based; `None` picks `round(11 T / 15)`.
    pub mtd_position: Option<usize>,
}

impl Default for SkeletonChoice {
    fn default() -> Self {
        SkeletonChoice {
            half_width: 0.05,
            mtd_position: None,
        }
    }
}

impl SkeletonChoice {
    pub fn spec(&self, levels: usize, phi: f64) -> SkeletonSpec {
        let pos = self
            .mtd_position
            .unwrap_or_else(|| ((11 * levels + 7) / 15).max(1));
        SkeletonSpec {
            half_width: self.half_width,
            mtd_position: pos,
            n_levels: levels,
            phi,
        }
    }

    pub fn build(&self, levels: usize, phi: f64) -> Result<Vec<f64>> {
        crm_skeleton(&self.spec(levels, phi))
    }
}

/// `(n, y)` by grid index.
pub type Counts = [(u32, u32)];

/// Log-likelihood of the power model at `a` under an ordering.
pub fn power_loglik(a: f64, skeleton: &[f64], ordering: &Ordering, counts: &Counts) -> f64 {
    let e = a.exp();
    counts
        .iter()
        .enumerate()
        .filter(|(_, (n, _))| *n > 0)
        .map(|(i, &(n, y))| {
            let ln_s = skeleton[ordering.position_of_index(i)].ln();
            let ln_p = e * ln_s;
            let ln_q = (-ln_p.exp()).ln_1p();
            f64::from(y) * ln_p + f64::from(n - y) * ln_q
        })
        .sum()
}

/// Maximizer of a unimodal function on `[lo, hi]`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// True when the data hold at least one DLT and one non-DLT.
pub fn heterogeneous(counts: &Counts) -> bool {
    let (n, y) = counts
        .iter()
        .fold((0, 0), |(n, y), &(ni, yi)| (n + ni, y + yi));
    y > 0 && y < n
}

/// Power-model CRM with a normal prior on `a`, integrated on a fixed grid.
/// `psi` and its logs are tabulated per skeleton position and node.
#[derive(Debug, Clone)]
pub struct CrmTables {
    pub skeleton: Vec<f64>,
    nodes: Vec<f64>,
    log_prior: Vec<f64>,
    psi: Vec<Vec<f64>>,
    ln_psi: Vec<Vec<f64>>,
    ln_1m_psi: Vec<Vec<f64>>,
}

/// Posterior summaries on the line of an ordering, indexed by grid index.
#[derive(Debug, Clone, PartialEq)]
pub struct CrmSummary {
    pub mean: Vec<f64>,
    pub below: Vec<f64>,
    pub above: Vec<f64>,
    pub window: Vec<f64>,
}

impl CrmTables {
    pub const NODES: usize = 121;

    pub fn new(skeleton: Vec<f64>, prior_sd: f64) -> Result<Self> {
        if !(prior_sd > 0.0) {
            return Err(Error::param("prior sd must be positive"));
        }
        let nodes = midpoint_nodes(&[(-6.0, 6.0)], &[Self::NODES])?;
        let log_prior = nodes
            .iter()
            .map(|a| -0.5 * (a / prior_sd).powi(2))
            .collect();
        let mut psi = Vec::with_capacity(skeleton.len());
        let mut ln_psi = Vec::with_capacity(skeleton.len());
        let mut ln_1m_psi = Vec::with_capacity(skeleton.len());
        for s in &skeleton {
            let lp: Vec<f64> = nodes.iter().map(|a| a.exp() * s.ln()).collect();
            psi.push(lp.iter().map(|l| l.exp()).collect());
            ln_1m_psi.push(lp.iter().map(|l| (-l.exp()).ln_1p()).collect());
            ln_psi.push(lp);
        }
        Ok(CrmTables {
            skeleton,
            nodes,
            log_prior,
            psi,
            ln_psi,
            ln_1m_psi,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn posterior_weights(&self, ordering: &Ordering, counts: &Counts) -> Result<Vec<f64>> {
        let mut logw = self.log_prior.clone();
        for (i, &(n, y)) in counts.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let t = ordering.position_of_index(i);
            let (y, f) = (f64::from(y), f64::from(n - y));
            for (w, (lp, lq)) in logw
                .iter_mut()
                .zip(self.ln_psi[t].iter().zip(&self.ln_1m_psi[t]))
            {
                *w += y * lp + f * lq;
            }
        }
        normalize_log_weights(&logw)
    }

    pub fn summarize(
        &self,
        ordering: &Ordering,
        counts: &Counts,
        phi: f64,
        half_window: f64,
    ) -> Result<CrmSummary> {
        let w = self.posterior_weights(ordering, counts)?;
        let t_len = counts.len();
        let mut s = CrmSummary {
            mean: vec![0.0; t_len],
            below: vec![0.0; t_len],
            above: vec![0.0; t_len],
            window: vec![0.0; t_len],
        };
        for i in 0..t_len {
            let psi = &self.psi[ordering.position_of_index(i)];
            for (wi, p) in w.iter().zip(psi) {
                s.mean[i] += wi * p;
                if *p < phi {
                    s.below[i] += wi;
                } else if *p > phi {
                    s.above[i] += wi;
                }
                if (p - phi).abs() < half_window {
                    s.window[i] += wi;
                }
            }
        }
        Ok(s)
    }
}
