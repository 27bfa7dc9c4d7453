//! Rules shared across designs: start-up sequences, cutoff-driven moves and
//! nearest-to-target picks.

use crate::decision::{Decision, Reason};
use crate::grid::{Dose, DoseGrid, DoseMatrix};
use crate::numerics::Chain;
use crate::seeds;
use crate::trial::{Phase, TrialState};

/// Moves considered when escalating under posterior cutoffs.
pub const CUTOFF_UP: [(isize, isize); 4] = [(1, 0), (0, 1), (1, -1), (-1, 1)];
/// Moves considered when de-escalating under posterior cutoffs.
pub const CUTOFF_DOWN: [(isize, isize); 4] = [(-1, 0), (0, -1), (1, -1), (-1, 1)];

/// Seed for the decision made after `state`'s last cohort.
pub(crate) fn decision_seed(seed: u64, state: &TrialState, tag: u64) -> u64 {
    seeds::derive(seed, &[tag, state.log().len() as u64])
}

/// First candidate (in the given order) whose estimate is nearest `phi`.
pub fn closest(
    cands: impl IntoIterator<Item = Dose>,
    est: impl Fn(Dose) -> f64,
    phi: f64,
) -> Option<Dose> {
    let mut best: Option<(Dose, f64)> = None;
    for d in cands {
        let gap = (est(d) - phi).abs();
        if best.is_none_or(|(_, g)| gap < g) {
            best = Some((d, gap));
        }
    }
    best.map(|(d, _)| d)
}

/// Candidates to break ties in favour of the lower dose: sorted by zone, then `j`.
pub(crate) fn by_height(mut doses: Vec<Dose>) -> Vec<Dose> {
    doses.sort_by_key(|d| d.height());
    doses
}

/// Reason label for a move chosen by proximity to the target.
pub(crate) fn move_reason(current: Dose, next: Dose) -> Reason {
    if next == current {
        Reason::Stay
    } else if next.precedes_or_eq(current) {
        Reason::DeEscalate
    } else if current.precedes_or_eq(next) {
        Reason::Escalate
    } else {
        Reason::ClosestToTarget
    }
}

/// Current dose followed by its 8-neighbours, so that ties keep the current dose.
pub(crate) fn current_first_neighbourhood(grid: DoseGrid, current: Dose) -> Vec<Dose> {
    let mut out = vec![current];
    out.extend(
        grid.neighbourhood(current)
            .into_iter()
            .filter(|d| *d != current),
    );
    out
}

/// Tried dose with estimate nearest `phi`; ties go to the lower dose.
pub(crate) fn closest_tried(state: &TrialState, est: &DoseMatrix<f64>, phi: f64) -> Option<Dose> {
    closest(by_height(state.tried().collect()), |d| est[d], phi)
}

/// Posterior summaries a cutoff rule needs at every dose.
#[derive(Debug, Clone)]
pub struct Surface {
    pub mean: DoseMatrix<f64>,
    /// `P(pi < phi)`.
    pub below: DoseMatrix<f64>,
    /// `P(pi > phi)`.
    pub above: DoseMatrix<f64>,
    /// Posterior mass of a window around `phi`, when the design uses one.
    pub window: Option<DoseMatrix<f64>>,
}

impl Surface {
    pub fn estimates(&self) -> DoseMatrix<Option<f64>> {
        self.mean.map(|m| Some(*m))
    }
}

/// Escalate when `P(pi < phi) > c_e`, de-escalate when `P(pi > phi) > c_d`.
/// Moves go to the neighbour nearest `phi` among those estimated strictly more
/// (or less) toxic than the current dose. De-escalating from `(1,1)` ends the
/// trial; otherwise a blocked move stays.
pub fn cutoff_rule(
    grid: DoseGrid,
    current: Dose,
    s: &Surface,
    phi: f64,
    escalate: f64,
    deescalate: f64,
) -> Decision {
    let here = s.mean[current];
    if s.below[current] > escalate {
        let cands: Vec<Dose> = grid
            .moves(current, &CUTOFF_UP)
            .into_iter()
            .filter(|d| s.mean[*d] > here)
            .collect();
        return match closest(cands, |d| s.mean[d], phi) {
            Some(d) => Decision::assign(d, Reason::Escalate),
            None => Decision::assign(current, Reason::Stay),
        };
    }
    if s.above[current] > deescalate {
        if current == grid.lowest() {
            return Decision::terminate(Reason::SafetyStop);
        }
        let cands: Vec<Dose> = grid
            .moves(current, &CUTOFF_DOWN)
            .into_iter()
            .filter(|d| s.mean[*d] < here)
            .collect();
        return match closest(cands, |d| s.mean[d], phi) {
            Some(d) => Decision::assign(d, Reason::DeEscalate),
            None => Decision::assign(current, Reason::Stay),
        };
    }
    Decision::assign(current, Reason::Stay)
}

/// Per-dose posterior summaries from sampler draws. `window` is a closed
/// interval whose posterior mass is recorded when given.
pub(crate) fn surface_from_draws(
    grid: DoseGrid,
    chain: &Chain,
    phi: f64,
    window: Option<(f64, f64)>,
    mut f: impl FnMut(&[f64], &mut [f64]),
) -> Surface {
    let t = grid.len();
    let (mut mean, mut below, mut above) = (vec![0.0; t], vec![0.0; t], vec![0.0; t]);
    let mut inside = vec![0.0; t];
    let mut pi = vec![0.0; t];
    for draw in chain.draws() {
        f(draw, &mut pi);
        for i in 0..t {
            let p = pi[i];
            mean[i] += p;
            if p < phi {
                below[i] += 1.0;
            } else if p > phi {
                above[i] += 1.0;
            }
            if let Some((lo, hi)) = window {
                if p >= lo && p <= hi {
                    inside[i] += 1.0;
                }
            }
        }
    }
    let n = chain.len() as f64;
    let to = |v: Vec<f64>| {
        DoseMatrix::from_vec(grid, v.into_iter().map(|x| x / n).collect()).expect("sized to grid")
    };
    Surface {
        mean: to(mean),
        below: to(below),
        above: to(above),
        window: window.map(|_| to(inside)),
    }
}

/// A fixed start-up path: walk the sequence while no DLT has been seen.
/// The phase ends at the first DLT or once every dose on the path is tried.
#[derive(Debug, Clone)]
pub struct SequenceStartup {
    seq: Vec<Dose>,
}

impl SequenceStartup {
    pub fn new(seq: Vec<Dose>) -> Self {
        SequenceStartup { seq }
    }

    pub fn sequence(&self) -> &[Dose] {
        &self.seq
    }

    /// I2D path: up agent A along `k = 1`, then jump two A-levels down per
    /// B-level, then sweep agent A at the top B-level.
    pub fn i2d(grid: DoseGrid) -> Self {
        let (jl, kl) = (grid.j_levels, grid.k_levels);
        let mut seq: Vec<Dose> = (1..=jl).map(|j| Dose::new(j, 1)).collect();
        for k in 2..=kl {
            let m = jl.saturating_sub(2 * (k - 1)).max(1);
            if k < kl {
                seq.push(Dose::new(m, k));
            } else {
                seq.extend((m..=jl).map(|j| Dose::new(j, kl)));
            }
        }
        SequenceStartup::new(seq)
    }

    /// Diagonal path to `(m, m)`, `m = min(J, K)`, then raise the other agent.
    pub fn diagonal(grid: DoseGrid) -> Self {
        let m = grid.j_levels.min(grid.k_levels);
        let mut seq: Vec<Dose> = (1..=m).map(|i| Dose::new(i, i)).collect();
        seq.extend((m + 1..=grid.j_levels).map(|j| Dose::new(j, m)));
        seq.extend((m + 1..=grid.k_levels).map(|k| Dose::new(m, k)));
        SequenceStartup::new(seq)
    }

    fn done_after(&self, state: &TrialState) -> bool {
        state.total_dlts() > 0 || self.seq.iter().all(|d| state.is_tried(*d))
    }

    pub fn phase(&self, state: &TrialState) -> Phase {
        if self.done_after(state) {
            Phase::Model
        } else {
            Phase::Startup
        }
    }

    /// Next start-up dose, or `None` once the phase is over.
    pub fn next(&self, state: &TrialState) -> Option<Dose> {
        if state.log().is_empty() {
            return Some(self.seq.first().copied().unwrap_or(Dose::new(1, 1)));
        }
        if self.done_after(state) {
            return None;
        }
        self.seq.iter().copied().find(|d| !state.is_tried(*d))
    }

    /// Number of cohorts after which start-up ended, if it has.
    pub fn ended_at(&self, state: &TrialState) -> Option<usize> {
        let grid = state.grid();
        let mut tried = vec![false; grid.len()];
        for (i, c) in state.log().iter().enumerate() {
            tried[grid.index(c.dose)] = true;
            if c.dlts > 0 || self.seq.iter().all(|d| tried[grid.index(*d)]) {
                return Some(i + 1);
            }
        }
        None
    }
}
