//! Bootstrap-aggregating CRM.
//!
//! Each bootstrap sample of patient records yields a complete ordering of
//! the grid (isotonic estimates plus a rank jitter). A one-parameter CRM is
//! fitted under that ordering to the original data, and the per-ordering
//! posteriors are averaged over bootstraps.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::common::{by_height, cutoff_rule, decision_seed, SequenceStartup, Surface};
use super::crm::{CrmSummary, CrmTables, Ordering, OrderingKind, SkeletonChoice};
use super::profile::Cutoffs;
use super::{BuildContext, Design, DesignId};
use crate::decision::{Decision, MtdResult, Reason};
use crate::error::{Error, Result};
use crate::grid::{Dose, DoseGrid, DoseMatrix};
use crate::numerics::{BetaParams, IsotonicSolver};
use crate::seeds::{self, TAG_BOOTSTRAP, TAG_DECIDE, TAG_SELECT};
use crate::trial::{Phase, TrialState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcrmParams {
    pub prior: BetaParams,
    /// Upper bound on the jitter step; shrunk below the smallest strict gap.
    pub jitter_eps: f64,
    pub bootstraps: usize,
    /// Half-width of the window around `phi` used for MTD selection.
    pub eps_neighborhood: f64,
    pub cutoffs: Cutoffs,
    pub skeleton: SkeletonChoice,
    /// Standard deviation of the normal prior on the CRM parameter.
    pub a_prior_sd: f64,
}

impl Default for BcrmParams {
    fn default() -> Self {
        BcrmParams {
            prior: BetaParams::UNIFORM,
            jitter_eps: 1e-4,
            bootstraps: 500,
            eps_neighborhood: 0.12,
            cutoffs: Cutoffs::new(0.85, 0.45),
            skeleton: SkeletonChoice::default(),
            a_prior_sd: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Bcrm {
    grid: DoseGrid,
    phi: f64,
    p: BcrmParams,
    tables: CrmTables,
    solver: IsotonicSolver,
    startup: SequenceStartup,
}

/// Posterior-mean estimates with rank jitter: `est + r * eps`, where `r` is
/// the 1-based rank of each dose when sorted by estimate, ties broken by
/// `(j + k, j)`. Returns the jittered values and the step used.
pub fn jitter(est: &DoseMatrix<f64>, max_eps: f64) -> (DoseMatrix<f64>, f64) {
    let g = est.grid();
    let mut order: Vec<Dose> = g.doses().collect();
    order.sort_by(|a, b| {
        est[*a]
            .total_cmp(&est[*b])
            .then(a.height().cmp(&b.height()))
    });
    let mut sorted: Vec<f64> = est.as_slice().to_vec();
    sorted.sort_by(f64::total_cmp);
    let min_gap = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|gap| *gap > 0.0)
        .fold(f64::INFINITY, f64::min);
    let eps = max_eps.min(min_gap / (g.len() as f64 + 1.0));
    let mut out = est.clone();
    for (r, d) in order.iter().enumerate() {
        out[*d] += (r + 1) as f64 * eps;
    }
    (out, eps)
}

impl Bcrm {
    pub fn new(p: &BcrmParams, ctx: &BuildContext<'_>) -> Result<Self> {
        BetaParams::new(p.prior.a, p.prior.b)?;
        p.cutoffs.validate()?;
        if p.bootstraps == 0 || !(p.jitter_eps > 0.0) || !(p.eps_neighborhood > 0.0) {
            return Err(Error::param(
                "bcrm needs bootstraps >= 1 and positive epsilons",
            ));
        }
        let skeleton = p.skeleton.build(ctx.grid.len(), ctx.phi)?;
        Ok(Bcrm {
            grid: ctx.grid,
            phi: ctx.phi,
            p: *p,
            tables: CrmTables::new(skeleton, p.a_prior_sd)?,
            solver: IsotonicSolver::new(ctx.grid)?,
            startup: SequenceStartup::diagonal(ctx.grid),
        })
    }

    fn counts(state: &TrialState) -> Vec<(u32, u32)> {
        state
            .n()
            .as_slice()
            .iter()
            .zip(state.y().as_slice())
            .map(|(n, y)| (*n, *y))
            .collect()
    }

    /// Ordering implied by counts `(n, y)` per grid index.
    pub fn ordering_from(&self, counts: &[(u32, u32)]) -> Result<Ordering> {
        let g = self.grid;
        let pr = self.p.prior;
        let values = DoseMatrix::from_fn(g, |d| {
            let (n, y) = counts[g.index(d)];
            (pr.a + f64::from(y)) / (pr.mass() + f64::from(n))
        });
        let weights = DoseMatrix::from_fn(g, |d| pr.mass() + f64::from(counts[g.index(d)].0));
        let fitted = self.solver.fit(&values, &weights)?;
        let (jittered, _) = jitter(&fitted, self.p.jitter_eps);
        let mut doses: Vec<Dose> = g.doses().collect();
        doses.sort_by(|a, b| jittered[*a].total_cmp(&jittered[*b]));
        Ordering::new(g, OrderingKind::Data, doses)
    }

    fn resample(state: &TrialState, seed: u64) -> Vec<(u32, u32)> {
        let g = state.grid();
        let mut records: Vec<(usize, bool)> = Vec::with_capacity(state.total_patients() as usize);
        for d in g.doses() {
            let (n, y) = (state.patients_at(d), state.dlts_at(d));
            let i = g.index(d);
            records.extend((0..n).map(|p| (i, p < y)));
        }
        let mut rng = seeds::rng(seed);
        let mut out = vec![(0u32, 0u32); g.len()];
        for _ in 0..records.len() {
            let (i, tox) = records[rng.random_range(0..records.len())];
            out[i].0 += 1;
            out[i].1 += u32::from(tox);
        }
        out
    }

    /// Bagged posterior summaries, averaged over bootstrap orderings.
    pub fn bagged(&self, state: &TrialState, seed: u64) -> Result<CrmSummary> {
        if state.total_patients() == 0 {
            return Err(Error::NoDosesTried);
        }
        let counts = Self::counts(state);
        let mut cache: HashMap<Vec<Dose>, CrmSummary> = HashMap::new();
        let t = self.grid.len();
        let mut acc = CrmSummary {
            mean: vec![0.0; t],
            below: vec![0.0; t],
            above: vec![0.0; t],
            window: vec![0.0; t],
        };
        for b in 0..self.p.bootstraps {
            let boot = Self::resample(state, seeds::derive(seed, &[TAG_BOOTSTRAP, b as u64]));
            let ordering = self.ordering_from(&boot)?;
            let key = ordering.doses().to_vec();
            if !cache.contains_key(&key) {
                let s =
                    self.tables
                        .summarize(&ordering, &counts, self.phi, self.p.eps_neighborhood)?;
                cache.insert(key.clone(), s);
            }
            let s = &cache[&key];
            for i in 0..t {
                acc.mean[i] += s.mean[i];
                acc.below[i] += s.below[i];
                acc.above[i] += s.above[i];
                acc.window[i] += s.window[i];
            }
        }
        let inv = 1.0 / self.p.bootstraps as f64;
        for v in [
            &mut acc.mean,
            &mut acc.below,
            &mut acc.above,
            &mut acc.window,
        ] {
            v.iter_mut().for_each(|x| *x *= inv);
        }
        Ok(acc)
    }

    fn surface(&self, s: CrmSummary) -> Result<Surface> {
        let g = self.grid;
        Ok(Surface {
            mean: DoseMatrix::from_vec(g, s.mean)?,
            below: DoseMatrix::from_vec(g, s.below)?,
            above: DoseMatrix::from_vec(g, s.above)?,
            window: Some(DoseMatrix::from_vec(g, s.window)?),
        })
    }
}

impl Design for Bcrm {
    fn id(&self) -> DesignId {
        DesignId::Bcrm
    }

    fn grid(&self) -> DoseGrid {
        self.grid
    }

    fn phase(&self, state: &TrialState) -> Phase {
        self.startup.phase(state)
    }

    fn decide(&self, state: &TrialState, seed: u64) -> Result<Decision> {
        if let Some(d) = self.startup.next(state) {
            return Ok(Decision::assign(d, Reason::StartUp));
        }
        let current = state.current().ok_or(Error::NoDosesTried)?;
        let s = self.surface(self.bagged(state, decision_seed(seed, state, TAG_DECIDE))?)?;
        Ok(cutoff_rule(
            self.grid,
            current,
            &s,
            self.phi,
            self.p.cutoffs.escalate,
            self.p.cutoffs.deescalate,
        ))
    }

    fn select_mtd(&self, state: &TrialState, seed: u64) -> Result<MtdResult> {
        let s = self.surface(self.bagged(state, decision_seed(seed, state, TAG_SELECT))?)?;
        let window = s.window.as_ref().expect("bagged surface has a window");
        let mut best: Option<Dose> = None;
        for d in by_height(state.tried().collect()) {
            if best.is_none_or(|b| window[d] > window[b]) {
                best = Some(d);
            }
        }
        Ok(match best {
            Some(d) => MtdResult::at(d, s.mean[d]),
            None => MtdResult::none(),
        })
    }

    fn estimates(&self, state: &TrialState, seed: u64) -> Result<DoseMatrix<Option<f64>>> {
        Ok(self
            .surface(self.bagged(state, decision_seed(seed, state, TAG_DECIDE))?)?
            .estimates())
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::designs::crm::enumerate_orderings;

    fn d(j: usize, k: usize) -> Dose {
        Dose::new(j, k)
    }

    fn design(j: usize, k: usize, b: usize) -> Bcrm {
        let ctx = BuildContext {
            grid: DoseGrid::new(j, k).unwrap(),
            phi: 0.3,
            scenario: None,
        };
        Bcrm::new(
            &BcrmParams {
                bootstraps: b,
                ..Default::default()
            },
            &ctx,
        )
        .unwrap()
    }

    #[test]
    fn single_bootstrap_equals_its_ordering_fit() {
        let b = design(2, 2, 1);
        let st = TrialState::new(b.grid)
            .record_cohort(d(1, 1), 3, 0)
            .unwrap()
            .record_cohort(d(2, 2), 3, 1)
            .unwrap();
        let seed = 5;
        let bag = b.bagged(&st, seed).unwrap();
        let boot = Bcrm::resample(&st, seeds::derive(seed, &[TAG_BOOTSTRAP, 0]));
        let o = b.ordering_from(&boot).unwrap();
        let direct = b
            .tables
            .summarize(&o, &Bcrm::counts(&st), 0.3, 0.12)
            .unwrap();
        for i in 0..4 {
            assert!((bag.mean[i] - direct.mean[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn bagging_close_to_exhaustive_ordering_reference() {
        let b = design(2, 2, 200);
        let st = TrialState::new(b.grid)
            .record_cohort(d(1, 1), 3, 0)
            .unwrap()
            .record_cohort(d(2, 1), 3, 1)
            .unwrap()
            .record_cohort(d(1, 2), 3, 0)
            .unwrap();
        let x = b.bagged(&st, 1).unwrap();
        let y = b.bagged(&st, 2).unwrap();
        for i in 0..4 {
            assert!((x.mean[i] - y.mean[i]).abs() < 0.02);
        }
        // Only the two diagonal-consistent orderings exist on 2x2.
        let counts = Bcrm::counts(&st);
        let refs: Vec<CrmSummary> = enumerate_orderings(b.grid)[2..4]
            .iter()
            .map(|o| b.tables.summarize(o, &counts, 0.3, 0.12).unwrap())
            .collect();
        for i in 0..4 {
            let lo = refs[0].mean[i].min(refs[1].mean[i]) - 1e-12;
            let hi = refs[0].mean[i].max(refs[1].mean[i]) + 1e-12;
            assert!((lo..=hi).contains(&x.mean[i]));
        }
    }

    #[test]
    fn exhaustive_reference_on_two_by_two() {
        // Exact bootstrap distribution of the ordering: enumerate every
        // multinomial resample of the 6 patient records.
        let b = design(2, 2, 400);
        let st = TrialState::new(b.grid)
            .record_cohort(d(1, 1), 2, 0)
            .unwrap()
            .record_cohort(d(2, 1), 2, 1)
            .unwrap()
            .record_cohort(d(1, 2), 2, 1)
            .unwrap();
        let records: Vec<(usize, bool)> = vec![
            (0, false),
            (0, false),
            (1, false),
            (1, true),
            (2, false),
            (2, true),
        ];
        let counts = Bcrm::counts(&st);
        let nrec = records.len();
        let mut reference = [0.0f64; 4];
        let total = nrec.pow(nrec as u32);
        for code in 0..total {
            let mut c = code;
            let mut boot = vec![(0u32, 0u32); 4];
            for _ in 0..nrec {
                let (i, tox) = records[c % nrec];
                c /= nrec;
                boot[i].0 += 1;
                boot[i].1 += u32::from(tox);
            }
            let o = b.ordering_from(&boot).unwrap();
            let s = b.tables.summarize(&o, &counts, 0.3, 0.12).unwrap();
            for i in 0..4 {
                reference[i] += s.mean[i] / total as f64;
            }
        }
        let bag = b.bagged(&st, 11).unwrap();
        for i in 0..4 {
            assert!(
                (bag.mean[i] - reference[i]).abs() < 0.02,
                "{i}: {} vs {}",
                bag.mean[i],
                reference[i]
            );
        }
    }

    #[test]
    fn startup_is_diagonal() {
        let b = design(5, 3, 10);
        let st = TrialState::new(b.grid)
            .record_cohort(d(1, 1), 3, 0)
            .unwrap();
        assert_eq!(b.decide(&st, 0).unwrap().dose(), Some(d(2, 2)));
    }

    #[test]
    fn heavy_toxicity_at_lowest_terminates() {
        let b = design(5, 3, 50);
        let st = TrialState::new(b.grid)
            .record_cohort(d(1, 1), 6, 6)
            .unwrap();
        assert!(b.decide(&st, 0).unwrap().is_terminate());
    }

    #[test]
    fn selection_only_among_administered() {
        let b = design(3, 2, 50);
        let st = TrialState::new(b.grid)
            .record_cohort(d(1, 1), 3, 1)
            .unwrap();
        assert_eq!(b.select_mtd(&st, 0).unwrap().selected, Some(d(1, 1)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn jitter_keeps_strict_order(vals in proptest::collection::vec(0.0f64..1.0, 6)) {
            let g = DoseGrid::new(3, 2).unwrap();
            let est = DoseMatrix::from_vec(g, vals).unwrap();
            let (j, eps) = jitter(&est, 1e-4);
            prop_assert!(eps > 0.0 && eps <= 1e-4);
            for a in g.doses() {
                for b in g.doses() {
                    if est[a] < est[b] {
                        prop_assert!(j[a] < j[b]);
                    }
                }
            }
            let mut seen: Vec<f64> = j.as_slice().to_vec();
            seen.sort_by(f64::total_cmp);
            prop_assert!(seen.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn bootstrap_orderings_respect_partial_order(
            cells in proptest::collection::vec((0u32..6).prop_flat_map(|n| (Just(n), 0..=n)), 6)
        ) {
            let b = design(3, 2, 1);
            let o = b.ordering_from(&cells).unwrap();
            prop_assert!(o.respects_partial_order(b.grid));
        }

        #[test]
        fn select_equals_enumeration(
            cohorts in proptest::collection::vec((1usize..=2, 1usize..=2, 0u32..=3), 1..5)
        ) {
            let b = design(2, 2, 20);
            let mut st = TrialState::new(b.grid);
            for (j, k, y) in cohorts {
                st.push_cohort(d(j, k), 3, y).unwrap();
            }
            let s = b.bagged(&st, decision_seed(9, &st, TAG_SELECT)).unwrap();
            let best = st.tried().map(|x| s.window[b.grid.index(x)]).fold(f64::NEG_INFINITY, f64::max);
            let sel = b.select_mtd(&st, 9).unwrap().selected.unwrap();
            prop_assert!(st.is_tried(sel));
            prop_assert_eq!(s.window[b.grid.index(sel)], best);
        }
    }
}
