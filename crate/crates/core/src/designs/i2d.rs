//! Two-dimensional dose finding with a parametric surface
//! `pi = 1 - a_j^alpha (1 - b_k)^(beta + gamma ln(1 - a_j))`.
//!
//! Conduct uses the no-interaction form (`gamma = 0`) unless configured
//! otherwise. Start-up walks a fixed path one patient at a time; after the
//! first DLT the model picks the agent-A level on the lowest agent-B row, and
//! moves never jump along the main diagonal.

use serde::{Deserialize, Serialize};

use super::common::{closest, closest_tried, move_reason, SequenceStartup, Surface};
use super::profile::MonoProfile;
use super::tabulated::TabulatedModel;
use super::{BuildContext, Design, DesignId};
use crate::decision::{Decision, MtdResult, Reason};
use crate::error::{Error, Result};
use crate::grid::{Dose, DoseGrid, DoseMatrix};
use crate::trial::{Phase, TrialState};

const MOVES: [(isize, isize); 6] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct I2dParams {
    pub profile: MonoProfile,
    /// Use the interaction term, integrating `gamma` over `[-5, 0)`.
    pub interaction: bool,
    pub upper: f64,
    pub resolution: usize,
}

impl Default for I2dParams {
    fn default() -> Self {
        I2dParams {
            profile: MonoProfile::default(),
            interaction: false,
            upper: 5.0,
            resolution: 61,
        }
    }
}

/// Surface value; `gamma = 0` gives the no-interaction form.
pub fn i2d_surface(a: f64, b: f64, alpha: f64, beta: f64, gamma: f64) -> f64 {
    let expo = beta + gamma * (1.0 - a).ln();
    1.0 - a.powf(alpha) * (1.0 - b).powf(expo)
}

#[derive(Debug, Clone)]
pub struct I2d {
    grid: DoseGrid,
    phi: f64,
    model: TabulatedModel,
    startup: SequenceStartup,
}

impl I2d {
    pub fn new(p: &I2dParams, ctx: &BuildContext<'_>) -> Result<Self> {
        p.profile.validate(ctx.grid)?;
        if !(p.upper > 0.0) || p.resolution == 0 {
            return Err(Error::param("i2d needs a positive box and resolution"));
        }
        let a: Vec<f64> = p.profile.p.iter().map(|x| 1.0 - x).collect();
        let b = p.profile.q.clone();
        let model = if p.interaction {
            TabulatedModel::new(
                ctx.grid,
                &[(0.0, p.upper), (0.0, p.upper), (-5.0, 0.0)],
                &[p.resolution; 3],
                |t, d| i2d_surface(a[d.j - 1], b[d.k - 1], t[0], t[1], t[2]),
            )?
        } else {
            TabulatedModel::new(
                ctx.grid,
                &[(0.0, p.upper), (0.0, p.upper)],
                &[p.resolution; 2],
                |t, d| i2d_surface(a[d.j - 1], b[d.k - 1], t[0], t[1], 0.0),
            )?
        };
        Ok(I2d {
            grid: ctx.grid,
            phi: ctx.phi,
            model,
            startup: SequenceStartup::i2d(ctx.grid),
        })
    }

    pub fn surface(&self, state: &TrialState) -> Result<Surface> {
        self.model.surface(state, self.phi)
    }
}

impl Design for I2d {
    fn id(&self) -> DesignId {
        DesignId::I2d
    }

    fn grid(&self) -> DoseGrid {
        self.grid
    }

    fn cohort_size(&self, state: &TrialState, default: u32) -> u32 {
        if self.startup.phase(state) == Phase::Startup {
            1
        } else {
            default
        }
    }

    fn phase(&self, state: &TrialState) -> Phase {
        self.startup.phase(state)
    }

    fn decide(&self, state: &TrialState, _seed: u64) -> Result<Decision> {
        if let Some(d) = self.startup.next(state) {
            return Ok(Decision::assign(d, Reason::StartUp));
        }
        let s = self.surface(state)?;
        if self.startup.ended_at(state) == Some(state.log().len()) {
            let row: Vec<Dose> = (1..=self.grid.j_levels).map(|j| Dose::new(j, 1)).collect();
            let d = closest(row, |d| s.mean[d], self.phi).expect("row is non-empty");
            return Ok(Decision::assign(d, Reason::ModelEntry));
        }
        let current = state.current().ok_or(Error::NoDosesTried)?;
        let mut cands = vec![current];
        cands.extend(self.grid.moves(current, &MOVES));
        let next = closest(cands, |d| s.mean[d], self.phi).expect("current is a candidate");
        Ok(Decision::assign(next, move_reason(current, next)))
    }

    fn select_mtd(&self, state: &TrialState, _seed: u64) -> Result<MtdResult> {
        let s = self.surface(state)?;
        Ok(match closest_tried(state, &s.mean, self.phi) {
            Some(d) => MtdResult::at(d, s.mean[d]),
            None => MtdResult::none(),
        })
    }

    fn estimates(&self, state: &TrialState, _seed: u64) -> Result<DoseMatrix<Option<f64>>> {
        Ok(self.surface(state)?.estimates())
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn d(j: usize, k: usize) -> Dose {
        Dose::new(j, k)
    }

    fn design() -> I2d {
        let ctx = BuildContext {
            grid: DoseGrid::new(5, 3).unwrap(),
            phi: 0.3,
            scenario: None,
        };
        I2d::new(
            &I2dParams {
                resolution: 25,
                ..Default::default()
            },
            &ctx,
        )
        .unwrap()
    }

    #[test]
    fn surface_examples() {
        assert_eq!(i2d_surface(1.0, 0.0, 1.0, 1.0, 0.0), 0.0);
        assert!((i2d_surface(0.9, 0.1, 1.0, 1.0, 0.0) - 0.19).abs() < 1e-12);
    }

    #[test]
    fn interaction_surface_in_unit_interval() {
        for g in [-5.0, -1.0, -1e-3] {
            for a in [0.65, 0.9] {
                let v = i2d_surface(a, 0.35, 2.0, 0.5, g);
                assert!((0.0..=1.0).contains(&v));
            }
        }
        assert_eq!(
            i2d_surface(0.8, 0.3, 1.3, 0.7, 0.0),
            1.0 - 0.8f64.powf(1.3) * 0.7f64.powf(0.7)
        );
    }

    #[test]
    fn startup_is_one_patient_at_a_time() {
        let i = design();
        let st = TrialState::new(i.grid);
        assert_eq!(i.cohort_size(&st, 3), 1);
        assert_eq!(i.decide(&st, 0).unwrap().dose(), Some(d(1, 1)));
        let st = st.record_cohort(d(1, 1), 1, 0).unwrap();
        assert_eq!(i.decide(&st, 0).unwrap().dose(), Some(d(2, 1)));
    }

    #[test]
    fn dlt_triggers_row_one_entry() {
        let i = design();
        let st = TrialState::new(i.grid)
            .record_cohort(d(1, 1), 1, 0)
            .unwrap()
            .record_cohort(d(2, 1), 1, 1)
            .unwrap();
        assert_eq!(i.cohort_size(&st, 3), 3);
        let dec = i.decide(&st, 0).unwrap();
        assert_eq!(dec.reason, Reason::ModelEntry);
        assert_eq!(dec.dose().unwrap().k, 1);
        let s = i.surface(&st).unwrap();
        let oracle = (1..=5)
            .min_by(|a, b| {
                (s.mean[d(*a, 1)] - 0.3)
                    .abs()
                    .total_cmp(&(s.mean[d(*b, 1)] - 0.3).abs())
            })
            .unwrap();
        assert_eq!(dec.dose(), Some(d(oracle, 1)));
    }

    #[test]
    fn low_toxicity_entry_goes_to_top_of_row() {
        let i = design();
        let mut st = TrialState::new(i.grid);
        for seqd in SequenceStartup::i2d(i.grid).sequence() {
            st.push_cohort(*seqd, 1, 0).unwrap();
        }
        let dec = i.decide(&st, 0).unwrap();
        assert_eq!(dec.reason, Reason::ModelEntry);
        let s = i.surface(&st).unwrap();
        assert!((1..=5).all(|j| s.mean[d(j, 1)] < 0.3));
        assert_eq!(dec.dose(), Some(d(5, 1)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn never_moves_diagonally(j in 1usize..=5, k in 1usize..=3, y in 0u32..=3) {
            let i = design();
            let st = TrialState::new(i.grid)
                .record_cohort(d(1, 1), 1, 1)
                .unwrap()
                .record_cohort(d(j, k), 3, y)
                .unwrap();
            let next = i.decide(&st, 0).unwrap().dose().unwrap();
            let (dj, dk) = (next.j as isize - j as isize, next.k as isize - k as isize);
            prop_assert!(dj.abs() + dk.abs() <= 1 || (dj == -dk && dj.abs() == 1));
        }

        #[test]
        fn surface_monotone_without_interaction(alpha in 0.05f64..5.0, beta in 0.05f64..5.0) {
            let gamma = 0.0;
            let a = [0.9, 0.8, 0.75, 0.7, 0.65];
            let b = [0.1, 0.3, 0.35];
            for j in 0..5 {
                for k in 0..3 {
                    let v = i2d_surface(a[j], b[k], alpha, beta, gamma);
                    if j + 1 < 5 {
                        prop_assert!(i2d_surface(a[j + 1], b[k], alpha, beta, gamma) >= v - 1e-12);
                    }
                    if k + 1 < 3 {
                        prop_assert!(i2d_surface(a[j], b[k + 1], alpha, beta, gamma) >= v - 1e-12);
                    }
                }
            }
        }
    }
}
