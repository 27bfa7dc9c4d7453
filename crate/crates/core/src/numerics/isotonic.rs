//! Weighted isotonic regression on the dose-combination partial order.
//!
//! Fits are exact: the minimum-lower-set algorithm repeatedly pools the lower
//! set (of the remaining cells) with the smallest weighted mean. Lower sets of
//! a `J x K` grid are staircases, so they can be enumerated once per grid.

use crate::error::{Error, Result};
use crate::grid::{DoseGrid, DoseMatrix};

const MAX_STAIRCASES: usize = 1_000_000;

/// Precomputed lower sets of a grid; reuse across fits on the same grid.
#[derive(Debug, Clone)]
pub struct IsotonicSolver {
    grid: DoseGrid,
    /// Row heights `h_1 >= ... >= h_K`: row `k` holds agent-A levels `1..=h_k`.
    stairs: Vec<Vec<usize>>,
}

impl IsotonicSolver {
    pub fn new(grid: DoseGrid) -> Result<Self> {
        let mut count = 1usize;
        for i in 0..grid.k_levels.min(grid.j_levels) {
            count = count * (grid.j_levels + grid.k_levels - i) / (i + 1);
            if count > MAX_STAIRCASES {
                return Err(Error::param(format!(
                    "{}x{} grid is too large for exact isotonic regression",
                    grid.j_levels, grid.k_levels
                )));
            }
        }
        let mut stairs = Vec::with_capacity(count);
        let mut h = vec![0usize; grid.k_levels];
        push_stairs(grid.j_levels, 0, &mut h, &mut stairs);
        Ok(IsotonicSolver { grid, stairs })
    }

    pub fn grid(&self) -> DoseGrid {
        self.grid
    }

    /// Fit over the cells where `include` holds; excluded cells come back `None`.
    pub fn fit_subset(
        &self,
        values: &DoseMatrix<f64>,
        weights: &DoseMatrix<f64>,
        include: &[bool],
    ) -> Result<DoseMatrix<Option<f64>>> {
        let g = self.grid;
        if values.grid() != g || weights.grid() != g || include.len() != g.len() {
            return Err(Error::ShapeMismatch(
                "isotonic inputs disagree with the grid".into(),
            ));
        }
        for ((v, w), inc) in values
            .as_slice()
            .iter()
            .zip(weights.as_slice())
            .zip(include)
        {
            if *inc && !(*w > 0.0 && w.is_finite()) {
                return Err(Error::param(format!(
                    "isotonic weights must be positive, got {w}"
                )));
            }
            if *inc && !v.is_finite() {
                return Err(Error::param("isotonic values must be finite"));
            }
        }
        let (jl, kl) = (g.j_levels, g.k_levels);
        let vals = values.as_slice();
        let wts = weights.as_slice();
        let mut remaining: Vec<bool> = include.to_vec();
        let mut left = remaining.iter().filter(|r| **r).count();
        let mut out = vec![None; g.len()];
        // Row prefix sums over remaining cells: (sum w*v, sum w, count).
        let mut pre = vec![(0.0f64, 0.0f64, 0usize); kl * (jl + 1)];
        while left > 0 {
            for k in 0..kl {
                let base = k * (jl + 1);
                pre[base] = (0.0, 0.0, 0);
                for j in 0..jl {
                    let i = k * jl + j;
                    let (mut s, mut w, mut c) = pre[base + j];
                    if remaining[i] {
                        s += wts[i] * vals[i];
                        w += wts[i];
                        c += 1;
                    }
                    pre[base + j + 1] = (s, w, c);
                }
            }
            let mut best: Option<(f64, usize, usize)> = None;
            for (si, h) in self.stairs.iter().enumerate() {
                let (mut s, mut w, mut c) = (0.0, 0.0, 0usize);
                for (k, &hk) in h.iter().enumerate() {
                    let p = pre[k * (jl + 1) + hk];
                    s += p.0;
                    w += p.1;
                    c += p.2;
                }
                if c == 0 {
                    continue;
                }
                let mean = s / w;
                best = match best {
                    None => Some((mean, c, si)),
                    Some((bm, bc, bi)) => {
                        let tol = 1e-12 * bm.abs().max(1.0);
                        if mean < bm - tol || ((mean - bm).abs() <= tol && c > bc) {
                            Some((mean, c, si))
                        } else {
                            Some((bm, bc, bi))
                        }
                    }
                };
            }
            let (mean, _, si) = best.expect("a non-empty remainder has a non-empty lower set");
            for (k, &hk) in self.stairs[si].iter().enumerate() {
                for j in 0..hk {
                    let i = k * jl + j;
                    if remaining[i] {
                        remaining[i] = false;
                        out[i] = Some(mean);
                        left -= 1;
                    }
                }
            }
        }
        DoseMatrix::from_vec(g, out)
    }

    pub fn fit(
        &self,
        values: &DoseMatrix<f64>,
        weights: &DoseMatrix<f64>,
    ) -> Result<DoseMatrix<f64>> {
        let all = vec![true; self.grid.len()];
        Ok(self
            .fit_subset(values, weights, &all)?
            .map(|v| v.expect("every cell included")))
    }
}

fn push_stairs(cap: usize, row: usize, h: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if row == h.len() {
        out.push(h.clone());
        return;
    }
    for v in 0..=cap {
        h[row] = v;
        push_stairs(v, row + 1, h, out);
    }
}

/// Weighted least-squares projection onto matrices non-decreasing along every
/// row and column.
pub fn pava_2d(values: &DoseMatrix<f64>, weights: &DoseMatrix<f64>) -> Result<DoseMatrix<f64>> {
    if values.grid() != weights.grid() {
        return Err(Error::ShapeMismatch(
            "values and weights differ in shape".into(),
        ));
    }
    IsotonicSolver::new(values.grid())?.fit(values, weights)
}

/// True when `m` is non-decreasing along rows and columns within `tol`.
pub fn is_isotonic(m: &DoseMatrix<f64>, tol: f64) -> bool {
    let g = m.grid();
    g.doses().all(|d| {
        [d.offset(1, 0), d.offset(0, 1)]
            .into_iter()
            .flatten()
            .filter(|n| g.contains(*n))
            .all(|n| m[n] >= m[d] - tol)
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::grid::Dose;

    /// 1-D weighted pool-adjacent-violators.
    fn pava_1d(v: &[f64], w: &[f64]) -> Vec<f64> {
        let mut blocks: Vec<(f64, f64, usize)> = Vec::new();
        for (&x, &wt) in v.iter().zip(w) {
            blocks.push((x, wt, 1));
            while blocks.len() > 1 && blocks[blocks.len() - 2].0 > blocks[blocks.len() - 1].0 {
                let (m2, w2, c2) = blocks.pop().unwrap();
                let (m1, w1, c1) = blocks.pop().unwrap();
                blocks.push(((m1 * w1 + m2 * w2) / (w1 + w2), w1 + w2, c1 + c2));
            }
        }
        blocks
            .iter()
            .flat_map(|&(m, _, c)| std::iter::repeat_n(m, c))
            .collect()
    }

    /// Independent oracle: Dykstra's alternating projections onto the row- and
    /// column-monotone cones, which converges to the projection on their
    /// intersection.
    pub(crate) fn dykstra(values: &DoseMatrix<f64>, weights: &DoseMatrix<f64>) -> DoseMatrix<f64> {
        let g = values.grid();
        let (jl, kl) = (g.j_levels, g.k_levels);
        let w = weights.as_slice();
        let mut x = values.as_slice().to_vec();
        let mut p = vec![0.0; x.len()];
        let mut q = vec![0.0; x.len()];
        for _ in 0..20_000 {
            let prev = x.clone();
            let y_in: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + b).collect();
            let mut y = vec![0.0; x.len()];
            for k in 0..kl {
                let r = pava_1d(&y_in[k * jl..(k + 1) * jl], &w[k * jl..(k + 1) * jl]);
                y[k * jl..(k + 1) * jl].copy_from_slice(&r);
            }
            p = y_in.iter().zip(&y).map(|(a, b)| a - b).collect();
            let z_in: Vec<f64> = y.iter().zip(&q).map(|(a, b)| a + b).collect();
            let mut z = vec![0.0; x.len()];
            for j in 0..jl {
                let col: Vec<f64> = (0..kl).map(|k| z_in[k * jl + j]).collect();
                let cw: Vec<f64> = (0..kl).map(|k| w[k * jl + j]).collect();
                for (k, val) in pava_1d(&col, &cw).into_iter().enumerate() {
                    z[k * jl + j] = val;
                }
            }
            q = z_in.iter().zip(&z).map(|(a, b)| a - b).collect();
            x = z;
            let change = x
                .iter()
                .zip(&prev)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if change < 1e-14 {
                break;
            }
        }
        DoseMatrix::from_vec(g, x).unwrap()
    }

    fn objective(x: &DoseMatrix<f64>, v: &DoseMatrix<f64>, w: &DoseMatrix<f64>) -> f64 {
        x.as_slice()
            .iter()
            .zip(v.as_slice())
            .zip(w.as_slice())
            .map(|((a, b), c)| c * (a - b) * (a - b))
            .sum()
    }

    fn random_problem(
        rng: &mut ChaCha8Rng,
        jl: usize,
        kl: usize,
    ) -> (DoseMatrix<f64>, DoseMatrix<f64>) {
        let g = DoseGrid::new(jl, kl).unwrap();
        let v = DoseMatrix::from_fn(g, |_| rng.random::<f64>());
        let w = DoseMatrix::from_fn(g, |_| rng.random_range(0.5..5.0));
        (v, w)
    }

    #[test]
    fn isotonic_input_unchanged() {
        let g = DoseGrid::new(3, 2).unwrap();
        let v = DoseMatrix::from_vec(g, vec![0.1, 0.2, 0.3, 0.2, 0.4, 0.5]).unwrap();
        let w = DoseMatrix::filled(g, 1.0);
        assert_eq!(pava_2d(&v, &w).unwrap(), v);
    }

    #[test]
    fn two_violators_pool() {
        let g = DoseGrid::new(2, 1).unwrap();
        let v = DoseMatrix::from_vec(g, vec![0.4, 0.2]).unwrap();
        let fit = pava_2d(&v, &DoseMatrix::filled(g, 1.0)).unwrap();
        for x in fit.as_slice() {
            assert!((x - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_non_positive_weight() {
        let g = DoseGrid::new(2, 1).unwrap();
        let v = DoseMatrix::filled(g, 0.5);
        let w = DoseMatrix::from_vec(g, vec![1.0, 0.0]).unwrap();
        assert!(pava_2d(&v, &w).is_err());
    }

    #[test]
    fn matches_dykstra_and_beats_mesh_on_small_grids() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (jl, kl, steps, mesh_checks) in [(2, 2, 21, 40), (3, 2, 9, 5), (2, 3, 9, 5)] {
            for rep in 0..40 {
                let (v, w) = random_problem(&mut rng, jl, kl);
                let fit = pava_2d(&v, &w).unwrap();
                let oracle = dykstra(&v, &w);
                for (a, b) in fit.as_slice().iter().zip(oracle.as_slice()) {
                    assert!((a - b).abs() < 1e-6, "{fit:?} vs {oracle:?}");
                }
                if rep >= mesh_checks {
                    continue;
                }
                // No isotonic matrix on the candidate mesh does better.
                let best = objective(&fit, &v, &w);
                let g = v.grid();
                let n = g.len();
                let mut idx = vec![0usize; n];
                'mesh: loop {
                    let cand = DoseMatrix::from_vec(
                        g,
                        idx.iter().map(|&i| i as f64 / (steps - 1) as f64).collect(),
                    )
                    .unwrap();
                    if is_isotonic(&cand, 0.0) {
                        assert!(objective(&cand, &v, &w) >= best - 1e-12);
                    }
                    for slot in idx.iter_mut() {
                        *slot += 1;
                        if *slot < steps {
                            continue 'mesh;
                        }
                        *slot = 0;
                    }
                    break;
                }
            }
        }
    }

    #[test]
    fn cyclic_row_column_passes_are_not_the_projection() {
        // Plain alternating 1-D passes stop at a feasible point that is
        // farther from the data than the true projection.
        let g = DoseGrid::new(2, 2).unwrap();
        let v = DoseMatrix::from_vec(g, vec![0.9, 0.0, 0.0, 0.5]).unwrap();
        let w = DoseMatrix::filled(g, 1.0);
        let mut cyc = v.as_slice().to_vec();
        for _ in 0..100 {
            for k in 0..2 {
                let r = pava_1d(&cyc[2 * k..2 * k + 2], &[1.0, 1.0]);
                cyc[2 * k..2 * k + 2].copy_from_slice(&r);
            }
            for j in 0..2 {
                let c = pava_1d(&[cyc[j], cyc[2 + j]], &[1.0, 1.0]);
                cyc[j] = c[0];
                cyc[2 + j] = c[1];
            }
        }
        let cyc = DoseMatrix::from_vec(g, cyc).unwrap();
        let exact = pava_2d(&v, &w).unwrap();
        for (a, b) in exact.as_slice().iter().zip([0.3, 0.3, 0.3, 0.5]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(objective(&cyc, &v, &w) > objective(&exact, &v, &w) + 0.1);
        let oracle = dykstra(&v, &w);
        for (a, b) in exact.as_slice().iter().zip(oracle.as_slice()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn subset_fit_respects_induced_order() {
        let g = DoseGrid::new(3, 3).unwrap();
        let solver = IsotonicSolver::new(g).unwrap();
        let v = DoseMatrix::from_fn(g, |d| if d == Dose::new(1, 1) { 0.6 } else { 0.2 });
        let w = DoseMatrix::filled(g, 1.0);
        let mut include = vec![false; g.len()];
        include[g.index(Dose::new(1, 1))] = true;
        include[g.index(Dose::new(3, 3))] = true;
        let fit = solver.fit_subset(&v, &w, &include).unwrap();
        assert_eq!(fit[Dose::new(2, 1)], None);
        assert!((fit[Dose::new(1, 1)].unwrap() - 0.4).abs() < 1e-15);
        assert!((fit[Dose::new(3, 3)].unwrap() - 0.4).abs() < 1e-15);
    }

    fn problem() -> impl Strategy<Value = (DoseMatrix<f64>, DoseMatrix<f64>)> {
        (1usize..=4, 1usize..=3).prop_flat_map(|(jl, kl)| {
            let g = DoseGrid::new(jl, kl).unwrap();
            (
                proptest::collection::vec(0.0f64..1.0, g.len()),
                proptest::collection::vec(0.1f64..10.0, g.len()),
            )
                .prop_map(move |(v, w)| {
                    (
                        DoseMatrix::from_vec(g, v).unwrap(),
                        DoseMatrix::from_vec(g, w).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn monotone_idempotent_and_mean_preserving((v, w) in problem()) {
            let fit = pava_2d(&v, &w).unwrap();
            prop_assert!(is_isotonic(&fit, 1e-12));
            let again = pava_2d(&fit, &w).unwrap();
            for (a, b) in fit.as_slice().iter().zip(again.as_slice()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            // Each pooled block (cells sharing a fitted value) keeps its weighted mean.
            let mut seen: Vec<f64> = Vec::new();
            for &x in fit.as_slice() {
                if seen.iter().any(|s| (s - x).abs() < 1e-13) {
                    continue;
                }
                seen.push(x);
                let (mut s, mut t) = (0.0, 0.0);
                for ((f, vv), ww) in fit.as_slice().iter().zip(v.as_slice()).zip(w.as_slice()) {
                    if (f - x).abs() < 1e-13 {
                        s += ww * vv;
                        t += ww;
                    }
                }
                prop_assert!((s / t - x).abs() < 1e-9);
            }
        }
    }
}
