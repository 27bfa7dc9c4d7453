//! Gaussian random-walk Metropolis for small posteriors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub const DEFAULT_BURN_IN: usize = 2_000;
pub const DEFAULT_KEPT: usize = 8_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    dim: usize,
    draws: Vec<f64>,
    accepted: usize,
    proposed: usize,
}

impl Chain {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.draws.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn draws(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.draws.chunks(self.dim)
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.proposed.max(1) as f64
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for d in self.draws() {
            m.iter_mut().zip(d).for_each(|(a, b)| *a += b);
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }
}

/// Run `steps` Metropolis iterations and keep the draws after `burnin`.
pub fn rw_sampler(
    mut logpost: impl FnMut(&[f64]) -> f64,
    init: &[f64],
    steps: usize,
    burnin: usize,
    step_scales: &[f64],
    seed: u64,
) -> Result<Chain> {
    let dim = init.len();
    if dim == 0 || step_scales.len() != dim {
        return Err(Error::ShapeMismatch(
            "init and step scales must share a positive length".into(),
        ));
    }
    if steps <= burnin {
        return Err(Error::param(format!(
            "steps ({steps}) must exceed burn-in ({burnin})"
        )));
    }
    let mut x = init.to_vec();
    let mut lp = logpost(&x);
    if !lp.is_finite() {
        return Err(Error::NonFiniteInit);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prop = vec![0.0; dim];
    let mut draws = Vec::with_capacity((steps - burnin) * dim);
    let mut accepted = 0;
    for step in 0..steps {
        for ((p, xi), s) in prop.iter_mut().zip(&x).zip(step_scales) {
            let z: f64 = rng.sample(StandardNormal);
            *p = xi + s * z;
        }
        let lp_new = logpost(&prop);
        let u: f64 = rng.random();
        if lp_new.is_finite() && u.ln() < lp_new - lp {
            x.copy_from_slice(&prop);
            lp = lp_new;
            accepted += 1;
        }
        if step >= burnin {
            draws.extend_from_slice(&x);
        }
    }
    Ok(Chain {
        dim,
        draws,
        accepted,
        proposed: steps,
    })
}
