//! Continuous greedy ascent of the multilinear extension inside a polytope.
//!
//! Starting from `y = 0`, each of `steps` rounds estimates the coordinate
//! gains `w_e = F(y v 1_e) - F(y)`, asks the linear oracle for the best
//! vertex `I` of the polytope and moves `y_e += delta * I_e * (1 - y_e)` with
//! `delta = T / steps`. The textbook step size `T / ceil(n^5 T)` is far too
//! small to run, so the step count is a parameter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::submodular::{estimate_gains, lp_direction, FractionalPoint, Polytope, SetFunction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CGConfig {
    /// Stopping time `T`.
    pub horizon: f64,
    pub steps: usize,
    /// Sampled sets per gain estimate.
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for CGConfig {
    fn default() -> Self {
        CGConfig { horizon: 1.0, steps: 100, mc_samples: 64, seed: 0 }
    }
}

impl CGConfig {
    fn check(&self) -> Result<()> {
        if !(self.horizon > 0.0) || self.steps == 0 || self.mc_samples == 0 {
            return Err(Error::invalid(format!(
                "continuous greedy needs T > 0, steps >= 1 and mc_samples >= 1 (got {self:?})"
            )));
        }
        Ok(())
    }
}

/// Runs continuous greedy and returns `y(T)`.
pub fn continuous_greedy(f: &impl SetFunction, polytope: &Polytope, cfg: &CGConfig) -> Result<FractionalPoint> {
    continuous_greedy_observed(f, polytope, cfg, |_, _| {})
}

/// [`continuous_greedy`] calling `observe(step, &y)` after every update.
pub fn continuous_greedy_observed(
    f: &impl SetFunction,
    polytope: &Polytope,
    cfg: &CGConfig,
    mut observe: impl FnMut(usize, &FractionalPoint),
) -> Result<FractionalPoint> {
    cfg.check()?;
    let n = f.ground_size();
    if polytope.dimension() != n {
        return Err(Error::invalid(format!(
            "polytope dimension {} != ground set size {n}",
            polytope.dimension()
        )));
    }
    let delta = cfg.horizon / cfg.steps as f64;
    let mut y = FractionalPoint::zeros(n);
    for step in 0..cfg.steps {
        let weights = estimate_gains(f, &y, cfg.mc_samples, rng::derive(cfg.seed, step as u64))?;
        let direction = lp_direction(&weights, polytope)?;
        for (ye, &ie) in y.coords_mut().iter_mut().zip(direction.coords()) {
            if ie > 0.0 {
                *ye = (*ye + delta * ie * (1.0 - *ye)).min(1.0);
            }
        }
        observe(step, &y);
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::submodular::FnSetFunction;

    #[test]
    fn null_objective_stays_at_origin() {
        let f = FnSetFunction::new(4, |_: &[bool]| 0.0);
        let p = Polytope::Cardinality { k: 2, n: 4 };
        let y = continuous_greedy(&f, &p, &CGConfig::default()).unwrap();
        assert_eq!(y.coords(), &[0.0; 4]);
    }

    #[test]
    fn single_element_follows_closed_form() {
        // y <- y + 0.01 (1 - y), 100 times: 1 - 0.99^100.
        let f = FnSetFunction::new(1, |m: &[bool]| if m[0] { 1.0 } else { 0.0 });
        let p = Polytope::Cardinality { k: 1, n: 1 };
        let y = continuous_greedy(&f, &p, &CGConfig::default()).unwrap();
        let expected = 1.0 - 0.99f64.powi(100);
        assert!((y.coords()[0] - expected).abs() < 1e-12);
        assert!((y.coords()[0] - 0.634).abs() < 1e-3);
    }

    #[test]
    fn coordinates_monotone_and_bounded() {
        let f = FnSetFunction::new(5, |m: &[bool]| {
            let a = m[0] || m[1];
            let b = m[2] || m[3];
            (a as u8 + b as u8) as f64 + if m[4] { 0.5 } else { 0.0 }
        });
        let p = Polytope::Cardinality { k: 2, n: 5 };
        let cfg = CGConfig { mc_samples: 8, seed: 3, ..CGConfig::default() };
        let mut prev = vec![0.0; 5];
        let y = continuous_greedy_observed(&f, &p, &cfg, |_, y| {
            for (a, b) in prev.iter().zip(y.coords()) {
                assert!(b >= a && *b <= 1.0);
            }
            prev = y.coords().to_vec();
        })
        .unwrap();
        assert!(p.contains(y.coords(), 1e-9));
    }

    #[test]
    fn rejects_bad_config() {
        let f = FnSetFunction::new(1, |_: &[bool]| 0.0);
        let p = Polytope::Cardinality { k: 1, n: 1 };
        let cfg = CGConfig { steps: 0, ..CGConfig::default() };
        assert!(continuous_greedy(&f, &p, &cfg).is_err());
        let q = Polytope::Cardinality { k: 1, n: 2 };
        assert!(continuous_greedy(&f, &q, &CGConfig::default()).is_err());
    }
}
