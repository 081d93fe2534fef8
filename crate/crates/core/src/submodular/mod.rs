//! Set-function machinery shared by the solvers: the [`SetFunction`] handle,
//! fractional points and the Monte-Carlo multilinear extension, the linear
//! oracle over [`Polytope`]s, and the lazy (CELF) argmax.

mod lazy;
mod polytope;

pub use lazy::{lazy_argmax, LazyArgmax};
pub use polytope::{lp_direction, Polytope};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Coverage, InfluenceMatrix, Scope};
use crate::rng;

/// A set function over the ground set `0..ground_size()`, with sets given as
/// membership masks.
pub trait SetFunction: Sync {
    fn ground_size(&self) -> usize;

    fn value(&self, members: &[bool]) -> f64;

    /// `f(S + e) - f(S)`; zero when `e` is in `S`.
    fn gain(&self, members: &[bool], e: usize) -> f64 {
        if members[e] {
            return 0.0;
        }
        let mut with = members.to_vec();
        with[e] = true;
        self.value(&with) - self.value(members)
    }

    /// Writes every element's marginal gain w.r.t. `members` into `out`.
    fn gains(&self, members: &[bool], out: &mut [f64]) {
        let base = self.value(members);
        let mut with = members.to_vec();
        for e in 0..out.len() {
            if members[e] {
                out[e] = 0.0;
            } else {
                with[e] = true;
                out[e] = self.value(&with) - base;
                with[e] = false;
            }
        }
    }
}

/// Adapts a closure over membership masks.
pub struct FnSetFunction<F> {
    n: usize,
    f: F,
}

impl<F: Fn(&[bool]) -> f64 + Sync> FnSetFunction<F> {
    pub fn new(n: usize, f: F) -> Self {
        FnSetFunction { n, f }
    }
}

impl<F: Fn(&[bool]) -> f64 + Sync> SetFunction for FnSetFunction<F> {
    fn ground_size(&self) -> usize {
        self.n
    }

    fn value(&self, members: &[bool]) -> f64 {
        (self.f)(members)
    }
}

/// Influence over one scope of an [`InfluenceMatrix`] as a set function.
#[derive(Clone, Copy)]
pub struct InfluenceFunction<'m> {
    matrix: &'m InfluenceMatrix,
    scope: Scope,
}

impl<'m> InfluenceFunction<'m> {
    pub fn new(matrix: &'m InfluenceMatrix, scope: Scope) -> Result<Self> {
        matrix.check_scope(scope)?;
        Ok(InfluenceFunction { matrix, scope })
    }

    fn coverage(&self, members: &[bool]) -> Coverage<'m> {
        let mut cov = Coverage::new(self.matrix, self.scope).expect("scope checked");
        for (s, _) in members.iter().enumerate().filter(|(_, &m)| m) {
            cov.insert(s);
        }
        cov
    }
}

impl SetFunction for InfluenceFunction<'_> {
    fn ground_size(&self) -> usize {
        self.matrix.n_slots()
    }

    fn value(&self, members: &[bool]) -> f64 {
        self.coverage(members).value()
    }

    fn gain(&self, members: &[bool], e: usize) -> f64 {
        self.coverage(members).gain(e)
    }

    fn gains(&self, members: &[bool], out: &mut [f64]) {
        let cov = self.coverage(members);
        for (e, g) in out.iter_mut().enumerate() {
            *g = cov.gain(e);
        }
    }
}

/// A point of the unit hypercube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalPoint(Vec<f64>);

impl FractionalPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some((i, x)) = coords.iter().enumerate().find(|(_, x)| !(0.0..=1.0).contains(*x)) {
            return Err(Error::invalid(format!("coordinate {i} = {x} outside [0, 1]")));
        }
        Ok(FractionalPoint(coords))
    }

    pub fn zeros(n: usize) -> Self {
        FractionalPoint(vec![0.0; n])
    }

    /// Indicator vector of `set` in dimension `n`.
    pub fn indicator(n: usize, set: &[usize]) -> Self {
        let mut x = vec![0.0; n];
        for &s in set {
            x[s] = 1.0;
        }
        FractionalPoint(x)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub(crate) fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn is_integral(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0 || x == 1.0)
    }

    /// Mask of coordinates equal to 1.
    pub fn support(&self) -> Vec<bool> {
        self.0.iter().map(|&x| x == 1.0).collect()
    }

    /// Draws a set containing each element independently with probability
    /// `x_e`. Consumes exactly one uniform draw per coordinate.
    pub fn sample(&self, rng: &mut rng::Rng) -> Vec<bool> {
        self.0.iter().map(|&x| rng.gen::<f64>() < x).collect()
    }
}

fn check_dims(f: &impl SetFunction, x: &FractionalPoint, samples: usize) -> Result<()> {
    if samples == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    if x.len() != f.ground_size() {
        return Err(Error::invalid(format!(
            "point has dimension {}, function has ground set {}",
            x.len(),
            f.ground_size()
        )));
    }
    Ok(())
}

/// Monte-Carlo estimate of the multilinear extension `F(x)`.
///
/// Sample `i` uses RNG stream `i` of `seed` and the mean is reduced in sample
/// order, so the result does not depend on the worker count. Integral points
/// are evaluated exactly without sampling.
pub fn multilinear_estimate(f: &impl SetFunction, x: &FractionalPoint, samples: usize, seed: u64) -> Result<f64> {
    check_dims(f, x, samples)?;
    if x.is_integral() {
        return Ok(f.value(&x.support()));
    }
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| f.value(&x.sample(&mut rng::stream(seed, i as u64))))
        .collect();
    Ok(values.iter().sum::<f64>() / samples as f64)
}

/// Estimates `w_e = F(x v 1_e) - F(x)` for every coordinate, reusing each
/// sampled set for all coordinates (common random numbers). Exact at integral
/// points.
pub fn estimate_gains(f: &impl SetFunction, x: &FractionalPoint, samples: usize, seed: u64) -> Result<Vec<f64>> {
    check_dims(f, x, samples)?;
    let n = x.len();
    if x.is_integral() {
        let mut out = vec![0.0; n];
        f.gains(&x.support(), &mut out);
        return Ok(out);
    }
    let per_sample: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let set = x.sample(&mut rng::stream(seed, i as u64));
            let mut out = vec![0.0; n];
            f.gains(&set, &mut out);
            out
        })
        .collect();
    let mut total = vec![0.0; n];
    for g in &per_sample {
        for (t, v) in total.iter_mut().zip(g) {
            *t += v;
        }
    }
    let scale = 1.0 / samples as f64;
    total.iter_mut().for_each(|t| *t *= scale);
    Ok(total)
}
