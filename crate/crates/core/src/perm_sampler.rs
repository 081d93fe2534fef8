//! Sampling-based allocator for the disjoint variant.
//!
//! Each sample fixes a product order and a slot tie-break order. Products are
//! served in that order: a product repeatedly takes the affordable, still
//! unassigned slot with the largest marginal gain until its demand is met or
//! nothing affordable is left, in which case the sample is infeasible. The
//! cheapest feasible sample wins.
//!
//! How many samples are enough follows from Hoeffding's inequality with costs
//! bounded by `[0, w(BS)]`: see [`required_samples`].

use rand::seq::SliceRandom;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::model::{Allocation, ProblemInstance, Selection, Variant, FEASIBILITY_TOL};
use crate::rng;
use crate::submodular::LazyArgmax;

/// Samples are evaluated in blocks of this size; only the block winners and
/// per-sample summaries are retained.
const BLOCK: usize = 256;

/// `ceil(ln(2/delta) * w_total^2 / (2 eps^2 wa^2))`, at least 1. Ratios within
/// `1e-9` of an integer are snapped to it before the ceiling.
pub fn required_samples(epsilon: f64, delta: f64, w_total: f64, wa_estimate: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon <= 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("need 0 < epsilon <= 1 and 0 < delta < 1 (got {epsilon}, {delta})")));
    }
    if !(w_total > 0.0) || !w_total.is_finite() {
        return Err(Error::invalid(format!("total cost must be positive, got {w_total}")));
    }
    if !(wa_estimate > 0.0) || !wa_estimate.is_finite() {
        return Err(Error::invalid(format!(
            "best-cost estimate must be positive for the sample bound, got {wa_estimate}"
        )));
    }
    let bound = (2.0 / delta).ln() * w_total * w_total / (2.0 * epsilon * epsilon * wa_estimate * wa_estimate);
    let snapped = if (bound - bound.round()).abs() < 1e-9 { bound.round() } else { bound.ceil() };
    Ok((snapped as usize).max(1))
}

/// The relative error `eps` that `n` samples certify at confidence `1 - delta`.
pub fn achieved_epsilon(n: usize, delta: f64, w_total: f64, wa: f64) -> f64 {
    (w_total / wa) * ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

/// Sample-size parameters echoed with adaptive runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub n_samples: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub w_total: f64,
    pub best_cost_estimate: Option<f64>,
    /// Relative error certified by `n_samples` given the final best cost.
    pub achieved_epsilon: Option<f64>,
}

/// Result of one greedy fill.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// Per-product slot sets, each sorted.
    pub sets: Vec<Vec<usize>>,
    pub cost: f64,
    /// First product (instance index) whose demand was not met; `None` when
    /// the candidate is feasible.
    pub first_unmet: Option<usize>,
    pub satisfied: usize,
}

impl Candidate {
    pub fn is_feasible(&self) -> bool {
        self.first_unmet.is_none()
    }

    fn slot_key(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.sets.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }
}

/// Serves products in `order`, each greedily by marginal gain among
/// affordable unassigned slots. Gain ties follow a slot shuffle seeded by
/// `tie_seed`. Stops at the first product whose demand cannot be met.
pub fn greedy_fill_for_order(instance: &ProblemInstance, order: &[usize], tie_seed: u64) -> Result<Candidate> {
    instance.expect_variant(Variant::Disjoint)?;
    let h = instance.n_products();
    let mut seen = vec![false; h];
    if order.len() != h || order.iter().any(|&j| j >= h || std::mem::replace(&mut seen[j], true)) {
        return Err(Error::invalid(format!("{order:?} is not a permutation of the {h} products")));
    }
    let n = instance.n_slots();
    let mut shuffled: Vec<usize> = (0..n).collect();
    shuffled.shuffle(&mut rng::stream(tie_seed, 0));
    let mut rank = vec![0usize; n];
    for (r, &s) in shuffled.iter().enumerate() {
        rank[s] = r;
    }

    let mut assigned = vec![false; n];
    let mut sets = vec![Vec::new(); h];
    let mut cost = 0.0;
    let mut first_unmet = None;
    for &j in order {
        let demand = instance.products[j].demand;
        let mut left = instance.budget(j);
        let mut cov = instance.coverage(j);
        let mut queue = LazyArgmax::with_ranks((0..n).filter(|&s| !assigned[s]), |s| rank[s]);
        while left > 0.0 && cov.value() < demand - FEASIBILITY_TOL {
            let costs = &instance.costs;
            let Some((s, _)) = queue.pop(|e| cov.gain(e), |e| !assigned[e] && costs[e] <= left) else {
                break;
            };
            cov.insert(s);
            assigned[s] = true;
            sets[j].push(s);
            left -= costs[s];
            cost += costs[s];
            queue.invalidate();
        }
        if cov.value() < demand - FEASIBILITY_TOL {
            first_unmet = Some(j);
            break;
        }
    }
    sets.iter_mut().for_each(|s| s.sort_unstable());
    let satisfied = (0..h)
        .filter(|&j| {
            let v = instance.product_value(j, &sets[j]).unwrap_or(0.0);
            v >= instance.products[j].demand - FEASIBILITY_TOL
        })
        .count();
    Ok(Candidate { sets, cost, first_unmet, satisfied })
}

/// Product order and tie seed of sample `k`.
pub fn draw_sample(n_products: usize, seed: u64, k: u64) -> (Vec<usize>, u64) {
    let mut rng = rng::stream(seed, k);
    let mut order: Vec<usize> = (0..n_products).collect();
    order.shuffle(&mut rng);
    (order, rng.next_u64())
}

pub fn evaluate_sample(instance: &ProblemInstance, seed: u64, k: u64) -> Result<Candidate> {
    let (order, tie_seed) = draw_sample(instance.n_products(), seed, k);
    greedy_fill_for_order(instance, &order, tie_seed)
}

/// Orders candidates: feasible first, then more satisfied products, lower
/// cost, lexicographically smaller sorted slot ids, earlier sample.
fn better(a: &(u64, Candidate), b: &(u64, Candidate)) -> Ordering {
    let (ia, ca) = a;
    let (ib, cb) = b;
    cb.is_feasible()
        .cmp(&ca.is_feasible())
        .then(cb.satisfied.cmp(&ca.satisfied))
        .then(ca.cost.total_cmp(&cb.cost))
        .then_with(|| ca.slot_key().cmp(&cb.slot_key()))
        .then(ia.cmp(ib))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledOutcome {
    /// The cheapest feasible candidate, or the best partial one (most
    /// satisfied products, then cheapest) when none is feasible.
    pub allocation: Allocation,
    pub feasible_found: bool,
    pub n_samples: usize,
    pub n_feasible: usize,
    pub best_sample: u64,
    /// Per sample, the first product left unmet (`None` = feasible sample).
    pub first_unmet: Vec<Option<usize>>,
    pub plan: Option<SamplePlan>,
}

struct Tally {
    best: Option<(u64, Candidate)>,
    first_unmet: Vec<Option<usize>>,
}

fn run_range(instance: &ProblemInstance, seed: u64, range: std::ops::Range<u64>, tally: &mut Tally) -> Result<()> {
    let mut start = range.start;
    while start < range.end {
        let end = (start + BLOCK as u64).min(range.end);
        let block: Vec<(u64, Candidate)> = (start..end)
            .into_par_iter()
            .map(|k| evaluate_sample(instance, seed, k).map(|c| (k, c)))
            .collect::<Result<_>>()?;
        for (k, c) in block {
            tally.first_unmet.push(c.first_unmet);
            let replace = match &tally.best {
                None => true,
                Some(best) => better(&(k, c.clone()), best) == Ordering::Less,
            };
            if replace {
                tally.best = Some((k, c));
            }
        }
        start = end;
    }
    Ok(())
}

fn finish(instance: &ProblemInstance, tally: Tally, plan: Option<SamplePlan>) -> Result<SampledOutcome> {
    let (best_sample, best) = tally.best.expect("at least one sample");
    let allocation = Allocation::evaluate(instance, Selection::Disjoint { sets: best.sets.clone() }, 1.0)?;
    Ok(SampledOutcome {
        feasible_found: best.is_feasible(),
        n_samples: tally.first_unmet.len(),
        n_feasible: tally.first_unmet.iter().filter(|u| u.is_none()).count(),
        best_sample,
        first_unmet: tally.first_unmet,
        allocation,
        plan,
    })
}

/// Evaluates samples `0..n_samples` of `seed` and keeps the cheapest feasible
/// candidate (ties: smaller sorted slot-id sequence, then earlier sample).
pub fn solve_disjoint_sampled(instance: &ProblemInstance, n_samples: usize, seed: u64) -> Result<SampledOutcome> {
    instance.expect_variant(Variant::Disjoint)?;
    if n_samples == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    let mut tally = Tally { best: None, first_unmet: Vec::with_capacity(n_samples) };
    run_range(instance, seed, 0..n_samples as u64, &mut tally)?;
    finish(instance, tally, None)
}

/// Adaptive sample size: a pilot batch estimates the best cost `W^A`, the
/// Hoeffding bound for `(epsilon, delta)` is computed from it, and samples are
/// topped up to that bound (capped at `max_samples`). Without a feasible
/// pilot candidate the run tops up to `max_samples`.
pub fn solve_disjoint_adaptive(
    instance: &ProblemInstance,
    epsilon: f64,
    delta: f64,
    pilot: usize,
    max_samples: usize,
    seed: u64,
) -> Result<SampledOutcome> {
    instance.expect_variant(Variant::Disjoint)?;
    if pilot == 0 || max_samples < pilot {
        return Err(Error::invalid(format!("need 1 <= pilot <= max_samples (got {pilot}, {max_samples})")));
    }
    let w_total = instance.total_cost();
    let mut tally = Tally { best: None, first_unmet: Vec::new() };
    run_range(instance, seed, 0..pilot as u64, &mut tally)?;
    let pilot_best = tally.best.as_ref().filter(|(_, c)| c.is_feasible()).map(|(_, c)| c.cost);
    let target = match pilot_best {
        Some(wa) if wa > 0.0 && w_total > 0.0 => required_samples(epsilon, delta, w_total, wa)?.min(max_samples),
        Some(_) => pilot,
        None => max_samples,
    };
    if target > pilot {
        run_range(instance, seed, pilot as u64..target as u64, &mut tally)?;
    }
    let final_best = tally.best.as_ref().filter(|(_, c)| c.is_feasible()).map(|(_, c)| c.cost);
    let n = tally.first_unmet.len();
    let plan = SamplePlan {
        n_samples: n,
        epsilon,
        delta,
        w_total,
        best_cost_estimate: pilot_best,
        achieved_epsilon: final_best.filter(|&wa| wa > 0.0).map(|wa| achieved_epsilon(n, delta, w_total, wa)),
    };
    finish(instance, tally, Some(plan))
}
