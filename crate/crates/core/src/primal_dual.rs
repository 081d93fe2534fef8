//! Primal-dual greedy for the disjoint variant.
//!
//! Every unmet product `j` carries a dual weight `lambda_j = 1 / sigma_j`.
//! Each round assigns the (slot, product) pair maximizing
//! `rho = lambda_j * gain_j(s) / w(s)` over unassigned slots the product can
//! still afford; a product's weight drops to zero once its demand is met.
//! The loop ends when every demand is met, no affordable pair remains, or the
//! best gain is zero, in which case the partial allocation is returned.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::model::{Allocation, Coverage, ProblemInstance, Selection, Variant, FEASIBILITY_TOL};
use crate::submodular::LazyArgmax;

/// Primal and dual state of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub lambda: Vec<f64>,
    pub remaining_budget: Vec<f64>,
    pub assigned: Vec<bool>,
    pub sets: Vec<Vec<usize>>,
}

/// One assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdStep {
    pub slot: usize,
    pub product: usize,
    pub rho: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdOutcome {
    pub allocation: Allocation,
    pub iterations: usize,
    pub trace: Vec<PdStep>,
    pub state: DualState,
}

struct Pick {
    slot: usize,
    product: usize,
    rho: f64,
    gain: f64,
}

impl Pick {
    // Larger rho, then larger gain, then smaller slot, then smaller product.
    fn beats(&self, other: &Pick) -> bool {
        self.rho
            .total_cmp(&other.rho)
            .then(self.gain.total_cmp(&other.gain))
            .then(other.slot.cmp(&self.slot))
            .then(other.product.cmp(&self.product))
            == Ordering::Greater
    }
}

/// Runs the primal-dual greedy. `seed_for_ties` is accepted for parity with
/// the randomized solvers; ties are broken deterministically and it is unused.
pub fn solve_disjoint_pd(instance: &ProblemInstance, seed_for_ties: u64) -> Result<PdOutcome> {
    let _ = seed_for_ties;
    instance.expect_variant(Variant::Disjoint)?;
    let costs = &instance.costs;
    if let Some(s) = costs.iter().position(|&c| c <= 0.0) {
        return Err(Error::ZeroCostSlot(s));
    }
    let n = instance.n_slots();
    let h = instance.n_products();

    // Within one product, equal ratios mean the costlier slot has the larger
    // gain, so (cost desc, id asc) is the static tie order.
    let mut by_cost: Vec<usize> = (0..n).collect();
    by_cost.sort_by(|&a, &b| costs[b].total_cmp(&costs[a]).then(a.cmp(&b)));
    let mut rank = vec![0; n];
    for (r, &s) in by_cost.iter().enumerate() {
        rank[s] = r;
    }

    let mut state = DualState {
        lambda: instance
            .products
            .iter()
            .map(|p| if p.demand > FEASIBILITY_TOL { 1.0 / p.demand } else { 0.0 })
            .collect(),
        remaining_budget: (0..h).map(|j| instance.budget(j)).collect(),
        assigned: vec![false; n],
        sets: vec![Vec::new(); h],
    };
    let mut coverage: Vec<Coverage<'_>> = (0..h).map(|j| instance.coverage(j)).collect();
    let mut queues: Vec<LazyArgmax> = (0..h).map(|_| LazyArgmax::with_ranks(0..n, |s| rank[s])).collect();
    let mut trace = Vec::new();

    while state.lambda.iter().any(|&l| l > 0.0) {
        let mut best: Option<Pick> = None;
        for j in 0..h {
            if state.lambda[j] == 0.0 {
                continue;
            }
            let cov = &coverage[j];
            let left = state.remaining_budget[j];
            let assigned = &state.assigned;
            let Some((slot, ratio)) = queues[j].peek(|e| cov.gain(e) / costs[e], |e| !assigned[e] && costs[e] <= left)
            else {
                continue;
            };
            let pick = Pick { slot, product: j, rho: state.lambda[j] * ratio, gain: cov.gain(slot) };
            if best.as_ref().is_none_or(|b| pick.beats(b)) {
                best = Some(pick);
            }
        }
        let Some(pick) = best else { break };
        if pick.gain <= 0.0 {
            break;
        }
        let j = pick.product;
        state.assigned[pick.slot] = true;
        state.sets[j].push(pick.slot);
        state.remaining_budget[j] -= costs[pick.slot];
        coverage[j].insert(pick.slot);
        queues[j].invalidate();
        if coverage[j].value() >= instance.products[j].demand - FEASIBILITY_TOL {
            state.lambda[j] = 0.0;
        }
        trace.push(PdStep { slot: pick.slot, product: j, rho: pick.rho, gain: pick.gain });
    }

    let allocation = Allocation::evaluate(instance, Selection::Disjoint { sets: state.sets.clone() }, 1.0)?;
    Ok(PdOutcome { allocation, iterations: trace.len(), trace, state })
}
