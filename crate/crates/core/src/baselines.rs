//! Random and Top-k comparison allocators.

use rand::seq::SliceRandom;

use crate::error::Result;
use crate::model::{Allocation, Coverage, ProblemInstance, Scope, Selection, Variant, FEASIBILITY_TOL};
use crate::rng;

fn met(instance: &ProblemInstance, j: usize, cov: &Coverage<'_>) -> bool {
    cov.value() >= instance.target(j) - FEASIBILITY_TOL
}

/// Slots in uniformly random order. Common variant: grow one shared set until
/// every threshold is met. Disjoint variant: each drawn slot goes to the next
/// unmet product (round-robin) that can still afford it, or is skipped.
pub fn solve_random(instance: &ProblemInstance, seed: u64) -> Result<Allocation> {
    let mut order: Vec<usize> = (0..instance.n_slots()).collect();
    order.shuffle(&mut rng::stream(seed, 0));
    let h = instance.n_products();
    let mut cov: Vec<Coverage<'_>> = (0..h).map(|j| instance.coverage(j)).collect();

    let selection = match instance.variant {
        Variant::Common => {
            let mut slots = Vec::new();
            for s in order {
                if (0..h).all(|j| met(instance, j, &cov[j])) {
                    break;
                }
                for c in &mut cov {
                    c.insert(s);
                }
                slots.push(s);
            }
            Selection::Common { slots }
        }
        Variant::Disjoint => {
            let mut sets = vec![Vec::new(); h];
            let mut left: Vec<f64> = (0..h).map(|j| instance.budget(j)).collect();
            let mut next = 0;
            for s in order {
                if (0..h).all(|j| met(instance, j, &cov[j])) {
                    break;
                }
                let w = instance.costs[s];
                let taker = (0..h)
                    .map(|i| (next + i) % h)
                    .find(|&j| !met(instance, j, &cov[j]) && w <= left[j] + FEASIBILITY_TOL);
                if let Some(j) = taker {
                    cov[j].insert(s);
                    sets[j].push(s);
                    left[j] -= w;
                    next = (j + 1) % h;
                }
            }
            Selection::Disjoint { sets }
        }
    };
    Allocation::evaluate(instance, selection, 1.0)
}

fn ranked(instance: &ProblemInstance, scope: Scope) -> Vec<(usize, f64)> {
    let mut order: Vec<(usize, f64)> =
        (0..instance.n_slots()).map(|s| (s, instance.matrix.singleton(scope, s))).collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    order
}

/// Slots by singleton influence, highest first, ignoring overlap. Slots with
/// zero singleton influence are never taken.
pub fn solve_topk(instance: &ProblemInstance) -> Result<Allocation> {
    let h = instance.n_products();
    let selection = match instance.variant {
        Variant::Common => {
            let mut cov: Vec<Coverage<'_>> = (0..h).map(|j| instance.coverage(j)).collect();
            let mut slots = Vec::new();
            for (s, v) in ranked(instance, Scope::All) {
                if v <= 0.0 || (0..h).all(|j| met(instance, j, &cov[j])) {
                    break;
                }
                for c in &mut cov {
                    c.insert(s);
                }
                slots.push(s);
            }
            Selection::Common { slots }
        }
        Variant::Disjoint => {
            let mut assigned = vec![false; instance.n_slots()];
            let mut sets = vec![Vec::new(); h];
            for (j, set) in sets.iter_mut().enumerate() {
                let mut cov = instance.coverage(j);
                let mut left = instance.budget(j);
                for (s, v) in ranked(instance, instance.scope(j)) {
                    if v <= 0.0 || met(instance, j, &cov) {
                        break;
                    }
                    let w = instance.costs[s];
                    if assigned[s] || w > left + FEASIBILITY_TOL {
                        continue;
                    }
                    assigned[s] = true;
                    cov.insert(s);
                    set.push(s);
                    left -= w;
                }
            }
            Selection::Disjoint { sets }
        }
    };
    Allocation::evaluate(instance, selection, 1.0)
}
