//! Bi-criteria solver for the common variant: one slot set whose influence
//! reaches `(1 - 1/e - eps) * k_j` for every product at bounded cost.
//!
//! Pipeline per budget guess `B`:
//! 1. normalize each product influence by `I_j(BS)` and its threshold to
//!    `tau_j = k_j / I_j(BS)`;
//! 2. run continuous greedy on `g(S) = sum_j min(I_j(S) / I_j(BS), tau_j) / h`
//!    over the knapsack polytope with budget `B`;
//! 3. union `ceil(log_{1/(1-eps)} r)` independent roundings of the fractional
//!    point;
//! 4. for each product below `(1 - 1/e - 2 eps) k_j`, add slots greedily by
//!    marginal gain until `(1 - 1/e) k_j`;
//! 5. if the repair spent more than `2B`, double `B` and start over.

use serde::{Deserialize, Serialize};

use crate::continuous_greedy::{continuous_greedy, CGConfig};
use crate::error::{Error, Result};
use crate::model::{Allocation, Coverage, InfluenceMatrix, ProblemInstance, Scope, Selection, Variant, FEASIBILITY_TOL};
use crate::rng;
use crate::submodular::{LazyArgmax, Polytope, SetFunction};

const INV_E: f64 = 0.367_879_441_171_442_33;

/// How thresholds are normalized before the fractional phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// `tau_j = k_j / I_j(BS)`.
    #[default]
    Proportional,
    /// Every normalized threshold set to 1, i.e. aim for `I_j(BS)`.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SparsityMode {
    #[default]
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicriteriaConfig {
    pub epsilon: f64,
    pub sparsity: SparsityMode,
    /// First budget guess; `None` uses the cost of a greedy cover.
    pub initial_budget: Option<f64>,
    pub budget_growth: f64,
    pub max_doublings: usize,
    pub normalization: Normalization,
    /// Step count, horizon and sample count of the fractional phase. Its
    /// seed is replaced by one derived from `seed`.
    pub cg: CGConfig,
    pub seed: u64,
}

impl Default for BicriteriaConfig {
    fn default() -> Self {
        BicriteriaConfig {
            epsilon: 0.1,
            sparsity: SparsityMode::Auto,
            initial_budget: None,
            budget_growth: 2.0,
            max_doublings: 20,
            normalization: Normalization::Proportional,
            cg: CGConfig::default(),
            seed: 0,
        }
    }
}

/// Solver output plus audit values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonOutcome {
    pub allocation: Allocation,
    /// Number of rounded samples unioned.
    pub ell_rounding: usize,
    pub sparsity: usize,
    /// Budget guess of the accepted attempt.
    pub budget: f64,
    pub attempts: usize,
    /// Products that needed the greedy repair.
    pub repaired: Vec<usize>,
    /// Products whose threshold exceeds the influence of all slots.
    pub unreachable: Vec<usize>,
    /// Products the repair could not lift to its target.
    pub repair_failed: Vec<usize>,
    /// Set when the budget search gave up and returned every slot.
    pub all_slots_fallback: bool,
}

/// Sparsity `r`: the largest number of products any one slot reaches.
pub fn sparsity(instance: &ProblemInstance) -> usize {
    instance.sparsity()
}

/// `max(1, ceil(log_{1/(1-eps)} r))`. Ratios within `1e-9` of an integer
/// are snapped to it before the ceiling.
pub fn rounding_samples(epsilon: f64, r: usize) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if r == 0 {
        return Err(Error::invalid("sparsity must be at least 1"));
    }
    let ratio = (r as f64).ln() / (1.0 / (1.0 - epsilon)).ln();
    let snapped = if (ratio - ratio.round()).abs() < 1e-9 { ratio.round() } else { ratio.ceil() };
    Ok((snapped as usize).max(1))
}

/// `g(S) = sum_j min(I_j(S) * scale_j, cap_j) / h` over the active products.
struct TruncatedCoverage<'m> {
    matrix: &'m InfluenceMatrix,
    /// `(matrix product index, 1 / I_j(BS), tau_j)`.
    terms: Vec<(usize, f64, f64)>,
}

impl TruncatedCoverage<'_> {
    fn survival(&self, members: &[bool]) -> Vec<f64> {
        let mut surv = vec![1.0; self.matrix.n_users()];
        for s in (0..members.len()).filter(|&s| members[s]) {
            for &(u, p) in self.matrix.slot_entries(Scope::All, s) {
                surv[u as usize] *= 1.0 - p;
            }
        }
        surv
    }

    fn levels(&self, surv: &[f64]) -> Vec<f64> {
        self.terms
            .iter()
            .map(|&(j, _, _)| self.matrix.product_users(j).iter().map(|&u| 1.0 - surv[u as usize]).sum())
            .collect()
    }

    fn weight(&self) -> f64 {
        1.0 / self.terms.len().max(1) as f64
    }
}

impl SetFunction for TruncatedCoverage<'_> {
    fn ground_size(&self) -> usize {
        self.matrix.n_slots()
    }

    fn value(&self, members: &[bool]) -> f64 {
        let levels = self.levels(&self.survival(members));
        self.terms
            .iter()
            .zip(levels)
            .map(|(&(_, scale, cap), level)| (level * scale).min(cap))
            .sum::<f64>()
            * self.weight()
    }

    fn gains(&self, members: &[bool], out: &mut [f64]) {
        let surv = self.survival(members);
        let levels = self.levels(&surv);
        out.iter_mut().for_each(|g| *g = 0.0);
        for (&(j, scale, cap), level) in self.terms.iter().zip(levels) {
            let before = (level * scale).min(cap);
            if before >= cap {
                continue;
            }
            for (e, g) in out.iter_mut().enumerate() {
                if members[e] {
                    continue;
                }
                let delta: f64 = self
                    .matrix
                    .slot_entries(Scope::Product(j), e)
                    .iter()
                    .map(|&(u, p)| surv[u as usize] * p)
                    .sum();
                if delta > 0.0 {
                    *g += ((level + delta) * scale).min(cap) - before;
                }
            }
        }
        let w = self.weight();
        out.iter_mut().for_each(|g| *g *= w);
    }
}

/// Cost of a cost-effective greedy cover of `g` (gain per unit cost, free
/// slots first); stops when `g` is saturated or nothing helps.
fn greedy_cover_cost(g: &TruncatedCoverage<'_>, costs: &[f64]) -> f64 {
    let n = costs.len();
    let full: f64 = g.terms.iter().map(|t| t.2).sum::<f64>() * g.weight();
    let mut members = vec![false; n];
    let mut gains = vec![0.0; n];
    let mut spent = 0.0;
    let mut value = 0.0;
    while value < full - 1e-12 {
        g.gains(&members, &mut gains);
        let density = |e: usize| if costs[e] == 0.0 { f64::INFINITY } else { gains[e] / costs[e] };
        let best = (0..n)
            .filter(|&e| !members[e] && gains[e] > 1e-15)
            .max_by(|&a, &b| density(a).total_cmp(&density(b)).then(b.cmp(&a)));
        let Some(e) = best else { break };
        members[e] = true;
        spent += costs[e];
        value += gains[e];
    }
    spent
}

/// Solves a common-variant instance.
pub fn solve_common(instance: &ProblemInstance, cfg: &BicriteriaConfig) -> Result<CommonOutcome> {
    instance.expect_variant(Variant::Common)?;
    let eps = cfg.epsilon;
    let r = match cfg.sparsity {
        SparsityMode::Auto => sparsity(instance),
        SparsityMode::Fixed(r) => r,
    };
    let ell = rounding_samples(eps, r)?;
    if !(cfg.budget_growth > 1.0) {
        return Err(Error::invalid("budget growth factor must exceed 1"));
    }
    let n = instance.n_slots();
    let h = instance.n_products();
    let everything: Vec<usize> = (0..n).collect();
    let full: Vec<f64> = (0..h)
        .map(|j| instance.product_value(j, &everything))
        .collect::<Result<_>>()?;

    let mut unreachable = Vec::new();
    let mut active = Vec::new();
    let mut targets = vec![0.0; h];
    for j in 0..h {
        let k = instance.target(j);
        if k > full[j] + FEASIBILITY_TOL {
            unreachable.push(j);
        } else if k > FEASIBILITY_TOL {
            targets[j] = match cfg.normalization {
                Normalization::Proportional => k,
                Normalization::Literal => full[j],
            };
            active.push(j);
        }
    }
    let slack = 1.0 - INV_E - eps;
    let finish = |slots: Vec<usize>| -> Result<Allocation> {
        let mut alloc = Allocation::evaluate(instance, Selection::Common { slots }, slack)?;
        for &j in &unreachable {
            alloc.feasible[j] = false;
        }
        Ok(alloc)
    };
    let mut outcome = CommonOutcome {
        allocation: finish(Vec::new())?,
        ell_rounding: ell,
        sparsity: r,
        budget: 0.0,
        attempts: 0,
        repaired: Vec::new(),
        unreachable: unreachable.clone(),
        repair_failed: Vec::new(),
        all_slots_fallback: false,
    };
    if active.is_empty() {
        return Ok(outcome);
    }

    let g = TruncatedCoverage {
        matrix: &instance.matrix,
        terms: active
            .iter()
            .map(|&j| (instance.products[j].index, 1.0 / full[j], targets[j] / full[j]))
            .collect(),
    };
    let mut budget = match cfg.initial_budget {
        Some(b) if b > 0.0 => b,
        Some(b) => return Err(Error::invalid(format!("initial budget must be positive, got {b}"))),
        None => {
            let warm = greedy_cover_cost(&g, &instance.costs).min(instance.total_cost());
            if warm > 0.0 {
                warm
            } else {
                instance.costs.iter().copied().filter(|&c| c > 0.0).fold(f64::INFINITY, f64::min).min(1.0)
            }
        }
    };

    for attempt in 0..=cfg.max_doublings {
        let attempt_seed = rng::derive(cfg.seed, attempt as u64);
        let cg = CGConfig { seed: rng::derive(attempt_seed, 1), ..cfg.cg };
        let polytope = Polytope::Knapsack { budget, costs: instance.costs.clone() };
        let y = continuous_greedy(&g, &polytope, &cg)?;

        let round_seed = rng::derive(attempt_seed, 2);
        let mut in_set = vec![false; n];
        for t in 0..ell {
            let sample = y.sample(&mut rng::stream(round_seed, t as u64));
            in_set.iter_mut().zip(sample).for_each(|(a, b)| *a |= b);
        }

        let mut repaired = Vec::new();
        let mut repair_failed = Vec::new();
        let mut repair_cost = 0.0;
        for &j in &active {
            let current: Vec<usize> = (0..n).filter(|&s| in_set[s]).collect();
            let mut cov = Coverage::with_slots(&instance.matrix, instance.scope(j), &current)?;
            if cov.value() >= (1.0 - INV_E - 2.0 * eps) * targets[j] - FEASIBILITY_TOL {
                continue;
            }
            repaired.push(j);
            let goal = (1.0 - INV_E) * targets[j];
            let mut queue = LazyArgmax::new((0..n).filter(|&s| !in_set[s]));
            while cov.value() < goal - FEASIBILITY_TOL {
                let Some((s, _)) = queue.pop(|e| cov.gain(e), |e| !in_set[e]) else {
                    repair_failed.push(j);
                    break;
                };
                cov.insert(s);
                in_set[s] = true;
                repair_cost += instance.costs[s];
                queue.invalidate();
            }
        }

        outcome.attempts = attempt + 1;
        outcome.budget = budget;
        if repair_cost <= 2.0 * budget || attempt == cfg.max_doublings {
            let slots: Vec<usize> = (0..n).filter(|&s| in_set[s]).collect();
            if repair_cost > 2.0 * budget {
                outcome.all_slots_fallback = true;
                outcome.allocation = finish(everything)?;
            } else {
                outcome.allocation = finish(slots)?;
                outcome.repaired = repaired;
                outcome.repair_failed = repair_failed;
            }
            return Ok(outcome);
        }
        budget *= cfg.budget_growth;
    }
    unreachable!("the last attempt always returns")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> InfluenceMatrix {
        let users = (1..=4).map(|i| format!("u{i}")).collect();
        let products = (1..=4).map(|i| (format!("P{i}"), vec![i - 1])).collect();
        let entries = [(0, 0, 0.6), (0, 1, 0.2), (1, 1, 0.4), (2, 0, 0.4), (2, 3, 0.3), (3, 0, 0.4), (3, 3, 0.5)];
        InfluenceMatrix::from_entries(4, users, products, entries).unwrap()
    }

    #[test]
    fn rounding_sample_count() {
        assert_eq!(rounding_samples(0.1, 4).unwrap(), 14);
        assert_eq!(rounding_samples(0.5, 4).unwrap(), 2);
        assert_eq!(rounding_samples(0.1, 1).unwrap(), 1);
        assert!(rounding_samples(0.0, 4).is_err());
        assert!(rounding_samples(1.0, 4).is_err());
    }

    #[test]
    fn example_sparsity_is_two() {
        let inst = ProblemInstance::common(example(), vec![1.0; 4], &[("P1", 0.1), ("P2", 0.1), ("P3", 0.0), ("P4", 0.1)])
            .unwrap();
        assert_eq!(sparsity(&inst), 2);
        let single = ProblemInstance::common(example(), vec![1.0; 4], &[("P1", 0.1)]).unwrap();
        assert_eq!(sparsity(&single), 1);
    }

    #[test]
    fn zero_thresholds_give_empty_set() {
        let inst = ProblemInstance::common(example(), vec![1.0; 4], &[("P1", 0.0), ("P2", 0.0)]).unwrap();
        let out = solve_common(&inst, &BicriteriaConfig::default()).unwrap();
        assert_eq!(out.allocation.selection, Selection::Common { slots: vec![] });
        assert_eq!(out.allocation.total_cost, 0.0);
        assert!(out.allocation.all_feasible());
    }

    #[test]
    fn unreachable_threshold_flagged() {
        let inst = ProblemInstance::common(example(), vec![1.0; 4], &[("P1", 0.5), ("P3", 0.2)]).unwrap();
        let out = solve_common(&inst, &BicriteriaConfig::default()).unwrap();
        assert_eq!(out.unreachable, vec![1]);
        assert!(!out.allocation.feasible[1]);
        assert!(out.allocation.feasible[0]);
    }

    #[test]
    fn wrong_variant_rejected() {
        let inst = ProblemInstance::disjoint(example(), vec![1.0; 4], &[("P1", 0.5, 1.0)]).unwrap();
        assert!(matches!(
            solve_common(&inst, &BicriteriaConfig::default()),
            Err(Error::VariantMismatch { .. })
        ));
    }

    #[test]
    fn same_seed_same_answer() {
        let inst = ProblemInstance::common(example(), vec![1.0, 2.0, 1.0, 3.0], &[("P1", 0.8), ("P2", 0.5), ("P4", 0.6)])
            .unwrap();
        let cfg = BicriteriaConfig { seed: 11, ..BicriteriaConfig::default() };
        let a = solve_common(&inst, &cfg).unwrap();
        let b = solve_common(&inst, &cfg).unwrap();
        assert_eq!(a, b);
        a.allocation.validate(&inst).unwrap();
    }

    #[test]
    fn truncated_gains_match_value_differences() {
        let m = example();
        let g = TruncatedCoverage { matrix: &m, terms: vec![(0, 1.0 / 0.856, 0.7), (3, 1.0 / 0.65, 0.9)] };
        let members = [true, false, false, true];
        let mut fast = vec![0.0; 4];
        g.gains(&members, &mut fast);
        for e in 0..4 {
            let slow = SetFunction::gain(&g, &members, e);
            assert!((fast[e] - slow).abs() < 1e-12, "{e}: {} vs {slow}", fast[e]);
        }
    }
}
