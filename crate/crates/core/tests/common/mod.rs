//! Independent reference implementations used only by the tests: dense
//! probability tables, brute-force influence, exact multilinear extensions
//! by enumeration, and exhaustive optima.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use slotsel::{InfluenceMatrix, ProblemInstance};

pub type TestRng = ChaCha20Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha20Rng::seed_from_u64(seed ^ 0x5eed_0f7e57)
}

/// `p[slot][user]`, plus product membership lists.
#[derive(Debug, Clone)]
pub struct Dense {
    pub p: Vec<Vec<f64>>,
    pub products: Vec<Vec<usize>>,
}

impl Dense {
    pub fn n_slots(&self) -> usize {
        self.p.len()
    }

    pub fn n_users(&self) -> usize {
        self.p.first().map_or(0, Vec::len)
    }

    /// Random table: each (slot, user) is nonzero with probability `density`.
    /// Products draw members independently with probability `membership`.
    pub fn random(r: &mut TestRng, n_slots: usize, n_users: usize, n_products: usize, density: f64, membership: f64) -> Dense {
        let p = (0..n_slots)
            .map(|_| {
                (0..n_users)
                    .map(|_| if r.gen_bool(density) { (r.gen_range(1..=100) as f64) / 100.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        let products = (0..n_products).map(|_| (0..n_users).filter(|_| r.gen_bool(membership)).collect()).collect();
        Dense { p, products }
    }

    /// Products partition the users round-robin after a shuffle.
    pub fn random_partitioned(r: &mut TestRng, n_slots: usize, n_users: usize, n_products: usize, density: f64) -> Dense {
        let mut d = Dense::random(r, n_slots, n_users, 0, density, 0.0);
        let mut products = vec![Vec::new(); n_products];
        for u in 0..n_users {
            products[r.gen_range(0..n_products)].push(u);
        }
        d.products = products;
        d
    }

    pub fn matrix(&self) -> InfluenceMatrix {
        let users = (0..self.n_users()).map(|u| format!("u{u}")).collect();
        let products = self.products.iter().enumerate().map(|(j, m)| (format!("p{j}"), m.clone())).collect();
        let mut entries = Vec::new();
        for (s, row) in self.p.iter().enumerate() {
            for (u, &v) in row.iter().enumerate() {
                if v > 0.0 {
                    entries.push((s, u, v));
                }
            }
        }
        InfluenceMatrix::from_entries(self.n_slots(), users, products, entries).unwrap()
    }

    pub fn product_ids(&self) -> Vec<String> {
        (0..self.products.len()).map(|j| format!("p{j}")).collect()
    }

    /// `sum_u [1 - prod_{s in set} (1 - p)]` over `users`.
    pub fn value_over(&self, users: &[usize], set: &[bool]) -> f64 {
        users
            .iter()
            .map(|&u| {
                let mut miss = 1.0;
                for (s, row) in self.p.iter().enumerate() {
                    if set[s] {
                        miss *= 1.0 - row[u];
                    }
                }
                1.0 - miss
            })
            .sum()
    }

    pub fn value(&self, set: &[bool]) -> f64 {
        let all: Vec<usize> = (0..self.n_users()).collect();
        self.value_over(&all, set)
    }

    pub fn product_value(&self, j: usize, set: &[bool]) -> f64 {
        self.value_over(&self.products[j], set)
    }
}

pub fn mask(n: usize, bits: u64) -> Vec<bool> {
    (0..n).map(|i| bits >> i & 1 == 1).collect()
}

pub fn members(set: &[bool]) -> Vec<usize> {
    set.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
}

/// Exact multilinear extension by summing over all `2^n` subsets.
pub fn multilinear_exact(n: usize, f: impl Fn(&[bool]) -> f64, x: &[f64]) -> f64 {
    (0..1u64 << n)
        .map(|bits| {
            let set = mask(n, bits);
            let weight: f64 = set.iter().zip(x).map(|(&b, &xi)| if b { xi } else { 1.0 - xi }).product();
            if weight == 0.0 {
                0.0
            } else {
                weight * f(&set)
            }
        })
        .sum()
}

/// Cheapest slot set meeting every product's threshold (common variant).
pub fn brute_cover(d: &Dense, costs: &[f64], thresholds: &[f64]) -> Option<(f64, Vec<usize>)> {
    let n = d.n_slots();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for bits in 0..1u64 << n {
        let set = mask(n, bits);
        let cost: f64 = members(&set).iter().map(|&s| costs[s]).sum();
        if best.as_ref().is_some_and(|b| cost >= b.0) {
            continue;
        }
        if thresholds.iter().enumerate().all(|(j, &k)| d.product_value(j, &set) >= k - 1e-9) {
            best = Some((cost, members(&set)));
        }
    }
    best
}

/// Cheapest disjoint allocation meeting every demand within budgets, by
/// trying every assignment of each slot to one product or none.
pub fn brute_disjoint(d: &Dense, costs: &[f64], demands: &[f64], budgets: &[f64]) -> Option<f64> {
    let n = d.n_slots();
    let h = demands.len();
    let base = h as u64 + 1;
    let total = base.pow(n as u32);
    let mut best: Option<f64> = None;
    let mut owner = vec![0usize; n];
    for code in 0..total {
        let mut c = code;
        for o in owner.iter_mut() {
            *o = (c % base) as usize;
            c /= base;
        }
        let mut spend = vec![0.0; h];
        let mut cost = 0.0;
        for (s, &o) in owner.iter().enumerate() {
            if o > 0 {
                spend[o - 1] += costs[s];
                cost += costs[s];
            }
        }
        if best.is_some_and(|b| cost >= b) || (0..h).any(|j| spend[j] > budgets[j] + 1e-9) {
            continue;
        }
        let ok = (0..h).all(|j| {
            let set: Vec<bool> = owner.iter().map(|&o| o == j + 1).collect();
            d.product_value(j, &set) >= demands[j] - 1e-9
        });
        if ok {
            best = Some(cost);
        }
    }
    best
}

/// Best integral point of `{x in {0,1}^n : sum x <= k}`.
pub fn brute_max_cardinality(n: usize, k: usize, f: impl Fn(&[bool]) -> f64) -> f64 {
    (0..1u64 << n).filter(|b| b.count_ones() as usize <= k).map(|b| f(&mask(n, b))).fold(f64::MIN, f64::max)
}

/// Best integral point of `{x in {0,1}^n : w . x <= budget}`.
pub fn brute_max_knapsack(costs: &[f64], budget: f64, f: impl Fn(&[bool]) -> f64) -> f64 {
    let n = costs.len();
    (0..1u64 << n)
        .map(|b| mask(n, b))
        .filter(|set| members(set).iter().map(|&s| costs[s]).sum::<f64>() <= budget + 1e-9)
        .map(|set| f(&set))
        .fold(f64::MIN, f64::max)
}

/// Random feasible-by-construction disjoint instance: demands are a fraction
/// of what a random partition achieves and budgets cover that partition.
pub fn random_disjoint(r: &mut TestRng, n_slots: usize, n_users: usize, n_products: usize, costs: Vec<f64>) -> (Dense, ProblemInstance, Vec<f64>, Vec<f64>) {
    let d = Dense::random(r, n_slots, n_users, n_products, 0.4, 0.6);
    let owner: Vec<usize> = (0..n_slots).map(|_| r.gen_range(0..n_products)).collect();
    let mut demands = Vec::new();
    let mut budgets = Vec::new();
    for j in 0..n_products {
        let set: Vec<bool> = owner.iter().map(|&o| o == j).collect();
        let reach = d.product_value(j, &set);
        demands.push((reach * r.gen_range(0.3..0.9) * 100.0).floor() / 100.0);
        let spend: f64 = (0..n_slots).filter(|&s| owner[s] == j).map(|s| costs[s]).sum();
        budgets.push(spend + r.gen_range(0..=2) as f64);
    }
    let ids = d.product_ids();
    let targets: Vec<(&str, f64, f64)> =
        (0..n_products).map(|j| (ids[j].as_str(), demands[j], budgets[j])).collect();
    let inst = ProblemInstance::disjoint(d.matrix(), costs, &targets).unwrap();
    (d, inst, demands, budgets)
}
