//! Experiment parameters and the synthetic city generator.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use super::load_fixture;
use crate::error::{Error, Result};
use crate::model::{
    build_influence_matrix, Audit, BillboardSlot, CoordSystem, InfluenceMatrix, Point, ProblemInstance, Product,
    Scope, SlotCatalog, TrajectoryRecord, Variant,
};
use crate::rng;

const TAG_BOARDS: u64 = 1;
const TAG_USERS: u64 = 2;
const TAG_INTERESTS: u64 = 3;
const TAG_COSTS: u64 = 4;
const TAG_OMEGA: u64 = 5;
const TAG_ETA: u64 = 6;

/// Parameters of one generated instance. Ratios are fractions (0.05 = 5%).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentParams {
    /// Demand/supply ratio. When set it overrides `beta` with `alpha / n_products`.
    pub alpha: Option<f64>,
    /// Individual demand ratio.
    pub beta: f64,
    pub n_products: usize,
    pub omega_range: [f64; 2],
    pub delta_range: [f64; 2],
    pub eta_range: [f64; 2],
    /// Influence radius in meters.
    pub lambda: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub variant: Variant,
    pub n_slots: usize,
    pub n_users: usize,
    pub windows_per_billboard: usize,
    /// Slot duration in seconds.
    pub slot_duration: f64,
    /// Side of the square city in meters.
    pub city_side: f64,
    pub records_per_user: usize,
    /// Distinct places each user's records are drawn from.
    pub anchors_per_user: usize,
    /// Zipf exponent of product popularity.
    pub interest_skew: f64,
    /// Fraction of all products each user is interested in.
    pub interest_fraction: f64,
    /// Explicit-probability fixture replacing the generated city.
    pub fixture: Option<PathBuf>,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        ExperimentParams {
            alpha: None,
            beta: 0.05,
            n_products: 20,
            omega_range: [0.8, 1.2],
            delta_range: [0.8, 1.1],
            eta_range: [0.9, 1.1],
            lambda: 100.0,
            epsilon: 0.1,
            seed: 0,
            variant: Variant::Disjoint,
            n_slots: 160,
            n_users: 2000,
            windows_per_billboard: 4,
            slot_duration: 3600.0,
            city_side: 1000.0,
            records_per_user: 4,
            anchors_per_user: 1,
            interest_skew: 1.0,
            interest_fraction: 0.8,
            fixture: None,
        }
    }
}

fn check_range(name: &str, r: [f64; 2]) -> Result<()> {
    if r[0].is_finite() && r[1].is_finite() && 0.0 <= r[0] && r[0] <= r[1] {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must satisfy 0 <= lo <= hi, got {r:?}")))
    }
}

fn uniform(rng: &mut rng::Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.gen_range(r[0]..=r[1])
    }
}

// Guards the floors below against products such as 1.2 * 1000 * 0.01
// landing a hair under an integer.
fn floor(x: f64) -> f64 {
    (x + 1e-9).floor()
}

impl ExperimentParams {
    pub fn from_toml(text: &str) -> Result<Self> {
        let p: ExperimentParams =
            toml::from_str(text).map_err(|e| Error::invalid(format!("experiment config: {}", e.to_string().trim_end())))?;
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<()> {
        check_range("omega_range", self.omega_range)?;
        check_range("delta_range", self.delta_range)?;
        check_range("eta_range", self.eta_range)?;
        let positive = [
            ("beta", self.beta),
            ("lambda", self.lambda),
            ("epsilon", self.epsilon),
            ("slot_duration", self.slot_duration),
            ("city_side", self.city_side),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(a) = self.alpha {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::invalid(format!("alpha must be positive, got {a}")));
            }
        }
        if self.n_products == 0 || self.windows_per_billboard == 0 || self.anchors_per_user == 0 {
            return Err(Error::invalid("n_products, windows_per_billboard and anchors_per_user must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.interest_fraction) || !(self.interest_skew >= 0.0) {
            return Err(Error::invalid("interest_fraction must lie in [0, 1] and interest_skew be nonnegative"));
        }
        Ok(())
    }

    /// The individual demand ratio in effect.
    pub fn effective_beta(&self) -> f64 {
        match self.alpha {
            Some(a) => a / self.n_products as f64,
            None => self.beta,
        }
    }
}

/// `w(s) = floor(delta_s * I(s) / 10)` with `delta_s` uniform in `delta_range`,
/// clamped to at least 1.
pub fn derive_costs(matrix: &InfluenceMatrix, delta_range: [f64; 2], seed: u64) -> Result<Vec<f64>> {
    check_range("delta_range", delta_range)?;
    let mut r = rng::stream(seed, TAG_COSTS);
    Ok((0..matrix.n_slots())
        .map(|s| {
            let d = uniform(&mut r, delta_range);
            floor(d * matrix.singleton(Scope::All, s) / 10.0).max(1.0)
        })
        .collect())
}

/// Demands `sigma_j = floor(omega_j * sigma* * beta)`, budgets
/// `floor(eta_j * sigma_j)` and thresholds `k_j = sigma_j` for every product of
/// the matrix, where `sigma*` is the summed singleton influence.
pub fn derive_demands_budgets(matrix: &InfluenceMatrix, params: &ExperimentParams) -> Result<(Vec<Product>, Audit)> {
    params.check()?;
    let sigma_star: f64 = (0..matrix.n_slots()).map(|s| matrix.singleton(Scope::All, s)).sum();
    let beta = params.effective_beta();
    let mut omega = rng::stream(params.seed, TAG_OMEGA);
    let mut eta = rng::stream(params.seed, TAG_ETA);
    let products: Vec<Product> = matrix
        .products()
        .iter()
        .map(|id| {
            let sigma = floor(uniform(&mut omega, params.omega_range) * sigma_star * beta);
            let budget = floor(uniform(&mut eta, params.eta_range) * sigma);
            let budget = (params.variant == Variant::Disjoint).then_some(budget);
            Product::new(id.clone(), sigma, sigma, budget)
        })
        .collect();
    let demand: f64 = products.iter().map(|p| p.demand).sum();
    let audit = Audit {
        sigma_star,
        alpha: if sigma_star > 0.0 { demand / sigma_star } else { 0.0 },
        beta,
        sparsity: 0,
    };
    Ok((products, audit))
}

fn synthetic_matrix(params: &ExperimentParams, n_slots: usize, n_users: usize) -> Result<InfluenceMatrix> {
    let per = params.windows_per_billboard;
    let n_boards = n_slots.div_ceil(per);
    let side = params.city_side;
    let horizon = per as f64 * params.slot_duration;

    let mut r = rng::stream(params.seed, TAG_BOARDS);
    let mut slots = Vec::with_capacity(n_slots);
    for b in 0..n_boards {
        let location = Point::new(r.gen_range(0.0..side), r.gen_range(0.0..side));
        let panel_size = r.gen_range(0.5..=1.0);
        for k in 0..per.min(n_slots - b * per) {
            let t_start = k as f64 * params.slot_duration;
            slots.push(BillboardSlot {
                slot_id: slots.len(),
                billboard_id: format!("b{b}"),
                location,
                t_start,
                t_end: t_start + params.slot_duration,
                cost: 0.0,
                panel_size,
            });
        }
    }
    let catalog = SlotCatalog::new(slots, CoordSystem::Planar)?;

    let width = params.n_products.to_string().len();
    let product_ids: Vec<String> = (1..=params.n_products).map(|j| format!("P{j:0width$}")).collect();
    let weights: Vec<(usize, f64)> =
        (0..params.n_products).map(|j| (j, ((j + 1) as f64).powf(-params.interest_skew))).collect();
    let per_user = ((params.interest_fraction * params.n_products as f64).round() as usize).clamp(1, params.n_products);

    let mut ru = rng::stream(params.seed, TAG_USERS);
    let mut ri = rng::stream(params.seed, TAG_INTERESTS);
    let mut records = Vec::with_capacity(n_users * params.records_per_user);
    let mut interests = Vec::with_capacity(n_users);
    for u in 0..n_users {
        let mine: Vec<usize> = weights
            .choose_multiple_weighted(&mut ri, per_user, |w| w.1)
            .map_err(|e| Error::invalid(format!("interest sampling: {e}")))?
            .map(|w| w.0)
            .collect();
        interests.push(mine.clone());
        let anchors: Vec<Point> = (0..params.anchors_per_user)
            .map(|_| Point::new(ru.gen_range(0.0..side), ru.gen_range(0.0..side)))
            .collect();
        for _ in 0..params.records_per_user {
            let location = anchors[ru.gen_range(0..anchors.len())];
            let a = ru.gen_range(0.0..horizon);
            let b = (a + ru.gen_range(0.0..params.slot_duration)).min(horizon);
            let names = mine.iter().map(|&j| product_ids[j].as_str());
            records.push(TrajectoryRecord::new(format!("u{u}"), location, a, b, names)?);
        }
    }
    let built = build_influence_matrix(&records, &catalog, params.lambda)?;

    // Rebuild so every product exists even when nobody picked it, and users
    // without records keep their rows.
    let users: Vec<String> = (0..n_users).map(|u| format!("u{u}")).collect();
    let products = product_ids
        .iter()
        .enumerate()
        .map(|(j, id)| (id.clone(), (0..n_users).filter(|&u| interests[u].contains(&j)).collect()))
        .collect();
    let remap: Vec<usize> = built.users().iter().map(|id| id[1..].parse().expect("generated user id")).collect();
    let entries = built.entries().map(|(s, u, p)| (s, remap[u], p));
    InfluenceMatrix::from_entries(n_slots, users, products, entries)
}

/// Generates an instance: billboards and user presence records placed
/// uniformly in a square city (each user revisiting a few anchor places), Zipf-skewed product interests, then derived
/// costs, demands and budgets. Deterministic per `params.seed`. With a
/// fixture configured, its matrix and costs replace the generated city.
pub fn gen_synthetic(params: &ExperimentParams, size: (usize, usize)) -> Result<ProblemInstance> {
    params.check()?;
    let (matrix, costs) = match &params.fixture {
        Some(path) => {
            let fx = load_fixture(path)?;
            (fx.matrix, fx.costs)
        }
        None => {
            let (n_slots, n_users) = size;
            if n_slots == 0 {
                return Err(Error::EmptyCatalog);
            }
            let m = synthetic_matrix(params, n_slots, n_users)?;
            let costs = derive_costs(&m, params.delta_range, params.seed)?;
            (m, costs)
        }
    };
    let (products, mut audit) = derive_demands_budgets(&matrix, params)?;
    let mut inst = ProblemInstance::new(params.variant, matrix, costs, products)?;
    audit.sparsity = inst.sparsity();
    inst.audit = Some(audit);
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentParams {
        ExperimentParams { n_products: 5, ..ExperimentParams::default() }
    }

    #[test]
    fn cost_formula_and_clamp() {
        let users = (0..100).map(|i| i.to_string()).collect();
        let mut entries: Vec<_> = (0..100).map(|u| (0, u, 1.0)).collect();
        entries.extend((0..50).map(|u| (1, u, 1.0)));
        let m = InfluenceMatrix::from_entries(3, users, vec![], entries).unwrap();
        assert_eq!(derive_costs(&m, [1.0, 1.0], 0).unwrap(), vec![10.0, 5.0, 1.0]);
        let c = derive_costs(&m, [0.8, 1.1], 3).unwrap();
        assert!(c[0] >= 8.0 && c[0] <= 11.0 && c[2] == 1.0);
    }

    #[test]
    fn demand_formula_examples() {
        let users = (0..1000).map(|i| i.to_string()).collect();
        let entries = (0..1000).map(|u| (0, u, 1.0));
        let m = InfluenceMatrix::from_entries(1, users, vec![("p".into(), vec![0])], entries).unwrap();
        let p = ExperimentParams { beta: 0.01, omega_range: [1.2, 1.2], eta_range: [0.9, 0.9], ..small() };
        let (prods, audit) = derive_demands_budgets(&m, &p).unwrap();
        assert_eq!(audit.sigma_star, 1000.0);
        assert_eq!(prods[0].demand, 12.0);
        assert_eq!(prods[0].threshold, 12.0);
        assert_eq!(prods[0].budget, Some(10.0));
    }

    #[test]
    fn alpha_is_beta_times_products() {
        let p = ExperimentParams { omega_range: [1.0, 1.0], ..ExperimentParams::default() };
        let inst = gen_synthetic(&p, (80, 1500)).unwrap();
        let audit = inst.audit.clone().unwrap();
        let demand: f64 = inst.products.iter().map(|p| p.demand).sum();
        assert!((audit.alpha - demand / audit.sigma_star).abs() < 1e-9);
        // Flooring loses at most one unit per product.
        assert!((audit.alpha - 1.0).abs() <= 20.0 / audit.sigma_star + 1e-9, "{}", audit.alpha);
        let q = ExperimentParams { alpha: Some(1.0), beta: 0.5, n_products: 5, ..p };
        assert_eq!(q.effective_beta(), 0.2);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_synthetic(&small(), (24, 300)).unwrap().to_json().unwrap();
        let b = gen_synthetic(&small(), (24, 300)).unwrap().to_json().unwrap();
        assert_eq!(a, b);
        let c = gen_synthetic(&ExperimentParams { seed: 1, ..small() }, (24, 300)).unwrap().to_json().unwrap();
        assert_ne!(a, c);
        let inst = gen_synthetic(&small(), (23, 300)).unwrap();
        assert_eq!(inst.n_slots(), 23);
        assert_eq!(inst.n_products(), 5);
    }

    #[test]
    fn no_users_means_no_influence() {
        let inst = gen_synthetic(&small(), (8, 0)).unwrap();
        assert_eq!(inst.matrix.nnz(), 0);
        assert!(inst.costs.iter().all(|&c| c == 1.0));
        assert!(inst.products.iter().all(|p| p.demand == 0.0));
    }

    #[test]
    fn fixture_override_reproduces_fixture() {
        let path = PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/example1.json"));
        let p = ExperimentParams { fixture: Some(path.clone()), ..small() };
        let inst = gen_synthetic(&p, (4, 4)).unwrap();
        let fx = load_fixture(&path).unwrap();
        assert_eq!(inst.matrix, fx.matrix);
        assert_eq!(inst.costs, fx.costs);
        assert_eq!(inst.to_json().unwrap(), gen_synthetic(&p, (4, 4)).unwrap().to_json().unwrap());
    }

    #[test]
    fn toml_config_roundtrip() {
        let p = ExperimentParams::from_toml("alpha = 0.8\nn_products = 10\nseed = 7\nvariant = \"common\"\n").unwrap();
        assert_eq!(p.alpha, Some(0.8));
        assert_eq!(p.variant, Variant::Common);
        assert_eq!(p.lambda, 100.0);
        assert!(ExperimentParams::from_toml("bogus = 1").is_err());
        assert!(ExperimentParams::from_toml("omega_range = [1.2, 0.8]").is_err());
    }
}
