use serde::{Deserialize, Serialize};

use super::{Coverage, InfluenceMatrix, Scope};
use crate::error::{Error, Result};

/// Absolute slack used when comparing achieved influence to a demand, so
/// that e.g. `0.5` reached through floating-point products still counts as
/// meeting a demand of `0.5`.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// One shared slot set meeting every product threshold.
    Common,
    /// Pairwise-disjoint, per-product budgeted slot sets.
    Disjoint,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Common => "common",
            Variant::Disjoint => "disjoint",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Product {
    pub id: String,
    /// Matrix product index; resolved from `id` when an instance is built.
    #[serde(skip)]
    pub index: usize,
    /// Influence demand (disjoint variant).
    pub demand: f64,
    /// Influence threshold (common variant).
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
}

impl Product {
    pub fn new(id: impl Into<String>, demand: f64, threshold: f64, budget: Option<f64>) -> Self {
        Product { id: id.into(), index: 0, demand, threshold, budget }
    }

    /// The influence level this product must reach under `variant`.
    pub fn target(&self, variant: Variant) -> f64 {
        match variant {
            Variant::Common => self.threshold,
            Variant::Disjoint => self.demand,
        }
    }
}

/// Generation metadata carried alongside an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    /// Total supply: the sum of singleton slot influences.
    pub sigma_star: f64,
    /// Achieved demand/supply ratio.
    pub alpha: f64,
    pub beta: f64,
    pub sparsity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceDoc", into = "InstanceDoc")]
pub struct ProblemInstance {
    pub variant: Variant,
    pub matrix: InfluenceMatrix,
    pub costs: Vec<f64>,
    pub products: Vec<Product>,
    pub audit: Option<Audit>,
}

pub const INSTANCE_FORMAT: &str = "slotsel-instance";
pub const INSTANCE_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct InstanceDoc {
    format: String,
    version: u32,
    variant: Variant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    audit: Option<Audit>,
    products: Vec<Product>,
    costs: Vec<f64>,
    matrix: InfluenceMatrix,
}

impl TryFrom<InstanceDoc> for ProblemInstance {
    type Error = Error;

    fn try_from(doc: InstanceDoc) -> Result<Self> {
        if doc.format != INSTANCE_FORMAT || doc.version != INSTANCE_VERSION {
            return Err(Error::invalid(format!(
                "unsupported instance format {} v{}",
                doc.format, doc.version
            )));
        }
        let mut inst = ProblemInstance::new(doc.variant, doc.matrix, doc.costs, doc.products)?;
        inst.audit = doc.audit;
        Ok(inst)
    }
}

impl From<ProblemInstance> for InstanceDoc {
    fn from(i: ProblemInstance) -> Self {
        InstanceDoc {
            format: INSTANCE_FORMAT.to_string(),
            version: INSTANCE_VERSION,
            variant: i.variant,
            audit: i.audit,
            products: i.products,
            costs: i.costs,
            matrix: i.matrix,
        }
    }
}

impl ProblemInstance {
    /// Validates costs and products and resolves product ids against the
    /// matrix. Disjoint instances need a budget on every product.
    pub fn new(variant: Variant, matrix: InfluenceMatrix, costs: Vec<f64>, mut products: Vec<Product>) -> Result<Self> {
        if costs.len() != matrix.n_slots() {
            return Err(Error::invalid(format!(
                "{} costs for {} slots",
                costs.len(),
                matrix.n_slots()
            )));
        }
        if let Some((s, c)) = costs.iter().enumerate().find(|(_, c)| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::invalid(format!("slot {s} has invalid cost {c}")));
        }
        for p in &mut products {
            p.index = matrix.product_index(&p.id)?;
            for (name, v) in [("demand", p.demand), ("threshold", p.threshold)] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::invalid(format!("product {} has invalid {name} {v}", p.id)));
                }
            }
            match (variant, p.budget) {
                (Variant::Disjoint, None) => {
                    return Err(Error::invalid(format!("product {} needs a budget", p.id)));
                }
                (_, Some(b)) if !(b.is_finite() && b >= 0.0) => {
                    return Err(Error::invalid(format!("product {} has invalid budget {b}", p.id)));
                }
                _ => {}
            }
        }
        Ok(ProblemInstance { variant, matrix, costs, products, audit: None })
    }

    /// Common instance with thresholds `(product id, k_j)`.
    pub fn common(matrix: InfluenceMatrix, costs: Vec<f64>, thresholds: &[(&str, f64)]) -> Result<Self> {
        let products = thresholds.iter().map(|&(id, k)| Product::new(id, k, k, None)).collect();
        ProblemInstance::new(Variant::Common, matrix, costs, products)
    }

    /// Disjoint instance with `(product id, demand, budget)`.
    pub fn disjoint(matrix: InfluenceMatrix, costs: Vec<f64>, demands: &[(&str, f64, f64)]) -> Result<Self> {
        let products = demands.iter().map(|&(id, d, b)| Product::new(id, d, d, Some(b))).collect();
        ProblemInstance::new(Variant::Disjoint, matrix, costs, products)
    }

    /// The same data under another variant. Disjoint conversion needs budgets.
    pub fn with_variant(&self, variant: Variant) -> Result<Self> {
        let mut inst = ProblemInstance::new(variant, self.matrix.clone(), self.costs.clone(), self.products.clone())?;
        inst.audit = self.audit.clone();
        Ok(inst)
    }

    pub fn expect_variant(&self, variant: Variant) -> Result<()> {
        if self.variant == variant {
            Ok(())
        } else {
            Err(Error::VariantMismatch { expected: variant.name(), found: self.variant.name() })
        }
    }

    pub fn n_slots(&self) -> usize {
        self.matrix.n_slots()
    }

    pub fn n_products(&self) -> usize {
        self.products.len()
    }

    /// Influence scope of instance product `j`.
    pub fn scope(&self, j: usize) -> Scope {
        Scope::Product(self.products[j].index)
    }

    pub fn target(&self, j: usize) -> f64 {
        self.products[j].target(self.variant)
    }

    pub fn budget(&self, j: usize) -> f64 {
        self.products[j].budget.unwrap_or(f64::INFINITY)
    }

    pub fn coverage(&self, j: usize) -> Coverage<'_> {
        Coverage::new(&self.matrix, self.scope(j)).expect("instance products are resolved")
    }

    pub fn product_value(&self, j: usize, slots: &[usize]) -> Result<f64> {
        super::product_influence(&self.matrix, self.products[j].index, slots)
    }

    /// Total cost `w(BS)` of all slots.
    pub fn total_cost(&self) -> f64 {
        self.costs.iter().sum()
    }

    pub fn cost_of(&self, slots: &[usize]) -> f64 {
        slots.iter().map(|&s| self.costs[s]).sum()
    }

    /// Sparsity: the largest number of instance products any slot reaches.
    pub fn sparsity(&self) -> usize {
        (0..self.n_slots())
            .map(|s| {
                self.products
                    .iter()
                    .filter(|p| !self.matrix.slot_entries(Scope::Product(p.index), s).is_empty())
                    .count()
            })
            .max()
            .unwrap_or(0)
            .max(1)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum Selection {
    Common { slots: Vec<usize> },
    Disjoint { sets: Vec<Vec<usize>> },
}

impl Selection {
    pub fn variant(&self) -> Variant {
        match self {
            Selection::Common { .. } => Variant::Common,
            Selection::Disjoint { .. } => Variant::Disjoint,
        }
    }

    /// Slots chosen for product `j`.
    pub fn slots_for(&self, j: usize) -> &[usize] {
        match self {
            Selection::Common { slots } => slots,
            Selection::Disjoint { sets } => &sets[j],
        }
    }

    /// All distinct selected slots, sorted.
    pub fn all_slots(&self) -> Vec<usize> {
        let mut all: Vec<usize> = match self {
            Selection::Common { slots } => slots.clone(),
            Selection::Disjoint { sets } => sets.iter().flatten().copied().collect(),
        };
        all.sort_unstable();
        all.dedup();
        all
    }

    fn normalize(&mut self) {
        match self {
            Selection::Common { slots } => {
                slots.sort_unstable();
                slots.dedup();
            }
            Selection::Disjoint { sets } => sets.iter_mut().for_each(|s| s.sort_unstable()),
        }
    }
}

/// A solver's output with its evaluated influence, cost and feasibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub selection: Selection,
    pub achieved: Vec<f64>,
    pub total_cost: f64,
    pub feasible: Vec<bool>,
}

impl Allocation {
    /// Evaluates `selection` from scratch. Product `j` is feasible when its
    /// influence reaches `slack * target_j` (up to [`FEASIBILITY_TOL`]).
    pub fn evaluate(instance: &ProblemInstance, mut selection: Selection, slack: f64) -> Result<Self> {
        selection.normalize();
        if let Selection::Disjoint { sets } = &selection {
            if sets.len() != instance.n_products() {
                return Err(Error::invalid(format!(
                    "{} slot sets for {} products",
                    sets.len(),
                    instance.n_products()
                )));
            }
        }
        let achieved = (0..instance.n_products())
            .map(|j| instance.product_value(j, selection.slots_for(j)))
            .collect::<Result<Vec<_>>>()?;
        let feasible = achieved
            .iter()
            .enumerate()
            .map(|(j, &a)| a >= slack * instance.target(j) - FEASIBILITY_TOL)
            .collect();
        let total_cost = instance.cost_of(&selection.all_slots());
        Ok(Allocation { selection, achieved, total_cost, feasible })
    }

    /// Number of products flagged feasible.
    pub fn satisfied(&self) -> usize {
        self.feasible.iter().filter(|&&f| f).count()
    }

    pub fn all_feasible(&self) -> bool {
        self.feasible.iter().all(|&f| f)
    }

    pub fn slots_used(&self) -> usize {
        self.selection.all_slots().len()
    }

    pub fn total_influence(&self) -> f64 {
        self.achieved.iter().sum()
    }

    /// Re-checks structural constraints and stored values: slot ids, pairwise
    /// disjointness and budgets (disjoint variant), and achieved influence and
    /// total cost against a fresh evaluation to `1e-9`.
    pub fn validate(&self, instance: &ProblemInstance) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(msg));
        if self.selection.variant() != instance.variant {
            return fail(format!(
                "{} allocation for a {} instance",
                self.selection.variant().name(),
                instance.variant.name()
            ));
        }
        if self.achieved.len() != instance.n_products() || self.feasible.len() != instance.n_products() {
            return fail("per-product vectors have the wrong length".into());
        }
        let n = instance.n_slots();
        if let Some(&s) = self.selection.all_slots().iter().find(|&&s| s >= n) {
            return fail(format!("slot {s} out of range"));
        }
        if let Selection::Disjoint { sets } = &self.selection {
            let mut owner = vec![usize::MAX; n];
            for (j, set) in sets.iter().enumerate() {
                for &s in set {
                    if owner[s] != usize::MAX {
                        return fail(format!("slot {s} assigned to products {} and {j}", owner[s]));
                    }
                    owner[s] = j;
                }
                let spent = instance.cost_of(set);
                if spent > instance.budget(j) + FEASIBILITY_TOL {
                    return fail(format!(
                        "product {} spends {spent} over budget {}",
                        instance.products[j].id,
                        instance.budget(j)
                    ));
                }
            }
        }
        for j in 0..instance.n_products() {
            let fresh = instance.product_value(j, self.selection.slots_for(j))?;
            if (fresh - self.achieved[j]).abs() > 1e-9 {
                return fail(format!(
                    "product {} stored influence {} but recomputed {fresh}",
                    instance.products[j].id, self.achieved[j]
                ));
            }
        }
        let cost = instance.cost_of(&self.selection.all_slots());
        if (cost - self.total_cost).abs() > 1e-9 {
            return fail(format!("stored cost {} but recomputed {cost}", self.total_cost));
        }
        Ok(())
    }
}
