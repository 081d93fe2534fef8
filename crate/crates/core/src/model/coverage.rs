use super::{InfluenceMatrix, Scope};
use crate::error::{Error, Result};

/// Incremental evaluator of the influence of a growing slot set.
///
/// Keeps the per-user survival product `prod (1 - Pr(s, u))` over the selected
/// slots, so a marginal gain only touches the users the candidate slot reaches.
#[derive(Debug, Clone)]
pub struct Coverage<'m> {
    matrix: &'m InfluenceMatrix,
    scope: Scope,
    survival: Vec<f64>,
    selected: Vec<bool>,
    len: usize,
    value: f64,
}

impl<'m> Coverage<'m> {
    pub fn new(matrix: &'m InfluenceMatrix, scope: Scope) -> Result<Self> {
        matrix.check_scope(scope)?;
        Ok(Coverage {
            matrix,
            scope,
            survival: vec![1.0; matrix.n_users()],
            selected: vec![false; matrix.n_slots()],
            len: 0,
            value: 0.0,
        })
    }

    pub fn with_slots(matrix: &'m InfluenceMatrix, scope: Scope, slots: &[usize]) -> Result<Self> {
        let mut cov = Coverage::new(matrix, scope)?;
        for &s in slots {
            cov.check_slot(s)?;
            cov.insert(s);
        }
        Ok(cov)
    }

    fn check_slot(&self, s: usize) -> Result<()> {
        if s < self.matrix.n_slots() {
            Ok(())
        } else {
            Err(Error::UnknownSlot(s))
        }
    }

    pub fn matrix(&self) -> &'m InfluenceMatrix {
        self.matrix
    }

    pub fn scope(&self) -> Scope {
        self.scope
    }

    /// Current influence of the selected set.
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn contains(&self, s: usize) -> bool {
        self.selected[s]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Gain of adding `s`; zero when `s` is already selected.
    pub fn gain(&self, s: usize) -> f64 {
        if self.selected[s] {
            return 0.0;
        }
        self.matrix
            .slot_entries(self.scope, s)
            .iter()
            .map(|&(u, p)| self.survival[u as usize] * p)
            .sum()
    }

    /// Adds `s` and returns its gain.
    pub fn insert(&mut self, s: usize) -> f64 {
        if self.selected[s] {
            return 0.0;
        }
        let mut gain = 0.0;
        for &(u, p) in self.matrix.slot_entries(self.scope, s) {
            let surv = &mut self.survival[u as usize];
            gain += *surv * p;
            *surv *= 1.0 - p;
        }
        self.selected[s] = true;
        self.len += 1;
        self.value += gain;
        gain
    }

    /// Survival product of user `u` under the current set.
    pub fn survival(&self, u: usize) -> f64 {
        self.survival[u]
    }

    /// Selected slot ids in increasing order.
    pub fn slots(&self) -> Vec<usize> {
        (0..self.selected.len()).filter(|&s| self.selected[s]).collect()
    }
}

fn evaluate(matrix: &InfluenceMatrix, scope: Scope, slots: &[usize]) -> Result<f64> {
    let mut seen = vec![false; matrix.n_slots()];
    let mut cov = Coverage::new(matrix, scope)?;
    for &s in slots {
        cov.check_slot(s)?;
        if !std::mem::replace(&mut seen[s], true) {
            cov.insert(s);
        }
    }
    Ok(cov.value())
}

/// Expected number of users influenced by `slots`.
pub fn influence(matrix: &InfluenceMatrix, slots: &[usize]) -> Result<f64> {
    evaluate(matrix, Scope::All, slots)
}

/// Expected number of users relevant to `product` influenced by `slots`.
pub fn product_influence(matrix: &InfluenceMatrix, product: usize, slots: &[usize]) -> Result<f64> {
    evaluate(matrix, Scope::Product(product), slots)
}

/// `product_influence(S + s) - product_influence(S)`. Returns 0 when `s` is
/// already in `slots`.
pub fn marginal_gain(matrix: &InfluenceMatrix, product: usize, slots: &[usize], s: usize) -> Result<f64> {
    let cov = Coverage::with_slots(matrix, Scope::Product(product), slots)?;
    cov.check_slot(s)?;
    Ok(cov.gain(s))
}
