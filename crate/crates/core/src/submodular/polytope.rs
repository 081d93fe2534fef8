use serde::{Deserialize, Serialize};

use super::FractionalPoint;
use crate::error::{Error, Result};

/// The two structured polytopes the linear oracle supports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Polytope {
    /// `{x in [0,1]^n : sum x <= k}`.
    Cardinality { k: usize, n: usize },
    /// `{x in [0,1]^n : sum c_i x_i <= budget}`.
    Knapsack { budget: f64, costs: Vec<f64> },
}

impl Polytope {
    pub fn dimension(&self) -> usize {
        match self {
            Polytope::Cardinality { n, .. } => *n,
            Polytope::Knapsack { costs, .. } => costs.len(),
        }
    }

    fn check(&self) -> Result<()> {
        if let Polytope::Knapsack { budget, costs } = self {
            if !(*budget >= 0.0) || costs.iter().any(|c| !(*c >= 0.0)) {
                return Err(Error::invalid("knapsack budget and costs must be nonnegative"));
            }
        }
        Ok(())
    }

    /// Membership test with absolute tolerance `tol` on every constraint.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dimension() || x.iter().any(|&v| v < -tol || v > 1.0 + tol) {
            return false;
        }
        match self {
            Polytope::Cardinality { k, .. } => x.iter().sum::<f64>() <= *k as f64 + tol,
            Polytope::Knapsack { budget, costs } => {
                x.iter().zip(costs).map(|(v, c)| v * c).sum::<f64>() <= budget + tol
            }
        }
    }
}

/// Vertex of `polytope` maximizing `weights . x`.
///
/// Cardinality: indicator of the `k` largest positive weights. Knapsack:
/// positive-weight items by decreasing weight/cost density (free items
/// first), the last one fractional at the budget boundary. Ties go to the
/// smaller index; nonpositive weights are never selected.
pub fn lp_direction(weights: &[f64], polytope: &Polytope) -> Result<FractionalPoint> {
    polytope.check()?;
    let n = polytope.dimension();
    if weights.len() != n {
        return Err(Error::invalid(format!("{} weights for dimension {n}", weights.len())));
    }
    let mut x = vec![0.0; n];
    let mut positive: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
    match polytope {
        Polytope::Cardinality { k, .. } => {
            positive.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
            for &i in positive.iter().take(*k) {
                x[i] = 1.0;
            }
        }
        Polytope::Knapsack { budget, costs } => {
            let density = |i: usize| {
                if costs[i] == 0.0 {
                    f64::INFINITY
                } else {
                    weights[i] / costs[i]
                }
            };
            positive.sort_by(|&a, &b| density(b).total_cmp(&density(a)).then(a.cmp(&b)));
            let mut left = *budget;
            for i in positive {
                if costs[i] <= left {
                    x[i] = 1.0;
                    left -= costs[i];
                } else {
                    x[i] = left / costs[i];
                    break;
                }
            }
        }
    }
    FractionalPoint::new(x)
}
