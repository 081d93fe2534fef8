//! Solver dispatch, result records and parameter sweeps.

mod sweep;

pub use sweep::{run_sweep, SummaryRow, SweepGrid, SweepOutput, SweepRow, SWEEP_COLUMNS};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::baselines::{solve_random, solve_topk};
use crate::bicriteria::{solve_common, BicriteriaConfig};
use crate::continuous_greedy::CGConfig;
use crate::error::{Error, Result};
use crate::model::{Allocation, ProblemInstance, Selection, Variant};
use crate::perm_sampler::{solve_disjoint_adaptive, solve_disjoint_sampled};
use crate::primal_dual::solve_disjoint_pd;

pub const RECORD_FORMAT: &str = "slotsel-result";
pub const RECORD_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    /// Bi-criteria rounding (common variant).
    Bca,
    /// Permutation sampling (disjoint variant).
    Rand,
    /// Primal-dual greedy (disjoint variant).
    Pdg,
    Random,
    Topk,
}

impl Algo {
    pub const ALL: [Algo; 5] = [Algo::Bca, Algo::Rand, Algo::Pdg, Algo::Random, Algo::Topk];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Bca => "bca",
            Algo::Rand => "rand",
            Algo::Pdg => "pdg",
            Algo::Random => "random",
            Algo::Topk => "topk",
        }
    }

    /// The variant the solver is defined on; `None` runs on both.
    pub fn variant(self) -> Option<Variant> {
        match self {
            Algo::Bca => Some(Variant::Common),
            Algo::Rand | Algo::Pdg => Some(Variant::Disjoint),
            Algo::Random | Algo::Topk => None,
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algo::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown algorithm `{s}` (expected bca, rand, pdg, random or topk)")))
    }
}

/// Solver knobs shared by the CLI and sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub seed: u64,
    pub epsilon: f64,
    /// Failure probability of the sampler's estimate.
    pub delta: f64,
    /// Fixed sampler size; `None` sizes it from a pilot batch.
    pub samples: Option<usize>,
    pub pilot: usize,
    pub max_samples: usize,
    pub cg_steps: usize,
    pub mc_samples: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            seed: 0,
            epsilon: 0.1,
            delta: 0.1,
            samples: None,
            pilot: 64,
            max_samples: 4096,
            cg_steps: 100,
            mc_samples: 64,
        }
    }
}

/// Solver-specific values echoed in a result record.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Extras {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell_rounding: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_guess: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_feasible_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
}

/// Runs `algo` on `instance`. Rejects a solver/variant mismatch.
pub fn run_solver(instance: &ProblemInstance, algo: Algo, opts: &SolveOptions) -> Result<(Allocation, Extras)> {
    if let Some(v) = algo.variant() {
        if v != instance.variant {
            return Err(Error::invalid(format!(
                "{algo} solves {} instances, this one is {}",
                v.name(),
                instance.variant.name()
            )));
        }
    }
    let mut extras = Extras::default();
    let allocation = match algo {
        Algo::Bca => {
            let cfg = BicriteriaConfig {
                epsilon: opts.epsilon,
                cg: CGConfig { steps: opts.cg_steps, mc_samples: opts.mc_samples, ..CGConfig::default() },
                seed: opts.seed,
                ..BicriteriaConfig::default()
            };
            let out = solve_common(instance, &cfg)?;
            extras.ell_rounding = Some(out.ell_rounding);
            extras.sparsity = Some(out.sparsity);
            extras.budget_guess = Some(out.budget);
            out.allocation
        }
        Algo::Rand => {
            let out = match opts.samples {
                Some(n) => solve_disjoint_sampled(instance, n, opts.seed)?,
                None => solve_disjoint_adaptive(
                    instance,
                    opts.epsilon,
                    opts.delta,
                    opts.pilot,
                    opts.max_samples,
                    opts.seed,
                )?,
            };
            extras.n_samples = Some(out.n_samples);
            extras.n_feasible_samples = Some(out.n_feasible);
            out.allocation
        }
        Algo::Pdg => {
            let out = solve_disjoint_pd(instance, opts.seed)?;
            extras.iterations = Some(out.iterations);
            out.allocation
        }
        Algo::Random => solve_random(instance, opts.seed)?,
        Algo::Topk => solve_topk(instance)?,
    };
    Ok((allocation, extras))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductResult {
    pub id: String,
    pub target: f64,
    pub achieved: f64,
    pub satisfied: bool,
}

/// What `solve` writes. `wall_ms` covers the solver call only and is left out
/// when timing is disabled, which makes reruns byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub format: String,
    pub version: u32,
    pub algorithm: Algo,
    pub seed: u64,
    pub variant: Variant,
    pub products: Vec<ProductResult>,
    pub satisfied: usize,
    pub total_influence: f64,
    pub total_cost: f64,
    pub slots_used: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
    #[serde(flatten)]
    pub extras: Extras,
    pub selection: Selection,
}

impl ResultRecord {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Solves, re-validates the allocation against the instance and builds the
/// record.
pub fn solve_record(instance: &ProblemInstance, algo: Algo, opts: &SolveOptions, timing: bool) -> Result<ResultRecord> {
    let start = Instant::now();
    let (allocation, extras) = run_solver(instance, algo, opts)?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    allocation.validate(instance)?;
    let products = instance
        .products
        .iter()
        .enumerate()
        .map(|(j, p)| ProductResult {
            id: p.id.clone(),
            target: instance.target(j),
            achieved: allocation.achieved[j],
            satisfied: allocation.feasible[j],
        })
        .collect();
    Ok(ResultRecord {
        format: RECORD_FORMAT.to_string(),
        version: RECORD_VERSION,
        algorithm: algo,
        seed: opts.seed,
        variant: instance.variant,
        products,
        satisfied: allocation.satisfied(),
        total_influence: allocation.total_influence(),
        total_cost: allocation.total_cost,
        slots_used: allocation.slots_used(),
        wall_ms: timing.then_some(elapsed),
        extras,
        selection: allocation.selection,
    })
}

/// Re-checks a stored record against its instance: the selection must be
/// valid and the reported values must match a fresh evaluation to `1e-9`.
pub fn validate_record(instance: &ProblemInstance, record: &ResultRecord) -> Result<()> {
    let fresh = Allocation::evaluate(instance, record.selection.clone(), 1.0)?;
    fresh.validate(instance)?;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + b.abs());
    if record.products.len() != instance.n_products() {
        return Err(Error::Validation(format!(
            "record lists {} products, instance has {}",
            record.products.len(),
            instance.n_products()
        )));
    }
    for (j, p) in record.products.iter().enumerate() {
        if p.id != instance.products[j].id || !close(p.achieved, fresh.achieved[j]) || p.satisfied != fresh.feasible[j] {
            return Err(Error::Validation(format!("product {} does not match a fresh evaluation", p.id)));
        }
    }
    if !close(record.total_cost, fresh.total_cost)
        || record.slots_used != fresh.slots_used()
        || record.satisfied != fresh.satisfied()
        || !close(record.total_influence, fresh.total_influence())
    {
        return Err(Error::Validation("totals do not match a fresh evaluation".into()));
    }
    Ok(())
}
