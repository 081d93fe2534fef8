//! Cross-product parameter sweeps with per-run and per-cell CSV output.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

use super::{solve_record, Algo, SolveOptions};
use crate::error::{Error, Result};
use crate::ingest::{gen_synthetic, ExperimentParams};
use crate::model::Variant;

/// Column order of the per-run CSV. Frozen; bump the result format version
/// if it ever changes.
pub const SWEEP_COLUMNS: [&str; 13] = [
    "alpha", "beta", "n_products", "epsilon", "lambda", "algo", "seed", "influence", "cost", "slots", "time_ms",
    "satisfied", "error",
];

/// A sweep configuration. Every list is crossed with every other; an empty
/// `alpha` list means demands follow `beta` directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub n_products: Vec<usize>,
    pub epsilon: Vec<f64>,
    pub lambda: Vec<f64>,
    pub algos: Vec<Algo>,
    pub seeds: Vec<u64>,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Record solver wall time in `time_ms`.
    pub timing: bool,
    /// Generator settings shared by all cells.
    pub base: ExperimentParams,
    pub solver: SolveOptions,
}

impl Default for SweepGrid {
    fn default() -> Self {
        let base = ExperimentParams::default();
        SweepGrid {
            alpha: vec![],
            beta: vec![base.beta],
            n_products: vec![base.n_products],
            epsilon: vec![base.epsilon],
            lambda: vec![base.lambda],
            algos: vec![Algo::Pdg, Algo::Random, Algo::Topk],
            seeds: vec![0],
            threads: None,
            timing: true,
            base,
            solver: SolveOptions::default(),
        }
    }
}

impl SweepGrid {
    pub fn from_toml(text: &str) -> Result<Self> {
        let g: SweepGrid = toml::from_str(text).map_err(|e| Error::invalid(format!("sweep config: {}", e.to_string().trim_end())))?;
        g.check()?;
        Ok(g)
    }

    pub fn check(&self) -> Result<()> {
        for (name, empty) in [
            ("beta", self.beta.is_empty()),
            ("n_products", self.n_products.is_empty()),
            ("epsilon", self.epsilon.is_empty()),
            ("lambda", self.lambda.is_empty()),
            ("algos", self.algos.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ] {
            if empty {
                return Err(Error::invalid(format!("sweep config: `{name}` needs at least one value")));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("sweep config: threads must be positive"));
        }
        self.base.check()
    }

    /// Generator parameters of every cell, in output order.
    pub fn cells(&self) -> Vec<ExperimentParams> {
        let alphas: Vec<Option<f64>> =
            if self.alpha.is_empty() { vec![None] } else { self.alpha.iter().copied().map(Some).collect() };
        let mut out = Vec::new();
        for &alpha in &alphas {
            for &beta in &self.beta {
                for &n_products in &self.n_products {
                    for &epsilon in &self.epsilon {
                        for &lambda in &self.lambda {
                            out.push(ExperimentParams {
                                alpha,
                                beta,
                                n_products,
                                epsilon,
                                lambda,
                                ..self.base.clone()
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub beta: f64,
    pub n_products: usize,
    pub epsilon: f64,
    pub lambda: f64,
    pub algo: Algo,
    pub seed: u64,
    pub influence: Option<f64>,
    pub cost: Option<f64>,
    pub slots: Option<usize>,
    pub time_ms: Option<f64>,
    pub satisfied: Option<usize>,
    pub error: Option<String>,
}

/// Means over the successful runs of one (cell, algorithm) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub alpha: f64,
    pub beta: f64,
    pub n_products: usize,
    pub epsilon: f64,
    pub lambda: f64,
    pub algo: Algo,
    pub runs: usize,
    pub failures: usize,
    pub influence: Option<f64>,
    pub cost: Option<f64>,
    pub slots: Option<f64>,
    pub time_ms: Option<f64>,
    pub satisfied: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SummaryRow>,
}

fn run_cell(params: &ExperimentParams, seed: u64, grid: &SweepGrid) -> Vec<SweepRow> {
    let params = ExperimentParams { seed, ..params.clone() };
    let row = |algo: Algo| SweepRow {
        alpha: params.alpha.unwrap_or(params.beta * params.n_products as f64),
        beta: params.effective_beta(),
        n_products: params.n_products,
        epsilon: params.epsilon,
        lambda: params.lambda,
        algo,
        seed,
        influence: None,
        cost: None,
        slots: None,
        time_ms: None,
        satisfied: None,
        error: None,
    };
    let instance = gen_synthetic(&params, (params.n_slots, params.n_users));
    grid.algos
        .iter()
        .map(|&algo| {
            let mut r = row(algo);
            let result = instance.as_ref().map_err(|e| Error::invalid(e.to_string())).and_then(|inst| {
                let opts = SolveOptions { seed, epsilon: params.epsilon, ..grid.solver.clone() };
                // The common-variant solver reads the same instance through
                // its thresholds.
                match (algo, inst.variant) {
                    (Algo::Bca, Variant::Disjoint) => {
                        solve_record(&inst.with_variant(Variant::Common)?, algo, &opts, grid.timing)
                    }
                    _ => solve_record(inst, algo, &opts, grid.timing),
                }
            });
            match result {
                Ok(rec) => {
                    r.influence = Some(rec.total_influence);
                    r.cost = Some(rec.total_cost);
                    r.slots = Some(rec.slots_used);
                    r.time_ms = rec.wall_ms;
                    r.satisfied = Some(rec.satisfied);
                }
                Err(e) => r.error = Some(e.to_string()),
            }
            r
        })
        .collect()
}

fn mean<T: Copy + Into<f64>>(vals: impl Iterator<Item = Option<T>>) -> Option<f64> {
    let v: Vec<f64> = vals.flatten().map(Into::into).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut order = Vec::new();
    let mut groups: BTreeMap<usize, Vec<&SweepRow>> = BTreeMap::new();
    let mut index: Vec<(u64, u64, usize, u64, u64, Algo)> = Vec::new();
    for r in rows {
        let key = (r.alpha.to_bits(), r.beta.to_bits(), r.n_products, r.epsilon.to_bits(), r.lambda.to_bits(), r.algo);
        let g = match index.iter().position(|k| *k == key) {
            Some(g) => g,
            None => {
                index.push(key);
                order.push(r);
                index.len() - 1
            }
        };
        groups.entry(g).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(g, rs)| {
            let first = order[g];
            let ok: Vec<&&SweepRow> = rs.iter().filter(|r| r.error.is_none()).collect();
            SummaryRow {
                alpha: first.alpha,
                beta: first.beta,
                n_products: first.n_products,
                epsilon: first.epsilon,
                lambda: first.lambda,
                algo: first.algo,
                runs: rs.len(),
                failures: rs.len() - ok.len(),
                influence: mean(ok.iter().map(|r| r.influence)),
                cost: mean(ok.iter().map(|r| r.cost)),
                slots: mean(ok.iter().map(|r| r.slots.map(|s| s as f64))),
                time_ms: mean(ok.iter().map(|r| r.time_ms)),
                satisfied: mean(ok.iter().map(|r| r.satisfied.map(|s| s as f64))),
            }
        })
        .collect()
}

/// Runs every (cell, seed) pair, in parallel, and returns rows in grid order.
/// A failing run is kept as a row with its `error` set.
pub fn run_sweep(grid: &SweepGrid) -> Result<SweepOutput> {
    grid.check()?;
    let cells = grid.cells();
    let jobs: Vec<(usize, u64)> =
        (0..cells.len()).flat_map(|c| grid.seeds.iter().map(move |&s| (c, s))).collect();
    let work = || -> Vec<SweepRow> {
        jobs.par_iter().map(|&(c, s)| run_cell(&cells[c], s, grid)).collect::<Vec<_>>().concat()
    };
    let rows = match grid.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("worker pool: {e}")))?
            .install(work),
        None => work(),
    };
    let summary = summarize(&rows);
    Ok(SweepOutput { rows, summary })
}

impl SweepOutput {
    /// True when no run met every demand.
    pub fn infeasible_only(&self) -> bool {
        !self.rows.iter().any(|r| r.error.is_none() && r.satisfied == Some(r.n_products))
    }

    pub fn write_rows(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.summary {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SweepGrid {
        SweepGrid {
            alpha: vec![0.4, 0.8],
            n_products: vec![4],
            seeds: vec![0, 1],
            timing: false,
            base: ExperimentParams { n_slots: 24, n_users: 300, ..ExperimentParams::default() },
            ..SweepGrid::default()
        }
    }

    #[test]
    fn header_matches_frozen_columns() {
        let out = run_sweep(&tiny()).unwrap();
        let mut buf = Vec::new();
        out.write_rows(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), SWEEP_COLUMNS.join(","));
        assert_eq!(out.rows.len(), 2 * 2 * 3);
        assert_eq!(out.summary.len(), 2 * 3);
        assert!(out.summary.iter().all(|s| s.runs == 2 && s.failures == 0));
    }

    #[test]
    fn rows_follow_grid_order_for_any_pool() {
        let mut g = tiny();
        g.threads = Some(1);
        let a = run_sweep(&g).unwrap();
        g.threads = Some(4);
        let b = run_sweep(&g).unwrap();
        assert_eq!(a, b);
        let keys: Vec<(f64, u64, Algo)> = a.rows.iter().map(|r| (r.alpha, r.seed, r.algo)).collect();
        assert_eq!(keys[0], (0.4, 0, Algo::Pdg));
        assert_eq!(keys[3], (0.4, 1, Algo::Pdg));
        assert_eq!(keys[6].0, 0.8);
    }

    #[test]
    fn failing_runs_are_recorded() {
        let mut g = tiny();
        g.base.variant = Variant::Common;
        g.algos = vec![Algo::Pdg, Algo::Topk];
        let out = run_sweep(&g).unwrap();
        assert!(out.rows.iter().filter(|r| r.algo == Algo::Pdg).all(|r| r.error.is_some()));
        assert!(out.rows.iter().filter(|r| r.algo == Algo::Topk).all(|r| r.error.is_none()));
        let pdg = out.summary.iter().find(|s| s.algo == Algo::Pdg).unwrap();
        assert_eq!((pdg.failures, pdg.influence), (2, None));
    }

    #[test]
    fn bca_runs_on_generated_disjoint_instances() {
        let mut g = tiny();
        g.algos = vec![Algo::Bca];
        g.alpha = vec![0.4];
        g.seeds = vec![0];
        g.solver.cg_steps = 10;
        g.solver.mc_samples = 8;
        let out = run_sweep(&g).unwrap();
        assert_eq!(out.rows[0].error, None);
    }

    #[test]
    fn grid_from_toml() {
        let g = SweepGrid::from_toml(
            "alpha = [0.4, 0.6]\nalgos = [\"pdg\", \"topk\"]\nseeds = [1, 2]\n[base]\nn_slots = 40\n[solver]\npilot = 8\n",
        )
        .unwrap();
        assert_eq!(g.cells().len(), 2);
        assert_eq!(g.base.n_slots, 40);
        assert_eq!(g.solver.pilot, 8);
        assert!(SweepGrid::from_toml("seeds = []").is_err());
    }
}
