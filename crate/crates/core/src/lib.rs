//! Multi-product billboard slot selection over trajectory data.
//!
//! Slots are fixed-duration rental windows on billboards. A slot influences a
//! user with some probability when the user is near the billboard during the
//! window; the expected number of influenced, product-relevant users is a
//! monotone submodular function of the selected slot set. The crate solves two
//! selection problems on top of that function:
//!
//! * the *common* variant, where one shared slot set must reach a threshold
//!   for every product at minimum cost ([`bicriteria`]), and
//! * the *disjoint* variant, where each product gets its own budgeted slot set
//!   and no slot is shared ([`perm_sampler`], [`primal_dual`]).
//!
//! [`baselines`] holds the random and top-k comparison allocators,
//! [`ingest`] loads CSV/JSON data and generates synthetic instances, and
//! [`harness`] runs solvers and parameter sweeps for the `slotsel` binary.

pub mod baselines;
pub mod bicriteria;
pub mod continuous_greedy;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod model;
pub mod perm_sampler;
pub mod primal_dual;
pub mod rng;
pub mod submodular;

pub use error::{Error, Result};
pub use model::{
    build_influence_matrix, influence, marginal_gain, product_influence, Allocation, Billboard,
    BillboardSlot, CoordSystem, Coverage, InfluenceMatrix, Point, ProblemInstance, Product, Scope,
    Selection, SlotCatalog, SlotWindow, TrajectoryRecord, Variant,
};
