//! # critlab — a workbench for two-dimensional lattice statistical mechanics
//!
//! This crate implements, at "desk scale" (exact enumeration and modest
//! Monte Carlo), the interlocking family of planar lattice models that sit
//! at the centre of the modern theory of critical phenomena:
//!
//! * **Bernoulli percolation** on a self-dual edge construction over the
//!   even sublattice of ℤ², with exact planar duality, crossing events,
//!   connection probabilities θ_n and Russo pivotal derivatives
//!   ([`percolation`], [`lattice`]).
//! * A generic **Gibbs-measure framework** — energy functions with
//!   singleton and pair terms, boundary conditions, an exact-enumeration
//!   oracle over discrete or quadrature state spaces, joint cumulants up
//!   to fourth order, and a generic Metropolis sampler ([`gibbs`]).
//! * The **Ising model** — Glauber and Wolff dynamics, magnetization,
//!   two-point functions, critical-exponent fits — together with the
//!   **random-current representation** and the tree bound on fourth
//!   cumulants ([`ising`], [`currents`]).
//! * The **FK / random-cluster model** for real q ≥ 1 — exact weights,
//!   heat-bath dynamics, the Edwards–Sokal coupling to Potts, the
//!   self-dual point, and the medial loop representation ([`fk`]).
//! * The **six-vertex model** — ice-rule tilings, the weight c = √(2+√q),
//!   row transfer matrices with conserved up-arrow sectors, and
//!   Perron–Frobenius eigenvalue extraction by power iteration ([`sixv`]).
//! * The generalized **OSSS inequality** — monotonic measures on {0,1}^E,
//!   decision-tree revealment, and exhaustive verification of
//!   Var(f) ≤ Σ_e P(e ∈ Ê) Cov(f, w_e) ([`osss`]).
//! * Lattice **Φ⁴ field theory** — Metropolis dynamics, block-spin laws,
//!   normalized linear statistics, Gaussianity diagnostics via cumulants,
//!   and an exact Gaussian free field sampler ([`phi4`]).
//! * **Isoradial embeddings** ι_α of ℤ² with unit-circumradius faces and
//!   the row-swap dynamics T_j ([`isoradial`]).
//! * **Loop homotopy** in punctured planes — free-group words from signed
//!   ray crossings, relevant-loop filtering, and a Wasserstein-style
//!   ensemble distance between loop families ([`homotopy`]).
//!
//! ## Runnable examples
//!
//! Each major capability has a self-contained example; run them with
//! `cargo run --release -p critlab --example <name>`:
//!
//! | example | what it shows |
//! |---|---|
//! | `percolation_duality` | exact crossing probability ½ and per-configuration planar duality |
//! | `percolation_sharpness` | θ_n decay below p = ½ and the Russo / differential-inequality picture |
//! | `ising_wolff` | Wolff dynamics across the 2D critical point; susceptibility scan |
//! | `random_currents` | current expansion vs exact enumeration; the tree bound |
//! | `fk_edwards_sokal` | FK heat-bath sampling, Edwards–Sokal coloring, self-dual point |
//! | `six_vertex_spectrum` | transfer-matrix blocks, Perron–Frobenius eigenvalues, sector ratios |
//! | `osss_inequality` | randomized verification of the OSSS variance bound |
//! | `phi4_cumulants` | fourth-cumulant Gaussianity diagnostics for lattice Φ⁴ and the GFF |
//! | `isoradial_embedding` | isoradial embeddings, unit-circle faces, row-swap dynamics |
//! | `loop_homotopy` | loop words in punctured planes and the ensemble distance |
//!
//! ## Command-line harness
//!
//! A thin binary `critlab` exposes every capability as a subcommand
//! (`perco-cross`, `ising-corr`, `sixv-spectrum`, …, `accept`) with JSON
//! or CSV output and reproducible seeding; see the README or
//! `critlab --help`. All experiment randomness flows from the `--seed`
//! flag — the wall clock is never consulted.

pub mod acceptance;
pub mod cli;
pub mod currents;
pub mod error;
pub mod fk;
pub mod gibbs;
pub mod graph;
pub mod homotopy;
pub mod ising;
pub mod isoradial;
pub mod lattice;
pub mod osss;
pub mod percolation;
pub mod phi4;
pub mod rng;
pub mod sixv;
pub mod util;

pub use error::{Error, Result};
