//! Simulation library for decentralized online maximization of continuous
//! DR-submodular rewards over a network of learners.
//!
//! The crate is organized around the experiment pipeline:
//!
//! * [`network`] — communication graphs, lazy-Metropolis mixing matrices,
//!   spectral constants, and (accelerated) gossip steps.
//! * [`sets`] — convex decision sets inside the unit cube with exact linear
//!   maximization and Euclidean projection oracles.
//! * [`rewards`] — quadratic DR-submodular reward sequences, stochastic
//!   first-order oracles, the boosted gradient estimators, and property
//!   checkers.
//! * [`doco`] — gradient-fed decentralized online convex optimization
//!   engines (blocked perturbation-based engines and a projection baseline).
//! * [`reductions`] — the boosting wrapper that turns a linear-loss engine
//!   into an α-regret maximizer, and the blocked meta-Frank-Wolfe scheme.
//! * [`eval`] — offline optimum computation, α-regret traces, slope fits,
//!   and Monte Carlo test statistics.
//! * [`verify`] — self-contained verification suites over all of the above.
//!
//! Every source of randomness is a named [`rng`] stream derived from one
//! master seed, so entire experiments are reproducible bit-for-bit.

pub mod doco;
pub mod eval;
pub mod network;
pub mod quadrature;
pub mod reductions;
pub mod rewards;
pub mod rng;
pub mod sampling;
pub mod sets;
pub mod verify;
