//! QUBO solvers: annealing, exhaustive search and the random baseline.

pub mod bootstrap;
pub mod brute;
pub mod convergence;
pub mod sa;

pub use bootstrap::{bootstrap_mean, BootstrapSummary, DEFAULT_PSEUDO};
pub use brute::{brute_force, random_baseline, BRUTE_FORCE_LIMIT};
pub use convergence::{measure_convergence, write_convergence_csv, ConvergenceProtocol, ConvergenceStats};
pub use sa::{anneal_trace, metropolis_accept, simulated_anneal, Schedule};
