//! Reduction of the hit-pair space to annealable sub-problems.

pub mod candidates;
pub mod kde;
pub mod sector;
pub mod subgraph;

pub use candidates::{
    calibrate, edge_id, edge_sector, load_edges, save_edges, select_candidates, select_with_threshold, true_edge_set,
    Calibration, CandidateSet, Edge,
};
pub use kde::{edge_prior, train_kde, KdeConfig, KdeModel};
pub use sector::{sectorize, sectorize_with, sectors_of, Sector, N_SECTORS};
pub use subgraph::{
    flood_fill, linear_biases, prune_degree, subgraph, subgraph_by_links, SubGraph, DEFAULT_MAX_DEGREE,
};
