//! Vertex least squares for rank-one matrix completion, its consensus
//! interpretation, and spectral rate analysis.
//!
//! ```
//! use rank1_vls::{generate_family, sample_instance, Family, StopRule, VlsState};
//!
//! let graph = generate_family(Family::Line, 8).unwrap();
//! let inst = sample_instance(&graph, 0.5, 7).unwrap();
//! let start = VlsState::seeded(&inst, 7);
//! let traj = rank1_vls::run(start, &inst, &StopRule::default(), 1).unwrap();
//! assert!(traj.final_cost() < 1e-16);
//! ```

pub mod consensus;
pub mod error;
pub mod graph;
pub mod instance;
pub mod jacobi;
pub mod lab;
pub mod matrix;
pub mod spectral;
pub mod vls;

pub use consensus::{build_matrices, lift, verify_dynamics, ConsensusSnapshot, DynamicsCheck};
pub use error::{Error, Result};
pub use graph::{generate_family, Family, GraphStats, RevealedGraph};
pub use instance::{rng_from_seed, sample_instance, RankOneInstance};
pub use lab::{run_experiment, ExperimentConfig, Figure, TrialRecord, TrialStatus, DEFAULT_SEED};
pub use matrix::Matrix;
pub use spectral::{eig_reversible, limit_matrix, spectral_report, theorem2_bound, SpectralReport};
pub use vls::{init_state, run, Init, StopRule, Trajectory, VlsState};
