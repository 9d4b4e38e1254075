//! Clustering of networks with nodal time series via kernel-ARMA subspace
//! features on the Grassmann manifold.
//!
//! The crate turns a multivariate time series (one column per network node)
//! into points on a Grassmann manifold and clusters those points with a
//! geodesic-aware community-detection scheme. Three tasks are built on top of
//! the same feature machinery:
//!
//! * **State clustering** — segment the recording into network states by
//!   sliding a window over whole-network snapshots ([`pipeline::cluster_states`]).
//! * **Community detection** — group nodes within each state from per-node
//!   windowed features ([`pipeline::detect_communities`]).
//! * **Subnetwork tracking** — pool per-node features across states and find
//!   groups that persist over time ([`pipeline::track_subnetworks`]).
//!
//! # Quick start
//!
//! ```
//! use grassclust::synth;
//! use grassclust::config::RunConfig;
//! use grassclust::pipeline;
//!
//! // Two-state synthetic recording, 10 nodes.
//! let scenario = synth::Scenario::preset(synth::Preset::D1).truncated(2);
//! let sim = synth::gen_timeseries(&scenario, 7).unwrap();
//! let cfg = RunConfig::default();
//! let states = pipeline::cluster_states(&sim.series, &cfg.states, 7).unwrap();
//! assert!(states.partition.num_states() >= 1);
//! ```
//!
//! # Runnable examples
//!
//! Each major capability has a standalone example under `examples/`:
//!
//! * `cargo run --release --example simulate_dataset` — synthetic recordings and
//!   ground-truth sidecars.
//! * `cargo run --release --example extract_features` — Gram/Hankel features on
//!   the Grassmannian.
//! * `cargo run --release --example grassmann_geometry` — distances, log/exp
//!   maps, tangent coordinates.
//! * `cargo run --release --example sparse_neighborhoods` — geodesic sparse
//!   coding of a tangent neighborhood.
//! * `cargo run --release --example state_clustering` — full state-clustering
//!   pipeline with accuracy against ground truth.
//! * `cargo run --release --example community_detection` — per-state node
//!   communities.
//! * `cargo run --release --example subnetwork_tracking` — subnetworks tracked
//!   across states.
//!
//! A thin command-line front end over the same pipeline lives in the
//! `grassclust` binary; see `grassclust --help`.

pub mod cli;
pub mod config;
pub mod egct;
pub mod error;
pub mod eval;
pub mod grassmann;
pub mod karma;
pub mod kernels;
pub mod louvain;
pub mod pipeline;
pub mod sparse;
pub mod synth;

pub use error::{Error, Result};
