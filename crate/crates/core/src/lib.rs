//! Geometric line model of ranked-retrieval systems.
//!
//! Each retrieval system is represented, per topic, by a line through the
//! origin. The length of the projection of a "relevant set vector" onto a
//! system's line approximates how many relevant documents that system
//! retrieves. From pairwise overlap statistics (the relative detection power
//! `k = a1/a2` and the overlap ratio `rho = a12/a2`) the angle between two
//! lines follows in closed form, and unions over several systems can be
//! estimated by repeatedly combining projections.
//!
//! The crate also ships the rank-averaging fusion scorer, a seeded synthetic
//! generator with brute-force union oracles, and the `irgeom` CLI.
//!
//! Modules, bottom-up:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`trec_io`] | run / qrels parsing and writing, judged lists |
//! | [`accumulation`] | accumulated relevant counts `a_i(r)` and overlap curves |
//! | [`ratio_model`] | through-origin regression for `k` and `rho` |
//! | [`geometry`] | angle from overlap counts, projection combination, Gram embedding |
//! | [`estimation`] | multi-system union estimates and case search |
//! | [`fusion`] | rank-averaging fusion and its f / B / G report |
//! | [`synthetic`] | seeded ensembles and ground truth |
//! | [`cli`] | subcommand implementations used by the binary |

pub mod accumulation;
pub mod cli;
pub mod error;
pub mod estimation;
pub mod fusion;
pub mod geometry;
pub mod ratio_model;
pub mod synthetic;
pub mod trec_io;

pub use error::{Error, Result};
