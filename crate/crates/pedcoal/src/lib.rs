//! Gene genealogies traced through a fixed diploid pedigree.
//!
//! A pedigree is sampled once from a Cannings model, then many unlinked loci
//! are followed back through it. Under Wright-Fisher the per-pedigree
//! genealogy is Kingman's coalescent; with large families it is a
//! Ξ-coalescent driven by the pedigree's own sequence of paintboxes, and the
//! statistics of a sample vary from pedigree to pedigree.
//!
//! Modules:
//!
//! - [`partitions`]: set partitions, grouped partitions, enumeration.
//! - [`paintbox`]: paintboxes and the merger law they induce.
//! - [`pedigree`]: Cannings offspring matrices and realized pedigrees.
//! - [`quenched`]: the walk of lineages through one pedigree, plus the exact
//!   one-generation law for small cases.
//! - [`limit`]: intensities, paintbox paths and the limiting coalescent.
//! - [`genstats`]: branch spectra, SFS estimates, variance decomposition.
//! - [`cli`]: the `pedcoal` binary.
//!
//! # Examples
//!
//! ```text
//! cargo run --example paintbox_mergers
//! cargo run --example transition_oracle
//! cargo run --release --example cannings_models
//! cargo run --release --example quenched_genealogy
//! cargo run --release --example limit_coalescent
//! cargo run --release --example naive_vs_limit
//! cargo run --release --example beta_truncation
//! cargo run --release --example site_frequency_spectrum -- [loci]
//! cargo run --release --example variance_decomposition -- [pedigrees] [loci]
//! ```
//!
//! Library use, one pedigree and a handful of loci:
//!
//! ```
//! use pedcoal::partitions::{GroupedPartition, Partition};
//! use pedcoal::pedigree::{CanningsModel, Pedigree};
//! use pedcoal::quenched::{run_loci, RunOptions};
//!
//! let ped = Pedigree::new(CanningsModel::WrightFisher { n: 50 }, 7).unwrap();
//! let xi = GroupedPartition::from(Partition::singletons(4));
//! let runs = run_loci(&ped, &xi, 0..3, &RunOptions::to_mrca(1.0 / 100.0), 7).unwrap();
//! assert_eq!(runs.len(), 3);
//! ```

pub mod cli;
pub mod error;
pub mod genstats;
pub mod limit;
pub mod paintbox;
pub mod partitions;
pub mod pedigree;
pub mod quenched;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
