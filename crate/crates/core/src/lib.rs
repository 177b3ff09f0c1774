//! Trace reconstruction on a tree.
//!
//! A uniform binary root sequence is broadcast down a complete d-ary tree;
//! every edge substitutes, deletes and inserts sites independently. The
//! [`recon`] module rebuilds the root from the leaves alone by aligning
//! children on short anchors and voting island by island. The [`oracle`]
//! module holds the ground-truth side: stability of every node, the stable
//! subtree, gateway sets and the adversarial reconstruction that the real
//! algorithm provably dominates. [`harness`] runs experiments over both.

pub mod error;
pub mod evolution;
pub mod harness;
pub mod io;
pub mod oracle;
pub mod recon;
pub mod rng;
pub mod tree;

pub use error::{Error, Result};
pub use evolution::{evolve_tree, ModelParams, Sequence, SiteMap};
pub use recon::{reconstruct_root, ReconConfig};
pub use rng::TieCoins;
pub use tree::{NodeId, TreeShape};
