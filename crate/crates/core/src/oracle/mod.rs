//! Ground truth for the reconstruction: which nodes are stable, which sites
//! reach which leaves untouched, and what a worst-case adversary would still
//! reconstruct. Everything here reads the full evolved tree.

mod anchors;
mod event;
mod gateway;
mod majority;
mod stability;
mod verify;

pub use anchors::{anchor_correlation_stats, anchor_samples, true_shift, AnchorSample, AnchorStats};
pub use event::{
    certify_event_e, check_domination, check_shifts, DominationCheck, EventCertificate, ShiftCheck, SubEvent,
};
pub use gateway::{adversarial_reconstruct, compute_gateways, AdversarialReconstruction, GatewaySubtree};
pub use majority::{adversarial_majority_success, simulate_adversarial_majority};
pub use stability::{
    classify_stability, extract_stable_subtree, stable_subtree_bound, Instability, NodeStability, StabilityReport,
    StableSubtree,
};
pub use verify::{verify_bias_concentration, verify_correlation_bound, BiasCheck, CorrelationBound};
