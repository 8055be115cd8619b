//! Binary linear tree commitments (BLTC) over BLS12-381.
//!
//! A weight vector of length `2^n` is committed as a single first-group
//! element. Every position opens with a path of `n` group elements taken from
//! a binary tree of quotient commitments; the tree is maintained in place as
//! entries change, many openings aggregate into one logarithmic-size
//! inner-product proof, and proofs can be watermarked with a worker key so
//! that they only verify under that worker's public key.
//!
//! On top of the scheme, [`ownership`] provides signed epoch certificates, a
//! hash-chained append-only ledger, and a simulated training loop.

pub mod aggregation;
pub mod bench;
mod codec;
pub mod engine;
pub mod merkle;
pub mod mle;
pub mod ownership;
pub mod setup;
pub mod tree;

pub use aggregation::{
    aggregate, build_keys, verify_aggregated, AggregatedProof, AggregationInstance,
};
pub use bench::{BenchRecord, CSV_HEADER};
pub use codec::FormatError;
pub use engine::{G1Element, G2Element, GtElement, Scalar};
pub use mle::{BitIndex, WeightVector};
pub use ownership::{
    issue_certificate, simulate_training, verify_certificate, Certificate, Ledger, SignKeyPair,
    SimulationConfig, SimulationReport, WorkerKeys,
};
pub use setup::{IpaCommitKey, OpeningBasis, PublicParams, WatermarkKeyPair, WatermarkedParams};
pub use tree::{
    batch_update, commit, open_all, update, update_path, verify_individual, Commitment, PathProof,
    ProofTree, UpdateDelta,
};
