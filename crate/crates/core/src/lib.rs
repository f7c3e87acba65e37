//! Behavioral scoring for DEX wallets.
//!
//! The crate turns raw deposit/withdraw/swap event logs into two families of
//! wallet scores:
//!
//! * interpretable 0-1000 *blueprint* scores built from capped, weighted
//!   sub-category rules (one rule set per role: liquidity provider, swapper);
//! * refined *model* scores predicted by a deep residual MLP trained on
//!   noise-augmented blueprint targets.
//!
//! Supporting pieces: JSONL event ingestion ([`event`]), per-wallet feature
//! aggregation with dusk-wallet filtering ([`features`]), label generation and
//! leakage-free wallet splits ([`labels`]), the from-scratch network and
//! training loop ([`nn`]), evaluation reports ([`eval`]), a seeded synthetic
//! cohort generator ([`synth`]), and the end-to-end pipeline ([`pipeline`]).

pub mod blueprint;
pub mod error;
pub mod eval;
pub mod event;
pub mod features;
pub mod labels;
pub mod nn;
pub mod pipeline;
pub mod seeding;
pub mod synth;

pub use error::{Error, Result};
