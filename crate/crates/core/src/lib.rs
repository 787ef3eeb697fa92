//! Federated arrhythmia classification for 12-lead ECG.
//!
//! The crate covers the whole pipeline: recordings and a synthetic generator
//! ([`signal`]), engineered features ([`features`]), robust scaling fitted
//! with a count-only federated protocol ([`normalization`]), boosted-tree
//! feature selection ([`selection`]), class balancing ([`balancing`]),
//! from-scratch DNN/LSTM models ([`nn`]), FedAvg orchestration
//! ([`federation`]), metrics and reports ([`metrics`], [`report`]) and the
//! experiment driver ([`experiment`]).

pub mod balancing;
pub mod error;
pub mod experiment;
pub mod features;
pub mod federation;
pub mod metrics;
pub mod nn;
pub mod normalization;
pub mod pipeline;
pub mod report;
pub mod selection;
pub mod signal;
pub mod table;

pub use error::{Error, Result};
