//! Splitting, client partitioning, FedAvg and the communication-round loop.

mod engine;
mod fedavg;
mod split;

pub use engine::{
    client_seed, derive_seed, init_seed, run_federation, train_centralized, ClientRound, ClientState,
    FederationConfig, FederationHistory, PartitionMode, RoundLog, SelectionMode,
};
pub use fedavg::fedavg;
pub use split::{
    apportion, audit_partition, iid_indices, noniid_indices, partition_iid, partition_noniid,
    split_indices, split_train_val_test, ClientAudit, PartitionAudit, Partitionable, SplitIndices,
};
