//! Patient-centred health-record ledger: a mainchain plus one sidechain per
//! member, sealed by identity-attested hospital authorities, with patient
//! managed access lists. Also ships the throughput simulator and capacity
//! planner used to size such a network.
//!
//! Modules:
//! - [`ledger`]: blocks, transactions, hash-chain rules, record files
//! - [`consensus`]: authority registry, round-robin sealing and validation
//! - [`network`]: membership, routing, sealing ticks, persistence
//! - [`acl`]: grant/revoke/access with audit records
//! - [`sim`]: Poisson backlog simulation and sidechain capacity planning
//! - [`demo`]: seeded end-to-end run used by the CLI

pub mod acl;
pub mod consensus;
pub mod crypto;
pub mod demo;
pub mod ledger;
pub mod network;
pub mod sim;

pub use acl::{AccessDecision, AclError, PatientAcl};
pub use consensus::{Attestation, AuthorityRegistry, BlockViolation, ConsensusError};
pub use crypto::{Digest, KeyPair, PublicKey, SchemeKind, SignatureBytes, SignatureScheme, Signer};
pub use ledger::file::StoreError;
pub use ledger::{
    Block, Chain, ChainRole, LedgerError, MemberId, Parties, TransactionRecord, TxId, TxType,
    VerifyReport, Violation,
};
pub use network::{ChainRef, Keyring, MemberIdentity, MemberKind, NetworkError, NetworkState};
pub use sim::{SealModel, SimError, SimResult, WorkloadSpec};
