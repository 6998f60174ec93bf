//! Proof-of-Authority sealing.
//!
//! Authorities are admitted one at a time against a notary attestation and
//! take turns in admission order: slot `s` belongs to `authorities[s % n]`.
//! Slots are logical; `genesis_time + slot * slot_duration` gives the block
//! timestamp. One sealer signs each block. There is no token or reward state.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{
    canonical_bytes, PublicKey, SchemeKind, SignatureBytes, SignatureScheme, Signer,
};
use crate::ledger::{Block, Chain, LedgerError, TransactionRecord, DEFAULT_BLOCK_CAPACITY};

/// A notary's signed statement vouching for a subject key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attestation {
    pub subject: PublicKey,
    pub verifier: PublicKey,
    pub statement: String,
    pub signature: SignatureBytes,
}

#[derive(Serialize)]
struct AttestationBody<'a> {
    statement: &'a str,
    subject: &'a PublicKey,
    verifier: &'a PublicKey,
}

impl Attestation {
    pub fn issue(notary: &dyn Signer, subject: PublicKey, statement: impl Into<String>) -> Self {
        let statement = statement.into();
        let verifier = notary.public_key();
        let body = canonical_bytes(&AttestationBody {
            statement: &statement,
            subject: &subject,
            verifier: &verifier,
        });
        Attestation {
            subject,
            verifier,
            statement,
            signature: notary.sign(&body),
        }
    }

    pub fn verifies(&self, scheme: &dyn SignatureScheme) -> bool {
        let body = canonical_bytes(&AttestationBody {
            statement: &self.statement,
            subject: &self.subject,
            verifier: &self.verifier,
        });
        scheme.verify(&self.verifier, &body, &self.signature)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorityEntry {
    pub key: PublicKey,
    pub attestation: Attestation,
}

/// Audit trail entry for an authority taken out of the rotation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovalRecord {
    pub key: PublicKey,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConsensusError {
    #[error("attestation does not verify or names a different subject")]
    InvalidAttestation,
    #[error("authority {0} is already admitted")]
    DuplicateAuthority(PublicKey),
    #[error("authority {0} is not in the registry")]
    UnknownAuthority(PublicKey),
    #[error("authority registry is empty")]
    EmptyRegistry,
    #[error("slot {slot} belongs to {scheduled}, not {attempted}")]
    NotYourSlot {
        slot: u64,
        scheduled: PublicKey,
        attempted: PublicKey,
    },
    #[error("no pending transactions to seal")]
    NothingToSeal,
    #[error("slot time {slot_time} precedes chain tip timestamp {tip_time}")]
    StaleSlot { slot_time: u64, tip_time: u64 },
}

/// Why [`AuthorityRegistry::validate_block`] rejected a block.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BlockViolation {
    #[error("sealer {sealer} was not scheduled for slot {slot}")]
    NotScheduled { slot: u64, sealer: PublicKey },
    #[error("block holds {count} transactions, capacity is {capacity}")]
    OverCapacity { count: usize, capacity: usize },
    #[error("registry is empty")]
    EmptyRegistry,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// Ordered set of sealing authorities plus slot clock parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorityRegistry {
    pub scheme: SchemeKind,
    pub authorities: Vec<AuthorityEntry>,
    pub removals: Vec<RemovalRecord>,
    pub slot_duration: u64,
    pub genesis_time: u64,
    pub block_capacity: usize,
}

impl AuthorityRegistry {
    pub fn new(scheme: SchemeKind) -> Self {
        AuthorityRegistry {
            scheme,
            authorities: Vec::new(),
            removals: Vec::new(),
            slot_duration: 1,
            genesis_time: 0,
            block_capacity: DEFAULT_BLOCK_CAPACITY,
        }
    }

    pub fn with_block_capacity(mut self, capacity: usize) -> Self {
        self.block_capacity = capacity;
        self
    }

    pub fn len(&self) -> usize {
        self.authorities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.authorities.is_empty()
    }

    pub fn contains(&self, key: &PublicKey) -> bool {
        self.authorities.iter().any(|a| &a.key == key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &PublicKey> {
        self.authorities.iter().map(|a| &a.key)
    }

    pub fn slot_time(&self, slot: u64) -> u64 {
        self.genesis_time + slot * self.slot_duration
    }

    /// Appends `candidate` to the rotation.
    pub fn admit_authority(
        &mut self,
        candidate: PublicKey,
        attestation: Attestation,
    ) -> Result<(), ConsensusError> {
        if attestation.subject != candidate || !attestation.verifies(&self.scheme) {
            return Err(ConsensusError::InvalidAttestation);
        }
        if self.contains(&candidate) {
            return Err(ConsensusError::DuplicateAuthority(candidate));
        }
        self.authorities.push(AuthorityEntry {
            key: candidate,
            attestation,
        });
        Ok(())
    }

    /// Takes `key` out of the rotation and records why.
    pub fn remove_authority(
        &mut self,
        key: &PublicKey,
        reason: impl Into<String>,
    ) -> Result<(), ConsensusError> {
        let pos = self
            .authorities
            .iter()
            .position(|a| &a.key == key)
            .ok_or(ConsensusError::UnknownAuthority(*key))?;
        self.authorities.remove(pos);
        self.removals.push(RemovalRecord {
            key: *key,
            reason: reason.into(),
        });
        Ok(())
    }

    pub fn scheduled_sealer(&self, slot: u64) -> Result<&PublicKey, ConsensusError> {
        if self.authorities.is_empty() {
            return Err(ConsensusError::EmptyRegistry);
        }
        let n = self.authorities.len() as u64;
        Ok(&self.authorities[(slot % n) as usize].key)
    }

    /// Seals up to `block_capacity` pending transactions, oldest first, into
    /// a block extending `chain`. `pending` is only drained on success.
    pub fn seal(
        &self,
        chain: &Chain,
        pending: &mut VecDeque<TransactionRecord>,
        slot: u64,
        sealer: &dyn Signer,
    ) -> Result<Block, ConsensusError> {
        let scheduled = *self.scheduled_sealer(slot)?;
        let attempted = sealer.public_key();
        if scheduled != attempted {
            return Err(ConsensusError::NotYourSlot {
                slot,
                scheduled,
                attempted,
            });
        }
        if pending.is_empty() {
            return Err(ConsensusError::NothingToSeal);
        }
        let slot_time = self.slot_time(slot);
        if let Some(tip) = chain.tip() {
            if slot_time < tip.timestamp {
                return Err(ConsensusError::StaleSlot {
                    slot_time,
                    tip_time: tip.timestamp,
                });
            }
        }
        let take = pending.len().min(self.block_capacity);
        let txs: Vec<_> = pending.drain(..take).collect();
        Ok(Block::sealed(chain.tip_digest(), txs, slot_time, sealer))
    }

    /// Accepts a block iff its sealer owns `slot`, it fits the capacity, and it
    /// is a valid successor of `chain`'s tip (link, time, body and seal).
    pub fn validate_block(
        &self,
        chain: &Chain,
        block: &Block,
        slot: u64,
    ) -> Result<(), BlockViolation> {
        let scheduled = self
            .scheduled_sealer(slot)
            .map_err(|_| BlockViolation::EmptyRegistry)?;
        if &block.sealer != scheduled {
            return Err(BlockViolation::NotScheduled {
                slot,
                sealer: block.sealer,
            });
        }
        if block.transactions.len() > self.block_capacity {
            return Err(BlockViolation::OverCapacity {
                count: block.transactions.len(),
                capacity: self.block_capacity,
            });
        }
        block.check_successor(chain.tip(), &self.scheme)?;
        Ok(())
    }
}
