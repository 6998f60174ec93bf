//! Block and transaction data model plus the hash-chain integrity rules.
//!
//! A [`Block`] commits to its transactions through `tx_root` (SHA-256 of the
//! canonical transaction list) and to its predecessor through `prev_header`.
//! The sealer signs [`Block::header_digest`], which covers `prev_header`, the
//! transaction ids in order, `tx_root`, the timestamp and the sealer key, so a
//! change to any field of any block is caught either by the body check, the
//! seal check, or the next block's link check.

pub mod file;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{
    canonical_bytes, Digest, PublicKey, SchemeKind, SignatureBytes, SignatureScheme, Signer,
};

/// Default maximum number of transactions per block.
pub const DEFAULT_BLOCK_CAPACITY: usize = 256;

/// Version written into every file header.
pub const FORMAT_VERSION: u32 = 1;

/// Network-wide transaction identifier. The same id on the mainchain and a
/// sidechain marks two copies of one anchored transaction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TxId(pub String);

impl fmt::Display for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Identifier of a hospital or patient member.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MemberId(pub String);

impl fmt::Display for MemberId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The six transaction categories a member can produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TxType {
    /// A member joining or leaving the network.
    JoinLeave,
    /// End of a visit producing a discharge summary.
    DischargeSummary,
    /// Information shared between two hospital systems.
    InterHospitalShare,
    /// Patient records accessed by a new entity (also used for ACL changes).
    RecordAccess,
    /// New diagnosis or change to a health record.
    DiagnosisOrChange,
    /// Financial request or transaction.
    Financial,
}

impl TxType {
    pub const ALL: [TxType; 6] = [
        TxType::JoinLeave,
        TxType::DischargeSummary,
        TxType::InterHospitalShare,
        TxType::RecordAccess,
        TxType::DiagnosisOrChange,
        TxType::Financial,
    ];
}

/// Members a transaction concerns.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Parties {
    pub patient: Option<MemberId>,
    pub hospitals: Vec<MemberId>,
}

impl Parties {
    pub fn patient(patient: MemberId) -> Self {
        Parties {
            patient: Some(patient),
            hospitals: Vec::new(),
        }
    }

    pub fn hospitals(hospitals: impl IntoIterator<Item = MemberId>) -> Self {
        Parties {
            patient: None,
            hospitals: hospitals.into_iter().collect(),
        }
    }

    pub fn encounter(patient: MemberId, hospital: MemberId) -> Self {
        Parties {
            patient: Some(patient),
            hospitals: vec![hospital],
        }
    }

    pub fn names(&self, member: &MemberId) -> bool {
        self.patient.as_ref() == Some(member) || self.hospitals.contains(member)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TxSignature {
    pub signer: PublicKey,
    pub signature: SignatureBytes,
}

/// One routed event. Payloads stay off-chain; only their digest and a
/// locator are recorded.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub tx_id: TxId,
    pub tx_type: TxType,
    pub data_hash: Digest,
    pub path: String,
    pub timestamp: u64,
    pub parties: Parties,
    /// Each signer signs the raw `data_hash` bytes.
    pub signatures: Vec<TxSignature>,
    /// Snapshot of the permitted provider keys, stamped on submission.
    pub acl: Vec<PublicKey>,
}

impl TransactionRecord {
    /// An unsigned record with an empty ACL.
    pub fn new(
        tx_id: TxId,
        tx_type: TxType,
        data_hash: Digest,
        path: impl Into<String>,
        timestamp: u64,
        parties: Parties,
    ) -> Self {
        TransactionRecord {
            tx_id,
            tx_type,
            data_hash,
            path: path.into(),
            timestamp,
            parties,
            signatures: Vec::new(),
            acl: Vec::new(),
        }
    }

    pub fn signed_by(mut self, signer: &dyn Signer) -> Self {
        self.signatures.push(TxSignature {
            signer: signer.public_key(),
            signature: signer.sign(self.data_hash.as_bytes()),
        });
        self
    }

    /// True when every attached signature verifies over `data_hash`.
    pub fn signatures_valid(&self, scheme: &dyn SignatureScheme) -> bool {
        self.signatures
            .iter()
            .all(|s| scheme.verify(&s.signer, self.data_hash.as_bytes(), &s.signature))
    }

    pub fn is_signed_by(&self, key: &PublicKey) -> bool {
        self.signatures.iter().any(|s| &s.signer == key)
    }
}

/// Sealed container of transactions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub prev_header: Digest,
    pub tx_root: Digest,
    pub transactions: Vec<TransactionRecord>,
    pub timestamp: u64,
    pub sealer: PublicKey,
    pub seal_signature: SignatureBytes,
}

#[derive(Serialize)]
struct HeaderView<'a> {
    prev_header: &'a Digest,
    sealer: &'a PublicKey,
    timestamp: u64,
    tx_ids: Vec<&'a TxId>,
    tx_root: &'a Digest,
}

impl Block {
    /// Builds and signs a block over `transactions`.
    pub fn sealed(
        prev_header: Digest,
        transactions: Vec<TransactionRecord>,
        timestamp: u64,
        signer: &dyn Signer,
    ) -> Block {
        let mut block = Block {
            prev_header,
            tx_root: Block::compute_tx_root(&transactions),
            transactions,
            timestamp,
            sealer: signer.public_key(),
            seal_signature: SignatureBytes::default(),
        };
        block.seal_signature = signer.sign(block.header_digest().as_bytes());
        block
    }

    pub fn compute_tx_root(transactions: &[TransactionRecord]) -> Digest {
        Digest::of(&canonical_bytes(transactions))
    }

    /// Digest linking the next block to this one; also the message the
    /// sealer signs.
    pub fn header_digest(&self) -> Digest {
        let view = HeaderView {
            prev_header: &self.prev_header,
            sealer: &self.sealer,
            timestamp: self.timestamp,
            tx_ids: self.transactions.iter().map(|t| &t.tx_id).collect(),
            tx_root: &self.tx_root,
        };
        Digest::of(&canonical_bytes(&view))
    }

    pub fn seal_valid(&self, scheme: &dyn SignatureScheme) -> bool {
        scheme.verify(
            &self.sealer,
            self.header_digest().as_bytes(),
            &self.seal_signature,
        )
    }

    /// Checks this block as the successor of `prev` (`None` for block 0).
    /// Link and ordering faults are reported before content faults.
    pub fn check_successor(
        &self,
        prev: Option<&Block>,
        scheme: &dyn SignatureScheme,
    ) -> Result<(), LedgerError> {
        let expected = prev.map_or(Digest::ZERO, Block::header_digest);
        if self.prev_header != expected {
            return Err(LedgerError::HashMismatch {
                target: HashTarget::PrevHeader,
                expected,
                found: self.prev_header,
            });
        }
        if let Some(prev) = prev {
            if self.timestamp < prev.timestamp {
                return Err(LedgerError::TimestampRegression {
                    previous: prev.timestamp,
                    found: self.timestamp,
                });
            }
        }
        if self.transactions.is_empty() {
            return Err(LedgerError::EmptyBlock);
        }
        let root = Block::compute_tx_root(&self.transactions);
        if root != self.tx_root {
            return Err(LedgerError::HashMismatch {
                target: HashTarget::TxRoot,
                expected: root,
                found: self.tx_root,
            });
        }
        if !self.seal_valid(scheme) {
            return Err(LedgerError::BadSeal);
        }
        Ok(())
    }
}

/// Which hash commitment failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HashTarget {
    PrevHeader,
    TxRoot,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("{target:?} mismatch: expected {expected}, found {found}")]
    HashMismatch {
        target: HashTarget,
        expected: Digest,
        found: Digest,
    },
    #[error("timestamp {found} precedes previous block timestamp {previous}")]
    TimestampRegression { previous: u64, found: u64 },
    #[error("block has no transactions")]
    EmptyBlock,
    #[error("seal signature does not verify under the sealer key")]
    BadSeal,
}

/// A failed check at a block index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub index: usize,
    pub error: LedgerError,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "block {}: {}", self.index, self.error)
    }
}

/// Result of [`Chain::verify`]: every violation found, in block order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub blocks_checked: usize,
    pub violations: Vec<Violation>,
}

impl VerifyReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChainRole {
    Mainchain,
    PatientSidechain { owner: MemberId },
    HospitalSidechain { owner: MemberId },
}

impl ChainRole {
    pub fn owner(&self) -> Option<&MemberId> {
        match self {
            ChainRole::Mainchain => None,
            ChainRole::PatientSidechain { owner } | ChainRole::HospitalSidechain { owner } => {
                Some(owner)
            }
        }
    }
}

/// An append-only block sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    pub chain_id: String,
    pub role: ChainRole,
    /// For sidechains: the mainchain JoinLeave transaction that created it.
    pub anchor: Option<TxId>,
    pub scheme: SchemeKind,
    pub blocks: Vec<Block>,
}

impl Chain {
    pub fn new(chain_id: impl Into<String>, role: ChainRole, scheme: SchemeKind) -> Self {
        Chain {
            chain_id: chain_id.into(),
            role,
            anchor: None,
            scheme,
            blocks: Vec::new(),
        }
    }

    pub fn with_anchor(mut self, anchor: TxId) -> Self {
        self.anchor = Some(anchor);
        self
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn tip(&self) -> Option<&Block> {
        self.blocks.last()
    }

    /// Header digest of the tip, or the genesis marker for an empty chain.
    pub fn tip_digest(&self) -> Digest {
        self.tip().map_or(Digest::ZERO, Block::header_digest)
    }

    pub fn transactions(&self) -> impl Iterator<Item = &TransactionRecord> {
        self.blocks.iter().flat_map(|b| b.transactions.iter())
    }

    pub fn tx_count(&self) -> usize {
        self.blocks.iter().map(|b| b.transactions.len()).sum()
    }

    /// Appends `block` after checking it against the current tip.
    pub fn append_block(&mut self, block: Block) -> Result<(), LedgerError> {
        block.check_successor(self.tip(), &self.scheme)?;
        self.blocks.push(block);
        Ok(())
    }

    /// Checks every link, timestamp, body commitment and seal. Never fails;
    /// faults are returned in the report.
    pub fn verify(&self) -> VerifyReport {
        let mut violations = Vec::new();
        for (index, block) in self.blocks.iter().enumerate() {
            let prev = index.checked_sub(1).map(|i| &self.blocks[i]);
            if let Err(error) = block.check_successor(prev, &self.scheme) {
                violations.push(Violation { index, error });
            }
        }
        VerifyReport {
            blocks_checked: self.blocks.len(),
            violations,
        }
    }
}
