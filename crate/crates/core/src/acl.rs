//! Patient-controlled access lists.
//!
//! Each patient holds a list of provider keys. Grants and revokes must be
//! signed by the patient and each one yields a `RecordAccess` audit
//! transaction for the patient's sidechain; so does the first access by an
//! entity the patient has not seen before. Replaying those audit records in
//! order rebuilds the list, so the sidechain is the only authoritative store.
//!
//! Access decisions use the snapshot stamped into the transaction being read,
//! never the live list: a revoke cannot reach back into sealed history and a
//! grant only covers transactions submitted after it.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::crypto::{canonical_bytes, Digest, PublicKey, SignatureBytes, SignatureScheme, Signer};
use crate::ledger::{MemberId, Parties, TransactionRecord, TxId, TxSignature, TxType};

const GRANT_PREFIX: &str = "acl/grant/";
const REVOKE_PREFIX: &str = "acl/revoke/";
const ACCESS_PREFIX: &str = "acl/access/";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AclError {
    #[error("signature does not verify under the patient key")]
    BadSignature,
    #[error("provider {0} is already authorized")]
    AlreadyAuthorized(PublicKey),
    #[error("provider {0} is not authorized")]
    NotAuthorized(PublicKey),
    #[error("the null key cannot be authorized")]
    NullKey,
    #[error("transaction {tx} does not belong to patient {patient}")]
    WrongPatient { tx: TxId, patient: MemberId },
    #[error("audit record {0} does not match the replayed state")]
    ReplayMismatch(TxId),
}

/// Id and time for the audit transaction an operation may emit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditStamp {
    pub tx_id: TxId,
    pub timestamp: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessDecision {
    Allowed,
    Denied,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessOutcome {
    pub decision: AccessDecision,
    /// Present only on the first access by this entity.
    pub audit: Option<TransactionRecord>,
}

#[derive(Serialize)]
struct AclStatement<'a> {
    op: &'a str,
    patient: &'a MemberId,
    subject: &'a PublicKey,
    version: Option<u64>,
    record: Option<&'a TxId>,
}

/// Digest the patient signs to authorize `provider`; `version` is the list
/// version after the grant.
pub fn grant_digest(patient: &MemberId, provider: &PublicKey, version: u64) -> Digest {
    Digest::of(&canonical_bytes(&AclStatement {
        op: "grant",
        patient,
        subject: provider,
        version: Some(version),
        record: None,
    }))
}

/// Digest the patient signs to revoke `provider`.
pub fn revoke_digest(patient: &MemberId, provider: &PublicKey, version: u64) -> Digest {
    Digest::of(&canonical_bytes(&AclStatement {
        op: "revoke",
        patient,
        subject: provider,
        version: Some(version),
        record: None,
    }))
}

fn access_digest(patient: &MemberId, accessor: &PublicKey, record: &TxId) -> Digest {
    Digest::of(&canonical_bytes(&AclStatement {
        op: "access",
        patient,
        subject: accessor,
        version: None,
        record: Some(record),
    }))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatientAcl {
    pub patient: MemberId,
    pub patient_key: PublicKey,
    pub authorized: BTreeSet<PublicKey>,
    /// Number of successful grants and revokes.
    pub version: u64,
    /// Entities that have accessed this patient's records at least once.
    pub accessors: BTreeSet<PublicKey>,
}

impl PatientAcl {
    pub fn new(patient: MemberId, patient_key: PublicKey) -> Self {
        PatientAcl {
            patient,
            patient_key,
            authorized: BTreeSet::new(),
            version: 0,
            accessors: BTreeSet::new(),
        }
    }

    /// Sorted copy of the authorized keys, as stamped into transactions.
    pub fn snapshot(&self) -> Vec<PublicKey> {
        self.authorized.iter().copied().collect()
    }

    pub fn is_authorized(&self, key: &PublicKey) -> bool {
        self.authorized.contains(key)
    }

    fn audit(
        &self,
        stamp: AuditStamp,
        data_hash: Digest,
        path: String,
        signer: PublicKey,
        signature: SignatureBytes,
    ) -> TransactionRecord {
        let mut tx = TransactionRecord::new(
            stamp.tx_id,
            TxType::RecordAccess,
            data_hash,
            path,
            stamp.timestamp,
            Parties::patient(self.patient.clone()),
        );
        tx.signatures.push(TxSignature { signer, signature });
        tx
    }

    /// Adds `provider` to the list. `signature` is the patient's signature
    /// over [`grant_digest`] for the next version.
    pub fn grant(
        &mut self,
        provider: PublicKey,
        signature: &SignatureBytes,
        scheme: &dyn SignatureScheme,
        stamp: AuditStamp,
    ) -> Result<TransactionRecord, AclError> {
        let next = self.version + 1;
        let digest = grant_digest(&self.patient, &provider, next);
        if !scheme.verify(&self.patient_key, digest.as_bytes(), signature) {
            return Err(AclError::BadSignature);
        }
        if provider.is_null() {
            return Err(AclError::NullKey);
        }
        if self.authorized.contains(&provider) {
            return Err(AclError::AlreadyAuthorized(provider));
        }
        self.authorized.insert(provider);
        self.version = next;
        let path = format!("{GRANT_PREFIX}{provider}");
        Ok(self.audit(stamp, digest, path, self.patient_key, signature.clone()))
    }

    /// Removes `provider` from the list. Sealed snapshots are unaffected.
    pub fn revoke(
        &mut self,
        provider: PublicKey,
        signature: &SignatureBytes,
        scheme: &dyn SignatureScheme,
        stamp: AuditStamp,
    ) -> Result<TransactionRecord, AclError> {
        let next = self.version + 1;
        let digest = revoke_digest(&self.patient, &provider, next);
        if !scheme.verify(&self.patient_key, digest.as_bytes(), signature) {
            return Err(AclError::BadSignature);
        }
        if !self.authorized.contains(&provider) {
            return Err(AclError::NotAuthorized(provider));
        }
        self.authorized.remove(&provider);
        self.version = next;
        let path = format!("{REVOKE_PREFIX}{provider}");
        Ok(self.audit(stamp, digest, path, self.patient_key, signature.clone()))
    }

    /// Decides whether `accessor` may read `tx` using the ACL snapshot inside
    /// `tx`. The first access by an entity, allowed or not, yields an audit
    /// transaction signed by the accessor.
    pub fn check_access(
        &mut self,
        accessor: &dyn Signer,
        tx: &TransactionRecord,
        stamp: AuditStamp,
    ) -> Result<AccessOutcome, AclError> {
        if tx.parties.patient.as_ref() != Some(&self.patient) {
            return Err(AclError::WrongPatient {
                tx: tx.tx_id.clone(),
                patient: self.patient.clone(),
            });
        }
        let key = accessor.public_key();
        let decision = if tx.acl.contains(&key) {
            AccessDecision::Allowed
        } else {
            AccessDecision::Denied
        };
        let audit = if self.accessors.insert(key) {
            let digest = access_digest(&self.patient, &key, &tx.tx_id);
            let signature = accessor.sign(digest.as_bytes());
            Some(self.audit(
                stamp,
                digest,
                format!("{ACCESS_PREFIX}{key}"),
                key,
                signature,
            ))
        } else {
            None
        };
        Ok(AccessOutcome { decision, audit })
    }

    /// Rebuilds the list from a patient's sidechain transactions in order.
    /// Non-ACL records are skipped.
    pub fn replay<'a>(
        patient: MemberId,
        patient_key: PublicKey,
        transactions: impl IntoIterator<Item = &'a TransactionRecord>,
        scheme: &dyn SignatureScheme,
    ) -> Result<PatientAcl, AclError> {
        let mut acl = PatientAcl::new(patient, patient_key);
        for tx in transactions {
            if tx.tx_type != TxType::RecordAccess {
                continue;
            }
            let mismatch = || AclError::ReplayMismatch(tx.tx_id.clone());
            let parse = |rest: &str| rest.parse::<PublicKey>().map_err(|_| mismatch());
            if let Some(rest) = tx.path.strip_prefix(GRANT_PREFIX) {
                let provider = parse(rest)?;
                let sig = patient_signature(tx, &acl.patient_key).ok_or_else(mismatch)?;
                let stamp = AuditStamp {
                    tx_id: tx.tx_id.clone(),
                    timestamp: tx.timestamp,
                };
                acl.grant(provider, sig, scheme, stamp)
                    .map_err(|_| mismatch())?;
            } else if let Some(rest) = tx.path.strip_prefix(REVOKE_PREFIX) {
                let provider = parse(rest)?;
                let sig = patient_signature(tx, &acl.patient_key).ok_or_else(mismatch)?;
                let stamp = AuditStamp {
                    tx_id: tx.tx_id.clone(),
                    timestamp: tx.timestamp,
                };
                acl.revoke(provider, sig, scheme, stamp)
                    .map_err(|_| mismatch())?;
            } else if let Some(rest) = tx.path.strip_prefix(ACCESS_PREFIX) {
                let accessor = parse(rest)?;
                if !tx.is_signed_by(&accessor) || !tx.signatures_valid(scheme) {
                    return Err(mismatch());
                }
                if !acl.accessors.insert(accessor) {
                    return Err(mismatch());
                }
            }
        }
        Ok(acl)
    }
}

fn patient_signature<'a>(tx: &'a TransactionRecord, key: &PublicKey) -> Option<&'a SignatureBytes> {
    tx.signatures
        .iter()
        .find(|s| &s.signer == key)
        .map(|s| &s.signature)
}

/// True for the audit records this module emits.
pub fn is_acl_audit(tx: &TransactionRecord) -> bool {
    tx.tx_type == TxType::RecordAccess
        && [GRANT_PREFIX, REVOKE_PREFIX, ACCESS_PREFIX]
            .iter()
            .any(|p| tx.path.starts_with(p))
}
