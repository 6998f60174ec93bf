//! Mainchain plus one sidechain per member.
//!
//! Routing follows the transaction table:
//!
//! | type                 | chains                                  |
//! |----------------------|-----------------------------------------|
//! | `JoinLeave`          | mainchain                               |
//! | `DischargeSummary`   | mainchain and the patient's sidechain   |
//! | `InterHospitalShare` | both hospitals' sidechains              |
//! | `RecordAccess`       | patient sidechain                       |
//! | `DiagnosisOrChange`  | patient sidechain                       |
//! | `Financial`          | patient sidechain                       |
//!
//! A transaction routed to two chains is enqueued on both under the same
//! `tx_id`, which is what links a mainchain summary to its sidechain copy.

mod persist;

pub use persist::{chain_file_name, chain_files, MEMBERS_FILE, PENDING_FILE, REGISTRY_FILE};

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acl::{is_acl_audit, AccessDecision, AclError, AuditStamp, PatientAcl};
use crate::consensus::{Attestation, AuthorityRegistry, BlockViolation, ConsensusError};
use crate::crypto::{
    canonical_bytes, Digest, KeyPair, PublicKey, SchemeKind, SignatureBytes, Signer,
};
use crate::ledger::file::StoreError;
use crate::ledger::{Chain, ChainRole, MemberId, Parties, TransactionRecord, TxId, TxType};

/// Signing keys of the authority nodes simulated in this process.
pub type Keyring = BTreeMap<PublicKey, KeyPair>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MemberKind {
    Hospital,
    Patient,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberIdentity {
    pub member_id: MemberId,
    pub kind: MemberKind,
    pub key: PublicKey,
    pub sidechain_id: String,
    pub join_tx_id: TxId,
    pub active: bool,
}

/// Names one chain of the network.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainRef {
    Mainchain,
    Sidechain(MemberId),
}

impl fmt::Display for ChainRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChainRef::Mainchain => f.write_str("mainchain"),
            ChainRef::Sidechain(m) => write!(f, "sidechain({m})"),
        }
    }
}

/// A chain and its FIFO queue of unsealed transactions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainSlot {
    pub chain: Chain,
    pub pending: VecDeque<TransactionRecord>,
}

impl ChainSlot {
    fn new(chain: Chain) -> Self {
        ChainSlot {
            chain,
            pending: VecDeque::new(),
        }
    }

    /// Sealed transactions followed by pending ones.
    pub fn all_transactions(&self) -> impl Iterator<Item = &TransactionRecord> {
        self.chain.transactions().chain(self.pending.iter())
    }
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("key {0} already belongs to a member")]
    DuplicateMember(PublicKey),
    #[error("unknown member {0}")]
    UnknownMember(MemberId),
    #[error("member {0} has left the network")]
    InactiveMember(MemberId),
    #[error("member {0} is not a patient")]
    NotAPatient(MemberId),
    #[error("cannot route {tx_type:?}: {reason}")]
    UnroutableType {
        tx_type: TxType,
        reason: &'static str,
    },
    #[error("transaction {0} carries no signatures")]
    MissingSignature(TxId),
    #[error("transaction {0} has a signature that does not verify")]
    BadSignature(TxId),
    #[error("transaction id {0} is already in use")]
    DuplicateTxId(TxId),
    #[error("transaction {tx} is not sealed on {chain}")]
    UnknownTransaction { tx: TxId, chain: ChainRef },
    #[error("signer {0} does not match the member key")]
    WrongSigner(PublicKey),
    #[error("no signing key for scheduled authority {0}")]
    MissingSigningKey(PublicKey),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
    #[error("sealed block rejected on {chain}: {violation}")]
    Block {
        chain: ChainRef,
        violation: BlockViolation,
    },
    #[error(transparent)]
    Acl(#[from] AclError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// What one call to [`NetworkState::tick`] sealed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TickReport {
    pub slot: u64,
    pub sealer: Option<PublicKey>,
    pub blocks_sealed: usize,
    pub txs_sealed: usize,
}

/// Outcome of one named invariant check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub failures: Vec<String>,
}

impl InvariantCheck {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// The whole consortium: mainchain, sidechains, members, queues, ACLs and the
/// authority registry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkState {
    registry: AuthorityRegistry,
    mainchain: ChainSlot,
    sidechains: BTreeMap<MemberId, ChainSlot>,
    members: BTreeMap<MemberId, MemberIdentity>,
    acls: BTreeMap<MemberId, PatientAcl>,
    seen_tx: BTreeSet<TxId>,
    tx_seq: u64,
    current_slot: u64,
    submitted_pairs: u64,
}

pub const MAINCHAIN_ID: &str = "mainchain";

#[derive(Serialize)]
struct MembershipStatement<'a> {
    op: &'a str,
    member: &'a MemberId,
    kind: MemberKind,
    key: &'a PublicKey,
}

impl NetworkState {
    pub fn new(registry: AuthorityRegistry) -> Self {
        let mainchain = Chain::new(MAINCHAIN_ID, ChainRole::Mainchain, registry.scheme);
        NetworkState {
            registry,
            mainchain: ChainSlot::new(mainchain),
            sidechains: BTreeMap::new(),
            members: BTreeMap::new(),
            acls: BTreeMap::new(),
            seen_tx: BTreeSet::new(),
            tx_seq: 0,
            current_slot: 0,
            submitted_pairs: 0,
        }
    }

    pub fn scheme(&self) -> SchemeKind {
        self.registry.scheme
    }

    pub fn registry(&self) -> &AuthorityRegistry {
        &self.registry
    }

    pub fn mainchain(&self) -> &Chain {
        &self.mainchain.chain
    }

    pub fn sidechain(&self, member: &MemberId) -> Option<&Chain> {
        self.sidechains.get(member).map(|s| &s.chain)
    }

    pub fn slot(&self, chain: &ChainRef) -> Option<&ChainSlot> {
        match chain {
            ChainRef::Mainchain => Some(&self.mainchain),
            ChainRef::Sidechain(m) => self.sidechains.get(m),
        }
    }

    fn slot_mut(&mut self, chain: &ChainRef) -> Option<&mut ChainSlot> {
        match chain {
            ChainRef::Mainchain => Some(&mut self.mainchain),
            ChainRef::Sidechain(m) => self.sidechains.get_mut(m),
        }
    }

    pub fn pending(&self, chain: &ChainRef) -> Option<&VecDeque<TransactionRecord>> {
        self.slot(chain).map(|s| &s.pending)
    }

    /// Every chain, mainchain first then sidechains by member id.
    pub fn chains(&self) -> impl Iterator<Item = (ChainRef, &ChainSlot)> {
        std::iter::once((ChainRef::Mainchain, &self.mainchain)).chain(
            self.sidechains
                .iter()
                .map(|(m, s)| (ChainRef::Sidechain(m.clone()), s)),
        )
    }

    pub fn members(&self) -> impl Iterator<Item = &MemberIdentity> {
        self.members.values()
    }

    pub fn member(&self, id: &MemberId) -> Option<&MemberIdentity> {
        self.members.get(id)
    }

    pub fn acl(&self, patient: &MemberId) -> Option<&PatientAcl> {
        self.acls.get(patient)
    }

    pub fn current_slot(&self) -> u64 {
        self.current_slot
    }

    /// Simulated wall time of the next slot.
    pub fn now(&self) -> u64 {
        self.registry.slot_time(self.current_slot)
    }

    pub fn total_pending(&self) -> usize {
        self.chains().map(|(_, s)| s.pending.len()).sum()
    }

    pub fn total_sealed(&self) -> usize {
        self.chains().map(|(_, s)| s.chain.tx_count()).sum()
    }

    /// Count of (tx_id, chain) pairs ever accepted by [`Self::submit`].
    pub fn submitted_pairs(&self) -> u64 {
        self.submitted_pairs
    }

    /// Fresh network-unique transaction id.
    pub fn next_tx_id(&mut self) -> TxId {
        loop {
            self.tx_seq += 1;
            let id = TxId(format!("tx-{:08}", self.tx_seq));
            if !self.seen_tx.contains(&id) {
                return id;
            }
        }
    }

    fn membership_tx(
        &mut self,
        op: &str,
        member: &MemberIdentity,
        signer: &dyn Signer,
    ) -> TransactionRecord {
        let data_hash = Digest::of(&canonical_bytes(&MembershipStatement {
            op,
            member: &member.member_id,
            kind: member.kind,
            key: &member.key,
        }));
        let parties = match member.kind {
            MemberKind::Patient => Parties::patient(member.member_id.clone()),
            MemberKind::Hospital => Parties::hospitals([member.member_id.clone()]),
        };
        let now = self.now();
        let tx_id = self.next_tx_id();
        TransactionRecord::new(
            tx_id,
            TxType::JoinLeave,
            data_hash,
            format!("member/{}/{op}", member.member_id),
            now,
            parties,
        )
        .signed_by(signer)
    }

    /// Registers a new member signing with `signer`, enqueues its join
    /// transaction on the mainchain and creates its sidechain anchored to
    /// that transaction.
    pub fn join_member(
        &mut self,
        kind: MemberKind,
        signer: &dyn Signer,
    ) -> Result<MemberId, NetworkError> {
        let key = signer.public_key();
        if self.members.values().any(|m| m.key == key) {
            return Err(NetworkError::DuplicateMember(key));
        }
        let prefix = match kind {
            MemberKind::Hospital => 'H',
            MemberKind::Patient => 'P',
        };
        let n = self.members.values().filter(|m| m.kind == kind).count() + 1;
        let member_id = MemberId(format!("{prefix}{n:04}"));
        let mut identity = MemberIdentity {
            member_id: member_id.clone(),
            kind,
            key,
            sidechain_id: member_id.0.clone(),
            join_tx_id: TxId(String::new()),
            active: true,
        };
        let tx = self.membership_tx("join", &identity, signer);
        identity.join_tx_id = tx.tx_id.clone();

        let role = match kind {
            MemberKind::Hospital => ChainRole::HospitalSidechain {
                owner: member_id.clone(),
            },
            MemberKind::Patient => ChainRole::PatientSidechain {
                owner: member_id.clone(),
            },
        };
        let chain = Chain::new(identity.sidechain_id.clone(), role, self.scheme())
            .with_anchor(tx.tx_id.clone());

        self.members.insert(member_id.clone(), identity);
        if let Err(e) = self.submit(tx) {
            self.members.remove(&member_id);
            return Err(e);
        }
        self.sidechains
            .insert(member_id.clone(), ChainSlot::new(chain));
        if kind == MemberKind::Patient {
            self.acls
                .insert(member_id.clone(), PatientAcl::new(member_id.clone(), key));
        }
        Ok(member_id)
    }

    /// Records a departure on the mainchain and flags the member inactive.
    /// Its sidechain is kept but accepts no new transactions. A departing
    /// hospital also leaves the sealing rotation.
    pub fn leave_member(
        &mut self,
        member: &MemberId,
        signer: &dyn Signer,
    ) -> Result<TxId, NetworkError> {
        let identity = self.active_member(member)?.clone();
        if identity.key != signer.public_key() {
            return Err(NetworkError::WrongSigner(signer.public_key()));
        }
        let tx = self.membership_tx("leave", &identity, signer);
        let id = tx.tx_id.clone();
        self.submit(tx)?;
        self.members.get_mut(member).expect("checked above").active = false;
        if self.registry.contains(&identity.key) {
            self.registry
                .remove_authority(&identity.key, format!("member {member} left"))?;
        }
        Ok(id)
    }

    /// Adds a hospital member to the sealing rotation.
    pub fn admit_authority(
        &mut self,
        hospital: &MemberId,
        attestation: Attestation,
    ) -> Result<(), NetworkError> {
        let identity = self.active_member(hospital)?;
        if identity.kind != MemberKind::Hospital {
            return Err(NetworkError::UnroutableType {
                tx_type: TxType::JoinLeave,
                reason: "only hospitals can become authorities",
            });
        }
        let key = identity.key;
        self.registry.admit_authority(key, attestation)?;
        Ok(())
    }

    fn known_member(&self, id: &MemberId) -> Result<&MemberIdentity, NetworkError> {
        self.members
            .get(id)
            .ok_or_else(|| NetworkError::UnknownMember(id.clone()))
    }

    fn active_member(&self, id: &MemberId) -> Result<&MemberIdentity, NetworkError> {
        let m = self.known_member(id)?;
        if !m.active {
            return Err(NetworkError::InactiveMember(id.clone()));
        }
        Ok(m)
    }

    /// The chains a transaction of `tx_type` between `parties` belongs on.
    pub fn route(&self, tx_type: TxType, parties: &Parties) -> Result<Vec<ChainRef>, NetworkError> {
        let unroutable = |reason| NetworkError::UnroutableType { tx_type, reason };
        if let Some(p) = &parties.patient {
            if self.known_member(p)?.kind != MemberKind::Patient {
                return Err(unroutable("patient party is not a patient member"));
            }
        }
        for h in &parties.hospitals {
            if self.known_member(h)?.kind != MemberKind::Hospital {
                return Err(unroutable("hospital party is not a hospital member"));
            }
        }
        let patient_chain = || {
            parties
                .patient
                .clone()
                .map(ChainRef::Sidechain)
                .ok_or_else(|| unroutable("a patient party is required"))
        };
        match tx_type {
            TxType::JoinLeave => {
                let named = parties.hospitals.len() + usize::from(parties.patient.is_some());
                if named != 1 {
                    return Err(unroutable("exactly one member joins or leaves"));
                }
                Ok(vec![ChainRef::Mainchain])
            }
            TxType::DischargeSummary => {
                if parties.hospitals.is_empty() {
                    return Err(unroutable("a discharging hospital is required"));
                }
                Ok(vec![ChainRef::Mainchain, patient_chain()?])
            }
            TxType::InterHospitalShare => match (&parties.patient, parties.hospitals.as_slice()) {
                (None, [a, b]) if a != b => Ok(vec![
                    ChainRef::Sidechain(a.clone()),
                    ChainRef::Sidechain(b.clone()),
                ]),
                _ => Err(unroutable(
                    "exactly two distinct hospitals and no patient are required",
                )),
            },
            TxType::RecordAccess | TxType::DiagnosisOrChange | TxType::Financial => {
                Ok(vec![patient_chain()?])
            }
        }
    }

    /// Validates `tx`, stamps the patient's current ACL into it and enqueues
    /// it on every routed chain.
    pub fn submit(&mut self, mut tx: TransactionRecord) -> Result<Vec<ChainRef>, NetworkError> {
        let routes = self.route(tx.tx_type, &tx.parties)?;
        for m in tx.parties.patient.iter().chain(tx.parties.hospitals.iter()) {
            self.active_member(m)?;
        }
        if tx.signatures.is_empty() {
            return Err(NetworkError::MissingSignature(tx.tx_id));
        }
        if !tx.signatures_valid(&self.scheme()) {
            return Err(NetworkError::BadSignature(tx.tx_id));
        }
        if self.seen_tx.contains(&tx.tx_id) {
            return Err(NetworkError::DuplicateTxId(tx.tx_id));
        }
        tx.acl = match &tx.parties.patient {
            Some(p) => self
                .acls
                .get(p)
                .map(PatientAcl::snapshot)
                .unwrap_or_default(),
            None => Vec::new(),
        };
        self.seen_tx.insert(tx.tx_id.clone());
        self.submitted_pairs += routes.len() as u64;
        for r in &routes {
            self.slot_mut(r)
                .expect("routes name existing chains")
                .pending
                .push_back(tx.clone());
        }
        Ok(routes)
    }

    /// Seals one block on every chain with pending work, using the authority
    /// scheduled for `slot`. Distinct chains are sealed in parallel.
    pub fn tick(&mut self, slot: u64, keyring: &Keyring) -> Result<TickReport, NetworkError> {
        if self.total_pending() == 0 {
            return Ok(TickReport {
                slot,
                ..TickReport::default()
            });
        }
        let sealer_key = *self.registry.scheduled_sealer(slot)?;
        let signer = keyring
            .get(&sealer_key)
            .ok_or(NetworkError::MissingSigningKey(sealer_key))?;
        let registry = &self.registry;

        let mut work: Vec<(ChainRef, &mut ChainSlot)> = Vec::new();
        if !self.mainchain.pending.is_empty() {
            work.push((ChainRef::Mainchain, &mut self.mainchain));
        }
        for (m, s) in self
            .sidechains
            .iter_mut()
            .filter(|(_, s)| !s.pending.is_empty())
        {
            work.push((ChainRef::Sidechain(m.clone()), s));
        }

        let sealed: Vec<usize> = work
            .into_par_iter()
            .map(|(chain_ref, slot_state)| {
                let block =
                    registry.seal(&slot_state.chain, &mut slot_state.pending, slot, signer)?;
                if let Err(violation) = registry.validate_block(&slot_state.chain, &block, slot) {
                    for tx in block.transactions.into_iter().rev() {
                        slot_state.pending.push_front(tx);
                    }
                    return Err(NetworkError::Block {
                        chain: chain_ref,
                        violation,
                    });
                }
                let n = block.transactions.len();
                slot_state
                    .chain
                    .append_block(block)
                    .map_err(|e| NetworkError::Block {
                        chain: chain_ref,
                        violation: e.into(),
                    })?;
                Ok(n)
            })
            .collect::<Result<_, NetworkError>>()?;

        self.current_slot = self.current_slot.max(slot + 1);
        Ok(TickReport {
            slot,
            sealer: Some(sealer_key),
            blocks_sealed: sealed.len(),
            txs_sealed: sealed.iter().sum(),
        })
    }

    fn patient_acl(&self, patient: &MemberId) -> Result<PatientAcl, NetworkError> {
        self.active_member(patient)?;
        self.acls
            .get(patient)
            .cloned()
            .ok_or_else(|| NetworkError::NotAPatient(patient.clone()))
    }

    fn commit_acl(
        &mut self,
        acl: PatientAcl,
        audit: TransactionRecord,
    ) -> Result<TxId, NetworkError> {
        let previous = self.acls.insert(acl.patient.clone(), acl.clone());
        let id = audit.tx_id.clone();
        if let Err(e) = self.submit(audit) {
            if let Some(prev) = previous {
                self.acls.insert(acl.patient, prev);
            }
            return Err(e);
        }
        Ok(id)
    }

    /// Applies a patient-signed grant and enqueues its audit record.
    pub fn grant_access(
        &mut self,
        patient: &MemberId,
        provider: PublicKey,
        signature: &SignatureBytes,
    ) -> Result<TxId, NetworkError> {
        let mut acl = self.patient_acl(patient)?;
        let stamp = AuditStamp {
            tx_id: self.next_tx_id(),
            timestamp: self.now(),
        };
        let audit = acl.grant(provider, signature, &self.scheme(), stamp)?;
        self.commit_acl(acl, audit)
    }

    /// Applies a patient-signed revoke and enqueues its audit record.
    pub fn revoke_access(
        &mut self,
        patient: &MemberId,
        provider: PublicKey,
        signature: &SignatureBytes,
    ) -> Result<TxId, NetworkError> {
        let mut acl = self.patient_acl(patient)?;
        let stamp = AuditStamp {
            tx_id: self.next_tx_id(),
            timestamp: self.now(),
        };
        let audit = acl.revoke(provider, signature, &self.scheme(), stamp)?;
        self.commit_acl(acl, audit)
    }

    /// `accessor` reads sealed transaction `tx_id` of `patient`. Returns the
    /// decision and, on a first access, the id of the enqueued audit record.
    pub fn access_record(
        &mut self,
        accessor: &dyn Signer,
        patient: &MemberId,
        tx_id: &TxId,
    ) -> Result<(AccessDecision, Option<TxId>), NetworkError> {
        let mut acl = self.patient_acl(patient)?;
        let chain_ref = ChainRef::Sidechain(patient.clone());
        let tx = self
            .sidechains
            .get(patient)
            .and_then(|s| s.chain.transactions().find(|t| &t.tx_id == tx_id))
            .cloned()
            .ok_or_else(|| NetworkError::UnknownTransaction {
                tx: tx_id.clone(),
                chain: chain_ref,
            })?;
        let stamp = AuditStamp {
            tx_id: self.next_tx_id(),
            timestamp: self.now(),
        };
        let outcome = acl.check_access(accessor, &tx, stamp)?;
        let audit_id = match outcome.audit {
            Some(audit) => Some(self.commit_acl(acl, audit)?),
            None => None,
        };
        Ok((outcome.decision, audit_id))
    }

    /// Runs every structural invariant over the current state.
    pub fn check_invariants(&self) -> Vec<InvariantCheck> {
        vec![
            self.check_chains_verify(),
            self.check_anchoring(),
            self.check_purity(),
            self.check_conservation(),
            self.check_membership(),
            self.check_acl_replay(),
            self.check_acl_snapshots(),
        ]
    }

    fn check_chains_verify(&self) -> InvariantCheck {
        let failures = self
            .chains()
            .flat_map(|(r, s)| {
                s.chain
                    .verify()
                    .violations
                    .into_iter()
                    .map(move |v| format!("{r}: {v}"))
            })
            .collect();
        InvariantCheck {
            name: "chains-verify",
            failures,
        }
    }

    fn check_anchoring(&self) -> InvariantCheck {
        let mut failures = Vec::new();
        let main_ids: BTreeSet<&TxId> = self
            .mainchain
            .all_transactions()
            .filter(|t| t.tx_type == TxType::DischargeSummary)
            .map(|t| &t.tx_id)
            .collect();
        let mut side_ids = BTreeSet::new();
        for (member, slot) in &self.sidechains {
            for tx in slot
                .all_transactions()
                .filter(|t| t.tx_type == TxType::DischargeSummary)
            {
                side_ids.insert(&tx.tx_id);
                if !main_ids.contains(&tx.tx_id) {
                    failures.push(format!(
                        "{} on sidechain({member}) has no mainchain copy",
                        tx.tx_id
                    ));
                }
            }
        }
        for tx in self
            .mainchain
            .all_transactions()
            .filter(|t| t.tx_type == TxType::DischargeSummary)
        {
            let on_patient = tx
                .parties
                .patient
                .as_ref()
                .and_then(|p| self.sidechains.get(p))
                .is_some_and(|s| s.all_transactions().any(|t| t.tx_id == tx.tx_id));
            if !on_patient || !side_ids.contains(&tx.tx_id) {
                failures.push(format!(
                    "{} on mainchain has no patient sidechain copy",
                    tx.tx_id
                ));
            }
        }
        InvariantCheck {
            name: "anchoring",
            failures,
        }
    }

    fn check_purity(&self) -> InvariantCheck {
        let mut failures = Vec::new();
        for (member, slot) in &self.sidechains {
            for tx in slot.all_transactions() {
                if !tx.parties.names(member) {
                    failures.push(format!(
                        "{} on sidechain({member}) does not name {member}",
                        tx.tx_id
                    ));
                }
            }
        }
        InvariantCheck {
            name: "sidechain-purity",
            failures,
        }
    }

    fn check_conservation(&self) -> InvariantCheck {
        let sealed = self.total_sealed() as u64;
        let pending = self.total_pending() as u64;
        let mut failures = Vec::new();
        if sealed + pending != self.submitted_pairs {
            failures.push(format!(
                "submitted {} != sealed {sealed} + pending {pending}",
                self.submitted_pairs
            ));
        }
        InvariantCheck {
            name: "conservation",
            failures,
        }
    }

    fn check_membership(&self) -> InvariantCheck {
        let mut failures = Vec::new();
        let members: BTreeSet<_> = self.members.keys().collect();
        let sides: BTreeSet<_> = self.sidechains.keys().collect();
        if members != sides {
            failures
                .push("members and sidechains are not in one-to-one correspondence".to_string());
        }
        for (id, m) in &self.members {
            let Some(slot) = self.sidechains.get(id) else {
                continue;
            };
            let role_ok = match (&slot.chain.role, m.kind) {
                (ChainRole::PatientSidechain { owner }, MemberKind::Patient)
                | (ChainRole::HospitalSidechain { owner }, MemberKind::Hospital) => owner == id,
                _ => false,
            };
            if !role_ok {
                failures.push(format!("sidechain({id}) role does not match member"));
            }
            if slot.chain.anchor.as_ref() != Some(&m.join_tx_id) {
                failures.push(format!(
                    "sidechain({id}) anchor is not the join transaction"
                ));
            }
            let joined = self
                .mainchain
                .all_transactions()
                .any(|t| t.tx_id == m.join_tx_id && t.tx_type == TxType::JoinLeave);
            if !joined {
                failures.push(format!(
                    "join transaction of {id} is missing from the mainchain"
                ));
            }
        }
        InvariantCheck {
            name: "membership",
            failures,
        }
    }

    fn check_acl_replay(&self) -> InvariantCheck {
        let mut failures = Vec::new();
        for (patient, acl) in &self.acls {
            let Some(slot) = self.sidechains.get(patient) else {
                failures.push(format!("ACL for {patient} without a sidechain"));
                continue;
            };
            match PatientAcl::replay(
                patient.clone(),
                acl.patient_key,
                slot.all_transactions(),
                &self.scheme(),
            ) {
                Ok(replayed) if &replayed == acl => {}
                Ok(_) => {
                    failures.push(format!("replayed ACL of {patient} differs from live state"))
                }
                Err(e) => failures.push(format!("replaying ACL of {patient}: {e}")),
            }
            let audits = slot.all_transactions().filter(|t| is_acl_audit(t)).count() as u64;
            if audits != acl.version + acl.accessors.len() as u64 {
                failures.push(format!(
                    "{patient}: {audits} audit records for {} changes and {} first accesses",
                    acl.version,
                    acl.accessors.len()
                ));
            }
        }
        InvariantCheck {
            name: "acl-audit",
            failures,
        }
    }

    fn check_acl_snapshots(&self) -> InvariantCheck {
        let mut failures = Vec::new();
        for (r, slot) in self.chains() {
            for tx in slot.all_transactions() {
                if tx.acl.windows(2).any(|w| w[0] >= w[1]) {
                    failures.push(format!(
                        "{} on {r} has an unsorted or duplicated ACL",
                        tx.tx_id
                    ));
                }
            }
        }
        InvariantCheck {
            name: "acl-snapshots",
            failures,
        }
    }
}
