//! Network directory layout:
//!
//! ```text
//! registry.jsonl     authority registry (header + one record per authority/removal)
//! members.jsonl      member index (header carries network counters)
//! pending.jsonl      unsealed queues, in FIFO order per chain
//! mainchain.chain    mainchain
//! <member_id>.chain  one sidechain per member
//! ```
//!
//! All files share the record format of [`crate::ledger::file`].

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    ChainRef, ChainSlot, MemberIdentity, MemberKind, NetworkError, NetworkState, MAINCHAIN_ID,
};
use crate::acl::PatientAcl;
use crate::consensus::{AuthorityEntry, AuthorityRegistry, RemovalRecord};
use crate::crypto::SchemeKind;
use crate::ledger::file::{check_version, read_records, write_records, StoreError};
use crate::ledger::{Chain, TransactionRecord, FORMAT_VERSION};

pub const REGISTRY_FILE: &str = "registry.jsonl";
pub const MEMBERS_FILE: &str = "members.jsonl";
pub const PENDING_FILE: &str = "pending.jsonl";
pub const CHAIN_EXTENSION: &str = "chain";

#[derive(Serialize, Deserialize)]
struct RegistryHeader {
    format_version: u32,
    scheme: SchemeKind,
    slot_duration: u64,
    genesis_time: u64,
    block_capacity: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum RegistryRecord {
    Authority(AuthorityEntry),
    Removal(RemovalRecord),
}

#[derive(Serialize, Deserialize)]
struct MembersHeader {
    format_version: u32,
    current_slot: u64,
    tx_seq: u64,
}

#[derive(Serialize, Deserialize)]
struct PendingHeader {
    format_version: u32,
}

#[derive(Serialize, Deserialize)]
struct PendingRecord {
    chain: ChainRef,
    tx: TransactionRecord,
}

pub fn chain_file_name(chain_id: &str) -> String {
    format!("{chain_id}.{CHAIN_EXTENSION}")
}

/// Paths of every `*.chain` file in `dir`, sorted.
pub fn chain_files(dir: &Path) -> Result<Vec<PathBuf>, StoreError> {
    let entries = fs::read_dir(dir).map_err(|e| StoreError::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| StoreError::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == CHAIN_EXTENSION) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

impl NetworkState {
    /// Writes the whole network into `dir`, creating it if needed.
    pub fn persist(&self, dir: &Path) -> Result<(), NetworkError> {
        fs::create_dir_all(dir).map_err(|e| StoreError::io(dir, e))?;

        let reg = &self.registry;
        let header = RegistryHeader {
            format_version: FORMAT_VERSION,
            scheme: reg.scheme,
            slot_duration: reg.slot_duration,
            genesis_time: reg.genesis_time,
            block_capacity: reg.block_capacity,
        };
        let records: Vec<RegistryRecord> = reg
            .authorities
            .iter()
            .cloned()
            .map(RegistryRecord::Authority)
            .chain(reg.removals.iter().cloned().map(RegistryRecord::Removal))
            .collect();
        write_records(&dir.join(REGISTRY_FILE), &header, &records)?;

        let header = MembersHeader {
            format_version: FORMAT_VERSION,
            current_slot: self.current_slot,
            tx_seq: self.tx_seq,
        };
        let members: Vec<&MemberIdentity> = self.members.values().collect();
        write_records(&dir.join(MEMBERS_FILE), &header, &members)?;

        let pending: Vec<PendingRecord> = self
            .chains()
            .flat_map(|(r, s)| {
                s.pending.iter().map(move |tx| PendingRecord {
                    chain: r.clone(),
                    tx: tx.clone(),
                })
            })
            .collect();
        write_records(
            &dir.join(PENDING_FILE),
            &PendingHeader {
                format_version: FORMAT_VERSION,
            },
            &pending,
        )?;

        for (_, slot) in self.chains() {
            slot.chain
                .write_file(&dir.join(chain_file_name(&slot.chain.chain_id)))?;
        }
        Ok(())
    }

    /// Reads a network written by [`Self::persist`]. An empty directory
    /// yields an empty network. Chains are decoded, not verified.
    pub fn load(dir: &Path) -> Result<NetworkState, NetworkError> {
        if !dir.is_dir() {
            let err = std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory");
            return Err(StoreError::io(dir, err).into());
        }

        let registry_path = dir.join(REGISTRY_FILE);
        let registry = if registry_path.exists() {
            let (h, records): (RegistryHeader, Vec<RegistryRecord>) = read_records(&registry_path)?;
            check_version(&registry_path, h.format_version)?;
            let mut reg = AuthorityRegistry::new(h.scheme).with_block_capacity(h.block_capacity);
            reg.slot_duration = h.slot_duration;
            reg.genesis_time = h.genesis_time;
            for r in records {
                match r {
                    RegistryRecord::Authority(a) => reg.authorities.push(a),
                    RegistryRecord::Removal(r) => reg.removals.push(r),
                }
            }
            reg
        } else {
            AuthorityRegistry::new(SchemeKind::default())
        };
        let mut state = NetworkState::new(registry);

        let main_path = dir.join(chain_file_name(MAINCHAIN_ID));
        if main_path.exists() {
            state.mainchain = ChainSlot::new(Chain::read_file(&main_path)?);
        }

        let members_path = dir.join(MEMBERS_FILE);
        if members_path.exists() {
            let (h, members): (MembersHeader, Vec<MemberIdentity>) = read_records(&members_path)?;
            check_version(&members_path, h.format_version)?;
            state.current_slot = h.current_slot;
            state.tx_seq = h.tx_seq;
            for m in members {
                let chain = Chain::read_file(&dir.join(chain_file_name(&m.sidechain_id)))?;
                state
                    .sidechains
                    .insert(m.member_id.clone(), ChainSlot::new(chain));
                state.members.insert(m.member_id.clone(), m);
            }
        }

        let pending_path = dir.join(PENDING_FILE);
        if pending_path.exists() {
            let (h, records): (PendingHeader, Vec<PendingRecord>) = read_records(&pending_path)?;
            check_version(&pending_path, h.format_version)?;
            for (i, r) in records.into_iter().enumerate() {
                let slot = state.slot_mut(&r.chain).ok_or_else(|| {
                    StoreError::corrupt(&pending_path, i + 2, format!("unknown chain {}", r.chain))
                })?;
                slot.pending.push_back(r.tx);
            }
        }

        let mut seen = BTreeSet::new();
        let mut pairs = 0u64;
        for (_, slot) in state.chains() {
            for tx in slot.all_transactions() {
                seen.insert(tx.tx_id.clone());
                pairs += 1;
            }
        }
        state.seen_tx = seen;
        state.submitted_pairs = pairs;

        let mut acls = BTreeMap::new();
        for m in state
            .members
            .values()
            .filter(|m| m.kind == MemberKind::Patient)
        {
            let slot = &state.sidechains[&m.member_id];
            let acl = PatientAcl::replay(
                m.member_id.clone(),
                m.key,
                slot.all_transactions(),
                &state.scheme(),
            )?;
            acls.insert(m.member_id.clone(), acl);
        }
        state.acls = acls;
        Ok(state)
    }
}
