//! Desk-scale end-to-end run: hospitals and patients join, hospitals become
//! authorities, a seeded random mix of transactions is routed and sealed
//! until every queue drains, and the invariants are checked.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::acl::{grant_digest, revoke_digest, AccessDecision};
use crate::consensus::{Attestation, AuthorityRegistry};
use crate::crypto::{Digest, KeyPair, SchemeKind, Signer};
use crate::ledger::{MemberId, Parties, TransactionRecord, TxType};
use crate::network::{ChainRef, InvariantCheck, Keyring, MemberKind, NetworkError, NetworkState};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemoConfig {
    pub hospitals: usize,
    pub patients: usize,
    pub txs: usize,
    pub seed: u64,
    /// Transactions submitted between two sealing slots.
    pub txs_per_slot: usize,
    pub scheme: SchemeKind,
    /// When set, the network is persisted here and reloaded as a check.
    pub out_dir: Option<PathBuf>,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            hospitals: 3,
            patients: 10,
            txs: 1000,
            seed: 1,
            txs_per_slot: 50,
            scheme: SchemeKind::Ed25519,
            out_dir: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("invalid demo configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug)]
pub struct DemoOutcome {
    pub state: NetworkState,
    pub checks: Vec<InvariantCheck>,
    pub slots: u64,
    pub submitted_by_type: BTreeMap<TxType, usize>,
    pub access_decisions: (usize, usize),
    pub report: String,
}

impl DemoOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(InvariantCheck::passed)
    }
}

struct Actor {
    id: MemberId,
    key: KeyPair,
}

struct Driver {
    rng: ChaCha8Rng,
    state: NetworkState,
    keyring: Keyring,
    hospitals: Vec<Actor>,
    patients: Vec<Actor>,
    counts: BTreeMap<TxType, usize>,
    allowed: usize,
    denied: usize,
}

impl Driver {
    fn keypair(&mut self, scheme: SchemeKind) -> KeyPair {
        scheme.keypair_from_seed(self.rng.random())
    }

    fn pick_pair(&mut self) -> (usize, usize) {
        (
            self.rng.random_range(0..self.patients.len()),
            self.rng.random_range(0..self.hospitals.len()),
        )
    }

    fn record(&mut self, tx_type: TxType, parties: Parties, label: &str) -> TransactionRecord {
        let payload: [u8; 32] = self.rng.random();
        let tx_id = self.state.next_tx_id();
        let path = format!("ehr://{label}/{tx_id}");
        TransactionRecord::new(
            tx_id,
            tx_type,
            Digest::of(&payload),
            path,
            self.state.now(),
            parties,
        )
    }

    fn submit(&mut self, tx: TransactionRecord) -> Result<bool, NetworkError> {
        let tx_type = tx.tx_type;
        self.state.submit(tx)?;
        *self.counts.entry(tx_type).or_default() += 1;
        Ok(true)
    }

    fn encounter(&mut self, tx_type: TxType) -> Result<bool, NetworkError> {
        let (p, h) = self.pick_pair();
        let (pid, hid) = (self.patients[p].id.clone(), self.hospitals[h].id.clone());
        let label = format!("{hid}/{pid}");
        let mut tx = self
            .record(tx_type, Parties::encounter(pid, hid), &label)
            .signed_by(&self.hospitals[h].key);
        if tx_type != TxType::DiagnosisOrChange {
            tx = tx.signed_by(&self.patients[p].key);
        }
        self.submit(tx)
    }

    fn share(&mut self) -> Result<bool, NetworkError> {
        if self.hospitals.len() < 2 {
            return self.encounter(TxType::DiagnosisOrChange);
        }
        let picked: Vec<usize> =
            rand::seq::index::sample(&mut self.rng, self.hospitals.len(), 2).into_vec();
        let (a, b) = (picked[0], picked[1]);
        let ids = [self.hospitals[a].id.clone(), self.hospitals[b].id.clone()];
        let label = format!("{}/{}", ids[0], ids[1]);
        let tx = self
            .record(TxType::InterHospitalShare, Parties::hospitals(ids), &label)
            .signed_by(&self.hospitals[a].key)
            .signed_by(&self.hospitals[b].key);
        self.submit(tx)
    }

    /// Grant, revoke or read. Returns whether a transaction was produced.
    fn access_event(&mut self) -> Result<bool, NetworkError> {
        let (p, h) = self.pick_pair();
        let patient = self.patients[p].id.clone();
        let provider = self.hospitals[h].key.public_key();
        let acl = self
            .state
            .acl(&patient)
            .expect("patients have ACLs")
            .clone();
        match self.rng.random_range(0..3u8) {
            0 | 1 if !acl.is_authorized(&provider) => {
                let d = grant_digest(&patient, &provider, acl.version + 1);
                let sig = self.patients[p].key.sign(d.as_bytes());
                self.state.grant_access(&patient, provider, &sig)?;
            }
            0 | 1 => {
                let d = revoke_digest(&patient, &provider, acl.version + 1);
                let sig = self.patients[p].key.sign(d.as_bytes());
                self.state.revoke_access(&patient, provider, &sig)?;
            }
            _ => {
                let sealed: Vec<_> = self
                    .state
                    .sidechain(&patient)
                    .map(|c| c.transactions().map(|t| t.tx_id.clone()).collect())
                    .unwrap_or_default();
                let Some(target) = sealed.choose(&mut self.rng).cloned() else {
                    return Ok(false);
                };
                let (decision, audit) =
                    self.state
                        .access_record(&self.hospitals[h].key, &patient, &target)?;
                match decision {
                    AccessDecision::Allowed => self.allowed += 1,
                    AccessDecision::Denied => self.denied += 1,
                }
                if audit.is_none() {
                    return Ok(false);
                }
            }
        }
        *self.counts.entry(TxType::RecordAccess).or_default() += 1;
        Ok(true)
    }

    fn random_event(&mut self) -> Result<bool, NetworkError> {
        match self.rng.random_range(0..10u8) {
            0 | 1 => self.encounter(TxType::DischargeSummary),
            2 => self.share(),
            3 | 4 => self.access_event(),
            5..=7 => self.encounter(TxType::DiagnosisOrChange),
            _ => self.encounter(TxType::Financial),
        }
    }
}

pub fn run_demo(cfg: &DemoConfig) -> Result<DemoOutcome, DemoError> {
    if cfg.hospitals == 0 {
        return Err(DemoError::InvalidConfig(
            "at least one hospital is required",
        ));
    }
    if cfg.patients == 0 {
        return Err(DemoError::InvalidConfig("at least one patient is required"));
    }
    if cfg.txs_per_slot == 0 {
        return Err(DemoError::InvalidConfig("txs_per_slot must be positive"));
    }

    let mut d = Driver {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        state: NetworkState::new(AuthorityRegistry::new(cfg.scheme)),
        keyring: Keyring::new(),
        hospitals: Vec::new(),
        patients: Vec::new(),
        counts: BTreeMap::new(),
        allowed: 0,
        denied: 0,
    };

    let notary = d.keypair(cfg.scheme);
    for _ in 0..cfg.hospitals {
        let key = d.keypair(cfg.scheme);
        let id = d.state.join_member(MemberKind::Hospital, &key)?;
        let att = Attestation::issue(
            &notary,
            key.public_key(),
            format!("identity of {id} confirmed by notary"),
        );
        d.state.admit_authority(&id, att)?;
        d.keyring.insert(key.public_key(), key.clone());
        d.hospitals.push(Actor { id, key });
    }
    for _ in 0..cfg.patients {
        let key = d.keypair(cfg.scheme);
        let id = d.state.join_member(MemberKind::Patient, &key)?;
        d.patients.push(Actor { id, key });
    }
    *d.counts.entry(TxType::JoinLeave).or_default() += cfg.hospitals + cfg.patients;

    let mut slot = 0u64;
    d.state.tick(slot, &d.keyring)?;
    slot += 1;

    let mut produced = 0usize;
    while produced < cfg.txs {
        let mut in_slot = 0;
        while in_slot < cfg.txs_per_slot && produced < cfg.txs {
            if d.random_event()? {
                produced += 1;
                in_slot += 1;
            }
        }
        d.state.tick(slot, &d.keyring)?;
        slot += 1;
    }
    while d.state.total_pending() > 0 {
        d.state.tick(slot, &d.keyring)?;
        slot += 1;
    }

    let mut checks = d.state.check_invariants();
    checks.push(InvariantCheck {
        name: "queues-drained",
        failures: if d.state.total_pending() == 0 {
            vec![]
        } else {
            vec!["pending transactions remain".into()]
        },
    });
    if let Some(dir) = &cfg.out_dir {
        checks.push(reload_check(&d.state, dir));
    }

    let report = render_report(cfg, &d, slot, &checks);
    Ok(DemoOutcome {
        state: d.state,
        checks,
        slots: slot,
        submitted_by_type: d.counts,
        access_decisions: (d.allowed, d.denied),
        report,
    })
}

fn reload_check(state: &NetworkState, dir: &std::path::Path) -> InvariantCheck {
    let mut failures = Vec::new();
    match state.persist(dir).and_then(|_| NetworkState::load(dir)) {
        Ok(loaded) => {
            if &loaded != state {
                failures.push("reloaded network differs from the original".to_string());
            }
            for ((r, a), (_, b)) in state.chains().zip(loaded.chains()) {
                if a.chain.tip_digest() != b.chain.tip_digest() || !b.chain.verify().is_ok() {
                    failures.push(format!("{r} does not round-trip"));
                }
            }
        }
        Err(e) => failures.push(e.to_string()),
    }
    InvariantCheck {
        name: "persist-reload",
        failures,
    }
}

fn render_report(cfg: &DemoConfig, d: &Driver, slots: u64, checks: &[InvariantCheck]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "network demo");
    let _ = writeln!(
        out,
        "  hospitals {}  patients {}  transactions {}  seed {}  scheme {}",
        cfg.hospitals,
        cfg.patients,
        cfg.txs,
        cfg.seed,
        cfg.scheme.name()
    );
    let _ = writeln!(
        out,
        "  slots {slots}  authorities {}",
        d.state.registry().len()
    );
    let _ = writeln!(out, "submitted");
    for (t, n) in &d.counts {
        let _ = writeln!(out, "  {:<20} {n}", format!("{t:?}"));
    }
    let _ = writeln!(
        out,
        "  access checks        allowed {} denied {}",
        d.allowed, d.denied
    );
    let _ = writeln!(out, "chains");
    for (r, slot) in d.state.chains() {
        let name = match &r {
            ChainRef::Mainchain => "mainchain".to_string(),
            ChainRef::Sidechain(m) => m.to_string(),
        };
        let verify = if slot.chain.verify().is_ok() {
            "ok"
        } else {
            "FAIL"
        };
        let _ = writeln!(
            out,
            "  {name:<10} blocks {:>4}  txs {:>5}  pending {:>3}  verify {verify}  tip {}",
            slot.chain.len(),
            slot.chain.tx_count(),
            slot.pending.len(),
            &slot.chain.tip_digest().to_hex()[..16],
        );
    }
    let _ = writeln!(out, "checks");
    for c in checks {
        let status = if c.passed() {
            "ok".to_string()
        } else {
            format!("FAIL ({})", c.failures.len())
        };
        let _ = writeln!(out, "  {:<16} {status}", c.name);
        for f in c.failures.iter().take(5) {
            let _ = writeln!(out, "    {f}");
        }
    }
    let ok = checks.iter().all(InvariantCheck::passed);
    let _ = writeln!(out, "result {}", if ok { "ok" } else { "FAIL" });
    out
}
