use std::collections::VecDeque;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use healthchain_core::crypto::SchemeKind;
use healthchain_core::sim::{
    sidechains_needed, simulate_day, CapacityQuery, SealModel, WorkloadSpec,
};
use healthchain_core::{
    AuthorityRegistry, Block, Chain, ChainRole, Digest, Parties, Signer, TransactionRecord, TxId,
    TxType,
};

fn txs(n: usize, key: &dyn Signer) -> Vec<TransactionRecord> {
    (0..n)
        .map(|i| {
            let id = format!("tx-{i:08}");
            TransactionRecord::new(
                TxId(id.clone()),
                TxType::JoinLeave,
                Digest::of(id.as_bytes()),
                "ehr://bench",
                i as u64,
                Parties::patient(healthchain_core::MemberId("P0001".into())),
            )
            .signed_by(key)
        })
        .collect()
}

fn chain_of(blocks: usize, per_block: usize, scheme: SchemeKind) -> Chain {
    let key = scheme.keypair_from_seed([1; 32]);
    let mut chain = Chain::new("bench", ChainRole::Mainchain, scheme);
    let all = txs(blocks * per_block, &key);
    for (i, batch) in all.chunks(per_block).enumerate() {
        let b = Block::sealed(chain.tip_digest(), batch.to_vec(), i as u64, &key);
        chain.append_block(b).unwrap();
    }
    chain
}

fn simulator(c: &mut Criterion) {
    let seal = SealModel::new("ethereum", 25.0).unwrap();
    c.bench_function("simulate_day 10M", |b| {
        b.iter(|| simulate_day(&WorkloadSpec::per_day(10_000_000.0, 7), &seal).unwrap())
    });
    c.bench_function("sidechains_needed", |b| {
        let q = CapacityQuery {
            n_patients: 300_000,
            r_per_patient_day: 110.0,
            mu_tps: 7.0,
        };
        b.iter(|| sidechains_needed(std::hint::black_box(&q)))
    });
}

fn ledger(c: &mut Criterion) {
    let chain = chain_of(50, 20, SchemeKind::Ed25519);
    c.bench_function("header_digest", |b| {
        b.iter(|| chain.blocks[10].header_digest())
    });
    c.bench_function("verify 50x20 ed25519", |b| b.iter(|| chain.verify()));
}

fn sealing(c: &mut Criterion) {
    let key = SchemeKind::Ed25519.keypair_from_seed([1; 32]);
    let notary = SchemeKind::Ed25519.keypair_from_seed([2; 32]);
    let mut reg = AuthorityRegistry::new(SchemeKind::Ed25519);
    reg.admit_authority(
        key.public_key(),
        healthchain_core::Attestation::issue(&notary, key.public_key(), "bench"),
    )
    .unwrap();
    let chain = Chain::new("bench", ChainRole::Mainchain, SchemeKind::Ed25519);
    let batch = txs(256, &key);
    c.bench_function("seal 256 txs", |b| {
        b.iter_batched(
            || batch.iter().cloned().collect::<VecDeque<_>>(),
            |mut q| reg.seal(&chain, &mut q, 0, &key).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, simulator, ledger, sealing);
criterion_main!(benches);
