//! Newline-delimited record files.
//!
//! Every file starts with a header record followed by one canonical record
//! per line. A line is accepted only if re-encoding the decoded record gives
//! back the exact stored bytes, so digests computed after a reload match the
//! ones computed before the write.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Block, Chain, ChainRole, TxId, FORMAT_VERSION};
use crate::crypto::{canonical_string, SchemeKind};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("corrupt record in {file} at line {line}: {reason}")]
    CorruptRecord {
        file: PathBuf,
        line: usize,
        reason: String,
    },
}

impl StoreError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        StoreError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn corrupt(file: &Path, line: usize, reason: impl Into<String>) -> Self {
        StoreError::CorruptRecord {
            file: file.to_path_buf(),
            line,
            reason: reason.into(),
        }
    }
}

/// First line of a chain file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainHeader {
    pub chain_id: String,
    pub role: ChainRole,
    pub anchor: Option<TxId>,
    pub scheme: SchemeKind,
    pub format_version: u32,
}

/// Encodes a header record followed by body records, one per line.
pub fn encode_records<H: Serialize, R: Serialize>(header: &H, records: &[R]) -> String {
    let mut out = canonical_string(header);
    out.push('\n');
    for r in records {
        out.push_str(&canonical_string(r));
        out.push('\n');
    }
    out
}

fn decode_line<T: Serialize + DeserializeOwned>(
    file: &Path,
    line_no: usize,
    line: &str,
) -> Result<T, StoreError> {
    let value: T = serde_json::from_str(line)
        .map_err(|e| StoreError::corrupt(file, line_no, e.to_string()))?;
    if canonical_string(&value) != line {
        return Err(StoreError::corrupt(
            file,
            line_no,
            "record is not in canonical form",
        ));
    }
    Ok(value)
}

/// Decodes a record file. `file` is only used for error reporting. Line
/// numbers in errors are 1-based; line 1 is the header.
pub fn decode_records<H, R>(file: &Path, text: &str) -> Result<(H, Vec<R>), StoreError>
where
    H: Serialize + DeserializeOwned,
    R: Serialize + DeserializeOwned,
{
    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Err(StoreError::corrupt(file, 1, "missing header record"));
    }
    let mut lines = body.split('\n').enumerate().map(|(i, l)| (i + 1, l));
    let (n, first) = lines.next().expect("non-empty body has a first line");
    let header = decode_line::<H>(file, n, first)?;
    let records = lines
        .map(|(n, l)| decode_line::<R>(file, n, l))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((header, records))
}

pub fn read_records<H, R>(path: &Path) -> Result<(H, Vec<R>), StoreError>
where
    H: Serialize + DeserializeOwned,
    R: Serialize + DeserializeOwned,
{
    let text = fs::read_to_string(path).map_err(|e| StoreError::io(path, e))?;
    decode_records(path, &text)
}

pub fn write_records<H: Serialize, R: Serialize>(
    path: &Path,
    header: &H,
    records: &[R],
) -> Result<(), StoreError> {
    fs::write(path, encode_records(header, records)).map_err(|e| StoreError::io(path, e))
}

pub(crate) fn check_version(file: &Path, version: u32) -> Result<(), StoreError> {
    if version != FORMAT_VERSION {
        return Err(StoreError::corrupt(
            file,
            1,
            format!("unsupported format_version {version}"),
        ));
    }
    Ok(())
}

impl Chain {
    pub fn header(&self) -> ChainHeader {
        ChainHeader {
            chain_id: self.chain_id.clone(),
            role: self.role.clone(),
            anchor: self.anchor.clone(),
            scheme: self.scheme,
            format_version: FORMAT_VERSION,
        }
    }

    pub fn encode(&self) -> String {
        encode_records(&self.header(), &self.blocks)
    }

    /// Decodes without validating blocks; run [`Chain::verify`] for that.
    pub fn decode(file: &Path, text: &str) -> Result<Chain, StoreError> {
        let (header, blocks): (ChainHeader, Vec<Block>) = decode_records(file, text)?;
        check_version(file, header.format_version)?;
        Ok(Chain {
            chain_id: header.chain_id,
            role: header.role,
            anchor: header.anchor,
            scheme: header.scheme,
            blocks,
        })
    }

    pub fn write_file(&self, path: &Path) -> Result<(), StoreError> {
        fs::write(path, self.encode()).map_err(|e| StoreError::io(path, e))
    }

    pub fn read_file(path: &Path) -> Result<Chain, StoreError> {
        let text = fs::read_to_string(path).map_err(|e| StoreError::io(path, e))?;
        Chain::decode(path, &text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::Digest;
    use crate::ledger::{MemberId, Parties, TransactionRecord, TxType};

    fn sample_chain(blocks: usize) -> Chain {
        let sealer = SchemeKind::Ed25519.keypair_from_seed([3; 32]);
        let owner = MemberId("P0001".into());
        let mut chain = Chain::new(
            "P0001",
            ChainRole::PatientSidechain {
                owner: owner.clone(),
            },
            SchemeKind::Ed25519,
        )
        .with_anchor(TxId("tx-000001".into()));
        for i in 0..blocks {
            let tx = TransactionRecord::new(
                TxId(format!("tx-{i:06}")),
                TxType::Financial,
                Digest::of(&[i as u8]),
                "ehr://x",
                i as u64,
                Parties::patient(owner.clone()),
            )
            .signed_by(&sealer);
            let b = Block::sealed(chain.tip_digest(), vec![tx], i as u64, &sealer);
            chain.append_block(b).unwrap();
        }
        chain
    }

    #[test]
    fn header_line_layout() {
        let text = sample_chain(0).encode();
        assert_eq!(
            text,
            "{\"anchor\":\"tx-000001\",\"chain_id\":\"P0001\",\"format_version\":1,\
             \"role\":{\"kind\":\"patient_sidechain\",\"owner\":\"P0001\"},\"scheme\":\"ed25519\"}\n"
        );
    }

    #[test]
    fn reload_preserves_bytes_and_digests() {
        let chain = sample_chain(4);
        let text = chain.encode();
        let back = Chain::decode(Path::new("mem"), &text).unwrap();
        assert_eq!(back.encode(), text);
        assert_eq!(back.tip_digest(), chain.tip_digest());
        assert_eq!(
            back.blocks[0].header_digest(),
            chain.blocks[0].header_digest()
        );
        assert!(back.verify().is_ok());
    }

    #[test]
    fn truncated_last_line_is_corrupt_at_that_line() {
        let text = sample_chain(3).encode();
        let cut = &text[..text.len() - 10];
        match Chain::decode(Path::new("f.chain"), cut) {
            Err(StoreError::CorruptRecord { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_canonical_line_is_rejected() {
        let text = sample_chain(1).encode();
        let spaced = text.replacen("{\"prev_header\"", "{ \"prev_header\"", 1);
        assert!(matches!(
            Chain::decode(Path::new("f"), &spaced),
            Err(StoreError::CorruptRecord { line: 2, .. })
        ));
    }

    #[test]
    fn empty_text_is_missing_header() {
        assert!(matches!(
            Chain::decode(Path::new("f"), ""),
            Err(StoreError::CorruptRecord { line: 1, .. })
        ));
    }
}
