//! Append-only, hash-chained ledger of session artifacts.
//!
//! # File format
//!
//! A ledger file is a sequence of records, each a little-endian `u32` byte
//! length followed by that many bytes of block text:
//!
//! ```text
//! index:<decimal>\n
//! prev:<64 lowercase hex>\n
//! kind:<SessionOpen|Orders|Coalitions|Transactions|Settlement>\n
//! hash:<64 lowercase hex>\n
//! \n
//! <payload bytes>
//! ```
//!
//! `hash` is SHA-256 over `index` (`u64`, little-endian), the 32 raw bytes of
//! `prev`, one kind byte (0 to 4 in the order listed) and the payload. The
//! first block has an all-zero `prev`; every later block carries the hash of
//! the one before it. An empty file is a valid, empty ledger.

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

pub type Hash = [u8; 32];

pub const ZERO_HASH: Hash = [0; 32];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PayloadKind {
    SessionOpen,
    Orders,
    Coalitions,
    Transactions,
    Settlement,
}

impl PayloadKind {
    pub const ALL: [PayloadKind; 5] = [
        PayloadKind::SessionOpen,
        PayloadKind::Orders,
        PayloadKind::Coalitions,
        PayloadKind::Transactions,
        PayloadKind::Settlement,
    ];

    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PayloadKind::SessionOpen => "SessionOpen",
            PayloadKind::Orders => "Orders",
            PayloadKind::Coalitions => "Coalitions",
            PayloadKind::Transactions => "Transactions",
            PayloadKind::Settlement => "Settlement",
        }
    }
}

impl fmt::Display for PayloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PayloadKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PayloadKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown payload kind {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LedgerBlock {
    pub index: u64,
    pub prev_hash: Hash,
    pub kind: PayloadKind,
    pub payload: Vec<u8>,
    pub hash: Hash,
}

pub fn block_hash(index: u64, prev_hash: &Hash, kind: PayloadKind, payload: &[u8]) -> Hash {
    let mut h = Sha256::new();
    h.update(index.to_le_bytes());
    h.update(prev_hash);
    h.update([kind.tag()]);
    h.update(payload);
    h.finalize().into()
}

impl LedgerBlock {
    pub fn new(index: u64, prev_hash: Hash, kind: PayloadKind, payload: Vec<u8>) -> Self {
        let hash = block_hash(index, &prev_hash, kind, &payload);
        LedgerBlock { index, prev_hash, kind, payload, hash }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = format!(
            "index:{}\nprev:{}\nkind:{}\nhash:{}\n\n",
            self.index,
            hex::encode(self.prev_hash),
            self.kind,
            hex::encode(self.hash)
        )
        .into_bytes();
        out.extend_from_slice(&self.payload);
        out
    }

    /// Parses block text. Accepts anything [`LedgerBlock::to_bytes`] could
    /// have produced from some field values, without checking the hash.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, String> {
        let mut rest = bytes;
        let mut field = |name: &str| -> Result<String, String> {
            let nl = rest.iter().position(|&b| b == b'\n').ok_or_else(|| format!("missing {name} line"))?;
            let line = std::str::from_utf8(&rest[..nl]).map_err(|_| format!("{name} line is not UTF-8"))?;
            rest = &rest[nl + 1..];
            line.strip_prefix(name)
                .and_then(|l| l.strip_prefix(':'))
                .map(str::to_owned)
                .ok_or_else(|| format!("expected {name} line"))
        };
        let index: u64 = field("index")?.parse().map_err(|e| format!("bad index: {e}"))?;
        let prev_hash = parse_hash(&field("prev")?)?;
        let kind: PayloadKind = field("kind")?.parse()?;
        let hash = parse_hash(&field("hash")?)?;
        let blank = rest.first().copied();
        if blank != Some(b'\n') {
            return Err("missing blank line before payload".into());
        }
        Ok(LedgerBlock { index, prev_hash, kind, payload: rest[1..].to_vec(), hash })
    }
}

fn parse_hash(s: &str) -> Result<Hash, String> {
    let mut out = [0u8; 32];
    hex::decode_to_slice(s, &mut out).map_err(|e| format!("bad hash {s:?}: {e}"))?;
    Ok(out)
}

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("ledger storage failure: {0}")]
    StorageFailure(#[from] io::Error),
    #[error("ledger file is not framed correctly at record {0}")]
    Framing(u64),
    #[error("ledger record {index} is unreadable: {message}")]
    Unreadable { index: u64, message: String },
}

/// Splits ledger bytes into block texts.
fn frames(bytes: &[u8]) -> Vec<Result<&[u8], u64>> {
    let mut out = Vec::new();
    let mut pos = 0usize;
    let mut n = 0u64;
    while pos < bytes.len() {
        let Some(len) = bytes.get(pos..pos + 4) else {
            out.push(Err(n));
            break;
        };
        let len = u32::from_le_bytes(len.try_into().expect("4 bytes")) as usize;
        let Some(body) = bytes.get(pos + 4..pos + 4 + len) else {
            out.push(Err(n));
            break;
        };
        out.push(Ok(body));
        pos += 4 + len;
        n += 1;
    }
    out
}

pub fn parse_ledger(bytes: &[u8]) -> Result<Vec<LedgerBlock>, LedgerError> {
    frames(bytes)
        .into_iter()
        .enumerate()
        .map(|(i, f)| {
            let body = f.map_err(LedgerError::Framing)?;
            LedgerBlock::from_bytes(body).map_err(|message| LedgerError::Unreadable { index: i as u64, message })
        })
        .collect()
}

pub fn read_ledger(path: &Path) -> Result<Vec<LedgerBlock>, LedgerError> {
    parse_ledger(&std::fs::read(path)?)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VerifyReport {
    Pass {
        blocks: u64,
    },
    /// `index` is the position of the first record that fails.
    Fail {
        index: u64,
        reason: String,
    },
}

impl VerifyReport {
    pub fn is_pass(&self) -> bool {
        matches!(self, VerifyReport::Pass { .. })
    }
}

/// Checks framing, canonical encoding, indices, hash links and hashes in a
/// single pass, stopping at the first bad record.
pub fn verify_bytes(bytes: &[u8]) -> VerifyReport {
    let mut prev = ZERO_HASH;
    let mut count = 0u64;
    for (i, f) in frames(bytes).into_iter().enumerate() {
        let i = i as u64;
        let fail = |reason: String| VerifyReport::Fail { index: i, reason };
        let body = match f {
            Ok(b) => b,
            Err(_) => return fail("truncated record".into()),
        };
        let block = match LedgerBlock::from_bytes(body) {
            Ok(b) => b,
            Err(e) => return fail(e),
        };
        if block.to_bytes() != body {
            return fail("non-canonical block encoding".into());
        }
        if block.index != i {
            return fail(format!("index {} at position {i}", block.index));
        }
        if block.prev_hash != prev {
            return fail("previous-hash link broken".into());
        }
        if block_hash(block.index, &block.prev_hash, block.kind, &block.payload) != block.hash {
            return fail("hash mismatch".into());
        }
        prev = block.hash;
        count += 1;
    }
    VerifyReport::Pass { blocks: count }
}

pub fn verify_chain(path: &Path) -> Result<VerifyReport, LedgerError> {
    Ok(verify_bytes(&std::fs::read(path)?))
}

/// Single-writer ledger over any byte sink.
pub struct Ledger<W: Write> {
    out: W,
    next_index: u64,
    last_hash: Hash,
}

impl Ledger<Vec<u8>> {
    pub fn in_memory() -> Self {
        Ledger::new(Vec::new())
    }

    pub fn bytes(&self) -> &[u8] {
        &self.out
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.out
    }
}

impl Ledger<File> {
    /// Creates a new ledger file, replacing any existing one.
    pub fn create(path: &Path) -> Result<Self, LedgerError> {
        Ok(Ledger::new(File::create(path)?))
    }

    /// Opens an existing ledger file for appending. The chain continues from
    /// the last record; its integrity is not checked here.
    pub fn open(path: &Path) -> Result<Self, LedgerError> {
        let mut file = OpenOptions::new().read(true).append(true).open(path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let blocks = parse_ledger(&bytes)?;
        let mut ledger = Ledger::new(file);
        if let Some(last) = blocks.last() {
            ledger.next_index = blocks.len() as u64;
            ledger.last_hash = last.hash;
        }
        Ok(ledger)
    }
}

impl<W: Write> Ledger<W> {
    pub fn new(out: W) -> Self {
        Ledger { out, next_index: 0, last_hash: ZERO_HASH }
    }

    pub fn len(&self) -> u64 {
        self.next_index
    }

    pub fn is_empty(&self) -> bool {
        self.next_index == 0
    }

    /// Appends and flushes one block.
    pub fn append(&mut self, kind: PayloadKind, payload: Vec<u8>) -> Result<LedgerBlock, LedgerError> {
        let block = LedgerBlock::new(self.next_index, self.last_hash, kind, payload);
        let bytes = block.to_bytes();
        let len = u32::try_from(bytes.len())
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "block larger than 4 GiB"))?;
        self.out.write_all(&len.to_le_bytes())?;
        self.out.write_all(&bytes)?;
        self.out.flush()?;
        self.next_index += 1;
        self.last_hash = block.hash;
        Ok(block)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(n: usize) -> Vec<u8> {
        let mut l = Ledger::in_memory();
        for i in 0..n {
            l.append(PayloadKind::ALL[i % 5], format!("record {i}\n").into_bytes()).unwrap();
        }
        l.into_bytes()
    }

    #[test]
    fn first_and_second_append() {
        let mut l = Ledger::in_memory();
        let a = l.append(PayloadKind::SessionOpen, b"a\n".to_vec()).unwrap();
        let b = l.append(PayloadKind::Orders, b"b\n".to_vec()).unwrap();
        assert_eq!((a.index, a.prev_hash), (0, ZERO_HASH));
        assert_eq!((b.index, b.prev_hash), (1, a.hash));
        assert_eq!(verify_bytes(l.bytes()), VerifyReport::Pass { blocks: 2 });
    }

    #[test]
    fn empty_ledger_passes() {
        assert_eq!(verify_bytes(&[]), VerifyReport::Pass { blocks: 0 });
    }

    #[test]
    fn flipped_payload_byte_fails_at_that_block() {
        let bytes = sample(4);
        let blocks = parse_ledger(&bytes).unwrap();
        // Offset of block 2's last payload byte.
        let end: usize = blocks[..3].iter().map(|b| 4 + b.to_bytes().len()).sum();
        let mut bad = bytes.clone();
        bad[end - 2] ^= 0x01;
        assert!(matches!(verify_bytes(&bad), VerifyReport::Fail { index: 2, .. }));
    }

    #[test]
    fn uppercase_hex_is_rejected() {
        let block = LedgerBlock::new(0, ZERO_HASH, PayloadKind::Orders, b"x".to_vec());
        let text = String::from_utf8(block.to_bytes()).unwrap();
        let hex = hex::encode(block.hash);
        let upper = text.replace(&hex, &hex.to_uppercase());
        assert_ne!(upper, text);
        let mut bytes = (upper.len() as u32).to_le_bytes().to_vec();
        bytes.extend_from_slice(upper.as_bytes());
        assert!(matches!(verify_bytes(&bytes), VerifyReport::Fail { index: 0, .. }));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn any_single_byte_mutation_is_detected(n in 1usize..6, pos in any::<prop::sample::Index>(), x in 1u8..=255) {
            let bytes = sample(n);
            prop_assert!(verify_bytes(&bytes).is_pass());
            let mut bad = bytes.clone();
            let i = pos.index(bad.len());
            bad[i] ^= x;
            prop_assert!(!verify_bytes(&bad).is_pass());
        }
    }
}
