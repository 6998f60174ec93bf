//! Digests, keys and the pluggable signature schemes.
//!
//! Everything that gets hashed or signed goes through [`canonical_bytes`], a
//! sorted-key JSON encoding, so that digests are stable across processes and
//! re-encoding a decoded record reproduces the stored bytes.

use std::fmt;
use std::str::FromStr;

use ed25519_dalek::{Signer as _, Verifier as _};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};

/// A 32-byte SHA-256 digest, hex encoded on the wire.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    /// The all-zero digest used as `prev_header` of block 0.
    pub const ZERO: Digest = Digest([0u8; 32]);

    pub fn of(bytes: &[u8]) -> Digest {
        Digest(Sha256::digest(bytes).into())
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

/// A 32-byte public key. The scheme it belongs to is carried by the chain or
/// registry holding it, not by the key itself.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct PublicKey(pub [u8; 32]);

impl PublicKey {
    pub const NULL: PublicKey = PublicKey([0u8; 32]);

    pub fn is_null(&self) -> bool {
        *self == Self::NULL
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// First eight hex characters, for reports.
    pub fn short(&self) -> String {
        hex::encode(&self.0[..4])
    }
}

/// Opaque signature bytes.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct SignatureBytes(pub Vec<u8>);

macro_rules! hex_newtype_32 {
    ($ty:ident) => {
        impl fmt::Debug for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($ty), hex::encode(&self.0[..6]))
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&hex::encode(self.0))
            }
        }

        impl FromStr for $ty {
            type Err = hex::FromHexError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let mut out = [0u8; 32];
                hex::decode_to_slice(s, &mut out)?;
                Ok($ty(out))
            }
        }

        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&hex::encode(self.0))
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

hex_newtype_32!(Digest);
hex_newtype_32!(PublicKey);

impl fmt::Debug for SignatureBytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.0.len().min(6);
        write!(f, "SignatureBytes({}..)", hex::encode(&self.0[..n]))
    }
}

impl Serialize for SignatureBytes {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(&self.0))
    }
}

impl<'de> Deserialize<'de> for SignatureBytes {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s)
            .map(SignatureBytes)
            .map_err(serde::de::Error::custom)
    }
}

/// Sorted-key compact JSON. `serde_json::Map` is a `BTreeMap`, so going
/// through `Value` orders every object's keys.
pub fn canonical_string<T: Serialize + ?Sized>(value: &T) -> String {
    let value = serde_json::to_value(value).expect("record types always serialize");
    serde_json::to_string(&value).expect("json values always serialize")
}

pub fn canonical_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    canonical_string(value).into_bytes()
}

/// Verification half of a signature scheme.
pub trait SignatureScheme {
    fn verify(&self, key: &PublicKey, message: &[u8], signature: &SignatureBytes) -> bool;
}

/// Anything that can produce signatures under one public key.
pub trait Signer {
    fn public_key(&self) -> PublicKey;
    fn sign(&self, message: &[u8]) -> SignatureBytes;
}

/// Ed25519 (RFC 8032).
#[derive(Debug, Clone, Copy, Default)]
pub struct Ed25519;

impl SignatureScheme for Ed25519 {
    fn verify(&self, key: &PublicKey, message: &[u8], signature: &SignatureBytes) -> bool {
        let Ok(vk) = ed25519_dalek::VerifyingKey::from_bytes(&key.0) else {
            return false;
        };
        let Ok(sig) = ed25519_dalek::Signature::from_slice(&signature.0) else {
            return false;
        };
        vk.verify(message, &sig).is_ok()
    }
}

/// Deterministic keyed-hash stand-in for tests and fast simulations.
///
/// The public key is `SHA-256("stub-key" || secret)` and a signature is
/// `SHA-256("stub-sig" || public key || message)`. Anyone holding the
/// public key can forge, so this only checks plumbing, never security.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubScheme;

impl StubScheme {
    fn tag(key: &PublicKey, message: &[u8]) -> Vec<u8> {
        let mut h = Sha256::new();
        h.update(b"stub-sig");
        h.update(key.0);
        h.update(message);
        h.finalize().to_vec()
    }
}

impl SignatureScheme for StubScheme {
    fn verify(&self, key: &PublicKey, message: &[u8], signature: &SignatureBytes) -> bool {
        signature.0 == Self::tag(key, message)
    }
}

/// Which scheme a chain or registry is sealed under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    #[default]
    Ed25519,
    Stub,
}

impl SchemeKind {
    /// Derives a key pair from 32 seed bytes.
    pub fn keypair_from_seed(self, seed: [u8; 32]) -> KeyPair {
        match self {
            SchemeKind::Ed25519 => KeyPair::Ed25519(ed25519_dalek::SigningKey::from_bytes(&seed)),
            SchemeKind::Stub => {
                let mut h = Sha256::new();
                h.update(b"stub-key");
                h.update(seed);
                KeyPair::Stub(PublicKey(h.finalize().into()))
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Ed25519 => "ed25519",
            SchemeKind::Stub => "stub",
        }
    }
}

impl SignatureScheme for SchemeKind {
    fn verify(&self, key: &PublicKey, message: &[u8], signature: &SignatureBytes) -> bool {
        match self {
            SchemeKind::Ed25519 => Ed25519.verify(key, message, signature),
            SchemeKind::Stub => StubScheme.verify(key, message, signature),
        }
    }
}

/// A signing key for one of the supported schemes.
#[derive(Clone)]
pub enum KeyPair {
    Ed25519(ed25519_dalek::SigningKey),
    Stub(PublicKey),
}

impl KeyPair {
    pub fn scheme(&self) -> SchemeKind {
        match self {
            KeyPair::Ed25519(_) => SchemeKind::Ed25519,
            KeyPair::Stub(_) => SchemeKind::Stub,
        }
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "KeyPair({}, {})",
            self.scheme().name(),
            self.public_key().short()
        )
    }
}

impl Signer for KeyPair {
    fn public_key(&self) -> PublicKey {
        match self {
            KeyPair::Ed25519(sk) => PublicKey(sk.verifying_key().to_bytes()),
            KeyPair::Stub(pk) => *pk,
        }
    }

    fn sign(&self, message: &[u8]) -> SignatureBytes {
        match self {
            KeyPair::Ed25519(sk) => SignatureBytes(sk.sign(message).to_bytes().to_vec()),
            KeyPair::Stub(pk) => SignatureBytes(StubScheme::tag(pk, message)),
        }
    }
}
