//! Hashing and the pluggable signature boundary.
//!
//! The protocol assumes working cryptography rather than a specific
//! scheme, so signing sits behind [`SignatureScheme`]. The default
//! [`SimScheme`] is a keyed digest: fast, deterministic, and
//! unforgeable as long as callers only sign through their own
//! [`SecretKey`]. Verification material for every generated key lives
//! inside the scheme instance, which plays the role of "the math" that
//! real deployments would get from an actual signature algorithm; a
//! production scheme slots in behind the same trait.

use crate::types::{Hash, PeerId, Signature};
use sha2::{Digest, Sha256};
use std::collections::HashMap;

/// SHA-256 over the canonical serialization of a protocol value.
pub fn hash(payload: &[u8]) -> Hash {
    let mut h = Sha256::new();
    h.update(payload);
    Hash(h.finalize().into())
}

#[derive(Clone)]
pub struct SecretKey(pub(crate) [u8; 32]);

#[derive(Clone)]
pub struct Keypair {
    pub secret: SecretKey,
    pub peer: PeerId,
}

pub trait SignatureScheme: Send + Sync {
    fn sign(&self, key: &SecretKey, payload: &[u8]) -> Vec<u8>;
    fn verify(&self, public_key: &[u8; 32], payload: &[u8], sig: &[u8]) -> bool;
}

const TAG_PUB: &[u8] = b"yac/pub";
const TAG_SIG: &[u8] = b"yac/sig";

/// Simulation-grade keyed-digest scheme.
#[derive(Default)]
pub struct SimScheme {
    secrets: HashMap<[u8; 32], [u8; 32]>,
}

impl SimScheme {
    pub fn new() -> Self {
        SimScheme::default()
    }

    /// Deterministically derive a keypair from a domain seed and a name.
    pub fn generate_from_seed(&mut self, domain: &[u8], name: &str) -> Keypair {
        let mut h = Sha256::new();
        h.update(b"yac/key");
        h.update((domain.len() as u32).to_le_bytes());
        h.update(domain);
        h.update(name.as_bytes());
        let secret: [u8; 32] = h.finalize().into();
        let public: [u8; 32] = {
            let mut h = Sha256::new();
            h.update(TAG_PUB);
            h.update(secret);
            h.finalize().into()
        };
        self.secrets.insert(public, secret);
        Keypair {
            secret: SecretKey(secret),
            peer: PeerId { public_key: public, display_name: name.to_string() },
        }
    }
}

impl SignatureScheme for SimScheme {
    fn sign(&self, key: &SecretKey, payload: &[u8]) -> Vec<u8> {
        let mut h = Sha256::new();
        h.update(TAG_SIG);
        h.update(key.0);
        h.update(payload);
        h.finalize().to_vec()
    }

    fn verify(&self, public_key: &[u8; 32], payload: &[u8], sig: &[u8]) -> bool {
        let Some(secret) = self.secrets.get(public_key) else {
            return false;
        };
        let expected = self.sign(&SecretKey(*secret), payload);
        // constant-time comparison is irrelevant for the simulation
        expected.as_slice() == sig
    }
}

/// Convenience for the common "verify a [`Signature`] value" shape.
pub fn verify_signature(scheme: &dyn SignatureScheme, payload: &[u8], sig: &Signature) -> bool {
    scheme.verify(&sig.signer.public_key, payload, &sig.bytes)
}
