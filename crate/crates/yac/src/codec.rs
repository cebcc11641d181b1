//! Canonical serialization.
//!
//! The wire form is length-prefixed fields in declaration order with
//! little-endian fixed-width integers. Vote sets are encoded sorted by
//! signer key, so two peers holding the same set in different insertion
//! orders produce identical bytes. Honest peers hashing the same block
//! therefore get the same digest on every platform.

use crate::types::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("unexpected end of input at offset {0}")]
    Truncated(usize),
    #[error("invalid tag {tag} for {what}")]
    BadTag { what: &'static str, tag: u8 },
    #[error("invalid utf-8 string")]
    BadString,
    #[error("trailing {0} bytes after value")]
    Trailing(usize),
}

pub trait Canon: Sized {
    fn encode_into(&self, out: &mut Vec<u8>);
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError>;

    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_into(&mut out);
        out
    }

    fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(bytes);
        let v = Self::decode_from(&mut r)?;
        r.finish()?;
        Ok(v)
    }
}

pub struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.pos + n > self.bytes.len() {
            return Err(CodecError::Truncated(self.pos));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn i64(&mut self) -> Result<i64, CodecError> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn bytes32(&mut self) -> Result<[u8; 32], CodecError> {
        Ok(self.take(32)?.try_into().unwrap())
    }

    pub fn var_bytes(&mut self) -> Result<Vec<u8>, CodecError> {
        let len = self.u32()? as usize;
        Ok(self.take(len)?.to_vec())
    }

    pub fn string(&mut self) -> Result<String, CodecError> {
        String::from_utf8(self.var_bytes()?).map_err(|_| CodecError::BadString)
    }

    pub fn finish(&self) -> Result<(), CodecError> {
        let rest = self.bytes.len() - self.pos;
        if rest == 0 {
            Ok(())
        } else {
            Err(CodecError::Trailing(rest))
        }
    }
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    out.extend_from_slice(&(b.len() as u32).to_le_bytes());
    out.extend_from_slice(b);
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_bytes(out, s.as_bytes());
}

fn put_list<T: Canon>(out: &mut Vec<u8>, items: &[T]) {
    out.extend_from_slice(&(items.len() as u32).to_le_bytes());
    for item in items {
        item.encode_into(out);
    }
}

fn get_list<T: Canon>(r: &mut Reader<'_>) -> Result<Vec<T>, CodecError> {
    let n = r.u32()? as usize;
    let mut items = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        items.push(T::decode_from(r)?);
    }
    Ok(items)
}

impl Canon for Hash {
    fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.0);
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Hash(r.bytes32()?))
    }
}

impl Canon for PeerId {
    fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.public_key);
        put_str(out, &self.display_name);
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(PeerId { public_key: r.bytes32()?, display_name: r.string()? })
    }
}

impl Canon for Signature {
    fn encode_into(&self, out: &mut Vec<u8>) {
        put_bytes(out, &self.bytes);
        self.signer.encode_into(out);
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Signature { bytes: r.var_bytes()?, signer: PeerId::decode_from(r)? })
    }
}

impl Canon for Command {
    fn encode_into(&self, out: &mut Vec<u8>) {
        match self {
            Command::Transfer { src, dst, amount } => {
                out.push(0);
                put_str(out, src);
                put_str(out, dst);
                out.extend_from_slice(&amount.to_le_bytes());
            }
            Command::CreateAccount { name } => {
                out.push(1);
                put_str(out, name);
            }
        }
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        match r.u8()? {
            0 => Ok(Command::Transfer { src: r.string()?, dst: r.string()?, amount: r.i64()? }),
            1 => Ok(Command::CreateAccount { name: r.string()? }),
            tag => Err(CodecError::BadTag { what: "Command", tag }),
        }
    }
}

impl Canon for Transaction {
    fn encode_into(&self, out: &mut Vec<u8>) {
        self.id.encode_into(out);
        put_str(out, &self.creator);
        self.command.encode_into(out);
        self.client_signature.encode_into(out);
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Transaction {
            id: Hash::decode_from(r)?,
            creator: r.string()?,
            command: Command::decode_from(r)?,
            client_signature: Signature::decode_from(r)?,
        })
    }
}

impl Transaction {
    /// Bytes covered by the client signature: everything except the id
    /// and the signature itself.
    pub fn signing_payload(creator: &str, command: &Command) -> Vec<u8> {
        let mut out = Vec::new();
        put_str(&mut out, creator);
        command.encode_into(&mut out);
        out
    }

    /// Bytes hashed to form the transaction id.
    pub fn id_payload(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_str(&mut out, &self.creator);
        self.command.encode_into(&mut out);
        self.client_signature.encode_into(&mut out);
        out
    }
}

impl Canon for Proposal {
    fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.round.to_le_bytes());
        put_list(out, &self.transactions);
        out.extend_from_slice(&self.created_at.to_le_bytes());
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Proposal { round: r.u64()?, transactions: get_list(r)?, created_at: r.u64()? })
    }
}

impl Canon for Block {
    fn encode_into(&self, out: &mut Vec<u8>) {
        self.proposal_hash.encode_into(out);
        put_list(out, &self.transactions);
        out.extend_from_slice(&self.height.to_le_bytes());
        self.prev_block_hash.encode_into(out);
        self.block_hash.encode_into(out);
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Block {
            proposal_hash: Hash::decode_from(r)?,
            transactions: get_list(r)?,
            height: r.u64()?,
            prev_block_hash: Hash::decode_from(r)?,
            block_hash: Hash::decode_from(r)?,
        })
    }
}

impl Block {
    /// Bytes hashed to form `block_hash`: every field except the hash itself.
    pub fn hash_payload(
        proposal_hash: &Hash,
        transactions: &[Transaction],
        height: u64,
        prev_block_hash: &Hash,
    ) -> Vec<u8> {
        let mut out = Vec::new();
        proposal_hash.encode_into(&mut out);
        put_list(&mut out, transactions);
        out.extend_from_slice(&height.to_le_bytes());
        prev_block_hash.encode_into(&mut out);
        out
    }
}

impl Canon for Vote {
    fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.round.to_le_bytes());
        self.proposal_hash.encode_into(out);
        self.block_hash.encode_into(out);
        self.signature.encode_into(out);
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Vote {
            round: r.u64()?,
            proposal_hash: Hash::decode_from(r)?,
            block_hash: Hash::decode_from(r)?,
            signature: Signature::decode_from(r)?,
        })
    }
}

impl Vote {
    /// Bytes covered by the vote signature.
    pub fn signing_payload(round: u64, proposal_hash: &Hash, block_hash: &Hash) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&round.to_le_bytes());
        proposal_hash.encode_into(&mut out);
        block_hash.encode_into(&mut out);
        out
    }
}

impl Canon for CommitMessage {
    fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.round.to_le_bytes());
        self.block_hash.encode_into(out);
        // kept sorted by construction; sort again to stay canonical even
        // for hand-built values
        let mut votes = self.votes.clone();
        votes.sort_by(|a, b| a.signer().cmp(b.signer()));
        put_list(out, &votes);
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(CommitMessage { round: r.u64()?, block_hash: Hash::decode_from(r)?, votes: get_list(r)? })
    }
}

impl Canon for RejectMessage {
    fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.round.to_le_bytes());
        let mut votes = self.votes.clone();
        votes.sort_by(|a, b| (a.signer(), a.block_hash).cmp(&(b.signer(), b.block_hash)));
        put_list(out, &votes);
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(RejectMessage { round: r.u64()?, votes: get_list(r)? })
    }
}
