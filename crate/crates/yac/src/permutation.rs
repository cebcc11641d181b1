//! Hash-seeded peer ordering for vote routing.

use crate::quorum::QuorumError;
use crate::types::{Hash, PeerId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic permutation of the canonical peer list for one round.
///
/// Fisher-Yates driven by a ChaCha stream seeded from the first 8 bytes
/// of the block hash (little-endian). Pure: identical inputs always
/// produce the identical order.
pub fn peer_order(block_hash: &Hash, peers: &[PeerId]) -> Result<Vec<PeerId>, QuorumError> {
    if peers.is_empty() {
        return Err(QuorumError::EmptyNetwork);
    }
    let seed = u64::from_le_bytes(block_hash.0[..8].try_into().unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<PeerId> = peers.to_vec();
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn peers(n: u8) -> Vec<PeerId> {
        (0..n)
            .map(|i| PeerId { public_key: [i; 32], display_name: format!("p{i}") })
            .collect()
    }

    #[test]
    fn singleton_order_is_identity() {
        let p = peers(1);
        assert_eq!(peer_order(&Hash([7; 32]), &p).unwrap(), p);
    }

    #[test]
    fn empty_network_faults() {
        assert_eq!(peer_order(&Hash::ZERO, &[]), Err(QuorumError::EmptyNetwork));
    }

    #[test]
    fn pure_and_bijective() {
        let p = peers(5);
        let h = Hash([0xab; 32]);
        let a = peer_order(&h, &p).unwrap();
        let b = peer_order(&h, &p).unwrap();
        assert_eq!(a, b);
        let set: BTreeSet<_> = a.iter().collect();
        assert_eq!(set.len(), p.len());
    }
}
