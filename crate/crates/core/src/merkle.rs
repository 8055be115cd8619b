//! SHA-256 binary hash tree over the same weight vectors, used as a size and
//! timing baseline. Leaves hash the 32-byte scalar encoding.

use sha2::{Digest, Sha256};

use crate::engine::Scalar;
use crate::mle::WeightVector;

pub type Hash = [u8; 32];

const LEAF: u8 = 0x00;
const NODE: u8 = 0x01;

pub fn leaf_hash(value: &Scalar) -> Hash {
    let mut h = Sha256::new();
    h.update([LEAF]);
    h.update(value.to_bytes());
    h.finalize().into()
}

pub fn node_hash(left: &Hash, right: &Hash) -> Hash {
    let mut h = Sha256::new();
    h.update([NODE]);
    h.update(left);
    h.update(right);
    h.finalize().into()
}

#[derive(Clone, Debug)]
pub struct MerkleTree {
    /// `layers[0]` are the leaves, the last layer is the root.
    layers: Vec<Vec<Hash>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MerkleProof {
    pub index: u64,
    /// Sibling hashes from the leaf up.
    pub siblings: Vec<Hash>,
}

impl MerkleProof {
    pub fn size_bytes(&self) -> usize {
        self.siblings.len() * 32
    }
}

impl MerkleTree {
    pub fn build(w: &WeightVector) -> Self {
        let mut layers = vec![w.values().iter().map(leaf_hash).collect::<Vec<_>>()];
        while layers.last().unwrap().len() > 1 {
            let next = layers
                .last()
                .unwrap()
                .chunks(2)
                .map(|p| node_hash(&p[0], &p[1]))
                .collect();
            layers.push(next);
        }
        Self { layers }
    }

    pub fn root(&self) -> Hash {
        self.layers.last().unwrap()[0]
    }

    pub fn height(&self) -> u32 {
        self.layers.len() as u32 - 1
    }

    pub fn open(&self, index: u64) -> Option<MerkleProof> {
        if index >= self.layers[0].len() as u64 {
            return None;
        }
        let mut i = index as usize;
        let mut siblings = Vec::with_capacity(self.layers.len() - 1);
        for layer in &self.layers[..self.layers.len() - 1] {
            siblings.push(layer[i ^ 1]);
            i >>= 1;
        }
        Some(MerkleProof { index, siblings })
    }

    pub fn open_all(&self) -> Vec<MerkleProof> {
        (0..self.layers[0].len() as u64)
            .map(|i| self.open(i).unwrap())
            .collect()
    }

    /// Replaces one leaf and rehashes its path to the root.
    pub fn update(&mut self, index: u64, value: &Scalar) {
        let mut i = index as usize;
        self.layers[0][i] = leaf_hash(value);
        for level in 1..self.layers.len() {
            let (l, r) = (
                self.layers[level - 1][i & !1],
                self.layers[level - 1][i | 1],
            );
            i >>= 1;
            self.layers[level][i] = node_hash(&l, &r);
        }
    }
}

pub fn root_from_proof(value: &Scalar, proof: &MerkleProof) -> Hash {
    let mut acc = leaf_hash(value);
    let mut i = proof.index;
    for s in &proof.siblings {
        acc = if i & 1 == 0 {
            node_hash(&acc, s)
        } else {
            node_hash(s, &acc)
        };
        i >>= 1;
    }
    acc
}

pub fn verify(root: &Hash, value: &Scalar, proof: &MerkleProof) -> bool {
    &root_from_proof(value, proof) == root
}

/// Bytes needed to open `u` distinct positions with independent paths.
pub fn batch_proof_bytes(n: u32, u: usize) -> usize {
    u * n as usize * 32
}
