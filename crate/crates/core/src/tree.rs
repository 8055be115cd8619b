//! Commitments, the binary linear proof tree, individual verification, and
//! in-place maintenance under weight updates.
//!
//! Node `(j, p)` for level `j ∈ [1, n]` and prefix `p ∈ [0, 2^{n-j})` commits
//! to the quotient obtained when the sub-polynomial selected by `p` is divided
//! by `(a_j - t)`: its evaluation table is `f_{p‖1‖s} - f_{p‖0‖s}` over the
//! low bits `s`, committed against the level-`(j-1)` basis. The proof for
//! position `i` is the root path `(x_{i,n}, …, x_{i,1})` with
//! `x_{i,j} = node(j, i >> j)`, and it satisfies
//!
//! ```text
//! e(C - w_i·g1, pvk) = Σ_j e(x_{i,j}, vk_j - i_j·g2)
//! ```
//!
//! (written additively in the target group).

use std::collections::BTreeMap;

use thiserror::Error;

use crate::codec::{FormatError, Reader, Writer};
use crate::engine::{multi_pair_prepared, G1Element, G2Element, PreparedG2, Scalar};
use crate::mle::{low_bits, BitIndex, MleError, WeightVector};
use crate::setup::{OpeningBasis, PublicParams};

pub const PROOF_MAGIC: &[u8; 8] = b"BLTCPF01";
pub const COMMITMENT_MAGIC: &[u8; 8] = b"BLTCCM01";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("height mismatch: parameters have n = {expected}, input has n = {actual}")]
    HeightMismatch { expected: u32, actual: u32 },
    #[error(transparent)]
    Index(#[from] MleError),
    #[error("proof has {actual} nodes, expected {expected}")]
    ProofLength { expected: usize, actual: usize },
    #[error("verification key is the identity")]
    InvalidPvk,
    #[error("tree watermark flag does not match the update parameters")]
    WatermarkMismatch,
}

fn check_height(expected: u32, actual: u32) -> Result<(), TreeError> {
    if expected != actual {
        return Err(TreeError::HeightMismatch { expected, actual });
    }
    Ok(())
}

/// `C = g1^{f(A)}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Commitment(pub G1Element);

impl Commitment {
    pub fn point(&self) -> &G1Element {
        &self.0
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(COMMITMENT_MAGIC);
        w.g1(&self.0);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut r = Reader::new(bytes, COMMITMENT_MAGIC)?;
        let c = r.g1()?;
        r.finish()?;
        Ok(Commitment(c))
    }
}

/// A change of `delta` to entry `position`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UpdateDelta {
    pub position: u64,
    pub delta: Scalar,
}

impl UpdateDelta {
    pub fn new(position: u64, delta: Scalar) -> Self {
        Self { position, delta }
    }
}

/// All `2^n - 1` quotient commitments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProofTree {
    n: u32,
    /// `levels[j - 1][p]` is node `(j, p)`.
    levels: Vec<Vec<G1Element>>,
    watermarked: bool,
}

/// Instrumentation for [`open_all_counted`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpenStats {
    /// Basis exponentiations, i.e. total multi-exponentiation terms.
    pub exponentiations: usize,
}

/// Instrumentation for [`update_tree`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UpdateStats {
    pub nodes_touched: usize,
}

impl ProofTree {
    pub fn height(&self) -> u32 {
        self.n
    }

    pub fn is_watermarked(&self) -> bool {
        self.watermarked
    }

    pub fn node_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    /// Node `(j, p)`, `j ∈ [1, n]`.
    pub fn node(&self, j: u32, prefix: u64) -> Option<&G1Element> {
        self.levels
            .get((j as usize).checked_sub(1)?)?
            .get(prefix as usize)
    }

    /// Nodes of level `j`.
    pub fn level(&self, j: u32) -> &[G1Element] {
        &self.levels[j as usize - 1]
    }

    /// Extracts the root path of position `i`.
    pub fn open(&self, i: u64) -> Result<PathProof, TreeError> {
        let position = BitIndex::new(self.n, i)?;
        let nodes = (1..=self.n)
            .rev()
            .map(|j| self.levels[j as usize - 1][position.prefix(j) as usize])
            .collect();
        Ok(PathProof {
            position,
            nodes,
            watermarked: self.watermarked,
        })
    }

    /// Raises every node to `theta`, producing the tree the watermarked
    /// parameters would have built.
    pub fn watermark(&self, theta: &Scalar) -> ProofTree {
        let levels = self
            .levels
            .iter()
            .map(|lvl| G1Element::scale_each(lvl, &vec![*theta; lvl.len()]))
            .collect();
        ProofTree {
            n: self.n,
            levels,
            watermarked: true,
        }
    }
}

/// The opening of one position: `(x_{i,n}, …, x_{i,1})`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathProof {
    pub(crate) position: BitIndex,
    pub(crate) nodes: Vec<G1Element>,
    pub(crate) watermarked: bool,
}

impl PathProof {
    pub fn new(position: BitIndex, nodes: Vec<G1Element>, watermarked: bool) -> Self {
        Self {
            position,
            nodes,
            watermarked,
        }
    }

    pub fn position(&self) -> BitIndex {
        self.position
    }

    /// Root-first: `nodes()[0] = x_{i,n}`.
    pub fn nodes(&self) -> &[G1Element] {
        &self.nodes
    }

    /// `x_{i,j}` for `j ∈ [1, n]`.
    pub fn node(&self, j: u32) -> &G1Element {
        &self.nodes[(self.position.height() - j) as usize]
    }

    pub fn is_watermarked(&self) -> bool {
        self.watermarked
    }

    /// Payload size: the compressed path points only.
    pub fn payload_bytes(&self) -> usize {
        self.nodes.len() * crate::engine::G1_BYTES
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(PROOF_MAGIC);
        w.u32(self.position.height())
            .u64(self.position.index())
            .u8(self.watermarked as u8);
        for p in &self.nodes {
            w.g1(p);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut r = Reader::new(bytes, PROOF_MAGIC)?;
        let n = r.u32()?;
        let index = r.u64()?;
        let position = BitIndex::new(n, index).map_err(|e| FormatError::Invalid(e.to_string()))?;
        let watermarked = match r.u8()? {
            0 => false,
            1 => true,
            other => return Err(FormatError::Invalid(format!("watermark flag {other}"))),
        };
        r.expect_remaining(n as usize, crate::engine::G1_BYTES)?;
        let nodes = (0..n).map(|_| r.g1()).collect::<Result<Vec<_>, _>>()?;
        r.finish()?;
        Ok(Self {
            position,
            nodes,
            watermarked,
        })
    }
}

/// `C = Σ_k w_k · g1^{Y_{k,n}(A)}`.
pub fn commit(pp: &PublicParams, w: &WeightVector) -> Result<Commitment, TreeError> {
    check_height(pp.height(), w.height())?;
    let c =
        G1Element::multi_exp(pp.level(pp.height()), w.values()).expect("level n has 2^n elements");
    Ok(Commitment(c))
}

/// Builds every node of the proof tree from `params` (plain or watermarked).
pub fn open_all<B: OpeningBasis>(params: &B, w: &WeightVector) -> Result<ProofTree, TreeError> {
    open_all_counted(params, w).map(|(t, _)| t)
}

/// [`open_all`] plus a count of the basis exponentiations it performed,
/// which is `n · 2^{n-1}`.
pub fn open_all_counted<B: OpeningBasis>(
    params: &B,
    w: &WeightVector,
) -> Result<(ProofTree, OpenStats), TreeError> {
    let n = params.height();
    check_height(n, w.height())?;
    let values = w.values();
    let mut stats = OpenStats::default();
    let mut levels = Vec::with_capacity(n as usize);
    for j in 1..=n {
        let half = 1usize << (j - 1);
        let block = half << 1;
        let mut quotients = Vec::with_capacity(values.len() / 2);
        for chunk in values.chunks(block) {
            let (lo, hi) = chunk.split_at(half);
            quotients.extend(lo.iter().zip(hi).map(|(&l, &h)| h - l));
        }
        stats.exponentiations += quotients.len();
        levels.push(G1Element::multi_exp_rows(params.level(j - 1), &quotients));
    }
    Ok((
        ProofTree {
            n,
            levels,
            watermarked: params.is_watermarked(),
        },
        stats,
    ))
}

/// Opens a single position directly, without materializing the whole tree.
pub fn open<B: OpeningBasis>(params: &B, w: &WeightVector, i: u64) -> Result<PathProof, TreeError> {
    let n = params.height();
    check_height(n, w.height())?;
    let position = BitIndex::new(n, i)?;
    let values = w.values();
    let nodes = (1..=n)
        .rev()
        .map(|j| {
            let half = 1usize << (j - 1);
            let base = (position.prefix(j) as usize) << j;
            let q: Vec<Scalar> = (0..half)
                .map(|s| values[base + half + s] - values[base + s])
                .collect();
            G1Element::multi_exp(params.level(j - 1), &q).expect("matching lengths")
        })
        .collect();
    Ok(PathProof {
        position,
        nodes,
        watermarked: params.is_watermarked(),
    })
}

/// Cached pairing inputs for checking many proofs against one `(pp, pvk)`.
pub struct Verifier {
    n: u32,
    neg_pvk: PreparedG2,
    /// `keys[j - 1] = [vk_j, vk_j - g2]`, indexed by bit `i_j`.
    keys: Vec<[PreparedG2; 2]>,
}

impl Verifier {
    pub fn new(pp: &PublicParams, pvk: &G2Element) -> Result<Self, TreeError> {
        if pvk.is_identity() {
            return Err(TreeError::InvalidPvk);
        }
        let g2 = G2Element::generator();
        let keys = pp
            .verification_keys()
            .iter()
            .map(|vk| [PreparedG2::from(vk), PreparedG2::from(&(*vk - g2))])
            .collect();
        Ok(Self {
            n: pp.height(),
            neg_pvk: PreparedG2::from(&-*pvk),
            keys,
        })
    }

    /// Checks one opening of `commitment` at the proof's position.
    pub fn verify(
        &self,
        commitment: &Commitment,
        value: &Scalar,
        proof: &PathProof,
    ) -> Result<bool, TreeError> {
        check_height(self.n, proof.position.height())?;
        if proof.nodes.len() != self.n as usize {
            return Err(TreeError::ProofLength {
                expected: self.n as usize,
                actual: proof.nodes.len(),
            });
        }
        let lhs = commitment.0 - G1Element::generator() * *value;
        let mut g1s = Vec::with_capacity(self.n as usize + 1);
        let mut g2s = Vec::with_capacity(self.n as usize + 1);
        g1s.push(lhs);
        g2s.push(&self.neg_pvk);
        for j in 1..=self.n {
            g1s.push(*proof.node(j));
            g2s.push(&self.keys[j as usize - 1][proof.position.bit(j) as usize]);
        }
        Ok(multi_pair_prepared(&g1s, &g2s).is_identity())
    }
}

/// Checks `e(C - w_i·g1, pvk) = Σ_j e(x_{i,j}, vk_j - i_j·g2)`. Plain proofs
/// are checked with `pvk = g2`.
pub fn verify_individual(
    pp: &PublicParams,
    commitment: &Commitment,
    i: BitIndex,
    value: &Scalar,
    proof: &PathProof,
    pvk: &G2Element,
) -> Result<bool, TreeError> {
    if proof.position != i {
        return Ok(false);
    }
    Verifier::new(pp, pvk)?.verify(commitment, value, proof)
}

/// `C' = C + ξ · g1^{Y_{i',n}(A)}`.
pub fn update_commitment(
    pp: &PublicParams,
    commitment: &Commitment,
    delta: &UpdateDelta,
) -> Result<Commitment, TreeError> {
    let n = pp.height();
    let pos = BitIndex::new(n, delta.position)?;
    let aux = pp.level(n)[pos.index() as usize];
    Ok(Commitment(commitment.0 + aux * delta.delta))
}

/// Shifts the `n` nodes on position `i'`'s root path. Node `(j, i' >> j)`
/// gains `±ξ` times the level-`(j-1)` basis element at the low bits of `i'`,
/// with the sign `+` when bit `i'_j` is set (the changed entry sits in `f_1`)
/// and `-` otherwise.
pub fn update_tree<B: OpeningBasis>(
    params: &B,
    tree: &mut ProofTree,
    delta: &UpdateDelta,
) -> Result<UpdateStats, TreeError> {
    let n = params.height();
    check_height(n, tree.n)?;
    if params.is_watermarked() != tree.watermarked {
        return Err(TreeError::WatermarkMismatch);
    }
    let pos = BitIndex::new(n, delta.position)?;
    let mut stats = UpdateStats::default();
    for j in 1..=n {
        let aux = params.level(j - 1)[pos.suffix(j - 1) as usize];
        let signed = if pos.bit(j) == 1 {
            delta.delta
        } else {
            -delta.delta
        };
        let node = &mut tree.levels[j as usize - 1][pos.prefix(j) as usize];
        *node += aux * signed;
        stats.nodes_touched += 1;
    }
    Ok(stats)
}

/// Brings a standalone path up to date: node `j` of the path for `i` moves
/// exactly when `i` and `i'` share the prefix above level `j`.
pub fn update_path<B: OpeningBasis>(
    params: &B,
    proof: &mut PathProof,
    delta: &UpdateDelta,
) -> Result<usize, TreeError> {
    let n = params.height();
    check_height(n, proof.position.height())?;
    if params.is_watermarked() != proof.watermarked {
        return Err(TreeError::WatermarkMismatch);
    }
    let changed = BitIndex::new(n, delta.position)?;
    let mut touched = 0;
    for j in 1..=n {
        if changed.prefix(j) != proof.position.prefix(j) {
            continue;
        }
        let aux = params.level(j - 1)[changed.suffix(j - 1) as usize];
        let signed = if changed.bit(j) == 1 {
            delta.delta
        } else {
            -delta.delta
        };
        proof.nodes[(n - j) as usize] += aux * signed;
        touched += 1;
    }
    Ok(touched)
}

/// Applies one delta to both the commitment and the tree. `pp` supplies the
/// commitment basis; `params` is whichever basis the tree was built from.
pub fn update<B: OpeningBasis>(
    pp: &PublicParams,
    params: &B,
    commitment: &Commitment,
    tree: &mut ProofTree,
    delta: &UpdateDelta,
) -> Result<(Commitment, UpdateStats), TreeError> {
    check_height(pp.height(), params.height())?;
    let c = update_commitment(pp, commitment, delta)?;
    let stats = update_tree(params, tree, delta)?;
    Ok((c, stats))
}

/// Applies a list of deltas. The result equals applying them one by one with
/// [`update`]; internally deltas are merged per position and each touched
/// node is shifted with a single multi-exponentiation.
pub fn batch_update<B: OpeningBasis>(
    pp: &PublicParams,
    params: &B,
    commitment: &Commitment,
    tree: &mut ProofTree,
    deltas: &[UpdateDelta],
) -> Result<Commitment, TreeError> {
    let n = pp.height();
    check_height(n, params.height())?;
    check_height(n, tree.n)?;
    if params.is_watermarked() != tree.watermarked {
        return Err(TreeError::WatermarkMismatch);
    }
    let mut merged: BTreeMap<u64, Scalar> = BTreeMap::new();
    for d in deltas {
        BitIndex::new(n, d.position)?;
        *merged.entry(d.position).or_insert_with(Scalar::zero) += d.delta;
    }
    merged.retain(|_, xi| !xi.is_zero());
    if merged.is_empty() {
        return Ok(*commitment);
    }

    let top = pp.level(n);
    let mut bases = vec![commitment.0];
    let mut exps = vec![Scalar::one()];
    for (&pos, &xi) in &merged {
        bases.push(top[pos as usize]);
        exps.push(xi);
    }
    let c = G1Element::multi_exp(&bases, &exps).expect("matching lengths");

    for j in 1..=n {
        let basis = params.level(j - 1);
        let mut prefixes = Vec::new();
        let mut jobs: Vec<(Vec<G1Element>, Vec<Scalar>)> = Vec::new();
        for (&pos, &xi) in &merged {
            let prefix = pos >> j;
            if prefixes.last() != Some(&prefix) {
                prefixes.push(prefix);
                jobs.push((
                    vec![tree.levels[j as usize - 1][prefix as usize]],
                    vec![Scalar::one()],
                ));
            }
            let job = jobs.last_mut().unwrap();
            job.0.push(basis[low_bits(pos, j - 1) as usize]);
            job.1.push(if (pos >> (j - 1)) & 1 == 1 { xi } else { -xi });
        }
        let shifted = G1Element::multi_exp_many(&jobs);
        let level = &mut tree.levels[j as usize - 1];
        for (prefix, node) in prefixes.into_iter().zip(shifted) {
            level[prefix as usize] = node;
        }
    }
    Ok(Commitment(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::pair;
    use crate::mle::mle_eval;
    use crate::setup::{WatermarkKeyPair, WatermarkedParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    fn s(v: i64) -> Scalar {
        Scalar::from_i64(v)
    }

    fn g2() -> G2Element {
        G2Element::generator()
    }

    #[test]
    fn commit_zero_and_height_zero() {
        let mut r = rng(1);
        let pp = PublicParams::generate(3, &mut r).unwrap();
        assert_eq!(
            commit(&pp, &WeightVector::zeros(3)).unwrap().0,
            G1Element::identity()
        );
        let pp0 = PublicParams::generate(0, &mut r).unwrap();
        let w = WeightVector::new(vec![s(11)]).unwrap();
        assert_eq!(commit(&pp0, &w).unwrap().0, G1Element::generator() * s(11));
        assert_eq!(
            commit(&pp, &w),
            Err(TreeError::HeightMismatch {
                expected: 3,
                actual: 0
            })
        );
    }

    #[test]
    fn commit_matches_trapdoor_evaluation() {
        let (pp, td) = PublicParams::generate_insecure(2, u64::MAX, &mut rng(2)).unwrap();
        let w = WeightVector::new(vec![s(3), s(1), s(4), s(1)]).unwrap();
        let f_at_a = mle_eval(&w, td.as_point()).unwrap();
        assert_eq!(commit(&pp, &w).unwrap().0, G1Element::generator() * f_at_a);
    }

    #[test]
    fn constant_vector_tree_is_identity() {
        let pp = PublicParams::generate(3, &mut rng(3)).unwrap();
        let w = WeightVector::new(vec![s(5); 8]).unwrap();
        let tree = open_all(&pp, &w).unwrap();
        assert_eq!(tree.node_count(), 7);
        for j in 1..=3 {
            assert!(tree.level(j).iter().all(G1Element::is_identity));
        }
    }

    #[test]
    fn height_one_tree() {
        let pp = PublicParams::generate(1, &mut rng(4)).unwrap();
        let w = WeightVector::new(vec![s(2), s(9)]).unwrap();
        let tree = open_all(&pp, &w).unwrap();
        assert_eq!(*tree.node(1, 0).unwrap(), pp.level(0)[0] * s(7));
        let p0 = tree.open(0).unwrap();
        let p1 = tree.open(1).unwrap();
        assert_eq!(p0.nodes(), p1.nodes());
        let c = commit(&pp, &w).unwrap();
        for (i, v) in [(0, 2), (1, 9)] {
            let pos = BitIndex::new(1, i).unwrap();
            let proof = tree.open(i).unwrap();
            assert!(verify_individual(&pp, &c, pos, &s(v), &proof, &g2()).unwrap());
        }
    }

    #[test]
    fn path_of_position_five() {
        let mut r = rng(5);
        let pp = PublicParams::generate(3, &mut r).unwrap();
        let w = WeightVector::random(3, &mut r);
        let tree = open_all(&pp, &w).unwrap();
        let proof = tree.open(5).unwrap();
        assert_eq!(
            proof.nodes(),
            &[
                *tree.node(3, 0).unwrap(),
                *tree.node(2, 1).unwrap(),
                *tree.node(1, 2).unwrap()
            ]
        );
        // siblings in the lowest bit share everything above level 1
        let a = tree.open(6).unwrap();
        let b = tree.open(7).unwrap();
        assert_eq!(a.nodes()[..2], b.nodes()[..2]);
        assert!(matches!(tree.open(8), Err(TreeError::Index(_))));
    }

    #[test]
    fn direct_open_matches_tree() {
        let mut r = rng(6);
        let pp = PublicParams::generate(4, &mut r).unwrap();
        let w = WeightVector::random(4, &mut r);
        let tree = open_all(&pp, &w).unwrap();
        for i in 0..16 {
            assert_eq!(open(&pp, &w, i).unwrap(), tree.open(i).unwrap());
        }
    }

    #[test]
    fn all_paths_verify_n4() {
        let mut r = rng(7);
        let pp = PublicParams::generate(4, &mut r).unwrap();
        let w = WeightVector::random(4, &mut r);
        let c = commit(&pp, &w).unwrap();
        let tree = open_all(&pp, &w).unwrap();
        let verifier = Verifier::new(&pp, &g2()).unwrap();
        for i in 0..16u64 {
            let proof = tree.open(i).unwrap();
            let v = w.get(i).unwrap();
            assert!(verifier.verify(&c, &v, &proof).unwrap());
            assert!(!verifier.verify(&c, &(v + Scalar::one()), &proof).unwrap());
        }
    }

    #[test]
    fn height_zero_verification() {
        let pp = PublicParams::generate(0, &mut rng(8)).unwrap();
        let w = WeightVector::new(vec![s(4)]).unwrap();
        let c = commit(&pp, &w).unwrap();
        let tree = open_all(&pp, &w).unwrap();
        assert_eq!(tree.node_count(), 0);
        let proof = tree.open(0).unwrap();
        assert!(proof.nodes().is_empty());
        let pos = BitIndex::new(0, 0).unwrap();
        assert!(verify_individual(&pp, &c, pos, &s(4), &proof, &g2()).unwrap());
        assert!(!verify_individual(&pp, &c, pos, &s(5), &proof, &g2()).unwrap());
    }

    #[test]
    fn watermarked_proofs_need_the_right_pvk() {
        let mut r = rng(9);
        let pp = PublicParams::generate(3, &mut r).unwrap();
        let keys = WatermarkKeyPair::generate(&mut r);
        let wm = WatermarkedParams::new(&pp, &keys.secret()).unwrap();
        let w = WeightVector::random(3, &mut r);
        let c = commit(&pp, &w).unwrap();
        let tree = open_all(&wm, &w).unwrap();
        assert!(tree.is_watermarked());
        let proof = tree.open(3).unwrap();
        let pos = BitIndex::new(3, 3).unwrap();
        let v = w.get(3).unwrap();
        assert!(verify_individual(&pp, &c, pos, &v, &proof, &keys.public()).unwrap());
        assert!(!verify_individual(&pp, &c, pos, &v, &proof, &g2()).unwrap());
        assert_eq!(
            verify_individual(&pp, &c, pos, &v, &proof, &G2Element::identity()),
            Err(TreeError::InvalidPvk)
        );
        // watermarking the plain tree gives the same nodes
        let plain = open_all(&pp, &w).unwrap();
        assert_eq!(plain.watermark(&keys.secret()), tree);
    }

    #[test]
    fn verify_checks_shapes() {
        let mut r = rng(10);
        let pp = PublicParams::generate(3, &mut r).unwrap();
        let w = WeightVector::random(3, &mut r);
        let c = commit(&pp, &w).unwrap();
        let tree = open_all(&pp, &w).unwrap();
        let mut proof = tree.open(1).unwrap();
        let pos = proof.position();
        let v = w.get(1).unwrap();
        // a proof presented for another position is simply invalid
        let other = BitIndex::new(3, 2).unwrap();
        assert!(!verify_individual(&pp, &c, other, &v, &proof, &g2()).unwrap());
        proof.nodes.pop();
        assert_eq!(
            verify_individual(&pp, &c, pos, &v, &proof, &g2()),
            Err(TreeError::ProofLength {
                expected: 3,
                actual: 2
            })
        );
    }

    #[test]
    fn verification_equation_by_hand() {
        // two-sided check written out with individual pairings
        let mut r = rng(11);
        let pp = PublicParams::generate(2, &mut r).unwrap();
        let w = WeightVector::random(2, &mut r);
        let c = commit(&pp, &w).unwrap();
        let tree = open_all(&pp, &w).unwrap();
        let i = 2u64;
        let proof = tree.open(i).unwrap();
        let lhs = pair(&(c.0 - G1Element::generator() * w.get(i).unwrap()), &g2());
        let rhs = pair(proof.node(2), &(*pp.vk(2) - g2())) + pair(proof.node(1), pp.vk(1));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn zero_delta_is_a_no_op() {
        let mut r = rng(12);
        let pp = PublicParams::generate(3, &mut r).unwrap();
        let w = WeightVector::random(3, &mut r);
        let c = commit(&pp, &w).unwrap();
        let mut tree = open_all(&pp, &w).unwrap();
        let before = tree.clone();
        let (c2, _) = update(
            &pp,
            &pp,
            &c,
            &mut tree,
            &UpdateDelta::new(5, Scalar::zero()),
        )
        .unwrap();
        assert_eq!(c2, c);
        assert_eq!(tree, before);
    }

    #[test]
    fn update_matches_rebuild_and_touches_n_nodes() {
        let mut r = rng(13);
        let n = 5;
        let pp = PublicParams::generate(n, &mut r).unwrap();
        for _ in 0..5 {
            let mut w = WeightVector::random(n, &mut r);
            let c = commit(&pp, &w).unwrap();
            let mut tree = open_all(&pp, &w).unwrap();
            let before = tree.clone();
            let d = UpdateDelta::new(r.gen_range(0..32), Scalar::random(&mut r));
            let (c2, stats) = update(&pp, &pp, &c, &mut tree, &d).unwrap();
            assert_eq!(stats.nodes_touched, n as usize);
            w.apply_delta(d.position, d.delta).unwrap();
            assert_eq!(c2, commit(&pp, &w).unwrap());
            assert_eq!(tree, open_all(&pp, &w).unwrap());
            let changed: usize = (1..=n)
                .map(|j| {
                    before
                        .level(j)
                        .iter()
                        .zip(tree.level(j))
                        .filter(|(a, b)| a != b)
                        .count()
                })
                .sum();
            assert_eq!(changed, n as usize);
        }
    }

    #[test]
    fn batch_update_equals_sequential() {
        let mut r = rng(14);
        let n = 4;
        let pp = PublicParams::generate(n, &mut r).unwrap();
        let w = WeightVector::random(n, &mut r);
        let c = commit(&pp, &w).unwrap();
        let tree = open_all(&pp, &w).unwrap();
        let deltas: Vec<_> = (0..20)
            .map(|_| UpdateDelta::new(r.gen_range(0..16), Scalar::random(&mut r)))
            .collect();

        let mut seq_tree = tree.clone();
        let mut seq_c = c;
        for d in &deltas {
            seq_c = update(&pp, &pp, &seq_c, &mut seq_tree, d).unwrap().0;
        }
        let mut batch_tree = tree.clone();
        let batch_c = batch_update(&pp, &pp, &c, &mut batch_tree, &deltas).unwrap();
        assert_eq!(batch_c, seq_c);
        assert_eq!(batch_tree, seq_tree);
    }

    #[test]
    fn batch_update_inverse_pair_restores_state() {
        let mut r = rng(15);
        let pp = PublicParams::generate(3, &mut r).unwrap();
        let w = WeightVector::random(3, &mut r);
        let c = commit(&pp, &w).unwrap();
        let mut tree = open_all(&pp, &w).unwrap();
        let before = tree.clone();
        let xi = Scalar::random(&mut r);
        let c2 = batch_update(
            &pp,
            &pp,
            &c,
            &mut tree,
            &[UpdateDelta::new(6, xi), UpdateDelta::new(6, -xi)],
        )
        .unwrap();
        assert_eq!(c2, c);
        assert_eq!(tree, before);
    }

    #[test]
    fn update_rejects_mismatched_watermark() {
        let mut r = rng(16);
        let pp = PublicParams::generate(2, &mut r).unwrap();
        let wm = WatermarkedParams::new(&pp, &Scalar::from(3)).unwrap();
        let w = WeightVector::random(2, &mut r);
        let mut tree = open_all(&pp, &w).unwrap();
        let d = UpdateDelta::new(1, Scalar::one());
        assert_eq!(
            update_tree(&wm, &mut tree, &d),
            Err(TreeError::WatermarkMismatch)
        );
        assert!(matches!(
            update_tree(&pp, &mut tree, &UpdateDelta::new(4, Scalar::one())),
            Err(TreeError::Index(_))
        ));
    }

    #[test]
    fn proof_and_commitment_files() {
        let mut r = rng(17);
        let pp = PublicParams::generate(3, &mut r).unwrap();
        let w = WeightVector::random(3, &mut r);
        let c = commit(&pp, &w).unwrap();
        let proof = open_all(&pp, &w).unwrap().open(6).unwrap();

        let bytes = proof.to_bytes();
        assert_eq!(bytes.len(), 8 + 4 + 8 + 1 + 3 * 48);
        assert_eq!(&bytes[..8], b"BLTCPF01");
        assert_eq!(&bytes[12..20], &6u64.to_le_bytes());
        assert_eq!(proof.payload_bytes(), 3 * 48);
        assert_eq!(PathProof::from_bytes(&bytes).unwrap(), proof);
        assert!(matches!(
            PathProof::from_bytes(&bytes[..bytes.len() - 10]),
            Err(FormatError::Truncated(_))
        ));

        let cb = c.to_bytes();
        assert_eq!(cb.len(), 56);
        assert_eq!(Commitment::from_bytes(&cb).unwrap(), c);
    }
}
