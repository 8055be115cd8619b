//! Aggregation of many path proofs into one inner-product argument.
//!
//! The prover flattens the opened paths into `R ∈ G1^m` and pairs them with
//! the per-node verification keys `T ∈ G2^m` (`T = vk_j - i_j·g2`). After
//! committing to `R` as `B = ⟨R, ck⟩`, per-position weights
//! `v_i = H(B, T, i)` scale each block of keys, `T' = T_i · v_i`, so that
//! the claimed product `Z = ⟨R, T'⟩` must equal the verifier-computable
//! `Σ_i v_i · e(C - w_i·g1, pvk_i)`. A log-round halving argument then shows
//! that a single `R` underlies both `B` and `Z`.
//!
//! Each round sends cross terms `(Z_L, Z_R, B_L, B_R)` and folds
//! `R ← R_L + x·R_R`, `T' ← T'_L + x⁻¹·T'_R`, `ck ← ck_L + x⁻¹·ck_R`.
//! The verifier folds the keys itself: `ck` with one multi-exponentiation,
//! and `T'` in the field, since every key is a combination of the `n + 1`
//! points `(vk_1, …, vk_n, g2)`.

use std::collections::HashSet;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::{FormatError, Reader, Writer};
use crate::engine::{
    hash_to_scalar, multi_pair, multi_pair_prepared, G1Element, G2Element, GtElement, PreparedG2,
    Scalar, G2_BYTES, GT_BYTES,
};
use crate::mle::BitIndex;
use crate::setup::{IpaCommitKey, PublicParams};
use crate::tree::{Commitment, PathProof};

pub const AGGREGATE_MAGIC: &[u8; 8] = b"BLTCAG01";

const TAG_STATEMENT: &[u8] = b"BLTC/AGG/statement";
const TAG_V: &[u8] = b"BLTC/AGG/v";
const TAG_X: &[u8] = b"BLTC/AGG/x";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AggregationError {
    #[error("no positions to aggregate")]
    Empty,
    #[error("position {0} appears more than once")]
    DuplicatePosition(u64),
    #[error("instance has {positions} positions, {values} values, {pvks} keys")]
    ShapeMismatch {
        positions: usize,
        values: usize,
        pvks: usize,
    },
    #[error("position {index} out of range for height {n}")]
    PositionOutOfRange { index: u64, n: u32 },
    #[error("{needed} proof elements exceed commitment key capacity {capacity}")]
    Capacity { needed: usize, capacity: usize },
    #[error("expected {expected} proofs, got {actual}")]
    ProofCount { expected: usize, actual: usize },
    #[error("proof {index} opens position {found}, instance expects {expected}")]
    ProofPosition {
        index: usize,
        expected: u64,
        found: u64,
    },
    #[error("proof {index} has {actual} nodes, expected {expected}")]
    ProofLength {
        index: usize,
        expected: usize,
        actual: usize,
    },
    #[error("malformed transcript: {0}")]
    Malformed(String),
}

/// What the verifier checks: openings of `commitment` at `positions`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AggregationInstance {
    pub commitment: Commitment,
    pub positions: Vec<u64>,
    pub values: Vec<Scalar>,
    /// One watermark verification key per position.
    pub pvks: Vec<G2Element>,
}

impl AggregationInstance {
    pub fn new(
        commitment: Commitment,
        positions: Vec<u64>,
        values: Vec<Scalar>,
        pvks: Vec<G2Element>,
    ) -> Result<Self, AggregationError> {
        let inst = Self {
            commitment,
            positions,
            values,
            pvks,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// All positions checked under the same worker key.
    pub fn single_worker(
        commitment: Commitment,
        positions: Vec<u64>,
        values: Vec<Scalar>,
        pvk: G2Element,
    ) -> Result<Self, AggregationError> {
        let pvks = vec![pvk; positions.len()];
        Self::new(commitment, positions, values, pvks)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    fn validate(&self) -> Result<(), AggregationError> {
        if self.positions.is_empty() {
            return Err(AggregationError::Empty);
        }
        if self.values.len() != self.positions.len() || self.pvks.len() != self.positions.len() {
            return Err(AggregationError::ShapeMismatch {
                positions: self.positions.len(),
                values: self.values.len(),
                pvks: self.pvks.len(),
            });
        }
        let mut seen = HashSet::with_capacity(self.positions.len());
        for &p in &self.positions {
            if !seen.insert(p) {
                return Err(AggregationError::DuplicatePosition(p));
            }
        }
        Ok(())
    }

    fn validate_for(&self, n: u32) -> Result<(), AggregationError> {
        self.validate()?;
        for &index in &self.positions {
            BitIndex::new(n, index)
                .map_err(|_| AggregationError::PositionOutOfRange { index, n })?;
        }
        Ok(())
    }
}

/// One halving round: cross terms of the product and of the commitment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoundMessage {
    pub z_l: GtElement,
    pub z_r: GtElement,
    pub b_l: GtElement,
    pub b_r: GtElement,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AggregatedProof {
    /// `⟨R, ck⟩`.
    pub b: GtElement,
    /// The claimed weighted product `⟨R, T'⟩`.
    pub z: GtElement,
    pub rounds: Vec<RoundMessage>,
    /// The fully folded proof element.
    pub final_r: G1Element,
    pub m_padded: u32,
}

impl AggregatedProof {
    /// Group elements carried: `4·log₂(m) + 2` target-group plus one G1.
    pub fn element_count(&self) -> usize {
        4 * self.rounds.len() + 3
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(AGGREGATE_MAGIC);
        w.u32(self.m_padded).gt(&self.b).gt(&self.z);
        w.u8(self.rounds.len() as u8);
        for r in &self.rounds {
            w.gt(&r.z_l).gt(&r.z_r).gt(&r.b_l).gt(&r.b_r);
        }
        w.g1(&self.final_r);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut r = Reader::new(bytes, AGGREGATE_MAGIC)?;
        let m_padded = r.u32()?;
        let b = r.gt()?;
        let z = r.gt()?;
        let count = r.u8()? as usize;
        r.expect_remaining(count, 4 * GT_BYTES)?;
        let mut rounds = Vec::with_capacity(count);
        for _ in 0..count {
            rounds.push(RoundMessage {
                z_l: r.gt()?,
                z_r: r.gt()?,
                b_l: r.gt()?,
                b_r: r.gt()?,
            });
        }
        let final_r = r.g1()?;
        r.finish()?;
        Ok(Self {
            b,
            z,
            rounds,
            final_r,
            m_padded,
        })
    }
}

/// Padded vector length for `u` paths of `n` nodes.
pub fn padded_len(u: usize, n: u32) -> usize {
    (u * n as usize).max(1).next_power_of_two()
}

/// `T`: for each position, `vk_j - i_j·g2` for `j = n, …, 1`.
pub fn build_keys(
    pp: &PublicParams,
    positions: &[u64],
) -> Result<Vec<G2Element>, AggregationError> {
    let n = pp.height();
    let g2 = G2Element::generator();
    let mut keys = Vec::with_capacity(positions.len() * n as usize);
    for &index in positions {
        let pos = BitIndex::new(n, index)
            .map_err(|_| AggregationError::PositionOutOfRange { index, n })?;
        for j in (1..=n).rev() {
            let vk = *pp.vk(j);
            keys.push(if pos.bit(j) == 1 { vk - g2 } else { vk });
        }
    }
    Ok(keys)
}

/// Hash of the statement: height, padded length, the full key list `T` in
/// order, the commitment, and each position with its value and key.
fn statement_digest(pp: &PublicParams, inst: &AggregationInstance, m: usize) -> [u8; 32] {
    let n = pp.height();
    let g2 = G2Element::generator();
    // T only takes the 2n values vk_j and vk_j - g2; encode each once.
    let encoded: Vec<[[u8; G2_BYTES]; 2]> = pp
        .verification_keys()
        .iter()
        .map(|vk| [vk.to_bytes(), (*vk - g2).to_bytes()])
        .collect();
    let mut h = Sha256::new();
    h.update((TAG_STATEMENT.len() as u64).to_be_bytes());
    h.update(TAG_STATEMENT);
    h.update(n.to_be_bytes());
    h.update((m as u64).to_be_bytes());
    h.update(((inst.len() * n as usize) as u64).to_be_bytes());
    for &pos in &inst.positions {
        for j in (1..=n).rev() {
            h.update(encoded[j as usize - 1][((pos >> (j - 1)) & 1) as usize]);
        }
    }
    h.update(inst.commitment.0.to_bytes());
    h.update((inst.len() as u64).to_be_bytes());
    for ((p, v), pvk) in inst.positions.iter().zip(&inst.values).zip(&inst.pvks) {
        h.update(p.to_be_bytes());
        h.update(v.to_bytes());
        h.update(pvk.to_bytes());
    }
    h.finalize().into()
}

/// `v_i = H(B, T, i)` for blocks `i = 1..=u`.
fn block_weights(b: &GtElement, statement: &[u8; 32], u: usize) -> Vec<Scalar> {
    let b_bytes = b.to_bytes();
    (1..=u as u64)
        .map(|i| {
            let mut payload = Vec::with_capacity(GT_BYTES + 40);
            payload.extend_from_slice(&b_bytes);
            payload.extend_from_slice(statement);
            payload.extend_from_slice(&i.to_be_bytes());
            hash_to_scalar(TAG_V, &payload)
        })
        .collect()
}

/// Running Fiat–Shamir state for the halving rounds.
struct Transcript {
    state: [u8; 32],
}

impl Transcript {
    fn new(statement: &[u8; 32], b: &GtElement, z: &GtElement) -> Self {
        let mut h = Sha256::new();
        h.update(statement);
        h.update(b.to_bytes());
        h.update(z.to_bytes());
        Self {
            state: h.finalize().into(),
        }
    }

    /// Absorbs a round message and squeezes an invertible challenge.
    fn challenge(&mut self, msg: &RoundMessage) -> (Scalar, Scalar) {
        let mut h = Sha256::new();
        h.update(self.state);
        for e in [&msg.z_l, &msg.z_r, &msg.b_l, &msg.b_r] {
            h.update(e.to_bytes());
        }
        self.state = h.finalize().into();
        let mut counter = 0u8;
        loop {
            let mut payload = self.state.to_vec();
            payload.push(counter);
            let x = hash_to_scalar(TAG_X, &payload);
            if let Some(inv) = x.inverse() {
                return (x, inv);
            }
            counter += 1;
        }
    }
}

/// Coefficients of `T'` over the span `(vk_1, …, vk_n, g2)`, one row of
/// `n + 1` scalars per element.
struct KeyCoefficients {
    width: usize,
    rows: Vec<Scalar>,
}

impl KeyCoefficients {
    fn new(n: u32, positions: &[u64], weights: &[Scalar], m: usize) -> Self {
        let width = n as usize + 1;
        let mut rows = vec![Scalar::zero(); m * width];
        let mut e = 0;
        for (&pos, &v) in positions.iter().zip(weights) {
            for j in (1..=n).rev() {
                let row = &mut rows[e * width..(e + 1) * width];
                row[j as usize - 1] = v;
                if (pos >> (j - 1)) & 1 == 1 {
                    row[n as usize] = -v;
                }
                e += 1;
            }
        }
        Self { width, rows }
    }

    fn len(&self) -> usize {
        self.rows.len() / self.width
    }

    fn column(&self, range: std::ops::Range<usize>, k: usize) -> Vec<Scalar> {
        range.map(|e| self.rows[e * self.width + k]).collect()
    }

    /// `rows ← rows[..half] + x_inv · rows[half..]`.
    fn fold(&mut self, x_inv: &Scalar) {
        let half = self.rows.len() / 2;
        let (lo, hi) = self.rows.split_at_mut(half);
        for (l, h) in lo.iter_mut().zip(hi.iter()) {
            *l += *x_inv * *h;
        }
        self.rows.truncate(half);
    }
}

fn span_points(pp: &PublicParams) -> Vec<G2Element> {
    let mut points = pp.verification_keys().to_vec();
    points.push(G2Element::generator());
    points
}

/// `⟨R[range], T'[coef_range]⟩` as `n + 1` multi-exponentiations and pairings.
fn span_product(
    r: &[G1Element],
    coefs: &KeyCoefficients,
    coef_range: std::ops::Range<usize>,
    span: &[PreparedG2],
) -> GtElement {
    let lhs: Vec<G1Element> = (0..coefs.width)
        .map(|k| {
            G1Element::multi_exp(r, &coefs.column(coef_range.clone(), k)).expect("matching lengths")
        })
        .collect();
    let (g1s, g2s): (Vec<G1Element>, Vec<&PreparedG2>) = lhs
        .into_iter()
        .zip(span)
        .filter(|(p, _)| !p.is_identity())
        .unzip();
    multi_pair_prepared(&g1s, &g2s)
}

/// `Σ_i v_i · e(C - w_i·g1, pvk_i)`: the weighted left-hand sides of the
/// individual verification equations.
pub fn aggregated_target(inst: &AggregationInstance, weights: &[Scalar]) -> GtElement {
    let g1 = G1Element::generator();
    let lhs: Vec<G1Element> = inst
        .values
        .iter()
        .zip(weights)
        .map(|(w, v)| (inst.commitment.0 - g1 * *w) * *v)
        .collect();
    multi_pair(&lhs, &inst.pvks)
}

/// The block weights a verifier derives for `proof`, exposed for tests.
pub fn derive_block_weights(
    pp: &PublicParams,
    inst: &AggregationInstance,
    proof: &AggregatedProof,
) -> Vec<Scalar> {
    let statement = statement_digest(pp, inst, proof.m_padded as usize);
    block_weights(&proof.b, &statement, inst.len())
}

/// Aggregates the path proofs for `inst.positions` (given in the same order).
pub fn aggregate(
    pp: &PublicParams,
    ck: &IpaCommitKey,
    inst: &AggregationInstance,
    proofs: &[PathProof],
) -> Result<AggregatedProof, AggregationError> {
    let n = pp.height();
    inst.validate_for(n)?;
    if proofs.len() != inst.len() {
        return Err(AggregationError::ProofCount {
            expected: inst.len(),
            actual: proofs.len(),
        });
    }
    let m = padded_len(inst.len(), n);
    if m > ck.capacity() {
        return Err(AggregationError::Capacity {
            needed: m,
            capacity: ck.capacity(),
        });
    }

    let mut r = Vec::with_capacity(m);
    for (index, (proof, &pos)) in proofs.iter().zip(&inst.positions).enumerate() {
        if proof.position().index() != pos || proof.position().height() != n {
            return Err(AggregationError::ProofPosition {
                index,
                expected: pos,
                found: proof.position().index(),
            });
        }
        if proof.nodes().len() != n as usize {
            return Err(AggregationError::ProofLength {
                index,
                expected: n as usize,
                actual: proof.nodes().len(),
            });
        }
        r.extend_from_slice(proof.nodes());
    }
    r.resize(m, G1Element::identity());

    let mut keys = ck.g2_keys()[..m].to_vec();
    let b = multi_pair(&r, &keys);
    let statement = statement_digest(pp, inst, m);
    let weights = block_weights(&b, &statement, inst.len());
    let mut coefs = KeyCoefficients::new(n, &inst.positions, &weights, m);
    let span: Vec<PreparedG2> = span_points(pp).iter().map(PreparedG2::from).collect();
    let z = span_product(&r, &coefs, 0..m, &span);

    let mut transcript = Transcript::new(&statement, &b, &z);
    let mut rounds = Vec::with_capacity(m.trailing_zeros() as usize);
    while r.len() > 1 {
        let half = r.len() / 2;
        let (r_l, r_r) = r.split_at(half);
        let (k_l, k_r) = keys.split_at(half);
        let msg = RoundMessage {
            z_l: span_product(r_r, &coefs, 0..half, &span),
            z_r: span_product(r_l, &coefs, half..2 * half, &span),
            b_l: multi_pair(r_r, k_l),
            b_r: multi_pair(r_l, k_r),
        };
        let (x, x_inv) = transcript.challenge(&msg);
        r = G1Element::fold(r_l, r_r, &x);
        keys = G2Element::fold(k_l, k_r, &x_inv);
        coefs.fold(&x_inv);
        debug_assert_eq!(coefs.len(), r.len());
        rounds.push(msg);
    }

    Ok(AggregatedProof {
        b,
        z,
        rounds,
        final_r: r[0],
        m_padded: m as u32,
    })
}

/// Checks an aggregated proof against the instance. Structural problems
/// (wrong padded length or round count, bad instance) are errors; a failed
/// relation returns `Ok(false)`.
pub fn verify_aggregated(
    pp: &PublicParams,
    ck: &IpaCommitKey,
    inst: &AggregationInstance,
    proof: &AggregatedProof,
) -> Result<bool, AggregationError> {
    verify_aggregated_detailed(pp, ck, inst, proof).map(|r| r.is_ok())
}

/// Which relation rejected an aggregated proof.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AggregateFailure {
    /// The claimed product differs from the weighted verification equations.
    TargetMismatch,
    /// The folded commitment does not match the final element.
    CommitmentFold,
    /// The folded product does not match the final element.
    ProductFold,
}

impl std::fmt::Display for AggregateFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::TargetMismatch => "weighted verification equation (Z ≠ Σ v_i·e(C/g1^w_i, pvk_i))",
            Self::CommitmentFold => "final commitment relation e(r, ck*) = B*",
            Self::ProductFold => "final product relation e(r, T'*) = Z*",
        })
    }
}

pub fn verify_aggregated_detailed(
    pp: &PublicParams,
    ck: &IpaCommitKey,
    inst: &AggregationInstance,
    proof: &AggregatedProof,
) -> Result<Result<(), AggregateFailure>, AggregationError> {
    let n = pp.height();
    inst.validate_for(n)?;
    let m = padded_len(inst.len(), n);
    if proof.m_padded as usize != m {
        return Err(AggregationError::Malformed(format!(
            "padded length {} but instance needs {m}",
            proof.m_padded
        )));
    }
    let log_m = m.trailing_zeros() as usize;
    if proof.rounds.len() != log_m {
        return Err(AggregationError::Malformed(format!(
            "{} rounds, expected {log_m}",
            proof.rounds.len()
        )));
    }
    if m > ck.capacity() {
        return Err(AggregationError::Capacity {
            needed: m,
            capacity: ck.capacity(),
        });
    }

    let statement = statement_digest(pp, inst, m);
    let weights = block_weights(&proof.b, &statement, inst.len());
    if aggregated_target(inst, &weights) != proof.z {
        return Ok(Err(AggregateFailure::TargetMismatch));
    }

    let mut transcript = Transcript::new(&statement, &proof.b, &proof.z);
    let mut b = proof.b;
    let mut z = proof.z;
    let mut inverses = Vec::with_capacity(log_m);
    for msg in &proof.rounds {
        let (x, x_inv) = transcript.challenge(msg);
        b = b + msg.b_l * x + msg.b_r * x_inv;
        z = z + msg.z_l * x + msg.z_r * x_inv;
        inverses.push(x_inv);
    }

    // s_e: product of x_k⁻¹ over the rounds in which element e sat in the
    // right half; round 0 splits on the top bit of e.
    let mut s = vec![Scalar::one()];
    for x_inv in &inverses {
        s = s.iter().flat_map(|&v| [v, v * *x_inv]).collect();
    }

    let ck_final = G2Element::multi_exp(&ck.g2_keys()[..m], &s).expect("matching lengths");
    if crate::engine::pair(&proof.final_r, &ck_final) != b {
        return Ok(Err(AggregateFailure::CommitmentFold));
    }

    let mut t = vec![Scalar::zero(); n as usize + 1];
    let mut e = 0;
    for (&pos, &v) in inst.positions.iter().zip(&weights) {
        for j in (1..=n).rev() {
            let sv = s[e] * v;
            t[j as usize - 1] += sv;
            if (pos >> (j - 1)) & 1 == 1 {
                t[n as usize] -= sv;
            }
            e += 1;
        }
    }
    let t_final = G2Element::multi_exp(&span_points(pp), &t).expect("matching lengths");
    if crate::engine::pair(&proof.final_r, &t_final) != z {
        return Ok(Err(AggregateFailure::ProductFold));
    }
    Ok(Ok(()))
}
