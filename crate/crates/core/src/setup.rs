//! Trusted setup: public parameters, watermark keys, and inner-product
//! commitment keys.

use rand::RngCore;
use thiserror::Error;

use crate::codec::{FormatError, Reader, Writer};
use crate::engine::{G1Element, G2Element, Scalar};
use crate::mle::{basis_table, Trapdoor, MAX_HEIGHT};

pub const PARAMS_MAGIC: &[u8; 8] = b"BLTCPP01";
pub const WATERMARKED_MAGIC: &[u8; 8] = b"BLTCWM01";
pub const IPA_KEY_MAGIC: &[u8; 8] = b"BLTCIK01";

/// Default cap on the in-memory size of generated parameters.
pub const DEFAULT_MEMORY_BUDGET: u64 = 8 << 30;

// affine G1 point in memory, padded
const G1_IN_MEMORY: u64 = 104;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SetupError {
    #[error("height {n} needs ~{needed} bytes of parameters, budget is {budget}")]
    TooLarge { n: u32, needed: u64, budget: u64 },
    #[error("watermark key must be nonzero")]
    ZeroWatermarkKey,
    #[error("watermark key 1 is degenerate and rejected in strict mode")]
    DegenerateWatermarkKey,
    #[error("commitment key length {0} is not a power of two")]
    NotPowerOfTwo(usize),
}

/// Access to a per-level selection basis, watermarked or not.
pub trait OpeningBasis {
    fn height(&self) -> u32;
    /// The `2^j` elements `g1^{Y_{s,j}(A)}` (times θ when watermarked).
    fn level(&self, j: u32) -> &[G1Element];
    fn is_watermarked(&self) -> bool;
}

/// Public parameters for trees of height `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicParams {
    pub(crate) n: u32,
    /// `basis[j][s] = g1^{Y_{s,j}(A)}` for `j ∈ [0, n]`.
    pub(crate) basis: Vec<Vec<G1Element>>,
    /// `vk[j - 1] = g2^{a_j}`.
    pub(crate) vk: Vec<G2Element>,
}

impl PublicParams {
    pub fn estimated_bytes(n: u32) -> u64 {
        ((2u64 << n) - 1) * G1_IN_MEMORY + n as u64 * 200
    }

    /// Samples a trapdoor, publishes the basis at every level, and drops the
    /// trapdoor.
    pub fn generate<R: RngCore + ?Sized>(n: u32, rng: &mut R) -> Result<Self, SetupError> {
        Self::generate_with_budget(n, DEFAULT_MEMORY_BUDGET, rng)
    }

    pub fn generate_with_budget<R: RngCore + ?Sized>(
        n: u32,
        budget: u64,
        rng: &mut R,
    ) -> Result<Self, SetupError> {
        Self::generate_insecure(n, budget, rng).map(|(pp, _)| pp)
    }

    /// Like [`generate`](Self::generate) but hands the trapdoor back to the
    /// caller. Anyone holding it can open commitments to arbitrary values;
    /// only test oracles should call this.
    pub fn generate_insecure<R: RngCore + ?Sized>(
        n: u32,
        budget: u64,
        rng: &mut R,
    ) -> Result<(Self, Trapdoor), SetupError> {
        let needed = if n > MAX_HEIGHT {
            u64::MAX
        } else {
            Self::estimated_bytes(n)
        };
        if needed > budget {
            return Err(SetupError::TooLarge { n, needed, budget });
        }
        let trapdoor = Trapdoor::random(n, rng);
        let pp = Self::from_trapdoor(&trapdoor);
        Ok((pp, trapdoor))
    }

    pub fn from_trapdoor(trapdoor: &Trapdoor) -> Self {
        let n = trapdoor.height();
        let a = trapdoor.as_point();
        let g1 = G1Element::generator();
        let g2 = G2Element::generator();
        let mut exponents = Vec::with_capacity((2usize << n) - 1);
        for j in 0..=n {
            exponents.extend(basis_table(&a[..j as usize]));
        }
        let flat = G1Element::batch_mul(&g1, &exponents);
        let mut basis = Vec::with_capacity(n as usize + 1);
        let mut offset = 0;
        for j in 0..=n {
            let len = 1usize << j;
            basis.push(flat[offset..offset + len].to_vec());
            offset += len;
        }
        let vk = G2Element::batch_mul(&g2, a);
        Self { n, basis, vk }
    }

    pub fn height(&self) -> u32 {
        self.n
    }

    pub fn basis_element_count(&self) -> usize {
        self.basis.iter().map(Vec::len).sum()
    }

    /// `g2^{a_j}` for `j ∈ [1, n]`.
    pub fn vk(&self, j: u32) -> &G2Element {
        &self.vk[j as usize - 1]
    }

    pub fn verification_keys(&self) -> &[G2Element] {
        &self.vk
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode_params(PARAMS_MAGIC, self.n, &self.basis, &self.vk)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let (n, basis, vk) = decode_params(PARAMS_MAGIC, bytes)?;
        Ok(Self { n, basis, vk })
    }
}

impl OpeningBasis for PublicParams {
    fn height(&self) -> u32 {
        self.n
    }

    fn level(&self, j: u32) -> &[G1Element] {
        &self.basis[j as usize]
    }

    fn is_watermarked(&self) -> bool {
        false
    }
}

fn encode_params(magic: &[u8; 8], n: u32, basis: &[Vec<G1Element>], vk: &[G2Element]) -> Vec<u8> {
    let mut w = Writer::new(magic);
    w.u32(n);
    for level in basis {
        w.u32(level.len() as u32);
        for p in level {
            w.g1(p);
        }
    }
    for p in vk {
        w.g2(p);
    }
    w.finish()
}

type DecodedParams = (u32, Vec<Vec<G1Element>>, Vec<G2Element>);

fn decode_params(magic: &[u8; 8], bytes: &[u8]) -> Result<DecodedParams, FormatError> {
    let mut r = Reader::new(bytes, magic)?;
    let n = r.u32()?;
    if n > MAX_HEIGHT {
        return Err(FormatError::Invalid(format!("height {n} too large")));
    }
    let mut basis = Vec::with_capacity(n as usize + 1);
    for j in 0..=n {
        let len = r.u32()? as usize;
        if len != 1usize << j {
            return Err(FormatError::Invalid(format!(
                "level {j} has {len} elements, expected {}",
                1usize << j
            )));
        }
        r.expect_remaining(len, crate::engine::G1_BYTES)?;
        basis.push((0..len).map(|_| r.g1()).collect::<Result<Vec<_>, _>>()?);
    }
    let vk = (0..n).map(|_| r.g2()).collect::<Result<Vec<_>, _>>()?;
    r.finish()?;
    Ok((n, basis, vk))
}

/// A worker's watermark key `θ` and its public verification key `g2^θ`.
#[derive(Clone, PartialEq, Eq)]
pub struct WatermarkKeyPair {
    wmk: Scalar,
    pvk: G2Element,
}

impl WatermarkKeyPair {
    /// Samples `θ` uniformly from the nonzero scalars.
    pub fn generate<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let wmk = Scalar::random_nonzero(rng);
        Self {
            wmk,
            pvk: G2Element::generator() * wmk,
        }
    }

    /// Builds a pair from a given secret. `strict` additionally rejects
    /// `θ = 1`, which makes watermarked and plain proofs coincide.
    pub fn from_secret(wmk: Scalar, strict: bool) -> Result<Self, SetupError> {
        if wmk.is_zero() {
            return Err(SetupError::ZeroWatermarkKey);
        }
        if strict && wmk == Scalar::one() {
            return Err(SetupError::DegenerateWatermarkKey);
        }
        Ok(Self {
            wmk,
            pvk: G2Element::generator() * wmk,
        })
    }

    pub fn secret(&self) -> Scalar {
        self.wmk
    }

    pub fn public(&self) -> G2Element {
        self.pvk
    }
}

impl std::fmt::Debug for WatermarkKeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WatermarkKeyPair")
            .field("pvk", &self.pvk)
            .finish_non_exhaustive()
    }
}

/// Public parameters with every basis element raised to `θ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WatermarkedParams {
    pub(crate) n: u32,
    pub(crate) basis: Vec<Vec<G1Element>>,
    pub(crate) vk: Vec<G2Element>,
}

impl WatermarkedParams {
    pub fn new(pp: &PublicParams, wmk: &Scalar) -> Result<Self, SetupError> {
        if wmk.is_zero() {
            return Err(SetupError::ZeroWatermarkKey);
        }
        let basis = pp
            .basis
            .iter()
            .map(|level| G1Element::scale_each(level, &vec![*wmk; level.len()]))
            .collect();
        Ok(Self {
            n: pp.n,
            basis,
            vk: pp.vk.clone(),
        })
    }

    pub fn height(&self) -> u32 {
        self.n
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode_params(WATERMARKED_MAGIC, self.n, &self.basis, &self.vk)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let (n, basis, vk) = decode_params(WATERMARKED_MAGIC, bytes)?;
        Ok(Self { n, basis, vk })
    }
}

impl OpeningBasis for WatermarkedParams {
    fn height(&self) -> u32 {
        self.n
    }

    fn level(&self, j: u32) -> &[G1Element] {
        &self.basis[j as usize]
    }

    fn is_watermarked(&self) -> bool {
        true
    }
}

/// Commitment keys for the inner-product argument, from a setup independent
/// of the tree trapdoor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IpaCommitKey {
    /// `g2^{β^{b+1}}`: commits a vector of first-group elements.
    pub(crate) ck_g2: Vec<G2Element>,
    /// `g1^{α^{b+1}}`: commits a vector of second-group elements. The
    /// aggregation verifier recomputes its key vector itself, so this half is
    /// only carried for format compatibility.
    pub(crate) ck_g1: Vec<G1Element>,
}

impl IpaCommitKey {
    pub fn generate<R: RngCore + ?Sized>(m: usize, rng: &mut R) -> Result<Self, SetupError> {
        if !m.is_power_of_two() {
            return Err(SetupError::NotPowerOfTwo(m));
        }
        let beta = Scalar::random_nonzero(rng);
        let alpha = Scalar::random_nonzero(rng);
        let ck_g2 = G2Element::batch_mul(&G2Element::generator(), &powers(beta, m));
        let ck_g1 = G1Element::batch_mul(&G1Element::generator(), &powers(alpha, m));
        Ok(Self { ck_g2, ck_g1 })
    }

    pub fn capacity(&self) -> usize {
        self.ck_g2.len()
    }

    pub fn g2_keys(&self) -> &[G2Element] {
        &self.ck_g2
    }

    pub fn g1_keys(&self) -> &[G1Element] {
        &self.ck_g1
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(IPA_KEY_MAGIC);
        w.u32(self.ck_g2.len() as u32);
        for p in &self.ck_g2 {
            w.g2(p);
        }
        for p in &self.ck_g1 {
            w.g1(p);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut r = Reader::new(bytes, IPA_KEY_MAGIC)?;
        let m = r.u32()? as usize;
        if !m.is_power_of_two() {
            return Err(FormatError::Invalid(format!(
                "key length {m} not a power of two"
            )));
        }
        r.expect_remaining(m, crate::engine::G2_BYTES + crate::engine::G1_BYTES)?;
        let ck_g2 = (0..m).map(|_| r.g2()).collect::<Result<Vec<_>, _>>()?;
        let ck_g1 = (0..m).map(|_| r.g1()).collect::<Result<Vec<_>, _>>()?;
        r.finish()?;
        Ok(Self { ck_g2, ck_g1 })
    }
}

/// `(x, x^2, …, x^m)`.
fn powers(x: Scalar, m: usize) -> Vec<Scalar> {
    let mut out = Vec::with_capacity(m);
    let mut acc = x;
    for _ in 0..m {
        out.push(acc);
        acc = acc * x;
    }
    out
}
