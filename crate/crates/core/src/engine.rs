//! Pairing group and scalar field abstraction.
//!
//! Everything above this module does arithmetic through the newtypes defined
//! here. The backing curve is BLS12-381; swapping it means replacing this
//! module only. Group operations are written additively (`a + b`, `a * x`),
//! including the target group.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use ark_bls12_381::{g1, g2, Bls12_381, Fr, G1Affine, G1Projective, G2Affine, G2Projective};
use ark_ec::hashing::curve_maps::wb::WBMap;
use ark_ec::hashing::map_to_curve_hasher::MapToCurveBasedHasher;
use ark_ec::hashing::HashToCurve;
use ark_ec::pairing::{Pairing, PairingOutput};
use ark_ec::scalar_mul::glv::GLVConfig;
use ark_ec::scalar_mul::BatchMulPreprocessing;
use ark_ec::{AffineRepr, CurveGroup, PrimeGroup, VariableBaseMSM};
use ark_ff::field_hashers::DefaultFieldHasher;
use ark_ff::{BigInteger, Field, One, PrimeField, UniformRand, Zero};
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize};
use rand::RngCore;
use sha2::{Digest, Sha256, Sha512};
use thiserror::Error;

pub const SCALAR_BYTES: usize = 32;
pub const G1_BYTES: usize = 48;
pub const G2_BYTES: usize = 96;
pub const GT_BYTES: usize = 576;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("expected {expected} bytes, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("scalar encoding is not canonical (>= group order)")]
    NonCanonicalScalar,
    #[error("invalid {0} encoding or point outside the prime-order subgroup")]
    InvalidPoint(&'static str),
    #[error("multi-exponentiation length mismatch: {bases} bases, {exponents} exponents")]
    LengthMismatch { bases: usize, exponents: usize },
}

/// Identifies the parameter set backing the engine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EngineConfig {
    pub curve_id: &'static str,
    /// Scalar field modulus, big-endian hex.
    pub modulus_hex: String,
    pub g1: G1Element,
    pub g2: G2Element,
}

impl Default for EngineConfig {
    fn default() -> Self {
        let modulus = Fr::MODULUS.to_bytes_be();
        Self {
            curve_id: "BLS12-381",
            modulus_hex: hex::encode(modulus),
            g1: G1Element::generator(),
            g2: G2Element::generator(),
        }
    }
}

// ---------------------------------------------------------------------------
// Scalars

/// Element of the scalar field Z_p.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scalar(pub(crate) Fr);

impl Scalar {
    pub fn zero() -> Self {
        Scalar(Fr::zero())
    }

    pub fn one() -> Self {
        Scalar(Fr::one())
    }

    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        Scalar(Fr::rand(&mut RngAdapter(rng)))
    }

    /// Uniform nonzero element.
    pub fn random_nonzero<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        loop {
            let s = Self::random(rng);
            if !s.is_zero() {
                return s;
            }
        }
    }

    pub fn from_i64(v: i64) -> Self {
        if v < 0 {
            -Scalar::from(v.unsigned_abs())
        } else {
            Scalar::from(v as u64)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn inverse(&self) -> Option<Self> {
        self.0.inverse().map(Scalar)
    }

    /// 32-byte big-endian canonical encoding.
    pub fn to_bytes(&self) -> [u8; SCALAR_BYTES] {
        let be = self.0.into_bigint().to_bytes_be();
        let mut out = [0u8; SCALAR_BYTES];
        out.copy_from_slice(&be);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EngineError> {
        if bytes.len() != SCALAR_BYTES {
            return Err(EngineError::Length {
                expected: SCALAR_BYTES,
                actual: bytes.len(),
            });
        }
        let s = Fr::from_be_bytes_mod_order(bytes);
        // reject encodings that only decode after reduction
        if s.into_bigint().to_bytes_be() != bytes {
            return Err(EngineError::NonCanonicalScalar);
        }
        Ok(Scalar(s))
    }

    /// Reduces an arbitrary big-endian byte string modulo p.
    pub fn from_be_bytes_mod_order(bytes: &[u8]) -> Self {
        Scalar(Fr::from_be_bytes_mod_order(bytes))
    }

    pub fn pow(&self, exp: u64) -> Self {
        Scalar(self.0.pow([exp]))
    }
}

impl From<u64> for Scalar {
    fn from(v: u64) -> Self {
        Scalar(Fr::from(v))
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({})", self.0)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Add for Scalar {
    type Output = Scalar;
    fn add(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 + rhs.0)
    }
}

impl AddAssign for Scalar {
    fn add_assign(&mut self, rhs: Scalar) {
        self.0 += rhs.0;
    }
}

impl Sub for Scalar {
    type Output = Scalar;
    fn sub(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 - rhs.0)
    }
}

impl SubAssign for Scalar {
    fn sub_assign(&mut self, rhs: Scalar) {
        self.0 -= rhs.0;
    }
}

impl Mul for Scalar {
    type Output = Scalar;
    fn mul(self, rhs: Scalar) -> Scalar {
        Scalar(self.0 * rhs.0)
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-self.0)
    }
}

impl std::iter::Sum for Scalar {
    fn sum<I: Iterator<Item = Scalar>>(iter: I) -> Scalar {
        iter.fold(Scalar::zero(), |a, b| a + b)
    }
}

impl std::iter::Product for Scalar {
    fn product<I: Iterator<Item = Scalar>>(iter: I) -> Scalar {
        iter.fold(Scalar::one(), |a, b| a * b)
    }
}

/// Inverts every element of `values` with a single field inversion.
/// Zero entries are left as zero.
pub fn batch_inverse(values: &mut [Scalar]) {
    let mut raw: Vec<Fr> = values.iter().map(|s| s.0).collect();
    ark_ff::batch_inversion(&mut raw);
    for (dst, src) in values.iter_mut().zip(raw) {
        dst.0 = src;
    }
}

// ---------------------------------------------------------------------------
// Groups

macro_rules! curve_element {
    ($name:ident, $affine:ty, $proj:ty, $bytes:expr, $label:expr, $mul:path) => {
        #[derive(Clone, Copy, PartialEq, Eq, Hash)]
        pub struct $name(pub(crate) $affine);

        impl $name {
            pub fn generator() -> Self {
                $name(<$affine>::generator())
            }

            pub fn identity() -> Self {
                $name(<$affine>::zero())
            }

            pub fn is_identity(&self) -> bool {
                self.0.is_zero()
            }

            pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
                $name(<$proj>::rand(&mut RngAdapter(rng)).into_affine())
            }

            /// Compressed encoding.
            pub fn to_bytes(&self) -> [u8; $bytes] {
                let mut out = [0u8; $bytes];
                self.0
                    .serialize_compressed(&mut out[..])
                    .expect("fixed-size buffer");
                out
            }

            /// Decodes a compressed point, checking curve and subgroup membership.
            pub fn from_bytes(bytes: &[u8]) -> Result<Self, EngineError> {
                if bytes.len() != $bytes {
                    return Err(EngineError::Length {
                        expected: $bytes,
                        actual: bytes.len(),
                    });
                }
                <$affine>::deserialize_compressed(bytes)
                    .map($name)
                    .map_err(|_| EngineError::InvalidPoint($label))
            }

            pub fn is_in_subgroup(&self) -> bool {
                self.0.is_on_curve() && self.0.is_in_correct_subgroup_assuming_on_curve()
            }

            pub(crate) fn from_projective(p: $proj) -> Self {
                $name(p.into_affine())
            }

            pub(crate) fn normalize_all(points: &[$proj]) -> Vec<Self> {
                <$proj>::normalize_batch(points)
                    .into_iter()
                    .map($name)
                    .collect()
            }

            /// `Σ bases_i · exponents_i`.
            pub fn multi_exp(bases: &[Self], exponents: &[Scalar]) -> Result<Self, EngineError> {
                if bases.len() != exponents.len() {
                    return Err(EngineError::LengthMismatch {
                        bases: bases.len(),
                        exponents: exponents.len(),
                    });
                }
                let (b, e): (Vec<$affine>, Vec<Fr>) = bases
                    .iter()
                    .zip(exponents)
                    .filter(|(p, s)| !s.0.is_zero() && !p.0.is_zero())
                    .map(|(p, s)| (p.0, s.0))
                    .unzip();
                // bucket setup dominates for a handful of terms
                let sum = if b.len() <= SMALL_MSM {
                    b.iter().zip(&e).map(|(p, s)| $mul(p, s)).sum::<$proj>()
                } else {
                    <$proj>::msm_unchecked(&b, &e)
                };
                Ok(Self::from_projective(sum))
            }

            /// Runs one multi-exponentiation per row of `exponents` (rows are
            /// consecutive chunks of `bases.len()` scalars) against the same bases.
            pub fn multi_exp_rows(bases: &[Self], exponents: &[Scalar]) -> Vec<Self> {
                let width = bases.len();
                if width == 0 {
                    return Vec::new();
                }
                debug_assert_eq!(exponents.len() % width, 0);
                let b: Vec<$affine> = bases.iter().map(|p| p.0).collect();
                let proj: Vec<$proj> = exponents
                    .chunks(width)
                    .map(|row| {
                        if width == 1 {
                            $mul(&b[0], &row[0].0)
                        } else {
                            let e: Vec<Fr> = row.iter().map(|s| s.0).collect();
                            <$proj>::msm_unchecked(&b, &e)
                        }
                    })
                    .collect();
                Self::normalize_all(&proj)
            }

            /// Independent multi-exponentiations with one shared normalization.
            pub fn multi_exp_many(jobs: &[(Vec<Self>, Vec<Scalar>)]) -> Vec<Self> {
                let proj: Vec<$proj> = jobs
                    .iter()
                    .map(|(bases, exps)| {
                        debug_assert_eq!(bases.len(), exps.len());
                        let b: Vec<$affine> = bases.iter().map(|p| p.0).collect();
                        let e: Vec<Fr> = exps.iter().map(|s| s.0).collect();
                        <$proj>::msm_unchecked(&b, &e)
                    })
                    .collect();
                Self::normalize_all(&proj)
            }

            /// Fixed-base exponentiation of one base by many scalars.
            pub fn batch_mul(base: &Self, exponents: &[Scalar]) -> Vec<Self> {
                if exponents.is_empty() {
                    return Vec::new();
                }
                let table = BatchMulPreprocessing::new(<$proj>::from(base.0), exponents.len());
                let e: Vec<Fr> = exponents.iter().map(|s| s.0).collect();
                table.batch_mul(&e).into_iter().map($name).collect()
            }

            /// Elementwise `left_i + right_i · x`.
            pub fn fold(left: &[Self], right: &[Self], x: &Scalar) -> Vec<Self> {
                debug_assert_eq!(left.len(), right.len());
                let proj: Vec<$proj> = left
                    .iter()
                    .zip(right)
                    .map(|(l, r)| $mul(&r.0, &x.0) + l.0)
                    .collect();
                Self::normalize_all(&proj)
            }

            /// Elementwise `points_i · scalars_i`.
            pub fn scale_each(points: &[Self], scalars: &[Scalar]) -> Vec<Self> {
                debug_assert_eq!(points.len(), scalars.len());
                let proj: Vec<$proj> = points
                    .iter()
                    .zip(scalars)
                    .map(|(p, s)| $mul(&p.0, &s.0))
                    .collect();
                Self::normalize_all(&proj)
            }
        }

        impl Default for $name {
            fn default() -> Self {
                Self::identity()
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), hex::encode(self.to_bytes()))
            }
        }

        impl Add for $name {
            type Output = $name;
            fn add(self, rhs: $name) -> $name {
                $name((self.0 + rhs.0).into_affine())
            }
        }

        impl AddAssign for $name {
            fn add_assign(&mut self, rhs: $name) {
                *self = *self + rhs;
            }
        }

        impl Sub for $name {
            type Output = $name;
            fn sub(self, rhs: $name) -> $name {
                $name((self.0.into_group() - rhs.0).into_affine())
            }
        }

        impl SubAssign for $name {
            fn sub_assign(&mut self, rhs: $name) {
                *self = *self - rhs;
            }
        }

        impl Neg for $name {
            type Output = $name;
            fn neg(self) -> $name {
                $name(-self.0)
            }
        }

        impl Mul<Scalar> for $name {
            type Output = $name;
            fn mul(self, rhs: Scalar) -> $name {
                $name($mul(&self.0, &rhs.0).into_affine())
            }
        }

        impl Mul<&Scalar> for &$name {
            type Output = $name;
            fn mul(self, rhs: &Scalar) -> $name {
                $name($mul(&self.0, &rhs.0).into_affine())
            }
        }
    };
}

const SMALL_MSM: usize = 4;

fn g1_mul(p: &G1Affine, s: &Fr) -> G1Projective {
    *p * s
}

// The default G2 multiplication ignores the endomorphism; GLV halves the loop.
fn g2_mul(p: &G2Affine, s: &Fr) -> G2Projective {
    <g2::Config as GLVConfig>::glv_mul_projective(p.into_group(), *s)
}

curve_element!(G1Element, G1Affine, G1Projective, G1_BYTES, "G1", g1_mul);
curve_element!(G2Element, G2Affine, G2Projective, G2_BYTES, "G2", g2_mul);

/// Element of the target group, written additively.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct GtElement(pub(crate) PairingOutput<Bls12_381>);

impl GtElement {
    pub fn identity() -> Self {
        GtElement(PairingOutput::zero())
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_zero()
    }

    pub fn generator() -> Self {
        GtElement(PairingOutput::generator())
    }

    pub fn to_bytes(&self) -> [u8; GT_BYTES] {
        let mut out = [0u8; GT_BYTES];
        self.0
            .serialize_compressed(&mut out[..])
            .expect("fixed-size buffer");
        out
    }

    /// Decodes and checks membership in the order-p subgroup.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EngineError> {
        if bytes.len() != GT_BYTES {
            return Err(EngineError::Length {
                expected: GT_BYTES,
                actual: bytes.len(),
            });
        }
        PairingOutput::<Bls12_381>::deserialize_compressed(bytes)
            .map(GtElement)
            .map_err(|_| EngineError::InvalidPoint("GT"))
    }
}

impl Default for GtElement {
    fn default() -> Self {
        Self::identity()
    }
}

impl fmt::Debug for GtElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bytes = self.to_bytes();
        write!(f, "GtElement({}..)", hex::encode(&bytes[..16]))
    }
}

impl Add for GtElement {
    type Output = GtElement;
    fn add(self, rhs: GtElement) -> GtElement {
        GtElement(self.0 + rhs.0)
    }
}

impl AddAssign for GtElement {
    fn add_assign(&mut self, rhs: GtElement) {
        self.0 += rhs.0;
    }
}

impl Sub for GtElement {
    type Output = GtElement;
    fn sub(self, rhs: GtElement) -> GtElement {
        GtElement(self.0 - rhs.0)
    }
}

impl Neg for GtElement {
    type Output = GtElement;
    fn neg(self) -> GtElement {
        GtElement(-self.0)
    }
}

impl Mul<Scalar> for GtElement {
    type Output = GtElement;
    fn mul(self, rhs: Scalar) -> GtElement {
        GtElement(self.0 * rhs.0)
    }
}

// ---------------------------------------------------------------------------
// Pairings

pub fn pair(a: &G1Element, b: &G2Element) -> GtElement {
    GtElement(Bls12_381::pairing(a.0, b.0))
}

/// `Σ pair(a_i, b_i)` with a single final exponentiation.
pub fn multi_pair(a: &[G1Element], b: &[G2Element]) -> GtElement {
    debug_assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return GtElement::identity();
    }
    GtElement(Bls12_381::multi_pairing(
        a.iter().map(|p| p.0),
        b.iter().map(|q| q.0),
    ))
}

/// A second-group element with its Miller-loop line coefficients cached.
#[derive(Clone, Debug)]
pub struct PreparedG2(<Bls12_381 as Pairing>::G2Prepared);

impl From<&G2Element> for PreparedG2 {
    fn from(p: &G2Element) -> Self {
        PreparedG2(p.0.into())
    }
}

/// Same as [`multi_pair`] with pre-processed second arguments.
pub fn multi_pair_prepared(a: &[G1Element], b: &[&PreparedG2]) -> GtElement {
    debug_assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return GtElement::identity();
    }
    let ml = Bls12_381::multi_miller_loop(a.iter().map(|p| p.0), b.iter().map(|q| q.0.clone()));
    GtElement(Bls12_381::final_exponentiation(ml).expect("nonzero miller loop output"))
}

// ---------------------------------------------------------------------------
// Hashing

fn tagged_digest(tag: &[u8], payload: &[u8]) -> [u8; 64] {
    assert!(!tag.is_empty(), "domain tag must be non-empty");
    let mut h = Sha512::new();
    h.update((tag.len() as u64).to_be_bytes());
    h.update(tag);
    h.update(payload);
    h.finalize().into()
}

/// Random-oracle hash into Z_p: 512-bit digest under a length-prefixed domain
/// tag, reduced mod p.
pub fn hash_to_scalar(tag: &[u8], payload: &[u8]) -> Scalar {
    Scalar::from_be_bytes_mod_order(&tagged_digest(tag, payload))
}

/// Hash-to-curve into the prime-order subgroup of G1 (SSWU via the
/// Wahby-Boneh isogeny map), with `tag` as the domain separation tag.
pub fn hash_to_g1(tag: &[u8], payload: &[u8]) -> G1Element {
    assert!(!tag.is_empty(), "domain tag must be non-empty");
    let hasher = MapToCurveBasedHasher::<
        G1Projective,
        DefaultFieldHasher<Sha256, 128>,
        WBMap<g1::Config>,
    >::new(tag)
    .expect("domain tag under 256 bytes");
    G1Element(hasher.hash(payload).expect("hash-to-curve is total"))
}

/// Plain SHA-256, used by the ledger and certificates.
pub fn sha256(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

// ark's samplers want `ark_std::rand::Rng`, which is rand 0.8's trait; this
// adapter lets callers pass unsized `dyn RngCore` handles as well.
struct RngAdapter<'a, R: RngCore + ?Sized>(&'a mut R);

impl<R: RngCore + ?Sized> RngCore for RngAdapter<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}
