//! Multilinear-extension arithmetic over the selection-function basis.
//!
//! A vector `W` of length `2^n` is the evaluation table of a multilinear
//! polynomial `f` on the Boolean hypercube. Index bits are numbered from 1:
//! bit `i_1` is the least significant bit of the index, bit `i_n` the most
//! significant. Points and trapdoors are stored least-significant first, so
//! `point[j - 1]` is the coordinate paired with bit `j`.

use thiserror::Error;

use crate::engine::Scalar;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MleError {
    #[error("index {index} out of range for height {n}")]
    IndexOutOfRange { index: u64, n: u32 },
    #[error("vector length {len} is not 2^{n}")]
    BadLength { len: usize, n: u32 },
    #[error("vector length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("point has {actual} coordinates, expected {expected}")]
    PointLength { expected: usize, actual: usize },
    #[error("cannot split a constant (zero-variable) polynomial")]
    SplitConstant,
}

/// Largest supported tree height; positions are stored in a `u64`.
pub const MAX_HEIGHT: u32 = 40;

/// A position `i ∈ [0, 2^n)` together with the tree height it indexes into.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BitIndex {
    n: u32,
    index: u64,
}

impl BitIndex {
    pub fn new(n: u32, index: u64) -> Result<Self, MleError> {
        if n > MAX_HEIGHT || index >> n != 0 {
            return Err(MleError::IndexOutOfRange { index, n });
        }
        Ok(Self { n, index })
    }

    pub fn height(&self) -> u32 {
        self.n
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    /// Bit `i_j` for `j ∈ [1, n]`.
    pub fn bit(&self, j: u32) -> u8 {
        debug_assert!(j >= 1 && j <= self.n);
        ((self.index >> (j - 1)) & 1) as u8
    }

    /// `(i_n, …, i_{j+1})` read as an integer.
    pub fn prefix(&self, j: u32) -> u64 {
        if j >= 64 {
            0
        } else {
            self.index >> j
        }
    }

    /// `(i_j, …, i_1)` read as an integer.
    pub fn suffix(&self, j: u32) -> u64 {
        low_bits(self.index, j)
    }

    /// Bits from most to least significant.
    pub fn bits_msb_first(&self) -> Vec<u8> {
        (1..=self.n).rev().map(|j| self.bit(j)).collect()
    }

    /// The hypercube vertex as field elements, least significant first.
    pub fn to_point(&self) -> Vec<Scalar> {
        (1..=self.n)
            .map(|j| Scalar::from(self.bit(j) as u64))
            .collect()
    }
}

pub(crate) fn low_bits(x: u64, j: u32) -> u64 {
    if j >= 64 {
        x
    } else {
        x & ((1u64 << j) - 1)
    }
}

/// Committed weight vector, `2^n` scalars.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightVector {
    n: u32,
    values: Vec<Scalar>,
}

impl WeightVector {
    pub fn new(values: Vec<Scalar>) -> Result<Self, MleError> {
        let len = values.len();
        if !len.is_power_of_two() {
            return Err(MleError::NotPowerOfTwo(len));
        }
        Ok(Self {
            n: len.trailing_zeros(),
            values,
        })
    }

    pub fn with_height(n: u32, values: Vec<Scalar>) -> Result<Self, MleError> {
        if n > MAX_HEIGHT || values.len() as u128 != 1u128 << n {
            return Err(MleError::BadLength {
                len: values.len(),
                n,
            });
        }
        Ok(Self { n, values })
    }

    pub fn zeros(n: u32) -> Self {
        Self {
            n,
            values: vec![Scalar::zero(); 1 << n],
        }
    }

    pub fn random<R: rand::RngCore + ?Sized>(n: u32, rng: &mut R) -> Self {
        Self {
            n,
            values: (0..1usize << n).map(|_| Scalar::random(rng)).collect(),
        }
    }

    pub fn height(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[Scalar] {
        &self.values
    }

    pub fn get(&self, i: u64) -> Option<Scalar> {
        self.values.get(i as usize).copied()
    }

    /// Adds `delta` to entry `i`.
    pub fn apply_delta(&mut self, i: u64, delta: Scalar) -> Result<(), MleError> {
        let n = self.n;
        let slot = self
            .values
            .get_mut(i as usize)
            .ok_or(MleError::IndexOutOfRange { index: i, n })?;
        *slot += delta;
        Ok(())
    }
}

/// The secret evaluation point `A = (a_n, …, a_1)`, stored least significant
/// first. Never part of any serialized public artifact.
#[derive(Clone, PartialEq, Eq)]
pub struct Trapdoor {
    pub(crate) a: Vec<Scalar>,
}

impl Trapdoor {
    pub fn random<R: rand::RngCore + ?Sized>(n: u32, rng: &mut R) -> Self {
        Self {
            a: (0..n).map(|_| Scalar::random(rng)).collect(),
        }
    }

    pub fn from_coordinates(a: Vec<Scalar>) -> Self {
        Self { a }
    }

    pub fn height(&self) -> u32 {
        self.a.len() as u32
    }

    /// `a_j` for `j ∈ [1, n]`.
    pub fn coordinate(&self, j: u32) -> Scalar {
        self.a[j as usize - 1]
    }

    pub fn as_point(&self) -> &[Scalar] {
        &self.a
    }
}

impl std::fmt::Debug for Trapdoor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Trapdoor(n = {}, <redacted>)", self.a.len())
    }
}

/// `S_b(a)`: `a` when the bit is set, `1 - a` otherwise.
pub fn selection(bit: u8, a: Scalar) -> Scalar {
    debug_assert!(bit <= 1);
    if bit == 1 {
        a
    } else {
        Scalar::one() - a
    }
}

/// `Y_{k,j}(a) = Π_{m=1}^{j} S_{k_m}(a_m)` where `j = a_suffix.len()` and
/// `a_suffix[m - 1] = a_m`. Returns 1 for `j = 0`.
pub fn lagrange_basis(k: u64, a_suffix: &[Scalar]) -> Scalar {
    a_suffix
        .iter()
        .enumerate()
        .map(|(m, &a)| selection(((k >> m) & 1) as u8, a))
        .product()
}

/// All `2^j` basis values `Y_{s,j}(a)` indexed by `s`, built one variable at
/// a time: the new top bit splits every entry into a `1 - a_j` and an `a_j`
/// copy.
pub fn basis_table(a_suffix: &[Scalar]) -> Vec<Scalar> {
    let mut table = vec![Scalar::one()];
    for &a in a_suffix {
        let one_minus = Scalar::one() - a;
        let mut next = Vec::with_capacity(table.len() * 2);
        next.extend(table.iter().map(|&y| y * one_minus));
        next.extend(table.iter().map(|&y| y * a));
        table = next;
    }
    table
}

/// `f(point) = Σ_k w_k · Y_{k,n}(point)` by summing over the basis.
pub fn mle_eval(w: &WeightVector, point: &[Scalar]) -> Result<Scalar, MleError> {
    check_point(w.n, point)?;
    let basis = basis_table(point);
    Ok(w.values.iter().zip(basis).map(|(&wk, y)| wk * y).sum())
}

/// Evaluates the same polynomial by folding out the top variable repeatedly:
/// `f = f_0 + z_j (f_1 - f_0)`.
pub fn mle_eval_streaming(w: &WeightVector, point: &[Scalar]) -> Result<Scalar, MleError> {
    check_point(w.n, point)?;
    let mut table = w.values.clone();
    for &z in point.iter().rev() {
        let half = table.len() / 2;
        let (lo, hi) = table.split_at(half);
        table = lo.iter().zip(hi).map(|(&l, &h)| l + z * (h - l)).collect();
    }
    Ok(table[0])
}

fn check_point(n: u32, point: &[Scalar]) -> Result<(), MleError> {
    if point.len() != n as usize {
        return Err(MleError::PointLength {
            expected: n as usize,
            actual: point.len(),
        });
    }
    Ok(())
}

/// Result of dividing `f` by `(a_j - t)`: `f = q · (a_j - t) + f_t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    /// `f` restricted to top bit 0.
    pub low: Vec<Scalar>,
    /// `f` restricted to top bit 1.
    pub high: Vec<Scalar>,
    /// `high - low`, elementwise.
    pub quotient: Vec<Scalar>,
}

/// Splits an evaluation table over `j ≥ 1` variables on its top variable.
pub fn split(table: &[Scalar]) -> Result<Split, MleError> {
    if !table.len().is_power_of_two() {
        return Err(MleError::NotPowerOfTwo(table.len()));
    }
    if table.len() == 1 {
        return Err(MleError::SplitConstant);
    }
    let (low, high) = table.split_at(table.len() / 2);
    let quotient = low.iter().zip(high).map(|(&l, &h)| h - l).collect();
    Ok(Split {
        low: low.to_vec(),
        high: high.to_vec(),
        quotient,
    })
}
