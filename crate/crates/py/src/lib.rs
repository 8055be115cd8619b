//! Python bindings: `import bltc`.
//!
//! Scalars cross the boundary as Python integers (reduced modulo the group
//! order); group elements and proofs as their byte encodings.

use bltc_core::aggregation::padded_len;
use bltc_core::engine::G2Element;
use bltc_core::tree::{update_commitment, update_path, update_tree};
use num_bigint::{BigInt, BigUint, Sign};
use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rng(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    }
}

fn to_scalar(v: &BigInt) -> bltc_core::Scalar {
    let (sign, magnitude) = v.to_bytes_be();
    let s = bltc_core::Scalar::from_be_bytes_mod_order(&magnitude);
    if sign == Sign::Minus {
        -s
    } else {
        s
    }
}

fn to_int(s: &bltc_core::Scalar) -> BigUint {
    BigUint::from_bytes_be(&s.to_bytes())
}

fn bytes<'py>(py: Python<'py>, data: &[u8]) -> Bound<'py, PyBytes> {
    PyBytes::new(py, data)
}

#[pyclass(frozen)]
struct PublicParams(bltc_core::PublicParams);

#[pymethods]
impl PublicParams {
    #[staticmethod]
    #[pyo3(signature = (n, seed=None))]
    fn generate(n: u32, seed: Option<u64>) -> PyResult<Self> {
        bltc_core::PublicParams::generate(n, &mut rng(seed))
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        bltc_core::PublicParams::from_bytes(data)
            .map(Self)
            .map_err(err)
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        bytes(py, &self.0.to_bytes())
    }

    #[getter]
    fn height(&self) -> u32 {
        self.0.height()
    }
}

#[pyclass(frozen)]
struct WatermarkKey(bltc_core::WatermarkKeyPair);

#[pymethods]
impl WatermarkKey {
    #[staticmethod]
    #[pyo3(signature = (seed=None))]
    fn generate(seed: Option<u64>) -> Self {
        Self(bltc_core::WatermarkKeyPair::generate(&mut rng(seed)))
    }

    /// Compressed public key (`pvk`).
    fn public<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        bytes(py, &self.0.public().to_bytes())
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

#[pyclass(frozen)]
struct WatermarkedParams(bltc_core::WatermarkedParams);

#[pymethods]
impl WatermarkedParams {
    #[new]
    fn new(pp: &PublicParams, key: &WatermarkKey) -> PyResult<Self> {
        bltc_core::WatermarkedParams::new(&pp.0, &key.0.secret())
            .map(Self)
            .map_err(err)
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        bytes(py, &self.0.to_bytes())
    }
}

#[pyclass]
struct WeightVector(bltc_core::WeightVector);

#[pymethods]
impl WeightVector {
    #[new]
    fn new(values: Vec<BigInt>) -> PyResult<Self> {
        bltc_core::WeightVector::new(values.iter().map(to_scalar).collect())
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (n, seed=None))]
    fn random(n: u32, seed: Option<u64>) -> Self {
        Self(bltc_core::WeightVector::random(n, &mut rng(seed)))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __getitem__(&self, i: u64) -> PyResult<BigUint> {
        self.0
            .get(i)
            .map(|v| to_int(&v))
            .ok_or_else(|| PyIndexError::new_err(i))
    }

    fn add(&mut self, i: u64, delta: BigInt) -> PyResult<()> {
        self.0.apply_delta(i, to_scalar(&delta)).map_err(err)
    }

    #[getter]
    fn height(&self) -> u32 {
        self.0.height()
    }
}

#[pyclass(frozen, eq)]
#[derive(PartialEq)]
struct Commitment(bltc_core::Commitment);

#[pymethods]
impl Commitment {
    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        bltc_core::Commitment::from_bytes(data)
            .map(Self)
            .map_err(err)
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        bytes(py, &self.0.to_bytes())
    }
}

#[pyclass(eq)]
#[derive(PartialEq)]
struct PathProof(bltc_core::PathProof);

#[pymethods]
impl PathProof {
    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        bltc_core::PathProof::from_bytes(data)
            .map(Self)
            .map_err(err)
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        bytes(py, &self.0.to_bytes())
    }

    #[getter]
    fn index(&self) -> u64 {
        self.0.position().index()
    }

    #[getter]
    fn watermarked(&self) -> bool {
        self.0.is_watermarked()
    }

    #[getter]
    fn payload_bytes(&self) -> usize {
        self.0.payload_bytes()
    }
}

#[pyclass(eq)]
#[derive(PartialEq)]
struct ProofTree(bltc_core::ProofTree);

#[pymethods]
impl ProofTree {
    fn open(&self, i: u64) -> PyResult<PathProof> {
        self.0.open(i).map(PathProof).map_err(err)
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.0.node_count()
    }
}

#[pyclass(frozen)]
struct IpaCommitKey(bltc_core::IpaCommitKey);

#[pymethods]
impl IpaCommitKey {
    /// A key large enough for `u` positions at height `n`.
    #[staticmethod]
    #[pyo3(signature = (u, n, seed=None))]
    fn generate(u: usize, n: u32, seed: Option<u64>) -> PyResult<Self> {
        bltc_core::IpaCommitKey::generate(padded_len(u, n), &mut rng(seed))
            .map(Self)
            .map_err(err)
    }

    #[getter]
    fn capacity(&self) -> usize {
        self.0.capacity()
    }
}

#[pyclass(frozen)]
struct AggregatedProof(bltc_core::AggregatedProof);

#[pymethods]
impl AggregatedProof {
    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        bltc_core::AggregatedProof::from_bytes(data)
            .map(Self)
            .map_err(err)
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        bytes(py, &self.0.to_bytes())
    }

    #[getter]
    fn element_count(&self) -> usize {
        self.0.element_count()
    }
}

fn pvk_or_g2(pvk: Option<&[u8]>) -> PyResult<G2Element> {
    pvk.map(|b| G2Element::from_bytes(b).map_err(err))
        .transpose()
        .map(|p| p.unwrap_or_else(G2Element::generator))
}

#[pyfunction]
fn commit(pp: &PublicParams, w: &WeightVector) -> PyResult<Commitment> {
    bltc_core::commit(&pp.0, &w.0).map(Commitment).map_err(err)
}

/// Builds every path; watermarked when `wm` is given.
#[pyfunction]
#[pyo3(signature = (pp, w, wm=None))]
fn open_all(
    pp: &PublicParams,
    w: &WeightVector,
    wm: Option<&WatermarkedParams>,
) -> PyResult<ProofTree> {
    match wm {
        Some(wm) => bltc_core::open_all(&wm.0, &w.0),
        None => bltc_core::open_all(&pp.0, &w.0),
    }
    .map(ProofTree)
    .map_err(err)
}

/// Checks one path proof; `pvk` defaults to the group generator.
#[pyfunction]
#[pyo3(signature = (pp, commitment, value, proof, pvk=None))]
fn verify(
    pp: &PublicParams,
    commitment: &Commitment,
    value: BigInt,
    proof: &PathProof,
    pvk: Option<&[u8]>,
) -> PyResult<bool> {
    bltc_core::verify_individual(
        &pp.0,
        &commitment.0,
        proof.0.position(),
        &to_scalar(&value),
        &proof.0,
        &pvk_or_g2(pvk)?,
    )
    .map_err(err)
}

/// Adds `delta` at position `i` to the commitment and, when given, to a tree
/// and to standalone proofs. Returns the new commitment.
#[pyfunction]
#[pyo3(signature = (pp, commitment, i, delta, tree=None, proofs=None, wm=None))]
#[allow(clippy::too_many_arguments)]
fn update(
    pp: &PublicParams,
    commitment: &Commitment,
    i: u64,
    delta: BigInt,
    tree: Option<&mut ProofTree>,
    proofs: Option<Vec<PyRefMut<'_, PathProof>>>,
    wm: Option<&WatermarkedParams>,
) -> PyResult<Commitment> {
    let d = bltc_core::UpdateDelta::new(i, to_scalar(&delta));
    let c = update_commitment(&pp.0, &commitment.0, &d).map_err(err)?;
    if let Some(tree) = tree {
        match wm {
            Some(wm) => update_tree(&wm.0, &mut tree.0, &d),
            None => update_tree(&pp.0, &mut tree.0, &d),
        }
        .map_err(err)?;
    }
    for mut proof in proofs.unwrap_or_default() {
        match wm {
            Some(wm) => update_path(&wm.0, &mut proof.0, &d),
            None => update_path(&pp.0, &mut proof.0, &d),
        }
        .map_err(err)?;
    }
    Ok(Commitment(c))
}

fn instance(
    commitment: &Commitment,
    positions: Vec<u64>,
    values: &[BigInt],
    pvk: Option<&[u8]>,
) -> PyResult<bltc_core::AggregationInstance> {
    bltc_core::AggregationInstance::single_worker(
        commitment.0,
        positions,
        values.iter().map(to_scalar).collect(),
        pvk_or_g2(pvk)?,
    )
    .map_err(err)
}

/// Aggregates the proofs at `positions` (same order) into one proof.
#[pyfunction]
#[pyo3(signature = (pp, ck, commitment, positions, values, proofs, pvk=None))]
fn aggregate(
    pp: &PublicParams,
    ck: &IpaCommitKey,
    commitment: &Commitment,
    positions: Vec<u64>,
    values: Vec<BigInt>,
    proofs: Vec<PyRef<'_, PathProof>>,
    pvk: Option<&[u8]>,
) -> PyResult<AggregatedProof> {
    let inst = instance(commitment, positions, &values, pvk)?;
    let proofs: Vec<bltc_core::PathProof> = proofs.iter().map(|p| p.0.clone()).collect();
    bltc_core::aggregate(&pp.0, &ck.0, &inst, &proofs)
        .map(AggregatedProof)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (pp, ck, commitment, positions, values, proof, pvk=None))]
fn verify_aggregated(
    pp: &PublicParams,
    ck: &IpaCommitKey,
    commitment: &Commitment,
    positions: Vec<u64>,
    values: Vec<BigInt>,
    proof: &AggregatedProof,
    pvk: Option<&[u8]>,
) -> PyResult<bool> {
    let inst = instance(commitment, positions, &values, pvk)?;
    bltc_core::verify_aggregated(&pp.0, &ck.0, &inst, &proof.0).map_err(err)
}

#[pymodule]
fn bltc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PublicParams>()?;
    m.add_class::<WatermarkKey>()?;
    m.add_class::<WatermarkedParams>()?;
    m.add_class::<WeightVector>()?;
    m.add_class::<Commitment>()?;
    m.add_class::<PathProof>()?;
    m.add_class::<ProofTree>()?;
    m.add_class::<IpaCommitKey>()?;
    m.add_class::<AggregatedProof>()?;
    m.add_function(wrap_pyfunction!(commit, m)?)?;
    m.add_function(wrap_pyfunction!(open_all, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(update, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(verify_aggregated, m)?)?;
    Ok(())
}
