//! Ownership layer: signed commitment certificates, an append-only
//! hash-chained ledger, and a seeded training simulation that exercises the
//! worker/verifier workflow end to end.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{DateTime, SecondsFormat, Utc};
use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::aggregation::{aggregate, verify_aggregated_detailed, AggregationInstance};
use crate::engine::{hash_to_g1, multi_pair, G1Element, G2Element, Scalar};
use crate::mle::WeightVector;
use crate::setup::{IpaCommitKey, PublicParams, WatermarkKeyPair, WatermarkedParams};
use crate::tree::{batch_update, commit, open_all, update_commitment, Commitment, UpdateDelta};

pub const CERT_TAG: &[u8] = b"BLTC/CERT";

pub type Digest32 = [u8; 32];

#[derive(Debug, Error)]
pub enum OwnershipError {
    #[error("signing key must be nonzero")]
    ZeroSigningKey,
    #[error("epoch {epoch} does not follow previous epoch {prev}")]
    EpochRegression { prev: u64, epoch: u64 },
    #[error("certificate signature does not verify")]
    InvalidSignature,
    #[error("commitment not found in ledger")]
    UnknownCommitment,
    #[error("ledger line {line}: {reason}")]
    CorruptLedger { line: usize, reason: String },
    #[error("ledger i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Signing key for certificates, kept apart from the watermark key.
#[derive(Clone, PartialEq, Eq)]
pub struct SignKeyPair {
    sk: Scalar,
    pk: G2Element,
}

impl SignKeyPair {
    pub fn generate<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        Self::from_secret(Scalar::random_nonzero(rng)).expect("nonzero")
    }

    pub fn from_secret(sk: Scalar) -> Result<Self, OwnershipError> {
        if sk.is_zero() {
            return Err(OwnershipError::ZeroSigningKey);
        }
        Ok(Self {
            sk,
            pk: G2Element::generator() * sk,
        })
    }

    pub fn public(&self) -> G2Element {
        self.pk
    }

    pub fn sign(&self, message: &[u8]) -> G1Element {
        hash_to_g1(CERT_TAG, message) * self.sk
    }
}

impl std::fmt::Debug for SignKeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SignKeyPair")
            .field("pk", &self.pk)
            .finish_non_exhaustive()
    }
}

/// `e(sig, g2) = e(H(message), pk)`.
pub fn verify_signature(pk: &G2Element, message: &[u8], sig: &G1Element) -> bool {
    if pk.is_identity() || sig.is_identity() {
        return false;
    }
    multi_pair(
        &[*sig, -hash_to_g1(CERT_TAG, message)],
        &[G2Element::generator(), *pk],
    )
    .is_identity()
}

/// Digest of a model architecture description.
pub fn model_id(description: &str) -> Digest32 {
    Sha256::digest(description.as_bytes()).into()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub worker_id: String,
    pub model_id: Digest32,
    pub epoch: u64,
    pub commitment: Commitment,
    pub pvk: G2Element,
    pub prev_cert_digest: Option<Digest32>,
    pub signature: G1Element,
}

impl Certificate {
    /// Canonical encoding of every field except the signature.
    pub fn payload(&self) -> Vec<u8> {
        cert_payload(
            &self.worker_id,
            &self.model_id,
            self.epoch,
            &self.commitment,
            &self.pvk,
            self.prev_cert_digest.as_ref(),
        )
    }

    /// Identifies the certificate for `prev` links: hash of payload and signature.
    pub fn digest(&self) -> Digest32 {
        let mut h = Sha256::new();
        h.update(self.payload());
        h.update(self.signature.to_bytes());
        h.finalize().into()
    }
}

fn cert_payload(
    worker_id: &str,
    model_id: &Digest32,
    epoch: u64,
    commitment: &Commitment,
    pvk: &G2Element,
    prev: Option<&Digest32>,
) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + worker_id.len() + 32 + 8 + 48 + 96 + 33);
    out.extend_from_slice(&(worker_id.len() as u32).to_be_bytes());
    out.extend_from_slice(worker_id.as_bytes());
    out.extend_from_slice(model_id);
    out.extend_from_slice(&epoch.to_be_bytes());
    out.extend_from_slice(&commitment.0.to_bytes());
    out.extend_from_slice(&pvk.to_bytes());
    match prev {
        Some(d) => {
            out.push(1);
            out.extend_from_slice(d);
        }
        None => out.push(0),
    }
    out
}

pub fn issue_certificate(
    keys: &SignKeyPair,
    worker_id: &str,
    model_id: Digest32,
    epoch: u64,
    commitment: Commitment,
    pvk: G2Element,
    prev: Option<&Certificate>,
) -> Result<Certificate, OwnershipError> {
    if let Some(p) = prev {
        if epoch <= p.epoch {
            return Err(OwnershipError::EpochRegression {
                prev: p.epoch,
                epoch,
            });
        }
    }
    let prev_cert_digest = prev.map(Certificate::digest);
    let payload = cert_payload(
        worker_id,
        &model_id,
        epoch,
        &commitment,
        &pvk,
        prev_cert_digest.as_ref(),
    );
    Ok(Certificate {
        worker_id: worker_id.to_string(),
        model_id,
        epoch,
        commitment,
        pvk,
        prev_cert_digest,
        signature: keys.sign(&payload),
    })
}

pub fn verify_certificate(cert: &Certificate, signer: &G2Element) -> bool {
    !cert.pvk.is_identity() && verify_signature(signer, &cert.payload(), &cert.signature)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LedgerEntry {
    pub seq: u64,
    pub received_at: DateTime<Utc>,
    pub certificate: Certificate,
    pub entry_digest: Digest32,
}

/// One JSON line of the ledger file.
#[derive(Serialize, Deserialize)]
struct LedgerRecord {
    seq: u64,
    received_at: String,
    worker_id: String,
    model_id: String,
    epoch: u64,
    commitment: String,
    pvk: String,
    prev_cert_digest: Option<String>,
    signature: String,
    entry_digest: String,
}

fn timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Micros, true)
}

fn entry_digest(seq: u64, received_at: &str, cert: &Certificate, prev: &Digest32) -> Digest32 {
    let mut h = Sha256::new();
    h.update(seq.to_be_bytes());
    h.update((received_at.len() as u32).to_be_bytes());
    h.update(received_at.as_bytes());
    h.update(cert.payload());
    h.update(cert.signature.to_bytes());
    h.update(prev);
    h.finalize().into()
}

impl LedgerEntry {
    fn to_line(&self) -> String {
        let c = &self.certificate;
        let rec = LedgerRecord {
            seq: self.seq,
            received_at: timestamp(&self.received_at),
            worker_id: c.worker_id.clone(),
            model_id: hex::encode(c.model_id),
            epoch: c.epoch,
            commitment: hex::encode(c.commitment.0.to_bytes()),
            pvk: hex::encode(c.pvk.to_bytes()),
            prev_cert_digest: c.prev_cert_digest.map(hex::encode),
            signature: hex::encode(c.signature.to_bytes()),
            entry_digest: hex::encode(self.entry_digest),
        };
        serde_json::to_string(&rec).expect("plain record")
    }

    fn from_line(line: &str) -> Result<Self, String> {
        let rec: LedgerRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        fn bytes<const N: usize>(field: &str, s: &str) -> Result<[u8; N], String> {
            let v = hex::decode(s).map_err(|e| format!("{field}: {e}"))?;
            v.try_into().map_err(|_| format!("{field}: wrong length"))
        }
        let received_at = DateTime::parse_from_rfc3339(&rec.received_at)
            .map_err(|e| format!("received_at: {e}"))?
            .with_timezone(&Utc);
        let commitment = G1Element::from_bytes(&bytes::<48>("commitment", &rec.commitment)?)
            .map_err(|e| format!("commitment: {e}"))?;
        let pvk = G2Element::from_bytes(&bytes::<96>("pvk", &rec.pvk)?)
            .map_err(|e| format!("pvk: {e}"))?;
        let signature = G1Element::from_bytes(&bytes::<48>("signature", &rec.signature)?)
            .map_err(|e| format!("signature: {e}"))?;
        let prev_cert_digest = rec
            .prev_cert_digest
            .as_deref()
            .map(|s| bytes::<32>("prev_cert_digest", s))
            .transpose()?;
        Ok(Self {
            seq: rec.seq,
            received_at,
            certificate: Certificate {
                worker_id: rec.worker_id,
                model_id: bytes("model_id", &rec.model_id)?,
                epoch: rec.epoch,
                commitment: Commitment(commitment),
                pvk,
                prev_cert_digest,
                signature,
            },
            entry_digest: bytes("entry_digest", &rec.entry_digest)?,
        })
    }
}

/// Append-only certificate log. With a backing file, every append is written
/// and flushed before it becomes visible; `&mut self` keeps a single writer.
#[derive(Debug, Default)]
pub struct Ledger {
    path: Option<PathBuf>,
    entries: Vec<LedgerEntry>,
    earliest: HashMap<[u8; 48], u64>,
    cert_epochs: HashMap<Digest32, u64>,
}

impl Ledger {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates) a file-backed ledger, checking every line is in
    /// canonical form and the digest chain is intact.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, OwnershipError> {
        let path = path.as_ref().to_path_buf();
        let mut ledger = Self {
            path: Some(path.clone()),
            ..Self::default()
        };
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                File::create(&path)?;
                return Ok(ledger);
            }
            Err(e) => return Err(e.into()),
        };
        let mut reader = BufReader::new(file);
        let mut raw = Vec::new();
        let mut line_no = 0;
        loop {
            raw.clear();
            if reader.read_until(b'\n', &mut raw)? == 0 {
                break;
            }
            line_no += 1;
            let corrupt = |reason: String| OwnershipError::CorruptLedger {
                line: line_no,
                reason,
            };
            if raw.pop() != Some(b'\n') {
                return Err(corrupt("missing line terminator".into()));
            }
            let line = std::str::from_utf8(&raw).map_err(|e| corrupt(e.to_string()))?;
            let entry = LedgerEntry::from_line(line).map_err(corrupt)?;
            if entry.to_line() != line {
                return Err(corrupt("not in canonical form".into()));
            }
            ledger.check_next(&entry).map_err(corrupt)?;
            ledger.index(entry);
        }
        Ok(ledger)
    }

    fn last_digest(&self) -> Digest32 {
        self.entries
            .last()
            .map(|e| e.entry_digest)
            .unwrap_or([0; 32])
    }

    fn check_next(&self, entry: &LedgerEntry) -> Result<(), String> {
        if entry.seq != self.entries.len() as u64 {
            return Err(format!("seq {} out of order", entry.seq));
        }
        if let Some(last) = self.entries.last() {
            if entry.received_at < last.received_at {
                return Err("timestamp precedes previous entry".into());
            }
        }
        let expect = entry_digest(
            entry.seq,
            &timestamp(&entry.received_at),
            &entry.certificate,
            &self.last_digest(),
        );
        if expect != entry.entry_digest {
            return Err("entry digest does not chain".into());
        }
        Ok(())
    }

    fn index(&mut self, entry: LedgerEntry) {
        self.earliest
            .entry(entry.certificate.commitment.0.to_bytes())
            .or_insert(entry.seq);
        self.cert_epochs
            .insert(entry.certificate.digest(), entry.certificate.epoch);
        self.entries.push(entry);
    }

    /// Appends a certificate after checking it against the signer's key.
    pub fn append(&mut self, cert: Certificate, signer: &G2Element) -> Result<u64, OwnershipError> {
        if !verify_certificate(&cert, signer) {
            return Err(OwnershipError::InvalidSignature);
        }
        if let Some(prev_epoch) = cert
            .prev_cert_digest
            .and_then(|d| self.cert_epochs.get(&d).copied())
        {
            if cert.epoch <= prev_epoch {
                return Err(OwnershipError::EpochRegression {
                    prev: prev_epoch,
                    epoch: cert.epoch,
                });
            }
        }
        let seq = self.entries.len() as u64;
        let mut received_at = Utc::now();
        if let Some(last) = self.entries.last() {
            received_at = received_at.max(last.received_at);
        }
        // Round-trip through the stored text form so reloads compare equal.
        let stamp = timestamp(&received_at);
        let received_at = DateTime::parse_from_rfc3339(&stamp)
            .expect("own format")
            .with_timezone(&Utc);
        let entry_digest = entry_digest(seq, &stamp, &cert, &self.last_digest());
        let entry = LedgerEntry {
            seq,
            received_at,
            certificate: cert,
            entry_digest,
        };
        if let Some(path) = &self.path {
            let mut f = OpenOptions::new().append(true).create(true).open(path)?;
            let mut line = entry.to_line();
            line.push('\n');
            f.write_all(line.as_bytes())?;
            f.sync_data()?;
        }
        self.index(entry);
        Ok(seq)
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// The first entry recorded for `commitment`.
    pub fn earliest(&self, commitment: &Commitment) -> Option<&LedgerEntry> {
        self.earliest
            .get(&commitment.0.to_bytes())
            .map(|&s| &self.entries[s as usize])
    }

    /// Names the worker holding the earliest certificate for `commitment`.
    pub fn adjudicate(&self, commitment: &Commitment) -> Result<&str, OwnershipError> {
        self.earliest(commitment)
            .map(|e| e.certificate.worker_id.as_str())
            .ok_or(OwnershipError::UnknownCommitment)
    }

    /// Recomputes the whole chain from the in-memory entries.
    pub fn verify_chain(&self) -> bool {
        let mut prev = [0u8; 32];
        for (i, e) in self.entries.iter().enumerate() {
            if e.seq != i as u64
                || entry_digest(e.seq, &timestamp(&e.received_at), &e.certificate, &prev)
                    != e.entry_digest
            {
                return false;
            }
            prev = e.entry_digest;
        }
        true
    }
}

/// A worker's two independent keys.
#[derive(Clone, Debug)]
pub struct WorkerKeys {
    pub worker_id: String,
    pub watermark: WatermarkKeyPair,
    pub signing: SignKeyPair,
}

impl WorkerKeys {
    pub fn generate<R: RngCore + ?Sized>(worker_id: &str, rng: &mut R) -> Self {
        Self {
            worker_id: worker_id.to_string(),
            watermark: WatermarkKeyPair::generate(rng),
            signing: SignKeyPair::generate(rng),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n: u32,
    pub epochs: u64,
    pub updates_per_epoch: usize,
    pub spot_check_width: usize,
    pub seed: u64,
    /// Spot-check every k-th epoch; 1 checks them all.
    pub verify_every: u64,
    /// Epoch at which one delta reaches the weights and commitment but not the proofs.
    pub hidden_delta_epoch: Option<u64>,
    pub model_description: String,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: 10,
            epochs: 20,
            updates_per_epoch: 64,
            spot_check_width: 32,
            seed: 0,
            verify_every: 1,
            hidden_delta_epoch: None,
            model_description: "mlp:1024".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub commitment: String,
    pub certificate_seq: u64,
    pub spot_checked: bool,
    pub verified: Option<bool>,
    pub update_s: f64,
    pub aggregate_s: f64,
    pub verify_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config: SimulationConfig,
    pub worker_id: String,
    pub pvk: String,
    pub epochs: Vec<EpochRecord>,
    pub ledger_entries: usize,
    pub final_commitment: String,
    pub adjudicated_worker: String,
    pub all_verified: bool,
}

impl SimulationReport {
    /// The report with every timing zeroed, for determinism comparisons.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for e in &mut r.epochs {
            e.update_s = 0.0;
            e.aggregate_s = 0.0;
            e.verify_s = 0.0;
        }
        r
    }
}

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("epoch {epoch}: spot check rejected ({reason})")]
    VerificationFailed { epoch: u64, reason: String },
    #[error(transparent)]
    Ownership(#[from] OwnershipError),
    #[error("epoch {epoch}: {reason}")]
    Internal { epoch: u64, reason: String },
}

/// Runs a seeded training loop for one worker: sparse random deltas each
/// epoch, a fresh certificate on the ledger, and an aggregated spot check of
/// `spot_check_width` random positions against the certified commitment.
pub fn simulate_training(
    pp: &PublicParams,
    wmpp: &WatermarkedParams,
    ck: &IpaCommitKey,
    worker: &WorkerKeys,
    ledger: &mut Ledger,
    config: &SimulationConfig,
) -> Result<SimulationReport, SimulationError> {
    let n = config.n;
    if pp.height() != n || wmpp.height() != n {
        return Err(SimulationError::Config(format!(
            "parameters have height {} / {}, config wants {n}",
            pp.height(),
            wmpp.height()
        )));
    }
    let size = 1u64 << n;
    if config.spot_check_width == 0 || config.spot_check_width as u64 > size {
        return Err(SimulationError::Config(format!(
            "spot-check width must be in 1..={size}"
        )));
    }
    if config.verify_every == 0 {
        return Err(SimulationError::Config(
            "verify_every must be positive".into(),
        ));
    }
    let internal = |epoch: u64| {
        move |e: &dyn std::fmt::Display| SimulationError::Internal {
            epoch,
            reason: e.to_string(),
        }
    };

    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let model = model_id(&config.model_description);
    let pvk = worker.watermark.public();
    let mut w = WeightVector::random(n, &mut rng);
    let mut c = commit(pp, &w).map_err(|e| internal(0)(&e))?;
    let mut tree = open_all(wmpp, &w).map_err(|e| internal(0)(&e))?;
    let mut prev: Option<Certificate> = None;
    let mut records = Vec::with_capacity(config.epochs as usize + 1);

    for epoch in 0..=config.epochs {
        let t = Instant::now();
        if epoch > 0 {
            let deltas: Vec<UpdateDelta> = (0..config.updates_per_epoch)
                .map(|_| UpdateDelta::new(rng.gen_range(0..size), Scalar::random(&mut rng)))
                .collect();
            c = batch_update(pp, wmpp, &c, &mut tree, &deltas).map_err(|e| internal(epoch)(&e))?;
            for d in &deltas {
                w.apply_delta(d.position, d.delta)
                    .map_err(|e| internal(epoch)(&e))?;
            }
            if config.hidden_delta_epoch == Some(epoch) {
                let hidden =
                    UpdateDelta::new(rng.gen_range(0..size), Scalar::random_nonzero(&mut rng));
                c = update_commitment(pp, &c, &hidden).map_err(|e| internal(epoch)(&e))?;
                w.apply_delta(hidden.position, hidden.delta)
                    .map_err(|e| internal(epoch)(&e))?;
            }
        }
        let update_s = t.elapsed().as_secs_f64();

        let cert = issue_certificate(
            &worker.signing,
            &worker.worker_id,
            model,
            epoch,
            c,
            pvk,
            prev.as_ref(),
        )?;
        let seq = ledger.append(cert.clone(), &worker.signing.public())?;

        let spot_checked = epoch % config.verify_every == 0;
        let (mut aggregate_s, mut verify_s, mut verified) = (0.0, 0.0, None);
        if spot_checked {
            let mut positions: Vec<u64> = sample(&mut rng, size as usize, config.spot_check_width)
                .into_iter()
                .map(|i| i as u64)
                .collect();
            positions.sort_unstable();
            let values = positions.iter().map(|&i| w.get(i).unwrap()).collect();
            let proofs = positions
                .iter()
                .map(|&i| tree.open(i))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| internal(epoch)(&e))?;
            let inst =
                AggregationInstance::single_worker(cert.commitment, positions, values, cert.pvk)
                    .map_err(|e| internal(epoch)(&e))?;
            let t = Instant::now();
            let proof = aggregate(pp, ck, &inst, &proofs).map_err(|e| internal(epoch)(&e))?;
            aggregate_s = t.elapsed().as_secs_f64();
            let t = Instant::now();
            let outcome = verify_aggregated_detailed(pp, ck, &inst, &proof)
                .map_err(|e| internal(epoch)(&e))?;
            verify_s = t.elapsed().as_secs_f64();
            if let Err(failure) = outcome {
                return Err(SimulationError::VerificationFailed {
                    epoch,
                    reason: failure.to_string(),
                });
            }
            verified = Some(true);
        }
        records.push(EpochRecord {
            epoch,
            commitment: hex::encode(c.0.to_bytes()),
            certificate_seq: seq,
            spot_checked,
            verified,
            update_s,
            aggregate_s,
            verify_s,
        });
        prev = Some(cert);
    }

    let adjudicated_worker = ledger.adjudicate(&c)?.to_string();
    Ok(SimulationReport {
        config: config.clone(),
        worker_id: worker.worker_id.clone(),
        pvk: hex::encode(pvk.to_bytes()),
        epochs: records,
        ledger_entries: ledger.len(),
        final_commitment: hex::encode(c.0.to_bytes()),
        all_verified: true,
        adjudicated_worker,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    fn sample_cert(keys: &SignKeyPair, epoch: u64, prev: Option<&Certificate>) -> Certificate {
        let c = Commitment(G1Element::generator() * Scalar::from(epoch + 7));
        let pvk = G2Element::generator() * Scalar::from(5u64);
        issue_certificate(keys, "alice", model_id("mlp"), epoch, c, pvk, prev).unwrap()
    }

    #[test]
    fn sign_then_verify_and_wrong_key() {
        let mut r = rng(1);
        let k = SignKeyPair::generate(&mut r);
        let other = SignKeyPair::generate(&mut r);
        let cert = sample_cert(&k, 0, None);
        assert!(verify_certificate(&cert, &k.public()));
        assert!(!verify_certificate(&cert, &other.public()));
        let again = sample_cert(&k, 0, None);
        assert_eq!(cert, again);
    }

    #[test]
    fn payload_bit_flips_break_signature() {
        let mut r = rng(2);
        let k = SignKeyPair::generate(&mut r);
        let cert = sample_cert(&k, 1, None);
        let payload = cert.payload();
        let mut flips = 0;
        for _ in 0..256 {
            let mut p = payload.clone();
            let bit = r.gen_range(0..p.len() * 8);
            p[bit / 8] ^= 1 << (bit % 8);
            assert!(!verify_signature(&k.public(), &p, &cert.signature));
            flips += 1;
        }
        assert_eq!(flips, 256);
    }

    #[test]
    fn epoch_regression_rejected() {
        let k = SignKeyPair::generate(&mut rng(3));
        let c1 = sample_cert(&k, 4, None);
        let c = Commitment(G1Element::generator());
        for epoch in [3, 4] {
            assert!(matches!(
                issue_certificate(&k, "alice", c1.model_id, epoch, c, c1.pvk, Some(&c1)),
                Err(OwnershipError::EpochRegression { prev: 4, .. })
            ));
        }
        let c2 = issue_certificate(&k, "alice", c1.model_id, 5, c, c1.pvk, Some(&c1)).unwrap();
        assert_eq!(c2.prev_cert_digest, Some(c1.digest()));
        assert!(SignKeyPair::from_secret(Scalar::zero()).is_err());
    }

    #[test]
    fn resigned_certificate_fails_under_original_key() {
        let mut r = rng(4);
        let alice = SignKeyPair::generate(&mut r);
        let mallory = SignKeyPair::generate(&mut r);
        let cert = sample_cert(&alice, 0, None);
        let mut stolen = cert.clone();
        stolen.worker_id = "mallory".into();
        stolen.signature = mallory.sign(&stolen.payload());
        assert!(verify_certificate(&stolen, &mallory.public()));
        assert!(!verify_certificate(&stolen, &alice.public()));
    }

    #[test]
    fn ledger_seq_replay_and_adjudication() {
        let mut r = rng(5);
        let alice = SignKeyPair::generate(&mut r);
        let mallory = SignKeyPair::generate(&mut r);
        let mut ledger = Ledger::in_memory();
        let cert = sample_cert(&alice, 0, None);
        assert_eq!(ledger.append(cert.clone(), &alice.public()).unwrap(), 0);
        let other = sample_cert(&alice, 1, Some(&cert));
        assert_eq!(ledger.append(other, &alice.public()).unwrap(), 1);

        let mut replay = cert.clone();
        replay.worker_id = "mallory".into();
        replay.signature = mallory.sign(&replay.payload());
        assert!(matches!(
            ledger.append(replay.clone(), &alice.public()),
            Err(OwnershipError::InvalidSignature)
        ));
        assert_eq!(ledger.append(replay, &mallory.public()).unwrap(), 2);
        assert_eq!(ledger.adjudicate(&cert.commitment).unwrap(), "alice");
        assert!(matches!(
            ledger.adjudicate(&Commitment(G1Element::identity())),
            Err(OwnershipError::UnknownCommitment)
        ));
        assert!(ledger.verify_chain());
        let ts: Vec<_> = ledger.entries().iter().map(|e| e.received_at).collect();
        assert!(ts.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn ledger_reload_and_byte_mutations() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        let mut r = rng(6);
        let k = SignKeyPair::generate(&mut r);
        let mut ledger = Ledger::open(&path).unwrap();
        let mut prev = None;
        for epoch in 0..3 {
            let c = sample_cert(&k, epoch, prev.as_ref());
            ledger.append(c.clone(), &k.public()).unwrap();
            prev = Some(c);
        }
        let reloaded = Ledger::open(&path).unwrap();
        assert_eq!(reloaded.entries(), ledger.entries());
        assert_eq!(reloaded.earliest, ledger.earliest);

        let bytes = std::fs::read(&path).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("{\"seq\":0,\"received_at\":"));
        let bad = dir.path().join("bad.jsonl");
        for _ in 0..200 {
            let mut m = bytes.clone();
            let at = r.gen_range(0..m.len());
            let old = m[at];
            while m[at] == old {
                m[at] = r.gen();
            }
            std::fs::write(&bad, &m).unwrap();
            assert!(Ledger::open(&bad).is_err(), "mutation at {at} undetected");
        }
    }

    fn small_setup(
        n: u32,
        seed: u64,
    ) -> (PublicParams, WatermarkedParams, IpaCommitKey, WorkerKeys) {
        let mut r = rng(seed);
        let pp = PublicParams::generate(n, &mut r).unwrap();
        let worker = WorkerKeys::generate("alice", &mut r);
        let wmpp = WatermarkedParams::new(&pp, &worker.watermark.secret()).unwrap();
        let ck = IpaCommitKey::generate(64, &mut r).unwrap();
        (pp, wmpp, ck, worker)
    }

    #[test]
    fn simulation_honest_is_deterministic() {
        let (pp, wmpp, ck, worker) = small_setup(4, 7);
        let cfg = SimulationConfig {
            n: 4,
            epochs: 3,
            updates_per_epoch: 5,
            spot_check_width: 3,
            seed: 11,
            ..SimulationConfig::default()
        };
        let a =
            simulate_training(&pp, &wmpp, &ck, &worker, &mut Ledger::in_memory(), &cfg).unwrap();
        let b =
            simulate_training(&pp, &wmpp, &ck, &worker, &mut Ledger::in_memory(), &cfg).unwrap();
        assert_eq!(a.without_timings(), b.without_timings());
        assert_eq!(a.epochs.len(), 4);
        assert_eq!(a.adjudicated_worker, "alice");
        assert!(a.epochs.iter().all(|e| e.verified == Some(true)));

        let zero = SimulationConfig {
            epochs: 0,
            ..cfg.clone()
        };
        let g =
            simulate_training(&pp, &wmpp, &ck, &worker, &mut Ledger::in_memory(), &zero).unwrap();
        assert_eq!(g.ledger_entries, 1);
        assert_eq!(g.epochs.len(), 1);
    }

    #[test]
    fn simulation_hidden_delta_fails_at_that_epoch() {
        let (pp, wmpp, ck, worker) = small_setup(4, 8);
        let cfg = SimulationConfig {
            n: 4,
            epochs: 4,
            updates_per_epoch: 2,
            spot_check_width: 2,
            hidden_delta_epoch: Some(2),
            ..SimulationConfig::default()
        };
        match simulate_training(&pp, &wmpp, &ck, &worker, &mut Ledger::in_memory(), &cfg) {
            Err(SimulationError::VerificationFailed { epoch, .. }) => assert_eq!(epoch, 2),
            other => panic!("expected failure at epoch 2, got {other:?}"),
        }
    }

    #[test]
    fn simulation_rejects_bad_config_and_mismatched_watermark() {
        let (pp, wmpp, ck, worker) = small_setup(3, 9);
        let cfg = SimulationConfig {
            n: 3,
            epochs: 1,
            spot_check_width: 9,
            ..SimulationConfig::default()
        };
        assert!(matches!(
            simulate_training(&pp, &wmpp, &ck, &worker, &mut Ledger::in_memory(), &cfg),
            Err(SimulationError::Config(_))
        ));
        let other = WorkerKeys::generate("bob", &mut rng(10));
        let cfg = SimulationConfig {
            spot_check_width: 2,
            ..cfg
        };
        assert!(matches!(
            simulate_training(&pp, &wmpp, &ck, &other, &mut Ledger::in_memory(), &cfg),
            Err(SimulationError::VerificationFailed { epoch: 0, .. })
        ));
    }
}
