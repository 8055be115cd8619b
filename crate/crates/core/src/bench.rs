//! Timing harness and growth-trend checks.
//!
//! Rows go to CSV with header `op,n,u,trials,mean_s,stddev_s,proof_bytes`.
//! Ops and the meaning of `u` for each:
//!
//! | op | u | proof_bytes |
//! |----|---|-------------|
//! | `aggregate` | positions aggregated | aggregated proof file |
//! | `verify_aggregated` | positions aggregated | aggregated proof file |
//! | `verify_individual_per_proof` | positions in the batch | one path payload |
//! | `verify_individual_batch` | positions in the batch | all path payloads |
//! | `update_commitment` | deltas applied | 0 |
//! | `update_all_proofs` | deltas applied | 0 |
//! | `merkle_open_all` | `2^n` | one sibling path |
//! | `merkle_batch` | positions opened | all sibling paths |

use std::io::{Read, Write};
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::{aggregate, padded_len, verify_aggregated, AggregationInstance};
use crate::engine::{G2Element, Scalar, G1_BYTES};
use crate::merkle::{self, MerkleTree};
use crate::mle::WeightVector;
use crate::setup::{IpaCommitKey, PublicParams};
use crate::tree::{commit, open_all, update, update_commitment, UpdateDelta, Verifier};

pub const CSV_HEADER: &str = "op,n,u,trials,mean_s,stddev_s,proof_bytes";
pub const DEFAULT_TRIALS: u32 = 10;
pub const DEFAULT_HEIGHTS: [u32; 2] = [10, 14];
pub const UPDATE_BATCH: usize = 1024;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("u = {u} exceeds 2^{n}")]
    TooManyPositions { u: usize, n: u32 },
    #[error("commitment key holds {capacity}, need {needed}")]
    KeyTooSmall { needed: usize, capacity: usize },
    #[error("parameters have height {have}, requested {want}")]
    HeightMismatch { have: u32, want: u32 },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Other(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub op: String,
    pub n: u32,
    pub u: u32,
    pub trials: u32,
    pub mean_s: f64,
    pub stddev_s: f64,
    pub proof_bytes: u64,
}

impl BenchRecord {
    fn from_samples(op: &str, n: u32, u: usize, samples: &[f64], proof_bytes: usize) -> Self {
        let (mean_s, stddev_s) = mean_stddev(samples);
        Self {
            op: op.to_string(),
            n,
            u: u as u32,
            trials: samples.len() as u32,
            mean_s,
            stddev_s,
            proof_bytes: proof_bytes as u64,
        }
    }
}

/// Mean and sample standard deviation (0 for a single sample).
pub fn mean_stddev(samples: &[f64]) -> (f64, f64) {
    let k = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / k;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, var.sqrt())
}

pub fn write_csv<W: Write>(records: &[BenchRecord], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    w.flush().map_err(|e| BenchError::Other(e.to_string()))?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<BenchRecord>, BenchError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(BenchError::Other(format!(
            "unexpected header {}",
            header.join(",")
        )));
    }
    r.deserialize()
        .map(|rec| rec.map_err(BenchError::from))
        .collect()
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub u_values: Vec<usize>,
    pub trials: u32,
    pub seed: u64,
    pub deltas: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            u_values: vec![64, 128, 256, 512, 1024],
            trials: DEFAULT_TRIALS,
            seed: 0,
            deltas: UPDATE_BATCH,
        }
    }
}

fn time<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed().as_secs_f64())
}

/// Runs `f` on a single-thread pool so that library parallelism is off.
pub fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool")
        .install(f)
}

/// Benchmarks one height. `progress` receives each finished row.
pub fn run_height(
    pp: &PublicParams,
    ck: &IpaCommitKey,
    config: &BenchConfig,
    mut progress: impl FnMut(&BenchRecord),
) -> Result<Vec<BenchRecord>, BenchError> {
    if config.trials == 0 {
        return Err(BenchError::NoTrials);
    }
    let n = pp.height();
    let size = 1usize << n;
    for &u in &config.u_values {
        if u == 0 || u > size {
            return Err(BenchError::TooManyPositions { u, n });
        }
        let needed = padded_len(u, n);
        if needed > ck.capacity() {
            return Err(BenchError::KeyTooSmall {
                needed,
                capacity: ck.capacity(),
            });
        }
    }
    let trials = config.trials as usize;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed ^ (n as u64) << 32);
    let w = WeightVector::random(n, &mut rng);
    let c = commit(pp, &w).map_err(|e| BenchError::Other(e.to_string()))?;
    let tree = open_all(pp, &w).map_err(|e| BenchError::Other(e.to_string()))?;
    let g2 = G2Element::generator();
    let verifier = Verifier::new(pp, &g2).map_err(|e| BenchError::Other(e.to_string()))?;
    let mut rows = Vec::new();
    let mut push = |r: BenchRecord, rows: &mut Vec<BenchRecord>| {
        progress(&r);
        rows.push(r);
    };

    for &u in &config.u_values {
        let mut positions: Vec<u64> = sample(&mut rng, size, u)
            .into_iter()
            .map(|i| i as u64)
            .collect();
        positions.sort_unstable();
        let values: Vec<Scalar> = positions.iter().map(|&i| w.get(i).unwrap()).collect();
        let proofs: Vec<_> = positions.iter().map(|&i| tree.open(i).unwrap()).collect();
        let inst = AggregationInstance::single_worker(c, positions, values.clone(), g2)
            .map_err(|e| BenchError::Other(e.to_string()))?;

        let mut agg_t = Vec::with_capacity(trials);
        let mut proof = None;
        for _ in 0..trials {
            let (p, s) = time(|| aggregate(pp, ck, &inst, &proofs));
            proof = Some(p.map_err(|e| BenchError::Other(e.to_string()))?);
            agg_t.push(s);
        }
        let proof = proof.unwrap();
        let agg_bytes = proof.to_bytes().len();
        push(
            BenchRecord::from_samples("aggregate", n, u, &agg_t, agg_bytes),
            &mut rows,
        );

        let mut ver_t = Vec::with_capacity(trials);
        for _ in 0..trials {
            let (ok, s) = time(|| verify_aggregated(pp, ck, &inst, &proof));
            if ok != Ok(true) {
                return Err(BenchError::Other("aggregated proof rejected".into()));
            }
            ver_t.push(s);
        }
        push(
            BenchRecord::from_samples("verify_aggregated", n, u, &ver_t, agg_bytes),
            &mut rows,
        );

        let mut batch_t = Vec::with_capacity(trials);
        for _ in 0..trials {
            let (all, s) = time(|| {
                proofs
                    .iter()
                    .zip(&values)
                    .all(|(p, v)| verifier.verify(&c, v, p) == Ok(true))
            });
            if !all {
                return Err(BenchError::Other("individual proof rejected".into()));
            }
            batch_t.push(s);
        }
        let per: Vec<f64> = batch_t.iter().map(|s| s / u as f64).collect();
        let path_bytes = n as usize * G1_BYTES;
        push(
            BenchRecord::from_samples("verify_individual_per_proof", n, u, &per, path_bytes),
            &mut rows,
        );
        push(
            BenchRecord::from_samples("verify_individual_batch", n, u, &batch_t, u * path_bytes),
            &mut rows,
        );
    }

    let deltas: Vec<UpdateDelta> = (0..config.deltas)
        .map(|_| UpdateDelta::new(rng.gen_range(0..size as u64), Scalar::random(&mut rng)))
        .collect();
    let mut uc_t = Vec::with_capacity(trials);
    let mut ua_t = Vec::with_capacity(trials);
    for _ in 0..trials {
        let (_, s) = time(|| {
            let mut cc = c;
            for d in &deltas {
                cc = update_commitment(pp, &cc, d).expect("in range");
            }
            cc
        });
        uc_t.push(s);
        let mut t = tree.clone();
        let (_, s) = time(|| {
            let mut cc = c;
            for d in &deltas {
                cc = update(pp, pp, &cc, &mut t, d).expect("in range").0;
            }
            cc
        });
        ua_t.push(s);
    }
    push(
        BenchRecord::from_samples("update_commitment", n, deltas.len(), &uc_t, 0),
        &mut rows,
    );
    push(
        BenchRecord::from_samples("update_all_proofs", n, deltas.len(), &ua_t, 0),
        &mut rows,
    );

    let mut mo_t = Vec::with_capacity(trials);
    let mut mtree = None;
    for _ in 0..trials {
        let ((t, _), s) = time(|| {
            let t = MerkleTree::build(&w);
            let paths = t.open_all();
            (t, paths)
        });
        mtree = Some(t);
        mo_t.push(s);
    }
    let mtree = mtree.unwrap();
    push(
        BenchRecord::from_samples("merkle_open_all", n, size, &mo_t, n as usize * 32),
        &mut rows,
    );
    let root = mtree.root();
    for &u in &config.u_values {
        let idx: Vec<u64> = sample(&mut rng, size, u)
            .into_iter()
            .map(|i| i as u64)
            .collect();
        let paths: Vec<_> = idx.iter().map(|&i| mtree.open(i).unwrap()).collect();
        let mut mb_t = Vec::with_capacity(trials);
        for _ in 0..trials {
            let (ok, s) = time(|| {
                paths
                    .iter()
                    .all(|p| merkle::verify(&root, &w.get(p.index).unwrap(), p))
            });
            assert!(ok);
            mb_t.push(s);
        }
        push(
            BenchRecord::from_samples("merkle_batch", n, u, &mb_t, merkle::batch_proof_bytes(n, u)),
            &mut rows,
        );
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrendCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn rows<'a>(records: &'a [BenchRecord], op: &str, n: u32) -> Vec<&'a BenchRecord> {
    let mut v: Vec<_> = records.iter().filter(|r| r.op == op && r.n == n).collect();
    v.sort_by_key(|r| r.u);
    v
}

/// Doubling ratios of consecutive `u` values (only exact doublings count).
pub fn doubling_ratios(points: &[(u32, f64)]) -> Vec<(u32, f64)> {
    points
        .windows(2)
        .filter(|w| w[1].0 == 2 * w[0].0)
        .map(|w| (w[1].0, w[1].1 / w[0].1))
        .collect()
}

/// Growth assertions over a finished run.
pub fn check_trends(records: &[BenchRecord]) -> Vec<TrendCheck> {
    let mut heights: Vec<u32> = records.iter().map(|r| r.n).collect();
    heights.sort_unstable();
    heights.dedup();
    let mut out = Vec::new();
    for &n in &heights {
        let agg: Vec<(u32, f64)> = rows(records, "aggregate", n)
            .iter()
            .filter(|r| r.u >= 32)
            .map(|r| (r.u, r.mean_s))
            .collect();
        let ratios: Vec<_> = doubling_ratios(&agg)
            .into_iter()
            .filter(|(u, _)| *u >= 64)
            .collect();
        if !ratios.is_empty() {
            let passed = ratios.iter().all(|(_, r)| (1.6..=2.6).contains(r));
            out.push(TrendCheck {
                name: format!("aggregate time doubles with u (n={n})"),
                passed,
                detail: format!("{ratios:.3?}"),
            });
        }

        let bytes: Vec<(u32, u64)> = rows(records, "aggregate", n)
            .iter()
            .map(|r| (r.u, r.proof_bytes))
            .collect();
        let merkle: Vec<(u32, u64)> = rows(records, "merkle_batch", n)
            .iter()
            .map(|r| (r.u, r.proof_bytes))
            .collect();
        if bytes.len() >= 2 && merkle.len() >= 2 {
            let log_growth = bytes
                .windows(2)
                .filter(|w| w[1].0 == 2 * w[0].0)
                .all(|w| w[1].1 - w[0].1 == 4 * crate::engine::GT_BYTES as u64);
            let lin_growth = merkle
                .windows(2)
                .filter(|w| w[1].0 == 2 * w[0].0)
                .all(|w| w[1].1 == 2 * w[0].1);
            out.push(TrendCheck {
                name: format!("aggregated bytes logarithmic, Merkle batch linear (n={n})"),
                passed: log_growth && lin_growth,
                detail: format!("bltc {bytes:?} merkle {merkle:?}"),
            });
        }
    }
    let per_delta = |n: u32| {
        rows(records, "update_all_proofs", n)
            .first()
            .map(|r| r.mean_s / r.u.max(1) as f64)
    };
    if let (Some(&lo), Some(&hi)) = (heights.first(), heights.last()) {
        if lo != hi {
            if let (Some(a), Some(b)) = (per_delta(lo), per_delta(hi)) {
                let ratio = b / a;
                out.push(TrendCheck {
                    name: format!("per-delta update time n={hi} vs n={lo}"),
                    passed: ratio <= 2.5,
                    detail: format!("ratio {ratio:.3}"),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats() {
        assert_eq!(mean_stddev(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_stddev(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - 1.290_994_448_735_805_6).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            BenchRecord {
                op: "aggregate".into(),
                n: 10,
                u: 64,
                trials: 10,
                mean_s: 0.125,
                stddev_s: 0.01,
                proof_bytes: 12345,
            },
            BenchRecord {
                op: "merkle_batch".into(),
                n: 10,
                u: 64,
                trials: 1,
                mean_s: 1e-5,
                stddev_s: 0.0,
                proof_bytes: 20480,
            },
        ];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(read_csv(&buf[..]).unwrap(), rows);
        let mut empty = Vec::new();
        write_csv(&[], &mut empty).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().trim(), CSV_HEADER);
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn trends_on_synthetic_rows() {
        let mk = |op: &str, n, u, mean_s, proof_bytes| BenchRecord {
            op: op.into(),
            n,
            u,
            trials: 1,
            mean_s,
            stddev_s: 0.0,
            proof_bytes,
        };
        let mut rs = vec![];
        for (k, u) in [64u32, 128, 256].iter().enumerate() {
            rs.push(mk(
                "aggregate",
                10,
                *u,
                2f64.powi(k as i32),
                1000 + 2304 * k as u64,
            ));
            rs.push(mk("merkle_batch", 10, *u, 0.0, *u as u64 * 320));
        }
        rs.push(mk("update_all_proofs", 10, 1024, 1.0, 0));
        rs.push(mk("update_all_proofs", 14, 1024, 1.4, 0));
        let checks = check_trends(&rs);
        assert_eq!(checks.len(), 3);
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");

        rs[0].mean_s = 0.2;
        assert!(!check_trends(&rs)[0].passed);
    }

    #[test]
    fn small_run_produces_every_op() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let pp = PublicParams::generate(3, &mut rng).unwrap();
        let ck = IpaCommitKey::generate(16, &mut rng).unwrap();
        let cfg = BenchConfig {
            u_values: vec![2, 4],
            trials: 2,
            seed: 3,
            deltas: 8,
        };
        let rows = single_threaded(|| run_height(&pp, &ck, &cfg, |_| {})).unwrap();
        let ops: std::collections::BTreeSet<_> = rows.iter().map(|r| r.op.as_str()).collect();
        assert_eq!(ops.len(), 8);
        let per = rows
            .iter()
            .find(|r| r.op == "verify_individual_per_proof")
            .unwrap();
        assert_eq!(per.proof_bytes, 3 * 48);
        assert!(rows.iter().all(|r| r.trials == 2 && r.mean_s >= 0.0));
        let cfg = BenchConfig {
            u_values: vec![9],
            ..cfg
        };
        assert!(matches!(
            run_height(&pp, &ck, &cfg, |_| {}),
            Err(BenchError::TooManyPositions { u: 9, n: 3 })
        ));
    }
}
