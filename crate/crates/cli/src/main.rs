//! `bltc` command line.
//!
//! Exit codes: 0 success, 1 verification failed, 2 usage error,
//! 3 malformed input file, 4 I/O or other failure.

mod files;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bltc::aggregation::{padded_len, verify_aggregated_detailed, AGGREGATE_MAGIC};
use bltc::bench::{self, BenchConfig};
use bltc::engine::G2Element;
use bltc::ownership::{Ledger, SimulationError};
use bltc::tree::{update_path, Verifier, PROOF_MAGIC};
use bltc::*;
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[derive(Debug)]
pub enum Failure {
    Verification(String),
    Usage(String),
    Parse(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Parse(_) => 3,
            Failure::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Verification(m) => write!(f, "verification failed: {m}"),
            Failure::Usage(m) => write!(f, "usage: {m}"),
            Failure::Parse(m) => write!(f, "malformed input: {m}"),
            Failure::Io(m) => write!(f, "{m}"),
        }
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        Failure::Parse(e.to_string())
    }
}

fn other(e: impl std::fmt::Display) -> Failure {
    Failure::Io(e.to_string())
}

#[derive(Parser)]
#[command(
    name = "bltc",
    version,
    about = "Binary linear tree vector commitments"
)]
struct Cli {
    /// Public parameter file.
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    /// Seed for every random choice; omitted means fresh entropy.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Disable library parallelism.
    #[arg(long, global = true)]
    single_thread: bool,
    /// Main output path of the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate public parameters (and optionally an aggregation key).
    Setup {
        #[arg(long)]
        n: u32,
        /// Also write an aggregation key with this many slots (power of two).
        #[arg(long)]
        ipa: Option<usize>,
        #[arg(long, default_value = "ipa.bin")]
        ipa_out: PathBuf,
    },
    /// Derive watermarked parameters for a worker key.
    Mark {
        /// Existing key file; a new key is generated otherwise.
        #[arg(long)]
        key: Option<PathBuf>,
        #[arg(long, default_value = "worker.key.json")]
        key_out: PathBuf,
    },
    /// Commit to a weight vector.
    Commit {
        #[arg(long)]
        weights: PathBuf,
        /// Write a random vector of height N to --weights first.
        #[arg(long, value_name = "N")]
        generate: Option<u32>,
    },
    /// Open positions into a proof directory.
    Open {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        index: Vec<u64>,
        /// Watermarked parameters; plain proofs otherwise.
        #[arg(long)]
        wm_params: Option<PathBuf>,
    },
    /// Aggregate every proof listed in a proof directory.
    Aggregate {
        #[arg(long)]
        proofs: PathBuf,
        #[arg(long)]
        commitment: PathBuf,
        #[arg(long)]
        ipa: PathBuf,
        #[arg(long)]
        pvk: Option<String>,
    },
    /// Verify a path proof or an aggregated proof.
    Verify {
        #[arg(long)]
        commitment: PathBuf,
        #[arg(long)]
        proof: PathBuf,
        #[arg(long)]
        values: PathBuf,
        #[arg(long)]
        pvk: Option<String>,
        /// Aggregation key, needed for aggregated proofs.
        #[arg(long)]
        ipa: Option<PathBuf>,
    },
    /// Apply additive deltas `index:delta` to weights, commitment and proofs.
    Update {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        commitment: PathBuf,
        #[arg(long = "delta", required = true)]
        deltas: Vec<String>,
        /// Proof directory to bring up to date.
        #[arg(long)]
        proofs: Option<PathBuf>,
        #[arg(long)]
        wm_params: Option<PathBuf>,
    },
    /// Single-threaded timings as CSV.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = bench::DEFAULT_HEIGHTS)]
        n: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_values_t = [64usize, 128, 256, 512, 1024])]
        u: Vec<usize>,
        #[arg(long, default_value_t = bench::DEFAULT_TRIALS)]
        trials: u32,
        #[arg(long, default_value_t = bench::UPDATE_BATCH)]
        deltas: usize,
        /// Evaluate growth-trend assertions and fail if any is violated.
        #[arg(long)]
        check: bool,
    },
    /// Seeded training run with certificates, ledger and spot checks.
    Simulate {
        #[arg(long, default_value_t = 10)]
        n: u32,
        #[arg(long, default_value_t = 20)]
        epochs: u64,
        #[arg(long, default_value_t = 64)]
        updates: usize,
        #[arg(long, default_value_t = 32)]
        u: usize,
        #[arg(long, default_value_t = 1)]
        verify_every: u64,
        /// Hide one delta from the proofs at this epoch.
        #[arg(long, value_name = "EPOCH")]
        adversary: Option<u64>,
        #[arg(long)]
        ledger: Option<PathBuf>,
        #[arg(long, default_value = "worker-0")]
        worker: String,
    },
}

struct Ctx {
    params: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

impl Ctx {
    fn rng(&self) -> ChaCha20Rng {
        match self.seed {
            Some(s) => ChaCha20Rng::seed_from_u64(s),
            None => ChaCha20Rng::from_entropy(),
        }
    }

    fn out_or(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }

    fn params_path(&self) -> PathBuf {
        self.params
            .clone()
            .unwrap_or_else(|| PathBuf::from("pp.bin"))
    }

    fn load_params(&self) -> Result<PublicParams, Failure> {
        let path = self.params_path();
        Ok(PublicParams::from_bytes(&files::read_bytes(&path)?)?)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let ctx = Ctx {
        params: cli.params,
        seed: cli.seed,
        out: cli.out,
    };
    let command = cli.command;
    let result = if cli.single_thread {
        bench::single_threaded(move || run(&ctx, command))
    } else {
        run(&ctx, command)
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("bltc: {f}");
            ExitCode::from(f.code())
        }
    }
}

fn run(ctx: &Ctx, command: Command) -> Result<(), Failure> {
    match command {
        Command::Setup { n, ipa, ipa_out } => setup(ctx, n, ipa, &ipa_out),
        Command::Mark { key, key_out } => mark(ctx, key.as_deref(), &key_out),
        Command::Commit { weights, generate } => commit_cmd(ctx, &weights, generate),
        Command::Open {
            weights,
            index,
            wm_params,
        } => open_cmd(ctx, &weights, &index, wm_params.as_deref()),
        Command::Aggregate {
            proofs,
            commitment,
            ipa,
            pvk,
        } => aggregate_cmd(ctx, &proofs, &commitment, &ipa, pvk.as_deref()),
        Command::Verify {
            commitment,
            proof,
            values,
            pvk,
            ipa,
        } => verify_cmd(
            ctx,
            &commitment,
            &proof,
            &values,
            pvk.as_deref(),
            ipa.as_deref(),
        ),
        Command::Update {
            weights,
            commitment,
            deltas,
            proofs,
            wm_params,
        } => update_cmd(
            ctx,
            &weights,
            &commitment,
            &deltas,
            proofs.as_deref(),
            wm_params.as_deref(),
        ),
        Command::Bench {
            n,
            u,
            trials,
            deltas,
            check,
        } => bench_cmd(ctx, &n, &u, trials, deltas, check),
        Command::Simulate {
            n,
            epochs,
            updates,
            u,
            verify_every,
            adversary,
            ledger,
            worker,
        } => {
            let config = SimulationConfig {
                n,
                epochs,
                updates_per_epoch: updates,
                spot_check_width: u,
                seed: ctx.seed.unwrap_or(0),
                verify_every,
                hidden_delta_epoch: adversary,
                ..SimulationConfig::default()
            };
            simulate_cmd(ctx, &config, ledger.as_deref(), &worker)
        }
    }
}

fn setup(ctx: &Ctx, n: u32, ipa: Option<usize>, ipa_out: &Path) -> Result<(), Failure> {
    let mut rng = ctx.rng();
    let pp = PublicParams::generate(n, &mut rng).map_err(|e| Failure::Usage(e.to_string()))?;
    let out = ctx.out.clone().unwrap_or_else(|| ctx.params_path());
    let bytes = pp.to_bytes();
    files::write(&out, &bytes)?;
    println!(
        "wrote {}: n={n}, {} G1 + {} G2 elements, {} bytes",
        out.display(),
        pp.basis_element_count(),
        pp.verification_keys().len(),
        bytes.len()
    );
    if let Some(m) = ipa {
        let ck = IpaCommitKey::generate(m, &mut rng).map_err(|e| Failure::Usage(e.to_string()))?;
        files::write(ipa_out, ck.to_bytes())?;
        println!("wrote {}: {m} aggregation key slots", ipa_out.display());
    }
    Ok(())
}

fn mark(ctx: &Ctx, key: Option<&Path>, key_out: &Path) -> Result<(), Failure> {
    let pp = ctx.load_params()?;
    let keys = match key {
        Some(path) => WatermarkKeyPair::from_secret(files::read_wmk(path)?, false)
            .map_err(|e| Failure::Parse(e.to_string()))?,
        None => {
            let k = WatermarkKeyPair::generate(&mut ctx.rng());
            files::write(key_out, files::key_json(&k.secret(), &k.public()))?;
            println!("wrote {}", key_out.display());
            k
        }
    };
    let wp = WatermarkedParams::new(&pp, &keys.secret()).map_err(other)?;
    let out = ctx.out_or("wm.bin");
    files::write(&out, wp.to_bytes())?;
    println!(
        "wrote {}: watermarked parameters, n={}",
        out.display(),
        wp.height()
    );
    println!("pvk {}", hex::encode(keys.public().to_bytes()));
    Ok(())
}

fn commit_cmd(ctx: &Ctx, weights: &Path, generate: Option<u32>) -> Result<(), Failure> {
    let pp = ctx.load_params()?;
    if let Some(n) = generate {
        files::write_weights(weights, &WeightVector::random(n, &mut ctx.rng()))?;
    }
    let w = files::read_weights(weights)?;
    let c = commit(&pp, &w).map_err(|e| Failure::Usage(e.to_string()))?;
    let out = ctx.out_or("commitment.bin");
    files::write(&out, c.to_bytes())?;
    println!("wrote {}: {}", out.display(), hex::encode(c.0.to_bytes()));
    Ok(())
}

fn open_cmd(ctx: &Ctx, weights: &Path, index: &[u64], wm: Option<&Path>) -> Result<(), Failure> {
    let pp = ctx.load_params()?;
    let w = files::read_weights(weights)?;
    let dir = ctx.out_or("proofs");
    let mut values = Vec::with_capacity(index.len());
    let wp = wm
        .map(|p| files::read_bytes(p).and_then(|b| Ok(WatermarkedParams::from_bytes(&b)?)))
        .transpose()?;
    for &i in index {
        let proof = match &wp {
            Some(wp) => bltc::tree::open(wp, &w, i),
            None => bltc::tree::open(&pp, &w, i),
        }
        .map_err(|e| Failure::Usage(e.to_string()))?;
        files::write(&dir.join(format!("{i}.proof")), proof.to_bytes())?;
        values.push((i, w.get(i).expect("opened")));
    }
    files::write_values(&dir.join("values.txt"), &values)?;
    println!("wrote {} proofs to {}", index.len(), dir.display());
    Ok(())
}

fn pvk_or_g2(pvk: Option<&str>) -> Result<G2Element, Failure> {
    pvk.map(files::read_pvk)
        .transpose()
        .map(|p| p.unwrap_or_else(G2Element::generator))
}

/// `values.txt` pairs and the matching proof files of a proof directory.
type ProofDir = (Vec<(u64, Scalar)>, Vec<PathProof>);

fn load_proof_dir(dir: &Path) -> Result<ProofDir, Failure> {
    let values = files::read_values(&dir.join("values.txt"))?;
    let proofs = values
        .iter()
        .map(|(i, _)| {
            let bytes = files::read_bytes(&dir.join(format!("{i}.proof")))?;
            Ok(PathProof::from_bytes(&bytes)?)
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    Ok((values, proofs))
}

fn aggregate_cmd(
    ctx: &Ctx,
    dir: &Path,
    commitment: &Path,
    ipa: &Path,
    pvk: Option<&str>,
) -> Result<(), Failure> {
    let pp = ctx.load_params()?;
    let ck = IpaCommitKey::from_bytes(&files::read_bytes(ipa)?)?;
    let c = Commitment::from_bytes(&files::read_bytes(commitment)?)?;
    let pvk = pvk_or_g2(pvk)?;
    let (values, proofs) = load_proof_dir(dir)?;
    let (positions, vals): (Vec<u64>, Vec<Scalar>) = values.into_iter().unzip();
    let inst = AggregationInstance::single_worker(c, positions, vals, pvk)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let proof = aggregate(&pp, &ck, &inst, &proofs).map_err(|e| Failure::Usage(e.to_string()))?;
    let out = ctx.out_or("aggregate.bin");
    let bytes = proof.to_bytes();
    files::write(&out, &bytes)?;
    println!(
        "wrote {}: {} positions, {} group elements, {} bytes",
        out.display(),
        inst.len(),
        proof.element_count(),
        bytes.len()
    );
    Ok(())
}

fn verify_cmd(
    ctx: &Ctx,
    commitment: &Path,
    proof: &Path,
    values: &Path,
    pvk: Option<&str>,
    ipa: Option<&Path>,
) -> Result<(), Failure> {
    let pp = ctx.load_params()?;
    let c = Commitment::from_bytes(&files::read_bytes(commitment)?)?;
    let bytes = files::read_bytes(proof)?;
    let values = files::read_values(values)?;
    let pvk = pvk_or_g2(pvk)?;
    if bytes.starts_with(AGGREGATE_MAGIC) {
        let proof = AggregatedProof::from_bytes(&bytes)?;
        let ipa = ipa.ok_or_else(|| Failure::Usage("aggregated proofs need --ipa".into()))?;
        let ck = IpaCommitKey::from_bytes(&files::read_bytes(ipa)?)?;
        let (positions, vals): (Vec<u64>, Vec<Scalar>) = values.into_iter().unzip();
        let inst = AggregationInstance::single_worker(c, positions, vals, pvk)
            .map_err(|e| Failure::Parse(e.to_string()))?;
        match verify_aggregated_detailed(&pp, &ck, &inst, &proof) {
            Ok(Ok(())) => {
                println!("ok: aggregated proof over {} positions", inst.len());
                Ok(())
            }
            Ok(Err(failure)) => Err(Failure::Verification(format!("failed equation: {failure}"))),
            Err(e) => Err(Failure::Parse(e.to_string())),
        }
    } else if bytes.starts_with(PROOF_MAGIC) {
        let proof = PathProof::from_bytes(&bytes)?;
        let i = proof.position().index();
        let value = values
            .iter()
            .find(|(p, _)| *p == i)
            .map(|(_, v)| *v)
            .ok_or_else(|| Failure::Parse(format!("no value for position {i}")))?;
        let verifier = Verifier::new(&pp, &pvk).map_err(|e| Failure::Parse(e.to_string()))?;
        match verifier.verify(&c, &value, &proof) {
            Ok(true) => {
                println!("ok: position {i}");
                Ok(())
            }
            Ok(false) => Err(Failure::Verification(format!(
                "position {i}: e(C - w*g1, pvk) != prod_j e(x_j, vk_j - i_j*g2)"
            ))),
            Err(e) => Err(Failure::Parse(e.to_string())),
        }
    } else {
        Err(Failure::Parse(format!(
            "{}: unknown proof format",
            proof.display()
        )))
    }
}

fn parse_delta(text: &str) -> Result<UpdateDelta, Failure> {
    let (i, d) = text
        .split_once(':')
        .ok_or_else(|| Failure::Usage(format!("delta {text:?} is not index:value")))?;
    let i = i
        .trim()
        .parse::<u64>()
        .map_err(|_| Failure::Usage(format!("bad index in {text:?}")))?;
    let d = files::parse_scalar(d).map_err(Failure::Usage)?;
    Ok(UpdateDelta::new(i, d))
}

fn update_cmd(
    ctx: &Ctx,
    weights: &Path,
    commitment: &Path,
    deltas: &[String],
    proofs: Option<&Path>,
    wm: Option<&Path>,
) -> Result<(), Failure> {
    let pp = ctx.load_params()?;
    let mut w = files::read_weights(weights)?;
    let mut c = Commitment::from_bytes(&files::read_bytes(commitment)?)?;
    let deltas = deltas
        .iter()
        .map(|d| parse_delta(d))
        .collect::<Result<Vec<_>, _>>()?;
    for d in &deltas {
        c = bltc::tree::update_commitment(&pp, &c, d).map_err(|e| Failure::Usage(e.to_string()))?;
        w.apply_delta(d.position, d.delta)
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    files::write_weights(weights, &w)?;
    let out = ctx.out.clone().unwrap_or_else(|| commitment.to_path_buf());
    files::write(&out, c.to_bytes())?;
    println!(
        "applied {} deltas; commitment {}",
        deltas.len(),
        hex::encode(c.0.to_bytes())
    );

    if let Some(dir) = proofs {
        let (values, mut paths) = load_proof_dir(dir)?;
        let wp = wm
            .map(|p| files::read_bytes(p).and_then(|b| Ok(WatermarkedParams::from_bytes(&b)?)))
            .transpose()?;
        let mut touched = 0;
        for p in &mut paths {
            for d in &deltas {
                touched += match (&wp, p.is_watermarked()) {
                    (Some(wp), true) => update_path(wp, p, d),
                    (None, true) => {
                        return Err(Failure::Usage("watermarked proofs need --wm-params".into()))
                    }
                    _ => update_path(&pp, p, d),
                }
                .map_err(|e| Failure::Usage(e.to_string()))?;
            }
            files::write(
                &dir.join(format!("{}.proof", p.position().index())),
                p.to_bytes(),
            )?;
        }
        let fresh: Vec<(u64, Scalar)> = values
            .iter()
            .map(|(i, _)| (*i, w.get(*i).expect("in range")))
            .collect();
        files::write_values(&dir.join("values.txt"), &fresh)?;
        println!("updated {} proofs ({touched} nodes)", paths.len());
    }
    Ok(())
}

fn params_for(ctx: &Ctx, n: u32, rng: &mut ChaCha20Rng) -> Result<PublicParams, Failure> {
    if let Some(path) = &ctx.params {
        if !path.exists() {
            return Err(Failure::Io(format!("missing params: {}", path.display())));
        }
        let pp = PublicParams::from_bytes(&files::read_bytes(path)?)?;
        if pp.height() == n {
            return Ok(pp);
        }
    }
    PublicParams::generate(n, rng).map_err(|e| Failure::Usage(e.to_string()))
}

fn bench_cmd(
    ctx: &Ctx,
    heights: &[u32],
    u: &[usize],
    trials: u32,
    deltas: usize,
    check: bool,
) -> Result<(), Failure> {
    let mut rng = ctx.rng();
    let config = BenchConfig {
        u_values: u.to_vec(),
        trials,
        seed: ctx.seed.unwrap_or(0),
        deltas,
    };
    let max_u = u.iter().copied().max().unwrap_or(1);
    let mut rows = Vec::new();
    for &n in heights {
        let pp = params_for(ctx, n, &mut rng)?;
        let ck = IpaCommitKey::generate(padded_len(max_u, n), &mut rng).map_err(other)?;
        let mut part = bench::single_threaded(|| {
            bench::run_height(&pp, &ck, &config, |r| {
                eprintln!("{} n={} u={} mean={:.6}s", r.op, r.n, r.u, r.mean_s)
            })
        })
        .map_err(|e| Failure::Usage(e.to_string()))?;
        rows.append(&mut part);
    }
    let out = ctx.out_or("bench.csv");
    let mut buf = Vec::new();
    bench::write_csv(&rows, &mut buf).map_err(other)?;
    files::write(&out, buf)?;
    println!("wrote {} rows to {}", rows.len(), out.display());
    if check {
        let mut failed = 0;
        for c in bench::check_trends(&rows) {
            println!(
                "{} {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            );
            failed += usize::from(!c.passed);
        }
        if failed > 0 {
            return Err(Failure::Verification(format!(
                "{failed} trend checks failed"
            )));
        }
    }
    Ok(())
}

fn simulate_cmd(
    ctx: &Ctx,
    config: &SimulationConfig,
    ledger_path: Option<&Path>,
    worker_id: &str,
) -> Result<(), Failure> {
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed ^ 0x5eed);
    let pp = params_for(ctx, config.n, &mut rng)?;
    let worker = WorkerKeys::generate(worker_id, &mut rng);
    let wmpp = WatermarkedParams::new(&pp, &worker.watermark.secret()).map_err(other)?;
    let ck = IpaCommitKey::generate(
        padded_len(config.spot_check_width.max(1), config.n),
        &mut rng,
    )
    .map_err(other)?;
    let mut ledger = match ledger_path {
        Some(p) => Ledger::open(p).map_err(|e| Failure::Parse(e.to_string()))?,
        None => Ledger::in_memory(),
    };
    match simulate_training(&pp, &wmpp, &ck, &worker, &mut ledger, config) {
        Ok(report) => {
            let out = ctx.out_or("report.json");
            let text = serde_json::to_string_pretty(&report).map_err(other)?;
            files::write(&out, text)?;
            println!(
                "{} epochs verified; owner {}; report {}",
                report.epochs.len(),
                report.adjudicated_worker,
                out.display()
            );
            Ok(())
        }
        Err(SimulationError::VerificationFailed { epoch, reason }) => {
            Err(Failure::Verification(format!("epoch {epoch}: {reason}")))
        }
        Err(SimulationError::Config(m)) => Err(Failure::Usage(m)),
        Err(e) => Err(other(e)),
    }
}
