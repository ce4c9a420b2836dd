use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use qcs_core::encode::{bits_required, encode_levels, Encoder, Payload};
use qcs_core::io::{
    matrix_from_bytes, matrix_to_bytes, problem_to_bytes, quantized_from_bytes, quantized_to_bytes, solution_to_bytes,
    QuantizedRecord,
};
use qcs_core::linalg::{lift_vector, max_abs};
use qcs_core::matrices::{
    gen_chirp, gen_chirp_sub, gen_partial_bos, gen_subgaussian, modify_with_u, MeasurementEnsemble, SubGaussian,
    Transform,
};
use qcs_core::quantize::{sigma_delta, MidriseAlphabet};
use qcs_core::recover::{solve_one_stage, OneStageProblem, Variant};
use qcslab::config::ExperimentConfig;
use qcslab::experiments::{run, RunOptions};
use qcslab::output::write_outputs;
use serde_json::json;

#[derive(Parser)]
#[command(name = "qcslab", version, about = "Sigma-delta quantized compressed sensing lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Ensemble {
    Gaussian,
    Bernoulli,
    PartialDft,
    PartialDct,
    PartialDst,
    Chirp,
    ChirpSub,
}

#[derive(Clone, Copy, ValueEnum)]
enum RecoverVariant {
    Standard,
    Buffer,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured experiment and write trials.csv, summary.csv and meta.json.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        paper_scale: bool,
        #[arg(long)]
        force: bool,
    },
    /// Generate a measurement matrix container.
    GenMatrix {
        #[arg(long, value_enum)]
        ensemble: Ensemble,
        #[arg(long, default_value_t = 0)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        n: usize,
        /// Prime for the chirp ensembles.
        #[arg(long)]
        prime: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Premultiply by the noise-shaping factor U of this order.
        #[arg(long)]
        modify_order: Option<usize>,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sigma-delta quantize a JSON vector, or the measurements of a JSON signal.
    Quantize {
        /// JSON array of measurements.
        #[arg(long, conflicts_with = "matrix")]
        input: Option<PathBuf>,
        /// Matrix container; complex measurements are stacked as [Re; Im].
        #[arg(long, requires = "signal")]
        matrix: Option<PathBuf>,
        /// JSON array holding the signal to measure.
        #[arg(long)]
        signal: Option<PathBuf>,
        #[arg(long)]
        r: usize,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// One-stage recovery from a matrix and a quantized record.
    Recover {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        quantized: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, value_enum, default_value = "standard")]
        variant: RecoverVariant,
        #[arg(long)]
        out: PathBuf,
        /// Also write the problem container.
        #[arg(long)]
        problem_out: Option<PathBuf>,
    },
    /// Bernoulli-encode a quantized record into a packed payload.
    Encode {
        #[arg(long)]
        quantized: PathBuf,
        #[arg(long)]
        l: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn read_vector(path: &Path) -> Result<Vec<f64>> {
    serde_json::from_slice(&read(path)?).with_context(|| format!("{} is not a JSON array of numbers", path.display()))
}

fn measurements(a: &MeasurementEnsemble, x: &[f64]) -> Result<(Vec<f64>, usize)> {
    if a.is_complex() {
        Ok((lift_vector(&a.measure(x)?), 2))
    } else {
        Ok((a.measure_real(x)?, 1))
    }
}

fn quantize_channels(y: &[f64], channels: usize, r: usize, delta: f64) -> Result<QuantizedRecord> {
    let alphabet = MidriseAlphabet::with_headroom(delta, max_abs(y), r)?;
    let mut levels = Vec::with_capacity(y.len());
    let mut overload = false;
    for ch in y.chunks(y.len() / channels) {
        let t = sigma_delta(ch, r, &alphabet)?;
        overload |= t.overload_flag;
        levels.extend(t.levels);
    }
    if overload {
        eprintln!("warning: sigma-delta state exceeded delta/2");
    }
    Ok(QuantizedRecord { alphabet, r, levels })
}

fn gen_matrix(
    ensemble: Ensemble,
    m: usize,
    n: usize,
    prime: Option<u64>,
    seed: u64,
) -> Result<MeasurementEnsemble> {
    let need_prime = || prime.context("--prime is required for chirp ensembles");
    Ok(match ensemble {
        Ensemble::Gaussian => gen_subgaussian(m, n, seed, SubGaussian::Gaussian)?,
        Ensemble::Bernoulli => gen_subgaussian(m, n, seed, SubGaussian::Bernoulli)?,
        Ensemble::PartialDft => gen_partial_bos(m, n, seed, Transform::Dft)?,
        Ensemble::PartialDct => gen_partial_bos(m, n, seed, Transform::Dct)?,
        Ensemble::PartialDst => gen_partial_bos(m, n, seed, Transform::Dst)?,
        Ensemble::Chirp => gen_chirp(need_prime()?)?,
        Ensemble::ChirpSub => gen_chirp_sub(need_prime()?)?,
    })
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Experiment {
            config,
            out,
            paper_scale,
            force,
        } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let start = Instant::now();
            let result = run(&cfg, RunOptions { paper_scale, force })?;
            write_outputs(&out, &result, start.elapsed().as_secs_f64())?;
            for (r, fit) in &result.slopes {
                println!("r={r} slope={:.4} r2={:.4}", fit.slope, fit.r2);
            }
        }
        Command::GenMatrix {
            ensemble,
            m,
            n,
            prime,
            seed,
            modify_order,
            delta,
            eps,
            out,
        } => {
            let mut a = gen_matrix(ensemble, m, n, prime, seed)?;
            if let Some(r) = modify_order {
                a = modify_with_u(&a, r, delta, eps)?;
            }
            write(&out, &matrix_to_bytes(&a))?;
            println!("{}", json!({ "m": a.m, "n": a.n, "complex": a.is_complex() }));
        }
        Command::Quantize {
            input,
            matrix,
            signal,
            r,
            delta,
            out,
        } => {
            let (y, channels) = match (input, matrix, signal) {
                (Some(p), None, None) => (read_vector(&p)?, 1),
                (None, Some(a), Some(x)) => measurements(&matrix_from_bytes(&read(&a)?)?, &read_vector(&x)?)?,
                _ => bail!("give either --input or both --matrix and --signal"),
            };
            if y.is_empty() {
                bail!("nothing to quantize");
            }
            let rec = quantize_channels(&y, channels, r, delta)?;
            write(&out, &quantized_to_bytes(&rec))?;
            println!("{}", json!({ "len": rec.levels.len(), "levels_per_side": rec.alphabet.levels_per_side }));
        }
        Command::Recover {
            matrix,
            quantized,
            noise,
            variant,
            out,
            problem_out,
        } => {
            let a = matrix_from_bytes(&read(&matrix)?)?;
            let q = quantized_from_bytes(&read(&quantized)?)?;
            let channels = if a.is_complex() { 2 } else { 1 };
            let variant = match variant {
                RecoverVariant::Standard => Variant::Standard,
                RecoverVariant::Buffer => Variant::Buffer,
            };
            let p = OneStageProblem::new(
                a.entries.lifted(),
                q.values(),
                q.r,
                channels,
                q.alphabet.delta,
                noise,
                variant,
            )?;
            if let Some(path) = problem_out {
                write(&path, &problem_to_bytes(&p))?;
            }
            let s = solve_one_stage(&p)?;
            write(&out, &solution_to_bytes(&s))?;
            println!(
                "{}",
                json!({ "objective": s.objective, "iterations": s.iterations, "converged": s.converged, "gap": s.gap })
            );
        }
        Command::Encode { quantized, l, seed, out } => {
            let q = quantized_from_bytes(&read(&quantized)?)?;
            let enc = Encoder::new(l, q.levels.len(), q.r, seed)?;
            let payload = Payload {
                l,
                m: enc.m,
                r: q.r,
                k: q.alphabet.levels_per_side,
                delta: q.alphabet.delta,
                seed,
                values: encode_levels(&enc, &q.levels)?,
            };
            let bytes = payload.to_bytes()?;
            write(&out, &bytes)?;
            println!(
                "{}",
                json!({ "bits": bits_required(l, enc.m, q.r, payload.k), "bytes": bytes.len() })
            );
        }
    }
    Ok(())
}
