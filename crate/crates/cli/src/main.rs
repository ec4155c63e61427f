//! `hq`: quantize and dequantize vector files, and run the measurement suites.

mod bench;
mod vectors;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hq_core::experiments::{Params, Suite};
use hq_core::{decode_all, dequantize_two_stage, encode, quantize_two_stage_scaled, Mode, QuantConfig};
use rayon::prelude::*;

use vectors::Vectors;

#[derive(Parser)]
#[command(name = "hq", version, about = "Data-oblivious vector quantizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a vector file into concatenated `.hq` payloads.
    Quantize(QuantizeArgs),
    /// Decode `.hq` payloads back into a vector file.
    Dequantize(DequantizeArgs),
    /// Run a measurement suite and write its rows as CSV.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Biased,
    Unbiased,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Biased => Mode::Biased,
            ModeArg::Unbiased => Mode::Unbiased,
        }
    }
}

#[derive(Args)]
struct QuantizeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Index bits per coordinate, 1 to 16.
    #[arg(long)]
    bits: u32,
    #[arg(long, value_enum, default_value = "unbiased")]
    mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Expected vector length; checked against the input.
    #[arg(long)]
    dim: Option<usize>,
    /// Read the input as text, one vector per line.
    #[arg(long)]
    text: bool,
}

#[derive(Args)]
struct DequantizeArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Write the output as text, one vector per line.
    #[arg(long)]
    text: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// One of mse, unbiased, inner-product, rate, oracle.
    suite: Suite,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, value_enum, default_value = "unbiased")]
    mode: ModeArg,
    /// Write CSV here and a table to stdout; without it CSV goes to stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Add a wall-time column. Makes the output nondeterministic.
    #[arg(long)]
    timings: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Quantize(a) => quantize(&a).map(|()| true),
        Command::Dequantize(a) => dequantize(&a).map(|()| true),
        Command::Bench(a) => run_bench(&a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("HQ_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().with_context(|| format!("HQ_THREADS=`{raw}` is not a thread count"))?;
    ensure!(n > 0, "HQ_THREADS must be at least 1");
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn quantize(a: &QuantizeArgs) -> Result<()> {
    let bytes = read(&a.input)?;
    let input = if a.text {
        vectors::parse_text(std::str::from_utf8(&bytes).context("text input is not UTF-8")?)
    } else {
        vectors::parse_binary(&bytes)
    }
    .with_context(|| format!("parsing {}", a.input.display()))?;
    if let Some(dim) = a.dim {
        ensure!(dim == input.dim, "--dim {dim} does not match the input's vector length {}", input.dim);
    }
    let cfg = QuantConfig::new(input.dim, a.bits, a.mode.into())?;
    let payloads = input
        .rows
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let code = quantize_two_stage_scaled(x, &cfg, a.seed, i as u64).with_context(|| format!("vector {i}"))?;
            encode(&code).with_context(|| format!("encoding vector {i}"))
        })
        .collect::<Result<Vec<_>>>()?;
    write(&a.output, &payloads.concat())
}

fn dequantize(a: &DequantizeArgs) -> Result<()> {
    let bytes = read(&a.input)?;
    let codes = decode_all(&bytes).with_context(|| format!("decoding {}", a.input.display()))?;
    if codes.is_empty() {
        bail!("{} holds no payloads", a.input.display());
    }
    let dim = codes[0].config.d_orig();
    if let Some(i) = codes.iter().position(|c| c.config.d_orig() != dim) {
        bail!("payload {i} has length {}, payload 0 has {dim}", codes[i].config.d_orig());
    }
    let rows = codes.par_iter().map(dequantize_two_stage).collect::<Result<Vec<_>, _>>()?;
    let out = Vectors::new(dim, rows)?;
    if a.text {
        write(&a.output, vectors::to_text(&out).as_bytes())
    } else {
        write(&a.output, &vectors::to_binary(&out))
    }
}

fn run_bench(a: &BenchArgs) -> Result<bool> {
    let mut p = Params::for_suite(a.suite, a.seed);
    p.dim = a.dim.unwrap_or(p.dim);
    p.bits = a.bits.unwrap_or(p.bits);
    p.trials = a.trials.unwrap_or(p.trials);
    p.mode = a.mode.into();
    let rows = a.suite.run(&p)?;
    let csv = bench::to_csv(&rows, a.timings)?;
    match &a.csv {
        Some(path) => {
            write(path, &csv)?;
            print!("{}", bench::table(&rows));
        }
        None => print!("{}", String::from_utf8(csv)?),
    }
    Ok(rows.iter().all(|r| r.pass))
}
