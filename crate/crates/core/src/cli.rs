//! The `nldc` command line.
//!
//! Exit codes: 0 success, 1 usage, 2 I/O, 3 format or decode failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::codec;
use crate::error::{Error, Result};
use crate::palette;
use crate::prediction::BlockMode;
use crate::stats;
use crate::synth::{Style, SynthSpec};
use crate::tensor::{self, MAX_BITS, MIN_BITS};
use crate::tiling;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_FORMAT: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "nldc",
    version,
    about = "Near-lossless codec for deep feature tensors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Quantize a .ftz tensor and write a .nldc stream.
    Encode {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        bits: BitsArg,
    },
    /// Decode a .nldc stream to a .ftz tensor.
    Decode {
        input: PathBuf,
        output: PathBuf,
        /// Write the quantized levels (one byte each, channel-major) instead.
        #[arg(long)]
        raw: bool,
    },
    /// Print value entropy and palette/neighbour similarity of a tensor.
    Analyze {
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        threshold: u32,
        #[command(flatten)]
        bits: BitsArg,
        #[arg(long, value_enum, default_value_t = ReportFormat::Markdown)]
        format: ReportFormat,
    },
    /// Write a synthetic activation tensor.
    Synth {
        output: PathBuf,
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long)]
        channels: usize,
        /// relu or leaky
        #[arg(long, default_value = "leaky")]
        style: Style,
        /// Fraction of samples at the spike value.
        #[arg(long, default_value_t = 0.8)]
        rho: f64,
        #[arg(long, default_value_t = 1.0)]
        tail_scale: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Encode every .ftz file of a directory and tabulate the results.
    Bench {
        dir: PathBuf,
        #[command(flatten)]
        bits: BitsArg,
        /// Also write each tensor's tiled matrix as <name>.pgm here.
        #[arg(long)]
        pgm_dir: Option<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct BitsArg {
    /// Quantizer bit depth.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u8).range(MIN_BITS as i64..=MAX_BITS as i64))]
    bits: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        _ => EXIT_FORMAT,
    }
}

/// Entry point of the binary.
pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Encode {
            input,
            output,
            bits,
        } => {
            let t = tensor::load_tensor(&input)?;
            let bytes = codec::encode_tensor(&t, bits.bits)?;
            fs::write(&output, &bytes)?;
            let bpp = codec::measure_bpp(&bytes, t.len())?;
            writeln!(out, "bpp: {bpp:.4}")?;
            writeln!(out, "bytes: {}", bytes.len())?;
        }
        Command::Decode { input, output, raw } => {
            let bytes = fs::read(&input)?;
            let q = codec::decode_tensor(&bytes)?;
            if raw {
                fs::write(&output, q.data())?;
            } else {
                tensor::save_tensor(&output, &tensor::dequantize(&q))?;
            }
            writeln!(
                out,
                "{}x{}x{} samples: {}",
                q.rows(),
                q.cols(),
                q.channels(),
                q.len()
            )?;
        }
        Command::Analyze {
            input,
            threshold,
            bits,
            format,
        } => {
            let t = tensor::load_tensor(&input)?;
            out.write_all(analyze(&t, bits.bits, threshold, format)?.as_bytes())?;
        }
        Command::Synth {
            output,
            rows,
            cols,
            channels,
            style,
            rho,
            tail_scale,
            seed,
        } => {
            let spec = SynthSpec {
                rows,
                cols,
                channels,
                style,
                rho,
                tail_scale,
                seed,
            };
            tensor::save_tensor(&output, &spec.generate()?)?;
            writeln!(out, "wrote {}", output.display())?;
        }
        Command::Bench {
            dir,
            bits,
            pgm_dir,
            csv,
        } => {
            let rows = bench_dir(&dir, bits.bits, pgm_dir.as_deref())?;
            out.write_all(bench_table(&rows).as_bytes())?;
            if let Some(path) = csv {
                fs::write(path, bench_csv(&rows))?;
            }
        }
    }
    Ok(())
}

/// Text report of `analyze`: entropy of the quantized values followed by
/// the similarity table.
pub fn analyze(
    t: &tensor::FeatureTensor,
    q_bits: u8,
    threshold: u32,
    format: ReportFormat,
) -> Result<String> {
    let q = tensor::quantize(t, q_bits)?;
    let entropy = stats::entropy(&stats::histogram(q.data()))?;
    let report = stats::ad_similarity(&q, &palette::extract_palette(q.data()), threshold);
    let mut s = String::new();
    let _ = writeln!(s, "samples: {}", q.len());
    let _ = writeln!(s, "entropy: {entropy:.6} bits");
    let _ = writeln!(s, "threshold: {threshold}");
    s.push_str(&match format {
        ReportFormat::Markdown => report.to_markdown(),
        ReportFormat::Csv => report.to_csv(),
    });
    Ok(s)
}

/// One benchmarked file.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub name: String,
    pub shape: (usize, usize, usize),
    pub bytes: usize,
    pub bpp: f64,
    pub mode_percentages: [f64; 5],
}

/// Encodes one tensor file, optionally exporting its tiled matrix as PGM.
pub fn bench_file(path: &Path, q_bits: u8, pgm_dir: Option<&Path>) -> Result<BenchRow> {
    let t = tensor::load_tensor(path)?;
    let q = tensor::quantize(&t, q_bits)?;
    let output = codec::encode_quantized_with(&q, &codec::EncoderOptions::default())?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    if let Some(dir) = pgm_dir {
        let stem = path.file_stem().unwrap_or_default().to_string_lossy();
        fs::write(dir.join(format!("{stem}.pgm")), tiling::tile(&q).to_pgm())?;
    }
    Ok(BenchRow {
        name,
        shape: (q.rows(), q.cols(), q.channels()),
        bytes: output.bytes.len(),
        bpp: codec::measure_bpp(&output.bytes, q.len())?,
        mode_percentages: output.stats.mode_percentages(),
    })
}

/// Benchmarks every `.ftz` file directly inside `dir`, ordered by file name.
pub fn bench_dir(dir: &Path, q_bits: u8, pgm_dir: Option<&Path>) -> Result<Vec<BenchRow>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "ftz") {
            paths.push(path);
        }
    }
    paths.sort();
    if let Some(d) = pgm_dir {
        fs::create_dir_all(d)?;
    }
    paths
        .par_iter()
        .map(|p| bench_file(p, q_bits, pgm_dir))
        .collect()
}

fn mean_row(rows: &[BenchRow]) -> Option<(f64, f64, [f64; 5])> {
    if rows.is_empty() {
        return None;
    }
    let n = rows.len() as f64;
    let mut modes = [0.0; 5];
    for r in rows {
        for (m, p) in modes.iter_mut().zip(r.mode_percentages) {
            *m += p / n;
        }
    }
    let bytes = rows.iter().map(|r| r.bytes as f64).sum::<f64>() / n;
    let bpp = rows.iter().map(|r| r.bpp).sum::<f64>() / n;
    Some((bpp, bytes, modes))
}

fn mode_header() -> Vec<String> {
    BlockMode::ALL
        .iter()
        .map(|m| format!("{}%", m.name()))
        .collect()
}

/// Markdown table with one row per file and a closing mean row.
pub fn bench_table(rows: &[BenchRow]) -> String {
    let mut header = vec![
        "file".to_string(),
        "shape".into(),
        "bytes".into(),
        "bpp".into(),
    ];
    header.extend(mode_header());
    let mut s = format!(
        "| {} |\n|{}\n",
        header.join(" | "),
        "---|".repeat(header.len())
    );
    let pct = |p: &[f64; 5]| {
        p.iter()
            .map(|v| format!("{v:.2}"))
            .collect::<Vec<_>>()
            .join(" | ")
    };
    for r in rows {
        let (n, m, c) = r.shape;
        let _ = writeln!(
            s,
            "| {} | {n}x{m}x{c} | {} | {:.4} | {} |",
            r.name,
            r.bytes,
            r.bpp,
            pct(&r.mode_percentages)
        );
    }
    if let Some((bpp, bytes, modes)) = mean_row(rows) {
        let _ = writeln!(s, "| mean | | {bytes:.1} | {bpp:.4} | {} |", pct(&modes));
    }
    s
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut header = vec![
        "file".to_string(),
        "rows".into(),
        "cols".into(),
        "channels".into(),
    ];
    header.extend(["bytes".into(), "bpp".into()]);
    header.extend(mode_header());
    let mut s = header.join(",");
    s.push('\n');
    let pct = |p: &[f64; 5]| {
        p.iter()
            .map(|v| format!("{v:.4}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    for r in rows {
        let (n, m, c) = r.shape;
        let _ = writeln!(
            s,
            "{},{n},{m},{c},{},{:.6},{}",
            r.name,
            r.bytes,
            r.bpp,
            pct(&r.mode_percentages)
        );
    }
    if let Some((bpp, bytes, modes)) = mean_row(rows) {
        let _ = writeln!(s, "mean,,,,{bytes:.1},{bpp:.6},{}", pct(&modes));
    }
    s
}
