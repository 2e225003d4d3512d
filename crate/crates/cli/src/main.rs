use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use apet::compression::{DEFAULT_BASIS_M, DEFAULT_RIDGE_REL};
use apet::eval::{evaluate, mse_entropy_bound, BaselineKind, EntropyBoundInput, SyntheticKind, SyntheticSpec};
use apet::io::{self, MatrixFormat};
use apet::sampling::DEFAULT_DC_PERCENTILE;
use apet::{ApetConfig, ApetError, ErrorKind, Keep, MergeMode, Sampler, TokenMatrix};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "apet", version, about = "Approximation-error guided token compression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress a token matrix to K tokens.
    Compress(CompressArgs),
    /// Emit the per-token approximation error as `index,residual` csv.
    Score(ScoreArgs),
    /// Emit the selected basis indices, one per line.
    Sample(SampleArgs),
    /// Generate a synthetic token matrix.
    Synth(SynthArgs),
    /// Compare compression against baseline selectors over a seed range.
    Eval(EvalArgs),
    /// Print the entropy lower bound on per-dimension reconstruction MSE.
    Bound(BoundArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Tokm,
    Csv,
}

impl From<FormatArg> for MatrixFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Tokm => MatrixFormat::Tokm,
            FormatArg::Csv => MatrixFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerArg {
    Fps,
    Dpc,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum MergeArg {
    Mean,
    Drop,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Lowrank,
    Outliers,
    Clusters,
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "tokm")]
    format: FormatArg,
}

impl InputArgs {
    fn load(&self) -> apet::Result<TokenMatrix> {
        io::read_matrix(&self.input, self.format.into())
    }
}

#[derive(Args)]
struct SamplerArgs {
    #[arg(long, value_enum, default_value = "fps")]
    sampler: SamplerArg,
    #[arg(long, default_value_t = DEFAULT_DC_PERCENTILE)]
    dc_percentile: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SamplerArgs {
    fn sampler(&self) -> Sampler {
        match self.sampler {
            SamplerArg::Fps => Sampler::Fps,
            SamplerArg::Dpc => Sampler::Dpc {
                dc_percentile: self.dc_percentile,
            },
            SamplerArg::Random => Sampler::Random,
        }
    }
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("budget").required(true).args(["keep", "ratio"]))]
struct CompressArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    keep: Option<usize>,
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_BASIS_M)]
    basis_m: usize,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long, default_value_t = DEFAULT_RIDGE_REL)]
    ridge: f64,
    #[arg(long, value_enum, default_value = "mean")]
    merge: MergeArg,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = DEFAULT_BASIS_M)]
    basis_m: usize,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long, default_value_t = DEFAULT_RIDGE_REL)]
    ridge: f64,
    /// Write to a file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = DEFAULT_BASIS_M)]
    m: usize,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 5)]
    rank: usize,
    #[arg(long, default_value_t = 0)]
    outliers: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 10.0)]
    outlier_scale: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "tokm")]
    format: FormatArg,
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    keep: usize,
    #[arg(long, default_value_t = DEFAULT_BASIS_M)]
    basis_m: usize,
    #[arg(long, value_delimiter = ',', default_value = "random,norm,stride")]
    baselines: Vec<String>,
    /// Inclusive range `S0..S1`, or a single seed.
    #[arg(long, default_value = "0..9")]
    seeds: String,
    #[arg(long, default_value_t = DEFAULT_RIDGE_REL)]
    ridge: f64,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct BoundArgs {
    /// Conditional entropy in nats.
    #[arg(long, allow_hyphen_values = true)]
    h_cond: f64,
    #[arg(long)]
    dim: usize,
}

fn parse_seeds(s: &str) -> apet::Result<Vec<u64>> {
    let bad = || ApetError::InvalidArgument(format!("seed range {s:?} is not S0..S1"));
    match s.split_once("..") {
        Some((a, b)) => {
            let lo: u64 = a.trim().parse().map_err(|_| bad())?;
            let hi: u64 = b.trim().parse().map_err(|_| bad())?;
            if lo > hi {
                return Err(bad());
            }
            Ok((lo..=hi).collect())
        }
        None => Ok(vec![s.trim().parse().map_err(|_| bad())?]),
    }
}

fn write_text(path: Option<&PathBuf>, text: &str) -> apet::Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| ApetError::Io {
            path: p.clone(),
            source: e,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| ApetError::Io {
                path: "<stdout>".into(),
                source: e,
            })
        }
    }
}

fn run(cli: Cli) -> apet::Result<()> {
    match cli.command {
        Command::Compress(a) => {
            let x = a.input.load()?;
            let keep = match (a.keep, a.ratio) {
                (Some(k), _) => Keep::Count(k),
                (None, Some(r)) => Keep::Ratio(r),
                (None, None) => unreachable!("clap enforces the budget group"),
            };
            let cfg = ApetConfig {
                keep,
                basis_m: a.basis_m,
                sampler: a.sampler.sampler(),
                ridge_rel: a.ridge,
                merge: match a.merge {
                    MergeArg::Mean => MergeMode::Mean,
                    MergeArg::Drop => MergeMode::Drop,
                },
                seed: a.sampler.seed,
            };
            let (out, report) = apet::compress(&x, &cfg)?;
            io::write_matrix(&a.output, a.input.format.into(), &out)?;
            if let Some(p) = &a.report {
                io::write_report(p, &report)?;
            }
            let t = report.timings;
            eprintln!(
                "compressed {} -> {} tokens (sample {:?}, fit {:?}, select {:?}, merge {:?})",
                report.n, report.k, t.sample, t.fit, t.select_and_assign, t.merge
            );
        }
        Command::Score(a) => {
            let x = a.input.load()?;
            let basis = a.sampler.sampler().sample(&x, a.basis_m, a.sampler.seed)?;
            let approx = apet::fit_basis(&x, &basis, a.ridge)?;
            let mut text = String::from("index,residual\n");
            for (i, r) in approx.residuals.iter().enumerate() {
                text.push_str(&format!("{i},{r}\n"));
            }
            write_text(a.output.as_ref(), &text)?;
        }
        Command::Sample(a) => {
            let x = a.input.load()?;
            let basis = a.sampler.sampler().sample(&x, a.m, a.sampler.seed)?;
            if basis.degenerate {
                eprintln!("warning: all tokens identical; basis falls back to the first {} indices", a.m);
            }
            let text: String = basis.indices.iter().map(|i| format!("{i}\n")).collect();
            write_text(a.output.as_ref(), &text)?;
        }
        Command::Synth(a) => {
            let spec = SyntheticSpec {
                kind: match a.kind {
                    KindArg::Lowrank => SyntheticKind::LowRank,
                    KindArg::Outliers => SyntheticKind::Outliers,
                    KindArg::Clusters => SyntheticKind::Clusters,
                },
                n: a.n,
                d: a.d,
                rank: a.rank,
                outliers: a.outliers,
                sigma: a.sigma,
                outlier_scale: a.outlier_scale,
                seed: a.seed,
            };
            let (x, truth) = apet::eval::gen_synthetic(&spec)?;
            io::write_matrix(&a.output, a.format.into(), &x)?;
            if let Some(p) = &a.truth {
                io::write_indices(p, truth.as_deref().unwrap_or(&[]))?;
            }
        }
        Command::Eval(a) => {
            let x = a.input.load()?;
            let truth = a.truth.as_ref().map(io::read_indices).transpose()?;
            let baselines = a
                .baselines
                .iter()
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<BaselineKind>())
                .collect::<apet::Result<Vec<_>>>()?;
            let seeds = parse_seeds(&a.seeds)?;
            let cfg = ApetConfig {
                basis_m: a.basis_m,
                ridge_rel: a.ridge,
                ..ApetConfig::new(Keep::Count(a.keep))
            };
            let result = evaluate(&x, truth.as_deref(), &cfg, &baselines, &seeds)?;
            io::write_json(&a.report, &result)?;
            for m in &result.methods {
                let recall = m.mean_recall.map(|r| format!("{r:.4}")).unwrap_or_else(|| "-".into());
                eprintln!(
                    "{:>8}  rel_err {:.6}  recall {}  time {:?}",
                    m.method, m.mean_relative_error, recall, m.wall_time
                );
            }
        }
        Command::Bound(a) => {
            let inp = EntropyBoundInput::new(a.h_cond, a.dim)?;
            println!("{}", mse_entropy_bound(&inp));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Usage => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numeric => 4,
            })
        }
    }
}
