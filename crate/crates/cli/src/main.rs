use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use symcloud_cli::config::RunConfig;
use symcloud_cli::records::{write_jsonl, Meta};
use symcloud_cli::{pipeline, plot, xyz, CliError};
use symcloud_core::metrics::MetricKind;

#[derive(Parser)]
#[command(
    name = "symcloud",
    version,
    about = "Point-cloud symmetry detection, score-based symmetry sampling, part assembly, and shape metrics"
)]
struct Cli {
    /// Run configuration file (flat `key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Cd,
    Emd,
}

impl From<Metric> for MetricKind {
    fn from(m: Metric) -> Self {
        match m {
            Metric::Cd => MetricKind::ChamferDistance,
            Metric::Emd => MetricKind::EarthMovers,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Detect per-part symmetry groups and write symmetry records.
    Detect {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract fundamental-domain clouds named by symmetry records.
    Fd {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        syms: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct shapes by applying recorded groups to fundamental domains.
    Reconstruct {
        #[arg(long)]
        fd: PathBuf,
        #[arg(long)]
        syms: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Symmetry discrepancy index per shape (default mirror) or per part
    /// (recorded symmetries).
    Sdi {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, conflicts_with = "default_mirror")]
        syms: Option<PathBuf>,
        /// Score against the vertical bisector mirror.
        #[arg(long)]
        default_mirror: bool,
        #[arg(long, value_enum)]
        metric: Metric,
        /// Optional JSONL output of the per-record reports.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample generator sets from recorded symmetries.
    SampleSym {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit per-part assemblers mapping canonical parts onto placed parts.
    FitAssemblers {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        canon: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compose shapes from canonical parts and recorded assemblers.
    Assemble {
        #[arg(long)]
        parts: PathBuf,
        #[arg(long)]
        asm: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// 1-nearest-neighbor accuracy between two shape directories.
    #[command(name = "eval-1nna")]
    Eval1nna {
        #[arg(long)]
        gen: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long, value_enum)]
        metric: Metric,
    },
    /// Resample every part to the batch mean count.
    Preprocess {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render three orthographic projections of one cloud as SVG.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match cli.command {
        Command::Detect { input, out } => {
            let n = pipeline::detect_dir(&input, &out, &cfg)?;
            println!("wrote {n} symmetry records to {}", out.display());
        }
        Command::Fd { input, syms, out } => {
            let n = pipeline::fd_dir(&input, &syms, &out, &cfg)?;
            println!("wrote {n} fundamental-domain clouds to {}", out.display());
        }
        Command::Reconstruct { fd, syms, out } => {
            let n = pipeline::reconstruct_dir(&fd, &syms, &out, &cfg)?;
            println!("wrote {n} reconstructions to {}", out.display());
        }
        Command::Sdi {
            input,
            syms,
            default_mirror,
            metric,
            out,
        } => {
            if syms.is_none() && !default_mirror {
                return Err(CliError::new("sdi needs --syms or --default-mirror"));
            }
            let records = pipeline::sdi_dir(&input, syms.as_deref(), metric.into(), &cfg)?;
            print!("{}", pipeline::sdi_summary(&records));
            if let Some(out) = out {
                write_jsonl(&out, &Meta::new("sdi", &cfg), &records)?;
            }
        }
        Command::SampleSym { db, n, out } => {
            let written = pipeline::sample_sym(&db, n, &out, &cfg)?;
            println!("wrote {written} sampled generator sets to {}", out.display());
        }
        Command::FitAssemblers { input, canon, out } => {
            let n = pipeline::fit_assemblers_dir(&input, &canon, &out, &cfg)?;
            println!("wrote {n} assembler records to {}", out.display());
        }
        Command::Assemble { parts, asm, out } => {
            let n = pipeline::assemble_dir(&parts, &asm, &out, &cfg)?;
            println!("wrote {n} composed shapes to {}", out.display());
        }
        Command::Eval1nna {
            gen,
            reference,
            metric,
        } => {
            let acc = pipeline::eval_1nna_dirs(&gen, &reference, metric.into(), &cfg)?;
            println!("1-NNA: {acc:.2}%");
        }
        Command::Preprocess { input, out } => {
            let n = pipeline::preprocess_dir(&input, &out, &cfg)?;
            println!("wrote {n} preprocessed shapes to {}", out.display());
        }
        Command::Plot { input, out } => {
            let cloud = xyz::read_xyz(&input)?;
            plot::write_svg(&out, &cloud)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Single machine-parsable line on stderr.
            eprintln!("{}", serde_json::json!({ "error": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
