use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use nestlab::design::{
    balanced_enumeration, incremental_design, leave_one_out_design, naive_encoding, randomized_design,
    slice_design, ExperimentDesign, SizeRule,
};
use nestlab::harness::{compare_designs, configure_threads, ExperimentConfig, SMOOTHING};
use nestlab::identify::{identify_counts, IdentifyMode, TestConfig};
use nestlab::io::{
    read_json, read_table, write_counts, write_edge_matrix, write_json, DesignFile, ModelFile,
    ObservedTable, PartitionFile,
};
use nestlab::metrics::evaluate;
use nestlab::model::generate_ground_truth;
use nestlab::recovery::{recover_exact, recover_least_squares};
use nestlab::sampling::{allocate_customers, sample_choices, smoothed_probabilities};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

const VIOLATION_EXIT: u8 = 2;

#[derive(Parser)]
#[command(name = "nestlab", version, about = "Assortment experiment designs and nest identification for Nested Logit models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignScheme {
    Balanced,
    Naive,
    Random,
    Loo,
    Incremental,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Noisy,
    Ztheorem,
}

impl From<Mode> for IdentifyMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Exact => IdentifyMode::Exact,
            Mode::Noisy => IdentifyMode::Noisy,
            Mode::Ztheorem => IdentifyMode::ZTheorem,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build an experiment design
    Design {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        base: usize,
        #[arg(long, value_enum, default_value_t = DesignScheme::Balanced)]
        scheme: DesignScheme,
        /// Number of randomized assortments
        #[arg(long = "G", default_value_t = 8)]
        g: usize,
        /// Fixed size of randomized assortments (defaults to n/2)
        #[arg(long)]
        size: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a random ground-truth model
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        no_outside: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample choice counts from a model on a design
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        design: PathBuf,
        /// Total customers, split evenly over the offered assortments
        #[arg(long)]
        customers: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Identify the nest partition from choice counts
    Identify {
        #[arg(long)]
        counts: PathBuf,
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        no_outside: bool,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0.95)]
        beta: f64,
        /// Failure probability of the threshold test
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, value_enum, default_value_t = Mode::Noisy)]
        mode: Mode,
        /// Directory receiving partition.json and edges.csv
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Recover weights and dissimilarities for a partition
    Recover {
        /// Probability or count table
        #[arg(long)]
        probs: PathBuf,
        #[arg(long)]
        partition: PathBuf,
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare an estimated model with the truth
    Evaluate {
        #[arg(long = "true")]
        truth: PathBuf,
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        restricted: Option<PathBuf>,
    },
    /// Run the design-comparison grid
    Compare {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(VIOLATION_EXIT),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_json(value, path).with_context(|| format!("writing {}", path.display()))?,
        None => {
            let mut stdout = io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, value)?;
            writeln!(stdout)?;
        }
    }
    Ok(())
}

fn load_design(path: &Path) -> Result<ExperimentDesign> {
    let file: DesignFile = read_json(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(file.into_design()?)
}

fn build_design(scheme: DesignScheme, n: usize, base: usize, g: usize, size: Option<usize>, seed: u64) -> Result<ExperimentDesign> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match scheme {
        DesignScheme::Balanced => slice_design(&balanced_enumeration(n, base)?),
        DesignScheme::Naive => slice_design(&naive_encoding(n, base)?),
        DesignScheme::Random => {
            let rule = size.map_or(SizeRule::Half, SizeRule::Fixed);
            randomized_design(n, g, rule, &mut rng)?
        }
        DesignScheme::Loo => leave_one_out_design(n)?,
        DesignScheme::Incremental => incremental_design(n, &mut rng)?,
    })
}

fn check_against_design(table: &nestlab::sampling::ChoiceCountTable, design: &ExperimentDesign) -> Result<()> {
    if table.n != design.n() {
        bail!("counts cover {} items but the design has {}", table.n, design.n());
    }
    for row in &table.rows {
        let listed = design.offered().into_iter().any(|(l, s)| l == row.label && *s == row.assortment);
        if !listed {
            bail!("assortment `{}` in the counts does not match the design", row.label);
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    match cli.command {
        Command::Design { n, base, scheme, g, size, seed, out } => {
            let design = build_design(scheme, n, base, g, size, seed)?;
            emit_json(&DesignFile::from(&design), out.as_deref())?;
        }
        Command::Generate { n, no_outside, seed, out } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = generate_ground_truth(n, !no_outside, &mut rng)?;
            emit_json(&ModelFile::from(&model), out.as_deref())?;
        }
        Command::Simulate { model, design, customers, seed, out } => {
            let model = read_json::<ModelFile>(&model)?.into_model()?;
            let design = load_design(&design)?;
            let allocation = allocate_customers(customers, design.offered().len())?;
            let table = sample_choices(&model, &design, &allocation, seed)?;
            match out {
                Some(path) => write_counts(&table, BufWriter::new(File::create(&path)?))?,
                None => write_counts(&table, io::stdout().lock())?,
            }
        }
        Command::Identify { counts, design, no_outside, alpha, beta, delta, mode, out_dir } => {
            let design = load_design(&design)?;
            let ObservedTable::Counts(table) = read_table(&counts)? else {
                bail!("{} is not a count table", counts.display());
            };
            check_against_design(&table, &design)?;
            if table.outside_option == no_outside {
                bail!(
                    "the counts {} outside-option choices",
                    if no_outside { "contain" } else { "lack" }
                );
            }
            let config = TestConfig { alpha, beta, ..TestConfig::default() };
            config.validate()?;
            let id = identify_counts(&table, mode.into(), &config, delta)?;
            std::fs::create_dir_all(&out_dir)?;
            let partition = PartitionFile::from(&id.partition);
            write_json(&partition, out_dir.join("partition.json"))?;
            write_edge_matrix(&id.edges, BufWriter::new(File::create(out_dir.join("edges.csv"))?))?;
            emit_json(&partition, None)?;
            if !matches!(mode, Mode::Noisy) && !id.inconsistencies.is_empty() {
                for [i, j, k] in &id.inconsistencies {
                    eprintln!("inconsistent deductions on items {}, {}, {}", i + 1, j + 1, k + 1);
                }
                return Ok(false);
            }
        }
        Command::Recover { probs, partition, design, out } => {
            let design = load_design(&design)?;
            let partition = read_json::<PartitionFile>(&partition)?.into_partition()?;
            let recovery = match read_table(&probs)? {
                ObservedTable::Probabilities(table) => recover_exact(&table, &partition, Some(&design))?,
                ObservedTable::Counts(table) => {
                    check_against_design(&table, &design)?;
                    recover_least_squares(&smoothed_probabilities(&table, SMOOTHING)?, &partition)?
                }
            };
            emit_json(&ModelFile::from(&recovery.model), out.as_deref())?;
            if !recovery.violations.is_empty() {
                eprintln!("{}", serde_json::to_string(&recovery.violations)?);
                return Ok(false);
            }
        }
        Command::Evaluate { truth, est, restricted } => {
            let truth = read_json::<ModelFile>(&truth)?.into_model()?;
            let est = read_json::<ModelFile>(&est)?.into_model()?;
            let design = restricted.as_deref().map(load_design).transpose()?;
            emit_json(&evaluate(&truth, &est, design.as_ref())?, None)?;
        }
        Command::Compare { config } => {
            let mut config: ExperimentConfig = read_json(&config)?;
            let dir = config.output_dir.take();
            let report = compare_designs(&config)?;
            match dir {
                Some(dir) => {
                    for path in report.write(&dir)? {
                        println!("{}", path.display());
                    }
                }
                None => emit_json(&report.summary, None)?,
            }
        }
    }
    Ok(true)
}
