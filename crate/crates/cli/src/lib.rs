//! Command implementations behind the `relsynth` binary.
//!
//! Each `cmd_*` function returns `Ok(())` or an error; [`run`] maps errors to
//! exit status 2.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use relsynth::analysis::diversity::diversity_report;
use relsynth::analysis::powerlaw::fit_power_law;
use relsynth::analysis::profile::{profile_generation, write_profile_csv};
use relsynth::corpus::{build_corpus, write_corpus, DEFAULT_CONTEXT_LEN, DEFAULT_WIDTH};
use relsynth::io::{read_database, write_database, DbMeta, OutputLayout};
use relsynth::{generate_database, split_seed, Error, GenConfig, RelationalDatabase, Result};
use serde_json::json;

/// Environment variable capping the number of generation workers.
pub const THREADS_ENV: &str = "PLURELGEN_THREADS";

#[derive(Debug, Parser)]
#[command(name = "relsynth", version, about = "Synthetic relational database generator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate databases under <out>/db_<i>.
    Generate {
        /// TOML config; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        num_dbs: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample masked-cell contexts from generated databases into a JSONL file.
    Corpus {
        /// Database directories, or roots containing db_* directories.
        #[arg(long = "db", required = true, num_args = 1..)]
        dbs: Vec<PathBuf>,
        #[arg(long)]
        tokens: usize,
        #[arg(long, default_value_t = DEFAULT_CONTEXT_LEN)]
        context_len: usize,
        #[arg(long, default_value_t = DEFAULT_WIDTH)]
        width: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a JSON diversity report over one or more databases.
    Stats {
        #[arg(long = "db", required = true, num_args = 1..)]
        dbs: Vec<PathBuf>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Fit L(x) = A x^-alpha + C to a CSV with columns x,loss.
    Fit {
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time generation at fixed table counts and write a CSV.
    Profile {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "10,20,40")]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the default config as TOML.
    DefaultConfig {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn load_config(path: Option<&Path>) -> Result<GenConfig> {
    let config = match path {
        Some(p) => GenConfig::from_path(p)?,
        None => GenConfig::default(),
    };
    config.validate()?;
    Ok(config)
}

/// Worker count: `PLURELGEN_THREADS` if set and positive, else all cores.
pub fn worker_count() -> Result<usize> {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(cores),
    }
}

pub fn cmd_generate(config: Option<&Path>, seed: u64, num_dbs: usize, out: &Path) -> Result<()> {
    let config = load_config(config)?;
    if num_dbs == 0 {
        return Ok(());
    }
    fs::create_dir_all(out).map_err(io_err(out))?;
    let layout = OutputLayout::new(out);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count()?)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        (0..num_dbs).into_par_iter().try_for_each(|i| {
            let db_seed = split_seed(seed, i as u64);
            let db = generate_database(&config, db_seed)?;
            if db.fk_violations() != 0 {
                return Err(Error::Structural(format!("db_{i} has dangling foreign keys")));
            }
            let meta = DbMeta {
                index: i,
                master_seed: seed,
                db_seed,
                null_fraction: db.null_fraction,
                config: config.clone(),
            };
            write_database(&db, &meta, &layout.db_dir(i))
        })
    })
}

/// Expands each path to database directories: a directory holding
/// `meta.json` is a database, otherwise its `db_<i>` children are taken in
/// index order.
pub fn resolve_db_dirs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for path in paths {
        if path.join("meta.json").is_file() {
            out.push(path.clone());
            continue;
        }
        let mut found: Vec<(usize, PathBuf)> = fs::read_dir(path)
            .map_err(io_err(path))?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                let index = name.strip_prefix("db_")?.parse().ok()?;
                e.path().join("meta.json").is_file().then(|| (index, e.path()))
            })
            .collect();
        if found.is_empty() {
            return Err(Error::Usage(format!("no databases found under {}", path.display())));
        }
        found.sort();
        out.extend(found.into_iter().map(|(_, p)| p));
    }
    Ok(out)
}

fn load_databases(paths: &[PathBuf]) -> Result<Vec<RelationalDatabase>> {
    resolve_db_dirs(paths)?.iter().map(|d| read_database(d)).collect()
}

/// Returns the number of tokens written.
pub fn cmd_corpus(dbs: &[PathBuf], tokens: usize, context_len: usize, width: usize, seed: u64, out: &Path) -> Result<usize> {
    if context_len == 0 || width == 0 {
        return Err(Error::Usage("context length and width must be positive".into()));
    }
    let dbs = load_databases(dbs)?;
    let builder = build_corpus(&dbs, tokens, context_len, width, seed)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let file = fs::File::create(out).map_err(io_err(out))?;
    let mut writer = BufWriter::new(file);
    let total = write_corpus(builder, &mut writer)?;
    writer.flush().map_err(io_err(out))?;
    Ok(total)
}

pub fn cmd_stats(dbs: &[PathBuf], report: &Path) -> Result<()> {
    let dirs = resolve_db_dirs(dbs)?;
    let loaded = dirs.iter().map(|d| read_database(d)).collect::<Result<Vec<_>>>()?;
    let nulls: Vec<_> = loaded
        .iter()
        .map(|db| {
            let cells = db.feature_cell_count();
            json!({
                "tables": db.tables.len(),
                "feature_cells": cells,
                "null_cells": db.null_count(),
                "target_null_fraction": db.null_fraction,
            })
        })
        .collect();
    let body = json!({
        "databases": dirs.iter().map(|d| d.display().to_string()).collect::<Vec<_>>(),
        "sizes": nulls,
        "diversity": diversity_report(&loaded),
    });
    let text = serde_json::to_string_pretty(&body).map_err(|e| Error::Usage(e.to_string()))?;
    fs::write(report, text + "\n").map_err(io_err(report))
}

/// Reads `x,loss` pairs; a header row is required.
pub fn read_points(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let bad = |m: String| Error::Format {
        path: path.to_path_buf(),
        message: m,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| bad(format!("missing column {name:?}")))
    };
    let (xi, li) = (col("x")?, col("loss")?);
    let (mut x, mut loss) = (Vec::new(), Vec::new());
    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            record
                .get(i)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| bad(format!("row {}: not a number", n + 2)))
        };
        x.push(num(xi)?);
        loss.push(num(li)?);
    }
    Ok((x, loss))
}

pub fn cmd_fit(points: &Path, out: &Path) -> Result<()> {
    let (x, loss) = read_points(points)?;
    let fit = fit_power_law(&x, &loss)?;
    let text = serde_json::to_string_pretty(&fit).map_err(|e| Error::Usage(e.to_string()))?;
    fs::write(out, text + "\n").map_err(io_err(out))
}

pub fn cmd_profile(config: Option<&Path>, counts: &[usize], repeats: usize, seed: u64, out: &Path) -> Result<()> {
    let config = load_config(config)?;
    if counts.is_empty() {
        return Err(Error::Usage("at least one table count is required".into()));
    }
    let rows = profile_generation(&config, counts, repeats, seed)?;
    let file = fs::File::create(out).map_err(io_err(out))?;
    write_profile_csv(&rows, file)
}

pub fn cmd_default_config(out: Option<&Path>) -> Result<()> {
    let text = GenConfig::default().to_toml_string();
    match out {
        Some(p) => fs::write(p, text).map_err(io_err(p)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Runs a parsed command; returns the process exit status.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Generate { config, seed, num_dbs, out } => cmd_generate(config.as_deref(), *seed, *num_dbs, out),
        Command::Corpus {
            dbs,
            tokens,
            context_len,
            width,
            seed,
            out,
        } => cmd_corpus(dbs, *tokens, *context_len, *width, *seed, out).map(|n| println!("emitted {n} tokens")),
        Command::Stats { dbs, report } => cmd_stats(dbs, report),
        Command::Fit { points, out } => cmd_fit(points, out),
        Command::Profile {
            config,
            counts,
            repeats,
            seed,
            out,
        } => cmd_profile(config.as_deref(), counts, *repeats, *seed, out),
        Command::DefaultConfig { out } => cmd_default_config(out.as_deref()),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("relsynth: {e}");
            2
        }
    }
}
