use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rsma::channel::ChannelDump;
use rsma::constellation::mode_dictionary;
use rsma::entropy::NoiseModel;
use rsma::harness::config::ExperimentConfig;
use rsma::harness::experiment::{ergodic_sweep, large_scale_sweep, rate_region, realization_channels, run_trial};
use rsma::harness::output::{region_csv, sweep_csv, write_outputs, Metadata};
use rsma::layout::{CMatrix, StreamLayout};
use rsma::optimizer::initial_blocks;
use rsma::problem::{Goal, RsmaProblem};
use rsma::rate::{rate_report, RateMethod, Receiver};
use rsma::{Error, Result};

#[derive(Parser)]
#[command(name = "rsma", version, about = "Constellation-constrained RSMA rates and precoder optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_parser = ["exact", "approx"])]
    method: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Rates of a precoder on one channel realization.
    RateEval {
        #[command(flatten)]
        common: Common,
        /// One-based mode number in the dictionary.
        #[arg(long, default_value_t = 1)]
        mode: usize,
        #[arg(long, default_value_t = 0)]
        realization: u64,
        /// JSON list of precoder columns, each a list of [re, im] pairs.
        /// Without it the deterministic initial precoder is used at every SNR.
        #[arg(long)]
        precoder: Option<PathBuf>,
    },
    /// Mode search and optimization on one channel realization.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        realization: u64,
    },
    ErgodicSweep {
        #[command(flatten)]
        common: Common,
    },
    RateRegion {
        #[command(flatten)]
        common: Common,
    },
    LargeScaleSweep {
        #[command(flatten)]
        common: Common,
    },
    /// Prints a mode dictionary as JSON.
    Modes {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 6)]
        r_max_bits: u32,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file(&common.config)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(m) = &common.method {
        cfg.method = if m == "exact" { RateMethod::Exact } else { RateMethod::Approx };
    }
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads: {e}")))?;
    }
    Ok(cfg)
}

fn base_dir(path: &Path) -> Option<&Path> {
    path.parent()
}

fn read_precoder(path: &Path) -> Result<CMatrix> {
    let cols: Vec<Vec<[f64; 2]>> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let n = cols.first().map_or(0, Vec::len);
    if n == 0 || cols.iter().any(|c| c.len() != n) {
        return Err(Error::Dimension("precoder columns must be nonempty and equal length".into()));
    }
    Ok(CMatrix::from_fn(n, cols.len(), |i, j| {
        num_complex::Complex64::new(cols[j][i][0], cols[j][i][1])
    }))
}

fn rate_eval(common: &Common, mode: usize, realization: u64, precoder: Option<&Path>) -> Result<()> {
    let cfg = load(common)?;
    let dict = cfg.dictionary.load(base_dir(&common.config))?;
    let m = dict
        .modes
        .get(mode.wrapping_sub(1))
        .ok_or_else(|| Error::Config(format!("--mode must be in 1..={}", dict.len())))?;
    let channels = realization_channels(&cfg, realization);
    let layout = StreamLayout::single_group(m, cfg.k());
    let noise = NoiseModel::new(1.0)?;
    let points: Vec<(f64, CMatrix)> = match precoder {
        Some(path) => {
            let p = read_precoder(path)?;
            let db = 10.0 * p.norm_squared().log10();
            vec![(db, p)]
        }
        None => {
            let goal = Goal::Wsr { weights: cfg.weights() };
            let problem = RsmaProblem::single(&channels, m, Receiver::Sic, noise, goal)?;
            cfg.snr_db
                .iter()
                .map(|&s| (s, initial_blocks(&problem, cfg.optimizer_for(s, realization).p_t).remove(0)))
                .collect()
        }
    };
    let mut csv = String::from("snr_db,user,r_c,r_p_sic,r_p_sicfree,stderr_c,stderr_p_sic,stderr_p_sicfree\n");
    let mut reports = Vec::new();
    for (snr, p) in &points {
        let rep = rate_report(p, &channels, &layout, cfg.method, noise, Some(cfg.mc))?;
        for (k, u) in rep.users.iter().enumerate() {
            let _ = writeln!(
                csv,
                "{snr},{},{},{},{},{},{},{}",
                k + 1,
                u.r_c,
                u.r_p_sic,
                u.r_p_sicfree,
                u.stderr_c,
                u.stderr_p_sic,
                u.stderr_p_sicfree
            );
        }
        reports.push(rep);
    }
    std::fs::create_dir_all(&common.out_dir)?;
    std::fs::write(
        common.out_dir.join("channels.json"),
        serde_json::to_string_pretty(&ChannelDump::new(&channels, cfg.seed, realization))?,
    )?;
    std::fs::write(common.out_dir.join("rates.json"), serde_json::to_string_pretty(&reports)?)?;
    write_outputs(&common.out_dir, "results", &csv, &Metadata::new("rate-eval", &cfg))
}

fn optimize(common: &Common, realization: u64) -> Result<()> {
    let cfg = load(common)?;
    let dict = cfg.dictionary.load(base_dir(&common.config))?;
    let weights = cfg.weights();
    let mut csv = String::from("snr_db,scheme,objective,mode,common_power_ratio,iterations,converged,user_rates\n");
    let mut trials = Vec::new();
    for &snr in &cfg.snr_db {
        for scheme in cfg.schemes() {
            let groupings = if cfg.large_scale { cfg.grouping.to_vec().into_iter().map(Some).collect() } else { vec![None] };
            for g in groupings {
                let t = run_trial(&cfg, &dict, scheme, g, cfg.objective, &weights, snr, realization)?;
                let label = g.map_or_else(|| scheme.name().to_string(), |g| format!("{}:{}", scheme.name(), g.name()));
                let rates: Vec<String> = t.user_rates.iter().map(f64::to_string).collect();
                let _ = writeln!(
                    csv,
                    "{snr},{label},{},{},{},{},{},{}",
                    t.objective,
                    t.mode,
                    t.common_power_ratio,
                    t.iterations,
                    t.converged,
                    rates.join(";")
                );
                trials.push(t);
            }
        }
    }
    std::fs::create_dir_all(&common.out_dir)?;
    std::fs::write(common.out_dir.join("trials.json"), serde_json::to_string_pretty(&trials)?)?;
    write_outputs(&common.out_dir, "results", &csv, &Metadata::new("optimize", &cfg))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::RateEval {
            common,
            mode,
            realization,
            precoder,
        } => rate_eval(&common, mode, realization, precoder.as_deref()),
        Command::Optimize { common, realization } => optimize(&common, realization),
        Command::ErgodicSweep { common } => {
            let cfg = load(&common)?;
            let rows = ergodic_sweep(&cfg, base_dir(&common.config))?;
            write_outputs(&common.out_dir, "results", &sweep_csv(&rows), &Metadata::new("ergodic-sweep", &cfg))
        }
        Command::RateRegion { common } => {
            let cfg = load(&common)?;
            let rows = rate_region(&cfg, base_dir(&common.config))?;
            write_outputs(&common.out_dir, "results", &region_csv(&rows), &Metadata::new("rate-region", &cfg))
        }
        Command::LargeScaleSweep { common } => {
            let cfg = load(&common)?;
            let rows = large_scale_sweep(&cfg, base_dir(&common.config))?;
            write_outputs(&common.out_dir, "results", &sweep_csv(&rows), &Metadata::new("large-scale-sweep", &cfg))
        }
        Command::Modes { config, k, r_max_bits } => {
            let dict = match config {
                Some(path) => ExperimentConfig::from_file(&path)?.dictionary.load(base_dir(&path))?,
                None => mode_dictionary(k, r_max_bits)?,
            };
            println!("{}", serde_json::to_string_pretty(&dict.to_file_format())?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
