use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use overcrowd::estimators::fit::PredictionTag;
use overcrowd::geometry::{ny_select, SelectionMethod};
use overcrowd::harness::run::{exit_code_for_error, EXIT_INVALID_CONFIG};
use overcrowd::harness::{self, ExperimentConfig};
use overcrowd::spectra::edelman_cdf;
use overcrowd::{levy_concentration, EntryDistribution, Error, Family};

#[derive(Parser)]
#[command(name = "overcrowd", version, about = "Monte Carlo laboratory for spectral overcrowding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its artifacts.
    Run {
        config: PathBuf,
        /// Override the config's worker count.
        #[arg(long)]
        workers: Option<usize>,
        /// Override the config's trial count.
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Check a config without sampling.
    Validate { config: PathBuf },
    /// Closed-form and analytic reference values.
    Oracle {
        #[command(subcommand)]
        which: Oracle,
    },
    /// Restricted invertibility selection on a matrix read from CSV.
    Select {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        l: usize,
        #[arg(long, value_enum, default_value_t = Method::BruteForce)]
        method: Method,
        /// Seed for length-squared sampling.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the version.
    Version,
}

#[derive(Subcommand)]
enum Oracle {
    /// Limiting Ginibre least singular value CDF at eps.
    Edelman {
        #[arg(long)]
        eps: f64,
    },
    /// Levy concentration function of an entry law.
    Levy {
        /// gaussian | rademacher | uniform | bernoulli:<p>
        #[arg(long)]
        dist: String,
        #[arg(long)]
        eps: f64,
    },
    /// Predicted exponent for a rate tag.
    Exponent {
        #[arg(long, value_enum)]
        tag: Tag,
        #[arg(long)]
        k: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    BruteForce,
    Greedy,
    LengthSquared,
}

#[derive(Clone, Copy, ValueEnum)]
enum Tag {
    IidK2,
    SymGap,
    SmoothOptimal,
}

fn parse_dist(s: &str) -> Result<EntryDistribution, Error> {
    let family = match s {
        "gaussian" => Family::StandardGaussian,
        "rademacher" => Family::Rademacher,
        "uniform" => Family::UniformSymmetric { halfwidth: 1.0 },
        other => match other.strip_prefix("bernoulli:") {
            Some(p) => Family::ShiftedBernoulli {
                p: p.parse().map_err(|_| Error::InvalidArgument(format!("bad bernoulli parameter {p:?}")))?,
            },
            None => return Err(Error::InvalidArgument(format!("unknown distribution {other:?}"))),
        },
    };
    EntryDistribution::new(family)
}

fn fail(e: &Error) -> ExitCode {
    // One line; Display leads with the error kind.
    eprintln!("error: {e}");
    ExitCode::from(exit_code_for_error(e) as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, workers, trials } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(mut c) => {
                    if let Some(w) = workers {
                        c.workers = w;
                    }
                    if let Some(t) = trials {
                        c.trials = t;
                    }
                    c.with_env_overrides()
                }
                Err(e) => return fail(&e),
            };
            match harness::run(&cfg) {
                Ok(out) => {
                    let s = &out.summary;
                    println!(
                        "{}: status {}, verdict {}, artifacts in {}",
                        cfg.experiment.name(),
                        serde_json::to_value(s.status).unwrap_or_default(),
                        serde_json::to_value(s.verdict).unwrap_or_default(),
                        cfg.output_dir.display()
                    );
                    for c in &s.checks {
                        println!("  {} {}: {} (threshold {})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
                    }
                    if let Some(f) = &s.fit {
                        println!("  slope {:.4} +- {:.4} (predicted {})", f.slope, f.slope_stderr, f.predicted_exponent);
                    }
                    if let Some(e) = &s.fit_error {
                        println!("  fit: {e}");
                    }
                    ExitCode::from(s.exit_code() as u8)
                }
                Err(e) => fail(&e),
            }
        }
        Command::Validate { config } => match ExperimentConfig::load(&config) {
            Ok(cfg) => {
                println!("ok: {}", cfg.experiment.name());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_INVALID_CONFIG as u8)
            }
        },
        Command::Oracle { which } => match which {
            Oracle::Edelman { eps } => {
                println!("{}", edelman_cdf(eps));
                ExitCode::SUCCESS
            }
            Oracle::Levy { dist, eps } => match parse_dist(&dist).and_then(|d| levy_concentration(&d, eps)) {
                Ok(p) => {
                    println!("{p}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            },
            Oracle::Exponent { tag, k } => {
                let t = match tag {
                    Tag::IidK2 => PredictionTag::IidK2 { k },
                    Tag::SymGap => PredictionTag::SymGap { k },
                    Tag::SmoothOptimal => PredictionTag::SmoothOptimal { k },
                };
                println!("{}", t.exponent());
                ExitCode::SUCCESS
            }
        },
        Command::Select { matrix, l, method, seed } => {
            let result = std::fs::read_to_string(&matrix)
                .map_err(Error::from)
                .and_then(|text| harness::read_matrix_csv(&text))
                .and_then(|z| {
                    let m = match method {
                        Method::BruteForce => SelectionMethod::BruteForce,
                        Method::Greedy => SelectionMethod::Greedy,
                        Method::LengthSquared => SelectionMethod::LengthSquaredSampling { seed },
                    };
                    ny_select(&z, l, m)
                });
            match result {
                Ok(sel) => {
                    println!("{}", serde_json::to_string_pretty(&sel).expect("selection serializes"));
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Version => {
            println!("overcrowd {}", overcrowd::VERSION);
            ExitCode::SUCCESS
        }
    }
}
