use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use admission_core::harness::{
    gen_hotspot, gen_network, gen_setcover, rows_to_csv, rows_to_json_lines, run_experiment, run_instance, Algorithm,
    AlphaChoice, ExperimentConfig, HotspotParams, Instance, InstanceRun, NetworkGenParams, ReductionInner,
    SetCoverGenParams,
};
use admission_core::oracle::{fractional_opt_admission, integral_opt_admission, opt_multicover};
use admission_core::randomized::Variant;
use admission_core::rational::parse_rational;
use admission_core::{load_network, load_setcover, network_to_json, setcover_to_json, Rational};

#[derive(Parser)]
#[command(name = "admctl", version, about = "Online admission control and set multicover experiments")]
struct Cli {
    /// Seed for generators and randomized trials.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlphaModeArg {
    Oracle,
    Doubling,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Weighted,
    Unweighted,
}

#[derive(Clone, Copy, ValueEnum)]
enum InnerArg {
    Fractional,
    Randomized,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKindArg {
    Integral,
    Fractional,
    Multicover,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportAlgorithm {
    Fractional,
    Randomized,
    Bicriteria,
    Reduction,
}

#[derive(clap::Args, Clone)]
struct AlphaArgs {
    #[arg(long, value_enum, default_value_t = AlphaModeArg::Oracle)]
    alpha_mode: AlphaModeArg,
    /// Oracle value of alpha, e.g. `3/2`; computed by the LP oracle if omitted.
    #[arg(long)]
    alpha: Option<String>,
    /// Skip the offline oracles (bounds are reported as unchecked).
    #[arg(long)]
    no_oracle: bool,
    /// Largest instance the oracles will attempt.
    #[arg(long, default_value_t = admission_core::oracle::DEFAULT_BUDGET)]
    budget: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random network instance.
    GenNetwork {
        #[arg(long)]
        edges: usize,
        #[arg(long, default_value_t = 3)]
        c_max: u64,
        #[arg(long)]
        requests: usize,
        #[arg(long, default_value_t = 1)]
        cost_lo: u64,
        #[arg(long, default_value_t = 16)]
        cost_hi: u64,
        /// Force this excess on edge 0 (the request count is then derived).
        #[arg(long)]
        hotspot: Option<u64>,
    },
    /// Generate a random set-cover instance with feasible demands.
    GenSetcover {
        #[arg(long)]
        elements: usize,
        #[arg(long)]
        sets: usize,
        #[arg(long)]
        demands: usize,
        #[arg(long, default_value_t = 1)]
        cost_lo: u64,
        #[arg(long, default_value_t = 1)]
        cost_hi: u64,
    },
    RunFractional {
        input: PathBuf,
        #[command(flatten)]
        alpha: AlphaArgs,
        /// Omit the decision trace.
        #[arg(long)]
        summary_only: bool,
    },
    RunRandomized {
        input: PathBuf,
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[command(flatten)]
        alpha: AlphaArgs,
        #[arg(long)]
        summary_only: bool,
    },
    RunBicriteria {
        input: PathBuf,
        #[arg(long, default_value = "1/2")]
        epsilon: String,
        #[arg(long)]
        no_oracle: bool,
    },
    RunReduction {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = InnerArg::Fractional)]
        algorithm: InnerArg,
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
        #[command(flatten)]
        alpha: AlphaArgs,
    },
    /// Exact offline optimum.
    Oracle {
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: OracleKindArg,
        #[arg(long, default_value_t = admission_core::oracle::DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Generate instances, run one algorithm on each and emit report rows.
    Report {
        #[arg(long, value_enum)]
        algorithm: ReportAlgorithm,
        #[arg(long, default_value_t = 10)]
        instances: usize,
        /// Edges (network) or elements (set cover).
        #[arg(long, default_value_t = 4)]
        size: usize,
        /// Requests (network) or demands (set cover).
        #[arg(long, default_value_t = 10)]
        length: usize,
        /// Sets per set-cover instance.
        #[arg(long, default_value_t = 6)]
        sets: usize,
        #[arg(long, default_value_t = 3)]
        c_max: u64,
        #[arg(long, default_value_t = 1)]
        cost_lo: u64,
        #[arg(long, default_value_t = 16)]
        cost_hi: u64,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value = "1/2")]
        epsilon: String,
        #[arg(long, value_enum, default_value_t = InnerArg::Fractional)]
        inner: InnerArg,
        #[command(flatten)]
        alpha: AlphaArgs,
        /// Include wall-clock runtimes (reports are then not reproducible).
        #[arg(long)]
        timing: bool,
    },
}

fn read_input(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn rational_arg(text: &str, what: &str) -> Result<Rational> {
    parse_rational(text).with_context(|| format!("invalid {what} {text:?}"))
}

fn apply_alpha(config: &mut ExperimentConfig, args: &AlphaArgs) -> Result<()> {
    config.alpha_mode = match args.alpha_mode {
        AlphaModeArg::Oracle => AlphaChoice::Oracle,
        AlphaModeArg::Doubling => AlphaChoice::Doubling,
    };
    config.alpha = args.alpha.as_deref().map(|a| rational_arg(a, "alpha")).transpose()?;
    config.use_oracle = !args.no_oracle;
    config.budget = args.budget;
    Ok(())
}

fn variant(v: Option<VariantArg>) -> Option<Variant> {
    v.map(|v| match v {
        VariantArg::Weighted => Variant::Weighted,
        VariantArg::Unweighted => Variant::Unweighted,
    })
}

fn network_instance(path: &Path) -> Result<Instance> {
    let (instance, requests) = load_network(&read_input(path)?)?;
    Ok(Instance::Network {
        id: path.display().to_string(),
        instance,
        requests,
    })
}

fn setcover_instance(path: &Path) -> Result<Instance> {
    let (sc, demands) = load_setcover(&read_input(path)?)?;
    Ok(Instance::SetCover {
        id: path.display().to_string(),
        sc,
        demands,
    })
}

/// Output of one command plus whether a hard invariant failed.
struct Emitted {
    text: String,
    failed: bool,
}

fn single_run(run: InstanceRun, format: Format, traces: bool, seeds: &[u64]) -> Result<Emitted> {
    for w in &run.warnings {
        eprintln!("warning: {w}");
    }
    for f in &run.failures {
        eprintln!("invariant violated: {f}");
    }
    let text = match format {
        Format::Csv => rows_to_csv(std::slice::from_ref(&run.row))?,
        Format::Json => {
            let mut out = String::new();
            if traces {
                if seeds.is_empty() {
                    for t in &run.traces {
                        out.push_str(t);
                    }
                } else {
                    for (i, (t, seed)) in run.traces.iter().zip(seeds).enumerate() {
                        out.push_str(&serde_json::to_string(&serde_json::json!({ "trial": i, "seed": seed }))?);
                        out.push('\n');
                        out.push_str(t);
                    }
                }
            }
            out.push_str(&serde_json::to_string(&serde_json::json!({ "summary": run.detail, "row": run.row }))?);
            out.push('\n');
            out
        }
    };
    Ok(Emitted {
        text,
        failed: !run.failures.is_empty(),
    })
}

fn execute(cli: &Cli) -> Result<Emitted> {
    let plain = |text: String| Emitted { text, failed: false };
    match &cli.command {
        Command::GenNetwork {
            edges,
            c_max,
            requests,
            cost_lo,
            cost_hi,
            hotspot,
        } => {
            let (inst, reqs) = match hotspot {
                Some(target) => gen_hotspot(&HotspotParams {
                    m: *edges,
                    c_max: *c_max,
                    target: *target,
                    extra: *requests,
                    cost_lo: *cost_lo,
                    cost_hi: *cost_hi,
                    seed: cli.seed,
                })?,
                None => gen_network(&NetworkGenParams {
                    m: *edges,
                    c_max: *c_max,
                    n_requests: *requests,
                    cost_lo: *cost_lo,
                    cost_hi: *cost_hi,
                    seed: cli.seed,
                })?,
            };
            Ok(plain(network_to_json(&inst, &reqs) + "\n"))
        }
        Command::GenSetcover {
            elements,
            sets,
            demands,
            cost_lo,
            cost_hi,
        } => {
            let (sc, ds) = gen_setcover(&SetCoverGenParams {
                n: *elements,
                m: *sets,
                n_demands: *demands,
                cost_lo: *cost_lo,
                cost_hi: *cost_hi,
                seed: cli.seed,
            })?;
            Ok(plain(setcover_to_json(&sc, &ds) + "\n"))
        }
        Command::RunFractional {
            input,
            alpha,
            summary_only,
        } => {
            let mut config = ExperimentConfig::new(Algorithm::Fractional);
            config.seed = cli.seed;
            apply_alpha(&mut config, alpha)?;
            let run = run_instance(&config, &network_instance(input)?)?;
            single_run(run, cli.format, !summary_only, &[])
        }
        Command::RunRandomized {
            input,
            variant: v,
            trials,
            alpha,
            summary_only,
        } => {
            let mut config = ExperimentConfig::new(Algorithm::Randomized);
            config.seed = cli.seed;
            config.trials = *trials;
            config.variant = variant(*v);
            apply_alpha(&mut config, alpha)?;
            let run = run_instance(&config, &network_instance(input)?)?;
            single_run(run, cli.format, !summary_only, &config.trial_seeds())
        }
        Command::RunBicriteria {
            input,
            epsilon,
            no_oracle,
        } => {
            let mut config = ExperimentConfig::new(Algorithm::Bicriteria);
            config.epsilon = rational_arg(epsilon, "epsilon")?;
            config.use_oracle = !no_oracle;
            let run = run_instance(&config, &setcover_instance(input)?)?;
            single_run(run, cli.format, false, &[])
        }
        Command::RunReduction {
            input,
            algorithm,
            variant: v,
            alpha,
        } => {
            let mut config = ExperimentConfig::new(Algorithm::Reduction);
            config.seed = cli.seed;
            config.variant = variant(*v);
            config.reduction_inner = match algorithm {
                InnerArg::Fractional => ReductionInner::Fractional,
                InnerArg::Randomized => ReductionInner::Randomized,
            };
            apply_alpha(&mut config, alpha)?;
            let run = run_instance(&config, &setcover_instance(input)?)?;
            single_run(run, cli.format, false, &[])
        }
        Command::Oracle { input, kind, budget } => {
            if cli.format == Format::Csv {
                bail!("oracle output is JSON only");
            }
            let text = read_input(input)?;
            let sol = match kind {
                OracleKindArg::Integral => {
                    let (inst, reqs) = load_network(&text)?;
                    integral_opt_admission(&inst, &reqs, *budget)?
                }
                OracleKindArg::Fractional => {
                    let (inst, reqs) = load_network(&text)?;
                    fractional_opt_admission(&inst, &reqs, *budget)?
                }
                OracleKindArg::Multicover => {
                    let (sc, ds) = load_setcover(&text)?;
                    opt_multicover(&sc, &ds, *budget)?
                }
            };
            Ok(plain(sol.to_json() + "\n"))
        }
        Command::Report {
            algorithm,
            instances,
            size,
            length,
            sets,
            c_max,
            cost_lo,
            cost_hi,
            trials,
            epsilon,
            inner,
            alpha,
            timing,
        } => {
            let alg = match algorithm {
                ReportAlgorithm::Fractional => Algorithm::Fractional,
                ReportAlgorithm::Randomized => Algorithm::Randomized,
                ReportAlgorithm::Bicriteria => Algorithm::Bicriteria,
                ReportAlgorithm::Reduction => Algorithm::Reduction,
            };
            let mut config = ExperimentConfig::new(alg);
            config.seed = cli.seed;
            config.trials = *trials;
            config.epsilon = rational_arg(epsilon, "epsilon")?;
            config.timing = *timing;
            config.reduction_inner = match inner {
                InnerArg::Fractional => ReductionInner::Fractional,
                InnerArg::Randomized => ReductionInner::Randomized,
            };
            apply_alpha(&mut config, alpha)?;
            let mut list = Vec::with_capacity(*instances);
            for i in 0..*instances {
                let seed = cli.seed.wrapping_add(i as u64);
                let inst = match alg {
                    Algorithm::Fractional | Algorithm::Randomized => {
                        let (instance, requests) = gen_network(&NetworkGenParams {
                            m: *size,
                            c_max: *c_max,
                            n_requests: *length,
                            cost_lo: *cost_lo,
                            cost_hi: *cost_hi,
                            seed,
                        })?;
                        Instance::Network {
                            id: format!("net-{i:04}"),
                            instance,
                            requests,
                        }
                    }
                    Algorithm::Bicriteria | Algorithm::Reduction => {
                        let unit = alg == Algorithm::Bicriteria;
                        let (sc, demands) = gen_setcover(&SetCoverGenParams {
                            n: *size,
                            m: *sets,
                            n_demands: *length,
                            cost_lo: if unit { 1 } else { *cost_lo },
                            cost_hi: if unit { 1 } else { *cost_hi },
                            seed,
                        })?;
                        Instance::SetCover {
                            id: format!("sc-{i:04}"),
                            sc,
                            demands,
                        }
                    }
                };
                list.push(inst);
            }
            let outcome = run_experiment(&config, &list)?;
            for w in outcome.warnings() {
                eprintln!("warning: {w}");
            }
            let failures = outcome.failures();
            for f in &failures {
                eprintln!("invariant violated: {f}");
            }
            let rows = outcome.rows();
            let text = match cli.format {
                Format::Csv => rows_to_csv(&rows)?,
                Format::Json => rows_to_json_lines(&rows),
            };
            Ok(Emitted {
                text,
                failed: !failures.is_empty(),
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let emitted = match execute(&cli) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let written = match &cli.out {
        Some(path) => fs::write(path, &emitted.text).with_context(|| format!("writing {}", path.display())),
        None => io::stdout()
            .write_all(emitted.text.as_bytes())
            .context("writing stdout"),
    };
    if let Err(e) = written {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    if emitted.failed {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}
