use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lazylab::gradflow;
use lazylab::io;
use lazylab::kernel;
use lazylab::lab::{self, ExperimentConfig, OUT_ENV};
use lazylab::network::init_params;
use lazylab::verify;
use lazylab::{Error, Result};

#[derive(Parser)]
#[command(name = "lazylab", version, about = "Gradient-flow experiments on wide fully connected networks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML file with ExperimentConfig fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run a single parameter seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: config `out_dir`, then $LAZYLAB_OUT, then ./lazylab-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    quad_order: Option<usize>,
    /// Estimate λ_S from the initial Gram matrices instead of the limiting kernels.
    #[arg(long, global = true)]
    no_kernel: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train one network and write its trace.
    Train {
        /// Width; defaults to the largest configured width.
        #[arg(long)]
        width: Option<usize>,
        /// Dataset CSV to use instead of generating one.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Limiting kernels and λ_S for the configured dataset.
    Kernel {
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Distance of the initial normalized Gram matrices from the limiting kernels.
    Concentration,
    /// Width sweep in the lazy regime.
    LazySuite,
    /// Width sweeps over the configured gamma grid.
    PhaseScan,
    /// Frequencies of the initial-norm bounds.
    CheckInit {
        #[arg(long, default_value_t = 4096)]
        width: usize,
        #[arg(long, default_value_t = 50)]
        seeds: u64,
    },
    /// Acceptance criteria.
    Verify {
        /// Comma-separated criterion ids; all when omitted.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(q) = common.quad_order {
        cfg.quad_order = q;
    }
    if common.no_kernel {
        cfg.use_kernel = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: &ExperimentConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("lazylab-out"))
}

fn dataset(cfg: &ExperimentConfig, path: Option<&Path>) -> Result<lazylab::Dataset> {
    match path {
        Some(p) => io::dataset_from_csv(&fs::read_to_string(p)?),
        None => cfg.dataset(),
    }
}

fn pick_width(cfg: &ExperimentConfig, width: Option<usize>) -> Result<usize> {
    width
        .or_else(|| cfg.widths.last().copied())
        .ok_or_else(|| Error::Config("no width given and the config lists none".into()))
}

/// Outcome of a command: `Err` for hard failures, `Ok(Some(reason))` for a failed gate.
type Gate = Result<Option<String>>;

fn train(cfg: &ExperimentConfig, out: &Path, width: Option<usize>, data: Option<&Path>) -> Gate {
    let m = pick_width(cfg, width)?;
    let sc = cfg.scaling(m)?;
    let act = cfg.activation()?;
    let data = dataset(cfg, data)?;
    let seed = cfg.seeds.first().copied().unwrap_or(0);
    let p0 = init_params(&sc, seed);
    let (lambda, source) = lab::lambda_estimate(cfg, &sc, &data, &act, &p0)?;
    let settings = lab::flow_settings(cfg, &sc, &data, &act, &p0, lambda)?;
    let (p, trace) = gradflow::integrate_flow(&p0, &data, &act, &sc, &settings)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("dataset.csv"), io::dataset_to_csv(&data))?;
    fs::write(out.join("params_init.txt"), io::params_to_text(&p0))?;
    fs::write(out.join("params_final.txt"), io::params_to_text(&p))?;
    fs::write(out.join("trace.csv"), io::trace_to_csv(&trace, sc.depth))?;
    println!(
        "m={m} seed={seed} s={} lambda_S={lambda:e} ({}) R(0)={:e} R(T)={:e} steps={} termination={:?}",
        sc.laziness,
        source.label(),
        trace.initial_loss,
        trace.final_loss(),
        trace.steps,
        trace.termination
    );
    let held = trace.until_ratio(cfg.target_ratio).iter().all(|r| r.bound_ok);
    Ok((!held).then(|| "loss decay bound violated".to_string()))
}

fn kernel_cmd(cfg: &ExperimentConfig, out: &Path, width: Option<usize>, data: Option<&Path>) -> Gate {
    let m = pick_width(cfg, width)?;
    let sc = cfg.scaling(m)?;
    let data = dataset(cfg, data)?;
    let ks = kernel::limiting_kernels(&data, &sc, &cfg.activation()?, &cfg.quadrature())?;
    io::write_kernel_stack(out, &ks)?;
    println!("{}", io::kernel_summary_line(&ks));
    Ok((!(ks.lambda_s > 0.0)).then(|| format!("lambda_S = {:e} is not positive", ks.lambda_s)))
}

fn concentration(cfg: &ExperimentConfig, out: &Path) -> Gate {
    let table = lab::run_concentration(cfg)?;
    fs::create_dir_all(out)?;
    let csv = lab::concentration_to_csv(&table);
    fs::write(out.join("concentration.csv"), &csv)?;
    print!("{csv}");
    let (ok, detail) = verify::judge_concentration(&table, cfg.depth);
    Ok((!ok && cfg.widths.len() >= 2).then(|| format!("concentration trend not met: {detail}")))
}

fn lazy_suite(cfg: &ExperimentConfig, out: &Path) -> Gate {
    let res = lab::run_lazy_suite(cfg)?;
    lab::emit_results(&res, out)?;
    for notice in &res.notices {
        eprintln!("notice: {notice}");
    }
    print!("{}", lab::widths_to_csv(&res));
    if let Some(b) = res.monotone.iter().position(|m| *m == Some(false)) {
        return Ok(Some(format!(
            "median sup RD of block {} is not strictly decreasing in m",
            lab::block_names(cfg.depth)[b]
        )));
    }
    if let Some(w) = res.widths.iter().find(|w| w.decay_held_fraction < 0.9) {
        return Ok(Some(format!(
            "decay bound held in only {:.0}% of cells at m={}",
            100.0 * w.decay_held_fraction,
            w.width
        )));
    }
    Ok(None)
}

fn phase_scan(cfg: &ExperimentConfig, out: &Path) -> Gate {
    let table = lab::run_phase_scan(cfg)?;
    fs::create_dir_all(out)?;
    let csv = lab::phase_to_csv(&table);
    fs::write(out.join("phase.csv"), &csv)?;
    print!("{csv}");
    Ok(table
        .rows
        .iter()
        .find(|r| r.monotone_tail == Some(false))
        .map(|r| format!("lazy row s={} lacks the monotone sup-RD decrease", r.laziness)))
}

fn check_init(cfg: &ExperimentConfig, out: &Path, width: usize, seeds: u64) -> Gate {
    let sc = cfg.scaling(width)?;
    let seeds: Vec<u64> = match cfg.seeds.as_slice() {
        [only] if seeds == 1 => vec![*only],
        _ => (0..seeds).collect(),
    };
    let rep = lab::check_initial_bounds(&sc, &seeds);
    fs::create_dir_all(out)?;
    let csv = lab::init_bounds_to_csv(&rep);
    fs::write(out.join("init_bounds.csv"), &csv)?;
    print!("{csv}");
    if rep.below_width_threshold {
        eprintln!("notice: m={width} is below {}; bounds not gated", lab::INIT_WIDTH_THRESHOLD);
        return Ok(None);
    }
    Ok(rep
        .bounds
        .iter()
        .find(|b| b.fraction() < 0.95)
        .map(|b| format!("{} held in {}/{} draws", b.name, b.hits, b.total)))
}

fn verify_cmd(out: &Path, only: &[u8]) -> Gate {
    let scratch = out.join("verify");
    fs::create_dir_all(&scratch)?;
    let outcomes = verify::run_criteria(only, &scratch, |o| println!("{o}"));
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id.to_string()).collect();
    Ok((!failed.is_empty()).then(|| format!("criteria failed: {}", failed.join(","))))
}

fn run(cli: Cli) -> Gate {
    let cfg = load_config(&cli.common)?;
    let out = out_dir(&cli.common, &cfg);
    match cli.command {
        Command::Train { width, data } => train(&cfg, &out, width, data.as_deref()),
        Command::Kernel { width, data } => kernel_cmd(&cfg, &out, width, data.as_deref()),
        Command::Concentration => concentration(&cfg, &out),
        Command::LazySuite => lazy_suite(&cfg, &out),
        Command::PhaseScan => phase_scan(&cfg, &out),
        Command::CheckInit { width, seeds } => check_init(&cfg, &out, width, seeds),
        Command::Verify { only } => verify_cmd(&out, &only),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(reason)) => {
            eprintln!("lazylab: {reason}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("lazylab: {e}");
            ExitCode::from(2)
        }
    }
}
