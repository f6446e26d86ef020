use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rank1_vls::consensus::fill_u_errors;
use rank1_vls::lab::{emit_figure_data, records_from_csv, records_to_csv};
use rank1_vls::spectral::{diag_bound, family_label};
use rank1_vls::{
    generate_family, init_state, run, run_experiment, sample_instance, spectral_report, theorem2_bound,
    Error, ExperimentConfig, Family, Figure, Init, RankOneInstance, Result, RevealedGraph, SpectralReport,
    StopRule, DEFAULT_SEED,
};

#[derive(Parser)]
#[command(name = "rank1-vls", version, about = "Vertex least squares for rank-one matrix completion")]
struct Cli {
    /// Seed for every random draw. Overrides the seed in an experiment config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trial and write its trajectory as CSV.
    Simulate(SimulateArgs),
    /// Spectral report of the limit matrix of one or more instances.
    Spectrum(SpectrumArgs),
    /// Closed-form rate and eigenvalue bounds for given n, Δ, b.
    Bound(BoundArgs),
    /// Run a Monte Carlo sweep from a TOML config and write trial records.
    Experiment(ExperimentArgs),
    /// Aggregate trial records into plot-ready CSV.
    Figure(FigureArgs),
}

#[derive(Args)]
struct InstanceArgs {
    /// Graph family (line, star, grid2d, grid3d, complete).
    #[arg(long, default_value = "line")]
    family: Family,
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Factor band: α, β and the initial x, y are drawn from [b, 1/b].
    #[arg(long, default_value_t = 0.3)]
    b: f64,
    /// Edge-list file replacing the family graph.
    #[arg(long, conflicts_with = "instance")]
    graph: Option<PathBuf>,
    /// Instance JSON file; replaces family, n, b and graph.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Write the instance used as JSON.
    #[arg(long)]
    save_instance: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: InstanceArgs,
    #[arg(long, default_value_t = 1_000_000)]
    max_iters: u64,
    #[arg(long, default_value_t = 1e-16)]
    cost_tol: f64,
    /// Stop when the relative spread of u falls to this value.
    #[arg(long)]
    consensus_tol: Option<f64>,
    /// Record every k-th iteration.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    source: InstanceArgs,
    /// Number of independent instances (seeds seed, seed+1, ...).
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    n: usize,
    /// Maximum degree Δ of the revealed bipartite graph.
    #[arg(long)]
    delta: usize,
    #[arg(long)]
    b: f64,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML file with the ExperimentConfig keys.
    #[arg(long)]
    config: PathBuf,
    /// Override the number of trials per cell.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FigureArgs {
    /// Trial records CSV written by `experiment`.
    #[arg(long)]
    records: PathBuf,
    /// eta_vs_n or eta_vs_b.
    #[arg(long)]
    kind: Figure,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(Error::from),
    }
}

fn load_instance(args: &InstanceArgs, seed: u64) -> Result<(RankOneInstance, String)> {
    let (inst, label) = if let Some(path) = &args.instance {
        (RankOneInstance::from_json(&read(path)?)?, family_label(None))
    } else if let Some(path) = &args.graph {
        let graph = RevealedGraph::from_edge_list(&read(path)?)?;
        (sample_instance(&graph, args.b, seed)?, family_label(None))
    } else {
        let graph = generate_family(args.family, args.n)?;
        (sample_instance(&graph, args.b, seed)?, family_label(Some(args.family)))
    };
    if let Some(path) = &args.save_instance {
        emit(Some(path), &inst.to_json())?;
    }
    Ok((inst, label))
}

fn simulate(args: &SimulateArgs, seed: u64) -> Result<()> {
    if args.stride == 0 {
        return Err(Error::InvalidParameter("stride must be at least 1".into()));
    }
    let (inst, _) = load_instance(&args.source, seed)?;
    let state = init_state(&inst, Init::Seed(seed))?;
    let stop = StopRule {
        max_iters: Some(args.max_iters),
        cost_tol: Some(args.cost_tol),
        u_consensus_tol: args.consensus_tol,
    };
    let mut traj = run(state, &inst, &stop, args.stride)?;
    fill_u_errors(&mut traj, &inst);
    emit(args.output.as_deref(), &traj.to_csv(&inst))
}

fn spectrum(args: &SpectrumArgs, seed: u64) -> Result<()> {
    if args.count == 0 {
        return Err(Error::InvalidParameter("count must be at least 1".into()));
    }
    if args.count > 1 && args.source.instance.is_some() {
        return Err(Error::InvalidParameter("--count needs a sampled instance".into()));
    }
    let mut out = format!("seed,{}\n", SpectralReport::CSV_HEADER);
    for k in 0..args.count {
        let s = seed.wrapping_add(k);
        let (inst, label) = load_instance(&args.source, s)?;
        let report = spectral_report(&inst, &label)?;
        let seed_col = inst.seed().map_or(String::new(), |s| s.to_string());
        out.push_str(&format!("{seed_col},{}\n", report.csv_row()));
    }
    emit(args.output.as_deref(), &out)
}

fn bound(args: &BoundArgs) -> Result<()> {
    let r = theorem2_bound(args.n, args.delta, args.b)?;
    let d = diag_bound(args.delta, args.b)?;
    let text = format!(
        "n,delta,b,gap,rate_bound,weaker_gap,weaker_rate_bound,diag_floor,lambda_n_floor\n\
         {},{},{},{:e},{:e},{:e},{:e},{:e},{:e}\n",
        args.n, args.delta, args.b, r.gap, r.bound, r.weaker_gap, r.weaker_bound, d, d - 1.0
    );
    emit(None, &text)
}

fn experiment(args: &ExperimentArgs, seed: Option<u64>) -> Result<()> {
    let mut cfg = ExperimentConfig::from_toml(&read(&args.config)?)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    let records = run_experiment(&cfg)?;
    emit(args.output.as_deref(), &records_to_csv(&records)?)
}

fn figure(args: &FigureArgs) -> Result<()> {
    let records = records_from_csv(&read(&args.records)?)?;
    emit(args.output.as_deref(), &emit_figure_data(&records, args.kind)?)
}

fn dispatch(cli: &Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    match &cli.command {
        Command::Simulate(a) => simulate(a, seed),
        Command::Spectrum(a) => spectrum(a, seed),
        Command::Bound(a) => bound(a),
        Command::Experiment(a) => experiment(a, cli.seed),
        Command::Figure(a) => figure(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
