use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dcl_core::analytics::{dp_critical_point, finite_rate_thresholds, thermalization_time, AnalyticModel};
use dcl_core::domainwall::{run_annealed, AnnealedConfig, AnnealedEncoding, AnnealedNoise, RightBoundary};
use dcl_core::harness::recipes::{analyze_figure, figure_sweeps, Figure, Scale, DECAY_MIN_T};
use dcl_core::harness::{
    algebraic_decay_threshold, crossing_point, fit_collapse, read_csv, run_sweep, CollapseModel, Dataset, FitOptions,
    Param, SweepSpec,
};
use dcl_core::protocols::{
    run_protocol, Channel, Checkpoints, Encoding, LayerOrder, Prescramble, ProtocolConfig, Schedule, Scrambling,
};
use dcl_core::stats::mean_sem;
use dcl_core::Error;

/// Coding transitions in boundary-dissipative qudit chains: Clifford and
/// domain-wall engines, closed-form analytics, sweeps and fits.
#[derive(Parser)]
#[command(name = "dcl", version)]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run Clifford circuit samples and print the mean mutual information (bits).
    CliffordRun(CliffordArgs),
    /// Run the annealed domain-wall transfer matrix and print I (units of log q).
    AnnealedRun(AnnealedArgs),
    /// Run a sweep described by a JSON spec file.
    Sweep(SweepArgs),
    /// Closed-form results.
    Analytic {
        #[command(subcommand)]
        what: Analytic,
    },
    /// Fit a sweep CSV: scaling collapse, crossing point or decay threshold.
    Fit(FitArgs),
    /// Build, run and analyze the sweep behind one figure.
    ReproFigure(ReproArgs),
}

#[derive(Args)]
struct CliffordArgs {
    /// System size (even).
    #[arg(long = "L")]
    l: usize,
    /// Dissipative timesteps.
    #[arg(long = "T")]
    t: usize,
    /// Dissipation probability per timestep.
    #[arg(long)]
    p: f64,
    /// `random` or `periodic:N` (fires when t mod N = 0).
    #[arg(long, default_value = "random", value_parser = parse_schedule)]
    schedule: Schedule,
    #[arg(long, value_enum, default_value_t = ChannelArg::Erasure)]
    channel: ChannelArg,
    /// Probability that each brickwork gate is a random Clifford (1 = full scrambling).
    #[arg(long = "p-u", default_value_t = 1.0)]
    p_u: f64,
    /// `none`, `log:K` (depth K log2 L) or `linear:M` (depth M L).
    #[arg(long, default_value = "none", value_parser = parse_prescramble)]
    prescramble: Prescramble,
    /// 1-based site of the single Bell pair.
    #[arg(long, default_value_t = 1, conflicts_with = "rate")]
    x0: usize,
    /// Code rate C: C L Bell pairs at evenly spaced sites.
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long, default_value_t = 1)]
    samples: usize,
    /// Master seed (overridden by DCL_SEED).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also print I at t = 1, 2, 4, ... .
    #[arg(long)]
    series: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelArg {
    Erasure,
    CnotAncilla,
}

#[derive(Args)]
struct AnnealedArgs {
    /// Local Hilbert-space dimension.
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    /// System size (even); irrelevant for a semi-infinite chain beyond x0.
    #[arg(long = "L")]
    l: usize,
    #[arg(long = "T")]
    t: usize,
    /// Depolarizing strength.
    #[arg(long)]
    p: f64,
    /// Unitary pre-scrambling depth in timesteps.
    #[arg(long = "t-scr", default_value_t = 0)]
    t_scr: usize,
    #[arg(long, value_enum, default_value_t = BoundaryArg::SemiInfinite)]
    boundary: BoundaryArg,
    #[arg(long, default_value_t = 1, conflicts_with = "rate")]
    x0: usize,
    /// Code rate C (finite-rate mutual information).
    #[arg(long)]
    rate: Option<f64>,
    /// Full depolarization at random times, averaged over this many realizations.
    #[arg(long = "random-times")]
    random_times: Option<usize>,
    /// Seed for random-time masks (overridden by DCL_SEED).
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundaryArg {
    SemiInfinite,
    Absorbing,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON sweep specification.
    #[arg(long)]
    spec: PathBuf,
    /// Output directory (overrides the spec's `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Analytic {
    /// Critical dissipation p_c(q) of the pinning transition.
    Pc {
        #[arg(long)]
        q: f64,
        /// Also locate p_c from the transfer matrix (slower).
        #[arg(long)]
        transfer_matrix: bool,
    },
    /// Free energy, gap, excursion duration and length at (q, p).
    FreeEnergy {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        p: f64,
    },
    /// Finite-rate threshold estimates (scaling forms, O(1) prefactors set to 1).
    Thresholds {
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        /// Code rate.
        #[arg(long)]
        c: f64,
        #[arg(long = "L")]
        l: usize,
        #[arg(long = "T")]
        t: usize,
        /// Also evaluate the thermalization time at this p.
        #[arg(long)]
        p: Option<f64>,
    },
    /// Thermalization time t_c ~ L log q / |log(1-p)|.
    Tc {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        p: f64,
        #[arg(long = "L")]
        l: usize,
    },
}

#[derive(Args)]
struct FitArgs {
    /// Sweep CSV.
    #[arg(long)]
    csv: PathBuf,
    #[arg(long, value_enum, default_value_t = FitKind::PowerLaw)]
    model: FitKind,
    /// p_c range `lo:hi` or fixed value (power law).
    #[arg(long = "p-c", default_value = "0.05:0.95", value_parser = parse_param)]
    p_c: Param,
    #[arg(long = "beta-over-nu", default_value = "0:1", value_parser = parse_param)]
    beta_over_nu: Param,
    #[arg(long, default_value = "0.5:5", value_parser = parse_param)]
    nu: Param,
    /// p_d range or value (step model).
    #[arg(long = "p-d", default_value = "0.01:0.6", value_parser = parse_param)]
    p_d: Param,
    #[arg(long, default_value = "0.1:1.5", value_parser = parse_param)]
    omega: Param,
    /// Only use rows with this L (repeatable).
    #[arg(long = "L")]
    l: Vec<usize>,
    /// Keep only each size's final-depth rows (drops checkpoint rows).
    #[arg(long)]
    final_only: bool,
    #[arg(long, default_value_t = 32)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Significance level for the decay test.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Smallest depth used by the decay test.
    #[arg(long = "min-t", default_value_t = DECAY_MIN_T)]
    min_t: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitKind {
    PowerLaw,
    Step,
    Crossing,
    Decay,
}

#[derive(Args)]
struct ReproArgs {
    #[arg(value_enum)]
    figure: FigureArg,
    /// `desk` caps L at 512 and samples at 1000; `paper` uses larger grids.
    #[arg(long, value_enum, default_value_t = ScaleArg::Desk)]
    scale: ScaleArg,
    /// Root output directory; files go to <out>/<figure>/.
    #[arg(long, default_value = "figures")]
    out: PathBuf,
    /// Master seed (overridden by DCL_SEED).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the recipe's sample count.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FigureArg {
    Fig2,
    Fig4,
    Fig6,
    Fig8,
    Fig9,
    Fig10,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Paper,
}

fn parse_schedule(s: &str) -> Result<Schedule, String> {
    match s.split_once(':') {
        None if s == "random" => Ok(Schedule::Random),
        Some(("periodic", n)) => n
            .parse()
            .map(|period| Schedule::Periodic { period })
            .map_err(|e| format!("bad period: {e}")),
        _ => Err("expected `random` or `periodic:N`".into()),
    }
}

fn parse_prescramble(s: &str) -> Result<Prescramble, String> {
    let num = |v: &str| v.parse::<f64>().map_err(|e| format!("bad number: {e}"));
    match s.split_once(':') {
        None if s == "none" => Ok(Prescramble::None),
        Some(("log", k)) => Ok(Prescramble::Log { k: num(k)? }),
        Some(("linear", m)) => Ok(Prescramble::Linear { multiple: num(m)? }),
        _ => Err("expected `none`, `log:K` or `linear:M`".into()),
    }
}

fn parse_param(s: &str) -> Result<Param, String> {
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("bad number `{v}`: {e}"));
    match s.split_once(':') {
        Some((lo, hi)) => Ok(Param::Free {
            lo: num(lo)?,
            hi: num(hi)?,
        }),
        None => Ok(Param::Fixed(num(s)?)),
    }
}

/// Failure with the exit code of its class.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) | Error::Validation(_) | Error::Config(_) | Error::Json(_) => 2,
            Error::Io { .. } => 3,
            Error::Numerical(_) | Error::Estimation(_) => 4,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

/// `DCL_SEED` wins over any seed given on the command line or in a spec.
fn seed_override() -> Result<Option<u64>, Failure> {
    match std::env::var("DCL_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("DCL_SEED={v:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn resolve_seed(flag: u64) -> Result<u64, Failure> {
    Ok(seed_override()?.unwrap_or(flag))
}

fn print_json(value: &impl serde::Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    println!("{text}");
    Ok(())
}

fn clifford_run(a: CliffordArgs) -> Result<(), Failure> {
    let config = ProtocolConfig {
        l: a.l,
        t: a.t,
        p: a.p,
        schedule: a.schedule,
        channel: match a.channel {
            ChannelArg::Erasure => Channel::Erasure,
            ChannelArg::CnotAncilla => Channel::CnotAncilla,
        },
        scrambling: if a.p_u >= 1.0 {
            Scrambling::Full
        } else {
            Scrambling::Sparse { p_u: a.p_u }
        },
        prescramble: a.prescramble,
        encoding: match a.rate {
            Some(c) => Encoding::FiniteRate { c },
            None => Encoding::SinglePair { x0: a.x0 },
        },
        seed: resolve_seed(a.seed)?,
        n_samples: a.samples,
        checkpoints: if a.series {
            Checkpoints::PowersOfTwo
        } else {
            Checkpoints::Final
        },
        layer_order: LayerOrder::OddFirst,
    };
    let records = run_protocol(&config)?;
    if a.series {
        for (k, t) in config.checkpoint_times().into_iter().enumerate() {
            let v: Vec<f64> = records.iter().map(|r| r.checkpoints[k].mi as f64).collect();
            let (m, s) = mean_sem(&v);
            println!("t={t} I={m:?} sem={s:?}");
        }
    }
    let v: Vec<f64> = records.iter().map(|r| r.final_mi() as f64).collect();
    let (mean, sem) = mean_sem(&v);
    println!("I={mean:?} sem={sem:?} samples={}", v.len());
    Ok(())
}

fn annealed_run(a: AnnealedArgs) -> Result<(), Failure> {
    let seed = resolve_seed(a.seed)?;
    let config = AnnealedConfig {
        q: a.q,
        l: a.l,
        t: a.t,
        p: a.p,
        prescramble_depth: a.t_scr,
        right_boundary: match a.boundary {
            BoundaryArg::SemiInfinite => RightBoundary::SemiInfinite,
            BoundaryArg::Absorbing => RightBoundary::Absorbing,
        },
        encoding: match a.rate {
            Some(c) => AnnealedEncoding::FiniteRate { c, sites: vec![] },
            None => AnnealedEncoding::SinglePair { x0: a.x0 },
        },
        noise: match a.random_times {
            Some(realizations) => AnnealedNoise::RandomTimes { realizations, seed },
            None => AnnealedNoise::Deterministic,
        },
    };
    let out = run_annealed(&config)?;
    println!("I={:?} P={:?} lnZ={:?}", out.mi, out.survival, out.log_partition);
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<(), Failure> {
    let mut spec = SweepSpec::load(&a.spec)?;
    if let Some(out) = a.out {
        spec.out_dir = out;
    }
    if let Some(seed) = seed_override()? {
        spec.seed = seed;
    }
    let result = run_sweep(&spec)?;
    println!(
        "rows={} csv={} manifest={}",
        result.rows.len(),
        result.csv.display(),
        result.manifest.display()
    );
    Ok(())
}

fn analytic(what: Analytic) -> Result<(), Failure> {
    match what {
        Analytic::Pc { q, transfer_matrix } => {
            let c = AnalyticModel::new(q)?.critical_p()?;
            println!(
                "p_c={:?} one_minus_p_c={:e} residual={:e}",
                c.p_c, c.one_minus_p_c, c.residual
            );
            if transfer_matrix {
                let p = dp_critical_point(q, 1024, 2048, (0.01, 0.99), 1e-7)?;
                println!("p_c_transfer_matrix={p:?}");
            }
        }
        Analytic::FreeEnergy { q, p } => {
            let m = AnalyticModel::new(q)?;
            println!(
                "f={:?} gap={:?} tau={:?} l_perp={:?}",
                m.free_energy(p)?,
                m.free_energy_gap(p)?,
                m.excursion_duration(p)?,
                m.excursion_length(p)?
            );
        }
        Analytic::Thresholds { q, c, l, t, p } => print_json(&finite_rate_thresholds(q, c, l, t, p)?)?,
        Analytic::Tc { q, p, l } => println!("t_c={:?}", thermalization_time(p, q, l)?),
    }
    Ok(())
}

fn fit(a: FitArgs) -> Result<(), Failure> {
    let rows = read_csv(&a.csv)?;
    let mut data = Dataset::from_rows(&rows);
    if !a.l.is_empty() {
        data = data.filter(|d| a.l.contains(&d.l));
    }
    if a.final_only {
        // A size's final depth is its largest T.
        let pts = data.points.clone();
        data = data.filter(|d| !pts.iter().any(|o| o.l == d.l && o.t > d.t));
    }
    let options = FitOptions {
        bootstrap: a.bootstrap,
        seed: resolve_seed(a.seed)?,
        ..FitOptions::default()
    };
    match a.model {
        FitKind::PowerLaw => {
            let model = CollapseModel::PowerLaw {
                p_c: a.p_c,
                beta_over_nu: a.beta_over_nu,
                nu: a.nu,
            };
            print_json(&fit_collapse(&data, &model, &options)?)
        }
        FitKind::Step => {
            let model = CollapseModel::Step {
                p_d: a.p_d,
                omega: a.omega,
            };
            print_json(&fit_collapse(&data, &model, &options)?)
        }
        FitKind::Crossing => print_json(&crossing_point(&data)?),
        FitKind::Decay => print_json(&algebraic_decay_threshold(&data, a.alpha, a.min_t)?),
    }
}

fn repro(a: ReproArgs) -> Result<(), Failure> {
    let figure = match a.figure {
        FigureArg::Fig2 => Figure::Fig2,
        FigureArg::Fig4 => Figure::Fig4,
        FigureArg::Fig6 => Figure::Fig6,
        FigureArg::Fig8 => Figure::Fig8,
        FigureArg::Fig9 => Figure::Fig9,
        FigureArg::Fig10 => Figure::Fig10,
    };
    let scale = match a.scale {
        ScaleArg::Desk => Scale::Desk,
        ScaleArg::Paper => Scale::Paper,
    };
    let dir = a.out.join(figure.name());
    let mut sweeps = figure_sweeps(figure, scale, &dir, resolve_seed(a.seed)?)?;
    if let Some(n) = a.samples {
        if n == 0 || (scale == Scale::Desk && n > 1000) {
            return Err(usage("--samples must be in 1..=1000 at desk scale"));
        }
        for s in &mut sweeps {
            s.spec.samples = n;
        }
    }
    let mut results = Vec::new();
    for s in &sweeps {
        eprintln!("running {} -> {}", s.name, s.spec.out_dir.display());
        let r = run_sweep(&s.spec)?;
        results.push((s.name.clone(), r.rows));
    }
    let analysis = analyze_figure(figure, &results)?;
    let path = dir.join("analysis.json");
    let text = serde_json::to_string_pretty(&analysis).map_err(Error::from)?;
    std::fs::write(&path, text + "\n").map_err(|e| Failure {
        code: 3,
        message: format!("i/o error on {}: {e}", path.display()),
    })?;
    print_json(&analysis)
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::CliffordRun(a) => clifford_run(a),
        Command::AnnealedRun(a) => annealed_run(a),
        Command::Sweep(a) => sweep(a),
        Command::Analytic { what } => analytic(what),
        Command::Fit(a) => fit(a),
        Command::ReproFigure(a) => repro(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("dcl: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
