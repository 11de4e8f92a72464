use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use qwalk_core::dynamics::WalkKind;
use qwalk_core::graph::NamedInitial;
use qwalk_core::numerics::DEFAULT_TOL;
use qwalk_core::transport::Method;
use qwalk_transport::{
    dump_graph, run, to_csv, to_svg, ExperimentConfig, ExperimentError, Family, Preset, Variant,
};

const DEFAULT_LADDER_MAX: usize = 10;
const DEFAULT_CAYLEY_MAX: usize = 5;

#[derive(Parser, Debug)]
#[command(
    name = "qwalk-transport",
    version,
    about = "Transport efficiency of coined and percolated Grover walks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ladder of growing length: both walks from psi0 and averaged.
    Fig3(RunArgs),
    /// Cayley tree from psi1, coined walk on reduced trees, averaged.
    Fig5(RunArgs),
    /// Averaged percolated efficiency on full and reduced trees.
    Fig6(RunArgs),
    /// Percolated walk on the Cayley tree from psi1 and psi2.
    Fig8(RunArgs),
    /// Any combination of family, walk, variant and initial state.
    Custom(RunArgs),
    /// Write a state graph as JSON.
    DumpGraph(DumpArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Largest ladder length.
    #[arg(long = "Lmax", value_name = "N", conflicts_with = "kmax")]
    l_max: Option<usize>,
    /// Largest Cayley tree order.
    #[arg(long = "kmax", value_name = "N")]
    kmax: Option<usize>,
    /// Graph family (custom only; otherwise implied by --Lmax/--kmax).
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    /// Per-link open probability of the percolated walk.
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Initial states to keep (comma separated).
    #[arg(long, value_delimiter = ',', value_parser = parse_initial)]
    initial: Vec<NamedInitial>,
    /// Walk types to keep (comma separated).
    #[arg(long, value_delimiter = ',', value_enum)]
    walk: Vec<WalkArg>,
    /// Tree variants to keep (comma separated).
    #[arg(long, value_delimiter = ',', value_enum)]
    variant: Vec<VariantArg>,
    /// Efficiency from the trapped-space projector, from evolution, or both.
    #[arg(long, value_enum, default_value_t = MethodArg::Projector)]
    method: MethodArg,
    /// CSV output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a line chart next to the CSV file.
    #[arg(long, requires = "out")]
    svg: bool,
    /// Rank and orthogonality tolerance.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Args, Debug)]
struct DumpArgs {
    #[arg(value_enum)]
    family: FamilyArg,
    /// Ladder length or tree order.
    parameter: usize,
    #[arg(long, value_enum, default_value_t = VariantArg::Full)]
    variant: VariantArg,
    /// Output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FamilyArg {
    Ladder,
    Cayley,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum WalkArg {
    Cqw,
    Pcqw,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    Full,
    Reduced1,
    Reduced2,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Projector,
    Dynamic,
    Both,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Ladder => Family::Ladder,
            FamilyArg::Cayley => Family::Cayley,
        }
    }
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Full => Variant::Full,
            VariantArg::Reduced1 => Variant::Reduced1,
            VariantArg::Reduced2 => Variant::Reduced2,
        }
    }
}

fn parse_initial(s: &str) -> Result<NamedInitial, String> {
    s.parse().map_err(|e: qwalk_core::Error| e.to_string())
}

/// Errors that should be reported as misuse rather than failure.
#[derive(Debug)]
struct Usage(String);

fn config_for(preset: Preset, args: &RunArgs) -> Result<ExperimentConfig, Usage> {
    let fixed = match preset {
        Preset::Fig3 => Some(Family::Ladder),
        Preset::Fig5 | Preset::Fig6 | Preset::Fig8 => Some(Family::Cayley),
        Preset::Custom => None,
    };
    if fixed.is_some() && args.family.is_some() {
        return Err(Usage(
            "--family is only accepted by the custom preset".into(),
        ));
    }
    let family = match (fixed, args.family.map(Family::from)) {
        (Some(f), _) | (None, Some(f)) => f,
        (None, None) if args.kmax.is_some() => Family::Cayley,
        (None, None) => Family::Ladder,
    };
    let max_parameter = match family {
        Family::Ladder => {
            if args.kmax.is_some() {
                return Err(Usage("ladder experiments take --Lmax, not --kmax".into()));
            }
            args.l_max.unwrap_or(DEFAULT_LADDER_MAX)
        }
        Family::Cayley => {
            if args.l_max.is_some() {
                return Err(Usage(
                    "Cayley tree experiments take --kmax, not --Lmax".into(),
                ));
            }
            args.kmax.unwrap_or(DEFAULT_CAYLEY_MAX)
        }
    };
    let mut config = ExperimentConfig::new(preset, family, max_parameter);
    config.p = args.p;
    config.tol = args.tol;
    config.initials = args.initial.clone();
    config.walks = args
        .walk
        .iter()
        .map(|w| match w {
            WalkArg::Cqw => WalkKind::Cqw,
            WalkArg::Pcqw => WalkKind::Pcqw,
        })
        .collect();
    config.variants = args.variant.iter().map(|&v| v.into()).collect();
    config.methods = match args.method {
        MethodArg::Projector => vec![Method::Projector],
        MethodArg::Dynamic => vec![Method::Dynamic],
        MethodArg::Both => vec![Method::Projector, Method::Dynamic],
    };
    config.validate().map_err(|e| Usage(e.to_string()))?;
    Ok(config)
}

fn write_output(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, contents).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let (preset, args) = match cli.command {
        Command::Fig3(a) => (Preset::Fig3, a),
        Command::Fig5(a) => (Preset::Fig5, a),
        Command::Fig6(a) => (Preset::Fig6, a),
        Command::Fig8(a) => (Preset::Fig8, a),
        Command::Custom(a) => (Preset::Custom, a),
        Command::DumpGraph(d) => {
            let json =
                dump_graph(d.family.into(), d.parameter, d.variant.into()).map_err(
                    |e| match e {
                        ExperimentError::Config(m) => Failure::Usage(m),
                        other => Failure::Usage(other.to_string()),
                    },
                )?;
            write_output(d.out.as_deref(), &format!("{json}\n"))?;
            return Ok(());
        }
    };
    let config = config_for(preset, &args).map_err(|Usage(m)| Failure::Usage(m))?;
    let rows = run(&config).map_err(|e| match e {
        ExperimentError::Config(m) => Failure::Usage(m),
        other => Failure::Runtime(other.into()),
    })?;
    write_output(args.out.as_deref(), &to_csv(&rows))?;
    if args.svg {
        if let Some(out) = &args.out {
            let svg_path = out.with_extension("svg");
            write_output(Some(&svg_path), &to_svg(&rows))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
