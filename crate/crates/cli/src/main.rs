//! `rectstokes`: convergence studies, dual-norm decay studies and field dumps.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use rectstokes::fespace::NodeFamily;
use rectstokes::interpolation::DerivPair;
use rectstokes::poly2d::SolutionVariant;
use rectstokes::solvers::ElementKind;
use rectstokes::study::{self, LemmaConfig, OutputFormat, StudyConfig};

#[derive(Parser, Debug)]
#[command(name = "rectstokes", version, about = "Stokes elements on rectangular grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Element {
    Divfree,
    Br,
}

impl From<Element> for ElementKind {
    fn from(e: Element) -> Self {
        match e {
            Element::Divfree => ElementKind::DivFree,
            Element::Br => ElementKind::BernardiRaugel,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Solution {
    Asym,
    Sym,
}

impl From<Solution> for SolutionVariant {
    fn from(s: Solution) -> Self {
        match s {
            Solution::Asym => SolutionVariant::Asymmetric,
            Solution::Sym => SolutionVariant::Symmetric,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Text => OutputFormat::Text,
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Nodes {
    Equispaced,
    GaussLobatto,
}

impl From<Nodes> for NodeFamily {
    fn from(n: Nodes) -> Self {
        match n {
            Nodes::Equispaced => NodeFamily::Equispaced,
            Nodes::GaussLobatto => NodeFamily::GaussLobatto,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Pair {
    Xx,
    Yy,
    Xy,
    Yx,
}

impl From<Pair> for DerivPair {
    fn from(p: Pair) -> Self {
        match p {
            Pair::Xx => DerivPair::XX,
            Pair::Yy => DerivPair::YY,
            Pair::Xy => DerivPair::XY,
            Pair::Yx => DerivPair::YX,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a convergence study over a range of refinement levels.
    Converge {
        #[arg(long, value_enum)]
        element: Element,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        k: u8,
        /// Inclusive range `A..B`; defaults depend on k.
        #[arg(long)]
        levels: Option<String>,
        #[arg(long, value_enum, default_value = "asym")]
        solution: Solution,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Penalty parameter of the iterated penalty method.
        #[arg(long)]
        r: Option<f64>,
        /// Uzawa step size.
        #[arg(long)]
        alpha: Option<f64>,
        /// Velocity Lagrange node placement.
        #[arg(long, value_enum, default_value = "gauss-lobatto")]
        nodes: Nodes,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure the decay of an interpolation-error dual norm.
    Lemma {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        k: u8,
        #[arg(long, value_enum)]
        pair: Pair,
        /// Interpolated velocity component.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        component: u8,
        /// Test space component; defaults to the div-div pairing.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        test_component: Option<u8>,
        #[arg(long, default_value = "2..6")]
        levels: String,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Solve on one level and write sampled fields as CSV.
    Dump {
        #[arg(long, value_enum)]
        element: Element,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        k: u8,
        #[arg(long)]
        level: u32,
        #[arg(long, value_enum, default_value = "asym")]
        solution: Solution,
        #[arg(long)]
        out: PathBuf,
    },
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Converge {
            element,
            k,
            levels,
            solution,
            format,
            r,
            alpha,
            nodes,
            out,
        } => {
            let mut cfg = StudyConfig::new(element.into(), k as usize, solution.into());
            if let Some(l) = levels {
                cfg.levels = study::parse_levels(&l)?;
            }
            if let Some(r) = r {
                cfg.penalty.r = r;
            }
            if let Some(a) = alpha {
                cfg.uzawa.alpha = a;
            }
            cfg.nodes = nodes.into();
            let report = study::run_convergence_study(&cfg)?;
            emit(&study::format_report(&report, format.into())?, out.as_ref())
        }
        Command::Lemma {
            k,
            pair,
            component,
            test_component,
            levels,
            format,
        } => {
            let mut cfg = LemmaConfig::new(k as usize, component as usize, pair.into());
            cfg.test_component = test_component.map(usize::from);
            cfg.levels = study::parse_levels(&levels)?;
            let report = study::run_lemma_study(&cfg)?;
            let text = match format {
                Format::Json => serde_json::to_string_pretty(&report)? + "\n",
                Format::Csv => {
                    let mut s = String::from("level,norm,rate\n");
                    for ((l, n), r) in report.levels.iter().zip(&report.norms).zip(&report.rates) {
                        s += &format!("{l},{n:.6e},{}\n", r.map(|v| format!("{v:.2}")).unwrap_or_default());
                    }
                    s
                }
                Format::Text => report.to_text(),
            };
            emit(&text, None)
        }
        Command::Dump {
            element,
            k,
            level,
            solution,
            out,
        } => {
            if level == 0 {
                bail!("level must be at least 1");
            }
            let cfg = StudyConfig::new(element.into(), k as usize, solution.into());
            let files = study::dump_fields(&cfg, level, &out)?;
            for f in files {
                println!("{}", f.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
