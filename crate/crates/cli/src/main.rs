mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use tightframe::{LaurentPoly, PolyMatrix, Result};

use report::{RunReport, Stages};

#[derive(Parser)]
#[command(name = "tightframe", version, about = "Tight wavelet frames from polynomial masks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the JSON report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the stage tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Points per axis for torus-grid screens.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Include wall-clock time (makes output non-deterministic).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Args)]
struct MaskArgs {
    /// Mask as JSON `{"dim", "terms": [{"exp", "re", "im"}]}`.
    #[arg(long)]
    mask: PathBuf,
    /// `2I:d` or a JSON file with `{"M": [[…]]}` or a bare matrix.
    #[arg(long)]
    dilation: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Example {
    B111,
    Drury,
    Haar,
}

#[derive(Subcommand)]
enum Command {
    /// Sum rules, sub-QMF screen and defect.
    Analyze(MaskArgs),
    /// Non-negative decomposition and sum-of-squares certificate.
    Certify(MaskArgs),
    /// Isometric transfer-function realization.
    Realize {
        #[command(flatten)]
        mask: MaskArgs,
        /// Replacement `q0` column (PolyMatrix JSON).
        #[arg(long)]
        q0: Option<PathBuf>,
    },
    /// Full framelet construction with UEP verification.
    Framelets {
        #[command(flatten)]
        mask: MaskArgs,
        #[arg(long)]
        q0: Option<PathBuf>,
    },
    /// Univariate construction with exactly `m` generators.
    Univariate {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long, default_value_t = 2)]
        m: i64,
    },
    /// Box-spline mask, generator bound and certificate.
    Boxspline {
        /// Directions separated by `;`, entries by `,`, e.g. `1,0;0,1;1,1`.
        #[arg(long)]
        directions: String,
        /// Multiplicities, e.g. `1,1,1`; all ones by default.
        #[arg(long)]
        mult: Option<String>,
        /// Also run the framelet construction on the mask.
        #[arg(long)]
        framelets: bool,
    },
    /// Checks the UEP for a mask and candidate framelets.
    Verify {
        #[command(flatten)]
        mask: MaskArgs,
        /// JSON list of masks, or an object with a `masks` field.
        #[arg(long)]
        framelets: PathBuf,
    },
    /// Built-in fixtures.
    Example {
        name: Example,
        #[arg(long)]
        framelets: bool,
    },
}

fn load_mask(args: &MaskArgs) -> Result<(LaurentPoly, tightframe::DilationSetup)> {
    let p: LaurentPoly = commands::load(&args.mask)?;
    let setup = commands::dilation(args.dilation.as_deref(), p.dim())?;
    Ok((p, setup))
}

fn load_q0(path: Option<&PathBuf>) -> Result<Option<PolyMatrix>> {
    path.map(|p| commands::load(p)).transpose()
}

fn run(cli: &Cli, st: &mut Stages) -> Result<Value> {
    let tol = cli.tol;
    match &cli.command {
        Command::Analyze(m) => {
            let (p, s) = load_mask(m)?;
            commands::analyze(&p, &s, tol, cli.grid, st)
        }
        Command::Certify(m) => {
            let (p, s) = load_mask(m)?;
            commands::certify_cmd(&p, &s, tol, st)
        }
        Command::Realize { mask, q0 } => {
            let (p, s) = load_mask(mask)?;
            commands::realize_cmd(&p, &s, load_q0(q0.as_ref())?.as_ref(), tol, st)
        }
        Command::Framelets { mask, q0 } => {
            let (p, s) = load_mask(mask)?;
            commands::framelets(&p, &s, load_q0(q0.as_ref())?.as_ref(), tol, st)
        }
        Command::Univariate { mask, m } => {
            let p: LaurentPoly = commands::load(mask)?;
            commands::univariate_cmd(&p, *m, st)
        }
        Command::Boxspline {
            directions,
            mult,
            framelets,
        } => commands::boxspline_cmd(directions, mult.as_deref(), *framelets, tol, st),
        Command::Verify { mask, framelets } => {
            let (p, s) = load_mask(mask)?;
            let list: commands::MaskList = commands::load(framelets)?;
            commands::verify(&p, &s, list, tol, st)
        }
        Command::Example { name, framelets } => {
            let name = match name {
                Example::B111 => "b111",
                Example::Drury => "drury",
                Example::Haar => "haar",
            };
            commands::example(name, *framelets, cli.grid, tol, st)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let mut stages = Stages::default();
    let outcome = run(&cli, &mut stages);
    let elapsed = start.elapsed().as_secs_f64() * 1e3;

    let (result, error, code) = match outcome {
        Ok(v) => {
            let ok = stages.0.iter().all(|s| s.pass);
            (v, None, if ok { 0 } else { 1 })
        }
        Err(e) => {
            let code = if e.is_input_error() { 2 } else { 1 };
            (Value::Null, Some(e.to_string()), code)
        }
    };
    let report = RunReport {
        command: std::env::args().skip(1).collect(),
        pass: error.is_none() && stages.0.iter().all(|s| s.pass),
        stages: stages.0,
        error,
        timing_ms: cli.timing.then_some(elapsed),
        result,
    };
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    match &cli.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text) {
                eprintln!("cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{text}"),
    }
    if let Some(e) = &report.error {
        eprintln!("error: {e}");
    }
    ExitCode::from(code)
}
