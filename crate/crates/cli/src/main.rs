use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use helmhj::commands::{self, Command, RunConfig, Study};
use helmhj::report::error_exit_code;

/// Helmholtz-Hodge decomposition, Hamilton-Jacobi residuals and
/// Klein-Gordon/Madelung checks on uniform grids.
#[derive(Parser, Debug)]
#[command(name = "helmhj", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Split a vector field file into gradient and solenoidal parts.
    Decompose {
        /// Field file with 2 or 3 components on a 2D or 3D grid.
        input: PathBuf,
    },
    /// Rotor flow: closed-form residuals, ensemble integration, vorticity.
    Rotor,
    /// Klein-Gordon state built from `--waves`, with Madelung residuals.
    KgCheck,
    /// Observed order of accuracy over successive grid refinements.
    Convergence {
        #[arg(value_enum, default_value = "laplacian")]
        study: StudyArg,
        /// Number of grids, each refined by two from the last.
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum StudyArg {
    Laplacian,
    Linear,
    Decompose,
    Rotor,
    Kg,
}

impl From<StudyArg> for Study {
    fn from(s: StudyArg) -> Self {
        match s {
            StudyArg::Laplacian => Study::Laplacian,
            StudyArg::Linear => Study::Linear,
            StudyArg::Decompose => Study::Decompose,
            StudyArg::Rotor => Study::Rotor,
            StudyArg::Kg => Study::Kg,
        }
    }
}

#[derive(Args, Debug)]
struct Opts {
    /// Points per axis, `NX[,NY[,NZ]]`.
    #[arg(long, global = true, value_parser = parse_grid)]
    grid: Option<Grid>,
    /// Axis ranges `lo:hi[,lo:hi...]`; one range applies to every axis.
    #[arg(long, global = true, allow_hyphen_values = true, value_parser = parse_domain)]
    domain: Option<Domain>,
    #[arg(long, global = true, allow_hyphen_values = true, default_value_t = 1.0)]
    omega: f64,
    #[arg(long, global = true, default_value_t = 1.0)]
    mass: f64,
    #[arg(long, global = true, allow_hyphen_values = true, default_value_t = 0.0)]
    t0: f64,
    #[arg(long, global = true, default_value_t = 0.05)]
    dt: f64,
    #[arg(long, global = true, default_value_t = 40)]
    steps: usize,
    /// Wave components `amp:k[,amp:k...]`.
    #[arg(long, global = true, allow_hyphen_values = true, value_parser = parse_waves)]
    waves: Option<Waves>,
    #[arg(long, global = true, default_value_t = 1.0)]
    light_speed: f64,
    #[arg(long, global = true, default_value_t = 1.0)]
    hbar: f64,
    /// Relative residual target for the Poisson solvers.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol: f64,
    /// Iteration cap for the Poisson solvers.
    #[arg(long, global = true, default_value_t = 100_000)]
    max_iter: usize,
    /// Seed for random probes and sample points.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(
        long,
        global = true,
        env = "HELMHJ_OUT_DIR",
        default_value = "helmhj-out"
    )]
    out: PathBuf,
    /// Print the JSON report instead of the summary.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Clone, Debug)]
struct Grid(Vec<usize>);
#[derive(Clone, Debug)]
struct Domain(Vec<[f64; 2]>);
#[derive(Clone, Debug)]
struct Waves(Vec<(f64, f64)>);

fn parse_grid(s: &str) -> Result<Grid, String> {
    let counts = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad point count {t:?}"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if counts.is_empty() || counts.len() > 3 {
        return Err("expected 1 to 3 counts".into());
    }
    Ok(Grid(counts))
}

fn parse_pair(t: &str) -> Result<(f64, f64), String> {
    let (a, b) = t
        .split_once(':')
        .ok_or_else(|| format!("expected a:b, got {t:?}"))?;
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| format!("bad number {v:?}"))
    };
    Ok((num(a)?, num(b)?))
}

fn parse_domain(s: &str) -> Result<Domain, String> {
    let ranges = s
        .split(',')
        .map(|t| parse_pair(t).map(|(lo, hi)| [lo, hi]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Domain(ranges))
}

fn parse_waves(s: &str) -> Result<Waves, String> {
    Ok(Waves(
        s.split(',')
            .map(parse_pair)
            .collect::<Result<Vec<_>, _>>()?,
    ))
}

fn config(cli: Cli) -> RunConfig {
    let (command, input, study, levels) = match cli.command {
        Cmd::Decompose { input } => (Command::Decompose, Some(input), Study::Laplacian, 3),
        Cmd::Rotor => (Command::Rotor, None, Study::Laplacian, 3),
        Cmd::KgCheck => (Command::KgCheck, None, Study::Laplacian, 3),
        Cmd::Convergence { study, levels } => (Command::Convergence, None, study.into(), levels),
    };
    let o = cli.opts;
    RunConfig {
        command,
        grid: o.grid.map(|g| g.0).unwrap_or_default(),
        domain: o.domain.map(|d| d.0).unwrap_or_default(),
        omega: o.omega,
        mass: o.mass,
        t0: o.t0,
        dt: o.dt,
        steps: o.steps,
        waves: o.waves.map(|w| w.0).unwrap_or_default(),
        light_speed: o.light_speed,
        hbar: o.hbar,
        tolerance: o.tol,
        max_iterations: o.max_iter,
        seed: o.seed,
        input,
        study,
        levels,
        out: Some(o.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.opts.json;
    let cfg = config(cli);
    match commands::run(&cfg) {
        Ok(report) => {
            if json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.summary());
                let out = cfg.out.as_deref().unwrap_or(std::path::Path::new("."));
                println!(
                    "{} in {:.2}s; report at {}",
                    if report.pass { "passed" } else { "FAILED" },
                    report.wall_time,
                    out.join("report.json").display()
                );
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}
