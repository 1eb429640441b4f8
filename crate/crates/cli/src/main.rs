//! `rotnqs` command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rotnqs_cli::commands::{self, CmdError};
use rotnqs_cli::config::{self, Experiment, Settings};
use rotnqs_cli::output::create_run_dir;

#[derive(Parser)]
#[command(name = "rotnqs", version, about = "Exact-sum neural quantum states on the rotated Ising ring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact ground state, first excited energy and gap.
    Ed(Common),
    /// Pretrain a network to the uniform superposition.
    Pretrain(Common),
    /// Pretrain, then optimize on the rotated Hamiltonian for each seed.
    Train(Common),
    /// Train over a grid of rotation angles and seeds.
    Sweep(Common),
    /// SR and Lanczos trajectories from the same start, with PCA coordinates.
    Compare(Common),
}

#[derive(Args)]
struct Common {
    /// Named experiment preset.
    #[arg(long)]
    preset: Option<String>,
    /// TOML config file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of sites.
    #[arg(long)]
    n: Option<usize>,
    /// Ising coupling.
    #[arg(long, allow_negative_numbers = true)]
    j: Option<f64>,
    /// Transverse field.
    #[arg(long = "h", allow_negative_numbers = true)]
    field: Option<f64>,
    /// Rotation angle in radians, or an expression like `pi/3`.
    #[arg(long)]
    phi: Option<String>,
    /// Hidden-unit ratio of the RBM.
    #[arg(long)]
    alpha: Option<f64>,
    /// `energy` or `infidelity`.
    #[arg(long)]
    loss: Option<String>,
    /// Number of SR updates.
    #[arg(long)]
    tau: Option<usize>,
    /// Learning rate.
    #[arg(long)]
    eta: Option<f64>,
    /// QGT diagonal shift.
    #[arg(long)]
    eps: Option<f64>,
    /// Base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeds.
    #[arg(long)]
    seeds: Option<usize>,
    /// Worker threads for independent runs (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Root directory for run directories.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Force dense diagonalization.
    #[arg(long)]
    dense: bool,
    /// Extra `section.key=value` overrides.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn settings(args: &Common) -> Result<Settings, CmdError> {
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CmdError::Usage(format!("{}: {e}", path.display())))?;
            config::parse_config(&text).map_err(|e| CmdError::Usage(format!("{}: {e}", path.display())))?
        }
        None => Settings::new(),
    };
    let preset = args.preset.clone().or_else(|| file.get("run.preset").cloned());
    let mut s = match preset.as_deref() {
        Some(name) if name != "custom" => config::preset(name)?,
        _ => config::defaults(),
    };
    s.extend(file);

    let mut flag = |key: &str, value: Option<String>| -> Result<(), CmdError> {
        if let Some(v) = value {
            config::set(&mut s, key, &v)?;
        }
        Ok(())
    };
    flag("model.n", args.n.map(|x| x.to_string()))?;
    flag("model.j", args.j.map(|x| x.to_string()))?;
    flag("model.h", args.field.map(|x| x.to_string()))?;
    flag("model.phi", args.phi.clone())?;
    flag("ansatz.alpha", args.alpha.map(|x| x.to_string()))?;
    flag("train.loss", args.loss.clone())?;
    flag("train.tau", args.tau.map(|x| x.to_string()))?;
    flag("train.eta", args.eta.map(|x| x.to_string()))?;
    flag("train.eps", args.eps.map(|x| x.to_string()))?;
    flag("run.seed", args.seed.map(|x| x.to_string()))?;
    flag("run.seeds", args.seeds.map(|x| x.to_string()))?;
    flag("run.jobs", args.jobs.map(|x| x.to_string()))?;
    flag("ed.dense", args.dense.then(|| "true".to_string()))?;
    for a in &args.set {
        let (k, v) = config::parse_assignment(a)?;
        config::set(&mut s, &k, &v)?;
    }
    Ok(s)
}

fn run(command: &Command) -> Result<(String, PathBuf, bool), CmdError> {
    let (Command::Ed(args)
    | Command::Pretrain(args)
    | Command::Train(args)
    | Command::Sweep(args)
    | Command::Compare(args)) = command;
    let exp = Experiment::resolve(&settings(args)?)?;
    let dir = create_run_dir(Path::new(&args.out), &exp.preset, exp.seed)?;
    let (summary, failed) = match command {
        Command::Ed(_) => (commands::ed(&exp, &dir)?.summary, false),
        Command::Pretrain(_) => (commands::pretrain(&exp, &dir)?.summary, false),
        Command::Train(_) => {
            let r = commands::train(&exp, &dir)?;
            let failed = r.failures() > 0;
            (r.summary, failed)
        }
        Command::Sweep(_) => {
            let r = commands::sweep(&exp, &dir)?;
            let failed = r.result.failures() > 0;
            (r.summary, failed)
        }
        Command::Compare(_) => (commands::compare(&exp, &dir)?.summary, false),
    };
    Ok((summary, dir, failed))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli.command) {
        Ok((summary, dir, failed)) => {
            println!("{summary}");
            println!("output: {}", dir.display());
            if failed {
                eprintln!("error: some runs failed; see the output files");
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
