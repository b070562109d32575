use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use glosa_harness::mpc::mpc_batch;
use glosa_harness::run::run_scenario;
use glosa_harness::sweep::{dddp_param_sweep, sweep_initial_conditions};
use glosa_harness::{io, Config, HarnessError, Result, SolverKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum SweepKind {
    /// DDDP and DDP over a grid of initial positions and speeds.
    Initial,
    /// DDDP over corridor widths and initial step sizes.
    Params,
}

/// Stochastic green-light speed advisory solvers.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Reference scenario (1, 2 or 3); used when no config file is given.
    #[arg(long)]
    scenario: Option<usize>,
    #[arg(long, value_enum, default_value = "ddp")]
    solver: SolverKind,
    /// Acceleration step: the SDP grid step, or the initial DDDP step.
    #[arg(long)]
    delta_a: Option<f64>,
    /// DDDP speed corridor coefficient.
    #[arg(long)]
    cv: Option<f64>,
    /// DDDP position corridor coefficient.
    #[arg(long)]
    cx: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    sweep: Option<SweepKind>,
    /// Closed-loop simulation over `[mpc] runs` seeds.
    #[arg(long)]
    mpc: bool,
    /// Re-solve at every step of the closed loop.
    #[arg(long)]
    resolve: bool,
    /// Concurrent sweep cells.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn load(cli: &Cli) -> Result<Config> {
    let mut config = match (&cli.config, cli.scenario) {
        (Some(path), _) => Config::load(path)?,
        (None, Some(id)) => Config::preset(id)?,
        (None, None) => return Err(HarnessError::Config("either --config or --scenario is required".into())),
    };
    if let (Some(_), Some(id)) = (&cli.config, cli.scenario) {
        if config.scenario_id != Some(id) {
            return Err(HarnessError::Config(format!("--scenario {id} conflicts with the config file")));
        }
    }
    if let Some(d) = cli.delta_a {
        match cli.solver {
            SolverKind::Sdp => config.sdp.delta = d,
            _ => config.dddp.delta0 = d,
        }
    }
    if let Some(cv) = cli.cv {
        config.dddp.corridor[1] = cv;
    }
    if let Some(cx) = cli.cx {
        config.dddp.corridor[0] = cx;
    }
    if let Some(seed) = cli.seed {
        config.mpc.seed = seed;
    }
    config.mpc.resolve |= cli.resolve;
    config.validate()?;
    Ok(config)
}

fn out_path(cli: &Cli, name: &str) -> Result<PathBuf> {
    let dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir.join(name))
}

fn execute(cli: &Cli) -> Result<()> {
    let config = load(cli)?;
    match (cli.sweep, cli.mpc) {
        (Some(_), true) => Err(HarnessError::Config("--sweep and --mpc are exclusive".into())),
        (Some(SweepKind::Initial), false) => {
            let b = config.scenario.bounds;
            let cells: Vec<(f64, f64)> = (0..=10)
                .flat_map(|i| (0..=8).map(move |j| (i as f64 * 10.0, j as f64 * 2.0)))
                .filter(|&(x, v)| x >= b.x_min && x <= b.x_max && v >= b.v_min && v <= b.v_max)
                .collect();
            let rows = sweep_initial_conditions(&config, &cells, cli.jobs)?;
            let path = out_path(cli, "sweep_initial.csv")?;
            io::write_rows(&path, &rows)?;
            let failed = rows.iter().filter(|r| !r.error.is_empty()).count();
            println!("{} rows ({failed} failed) -> {}", rows.len(), path.display());
            Ok(())
        }
        (Some(SweepKind::Params), false) => {
            let rows = dddp_param_sweep(&config, &[2.0, 3.0, 4.0, 5.0, 6.0], &[1.0, 0.5, 0.25, 0.125], cli.jobs)?;
            let path = out_path(cli, "sweep_dddp_params.csv")?;
            io::write_rows(&path, &rows)?;
            for r in &rows {
                println!("C_v={} delta0={} iterations={} cost={:.6}", r.c_v, r.delta0, r.iterations, r.cost);
            }
            Ok(())
        }
        (None, true) => {
            let runs = mpc_batch(&config, cli.solver, config.mpc.seed, config.mpc.runs, config.mpc.resolve)?;
            let mean = runs.iter().map(|r| r.realized_cost).sum::<f64>() / runs.len() as f64;
            if let Some(dir) = &cli.out_dir {
                std::fs::create_dir_all(dir)?;
                io::write_json(&dir.join(format!("mpc_{}.json", cli.solver.name())), &runs)?;
            }
            println!("{} runs, mean realized cost {mean:.9}", runs.len());
            Ok(())
        }
        (None, false) => {
            let report = run_scenario(&config, cli.solver, cli.out_dir.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if report.converged {
                Ok(())
            } else {
                Err(HarnessError::NotConverged {
                    solver: cli.solver.name(),
                    iterations: report.iterations,
                })
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
