use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use pnpfv_core::config::{self, RunConfig};
use pnpfv_core::diagnostics::{write_csv_header, write_csv_row};
use pnpfv_core::marching::{Marcher, State};
use pnpfv_core::mms::{self, TauRule};
use pnpfv_core::vtk;
use pnpfv_core::{InterfaceMean, SchemeOrder};

#[derive(Parser)]
#[command(
    name = "pnpfv",
    version,
    about = "Finite volume solver for multi-species Poisson-Nernst-Planck systems"
)]
struct Cli {
    /// Seed for randomized self-check harnesses; the deterministic
    /// subcommands accept and ignore it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time-march a configured scenario and write diagnostics/snapshots.
    Run {
        /// TOML configuration file.
        config: PathBuf,
        /// Override the time step.
        #[arg(long)]
        tau: Option<f64>,
        /// Override the cell count on every axis.
        #[arg(long)]
        grid: Option<usize>,
        /// Override the time integrator (first|second).
        #[arg(long)]
        scheme: Option<String>,
        /// Override the interface mean (harmonic|geometric|algebraic).
        #[arg(long)]
        mean: Option<String>,
        /// Override the limiter (on|off).
        #[arg(long)]
        limiter: Option<String>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the snapshot cadence (steps).
        #[arg(long = "snapshot-every")]
        snapshot_every: Option<usize>,
    },
    /// Reproduce a convergence table (preset table1|table2|table3, or a
    /// sweep config file with keys scheme, tau_rule, grids).
    Mms {
        /// Preset name or sweep config path.
        preset: String,
        /// Cap the largest grid of the sweep.
        #[arg(long)]
        grid: Option<usize>,
        /// Also write the CSV table into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// March a closed (all no-flux) scenario to its steady state and print
    /// the per-species Boltzmann constants.
    Steady {
        /// TOML configuration file.
        config: PathBuf,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        grid: Option<usize>,
        /// Steady-state residual tolerance.
        #[arg(long, default_value_t = 1e-8)]
        residual_tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_steps: usize,
        /// Write the final state as a VTK snapshot into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> std::process::ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PNPFV_LOG", "info")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            tau,
            grid,
            scheme,
            mean,
            limiter,
            out,
            snapshot_every,
        } => {
            let mut cfg = config::load_config(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            apply_overrides(&mut cfg, tau, grid, scheme, mean, limiter)?;
            if let Some(dir) = out {
                cfg.output.dir = dir;
            }
            if let Some(k) = snapshot_every {
                if k == 0 {
                    bail!("--snapshot-every must be at least 1");
                }
                cfg.output.snapshot_every = k;
            }
            run_scenario(cfg)
        }
        Command::Mms { preset, grid, out } => run_mms(&preset, grid, out),
        Command::Steady {
            config,
            tau,
            grid,
            residual_tol,
            max_steps,
            out,
        } => {
            let mut cfg = config::load_config(&config)
                .with_context(|| format!("loading {}", config.display()))?;
            apply_overrides(&mut cfg, tau, grid, None, None, None)?;
            run_steady(cfg, residual_tol, max_steps, out)
        }
    }
}

fn apply_overrides(
    cfg: &mut RunConfig,
    tau: Option<f64>,
    grid: Option<usize>,
    scheme: Option<String>,
    mean: Option<String>,
    limiter: Option<String>,
) -> Result<()> {
    if let Some(t) = tau {
        cfg.scenario.tau = t;
    }
    if let Some(n) = grid {
        let dim = cfg.scenario.grid.dim();
        let lengths = cfg.scenario.grid.lengths();
        cfg.scenario.grid =
            pnpfv_core::Grid::new(dim, &lengths[..dim], &vec![n; dim]).context("--grid")?;
    }
    if let Some(s) = scheme {
        cfg.scenario.scheme = match s.as_str() {
            "first" => SchemeOrder::First,
            "second" => SchemeOrder::Second,
            other => bail!("unknown scheme `{other}` (expected first or second)"),
        };
    }
    if let Some(m) = mean {
        cfg.scenario.mean = match m.as_str() {
            "harmonic" => InterfaceMean::Harmonic,
            "geometric" => InterfaceMean::Geometric,
            "algebraic" => InterfaceMean::Algebraic,
            other => bail!("unknown mean `{other}`"),
        };
    }
    if let Some(l) = limiter {
        cfg.scenario.limiter = match l.as_str() {
            "on" => true,
            "off" => false,
            other => bail!("unknown limiter setting `{other}` (expected on or off)"),
        };
    }
    cfg.scenario.validate()?;
    Ok(())
}

fn snapshot(state: &State, dir: &Path, names: &[String]) -> Result<()> {
    let mut fields: Vec<(&str, &pnpfv_core::ScalarField)> = Vec::new();
    for (i, name) in names.iter().enumerate() {
        fields.push((name.as_str(), &state.rho[i]));
    }
    fields.push(("phi", &state.phi));
    let path = dir.join(format!("snapshot_{:06}.vtk", state.step));
    vtk::write_snapshot(
        &state.rho[0].grid().clone(),
        &format!("step {} time {:.6e}", state.step, state.time),
        &fields,
        &path,
    )?;
    Ok(())
}

fn run_scenario(cfg: RunConfig) -> Result<()> {
    let started = Instant::now();
    std::fs::create_dir_all(&cfg.output.dir)
        .with_context(|| format!("creating {}", cfg.output.dir.display()))?;
    let names: Vec<String> = cfg.scenario.species.iter().map(|s| s.name.clone()).collect();
    let output = cfg.output.clone();

    let mut csv = if output.diagnostics_csv {
        let file = File::create(output.dir.join("diagnostics.csv"))?;
        let mut w = BufWriter::new(file);
        write_csv_header(&mut w, &names)?;
        Some(w)
    } else {
        None
    };

    let mut marcher = Marcher::new(cfg.scenario)?;
    if output.matrix_dump {
        marcher.matrix_dump_dir = Some(output.dir.join("matrices"));
    }
    let mut io_error: Option<std::io::Error> = None;
    let (final_state, rows) = marcher.run(|state, row| {
        if let Some(w) = csv.as_mut() {
            if let Err(e) = write_csv_row(w, row) {
                io_error.get_or_insert(e);
            }
        }
        if output.vtk && state.step % output.snapshot_every == 0 {
            if let Err(e) = snapshot(state, &output.dir, &names) {
                log::error!("snapshot failed: {e}");
            }
        }
        if state.step % 50 == 0 {
            log::info!(
                "step {:6}  t = {:.6e}  min rho = {:+.3e}  energy = {:.6e}",
                row.step,
                row.time,
                row.min_density,
                row.energy
            );
        }
    })?;
    if let Some(e) = io_error {
        return Err(e.into());
    }
    if let Some(mut w) = csv {
        w.flush()?;
    }
    if output.vtk && final_state.step % output.snapshot_every != 0 {
        snapshot(&final_state, &output.dir, &names)?;
    }

    let last = rows.last().expect("at least the initial row");
    println!(
        "completed {} steps to t = {:.6e} in {:.1?}",
        final_state.step,
        final_state.time,
        started.elapsed()
    );
    for (name, mass) in names.iter().zip(&last.masses) {
        println!("  mass[{name}] = {mass:.12e}");
    }
    println!("  energy = {:.12e}", last.energy);
    println!("  min density = {:+.3e}", last.min_density);
    println!("  outputs in {}", output.dir.display());
    Ok(())
}

fn run_mms(preset: &str, grid_cap: Option<usize>, out: Option<PathBuf>) -> Result<()> {
    let (scheme, rule, mut grids): (SchemeOrder, TauRule, Vec<usize>) = match preset {
        "table1" => (SchemeOrder::First, TauRule::EqualH, vec![8, 16, 32, 64]),
        "table2" => (SchemeOrder::First, TauRule::SquaredH, vec![8, 16, 32, 64]),
        "table3" => (SchemeOrder::Second, TauRule::EqualH, vec![8, 16, 32, 64]),
        path => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("`{path}` is not a preset name or a readable file"))?;
            parse_sweep_config(&text)?
        }
    };
    if let Some(cap) = grid_cap {
        grids.retain(|&n| n <= cap);
        if grids.is_empty() {
            bail!("--grid {cap} leaves no grids in the sweep");
        }
    }
    log::info!("running sweep over grids {grids:?}");
    let started = Instant::now();
    let table = mms::convergence_sweep(scheme, rule, &grids)?;
    let mut stdout = std::io::stdout().lock();
    table.write_csv(&mut stdout)?;
    log::info!("sweep finished in {:.1?}", started.elapsed());
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir)?;
        let mut file = File::create(dir.join("error_table.csv"))?;
        table.write_csv(&mut file)?;
    }
    Ok(())
}

fn parse_sweep_config(text: &str) -> Result<(SchemeOrder, TauRule, Vec<usize>)> {
    let mut scheme = SchemeOrder::First;
    let mut rule = TauRule::EqualH;
    let mut grids = vec![8, 16, 32, 64];
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("bad sweep config line `{line}` (expected key = value)");
        };
        let (key, value) = (key.trim(), value.trim().trim_matches('"'));
        match key {
            "scheme" => {
                scheme = match value {
                    "first" => SchemeOrder::First,
                    "second" => SchemeOrder::Second,
                    other => bail!("unknown scheme `{other}`"),
                }
            }
            "tau_rule" => {
                rule = match value {
                    "h" => TauRule::EqualH,
                    "h2" | "h^2" => TauRule::SquaredH,
                    other => bail!("unknown tau rule `{other}` (expected h or h2)"),
                }
            }
            "grids" => {
                grids = value
                    .trim_start_matches('[')
                    .trim_end_matches(']')
                    .split(',')
                    .map(|s| s.trim().parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .context("parsing grids")?;
            }
            other => bail!("unknown sweep config key `{other}`"),
        }
    }
    Ok((scheme, rule, grids))
}

fn run_steady(
    cfg: RunConfig,
    residual_tol: f64,
    max_steps: usize,
    out: Option<PathBuf>,
) -> Result<()> {
    let names: Vec<String> = cfg.scenario.species.iter().map(|s| s.name.clone()).collect();
    let started = Instant::now();
    let mut marcher = Marcher::new(cfg.scenario)?;
    let (state, constants) = marcher.run_to_steady(residual_tol, max_steps)?;
    let residual = pnpfv_core::diagnostics::steady_state_residual(
        &state.rho[0].grid().clone(),
        &state.rho,
        &state.psi,
    );
    println!(
        "steady state reached after {} steps (t = {:.6e}) in {:.1?}",
        state.step,
        state.time,
        started.elapsed()
    );
    println!("  residual = {residual:.6e}");
    for (name, c) in names.iter().zip(&constants) {
        println!("  c[{name}] = {c:.12e}");
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir)?;
        snapshot(&state, &dir, &names)?;
        println!("  final state written to {}", dir.display());
    }
    Ok(())
}
