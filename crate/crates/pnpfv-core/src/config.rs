//! Declarative run configuration: a strict TOML document describing the
//! scenario, plus output settings. Unknown keys are rejected so typos in
//! long scientific configs fail loudly instead of silently using defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::field::{
    AnalyticField, BoundarySpec, FaceBc, InterfaceMean, Scenario, SchemeOrder, SpeciesSpec,
};
use crate::grid::{Grid, Side};
use crate::sparse::{KrylovMethod, Preconditioner, SolverConfig};

/// Output settings of a run.
#[derive(Debug, Clone)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Snapshot cadence in steps (>= 1); only used when `vtk` is set.
    pub snapshot_every: usize,
    pub diagnostics_csv: bool,
    pub vtk: bool,
    pub matrix_dump: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            snapshot_every: 1,
            diagnostics_csv: true,
            vtk: false,
            matrix_dump: false,
        }
    }
}

/// Parsed and validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub output: OutputConfig,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum NumOrExpr {
    Num(f64),
    Expr(String),
}

impl NumOrExpr {
    fn to_field(&self, path: &str) -> Result<AnalyticField> {
        match self {
            NumOrExpr::Num(v) => Ok(AnalyticField::constant(*v)),
            NumOrExpr::Expr(src) => AnalyticField::parse(src).map_err(|e| Error::Config {
                path: path.into(),
                message: e.to_string(),
            }),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    grid: RawGrid,
    model: RawModel,
    species: Vec<RawSpecies>,
    #[serde(default)]
    boundaries: RawBoundaries,
    time: RawTime,
    #[serde(default)]
    scheme: RawScheme,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    dim: usize,
    lengths: Vec<f64>,
    counts: Vec<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    permittivity: NumOrExpr,
    #[serde(default)]
    fixed_charge: Option<NumOrExpr>,
    k_bt: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpecies {
    #[serde(default)]
    name: Option<String>,
    charge: f64,
    diffusion: NumOrExpr,
    #[serde(default)]
    chemical_potential: Option<NumOrExpr>,
    initial: NumOrExpr,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBoundaries {
    x_min: Option<RawBc>,
    x_max: Option<RawBc>,
    y_min: Option<RawBc>,
    y_max: Option<RawBc>,
    z_min: Option<RawBc>,
    z_max: Option<RawBc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBc {
    #[serde(rename = "type")]
    kind: String,
    phi: Option<NumOrExpr>,
    rho: Option<Vec<NumOrExpr>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    tau: f64,
    t_end: f64,
    #[serde(default)]
    stop_at_steady: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    order: Option<String>,
    mean: Option<String>,
    limiter: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    method: Option<String>,
    preconditioner: Option<String>,
    tol: Option<f64>,
    max_iter: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    snapshot_every: Option<usize>,
    diagnostics_csv: Option<bool>,
    vtk: Option<bool>,
    matrix_dump: Option<bool>,
}

fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

/// Parse a TOML document into a validated [`RunConfig`].
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| config_err("<document>", e.to_string()))?;

    let grid = Grid::new(raw.grid.dim, &raw.grid.lengths, &raw.grid.counts)
        .map_err(|e| config_err("grid", e.to_string()))?;

    if raw.species.is_empty() {
        return Err(config_err("species", "at least one species is required"));
    }
    let mut species = Vec::with_capacity(raw.species.len());
    let mut initial = Vec::with_capacity(raw.species.len());
    for (i, s) in raw.species.iter().enumerate() {
        let path = format!("species[{i}]");
        if let NumOrExpr::Num(d) = s.diffusion {
            if d <= 0.0 {
                return Err(config_err(
                    &format!("{path}.diffusion"),
                    format!("diffusion coefficient must be positive, got {d}"),
                ));
            }
        }
        species.push(SpeciesSpec {
            name: s.name.clone().unwrap_or_else(|| format!("rho{}", i + 1)),
            charge: s.charge,
            diffusion: s.diffusion.to_field(&format!("{path}.diffusion"))?,
            chemical_potential: match &s.chemical_potential {
                Some(v) => v.to_field(&format!("{path}.chemical_potential"))?,
                None => AnalyticField::constant(0.0),
            },
        });
        initial.push(s.initial.to_field(&format!("{path}.initial"))?);
    }
    let m = species.len();

    let mut boundary = BoundarySpec::all_no_flux();
    let sides = [
        (0usize, Side::Minus, "x_min", raw.boundaries.x_min.as_ref()),
        (0, Side::Plus, "x_max", raw.boundaries.x_max.as_ref()),
        (1, Side::Minus, "y_min", raw.boundaries.y_min.as_ref()),
        (1, Side::Plus, "y_max", raw.boundaries.y_max.as_ref()),
        (2, Side::Minus, "z_min", raw.boundaries.z_min.as_ref()),
        (2, Side::Plus, "z_max", raw.boundaries.z_max.as_ref()),
    ];
    for (axis, side, name, bc) in sides {
        let Some(bc) = bc else { continue };
        let path = format!("boundaries.{name}");
        if axis >= grid.dim() {
            return Err(config_err(
                &path,
                format!("axis beyond grid dimension {}", grid.dim()),
            ));
        }
        match bc.kind.as_str() {
            "no_flux" => {
                if bc.phi.is_some() || bc.rho.is_some() {
                    return Err(config_err(&path, "no_flux boundaries take no data"));
                }
            }
            "dirichlet" => {
                let phi = bc
                    .phi
                    .as_ref()
                    .ok_or_else(|| config_err(&path, "dirichlet boundary requires `phi`"))?
                    .to_field(&format!("{path}.phi"))?;
                let rho_raw = bc
                    .rho
                    .as_ref()
                    .ok_or_else(|| config_err(&path, "dirichlet boundary requires `rho`"))?;
                if rho_raw.len() != m {
                    return Err(config_err(
                        &format!("{path}.rho"),
                        format!("expected {m} density traces, got {}", rho_raw.len()),
                    ));
                }
                let mut rho = Vec::with_capacity(m);
                for (k, r) in rho_raw.iter().enumerate() {
                    rho.push(r.to_field(&format!("{path}.rho[{k}]"))?);
                }
                boundary.set(axis, side, FaceBc::Dirichlet { phi, rho });
            }
            other => {
                return Err(config_err(
                    &path,
                    format!("unknown boundary type `{other}` (expected no_flux or dirichlet)"),
                ));
            }
        }
    }

    let scheme = match raw.scheme.order.as_deref() {
        None | Some("first") => SchemeOrder::First,
        Some("second") => SchemeOrder::Second,
        Some(other) => {
            return Err(config_err(
                "scheme.order",
                format!("unknown order `{other}` (expected first or second)"),
            ))
        }
    };
    let mean = match raw.scheme.mean.as_deref() {
        None | Some("harmonic") => InterfaceMean::Harmonic,
        Some("geometric") => InterfaceMean::Geometric,
        Some("algebraic") => InterfaceMean::Algebraic,
        Some(other) => {
            return Err(config_err(
                "scheme.mean",
                format!("unknown mean `{other}` (expected harmonic, geometric or algebraic)"),
            ))
        }
    };

    let method = match raw.solver.method.as_deref() {
        None | Some("cg") => KrylovMethod::Cg,
        Some("bicgstab") => KrylovMethod::BiCgStab,
        Some(other) => {
            return Err(config_err(
                "solver.method",
                format!("unknown method `{other}` (expected cg or bicgstab)"),
            ))
        }
    };
    let preconditioner = match raw.solver.preconditioner.as_deref() {
        None | Some("ilu0") => Preconditioner::Ilu0,
        Some("jacobi") => Preconditioner::Jacobi,
        Some("none") => Preconditioner::None,
        Some(other) => {
            return Err(config_err(
                "solver.preconditioner",
                format!("unknown preconditioner `{other}` (expected none, jacobi or ilu0)"),
            ))
        }
    };
    let solver = SolverConfig {
        method,
        preconditioner,
        tol: raw.solver.tol.unwrap_or(1e-10),
        max_iter: raw.solver.max_iter,
    };

    let scenario = Scenario {
        grid,
        species,
        permittivity: raw.model.permittivity.to_field("model.permittivity")?,
        fixed_charge: match &raw.model.fixed_charge {
            Some(f) => f.to_field("model.fixed_charge")?,
            None => AnalyticField::constant(0.0),
        },
        k_bt: raw.model.k_bt,
        boundary,
        initial,
        scheme,
        mean,
        limiter: raw.scheme.limiter.unwrap_or(true),
        tau: raw.time.tau,
        t_end: raw.time.t_end,
        solver,
        sources: None,
        stop_at_steady: raw.time.stop_at_steady,
    };
    scenario
        .validate()
        .map_err(|e| config_err("<scenario>", e.to_string()))?;

    let defaults = OutputConfig::default();
    let output = OutputConfig {
        dir: raw.output.dir.unwrap_or(defaults.dir),
        snapshot_every: raw.output.snapshot_every.unwrap_or(defaults.snapshot_every),
        diagnostics_csv: raw
            .output
            .diagnostics_csv
            .unwrap_or(defaults.diagnostics_csv),
        vtk: raw.output.vtk.unwrap_or(defaults.vtk),
        matrix_dump: raw.output.matrix_dump.unwrap_or(defaults.matrix_dump),
    };
    if output.snapshot_every == 0 {
        return Err(config_err(
            "output.snapshot_every",
            "snapshot cadence must be at least 1",
        ));
    }
    Ok(RunConfig { scenario, output })
}

/// Read and parse a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}
