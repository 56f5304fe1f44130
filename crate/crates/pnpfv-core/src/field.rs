//! Cell-centered scalar fields, analytic field sampling, and the scenario
//! description (species, coefficients, boundary conditions, scheme settings).

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{FaceId, Grid};
use crate::sparse::SolverConfig;

/// A scalar function of space and time, supplied as a constant, a parsed
/// expression, or a native closure (used by the manufactured-solution harness).
#[derive(Clone)]
pub enum AnalyticField {
    Constant(f64),
    Expr(Arc<Expr>),
    Func(Arc<dyn Fn([f64; 3], f64) -> f64 + Send + Sync>),
}

impl AnalyticField {
    pub fn constant(v: f64) -> Self {
        AnalyticField::Constant(v)
    }

    pub fn parse(src: &str) -> Result<Self> {
        Ok(AnalyticField::Expr(Arc::new(Expr::parse(src)?)))
    }

    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn([f64; 3], f64) -> f64 + Send + Sync + 'static,
    {
        AnalyticField::Func(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, x: [f64; 3], t: f64) -> f64 {
        match self {
            AnalyticField::Constant(v) => *v,
            AnalyticField::Expr(e) => e.eval(x, t),
            AnalyticField::Func(f) => f(x, t),
        }
    }
}

impl fmt::Debug for AnalyticField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalyticField::Constant(v) => write!(f, "Constant({v})"),
            AnalyticField::Expr(e) => write!(f, "Expr({})", e.source()),
            AnalyticField::Func(_) => write!(f, "Func(..)"),
        }
    }
}

/// One value per grid cell, stored in flat (axis-0-fastest) order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        ScalarField {
            grid,
            values: vec![0.0; grid.n_cells()],
        }
    }

    pub fn constant(grid: Grid, v: f64) -> Self {
        ScalarField {
            grid,
            values: vec![v; grid.n_cells()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::DimensionMismatch(format!(
                "field has {} values for a grid of {} cells",
                values.len(),
                grid.n_cells()
            )));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, idx: [usize; 3]) -> f64 {
        self.values[self.grid.flat(idx)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Max absolute difference to another field on the same grid.
    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Sample an analytic field at cell midpoints (central point quadrature).
/// This is the quadrature used for initial data, including discontinuous
/// indicator data.
pub fn sample_midpoint(grid: Grid, field: &AnalyticField, t: f64) -> Result<ScalarField> {
    let mut values = Vec::with_capacity(grid.n_cells());
    for idx in grid.cells() {
        let v = field.eval(grid.cell_center(idx), t);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "sampled field".into(),
                cell: idx,
            });
        }
        values.push(v);
    }
    Ok(ScalarField { grid, values })
}

/// Evaluate an analytic field at the geometric center of a face.
pub fn face_value(grid: &Grid, field: &AnalyticField, face: &FaceId, t: f64) -> Result<f64> {
    let v = field.eval(grid.face_center(face), t);
    if !v.is_finite() {
        return Err(Error::NonFinite {
            what: "face value".into(),
            cell: face.cell,
        });
    }
    Ok(v)
}

/// Boundary condition on one boundary plane.
#[derive(Debug, Clone)]
pub enum FaceBc {
    /// Zero normal species flux and zero normal displacement field.
    NoFlux,
    /// Prescribed traces: potential and one density per species, both
    /// evaluated pointwise at face centers.
    Dirichlet {
        phi: AnalyticField,
        rho: Vec<AnalyticField>,
    },
}

impl FaceBc {
    pub fn is_dirichlet(&self) -> bool {
        matches!(self, FaceBc::Dirichlet { .. })
    }
}

/// Boundary conditions per axis and side (index 0 = minus side, 1 = plus side).
#[derive(Debug, Clone)]
pub struct BoundarySpec {
    sides: [[FaceBc; 2]; 3],
}

impl BoundarySpec {
    /// No-flux on every boundary plane.
    pub fn all_no_flux() -> Self {
        BoundarySpec {
            sides: std::array::from_fn(|_| [FaceBc::NoFlux, FaceBc::NoFlux]),
        }
    }

    pub fn set(&mut self, axis: usize, side: crate::grid::Side, bc: FaceBc) {
        self.sides[axis][side_index(side)] = bc;
    }

    pub fn get(&self, axis: usize, side: crate::grid::Side) -> &FaceBc {
        &self.sides[axis][side_index(side)]
    }

    /// True if no boundary plane carries Dirichlet data (within `dim` axes).
    pub fn is_pure_neumann(&self, dim: usize) -> bool {
        (0..dim).all(|axis| !self.sides[axis][0].is_dirichlet() && !self.sides[axis][1].is_dirichlet())
    }
}

fn side_index(side: crate::grid::Side) -> usize {
    match side {
        crate::grid::Side::Minus => 0,
        crate::grid::Side::Plus => 1,
    }
}

/// One charged species: valence charge, diffusion coefficient, and a static
/// chemical potential field.
#[derive(Debug, Clone)]
pub struct SpeciesSpec {
    pub name: String,
    /// Signed valence charge q_i.
    pub charge: f64,
    /// Diffusion coefficient D_i(x) >= D_0 > 0, checked wherever sampled.
    pub diffusion: AnalyticField,
    /// Static chemical potential mu_i(x), evaluated at t = 0.
    pub chemical_potential: AnalyticField,
}

/// Time integrator order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeOrder {
    First,
    Second,
}

/// Rule for evaluating the exponential Slotboom weight on a cell interface
/// from the two adjacent cell values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterfaceMean {
    Harmonic,
    Geometric,
    Algebraic,
}

/// Extra source terms, used by manufactured-solution runs: one explicit
/// density source per species and an additional contribution to the fixed
/// charge in the potential equation.
#[derive(Debug, Clone)]
pub struct SourceTerms {
    pub density: Vec<AnalyticField>,
    pub poisson: Option<AnalyticField>,
}

/// Complete problem description for a run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub grid: Grid,
    pub species: Vec<SpeciesSpec>,
    /// Permittivity eps(x) >= eps_0 > 0. The potential equation keeps the
    /// 4*pi source factor; scenarios written without it use eps -> 4*pi*eps.
    pub permittivity: AnalyticField,
    /// Permanent (fixed) charge density f(x).
    pub fixed_charge: AnalyticField,
    /// Thermal scale k_B*T > 0.
    pub k_bt: f64,
    pub boundary: BoundarySpec,
    /// Initial densities, one per species, non-negative.
    pub initial: Vec<AnalyticField>,
    pub scheme: SchemeOrder,
    pub mean: InterfaceMean,
    pub limiter: bool,
    /// Time step.
    pub tau: f64,
    /// End time of the run.
    pub t_end: f64,
    pub solver: SolverConfig,
    /// Optional manufactured sources.
    pub sources: Option<SourceTerms>,
    /// Stop early once the steady-state residual drops below this value.
    pub stop_at_steady: Option<f64>,
}

impl Scenario {
    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.species.is_empty() {
            return Err(Error::InvalidScenario("at least one species required".into()));
        }
        if !(self.k_bt.is_finite() && self.k_bt > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "k_bt must be positive, got {}",
                self.k_bt
            )));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "time step must be positive, got {}",
                self.tau
            )));
        }
        if self.t_end < 0.0 || !self.t_end.is_finite() {
            return Err(Error::InvalidScenario(format!(
                "end time must be non-negative, got {}",
                self.t_end
            )));
        }
        if self.initial.len() != self.species.len() {
            return Err(Error::InvalidScenario(format!(
                "{} initial densities for {} species",
                self.initial.len(),
                self.species.len()
            )));
        }
        if let Some(src) = &self.sources {
            if src.density.len() != self.species.len() {
                return Err(Error::InvalidScenario(format!(
                    "{} density sources for {} species",
                    src.density.len(),
                    self.species.len()
                )));
            }
        }
        for axis in 0..self.grid.dim() {
            for side in [crate::grid::Side::Minus, crate::grid::Side::Plus] {
                if let FaceBc::Dirichlet { rho, .. } = self.boundary.get(axis, side) {
                    if rho.len() != self.species.len() {
                        return Err(Error::InvalidScenario(format!(
                            "Dirichlet data on axis {axis} has {} density traces for {} species",
                            rho.len(),
                            self.species.len()
                        )));
                    }
                }
            }
        }
        self.solver.validate()?;
        Ok(())
    }
}
