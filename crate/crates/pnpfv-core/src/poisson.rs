//! Assembly and solution of the discrete potential equation
//!
//! ```text
//! -sum_j (Phi_{a+e_j/2} - Phi_{a-e_j/2}) / h_j = 4*pi*(f_a + sum_i q_i rho_{i,a})
//! ```
//!
//! with central fluxes `Phi = eps(x_face) (phi_upper - phi_lower)/h_j` on
//! interior faces, half-cell fluxes with a factor 2 on Dirichlet faces, and
//! zero flux on no-flux faces. Without any Dirichlet face the matrix has the
//! constant vector as its exact null space; the solve then projects the right
//! hand side onto mean zero, runs the Krylov iteration in the complement, and
//! shifts the result so the first cell is exactly zero.

use crate::error::{Error, Result};
use crate::field::{face_value, AnalyticField, BoundarySpec, FaceBc, ScalarField, SpeciesSpec};
use crate::grid::{FaceId, Grid, Side};
use crate::sparse::{self, CsrMatrix, Preconditioner, SolveStats, SolverConfig};

/// How uniqueness of the potential is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaugeMode {
    /// At least one Dirichlet plane pins the potential.
    DirichletPresent,
    /// All faces are no-flux; the solution is fixed by zeroing the first cell.
    PureNeumann,
}

/// Assembled linear system for one potential solve.
#[derive(Debug, Clone)]
pub struct PoissonSystem {
    pub grid: Grid,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub gauge: GaugeMode,
}

/// Assemble the potential system at time `t` from the current densities.
///
/// `fixed_charge` holds cell values of f (plus any extra manufactured source
/// already folded in by the caller). For the pure-Neumann case the source must
/// satisfy the discrete compatibility condition; the weighted source sum is
/// checked against `1e-8 * total_volume * max|source|`.
pub fn assemble_poisson(
    grid: &Grid,
    permittivity: &AnalyticField,
    fixed_charge: &ScalarField,
    densities: &[ScalarField],
    species: &[SpeciesSpec],
    bcs: &BoundarySpec,
    t: f64,
) -> Result<PoissonSystem> {
    assert_eq!(densities.len(), species.len());
    let n = grid.n_cells();
    let counts = grid.counts();
    let strides = [1usize, counts[0], counts[0] * counts[1]];
    let gauge = if bcs.is_pure_neumann(grid.dim()) {
        GaugeMode::PureNeumann
    } else {
        GaugeMode::DirichletPresent
    };

    // source s_a = f_a + sum_i q_i rho_{i,a}
    let mut source = fixed_charge.values().to_vec();
    for (spec, rho) in species.iter().zip(densities) {
        for (s, r) in source.iter_mut().zip(rho.values()) {
            *s += spec.charge * r;
        }
    }
    for (c, s) in source.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::NonFinite {
                what: "potential source".into(),
                cell: grid.multi(c),
            });
        }
    }

    if gauge == GaugeMode::PureNeumann {
        let cell_vol = grid.cell_volume();
        let imbalance = (source.iter().sum::<f64>() * cell_vol).abs();
        let max_source = source.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bound = 1e-8 * grid.domain_volume() * max_source;
        if imbalance > bound {
            return Err(Error::IncompatibleSource { imbalance, bound });
        }
    }

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(7 * n);
    let mut values = Vec::with_capacity(7 * n);
    let mut rhs = vec![0.0; n];
    row_ptr.push(0);

    let eps_at = |face: &FaceId| -> Result<f64> {
        let e = face_value(grid, permittivity, face, t)?;
        if e <= 0.0 {
            return Err(Error::InvalidScenario(format!(
                "permittivity must be positive, got {e} at face of cell {:?}",
                face.cell
            )));
        }
        Ok(e)
    };

    for c in 0..n {
        let idx = grid.multi(c);
        let mut diag = 0.0;
        let mut rhs_c = 4.0 * std::f64::consts::PI * source[c];
        // lower neighbors in decreasing-stride order keep columns sorted
        let mut lower: [Option<(usize, f64)>; 3] = [None; 3];
        let mut upper: [Option<(usize, f64)>; 3] = [None; 3];
        for axis in 0..grid.dim() {
            let h = grid.spacing(axis);
            for side in [Side::Minus, Side::Plus] {
                let face = FaceId {
                    cell: idx,
                    axis,
                    side,
                };
                if grid.is_boundary_face(idx, axis, side) {
                    match bcs.get(axis, side) {
                        FaceBc::NoFlux => {}
                        FaceBc::Dirichlet { phi, .. } => {
                            let eps = eps_at(&face)?;
                            let w = 2.0 * eps / (h * h);
                            let trace = face_value(grid, phi, &face, t)?;
                            diag += w;
                            rhs_c += w * trace;
                        }
                    }
                } else {
                    let eps = eps_at(&face)?;
                    let w = eps / (h * h);
                    diag += w;
                    let nb = match side {
                        Side::Minus => c - strides[axis],
                        Side::Plus => c + strides[axis],
                    };
                    match side {
                        Side::Minus => lower[axis] = Some((nb, -w)),
                        Side::Plus => upper[axis] = Some((nb, -w)),
                    }
                }
            }
        }
        for k in (0..3).rev() {
            if let Some((j, v)) = lower[k] {
                col_idx.push(j);
                values.push(v);
            }
        }
        col_idx.push(c);
        values.push(diag);
        for k in 0..3 {
            if let Some((j, v)) = upper[k] {
                col_idx.push(j);
                values.push(v);
            }
        }
        row_ptr.push(col_idx.len());
        rhs[c] = rhs_c;
    }

    Ok(PoissonSystem {
        grid: *grid,
        matrix: CsrMatrix::from_parts(n, row_ptr, col_idx, values),
        rhs,
        gauge,
    })
}

/// Solve an assembled potential system.
///
/// Pure-Neumann systems are singular; ILU(0) is replaced by Jacobi there
/// because the incomplete factorization of a singular matrix yields an
/// unreliable pivot, and the Krylov iteration is kept in the mean-zero
/// complement. The returned field has cell (0,..,0) pinned to exactly zero in
/// the pure-Neumann case.
pub fn solve_poisson(
    system: &PoissonSystem,
    config: &SolverConfig,
    initial_guess: Option<&[f64]>,
) -> Result<(ScalarField, SolveStats)> {
    let (values, stats) = match system.gauge {
        GaugeMode::DirichletPresent => {
            sparse::solve(&system.matrix, &system.rhs, config, initial_guess)?
        }
        GaugeMode::PureNeumann => {
            let mut cfg = *config;
            if cfg.preconditioner == Preconditioner::Ilu0 {
                cfg.preconditioner = Preconditioner::Jacobi;
            }
            let mut rhs = system.rhs.clone();
            let mean = rhs.iter().sum::<f64>() / rhs.len() as f64;
            for v in rhs.iter_mut() {
                *v -= mean;
            }
            let (mut x, stats) =
                sparse::solve_with_options(&system.matrix, &rhs, &cfg, initial_guess, true)?;
            let shift = x[0];
            for v in x.iter_mut() {
                *v -= shift;
            }
            x[0] = 0.0;
            (x, stats)
        }
    };
    Ok((
        ScalarField::from_values(system.grid, values)?,
        stats,
    ))
}
