//! Semi-implicit density update in the Slotboom variable.
//!
//! One step solves, per species, the linear system obtained from
//!
//! ```text
//! (rho^{n+1}_a - rho^n_a)/tau = sum_j (C_{a+e_j/2} - C_{a-e_j/2}) / h_j
//! C_face = D(x_face) w_face (G_upper - G_lower) / h_j,   G = rho^{n+1} e^psi
//! ```
//!
//! where `w_face` is an interface mean (harmonic, geometric, or algebraic) of
//! `e^{-psi}` and `psi` is the dimensionless potential of the evaluation level
//! (`psi^n` for the first-order scheme, the two-level extrapolant for the
//! second-order predictor). The unknown is G, which makes the matrix symmetric
//! and strictly diagonally dominant, so the solved densities are non-negative
//! for any time step.
//!
//! Every equation is homogeneous of degree zero under a common rescaling of
//! `e^psi`, so psi is shifted by its maximum before exponentiation; the shift
//! cancels identically and keeps `G = rho e^psi` bounded by `max rho`.

use crate::error::{Error, Result};
use crate::field::{
    face_value, AnalyticField, BoundarySpec, FaceBc, InterfaceMean, ScalarField, SpeciesSpec,
};
use crate::grid::{FaceId, Grid, Side};
use crate::sparse::{self, CsrMatrix, SolveStats, SolverConfig};

/// Interface mean of `e^{-psi}` from the two adjacent cell values, computed in
/// a log-stable form (largest exponent factored out), so the result is finite
/// and positive whenever the mean itself is representable.
pub fn slotboom_weight(psi_left: f64, psi_right: f64, kind: InterfaceMean) -> f64 {
    let a = -psi_left;
    let b = -psi_right;
    let (m, big) = if a <= b { (a, b) } else { (b, a) };
    match kind {
        // 2 e^{a+b} / (e^a + e^b) = 2 e^m / (1 + e^{m-M})
        InterfaceMean::Harmonic => 2.0 * m.exp() / (1.0 + (m - big).exp()),
        // e^{(a+b)/2}
        InterfaceMean::Geometric => (0.5 * (a + b)).exp(),
        // (e^a + e^b)/2 = e^M (1 + e^{m-M}) / 2
        InterfaceMean::Algebraic => 0.5 * big.exp() * (1.0 + (m - big).exp()),
    }
}

/// log of [`slotboom_weight`], exact in exponent space; used for the
/// second-order time step bound without forming any exponential.
pub fn log_slotboom_weight(psi_left: f64, psi_right: f64, kind: InterfaceMean) -> f64 {
    let a = -psi_left;
    let b = -psi_right;
    let (m, big) = if a <= b { (a, b) } else { (b, a) };
    match kind {
        InterfaceMean::Harmonic => std::f64::consts::LN_2 + m - (m - big).exp().ln_1p(),
        InterfaceMean::Geometric => 0.5 * (a + b),
        InterfaceMean::Algebraic => big + (m - big).exp().ln_1p() - std::f64::consts::LN_2,
    }
}

/// Potential trace used to build the boundary Slotboom weight on Dirichlet
/// faces: either phi^b at one time level or a two-level linear combination
/// (the second-order predictor's extrapolant).
#[derive(Debug, Clone, Copy)]
pub enum BoundaryPotential {
    At(f64),
    Extrapolated {
        t_n: f64,
        t_prev: f64,
        weight_n: f64,
        weight_prev: f64,
    },
}

impl BoundaryPotential {
    fn eval(&self, phi: &AnalyticField, grid: &Grid, face: &FaceId) -> Result<f64> {
        match *self {
            BoundaryPotential::At(t) => face_value(grid, phi, face, t),
            BoundaryPotential::Extrapolated {
                t_n,
                t_prev,
                weight_n,
                weight_prev,
            } => Ok(weight_n * face_value(grid, phi, face, t_n)?
                + weight_prev * face_value(grid, phi, face, t_prev)?),
        }
    }
}

/// Assembled linear system of one density step for one species, in the
/// shifted Slotboom unknown `G = rho^{n+1} e^{psi - shift}`.
#[derive(Debug, Clone)]
pub struct DensityStep {
    pub grid: Grid,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// psi_eval minus the shift, per cell (all entries <= 0).
    pub shifted_psi: Vec<f64>,
    pub shift: f64,
}

impl DensityStep {
    /// Warm-start guess `G = rho e^{shifted_psi}` from a density iterate.
    pub fn guess_from(&self, rho: &ScalarField) -> Vec<f64> {
        rho.values()
            .iter()
            .zip(&self.shifted_psi)
            .map(|(r, p)| r * p.exp())
            .collect()
    }

    /// Recover the density from the Slotboom solution.
    pub fn recover_density(&self, g: &[f64]) -> Result<ScalarField> {
        let values: Vec<f64> = g
            .iter()
            .zip(&self.shifted_psi)
            .map(|(gi, p)| gi * (-p).exp())
            .collect();
        ScalarField::from_values(self.grid, values)
    }
}

/// Inputs of one density step that marching supplies per species.
pub struct DensityStepInput<'a> {
    pub species: &'a SpeciesSpec,
    pub species_index: usize,
    pub k_bt: f64,
    /// Current density iterate, must be non-negative.
    pub rho_n: &'a ScalarField,
    /// Cell values of psi at the evaluation level (psi^n or extrapolant).
    pub psi_eval: &'a ScalarField,
    pub bcs: &'a BoundarySpec,
    pub mean: InterfaceMean,
    /// Step size of this solve (tau, or tau/2 in the predictor).
    pub tau: f64,
    /// Time at which Dirichlet density traces are evaluated.
    pub trace_time: f64,
    /// Time level(s) of the boundary potential in the Dirichlet weight.
    pub boundary_potential: BoundaryPotential,
    /// Optional explicit source: `rhs += tau * f(x_cell, time)`.
    pub source: Option<(&'a AnalyticField, f64)>,
}

/// Assemble the symmetric Slotboom system for one species.
pub fn assemble_density_step(grid: &Grid, input: &DensityStepInput) -> Result<DensityStep> {
    let n = grid.n_cells();
    let counts = grid.counts();
    let strides = [1usize, counts[0], counts[0] * counts[1]];
    let rho_n = input.rho_n.values();
    let psi = input.psi_eval.values();
    assert_eq!(rho_n.len(), n);
    assert_eq!(psi.len(), n);

    let rho_max_abs = rho_n.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (c, (&r, &p)) in rho_n.iter().zip(psi).enumerate() {
        if !p.is_finite() {
            return Err(Error::NonFinite {
                what: format!("psi for species {}", input.species_index),
                cell: grid.multi(c),
            });
        }
        if r < -1e-12 * rho_max_abs {
            return Err(Error::Negative {
                what: format!("density iterate for species {}", input.species_index),
                cell: grid.multi(c),
                value: r,
            });
        }
    }

    // Boundary psi^b per Dirichlet face of this species, and the common shift.
    let q = input.species.charge;
    let psi_b_of = |face: &FaceId, phi: &AnalyticField| -> Result<f64> {
        let phi_b = input.boundary_potential.eval(phi, grid, face)?;
        let mu = face_value(grid, &input.species.chemical_potential, face, 0.0)?;
        Ok((q * phi_b + mu) / input.k_bt)
    };

    let mut shift = psi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for axis in 0..grid.dim() {
        for side in [Side::Minus, Side::Plus] {
            if let FaceBc::Dirichlet { phi, .. } = input.bcs.get(axis, side) {
                for face in grid.boundary_faces(axis, side) {
                    shift = shift.max(psi_b_of(&face, phi)?);
                }
            }
        }
    }

    let shifted_psi: Vec<f64> = psi.iter().map(|p| p - shift).collect();

    let diffusion_at = |face: &FaceId| -> Result<f64> {
        let d = face_value(grid, &input.species.diffusion, face, 0.0)?;
        if d <= 0.0 {
            return Err(Error::InvalidScenario(format!(
                "diffusion coefficient must be positive, got {d} at face of cell {:?}",
                face.cell
            )));
        }
        Ok(d)
    };

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(7 * n);
    let mut values = Vec::with_capacity(7 * n);
    let mut rhs = vec![0.0; n];
    row_ptr.push(0);

    for c in 0..n {
        let idx = grid.multi(c);
        let mut diag = (-shifted_psi[c]).exp();
        let mut rhs_c = rho_n[c].max(0.0);
        if let Some((f, t_src)) = input.source {
            rhs_c += input.tau * f.eval(grid.cell_center(idx), t_src);
        }
        let mut lower: [Option<(usize, f64)>; 3] = [None; 3];
        let mut upper: [Option<(usize, f64)>; 3] = [None; 3];
        for axis in 0..grid.dim() {
            let h = grid.spacing(axis);
            let lam = input.tau / (h * h);
            for side in [Side::Minus, Side::Plus] {
                let face = FaceId {
                    cell: idx,
                    axis,
                    side,
                };
                if grid.is_boundary_face(idx, axis, side) {
                    match input.bcs.get(axis, side) {
                        FaceBc::NoFlux => {}
                        FaceBc::Dirichlet { phi, rho } => {
                            let d = diffusion_at(&face)?;
                            let psi_b = psi_b_of(&face, phi)? - shift;
                            let trace =
                                face_value(grid, &rho[input.species_index], &face, input.trace_time)?;
                            if trace < 0.0 {
                                return Err(Error::Negative {
                                    what: format!(
                                        "Dirichlet density trace for species {}",
                                        input.species_index
                                    ),
                                    cell: idx,
                                    value: trace,
                                });
                            }
                            // weight e^{-psi_b} on the matrix side; the trace
                            // term carries e^{-psi_b} e^{+psi_b} = 1 exactly
                            diag += 2.0 * lam * d * (-psi_b).exp();
                            rhs_c += 2.0 * lam * d * trace;
                        }
                    }
                } else {
                    let d = diffusion_at(&face)?;
                    let nb = match side {
                        Side::Minus => c - strides[axis],
                        Side::Plus => c + strides[axis],
                    };
                    let w = slotboom_weight(shifted_psi[c], shifted_psi[nb], input.mean);
                    let coupling = lam * d * w;
                    if !coupling.is_finite() {
                        return Err(Error::NonFinite {
                            what: format!(
                                "interface weight for species {} (psi range too large)",
                                input.species_index
                            ),
                            cell: idx,
                        });
                    }
                    diag += coupling;
                    match side {
                        Side::Minus => lower[axis] = Some((nb, -coupling)),
                        Side::Plus => upper[axis] = Some((nb, -coupling)),
                    }
                }
            }
        }
        if !diag.is_finite() || !rhs_c.is_finite() {
            return Err(Error::NonFinite {
                what: format!("density system row for species {}", input.species_index),
                cell: idx,
            });
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

    Ok(DensityStep {
        grid: *grid,
        matrix: CsrMatrix::from_parts(n, row_ptr, col_idx, values),
        rhs,
        shifted_psi,
        shift,
    })
}

/// Solve an assembled density step and recover the density.
pub fn solve_density_step(
    step: &DensityStep,
    config: &SolverConfig,
    initial_guess: Option<&[f64]>,
) -> Result<(ScalarField, SolveStats)> {
    let (g, stats) = sparse::solve(&step.matrix, &step.rhs, config, initial_guess)?;
    Ok((step.recover_density(&g)?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::BoundarySpec;

    fn pure_diffusion_species() -> SpeciesSpec {
        SpeciesSpec {
            name: "n".into(),
            charge: 0.0,
            diffusion: AnalyticField::constant(1.0),
            chemical_potential: AnalyticField::constant(0.0),
        }
    }

    fn two_cell_input<'a>(
        species: &'a SpeciesSpec,
        rho: &'a ScalarField,
        psi: &'a ScalarField,
        bcs: &'a BoundarySpec,
        tau: f64,
    ) -> DensityStepInput<'a> {
        DensityStepInput {
            species,
            species_index: 0,
            k_bt: 1.0,
            rho_n: rho,
            psi_eval: psi,
            bcs,
            mean: InterfaceMean::Harmonic,
            tau,
            trace_time: tau,
            boundary_potential: BoundaryPotential::At(0.0),
            source: None,
        }
    }

    #[test]
    fn weight_examples() {
        for kind in [
            InterfaceMean::Harmonic,
            InterfaceMean::Geometric,
            InterfaceMean::Algebraic,
        ] {
            assert!((slotboom_weight(0.0, 0.0, kind) - 1.0).abs() < 1e-15);
            // equal arguments give e^{-c} for every mean
            for c in [-3.0, 0.7, 40.0] {
                let w = slotboom_weight(c, c, kind);
                assert!((w - (-c).exp()).abs() <= 1e-14 * (-c).exp());
            }
        }
        // psi_l = 0, psi_r = ln 3
        let r = 3.0f64.ln();
        assert!((slotboom_weight(0.0, r, InterfaceMean::Harmonic) - 0.5).abs() < 1e-15);
        assert!(
            (slotboom_weight(0.0, r, InterfaceMean::Geometric) - 1.0 / 3.0f64.sqrt()).abs()
                < 1e-15
        );
        assert!((slotboom_weight(0.0, r, InterfaceMean::Algebraic) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn weight_is_stable_for_large_arguments() {
        // naive 2 e^{a+b}/(e^a + e^b) overflows at a = b = 400
        let w = slotboom_weight(-400.0, -400.0, InterfaceMean::Harmonic);
        assert!(w.is_finite());
        assert!((w.ln() - 400.0).abs() < 1e-9);
        let w = slotboom_weight(-400.0, -390.0, InterfaceMean::Harmonic);
        assert!(w.is_finite() && w > 0.0);
        // log form agrees with the direct form in a moderate range
        for kind in [
            InterfaceMean::Harmonic,
            InterfaceMean::Geometric,
            InterfaceMean::Algebraic,
        ] {
            for (l, r) in [(0.3, -1.2), (5.0, 4.0), (-2.0, 7.0)] {
                let direct = slotboom_weight(l, r, kind).ln();
                let logged = log_slotboom_weight(l, r, kind);
                assert!((direct - logged).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_cell_pure_diffusion_hand_solve() {
        // 1D, N=2, h=1, D=1, psi=0, no-flux, rho^n=[2,0], tau=1:
        // system {2 G1 - G2 = 2, -G1 + 2 G2 = 0}, solution rho^{n+1} = [4/3, 2/3]
        let grid = Grid::new(1, &[2.0], &[2]).unwrap();
        let species = pure_diffusion_species();
        let rho = ScalarField::from_values(grid, vec![2.0, 0.0]).unwrap();
        let psi = ScalarField::zeros(grid);
        let bcs = BoundarySpec::all_no_flux();
        let input = two_cell_input(&species, &rho, &psi, &bcs, 1.0);
        let step = assemble_density_step(&grid, &input).unwrap();
        assert_eq!(step.matrix.get(0, 0), 2.0);
        assert_eq!(step.matrix.get(0, 1), -1.0);
        assert_eq!(step.matrix.get(1, 0), -1.0);
        assert_eq!(step.matrix.get(1, 1), 2.0);
        assert_eq!(step.rhs, vec![2.0, 0.0]);
        let (next, _) = solve_density_step(&step, &SolverConfig::default(), None).unwrap();
        assert!((next.values()[0] - 4.0 / 3.0).abs() < 1e-12);
        assert!((next.values()[1] - 2.0 / 3.0).abs() < 1e-12);
        // mass conserved
        let mass: f64 = next.values().iter().sum::<f64>() * grid.cell_volume();
        assert!((mass - 2.0).abs() < 1e-12);
    }

    #[test]
    fn vanishing_step_keeps_the_density() {
        let grid = Grid::new(1, &[2.0], &[2]).unwrap();
        let species = pure_diffusion_species();
        let rho = ScalarField::from_values(grid, vec![2.0, 0.0]).unwrap();
        let psi = ScalarField::zeros(grid);
        let bcs = BoundarySpec::all_no_flux();
        let input = two_cell_input(&species, &rho, &psi, &bcs, 1e-300);
        let step = assemble_density_step(&grid, &input).unwrap();
        let (next, _) = solve_density_step(&step, &SolverConfig::default(), None).unwrap();
        assert!((next.values()[0] - 2.0).abs() < 1e-10);
        assert!(next.values()[1].abs() < 1e-10);
    }

    #[test]
    fn constants_are_steady_for_pure_diffusion() {
        let grid = Grid::new(1, &[2.0], &[2]).unwrap();
        let species = pure_diffusion_species();
        let rho = ScalarField::from_values(grid, vec![1.0, 1.0]).unwrap();
        let psi = ScalarField::zeros(grid);
        let bcs = BoundarySpec::all_no_flux();
        let input = two_cell_input(&species, &rho, &psi, &bcs, 1.0);
        let step = assemble_density_step(&grid, &input).unwrap();
        let (next, _) = solve_density_step(&step, &SolverConfig::default(), None).unwrap();
        assert!((next.values()[0] - 1.0).abs() < 1e-12);
        assert!((next.values()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_input_density_is_rejected() {
        let grid = Grid::new(1, &[2.0], &[2]).unwrap();
        let species = pure_diffusion_species();
        let rho = ScalarField::from_values(grid, vec![2.0, -0.5]).unwrap();
        let psi = ScalarField::zeros(grid);
        let bcs = BoundarySpec::all_no_flux();
        let input = two_cell_input(&species, &rho, &psi, &bcs, 1.0);
        assert!(matches!(
            assemble_density_step(&grid, &input),
            Err(Error::Negative { .. })
        ));
    }

    #[test]
    fn negative_dirichlet_trace_is_rejected() {
        let grid = Grid::new(1, &[2.0], &[2]).unwrap();
        let species = pure_diffusion_species();
        let rho = ScalarField::from_values(grid, vec![1.0, 1.0]).unwrap();
        let psi = ScalarField::zeros(grid);
        let mut bcs = BoundarySpec::all_no_flux();
        bcs.set(
            0,
            Side::Minus,
            FaceBc::Dirichlet {
                phi: AnalyticField::constant(0.0),
                rho: vec![AnalyticField::constant(-1.0)],
            },
        );
        let input = two_cell_input(&species, &rho, &psi, &bcs, 1.0);
        assert!(matches!(
            assemble_density_step(&grid, &input),
            Err(Error::Negative { .. })
        ));
    }

    #[test]
    fn mean_kinds_agree_for_constant_psi() {
        let grid = Grid::new(2, &[1.0, 1.0], &[3, 3]).unwrap();
        let species = pure_diffusion_species();
        let rho =
            ScalarField::from_values(grid, (0..9).map(|i| i as f64 * 0.3).collect()).unwrap();
        let psi = ScalarField::constant(grid, 1.7);
        let bcs = BoundarySpec::all_no_flux();
        let mut mats = Vec::new();
        for mean in [
            InterfaceMean::Harmonic,
            InterfaceMean::Geometric,
            InterfaceMean::Algebraic,
        ] {
            let input = DensityStepInput {
                mean,
                ..two_cell_input(&species, &rho, &psi, &bcs, 0.4)
            };
            mats.push(assemble_density_step(&grid, &input).unwrap());
        }
        for m in &mats[1..] {
            assert_eq!(m.matrix, mats[0].matrix);
            assert_eq!(m.rhs, mats[0].rhs);
        }
    }

    #[test]
    fn common_psi_shift_cancels() {
        // the assembled system and the recovered density are invariant under
        // psi -> psi + const
        let grid = Grid::new(1, &[1.0], &[5]).unwrap();
        let species = pure_diffusion_species();
        let rho =
            ScalarField::from_values(grid, vec![0.3, 1.2, 0.0, 2.0, 0.5]).unwrap();
        let psi0 =
            ScalarField::from_values(grid, vec![-0.4, 0.9, 0.1, -1.3, 0.6]).unwrap();
        let mut psi1 = psi0.clone();
        for v in psi1.values_mut() {
            *v += 37.0;
        }
        let bcs = BoundarySpec::all_no_flux();
        let a = assemble_density_step(&grid, &two_cell_input(&species, &rho, &psi0, &bcs, 0.7))
            .unwrap();
        let b = assemble_density_step(&grid, &two_cell_input(&species, &rho, &psi1, &bcs, 0.7))
            .unwrap();
        // identical up to the round-off of (psi + c) - max(psi + c)
        for i in 0..5 {
            for j in 0..5 {
                let (va, vb) = (a.matrix.get(i, j), b.matrix.get(i, j));
                assert!((va - vb).abs() <= 1e-13 * va.abs().max(1.0));
            }
        }
        assert_eq!(a.rhs, b.rhs);
        let (ra, _) = solve_density_step(&a, &SolverConfig::default(), None).unwrap();
        let (rb, _) = solve_density_step(&b, &SolverConfig::default(), None).unwrap();
        for (x, y) in ra.values().iter().zip(rb.values()) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn assembled_matrix_is_symmetric_and_diagonally_dominant() {
        let grid = Grid::new(3, &[1.0, 1.0, 1.0], &[4, 3, 2]).unwrap();
        let species = SpeciesSpec {
            name: "p".into(),
            charge: 1.0,
            diffusion: AnalyticField::parse("1 + 0.2*x").unwrap(),
            chemical_potential: AnalyticField::constant(0.3),
        };
        let n = grid.n_cells();
        let rho =
            ScalarField::from_values(grid, (0..n).map(|i| (i % 5) as f64 * 0.4).collect())
                .unwrap();
        let psi =
            ScalarField::from_values(grid, (0..n).map(|i| ((i * 7) % 11) as f64 * 0.2 - 1.0).collect())
                .unwrap();
        let bcs = BoundarySpec::all_no_flux();
        let input = two_cell_input(&species, &rho, &psi, &bcs, 0.9);
        let step = assemble_density_step(&grid, &input).unwrap();
        let a = &step.matrix;
        assert!(a.max_asymmetry() <= 1e-12 * a.max_abs());
        for i in 0..n {
            let (cols, vals) = a.row(i);
            let mut diag = 0.0;
            let mut off = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                if j == i {
                    diag = v;
                } else {
                    off += v.abs();
                }
            }
            assert!(diag > off, "row {i} not strictly dominant");
        }
    }
}
