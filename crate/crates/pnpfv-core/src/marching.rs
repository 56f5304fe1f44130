//! Time integrators: the first-order scheme (unconditionally positive), the
//! second-order prediction-correction scheme with limiter, and the
//! steady-state driver.
//!
//! Each step advances all species with the potential(s) of the completed
//! levels, then re-solves the potential from the new densities, so the stored
//! potential is always consistent with the stored densities. Second-order
//! runs take their first step with the first-order scheme (two potential
//! levels are needed for the extrapolant).

use std::path::PathBuf;

use crate::diagnostics::{self, DiagnosticsRow};
use crate::error::{Error, Result};
use crate::field::{sample_midpoint, FaceBc, ScalarField, Scenario, SchemeOrder};
use crate::grid::{FaceId, Side};
use crate::limiter;
use crate::poisson;
use crate::sparse;
use crate::transport::{self, BoundaryPotential, DensityStepInput};

/// Previous potential level kept for the second-order extrapolant.
#[derive(Debug, Clone)]
pub struct PreviousLevel {
    pub psi: Vec<ScalarField>,
    /// Step size that led from the previous level to the current one.
    pub dt: f64,
}

/// Discrete state after `step` steps: densities, potential, and the cached
/// dimensionless potentials per species.
#[derive(Debug, Clone)]
pub struct State {
    pub step: usize,
    pub time: f64,
    pub rho: Vec<ScalarField>,
    pub phi: ScalarField,
    pub psi: Vec<ScalarField>,
    pub psi_prev: Option<PreviousLevel>,
}

impl State {
    pub fn min_density(&self) -> f64 {
        self.rho
            .iter()
            .map(|r| r.min())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_density(&self) -> f64 {
        self.rho
            .iter()
            .map(|r| r.max())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn masses(&self) -> Vec<f64> {
        self.rho.iter().map(diagnostics::total_mass).collect()
    }
}

// Cells this far below zero (relative to the species scale) count as genuine
// negativity; anything closer to zero is linear-solver round-off. Matches the
// tolerance at which solved densities count as non-negative.
const NEGATIVITY_TRIGGER: f64 = 1e-12;

/// Drives a scenario forward in time, caching the static per-species fields.
pub struct Marcher {
    scenario: Scenario,
    mu: Vec<ScalarField>,
    fixed_static: ScalarField,
    rho_max_seen: f64,
    initial_masses: Vec<f64>,
    /// When set, the first assembled system of each kind is dumped in
    /// MatrixMarket format into this directory.
    pub matrix_dump_dir: Option<PathBuf>,
    matrices_dumped: bool,
}

impl Marcher {
    pub fn new(scenario: Scenario) -> Result<Self> {
        scenario.validate()?;
        let grid = scenario.grid;
        let mu = scenario
            .species
            .iter()
            .map(|s| sample_midpoint(grid, &s.chemical_potential, 0.0))
            .collect::<Result<Vec<_>>>()?;
        let fixed_static = sample_midpoint(grid, &scenario.fixed_charge, 0.0)?;
        Ok(Marcher {
            scenario,
            mu,
            fixed_static,
            rho_max_seen: 0.0,
            initial_masses: Vec::new(),
            matrix_dump_dir: None,
            matrices_dumped: false,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    /// Cell values of the fixed charge at time `t` (static part plus any
    /// manufactured contribution). For closed (all no-flux) scenarios the
    /// uniform neutralizing background is subtracted so that the total charge
    /// f + sum_i q_i rho_i vanishes: the pure-Neumann potential problem is
    /// solvable only for neutral systems, and a constant background is the
    /// standard closure for charged data. The same neutralized charge enters
    /// the free energy, which is then the exact Lyapunov functional of the
    /// discrete flow.
    fn fixed_charge_at(&self, t: f64, densities: &[ScalarField]) -> Result<ScalarField> {
        let mut f = self.fixed_static.clone();
        if let Some(src) = &self.scenario.sources {
            if let Some(extra) = &src.poisson {
                let extra = sample_midpoint(self.scenario.grid, extra, t)?;
                for (a, b) in f.values_mut().iter_mut().zip(extra.values()) {
                    *a += b;
                }
            }
        }
        if self
            .scenario
            .boundary
            .is_pure_neumann(self.scenario.grid.dim())
        {
            let mut total: f64 = f.values().iter().sum();
            for (spec, rho) in self.scenario.species.iter().zip(densities) {
                total += spec.charge * rho.values().iter().sum::<f64>();
            }
            let background = total / self.scenario.grid.n_cells() as f64;
            for v in f.values_mut() {
                *v -= background;
            }
        }
        Ok(f)
    }

    fn psi_from(&self, phi: &ScalarField) -> Vec<ScalarField> {
        self.scenario
            .species
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let mut psi = phi.clone();
                for (p, m) in psi.values_mut().iter_mut().zip(self.mu[i].values()) {
                    *p = (spec.charge * *p + m) / self.scenario.k_bt;
                }
                psi
            })
            .collect()
    }

    fn solve_potential(
        &mut self,
        rho: &[ScalarField],
        t: f64,
        warm: Option<&[f64]>,
    ) -> Result<(ScalarField, usize)> {
        let fixed = self.fixed_charge_at(t, rho)?;
        let system = poisson::assemble_poisson(
            &self.scenario.grid,
            &self.scenario.permittivity,
            &fixed,
            rho,
            &self.scenario.species,
            &self.scenario.boundary,
            t,
        )?;
        self.dump_matrix_once("poisson", &system.matrix)?;
        let (phi, stats) = poisson::solve_poisson(&system, &self.scenario.solver, warm)?;
        Ok((phi, stats.iterations))
    }

    fn dump_matrix_once(&self, label: &str, matrix: &sparse::CsrMatrix) -> Result<()> {
        if let Some(dir) = &self.matrix_dump_dir {
            if !self.matrices_dumped {
                std::fs::create_dir_all(dir)?;
                let mut file = std::fs::File::create(dir.join(format!("{label}.mtx")))?;
                sparse::write_matrix_market(matrix, &mut file)?;
            }
        }
        Ok(())
    }

    /// Initial state: midpoint-sampled densities and the potential solved
    /// from them.
    pub fn init_state(&mut self) -> Result<State> {
        let grid = self.scenario.grid;
        let mut rho = Vec::with_capacity(self.scenario.n_species());
        for (i, init) in self.scenario.initial.iter().enumerate() {
            let field = sample_midpoint(grid, init, 0.0)?;
            if let Some(c) = field.values().iter().position(|v| *v < 0.0) {
                return Err(Error::Negative {
                    what: format!("initial density of species {i}"),
                    cell: grid.multi(c),
                    value: field.values()[c],
                });
            }
            rho.push(field);
        }
        let (phi, _) = self.solve_potential(&rho, 0.0, None)?;
        let psi = self.psi_from(&phi);
        self.initial_masses = rho.iter().map(diagnostics::total_mass).collect();
        self.rho_max_seen = rho
            .iter()
            .map(|r| r.max())
            .fold(self.rho_max_seen, f64::max);
        Ok(State {
            step: 0,
            time: 0.0,
            rho,
            phi,
            psi,
            psi_prev: None,
        })
    }

    /// Diagnostics row for the initial state.
    pub fn initial_row(&mut self, state: &State) -> Result<DiagnosticsRow> {
        let fixed = self.fixed_charge_at(state.time, &state.rho)?;
        let energy = diagnostics::discrete_energy(
            &self.scenario.grid,
            &state.rho,
            &state.phi,
            &fixed,
            &self.mu,
            &self.charges(),
            self.scenario.k_bt,
        )?;
        Ok(DiagnosticsRow {
            step: 0,
            time: state.time,
            masses: state.masses(),
            energy,
            energy_delta: 0.0,
            dissipation: 0.0,
            energy_margin: 0.0,
            min_density: state.min_density(),
            tau_star: self.tau_star(state)?,
            limiter_patches: 0,
            limiter_max_patch: 0,
            limiter_min_theta: 1.0,
            solver_iterations: 0,
            dissipation_skipped: 0,
        })
    }

    fn charges(&self) -> Vec<f64> {
        self.scenario.species.iter().map(|s| s.charge).collect()
    }

    fn tau_star(&self, state: &State) -> Result<f64> {
        diagnostics::tau_star_estimate(
            &self.scenario.grid,
            &self.scenario.species,
            &self.scenario.permittivity,
            &state.psi,
            self.scenario.k_bt,
            self.rho_max_seen,
        )
    }

    fn density_source(&self, i: usize) -> Option<&crate::field::AnalyticField> {
        self.scenario.sources.as_ref().map(|s| &s.density[i])
    }

    /// One first-order step of size `tau`: all species advance with the
    /// current psi level, then the potential is re-solved.
    pub fn step_first_order(&mut self, state: &State, tau: f64) -> Result<(State, DiagnosticsRow)> {
        let grid = self.scenario.grid;
        let t_next = state.time + tau;
        let energy_old = {
            let fixed = self.fixed_charge_at(state.time, &state.rho)?;
            diagnostics::discrete_energy(
                &grid,
                &state.rho,
                &state.phi,
                &fixed,
                &self.mu,
                &self.charges(),
                self.scenario.k_bt,
            )?
        };
        let mut iterations = 0usize;
        let mut rho_next = Vec::with_capacity(self.scenario.n_species());
        for (i, spec) in self.scenario.species.iter().enumerate() {
            let input = DensityStepInput {
                species: spec,
                species_index: i,
                k_bt: self.scenario.k_bt,
                rho_n: &state.rho[i],
                psi_eval: &state.psi[i],
                bcs: &self.scenario.boundary,
                mean: self.scenario.mean,
                tau,
                trace_time: t_next,
                boundary_potential: BoundaryPotential::At(state.time),
                // explicit source: evaluated at the known level, like psi
                source: self.density_source(i).map(|f| (f, state.time)),
            };
            let step = transport::assemble_density_step(&grid, &input)?;
            self.dump_matrix_once(&format!("density_{}", spec.name), &step.matrix)?;
            let guess = step.guess_from(&state.rho[i]);
            let (rho, stats) =
                transport::solve_density_step(&step, &self.scenario.solver, Some(&guess))?;
            iterations += stats.iterations;
            rho_next.push(rho);
        }
        let (phi_next, poisson_iters) =
            self.solve_potential(&rho_next, t_next, Some(state.phi.values()))?;
        iterations += poisson_iters;
        let psi_next = self.psi_from(&phi_next);
        if self.matrix_dump_dir.is_some() {
            self.matrices_dumped = true;
        }

        let row = self.finish_row(
            state,
            &rho_next,
            &phi_next,
            t_next,
            tau,
            energy_old,
            iterations,
            (0, 0, 1.0),
        )?;
        let next = State {
            step: state.step + 1,
            time: t_next,
            rho: rho_next,
            phi: phi_next,
            psi: psi_next,
            psi_prev: Some(PreviousLevel {
                psi: state.psi.clone(),
                dt: tau,
            }),
        };
        Ok((next, row))
    }

    /// One prediction-correction step of size `tau`. Requires a previous
    /// potential level. The predictor solves a half step with the linearly
    /// extrapolated psi; the corrector extrapolates pointwise; negative cells
    /// are repaired by the scaling limiter when enabled.
    pub fn step_second_order(
        &mut self,
        state: &State,
        tau: f64,
    ) -> Result<(State, DiagnosticsRow)> {
        let prev = state.psi_prev.as_ref().ok_or_else(|| {
            Error::InvalidScenario(
                "second-order step requires a previous level (use a first-order startup step)"
                    .into(),
            )
        })?;
        let grid = self.scenario.grid;
        let t_next = state.time + tau;
        let t_mid = state.time + 0.5 * tau;
        // linear extrapolation of psi to the half step; (3/2, -1/2) for
        // uniform steps
        let c_n = 1.0 + 0.5 * tau / prev.dt;
        let c_prev = -0.5 * tau / prev.dt;

        let energy_old = {
            let fixed = self.fixed_charge_at(state.time, &state.rho)?;
            diagnostics::discrete_energy(
                &grid,
                &state.rho,
                &state.phi,
                &fixed,
                &self.mu,
                &self.charges(),
                self.scenario.k_bt,
            )?
        };

        let mut iterations = 0usize;
        let mut rho_next = Vec::with_capacity(self.scenario.n_species());
        let mut patches_total = 0usize;
        let mut max_patch = 0usize;
        let mut min_theta = 1.0f64;
        for (i, spec) in self.scenario.species.iter().enumerate() {
            let mut psi_star = state.psi[i].clone();
            for (p, prev_p) in psi_star
                .values_mut()
                .iter_mut()
                .zip(prev.psi[i].values())
            {
                *p = c_n * *p + c_prev * prev_p;
            }
            let input = DensityStepInput {
                species: spec,
                species_index: i,
                k_bt: self.scenario.k_bt,
                rho_n: &state.rho[i],
                psi_eval: &psi_star,
                bcs: &self.scenario.boundary,
                mean: self.scenario.mean,
                tau: 0.5 * tau,
                trace_time: t_mid,
                boundary_potential: BoundaryPotential::Extrapolated {
                    t_n: state.time,
                    t_prev: state.time - prev.dt,
                    weight_n: c_n,
                    weight_prev: c_prev,
                },
                source: self.density_source(i).map(|f| (f, t_mid)),
            };
            let step = transport::assemble_density_step(&grid, &input)?;
            let guess = step.guess_from(&state.rho[i]);
            let (rho_star, stats) =
                transport::solve_density_step(&step, &self.scenario.solver, Some(&guess))?;
            iterations += stats.iterations;

            // corrector: rho^{n+1} = 2 rho* - rho^n
            let mut rho_new = rho_star;
            for (v, old) in rho_new.values_mut().iter_mut().zip(state.rho[i].values()) {
                *v = 2.0 * *v - old;
            }

            let scale = rho_new
                .values()
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()))
                .max(1.0);
            let trigger = -NEGATIVITY_TRIGGER * scale;
            if self.scenario.limiter && rho_new.values().iter().any(|v| *v < trigger) {
                let patches = limiter::apply_limiter(&mut rho_new)?;
                patches_total += patches.len();
                for p in &patches {
                    max_patch = max_patch.max(p.cells.len());
                    min_theta = min_theta.min(p.theta);
                }
            }
            if self.scenario.limiter {
                // solver round-off below the trigger is clamped, not limited
                for v in rho_new.values_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            rho_next.push(rho_new);
        }
        let (phi_next, poisson_iters) =
            self.solve_potential(&rho_next, t_next, Some(state.phi.values()))?;
        iterations += poisson_iters;
        let psi_next = self.psi_from(&phi_next);

        let row = self.finish_row(
            state,
            &rho_next,
            &phi_next,
            t_next,
            tau,
            energy_old,
            iterations,
            (patches_total, max_patch, min_theta),
        )?;
        let next = State {
            step: state.step + 1,
            time: t_next,
            rho: rho_next,
            phi: phi_next,
            psi: psi_next,
            psi_prev: Some(PreviousLevel {
                psi: state.psi.clone(),
                dt: tau,
            }),
        };
        Ok((next, row))
    }

    #[allow(clippy::too_many_arguments)]
    fn finish_row(
        &mut self,
        state: &State,
        rho_next: &[ScalarField],
        phi_next: &ScalarField,
        t_next: f64,
        tau: f64,
        energy_old: f64,
        iterations: usize,
        limiter_stats: (usize, usize, f64),
    ) -> Result<DiagnosticsRow> {
        let grid = self.scenario.grid;
        self.rho_max_seen = rho_next
            .iter()
            .map(|r| r.max())
            .fold(self.rho_max_seen, f64::max);
        let fixed_next = self.fixed_charge_at(t_next, rho_next)?;
        let energy_new = diagnostics::discrete_energy(
            &grid,
            rho_next,
            phi_next,
            &fixed_next,
            &self.mu,
            &self.charges(),
            self.scenario.k_bt,
        )?;
        let (dissipation, skipped) = diagnostics::entropy_dissipation(
            &grid,
            &self.scenario.species,
            self.scenario.mean,
            rho_next,
            &state.psi,
        )?;
        let tau_star = self.tau_star(state)?;
        let energy_delta = energy_new - energy_old;
        Ok(DiagnosticsRow {
            step: state.step + 1,
            time: t_next,
            masses: rho_next.iter().map(diagnostics::total_mass).collect(),
            energy: energy_new,
            energy_delta,
            dissipation,
            energy_margin: energy_delta + 0.5 * tau * dissipation,
            min_density: rho_next
                .iter()
                .map(|r| r.min())
                .fold(f64::INFINITY, f64::min),
            tau_star,
            limiter_patches: limiter_stats.0,
            limiter_max_patch: limiter_stats.1,
            limiter_min_theta: limiter_stats.2,
            solver_iterations: iterations,
            dissipation_skipped: skipped,
        })
    }

    /// March to the scenario end time (second-order runs start with one
    /// first-order step). The callback sees every diagnostics row, including
    /// the initial one.
    pub fn run<F>(&mut self, mut on_step: F) -> Result<(State, Vec<DiagnosticsRow>)>
    where
        F: FnMut(&State, &DiagnosticsRow),
    {
        let mut state = self.init_state()?;
        let row0 = self.initial_row(&state)?;
        on_step(&state, &row0);
        let mut rows = vec![row0];
        let t_end = self.scenario.t_end;
        let eps = 1e-12 * t_end.max(1.0);
        while state.time < t_end - eps {
            let tau = self.scenario.tau.min(t_end - state.time);
            let use_second =
                self.scenario.scheme == SchemeOrder::Second && state.psi_prev.is_some();
            let (next, row) = if use_second {
                self.step_second_order(&state, tau)?
            } else {
                self.step_first_order(&state, tau)?
            };
            state = next;
            on_step(&state, &row);
            rows.push(row);
            if let Some(tol) = self.scenario.stop_at_steady {
                let residual = diagnostics::steady_state_residual(
                    &self.scenario.grid,
                    &state.rho,
                    &state.psi,
                );
                if residual < tol {
                    break;
                }
            }
        }
        Ok((state, rows))
    }

    /// March first-order steps until the steady-state residual drops below
    /// `tol`. Requires all-no-flux boundaries. Returns the final state and
    /// the per-species constants of the discrete Boltzmann profile computed
    /// from the initial masses.
    pub fn run_to_steady(&mut self, tol: f64, max_steps: usize) -> Result<(State, Vec<f64>)> {
        if !self
            .scenario
            .boundary
            .is_pure_neumann(self.scenario.grid.dim())
        {
            return Err(Error::InvalidScenario(
                "steady-state driver requires all-no-flux boundaries".into(),
            ));
        }
        let mut state = self.init_state()?;
        let mut residual = diagnostics::steady_state_residual(
            &self.scenario.grid,
            &state.rho,
            &state.psi,
        );
        let mut steps = 0usize;
        while residual >= tol {
            if steps >= max_steps {
                return Err(Error::SteadyStateNotReached {
                    max_steps,
                    residual,
                });
            }
            let (next, _) = self.step_first_order(&state, self.scenario.tau)?;
            state = next;
            steps += 1;
            residual = diagnostics::steady_state_residual(
                &self.scenario.grid,
                &state.rho,
                &state.psi,
            );
        }
        // c_i = (initial mass) / sum |K| e^{-psi_i}, evaluated with the final psi
        let vol = self.scenario.grid.cell_volume();
        let constants = self
            .initial_masses
            .iter()
            .zip(&state.psi)
            .map(|(mass, psi)| {
                let shift = psi
                    .values()
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
                let weight: f64 =
                    psi.values().iter().map(|v| (-(v - shift)).exp()).sum::<f64>() * vol;
                mass / weight * shift.exp()
            })
            .collect();
        Ok((state, constants))
    }

    /// Largest time step for which the second-order corrector is provably
    /// non-negative at the next step (the minimum over cells of
    /// `e^{psi*} / sum_faces coupling`), evaluated in log space.
    pub fn second_order_tau_bound(&self, state: &State, tau: f64) -> Result<f64> {
        let prev = state.psi_prev.as_ref().ok_or_else(|| {
            Error::InvalidScenario("time step bound requires a previous level".into())
        })?;
        let grid = self.scenario.grid;
        let c_n = 1.0 + 0.5 * tau / prev.dt;
        let c_prev = -0.5 * tau / prev.dt;
        let mut log_bound = f64::INFINITY;
        for (i, spec) in self.scenario.species.iter().enumerate() {
            let psi_n = state.psi[i].values();
            let psi_p = prev.psi[i].values();
            let counts = grid.counts();
            let strides = [1usize, counts[0], counts[0] * counts[1]];
            for c in 0..grid.n_cells() {
                let idx = grid.multi(c);
                let psi_star_c = c_n * psi_n[c] + c_prev * psi_p[c];
                let mut terms: Vec<f64> = Vec::with_capacity(6);
                for axis in 0..grid.dim() {
                    let h = grid.spacing(axis);
                    for side in [Side::Minus, Side::Plus] {
                        let face = FaceId {
                            cell: idx,
                            axis,
                            side,
                        };
                        if grid.is_boundary_face(idx, axis, side) {
                            match self.scenario.boundary.get(axis, side) {
                                FaceBc::NoFlux => {}
                                FaceBc::Dirichlet { phi, .. } => {
                                    let phi_b = c_n
                                        * crate::field::face_value(&grid, phi, &face, state.time)?
                                        + c_prev
                                            * crate::field::face_value(
                                                &grid,
                                                phi,
                                                &face,
                                                state.time - prev.dt,
                                            )?;
                                    let mu = crate::field::face_value(
                                        &grid,
                                        &spec.chemical_potential,
                                        &face,
                                        0.0,
                                    )?;
                                    let psi_b =
                                        (spec.charge * phi_b + mu) / self.scenario.k_bt;
                                    let d =
                                        crate::field::face_value(&grid, &spec.diffusion, &face, 0.0)?;
                                    terms.push((2.0 * d / (h * h)).ln() - psi_b);
                                }
                            }
                        } else {
                            let nb = match side {
                                Side::Minus => c - strides[axis],
                                Side::Plus => c + strides[axis],
                            };
                            let psi_star_nb = c_n * psi_n[nb] + c_prev * psi_p[nb];
                            let d = crate::field::face_value(&grid, &spec.diffusion, &face, 0.0)?;
                            terms.push(
                                (d / (h * h)).ln()
                                    + transport::log_slotboom_weight(
                                        psi_star_c,
                                        psi_star_nb,
                                        self.scenario.mean,
                                    ),
                            );
                        }
                    }
                }
                if terms.is_empty() {
                    continue;
                }
                let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let log_sum = m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln();
                log_bound = log_bound.min(psi_star_c - log_sum);
            }
        }
        Ok(log_bound.exp())
    }
}

/// Convenience entry point: build a [`Marcher`] and run to the end time.
pub fn run(scenario: Scenario) -> Result<(State, Vec<DiagnosticsRow>)> {
    Marcher::new(scenario)?.run(|_, _| {})
}

/// Convenience entry point for the steady-state driver.
pub fn run_to_steady(
    scenario: Scenario,
    tol: f64,
    max_steps: usize,
) -> Result<(State, Vec<f64>)> {
    Marcher::new(scenario)?.run_to_steady(tol, max_steps)
}

/// Convenience entry point for the initial state.
pub fn init_state(scenario: Scenario) -> Result<State> {
    Marcher::new(scenario)?.init_state()
}
