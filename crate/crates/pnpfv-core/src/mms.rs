//! Manufactured-solution harness for convergence studies.
//!
//! The built-in case is a two-species system on the unit cube with exact
//! fields
//!
//! ```text
//! rho1 = 4 (x^2(1-x)^2 + y(1-y)) e^{-t}
//! rho2 = (y(1-y) + z^2(1-z)^2) e^{-t}
//! phi  = (x^2(1-x)^2 + y(1-y) + z^2(1-z)^2) e^{-t}
//! ```
//!
//! satisfying
//!
//! ```text
//! d_t rho1 = div(grad rho1 + rho1 grad phi) + f1
//! d_t rho2 = div(grad rho2 - rho2 grad phi) + f2
//! -lap phi = rho1 - rho2 + f3
//! ```
//!
//! with Dirichlet data on the y = 0, 1 planes and no-flux faces elsewhere
//! (the exact fields have zero normal flux there, asserted before each run).
//! The source terms are hand-derived closed forms; they are validated against
//! central finite differences of the exact fields before use.

use std::io::Write;

use crate::diagnostics::l1_error;
use crate::error::{Error, Result};
use crate::field::{
    AnalyticField, BoundarySpec, FaceBc, InterfaceMean, Scenario, SchemeOrder, SourceTerms,
    SpeciesSpec,
};
use crate::grid::{Grid, Side};
use crate::marching::Marcher;
use crate::sparse::SolverConfig;

// bump(u) = u^2 (1-u)^2 and humps used by the exact fields
fn bump(u: f64) -> f64 {
    let v = u * (1.0 - u);
    v * v
}

fn bump_d(u: f64) -> f64 {
    2.0 * u * (1.0 - u) * (1.0 - 2.0 * u)
}

fn bump_dd(u: f64) -> f64 {
    2.0 * (1.0 - 6.0 * u + 6.0 * u * u)
}

fn hump(u: f64) -> f64 {
    u * (1.0 - u)
}

fn hump_d(u: f64) -> f64 {
    1.0 - 2.0 * u
}

// hump'' = -2

fn exact_rho1(p: [f64; 3], t: f64) -> f64 {
    4.0 * (bump(p[0]) + hump(p[1])) * (-t).exp()
}

fn exact_rho2(p: [f64; 3], t: f64) -> f64 {
    (hump(p[1]) + bump(p[2])) * (-t).exp()
}

fn exact_phi(p: [f64; 3], t: f64) -> f64 {
    (bump(p[0]) + hump(p[1]) + bump(p[2])) * (-t).exp()
}

fn grad_rho1(p: [f64; 3], t: f64) -> [f64; 3] {
    let e = (-t).exp();
    [4.0 * bump_d(p[0]) * e, 4.0 * hump_d(p[1]) * e, 0.0]
}

fn grad_rho2(p: [f64; 3], t: f64) -> [f64; 3] {
    let e = (-t).exp();
    [0.0, hump_d(p[1]) * e, bump_d(p[2]) * e]
}

fn grad_phi(p: [f64; 3], t: f64) -> [f64; 3] {
    let e = (-t).exp();
    [bump_d(p[0]) * e, hump_d(p[1]) * e, bump_d(p[2]) * e]
}

fn lap_phi(p: [f64; 3], t: f64) -> f64 {
    (bump_dd(p[0]) - 2.0 + bump_dd(p[2])) * (-t).exp()
}

// f1 = d_t rho1 - lap rho1 - grad rho1 . grad phi - rho1 lap phi
fn source_rho1(p: [f64; 3], t: f64) -> f64 {
    let e = (-t).exp();
    let rho1 = exact_rho1(p, t);
    let lap_rho1 = 4.0 * (bump_dd(p[0]) - 2.0) * e;
    let g1 = grad_rho1(p, t);
    let gp = grad_phi(p, t);
    let advect = g1[0] * gp[0] + g1[1] * gp[1] + g1[2] * gp[2];
    -rho1 - lap_rho1 - advect - rho1 * lap_phi(p, t)
}

// f2 = d_t rho2 - lap rho2 + grad rho2 . grad phi + rho2 lap phi
fn source_rho2(p: [f64; 3], t: f64) -> f64 {
    let e = (-t).exp();
    let rho2 = exact_rho2(p, t);
    let lap_rho2 = (-2.0 + bump_dd(p[2])) * e;
    let g2 = grad_rho2(p, t);
    let gp = grad_phi(p, t);
    let advect = g2[0] * gp[0] + g2[1] * gp[1] + g2[2] * gp[2];
    -rho2 - lap_rho2 + advect + rho2 * lap_phi(p, t)
}

// f3 = -lap phi - rho1 + rho2
fn source_poisson(p: [f64; 3], t: f64) -> f64 {
    -lap_phi(p, t) - exact_rho1(p, t) + exact_rho2(p, t)
}

/// The exact triple, its derived sources, and the fixed problem parameters
/// (charges +1/-1, unit diffusion, unit thermal scale, Dirichlet planes at
/// y = 0, 1).
pub struct ManufacturedCase {
    pub exact_rho1: AnalyticField,
    pub exact_rho2: AnalyticField,
    pub exact_phi: AnalyticField,
    pub source_rho1: AnalyticField,
    pub source_rho2: AnalyticField,
    pub source_poisson: AnalyticField,
}

impl ManufacturedCase {
    /// Build the case and validate the hand-derived sources against the
    /// finite-difference oracle (aborts on disagreement).
    pub fn new() -> Result<Self> {
        validate_sources()?;
        Ok(ManufacturedCase {
            exact_rho1: AnalyticField::from_fn(exact_rho1),
            exact_rho2: AnalyticField::from_fn(exact_rho2),
            exact_phi: AnalyticField::from_fn(exact_phi),
            source_rho1: AnalyticField::from_fn(source_rho1),
            source_rho2: AnalyticField::from_fn(source_rho2),
            source_poisson: AnalyticField::from_fn(source_poisson),
        })
    }

    /// Assert that the exact fields carry zero normal flux on every no-flux
    /// face center of `grid` (x and z planes). Errors beyond 1e-12.
    pub fn check_no_flux_faces(&self, grid: &Grid) -> Result<()> {
        for &t in &[0.0, 0.5, 1.0] {
            for axis in [0usize, 2] {
                for side in [Side::Minus, Side::Plus] {
                    for face in grid.boundary_faces(axis, side) {
                        let x = grid.face_center(&face);
                        let gp = grad_phi(x, t)[axis];
                        let j1 = grad_rho1(x, t)[axis] + exact_rho1(x, t) * gp;
                        let j2 = grad_rho2(x, t)[axis] - exact_rho2(x, t) * gp;
                        if gp.abs() > 1e-12 || j1.abs() > 1e-12 || j2.abs() > 1e-12 {
                            return Err(Error::InvalidScenario(format!(
                                "exact fields are not flux-free on face {:?} (phi_n = {gp:.3e}, j1_n = {j1:.3e}, j2_n = {j2:.3e})",
                                face
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Full scenario on an n^3 grid with time step `tau`.
    pub fn scenario(
        &self,
        n: usize,
        tau: f64,
        scheme: SchemeOrder,
        limiter: bool,
    ) -> Result<Scenario> {
        let grid = Grid::new(3, &[1.0; 3], &[n; 3])?;
        self.check_no_flux_faces(&grid)?;
        let species = vec![
            SpeciesSpec {
                name: "rho1".into(),
                charge: 1.0,
                diffusion: AnalyticField::constant(1.0),
                chemical_potential: AnalyticField::constant(0.0),
            },
            SpeciesSpec {
                name: "rho2".into(),
                charge: -1.0,
                diffusion: AnalyticField::constant(1.0),
                chemical_potential: AnalyticField::constant(0.0),
            },
        ];
        let mut boundary = BoundarySpec::all_no_flux();
        for side in [Side::Minus, Side::Plus] {
            boundary.set(
                1,
                side,
                FaceBc::Dirichlet {
                    phi: self.exact_phi.clone(),
                    rho: vec![self.exact_rho1.clone(), self.exact_rho2.clone()],
                },
            );
        }
        Ok(Scenario {
            grid,
            species,
            permittivity: AnalyticField::constant(4.0 * std::f64::consts::PI),
            fixed_charge: AnalyticField::constant(0.0),
            k_bt: 1.0,
            boundary,
            initial: vec![self.exact_rho1.clone(), self.exact_rho2.clone()],
            scheme,
            mean: InterfaceMean::Harmonic,
            limiter,
            tau,
            t_end: 1.0,
            solver: SolverConfig {
                tol: 1e-11,
                ..SolverConfig::default()
            },
            sources: Some(SourceTerms {
                density: vec![self.source_rho1.clone(), self.source_rho2.clone()],
                poisson: Some(self.source_poisson.clone()),
            }),
            stop_at_steady: None,
        })
    }
}

/// Central finite differences of the exact fields, the independent oracle for
/// the hand-derived sources.
fn validate_sources() -> Result<()> {
    let dx = 1e-4;
    let dt = 1e-5;
    let fd_grad = |f: &dyn Fn([f64; 3], f64) -> f64, p: [f64; 3], t: f64| -> [f64; 3] {
        let mut g = [0.0; 3];
        for j in 0..3 {
            let mut hi = p;
            let mut lo = p;
            hi[j] += dx;
            lo[j] -= dx;
            g[j] = (f(hi, t) - f(lo, t)) / (2.0 * dx);
        }
        g
    };
    let fd_lap = |f: &dyn Fn([f64; 3], f64) -> f64, p: [f64; 3], t: f64| -> f64 {
        let mut acc = 0.0;
        for j in 0..3 {
            let mut hi = p;
            let mut lo = p;
            hi[j] += dx;
            lo[j] -= dx;
            acc += (f(hi, t) - 2.0 * f(p, t) + f(lo, t)) / (dx * dx);
        }
        acc
    };
    let fd_dt = |f: &dyn Fn([f64; 3], f64) -> f64, p: [f64; 3], t: f64| -> f64 {
        (f(p, t + dt) - f(p, t - dt)) / (2.0 * dt)
    };

    // deterministic pseudo-random interior points
    let mut seed = 0x9e3779b97f4a7c15u64;
    let mut next = move || {
        seed ^= seed << 13;
        seed ^= seed >> 7;
        seed ^= seed << 17;
        (seed >> 11) as f64 / (1u64 << 53) as f64
    };
    for k in 0..100 {
        let p = [
            0.05 + 0.9 * next(),
            0.05 + 0.9 * next(),
            0.05 + 0.9 * next(),
        ];
        let t = next();

        let gp = fd_grad(&exact_phi, p, t);
        let lp = fd_lap(&exact_phi, p, t);

        let g1 = fd_grad(&exact_rho1, p, t);
        let f1_fd = fd_dt(&exact_rho1, p, t)
            - fd_lap(&exact_rho1, p, t)
            - (g1[0] * gp[0] + g1[1] * gp[1] + g1[2] * gp[2])
            - exact_rho1(p, t) * lp;

        let g2 = fd_grad(&exact_rho2, p, t);
        let f2_fd = fd_dt(&exact_rho2, p, t) - fd_lap(&exact_rho2, p, t)
            + (g2[0] * gp[0] + g2[1] * gp[1] + g2[2] * gp[2])
            + exact_rho2(p, t) * lp;

        let f3_fd = -lp - exact_rho1(p, t) + exact_rho2(p, t);

        for (label, closed, fd) in [
            ("f1", source_rho1(p, t), f1_fd),
            ("f2", source_rho2(p, t), f2_fd),
            ("f3", source_poisson(p, t), f3_fd),
        ] {
            let denom = closed.abs().max(1.0);
            if ((closed - fd) / denom).abs() > 1e-6 {
                return Err(Error::InvalidScenario(format!(
                    "manufactured source {label} disagrees with the finite-difference oracle at point {k} ({closed} vs {fd})"
                )));
            }
        }
    }
    Ok(())
}

/// Time step rule of a refinement sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauRule {
    /// tau = h
    EqualH,
    /// tau = h^2
    SquaredH,
}

impl TauRule {
    pub fn tau(&self, h: f64) -> f64 {
        match self {
            TauRule::EqualH => h,
            TauRule::SquaredH => h * h,
        }
    }
}

/// Errors and observed orders for one grid of a sweep.
#[derive(Debug, Clone)]
pub struct ErrorRow {
    pub n: usize,
    pub tau: f64,
    /// l1 errors of rho1, rho2, phi at the end time.
    pub errors: [f64; 3],
    /// Observed orders against the previous row.
    pub orders: [Option<f64>; 3],
}

/// Refinement study result.
#[derive(Debug, Clone)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(
            w,
            "grid,tau,rho1_error,rho1_order,rho2_error,rho2_order,phi_error,phi_order"
        )?;
        for row in &self.rows {
            write!(w, "{0}x{0}x{0},{1:.10e}", row.n, row.tau)?;
            for k in 0..3 {
                match row.orders[k] {
                    Some(o) => write!(w, ",{:.6e},{o:.4}", row.errors[k])?,
                    None => write!(w, ",{:.6e},", row.errors[k])?,
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Run the refinement sweep: march every grid to t = 1 and measure discrete
/// l1 errors of both densities and the potential against the exact fields.
/// Second-order sweeps run with the limiter enabled.
pub fn convergence_sweep(
    scheme: SchemeOrder,
    tau_rule: TauRule,
    grids: &[usize],
) -> Result<ErrorTable> {
    if grids.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidScenario(
            "sweep grids must be strictly refining".into(),
        ));
    }
    let case = ManufacturedCase::new()?;
    let mut rows: Vec<ErrorRow> = Vec::new();
    for &n in grids {
        let h = 1.0 / n as f64;
        let tau = tau_rule.tau(h);
        let scn = case.scenario(n, tau, scheme, true)?;
        let mut marcher = Marcher::new(scn)?;
        let (state, _) = marcher.run(|_, _| {})?;
        let errors = [
            l1_error(&state.rho[0], &case.exact_rho1, state.time)?,
            l1_error(&state.rho[1], &case.exact_rho2, state.time)?,
            l1_error(&state.phi, &case.exact_phi, state.time)?,
        ];
        let orders = match rows.last() {
            None => [None; 3],
            Some(prev) => {
                let ratio = (n as f64 / prev.n as f64).ln();
                [
                    Some((prev.errors[0] / errors[0]).ln() / ratio),
                    Some((prev.errors[1] / errors[1]).ln() / ratio),
                    Some((prev.errors[2] / errors[2]).ln() / ratio),
                ]
            }
        };
        log::info!(
            "sweep n={n} tau={tau:.3e}: errors {:.4e} {:.4e} {:.4e}",
            errors[0],
            errors[1],
            errors[2]
        );
        rows.push(ErrorRow {
            n,
            tau,
            errors,
            orders,
        });
    }
    Ok(ErrorTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sources_pass_the_fd_oracle() {
        ManufacturedCase::new().unwrap();
    }

    #[test]
    fn sources_decay_in_time() {
        // every term carries e^{-t}
        let p = [0.3, 0.7, 0.6];
        assert!(source_rho1(p, 50.0).abs() < 1e-20);
        assert!(source_rho2(p, 50.0).abs() < 1e-20);
        assert!(source_poisson(p, 50.0).abs() < 1e-20);
    }

    #[test]
    fn poisson_source_center_value() {
        // at the cube center, t = 0: lap phi = -4, rho1 = 1.25, rho2 = 0.3125
        let v = source_poisson([0.5, 0.5, 0.5], 0.0);
        assert!((v - 3.0625).abs() < 1e-14);
    }

    #[test]
    fn exact_fields_are_flux_free_on_no_flux_planes() {
        let case = ManufacturedCase::new().unwrap();
        let grid = Grid::new(3, &[1.0; 3], &[6; 3]).unwrap();
        case.check_no_flux_faces(&grid).unwrap();
    }

    #[test]
    fn tiny_sweep_errors_decrease() {
        let table =
            convergence_sweep(SchemeOrder::First, TauRule::EqualH, &[4, 8]).unwrap();
        assert_eq!(table.rows.len(), 2);
        for k in 0..3 {
            assert!(table.rows[1].errors[k] < table.rows[0].errors[k]);
        }
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("grid,tau,rho1_error"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn rejects_non_refining_grids() {
        assert!(convergence_sweep(SchemeOrder::First, TauRule::EqualH, &[8, 8]).is_err());
    }
}
