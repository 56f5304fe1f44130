//! The shipped example configurations parse, validate, and behave: indicator
//! initial data lands exactly on cells, densities stay non-negative through
//! mixed-boundary marching, and the closed variant conserves mass.

use pnpfv_core::config;
use pnpfv_core::marching::Marcher;

const EXAMPLE2_TOML: &str = include_str!("../../../configs/example2.toml");
const EXAMPLE3_TOML: &str = include_str!("../../../configs/example3.toml");

#[test]
fn example2_initial_state_at_native_resolution() {
    let cfg = config::parse_config(EXAMPLE2_TOML).unwrap();
    assert_eq!(cfg.scenario.grid.counts(), [30, 30, 30]);
    assert_eq!(cfg.scenario.species.len(), 2);
    let mut marcher = Marcher::new(cfg.scenario).unwrap();
    let state = marcher.init_state().unwrap();
    // indicator initial data: 0/1 for the first species, 0/2 for the second
    assert_eq!(state.rho[0].min(), 0.0);
    assert_eq!(state.rho[0].max(), 1.0);
    assert_eq!(state.rho[1].min(), 0.0);
    assert_eq!(state.rho[1].max(), 2.0);
    // 8 of 30 cells per axis fall inside the box
    let inside = state.rho[0].values().iter().filter(|&&v| v == 1.0).count();
    assert_eq!(inside, 8 * 8 * 8);
}

#[test]
fn example2_marching_keeps_densities_non_negative() {
    let cfg = config::parse_config(EXAMPLE2_TOML).unwrap();
    let tau = cfg.scenario.tau;
    let mut marcher = Marcher::new(cfg.scenario).unwrap();
    let mut state = marcher.init_state().unwrap();
    for _ in 0..6 {
        let (next, row) = marcher.step_first_order(&state, tau).unwrap();
        assert!(
            row.min_density >= -1e-12 * next.max_density(),
            "min density {} at step {}",
            row.min_density,
            row.step
        );
        state = next;
    }
}

#[test]
fn example3_short_run_conserves_mass_and_dissipates() {
    let mut cfg = config::parse_config(EXAMPLE3_TOML).unwrap();
    // short stretch at reduced resolution
    cfg.scenario.grid = pnpfv_core::Grid::new(3, &[1.0; 3], &[12; 3]).unwrap();
    cfg.scenario.tau = 0.5 / 12.0;
    cfg.scenario.t_end = 10.0 * cfg.scenario.tau;
    let mut marcher = Marcher::new(cfg.scenario).unwrap();
    let (_, rows) = marcher.run(|_, _| {}).unwrap();
    assert_eq!(rows.len(), 11);
    for s in 0..2 {
        let m0 = rows[0].masses[s];
        for row in &rows {
            assert!((row.masses[s] - m0).abs() <= 1e-12 * m0);
        }
    }
    for row in rows.iter().skip(1) {
        assert!(row.energy_delta <= 1e-13 * row.energy.abs().max(1.0));
        assert!(row.dissipation >= -1e-12);
    }
}
