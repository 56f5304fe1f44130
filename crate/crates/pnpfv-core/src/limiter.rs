//! Local mass-conserving scaling limiter.
//!
//! A negative cell beta is repaired by locating the smallest index box around
//! it (skipping exactly-zero cells) whose count-averaged mass
//! `avg = (1/|S|) sum_{g in S} |K_g| rho_g` is positive, then scaling every
//! cell of the patch toward that average:
//!
//! ```text
//! rho~_a = theta rho_a + (1 - theta) avg / |K_a|,
//! theta  = min{1, avg / (avg - min_g |K_g| rho_g)}
//! ```
//!
//! The patch total mass is unchanged and the minimum scaled cell lands exactly
//! at zero. Negative cells are processed in lexicographic order, one patch at
//! a time, rescanning until none remain.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::field::ScalarField;

/// One repaired neighborhood.
#[derive(Debug, Clone)]
pub struct LimiterPatch {
    /// Multi-index of the negative cell that triggered the patch.
    pub center: [usize; 3],
    /// Flat indices of the patch members, in discovery order.
    pub cells: Vec<usize>,
    /// Count-averaged mass over the patch (positive on success).
    pub average: f64,
    /// Scaling factor in [0, 1].
    pub theta: f64,
    /// Smallest cell mass in the patch.
    pub min_mass: f64,
}

/// Grow the smallest admissible patch around the negative cell `beta`.
///
/// Starts from `{beta}` and sweeps index boxes of growing radius, adding cells
/// with`rho != 0`, until the count-averaged mass turns positive. Errors if the
/// box reaches the whole domain without a positive average (the global-mass
/// precondition is then violated).
pub fn grow_patch(field: &ScalarField, beta: [usize; 3]) -> Result<LimiterPatch> {
    let grid = *field.grid();
    let counts = grid.counts();
    let vol = grid.cell_volume();
    let values = field.values();

    let center_flat = grid.flat(beta);
    let mut members = vec![center_flat];
    let mut seen: HashSet<usize> = members.iter().cloned().collect();
    let mut mass_sum = vol * values[center_flat];

    let max_radius = (0..3).map(|j| counts[j] - 1).max().unwrap_or(0);
    let mut radius = 0usize;
    loop {
        let average = mass_sum / members.len() as f64;
        if average > 0.0 {
            let min_mass = members
                .iter()
                .map(|&c| vol * values[c])
                .fold(f64::INFINITY, f64::min);
            let theta = if min_mass >= 0.0 {
                1.0
            } else {
                (average / (average - min_mass)).min(1.0)
            };
            return Ok(LimiterPatch {
                center: beta,
                cells: members,
                average,
                theta,
                min_mass,
            });
        }
        if radius >= max_radius {
            return Err(Error::Limiter(format!(
                "patch around cell {beta:?} grew to the whole domain without a positive average (global mass non-positive?)"
            )));
        }
        radius += 1;
        let lo: Vec<usize> = (0..3).map(|j| beta[j].saturating_sub(radius)).collect();
        let hi: Vec<usize> = (0..3)
            .map(|j| (beta[j] + radius).min(counts[j] - 1))
            .collect();
        for k in lo[2]..=hi[2] {
            for j in lo[1]..=hi[1] {
                for i in lo[0]..=hi[0] {
                    let flat = grid.flat([i, j, k]);
                    if values[flat] != 0.0 && seen.insert(flat) {
                        members.push(flat);
                        mass_sum += vol * values[flat];
                    }
                }
            }
        }
    }
}

/// Repair every negative cell of `field` in place. Returns the applied
/// patches in order. Cells outside all patches are untouched; patch totals
/// are conserved; the output is non-negative with round-off at the scaled
/// minimum clamped to exact zero.
pub fn apply_limiter(field: &mut ScalarField) -> Result<Vec<LimiterPatch>> {
    let grid = *field.grid();
    let vol = grid.cell_volume();
    let total_mass: f64 = field.values().iter().sum::<f64>() * vol;
    if field.values().iter().any(|v| *v < 0.0) && total_mass <= 0.0 {
        return Err(Error::Limiter(format!(
            "global mass {total_mass} is not positive"
        )));
    }

    let mut patches = Vec::new();
    let n = grid.n_cells();
    // every patch removes at least one negative cell and creates none
    for _ in 0..n {
        let Some(first_negative) = field.values().iter().position(|v| *v < 0.0) else {
            return Ok(patches);
        };
        let beta = grid.multi(first_negative);
        let patch = grow_patch(field, beta)?;
        let scale = field
            .values()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let values = field.values_mut();
        for &c in &patch.cells {
            let scaled = patch.theta * values[c] + (1.0 - patch.theta) * patch.average / vol;
            values[c] = scaled;
        }
        // the minimum lands at exact zero in exact arithmetic; clamp round-off
        let clamp = 16.0 * f64::EPSILON * scale.max(1.0);
        for &c in &patch.cells {
            if values[c] < 0.0 {
                if values[c] < -clamp {
                    return Err(Error::Limiter(format!(
                        "patch at {:?} left cell {} at {} (beyond round-off)",
                        patch.center, c, values[c]
                    )));
                }
                values[c] = 0.0;
            }
        }
        patches.push(patch);
    }
    Err(Error::Limiter(
        "limiter did not terminate (negative cells persisted)".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn field_1d(values: Vec<f64>) -> ScalarField {
        let n = values.len();
        let grid = Grid::new(1, &[n as f64], &[n]).unwrap();
        ScalarField::from_values(grid, values).unwrap()
    }

    #[test]
    fn hand_patch_growth() {
        // values [-0.1, 0.5, 0.6], |K| = 1, beta = first cell:
        // radius-1 box adds cell 1; average = 0.2 > 0
        let f = field_1d(vec![-0.1, 0.5, 0.6]);
        let p = grow_patch(&f, [0, 0, 0]).unwrap();
        assert_eq!(p.cells, vec![0, 1]);
        assert!((p.average - 0.2).abs() < 1e-15);
        assert!((p.theta - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_cells_are_skipped_during_growth() {
        // [-1, 0, 0.5, 3]: radius 1 adds nothing (zero cell), radius 2 adds
        // cell 2 (avg -0.25), radius 3 adds cell 3 (avg 2.5/3)
        let f = field_1d(vec![-1.0, 0.0, 0.5, 3.0]);
        let p = grow_patch(&f, [0, 0, 0]).unwrap();
        assert_eq!(p.cells, vec![0, 2, 3]);
        assert!((p.average - 2.5 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn hand_limit_application() {
        // theta = 0.2/0.3, output [0, 0.4, 0.6], mass 1.0 conserved
        let mut f = field_1d(vec![-0.1, 0.5, 0.6]);
        let patches = apply_limiter(&mut f).unwrap();
        assert_eq!(patches.len(), 1);
        assert!((f.values()[0] - 0.0).abs() < 1e-15);
        assert!((f.values()[1] - 0.4).abs() < 1e-15);
        assert!((f.values()[2] - 0.6).abs() < 1e-15);
        let mass: f64 = f.values().iter().sum();
        assert!((mass - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_negative_input_is_identity() {
        let mut f = field_1d(vec![0.0, 0.3, 1.0]);
        let before = f.clone();
        let patches = apply_limiter(&mut f).unwrap();
        assert!(patches.is_empty());
        assert_eq!(f, before);
    }

    #[test]
    fn single_cell_identity() {
        let mut f = field_1d(vec![5.0]);
        let patches = apply_limiter(&mut f).unwrap();
        assert!(patches.is_empty());
        assert_eq!(f.values(), &[5.0]);
    }

    #[test]
    fn non_positive_global_mass_is_an_error() {
        let mut f = field_1d(vec![-1.0, 0.5]);
        assert!(matches!(apply_limiter(&mut f), Err(Error::Limiter(_))));
    }

    #[test]
    fn multiple_negatives_rescan() {
        let mut f = field_1d(vec![-0.2, 1.0, -0.4, 2.0, 0.0, 3.0]);
        let patches = apply_limiter(&mut f).unwrap();
        assert!(!patches.is_empty());
        assert!(f.values().iter().all(|&v| v >= 0.0));
        let mass: f64 = f.values().iter().sum();
        assert!((mass - 5.4).abs() < 1e-13);
    }

    #[test]
    fn two_dimensional_patch_is_a_box() {
        let grid = Grid::new(2, &[3.0, 3.0], &[3, 3]).unwrap();
        let mut vals = vec![1.0; 9];
        vals[4] = -0.5; // center cell
        let f = ScalarField::from_values(grid, vals).unwrap();
        let p = grow_patch(&f, [1, 1, 0]).unwrap();
        // radius-1 box around the center covers all 9 cells
        assert_eq!(p.cells.len(), 9);
        assert!(p.average > 0.0);
    }
}
