//! Legacy VTK STRUCTURED_POINTS snapshots (ASCII).
//!
//! Cell-centered values are written as a point lattice at the cell centers:
//! DIMENSIONS carries the cell counts, ORIGIN the first cell center, SPACING
//! the cell sizes, and one SCALARS block per field follows in flat cell
//! order. Grids below three dimensions are padded with singleton dimensions.
//! Output is byte-stable for identical state.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Grid;

/// Write named cell fields of one grid as a VTK snapshot.
pub fn write_snapshot(
    grid: &Grid,
    title: &str,
    fields: &[(&str, &ScalarField)],
    path: &Path,
) -> Result<()> {
    let mut buf = Vec::new();
    write_snapshot_to(grid, title, fields, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// As [`write_snapshot`], into any writer.
pub fn write_snapshot_to<W: Write>(
    grid: &Grid,
    title: &str,
    fields: &[(&str, &ScalarField)],
    w: &mut W,
) -> Result<()> {
    for (name, f) in fields {
        if f.grid() != grid {
            return Err(Error::DimensionMismatch(format!(
                "field `{name}` lives on a different grid"
            )));
        }
    }
    let counts = grid.counts();
    let spacings = grid.spacings();
    let mut origin = [0.0f64; 3];
    let mut spacing = [1.0f64; 3];
    for j in 0..grid.dim() {
        origin[j] = 0.5 * spacings[j];
        spacing[j] = spacings[j];
    }
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_POINTS")?;
    writeln!(w, "DIMENSIONS {} {} {}", counts[0], counts[1], counts[2])?;
    writeln!(
        w,
        "ORIGIN {:.16e} {:.16e} {:.16e}",
        origin[0], origin[1], origin[2]
    )?;
    writeln!(
        w,
        "SPACING {:.16e} {:.16e} {:.16e}",
        spacing[0], spacing[1], spacing[2]
    )?;
    writeln!(w, "POINT_DATA {}", grid.n_cells())?;
    for (name, f) in fields {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in f.values() {
            writeln!(w, "{v:.16e}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_scalars(text: &str, name: &str) -> Vec<f64> {
        let mut lines = text.lines();
        while let Some(line) = lines.next() {
            if line.starts_with(&format!("SCALARS {name} ")) {
                let _table = lines.next().unwrap();
                let mut out = Vec::new();
                for l in lines.by_ref() {
                    if l.starts_with("SCALARS") {
                        break;
                    }
                    out.push(l.trim().parse::<f64>().unwrap());
                }
                return out;
            }
        }
        panic!("scalar block {name} not found");
    }

    #[test]
    fn format_and_flat_order() {
        let grid = Grid::new(1, &[1.0], &[2]).unwrap();
        let rho = ScalarField::from_values(grid, vec![1.0, 2.0]).unwrap();
        let mut buf = Vec::new();
        write_snapshot_to(&grid, "snap", &[("rho", &rho)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("DIMENSIONS 2 1 1"));
        assert!(text.contains("POINT_DATA 2"));
        let vals = parse_scalars(&text, "rho");
        assert_eq!(vals, vec![1.0, 2.0]);
    }

    #[test]
    fn round_trip_values() {
        let grid = Grid::new(2, &[1.0, 2.0], &[3, 4]).unwrap();
        let a = ScalarField::from_values(
            grid,
            (0..12).map(|i| (i as f64 * 0.731).sin()).collect(),
        )
        .unwrap();
        let b = ScalarField::from_values(
            grid,
            (0..12).map(|i| 1.0 + i as f64).collect(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_snapshot_to(&grid, "two fields", &[("a", &a), ("phi", &b)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for (f, name) in [(&a, "a"), (&b, "phi")] {
            let vals = parse_scalars(&text, name);
            for (x, y) in vals.iter().zip(f.values()) {
                assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn output_is_byte_stable() {
        let grid = Grid::new(3, &[1.0; 3], &[2, 2, 2]).unwrap();
        let f = ScalarField::from_values(grid, (0..8).map(|i| i as f64 / 7.0).collect()).unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_snapshot_to(&grid, "t", &[("f", &f)], &mut a).unwrap();
        write_snapshot_to(&grid, "t", &[("f", &f)], &mut b).unwrap();
        assert_eq!(a, b);
    }
}
