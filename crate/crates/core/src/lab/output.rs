use std::io::Write;

use crate::assembly::evaluate_functional;
use crate::error::{Error, Result};
use crate::mesh::io::{write_vtk, VtkData};
use crate::solve::Snapshot;
use crate::system::FirstOrderSystem;

use super::run::TableRow;

pub const CSV_HEADER: &str = "cycle,n_dof,h,error,functional_sqrt,i_eff,eoc_h,eoc_dof,newton_iters";

fn sci(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.2e}"),
        _ => "nan".to_string(),
    }
}

/// Table as CSV with three significant digits and `nan` for missing values.
pub fn format_csv(rows: &[TableRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.cycle,
            r.n_dof,
            sci(Some(r.h)),
            sci(r.error),
            sci(Some(r.functional_sqrt)),
            sci(r.i_eff),
            sci(r.eoc_h),
            sci(r.eoc_dof),
            r.newton_iters
        ));
    }
    out
}

/// Reads a table written by [`format_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<TableRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header '{CSV_HEADER}'"),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 9 {
            return Err(err(format!("expected 9 fields, got {}", fields.len())));
        }
        let int = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| err(format!("invalid integer '{s}'")))
        };
        let real = |s: &str| -> Result<Option<f64>> {
            if s == "nan" {
                return Ok(None);
            }
            s.parse::<f64>()
                .map(Some)
                .map_err(|_| err(format!("invalid number '{s}'")))
        };
        let required = |s: &str| real(s)?.ok_or_else(|| err(format!("missing value '{s}'")));
        rows.push(TableRow {
            cycle: int(fields[0])?,
            n_dof: int(fields[1])?,
            h: required(fields[2])?,
            error: real(fields[3])?,
            functional_sqrt: required(fields[4])?,
            i_eff: real(fields[5])?,
            eoc_h: real(fields[6])?,
            eoc_dof: real(fields[7])?,
            newton_iters: int(fields[8])?,
        });
    }
    Ok(rows)
}

/// Markdown table with the same columns as the CSV.
pub fn render_markdown(rows: &[TableRow]) -> String {
    let fixed = |v: Option<f64>| {
        v.filter(|x| x.is_finite())
            .map_or("-".to_string(), |x| format!("{x:.2}"))
    };
    let exp = |v: Option<f64>| {
        v.filter(|x| x.is_finite())
            .map_or("-".to_string(), |x| format!("{x:.2e}"))
    };
    let mut out = String::from(
        "| cycle | DOFs | h | error | F^1/2 | i_eff | eoc (h) | eoc (DOFs) | GN iters |\n",
    );
    out.push_str("|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n");
    for r in rows {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} |\n",
            r.cycle,
            r.n_dof,
            exp(Some(r.h)),
            exp(r.error),
            exp(Some(r.functional_sqrt)),
            fixed(r.i_eff),
            fixed(r.eoc_h),
            fixed(r.eoc_dof),
            r.newton_iters
        ));
    }
    out
}

/// Writes the primal field at the vertices, the flux at the element
/// centroids and the element contributions of the functional.
pub fn write_state_vtk<W: Write>(
    problem: &dyn FirstOrderSystem,
    snapshot: &Snapshot,
    out: W,
) -> Result<()> {
    let space = snapshot.disc.space();
    let mesh = space.mesh();
    let (p, f) = space.split(&snapshot.state);
    let corners = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let mut primal = vec![[0.0; 2]; mesh.n_vertices()];
    let mut flux_rows = [
        vec![[0.0; 2]; mesh.n_triangles()],
        vec![[0.0; 2]; mesh.n_triangles()],
    ];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let values = space.primal.evaluate_field(p, t, &corners)?;
        for (v, fp) in tri.iter().zip(&values) {
            primal[*v] = [fp.value[0][0], fp.value[1][0]];
        }
        let c = space.flux.evaluate_field(f, t, &[[1.0 / 3.0, 1.0 / 3.0]])?[0];
        flux_rows[0][t] = c.value[0];
        flux_rows[1][t] = c.value[1];
    }
    let functional = evaluate_functional(problem, &snapshot.disc, &snapshot.state, 1.0)?;
    let scalar: Vec<f64> = primal.iter().map(|v| v[0]).collect();
    let sx: Vec<f64> = flux_rows[0].iter().map(|v| v[0]).collect();
    let sy: Vec<f64> = flux_rows[0].iter().map(|v| v[1]).collect();
    let mut data = Vec::new();
    if space.components() == 1 {
        data.push(VtkData::PointScalars {
            name: "u",
            values: &scalar,
        });
        data.push(VtkData::CellScalars {
            name: "sigma_x",
            values: &sx,
        });
        data.push(VtkData::CellScalars {
            name: "sigma_y",
            values: &sy,
        });
    } else {
        data.push(VtkData::PointVectors {
            name: "u",
            values: &primal,
        });
    }
    let s2x: Vec<f64> = flux_rows[1].iter().map(|v| v[0]).collect();
    let s2y: Vec<f64> = flux_rows[1].iter().map(|v| v[1]).collect();
    if space.components() == 2 {
        data.push(VtkData::CellScalars {
            name: "sigma_xx",
            values: &sx,
        });
        data.push(VtkData::CellScalars {
            name: "sigma_xy",
            values: &sy,
        });
        data.push(VtkData::CellScalars {
            name: "sigma_yx",
            values: &s2x,
        });
        data.push(VtkData::CellScalars {
            name: "sigma_yy",
            values: &s2y,
        });
    }
    data.push(VtkData::CellScalars {
        name: "functional",
        values: &functional.per_element,
    });
    write_vtk(mesh, &data, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<TableRow> {
        let mut a = TableRow::new(0, 9, 0.5, 0.123456, 3);
        a.error = Some(0.1);
        a.i_eff = Some(1.23456);
        let mut b = TableRow::new(1, 25, 0.25, 0.0654, 4);
        b.error = Some(0.05);
        b.eoc_h = Some(1.0);
        b.eoc_dof = Some(0.6789);
        vec![a, b]
    }

    #[test]
    fn csv_layout() {
        let text = format_csv(&rows());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "0,9,5.00e-1,1.00e-1,1.23e-1,1.23e0,nan,nan,3");
        assert_eq!(
            lines[2],
            "1,25,2.50e-1,5.00e-2,6.54e-2,nan,1.00e0,6.79e-1,4"
        );
        assert!(!text.contains('\r'));
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn csv_round_trip() {
        let text = format_csv(&rows());
        let back = parse_csv(&text).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].n_dof, 25);
        assert_eq!(back[0].eoc_h, None);
        assert_eq!(format_csv(&back), text);
    }

    #[test]
    fn csv_errors_have_lines() {
        assert!(matches!(
            parse_csv("a,b\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        let bad = format!("{CSV_HEADER}\n0,9,0.5\n");
        assert!(matches!(parse_csv(&bad), Err(Error::Parse { line: 2, .. })));
        let bad = format!("{CSV_HEADER}\n0,x,0.5,nan,1,nan,nan,nan,1\n");
        assert!(matches!(parse_csv(&bad), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn markdown_table() {
        let md = render_markdown(&rows());
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(
            lines[2],
            "| 0 | 9 | 5.00e-1 | 1.00e-1 | 1.23e-1 | 1.23 | - | - | 3 |"
        );
    }
}
