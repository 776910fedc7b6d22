use super::{CaseRow, SweepReport};
use crate::analysis::write_probe_csv;
use crate::error::{NeckError, Result};
use crate::solver::Solution;
use serde_json::json;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Column order of `rows.csv`.
pub const ROW_COLUMNS: [&str; 22] = [
    "p",
    "eps",
    "u1",
    "u2",
    "ugap",
    "ugap_over_theta",
    "maxgrad",
    "maxgrad_x",
    "maxgrad_y",
    "kkt_residual",
    "flux1_scaled",
    "flux2_scaled",
    "conservation_scaled",
    "energy",
    "newton_iterations",
    "eta_final",
    "eta_sensitivity",
    "vertices",
    "triangles",
    "neck_layers",
    "status",
    "flux_r",
];

fn csv_err(e: csv::Error) -> NeckError {
    NeckError::Io(std::io::Error::other(e))
}

fn row_record(r: &CaseRow) -> Vec<String> {
    let f = |v: f64| format!("{v:e}");
    let flux_r = r
        .flux_r
        .iter()
        .map(|(r, v)| format!("{r}:{v:e}"))
        .collect::<Vec<_>>()
        .join(";");
    vec![
        f(r.p),
        f(r.eps),
        f(r.u1),
        f(r.u2),
        f(r.ugap),
        f(r.ugap_over_theta),
        f(r.maxgrad),
        f(r.maxgrad_at[0]),
        f(r.maxgrad_at[1]),
        f(r.kkt_residual),
        f(r.flux1_scaled),
        f(r.flux2_scaled),
        f(r.conservation_scaled),
        f(r.energy),
        r.newton_iterations.to_string(),
        f(r.eta_final),
        r.eta_sensitivity.map(f).unwrap_or_default(),
        r.vertices.to_string(),
        r.triangles.to_string(),
        r.neck_layers.map(|n| n.to_string()).unwrap_or_default(),
        r.status.clone(),
        flux_r,
    ]
}

pub fn write_rows_csv<W: Write>(rows: &[CaseRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ROW_COLUMNS).map_err(csv_err)?;
    for r in rows {
        w.write_record(row_record(r)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `rows.csv`, `probes.csv` and `report.json` into `dir`.
pub fn write_report(dir: &Path, report: &SweepReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_rows_csv(&report.rows, BufWriter::new(File::create(dir.join("rows.csv"))?))?;
    write_probe_csv(&report.probes, BufWriter::new(File::create(dir.join("probes.csv"))?))?;
    let mut f = BufWriter::new(File::create(dir.join("report.json"))?);
    serde_json::to_writer_pretty(&mut f, report).map_err(|e| NeckError::Io(e.into()))?;
    f.flush()?;
    Ok(())
}

pub fn solution_stem(p: f64, eps: f64) -> String {
    format!("solution_{p}_{eps:e}")
}

/// Nodal file `index value` plus a JSON summary next to it.
pub fn write_solution(dir: &Path, sol: &Solution, row: &CaseRow) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let stem = solution_stem(row.p, row.eps);
    let mut f = BufWriter::new(File::create(dir.join(format!("{stem}.txt")))?);
    for (i, v) in sol.nodal_values.iter().enumerate() {
        writeln!(f, "{i} {v:e}")?;
    }
    f.flush()?;
    let summary = json!({
        "p": sol.p,
        "eps": row.eps,
        "U1": sol.u1,
        "U2": sol.u2,
        "energy": sol.energy,
        "flux1": sol.flux1,
        "flux2": sol.flux2,
        "kkt_residual": sol.kkt_residual,
        "eta_final": sol.eta_final,
        "mesh_stats": {
            "vertices": row.vertices,
            "triangles": row.triangles,
            "neck_layers": row.neck_layers,
        },
    });
    let mut j = BufWriter::new(File::create(dir.join(format!("{stem}.json")))?);
    serde_json::to_writer_pretty(&mut j, &summary).map_err(|e| NeckError::Io(e.into()))?;
    j.flush()?;
    Ok(())
}
