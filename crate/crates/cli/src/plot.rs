//! Plot-ready long-format tables from run artifacts.

use std::fs;
use std::path::Path;

use crate::error::{CliError, CliResult};
use crate::output::Artifacts;

/// Parsed CSV with every non-`shape` cell checked to be a finite number.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn parse_table(path: &Path, text: &str) -> CliResult<Table> {
    let mut lines = text.lines();
    let header: Vec<String> = match lines.next() {
        Some(h) if !h.trim().is_empty() => h.split(',').map(|s| s.trim().to_string()).collect(),
        _ => return Err(CliError::io(format!("{}: line 1: missing header", path.display()))),
    };
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let cells: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if cells.len() != header.len() {
            return Err(CliError::io(format!(
                "{}: line {line_no}: expected {} fields, found {}",
                path.display(),
                header.len(),
                cells.len()
            )));
        }
        for (h, c) in header.iter().zip(&cells) {
            if h != "shape" && !c.parse::<f64>().is_ok_and(f64::is_finite) {
                return Err(CliError::io(format!("{}: line {line_no}: `{c}` in column `{h}` is not a finite number", path.display())));
            }
        }
        rows.push(cells);
    }
    Ok(Table { header, rows })
}

fn to_csv(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn is_coords(header: &[String]) -> usize {
    header.iter().take_while(|h| h.len() > 1 && h.starts_with('x') && h[1..].parse::<usize>().is_ok()).count()
}

fn frechet(z: f64) -> f64 {
    if z > 0.0 {
        (-1.0 / z).exp()
    } else {
        0.0
    }
}

/// Converts one artifact; the output is named after the input stem.
///
/// Field and surface tables give `(x1..xd, value)` heatmap rows, one per cell.
/// Pattern tables give point rows with their mark columns. A lone `value` column
/// gives an empirical CDF curve next to `exp(−1/z)`. A pair-correlation JSON
/// report gives its `g(r)` curve.
pub fn plot_data(input: &Path) -> CliResult<Artifacts> {
    let text = fs::read_to_string(input).map_err(|e| CliError::io(format!("{}: {e}", input.display())))?;
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("artifact");
    let mut out = Artifacts::default();
    if input.extension().is_some_and(|e| e == "json") {
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::io(format!("{}: line {}: {e}", input.display(), e.line())))?;
        let col = |k: &str| -> CliResult<Vec<f64>> {
            v.get(k)
                .and_then(|a| a.as_array())
                .ok_or_else(|| CliError::io(format!("{}: not a pair-correlation report (no `{k}`)", input.display())))?
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| CliError::io(format!("{}: non-numeric entry in `{k}`", input.display()))))
                .collect()
        };
        let (r, g, se) = (col("radii")?, col("g_values")?, col("g_std_errors")?);
        let header = ["r", "g", "g_se"].map(String::from);
        let rows = (0..r.len()).map(|k| vec![r[k].to_string(), g[k].to_string(), se[k].to_string()]);
        out.add(format!("{stem}_g.csv"), to_csv(&header, rows));
        return Ok(out);
    }
    let table = parse_table(input, &text)?;
    let d = is_coords(&table.header);
    if table.header == ["value"] {
        let mut z: Vec<f64> = table.rows.iter().map(|r| r[0].parse().unwrap()).collect();
        z.sort_by(f64::total_cmp);
        let n = z.len() as f64;
        let header = ["z", "empirical", "frechet"].map(String::from);
        let rows = z
            .iter()
            .enumerate()
            .map(|(i, v)| vec![v.to_string(), ((i + 1) as f64 / n).to_string(), frechet(*v).to_string()]);
        out.add(format!("{stem}_cdf.csv"), to_csv(&header, rows));
    } else if d > 0 && table.header.len() == d + 1 && table.header[d] == "value" {
        out.add(format!("{stem}_heatmap.csv"), to_csv(&table.header, table.rows));
    } else if d > 0 {
        out.add(format!("{stem}_points.csv"), to_csv(&table.header, table.rows));
    } else {
        return Err(CliError::io(format!("{}: unrecognized table header {:?}", input.display(), table.header)));
    }
    Ok(out)
}
