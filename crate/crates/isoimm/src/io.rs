use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{MetricField, TensorField};
use crate::flatten::ImmersionGrid;
use crate::grid::ChartGrid;

/// Reads a TOML document into any deserializable config/spec type.
pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

/// Serializes a report (or any other structured result) as TOML.
pub fn write_toml<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = toml::to_string_pretty(value)
        .map_err(|e| Error::Schema(format!("serialization failed: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Contents of a samples CSV: either metric samples or a tuple of scalar
/// fields (candidate heights).
#[derive(Debug)]
pub enum SamplesData {
    Metric(MetricField),
    Fields(Vec<TensorField>),
}

/// Parses a samples CSV against a known grid.
///
/// Layout: one row per grid point; the first `dim` columns are the grid
/// index, the rest are either the n(n+1)/2 upper-triangle entries of g
/// (header `g_i_j`), the full n x n matrix row-major, or k scalar height
/// columns (header `h_t`). Missing grid points are masked invalid.
pub fn read_samples(path: &Path, grid: &ChartGrid) -> Result<SamplesData> {
    let text = std::fs::read_to_string(path)?;
    let n = grid.dim;
    let mut lines = text.lines().enumerate().peekable();

    // header is optional; sniff the first non-empty line
    let mut kind: Option<char> = None;
    if let Some((_, first)) = lines.peek() {
        let cells: Vec<&str> = first.split(',').map(str::trim).collect();
        if cells
            .first()
            .is_some_and(|c| c.parse::<f64>().is_err() && !c.is_empty())
        {
            if let Some(col) = cells.get(n) {
                kind = col.chars().next().map(|c| c.to_ascii_lowercase());
            }
            if cells.len() <= n {
                return Err(Error::Schema(format!(
                    "samples header has {} columns, need more than the {} index columns",
                    cells.len(),
                    n
                )));
            }
            lines.next();
        }
    }

    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut width = None;
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() <= n {
            return Err(Error::Schema(format!(
                "line {}: expected grid index plus data columns",
                lineno + 1
            )));
        }
        let mut idx = vec![0usize; n];
        for a in 0..n {
            idx[a] = cells[a].parse().map_err(|_| {
                Error::Schema(format!("line {}: bad grid index `{}`", lineno + 1, cells[a]))
            })?;
            if idx[a] >= grid.shape[a] {
                return Err(Error::Schema(format!(
                    "line {}: index {} out of range on axis {}",
                    lineno + 1,
                    idx[a],
                    a
                )));
            }
        }
        let vals: Vec<f64> = cells[n..]
            .iter()
            .map(|c| {
                c.parse().map_err(|_| {
                    Error::Schema(format!("line {}: bad value `{c}`", lineno + 1))
                })
            })
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(vals.len()),
            Some(w) if w != vals.len() => {
                return Err(Error::Schema(format!(
                    "line {}: ragged row ({} data columns, expected {w})",
                    lineno + 1,
                    vals.len()
                )))
            }
            _ => {}
        }
        rows.push((grid.flat(&idx), vals));
    }
    let width = width.ok_or_else(|| Error::Schema("samples file has no data rows".into()))?;

    let upper = n * (n + 1) / 2;
    let is_metric = match kind {
        Some('g') => true,
        Some('h') => false,
        _ => width == upper || width == n * n,
    };

    if is_metric {
        if width != upper && width != n * n {
            return Err(Error::Schema(format!(
                "metric samples need {upper} (upper triangle) or {} (full) columns, got {width}",
                n * n
            )));
        }
        let mut field = TensorField::zeros(
            grid.clone(),
            vec![crate::field::Variance::Covariant; 2],
        );
        let mut seen = vec![false; grid.len()];
        for (flat, vals) in &rows {
            seen[*flat] = true;
            let dst = field.at_mut(*flat);
            if width == n * n {
                dst.copy_from_slice(vals);
            } else {
                let mut c = 0;
                for a in 0..n {
                    for b in a..n {
                        dst[a * n + b] = vals[c];
                        dst[b * n + a] = vals[c];
                        c += 1;
                    }
                }
            }
        }
        field.valid = seen;
        Ok(SamplesData::Metric(MetricField::new(field)?))
    } else {
        let k = width;
        let mut fields = vec![TensorField::zeros(grid.clone(), vec![]); k];
        let mut seen = vec![false; grid.len()];
        for (flat, vals) in &rows {
            seen[*flat] = true;
            for (t, v) in vals.iter().enumerate() {
                fields[t].data[*flat] = *v;
            }
        }
        for f in &mut fields {
            f.valid = seen.clone();
        }
        Ok(SamplesData::Fields(fields))
    }
}

/// Reads a samples file that must contain a metric.
pub fn read_metric_samples(path: &Path, grid: &ChartGrid) -> Result<MetricField> {
    match read_samples(path, grid)? {
        SamplesData::Metric(m) => Ok(m),
        SamplesData::Fields(_) => Err(Error::Schema(format!(
            "{}: expected metric samples, found scalar field columns",
            path.display()
        ))),
    }
}

/// Writes metric samples as CSV (grid index + upper-triangle columns).
///
/// Floats are written with the shortest representation that round-trips, so
/// read-back is bitwise exact.
pub fn write_metric_samples(metric: &MetricField, path: &Path) -> Result<()> {
    let grid = &metric.grid;
    let n = grid.dim;
    let mut out = String::new();
    for a in 0..n {
        write!(out, "i_{},", a + 1).unwrap();
    }
    let mut heads = Vec::new();
    for a in 0..n {
        for b in a..n {
            heads.push(format!("g_{}_{}", a + 1, b + 1));
        }
    }
    out.push_str(&heads.join(","));
    out.push('\n');
    for flat in 0..grid.len() {
        if !metric.valid()[flat] {
            continue;
        }
        let idx = grid.unflat(flat);
        for i in &idx {
            write!(out, "{i},").unwrap();
        }
        let vals = metric.values().at(flat);
        let mut cols = Vec::with_capacity(heads.len());
        for a in 0..n {
            for b in a..n {
                cols.push(format!("{}", vals[a * n + b]));
            }
        }
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes a tuple of scalar fields as CSV (grid index + h_1..h_k columns).
pub fn write_field_samples(fields: &[TensorField], path: &Path) -> Result<()> {
    assert!(!fields.is_empty());
    let grid = &fields[0].grid;
    let n = grid.dim;
    let mut out = String::new();
    for a in 0..n {
        write!(out, "i_{},", a + 1).unwrap();
    }
    let heads: Vec<String> = (0..fields.len()).map(|t| format!("h_{}", t + 1)).collect();
    out.push_str(&heads.join(","));
    out.push('\n');
    for flat in 0..grid.len() {
        if fields.iter().any(|f| !f.valid[flat]) {
            continue;
        }
        let idx = grid.unflat(flat);
        for i in &idx {
            write!(out, "{i},").unwrap();
        }
        let cols: Vec<String> = fields.iter().map(|f| format!("{}", f.data[flat])).collect();
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes an embedding as CSV: chart coordinates x_1..x_n, ambient
/// coordinates X_1..X_{n+1}, and a valid flag. Invalid points keep their row
/// (with valid = 0) so the file stays one row per grid point.
pub fn write_embedding_csv(imm: &ImmersionGrid, path: &Path) -> Result<()> {
    let grid = &imm.grid;
    let n = grid.dim;
    let mut out = String::new();
    let mut heads = Vec::new();
    for a in 0..n {
        heads.push(format!("x_{}", a + 1));
    }
    for u in 0..imm.components {
        heads.push(format!("X_{}", u + 1));
    }
    heads.push("valid".into());
    out.push_str(&heads.join(","));
    out.push('\n');
    for flat in 0..grid.len() {
        let x = grid.point_of_flat(flat);
        let mut cols: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
        for v in imm.point(flat) {
            cols.push(format!("{v}"));
        }
        cols.push(if imm.valid[flat] { "1" } else { "0" }.into());
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes a surface embedding (n = 2) as a Wavefront OBJ mesh: one vertex
/// per grid point, each fully valid grid quad split into two triangles.
pub fn write_embedding_obj(imm: &ImmersionGrid, path: &Path) -> Result<()> {
    let grid = &imm.grid;
    if grid.dim != 2 || imm.components != 3 {
        return Err(Error::Spec(
            "OBJ export requires a 2-dimensional chart embedded in R^3".into(),
        ));
    }
    let (rows, cols) = (grid.shape[0], grid.shape[1]);
    let mut out = String::new();
    for flat in 0..grid.len() {
        let p = imm.point(flat);
        writeln!(out, "v {} {} {}", p[0], p[1], p[2]).unwrap();
    }
    for i in 0..rows - 1 {
        for j in 0..cols - 1 {
            let q = [
                i * cols + j,
                i * cols + j + 1,
                (i + 1) * cols + j + 1,
                (i + 1) * cols + j,
            ];
            if q.iter().any(|&v| !imm.valid[v]) {
                continue;
            }
            // OBJ indices are 1-based
            writeln!(out, "f {} {} {}", q[0] + 1, q[1] + 1, q[2] + 1).unwrap();
            writeln!(out, "f {} {} {}", q[0] + 1, q[2] + 1, q[3] + 1).unwrap();
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}
