//! CSV serialization of patterns and grid fields, with JSON sidecar metadata.
//!
//! Pattern tables have columns `x1..xd` followed by the mark columns of the mark
//! kind: `mark` for scalar marks, `u,shape,c1..cd` for kernel marks and `a,b` for
//! pair marks. Field tables have columns `x1..xd,value`, one row per cell in grid
//! order. Numbers are written in the shortest form that parses back to the same
//! `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::geometry::{Grid, Window};
use crate::pattern::{MarkKind, MarkValue, MarkedPointPattern, PointPattern};
use crate::shape::ShapeId;

/// Metadata written next to a pattern table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternMeta {
    pub window: Window,
    pub dim: usize,
    pub mark_kind: Option<MarkKind>,
    pub seed: Option<u64>,
    pub count: usize,
}

/// Metadata written next to a field table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMeta {
    pub window: Window,
    pub dim: usize,
    pub cells_per_axis: Vec<usize>,
    pub seed: Option<u64>,
}

impl FieldMeta {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.window.clone(), self.cells_per_axis.clone())
    }
}

/// A pattern as stored on disk: points with optional marks.
#[derive(Debug, Clone, PartialEq)]
pub enum StoredPattern {
    Unmarked(PointPattern),
    Marked(MarkedPointPattern),
}

impl StoredPattern {
    pub fn ground(&self) -> &PointPattern {
        match self {
            StoredPattern::Unmarked(p) => p,
            StoredPattern::Marked(m) => m.ground(),
        }
    }

    pub fn mark_kind(&self) -> Option<MarkKind> {
        match self {
            StoredPattern::Unmarked(_) => None,
            StoredPattern::Marked(m) => m.mark_kind(),
        }
    }

    pub fn meta(&self, seed: Option<u64>) -> PatternMeta {
        let g = self.ground();
        PatternMeta {
            window: g.window().clone(),
            dim: g.dim(),
            mark_kind: self.mark_kind(),
            seed,
            count: g.len(),
        }
    }
}

fn header(dim: usize, kind: Option<MarkKind>) -> Vec<String> {
    let mut h: Vec<String> = (1..=dim).map(|a| format!("x{a}")).collect();
    match kind {
        None => {}
        Some(MarkKind::Scalar) => h.push("mark".into()),
        Some(MarkKind::ScaledKernel) => {
            h.push("u".into());
            h.push("shape".into());
            h.extend((1..=dim).map(|a| format!("c{a}")));
        }
        Some(MarkKind::Pair) => {
            h.push("a".into());
            h.push("b".into());
        }
    }
    h
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse {
        line,
        reason: e.to_string(),
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Pattern table; an empty pattern gives the header line only.
pub fn pattern_to_csv(pattern: &StoredPattern) -> Result<String> {
    let g = pattern.ground();
    let d = g.dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header(d, pattern.mark_kind())).map_err(csv_error)?;
    let mut row: Vec<String> = Vec::new();
    for i in 0..g.len() {
        row.clear();
        row.extend(g.point(i).iter().map(|v| v.to_string()));
        if let StoredPattern::Marked(m) = pattern {
            match m.mark(i) {
                MarkValue::Scalar { value } => row.push(value.to_string()),
                MarkValue::ScaledKernel { u, shape, centre } => {
                    row.push(u.to_string());
                    row.push(shape.to_string());
                    row.extend(centre.iter().map(|v| v.to_string()));
                }
                MarkValue::Pair { a, b } => {
                    row.push(a.to_string());
                    row.push(b.to_string());
                }
            }
        }
        w.write_record(&row).map_err(csv_error)?;
    }
    finish(w)
}

fn parse_f64(s: &str, line: u64, col: &str) -> Result<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
        line,
        reason: format!("column `{col}`: `{s}` is not a finite number"),
    })
}

/// Parses a pattern table written by [`pattern_to_csv`] on `window`.
pub fn pattern_from_csv(text: &str, window: Window) -> Result<StoredPattern> {
    let d = window.dim();
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let cols: Vec<String> = r.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    let kind = [None, Some(MarkKind::Scalar), Some(MarkKind::ScaledKernel), Some(MarkKind::Pair)]
        .into_iter()
        .find(|k| header(d, *k) == cols)
        .ok_or_else(|| Error::Parse {
            line: 1,
            reason: format!("unrecognized header {cols:?} for dimension {d}"),
        })?;
    let mut coords = Vec::new();
    let mut marks = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        for a in 0..d {
            coords.push(parse_f64(&rec[a], line, &cols[a])?);
        }
        let f = |k: usize| parse_f64(&rec[k], line, &cols[k]);
        match kind {
            None => {}
            Some(MarkKind::Scalar) => marks.push(MarkValue::scalar(f(d)?)),
            Some(MarkKind::Pair) => marks.push(MarkValue::pair(f(d)?, f(d + 1)?)),
            Some(MarkKind::ScaledKernel) => {
                let shape: ShapeId = rec[d + 1].parse().map_err(|e: Error| Error::Parse {
                    line,
                    reason: e.to_string(),
                })?;
                let centre = (0..d).map(|a| f(d + 2 + a)).collect::<Result<Vec<f64>>>()?;
                let m = MarkValue::kernel(f(d)?, shape, &centre).map_err(|e| Error::Parse {
                    line,
                    reason: e.to_string(),
                })?;
                marks.push(m);
            }
        }
    }
    let ground = PointPattern::new(window, coords)?;
    Ok(match kind {
        None => StoredPattern::Unmarked(ground),
        Some(_) => StoredPattern::Marked(MarkedPointPattern::new(ground, marks)?),
    })
}

/// Field table, one row per cell centre in grid order.
pub fn field_to_csv(field: &GridField) -> Result<String> {
    let grid = field.grid();
    let d = grid.dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut h: Vec<String> = (1..=d).map(|a| format!("x{a}")).collect();
    h.push("value".into());
    w.write_record(&h).map_err(csv_error)?;
    let mut c = vec![0.0; d];
    let mut row: Vec<String> = Vec::with_capacity(d + 1);
    for (i, v) in field.values().iter().enumerate() {
        grid.centre_into(i, &mut c);
        row.clear();
        row.extend(c.iter().map(|x| x.to_string()));
        row.push(v.to_string());
        w.write_record(&row).map_err(csv_error)?;
    }
    finish(w)
}

/// Parses a field table for `grid`; rows must follow grid order.
pub fn field_from_csv(text: &str, grid: Grid) -> Result<GridField> {
    let d = grid.dim();
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let cols: Vec<String> = r.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    if cols.len() != d + 1 || cols[d] != "value" {
        return Err(Error::Parse {
            line: 1,
            reason: format!("unexpected field header {cols:?}"),
        });
    }
    let mut values = Vec::with_capacity(grid.len());
    let mut c = vec![0.0; d];
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let i = values.len();
        if i >= grid.len() {
            return Err(Error::Parse {
                line,
                reason: format!("more rows than the {} grid cells", grid.len()),
            });
        }
        grid.centre_into(i, &mut c);
        for a in 0..d {
            let x = parse_f64(&rec[a], line, &cols[a])?;
            if (x - c[a]).abs() > 1e-9 * (1.0 + c[a].abs()) {
                return Err(Error::Parse {
                    line,
                    reason: format!("row is not at cell centre {c:?}"),
                });
            }
        }
        values.push(parse_f64(&rec[d], line, "value")?);
    }
    if values.len() != grid.len() {
        return Err(Error::GridMismatch(format!("{} rows for {} cells", values.len(), grid.len())));
    }
    GridField::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::sampler::{attach_marks, sample_poisson, MarkLaw};

    #[test]
    fn pattern_round_trips_for_every_mark_kind() {
        let w = Window::cube(2, 3.0).unwrap();
        let g = sample_poisson(2.0, &w, RngStream::new(1)).unwrap();
        let laws = [
            MarkLaw::uniform_scalar(0.0, 1.0),
            MarkLaw::pareto_kernel(0.1, ShapeId::GaussDensity),
            MarkLaw::Pair { a: crate::sampler::ScalarLaw::uniform01(), b: crate::sampler::ScalarLaw::uniform01() },
        ];
        let unmarked = StoredPattern::Unmarked(g.clone());
        assert_eq!(pattern_from_csv(&pattern_to_csv(&unmarked).unwrap(), w.clone()).unwrap(), unmarked);
        for law in laws {
            let p = StoredPattern::Marked(attach_marks(&g, &law, RngStream::new(2)).unwrap());
            let text = pattern_to_csv(&p).unwrap();
            assert_eq!(pattern_from_csv(&text, w.clone()).unwrap(), p);
        }
    }

    #[test]
    fn empty_pattern_is_header_only() {
        let w = Window::cube(2, 1.0).unwrap();
        let text = pattern_to_csv(&StoredPattern::Unmarked(PointPattern::empty(w.clone()))).unwrap();
        assert_eq!(text, "x1,x2\n");
        assert_eq!(pattern_from_csv(&text, w).unwrap().ground().len(), 0);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let w = Window::cube(2, 1.0).unwrap();
        match pattern_from_csv("x1,x2\n0.5,0.5\n0.2,oops\n", w.clone()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(pattern_from_csv("a,b\n", w), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn field_round_trip() {
        let grid = Grid::uniform(Window::cube(2, 2.0).unwrap(), 3).unwrap();
        let f = GridField::new(grid.clone(), (0..9).map(|i| 0.1 * i as f64 + 1e-17).collect()).unwrap();
        let text = field_to_csv(&f).unwrap();
        assert_eq!(text.lines().count(), 10);
        assert_eq!(field_from_csv(&text, grid.clone()).unwrap(), f);
        let meta = FieldMeta { window: grid.window().clone(), dim: 2, cells_per_axis: vec![3, 3], seed: Some(1) };
        let back: FieldMeta = serde_json::from_str(&serde_json::to_string(&meta).unwrap()).unwrap();
        assert_eq!(back.grid().unwrap(), grid);
    }
}
