//! Tabulated targets: CSV tables of precomputed evaluations that stand in
//! for an expensive forward model.
//!
//! A points table has header `index,coord_1,...,coord_d` and a values table
//! `index,val_1,...,val_J`. Rows carry an explicit 0-based index and must
//! appear in order, so a truncated or shuffled export is caught instead of
//! silently mislabeling samples.

use crate::error::{Error, Result};
use crate::experiment_driver::TabulatedTarget;
use ndarray::Array2;
use std::path::Path;

fn tab_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Tabulated(format!("line {line}: {msg}"))
}

/// Parses an indexed CSV table whose data columns are `{prefix}_1..`.
fn parse_indexed_table(text: &str, prefix: &str) -> Result<Array2<f64>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Tabulated("empty table".into()))?;
    let mut cols = header.trim_end_matches('\r').split(',');
    if cols.next() != Some("index") {
        return Err(tab_err(1, "first column must be named \"index\""));
    }
    let mut width = 0usize;
    for name in cols {
        let expect = format!("{prefix}_{}", width + 1);
        if name != expect {
            return Err(tab_err(1, format!("expected column {expect:?}, found {name:?}")));
        }
        width += 1;
    }
    if width == 0 {
        return Err(tab_err(1, format!("no {prefix} columns")));
    }

    let mut data: Vec<f64> = Vec::new();
    let mut rows = 0usize;
    let mut blank_at: Option<usize> = None;
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            blank_at.get_or_insert(line_no);
            continue;
        }
        if let Some(b) = blank_at {
            return Err(tab_err(b, "blank line inside the table"));
        }
        let mut fields = line.split(',');
        let idx_field = fields.next().expect("split yields at least one field");
        let idx: usize = idx_field
            .parse()
            .map_err(|_| tab_err(line_no, format!("bad index {idx_field:?}")))?;
        if idx != rows {
            return Err(tab_err(line_no, format!("expected index {rows}, found {idx}")));
        }
        let mut got = 0usize;
        for f in fields {
            let v: f64 = f
                .parse()
                .map_err(|_| tab_err(line_no, format!("bad number {f:?}")))?;
            if !v.is_finite() {
                return Err(tab_err(line_no, format!("non-finite value {f:?}")));
            }
            data.push(v);
            got += 1;
        }
        if got != width {
            return Err(tab_err(line_no, format!("expected {width} values, found {got}")));
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Tabulated("table has a header but no rows".into()));
    }
    Ok(Array2::from_shape_vec((rows, width), data).expect("row-major by construction"))
}

/// Parses a `index,coord_1..coord_d` table.
pub fn parse_points_csv(text: &str) -> Result<Array2<f64>> {
    parse_indexed_table(text, "coord")
}

/// Parses a `index,val_1..val_J` table.
pub fn parse_values_csv(text: &str) -> Result<Array2<f64>> {
    parse_indexed_table(text, "val")
}

fn read_table(path: &Path, parse: fn(&str) -> Result<Array2<f64>>) -> Result<Array2<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Tabulated(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| Error::Tabulated(format!("{}: {e}", path.display())))
}

/// Loads and cross-validates the four tables of a tabulated target.
pub fn load_tabulated(
    points: &Path,
    values: &Path,
    test_points: &Path,
    test_values: &Path,
) -> Result<TabulatedTarget> {
    let points_arr = read_table(points, parse_points_csv)?;
    let values_arr = read_table(values, parse_values_csv)?;
    let test_points_arr = read_table(test_points, parse_points_csv)?;
    let test_values_arr = read_table(test_values, parse_values_csv)?;

    if values_arr.nrows() != points_arr.nrows() {
        return Err(Error::Tabulated(format!(
            "{} points but {} value rows",
            points_arr.nrows(),
            values_arr.nrows()
        )));
    }
    if test_values_arr.nrows() != test_points_arr.nrows() {
        return Err(Error::Tabulated(format!(
            "{} test points but {} test value rows",
            test_points_arr.nrows(),
            test_values_arr.nrows()
        )));
    }
    if test_points_arr.ncols() != points_arr.ncols() {
        return Err(Error::Tabulated(format!(
            "points have {} coordinates but test points have {}",
            points_arr.ncols(),
            test_points_arr.ncols()
        )));
    }
    if test_values_arr.ncols() != values_arr.ncols() {
        return Err(Error::Tabulated(format!(
            "values have {} components but test values have {}",
            values_arr.ncols(),
            test_values_arr.ncols()
        )));
    }
    for arr in [&points_arr, &test_points_arr] {
        if arr.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::Tabulated(
                "point coordinates must lie in [-1, 1]".into(),
            ));
        }
    }
    Ok(TabulatedTarget {
        points: points_arr,
        values: values_arr,
        test_points: test_points_arr,
        test_values: test_values_arr,
    })
}
