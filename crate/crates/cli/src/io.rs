//! File formats: measure CSVs, feature-cost matrices, plan output.
//!
//! Floats are written with Rust's default formatting, which is the shortest
//! decimal that round-trips, so a re-read plan is bit-identical.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use fastgw::{Error, Plan, Result};

pub fn read_error(e: std::io::Error, path: &Path) -> Error {
    if e.kind() == std::io::ErrorKind::NotFound {
        Error::FileNotFound {
            path: path.display().to_string(),
        }
    } else {
        Error::Io(e)
    }
}

/// Measure file: one weight per line, or `index,weight` lines (0-based
/// indices, any order, missing indices are zero).
pub fn read_measure_csv(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| read_error(e, path))?;
    let mut plain: Vec<f64> = Vec::new();
    let mut indexed: Vec<(usize, f64)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                reason: format!("not a number: {s:?}"),
            })
        };
        match fields.as_slice() {
            [w] => plain.push(parse(w)?),
            [i, w] => {
                let index: usize = i.parse().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    reason: format!("not an index: {i:?}"),
                })?;
                indexed.push((index, parse(w)?));
            }
            _ => {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    reason: "expected `weight` or `index,weight`".into(),
                })
            }
        }
    }
    match (plain.is_empty(), indexed.is_empty()) {
        (false, true) => Ok(plain),
        (true, false) => {
            let len = indexed.iter().map(|(i, _)| i + 1).max().unwrap_or(0);
            let mut weights = vec![0.0; len];
            for (i, w) in indexed {
                weights[i] = w;
            }
            Ok(weights)
        }
        (true, true) => Err(Error::UnsupportedFormat {
            reason: format!("{} holds no weights", path.display()),
        }),
        (false, false) => Err(Error::UnsupportedFormat {
            reason: "mixed `weight` and `index,weight` lines".into(),
        }),
    }
}

/// Dense comma-separated matrix of nonnegative reals.
pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path).map_err(|e| read_error(e, path))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            row.push(field.trim().parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                reason: format!("not a number: {field:?}"),
            })?);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    reason: "ragged matrix".into(),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::UnsupportedFormat {
            reason: format!("{} holds no matrix rows", path.display()),
        });
    }
    let (m, n) = (rows.len(), rows[0].len());
    Array2::from_shape_vec((m, n), rows.into_iter().flatten().collect()).map_err(|_| {
        Error::UnsupportedFormat {
            reason: "matrix shape error".into(),
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanFormat {
    Auto,
    Dense,
    Sparse,
}

impl PlanFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "dense" => Ok(Self::Dense),
            "sparse" => Ok(Self::Sparse),
            other => Err(Error::ConfigInvalid {
                reason: format!("unknown plan format {other:?} (auto|dense|sparse)"),
            }),
        }
    }

}

/// Entropic plans are dense; full dumps get large, so beyond this many
/// points per side the auto format switches to thresholded triplets.
pub const DENSE_PLAN_LIMIT: usize = 1000;

/// Write a plan as dense CSV or sparse `i,p,gamma` triplets.
pub fn write_plan_csv(
    path: &Path,
    plan: &Plan,
    format: PlanFormat,
    sparse_threshold: f64,
) -> Result<&'static str> {
    let (m, n) = plan.dim();
    let dense = match format {
        PlanFormat::Dense => true,
        PlanFormat::Sparse => false,
        PlanFormat::Auto => m.max(n) <= DENSE_PLAN_LIMIT,
    };
    let mut out = String::new();
    if dense {
        for i in 0..m {
            let row: Vec<String> = (0..n)
                .map(|p| plan.values()[(i, p)].to_string())
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
    } else {
        out.push_str("i,p,gamma\n");
        for ((i, p), g) in plan.values().indexed_iter() {
            if *g > sparse_threshold {
                out.push_str(&format!("{i},{p},{g}\n"));
            }
        }
    }
    fs::write(path, out)?;
    Ok(if dense { "dense" } else { "sparse" })
}
