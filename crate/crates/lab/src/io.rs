//! Plain-text file formats: tabulated fields, COO matrices, PGM bitmaps,
//! CSV grids and tables, `x y` series and JSON reports.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use magwell_core::field::{FieldError, FieldModel, TabulatedField};
use magwell_core::lattice::{DomainMask, Grid, SparseHermitian};
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: line {line}: {msg}")]
    Format { path: String, line: usize, msg: String },
    #[error("{path}: {source}")]
    Field { path: String, source: FieldError },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, IoError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

/// Reads `x, y, b` rows on a regular grid covering one period. A header
/// row and `#` comments are allowed.
pub fn load_tabulated_csv(path: &Path) -> Result<FieldModel, IoError> {
    let p = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| IoError::Csv { path: p.clone(), source })?;
    let mut samples = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|source| IoError::Csv { path: p.clone(), source })?;
        let vals: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match vals {
            Ok(v) if v.len() == 3 => samples.push((v[0], v[1], v[2])),
            Ok(v) => {
                return Err(IoError::Format {
                    path: p,
                    line: i + 1,
                    msg: format!("expected 3 columns, found {}", v.len()),
                })
            }
            Err(_) if i == 0 => continue,
            Err(e) => {
                return Err(IoError::Format {
                    path: p,
                    line: i + 1,
                    msg: e.to_string(),
                })
            }
        }
    }
    TabulatedField::from_samples(&samples)
        .map(FieldModel::Tabulated)
        .map_err(|source| IoError::Field { path: p, source })
}

/// Coordinate list `row col re im`, zero-based, both triangles.
pub fn write_coo(path: &Path, a: &SparseHermitian) -> Result<(), IoError> {
    let mut w = create(path)?;
    let run = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "# {} {} {}", a.dim(), a.dim(), a.nnz())?;
        for (i, j, v) in a.triplets() {
            writeln!(w, "{i} {j} {:e} {:e}", v.re, v.im)?;
        }
        w.flush()
    };
    run(&mut w).map_err(io_err(path))
}

/// Plain (`P2`) PGM with active nodes white; the top row is the largest `y`.
pub fn write_mask_pgm(path: &Path, mask: &DomainMask) -> Result<(), IoError> {
    let vals: Vec<f64> = mask.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    write_heatmap_pgm(path, mask.grid(), &vals)
}

/// Plain PGM heatmap, linearly scaled over the finite values; non-finite
/// values are black.
pub fn write_heatmap_pgm(path: &Path, grid: &Grid, values: &[f64]) -> Result<(), IoError> {
    let n = grid.side();
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut w = create(path)?;
    let run = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "P2\n{n} {n}\n255")?;
        for iy in (0..n).rev() {
            let row: Vec<String> = (0..n)
                .map(|ix| {
                    let v = values[grid.index(ix, iy)];
                    let g = if v.is_finite() { ((v - lo) / span * 255.0).round() as u8 } else { 0 };
                    g.to_string()
                })
                .collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        w.flush()
    };
    run(&mut w).map_err(io_err(path))
}

/// Grid values as a CSV matrix, one row per `y` starting from the bottom.
pub fn write_grid_csv(path: &Path, grid: &Grid, values: &[f64]) -> Result<(), IoError> {
    let p = path.display().to_string();
    let mut w = csv::Writer::from_writer(create(path)?);
    let n = grid.side();
    for iy in 0..n {
        let row: Vec<String> = (0..n).map(|ix| values[grid.index(ix, iy)].to_string()).collect();
        w.write_record(&row).map_err(|source| IoError::Csv { path: p.clone(), source })?;
    }
    w.flush().map_err(io_err(path))
}

/// CSV table with a header row.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), IoError> {
    let p = path.display().to_string();
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header).map_err(|source| IoError::Csv { path: p.clone(), source })?;
    for r in rows {
        w.write_record(r).map_err(|source| IoError::Csv { path: p.clone(), source })?;
    }
    w.flush().map_err(io_err(path))
}

/// Whitespace separated `x y` pairs with a `#` header line.
pub fn write_series(path: &Path, header: &str, points: &[(f64, f64)]) -> Result<(), IoError> {
    let mut w = create(path)?;
    let run = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "# {header}")?;
        for (x, y) in points {
            writeln!(w, "{x} {y}")?;
        }
        w.flush()
    };
    run(&mut w).map_err(io_err(path))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| IoError::Json {
        path: path.display().to_string(),
        source,
    })?;
    text.push('\n');
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(io_err(path))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use magwell_core::lattice::BoundaryCondition;

    #[test]
    fn tabulated_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.csv");
        let mut text = String::from("x,y,b\n# regular 8x8 grid\n");
        for iy in 0..8 {
            for ix in 0..8 {
                let (x, y) = (-0.5 + ix as f64 / 8.0, -0.5 + iy as f64 / 8.0);
                text.push_str(&format!("{x},{y},{}\n", 2.0 + x));
            }
        }
        fs::write(&path, text).unwrap();
        let model = load_tabulated_csv(&path).unwrap();
        assert!((model.b([-0.25, 0.0]) - 1.75).abs() < 1e-12);
    }

    #[test]
    fn malformed_table_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "x,y,b\n0,0,1\n0,0\n").unwrap();
        let err = load_tabulated_csv(&path).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn coo_and_pgm_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let a = SparseHermitian::from_diagonal(&[1.0, 2.0]);
        write_coo(&dir.path().join("a.coo"), &a).unwrap();
        let text = fs::read_to_string(dir.path().join("a.coo")).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(2).unwrap().starts_with("1 1 2e0"));

        let grid = Grid::new(1, 4, BoundaryCondition::Dirichlet).unwrap();
        let mask = DomainMask::from_fn(&grid, |p| p[0] < 0.0);
        write_mask_pgm(&dir.path().join("m.pgm"), &mask).unwrap();
        let pgm = fs::read_to_string(dir.path().join("m.pgm")).unwrap();
        let lines: Vec<&str> = pgm.lines().collect();
        assert_eq!(lines[..3], ["P2", "3 3", "255"]);
        assert_eq!(lines[3], "255 0 0");
    }
}
