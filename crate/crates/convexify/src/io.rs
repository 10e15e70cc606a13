//! File formats. Arrays are CSV with 17 significant digits, which round-trips
//! every `f64` exactly; reports and headers are JSON.

use std::fs;
use std::path::Path;

use convexify_core::forward::DnData;
use convexify_core::grid::GridSpec;
use convexify_core::system::VectorField;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Fs {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("{path}: {reason}")]
    Format { path: String, reason: String },
}

pub type IoResult<T> = Result<T, IoError>;

/// 17 significant digits in scientific notation; parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fs_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Fs {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv {
        path: path.display().to_string(),
        source,
    }
}

pub fn ensure_dir(dir: &Path) -> IoResult<()> {
    fs::create_dir_all(dir).map_err(fs_err(dir))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> IoResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| IoError::Json {
        path: path.display().to_string(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(fs_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> IoResult<T> {
    let text = fs::read_to_string(path).map_err(fs_err(path))?;
    serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.display().to_string(),
        source,
    })
}

/// A CSV column: integers are written as such, reals with 17 digits.
#[derive(Debug, Clone, Copy)]
pub enum Cell {
    Int(usize),
    Real(f64),
}

pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> IoResult<()>
where
    I: IntoIterator<Item = Vec<Cell>>,
{
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        let text: Vec<String> = row
            .iter()
            .map(|c| match *c {
                Cell::Int(i) => i.to_string(),
                Cell::Real(x) => fmt_f64(x),
            })
            .collect();
        w.write_record(&text).map_err(csv_err(path))?;
    }
    w.flush().map_err(fs_err(path))
}

/// Reads a CSV of numbers, checking the header.
pub fn read_csv(path: &Path, header: &[&str]) -> IoResult<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let got: Vec<String> = r
        .headers()
        .map_err(csv_err(path))?
        .iter()
        .map(str::to_string)
        .collect();
    if got != header {
        return Err(IoError::Format {
            path: path.display().to_string(),
            reason: format!("expected columns {header:?}, found {got:?}"),
        });
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        let row = rec
            .iter()
            .map(|s| {
                s.trim().parse::<f64>().map_err(|e| IoError::Format {
                    path: path.display().to_string(),
                    reason: format!("{s:?}: {e}"),
                })
            })
            .collect::<IoResult<Vec<f64>>>()?;
        out.push(row);
    }
    Ok(out)
}

/// One value per Ω node, long format `i, j, x1, x2, value`.
pub fn write_grid_csv(path: &Path, g: &GridSpec, values: &[f64]) -> IoResult<()> {
    write_grid_columns(path, g, &["value"], &[values])
}

pub fn write_grid_columns(
    path: &Path,
    g: &GridSpec,
    names: &[&str],
    columns: &[&[f64]],
) -> IoResult<()> {
    let mut header = vec!["i", "j", "x1", "x2"];
    header.extend_from_slice(names);
    let rows = (0..g.n2).flat_map(|j| {
        (0..g.n1).map(move |i| {
            let (x1, x2) = g.omega_point(i, j);
            let mut row = vec![Cell::Int(i), Cell::Int(j), Cell::Real(x1), Cell::Real(x2)];
            row.extend(columns.iter().map(|c| Cell::Real(c[g.idx(i, j)])));
            row
        })
    });
    write_csv(path, &header, rows)
}

/// All components of a vector field, one column per component.
pub fn write_field_csv(path: &Path, g: &GridSpec, v: &VectorField) -> IoResult<()> {
    let names: Vec<String> = (0..v.n).map(|k| format!("v{k}")).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let cols: Vec<&[f64]> = (0..v.n).map(|k| v.component(k)).collect();
    write_grid_columns(path, g, &names, &cols)
}

pub const DATASET_CSV: &str = "dataset.csv";
pub const DATASET_JSON: &str = "dataset.json";
const DATASET_COLUMNS: [&str; 5] = ["sample", "x0", "x1", "g0", "g1"];

/// Sidecar describing a dataset; the CSV holds the numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub samples: usize,
    pub gamma_len: usize,
    pub n1: usize,
    pub n2: usize,
    pub noise_level: f64,
    pub seed: u64,
}

pub fn write_dataset(dir: &Path, g: &GridSpec, d: &DnData) -> IoResult<()> {
    ensure_dir(dir)?;
    let header = DatasetHeader {
        samples: d.samples(),
        gamma_len: d.gamma_len(),
        n1: g.n1,
        n2: g.n2,
        noise_level: d.noise_level,
        seed: d.seed,
    };
    write_json(&dir.join(DATASET_JSON), &header)?;
    let rows = (0..d.samples()).flat_map(|r| {
        (0..d.gamma_len()).map(move |t| {
            vec![
                Cell::Int(r),
                Cell::Real(d.x0_samples[r]),
                Cell::Real(d.gamma_x1[t]),
                Cell::Real(d.g0_row(r)[t]),
                Cell::Real(d.g1_row(r)[t]),
            ]
        })
    });
    write_csv(&dir.join(DATASET_CSV), &DATASET_COLUMNS, rows)
}

pub fn read_dataset(dir: &Path) -> IoResult<(DatasetHeader, DnData)> {
    let header: DatasetHeader = read_json(&dir.join(DATASET_JSON))?;
    let path = dir.join(DATASET_CSV);
    let rows = read_csv(&path, &DATASET_COLUMNS)?;
    let bad = |reason: String| IoError::Format {
        path: path.display().to_string(),
        reason,
    };
    let (k, gl) = (header.samples, header.gamma_len);
    if rows.len() != k * gl {
        return Err(bad(format!(
            "expected {} rows, found {}",
            k * gl,
            rows.len()
        )));
    }
    let mut x0 = vec![0.0; k];
    let mut x1 = vec![0.0; gl];
    let mut g0 = vec![0.0; k * gl];
    let mut g1 = vec![0.0; k * gl];
    for (q, row) in rows.iter().enumerate() {
        let (r, t) = (q / gl, q % gl);
        if row[0] != r as f64 {
            return Err(bad(format!("row {q}: sample index out of order")));
        }
        x0[r] = row[1];
        x1[t] = row[2];
        g0[q] = row[3];
        g1[q] = row[4];
    }
    let d = DnData {
        x0_samples: x0,
        gamma_x1: x1,
        g0,
        g1,
        noise_level: header.noise_level,
        seed: header.seed,
    };
    d.check_positive()
        .map_err(|e| bad(format!("dataset rejected: {e}")))?;
    Ok((header, d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [
            0.1,
            1.0 / 3.0,
            std::f64::consts::PI * 1e-300,
            -2.5e17,
            f64::MIN_POSITIVE,
        ] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn dataset_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::new(9, 9).unwrap();
        let k = 32;
        let gl = 3;
        let d = DnData {
            x0_samples: (0..k).map(|i| i as f64 / (k - 1) as f64).collect(),
            gamma_x1: vec![0.25, 0.5, 0.75],
            g0: (0..k * gl).map(|i| 1.0 + (i as f64).sqrt() / 7.0).collect(),
            g1: (0..k * gl).map(|i| (i as f64 * 0.37).sin()).collect(),
            noise_level: 0.01,
            seed: 9,
        };
        write_dataset(dir.path(), &g, &d).unwrap();
        let (h, back) = read_dataset(dir.path()).unwrap();
        assert_eq!(back, d);
        assert_eq!(h.n1, 9);
    }

    #[test]
    fn header_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_csv(&p, &["a", "b"], vec![vec![Cell::Int(1), Cell::Real(2.0)]]).unwrap();
        assert!(read_csv(&p, &["a", "c"]).is_err());
        assert_eq!(read_csv(&p, &["a", "b"]).unwrap(), vec![vec![1.0, 2.0]]);
    }
}
