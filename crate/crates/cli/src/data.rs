//! CSV and JSON input/output for the command line.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use combireg::mcmc::{Chain, ChainMetadata};
use combireg::ConstraintSystem;
use nalgebra::DMatrix;

use crate::CliError;

/// Parsed data file: responses, optional covariates, optional times.
#[derive(Debug, Clone, PartialEq)]
pub struct DataFile {
    pub y: Vec<Vec<u8>>,
    /// `p × n`, `None` when the file has no `x_` columns.
    pub x: Option<DMatrix<f64>>,
    pub t: Option<Vec<f64>>,
}

fn numbered(headers: &csv::StringRecord, prefix: &str) -> Result<Vec<usize>, CliError> {
    let cols: Vec<usize> = headers.iter().enumerate().filter(|(_, h)| h.starts_with(prefix)).map(|(i, _)| i).collect();
    for (k, &c) in cols.iter().enumerate() {
        let want = format!("{prefix}{}", k + 1);
        if headers[c] != want {
            return Err(CliError::usage(format!("expected column {want}, found {}", &headers[c])));
        }
    }
    Ok(cols)
}

/// Reads a CSV with columns `y_1..y_d`, then optionally `x_1..x_p` and `t`.
pub fn read_data(path: &Path) -> Result<DataFile, CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers()?.clone();
    let ycols = numbered(&headers, "y_")?;
    let xcols = numbered(&headers, "x_")?;
    let tcol = headers.iter().position(|h| h == "t");
    if ycols.is_empty() {
        return Err(CliError::usage(format!("{}: no y_ columns", path.display())));
    }
    let (mut y, mut xs, mut t) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let row = ycols
            .iter()
            .map(|&c| match rec[c].trim() {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                v => Err(CliError::usage(format!("line {line}: response {v:?} is not 0 or 1"))),
            })
            .collect::<Result<Vec<u8>, _>>()?;
        y.push(row);
        for &c in &xcols {
            xs.push(parse_f64(&rec[c], line)?);
        }
        if let Some(c) = tcol {
            t.push(parse_f64(&rec[c], line)?);
        }
    }
    let n = y.len();
    let x = (!xcols.is_empty()).then(|| DMatrix::from_column_slice(xcols.len(), n, &xs));
    Ok(DataFile { y, x, t: tcol.map(|_| t) })
}

fn parse_f64(s: &str, line: usize) -> Result<f64, CliError> {
    s.trim().parse().map_err(|_| CliError::usage(format!("line {line}: {s:?} is not a number")))
}

pub fn write_data(path: &Path, data: &DataFile) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    let d = data.y.first().map_or(0, Vec::len);
    let p = data.x.as_ref().map_or(0, |x| x.nrows());
    let mut header = Vec::new();
    if data.t.is_some() {
        header.push("t".to_string());
    }
    header.extend((1..=d).map(|j| format!("y_{j}")));
    header.extend((1..=p).map(|k| format!("x_{k}")));
    w.write_record(&header)?;
    for (i, row) in data.y.iter().enumerate() {
        let mut rec = Vec::with_capacity(header.len());
        if let Some(t) = &data.t {
            rec.push(t[i].to_string());
        }
        rec.extend(row.iter().map(u8::to_string));
        if let Some(x) = &data.x {
            rec.extend(x.column(i).iter().map(f64::to_string));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_constraints(path: &Path) -> Result<ConstraintSystem, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    Ok(ConstraintSystem::from_json(&text)?)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::usage(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

/// Loads a chain; metadata comes from `metadata.json` beside it when present.
pub fn read_chain(path: &Path, metadata: Option<&Path>) -> Result<Chain, CliError> {
    let sibling = path.with_file_name("metadata.json");
    let meta: ChainMetadata = match metadata {
        Some(m) => read_json(m)?,
        None if sibling.exists() => read_json(&sibling)?,
        None => ChainMetadata::default(),
    };
    let file = File::open(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    Ok(Chain::read_csv(BufReader::new(file), meta)?)
}

pub fn write_chain(path: &Path, chain: &Chain) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    chain.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Parses `1,0.5,-2`.
pub fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',').map(|v| v.trim().parse().map_err(|_| CliError::usage(format!("{v:?} is not a number")))).collect()
}

/// Parses `start:end:step` into an inclusive grid.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let parts = parse_list(&s.replace(':', ","))?;
    let [a, b, step] = parts[..] else {
        return Err(CliError::usage(format!("grid {s:?} must be start:end:step")));
    };
    if !(step > 0.0) || b < a {
        return Err(CliError::usage(format!("grid {s:?} needs step > 0 and end >= start")));
    }
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| a + i as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_and_list() {
        assert_eq!(parse_grid("1:3:0.5").unwrap(), vec![1.0, 1.5, 2.0, 2.5, 3.0]);
        assert!(parse_grid("3:1:1").is_err());
        assert!(parse_grid("1:2").is_err());
        assert_eq!(parse_list("1, -2.5").unwrap(), vec![1.0, -2.5]);
    }

    #[test]
    fn data_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let data = DataFile {
            y: vec![vec![1, 0], vec![0, 0]],
            x: Some(DMatrix::from_column_slice(2, 2, &[1.0, 0.5, 1.0, -1.25])),
            t: Some(vec![1.0, 2.0]),
        };
        write_data(&path, &data).unwrap();
        assert_eq!(read_data(&path).unwrap(), data);
    }

    #[test]
    fn bad_response_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "y_1,y_2\n1,0\n2,0\n").unwrap();
        let err = read_data(&path).unwrap_err();
        assert!(err.to_string().contains("line 3"));
    }
}
