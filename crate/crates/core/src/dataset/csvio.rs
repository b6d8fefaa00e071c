use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::scalar::{format_exact, Scalar};

/// Loads a headered CSV file. The `target` column becomes `y`; the remaining
/// columns, in header order, become features. Ids are 0-based data row indices.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, target: &str) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(file, &name, target)
}

pub fn read_csv<T: Scalar, R: Read>(reader: R, name: &str, target: &str) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.is_empty() {
        return Err(Error::MissingHeader);
    }
    let mut seen = HashSet::new();
    for h in &header {
        if !seen.insert(h.as_str()) {
            return Err(Error::DuplicateHeader(h.clone()));
        }
    }
    let target_idx = header
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| Error::MissingTargetColumn(target.to_owned()))?;
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != target_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut samples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        // line 1 is the header
        let row = i + 2;
        let mut x = Vec::with_capacity(feature_names.len());
        let mut y = T::zero();
        for (j, cell) in record.iter().enumerate() {
            let v = cell
                .parse::<T>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::BadCell {
                    row,
                    column: header[j].clone(),
                    value: cell.to_owned(),
                })?;
            if j == target_idx {
                y = v;
            } else {
                x.push(v);
            }
        }
        samples.push(Sample::new(i as u64, x, y));
    }
    Dataset::with_names(name, feature_names, target, samples)
}

/// Writes features in order followed by the target column, every value with
/// enough significant digits to round-trip exactly.
pub fn write_csv<T: Scalar, W: Write>(ds: &Dataset<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = ds.feature_names().iter().map(String::as_str).collect();
    header.push(ds.target_name());
    w.write_record(&header)?;
    for s in ds {
        let mut row: Vec<String> = s.x.iter().map(|&v| format_exact(v)).collect();
        row.push(format_exact(s.y));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv<T: Scalar>(ds: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    write_csv(ds, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_columns_four_rows() {
        let text = "a,y,b\n1,2,3\n4,5,6\n7,8,9\n10,11,12\n";
        let ds: Dataset<f64> = read_csv(text.as_bytes(), "t", "y").unwrap();
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.samples()[1].x, vec![4.0, 6.0]);
        assert_eq!(ds.samples()[1].y, 5.0);
        assert_eq!(ds.ids(), vec![0, 1, 2, 3]);
        assert_eq!(ds.feature_names(), ["a", "b"]);
    }

    #[test]
    fn header_only_is_empty() {
        let ds: Dataset<f64> = read_csv("x0,x1,y\n".as_bytes(), "t", "y").unwrap();
        assert_eq!(ds.len(), 0);
        assert_eq!(ds.dim(), 2);
    }

    #[test]
    fn nan_cell_reports_row_and_column() {
        let err = read_csv::<f64, _>("x,y\n1,2\n3,NaN\n".as_bytes(), "t", "y").unwrap_err();
        match err {
            Error::BadCell { row, column, value } => {
                assert_eq!(row, 3);
                assert_eq!(column, "y");
                assert_eq!(value, "NaN");
            }
            e => panic!("unexpected {e}"),
        }
        assert!(matches!(
            read_csv::<f64, _>("x,y\nabc,2\n".as_bytes(), "t", "y"),
            Err(Error::BadCell { row: 2, .. })
        ));
        assert!(matches!(
            read_csv::<f64, _>("x,y\ninf,2\n".as_bytes(), "t", "y"),
            Err(Error::BadCell { .. })
        ));
    }

    #[test]
    fn header_errors() {
        assert!(matches!(
            read_csv::<f64, _>("x,x,y\n".as_bytes(), "t", "y"),
            Err(Error::DuplicateHeader(h)) if h == "x"
        ));
        assert!(matches!(
            read_csv::<f64, _>("x,z\n".as_bytes(), "t", "y"),
            Err(Error::MissingTargetColumn(_))
        ));
        assert!(matches!(
            read_csv::<f64, _>("".as_bytes(), "t", "y"),
            Err(Error::MissingHeader)
        ));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_csv::<f64>("/nonexistent/nope.csv", "y"),
            Err(Error::MissingFile(_))
        ));
    }
}
