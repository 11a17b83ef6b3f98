use std::path::Path;

use super::TabularDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// A dataset read from disk plus the number of incomplete rows dropped.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: TabularDataset,
    pub dropped_rows: usize,
}

/// Reads a headed CSV whose first `n_feature_columns` columns are features
/// and the rest targets. Rows with an empty, unparseable or non-finite cell
/// are dropped and counted.
pub fn load_csv(path: impl AsRef<Path>, n_feature_columns: usize) -> Result<LoadedDataset> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    if n_feature_columns == 0 {
        return Err(Error::InvalidArgument("need at least one feature column".into()));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let width = header.len();
    if width < n_feature_columns + 1 {
        return Err(Error::HeaderTooShort { found: width, required: n_feature_columns + 1 });
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut dropped = 0;
    for record in reader.records() {
        let record = record?;
        match parse_row(&record, width) {
            Some(values) => rows.push(values),
            None => dropped += 1,
        }
    }
    if rows.is_empty() {
        return Err(Error::NoRowsSurvived { dropped });
    }

    let n_targets = width - n_feature_columns;
    let mut features = Matrix::zeros(rows.len(), n_feature_columns);
    let mut targets = Matrix::zeros(rows.len(), n_targets);
    for (i, row) in rows.iter().enumerate() {
        features.row_mut(i).copy_from_slice(&row[..n_feature_columns]);
        targets.row_mut(i).copy_from_slice(&row[n_feature_columns..]);
    }
    let (feature_names, target_names) = header.split_at(n_feature_columns);
    let dataset = TabularDataset::new(feature_names.to_vec(), target_names.to_vec(), features, targets)?;
    Ok(LoadedDataset { dataset, dropped_rows: dropped })
}

fn parse_row(record: &csv::StringRecord, width: usize) -> Option<Vec<f64>> {
    if record.len() != width {
        return None;
    }
    record
        .iter()
        .map(|cell| cell.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect()
}

/// Writes `ds` in the layout `load_csv` reads: features first, then targets.
pub fn write_csv(ds: &TabularDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ds.feature_names().iter().chain(ds.target_names()))?;
    for i in 0..ds.n_rows() {
        let cells = ds.features().row(i).iter().chain(ds.targets().row(i)).map(|v| v.to_string());
        w.write_record(cells)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn clean_file_loads_every_row() {
        let f = write_tmp("a,b,y\n1,2,3\n4,5,6\n7,8,9\n");
        let loaded = load_csv(f.path(), 2).unwrap();
        assert_eq!(loaded.dataset.n_rows(), 3);
        assert_eq!(loaded.dropped_rows, 0);
        assert_eq!(loaded.dataset.feature_names(), ["a", "b"]);
        assert_eq!(loaded.dataset.target_names(), ["y"]);
        assert_eq!(loaded.dataset.targets().column(0), vec![3.0, 6.0, 9.0]);
    }

    #[test]
    fn empty_target_cell_drops_row() {
        let f = write_tmp("a,y\n1,2\n3,\n5,6\n");
        let loaded = load_csv(f.path(), 1).unwrap();
        assert_eq!(loaded.dataset.n_rows(), 2);
        assert_eq!(loaded.dropped_rows, 1);
    }

    #[test]
    fn nan_and_garbage_cells_drop_rows() {
        let f = write_tmp("a,b,y\nNaN,1,2\n1,inf,2\n1,abc,2\n0.5,1.5,2.5\n1,2\n");
        let loaded = load_csv(f.path(), 2).unwrap();
        assert_eq!(loaded.dataset.n_rows(), 1);
        assert_eq!(loaded.dropped_rows, 4);
        assert!(loaded.dataset.features().is_finite());
        assert!(loaded.dataset.targets().is_finite());
    }

    #[test]
    fn labeled_failures() {
        assert!(matches!(load_csv("/definitely/not/here.csv", 1), Err(Error::MissingFile(_))));
        let f = write_tmp("a,b\n1,2\n");
        assert!(matches!(load_csv(f.path(), 2), Err(Error::HeaderTooShort { found: 2, required: 3 })));
        let f = write_tmp("a,b\n,2\nx,1\n");
        assert!(matches!(load_csv(f.path(), 1), Err(Error::NoRowsSurvived { dropped: 2 })));
    }

    #[test]
    fn write_then_load() {
        let f = write_tmp("p,q,r,s\n0.1,0.2,0.3,0.4\n1e-3,2,3,4\n");
        let ds = load_csv(f.path(), 2).unwrap().dataset;
        let out = tempfile::NamedTempFile::new().unwrap();
        write_csv(&ds, out.path()).unwrap();
        assert_eq!(load_csv(out.path(), 2).unwrap().dataset, ds);
    }
}
