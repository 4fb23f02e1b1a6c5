use std::collections::HashSet;
use std::path::Path;

use ndarray::Array2;

use super::Dataset;
use crate::error::{Error, Result};

/// Which columns hold the subject id and the label. Every other column is a
/// feature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub subject_column: String,
    pub label_column: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            subject_column: "subject".into(),
            label_column: "label".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LabelAlphabet {
    Digits,
    Words,
}

fn parse_label(raw: &str) -> Option<(bool, LabelAlphabet)> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "0" => Some((false, LabelAlphabet::Digits)),
        "1" => Some((true, LabelAlphabet::Digits)),
        "false" => Some((false, LabelAlphabet::Words)),
        "true" => Some((true, LabelAlphabet::Words)),
        _ => None,
    }
}

/// Reads a headered CSV. Labels are `0`/`1` or `false`/`true`; one file
/// must use a single alphabet. Row numbers in errors are file line numbers.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let ingest = |message: String| Error::Ingestion {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(ingest("empty file".into()));
    }
    let mut seen = HashSet::new();
    for h in headers.iter() {
        if !seen.insert(h) {
            return Err(ingest(format!("duplicated column name {h:?}")));
        }
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ingest(format!("missing column {name:?}")))
    };
    let subject_col = find(&schema.subject_column)?;
    let label_col = find(&schema.label_column)?;
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&c| c != subject_col && c != label_col)
        .collect();
    if feature_cols.is_empty() {
        return Err(ingest("no feature columns".into()));
    }
    let feature_names: Vec<String> = feature_cols.iter().map(|&c| headers[c].to_string()).collect();

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut subjects = Vec::new();
    let mut alphabet: Option<LabelAlphabet> = None;
    for record in reader.records() {
        let record = record?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let row_err = |message: String| Error::IngestionRow {
            path: path.to_path_buf(),
            row,
            message,
        };
        let raw_label = &record[label_col];
        let (label, alpha) =
            parse_label(raw_label).ok_or_else(|| row_err(format!("label {raw_label:?} is not binary")))?;
        match alphabet {
            None => alphabet = Some(alpha),
            Some(a) if a != alpha => {
                return Err(row_err(format!("label {raw_label:?} mixes label alphabets")));
            }
            _ => {}
        }
        let subject = &record[subject_col];
        if subject.is_empty() {
            return Err(row_err("empty subject id".into()));
        }
        for &c in &feature_cols {
            let x: f64 = record[c]
                .parse()
                .map_err(|_| row_err(format!("column {:?}: cannot parse {:?}", &headers[c], &record[c])))?;
            if !x.is_finite() {
                return Err(row_err(format!("column {:?}: non-finite value", &headers[c])));
            }
            values.push(x);
        }
        labels.push(label);
        subjects.push(subject.to_string());
    }
    if labels.is_empty() {
        return Err(ingest("no data rows".into()));
    }
    let features = Array2::from_shape_vec((labels.len(), feature_cols.len()), values)
        .map_err(|e| ingest(e.to_string()))?;
    Dataset::new(features, labels, subjects, Some(feature_names))
}

/// Writes `subject,label,<features...>` with `0`/`1` labels.
pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["subject".to_string(), "label".to_string()];
    header.extend(dataset.feature_names.iter().cloned());
    w.write_record(&header)?;
    for (i, row) in dataset.features.rows().into_iter().enumerate() {
        let mut rec = vec![
            dataset.subject_ids[i].clone(),
            if dataset.labels[i] { "1" } else { "0" }.to_string(),
        ];
        rec.extend(row.iter().map(|x| format!("{x}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn load(content: &str) -> Result<Dataset> {
        let f = file(content);
        load_csv(f.path(), &CsvSchema::default())
    }

    #[test]
    fn happy_path() {
        let d = load("subject,label,f1,f2\na,1,0.5,1.5\na,1,0.1,2\nb,0,-1,3e-2\n").unwrap();
        assert_eq!(d.n_rows(), 3);
        assert_eq!(d.n_features(), 2);
        assert_eq!(d.feature_names, vec!["f1", "f2"]);
        assert_eq!(d.labels, vec![true, true, false]);
        assert_eq!(d.features[[2, 1]], 0.03);
    }

    #[test]
    fn non_binary_label_names_row() {
        let err = load("subject,label,f1\na,1,0.5\nb,2,0.1\n").unwrap_err();
        match err {
            Error::IngestionRow { row, message, .. } => {
                assert_eq!(row, 3);
                assert!(message.contains("\"2\""));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn ingestion_errors() {
        assert!(matches!(load("subject,label,f1,f1\na,1,0,0\n"), Err(Error::Ingestion { .. })));
        assert!(matches!(load("subject,f1\na,0.5\n"), Err(Error::Ingestion { .. })));
        assert!(matches!(load("subject,label\na,1\n"), Err(Error::Ingestion { .. })));
        assert!(load("").is_err());
        assert!(matches!(load("subject,label,f1\n"), Err(Error::Ingestion { .. })));
        assert!(matches!(load("subject,label,f1\na,1,0\nb,false,1\n"), Err(Error::IngestionRow { row: 3, .. })));
        assert!(matches!(load("subject,label,f1\na,1,abc\n"), Err(Error::IngestionRow { row: 2, .. })));
        assert!(matches!(load("subject,label,f1\na,1,inf\n"), Err(Error::IngestionRow { .. })));
    }

    #[test]
    fn remapped_columns_and_round_trip() {
        let f = file("pid,y,x\np1,true,1.25\np2,false,2.5\n");
        let schema = CsvSchema {
            subject_column: "pid".into(),
            label_column: "y".into(),
        };
        let d = load_csv(f.path(), &schema).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_csv(&d, out.path()).unwrap();
        let back = load_csv(out.path(), &CsvSchema::default()).unwrap();
        assert_eq!(back.features, d.features);
        assert_eq!(back.labels, d.labels);
        assert_eq!(back.subject_ids, d.subject_ids);
    }
}
