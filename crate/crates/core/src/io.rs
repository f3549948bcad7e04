//! CSV ingestion for datasets and auxiliary numeric columns.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use crate::data::{Dataset, Group};
use crate::error::{Error, Result};

/// Column mapping for dataset CSV files.
#[derive(Clone, Debug)]
pub struct CsvOptions {
    pub y_col: String,
    pub g_col: String,
    /// Pins (r label, b label). When absent labels map by first appearance.
    pub group_labels: Option<(String, String)>,
    /// Numeric columns that are read aside instead of used as covariates.
    pub side_columns: Vec<String>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            y_col: "y".into(),
            g_col: "g".into(),
            group_labels: None,
            side_columns: Vec::new(),
        }
    }
}

/// Parsed dataset plus requested side columns by name.
#[derive(Clone, Debug)]
pub struct LoadedData {
    pub dataset: Dataset,
    pub side: BTreeMap<String, Vec<f64>>,
}

pub fn read_dataset_path(path: &Path, opts: &CsvOptions) -> Result<LoadedData> {
    let file = std::fs::File::open(path)?;
    read_dataset_csv(file, opts)
}

pub fn read_dataset_csv<R: Read>(reader: R, opts: &CsvOptions) -> Result<LoadedData> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let yi = find(&opts.y_col).ok_or_else(|| Error::Csv {
        line: 1,
        msg: format!("missing required column `{}`", opts.y_col),
    })?;
    let gi = find(&opts.g_col).ok_or_else(|| Error::Csv {
        line: 1,
        msg: format!("missing required column `{}`", opts.g_col),
    })?;
    let mut side_idx = Vec::new();
    for s in &opts.side_columns {
        let k = find(s).ok_or_else(|| Error::Csv {
            line: 1,
            msg: format!("missing column `{s}`"),
        })?;
        side_idx.push((s.clone(), k));
    }
    let cov_idx: Vec<usize> = (0..headers.len())
        .filter(|&k| k != yi && k != gi && !side_idx.iter().any(|(_, j)| *j == k))
        .collect();
    let cov_names: Vec<String> = cov_idx.iter().map(|&k| headers[k].to_string()).collect();

    let mut labels: Vec<String> = match &opts.group_labels {
        Some((r, b)) => vec![r.clone(), b.clone()],
        None => Vec::new(),
    };
    let mut y = Vec::new();
    let mut g = Vec::new();
    let mut x = Vec::new();
    let mut side: BTreeMap<String, Vec<f64>> =
        side_idx.iter().map(|(s, _)| (s.clone(), Vec::new())).collect();

    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Csv {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let num = |k: usize| -> Result<f64> {
            let cell = rec.get(k).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| Error::Csv {
                line,
                msg: format!("column `{}`: cannot parse `{cell}` as a number", &headers[k]),
            })?;
            if !v.is_finite() {
                return Err(Error::Csv {
                    line,
                    msg: format!("column `{}`: non-finite value", &headers[k]),
                });
            }
            Ok(v)
        };
        y.push(num(yi)?);
        let label = rec.get(gi).unwrap_or("").to_string();
        if label.is_empty() {
            return Err(Error::Csv {
                line,
                msg: "empty group label".into(),
            });
        }
        let pos = match labels.iter().position(|l| *l == label) {
            Some(p) => p,
            None if opts.group_labels.is_none() && labels.len() < 2 => {
                labels.push(label.clone());
                labels.len() - 1
            }
            None => {
                return Err(Error::Csv {
                    line,
                    msg: format!("unexpected group label `{label}` (exactly two groups allowed)"),
                })
            }
        };
        g.push(Group::from_index(pos));
        for &k in &cov_idx {
            x.push(num(k)?);
        }
        for (s, k) in &side_idx {
            let v = num(*k)?;
            side.get_mut(s).expect("side column registered").push(v);
        }
    }
    if labels.len() < 2 {
        return Err(Error::GroupAbsent("input contains a single group".into()));
    }
    let dataset = Dataset::new(y, g, x, cov_idx.len())?
        .with_labels(&labels[0], &labels[1])
        .with_covariate_names(cov_names)?;
    Ok(LoadedData { dataset, side })
}

/// Reads a headered CSV of numeric columns into column vectors.
pub fn read_numeric_columns<R: Read>(reader: R, expected: usize) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let width = rdr
        .headers()
        .map_err(|e| Error::Csv {
            line: 1,
            msg: e.to_string(),
        })?
        .len();
    if width != expected {
        return Err(Error::Csv {
            line: 1,
            msg: format!("expected {expected} columns, found {width}"),
        });
    }
    let mut cols = vec![Vec::new(); expected];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Csv {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        for (k, col) in cols.iter_mut().enumerate() {
            let cell = rec.get(k).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| Error::Csv {
                line,
                msg: format!("cannot parse `{cell}` as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Csv {
                    line,
                    msg: "non-finite value".into(),
                });
            }
            col.push(v);
        }
    }
    Ok(cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_appearance_mapping() {
        let csv = "y,g,a,b\n1,men,0.5,1\n0,women,0.1,2\n1,men,0.2,3\n";
        let l = read_dataset_csv(csv.as_bytes(), &CsvOptions::default()).unwrap();
        assert_eq!(l.dataset.labels(), &["men".to_string(), "women".to_string()]);
        assert_eq!(l.dataset.groups(), &[Group::R, Group::B, Group::R]);
        assert_eq!(l.dataset.row(1), &[0.1, 2.0]);
    }

    #[test]
    fn pinned_mapping_and_side_columns() {
        let csv = "g,y,score,x\nA,1,0.3,5\nB,0,0.9,6\n";
        let opts = CsvOptions {
            group_labels: Some(("B".into(), "A".into())),
            side_columns: vec!["score".into()],
            ..CsvOptions::default()
        };
        let l = read_dataset_csv(csv.as_bytes(), &opts).unwrap();
        assert_eq!(l.dataset.groups(), &[Group::B, Group::R]);
        assert_eq!(l.side["score"], vec![0.3, 0.9]);
        assert_eq!(l.dataset.d(), 1);
    }

    #[test]
    fn errors_are_line_numbered() {
        let csv = "y,g,x\n1,a,0.5\n0,b,oops\n";
        match read_dataset_csv(csv.as_bytes(), &CsvOptions::default()) {
            Err(Error::Csv { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let csv = "y,g,x\n1,a,0.5\n0,b,NaN\n";
        assert!(read_dataset_csv(csv.as_bytes(), &CsvOptions::default()).is_err());
        let csv = "y,g,x\n1,a,0.5\n0,a,1\n";
        assert!(matches!(
            read_dataset_csv(csv.as_bytes(), &CsvOptions::default()),
            Err(Error::GroupAbsent(_))
        ));
    }
}
