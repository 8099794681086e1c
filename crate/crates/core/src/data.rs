//! Datasets, CSV ingestion and moment summaries.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named numeric columns of equal length, all values finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    n: usize,
}

impl Dataset {
    pub const MIN_ROWS: usize = 2;

    pub fn new(columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let n = columns.first().map(|(_, c)| c.len()).unwrap_or(0);
        if n < Self::MIN_ROWS {
            return Err(Error::InsufficientRows {
                needed: Self::MIN_ROWS,
                got: n,
            });
        }
        let mut names = Vec::with_capacity(columns.len());
        let mut data = Vec::with_capacity(columns.len());
        for (name, col) in columns {
            if names.contains(&name) {
                return Err(Error::DuplicateNode(name));
            }
            if col.len() != n {
                return Err(Error::RaggedColumn {
                    column: name,
                    len: col.len(),
                    expected: n,
                });
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(name));
            }
            names.push(name);
            data.push(col);
        }
        Ok(Self {
            names,
            columns: data,
            n,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.index_of(name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Columns reordered (and possibly subset) to `names`.
    pub fn select(&self, names: &[String]) -> Result<Dataset> {
        let cols = names
            .iter()
            .map(|n| Ok((n.clone(), self.column(n)?.to_vec())))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(cols)
    }

    /// Row-major copy of the named columns.
    pub fn row_major(&self, names: &[String]) -> Result<Vec<f64>> {
        let cols = names
            .iter()
            .map(|n| self.column(n))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Vec::with_capacity(self.n * cols.len());
        for i in 0..self.n {
            out.extend(cols.iter().map(|c| c[i]));
        }
        Ok(out)
    }

    /// Parses CSV with a mandatory header row. When `schema` is given, every
    /// listed column must be present.
    pub fn from_csv_reader<R: Read>(reader: R, schema: Option<&[&str]>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if let Some(schema) = schema {
            for want in schema {
                if !headers.iter().any(|h| h == want) {
                    return Err(Error::MissingColumn(want.to_string()));
                }
            }
        }
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
        for (i, record) in rdr.records().enumerate() {
            // header is line 1
            let row = i + 2;
            let record = record.map_err(|e| Error::Parse {
                row,
                message: e.to_string(),
            })?;
            if record.len() != headers.len() {
                return Err(Error::Parse {
                    row,
                    message: format!("expected {} fields, found {}", headers.len(), record.len()),
                });
            }
            for (j, cell) in record.iter().enumerate() {
                if cell.is_empty() {
                    return Err(Error::Parse {
                        row,
                        message: format!("missing value in column `{}`", headers[j]),
                    });
                }
                let v: f64 = cell.parse().map_err(|_| Error::NonNumericCell {
                    row,
                    column: headers[j].clone(),
                    value: cell.to_string(),
                })?;
                columns[j].push(v);
            }
        }
        Dataset::new(headers.into_iter().zip(columns).collect())
    }

    pub fn load_csv(path: impl AsRef<Path>, schema: Option<&[&str]>) -> Result<Self> {
        Self::from_csv_reader(File::open(path)?, schema)
    }

    /// Writes CSV using shortest round-trip float formatting, so a reload is
    /// bit-identical.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(&self.names)?;
        let mut row = Vec::with_capacity(self.names.len());
        for i in 0..self.n {
            row.clear();
            row.extend(self.columns.iter().map(|c| format!("{}", c[i])));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(File::create(path)?))
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Sample means, covariances (n-1 denominator) and Pearson correlations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub corr: Vec<Vec<f64>>,
    /// Zero-variance columns; their off-diagonal correlations are NaN.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate: Vec<String>,
}

impl MomentSummary {
    pub fn from_cov(names: Vec<String>, mean: Vec<f64>, cov: &DMatrix<f64>) -> Self {
        let p = names.len();
        let mut degenerate = Vec::new();
        for (i, name) in names.iter().enumerate() {
            if cov[(i, i)] <= 0.0 {
                degenerate.push(name.clone());
            }
        }
        let mut corr = vec![vec![0.0; p]; p];
        for i in 0..p {
            for j in 0..p {
                corr[i][j] = if i == j {
                    1.0
                } else if cov[(i, i)] <= 0.0 || cov[(j, j)] <= 0.0 {
                    f64::NAN
                } else {
                    (cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt()).clamp(-1.0, 1.0)
                };
            }
        }
        let cov = (0..p)
            .map(|i| (0..p).map(|j| cov[(i, j)]).collect())
            .collect();
        Self {
            names,
            mean,
            cov,
            corr,
            degenerate,
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn cov_of(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.cov[self.index_of(a)?][self.index_of(b)?])
    }

    pub fn corr_of(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.corr[self.index_of(a)?][self.index_of(b)?])
    }

    pub fn mean_of(&self, a: &str) -> Option<f64> {
        Some(self.mean[self.index_of(a)?])
    }

    pub fn cov_matrix(&self) -> DMatrix<f64> {
        let p = self.names.len();
        DMatrix::from_fn(p, p, |i, j| self.cov[i][j])
    }

    /// Covariance restricted and reordered to `names`.
    pub fn cov_matrix_for(&self, names: &[String]) -> Option<DMatrix<f64>> {
        let idx = names
            .iter()
            .map(|n| self.index_of(n))
            .collect::<Option<Vec<_>>>()?;
        Some(DMatrix::from_fn(idx.len(), idx.len(), |i, j| {
            self.cov[idx[i]][idx[j]]
        }))
    }
}

pub fn moment_summary(data: &Dataset) -> Result<MomentSummary> {
    moment_summary_of(data, data.names())
}

/// Moments of the named columns, in the given order.
pub fn moment_summary_of(data: &Dataset, names: &[String]) -> Result<MomentSummary> {
    if data.n() < 3 {
        return Err(Error::InsufficientRows {
            needed: 3,
            got: data.n(),
        });
    }
    let cols = names
        .iter()
        .map(|n| data.column(n))
        .collect::<Result<Vec<_>>>()?;
    let n = data.n() as f64;
    let mean: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    let p = cols.len();
    let mut cov = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let s: f64 = cols[i]
                .iter()
                .zip(cols[j])
                .map(|(a, b)| (a - mean[i]) * (b - mean[j]))
                .sum();
            cov[(i, j)] = s / (n - 1.0);
            cov[(j, i)] = cov[(i, j)];
        }
    }
    let summary = MomentSummary::from_cov(names.to_vec(), mean, &cov);
    for name in &summary.degenerate {
        log::warn!("column `{name}` has zero variance; its correlations are undefined");
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(cols: &[(&str, &[f64])]) -> Dataset {
        Dataset::new(cols.iter().map(|(n, c)| (n.to_string(), c.to_vec())).collect()).unwrap()
    }

    #[test]
    fn load_small_csv() {
        let d = Dataset::from_csv_reader("a,b\n1,2\n3,4\n5,6.5\n".as_bytes(), None).unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.names(), ["a", "b"]);
        assert_eq!(d.column("b").unwrap(), [2.0, 4.0, 6.5]);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(
            Dataset::from_csv_reader("a,b\n".as_bytes(), None),
            Err(Error::InsufficientRows { got: 0, .. })
        ));
        assert!(matches!(
            Dataset::from_csv_reader("a,b\n1,x\n2,3\n".as_bytes(), None),
            Err(Error::NonNumericCell { row: 2, .. })
        ));
        assert!(matches!(
            Dataset::from_csv_reader("a,b\n1,2\n2,3\n".as_bytes(), Some(&["c"])),
            Err(Error::MissingColumn(_))
        ));
        assert!(matches!(
            Dataset::from_csv_reader("a,b\n1,2\n2,\n".as_bytes(), None),
            Err(Error::Parse { row: 3, .. })
        ));
        assert!(matches!(
            Dataset::from_csv_reader("a,b\n1,2\n2\n".as_bytes(), None),
            Err(Error::Parse { row: 3, .. })
        ));
    }

    #[test]
    fn identical_and_negated_columns() {
        let x = [1.0, 2.0, 4.0, 7.0, 3.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let d = ds(&[("x", &x), ("y", &x), ("z", &neg)]);
        let m = moment_summary(&d).unwrap();
        assert!((m.corr_of("x", "y").unwrap() - 1.0).abs() < 1e-15);
        assert!((m.corr_of("x", "z").unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(m.corr[0][0], 1.0);
    }

    #[test]
    fn zero_variance_is_flagged_not_fatal() {
        let d = ds(&[("x", &[1.0, 2.0, 3.0]), ("k", &[5.0, 5.0, 5.0])]);
        let m = moment_summary(&d).unwrap();
        assert_eq!(m.degenerate, ["k"]);
        assert!(m.corr_of("x", "k").unwrap().is_nan());
    }

    #[test]
    fn too_few_rows_for_moments() {
        let d = ds(&[("x", &[1.0, 2.0])]);
        assert!(matches!(moment_summary(&d), Err(Error::InsufficientRows { .. })));
    }

    #[test]
    fn cov_corr_relation_and_affine_invariance() {
        let x = [0.3, -1.2, 2.5, 0.9, 4.1, -0.7, 1.1];
        let y = [1.0, 0.2, 3.3, 0.1, 5.0, -2.0, 0.4];
        let ys: Vec<f64> = y.iter().map(|v| 17.0 + 3.5 * v).collect();
        let a = moment_summary(&ds(&[("x", &x), ("y", &y)])).unwrap();
        let b = moment_summary(&ds(&[("x", &x), ("y", &ys)])).unwrap();
        assert!((a.corr[0][1] - b.corr[0][1]).abs() < 1e-10);
        let expect = a.cov[0][1] / (a.cov[0][0] * a.cov[1][1]).sqrt();
        assert!((a.corr[0][1] - expect).abs() < 1e-12);
    }
}
