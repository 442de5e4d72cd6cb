//! Ingestion of count, covariate and taxonomy tables.
//!
//! All tables share one layout: a header row `date,<id1>,<id2>,...` followed by
//! one row per week with an ISO-8601 date in the first column. Empty cells and
//! the literals `NA`/`na` mark missing values. Calendar gaps longer than one
//! week are filled with fully masked rows so that row index advances exactly
//! one step per week.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Duration, NaiveDate};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

const DATE_FORMAT: &str = "%Y-%m-%d";

/// Time-indexed matrix of observations with a missing-value mask.
///
/// Missing cells hold `NaN` in `values`; `missing` is the authoritative mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    timestamps: Vec<NaiveDate>,
    columns: Vec<String>,
    values: DMatrix<f64>,
    missing: DMatrix<bool>,
}

impl SeriesTable {
    /// Builds a table, checking every invariant. Values under the mask are
    /// replaced by `NaN`.
    pub fn new(
        timestamps: Vec<NaiveDate>,
        columns: Vec<String>,
        mut values: DMatrix<f64>,
        missing: DMatrix<bool>,
    ) -> Result<Self> {
        let (n, m) = (timestamps.len(), columns.len());
        if values.shape() != (n, m) || missing.shape() != (n, m) {
            return Err(Error::Dimension(format!(
                "table is {n}x{m} but values are {:?} and mask is {:?}",
                values.shape(),
                missing.shape()
            )));
        }
        if let Some(w) = timestamps.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Domain(format!(
                "timestamps not strictly increasing at {}",
                w[1]
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = columns.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(Error::Domain(format!("duplicate column identifier `{dup}`")));
        }
        for t in 0..n {
            for c in 0..m {
                if missing[(t, c)] {
                    values[(t, c)] = f64::NAN;
                } else if !values[(t, c)].is_finite() {
                    return Err(Error::Domain(format!(
                        "non-finite present value at row {t}, column `{}`",
                        columns[c]
                    )));
                }
            }
        }
        Ok(Self {
            timestamps,
            columns,
            values,
            missing,
        })
    }

    /// Fully observed table.
    pub fn from_values(
        timestamps: Vec<NaiveDate>,
        columns: Vec<String>,
        values: DMatrix<f64>,
    ) -> Result<Self> {
        let missing = DMatrix::from_element(values.nrows(), values.ncols(), false);
        Self::new(timestamps, columns, values, missing)
    }

    pub fn nrows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn timestamps(&self) -> &[NaiveDate] {
        &self.timestamps
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn missing(&self) -> &DMatrix<bool> {
        &self.missing
    }

    pub fn is_missing(&self, t: usize, c: usize) -> bool {
        self.missing[(t, c)]
    }

    pub fn get(&self, t: usize, c: usize) -> Option<f64> {
        (!self.missing[(t, c)]).then(|| self.values[(t, c)])
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Present values of one column, in time order.
    pub fn present(&self, c: usize) -> Vec<f64> {
        (0..self.nrows()).filter_map(|t| self.get(t, c)).collect()
    }

    pub fn row_fully_missing(&self, t: usize) -> bool {
        (0..self.ncols()).all(|c| self.missing[(t, c)])
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    pub fn missing_fraction(&self) -> f64 {
        let total = self.nrows() * self.ncols();
        if total == 0 {
            return 0.0;
        }
        self.missing_count() as f64 / total as f64
    }

    /// Restricts the table to `names`, in that order.
    pub fn select(&self, names: &[impl AsRef<str>]) -> Result<SeriesTable> {
        let mut idx = Vec::with_capacity(names.len());
        let mut unknown = Vec::new();
        for name in names {
            match self.column_index(name.as_ref()) {
                Some(i) => idx.push(i),
                None => unknown.push(name.as_ref().to_string()),
            }
        }
        if !unknown.is_empty() {
            return Err(Error::MissingColumns {
                missing: unknown,
                available: self.columns.clone(),
            });
        }
        let n = self.nrows();
        let values = DMatrix::from_fn(n, idx.len(), |t, j| self.values[(t, idx[j])]);
        let missing = DMatrix::from_fn(n, idx.len(), |t, j| self.missing[(t, idx[j])]);
        Self::new(
            self.timestamps.clone(),
            idx.iter().map(|&i| self.columns[i].clone()).collect(),
            values,
            missing,
        )
    }

    /// Re-indexes onto `timestamps`; dates absent from this table become masked rows.
    pub fn align_to(&self, timestamps: &[NaiveDate]) -> Result<SeriesTable> {
        let lookup: BTreeMap<NaiveDate, usize> = self
            .timestamps
            .iter()
            .enumerate()
            .map(|(i, d)| (*d, i))
            .collect();
        let m = self.ncols();
        let mut values = DMatrix::from_element(timestamps.len(), m, f64::NAN);
        let mut missing = DMatrix::from_element(timestamps.len(), m, true);
        for (t, d) in timestamps.iter().enumerate() {
            if let Some(&src) = lookup.get(d) {
                for c in 0..m {
                    values[(t, c)] = self.values[(src, c)];
                    missing[(t, c)] = self.missing[(src, c)];
                }
            }
        }
        Self::new(timestamps.to_vec(), self.columns.clone(), values, missing)
    }

    /// Drops the first `k` rows.
    pub fn skip_rows(&self, k: usize) -> Result<SeriesTable> {
        let k = k.min(self.nrows());
        let n = self.nrows() - k;
        let values = self.values.rows(k, n).into_owned();
        let missing = self.missing.rows(k, n).into_owned();
        Self::new(
            self.timestamps[k..].to_vec(),
            self.columns.clone(),
            values,
            missing,
        )
    }
}

/// Covariate transform: square root followed by per-column standardisation
/// with the population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub selected_names: Vec<String>,
    pub column_means: Vec<f64>,
    pub column_sds: Vec<f64>,
}

impl CovariateSpec {
    pub fn len(&self) -> usize {
        self.selected_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected_names.is_empty()
    }

    /// Applies the recorded transform to a raw table with the same columns.
    pub fn apply(&self, raw: &SeriesTable) -> Result<SeriesTable> {
        self.check_columns(raw)?;
        let mut values = raw.values().clone();
        for t in 0..raw.nrows() {
            for c in 0..raw.ncols() {
                if let Some(v) = raw.get(t, c) {
                    if v < 0.0 {
                        return Err(Error::Domain(format!(
                            "negative covariate value {v} in `{}` at row {t}",
                            raw.columns()[c]
                        )));
                    }
                    values[(t, c)] = (v.sqrt() - self.column_means[c]) / self.column_sds[c];
                }
            }
        }
        SeriesTable::new(
            raw.timestamps().to_vec(),
            raw.columns().to_vec(),
            values,
            raw.missing().clone(),
        )
    }

    /// Maps transformed values back to the raw scale.
    pub fn inverse(&self, transformed: &SeriesTable) -> Result<SeriesTable> {
        self.check_columns(transformed)?;
        let mut values = transformed.values().clone();
        for t in 0..transformed.nrows() {
            for c in 0..transformed.ncols() {
                if let Some(z) = transformed.get(t, c) {
                    let root = z * self.column_sds[c] + self.column_means[c];
                    values[(t, c)] = root * root;
                }
            }
        }
        SeriesTable::new(
            transformed.timestamps().to_vec(),
            transformed.columns().to_vec(),
            values,
            transformed.missing().clone(),
        )
    }

    fn check_columns(&self, table: &SeriesTable) -> Result<()> {
        if table.columns() != self.selected_names.as_slice() {
            return Err(Error::Dimension(format!(
                "covariate columns {:?} do not match transform {:?}",
                table.columns(),
                self.selected_names
            )));
        }
        Ok(())
    }
}

/// Square-root then standardise each column over its present entries.
pub fn transform_covariates(raw: &SeriesTable) -> Result<(SeriesTable, CovariateSpec)> {
    let mut means = Vec::with_capacity(raw.ncols());
    let mut sds = Vec::with_capacity(raw.ncols());
    for c in 0..raw.ncols() {
        let present = raw.present(c);
        if let Some(v) = present.iter().find(|v| **v < 0.0) {
            return Err(Error::Domain(format!(
                "negative covariate value {v} in `{}`",
                raw.columns()[c]
            )));
        }
        let roots: Vec<f64> = present.iter().map(|v| v.sqrt()).collect();
        let sd = stats::population_sd(&roots);
        if !(sd > 0.0) {
            return Err(Error::DegenerateColumn(raw.columns()[c].clone()));
        }
        means.push(stats::mean(&roots));
        sds.push(sd);
    }
    let spec = CovariateSpec {
        selected_names: raw.columns().to_vec(),
        column_means: means,
        column_sds: sds,
    };
    let transformed = spec.apply(raw)?;
    Ok((transformed, spec))
}

#[derive(Clone, Copy, PartialEq)]
enum CellKind {
    Count,
    Real,
}

fn is_missing_token(s: &str) -> bool {
    s.is_empty() || s == "NA" || s == "na"
}

fn parse_table<R: Read>(reader: R, origin: &str, kind: CellKind) -> Result<SeriesTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.is_empty() {
        return Err(Error::Parse {
            path: origin.into(),
            row: 1,
            column: String::new(),
            message: "empty header".into(),
        });
    }
    let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let width = header.len();

    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        // 1-based file line, counting the header.
        let row = i + 2;
        if record.len() != width {
            return Err(Error::Parse {
                path: origin.into(),
                row,
                column: String::new(),
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        let date_str = &record[0];
        let date = NaiveDate::parse_from_str(date_str, DATE_FORMAT).map_err(|e| Error::Parse {
            path: origin.into(),
            row,
            column: header[0].to_string(),
            message: format!("malformed date `{date_str}`: {e}"),
        })?;
        if let Some(prev) = dates.last() {
            if date == *prev {
                return Err(Error::Parse {
                    path: origin.into(),
                    row,
                    column: header[0].to_string(),
                    message: format!("duplicate timestamp {date}"),
                });
            }
            if date < *prev {
                return Err(Error::Parse {
                    path: origin.into(),
                    row,
                    column: header[0].to_string(),
                    message: format!("timestamp {date} precedes {prev}"),
                });
            }
        }
        let mut cells = Vec::with_capacity(columns.len());
        for (j, cell) in record.iter().enumerate().skip(1) {
            let bad = |message: String| Error::Parse {
                path: origin.into(),
                row,
                column: header[j].to_string(),
                message,
            };
            if is_missing_token(cell) {
                cells.push(None);
                continue;
            }
            let value = match kind {
                CellKind::Count => {
                    if cell.starts_with('-') {
                        return Err(bad(format!("negative count `{cell}`")));
                    }
                    cell.parse::<u64>()
                        .map_err(|_| bad(format!("not a non-negative integer count: `{cell}`")))?
                        as f64
                }
                CellKind::Real => {
                    let v = cell
                        .parse::<f64>()
                        .map_err(|_| bad(format!("not a number: `{cell}`")))?;
                    if !v.is_finite() {
                        return Err(bad(format!("non-finite value `{cell}`")));
                    }
                    v
                }
            };
            cells.push(Some(value));
        }
        dates.push(date);
        rows.push(cells);
    }

    let (dates, rows) = expand_calendar(origin, dates, rows, columns.len());
    let n = dates.len();
    let m = columns.len();
    let values = DMatrix::from_fn(n, m, |t, c| rows[t][c].unwrap_or(f64::NAN));
    let missing = DMatrix::from_fn(n, m, |t, c| rows[t][c].is_none());
    SeriesTable::new(dates, columns, values, missing)
}

/// Inserts fully masked rows for missing weeks. A gap of `d` days counts as
/// `round(d / 7) - 1` missing weeks, so slightly irregular annual gaps (13 or
/// 15 days) still insert exactly one row.
fn expand_calendar(
    origin: &str,
    dates: Vec<NaiveDate>,
    rows: Vec<Vec<Option<f64>>>,
    width: usize,
) -> (Vec<NaiveDate>, Vec<Vec<Option<f64>>>) {
    let mut out_dates: Vec<NaiveDate> = Vec::with_capacity(dates.len());
    let mut out_rows = Vec::with_capacity(rows.len());
    for (i, (date, row)) in dates.into_iter().zip(rows).enumerate() {
        if let Some(&prev) = out_dates.last() {
            let days = (date - prev).num_days();
            let weeks = (days as f64 / 7.0).round() as i64;
            if weeks >= 2 {
                log::info!(
                    "{origin}: {} missing week(s) between {prev} and {date} (row {}) inserted as masked rows",
                    weeks - 1,
                    i + 2
                );
                for k in 1..weeks {
                    out_dates.push(prev + Duration::days(7 * k));
                    out_rows.push(vec![None; width]);
                }
            }
        }
        out_dates.push(date);
        out_rows.push(row);
    }
    (out_dates, out_rows)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Reads an OTU count table.
pub fn load_counts(path: impl AsRef<Path>) -> Result<SeriesTable> {
    let path = path.as_ref();
    parse_table(open(path)?, &path.display().to_string(), CellKind::Count)
}

pub fn parse_counts<R: Read>(reader: R) -> Result<SeriesTable> {
    parse_table(reader, "<counts>", CellKind::Count)
}

/// Reads a covariate table and keeps `names` in the requested order.
pub fn load_covariates(path: impl AsRef<Path>, names: &[impl AsRef<str>]) -> Result<SeriesTable> {
    let path = path.as_ref();
    parse_table(open(path)?, &path.display().to_string(), CellKind::Real)?.select(names)
}

pub fn parse_covariates<R: Read>(reader: R, names: &[impl AsRef<str>]) -> Result<SeriesTable> {
    parse_table(reader, "<covariates>", CellKind::Real)?.select(names)
}

/// Reads any real-valued table with every column kept.
pub fn load_table(path: impl AsRef<Path>) -> Result<SeriesTable> {
    let path = path.as_ref();
    parse_table(open(path)?, &path.display().to_string(), CellKind::Real)
}

/// Writes a table in the shared CSV layout; missing cells are left empty.
pub fn write_table<W: Write>(table: &SeriesTable, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_string()];
    header.extend(table.columns().iter().cloned());
    wtr.write_record(&header)?;
    for t in 0..table.nrows() {
        let mut record = Vec::with_capacity(table.ncols() + 1);
        record.push(table.timestamps()[t].format(DATE_FORMAT).to_string());
        for c in 0..table.ncols() {
            record.push(match table.get(t, c) {
                Some(v) => format!("{v}"),
                None => String::new(),
            });
        }
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn write_counts(table: &SeriesTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_table(table, file)
}

/// Taxonomic ranks of one OTU; `None` marks an unassigned rank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyRanks {
    pub kingdom: Option<String>,
    pub phylum: Option<String>,
    pub class: Option<String>,
    pub order: Option<String>,
    pub family: Option<String>,
    pub genus: Option<String>,
}

pub type Taxonomy = BTreeMap<String, TaxonomyRanks>;

pub fn parse_taxonomy<R: Read>(reader: R) -> Result<Taxonomy> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Taxonomy::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let rank = |j: usize| {
            record
                .get(j)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
        };
        let id = record.get(0).unwrap_or_default().to_string();
        if id.is_empty() {
            return Err(Error::Parse {
                path: "<taxonomy>".into(),
                row: i + 2,
                column: "otu_id".into(),
                message: "empty identifier".into(),
            });
        }
        out.insert(
            id,
            TaxonomyRanks {
                kingdom: rank(1),
                phylum: rank(2),
                class: rank(3),
                order: rank(4),
                family: rank(5),
                genus: rank(6),
            },
        );
    }
    Ok(out)
}

pub fn load_taxonomy(path: impl AsRef<Path>) -> Result<Taxonomy> {
    let path = path.as_ref();
    parse_taxonomy(open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, DATE_FORMAT).unwrap()
    }

    #[test]
    fn one_empty_cell_is_masked() {
        let csv = "date,a,b\n2013-06-03,1,2\n2013-06-10,,4\n2013-06-17,5,6\n";
        let t = parse_counts(csv.as_bytes()).unwrap();
        assert_eq!((t.nrows(), t.ncols()), (3, 2));
        assert_eq!(t.missing_count(), 1);
        assert!(t.is_missing(1, 0));
        assert_eq!(t.get(2, 1), Some(6.0));
    }

    #[test]
    fn na_tokens_are_missing() {
        let csv = "date,a,b,c\n2013-06-03,NA,na,\n";
        let t = parse_counts(csv.as_bytes()).unwrap();
        assert_eq!(t.missing_count(), 3);
    }

    #[test]
    fn negative_count_names_row_and_column() {
        let csv = "date,a,b\n2013-06-03,1,2\n2013-06-10,3,-1\n";
        let err = parse_counts(csv.as_bytes()).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "b");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_date_duplicate_and_ragged_rows() {
        let bad_date = "date,a\n2013-13-03,1\n";
        assert!(matches!(
            parse_counts(bad_date.as_bytes()),
            Err(Error::Parse { row: 2, .. })
        ));
        let dup = "date,a\n2013-06-03,1\n2013-06-03,2\n";
        assert!(matches!(
            parse_counts(dup.as_bytes()),
            Err(Error::Parse { row: 3, .. })
        ));
        let ragged = "date,a,b\n2013-06-03,1\n";
        assert!(matches!(
            parse_counts(ragged.as_bytes()),
            Err(Error::Parse { row: 2, .. })
        ));
    }

    #[test]
    fn crlf_is_accepted() {
        let csv = "date,a\r\n2013-06-03,1\r\n2013-06-10,2\r\n";
        let t = parse_counts(csv.as_bytes()).unwrap();
        assert_eq!(t.nrows(), 2);
    }

    /// Three years of weekly rows with one week dropped per year; the expected
    /// grid is built by stepping a calendar one week at a time.
    #[test]
    fn gap_weeks_become_masked_rows() {
        let start = d("2011-06-06");
        let full: Vec<NaiveDate> = (0..156).map(|k| start + Duration::days(7 * k)).collect();
        let dropped = [30usize, 82, 134];
        let mut csv = String::from("date,a\n");
        for (k, date) in full.iter().enumerate() {
            if !dropped.contains(&k) {
                csv.push_str(&format!("{},{}\n", date.format(DATE_FORMAT), k));
            }
        }
        let t = parse_counts(csv.as_bytes()).unwrap();
        assert_eq!(t.timestamps(), full.as_slice());
        for (k, _) in full.iter().enumerate() {
            assert_eq!(t.is_missing(k, 0), dropped.contains(&k), "row {k}");
            if !dropped.contains(&k) {
                assert_eq!(t.get(k, 0), Some(k as f64));
            }
        }
    }

    #[test]
    fn irregular_annual_gap_inserts_one_row() {
        let csv = "date,a\n2013-12-16,1\n2013-12-29,2\n2014-01-05,3\n";
        let t = parse_counts(csv.as_bytes()).unwrap();
        assert_eq!(t.nrows(), 4);
        assert!(t.row_fully_missing(1));
    }

    #[test]
    fn covariate_projection_and_unknown_name() {
        let csv = "date,nitrate,ammonia,pH\n2013-06-03,1.0,2.0,7.0\n2013-06-10,1.5,NA,6.5\n";
        let t = parse_covariates(csv.as_bytes(), &["ammonia", "pH"]).unwrap();
        assert_eq!(t.columns(), &["ammonia".to_string(), "pH".to_string()]);
        assert!(t.is_missing(1, 0));
        let err = parse_covariates(csv.as_bytes(), &["cod"]).unwrap_err();
        match err {
            Error::MissingColumns { missing, available } => {
                assert_eq!(missing, vec!["cod".to_string()]);
                assert_eq!(available.len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mask_density_counts_masked_cells() {
        // 1000 rows, 49 of them missing pH.
        let start = d("2000-01-03");
        let mut csv = String::from("date,pH\n");
        for k in 0..1000i64 {
            let date = (start + Duration::days(7 * k)).format(DATE_FORMAT);
            if k % 20 == 3 && k < 980 {
                csv.push_str(&format!("{date},\n"));
            } else {
                csv.push_str(&format!("{date},7.0\n"));
            }
        }
        let t = parse_covariates(csv.as_bytes(), &["pH"]).unwrap();
        assert_eq!(t.missing_count(), 49);
        assert!((t.missing_fraction() - 0.049).abs() < 1e-15);
    }

    fn column(values: &[Option<f64>]) -> SeriesTable {
        let start = d("2013-06-03");
        let dates = (0..values.len() as i64)
            .map(|k| start + Duration::days(7 * k))
            .collect();
        let v = DMatrix::from_fn(values.len(), 1, |t, _| values[t].unwrap_or(f64::NAN));
        let m = DMatrix::from_fn(values.len(), 1, |t, _| values[t].is_none());
        SeriesTable::new(dates, vec!["x".into()], v, m).unwrap()
    }

    #[test]
    fn transform_hand_example() {
        let raw = column(&[Some(1.0), Some(4.0), Some(9.0)]);
        let (z, spec) = transform_covariates(&raw).unwrap();
        // sqrt -> [1,2,3], mean 2, population sd sqrt(2/3)
        let sd = (2.0f64 / 3.0).sqrt();
        assert!((spec.column_sds[0] - sd).abs() < 1e-15);
        let expect = [-1.0 / sd, 0.0, 1.0 / sd];
        for t in 0..3 {
            assert!((z.get(t, 0).unwrap() - expect[t]).abs() < 1e-12);
        }
        let back = spec.inverse(&z).unwrap();
        for t in 0..3 {
            let r = raw.get(t, 0).unwrap();
            assert!((back.get(t, 0).unwrap() - r).abs() <= 1e-12 * r);
        }
    }

    #[test]
    fn transform_errors() {
        let constant = column(&[Some(4.0), Some(4.0), Some(4.0)]);
        assert!(matches!(
            transform_covariates(&constant),
            Err(Error::DegenerateColumn(_))
        ));
        let negative = column(&[Some(4.0), Some(-1.0)]);
        assert!(matches!(transform_covariates(&negative), Err(Error::Domain(_))));
    }

    #[test]
    fn transform_ignores_masked_cells() {
        let raw = column(&[Some(1.0), None, Some(9.0), Some(4.0)]);
        let (z, spec) = transform_covariates(&raw).unwrap();
        assert!((spec.column_means[0] - 2.0).abs() < 1e-15);
        assert!(z.is_missing(1, 0));
        let present = z.present(0);
        assert!(stats::mean(&present).abs() < 1e-12);
        assert!((stats::variance(&present, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn taxonomy_unassigned_ranks() {
        let csv = "otu_id,kingdom,phylum,class,order,family,genus\n\
                   OTU1,Bacteria,Proteobacteria,Alphaproteobacteria,,,\n";
        let tax = parse_taxonomy(csv.as_bytes()).unwrap();
        let r = &tax["OTU1"];
        assert_eq!(r.class.as_deref(), Some("Alphaproteobacteria"));
        assert!(r.genus.is_none());
    }
}
