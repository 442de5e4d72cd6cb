//! Named constrained draws, one row per retained iteration.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hmc::PosteriorDraws;
use crate::model::Model;

#[derive(Debug, Clone, PartialEq)]
pub struct DrawTable {
    names: Vec<String>,
    index: HashMap<String, usize>,
    chain: Vec<usize>,
    iter: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl DrawTable {
    pub fn new(names: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::Domain(format!("duplicate draw column `{n}`")));
            }
        }
        Ok(Self {
            names,
            index,
            chain: Vec::new(),
            iter: Vec::new(),
            rows: Vec::new(),
        })
    }

    pub fn push(&mut self, chain: usize, iter: usize, values: Vec<f64>) -> Result<()> {
        if values.len() != self.names.len() {
            return Err(Error::Dimension(format!(
                "draw has {} values for {} columns",
                values.len(),
                self.names.len()
            )));
        }
        self.chain.push(chain);
        self.iter.push(iter);
        self.rows.push(values);
        Ok(())
    }

    /// Maps every retained state through `f`.
    pub fn from_posterior(
        draws: &PosteriorDraws,
        names: Vec<String>,
        f: impl Fn(&[f64]) -> Vec<f64>,
    ) -> Result<Self> {
        let mut table = Self::new(names)?;
        for c in &draws.chains {
            for (state, &it) in c.states.iter().zip(&c.iterations) {
                table.push(c.chain, it, f(state))?;
            }
        }
        Ok(table)
    }

    pub fn from_model(model: &Model, draws: &PosteriorDraws) -> Result<Self> {
        Self::from_posterior(draws, model.constrained_names(), |u| model.constrained_values(u))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_draws(&self) -> usize {
        self.rows.len()
    }

    pub fn chains(&self) -> Vec<usize> {
        let mut c = self.chain.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn chain_of(&self, row: usize) -> usize {
        self.chain[row]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.rows[row]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, row: usize, name: &str) -> Option<f64> {
        self.column_index(name).map(|c| self.rows[row][c])
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let c = self
            .column_index(name)
            .ok_or_else(|| Error::UnknownId(name.to_string()))?;
        Ok(self.rows.iter().map(|r| r[c]).collect())
    }

    /// Column values split by chain, in chain order.
    pub fn column_by_chain(&self, name: &str) -> Result<Vec<Vec<f64>>> {
        let c = self
            .column_index(name)
            .ok_or_else(|| Error::UnknownId(name.to_string()))?;
        Ok(self
            .chains()
            .iter()
            .map(|&ch| {
                self.rows
                    .iter()
                    .zip(&self.chain)
                    .filter(|(_, &rc)| rc == ch)
                    .map(|(r, _)| r[c])
                    .collect()
            })
            .collect())
    }

    /// Assembles `prefix[i,j]` columns (one-based) of one draw into a matrix.
    pub fn matrix(&self, row: usize, prefix: &str, nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                let name = format!("{prefix}[{},{}]", i + 1, j + 1);
                m[(i, j)] = self
                    .get(row, &name)
                    .ok_or_else(|| Error::UnknownId(name.clone()))?;
            }
        }
        Ok(m)
    }

    /// Side length `K` of a square `prefix[i,j]` block.
    pub fn square_size(&self, prefix: &str) -> usize {
        let mut k = 0;
        while self.column_index(&format!("{prefix}[{},{}]", k + 1, k + 1)).is_some() {
            k += 1;
        }
        k
    }

    /// Names starting with `prefix[`.
    pub fn names_with_prefix(&self, prefix: &str) -> Vec<String> {
        let p = format!("{prefix}[");
        self.names.iter().filter(|n| n.starts_with(&p)).cloned().collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["chain".to_string(), "iter".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for ((row, c), it) in self.rows.iter().zip(&self.chain).zip(&self.iter) {
            let mut rec = vec![(c + 1).to_string(), (it + 1).to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<draws>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() < 2 || &header[0] != "chain" || &header[1] != "iter" {
            return Err(Error::MissingColumns {
                missing: vec!["chain".into(), "iter".into()],
                available: header.iter().map(String::from).collect(),
            });
        }
        let mut table = Self::new(header.iter().skip(2).map(String::from).collect())?;
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse_err = |col: &str, msg: String| Error::Parse {
                path: "<draws>".into(),
                row: i + 2,
                column: col.to_string(),
                message: msg,
            };
            let idx = |col: usize| -> Result<usize> {
                let v: usize = rec[col]
                    .parse()
                    .map_err(|e: std::num::ParseIntError| parse_err(&header[col], e.to_string()))?;
                v.checked_sub(1)
                    .ok_or_else(|| parse_err(&header[col], "indices are one-based".into()))
            };
            let (chain, iter) = (idx(0)?, idx(1)?);
            let values = (2..rec.len())
                .map(|c| {
                    rec[c]
                        .parse::<f64>()
                        .map_err(|e| parse_err(&header[c], e.to_string()))
                })
                .collect::<Result<Vec<_>>>()?;
            table.push(chain, iter, values)?;
        }
        Ok(table)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut t = DrawTable::new(vec!["a[1,1]".into(), "tau".into()]).unwrap();
        t.push(0, 0, vec![0.5, 1e-3]).unwrap();
        t.push(1, 4, vec![-1.25, f64::NAN]).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("chain,iter,\"a[1,1]\",tau"));
        let back = DrawTable::read_csv(&buf[..]).unwrap();
        assert_eq!(back.names(), t.names());
        assert_eq!(back.column("a[1,1]").unwrap(), vec![0.5, -1.25]);
        assert!(back.get(1, "tau").unwrap().is_nan());
        assert_eq!(back.column_by_chain("a[1,1]").unwrap(), vec![vec![0.5], vec![-1.25]]);
    }

    #[test]
    fn matrix_assembly() {
        let names = vec!["a[1,1]", "a[1,2]", "a[2,1]", "a[2,2]"]
            .into_iter()
            .map(String::from)
            .collect();
        let mut t = DrawTable::new(names).unwrap();
        t.push(0, 0, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(t.square_size("a"), 2);
        let m = t.matrix(0, "a", 2, 2).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert!(t.column("b").is_err());
        assert!(DrawTable::new(vec!["x".into(), "x".into()]).is_err());
    }
}
