use std::io::Read;

use crate::error::{LqeError, Result};

/// `n` observation vectors of `c` coordinates each, stored row-major.
///
/// Row `i` is the vector `X_i`; column `l` holds the `l`-th sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CSampleDataset {
    values: Vec<f64>,
    n: usize,
    c: usize,
}

impl CSampleDataset {
    pub fn new(values: Vec<f64>, n: usize, c: usize) -> Result<Self> {
        if n == 0 {
            return Err(LqeError::domain("dataset needs at least one row"));
        }
        if c < 2 {
            return Err(LqeError::domain(format!(
                "dataset needs at least two samples, got {c}"
            )));
        }
        if values.len() != n * c {
            return Err(LqeError::domain(format!(
                "expected {} values for {n} x {c}, got {}",
                n * c,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(LqeError::domain(format!(
                "non-finite value at row {}, column {}",
                pos / c,
                pos % c
            )));
        }
        Ok(CSampleDataset { values, n, c })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let c = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * c);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != c {
                return Err(LqeError::domain(format!(
                    "row {i} has {} values, expected {c}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(values, rows.len(), c)
    }

    pub fn from_columns<C: AsRef<[f64]>>(columns: &[C]) -> Result<Self> {
        let c = columns.len();
        let n = columns.first().map(|col| col.as_ref().len()).unwrap_or(0);
        if columns.iter().any(|col| col.as_ref().len() != n) {
            return Err(LqeError::domain("columns have different lengths"));
        }
        let mut values = Vec::with_capacity(n * c);
        for i in 0..n {
            values.extend(columns.iter().map(|col| col.as_ref()[i]));
        }
        Self::new(values, n, c)
    }

    /// Reads a comma-separated table: a header row naming the samples, then
    /// one row per observation vector. Empty and `NA` cells are rejected.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<(Vec<String>, Self)> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| LqeError::data(Some(1), e.to_string()))?
            .iter()
            .map(str::to_owned)
            .collect();
        let c = headers.len();
        if c < 2 {
            return Err(LqeError::data(
                Some(1),
                format!("need at least two sample columns, header has {c}"),
            ));
        }
        let mut values = Vec::new();
        let mut n = 0;
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let line = e.position().map(|p| p.line() as usize);
                LqeError::data(line, e.to_string())
            })?;
            let line = record.position().map(|p| p.line() as usize);
            if record.len() != c {
                return Err(LqeError::data(
                    line,
                    format!("expected {c} fields, found {}", record.len()),
                ));
            }
            for (j, field) in record.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    LqeError::data(
                        line,
                        format!(
                            "column '{}': cannot parse '{field}' as a number",
                            headers[j]
                        ),
                    )
                })?;
                if !v.is_finite() {
                    return Err(LqeError::data(
                        line,
                        format!("column '{}': non-finite value '{field}'", headers[j]),
                    ));
                }
                values.push(v);
            }
            n += 1;
        }
        if n == 0 {
            return Err(LqeError::data(None, "no data rows"));
        }
        let data = Self::new(values, n, c).map_err(|e| LqeError::data(None, e.to_string()))?;
        Ok((headers, data))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.c..(i + 1) * self.c]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.c)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// First `k` rows as a new dataset.
    pub fn prefix(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.n {
            return Err(LqeError::domain(format!(
                "prefix length {k} outside 1..={}",
                self.n
            )));
        }
        Self::new(self.values[..k * self.c].to_vec(), k, self.c)
    }

    /// Applies `f` to every observation.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.values.iter().map(|&v| f(v)).collect(), self.n, self.c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(CSampleDataset::new(vec![1.0, 2.0], 1, 1).is_err());
        assert!(CSampleDataset::new(vec![], 0, 3).is_err());
        assert!(CSampleDataset::new(vec![1.0, 2.0, 3.0], 2, 2).is_err());
        assert!(CSampleDataset::new(vec![1.0, f64::NAN], 1, 2).is_err());
        assert!(CSampleDataset::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn rows_and_columns_agree() {
        let d = CSampleDataset::from_columns(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]])
            .unwrap();
        assert_eq!(d.row(1), &[2.0, 4.0, 6.0]);
        assert_eq!(d.column(2), vec![5.0, 6.0]);
        assert_eq!(d.prefix(1).unwrap().values(), &[1.0, 3.0, 5.0]);
    }

    #[test]
    fn csv_parses_and_reports_lines() {
        let (h, d) = CSampleDataset::from_csv_reader("a,b,c\n1,2,3\n4,5,6\n".as_bytes()).unwrap();
        assert_eq!(h, vec!["a", "b", "c"]);
        assert_eq!(d.n(), 2);

        let err = CSampleDataset::from_csv_reader("a,b\n1,2\n3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, LqeError::Data { line: Some(3), .. }), "{err}");

        let err = CSampleDataset::from_csv_reader("a,b\n1,2\n3,x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, LqeError::Data { line: Some(3), .. }), "{err}");

        let err = CSampleDataset::from_csv_reader("a,b\n1,NA\n".as_bytes()).unwrap_err();
        assert!(matches!(err, LqeError::Data { line: Some(2), .. }), "{err}");

        assert!(CSampleDataset::from_csv_reader("a\n1\n".as_bytes()).is_err());
        assert!(CSampleDataset::from_csv_reader("a,b\n".as_bytes()).is_err());
    }
}
