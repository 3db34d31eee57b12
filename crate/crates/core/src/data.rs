use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One subject: biomarker, covariates, verification flag and disease status.
///
/// `y` must be present when `r` is true and absent otherwise; unverified
/// disease status never enters a [`Dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub x: f64,
    pub v: Vec<f64>,
    pub r: bool,
    pub y: Option<bool>,
}

impl Record {
    pub fn verified(x: f64, v: Vec<f64>, y: bool) -> Self {
        Self {
            x,
            v,
            r: true,
            y: Some(y),
        }
    }

    pub fn unverified(x: f64, v: Vec<f64>) -> Self {
        Self {
            x,
            v,
            r: false,
            y: None,
        }
    }
}

/// Observed-data sample stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    p: usize,
    x: Vec<f64>,
    v: Vec<f64>,
    r: Vec<bool>,
    y: Vec<Option<bool>>,
    n1: usize,
}

impl Dataset {
    pub fn from_records(records: &[Record]) -> Result<Self> {
        let p = records
            .first()
            .map(|r| r.v.len())
            .ok_or_else(|| Error::InvalidDataset("no records".into()))?;
        let mut builder = DatasetBuilder::new(p);
        for rec in records {
            builder.push(rec.x, &rec.v, rec.r, rec.y)?;
        }
        builder.finish()
    }

    /// Builds from columns; `v` is row-major with `p` entries per record.
    pub fn from_columns(
        p: usize,
        x: Vec<f64>,
        v: Vec<f64>,
        r: Vec<bool>,
        y: Vec<Option<bool>>,
    ) -> Result<Self> {
        let n = x.len();
        if v.len() != n * p || r.len() != n || y.len() != n {
            return Err(Error::InvalidDataset(format!(
                "column lengths disagree: x {}, v {} (p = {p}), r {}, y {}",
                n,
                v.len(),
                r.len(),
                y.len()
            )));
        }
        for i in 0..n {
            validate(i, x[i], &v[i * p..(i + 1) * p], r[i], y[i])?;
        }
        let n1 = r.iter().filter(|&&ri| ri).count();
        let data = Self { p, x, v, r, y, n1 };
        data.check_nonempty()?;
        Ok(data)
    }

    fn check_nonempty(&self) -> Result<()> {
        if self.x.is_empty() {
            return Err(Error::InvalidDataset("no records".into()));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Number of verified records.
    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn xi(&self, i: usize) -> f64 {
        self.x[i]
    }

    pub fn vi(&self, i: usize) -> &[f64] {
        &self.v[i * self.p..(i + 1) * self.p]
    }

    pub fn ri(&self, i: usize) -> bool {
        self.r[i]
    }

    pub fn yi(&self, i: usize) -> Option<bool> {
        self.y[i]
    }

    pub fn verified(&self) -> &[bool] {
        &self.r
    }

    pub fn record(&self, i: usize) -> Record {
        Record {
            x: self.x[i],
            v: self.vi(i).to_vec(),
            r: self.r[i],
            y: self.y[i],
        }
    }

    pub fn records(&self) -> impl Iterator<Item = Record> + '_ {
        (0..self.n()).map(|i| self.record(i))
    }

    /// Counts of verified records with `y = 1` and `y = 0`.
    pub fn verified_class_counts(&self) -> (usize, usize) {
        self.y.iter().fold((0, 0), |(a, b), y| match y {
            Some(true) => (a + 1, b),
            Some(false) => (a, b + 1),
            None => (a, b),
        })
    }

    /// Dataset made of the given rows (with repetition), e.g. a bootstrap resample.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let mut b = DatasetBuilder::new(self.p);
        for &i in rows {
            b.push(self.x[i], self.vi(i), self.r[i], self.y[i])?;
        }
        b.finish()
    }

    /// Indices of verified records.
    pub fn verified_rows(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.r[i]).collect()
    }

    /// Returns a copy with `x` mapped to `(x - shift) / scale`.
    pub fn with_affine_biomarker(&self, shift: f64, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale != 0.0 && shift.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "affine transform needs finite shift and nonzero scale, got ({shift}, {scale})"
            )));
        }
        let mut out = self.clone();
        for x in &mut out.x {
            *x = (*x - shift) / scale;
        }
        Ok(out)
    }
}

fn validate(index: usize, x: f64, v: &[f64], r: bool, y: Option<bool>) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::InvalidRecord {
            index,
            reason: format!("non-finite biomarker {x}"),
        });
    }
    if let Some(bad) = v.iter().find(|c| !c.is_finite()) {
        return Err(Error::InvalidRecord {
            index,
            reason: format!("non-finite covariate {bad}"),
        });
    }
    match (r, y) {
        (true, None) => Err(Error::InvalidRecord {
            index,
            reason: "verified record without disease status".into(),
        }),
        (false, Some(_)) => Err(Error::InvalidRecord {
            index,
            reason: "unverified record carries a disease status".into(),
        }),
        _ => Ok(()),
    }
}

/// Incremental construction with per-record validation.
#[derive(Debug)]
pub struct DatasetBuilder {
    p: usize,
    x: Vec<f64>,
    v: Vec<f64>,
    r: Vec<bool>,
    y: Vec<Option<bool>>,
    n1: usize,
}

impl DatasetBuilder {
    pub fn new(p: usize) -> Self {
        Self {
            p,
            x: Vec::new(),
            v: Vec::new(),
            r: Vec::new(),
            y: Vec::new(),
            n1: 0,
        }
    }

    pub fn with_capacity(p: usize, n: usize) -> Self {
        Self {
            p,
            x: Vec::with_capacity(n),
            v: Vec::with_capacity(n * p),
            r: Vec::with_capacity(n),
            y: Vec::with_capacity(n),
            n1: 0,
        }
    }

    pub fn push(&mut self, x: f64, v: &[f64], r: bool, y: Option<bool>) -> Result<()> {
        let index = self.x.len();
        if v.len() != self.p {
            return Err(Error::InvalidRecord {
                index,
                reason: format!("expected {} covariates, got {}", self.p, v.len()),
            });
        }
        validate(index, x, v, r, y)?;
        self.x.push(x);
        self.v.extend_from_slice(v);
        self.r.push(r);
        self.y.push(y);
        self.n1 += r as usize;
        Ok(())
    }

    pub fn finish(self) -> Result<Dataset> {
        let data = Dataset {
            p: self.p,
            x: self.x,
            v: self.v,
            r: self.r,
            y: self.y,
            n1: self.n1,
        };
        data.check_nonempty()?;
        Ok(data)
    }
}
