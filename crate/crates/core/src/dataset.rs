//! Mixed-model datasets and their tab-separated file format.
//!
//! The header row names the columns. The first column is the response.
//! Other columns are recognised by name:
//!
//! * `fixed:<name>` categorical fixed factor (treatment coded against its
//!   first level; an intercept is always included),
//! * `random:<name>` random grouping factor, one effect per level,
//! * `resid` residual block label (optional; one block when absent).
//!
//! Values are UTF-8 labels; the response must parse as a finite number and
//! `NA` is rejected anywhere.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A categorical column: level names and the level of each observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub name: String,
    pub levels: Vec<String>,
    pub index: Vec<usize>,
}

impl Factor {
    /// Builds a factor from labels, numbering levels by first appearance.
    pub fn from_labels<S: AsRef<str>>(name: impl Into<String>, labels: &[S]) -> Self {
        let mut lookup: HashMap<&str, usize> = HashMap::new();
        let mut levels = Vec::new();
        let mut index = Vec::with_capacity(labels.len());
        for l in labels {
            let l = l.as_ref();
            let id = *lookup.entry(l).or_insert_with(|| {
                levels.push(l.to_string());
                levels.len() - 1
            });
            index.push(id);
        }
        Self {
            name: name.into(),
            levels,
            index,
        }
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    /// Observations per level.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.levels.len()];
        self.index.iter().for_each(|&i| c[i] += 1);
        c
    }
}

/// Response, fixed design, random grouping factors and residual blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedModelDataset {
    y: Vec<f64>,
    x: DMatrix<f64>,
    x_names: Vec<String>,
    fixed_factors: Vec<Factor>,
    random: Vec<Factor>,
    residual: Factor,
}

impl MixedModelDataset {
    /// Validates and assembles a dataset. `x` is `n x p`.
    pub fn new(
        y: Vec<f64>,
        x: DMatrix<f64>,
        x_names: Vec<String>,
        random: Vec<Factor>,
        residual: Factor,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::Dataset("no observations".into()));
        }
        if x.nrows() != n {
            return Err(Error::Dataset(format!("X has {} rows for {n} observations", x.nrows())));
        }
        if x_names.len() != x.ncols() {
            return Err(Error::Dataset("one name per column of X required".into()));
        }
        if let Some(v) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::Dataset(format!("non-finite response {v}")));
        }
        for f in random.iter().chain(std::iter::once(&residual)) {
            if f.index.len() != n {
                return Err(Error::Dataset(format!(
                    "factor {} has {} labels for {n} observations",
                    f.name,
                    f.index.len()
                )));
            }
            if f.index.iter().any(|&i| i >= f.levels.len()) {
                return Err(Error::Dataset(format!("factor {} has an undefined level", f.name)));
            }
        }
        Ok(Self {
            y,
            x,
            x_names,
            fixed_factors: Vec::new(),
            random,
            residual,
        })
    }

    /// Intercept-only fixed part, one residual block.
    pub fn with_intercept(y: Vec<f64>, random: Vec<Factor>) -> Result<Self> {
        let n = y.len();
        let residual = Factor::from_labels("resid", &vec!["1"; n]);
        Self::new(y, DMatrix::from_element(n, 1, 1.0), vec!["(Intercept)".into()], random, residual)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Columns of `X`.
    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Total random-effect columns.
    pub fn b(&self) -> usize {
        self.random.iter().map(Factor::n_levels).sum()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn x_names(&self) -> &[String] {
        &self.x_names
    }

    pub fn random(&self) -> &[Factor] {
        &self.random
    }

    pub fn residual(&self) -> &Factor {
        &self.residual
    }

    pub fn random_factor(&self, name: &str) -> Option<&Factor> {
        self.random.iter().find(|f| f.name == name)
    }

    /// Column offset of each random factor within `Z`.
    pub fn random_offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.random.len());
        let mut acc = 0;
        for f in &self.random {
            off.push(acc);
            acc += f.n_levels();
        }
        off
    }

    /// Replaces the residual partition, e.g. to give blocks separate variances.
    pub fn with_residual(mut self, residual: Factor) -> Result<Self> {
        if residual.index.len() != self.n() || residual.index.iter().any(|&i| i >= residual.levels.len()) {
            return Err(Error::Dataset("residual partition does not match the data".into()));
        }
        self.residual = residual;
        Ok(self)
    }

    /// Scales the response, leaving the design untouched.
    pub fn with_scaled_response(mut self, c: f64) -> Self {
        self.y.iter_mut().for_each(|v| *v *= c);
        self
    }

    /// Reads the tab-separated format described in the module docs.
    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(l) => l?,
            None => return Err(Error::Dataset("empty file".into())),
        };
        let names: Vec<String> = header.trim_end_matches('\r').split('\t').map(str::to_string).collect();
        if names.iter().any(String::is_empty) {
            return Err(Error::Dataset("empty column name in header".into()));
        }
        enum Role {
            Fixed,
            Random,
            Resid,
        }
        let mut roles = Vec::new();
        for name in &names[1..] {
            let role = if name.starts_with("fixed:") {
                Role::Fixed
            } else if name.starts_with("random:") {
                Role::Random
            } else if name == "resid" {
                Role::Resid
            } else {
                return Err(Error::Dataset(format!("unrecognised column {name:?}")));
            };
            roles.push(role);
        }
        if roles.iter().filter(|r| matches!(r, Role::Resid)).count() > 1 {
            return Err(Error::Dataset("more than one resid column".into()));
        }

        let mut y = Vec::new();
        let mut cols: Vec<Vec<String>> = vec![Vec::new(); roles.len()];
        for (k, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let lineno = k + 2;
            if fields.len() != names.len() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected {} fields, found {}", names.len(), fields.len()),
                });
            }
            if let Some(f) = fields.iter().find(|f| **f == "NA" || f.is_empty()) {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("missing value {f:?}"),
                });
            }
            let v: f64 = fields[0].parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad response {:?}", fields[0]),
            })?;
            y.push(v);
            for (c, f) in cols.iter_mut().zip(&fields[1..]) {
                c.push(f.to_string());
            }
        }
        let n = y.len();

        let mut random = Vec::new();
        let mut fixed = Vec::new();
        let mut residual = None;
        for ((role, name), labels) in roles.iter().zip(&names[1..]).zip(&cols) {
            match role {
                Role::Fixed => fixed.push(Factor::from_labels(&name["fixed:".len()..], labels)),
                Role::Random => random.push(Factor::from_labels(&name["random:".len()..], labels)),
                Role::Resid => residual = Some(Factor::from_labels("resid", labels)),
            }
        }
        let residual = residual.unwrap_or_else(|| Factor::from_labels("resid", &vec!["1"; n]));

        let p = 1 + fixed.iter().map(|f| f.n_levels().saturating_sub(1)).sum::<usize>();
        let mut x = DMatrix::zeros(n, p);
        let mut x_names = vec!["(Intercept)".to_string()];
        x.column_mut(0).fill(1.0);
        let mut col = 1;
        for f in &fixed {
            for (lvl, label) in f.levels.iter().enumerate().skip(1) {
                for (o, &i) in f.index.iter().enumerate() {
                    if i == lvl {
                        x[(o, col)] = 1.0;
                    }
                }
                x_names.push(format!("{}:{}", f.name, label));
                col += 1;
            }
        }
        let mut d = Self::new(y, x, x_names, random, residual)?;
        d.fixed_factors = fixed;
        Ok(d)
    }

    pub fn read_tsv_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_tsv(std::io::BufReader::new(f))
    }

    /// Writes the tab-separated format. Only datasets whose fixed part is an
    /// intercept plus categorical factors read from a file can be written.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        let coded = 1 + self.fixed_factors.iter().map(|f| f.n_levels().saturating_sub(1)).sum::<usize>();
        if coded != self.p() {
            return Err(Error::Dataset("fixed design is not factor coded".into()));
        }
        let mut header = vec!["y".to_string()];
        header.extend(self.fixed_factors.iter().map(|f| format!("fixed:{}", f.name)));
        header.extend(self.random.iter().map(|f| format!("random:{}", f.name)));
        header.push("resid".into());
        writeln!(w, "{}", header.join("\t"))?;
        for o in 0..self.n() {
            write!(w, "{}", self.y[o])?;
            for f in self.fixed_factors.iter().chain(&self.random).chain(std::iter::once(&self.residual)) {
                write!(w, "\t{}", f.levels[f.index[o]])?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_tsv_file(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_tsv(std::io::BufWriter::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "y\tfixed:trt\trandom:blk\tresid\n1.5\tA\tb1\tr1\n2\tB\tb1\tr1\n3.25\tA\tb2\tr2\n";

    #[test]
    fn reads_roles() {
        let d = MixedModelDataset::read_tsv(SMALL.as_bytes()).unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.p(), 2);
        assert_eq!(d.b(), 2);
        assert_eq!(d.y(), &[1.5, 2.0, 3.25]);
        assert_eq!(d.x().column(1).as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(d.x_names(), &["(Intercept)".to_string(), "trt:B".to_string()]);
        assert_eq!(d.residual().n_levels(), 2);
        assert_eq!(d.random()[0].index, vec![0, 0, 1]);
    }

    #[test]
    fn round_trip() {
        let d = MixedModelDataset::read_tsv(SMALL.as_bytes()).unwrap();
        let mut out = Vec::new();
        d.write_tsv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, SMALL);
    }

    #[test]
    fn rejects_missing_and_unknown() {
        let na = "y\trandom:g\n1\tNA\n";
        assert!(matches!(MixedModelDataset::read_tsv(na.as_bytes()), Err(Error::Parse { line: 2, .. })));
        let bad = "y\tgroup\n1\ta\n";
        assert!(matches!(MixedModelDataset::read_tsv(bad.as_bytes()), Err(Error::Dataset(_))));
        let short = "y\trandom:g\n1\n";
        assert!(matches!(MixedModelDataset::read_tsv(short.as_bytes()), Err(Error::Parse { .. })));
        let nan = "y\trandom:g\nx\ta\n";
        assert!(MixedModelDataset::read_tsv(nan.as_bytes()).is_err());
    }

    #[test]
    fn factor_levels_by_first_appearance() {
        let f = Factor::from_labels("g", &["b", "a", "b", "c"]);
        assert_eq!(f.levels, vec!["b", "a", "c"]);
        assert_eq!(f.index, vec![0, 1, 0, 2]);
        assert_eq!(f.counts(), vec![2, 1, 1]);
    }
}
