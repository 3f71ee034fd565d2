//! Problem ladders, per-phase timings and CSV reports.

use std::io::Write;
use std::path::Path;

use crate::datagen::{generate, TrialConfig, RANDOM_TERMS};
use crate::error::{Error, Result};
use crate::mm::read_matrix_market_file;
use crate::numeric::LdlOptions;
use crate::ordering::Ordering;
use crate::pipeline::factorize_and_invert;
use crate::reml::{assemble_mme, VarianceParams};
use crate::sparse::SparseSymmetric;
use crate::symbolic::{FlopCounts, SymbolicFactor};

/// Size and predicted cost of a factorization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisReport {
    pub n: usize,
    /// Lower triangle including the diagonal.
    pub nnz_c: usize,
    /// Including the unit diagonal.
    pub nnz_l: usize,
    pub flops: FlopCounts,
}

impl AnalysisReport {
    pub fn new(a: &SparseSymmetric, sym: &SymbolicFactor) -> Self {
        Self {
            n: a.n(),
            nnz_c: a.nnz(),
            nnz_l: sym.nnz_l(),
            flops: sym.flops(),
        }
    }

    pub fn c_per_column(&self) -> f64 {
        per_column(self.nnz_c, self.n)
    }

    /// Nonzeros of the full symmetric matrix per thousand entries.
    pub fn c_density_permille(&self) -> f64 {
        permille(self.nnz_c, self.n)
    }

    pub fn l_per_column(&self) -> f64 {
        per_column(self.nnz_l, self.n)
    }

    /// `L + L^T` per thousand entries.
    pub fn l_density_permille(&self) -> f64 {
        permille(self.nnz_l, self.n)
    }

    /// Whether the two flop predictions satisfy the exact selinv/ldlt relation.
    pub fn identity_holds(&self) -> bool {
        crate::symbolic::selinv_flops_from_ldlt(self.n as u64, self.nnz_l as u64, self.flops.ldlt) == self.flops.selinv
    }
}

fn per_column(nnz: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        nnz as f64 / n as f64
    }
}

fn permille(nnz: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        2000.0 * nnz as f64 / (n as f64 * n as f64)
    }
}

/// A benchmark input: a Matrix Market file or a generated trial preset.
#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Matrix(String),
    Preset(String),
}

impl Problem {
    /// `probK` names a preset, anything else is a path.
    pub fn parse(s: &str) -> Self {
        if TrialConfig::preset(s).is_some() {
            Problem::Preset(s.to_string())
        } else {
            Problem::Matrix(s.to_string())
        }
    }

    pub fn name(&self) -> String {
        match self {
            Problem::Preset(p) => p.clone(),
            Problem::Matrix(path) => Path::new(path)
                .file_stem()
                .map_or_else(|| path.clone(), |s| s.to_string_lossy().into_owned()),
        }
    }

    pub fn load(&self) -> Result<SparseSymmetric> {
        match self {
            Problem::Matrix(path) => read_matrix_market_file(path),
            Problem::Preset(name) => {
                let cfg = TrialConfig::preset(name).ok_or_else(|| Error::ConfigInvalid(name.clone()))?;
                trial_mme(&cfg)
            }
        }
    }
}

/// Coefficient matrix of a generated trial at its true variance ratios.
pub fn trial_mme(cfg: &TrialConfig) -> Result<SparseSymmetric> {
    let d = generate(cfg)?;
    let vc = &cfg.variance_components;
    let resid = vc[RANDOM_TERMS.len()];
    let gamma = vc[..RANDOM_TERMS.len()].iter().map(|v| v / resid).collect();
    let v = VarianceParams::new(resid, gamma, vec![1.0])?;
    Ok(assemble_mme(&d, &v)?.c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchStats {
    pub report: AnalysisReport,
    pub measured: FlopCounts,
    pub t_ordering: f64,
    pub t_symbolic: f64,
    pub t_factor: f64,
    pub t_selinv: f64,
}

impl BenchStats {
    pub fn total(&self) -> f64 {
        self.t_ordering + self.t_symbolic + self.t_factor + self.t_selinv
    }

    /// Numeric phases only.
    pub fn numeric_time(&self) -> f64 {
        self.t_factor + self.t_selinv
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub problem: String,
    pub ordering: String,
    pub outcome: std::result::Result<BenchStats, String>,
}

/// Full pipeline on one matrix with per-phase wall times.
pub fn bench_matrix(a: &SparseSymmetric, ordering: &Ordering) -> Result<BenchStats> {
    let (f, z, t) = factorize_and_invert(a, ordering, &LdlOptions::default())?;
    Ok(BenchStats {
        report: AnalysisReport::new(a, f.symbolic()),
        measured: FlopCounts {
            ldlt: f.flops(),
            selinv: z.flops(),
        },
        t_ordering: t.ordering.as_secs_f64(),
        t_symbolic: t.symbolic.as_secs_f64(),
        t_factor: t.factor.as_secs_f64(),
        t_selinv: t.selinv.as_secs_f64(),
    })
}

/// Every problem under every ordering. Failures are recorded in the row.
pub fn run(problems: &[Problem], orderings: &[Ordering]) -> Vec<BenchRow> {
    let mut rows = Vec::new();
    for p in problems {
        let a = p.load();
        for o in orderings {
            let outcome = match &a {
                Ok(a) => bench_matrix(a, o).map_err(|e| e.to_string()),
                Err(e) => Err(e.to_string()),
            };
            rows.push(BenchRow {
                problem: p.name(),
                ordering: o.to_string(),
                outcome,
            });
        }
    }
    rows
}

pub const CSV_HEADER: &str = "problem,ordering,n,nnz_c,c_density_permille,nnz_l,l_density_permille,\
ldlt_flops_predicted,ldlt_flops_measured,selinv_flops_predicted,selinv_flops_measured,\
t_ordering,t_symbolic,t_factor,t_selinv,t_total,status";

pub const TIMING_CSV_HEADER: &str = "problem,ordering,nnz_l,time";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_csv<W: Write>(rows: &[BenchRow], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        write!(w, "{},{}", csv_field(&r.problem), csv_field(&r.ordering))?;
        match &r.outcome {
            Ok(s) => writeln!(
                w,
                ",{},{},{:.3},{},{:.3},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},ok",
                s.report.n,
                s.report.nnz_c,
                s.report.c_density_permille(),
                s.report.nnz_l,
                s.report.l_density_permille(),
                s.report.flops.ldlt,
                s.measured.ldlt,
                s.report.flops.selinv,
                s.measured.selinv,
                s.t_ordering,
                s.t_symbolic,
                s.t_factor,
                s.t_selinv,
                s.total()
            )?,
            Err(e) => writeln!(w, "{}{}", ",".repeat(15), csv_field(&format!("error: {e}")))?,
        }
    }
    w.flush()?;
    Ok(())
}

/// `(nnz_l, time)` pairs of the successful rows, time being the numeric phases.
pub fn write_timing_csv<W: Write>(rows: &[BenchRow], mut w: W) -> Result<()> {
    writeln!(w, "{TIMING_CSV_HEADER}")?;
    for r in rows {
        if let Ok(s) = &r.outcome {
            writeln!(
                w,
                "{},{},{},{:.6}",
                csv_field(&r.problem),
                csv_field(&r.ordering),
                s.report.nnz_l,
                s.numeric_time()
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties. `None` when
/// undefined (fewer than two points or a constant input).
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Spearman correlation between `nnz(L)` and numeric time over successful rows.
pub fn time_memory_correlation(rows: &[BenchRow]) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok())
        .map(|s| (s.report.nnz_l as f64, s.numeric_time()))
        .unzip();
    spearman(&x, &y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_cases() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]), None);
        assert_eq!(spearman(&[1.0], &[1.0]), None);
        // monotone but nonlinear
        assert_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 8.0, 27.0, 64.0]), Some(1.0));
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn empty_run_has_header_only() {
        let rows = run(&[], &[Ordering::Amd]);
        let mut out = Vec::new();
        write_csv(&rows, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn failures_do_not_stop_the_run() {
        let problems = [Problem::parse("/nonexistent/file.mtx"), Problem::parse("prob1")];
        assert_eq!(problems[1], Problem::Preset("prob1".into()));
        let rows = run(&problems, &[Ordering::Amd]);
        assert!(rows[0].outcome.is_err());
        let s = rows[1].outcome.as_ref().unwrap();
        assert_eq!(s.measured, s.report.flops);
        assert!(s.report.identity_holds());
        let mut out = Vec::new();
        write_csv(&rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let cols = CSV_HEADER.split(',').count();
        for line in text.lines() {
            assert_eq!(line.split(',').count(), cols, "{line}");
        }
    }

    #[test]
    fn density_columns() {
        let r = AnalysisReport {
            n: 3488,
            nnz_c: 56946,
            nnz_l: 112618,
            flops: FlopCounts { ldlt: 0, selinv: 0 },
        };
        assert_eq!(format!("{:.1}", r.c_per_column()), "16.3");
        assert_eq!(format!("{:.1}", r.c_density_permille()), "9.4");
        assert_eq!(format!("{:.1}", r.l_per_column()), "32.3");
        assert_eq!(format!("{:.1}", r.l_density_permille()), "18.5");
    }
}
