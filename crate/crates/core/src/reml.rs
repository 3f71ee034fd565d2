//! Mixed model equations and the restricted log-likelihood of a variance
//! components model.
//!
//! The model is `y = X tau + Z u + e` with `var(u) = sigma2 G`,
//! `var(e) = sigma2 R`, `G = (+)_j gamma_j I` and `R = (+)_k phi_k I`. The
//! coefficient matrix
//!
//! ```text
//! C = [ X'R^-1 X   X'R^-1 Z          ]
//!     [ Z'R^-1 X   Z'R^-1 Z + G^-1   ]
//! ```
//!
//! does not contain `sigma2`. Derivatives of `log det C` reduce to traces
//! `tr(C^-1 dC)`, which only need the entries of `C^-1` on the pattern of
//! `dC`, a subset of the pattern of `C`.

use nalgebra::{DMatrix, DVector};

use crate::dataset::MixedModelDataset;
use crate::dense::{log_det_spd, DENSE_LIMIT};
use crate::error::{Error, Result};
use crate::numeric::{LdlFactor, LdlOptions};
use crate::ordering::Ordering;
use crate::pipeline::{factorize_and_invert, PhaseTimes};
use crate::selinv::SelectedInverse;
use crate::sparse::{SparseSymmetric, TripletList};

/// `(sigma2, gamma, phi)`: overall scale, one ratio per random factor and one
/// per residual block.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceParams {
    sigma2: f64,
    gamma: Vec<f64>,
    phi: Vec<f64>,
}

impl VarianceParams {
    pub fn new(sigma2: f64, gamma: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        let bad = |v: &f64| !(v.is_finite() && *v > 0.0);
        if bad(&sigma2) {
            return Err(Error::InvalidParams(format!("sigma2 = {sigma2}")));
        }
        if let Some((j, v)) = gamma.iter().enumerate().find(|(_, v)| bad(v)) {
            return Err(Error::InvalidParams(format!("gamma[{j}] = {v}")));
        }
        if let Some((k, v)) = phi.iter().enumerate().find(|(_, v)| bad(v)) {
            return Err(Error::InvalidParams(format!("phi[{k}] = {v}")));
        }
        Ok(Self { sigma2, gamma, phi })
    }

    /// All ratios and the scale equal to one, sized for `d`.
    pub fn unit(d: &MixedModelDataset) -> Self {
        Self {
            sigma2: 1.0,
            gamma: vec![1.0; d.random().len()],
            phi: vec![1.0; d.residual().n_levels()],
        }
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Number of ratio parameters, gammas first then phis.
    pub fn n_ratios(&self) -> usize {
        self.gamma.len() + self.phi.len()
    }

    /// Ratio `k` in gradient order.
    pub fn ratio(&self, k: usize) -> f64 {
        if k < self.gamma.len() {
            self.gamma[k]
        } else {
            self.phi[k - self.gamma.len()]
        }
    }

    /// Copy with ratio `k` (gradient order) replaced.
    pub fn with_ratio(&self, k: usize, value: f64) -> Result<Self> {
        let mut out = self.clone();
        if k < out.gamma.len() {
            out.gamma[k] = value;
        } else if k < out.n_ratios() {
            out.phi[k - self.gamma.len()] = value;
        } else {
            return Err(Error::InvalidParams(format!("no ratio {k}")));
        }
        Self::new(out.sigma2, out.gamma, out.phi)
    }

    pub fn with_sigma2(&self, sigma2: f64) -> Result<Self> {
        Self::new(sigma2, self.gamma.clone(), self.phi.clone())
    }

    fn check(&self, d: &MixedModelDataset) -> Result<()> {
        if self.gamma.len() != d.random().len() {
            return Err(Error::SizeMismatch {
                expected: d.random().len(),
                got: self.gamma.len(),
            });
        }
        if self.phi.len() != d.residual().n_levels() {
            return Err(Error::SizeMismatch {
                expected: d.residual().n_levels(),
                got: self.phi.len(),
            });
        }
        Ok(())
    }
}

/// Assembled coefficient matrix, right-hand side and derivative templates.
#[derive(Debug, Clone)]
pub struct MmeSystem {
    pub c: SparseSymmetric,
    pub rhs: Vec<f64>,
    /// `dC/dgamma_j` then `dC/dphi_k`, each on a subpattern of `c`.
    pub templates: Vec<SparseSymmetric>,
    pub p: usize,
    pub b: usize,
    pub n_obs: usize,
    /// `y' R^-1 y`.
    pub y_rinv_y: f64,
    pub logdet_r: f64,
    pub logdet_g: f64,
}

impl MmeSystem {
    pub fn dim(&self) -> usize {
        self.p + self.b
    }
}

/// Numerical rank of `x` from its singular values.
pub fn column_rank(x: &DMatrix<f64>) -> usize {
    if x.ncols() == 0 || x.nrows() == 0 {
        return 0;
    }
    let sv = x.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let tol = x.nrows().max(x.ncols()) as f64 * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Builds the mixed model equations at `v`.
pub fn assemble_mme(d: &MixedModelDataset, v: &VarianceParams) -> Result<MmeSystem> {
    v.check(d)?;
    let n = d.n();
    let p = d.p();
    let rank = column_rank(d.x());
    if rank < p {
        return Err(Error::RankDeficientX { rank, p });
    }
    for f in d.random() {
        if f.n_levels() == 0 || f.counts().contains(&0) {
            return Err(Error::EmptyFactor(f.name.clone()));
        }
    }
    let resid = d.residual();
    if resid.counts().contains(&0) {
        return Err(Error::EmptyFactor("residual block".into()));
    }

    let b = d.b();
    let dim = p + b;
    let offsets = d.random_offsets();
    let nblocks = resid.n_levels();

    let mut c = TripletList::with_capacity(dim, n * (p + d.random().len() + 1).pow(2) / 2 + b);
    let mut phi_t: Vec<TripletList> = (0..nblocks).map(|_| TripletList::new(dim)).collect();
    let mut rhs = vec![0.0; dim];
    let mut y_rinv_y = 0.0;

    // nonzeros of row o of W = [X, Z], columns ascending
    let mut row: Vec<(usize, f64)> = Vec::with_capacity(p + d.random().len());
    for o in 0..n {
        row.clear();
        for a in 0..p {
            let x = d.x()[(o, a)];
            if x != 0.0 {
                row.push((a, x));
            }
        }
        for (f, &off) in d.random().iter().zip(&offsets) {
            row.push((p + off + f.index[o], 1.0));
        }
        let k = resid.index[o];
        let w = 1.0 / v.phi[k];
        let dw = -w * w;
        let y = d.y()[o];
        y_rinv_y += w * y * y;
        for (s, &(ca, xa)) in row.iter().enumerate() {
            rhs[ca] += w * xa * y;
            for &(cb, xb) in &row[..=s] {
                let (r, cc) = if ca >= cb { (ca, cb) } else { (cb, ca) };
                c.push(r, cc, w * xa * xb);
                phi_t[k].push(r, cc, dw * xa * xb);
            }
        }
    }

    let mut templates = Vec::with_capacity(v.n_ratios());
    for (f, (&off, &g)) in d.random().iter().zip(offsets.iter().zip(&v.gamma)) {
        let mut t = TripletList::new(dim);
        for l in 0..f.n_levels() {
            let i = p + off + l;
            c.push(i, i, 1.0 / g);
            t.push(i, i, -1.0 / (g * g));
        }
        templates.push(SparseSymmetric::from_triplets(&t)?);
    }
    for t in &phi_t {
        templates.push(SparseSymmetric::from_triplets(t)?);
    }

    let counts = resid.counts();
    let logdet_r = counts.iter().zip(&v.phi).map(|(&nk, f)| nk as f64 * f.ln()).sum();
    let logdet_g = d
        .random()
        .iter()
        .zip(&v.gamma)
        .map(|(f, g)| f.n_levels() as f64 * g.ln())
        .sum();

    Ok(MmeSystem {
        c: SparseSymmetric::from_triplets(&c)?,
        rhs,
        templates,
        p,
        b,
        n_obs: n,
        y_rinv_y,
        logdet_r,
        logdet_g,
    })
}

/// `[tau_hat; u_tilde] = C^-1 rhs`, split into fixed and random parts.
pub fn solve_mme(m: &MmeSystem) -> Result<(Vec<f64>, Vec<f64>)> {
    let (f, _) = crate::pipeline::factorize(&m.c, &Ordering::Amd, &LdlOptions::default())?;
    let mut sol = f.solve(&m.rhs)?;
    let u = sol.split_off(m.p);
    Ok((sol, u))
}

/// Which expression of the restricted log-likelihood to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    /// Dense, through `H = R + Z G Z'`; limited to small `n`.
    H,
    /// Sparse, through the mixed model equations.
    C,
}

/// Terms of the restricted log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoglikTerms {
    pub loglik: f64,
    /// `log det C` (C-form) or `log det H + log det X'H^-1 X` (H-form).
    pub logdet_main: f64,
    pub logdet_r: f64,
    pub logdet_g: f64,
    pub ypy: f64,
}

fn combine(n: usize, p: usize, sigma2: f64, logdets: f64, ypy: f64) -> f64 {
    -0.5 * ((n - p) as f64 * sigma2.ln() + logdets + ypy / sigma2)
}

fn terms_from_factor(m: &MmeSystem, f: &LdlFactor, sigma2: f64) -> Result<LoglikTerms> {
    let sol = f.solve(&m.rhs)?;
    let ypy = m.y_rinv_y - m.rhs.iter().zip(&sol).map(|(a, b)| a * b).sum::<f64>();
    let logdet_c = f.log_det();
    Ok(LoglikTerms {
        loglik: combine(m.n_obs, m.p, sigma2, logdet_c + m.logdet_r + m.logdet_g, ypy),
        logdet_main: logdet_c,
        logdet_r: m.logdet_r,
        logdet_g: m.logdet_g,
        ypy,
    })
}

/// The restricted log-likelihood and its parts.
pub fn restricted_loglik_terms(d: &MixedModelDataset, v: &VarianceParams, form: Form) -> Result<LoglikTerms> {
    match form {
        Form::C => {
            let m = assemble_mme(d, v)?;
            let (f, _) = crate::pipeline::factorize(&m.c, &Ordering::Amd, &LdlOptions::default())?;
            terms_from_factor(&m, &f, v.sigma2)
        }
        Form::H => h_form(d, v),
    }
}

pub fn restricted_loglik(d: &MixedModelDataset, v: &VarianceParams, form: Form) -> Result<f64> {
    restricted_loglik_terms(d, v, form).map(|t| t.loglik)
}

/// `H = R + Z G Z'` as a dense matrix.
pub fn dense_h(d: &MixedModelDataset, v: &VarianceParams) -> Result<DMatrix<f64>> {
    v.check(d)?;
    let n = d.n();
    if n > DENSE_LIMIT {
        return Err(Error::TooLargeForDenseForm { n, limit: DENSE_LIMIT });
    }
    let mut h = DMatrix::zeros(n, n);
    for o in 0..n {
        h[(o, o)] = v.phi[d.residual().index[o]];
    }
    for (f, &g) in d.random().iter().zip(&v.gamma) {
        for a in 0..n {
            for b in 0..n {
                if f.index[a] == f.index[b] {
                    h[(a, b)] += g;
                }
            }
        }
    }
    Ok(h)
}

fn h_form(d: &MixedModelDataset, v: &VarianceParams) -> Result<LoglikTerms> {
    let h = dense_h(d, v)?;
    let p = d.p();
    let rank = column_rank(d.x());
    if rank < p {
        return Err(Error::RankDeficientX { rank, p });
    }
    let chol = h.clone().cholesky().ok_or(Error::SingularMatrix)?;
    let logdet_h = log_det_spd(h)?;
    let y = DVector::from_column_slice(d.y());
    let hinv_x = chol.solve(d.x());
    let hinv_y = chol.solve(&y);
    let xhx = d.x().transpose() * &hinv_x;
    let xhy = d.x().transpose() * &hinv_y;
    let logdet_xhx = log_det_spd(xhx.clone())?;
    let tau = xhx.cholesky().ok_or(Error::SingularMatrix)?.solve(&xhy);
    let ypy = y.dot(&hinv_y) - xhy.dot(&tau);
    let logdets = logdet_h + logdet_xhx;
    Ok(LoglikTerms {
        loglik: combine(d.n(), p, v.sigma2, logdets, ypy),
        logdet_main: logdets,
        logdet_r: 0.0,
        logdet_g: 0.0,
        ypy,
    })
}

/// Generalised least squares estimate of `tau` and the matching BLUP of `u`,
/// computed densely through `H`.
pub fn dense_gls(d: &MixedModelDataset, v: &VarianceParams) -> Result<(Vec<f64>, Vec<f64>)> {
    let h = dense_h(d, v)?;
    let chol = h.cholesky().ok_or(Error::SingularMatrix)?;
    let y = DVector::from_column_slice(d.y());
    let hinv_x = chol.solve(d.x());
    let xhx = d.x().transpose() * &hinv_x;
    let xhy = d.x().transpose() * chol.solve(&y);
    let tau = xhx.cholesky().ok_or(Error::SingularMatrix)?.solve(&xhy);
    let r = chol.solve(&(&y - d.x() * &tau));
    // u = G Z' H^-1 (y - X tau)
    let mut u = vec![0.0; d.b()];
    for ((f, &off), &g) in d.random().iter().zip(&d.random_offsets()).zip(&v.gamma) {
        for o in 0..d.n() {
            u[off + f.index[o]] += g * r[o];
        }
    }
    Ok((tau.as_slice().to_vec(), u))
}

/// `tr(C^-1 B)` from the selected inverse, for `B` on the selected pattern.
pub fn trace_product(z: &SelectedInverse, b: &SparseSymmetric) -> Result<f64> {
    if b.n() != z.n() {
        return Err(Error::SizeMismatch {
            expected: z.n(),
            got: b.n(),
        });
    }
    let mut diag = 0.0;
    let mut off = 0.0;
    for (i, j, v) in b.iter() {
        let zij = z.get_entry(i, j)?.ok_or(Error::PatternNotCovered { row: i, col: j })?;
        if i == j {
            diag += zij * v;
        } else {
            off += zij * v;
        }
    }
    Ok(diag + 2.0 * off)
}

/// `d log det C / d kappa` for every ratio, gammas then phis.
pub fn logdet_gradient(m: &MmeSystem, z: &SelectedInverse) -> Result<Vec<f64>> {
    m.templates.iter().map(|t| trace_product(z, t)).collect()
}

/// `sigma2 * diag(C^-1)`: variances of the fixed estimates and of the
/// random-effect prediction errors.
pub fn pev_diagonal(z: &SelectedInverse, sigma2: f64) -> Vec<f64> {
    z.diagonal().into_iter().map(|v| sigma2 * v).collect()
}

/// Everything computed at one parameter point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub system: MmeSystem,
    pub factor: LdlFactor,
    pub inverse: SelectedInverse,
    pub terms: LoglikTerms,
    pub gradient: Vec<f64>,
    pub pev: Vec<f64>,
    pub times: PhaseTimes,
}

/// Assembles, factorizes and inverts, then evaluates the likelihood terms,
/// the log-determinant gradient and the prediction error variances.
pub fn evaluate(
    d: &MixedModelDataset,
    v: &VarianceParams,
    ordering: &Ordering,
    opts: &LdlOptions,
) -> Result<Evaluation> {
    let system = assemble_mme(d, v)?;
    let (factor, inverse, times) = factorize_and_invert(&system.c, ordering, opts)?;
    let terms = terms_from_factor(&system, &factor, v.sigma2)?;
    let gradient = logdet_gradient(&system, &inverse)?;
    let pev = pev_diagonal(&inverse, v.sigma2);
    Ok(Evaluation {
        system,
        factor,
        inverse,
        terms,
        gradient,
        pev,
        times,
    })
}

/// `log det C` at `v`, factorized from scratch.
pub fn logdet_c(d: &MixedModelDataset, v: &VarianceParams) -> Result<f64> {
    let m = assemble_mme(d, v)?;
    let (f, _) = crate::pipeline::factorize(&m.c, &Ordering::Amd, &LdlOptions::default())?;
    Ok(f.log_det())
}

/// Central difference of `log det C` in ratio `k` with step `rel * kappa_k`.
pub fn logdet_fd(d: &MixedModelDataset, v: &VarianceParams, k: usize, rel: f64) -> Result<f64> {
    let x = v.ratio(k);
    let h = rel * x;
    let up = logdet_c(d, &v.with_ratio(k, x + h)?)?;
    let down = logdet_c(d, &v.with_ratio(k, x - h)?)?;
    Ok((up - down) / (2.0 * h))
}
