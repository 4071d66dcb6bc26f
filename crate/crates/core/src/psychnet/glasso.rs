use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dataio::ResponseDataset;
use crate::{Error, Result};

/// Item responses as participants x variables, NaN for missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemData {
    pub variables: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ItemData {
    pub fn new(variables: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::Argument("no variables".into()));
        }
        if rows.iter().any(|r| r.len() != variables.len()) {
            return Err(Error::Argument("row width does not match the variable count".into()));
        }
        Ok(Self { variables, rows })
    }

    /// Numeric view of `items` in one channel of a response dataset.
    pub fn from_dataset(ds: &ResponseDataset, channel: &str, items: &[String]) -> Result<Self> {
        let idx: Vec<usize> = items
            .iter()
            .map(|id| ds.item_index(id).ok_or_else(|| Error::Argument(format!("unknown item `{id}`"))))
            .collect::<Result<_>>()?;
        Self::new(items.to_vec(), ds.numeric_matrix(channel, &idx)?)
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    /// Rows without missing cells.
    pub fn complete_rows(&self) -> Vec<&[f64]> {
        self.rows.iter().filter(|r| r.iter().all(|v| v.is_finite())).map(Vec::as_slice).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            variables: self.variables.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    pub fn select_vars(&self, keep: &[usize]) -> Self {
        Self {
            variables: keep.iter().map(|&j| self.variables[j].clone()).collect(),
            rows: self.rows.iter().map(|r| keep.iter().map(|&j| r[j]).collect()).collect(),
        }
    }
}

/// Pearson correlation matrix over complete rows.
pub fn correlation_matrix(data: &ItemData) -> Result<(DMatrix<f64>, usize)> {
    let rows = data.complete_rows();
    let n = rows.len();
    let p = data.n_vars();
    if n < 3 {
        return Err(Error::InsufficientData(format!("{n} complete rows")));
    }
    let mut means = vec![0.0; p];
    for r in &rows {
        for j in 0..p {
            means[j] += r[j];
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut cov = DMatrix::<f64>::zeros(p, p);
    for r in &rows {
        for i in 0..p {
            let di = r[i] - means[i];
            for j in i..p {
                cov[(i, j)] += di * (r[j] - means[j]);
            }
        }
    }
    let sd: Vec<f64> = (0..p).map(|i| cov[(i, i)].sqrt()).collect();
    if let Some(j) = sd.iter().position(|s| *s <= 0.0) {
        return Err(Error::Conditioning(format!("variable `{}` has zero variance", data.variables[j])));
    }
    let mut s = DMatrix::<f64>::identity(p, p);
    for i in 0..p {
        for j in i + 1..p {
            let r = (cov[(i, j)] / (sd[i] * sd[j])).clamp(-1.0, 1.0);
            s[(i, j)] = r;
            s[(j, i)] = r;
        }
    }
    Ok((s, n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlassoOptions {
    /// Convergence when the largest change in the covariance estimate over a
    /// sweep falls below this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for GlassoOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_sweeps: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianGraphModel {
    pub variables: Vec<String>,
    /// Symmetric, zero diagonal.
    pub partial_correlations: Vec<Vec<f64>>,
    pub lambda: f64,
    pub ebic: Option<f64>,
    pub n_obs: Option<usize>,
    pub sweeps: usize,
}

impl GaussianGraphModel {
    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn n_edges(&self) -> usize {
        let p = self.n_vars();
        (0..p)
            .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
            .filter(|&(i, j)| self.partial_correlations[i][j] != 0.0)
            .count()
    }

    pub fn pcor(&self, i: usize, j: usize) -> f64 {
        self.partial_correlations[i][j]
    }
}

/// Warm-start state carried along a lambda path.
#[derive(Debug, Clone)]
pub(crate) struct GlassoState {
    w: Vec<f64>,
    beta: Vec<f64>,
}

pub(crate) struct GlassoFit {
    pub precision: DMatrix<f64>,
    pub sweeps: usize,
    pub state: GlassoState,
}

fn check_input(s: &DMatrix<f64>) -> Result<()> {
    let p = s.nrows();
    if p == 0 || s.ncols() != p {
        return Err(Error::Argument("covariance matrix must be square and non-empty".into()));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::Conditioning("covariance matrix has non-finite entries".into()));
    }
    for i in 0..p {
        for j in i + 1..p {
            if (s[(i, j)] - s[(j, i)]).abs() > 1e-10 {
                return Err(Error::Conditioning("covariance matrix is not symmetric".into()));
            }
        }
    }
    let eig = SymmetricEigen::new(s.clone()).eigenvalues;
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = s.diagonal().iter().copied().fold(1.0, f64::max);
    if min <= 1e-8 * scale {
        return Err(Error::Conditioning(format!(
            "covariance matrix is not positive definite (smallest eigenvalue {min:.3e})"
        )));
    }
    Ok(())
}

fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Block coordinate descent for the graphical lasso with an unpenalized
/// diagonal. Returns the precision matrix.
pub(crate) fn glasso_fit(s: &DMatrix<f64>, lambda: f64, opts: &GlassoOptions, warm: Option<&GlassoState>) -> Result<GlassoFit> {
    check_input(s)?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Argument(format!("lambda must be non-negative, got {lambda}")));
    }
    let p = s.nrows();
    let sv = |i: usize, j: usize| s[(i, j)];
    let (mut w, mut beta) = match warm {
        Some(st) if st.w.len() == p * p => (st.w.clone(), st.beta.clone()),
        _ => {
            let mut w = vec![0.0; p * p];
            for i in 0..p {
                for j in 0..p {
                    w[i * p + j] = sv(i, j);
                }
            }
            (w, vec![0.0; p * p])
        }
    };
    let inner_tol = (opts.tol * 1e-3).max(1e-12);
    let mut sweeps = 0;
    let mut converged = p == 1;
    let mut last_change = 0.0;
    while !converged {
        if sweeps >= opts.max_sweeps {
            return Err(Error::NonConvergence {
                sweeps,
                residual: last_change,
            });
        }
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            // lasso: min 1/2 b'W11 b - b's12 + lambda |b|_1, b stored in column j of beta
            for _ in 0..10_000 {
                let mut delta: f64 = 0.0;
                for k in (0..p).filter(|&k| k != j) {
                    let mut r = sv(k, j);
                    for l in (0..p).filter(|&l| l != j && l != k) {
                        r -= w[k * p + l] * beta[l * p + j];
                    }
                    let new = soft(r, lambda) / w[k * p + k];
                    delta = delta.max((new - beta[k * p + j]).abs());
                    beta[k * p + j] = new;
                }
                if delta < inner_tol {
                    break;
                }
            }
            for k in (0..p).filter(|&k| k != j) {
                let w12: f64 = (0..p).filter(|&l| l != j).map(|l| w[k * p + l] * beta[l * p + j]).sum();
                max_change = max_change.max((w12 - w[k * p + j]).abs());
                w[k * p + j] = w12;
                w[j * p + k] = w12;
            }
        }
        last_change = max_change;
        converged = max_change < opts.tol;
    }
    let mut theta = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        let dot: f64 = (0..p).filter(|&k| k != j).map(|k| w[k * p + j] * beta[k * p + j]).sum();
        let tjj = 1.0 / (w[j * p + j] - dot);
        theta[(j, j)] = tjj;
        for k in (0..p).filter(|&k| k != j) {
            theta[(k, j)] = -beta[k * p + j] * tjj;
        }
    }
    let theta = (&theta + theta.transpose()) * 0.5;
    Ok(GlassoFit {
        precision: theta,
        sweeps,
        state: GlassoState { w, beta },
    })
}

pub(crate) fn partial_correlations(theta: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let p = theta.nrows();
    (0..p)
        .map(|i| {
            (0..p)
                .map(|j| {
                    if i == j || theta[(i, j)] == 0.0 {
                        0.0
                    } else {
                        (-theta[(i, j)] / (theta[(i, i)] * theta[(j, j)]).sqrt()).clamp(-1.0, 1.0)
                    }
                })
                .collect()
        })
        .collect()
}

/// Graphical lasso on a covariance or correlation matrix.
pub fn glasso(s: &DMatrix<f64>, variables: &[String], lambda: f64, opts: &GlassoOptions) -> Result<GaussianGraphModel> {
    if variables.len() != s.nrows() {
        return Err(Error::Argument("variable names do not match the matrix".into()));
    }
    let fit = glasso_fit(s, lambda, opts, None)?;
    Ok(GaussianGraphModel {
        variables: variables.to_vec(),
        partial_correlations: partial_correlations(&fit.precision),
        lambda,
        ebic: None,
        n_obs: None,
        sweeps: fit.sweeps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EbicOptions {
    pub n_lambda: usize,
    /// Smallest lambda as a fraction of the largest.
    pub lambda_min_ratio: f64,
    pub gamma: f64,
    pub glasso: GlassoOptions,
}

impl Default for EbicOptions {
    fn default() -> Self {
        Self {
            n_lambda: 100,
            lambda_min_ratio: 0.01,
            gamma: 0.5,
            glasso: GlassoOptions::default(),
        }
    }
}

/// Log-spaced path from `max |S_ij|` down to `ratio * max`, decreasing.
pub fn lambda_path(s: &DMatrix<f64>, n: usize, ratio: f64) -> Vec<f64> {
    let p = s.nrows();
    let mut lmax: f64 = 0.0;
    for i in 0..p {
        for j in i + 1..p {
            lmax = lmax.max(s[(i, j)].abs());
        }
    }
    if n <= 1 || lmax == 0.0 {
        return vec![lmax];
    }
    let (hi, lo) = (lmax.ln(), (lmax * ratio).ln());
    (0..n)
        .map(|k| match k {
            0 => lmax,
            k if k == n - 1 => lmax * ratio,
            k => (hi - (hi - lo) * k as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

fn log_likelihood(s: &DMatrix<f64>, theta: &DMatrix<f64>, n: usize) -> Result<f64> {
    let chol = theta
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Conditioning("estimated precision matrix is not positive definite".into()))?;
    let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let trace = (s * theta).trace();
    Ok(n as f64 / 2.0 * (logdet - trace))
}

/// Fit the glasso along `lambdas` (or the default path) on the correlation
/// matrix of `data` and keep the fit with the smallest EBIC; ties go to the
/// larger lambda.
pub fn ebic_select(data: &ItemData, lambdas: Option<&[f64]>, opts: &EbicOptions) -> Result<GaussianGraphModel> {
    let (s, n) = correlation_matrix(data)?;
    let p = data.n_vars();
    if n <= p {
        log::warn!("ebic_select: {n} complete rows for {p} variables");
    }
    let mut path = match lambdas {
        Some(l) if !l.is_empty() => l.to_vec(),
        Some(_) => return Err(Error::Argument("empty lambda path".into())),
        None => lambda_path(&s, opts.n_lambda, opts.lambda_min_ratio),
    };
    path.sort_by(|a, b| b.total_cmp(a));
    let mut best: Option<GaussianGraphModel> = None;
    let mut warm: Option<GlassoState> = None;
    for &lambda in &path {
        let fit = glasso_fit(&s, lambda, &opts.glasso, warm.as_ref())?;
        let pcor = partial_correlations(&fit.precision);
        let edges = (0..p).flat_map(|i| (i + 1..p).map(move |j| (i, j))).filter(|&(i, j)| pcor[i][j] != 0.0).count() as f64;
        let ll = log_likelihood(&s, &fit.precision, n)?;
        let ebic = -2.0 * ll + edges * (n as f64).ln() + 4.0 * edges * opts.gamma * (p as f64).ln();
        warm = Some(fit.state);
        if best.as_ref().is_none_or(|b| ebic < b.ebic.unwrap()) {
            best = Some(GaussianGraphModel {
                variables: data.variables.clone(),
                partial_correlations: pcor,
                lambda,
                ebic: Some(ebic),
                n_obs: Some(n),
                sweeps: fit.sweeps,
            });
        }
    }
    Ok(best.expect("non-empty path"))
}
