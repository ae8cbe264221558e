//! Left-preconditioned GMRES with a Givens-rotated Hessenberg least squares
//! problem.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::operator::LinearOperator;

use super::Preconditioner;

/// Relative loss of orthogonality that triggers a second Gram-Schmidt pass.
const REORTH: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GmresOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub restart: Option<usize>,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 1000, restart: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Preconditioned relative residual estimate, starting at 1 for iteration 0.
    pub history: Vec<f64>,
    pub converged: bool,
    pub seconds: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `P^{-1}(f - A x)`.
fn preconditioned_residual(
    a: &dyn LinearOperator,
    p: &dyn Preconditioner,
    f: &[f64],
    x: &[f64],
) -> Result<Vec<f64>> {
    let mut r = a.apply(x)?;
    for (ri, fi) in r.iter_mut().zip(f) {
        *ri = fi - *ri;
    }
    p.apply(&r)
}

pub fn gmres(
    a: &dyn LinearOperator,
    p: &dyn Preconditioner,
    f: &[f64],
    opts: &GmresOptions,
) -> Result<GmresOutcome> {
    let n = a.dim();
    if f.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: f.len() });
    }
    if !(opts.tol > 0.0 && opts.tol < 1.0) || opts.max_iter == 0 {
        return Err(Error::Config(format!("invalid GMRES tolerance {} or iteration cap {}", opts.tol, opts.max_iter)));
    }
    let start = Instant::now();
    let mut x = vec![0.0; n];
    let pf = p.apply(f)?;
    let beta0 = norm(&pf);
    let mut history = vec![1.0];
    if beta0 == 0.0 {
        return Ok(GmresOutcome { x, iterations: 0, history, converged: true, seconds: 0.0 });
    }
    let window = opts.restart.unwrap_or(opts.max_iter).clamp(1, opts.max_iter);
    let mut iterations = 0;
    let mut converged = false;
    let mut r = pf;
    while iterations < opts.max_iter && !converged {
        let beta = norm(&r);
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h: Vec<Vec<f64>> = Vec::new();
        let (mut cs, mut sn): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
        let mut g = vec![beta];
        let steps = window.min(opts.max_iter - iterations);
        for j in 0..steps {
            let mut w = p.apply(&a.apply(&basis[j])?)?;
            let mut col = vec![0.0; j + 2];
            for (i, v) in basis.iter().enumerate() {
                let c = dot(&w, v);
                col[i] = c;
                axpy(-c, v, &mut w);
            }
            let wn = norm(&w);
            let loss = basis.iter().map(|v| dot(&w, v).abs()).fold(0.0, f64::max);
            if wn > 0.0 && loss > REORTH * wn {
                for (i, v) in basis.iter().enumerate() {
                    let c = dot(&w, v);
                    col[i] += c;
                    axpy(-c, v, &mut w);
                }
            }
            let hn = norm(&w);
            col[j + 1] = hn;
            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let rho = col[j].hypot(col[j + 1]);
            let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (col[j] / rho, col[j + 1] / rho) };
            col[j] = rho;
            col[j + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            let gj = g[j];
            g[j] = c * gj;
            g.push(-s * gj);
            h.push(col);
            iterations += 1;
            let res = g[j + 1].abs() / beta0;
            history.push(res);
            let happy = hn <= f64::EPSILON * rho.max(f64::MIN_POSITIVE);
            if res <= opts.tol || happy {
                converged = true;
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        let k = h.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for (m, ym) in y.iter().enumerate().skip(i + 1) {
                s -= h[m][i] * ym;
            }
            y[i] = s / h[i][i];
        }
        for (yi, v) in y.iter().zip(&basis) {
            axpy(*yi, v, &mut x);
        }
        if !converged && iterations < opts.max_iter {
            r = preconditioned_residual(a, p, f, &x)?;
        }
    }
    Ok(GmresOutcome { x, iterations, history, converged, seconds: start.elapsed().as_secs_f64() })
}

/// `(||P^{-1} f - P^{-1} A x|| / ||P^{-1} f||, ||f - A x|| / ||f||)`.
pub fn residual_report(
    a: &dyn LinearOperator,
    p: &dyn Preconditioner,
    f: &[f64],
    x: &[f64],
) -> Result<(f64, f64)> {
    let ax = a.apply(x)?;
    let r: Vec<f64> = f.iter().zip(&ax).map(|(fi, ai)| fi - ai).collect();
    let fnorm = norm(f);
    let actual = if fnorm == 0.0 { norm(&r) } else { norm(&r) / fnorm };
    let pf = p.apply(f)?;
    let pr = p.apply(&r)?;
    let pfn = norm(&pf);
    let pre = if pfn == 0.0 { norm(&pr) } else { norm(&pr) / pfn };
    Ok((pre, actual))
}
