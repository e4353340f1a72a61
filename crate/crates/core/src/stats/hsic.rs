//! HSIC independence test between a real variable and a block label, with
//! the gamma approximation of the null distribution.

use statrs::distribution::{ContinuousCDF, Gamma};

use super::gaussian::check_alpha;
use super::{InvarianceTest, TestOutcome};
use crate::graph::NodeSet;
use crate::linalg::{cholesky, cholesky_solve, Matrix};
use crate::semsim::MultiDataset;
use crate::{Error, Result, Scalar};

/// Rows used per block by [`HsicInvariance`]; the statistic is quadratic
/// in the sample size.
pub const DEFAULT_ROW_CAP: usize = 1000;

const BANDWIDTH_ROWS: usize = 100;
const SMALL_BLOCK: usize = 20;

/// Gaussian-kernel bandwidth `σ²`: half the median of the positive squared
/// distances among the first 100 values.
fn bandwidth(x: &[f64]) -> Option<f64> {
    let head = &x[..x.len().min(BANDWIDTH_ROWS)];
    let mut d: Vec<f64> = Vec::with_capacity(head.len() * head.len() / 2);
    for a in 0..head.len() {
        for b in a + 1..head.len() {
            let s = (head[a] - head[b]).powi(2);
            if s > 0.0 {
                d.push(s);
            }
        }
    }
    if d.is_empty() {
        return None;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let median = if m % 2 == 1 { d[m / 2] } else { 0.5 * (d[m / 2 - 1] + d[m / 2]) };
    Some(0.5 * median)
}

/// HSIC between `x` (Gaussian kernel) and `labels` (delta kernel).
/// Returns the statistic `tr(K̃ L̃)/n` and the gamma-approximation p-value.
pub fn hsic_gamma(x: &[f64], labels: &[usize]) -> Result<TestOutcome> {
    let n = x.len();
    if labels.len() != n {
        return Err(Error::invalid("label count differs from sample size"));
    }
    if n < 6 {
        return Err(Error::NotEnoughSamples { needed: 5, got: n });
    }
    let Some(sigma2) = bandwidth(x) else {
        log::warn!("constant sample in HSIC test; treating as varying");
        return Ok(TestOutcome::degenerate());
    };
    let nf = n as f64;
    let n_labels = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0f64; n_labels];
    labels.iter().for_each(|&l| sizes[l] += 1.0);
    let sum_sq_sizes: f64 = sizes.iter().map(|s| s * s).sum();

    // Upper triangle of K, row sums and total.
    let gamma = -0.5 / sigma2;
    let mut k = vec![0f64; n * (n - 1) / 2];
    let mut row = vec![1f64; n];
    let mut pos = 0;
    for a in 0..n {
        for b in a + 1..n {
            let v = (gamma * (x[a] - x[b]).powi(2)).exp();
            k[pos] = v;
            row[a] += v;
            row[b] += v;
            pos += 1;
        }
    }
    let total: f64 = row.iter().sum();
    let kc_const = total / (nf * nf);
    let lc_const = sum_sq_sizes / (nf * nf);
    let kc = |kab: f64, a: usize, b: usize| kab - row[a] / nf - row[b] / nf + kc_const;
    let lc = |a: usize, b: usize| {
        let d = if labels[a] == labels[b] { 1.0 } else { 0.0 };
        d - sizes[labels[a]] / nf - sizes[labels[b]] / nf + lc_const
    };

    let mut trace = 0.0;
    let mut off_sq = 0.0;
    for a in 0..n {
        trace += kc(1.0, a, a) * lc(a, a);
    }
    pos = 0;
    for a in 0..n {
        for b in a + 1..n {
            let v = kc(k[pos], a, b) * lc(a, b);
            trace += 2.0 * v;
            off_sq += 2.0 * (v / 6.0).powi(2);
            pos += 1;
        }
    }
    let stat = trace / nf;
    let var = off_sq / (nf * (nf - 1.0)) * 72.0 * (nf - 4.0) * (nf - 5.0)
        / (nf * (nf - 1.0) * (nf - 2.0) * (nf - 3.0));
    let mu_x = (total - nf) / (nf * (nf - 1.0));
    let mu_y = (sum_sq_sizes - nf) / (nf * (nf - 1.0));
    let mean = (1.0 + mu_x * mu_y - mu_x - mu_y) / nf;
    if !(var > 0.0 && mean > 0.0) {
        log::warn!("degenerate HSIC null moments; treating as varying");
        return Ok(TestOutcome::degenerate());
    }
    let shape = mean * mean / var;
    let scale = var * nf / mean;
    let p = Gamma::new(shape, 1.0 / scale).expect("positive parameters").sf(stat);
    Ok(TestOutcome::new(stat, p))
}

/// Residuals of column `i` after a pooled least-squares fit on `cond`
/// (with intercept).
fn residualize<T: Scalar>(x: &Matrix<T>, i: usize, cond: &NodeSet) -> Result<Option<Vec<f64>>> {
    let n = x.rows();
    let cols: Vec<usize> = cond.iter().collect();
    let y: Vec<f64> = (0..n).map(|r| x[(r, i)].as_f64()).collect();
    if cols.is_empty() {
        return Ok(Some(y));
    }
    let k = cols.len() + 1;
    if n <= k {
        return Err(Error::NotEnoughSamples { needed: k, got: n });
    }
    let mut xtx = Matrix::<f64>::zeros(k, k);
    let mut xty = vec![0f64; k];
    let mut z = vec![1f64; k];
    for r in 0..n {
        for (zc, &c) in z[1..].iter_mut().zip(&cols) {
            *zc = x[(r, c)].as_f64();
        }
        for a in 0..k {
            xty[a] += z[a] * y[r];
            for b in 0..k {
                xtx[(a, b)] += z[a] * z[b];
            }
        }
    }
    let Some(l) = cholesky(&xtx, 1e-12) else {
        return Ok(None);
    };
    let beta = cholesky_solve(&l, &xty);
    Ok(Some(
        (0..n)
            .map(|r| {
                let fit = beta[0] + cols.iter().zip(&beta[1..]).map(|(&c, b)| b * x[(r, c)].as_f64()).sum::<f64>();
                y[r] - fit
            })
            .collect(),
    ))
}

/// HSIC test of `X_i` (or its residual on `X_cond`) against the block
/// label of the stacked samples `a` and `b`.
pub fn hsic_index_invariance<T: Scalar>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    i: usize,
    cond: &NodeSet,
) -> Result<TestOutcome> {
    if a.cols() != b.cols() {
        return Err(Error::invalid("blocks have different column counts"));
    }
    if i >= a.cols() || cond.bound() > a.cols() || cond.contains(i) {
        return Err(Error::invalid("invalid invariance query"));
    }
    if a.rows() == 0 || b.rows() == 0 {
        return Err(Error::NotEnoughSamples { needed: 0, got: 0 });
    }
    if a.rows() < SMALL_BLOCK || b.rows() < SMALL_BLOCK {
        log::warn!(
            "HSIC invariance test on small blocks ({} and {} rows)",
            a.rows(),
            b.rows()
        );
    }
    let stacked = a.vstack(b);
    let Some(res) = residualize(&stacked, i, cond)? else {
        log::warn!("singular conditioning design in HSIC test; treating as varying");
        return Ok(TestOutcome::degenerate());
    };
    let labels: Vec<usize> = (0..stacked.rows()).map(|r| usize::from(r >= a.rows())).collect();
    hsic_gamma(&res, &labels)
}

fn head<T: Scalar>(x: &Matrix<T>, rows: usize) -> Matrix<T> {
    let r = x.rows().min(rows);
    Matrix::from_vec(r, x.cols(), x.as_slice()[..r * x.cols()].to_vec())
}

/// HSIC invariance decider; each block is truncated to its first
/// `row_cap` rows.
#[derive(Clone, Debug)]
pub struct HsicInvariance<T> {
    obs: usize,
    blocks: Vec<Matrix<T>>,
    alpha: f64,
}

impl<T: Scalar> HsicInvariance<T> {
    pub fn new(data: &MultiDataset<T>, alpha: f64) -> Result<Self> {
        Self::with_row_cap(data, alpha, DEFAULT_ROW_CAP)
    }

    pub fn with_row_cap(data: &MultiDataset<T>, alpha: f64, row_cap: usize) -> Result<Self> {
        check_alpha(alpha)?;
        if row_cap < 6 {
            return Err(Error::invalid("row cap must be at least 6"));
        }
        let obs = data
            .fam()
            .observational_index()
            .ok_or_else(|| Error::PreconditionViolation("dataset has no observational block".into()))?;
        Ok(HsicInvariance {
            obs,
            blocks: data.blocks().iter().map(|b| head(b, row_cap)).collect(),
            alpha,
        })
    }
}

impl<T: Scalar> InvarianceTest for HsicInvariance<T> {
    fn invariance(&self, i: usize, cond: &NodeSet, block: usize) -> Result<TestOutcome> {
        if block >= self.blocks.len() || block == self.obs {
            return Err(Error::invalid(format!("block {block} is not an interventional block")));
        }
        hsic_index_invariance(&self.blocks[self.obs], &self.blocks[block], i, cond)
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn name(&self) -> &'static str {
        "hsic"
    }
}
