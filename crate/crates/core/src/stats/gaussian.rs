//! Gaussian tests computed from per-block sufficient statistics.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{two_sided_normal_p, CiTest, InvarianceTest, TestOutcome};
use crate::graph::NodeSet;
use crate::linalg::{cholesky, cholesky_solve, spd_inverse, Matrix};
use crate::semsim::MultiDataset;
use crate::{Error, Result, Scalar};

fn pivot_tol<T: Scalar>() -> T {
    T::epsilon() * T::of(1e3)
}

/// Row count, column means and centred scatter matrix of a sample.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMoments<T> {
    pub n: usize,
    pub mean: Vec<T>,
    pub scatter: Matrix<T>,
}

impl<T: Scalar> BlockMoments<T> {
    pub fn from_data(x: &Matrix<T>) -> Self {
        let (n, p) = (x.rows(), x.cols());
        let mut mean = vec![T::zero(); p];
        for r in 0..n {
            for (m, v) in mean.iter_mut().zip(x.row(r)) {
                *m = *m + *v;
            }
        }
        let nn = T::of(n.max(1) as f64);
        mean.iter_mut().for_each(|m| *m = *m / nn);
        let mut scatter = Matrix::zeros(p, p);
        let mut d = vec![T::zero(); p];
        for r in 0..n {
            for ((dc, v), m) in d.iter_mut().zip(x.row(r)).zip(&mean) {
                *dc = *v - *m;
            }
            for a in 0..p {
                for b in a..p {
                    scatter[(a, b)] = scatter[(a, b)] + d[a] * d[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                scatter[(a, b)] = scatter[(b, a)];
            }
        }
        BlockMoments { n, mean, scatter }
    }

    /// Moments of the columns `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Self {
        BlockMoments {
            n: self.n,
            mean: idx.iter().map(|&c| self.mean[c]).collect(),
            scatter: self.scatter.select(idx),
        }
    }

    /// Moments of the union of both samples.
    pub fn combine(&self, other: &Self) -> Self {
        let n = self.n + other.n;
        let (na, nb, nt) = (T::of(self.n as f64), T::of(other.n as f64), T::of(n as f64));
        let delta: Vec<T> = other.mean.iter().zip(&self.mean).map(|(b, a)| *b - *a).collect();
        let mean = self
            .mean
            .iter()
            .zip(&delta)
            .map(|(a, d)| *a + *d * nb / nt)
            .collect();
        let k = self.mean.len();
        let mut scatter = Matrix::zeros(k, k);
        let w = na * nb / nt;
        for r in 0..k {
            for c in 0..k {
                scatter[(r, c)] = self.scatter[(r, c)] + other.scatter[(r, c)] + w * delta[r] * delta[c];
            }
        }
        BlockMoments { n, mean, scatter }
    }
}

/// Fisher-z test on moments whose first two columns are the tested pair
/// and the remaining `n_cond` columns the conditioning set.
fn fisher_from_moments<T: Scalar>(m: &BlockMoments<T>, n_cond: usize) -> Result<TestOutcome> {
    if m.n <= n_cond + 3 {
        return Err(Error::NotEnoughSamples {
            needed: n_cond + 3,
            got: m.n,
        });
    }
    let Some(inv) = spd_inverse(&m.scatter, pivot_tol()) else {
        log::warn!("singular covariance in Fisher-z test; treating as dependent");
        return Ok(TestOutcome::degenerate());
    };
    let (a, b, c) = (inv[(0, 0)].as_f64(), inv[(1, 1)].as_f64(), inv[(0, 1)].as_f64());
    let r = (-c / (a * b).sqrt()).clamp(-1.0 + 1e-15, 1.0 - 1e-15);
    let z = r.atanh() * ((m.n - n_cond - 3) as f64).sqrt();
    Ok(TestOutcome::new(z, two_sided_normal_p(z)))
}

fn check_query(p: usize, i: usize, j: Option<usize>, cond: &NodeSet) -> Result<()> {
    if i >= p || j.is_some_and(|j| j >= p) || cond.bound() > p {
        return Err(Error::invalid(format!("query node out of range 1..={p}")));
    }
    if j == Some(i) {
        return Err(Error::invalid("tested variables must differ"));
    }
    if cond.contains(i) || j.is_some_and(|j| cond.contains(j)) {
        return Err(Error::invalid("conditioning set overlaps the tested variables"));
    }
    Ok(())
}

fn query_columns(i: usize, j: Option<usize>, cond: &NodeSet) -> Vec<usize> {
    let mut idx = vec![i];
    idx.extend(j);
    idx.extend(cond.iter());
    idx
}

/// Fisher-z partial-correlation test of `X_i ⫫ X_j | X_cond` on one sample.
/// Independence at level `alpha` is `outcome.accepts_null(alpha)`.
pub fn fisher_z_ci<T: Scalar>(data: &Matrix<T>, i: usize, j: usize, cond: &NodeSet) -> Result<TestOutcome> {
    check_query(data.cols(), i, Some(j), cond)?;
    let idx = query_columns(i, Some(j), cond);
    let m = BlockMoments::from_data(data).select(&idx);
    fisher_from_moments(&m, cond.len())
}

/// Residual sum of squares of column 0 regressed on the others (with
/// intercept). `None` when the design is singular or the fit is exact.
fn residual_ss<T: Scalar>(m: &BlockMoments<T>) -> Option<f64> {
    let k = m.mean.len();
    let syy = m.scatter[(0, 0)];
    if !(syy > T::zero()) {
        return None;
    }
    let rss = if k == 1 {
        syy
    } else {
        let rest: Vec<usize> = (1..k).collect();
        let sxx = m.scatter.select(&rest);
        let sxy: Vec<T> = rest.iter().map(|&c| m.scatter[(c, 0)]).collect();
        let l = cholesky(&sxx, pivot_tol())?;
        let beta = cholesky_solve(&l, &sxy);
        syy - beta.iter().zip(&sxy).fold(T::zero(), |s, (b, x)| s + *b * *x)
    };
    let rss = rss.as_f64();
    (rss > syy.as_f64() * 1e-12).then_some(rss)
}

/// Likelihood-ratio test of one linear-Gaussian regression of column 0 on
/// the rest for both samples against one regression per sample.
fn invariance_from_moments<T: Scalar>(a: &BlockMoments<T>, b: &BlockMoments<T>) -> Result<TestOutcome> {
    let k = a.mean.len();
    let need = k + 1;
    for m in [a, b] {
        if m.n <= need {
            return Err(Error::NotEnoughSamples { needed: need, got: m.n });
        }
    }
    let pooled = a.combine(b);
    let (Some(ra), Some(rb), Some(rp)) = (residual_ss(a), residual_ss(b), residual_ss(&pooled)) else {
        log::warn!("degenerate regression in invariance test; treating as varying");
        return Ok(TestOutcome::degenerate());
    };
    let (na, nb, np) = (a.n as f64, b.n as f64, pooled.n as f64);
    let mut lr = np * (rp / np).ln() - na * (ra / na).ln() - nb * (rb / nb).ln();
    if lr < 1e-9 * np {
        lr = 0.0;
    }
    let df = (k + 1) as f64;
    let p = ChiSquared::new(df).expect("positive df").sf(lr);
    Ok(TestOutcome::new(lr, p))
}

/// Parametric invariance test of `X_i | X_cond` between two samples.
/// Invariance at level `alpha` is `outcome.accepts_null(alpha)`.
pub fn gaussian_invariance<T: Scalar>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    i: usize,
    cond: &NodeSet,
) -> Result<TestOutcome> {
    if a.cols() != b.cols() {
        return Err(Error::invalid("blocks have different column counts"));
    }
    check_query(a.cols(), i, None, cond)?;
    let idx = query_columns(i, None, cond);
    invariance_from_moments(
        &BlockMoments::from_data(a).select(&idx),
        &BlockMoments::from_data(b).select(&idx),
    )
}

fn block_moments<T: Scalar>(data: &MultiDataset<T>) -> Result<(usize, Vec<BlockMoments<T>>)> {
    let obs = data
        .fam()
        .observational_index()
        .ok_or_else(|| Error::PreconditionViolation("dataset has no observational block".into()))?;
    Ok((obs, data.blocks().iter().map(BlockMoments::from_data).collect()))
}

/// Fisher-z decider over a dataset, pooling blocks by combined moments.
#[derive(Clone, Debug)]
pub struct GaussianCi<T> {
    p: usize,
    obs: usize,
    moments: Vec<BlockMoments<T>>,
    alpha: f64,
}

impl<T: Scalar> GaussianCi<T> {
    pub fn new(data: &MultiDataset<T>, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let (obs, moments) = block_moments(data)?;
        Ok(GaussianCi {
            p: data.p(),
            obs,
            moments,
            alpha,
        })
    }
}

impl<T: Scalar> CiTest for GaussianCi<T> {
    fn ci(&self, i: usize, j: usize, cond: &NodeSet, pool: &[usize]) -> Result<TestOutcome> {
        check_query(self.p, i, Some(j), cond)?;
        let idx = query_columns(i, Some(j), cond);
        let mut m = self.moments[self.obs].select(&idx);
        for &b in pool {
            let block = self
                .moments
                .get(b)
                .ok_or_else(|| Error::invalid(format!("block {b} out of range")))?;
            if b != self.obs {
                m = m.combine(&block.select(&idx));
            }
        }
        fisher_from_moments(&m, cond.len())
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn name(&self) -> &'static str {
        "fisher_z"
    }
}

/// Likelihood-ratio invariance decider against the observational block.
#[derive(Clone, Debug)]
pub struct GaussianInvariance<T> {
    p: usize,
    obs: usize,
    moments: Vec<BlockMoments<T>>,
    alpha: f64,
}

impl<T: Scalar> GaussianInvariance<T> {
    pub fn new(data: &MultiDataset<T>, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let (obs, moments) = block_moments(data)?;
        Ok(GaussianInvariance {
            p: data.p(),
            obs,
            moments,
            alpha,
        })
    }
}

impl<T: Scalar> InvarianceTest for GaussianInvariance<T> {
    fn invariance(&self, i: usize, cond: &NodeSet, block: usize) -> Result<TestOutcome> {
        check_query(self.p, i, None, cond)?;
        if block >= self.moments.len() || block == self.obs {
            return Err(Error::invalid(format!("block {block} is not an interventional block")));
        }
        let idx = query_columns(i, None, cond);
        invariance_from_moments(&self.moments[self.obs].select(&idx), &self.moments[block].select(&idx))
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn name(&self) -> &'static str {
        "gaussian"
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("significance level must be in (0, 1), got {alpha}")))
    }
}
