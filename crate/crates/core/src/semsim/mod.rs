//! Linear Gaussian SEMs, their interventional variants and a seeded sampler.
//!
//! Every random draw goes through `ChaCha8Rng::seed_from_u64(seed)`; block
//! `k` of a dataset uses stream `k` of that generator, so blocks can be
//! drawn in any order (or concurrently) with identical results.

mod dataset;
mod model;

pub use dataset::MultiDataset;
pub use model::{apply_intervention, InterventionKind, InterventionSpec, Intervened, ModelJson, SemModel};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::graph::{Dag, NodeSet, Permutation};
use crate::interventions::TargetFamily;
use crate::linalg::Matrix;
use crate::{Error, Result, Scalar};

/// Generator for `(seed, stream)`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Erdős–Rényi DAG: a uniform random order, then each order-respecting pair
/// is joined independently with probability `avg_neighborhood / (p − 1)`.
pub fn sample_random_dag(p: usize, avg_neighborhood: f64, seed: u64) -> Result<Dag> {
    if p < 2 {
        return Err(Error::invalid(format!("random DAGs need p >= 2, got {p}")));
    }
    let max = (p - 1) as f64;
    if !(avg_neighborhood > 0.0 && avg_neighborhood <= max) {
        return Err(Error::invalid(format!(
            "average neighborhood size must be in (0, {max}], got {avg_neighborhood}"
        )));
    }
    let prob = avg_neighborhood / max;
    let mut rng = rng_for(seed, 0);
    let order = Permutation::random(p, &mut rng);
    let mut edges = Vec::new();
    for a in 0..p {
        for b in a + 1..p {
            if rng.random_bool(prob) {
                edges.push((order.order()[a], order.order()[b]));
            }
        }
    }
    Dag::new(p, edges)
}

/// Weights uniform on `[−1, −0.25] ∪ [0.25, 1]` (fair sign, uniform
/// magnitude), drawn per edge in sorted edge order; unit noise variances.
pub fn sample_weights<T: Scalar>(g: &Dag, seed: u64) -> SemModel<T> {
    let mut rng = rng_for(seed, 0);
    let mut w = Matrix::zeros(g.p(), g.p());
    for (i, j) in g.edges() {
        let negative = rng.random_bool(0.5);
        let mag: f64 = rng.random_range(0.25..=1.0);
        w[(i, j)] = T::of(if negative { -mag } else { mag });
    }
    SemModel::from_parts(g.clone(), w, vec![T::one(); g.p()])
}

/// Samples from one (possibly mixture) model.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSample<T> {
    pub data: Matrix<T>,
    /// Per-row success flag of an imperfect intervention; `None` otherwise.
    pub success: Option<Vec<bool>>,
}

fn draw_row<T: Scalar>(m: &SemModel<T>, topo: &[usize], rng: &mut ChaCha8Rng, eps: &mut [T], out: &mut [T]) {
    for (e, v) in eps.iter_mut().zip(m.noise_var()) {
        let z: f64 = rng.sample(StandardNormal);
        *e = T::of(z) * v.sqrt();
    }
    for &j in topo {
        let mut x = eps[j];
        for i in m.dag().parents(j).iter() {
            x = x + m.weight(i, j) * out[i];
        }
        out[j] = x;
    }
}

/// `n` rows from `model` using stream `stream` of `seed`.
pub fn sample_block<T: Scalar>(model: &Intervened<T>, n: usize, seed: u64, stream: u64) -> BlockSample<T> {
    let p = model.p();
    let mut rng = rng_for(seed, stream);
    let mut data = Matrix::zeros(n, p);
    let mut eps = vec![T::zero(); p];
    match model {
        Intervened::Model(m) => {
            let topo = m.dag().topological_order().expect("acyclic");
            for r in 0..n {
                draw_row(m, &topo, &mut rng, &mut eps, data.row_mut(r));
            }
            BlockSample { data, success: None }
        }
        Intervened::Mixture {
            success,
            failure,
            alpha,
        } => {
            let topo = success.dag().topological_order().expect("acyclic");
            let a = alpha.as_f64();
            let mut flags = Vec::with_capacity(n);
            for r in 0..n {
                let ok = rng.random_bool(a);
                flags.push(ok);
                let m = if ok { success } else { failure };
                draw_row(m, &topo, &mut rng, &mut eps, data.row_mut(r));
            }
            BlockSample {
                data,
                success: Some(flags),
            }
        }
    }
}

/// Block 0 is observational; block `k + 1` is drawn under `specs[k]`.
pub fn sample_data<T: Scalar>(
    m: &SemModel<T>,
    specs: &[InterventionSpec],
    n_per_block: usize,
    seed: u64,
) -> Result<MultiDataset<T>> {
    if n_per_block == 0 {
        return Err(Error::invalid("n_per_block must be at least 1"));
    }
    let mut models = vec![Intervened::Model(m.clone())];
    let mut targets = vec![NodeSet::empty()];
    for s in specs {
        models.push(apply_intervention(m, s)?);
        targets.push(s.targets);
    }
    let fam = TargetFamily::new(m.p(), targets)?;
    let blocks = models
        .iter()
        .enumerate()
        .map(|(k, im)| sample_block(im, n_per_block, seed, k as u64).data)
        .collect();
    MultiDataset::new(fam, blocks)
}

/// Same kind of intervention on every non-empty target of `fam`, in order.
pub fn specs_for_family(fam: &TargetFamily, kind: InterventionKind) -> Result<Vec<InterventionSpec>> {
    fam.targets()
        .iter()
        .filter(|t| !t.is_empty())
        .map(|t| InterventionSpec::new(kind, *t))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_cov(x: &Matrix<f64>) -> Matrix<f64> {
        let (n, p) = (x.rows(), x.cols());
        let mean: Vec<f64> = (0..p).map(|c| x.column(c).iter().sum::<f64>() / n as f64).collect();
        let mut s = Matrix::<f64>::zeros(p, p);
        for r in 0..n {
            for a in 0..p {
                for b in 0..p {
                    s[(a, b)] += (x[(r, a)] - mean[a]) * (x[(r, b)] - mean[b]);
                }
            }
        }
        Matrix::from_vec(p, p, s.as_slice().iter().map(|v: &f64| v / (n - 1) as f64).collect())
    }

    #[test]
    fn random_dag_density_bounds() {
        assert!(sample_random_dag(5, 0.0, 1).is_err());
        assert!(sample_random_dag(5, 4.5, 1).is_err());
        assert!(sample_random_dag(1, 0.5, 1).is_err());
        for seed in 0..20 {
            assert_eq!(sample_random_dag(2, 1.0, seed).unwrap().edge_count(), 1);
        }
    }

    #[test]
    fn mean_edge_count_matches_binomial_expectation() {
        let draws = 10_000;
        let total: usize = (0..draws).map(|s| sample_random_dag(10, 1.5, s).unwrap().edge_count()).sum();
        let mean = total as f64 / draws as f64;
        assert!((mean - 7.5).abs() < 0.15, "mean edge count {mean}");
    }

    #[test]
    fn weights_avoid_the_gap_and_have_the_right_mean() {
        let g = Dag::new(20, (0..19).map(|i| (i, i + 1))).unwrap();
        let mut mags = Vec::new();
        for seed in 0..(100_000 / 19 + 1) {
            let m: SemModel<f64> = sample_weights(&g, seed);
            assert!(m.noise_var().iter().all(|&v| v == 1.0));
            mags.extend(g.edges().iter().map(|&(i, j)| m.weight(i, j).abs()));
        }
        assert!(mags.iter().all(|&a| (0.25..=1.0).contains(&a)));
        let mean = mags.iter().sum::<f64>() / mags.len() as f64;
        assert!((mean - 0.625).abs() < 0.01, "{mean}");
    }

    #[test]
    fn noise_only_model_has_identity_covariance() {
        let m: SemModel<f64> = SemModel::new(Dag::empty(3).unwrap(), &[], vec![1.0; 3]).unwrap();
        let n = 4000;
        let d = sample_data(&m, &[], n, 5).unwrap();
        let s = sample_cov(d.block(0));
        assert!(s.max_abs_diff(&Matrix::identity(3)) < 5.0 / (n as f64).sqrt());
    }

    #[test]
    fn edge_covariance_and_its_removal() {
        let g = Dag::from_labels(2, &[(1, 2)]).unwrap();
        let m = SemModel::new(g, &[(0, 1, 0.8)], vec![1.0, 1.0]).unwrap();
        let spec = InterventionSpec::new(InterventionKind::Perfect, NodeSet::singleton(1)).unwrap();
        let d = sample_data(&m, &[spec], 100_000, 3).unwrap();
        assert!((sample_cov(d.block(0))[(0, 1)] - 0.8).abs() < 0.02);
        assert!(sample_cov(d.block(1))[(0, 1)].abs() < 0.02);
        assert_eq!(d.fam().targets(), &[NodeSet::empty(), NodeSet::singleton(1)]);
    }

    #[test]
    fn imperfect_success_rate_is_alpha() {
        let g = Dag::from_labels(2, &[(1, 2)]).unwrap();
        let m = SemModel::new(g, &[(0, 1, 0.8)], vec![1.0, 1.0]).unwrap();
        let spec = InterventionSpec::new(InterventionKind::imperfect(), NodeSet::singleton(1)).unwrap();
        let im = apply_intervention(&m, &spec).unwrap();
        let s = sample_block(&im, 10_000, 11, 1);
        let flags = s.success.unwrap();
        let rate = flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64;
        assert!((rate - 0.5).abs() < 0.02, "{rate}");
    }

    #[test]
    fn same_seed_same_bits() {
        let g = sample_random_dag(6, 1.5, 9).unwrap();
        let m: SemModel<f64> = sample_weights(&g, 9);
        let specs = specs_for_family(&TargetFamily::all_singletons(6), InterventionKind::imperfect()).unwrap();
        let a = sample_data(&m, &specs, 50, 77).unwrap();
        let b = sample_data(&m, &specs, 50, 77).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        let c = sample_data(&m, &specs, 50, 78).unwrap();
        assert_ne!(a.to_csv_string(), c.to_csv_string());
    }

    #[test]
    fn single_precision_sampling() {
        let g = Dag::from_labels(2, &[(1, 2)]).unwrap();
        let m = SemModel::<f32>::new(g, &[(0, 1, 0.5)], vec![1.0, 1.0]).unwrap();
        let d = sample_data(&m, &[], 10, 1).unwrap();
        assert_eq!(d.block(0).rows(), 10);
    }
}
