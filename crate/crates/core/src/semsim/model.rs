use serde::{Deserialize, Serialize};

use crate::graph::{Dag, NodeSet};
use crate::linalg::Matrix;
use crate::{Error, Result, Scalar};

/// Linear Gaussian SEM: `X_j = Σ_{i ∈ pa(j)} w_ij X_i + ε_j`, with
/// independent `ε_j ~ N(0, noise_var[j])`.
///
/// Weights are kept in a dense `p × p` matrix `W` with `W[(i, j)]` the
/// coefficient of `i -> j`; entries off the edge set are zero. Under this
/// convention the covariance is `Σ = (I − Wᵀ)⁻¹ D (I − W)⁻¹`.
#[derive(Clone, Debug, PartialEq)]
pub struct SemModel<T> {
    dag: Dag,
    weights: Matrix<T>,
    noise_var: Vec<T>,
}

impl<T: Scalar> SemModel<T> {
    /// `weights` holds one `(from, to, w)` per edge of `dag` (0-based).
    pub fn new(dag: Dag, weights: &[(usize, usize, T)], noise_var: Vec<T>) -> Result<Self> {
        let p = dag.p();
        if noise_var.len() != p {
            return Err(Error::invalid(format!(
                "expected {p} noise variances, got {}",
                noise_var.len()
            )));
        }
        if let Some(j) = noise_var.iter().position(|v| !(*v > T::zero()) || !v.is_finite()) {
            return Err(Error::invalid(format!("noise variance of node {} must be positive", j + 1)));
        }
        let mut w = Matrix::zeros(p, p);
        let mut seen = 0usize;
        for &(i, j, x) in weights {
            if i >= p || j >= p || !dag.has_edge(i, j) {
                return Err(Error::invalid(format!("weight for {}->{} is not an edge", i + 1, j + 1)));
            }
            if !x.is_finite() {
                return Err(Error::invalid(format!("weight for {}->{} is not finite", i + 1, j + 1)));
            }
            if w[(i, j)] != T::zero() || seen_flag(&weights[..seen], i, j) {
                return Err(Error::invalid(format!("duplicate weight for {}->{}", i + 1, j + 1)));
            }
            w[(i, j)] = x;
            seen += 1;
        }
        if seen != dag.edge_count() {
            return Err(Error::invalid(format!(
                "{} edges but {} weights",
                dag.edge_count(),
                seen
            )));
        }
        Ok(SemModel {
            dag,
            weights: w,
            noise_var,
        })
    }

    pub(crate) fn from_parts(dag: Dag, weights: Matrix<T>, noise_var: Vec<T>) -> Self {
        SemModel {
            dag,
            weights,
            noise_var,
        }
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn p(&self) -> usize {
        self.dag.p()
    }

    pub fn weight(&self, i: usize, j: usize) -> T {
        self.weights[(i, j)]
    }

    pub fn weights(&self) -> &Matrix<T> {
        &self.weights
    }

    pub fn noise_var(&self) -> &[T] {
        &self.noise_var
    }

    /// Edges whose coefficient magnitude lies outside `[0.25, 1]`.
    pub fn flagged_weights(&self) -> Vec<(usize, usize)> {
        let (lo, hi) = (T::of(0.25), T::one());
        self.dag
            .edges()
            .into_iter()
            .filter(|&(i, j)| {
                let a = self.weights[(i, j)].abs();
                a < lo || a > hi
            })
            .collect()
    }

    /// `B = (I − Wᵀ)⁻¹`, so that `X = B ε`.
    ///
    /// Row `j` of `B` is filled in topological order from the rows of `j`'s
    /// parents: `B_j = e_j + Σ_i W_ij B_i`.
    pub fn total_effects(&self) -> Matrix<T> {
        let p = self.p();
        let mut b = Matrix::zeros(p, p);
        for j in self.dag.topological_order().expect("acyclic") {
            b[(j, j)] = T::one();
            for i in self.dag.parents(j).iter() {
                let w = self.weights[(i, j)];
                for c in 0..p {
                    b[(j, c)] = b[(j, c)] + w * b[(i, c)];
                }
            }
        }
        b
    }

    /// Population covariance `(I − Wᵀ)⁻¹ D (I − W)⁻¹`.
    pub fn implied_covariance(&self) -> Matrix<T> {
        let p = self.p();
        let b = self.total_effects();
        let mut out = Matrix::zeros(p, p);
        for r in 0..p {
            for c in r..p {
                let mut s = T::zero();
                for k in 0..p {
                    s = s + b[(r, k)] * self.noise_var[k] * b[(c, k)];
                }
                out[(r, c)] = s;
                out[(c, r)] = s;
            }
        }
        out
    }

    pub fn to_json(&self) -> ModelJson {
        let edges = self.dag.edges();
        ModelJson {
            p: self.p(),
            edges: edges.iter().map(|&(i, j)| [i + 1, j + 1]).collect(),
            weights: edges
                .iter()
                .map(|&(i, j)| (i + 1, j + 1, self.weights[(i, j)].as_f64()))
                .collect(),
            noise_var: self.noise_var.iter().map(|v| v.as_f64()).collect(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: ModelJson = serde_json::from_str(text).map_err(|e| {
            Error::parse(format!("line {}, column {}", e.line(), e.column()), e.to_string())
        })?;
        raw.to_model()
    }
}

fn seen_flag<T>(prev: &[(usize, usize, T)], i: usize, j: usize) -> bool {
    prev.iter().any(|&(a, b, _)| a == i && b == j)
}

/// Graph JSON extended with per-edge weights and noise variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelJson {
    pub p: usize,
    pub edges: Vec<[usize; 2]>,
    pub weights: Vec<(usize, usize, f64)>,
    pub noise_var: Vec<f64>,
}

impl ModelJson {
    pub fn to_model<T: Scalar>(&self) -> Result<SemModel<T>> {
        let dag = crate::graph::GraphJson {
            p: self.p,
            edges: self.edges.clone(),
        }
        .to_dag()?;
        let mut w = Vec::with_capacity(self.weights.len());
        for (k, &(i, j, x)) in self.weights.iter().enumerate() {
            if i == 0 || j == 0 || i > self.p || j > self.p {
                return Err(Error::parse(format!("field `weights[{k}]`"), "label out of range"));
            }
            w.push((i - 1, j - 1, T::of(x)));
        }
        let nv = self.noise_var.iter().map(|&v| T::of(v)).collect();
        SemModel::new(dag, &w, nv).map_err(|e| Error::parse("model", e.to_string()))
    }
}

/// How an intervention alters the mechanisms of its targets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InterventionKind {
    /// Remove all incoming coefficients.
    Perfect,
    /// Divide incoming coefficients by `factor` (> 1).
    Inhibiting { factor: f64 },
    /// Perfect with probability `alpha` per sample, no effect otherwise.
    Imperfect { alpha: f64 },
    /// Add `extra_var` to the target's noise variance.
    Shift { extra_var: f64 },
}

impl InterventionKind {
    pub fn inhibiting() -> Self {
        InterventionKind::Inhibiting { factor: 10.0 }
    }

    pub fn imperfect() -> Self {
        InterventionKind::Imperfect { alpha: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            InterventionKind::Perfect => Ok(()),
            InterventionKind::Inhibiting { factor } if factor > 1.0 && factor.is_finite() => Ok(()),
            InterventionKind::Inhibiting { factor } => {
                Err(Error::invalid(format!("inhibiting factor must exceed 1, got {factor}")))
            }
            InterventionKind::Imperfect { alpha } if alpha > 0.0 && alpha < 1.0 => Ok(()),
            InterventionKind::Imperfect { alpha } => {
                Err(Error::invalid(format!("success rate must be in (0, 1), got {alpha}")))
            }
            InterventionKind::Shift { extra_var } if extra_var > 0.0 && extra_var.is_finite() => {
                Ok(())
            }
            InterventionKind::Shift { extra_var } => {
                Err(Error::invalid(format!("variance shift must be positive, got {extra_var}")))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterventionSpec {
    pub kind: InterventionKind,
    pub targets: NodeSet,
}

impl InterventionSpec {
    pub fn new(kind: InterventionKind, targets: NodeSet) -> Result<Self> {
        kind.validate()?;
        if targets.is_empty() {
            return Err(Error::invalid("intervention has no targets"));
        }
        Ok(InterventionSpec { kind, targets })
    }
}

/// An intervened model. Imperfect interventions stay a two-component
/// mixture until sampling, where each row draws its own component.
#[derive(Clone, Debug, PartialEq)]
pub enum Intervened<T> {
    Model(SemModel<T>),
    Mixture {
        success: SemModel<T>,
        failure: SemModel<T>,
        alpha: T,
    },
}

impl<T: Scalar> Intervened<T> {
    pub fn p(&self) -> usize {
        match self {
            Intervened::Model(m) => m.p(),
            Intervened::Mixture { success, .. } => success.p(),
        }
    }

    /// Mixture covariance (every component has mean zero).
    pub fn implied_covariance(&self) -> Matrix<T> {
        match self {
            Intervened::Model(m) => m.implied_covariance(),
            Intervened::Mixture {
                success,
                failure,
                alpha,
            } => {
                let (a, b) = (success.implied_covariance(), failure.implied_covariance());
                let p = a.rows();
                let mut out = Matrix::zeros(p, p);
                for r in 0..p {
                    for c in 0..p {
                        out[(r, c)] = *alpha * a[(r, c)] + (T::one() - *alpha) * b[(r, c)];
                    }
                }
                out
            }
        }
    }
}

fn scale_incoming<T: Scalar>(m: &SemModel<T>, targets: &NodeSet, by: T) -> SemModel<T> {
    let mut w = m.weights.clone();
    for t in targets.iter() {
        for q in m.dag.parents(t).iter() {
            w[(q, t)] = w[(q, t)] * by;
        }
    }
    SemModel::from_parts(m.dag.clone(), w, m.noise_var.clone())
}

/// Applies `spec` to `m`. The graph is unchanged: a perfect intervention
/// keeps the edges but zeroes their coefficients.
pub fn apply_intervention<T: Scalar>(m: &SemModel<T>, spec: &InterventionSpec) -> Result<Intervened<T>> {
    spec.kind.validate()?;
    if spec.targets.is_empty() {
        return Err(Error::invalid("intervention has no targets"));
    }
    if spec.targets.bound() > m.p() {
        return Err(Error::invalid(format!("targets {} exceed 1..={}", spec.targets, m.p())));
    }
    Ok(match spec.kind {
        InterventionKind::Perfect => Intervened::Model(scale_incoming(m, &spec.targets, T::zero())),
        InterventionKind::Inhibiting { factor } => {
            Intervened::Model(scale_incoming(m, &spec.targets, T::one() / T::of(factor)))
        }
        InterventionKind::Imperfect { alpha } => Intervened::Mixture {
            success: scale_incoming(m, &spec.targets, T::zero()),
            failure: m.clone(),
            alpha: T::of(alpha),
        },
        InterventionKind::Shift { extra_var } => {
            let mut nv = m.noise_var.clone();
            for t in spec.targets.iter() {
                nv[t] = nv[t] + T::of(extra_var);
            }
            Intervened::Model(SemModel::from_parts(m.dag.clone(), m.weights.clone(), nv))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_edge(w: f64) -> SemModel<f64> {
        let g = Dag::from_labels(2, &[(1, 2)]).unwrap();
        SemModel::new(g, &[(0, 1, w)], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn rejects_malformed_weights() {
        let g = Dag::from_labels(2, &[(1, 2)]).unwrap();
        assert!(SemModel::new(g.clone(), &[], vec![1.0, 1.0]).is_err());
        assert!(SemModel::new(g.clone(), &[(1, 0, 0.5)], vec![1.0, 1.0]).is_err());
        assert!(SemModel::new(g.clone(), &[(0, 1, 0.5), (0, 1, 0.5)], vec![1.0, 1.0]).is_err());
        assert!(SemModel::new(g, &[(0, 1, 0.5)], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn out_of_band_weights_are_flagged_not_rejected() {
        assert_eq!(one_edge(2.0).flagged_weights(), vec![(0, 1)]);
        assert!(one_edge(-0.3).flagged_weights().is_empty());
    }

    #[test]
    fn covariance_of_single_edge() {
        let w = 0.7;
        let s = one_edge(w).implied_covariance();
        let expect = Matrix::from_rows(&[vec![1.0, w], vec![w, 1.0 + w * w]]);
        assert!(s.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn covariance_of_empty_graph_is_noise() {
        let g = Dag::empty(3).unwrap();
        let m = SemModel::new(g, &[], vec![1.0, 2.0, 3.0]).unwrap();
        let s = m.implied_covariance();
        assert_eq!(s[(1, 1)], 2.0);
        assert_eq!(s[(0, 2)], 0.0);
    }

    #[test]
    fn covariance_along_chain_is_product_of_weights() {
        let g = Dag::from_labels(3, &[(1, 2), (2, 3)]).unwrap();
        let m = SemModel::new(g, &[(0, 1, 1.0), (1, 2, 1.0)], vec![1.0; 3]).unwrap();
        assert_eq!(m.implied_covariance()[(0, 2)], 1.0);
    }

    #[test]
    fn intervention_examples() {
        let m = one_edge(0.5);
        let t = NodeSet::singleton(1);
        let perfect = apply_intervention(&m, &InterventionSpec::new(InterventionKind::Perfect, t).unwrap()).unwrap();
        let Intervened::Model(pm) = perfect else { panic!() };
        assert_eq!(pm.weight(0, 1), 0.0);
        assert!(pm.dag().has_edge(0, 1));

        let inh = apply_intervention(&m, &InterventionSpec::new(InterventionKind::inhibiting(), t).unwrap()).unwrap();
        let Intervened::Model(im) = inh else { panic!() };
        assert!((im.weight(0, 1) - 0.05).abs() < 1e-15);

        let imp = apply_intervention(&m, &InterventionSpec::new(InterventionKind::imperfect(), t).unwrap()).unwrap();
        let Intervened::Mixture { success, failure, alpha } = imp else { panic!() };
        assert_eq!((success.weight(0, 1), failure.weight(0, 1), alpha), (0.0, 0.5, 0.5));

        let sh = apply_intervention(&m, &InterventionSpec::new(InterventionKind::Shift { extra_var: 2.0 }, t).unwrap()).unwrap();
        let Intervened::Model(sm) = sh else { panic!() };
        assert_eq!(sm.noise_var(), &[1.0, 3.0]);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let t = NodeSet::singleton(0);
        assert!(InterventionSpec::new(InterventionKind::Perfect, NodeSet::empty()).is_err());
        assert!(InterventionSpec::new(InterventionKind::Inhibiting { factor: 1.0 }, t).is_err());
        assert!(InterventionSpec::new(InterventionKind::Imperfect { alpha: 1.0 }, t).is_err());
        assert!(InterventionSpec::new(InterventionKind::Shift { extra_var: -1.0 }, t).is_err());
    }

    #[test]
    fn model_json_roundtrip() {
        let m = one_edge(-0.375);
        let text = serde_json::to_string(&m.to_json()).unwrap();
        assert_eq!(text, r#"{"p":2,"edges":[[1,2]],"weights":[[1,2,-0.375]],"noise_var":[1.0,1.0]}"#);
        assert_eq!(SemModel::<f64>::from_json_str(&text).unwrap(), m);
    }
}
