//! Classic ridge ELM and a simplified Laplacian-regularised SS-ELM.
//!
//! These are the comparison methods and double as pre-classifiers.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabelMatrix};
use crate::error::{EdaError, Result};
use crate::feature_map::HiddenMap;
use crate::graph::LaplacianGraph;
use crate::linalg::{row_argmax, spd_solve};

const JITTER: f64 = 1e-10;

fn check_inputs(h: &DMatrix<f64>, t: &DMatrix<f64>, c: f64) -> Result<()> {
    if h.nrows() != t.nrows() {
        return Err(EdaError::Shape(format!(
            "H has {} rows but T has {}",
            h.nrows(),
            t.nrows()
        )));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(EdaError::Parameter(format!("ridge C must be positive, got {c}")));
    }
    if !h.iter().chain(t.iter()).all(|v| v.is_finite()) {
        return Err(EdaError::Numeric("non-finite entry in H or T".into()));
    }
    Ok(())
}

/// `(HᵀH + I/C)⁻¹ HᵀT` when `N > L`.
pub fn fit_elm_primal(h: &DMatrix<f64>, t: &DMatrix<f64>, c: f64) -> Result<DMatrix<f64>> {
    check_inputs(h, t, c)?;
    let l = h.ncols();
    let a = h.tr_mul(h) + DMatrix::identity(l, l) / c;
    spd_solve(&a, &h.tr_mul(t), JITTER)
}

/// `Hᵀ (HHᵀ + I/C)⁻¹ T` when `N ≤ L`.
pub fn fit_elm_dual(h: &DMatrix<f64>, t: &DMatrix<f64>, c: f64) -> Result<DMatrix<f64>> {
    check_inputs(h, t, c)?;
    let n = h.nrows();
    let a = h * h.transpose() + DMatrix::identity(n, n) / c;
    Ok(h.transpose() * spd_solve(&a, t, JITTER)?)
}

/// Ridge output weights, choosing the smaller system.
pub fn fit_elm(h: &DMatrix<f64>, t: &LabelMatrix, c: f64) -> Result<DMatrix<f64>> {
    fit_elm_scores(h, t.values(), c)
}

/// [`fit_elm`] against an arbitrary real target matrix.
pub fn fit_elm_scores(h: &DMatrix<f64>, t: &DMatrix<f64>, c: f64) -> Result<DMatrix<f64>> {
    if h.nrows() > h.ncols() {
        fit_elm_primal(h, t, c)
    } else {
        fit_elm_dual(h, t, c)
    }
}

/// `β = (I + C·H_ℓᵀH_ℓ + λ·HᵀLH)⁻¹ C·H_ℓᵀT`, the minimiser of
/// `½‖β‖² + (C/2)‖T − H_ℓβ‖² + (λ/2)·tr(βᵀHᵀLHβ)`.
///
/// The labeled rows are the first `T.len()` rows of `h_all`.
pub fn fit_sselm(
    h_all: &DMatrix<f64>,
    t_labeled: &LabelMatrix,
    c: f64,
    lambda: f64,
    graph: &LaplacianGraph,
) -> Result<DMatrix<f64>> {
    let n_l = t_labeled.len();
    if graph.len() != h_all.nrows() {
        return Err(EdaError::Shape(format!(
            "graph has {} nodes but H has {} rows",
            graph.len(),
            h_all.nrows()
        )));
    }
    if n_l > h_all.nrows() {
        return Err(EdaError::Shape("more labels than rows in H".into()));
    }
    if !(lambda >= 0.0) {
        return Err(EdaError::Parameter("lambda must be non-negative".into()));
    }
    let h_l = h_all.rows(0, n_l).into_owned();
    check_inputs(&h_l, t_labeled.values(), c)?;
    let l = h_all.ncols();
    let a = DMatrix::identity(l, l)
        + h_l.tr_mul(&h_l) * c
        + h_all.tr_mul(&(graph.laplacian() * h_all)) * lambda;
    spd_solve(&a, &(h_l.tr_mul(t_labeled.values()) * c), JITTER)
}

/// Gradient of the SS-ELM objective above (the ELM one when `λ = 0`).
pub fn sselm_gradient(
    h_all: &DMatrix<f64>,
    t_labeled: &LabelMatrix,
    c: f64,
    lambda: f64,
    graph: &LaplacianGraph,
    beta: &DMatrix<f64>,
) -> DMatrix<f64> {
    let h_l = h_all.rows(0, t_labeled.len());
    let resid = t_labeled.values() - &h_l * beta;
    beta - h_l.tr_mul(&resid) * c + h_all.tr_mul(&(graph.laplacian() * (h_all * beta))) * lambda
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElmModel {
    pub map: HiddenMap,
    #[serde(with = "crate::serde_matrix::matrix")]
    pub beta: DMatrix<f64>,
    pub c: f64,
}

impl ElmModel {
    /// Fits ridge output weights on the given labeled datasets.
    pub fn fit(map: HiddenMap, data: &[&Dataset], classes: usize, c: f64) -> Result<Self> {
        let (h, t) = stack_labeled(&map, data, classes)?;
        let beta = fit_elm(&h, &t, c)?;
        Ok(Self { map, beta, c })
    }

    pub fn predict_scores(&self, x: &Dataset) -> Result<DMatrix<f64>> {
        predict_scores(&self.map, &self.beta, x)
    }

    pub fn predict(&self, x: &Dataset) -> Result<Vec<usize>> {
        Ok(row_argmax(&self.predict_scores(x)?))
    }
}

/// `map(X)·β`.
pub fn predict_scores(map: &HiddenMap, beta: &DMatrix<f64>, x: &Dataset) -> Result<DMatrix<f64>> {
    let h = map.map_features(x)?;
    if h.ncols() != beta.nrows() {
        return Err(EdaError::Shape(format!(
            "β has {} rows, map has {} hidden nodes",
            beta.nrows(),
            h.ncols()
        )));
    }
    Ok(h * beta)
}

/// Hidden matrix and ±1 targets of several labeled datasets, stacked.
pub fn stack_labeled(
    map: &HiddenMap,
    data: &[&Dataset],
    classes: usize,
) -> Result<(DMatrix<f64>, LabelMatrix)> {
    let mut joined: Option<Dataset> = None;
    for ds in data {
        joined = Some(match joined {
            None => (*ds).clone(),
            Some(acc) => acc.concat(ds)?,
        });
    }
    let joined = joined.ok_or_else(|| EdaError::Shape("no training data".into()))?;
    let labels = joined.require_labels("training data")?;
    let t = crate::data::encode_labels(labels, classes)?;
    Ok((map.map_features(&joined)?, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::encode_labels;
    use crate::feature_map::Activation;
    use crate::graph::{build_knn_graph, EdgeWeighting};
    use crate::linalg::max_abs;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>())
    }

    #[test]
    fn identity_design_interpolates() {
        // H = I, C = 1e8: β = T / (1 + 1/C), so ‖β − T‖_max = 1/(C + 1) ≈ 1e-8.
        let h = DMatrix::identity(2, 2);
        let t = encode_labels(&[0, 1], 2).unwrap();
        let beta = fit_elm(&h, &t, 1e8).unwrap();
        assert!(max_abs(&(&beta - t.values())) < 1e-6);
        let expected = t.values() / (1.0 + 1e-8);
        assert!(max_abs(&(beta - expected)) < 1e-15);
    }

    #[test]
    fn branches_agree() {
        for seed in 0..10 {
            let h = random(6, 4, seed);
            let t = random(6, 3, seed + 100);
            let p = fit_elm_primal(&h, &t, 2.5).unwrap();
            let d = fit_elm_dual(&h, &t, 2.5).unwrap();
            assert!(max_abs(&(&p - &d)) <= 1e-8 * max_abs(&p).max(1.0));
        }
    }

    #[test]
    fn zero_design_gives_zero() {
        let h = DMatrix::zeros(3, 5);
        let t = encode_labels(&[0, 1, 1], 2).unwrap();
        assert_eq!(fit_elm(&h, &t, 1.0).unwrap(), DMatrix::zeros(5, 2));
    }

    #[test]
    fn non_finite_design_is_numeric_error() {
        let mut h = DMatrix::zeros(2, 2);
        h[(0, 0)] = f64::INFINITY;
        let t = encode_labels(&[0, 1], 2).unwrap();
        assert!(matches!(fit_elm(&h, &t, 1.0), Err(EdaError::Numeric(_))));
    }

    fn six_node_setup() -> (DMatrix<f64>, LabelMatrix, LaplacianGraph) {
        // Two tight clusters of three points on a line, far apart.
        let x = DMatrix::from_row_slice(1, 6, &[0.0, 0.1, 0.2, 10.0, 10.1, 10.2]);
        let g = build_knn_graph(&Dataset::unlabeled(x).unwrap(), 2, EdgeWeighting::Binary).unwrap();
        let h = random(6, 4, 9);
        let t = encode_labels(&[0, 1], 2).unwrap();
        (h, t, g)
    }

    #[test]
    fn sselm_without_manifold_is_elm() {
        let (h, t, g) = six_node_setup();
        let ss = fit_sselm(&h, &t, 3.0, 0.0, &g).unwrap();
        let elm = fit_elm_primal(&h.rows(0, 2).into_owned(), t.values(), 3.0).unwrap();
        assert!(max_abs(&(ss - elm)) < 1e-12);
    }

    #[test]
    fn sselm_is_stationary() {
        let (h, t, g) = six_node_setup();
        let beta = fit_sselm(&h, &t, 10.0, 0.7, &g).unwrap();
        assert!(max_abs(&sselm_gradient(&h, &t, 10.0, 0.7, &g, &beta)) < 1e-8);
    }

    #[test]
    fn heavy_manifold_flattens_components() {
        // The two 3-cliques are disconnected, so λ → ∞ forces constant
        // outputs on each clique.
        let (h, t, g) = six_node_setup();
        assert_eq!(g.adjacency().rows(0, 3).columns(3, 3).sum(), 0.0);
        let beta = fit_sselm(&h, &t, 1.0, 1e8, &g).unwrap();
        let f = &h * &beta;
        for block in [0usize, 3] {
            for col in 0..2 {
                let vals: Vec<f64> = (block..block + 3).map(|i| f[(i, col)]).collect();
                let mean = vals.iter().sum::<f64>() / 3.0;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0;
                assert!(var < 1e-6, "block {block} col {col} var {var}");
            }
        }
    }

    #[test]
    fn sselm_rejects_graph_size_mismatch() {
        let (h, t, _) = six_node_setup();
        let g = LaplacianGraph::edgeless(4);
        assert!(matches!(fit_sselm(&h, &t, 1.0, 1.0, &g), Err(EdaError::Shape(_))));
    }

    #[test]
    fn elm_gradient_vanishes() {
        let h = random(20, 6, 1);
        let t = encode_labels(&(0..20).map(|i| i % 3).collect::<Vec<_>>(), 3).unwrap();
        let beta = fit_elm(&h, &t, 50.0).unwrap();
        let g = LaplacianGraph::edgeless(20);
        assert!(max_abs(&sselm_gradient(&h, &t, 50.0, 0.0, &g, &beta)) < 1e-8);
    }

    #[test]
    fn memorised_point_prediction() {
        let map = HiddenMap::from_parts(DMatrix::identity(2, 2), nalgebra::DVector::zeros(2), Activation::Sigmoid)
            .unwrap();
        let x = Dataset::from_rows(&[vec![0.0, 0.0]], None).unwrap();
        let t = encode_labels(&[1], 2).unwrap();
        // H = (0.5, 0.5); β chosen so Hβ reproduces T.
        let beta = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, -1.0, 1.0]);
        let s = predict_scores(&map, &beta, &x).unwrap();
        assert_eq!(row_argmax(&s), t.decode());
        assert_eq!(row_argmax(&(s * 2.0)), vec![1]);
    }

    #[test]
    fn scores_concatenate() {
        let map = HiddenMap::new(8, 2, Activation::Radbas, 5).unwrap();
        let a = Dataset::from_rows(&[vec![0.1, 0.2], vec![1.0, -1.0]], None).unwrap();
        let b = Dataset::from_rows(&[vec![0.5, 0.5]], None).unwrap();
        let beta = random(8, 3, 2);
        let joint = predict_scores(&map, &beta, &a.concat(&b).unwrap()).unwrap();
        let sa = predict_scores(&map, &beta, &a).unwrap();
        let sb = predict_scores(&map, &beta, &b).unwrap();
        assert_eq!(joint, crate::linalg::vstack(&sa, &sb));
    }
}
