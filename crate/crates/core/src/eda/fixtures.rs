//! Small random problems shared by the solver tests.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::single::EdaProblem;
use crate::data::{encode_labels, Dataset};
use crate::graph::{build_knn_graph, EdgeWeighting, LaplacianGraph};
use crate::preclassifier::PreLabelMatrix;

pub(crate) struct Fixture {
    pub problem: EdaProblem,
    pub graph: LaplacianGraph,
}

pub(crate) fn uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>())
}

pub(crate) fn labels(n: usize, c: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..n).map(|i| if i < c { i } else { rng.random_range(0..c) }).collect()
}

/// Hidden activations uniform on [0, 1), soft pre-labels uniform on
/// [−1, 1), and a k = 2 graph over random 2-D target points.
pub(crate) fn random_problem(seed: u64, n_s: usize, n_t: usize, n_u: usize, l: usize, c: usize) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h_s = uniform(n_s, l, &mut rng);
    let h_t = uniform(n_t, l, &mut rng);
    let h_tu = uniform(n_u, l, &mut rng);
    let t_s = encode_labels(&labels(n_s, c, &mut rng), c).unwrap();
    let t_t = encode_labels(&labels(n_t, c, &mut rng), c).unwrap();
    let phi = DMatrix::from_fn(n_u, c, |_, _| rng.random_range(-1.0..1.0));
    let phi = PreLabelMatrix::new(phi).unwrap();
    let n = n_t + n_u;
    let points = Dataset::unlabeled(uniform(2, n, &mut rng)).unwrap();
    let graph = build_knn_graph(&points, 2.min(n - 1), EdgeWeighting::Binary).unwrap();
    let problem = EdaProblem::new(h_s, h_t, h_tu, &t_s, &t_t, &phi, graph.laplacian()).unwrap();
    Fixture { problem, graph }
}
