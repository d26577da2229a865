//! Single-view EDA: alternating closed-form updates of `β`, `Θ` and the
//! ℓ2,1 reweighting diagonal `U`.
//!
//! The objective is
//!
//! ```text
//! J(β, Θ) = ‖β‖₂,₁ + C_S‖H_Sβ − T_S‖² + C_T‖H_Tβ − T_TΘ‖² + γ‖Θ − I‖²
//!         + τ‖H_Tuβ − Φ‖² + λ·tr(βᵀHᵀLHβ)
//! ```
//!
//! with `H = [H_T; H_Tu]` and `L` the Laplacian of the target k-NN graph.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::params::{EdaParams, Tradeoffs};
use crate::data::{DomainBundle, LabelMatrix};
use crate::error::{EdaError, Result};
use crate::feature_map::{HiddenMap, Standardizer};
use crate::graph::{build_knn_graph, LaplacianGraph};
use crate::linalg::{l21_norm, quad_trace, row_argmax, spd_solve, vstack};
use crate::preclassifier::PreLabelMatrix;

const BETA_JITTER: f64 = 1e-10;

/// Hidden matrices, targets and Laplacian of one view, with the Gram
/// products every iteration reuses.
#[derive(Debug, Clone)]
pub struct EdaProblem {
    h_s: DMatrix<f64>,
    h_t: DMatrix<f64>,
    h_tu: DMatrix<f64>,
    t_s: DMatrix<f64>,
    t_t: DMatrix<f64>,
    phi: DMatrix<f64>,
    laplacian: DMatrix<f64>,
    gram_s: DMatrix<f64>,
    gram_t: DMatrix<f64>,
    gram_tu: DMatrix<f64>,
    gram_manifold: DMatrix<f64>,
    hs_ts: DMatrix<f64>,
    ht_tt: DMatrix<f64>,
    htu_phi: DMatrix<f64>,
    tt_tt: DMatrix<f64>,
}

impl EdaProblem {
    /// `laplacian` is over `[H_T; H_Tu]` in that row order.
    pub fn new(
        h_s: DMatrix<f64>,
        h_t: DMatrix<f64>,
        h_tu: DMatrix<f64>,
        t_s: &LabelMatrix,
        t_t: &LabelMatrix,
        phi: &PreLabelMatrix,
        laplacian: &DMatrix<f64>,
    ) -> Result<Self> {
        let l = h_s.ncols();
        let c = t_s.classes();
        let shape = |m: String| Err(EdaError::Shape(m));
        if h_t.ncols() != l || h_tu.ncols() != l {
            return shape("hidden matrices disagree on L".into());
        }
        if h_s.nrows() != t_s.len() || h_t.nrows() != t_t.len() {
            return shape("hidden matrices and label matrices disagree on N".into());
        }
        if t_t.classes() != c || phi.classes() != c {
            return shape("class counts disagree".into());
        }
        if h_tu.nrows() != phi.len() {
            return shape(format!(
                "{} unlabeled rows but {} pre-label rows",
                h_tu.nrows(),
                phi.len()
            ));
        }
        let n = h_t.nrows() + h_tu.nrows();
        if laplacian.shape() != (n, n) {
            return shape(format!(
                "Laplacian is {:?}, expected {n}x{n}",
                laplacian.shape()
            ));
        }
        if !h_s.iter().chain(h_t.iter()).chain(h_tu.iter()).all(|v| v.is_finite()) {
            return Err(EdaError::Numeric("non-finite hidden activations".into()));
        }
        let t_s = t_s.values().clone();
        let t_t = t_t.values().clone();
        let phi = phi.scores().clone();
        let h_all = vstack(&h_t, &h_tu);
        Ok(Self {
            gram_s: h_s.tr_mul(&h_s),
            gram_t: h_t.tr_mul(&h_t),
            gram_tu: h_tu.tr_mul(&h_tu),
            gram_manifold: h_all.tr_mul(&(laplacian * &h_all)),
            hs_ts: h_s.tr_mul(&t_s),
            ht_tt: h_t.tr_mul(&t_t),
            htu_phi: h_tu.tr_mul(&phi),
            tt_tt: t_t.tr_mul(&t_t),
            laplacian: laplacian.clone(),
            h_s,
            h_t,
            h_tu,
            t_s,
            t_t,
            phi,
        })
    }

    pub fn hidden(&self) -> usize {
        self.h_s.ncols()
    }

    pub fn classes(&self) -> usize {
        self.t_s.ncols()
    }

    pub fn h_source(&self) -> &DMatrix<f64> {
        &self.h_s
    }

    pub fn h_target(&self) -> &DMatrix<f64> {
        &self.h_t
    }

    pub fn h_unlabeled(&self) -> &DMatrix<f64> {
        &self.h_tu
    }

    pub fn t_source(&self) -> &DMatrix<f64> {
        &self.t_s
    }

    pub fn t_target(&self) -> &DMatrix<f64> {
        &self.t_t
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    /// `HᵀLH`.
    pub fn manifold_gram(&self) -> &DMatrix<f64> {
        &self.gram_manifold
    }

    /// `tr(βᵀHᵀLHβ)`, the smoothness of the outputs over the target graph.
    pub fn smoothness(&self, beta: &DMatrix<f64>) -> f64 {
        let f = vstack(&(&self.h_t * beta), &(&self.h_tu * beta));
        quad_trace(&f, &self.laplacian)
    }
}

/// The individual terms of the objective (before weighting).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTerms {
    pub l21: f64,
    pub source_loss: f64,
    pub target_loss: f64,
    pub drift: f64,
    pub fidelity: f64,
    pub smoothness: f64,
}

impl ObjectiveTerms {
    pub fn evaluate(beta: &DMatrix<f64>, theta: &DMatrix<f64>, p: &EdaProblem) -> Self {
        let c = p.classes();
        Self {
            l21: l21_norm(beta),
            source_loss: (&p.h_s * beta - &p.t_s).norm_squared(),
            target_loss: (&p.h_t * beta - &p.t_t * theta).norm_squared(),
            drift: (theta - DMatrix::<f64>::identity(c, c)).norm_squared(),
            fidelity: (&p.h_tu * beta - &p.phi).norm_squared(),
            smoothness: p.smoothness(beta),
        }
    }

    /// Everything except `‖β‖₂,₁`, weighted.
    pub fn weighted_losses(&self, w: &Tradeoffs) -> f64 {
        w.c_s * self.source_loss
            + w.c_t * self.target_loss
            + w.gamma * self.drift
            + w.tau * self.fidelity
            + w.lambda * self.smoothness
    }

    pub fn total(&self, w: &Tradeoffs) -> f64 {
        self.l21 + self.weighted_losses(w)
    }
}

/// `J(β, Θ)` with the exact ℓ2,1 norm (sum of row norms).
pub fn eda_objective(beta: &DMatrix<f64>, theta: &DMatrix<f64>, p: &EdaProblem, w: &Tradeoffs) -> f64 {
    ObjectiveTerms::evaluate(beta, theta, p).total(w)
}

/// `U_ii = 1 / (2(‖β_i‖₂ + ε))`, applied to every row.
pub fn update_u(beta: &DMatrix<f64>, epsilon: f64) -> DVector<f64> {
    DVector::from_iterator(
        beta.nrows(),
        beta.row_iter().map(|r| 1.0 / (2.0 * (r.norm() + epsilon))),
    )
}

/// `∂J/∂β` with `‖β‖₂,₁` replaced by `tr(βᵀUβ)`.
pub fn beta_gradient(
    beta: &DMatrix<f64>,
    theta: &DMatrix<f64>,
    u: &DVector<f64>,
    p: &EdaProblem,
    w: &Tradeoffs,
) -> DMatrix<f64> {
    let mut g = DMatrix::from_fn(beta.nrows(), beta.ncols(), |i, j| u[i] * beta[(i, j)]);
    g += (&p.gram_s * beta - &p.hs_ts) * w.c_s;
    g += (&p.gram_t * beta - &p.ht_tt * theta) * w.c_t;
    g += (&p.gram_tu * beta - &p.htu_phi) * w.tau;
    g += &p.gram_manifold * beta * w.lambda;
    g * 2.0
}

/// Minimises `tr(βᵀUβ) + (rest of J)` over `β` with `U` and `Θ` fixed:
///
/// `(U + C_S H_SᵀH_S + C_T H_TᵀH_T + τ H_TuᵀH_Tu + λ HᵀLH) β
///     = C_S H_SᵀT_S + C_T H_TᵀT_TΘ + τ H_TuᵀΦ`.
pub fn update_beta(
    u: &DVector<f64>,
    theta: &DMatrix<f64>,
    p: &EdaProblem,
    w: &Tradeoffs,
) -> Result<DMatrix<f64>> {
    if u.len() != p.hidden() {
        return Err(EdaError::Shape("U does not match L".into()));
    }
    if u.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(EdaError::Numeric("U must be positive and finite".into()));
    }
    let mut a = &p.gram_s * w.c_s + &p.gram_t * w.c_t + &p.gram_tu * w.tau + &p.gram_manifold * w.lambda;
    for i in 0..a.nrows() {
        a[(i, i)] += u[i];
    }
    // The products are symmetric in exact arithmetic; enforce it for Cholesky.
    let a = (&a + a.transpose()) * 0.5;
    let rhs = &p.hs_ts * w.c_s + &p.ht_tt * theta * w.c_t + &p.htu_phi * w.tau;
    spd_solve(&a, &rhs, BETA_JITTER)
}

/// `∂J/∂Θ = 2 C_T (T_TᵀT_TΘ − T_TᵀH_Tβ) + 2γ(Θ − I)`.
pub fn theta_gradient(beta: &DMatrix<f64>, theta: &DMatrix<f64>, p: &EdaProblem, w: &Tradeoffs) -> DMatrix<f64> {
    let c = p.classes();
    ((&p.tt_tt * theta - p.t_t.tr_mul(&(&p.h_t * beta))) * w.c_t
        + (theta - DMatrix::<f64>::identity(c, c)) * w.gamma)
        * 2.0
}

/// `Θ = (C_T T_TᵀT_T + γI)⁻¹ (C_T T_TᵀH_Tβ + γI)`.
pub fn update_theta(beta: &DMatrix<f64>, p: &EdaProblem, w: &Tradeoffs) -> Result<DMatrix<f64>> {
    if !(w.gamma > 0.0) {
        return Err(EdaError::Parameter("gamma must be positive".into()));
    }
    let c = p.classes();
    let eye = DMatrix::<f64>::identity(c, c);
    let a = &p.tt_tt * w.c_t + &eye * w.gamma;
    let rhs = p.t_t.tr_mul(&(&p.h_t * beta)) * w.c_t + eye * w.gamma;
    spd_solve(&a, &rhs, 0.0)
}

/// Result of the alternating iterations on one problem.
#[derive(Debug, Clone, PartialEq)]
pub struct EdaSolution {
    pub beta: DMatrix<f64>,
    pub theta: DMatrix<f64>,
    pub u: DVector<f64>,
    /// `J` after every completed iteration.
    pub history: Vec<f64>,
}

pub(crate) fn converged(prev: f64, next: f64, tol: f64) -> bool {
    (prev - next).abs() <= tol * prev.abs().max(f64::MIN_POSITIVE)
}

/// Runs the alternating updates from `U = I`, `Θ = I`.
pub fn solve_eda(p: &EdaProblem, params: &EdaParams) -> Result<EdaSolution> {
    let w = params.tradeoffs();
    let c = p.classes();
    let mut u = DVector::from_element(p.hidden(), 1.0);
    let mut theta = DMatrix::identity(c, c);
    let mut beta = DMatrix::zeros(p.hidden(), c);
    let mut history = Vec::with_capacity(params.t_max);
    for _ in 0..params.t_max {
        beta = update_beta(&u, &theta, p, &w)?;
        theta = update_theta(&beta, p, &w)?;
        u = update_u(&beta, params.epsilon);
        let j = eda_objective(&beta, &theta, p, &w);
        let stop = history.last().is_some_and(|&prev| converged(prev, j, params.early_exit_tol));
        history.push(j);
        if stop {
            break;
        }
    }
    Ok(EdaSolution { beta, theta, u, history })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdaModel {
    pub map: HiddenMap,
    #[serde(with = "crate::serde_matrix::matrix")]
    pub beta: DMatrix<f64>,
    #[serde(with = "crate::serde_matrix::matrix")]
    pub theta: DMatrix<f64>,
    #[serde(with = "crate::serde_matrix::vector")]
    pub u: DVector<f64>,
    pub objective_history: Vec<f64>,
    pub params: EdaParams,
}

/// Hidden map for one view, optionally z-scored on `source ∪ target_labeled`.
pub fn build_map(bundle: &DomainBundle, params: &EdaParams, seed: u64) -> Result<HiddenMap> {
    let map = HiddenMap::new(params.hidden, bundle.target_labeled.dim(), params.activation, seed)?;
    if params.standardize {
        let train = bundle.labeled_union()?;
        map.with_standardizer(Standardizer::fit(train.features()))
    } else {
        Ok(map)
    }
}

/// Laplacian over `target_labeled ∥ target_unlabeled` in raw feature space.
pub(crate) fn build_graph(bundle: &DomainBundle, params: &EdaParams) -> Result<LaplacianGraph> {
    let target = bundle.target_all()?;
    if params.lambda == 0.0 {
        return Ok(LaplacianGraph::edgeless(target.len()));
    }
    build_knn_graph(&target, params.k, params.graph_weighting)
}

pub(crate) fn assemble_problem(
    bundle: &DomainBundle,
    prelabels: &PreLabelMatrix,
    map: &HiddenMap,
    graph: &LaplacianGraph,
) -> Result<EdaProblem> {
    prelabels.check_for(bundle)?;
    EdaProblem::new(
        map.map_features(&bundle.source)?,
        map.map_features(&bundle.target_labeled)?,
        map.map_features(&bundle.target_unlabeled)?,
        &bundle.source_labels()?,
        &bundle.target_labels()?,
        prelabels,
        graph.laplacian(),
    )
}

/// Builds the hidden map and graph for `bundle` and runs the solver.
pub fn fit_eda(bundle: &DomainBundle, prelabels: &PreLabelMatrix, params: &EdaParams) -> Result<EdaModel> {
    fit_eda_seeded(bundle, prelabels, params, params.seed)
}

pub(crate) fn fit_eda_seeded(
    bundle: &DomainBundle,
    prelabels: &PreLabelMatrix,
    params: &EdaParams,
    seed: u64,
) -> Result<EdaModel> {
    params.validate()?;
    if bundle.source.dim() != bundle.target_labeled.dim() {
        return Err(EdaError::HeterogeneousDims {
            source_dim: bundle.source.dim(),
            target_dim: bundle.target_labeled.dim(),
        });
    }
    let map = build_map(bundle, params, seed)?;
    let graph = build_graph(bundle, params)?;
    let problem = assemble_problem(bundle, prelabels, &map, &graph)?;
    let sol = solve_eda(&problem, params)?;
    Ok(EdaModel {
        map,
        beta: sol.beta,
        theta: sol.theta,
        u: sol.u,
        objective_history: sol.history,
        params: params.clone(),
    })
}

/// Labels and the score matrix they were read from.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<usize>,
    pub scores: DMatrix<f64>,
}

/// `Θ⁻¹`, or its pseudo-inverse when `Θ` is numerically singular.
pub fn theta_inverse(theta: &DMatrix<f64>) -> DMatrix<f64> {
    let sv = theta.singular_values();
    let max = sv.max();
    let min = sv.min();
    if max > 0.0 && min / max > 1e-12 {
        if let Some(inv) = theta.clone().try_inverse() {
            return inv;
        }
    }
    theta
        .clone()
        .pseudo_inverse(1e-12 * max.max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| DMatrix::zeros(theta.ncols(), theta.nrows()))
}

/// Scores `map(X)·β`, optionally right-multiplied by `Θ⁻¹`; labels by argmax.
pub fn predict_eda(model: &EdaModel, x: &crate::data::Dataset, detransform: bool) -> Result<Prediction> {
    let mut scores = crate::elm::predict_scores(&model.map, &model.beta, x)?;
    if detransform {
        scores = scores * theta_inverse(&model.theta);
    }
    Ok(Prediction {
        labels: row_argmax(&scores),
        scores,
    })
}

impl EdaModel {
    pub fn predict(&self, x: &crate::data::Dataset, detransform: bool) -> Result<Prediction> {
        predict_eda(self, x, detransform)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{encode_labels, generate_shift, Dataset, SynthShiftSpec};
    use crate::eda::fixtures::{random_problem, uniform};
    use crate::linalg::max_abs;
    use crate::preclassifier::preclassify_elm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn weights(c_s: f64, c_t: f64, gamma: f64, tau: f64, lambda: f64) -> Tradeoffs {
        Tradeoffs { c_s, c_t, gamma, tau, lambda }
    }

    fn fixed_u_objective(beta: &DMatrix<f64>, theta: &DMatrix<f64>, u: &DVector<f64>, p: &EdaProblem, w: &Tradeoffs) -> f64 {
        let surrogate: f64 = beta.row_iter().zip(u.iter()).map(|(r, ui)| ui * r.norm_squared()).sum();
        surrogate + ObjectiveTerms::evaluate(beta, theta, p).weighted_losses(w)
    }

    fn random_u(l: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
        DVector::from_fn(l, |_, _| rng.random_range(0.1..2.0))
    }

    fn near_identity(c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::identity(c, c) + DMatrix::from_fn(c, c, |_, _| rng.random_range(-0.2..0.2))
    }

    #[test]
    fn objective_at_zero() {
        let f = random_problem(1, 7, 4, 5, 6, 3);
        let mut p = f.problem;
        p.phi = DMatrix::zeros(5, 3);
        let w = weights(3.0, 11.0, 2.0, 5.0, 7.0);
        let j = eda_objective(&DMatrix::zeros(6, 3), &DMatrix::identity(3, 3), &p, &w);
        assert_eq!(j, 3.0 * 7.0 * 3.0 + 11.0 * 4.0 * 3.0);
    }

    #[test]
    fn l21_is_twice_the_reweighted_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let beta = DMatrix::from_fn(9, 4, |_, _| rng.random_range(-3.0..3.0));
        let u = update_u(&beta, 0.0);
        let trace: f64 = beta.row_iter().zip(u.iter()).map(|(r, ui)| ui * r.norm_squared()).sum();
        let l21 = l21_norm(&beta);
        assert!((2.0 * trace - l21).abs() <= 1e-12 * l21);
    }

    #[test]
    fn objective_matches_scalar_loops() {
        let f = random_problem(9, 2, 2, 1, 4, 3);
        let p = &f.problem;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let beta = DMatrix::from_fn(4, 3, |_, _| rng.random_range(-1.0..1.0));
        let theta = near_identity(3, &mut rng);
        let w = weights(2.0, 3.0, 0.5, 4.0, 1.5);

        let (l, c) = (4, 3);
        let out = |h: &DMatrix<f64>, i: usize, j: usize| (0..l).map(|k| h[(i, k)] * beta[(k, j)]).sum::<f64>();
        let mut l21 = 0.0;
        for i in 0..l {
            l21 += (0..c).map(|j| beta[(i, j)].powi(2)).sum::<f64>().sqrt();
        }
        let mut src = 0.0;
        for i in 0..p.h_s.nrows() {
            for j in 0..c {
                src += (out(&p.h_s, i, j) - p.t_s[(i, j)]).powi(2);
            }
        }
        let mut tgt = 0.0;
        for i in 0..p.h_t.nrows() {
            for j in 0..c {
                let transformed: f64 = (0..c).map(|k| p.t_t[(i, k)] * theta[(k, j)]).sum();
                tgt += (out(&p.h_t, i, j) - transformed).powi(2);
            }
        }
        let mut drift = 0.0;
        for i in 0..c {
            for j in 0..c {
                drift += (theta[(i, j)] - if i == j { 1.0 } else { 0.0 }).powi(2);
            }
        }
        let mut fid = 0.0;
        for i in 0..p.h_tu.nrows() {
            for j in 0..c {
                fid += (out(&p.h_tu, i, j) - p.phi[(i, j)]).powi(2);
            }
        }
        // Outputs of all target rows, then ½ Σ A_ij ‖f_i − f_j‖².
        let h_all = vstack(&p.h_t, &p.h_tu);
        let a = f.graph.adjacency();
        let mut smooth = 0.0;
        for i in 0..h_all.nrows() {
            for k in 0..h_all.nrows() {
                let d: f64 = (0..c).map(|j| (out(&h_all, i, j) - out(&h_all, k, j)).powi(2)).sum();
                smooth += 0.5 * a[(i, k)] * d;
            }
        }
        let naive = l21 + w.c_s * src + w.c_t * tgt + w.gamma * drift + w.tau * fid + w.lambda * smooth;
        let j = eda_objective(&beta, &theta, p, &w);
        assert!((j - naive).abs() <= 1e-10 * naive.abs(), "{j} vs {naive}");
    }

    #[test]
    fn beta_with_other_terms_off_is_ridge() {
        let f = random_problem(2, 8, 3, 4, 5, 3);
        let p = &f.problem;
        let w = weights(7.0, 0.0, 1.0, 0.0, 0.0);
        let beta = update_beta(&DVector::from_element(5, 1.0), &DMatrix::identity(3, 3), p, &w).unwrap();
        let a = DMatrix::identity(5, 5) + p.h_s.tr_mul(&p.h_s) * 7.0;
        let ridge = a.lu().solve(&(p.h_s.tr_mul(&p.t_s) * 7.0)).unwrap();
        assert!(max_abs(&(beta - ridge)) < 1e-10);
    }

    #[test]
    fn updates_are_stationary() {
        for seed in 0..10 {
            let f = random_problem(seed, 10, 6, 8, 7, 3);
            let p = &f.problem;
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 50);
            let u = random_u(7, &mut rng);
            let theta = near_identity(3, &mut rng);
            let w = weights(10.0, 100.0, 1.0, 10.0, 1.0);
            let beta = update_beta(&u, &theta, p, &w).unwrap();
            assert!(max_abs(&beta_gradient(&beta, &theta, &u, p, &w)) < 1e-8);
            let theta = update_theta(&beta, p, &w).unwrap();
            assert!(max_abs(&theta_gradient(&beta, &theta, p, &w)) < 1e-8);
        }
    }

    #[test]
    fn beta_matches_gradient_descent() {
        let f = random_problem(3, 6, 3, 3, 4, 3);
        let p = &f.problem;
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let u = random_u(4, &mut rng);
        let theta = near_identity(3, &mut rng);
        let w = weights(1.0, 1.0, 1.0, 1.0, 1.0);
        let mut beta = DMatrix::zeros(4, 3);
        for _ in 0..200_000 {
            beta -= beta_gradient(&beta, &theta, &u, p, &w) * 1e-3;
        }
        let closed = update_beta(&u, &theta, p, &w).unwrap();
        assert!(max_abs(&(closed - beta)) < 1e-4);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let step = 1e-5;
        for seed in 0..10 {
            let f = random_problem(100 + seed, 3, 2, 3, 5, 3);
            let p = &f.problem;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_u(5, &mut rng);
            let theta = near_identity(3, &mut rng);
            let beta = DMatrix::from_fn(5, 3, |_, _| rng.random_range(-1.0..1.0));
            let w = weights(2.0, 3.0, 1.5, 0.7, 1.1);

            let analytic = beta_gradient(&beta, &theta, &u, p, &w);
            let fd = DMatrix::from_fn(5, 3, |i, j| {
                let (mut up, mut down) = (beta.clone(), beta.clone());
                up[(i, j)] += step;
                down[(i, j)] -= step;
                (fixed_u_objective(&up, &theta, &u, p, &w) - fixed_u_objective(&down, &theta, &u, p, &w)) / (2.0 * step)
            });
            assert!((&fd - &analytic).norm() < 1e-5 * analytic.norm());

            let analytic = theta_gradient(&beta, &theta, p, &w);
            let fd = DMatrix::from_fn(3, 3, |i, j| {
                let (mut up, mut down) = (theta.clone(), theta.clone());
                up[(i, j)] += step;
                down[(i, j)] -= step;
                (eda_objective(&beta, &up, p, &w) - eda_objective(&beta, &down, p, &w)) / (2.0 * step)
            });
            assert!((&fd - &analytic).norm() < 1e-5 * analytic.norm());
        }
    }

    #[test]
    fn theta_is_identity_on_exact_fit() {
        let f = random_problem(5, 4, 3, 2, 6, 3);
        let p = &f.problem;
        // L > N_T, so H_Tβ = T_T has an exact solution.
        let beta = p.h_t.clone().pseudo_inverse(1e-12).unwrap() * &p.t_t;
        assert!(max_abs(&(&p.h_t * &beta - &p.t_t)) < 1e-10);
        let theta = update_theta(&beta, p, &weights(1.0, 50.0, 0.3, 1.0, 1.0)).unwrap();
        assert!(max_abs(&(theta - DMatrix::identity(3, 3))) < 1e-10);
    }

    #[test]
    fn large_gamma_pins_theta() {
        let f = random_problem(6, 4, 5, 2, 6, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let beta = DMatrix::from_fn(6, 3, |_, _| rng.random_range(-2.0..2.0));
        let theta = update_theta(&beta, &f.problem, &weights(1.0, 1000.0, 1e8, 1.0, 1.0)).unwrap();
        assert!(max_abs(&(theta - DMatrix::identity(3, 3))) < 1e-4);
    }

    #[test]
    fn u_update_cases() {
        let mut beta = DMatrix::zeros(3, 2);
        beta[(1, 0)] = 0.3;
        beta[(1, 1)] = 0.4;
        beta[(2, 0)] = -2.0;
        let u = update_u(&beta, 1e-6);
        assert_eq!(u[0], 1.0 / 2e-6);
        assert!((u[1] - 1.0 / (2.0 * 0.500001)).abs() < 1e-12);
        let u_small = update_u(&beta, 1e-12);
        let u_double = update_u(&(&beta * 2.0), 1e-12);
        for i in 1..3 {
            assert!((u_double[i] / u_small[i] - 0.5).abs() < 1e-5);
        }
    }

    #[test]
    fn reweighting_inequality_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for _ in 0..10_000 {
            let c = rng.random_range(1..6);
            let a = DVector::from_fn(c, |_, _| rng.random_range(-5.0..5.0));
            let b = DVector::from_fn(c, |_, _| rng.random_range(-5.0..5.0));
            let (na, nb) = (a.norm(), b.norm());
            if na == 0.0 || nb == 0.0 {
                continue;
            }
            assert!(na - na * na / (2.0 * nb) <= nb - nb * nb / (2.0 * nb));
        }
    }

    #[test]
    fn solver_descends_and_half_steps_do_not_increase() {
        let params = EdaParams { c_s: 10.0, c_t: 100.0, tau: 10.0, ..EdaParams::default() };
        let w = params.tradeoffs();
        for seed in 0..20 {
            let f = random_problem(seed, 15, 6, 12, 20, 3);
            let p = &f.problem;
            let sol = solve_eda(p, &params).unwrap();
            for pair in sol.history.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-8 * (1.0 + pair[0].abs()), "{pair:?}");
            }
            let mut u = DVector::from_element(20, 1.0);
            let mut theta = DMatrix::identity(3, 3);
            let mut beta = update_beta(&u, &theta, p, &w).unwrap();
            for _ in 0..4 {
                u = update_u(&beta, params.epsilon);
                theta = update_theta(&beta, p, &w).unwrap();
                let j0 = eda_objective(&beta, &theta, p, &w);
                let next_beta = update_beta(&u, &theta, p, &w).unwrap();
                let j1 = eda_objective(&next_beta, &theta, p, &w);
                let next_theta = update_theta(&next_beta, p, &w).unwrap();
                let j2 = eda_objective(&next_beta, &next_theta, p, &w);
                assert!(j1 <= j0 + 1e-8 * (1.0 + j0.abs()));
                assert!(j2 <= j1 + 1e-8 * (1.0 + j1.abs()));
                beta = next_beta;
            }
        }
    }

    #[test]
    fn reweighting_prunes_rows() {
        let f = random_problem(8, 10, 3, 0, 60, 3);
        let p = &f.problem;
        let tiny = |beta: &DMatrix<f64>, eps: f64| beta.row_iter().filter(|r| r.norm() < 10.0 * eps).count();
        let first = solve_eda(p, &EdaParams { c_s: 1e-2, c_t: 1e-2, tau: 0.0, lambda: 0.0, t_max: 1, ..EdaParams::default() }).unwrap();
        let fifth = solve_eda(p, &EdaParams { c_s: 1e-2, c_t: 1e-2, tau: 0.0, lambda: 0.0, t_max: 5, ..EdaParams::default() }).unwrap();
        let eps = EdaParams::default().epsilon;
        assert!(tiny(&fifth.beta, eps) > tiny(&first.beta, eps), "{} vs {}", tiny(&fifth.beta, eps), tiny(&first.beta, eps));
    }

    #[test]
    fn no_unlabeled_and_no_graph() {
        let f = random_problem(12, 9, 4, 0, 6, 3);
        let p = EdaProblem::new(
            f.problem.h_s.clone(),
            f.problem.h_t.clone(),
            DMatrix::zeros(0, 6),
            &encode_labels(&row_argmax(&f.problem.t_s), 3).unwrap(),
            &encode_labels(&row_argmax(&f.problem.t_t), 3).unwrap(),
            &PreLabelMatrix::new(DMatrix::zeros(0, 3)).unwrap(),
            &DMatrix::zeros(4, 4),
        )
        .unwrap();
        let params = EdaParams { lambda: 0.0, ..EdaParams::default() };
        let sol = solve_eda(&p, &params).unwrap();
        let w = params.tradeoffs();
        assert!(sol.history.iter().all(|j| j.is_finite()));
        assert!(max_abs(&theta_gradient(&sol.beta, &sol.theta, &p, &w)) < 1e-8);
    }

    fn shifted_bundle(seed: u64) -> DomainBundle {
        generate_shift(&SynthShiftSpec { n_source: 60, n_target_unlabeled: 30, n_target_test: 30, ..SynthShiftSpec::default() }.with_seed(seed)).unwrap()
    }

    #[test]
    fn fit_records_history_and_descends() {
        let bundle = shifted_bundle(1);
        let params = EdaParams { hidden: 40, ..EdaParams::default() };
        let map = HiddenMap::new(40, 2, params.activation, 0).unwrap();
        let phi = preclassify_elm(&bundle, &map, 10.0).unwrap();
        let model = fit_eda(&bundle, &phi, &params).unwrap();
        assert!(!model.objective_history.is_empty() && model.objective_history.len() <= 5);
        for pair in model.objective_history.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-8 * (1.0 + pair[0].abs()));
        }
        assert_eq!(model.beta.shape(), (40, 3));
        let again = fit_eda(&bundle, &phi, &params).unwrap();
        assert_eq!(model, again);
    }

    #[test]
    fn heterogeneous_dims_rejected() {
        let mut bundle = shifted_bundle(2);
        bundle.source = Dataset::new(DMatrix::zeros(3, 4), Some(vec![0, 1, 2, 0])).unwrap();
        let phi = PreLabelMatrix::new(DMatrix::zeros(bundle.target_unlabeled.len(), 3)).unwrap();
        let err = fit_eda(&bundle, &phi, &EdaParams::default()).unwrap_err();
        assert!(matches!(err, EdaError::HeterogeneousDims { source_dim: 3, target_dim: 2 }));
    }

    fn toy_model(theta: DMatrix<f64>) -> EdaModel {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        EdaModel {
            map: HiddenMap::new(5, 2, Default::default(), 1).unwrap(),
            beta: uniform(5, 3, &mut rng),
            theta,
            u: DVector::from_element(5, 1.0),
            objective_history: vec![],
            params: EdaParams::default(),
        }
    }

    #[test]
    fn identity_theta_detransform_is_noop() {
        let model = toy_model(DMatrix::identity(3, 3));
        let x = Dataset::unlabeled(DMatrix::from_row_slice(2, 3, &[0.1, 0.5, -1.0, 0.2, 0.0, 2.0])).unwrap();
        assert_eq!(model.predict(&x, false).unwrap(), model.predict(&x, true).unwrap());
        let scaled = EdaModel { beta: &model.beta * 3.0, ..model.clone() };
        assert_eq!(scaled.predict(&x, false).unwrap().labels, model.predict(&x, false).unwrap().labels);
    }

    #[test]
    fn singular_theta_uses_pseudo_inverse() {
        let mut theta = DMatrix::identity(3, 3);
        theta[(2, 2)] = 0.0;
        let inv = theta_inverse(&theta);
        assert!(max_abs(&(&theta * &inv * &theta - &theta)) < 1e-12);
    }

    #[test]
    fn memorises_separable_training_rows() {
        let x = DMatrix::from_row_slice(2, 6, &[0.0, 0.2, 3.0, 3.2, 0.0, 0.1, 0.0, 0.1, 0.0, 0.2, 3.0, 3.1]);
        let labels = vec![0, 0, 1, 1, 2, 2];
        let target = Dataset::new(x.clone(), Some(labels.clone())).unwrap();
        let bundle = DomainBundle::new(
            Dataset::new(x * 0.5, Some(labels.clone())).unwrap(),
            target.clone(),
            Dataset::empty(2),
            None,
            3,
        )
        .unwrap();
        let phi = PreLabelMatrix::new(DMatrix::zeros(0, 3)).unwrap();
        let params = EdaParams { c_s: 1.0, c_t: 1e4, hidden: 30, lambda: 0.0, ..EdaParams::default() };
        let model = fit_eda(&bundle, &phi, &params).unwrap();
        assert_eq!(model.predict(&target, false).unwrap().labels, labels);
    }
}
