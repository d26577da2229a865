//! Multi-view EDA: one `(β_v, Θ_v, U_v)` per view plus simplex view weights.
//!
//! ```text
//! J = Σ_v ‖β_v‖₂,₁ + Σ_v α_v (C_S‖H_{S,v}β_v − T_S‖² + C_T‖H_{T,v}β_v − T_TΘ_v‖²
//!                           + γ‖Θ_v − I‖² + τ‖H_{Tu,v}β_v − Φ_v‖²)
//!       + λ Σ_v α_v^r tr(β_vᵀH_vᵀL_vH_vβ_v)
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::params::{EdaParams, Tradeoffs};
use super::single::{
    assemble_problem, build_graph, build_map, converged, fit_eda_seeded, theta_inverse, update_beta,
    update_theta, update_u, EdaModel, EdaProblem, ObjectiveTerms, Prediction,
};
use crate::data::{Dataset, DomainBundle};
use crate::error::{EdaError, Result};
use crate::feature_map::{view_seed, HiddenMap};
use crate::linalg::row_argmax;
use crate::preclassifier::PreLabelMatrix;

/// Views whose smoothness falls below this share the whole simplex mass.
pub const SMOOTHNESS_FLOOR: f64 = 1e-12;

/// Mutable iterate of the multi-view solver.
#[derive(Debug, Clone, PartialEq)]
pub struct MvState {
    pub betas: Vec<DMatrix<f64>>,
    pub thetas: Vec<DMatrix<f64>>,
    pub us: Vec<DVector<f64>>,
    pub alpha: Vec<f64>,
}

impl MvState {
    /// `U_v = I`, `Θ_v = I`, `β_v = 0`, `α_v = 1/V`.
    pub fn initial(views: &[EdaProblem]) -> Self {
        let v = views.len();
        Self {
            betas: views.iter().map(|p| DMatrix::zeros(p.hidden(), p.classes())).collect(),
            thetas: views.iter().map(|p| DMatrix::identity(p.classes(), p.classes())).collect(),
            us: views.iter().map(|p| DVector::from_element(p.hidden(), 1.0)).collect(),
            alpha: vec![1.0 / v as f64; v],
        }
    }
}

fn check_views(views: &[EdaProblem]) -> Result<()> {
    let first = views
        .first()
        .ok_or_else(|| EdaError::Shape("need at least one view".into()))?;
    for (i, p) in views.iter().enumerate().skip(1) {
        if p.t_source() != first.t_source()
            || p.t_target() != first.t_target()
            || p.h_unlabeled().nrows() != first.h_unlabeled().nrows()
        {
            return Err(EdaError::Shape(format!("view {i} is not row-aligned with view 0")));
        }
    }
    Ok(())
}

/// The multi-view objective at `state`.
pub fn mv_objective(state: &MvState, views: &[EdaProblem], base: &Tradeoffs, r: f64) -> Result<f64> {
    check_views(views)?;
    if state.betas.len() != views.len() || state.thetas.len() != views.len() || state.alpha.len() != views.len() {
        return Err(EdaError::Shape("state and views disagree on V".into()));
    }
    Ok(views
        .iter()
        .enumerate()
        .map(|(v, p)| {
            ObjectiveTerms::evaluate(&state.betas[v], &state.thetas[v], p)
                .total(&base.for_view(state.alpha[v], r))
        })
        .sum())
}

/// `β_v` with `U_v`, `Θ_v` and `α` fixed: the single-view system with the
/// loss weights scaled by `α_v` and the manifold weight by `α_v^r`.
pub fn update_beta_view(
    v: usize,
    state: &MvState,
    views: &[EdaProblem],
    base: &Tradeoffs,
    r: f64,
) -> Result<DMatrix<f64>> {
    update_beta(&state.us[v], &state.thetas[v], &views[v], &base.for_view(state.alpha[v], r))
}

/// `Θ_v = (C_T α_v T_TᵀT_T + γ α_v I)⁻¹ (C_T α_v T_TᵀH_{T,v}β_v + γ α_v I)`.
pub fn update_theta_view(
    v: usize,
    beta_v: &DMatrix<f64>,
    alpha_v: f64,
    views: &[EdaProblem],
    base: &Tradeoffs,
    r: f64,
) -> Result<DMatrix<f64>> {
    update_theta(beta_v, &views[v], &base.for_view(alpha_v, r))
}

/// `α_v ∝ (1/q_v)^{1/(r−1)}` normalised onto the simplex.
///
/// Views with `q_v < SMOOTHNESS_FLOOR` split the mass evenly among
/// themselves; if every view is below the floor the weights are uniform.
pub fn update_alpha(q: &[f64], r: f64) -> Result<Vec<f64>> {
    if q.is_empty() {
        return Err(EdaError::Shape("no views".into()));
    }
    if !(r > 1.0) {
        return Err(EdaError::Parameter(format!("r must exceed 1, got {r}")));
    }
    if q.iter().any(|&v| !v.is_finite() || v < -SMOOTHNESS_FLOOR) {
        return Err(EdaError::Numeric("smoothness terms must be finite and non-negative".into()));
    }
    let flat: Vec<usize> = (0..q.len()).filter(|&i| q[i] < SMOOTHNESS_FLOOR).collect();
    if flat.len() == q.len() {
        log::warn!("every view has zero smoothness; using uniform view weights");
        return Ok(vec![1.0 / q.len() as f64; q.len()]);
    }
    if !flat.is_empty() {
        let share = 1.0 / flat.len() as f64;
        return Ok((0..q.len()).map(|i| if q[i] < SMOOTHNESS_FLOOR { share } else { 0.0 }).collect());
    }
    let e = 1.0 / (r - 1.0);
    // Factor out the smallest q so the powers stay in range.
    let q_min = q.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = q.iter().map(|&v| (q_min / v).powf(e)).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / total).collect())
}

/// Weighted objective restricted to the view weights, for a fixed
/// `(β_v, Θ_v)`: `Σ_v α_v ℓ_v + λ Σ_v α_v^r q_v`.
fn alpha_objective(alpha: &[f64], losses: &[f64], q: &[f64], lambda: f64, r: f64) -> f64 {
    alpha
        .iter()
        .zip(losses)
        .zip(q)
        .map(|((a, l), qv)| a * l + lambda * a.powf(r) * qv)
        .sum()
}

/// Closed-form α proposal, accepted whole when it does not raise the
/// objective and otherwise backtracked toward the previous weights.
fn step_alpha(
    prev: &[f64],
    losses: &[f64],
    q: &[f64],
    lambda: f64,
    r: f64,
) -> Result<Vec<f64>> {
    let proposal = update_alpha(q, r)?;
    let f_prev = alpha_objective(prev, losses, q, lambda, r);
    let mut step = 1.0;
    for _ in 0..60 {
        let cand: Vec<f64> = prev
            .iter()
            .zip(&proposal)
            .map(|(a, b)| a + step * (b - a))
            .collect();
        if alpha_objective(&cand, losses, q, lambda, r) <= f_prev {
            return Ok(renormalise(cand));
        }
        step *= 0.5;
    }
    Ok(prev.to_vec())
}

fn renormalise(mut alpha: Vec<f64>) -> Vec<f64> {
    let total: f64 = alpha.iter().sum();
    for a in &mut alpha {
        *a /= total;
    }
    alpha
}

/// How the view weights move after the per-view updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaRule {
    /// The closed-form smoothness-only rule, taken as a proposal and
    /// backtracked toward the previous α whenever it would raise `J`.
    #[default]
    Guarded,
    /// The closed-form rule taken verbatim.
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MvSolution {
    pub state: MvState,
    pub history: Vec<f64>,
    pub alpha_history: Vec<Vec<f64>>,
}

/// Per-view β, Θ, then α, then U, for up to `t_max` iterations.
pub fn solve_mveda(views: &[EdaProblem], params: &EdaParams, rule: AlphaRule) -> Result<MvSolution> {
    check_views(views)?;
    let base = params.tradeoffs();
    let r = params.r;
    let mut state = MvState::initial(views);
    let mut history = Vec::with_capacity(params.t_max);
    let mut alpha_history = Vec::with_capacity(params.t_max);
    for _ in 0..params.t_max {
        for v in 0..views.len() {
            let beta = update_beta_view(v, &state, views, &base, r)?;
            let theta = update_theta_view(v, &beta, state.alpha[v], views, &base, r)?;
            state.betas[v] = beta;
            state.thetas[v] = theta;
        }
        let terms: Vec<ObjectiveTerms> = views
            .iter()
            .enumerate()
            .map(|(v, p)| ObjectiveTerms::evaluate(&state.betas[v], &state.thetas[v], p))
            .collect();
        let q: Vec<f64> = terms.iter().map(|t| t.smoothness.max(0.0)).collect();
        state.alpha = match rule {
            AlphaRule::ClosedForm => update_alpha(&q, r)?,
            AlphaRule::Guarded => {
                let unit = Tradeoffs { lambda: 0.0, ..base };
                let losses: Vec<f64> = terms.iter().map(|t| t.weighted_losses(&unit)).collect();
                step_alpha(&state.alpha, &losses, &q, base.lambda, r)?
            }
        };
        for v in 0..views.len() {
            state.us[v] = update_u(&state.betas[v], params.epsilon);
        }
        let j = mv_objective(&state, views, &base, r)?;
        let stop = history.last().is_some_and(|&prev| converged(prev, j, params.early_exit_tol));
        history.push(j);
        alpha_history.push(state.alpha.clone());
        if stop {
            break;
        }
    }
    Ok(MvSolution {
        state,
        history,
        alpha_history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewModel {
    pub map: HiddenMap,
    #[serde(with = "crate::serde_matrix::matrix")]
    pub beta: DMatrix<f64>,
    #[serde(with = "crate::serde_matrix::matrix")]
    pub theta: DMatrix<f64>,
    #[serde(with = "crate::serde_matrix::vector")]
    pub u: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MvEdaModel {
    pub views: Vec<ViewModel>,
    pub alpha: Vec<f64>,
    pub objective_history: Vec<f64>,
    pub alpha_history: Vec<Vec<f64>>,
    pub params: EdaParams,
}

impl From<EdaModel> for MvEdaModel {
    fn from(m: EdaModel) -> Self {
        Self {
            views: vec![ViewModel {
                map: m.map,
                beta: m.beta,
                theta: m.theta,
                u: m.u,
            }],
            alpha: vec![1.0],
            alpha_history: vec![vec![1.0]; m.objective_history.len()],
            objective_history: m.objective_history,
            params: m.params,
        }
    }
}

/// Fits one model per view; a single view runs the single-view solver.
pub fn fit_mveda(
    bundles: &[DomainBundle],
    prelabels: &[PreLabelMatrix],
    params: &EdaParams,
    rule: AlphaRule,
) -> Result<MvEdaModel> {
    params.validate()?;
    if bundles.is_empty() || bundles.len() != prelabels.len() {
        return Err(EdaError::Shape(format!(
            "{} views but {} pre-label matrices",
            bundles.len(),
            prelabels.len()
        )));
    }
    if bundles.len() == 1 {
        return Ok(fit_eda_seeded(&bundles[0], &prelabels[0], params, view_seed(params.seed, 0))?.into());
    }
    let first = &bundles[0];
    for (i, b) in bundles.iter().enumerate() {
        let aligned = b.classes == first.classes
            && b.source.labels() == first.source.labels()
            && b.target_labeled.labels() == first.target_labeled.labels()
            && b.target_unlabeled.len() == first.target_unlabeled.len();
        if !aligned {
            return Err(EdaError::Shape(format!("view {i} is not row-aligned with view 0")));
        }
        if b.source.dim() != b.target_labeled.dim() {
            return Err(EdaError::HeterogeneousDims {
                source_dim: b.source.dim(),
                target_dim: b.target_labeled.dim(),
            });
        }
    }
    let mut maps = Vec::with_capacity(bundles.len());
    let mut problems = Vec::with_capacity(bundles.len());
    for (v, (b, phi)) in bundles.iter().zip(prelabels).enumerate() {
        let map = build_map(b, params, view_seed(params.seed, v))?;
        let graph = build_graph(b, params)?;
        problems.push(assemble_problem(b, phi, &map, &graph)?);
        maps.push(map);
    }
    let sol = solve_mveda(&problems, params, rule)?;
    let MvState { betas, thetas, us, alpha } = sol.state;
    let views = maps
        .into_iter()
        .zip(betas)
        .zip(thetas)
        .zip(us)
        .map(|(((map, beta), theta), u)| ViewModel { map, beta, theta, u })
        .collect();
    Ok(MvEdaModel {
        views,
        alpha,
        objective_history: sol.history,
        alpha_history: sol.alpha_history,
        params: params.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MvPrediction {
    pub fused: Prediction,
    pub per_view: Vec<DMatrix<f64>>,
}

/// Fused scores `Σ_v α_v · map_v(X_v)·β_v`, labels by argmax.
pub fn predict_mveda(model: &MvEdaModel, xs: &[Dataset], detransform: bool) -> Result<MvPrediction> {
    if xs.len() != model.views.len() {
        return Err(EdaError::Shape(format!(
            "model has {} views, got {} inputs",
            model.views.len(),
            xs.len()
        )));
    }
    let per_view = model
        .views
        .iter()
        .zip(xs)
        .map(|(view, x)| {
            let s = crate::elm::predict_scores(&view.map, &view.beta, x)?;
            Ok(if detransform { s * theta_inverse(&view.theta) } else { s })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = per_view[0].nrows();
    if per_view.iter().any(|s| s.nrows() != n) {
        return Err(EdaError::Shape("views disagree on sample count".into()));
    }
    let mut fused = DMatrix::zeros(n, per_view[0].ncols());
    for (a, s) in model.alpha.iter().zip(&per_view) {
        fused += s * *a;
    }
    Ok(MvPrediction {
        fused: Prediction {
            labels: row_argmax(&fused),
            scores: fused,
        },
        per_view,
    })
}
