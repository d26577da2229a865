//! Extreme domain adaptation solvers.

mod multiview;
mod params;
#[cfg(test)]
mod fixtures;
pub(crate) mod single;

pub use multiview::{
    fit_mveda, mv_objective, predict_mveda, solve_mveda, update_alpha, update_beta_view,
    update_theta_view, AlphaRule, MvEdaModel, MvPrediction, MvSolution, MvState, ViewModel,
    SMOOTHNESS_FLOOR,
};
pub use params::{EdaParams, Tradeoffs};
pub use single::{
    beta_gradient, build_map, eda_objective, fit_eda, predict_eda, solve_eda, theta_gradient, theta_inverse,
    update_beta, update_theta, update_u, EdaModel, EdaProblem, EdaSolution, ObjectiveTerms,
    Prediction,
};
