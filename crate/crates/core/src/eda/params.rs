use serde::{Deserialize, Serialize};

use crate::error::{EdaError, Result};
use crate::feature_map::Activation;
use crate::graph::EdgeWeighting;

/// Hyperparameters shared by single- and multi-view EDA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EdaParams {
    /// Weight of the source fitting loss.
    pub c_s: f64,
    /// Weight of the labeled-target fitting loss.
    pub c_t: f64,
    /// Penalty on `‖Θ − I‖²`.
    pub gamma: f64,
    /// Weight of the pre-label fidelity term on unlabeled target data.
    pub tau: f64,
    /// Weight of the manifold term.
    pub lambda: f64,
    pub t_max: usize,
    /// Floor added to row norms in the reweighting matrix.
    pub epsilon: f64,
    /// Neighbours in the target k-NN graph.
    pub k: usize,
    /// Hidden nodes `L`.
    pub hidden: usize,
    pub activation: Activation,
    pub seed: u64,
    /// View-weight exponent (multi-view only), must exceed 1.
    pub r: f64,
    /// Stop early when the relative objective change drops below this.
    pub early_exit_tol: f64,
    /// z-score inputs (fit on source ∪ labeled target) before the hidden layer.
    pub standardize: bool,
    pub graph_weighting: EdgeWeighting,
}

impl Default for EdaParams {
    fn default() -> Self {
        Self {
            c_s: 100.0,
            c_t: 1000.0,
            gamma: 1.0,
            tau: 1000.0,
            lambda: 1.0,
            t_max: 5,
            epsilon: 1e-6,
            k: 5,
            hidden: 1000,
            activation: Activation::Radbas,
            seed: 0,
            r: 2.0,
            early_exit_tol: 1e-10,
            standardize: false,
            graph_weighting: EdgeWeighting::Binary,
        }
    }
}

impl EdaParams {
    pub fn tradeoffs(&self) -> Tradeoffs {
        Tradeoffs {
            c_s: self.c_s,
            c_t: self.c_t,
            gamma: self.gamma,
            tau: self.tau,
            lambda: self.lambda,
        }
    }

    /// `C_S, C_T, γ > 0`, `τ, λ ≥ 0`, `ε > 0`, `T_max ≥ 1`, `L ≥ 1`, `r > 1`.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(EdaError::Parameter(m.to_string()));
        let pos = |v: f64| v > 0.0 && v.is_finite();
        let nonneg = |v: f64| v >= 0.0 && v.is_finite();
        if !(pos(self.c_s) && pos(self.c_t) && pos(self.gamma)) {
            return bad("C_S, C_T and gamma must be positive");
        }
        if !(nonneg(self.tau) && nonneg(self.lambda)) {
            return bad("tau and lambda must be non-negative");
        }
        if !pos(self.epsilon) {
            return bad("epsilon must be positive");
        }
        if self.t_max == 0 || self.hidden == 0 {
            return bad("t_max and hidden must be at least 1");
        }
        if !(self.r > 1.0 && self.r.is_finite()) {
            return bad("r must exceed 1");
        }
        Ok(())
    }
}

/// The five trade-off weights as they enter one view's objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tradeoffs {
    pub c_s: f64,
    pub c_t: f64,
    pub gamma: f64,
    pub tau: f64,
    pub lambda: f64,
}

impl Tradeoffs {
    /// Loss weights scaled by `α`, the manifold weight by `α^r`.
    pub fn for_view(&self, alpha: f64, r: f64) -> Tradeoffs {
        Tradeoffs {
            c_s: self.c_s * alpha,
            c_t: self.c_t * alpha,
            gamma: self.gamma * alpha,
            tau: self.tau * alpha,
            lambda: self.lambda * alpha.powf(r),
        }
    }
}
