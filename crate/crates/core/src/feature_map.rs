//! Frozen random hidden layer `H = act(W·X + B)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{EdaError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// `exp(−z²)`
    #[default]
    Radbas,
    /// `1 / (1 + exp(−z))`
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Radbas => (-z * z).exp(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = EdaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "radbas" => Ok(Activation::Radbas),
            "sigmoid" | "sig" => Ok(Activation::Sigmoid),
            other => Err(EdaError::Parameter(format!("unknown activation `{other}`"))),
        }
    }
}

/// Per-feature z-scoring applied before the hidden layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    #[serde(with = "crate::serde_matrix::vector")]
    pub mean: DVector<f64>,
    #[serde(with = "crate::serde_matrix::vector")]
    pub std: DVector<f64>,
}

impl Standardizer {
    /// Fits on the columns of `x`. Constant features keep unit scale.
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let n = x.ncols().max(1) as f64;
        let mean = x.column_mean();
        let std = DVector::from_fn(x.nrows(), |i, _| {
            let var = x.row(i).iter().map(|v| (v - mean[i]).powi(2)).sum::<f64>() / n;
            if var > 1e-24 {
                var.sqrt()
            } else {
                1.0
            }
        });
        Self { mean, std }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - self.mean[i]) / self.std[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenMap {
    /// `L × d`, entries uniform on `[0, 1)`.
    #[serde(with = "crate::serde_matrix::matrix")]
    weights: DMatrix<f64>,
    #[serde(with = "crate::serde_matrix::vector")]
    biases: DVector<f64>,
    activation: Activation,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    standardizer: Option<Standardizer>,
}

impl HiddenMap {
    /// Draws `W` (row by row) then `B` from `ChaCha8Rng::seed_from_u64(seed)`.
    pub fn new(hidden: usize, dim: usize, activation: Activation, seed: u64) -> Result<Self> {
        if hidden == 0 || dim == 0 {
            return Err(EdaError::Parameter(format!(
                "hidden map needs L >= 1 and d >= 1 (got L = {hidden}, d = {dim})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = DMatrix::from_row_iterator(
            hidden,
            dim,
            (0..hidden * dim).map(|_| rng.random::<f64>()),
        );
        let biases = DVector::from_iterator(hidden, (0..hidden).map(|_| rng.random::<f64>()));
        Ok(Self {
            weights,
            biases,
            activation,
            seed,
            standardizer: None,
        })
    }

    pub fn from_parts(
        weights: DMatrix<f64>,
        biases: DVector<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.nrows() != biases.len() || weights.nrows() == 0 || weights.ncols() == 0 {
            return Err(EdaError::Shape(format!(
                "weights {}x{} incompatible with {} biases",
                weights.nrows(),
                weights.ncols(),
                biases.len()
            )));
        }
        Ok(Self {
            weights,
            biases,
            activation,
            seed: 0,
            standardizer: None,
        })
    }

    pub fn with_standardizer(mut self, s: Standardizer) -> Result<Self> {
        if s.mean.len() != self.dim() {
            return Err(EdaError::Dimension {
                expected: self.dim(),
                actual: s.mean.len(),
            });
        }
        self.standardizer = Some(s);
        Ok(self)
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn biases(&self) -> &DVector<f64> {
        &self.biases
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn standardizer(&self) -> Option<&Standardizer> {
        self.standardizer.as_ref()
    }

    pub fn hidden(&self) -> usize {
        self.weights.nrows()
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    /// Row `i` of the result is `act(W·x_i + B)ᵀ`; output is `N × L`.
    pub fn map_features(&self, x: &Dataset) -> Result<DMatrix<f64>> {
        self.map_matrix(x.features())
    }

    pub fn map_matrix(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.dim() {
            return Err(EdaError::Dimension {
                expected: self.dim(),
                actual: x.nrows(),
            });
        }
        let scaled;
        let x = match &self.standardizer {
            Some(s) => {
                scaled = s.apply(x);
                &scaled
            }
            None => x,
        };
        // (W X)ᵀ = Xᵀ Wᵀ, computed directly in row-per-sample layout.
        let mut h = x.tr_mul(&self.weights.transpose());
        let act = self.activation;
        for (j, mut col) in h.column_iter_mut().enumerate() {
            let b = self.biases[j];
            col.apply(|z| *z = act.apply(*z + b));
        }
        Ok(h)
    }
}

/// Seed for view `v` of a multi-view model. View 0 keeps the base seed.
pub fn view_seed(seed: u64, view: usize) -> u64 {
    seed.wrapping_add((view as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}
