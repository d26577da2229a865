//! Gaussian class mixtures under a rigid transform plus scaling.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(seed)`. Draws happen in a
//! fixed order: source, labeled target, unlabeled target, test target; within
//! each split class by class, each sample as `d` standard normals.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Dataset, DomainBundle};
use crate::error::{EdaError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthShiftSpec {
    pub classes: usize,
    pub dim: usize,
    /// One mean per class, each of length `dim`.
    pub means: Vec<Vec<f64>>,
    /// One `dim × dim` covariance per class (row-major nested vectors).
    pub covariances: Vec<Vec<Vec<f64>>>,
    /// Rotation of the first two coordinates, in degrees.
    pub rotation_deg: f64,
    pub translation: Vec<f64>,
    pub scale: f64,
    /// Total source samples, spread evenly over classes.
    pub n_source: usize,
    pub n_target_labeled_per_class: usize,
    pub n_target_unlabeled: usize,
    pub n_target_test: usize,
    pub seed: u64,
}

impl Default for SynthShiftSpec {
    /// Three 2-D classes on a triangle; the target is rotated by 30° and
    /// shifted by (2, 0), which moves target class 0 next to source class 1.
    fn default() -> Self {
        let cov = vec![vec![0.4, 0.1], vec![0.1, 0.4]];
        Self {
            classes: 3,
            dim: 2,
            means: vec![vec![0.0, 0.0], vec![3.0, 0.0], vec![1.5, 2.6]],
            covariances: vec![cov.clone(), cov.clone(), cov],
            rotation_deg: 30.0,
            translation: vec![2.0, 0.0],
            scale: 1.0,
            n_source: 150,
            n_target_labeled_per_class: 3,
            n_target_unlabeled: 150,
            n_target_test: 150,
            seed: 0,
        }
    }
}

impl SynthShiftSpec {
    /// Same classes with an identity transform.
    pub fn without_shift(mut self) -> Self {
        self.rotation_deg = 0.0;
        self.translation = vec![0.0; self.dim];
        self.scale = 1.0;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(EdaError::Spec(m));
        if self.classes < 2 {
            return bad("need at least 2 classes".into());
        }
        if self.dim == 0 {
            return bad("dim must be >= 1".into());
        }
        if self.means.len() != self.classes || self.covariances.len() != self.classes {
            return bad("need one mean and one covariance per class".into());
        }
        if self.means.iter().any(|m| m.len() != self.dim) {
            return bad("mean length differs from dim".into());
        }
        if self
            .covariances
            .iter()
            .any(|c| c.len() != self.dim || c.iter().any(|r| r.len() != self.dim))
        {
            return bad("covariance is not dim x dim".into());
        }
        if !(self.translation.is_empty() || self.translation.len() == self.dim) {
            return bad("translation length differs from dim".into());
        }
        if self.dim < 2 && self.rotation_deg != 0.0 {
            return bad("rotation needs dim >= 2".into());
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return bad("scale must be positive".into());
        }
        if self.n_target_labeled_per_class == 0 {
            return bad("need at least one labeled target sample per class".into());
        }
        if self.n_source == 0 || self.n_target_test == 0 {
            return bad("sample counts must be positive".into());
        }
        Ok(())
    }

    /// `x ↦ scale · R x + translation`.
    pub fn transform(&self) -> (DMatrix<f64>, DVector<f64>) {
        let mut m = DMatrix::identity(self.dim, self.dim);
        if self.dim >= 2 {
            let (s, c) = self.rotation_deg.to_radians().sin_cos();
            m[(0, 0)] = c;
            m[(0, 1)] = -s;
            m[(1, 0)] = s;
            m[(1, 1)] = c;
        }
        m *= self.scale;
        let t = if self.translation.is_empty() {
            DVector::zeros(self.dim)
        } else {
            DVector::from_column_slice(&self.translation)
        };
        (m, t)
    }
}

fn even_split(total: usize, classes: usize) -> Vec<usize> {
    (0..classes)
        .map(|k| total / classes + usize::from(k < total % classes))
        .collect()
}

struct ClassSampler {
    means: Vec<DVector<f64>>,
    factors: Vec<DMatrix<f64>>,
}

impl ClassSampler {
    fn new(spec: &SynthShiftSpec) -> Result<Self> {
        let factors = spec
            .covariances
            .iter()
            .enumerate()
            .map(|(k, rows)| {
                let cov = DMatrix::from_fn(spec.dim, spec.dim, |i, j| rows[i][j]);
                if (&cov - cov.transpose()).abs().max() > 1e-12 {
                    return Err(EdaError::Spec(format!("covariance of class {k} is not symmetric")));
                }
                cov.cholesky().map(|c| c.l()).ok_or_else(|| {
                    EdaError::Spec(format!("covariance of class {k} is not positive definite"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let means = spec.means.iter().map(|m| DVector::from_column_slice(m)).collect();
        Ok(Self { means, factors })
    }

    fn draw(&self, counts: &[usize], rng: &mut ChaCha8Rng) -> (DMatrix<f64>, Vec<usize>) {
        let dim = self.means[0].len();
        let n: usize = counts.iter().sum();
        let mut x = DMatrix::zeros(dim, n);
        let mut labels = Vec::with_capacity(n);
        let mut col = 0;
        for (k, &count) in counts.iter().enumerate() {
            for _ in 0..count {
                let z = DVector::from_fn(dim, |_, _| StandardNormal.sample(rng));
                x.set_column(col, &(&self.means[k] + &self.factors[k] * z));
                labels.push(k);
                col += 1;
            }
        }
        (x, labels)
    }
}

/// Draws a source/target bundle from `spec`. Deterministic in `spec.seed`.
pub fn generate_shift(spec: &SynthShiftSpec) -> Result<DomainBundle> {
    spec.validate()?;
    let sampler = ClassSampler::new(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (rot, shift) = spec.transform();
    let to_target = |x: DMatrix<f64>| {
        let mut y = &rot * x;
        for mut col in y.column_iter_mut() {
            col += &shift;
        }
        y
    };

    let (xs, ys) = sampler.draw(&even_split(spec.n_source, spec.classes), &mut rng);
    let (xl, yl) = sampler.draw(&vec![spec.n_target_labeled_per_class; spec.classes], &mut rng);
    let (xu, _) = sampler.draw(&even_split(spec.n_target_unlabeled, spec.classes), &mut rng);
    let (xt, yt) = sampler.draw(&even_split(spec.n_target_test, spec.classes), &mut rng);

    let target_unlabeled = if spec.n_target_unlabeled == 0 {
        Dataset::empty(spec.dim)
    } else {
        Dataset::unlabeled(to_target(xu))?
    };
    DomainBundle::new(
        Dataset::new(xs, Some(ys))?,
        Dataset::new(to_target(xl), Some(yl))?,
        target_unlabeled,
        Some(Dataset::new(to_target(xt), Some(yt))?),
        spec.classes,
    )
}

/// Two row-aligned views: view 0 is `generate_shift(spec)`, view 1 appends
/// `noise_dims` independent `N(0, noise_std²)` features to every sample.
pub fn generate_two_view(
    spec: &SynthShiftSpec,
    noise_dims: usize,
    noise_std: f64,
) -> Result<Vec<DomainBundle>> {
    let base = generate_shift(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5EED_0F_0015E);
    let mut noisy = |ds: &Dataset| -> Result<Dataset> {
        let extra = DMatrix::from_fn(noise_dims, ds.len(), |_, _| {
            noise_std * Distribution::<f64>::sample(&StandardNormal, &mut rng)
        });
        ds.with_extra_features(&extra)
    };
    let second = DomainBundle::new(
        noisy(&base.source)?,
        noisy(&base.target_labeled)?,
        noisy(&base.target_unlabeled)?,
        base.target_test.as_ref().map(&mut noisy).transpose()?,
        base.classes,
    )?;
    Ok(vec![base, second])
}
