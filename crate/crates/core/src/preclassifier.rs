//! Soft labels `Φ` for the unlabeled target split.
//!
//! Anything implementing [`PreClassifier`] can feed the EDA fidelity term.
//! Pre-classifiers only ever see `source ∪ target_labeled` labels; the
//! unlabeled split carries none.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{encode_labels, load_features, DomainBundle};
use crate::elm::{fit_elm, predict_scores};
use crate::error::{EdaError, Result};
use crate::feature_map::HiddenMap;
use crate::linalg::spd_solve;

/// `N_Tu × c` soft scores.
#[derive(Debug, Clone, PartialEq)]
pub struct PreLabelMatrix {
    scores: DMatrix<f64>,
}

impl PreLabelMatrix {
    pub fn new(scores: DMatrix<f64>) -> Result<Self> {
        if !scores.iter().all(|v| v.is_finite()) {
            return Err(EdaError::Numeric("pre-labels contain non-finite scores".into()));
        }
        Ok(Self { scores })
    }

    pub fn scores(&self) -> &DMatrix<f64> {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.nrows() == 0
    }

    pub fn classes(&self) -> usize {
        self.scores.ncols()
    }

    /// Checks the shape against a bundle's unlabeled split.
    pub fn check_for(&self, bundle: &DomainBundle) -> Result<()> {
        if self.len() != bundle.target_unlabeled.len() || self.classes() != bundle.classes {
            return Err(EdaError::Shape(format!(
                "pre-labels are {}x{}, expected {}x{}",
                self.len(),
                self.classes(),
                bundle.target_unlabeled.len(),
                bundle.classes
            )));
        }
        Ok(())
    }

    /// Reads `N_Tu` rows of `c` comma-separated scores.
    pub fn from_csv(path: &Path) -> Result<Self> {
        // load_features transposes to column-per-row; undo it.
        Self::new(load_features(path)?.transpose())
    }
}

pub trait PreClassifier {
    fn prelabels(&self, bundle: &DomainBundle) -> Result<PreLabelMatrix>;
}

/// Ridge ELM on `source ∪ target_labeled`, evaluated on the unlabeled split.
pub fn preclassify_elm(bundle: &DomainBundle, map: &HiddenMap, c: f64) -> Result<PreLabelMatrix> {
    let train = bundle.labeled_union()?;
    let t = encode_labels(train.require_labels("training data")?, bundle.classes)?;
    if bundle.target_unlabeled.is_empty() {
        return PreLabelMatrix::new(DMatrix::zeros(0, bundle.classes));
    }
    let beta = fit_elm(&map.map_features(&train)?, &t, c)?;
    PreLabelMatrix::new(predict_scores(map, &beta, &bundle.target_unlabeled)?)
}

#[derive(Debug, Clone)]
pub struct ElmPreClassifier {
    pub map: HiddenMap,
    pub c: f64,
}

impl PreClassifier for ElmPreClassifier {
    fn prelabels(&self, bundle: &DomainBundle) -> Result<PreLabelMatrix> {
        preclassify_elm(bundle, &self.map, self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// `exp(−√σ·D)`
    LaplacianDist,
    /// `1 / (√σ·D + 1)`
    InverseDist,
    /// `exp(−D / (2σ²))`
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// `None` selects `σ = 1 / mean squared training distance`.
    pub sigma: Option<f64>,
}

impl KernelSpec {
    pub fn auto(kind: KernelKind) -> Self {
        Self { kind, sigma: None }
    }

    /// Kernel value for a squared distance `d`.
    pub fn eval(&self, sigma: f64, d: f64) -> f64 {
        match self.kind {
            KernelKind::LaplacianDist => (-sigma.sqrt() * d).exp(),
            KernelKind::InverseDist => 1.0 / (sigma.sqrt() * d + 1.0),
            KernelKind::Rbf => (-d / (2.0 * sigma * sigma)).exp(),
        }
    }
}

/// Squared Euclidean distances between the columns of `a` and of `b`.
pub fn squared_distance_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.ncols(), b.ncols(), |i, j| {
        (a.column(i) - b.column(j)).norm_squared()
    })
}

/// `σ = 1 / A`, `A` the mean squared distance over distinct training pairs.
pub fn auto_sigma(train_dist: &DMatrix<f64>) -> Result<f64> {
    let n = train_dist.nrows();
    if n < 2 {
        return Err(EdaError::Parameter("automatic σ needs at least two training points".into()));
    }
    let mean = train_dist.sum() / (n * (n - 1)) as f64;
    if !(mean > 0.0) {
        return Err(EdaError::Parameter("all training points coincide; set σ explicitly".into()));
    }
    Ok(1.0 / mean)
}

/// Kernel ridge regression on precomputed squared distances.
///
/// `train_dist` is `n × n`, `test_dist` is `m × n`; returns `m × c` scores.
pub fn kernel_ridge_scores(
    spec: &KernelSpec,
    train_dist: &DMatrix<f64>,
    test_dist: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    ridge: f64,
) -> Result<DMatrix<f64>> {
    if !(ridge > 0.0) {
        return Err(EdaError::Parameter("ridge must be positive".into()));
    }
    if train_dist.nrows() != targets.nrows() || test_dist.ncols() != train_dist.nrows() {
        return Err(EdaError::Shape("distance matrices do not match the training set".into()));
    }
    let sigma = match spec.sigma {
        Some(s) if s > 0.0 => s,
        Some(s) => return Err(EdaError::Parameter(format!("σ must be positive, got {s}"))),
        None => auto_sigma(train_dist)?,
    };
    let n = train_dist.nrows();
    let k = train_dist.map(|d| spec.eval(sigma, d)) + DMatrix::identity(n, n) * ridge;
    let coef = spd_solve(&k, targets, 1e-8)?;
    Ok(test_dist.map(|d| spec.eval(sigma, d)) * coef)
}

/// Kernel ridge regression on `source ∪ target_labeled` against ±1 targets.
pub fn preclassify_kernel(
    bundle: &DomainBundle,
    spec: &KernelSpec,
    ridge: f64,
) -> Result<PreLabelMatrix> {
    let train = bundle.labeled_union()?;
    let t = encode_labels(train.require_labels("training data")?, bundle.classes)?;
    let train_dist = squared_distance_matrix(train.features(), train.features());
    let test_dist = squared_distance_matrix(bundle.target_unlabeled.features(), train.features());
    PreLabelMatrix::new(kernel_ridge_scores(spec, &train_dist, &test_dist, t.values(), ridge)?)
}

#[derive(Debug, Clone)]
pub struct KernelPreClassifier {
    pub spec: KernelSpec,
    pub ridge: f64,
}

impl PreClassifier for KernelPreClassifier {
    fn prelabels(&self, bundle: &DomainBundle) -> Result<PreLabelMatrix> {
        preclassify_kernel(bundle, &self.spec, self.ridge)
    }
}

/// Elementwise mean of several pre-label matrices.
pub fn average_prelabels(items: &[PreLabelMatrix]) -> Result<PreLabelMatrix> {
    let first = items
        .first()
        .ok_or_else(|| EdaError::Shape("nothing to average".into()))?;
    let shape = first.scores.shape();
    let mut sum = DMatrix::zeros(shape.0, shape.1);
    for p in items {
        if p.scores.shape() != shape {
            return Err(EdaError::Shape(format!(
                "cannot average {:?} with {:?}",
                p.scores.shape(),
                shape
            )));
        }
        sum += &p.scores;
    }
    PreLabelMatrix::new(sum / items.len() as f64)
}

/// Averages the outputs of several pre-classifiers.
pub struct AveragedPreClassifier(pub Vec<Box<dyn PreClassifier + Send + Sync>>);

impl PreClassifier for AveragedPreClassifier {
    fn prelabels(&self, bundle: &DomainBundle) -> Result<PreLabelMatrix> {
        let parts = self
            .0
            .iter()
            .map(|p| p.prelabels(bundle))
            .collect::<Result<Vec<_>>>()?;
        average_prelabels(&parts)
    }
}

/// Scores produced elsewhere and imported from CSV.
#[derive(Debug, Clone)]
pub struct ImportedPreLabels(pub PreLabelMatrix);

impl PreClassifier for ImportedPreLabels {
    fn prelabels(&self, bundle: &DomainBundle) -> Result<PreLabelMatrix> {
        self.0.check_for(bundle)?;
        Ok(self.0.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_shift, Dataset, SynthShiftSpec};
    use crate::feature_map::Activation;
    use crate::linalg::{max_abs, row_argmax};

    fn tiny_bundle(unlabeled: &[Vec<f64>]) -> DomainBundle {
        let src = Dataset::from_rows(&[vec![0.0, 0.0], vec![4.0, 0.0]], Some(vec![0, 1])).unwrap();
        let tl = Dataset::from_rows(&[vec![0.0, 4.0]], Some(vec![2])).unwrap();
        let tu = if unlabeled.is_empty() {
            Dataset::empty(2)
        } else {
            Dataset::from_rows(unlabeled, None).unwrap()
        };
        DomainBundle::new(src, tl, tu, None, 3).unwrap()
    }

    #[test]
    fn empty_unlabeled_gives_empty_prelabels() {
        let b = tiny_bundle(&[]);
        let map = HiddenMap::new(10, 2, Activation::Radbas, 0).unwrap();
        let p = preclassify_elm(&b, &map, 1.0).unwrap();
        assert_eq!(p.scores().shape(), (0, 3));
    }

    #[test]
    fn elm_prelabels_beat_chance_and_are_deterministic() {
        let spec = SynthShiftSpec::default();
        let b = generate_shift(&spec).unwrap();
        let make = || {
            let map = HiddenMap::new(200, 2, Activation::Radbas, 4).unwrap();
            preclassify_elm(&b, &map, 10.0).unwrap()
        };
        let p = make();
        assert_eq!(p, make());
        // The generator draws unlabeled samples class by class (50 each).
        let truth: Vec<usize> = (0..150).map(|i| i / 50).collect();
        let pred = row_argmax(p.scores());
        let acc = pred.iter().zip(&truth).filter(|(a, b)| a == b).count() as f64 / 150.0;
        assert!(acc > 1.0 / 3.0, "accuracy {acc}");
    }

    #[test]
    fn auto_sigma_is_inverse_mean_square_distance() {
        // Two points at distance 2: every distinct pair has squared distance 4.
        let x = DMatrix::from_row_slice(1, 2, &[0.0, 2.0]);
        let d = squared_distance_matrix(&x, &x);
        assert_eq!(auto_sigma(&d).unwrap(), 0.25);
    }

    #[test]
    fn coincident_test_point_takes_its_class() {
        let b = tiny_bundle(&[vec![0.0, 0.0]]);
        for kind in [KernelKind::LaplacianDist, KernelKind::InverseDist, KernelKind::Rbf] {
            let p = preclassify_kernel(&b, &KernelSpec::auto(kind), 1e-3).unwrap();
            assert_eq!(row_argmax(p.scores()), vec![0], "{kind:?}");
        }
    }

    #[test]
    fn huge_ridge_shrinks_scores() {
        let b = tiny_bundle(&[vec![1.0, 1.0], vec![3.0, 0.5]]);
        let p = preclassify_kernel(&b, &KernelSpec::auto(KernelKind::InverseDist), 1e12).unwrap();
        assert!(max_abs(p.scores()) < 1e-10);
    }

    #[test]
    fn explicit_sigma_must_be_positive() {
        let b = tiny_bundle(&[vec![1.0, 1.0]]);
        let spec = KernelSpec {
            kind: KernelKind::Rbf,
            sigma: Some(0.0),
        };
        assert!(preclassify_kernel(&b, &spec, 1.0).is_err());
    }

    #[test]
    fn averaging() {
        let a = PreLabelMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 3.0, 0.5])).unwrap();
        let b = PreLabelMatrix::new(DMatrix::from_row_slice(2, 2, &[3.0, 0.0, -1.0, 1.5])).unwrap();
        assert_eq!(average_prelabels(&[a.clone(), a.clone()]).unwrap(), a);
        let neg = PreLabelMatrix::new(-a.scores().clone()).unwrap();
        assert_eq!(max_abs(average_prelabels(&[a.clone(), neg]).unwrap().scores()), 0.0);
        let avg = average_prelabels(&[a, b]).unwrap();
        assert_eq!(avg.scores(), &DMatrix::from_row_slice(2, 2, &[2.0, -1.0, 1.0, 1.0]));
    }

    #[test]
    fn averaging_rejects_shape_mismatch() {
        let a = PreLabelMatrix::new(DMatrix::zeros(2, 2)).unwrap();
        let b = PreLabelMatrix::new(DMatrix::zeros(3, 2)).unwrap();
        assert!(average_prelabels(&[a, b]).is_err());
    }

    #[test]
    fn implementations_are_interchangeable() {
        let b = tiny_bundle(&[vec![1.0, 1.0], vec![3.0, 0.5]]);
        let map = HiddenMap::new(10, 2, Activation::Radbas, 1).unwrap();
        let items: Vec<Box<dyn PreClassifier + Send + Sync>> = vec![
            Box::new(ElmPreClassifier { map, c: 1.0 }),
            Box::new(KernelPreClassifier {
                spec: KernelSpec::auto(KernelKind::LaplacianDist),
                ridge: 1.0,
            }),
            Box::new(AveragedPreClassifier(vec![Box::new(KernelPreClassifier {
                spec: KernelSpec::auto(KernelKind::InverseDist),
                ridge: 1.0,
            })])),
            Box::new(ImportedPreLabels(PreLabelMatrix::new(DMatrix::zeros(2, 3)).unwrap())),
        ];
        for p in &items {
            let out = p.prelabels(&b).unwrap();
            out.check_for(&b).unwrap();
        }
    }

    #[test]
    fn csv_import() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("phi.csv");
        std::fs::write(&path, "1,-1,0.5\n0,2,-3\n").unwrap();
        let p = PreLabelMatrix::from_csv(&path).unwrap();
        assert_eq!(p.scores(), &DMatrix::from_row_slice(2, 3, &[1.0, -1.0, 0.5, 0.0, 2.0, -3.0]));
    }
}
