//! Bundle manifests: a small `key = "value"` file naming the split files.
//!
//! Relative paths are resolved against the manifest's directory. A
//! multi-view manifest adds `views = V` and per-view feature keys
//! `view<i>_source_features`, `view<i>_target_labeled_features`,
//! `view<i>_target_unlabeled_features` and optionally
//! `view<i>_target_test_features`; labels stay shared at the top level.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::csv::{load_features, load_labels, write_all};
use super::{Dataset, DomainBundle};
use crate::error::{EdaError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub classes: usize,
    pub source_features: Option<String>,
    pub source_labels: String,
    pub target_labeled_features: Option<String>,
    pub target_labeled_labels: String,
    pub target_unlabeled_features: Option<String>,
    pub target_test_features: Option<String>,
    pub target_test_labels: Option<String>,
    pub views: Option<usize>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, toml::Value>,
}

impl Manifest {
    fn view_key(&self, view: usize, key: &str) -> Result<String> {
        let name = format!("view{view}_{key}");
        match self.extra.get(&name) {
            Some(toml::Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(EdaError::Parameter(format!("manifest key `{name}` must be a string"))),
            None => Err(EdaError::Parameter(format!("manifest is missing `{name}`"))),
        }
    }
}

fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| EdaError::io(path, e))?;
    toml::from_str(&text).map_err(|e| EdaError::Parse {
        path: path.to_path_buf(),
        line: e.span().map(|s| text[..s.start].lines().count().max(1)).unwrap_or(0),
        message: e.message().to_string(),
    })
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn required(field: &Option<String>, name: &str) -> Result<String> {
    field
        .clone()
        .ok_or_else(|| EdaError::Parameter(format!("manifest is missing `{name}`")))
}

struct Labels {
    source: Vec<usize>,
    target_labeled: Vec<usize>,
    target_test: Option<Vec<usize>>,
}

fn load_shared_labels(m: &Manifest, base: &Path) -> Result<Labels> {
    Ok(Labels {
        source: load_labels(&resolve(base, &m.source_labels))?,
        target_labeled: load_labels(&resolve(base, &m.target_labeled_labels))?,
        target_test: m
            .target_test_labels
            .as_ref()
            .map(|p| load_labels(&resolve(base, p)))
            .transpose()?,
    })
}

fn assemble(
    base: &Path,
    classes: usize,
    labels: &Labels,
    source: &str,
    target_labeled: &str,
    target_unlabeled: &str,
    target_test: Option<&str>,
) -> Result<DomainBundle> {
    let labeled = |file: &str, l: &[usize]| -> Result<Dataset> {
        let path = resolve(base, file);
        let x = load_features(&path)?;
        if x.ncols() != l.len() {
            return Err(EdaError::Shape(format!(
                "{} has {} rows but its label file has {} entries",
                path.display(),
                x.ncols(),
                l.len()
            )));
        }
        Dataset::new(x, Some(l.to_vec()))
    };
    let source = labeled(source, &labels.source)?;
    let tl = labeled(target_labeled, &labels.target_labeled)?;
    let tu = Dataset::unlabeled(load_features(&resolve(base, target_unlabeled))?)?;
    let test = match (target_test, &labels.target_test) {
        (Some(f), Some(l)) => Some(labeled(f, l)?),
        (None, None) => None,
        _ => {
            return Err(EdaError::Parameter(
                "target_test_features and target_test_labels must be given together".into(),
            ))
        }
    };
    DomainBundle::new(source, tl, tu, test, classes)
}

/// Loads a single-view bundle.
pub fn load_manifest(path: &Path) -> Result<DomainBundle> {
    let m = read_manifest(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let labels = load_shared_labels(&m, base)?;
    assemble(
        base,
        m.classes,
        &labels,
        &required(&m.source_features, "source_features")?,
        &required(&m.target_labeled_features, "target_labeled_features")?,
        &required(&m.target_unlabeled_features, "target_unlabeled_features")?,
        m.target_test_features.as_deref(),
    )
}

/// Loads one bundle per view. A manifest without `views` yields one view.
pub fn load_multiview_manifest(path: &Path) -> Result<Vec<DomainBundle>> {
    let m = read_manifest(path)?;
    let Some(views) = m.views else {
        return Ok(vec![load_manifest(path)?]);
    };
    if views == 0 {
        return Err(EdaError::Parameter("manifest declares zero views".into()));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let labels = load_shared_labels(&m, base)?;
    (0..views)
        .map(|v| {
            let test = if m.target_test_features.is_some() || m.extra.contains_key(&format!("view{v}_target_test_features")) {
                Some(m.view_key(v, "target_test_features")?)
            } else {
                None
            };
            assemble(
                base,
                m.classes,
                &labels,
                &m.view_key(v, "source_features")?,
                &m.view_key(v, "target_labeled_features")?,
                &m.view_key(v, "target_unlabeled_features")?,
                test.as_deref(),
            )
        })
        .collect()
}

/// Writes a bundle's split files plus `manifest.toml` into `dir`.
pub fn write_manifest(dir: &Path, bundle: &DomainBundle) -> Result<PathBuf> {
    use super::csv::{write_features, write_labels};
    fs::create_dir_all(dir).map_err(|e| EdaError::io(dir, e))?;
    let labels = |ds: &Dataset| ds.labels().map(<[usize]>::to_vec).unwrap_or_default();
    write_features(&dir.join("source_features.csv"), bundle.source.features())?;
    write_labels(&dir.join("source_labels.txt"), &labels(&bundle.source))?;
    write_features(&dir.join("target_labeled_features.csv"), bundle.target_labeled.features())?;
    write_labels(&dir.join("target_labeled_labels.txt"), &labels(&bundle.target_labeled))?;
    write_features(
        &dir.join("target_unlabeled_features.csv"),
        bundle.target_unlabeled.features(),
    )?;
    let mut manifest = Manifest {
        classes: bundle.classes,
        source_features: Some("source_features.csv".into()),
        source_labels: "source_labels.txt".into(),
        target_labeled_features: Some("target_labeled_features.csv".into()),
        target_labeled_labels: "target_labeled_labels.txt".into(),
        target_unlabeled_features: Some("target_unlabeled_features.csv".into()),
        ..Manifest::default()
    };
    if let Some(test) = &bundle.target_test {
        write_features(&dir.join("target_test_features.csv"), test.features())?;
        write_labels(&dir.join("target_test_labels.txt"), &labels(test))?;
        manifest.target_test_features = Some("target_test_features.csv".into());
        manifest.target_test_labels = Some("target_test_labels.txt".into());
    }
    let text = toml::to_string(&manifest).map_err(|e| EdaError::Serde(e.to_string()))?;
    let path = dir.join("manifest.toml");
    write_all(&path, text.as_bytes())?;
    Ok(path)
}

/// Writes row-aligned views with shared label files and `view<i>_` keys.
pub fn write_multiview_manifest(dir: &Path, views: &[DomainBundle]) -> Result<PathBuf> {
    use super::csv::{write_features, write_labels};
    let first = views
        .first()
        .ok_or_else(|| EdaError::Shape("no views to write".into()))?;
    fs::create_dir_all(dir).map_err(|e| EdaError::io(dir, e))?;
    let labels = |ds: &Dataset| ds.labels().map(<[usize]>::to_vec).unwrap_or_default();
    write_labels(&dir.join("source_labels.txt"), &labels(&first.source))?;
    write_labels(&dir.join("target_labeled_labels.txt"), &labels(&first.target_labeled))?;
    let mut manifest = Manifest {
        classes: first.classes,
        source_labels: "source_labels.txt".into(),
        target_labeled_labels: "target_labeled_labels.txt".into(),
        views: Some(views.len()),
        ..Manifest::default()
    };
    if let Some(test) = &first.target_test {
        write_labels(&dir.join("target_test_labels.txt"), &labels(test))?;
        manifest.target_test_labels = Some("target_test_labels.txt".into());
    }
    for (v, b) in views.iter().enumerate() {
        let mut parts = vec![
            ("source_features", b.source.features()),
            ("target_labeled_features", b.target_labeled.features()),
            ("target_unlabeled_features", b.target_unlabeled.features()),
        ];
        if let Some(test) = &b.target_test {
            parts.push(("target_test_features", test.features()));
        }
        for (key, x) in parts {
            let file = format!("view{v}_{key}.csv");
            write_features(&dir.join(&file), x)?;
            manifest.extra.insert(format!("view{v}_{key}"), toml::Value::String(file));
        }
    }
    let text = toml::to_string(&manifest).map_err(|e| EdaError::Serde(e.to_string()))?;
    let path = dir.join("manifest.toml");
    write_all(&path, text.as_bytes())?;
    Ok(path)
}
