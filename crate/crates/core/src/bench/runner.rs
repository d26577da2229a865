//! Seeded experiment runner: every method of one seed sees the same split
//! and the same hidden map.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::config::{BenchConfig, DataSource, Method, Metric};
use super::metrics::{accuracy, mean_average_precision, mean_std};
use super::report::{BenchReport, ConvergenceRow, MethodSummary, SeedResult, SplitRecord, TimingRow};
use crate::data::{
    generate_shift, generate_two_view, load_multiview_manifest, Dataset, DomainBundle,
};
use crate::eda::single::{assemble_problem, build_graph, build_map};
use crate::eda::{solve_eda, solve_mveda, theta_inverse, EdaParams, EdaProblem};
use crate::elm::{fit_elm, fit_sselm, stack_labeled};
use crate::error::{EdaError, Result};
use crate::feature_map::{view_seed, HiddenMap};
use crate::graph::build_knn_graph;
use crate::linalg::row_argmax;
use crate::preclassifier::{
    average_prelabels, preclassify_elm, preclassify_kernel, KernelKind, KernelSpec, PreLabelMatrix,
};

fn hex(digest: &[u8]) -> String {
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn feed_matrix(h: &mut Sha256, m: &DMatrix<f64>) {
    h.update((m.nrows() as u64).to_le_bytes());
    h.update((m.ncols() as u64).to_le_bytes());
    for v in m.iter() {
        h.update(v.to_bits().to_le_bytes());
    }
}

fn feed_dataset(h: &mut Sha256, ds: &Dataset) {
    feed_matrix(h, ds.features());
    if let Some(l) = ds.labels() {
        for &v in l {
            h.update((v as u64).to_le_bytes());
        }
    }
}

/// SHA-256 over every split's features and labels.
pub fn hash_bundle(b: &DomainBundle) -> String {
    let mut h = Sha256::new();
    feed_dataset(&mut h, &b.source);
    feed_dataset(&mut h, &b.target_labeled);
    feed_dataset(&mut h, &b.target_unlabeled);
    if let Some(t) = &b.target_test {
        feed_dataset(&mut h, t);
    }
    hex(&h.finalize())
}

/// SHA-256 over `W`, `B`, the activation and any standardizer.
pub fn hash_map(map: &HiddenMap) -> String {
    let mut h = Sha256::new();
    feed_matrix(&mut h, map.weights());
    for v in map.biases().iter() {
        h.update(v.to_bits().to_le_bytes());
    }
    h.update(format!("{:?}", map.activation()).as_bytes());
    if let Some(s) = map.standardizer() {
        for v in s.mean.iter().chain(s.std.iter()) {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    hex(&h.finalize())
}

/// Moves `m` labeled samples per class from the labeled target pool
/// (`target_labeled ∪ target_test`) into the labeled split; the rest
/// becomes the test split. The same indices apply to every view.
pub fn resplit(views: &[DomainBundle], m: usize, seed: u64) -> Result<Vec<DomainBundle>> {
    let first = views.first().ok_or_else(|| EdaError::Shape("no views".into()))?;
    let pool_labels: Vec<usize> = {
        let test = first.target_test.as_ref().ok_or_else(|| {
            EdaError::UndefinedMetric("benchmarking needs target test data".into())
        })?;
        first
            .target_labeled
            .require_labels("target_labeled")?
            .iter()
            .chain(test.require_labels("target_test")?)
            .copied()
            .collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labeled = Vec::new();
    let mut test = Vec::new();
    for class in 0..first.classes {
        let mut idx: Vec<usize> = (0..pool_labels.len()).filter(|&i| pool_labels[i] == class).collect();
        if idx.len() <= m {
            return Err(EdaError::Parameter(format!(
                "class {class} has {} labeled target samples; need more than m = {m}",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        labeled.extend_from_slice(&idx[..m]);
        test.extend_from_slice(&idx[m..]);
    }
    labeled.sort_unstable();
    test.sort_unstable();
    views
        .iter()
        .map(|b| {
            let pool = b.target_labeled.concat(b.target_test.as_ref().ok_or_else(|| {
                EdaError::UndefinedMetric("every view needs target test data".into())
            })?)?;
            DomainBundle::new(
                b.source.clone(),
                pool.select(&labeled),
                b.target_unlabeled.clone(),
                Some(pool.select(&test)),
                b.classes,
            )
        })
        .collect()
}

/// Produces the per-seed views for a data source.
pub struct SplitMaker {
    source: DataSource,
    m: usize,
    multiview: bool,
    manifest_views: Option<Vec<DomainBundle>>,
}

impl SplitMaker {
    pub fn new(cfg: &BenchConfig) -> Result<Self> {
        let manifest_views = match &cfg.data {
            DataSource::Manifest { path } => Some(load_multiview_manifest(path)?),
            DataSource::Synthetic { .. } => None,
        };
        Ok(Self {
            source: cfg.data.clone(),
            m: cfg.m,
            multiview: cfg.methods.contains(&Method::MvEda),
            manifest_views,
        })
    }

    pub fn split(&self, seed: u64) -> Result<Vec<DomainBundle>> {
        match (&self.source, &self.manifest_views) {
            (DataSource::Synthetic { spec, noise_dims, noise_std }, _) => {
                let mut spec = spec.clone().with_seed(seed);
                spec.n_target_labeled_per_class = self.m;
                if self.multiview {
                    generate_two_view(&spec, *noise_dims, *noise_std)
                } else {
                    Ok(vec![generate_shift(&spec)?])
                }
            }
            (DataSource::Manifest { .. }, Some(views)) => resplit(views, self.m, seed),
            (DataSource::Manifest { .. }, None) => unreachable!("manifest views are loaded in new()"),
        }
    }
}

/// Pre-labels feeding `method`: kernel ridge for the `_lap`/`_inv` variants,
/// their average for `EDA_avg` and MvEDA, the ridge ELM on `map` otherwise.
pub fn method_prelabels(
    cfg: &BenchConfig,
    bundle: &DomainBundle,
    map: &HiddenMap,
    method: Method,
) -> Result<PreLabelMatrix> {
    let kernel = |k| preclassify_kernel(bundle, &KernelSpec::auto(k), cfg.kernel_ridge);
    match method {
        Method::EdaLap => kernel(KernelKind::LaplacianDist),
        Method::EdaInv => kernel(KernelKind::InverseDist),
        Method::EdaAvg | Method::MvEda => average_prelabels(&[
            kernel(KernelKind::LaplacianDist)?,
            kernel(KernelKind::InverseDist)?,
        ]),
        _ => preclassify_elm(bundle, map, cfg.pre_c),
    }
}

/// Everything one seed's methods share.
pub struct SeedContext<'a> {
    pub cfg: &'a BenchConfig,
    pub views: Vec<DomainBundle>,
    pub map: HiddenMap,
    pub params: EdaParams,
    truth: Vec<usize>,
    h_test: DMatrix<f64>,
}

impl<'a> SeedContext<'a> {
    pub fn new(cfg: &'a BenchConfig, views: Vec<DomainBundle>, seed: u64) -> Result<Self> {
        let mut params = cfg.params.clone();
        params.seed = cfg.params.seed.wrapping_add(seed);
        let base = &views[0];
        let test = base
            .target_test
            .as_ref()
            .ok_or_else(|| EdaError::UndefinedMetric("benchmarking needs target test data".into()))?;
        let truth = test.require_labels("target_test")?.to_vec();
        let map = build_map(base, &params, params.seed)?;
        let h_test = map.map_features(test)?;
        Ok(Self {
            cfg,
            views,
            map,
            params,
            truth,
            h_test,
        })
    }

    pub fn bundle(&self) -> &DomainBundle {
        &self.views[0]
    }

    pub fn score(&self, scores: &DMatrix<f64>) -> Result<f64> {
        match self.cfg.metric {
            Metric::Accuracy => accuracy(&row_argmax(scores), &self.truth),
            Metric::Map => mean_average_precision(scores, &self.truth),
        }
    }

    /// Pre-labels, graph and Gram products for a single-view EDA variant.
    pub fn eda_problem(&self, method: Method) -> Result<EdaProblem> {
        let b = self.bundle();
        let phi = method_prelabels(self.cfg, b, &self.map, method)?;
        let graph = build_graph(b, &self.params)?;
        assemble_problem(b, &phi, &self.map, &graph)
    }

    fn eda_scores(&self, problem: &EdaProblem, c_s: f64, c_t: f64) -> Result<(DMatrix<f64>, Vec<f64>)> {
        let params = EdaParams { c_s, c_t, ..self.params.clone() };
        let sol = solve_eda(problem, &params)?;
        let mut scores = &self.h_test * &sol.beta;
        if self.cfg.detransform {
            scores *= theta_inverse(&sol.theta);
        }
        Ok((scores, sol.history))
    }

    /// Metric of a single-view EDA variant at every `(C_S, C_T)` pair.
    pub fn eda_grid(&self, method: Method, pairs: &[(f64, f64)]) -> Result<Vec<f64>> {
        let problem = self.eda_problem(method)?;
        pairs
            .iter()
            .map(|&(c_s, c_t)| self.score(&self.eda_scores(&problem, c_s, c_t)?.0))
            .collect()
    }
}

/// Outcome of one method on one seed.
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub best: SeedResult,
    pub default_value: f64,
    pub history: Vec<f64>,
    pub alpha_history: Vec<Vec<f64>>,
    pub fit_seconds: f64,
    pub map_hash: String,
}

fn pick_best(values: &[(f64, f64, f64)]) -> (f64, f64, f64) {
    // First maximum in grid order.
    let mut best = values[0];
    for &v in &values[1..] {
        if v.0 > best.0 {
            best = v;
        }
    }
    best
}

fn elm_train<'b>(method: Method, b: &'b DomainBundle) -> Vec<&'b Dataset> {
    match method {
        Method::ElmS => vec![&b.source],
        Method::ElmT => vec![&b.target_labeled],
        _ => vec![&b.source, &b.target_labeled],
    }
}

pub fn run_method(ctx: &SeedContext, method: Method, seed: u64) -> Result<MethodRun> {
    let cfg = ctx.cfg;
    let grid = &cfg.c_grid;
    let pairs: Vec<(f64, f64)> = grid
        .iter()
        .flat_map(|&s| grid.iter().map(move |&t| (s, t)))
        .collect();
    let mut history = Vec::new();
    let mut alpha_history = Vec::new();
    let map_hash = hash_map(&ctx.map);
    let b = ctx.bundle();
    let classes = b.classes;

    let (best, default_value, fit_seconds) = match method {
        Method::ElmS | Method::ElmT | Method::ElmSt => {
            let train = elm_train(method, b);
            let start = Instant::now();
            let (h, t) = stack_labeled(&ctx.map, &train, classes)?;
            let default_beta = fit_elm(&h, &t, cfg.default_c)?;
            let secs = start.elapsed().as_secs_f64();
            let default_value = ctx.score(&(&ctx.h_test * default_beta))?;
            let values = grid
                .iter()
                .map(|&c| Ok((ctx.score(&(&ctx.h_test * fit_elm(&h, &t, c)?))?, c, c)))
                .collect::<Result<Vec<_>>>()?;
            (pick_best(&values), default_value, secs)
        }
        Method::SsElm => {
            let start = Instant::now();
            let labeled = b.labeled_union()?;
            let all = labeled.without_labels().concat(&b.target_unlabeled)?;
            let graph = build_knn_graph(&all, ctx.params.k, ctx.params.graph_weighting)?;
            let h_all = ctx.map.map_features(&all)?;
            let t = crate::data::encode_labels(labeled.require_labels("labeled")?, classes)?;
            let fit = |c: f64| fit_sselm(&h_all, &t, c, ctx.params.lambda, &graph);
            let default_beta = fit(cfg.default_c)?;
            let secs = start.elapsed().as_secs_f64();
            let default_value = ctx.score(&(&ctx.h_test * default_beta))?;
            let values = grid
                .iter()
                .map(|&c| Ok((ctx.score(&(&ctx.h_test * fit(c)?))?, c, c)))
                .collect::<Result<Vec<_>>>()?;
            (pick_best(&values), default_value, secs)
        }
        Method::Eda | Method::EdaLap | Method::EdaInv | Method::EdaAvg => {
            let start = Instant::now();
            let problem = ctx.eda_problem(method)?;
            let (default_scores, _) = ctx.eda_scores(&problem, ctx.params.c_s, ctx.params.c_t)?;
            let secs = start.elapsed().as_secs_f64();
            let default_value = ctx.score(&default_scores)?;
            let mut values = Vec::with_capacity(pairs.len());
            let mut histories = Vec::with_capacity(pairs.len());
            for &(c_s, c_t) in &pairs {
                let (scores, hist) = ctx.eda_scores(&problem, c_s, c_t)?;
                values.push((ctx.score(&scores)?, c_s, c_t));
                histories.push(hist);
            }
            let best = pick_best(&values);
            let idx = values.iter().position(|v| *v == best).unwrap_or(0);
            history = histories.swap_remove(idx);
            (best, default_value, secs)
        }
        Method::MvEda => {
            let start = Instant::now();
            let phi = method_prelabels(cfg, b, &ctx.map, Method::MvEda)?;
            let mut maps = vec![ctx.map.clone()];
            for (v, view) in ctx.views.iter().enumerate().skip(1) {
                maps.push(build_map(view, &ctx.params, view_seed(ctx.params.seed, v))?);
            }
            let problems = ctx
                .views
                .iter()
                .zip(&maps)
                .map(|(view, map)| {
                    let graph = build_graph(view, &ctx.params)?;
                    assemble_problem(view, &phi, map, &graph)
                })
                .collect::<Result<Vec<_>>>()?;
            let h_tests = ctx
                .views
                .iter()
                .zip(&maps)
                .map(|(view, map)| {
                    let test = view.target_test.as_ref().ok_or_else(|| {
                        EdaError::UndefinedMetric("every view needs target test data".into())
                    })?;
                    map.map_features(test)
                })
                .collect::<Result<Vec<_>>>()?;
            let run = |c_s: f64, c_t: f64| -> Result<(DMatrix<f64>, Vec<f64>, Vec<Vec<f64>>)> {
                let params = EdaParams { c_s, c_t, ..ctx.params.clone() };
                let sol = solve_mveda(&problems, &params, cfg.alpha_rule)?;
                let mut fused = DMatrix::zeros(ctx.h_test.nrows(), classes);
                for (v, h) in h_tests.iter().enumerate() {
                    let mut s = h * &sol.state.betas[v];
                    if cfg.detransform {
                        s *= theta_inverse(&sol.state.thetas[v]);
                    }
                    fused += s * sol.state.alpha[v];
                }
                Ok((fused, sol.history, sol.alpha_history))
            };
            let (default_scores, _, _) = run(ctx.params.c_s, ctx.params.c_t)?;
            let secs = start.elapsed().as_secs_f64();
            let default_value = ctx.score(&default_scores)?;
            let mut values = Vec::with_capacity(pairs.len());
            let mut runs = Vec::with_capacity(pairs.len());
            for &(c_s, c_t) in &pairs {
                let (scores, hist, alphas) = run(c_s, c_t)?;
                values.push((ctx.score(&scores)?, c_s, c_t));
                runs.push((hist, alphas));
            }
            let best = pick_best(&values);
            let idx = values.iter().position(|v| *v == best).unwrap_or(0);
            let (h, a) = runs.swap_remove(idx);
            history = h;
            alpha_history = a;
            (best, default_value, secs)
        }
    };
    Ok(MethodRun {
        best: SeedResult {
            seed,
            value: best.0,
            c_s: best.1,
            c_t: if method.is_eda() { Some(best.2) } else { None },
        },
        default_value,
        history,
        alpha_history,
        fit_seconds,
        map_hash,
    })
}

/// Runs every method on every seed and collects the report.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let maker = SplitMaker::new(cfg)?;
    let mut per_method: Vec<(Method, Vec<SeedResult>, Vec<f64>)> =
        cfg.methods.iter().map(|&m| (m, Vec::new(), Vec::new())).collect();
    let mut convergence = Vec::new();
    let mut alpha_rows = Vec::new();
    let mut timings = Vec::new();
    let mut splits = Vec::new();
    for &seed in &cfg.seeds {
        let views = maker.split(seed)?;
        let split_hash = hash_bundle(&views[0]);
        let ctx = SeedContext::new(cfg, views, seed)?;
        let map_hash = hash_map(&ctx.map);
        for (method, best, defaults) in per_method.iter_mut() {
            let run = run_method(&ctx, *method, seed)?;
            if run.map_hash != map_hash || hash_bundle(ctx.bundle()) != split_hash {
                return Err(EdaError::Numeric(format!(
                    "{method} did not use the shared split and hidden map for seed {seed}"
                )));
            }
            let run_id = format!("{}/seed={seed}", method.name());
            for (i, j) in run.history.iter().enumerate() {
                convergence.push(ConvergenceRow {
                    run_id: run_id.clone(),
                    iteration: i + 1,
                    objective: *j,
                });
            }
            for (i, alphas) in run.alpha_history.iter().enumerate() {
                alpha_rows.push((run_id.clone(), i + 1, alphas.clone()));
            }
            timings.push(TimingRow {
                method: method.name().to_string(),
                seed,
                fit_seconds: run.fit_seconds,
            });
            best.push(run.best);
            defaults.push(run.default_value);
        }
        splits.push(SplitRecord {
            seed,
            split_hash,
            map_hash,
        });
    }
    let methods = per_method
        .into_iter()
        .map(|(method, best, defaults)| {
            let values: Vec<f64> = best.iter().map(|r| r.value).collect();
            let (best_mean, best_std) = mean_std(&values);
            let (default_mean, default_std) = mean_std(&defaults);
            MethodSummary {
                method,
                best_mean,
                best_std,
                default_mean,
                default_std,
                per_seed: best,
                default_per_seed: defaults,
            }
        })
        .collect();
    Ok(BenchReport {
        config: cfg.clone(),
        config_hash: cfg.hash()?,
        methods,
        convergence,
        alpha_trajectories: alpha_rows,
        timings,
        splits,
    })
}
