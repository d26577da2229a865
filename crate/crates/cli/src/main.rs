//! `eda` — generate shifted data, fit and apply EDA models, run benchmarks.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

use eda_core::bench::{
    accuracy, emit_report, emit_sweep, method_prelabels, run_benchmark, run_sweep, BenchConfig, DataSource,
    Method,
};
use eda_core::data::{
    encode_labels, generate_shift, generate_two_view, load_features, load_labels, load_multiview_manifest,
    write_manifest, write_multiview_manifest, Dataset, DomainBundle, SynthShiftSpec,
};
use eda_core::eda::{build_map, fit_eda, fit_mveda, predict_eda, predict_mveda, AlphaRule, EdaParams};
use eda_core::elm::{fit_sselm, ElmModel};
use eda_core::graph::build_knn_graph;
use eda_core::model_io::{load_model, save_model, ModelFile};
use eda_core::preclassifier::PreLabelMatrix;

#[derive(Parser)]
#[command(name = "eda", version, about = "Extreme domain adaptation with ELM feature maps")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic shifted bundle: split CSVs plus manifest.toml.
    Synth(SynthArgs),
    /// Fit a model on a manifest and write it as JSON.
    Fit(FitArgs),
    /// Score feature CSVs with a fitted model.
    Predict(PredictArgs),
    /// Run the benchmark protocol and write the report files.
    Bench(BenchArgs),
    /// C_S × C_T grid of one EDA variant, written as CSV.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Benchmark/parameter config (TOML). Built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<BenchConfig> {
        match &self.config {
            Some(p) => BenchConfig::load(p).with_context(|| format!("loading {}", p.display())),
            None => Ok(BenchConfig::default()),
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Generator seed (defaults to the generator config's seed).
    #[arg(long)]
    seed: Option<u64>,
    /// 1 writes a plain bundle, 2 adds a noisy second view.
    #[arg(long, default_value_t = 1)]
    views: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Guarded,
    ClosedForm,
}

impl From<RuleArg> for AlphaRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Guarded => AlphaRule::Guarded,
            RuleArg::ClosedForm => AlphaRule::ClosedForm,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Seed of the hidden map (overrides `params.seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// ELM_S, ELM_T, ELM_ST, SS-ELM, EDA, EDA_lap, EDA_inv, EDA_avg or MvEDA.
    /// Defaults to MvEDA for multi-view manifests and EDA otherwise.
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    /// Use only the first N views of the manifest.
    #[arg(long)]
    views: Option<usize>,
    /// Pre-label scores for the unlabeled split (N_Tu rows × c columns).
    #[arg(long)]
    prelabels: Option<PathBuf>,
    #[arg(long, value_enum)]
    alpha_rule: Option<RuleArg>,
    /// Model file; defaults to `<out-dir>/model.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Feature CSV, one per view in view order.
    #[arg(long, required = true)]
    features: Vec<PathBuf>,
    /// Apply Θ⁻¹ to EDA scores.
    #[arg(long)]
    detransform: bool,
    /// Optional true labels; accuracy is reported on stderr.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Replace the configured seeds (repeatable).
    #[arg(long)]
    seed: Vec<u64>,
    #[arg(long)]
    detransform: bool,
    #[arg(long, default_value = "bench-out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, value_parser = parse_method, default_value = "EDA")]
    method: Method,
    #[arg(long)]
    seed: Vec<u64>,
    #[arg(long, default_value = "bench-out")]
    out_dir: PathBuf,
    /// Spread is reported over rows with C_S at most this ...
    #[arg(long, default_value_t = 100.0)]
    c_s_max: f64,
    /// ... and columns with C_T at least this.
    #[arg(long, default_value_t = 100.0)]
    c_t_min: f64,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    Method::ALL
        .into_iter()
        .find(|m| m.name().eq_ignore_ascii_case(s))
        .ok_or_else(|| {
            let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
            format!("unknown method `{s}` (expected one of {})", names.join(", "))
        })
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Bench(a) => bench(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let cfg = a.config.load()?;
    let (spec, noise_dims, noise_std) = match cfg.data {
        DataSource::Synthetic { spec, noise_dims, noise_std } => (spec, noise_dims, noise_std),
        DataSource::Manifest { .. } => (SynthShiftSpec::default(), 2, 1.0),
    };
    let spec = SynthShiftSpec {
        seed: a.seed.unwrap_or(spec.seed),
        ..spec
    };
    let path = match a.views {
        1 => write_manifest(&a.out_dir, &generate_shift(&spec)?)?,
        2 => write_multiview_manifest(&a.out_dir, &generate_two_view(&spec, noise_dims, noise_std)?)?,
        v => bail!("--views must be 1 or 2, got {v}"),
    };
    println!("{}", path.display());
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let mut cfg = a.config.load()?;
    if let Some(seed) = a.seed {
        cfg.params.seed = seed;
    }
    if let Some(rule) = a.alpha_rule {
        cfg.alpha_rule = rule.into();
    }
    let mut views = load_multiview_manifest(&a.manifest)
        .with_context(|| format!("loading {}", a.manifest.display()))?;
    if let Some(n) = a.views {
        if n == 0 || n > views.len() {
            bail!("--views {n} but the manifest has {} view(s)", views.len());
        }
        views.truncate(n);
    }
    let method = a
        .method
        .unwrap_or(if views.len() > 1 { Method::MvEda } else { Method::Eda });
    if views.len() > 1 && method != Method::MvEda {
        log::warn!("{} is single-view; using view 0 only", method.name());
        views.truncate(1);
    }
    let imported = a
        .prelabels
        .as_deref()
        .map(|p| PreLabelMatrix::from_csv(p).with_context(|| format!("loading {}", p.display())))
        .transpose()?;
    if imported.is_some() && !method.is_eda() {
        bail!("--prelabels only applies to EDA methods");
    }

    let model = fit_method(&cfg, &views, method, imported)?;
    report_fit(&model, &views)?;
    let out = a.out.unwrap_or_else(|| a.out_dir.join("model.json"));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    save_model(&model, &out)?;
    println!("{}", out.display());
    Ok(())
}

fn fit_method(
    cfg: &BenchConfig,
    views: &[DomainBundle],
    method: Method,
    imported: Option<PreLabelMatrix>,
) -> Result<ModelFile> {
    let params: &EdaParams = &cfg.params;
    let b = &views[0];
    let map = build_map(b, params, params.seed)?;
    let prelabels = |map| -> Result<PreLabelMatrix> {
        match &imported {
            Some(p) => {
                p.check_for(b)?;
                Ok(p.clone())
            }
            None => Ok(method_prelabels(cfg, b, map, method)?),
        }
    };
    Ok(match method {
        Method::ElmS => ModelFile::Elm(ElmModel::fit(map, &[&b.source], b.classes, cfg.default_c)?),
        Method::ElmT => ModelFile::Elm(ElmModel::fit(map, &[&b.target_labeled], b.classes, cfg.default_c)?),
        Method::ElmSt => ModelFile::Elm(ElmModel::fit(
            map,
            &[&b.source, &b.target_labeled],
            b.classes,
            cfg.default_c,
        )?),
        Method::SsElm => {
            let labeled = b.labeled_union()?;
            let all = labeled.without_labels().concat(&b.target_unlabeled)?;
            let graph = build_knn_graph(&all, params.k, params.graph_weighting)?;
            let t = encode_labels(labeled.labels().unwrap_or_default(), b.classes)?;
            let beta = fit_sselm(&map.map_features(&all)?, &t, cfg.default_c, params.lambda, &graph)?;
            ModelFile::Elm(ElmModel { map, beta, c: cfg.default_c })
        }
        Method::Eda | Method::EdaLap | Method::EdaInv | Method::EdaAvg => {
            ModelFile::Eda(fit_eda(b, &prelabels(&map)?, params)?)
        }
        Method::MvEda => {
            // One pre-label matrix from view 0, shared by every view.
            let phi = prelabels(&map)?;
            ModelFile::MvEda(fit_mveda(views, &vec![phi; views.len()], params, cfg.alpha_rule)?)
        }
    })
}

fn report_fit(model: &ModelFile, views: &[DomainBundle]) -> Result<()> {
    let history = match model {
        ModelFile::Elm(_) => None,
        ModelFile::Eda(m) => Some(&m.objective_history),
        ModelFile::MvEda(m) => {
            eprintln!("alpha: {:?}", m.alpha);
            Some(&m.objective_history)
        }
    };
    if let Some(h) = history {
        let line: Vec<String> = h.iter().map(|j| format!("{j:.6e}")).collect();
        eprintln!("objective: {}", line.join(" "));
    }
    let tests: Option<Vec<Dataset>> = views.iter().map(|v| v.target_test.clone()).collect();
    if let Some(tests) = tests {
        let (labels, _) = score(model, &tests, false)?;
        let truth = tests[0].labels().unwrap_or_default();
        eprintln!("target test accuracy: {:.4}", accuracy(&labels, truth)?);
    }
    Ok(())
}

/// Score matrix as plain rows.
macro_rules! rows {
    ($m:expr) => {{
        let m = $m;
        (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect::<Vec<Vec<f64>>>()
    }};
}

fn score(model: &ModelFile, xs: &[Dataset], detransform: bool) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    if xs.len() != model.views() {
        bail!("model has {} view(s), got {} feature file(s)", model.views(), xs.len());
    }
    Ok(match model {
        ModelFile::Elm(m) => {
            let s = m.predict_scores(&xs[0])?;
            (m.predict(&xs[0])?, rows!(&s))
        }
        ModelFile::Eda(m) => {
            let p = predict_eda(m, &xs[0], detransform)?;
            (p.labels, rows!(&p.scores))
        }
        ModelFile::MvEda(m) => {
            let p = predict_mveda(m, xs, detransform)?.fused;
            (p.labels, rows!(&p.scores))
        }
    })
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = load_model(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let xs = a
        .features
        .iter()
        .map(|p| Ok(Dataset::unlabeled(load_features(p).with_context(|| format!("loading {}", p.display()))?)?))
        .collect::<Result<Vec<_>>>()?;
    if a.detransform && matches!(model, ModelFile::Elm(_)) {
        log::warn!("--detransform has no effect on ELM models");
    }
    let (labels, scores) = score(&model, &xs, a.detransform)?;
    if let Some(p) = &a.labels {
        let truth = load_labels(p)?;
        eprintln!("accuracy: {:.4}", accuracy(&labels, &truth)?);
    }
    let classes = scores.first().map_or(0, Vec::len);
    let mut out = String::from("label");
    for j in 0..classes {
        write!(out, ",score_{j}")?;
    }
    out.push('\n');
    for (label, row) in labels.iter().zip(&scores) {
        write!(out, "{label}")?;
        for v in row {
            write!(out, ",{v}")?;
        }
        out.push('\n');
    }
    match &a.out {
        Some(p) => fs::write(p, out).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{out}"),
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let mut cfg = a.config.load()?;
    if !a.seed.is_empty() {
        cfg.seeds = a.seed;
    }
    cfg.detransform |= a.detransform;
    let report = run_benchmark(&cfg)?;
    let files = emit_report(&report, &a.out_dir)?;
    print!("{}", fs::read_to_string(&files.results_txt)?);
    for p in files.deterministic().into_iter().chain([files.timing_csv.as_path()]) {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut cfg = a.config.load()?;
    if !a.seed.is_empty() {
        cfg.seeds = a.seed;
    }
    let report = run_sweep(&cfg, a.method)?;
    let path: &Path = &emit_sweep(&report, &a.out_dir)?;
    println!(
        "max spread (C_S <= {}, C_T >= {}): {:.4}",
        a.c_s_max,
        a.c_t_min,
        report.max_spread(a.c_s_max, a.c_t_min)
    );
    eprintln!("wrote {}", path.display());
    Ok(())
}
