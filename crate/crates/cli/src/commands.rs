use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use edm_core::diversity::{
    diversity_entropy_knn, diversity_entropy_subsampled, diversity_entropy_truncated,
    diversity_entropy_with_budget,
};
use edm_core::features::load_features;
use edm_core::kernel::median_bandwidth;
use edm_core::learnability::{learnability_report, LearnabilityReport};
use edm_core::lowlevel::{dataset_lowlevel_summary, LowLevelSummary};
use edm_core::manifest::load_manifest;
use edm_core::validation::fixture::{fixture_check, FixtureRow};
use edm_core::validation::{directional_suite, DirectionalReport, SyntheticSpec};
use edm_core::{DatasetManifest, EntropyResult, FeatureMatrix, Hyperparams};
use serde::Serialize;

use crate::args::{Bandwidth, Format, KernelArgs, MethodArgs, MethodKind, OutputArgs, TaskArgs};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit status with the message for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Self { code: 1, message: message.to_string() }
    }
}

impl From<edm_core::Error> for Failure {
    fn from(e: edm_core::Error) -> Self {
        Self::input(e)
    }
}

type Outcome = Result<(), Failure>;

#[derive(Debug, Serialize)]
struct Envelope<'a, T: Serialize> {
    tool_version: &'static str,
    dataset: &'a str,
    samples: usize,
    dim: usize,
    hyperparams: Hyperparams,
    result: T,
}

fn emit(out: &OutputArgs, json: impl FnOnce() -> String, csv: impl FnOnce() -> String) -> Outcome {
    let mut text = match out.format {
        Format::Json => json(),
        Format::Csv => csv(),
    };
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match &out.out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize")
}

fn load(path: &Path) -> Result<(DatasetManifest, FeatureMatrix), Failure> {
    let m = load_manifest(path)?;
    let x = load_features(m.feature_path(), Some(m.episodes.len()))?;
    Ok((m, x))
}

fn hyperparams(x: &FeatureMatrix, kernel: &KernelArgs, task: Option<&TaskArgs>) -> Result<Hyperparams, Failure> {
    let sigma_global = match kernel.bandwidth {
        Bandwidth::Fixed => kernel.sigma,
        Bandwidth::Median => median_bandwidth(x)?,
    };
    let mut hp = Hyperparams {
        sigma_global,
        kernel_convention: kernel.convention(),
        ..Hyperparams::default()
    };
    if let Some(t) = task {
        hp.beta = t.beta;
        hp.sigma_task = t.sigma_task;
        hp.sigma_center = t.sigma_center;
        hp.sigma_model = t.sigma_model;
    }
    hp.validate()?;
    Ok(hp)
}

fn task_hyperparams(task: &TaskArgs) -> Result<Hyperparams, Failure> {
    let hp = Hyperparams {
        beta: task.beta,
        sigma_task: task.sigma_task,
        sigma_center: task.sigma_center,
        sigma_model: task.sigma_model,
        ..Hyperparams::default()
    };
    hp.validate()?;
    Ok(hp)
}

fn entropy(x: &FeatureMatrix, hp: &Hyperparams, kernel: &KernelArgs, method: &MethodArgs) -> Result<EntropyResult, Failure> {
    let cfg = hp.diversity_kernel();
    let eps = hp.epsilon;
    Ok(match method.method {
        MethodKind::Exact => diversity_entropy_with_budget(x, &cfg, eps, kernel.memory_mb << 20)?,
        MethodKind::Subsample => diversity_entropy_subsampled(x, &cfg, eps, method.m, method.repeats, method.seed)?,
        MethodKind::Truncate => diversity_entropy_truncated(x, &cfg, eps, method.tau.unwrap_or(5.0 * cfg.sigma))?,
        MethodKind::Knn => diversity_entropy_knn(x, &cfg, eps, method.k)?,
    })
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

/// Shortest representation that parses back to the same `f64`.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn diversity(manifest: &Path, kernel: &KernelArgs, method: &MethodArgs, out: &OutputArgs) -> Outcome {
    let (m, x) = load(manifest)?;
    let hp = hyperparams(&x, kernel, None)?;
    let res = entropy(&x, &hp, kernel, method)?;
    let env = Envelope { tool_version: VERSION, dataset: &m.name, samples: x.rows(), dim: x.dim(), hyperparams: hp, result: res };
    emit(out, || to_json(&env), || {
        csv_table(
            &["dataset", "samples", "dim", "sigma", "convention", "method", "value", "lower_bound", "upper_bound"],
            [vec![
                csv_field(&m.name),
                x.rows().to_string(),
                x.dim().to_string(),
                num(res.sigma),
                res.convention.to_string(),
                method_name(method.method).into(),
                num(res.value),
                num(res.bounds.0),
                num(res.bounds.1),
            ]],
        )
    })
}

fn method_name(m: MethodKind) -> &'static str {
    match m {
        MethodKind::Exact => "exact",
        MethodKind::Subsample => "subsample",
        MethodKind::Truncate => "truncate",
        MethodKind::Knn => "knn",
    }
}

fn learnability_csv(name: &str, rep: &LearnabilityReport) -> String {
    csv_table(
        &[
            "dataset", "task_id", "samples", "mean_length", "e", "r", "directional", "spatial",
            "mean_pairwise_distance", "l_raw", "prior", "l_adjusted", "l_dataset",
        ],
        rep.tasks.iter().map(|t| {
            vec![
                csv_field(name),
                t.task_id.to_string(),
                t.samples.to_string(),
                num(t.mean_length),
                num(t.e),
                num(t.r),
                num(t.directional),
                num(t.spatial),
                num(t.mean_pairwise_distance),
                num(t.l_raw),
                num(t.prior),
                num(t.l_adjusted),
                num(rep.l_dataset),
            ]
        }),
    )
}

pub fn learnability(manifest: &Path, task: &TaskArgs, out: &OutputArgs) -> Outcome {
    let (m, x) = load(manifest)?;
    let hp = task_hyperparams(task)?;
    let rep = learnability_report(&m, &x, &hp)?;
    let env = Envelope { tool_version: VERSION, dataset: &m.name, samples: x.rows(), dim: x.dim(), hyperparams: hp, result: &rep };
    emit(out, || to_json(&env), || learnability_csv(&m.name, &rep))
}

const LOWLEVEL_COLUMNS: [&str; 5] = ["luminance", "spatial_information", "contrast", "colorfulness", "blur"];

pub fn lowlevel(manifest: &Path, budget: usize, seed: u64, out: &OutputArgs) -> Outcome {
    let m = load_manifest(manifest)?;
    let summary = dataset_lowlevel_summary(&m, budget, seed)?;
    for (path, why) in &summary.skipped {
        eprintln!("skipped {}: {why}", path.display());
    }
    #[derive(Serialize)]
    struct LowLevelOut<'a> {
        tool_version: &'static str,
        dataset: &'a str,
        budget: usize,
        seed: u64,
        result: &'a LowLevelSummary,
    }
    let o = LowLevelOut { tool_version: VERSION, dataset: &m.name, budget, seed, result: &summary };
    emit(out, || to_json(&o), || {
        let mut header = vec!["dataset", "frames_sampled"];
        header.extend(LOWLEVEL_COLUMNS);
        let mut row = vec![csv_field(&m.name), summary.frames_sampled.to_string()];
        row.extend(summary.spreads.to_array().map(num));
        csv_table(&header, [row])
    })
}

#[derive(Serialize)]
struct ValidationOut {
    tool_version: &'static str,
    tolerance: f64,
    fixture: Vec<FixtureRow>,
    directional: Vec<DirectionalReport>,
    failures: Vec<String>,
    passed: bool,
}

pub fn validate(tolerance: f64, seeds: u64, out: &OutputArgs) -> Outcome {
    let fixture = fixture_check(tolerance)?;
    let hp = Hyperparams::default();
    let directional = (0..seeds)
        .map(|s| directional_suite(&SyntheticSpec::directional_default(s), &hp))
        .collect::<edm_core::Result<Vec<_>>>()?;

    const METRICS: [&str; 3] = ["srcc", "krcc", "plcc"];
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    for r in &fixture {
        let got = [r.computed.srcc, r.computed.krcc, r.computed.plcc];
        let want = [r.expected.srcc, r.expected.krcc, r.expected.plcc];
        for (k, dev) in r.deviations().iter().enumerate() {
            let ok = *dev <= tolerance;
            if !ok {
                failures.push(format!("fixture {} {}: deviation {dev}", r.group, METRICS[k]));
            }
            rows.push(vec![
                "fixture".into(),
                format!("{} {}", r.group, METRICS[k]),
                num(got[k]),
                num(want[k]),
                num(*dev),
                status(ok),
            ]);
        }
    }
    for rep in &directional {
        for s in &rep.scenarios {
            for c in &s.checks {
                let item = format!("seed {} {}: {} {:?}", rep.seed, s.scenario, c.quantity, c.expected).to_lowercase();
                if !c.passed {
                    failures.push(format!("directional {item}"));
                }
                rows.push(vec![
                    "directional".into(),
                    csv_field(&item),
                    num(c.after),
                    num(c.before),
                    num(c.after - c.before),
                    status(c.passed),
                ]);
            }
        }
    }
    let passed = failures.is_empty();
    let first = failures.first().cloned();
    let report = ValidationOut { tool_version: VERSION, tolerance, fixture, directional, failures, passed };
    emit(out, || to_json(&report), || {
        csv_table(&["check", "item", "value", "reference", "deviation", "status"], rows)
    })?;
    match first {
        None => Ok(()),
        Some(f) => Err(Failure {
            code: 2,
            message: format!("check failed: {f} ({} failing checks in total)", report.failures.len()),
        }),
    }
}

fn status(ok: bool) -> String {
    if ok { "PASS" } else { "FAIL" }.into()
}

#[derive(Debug, Serialize)]
pub struct MetricReport {
    pub tool_version: &'static str,
    pub dataset: String,
    pub samples: usize,
    /// Total frame count over all episodes.
    pub size: usize,
    pub dim: usize,
    pub diversity: EntropyResult,
    pub learnability: LearnabilityReport,
    pub lowlevel: Option<LowLevelSummary>,
    pub hyperparams: Hyperparams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

fn write_feature_csv(dir: &Path, name: &str, m: &DatasetManifest, x: &FeatureMatrix) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
    let path = dir.join(format!("{}.csv", file_stem(name)));
    let mut s = String::from("episode_id,task_id");
    for j in 0..x.dim() {
        let _ = write!(s, ",f{j}");
    }
    s.push('\n');
    for (ep, row) in m.episodes.iter().zip(x.iter_rows()) {
        let _ = write!(s, "{},{}", ep.episode_id, ep.task_id);
        for v in row {
            let _ = write!(s, ",{}", num(*v));
        }
        s.push('\n');
    }
    fs::write(&path, s).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    Ok(path)
}

#[allow(clippy::too_many_arguments)]
pub fn report(
    manifests: &[PathBuf],
    kernel: &KernelArgs,
    method: &MethodArgs,
    task: &TaskArgs,
    budget: usize,
    timings: bool,
    emit_features: Option<&Path>,
    out: &OutputArgs,
) -> Outcome {
    let mut reports = Vec::with_capacity(manifests.len());
    for path in manifests {
        let mut clock = BTreeMap::new();
        let t0 = Instant::now();
        let (m, x) = load(path)?;
        clock.insert("load".to_string(), t0.elapsed().as_secs_f64());
        let hp = hyperparams(&x, kernel, Some(task))?;

        let t = Instant::now();
        let diversity = entropy(&x, &hp, kernel, method)?;
        clock.insert("diversity".into(), t.elapsed().as_secs_f64());

        let t = Instant::now();
        let learnability = learnability_report(&m, &x, &hp)?;
        clock.insert("learnability".into(), t.elapsed().as_secs_f64());

        let has_frames = m.episodes.iter().any(|e| e.frame_refs.as_ref().is_some_and(|f| !f.is_empty()));
        let t = Instant::now();
        let lowlevel = if has_frames { Some(dataset_lowlevel_summary(&m, budget, method.seed)?) } else { None };
        clock.insert("lowlevel".into(), t.elapsed().as_secs_f64());

        if let Some(dir) = emit_features {
            let written = write_feature_csv(dir, &m.name, &m, &x)?;
            eprintln!("wrote {}", written.display());
        }
        reports.push(MetricReport {
            tool_version: VERSION,
            dataset: m.name.clone(),
            samples: x.rows(),
            size: m.lengths().iter().sum(),
            dim: x.dim(),
            diversity,
            learnability,
            lowlevel,
            hyperparams: hp,
            timings: timings.then_some(clock),
        });
    }
    emit(out, || to_json(&reports), || {
        let mut header = vec!["dataset", "samples", "size", "dims"];
        header.extend(LOWLEVEL_COLUMNS);
        header.extend(["h_data", "l_dataset"]);
        csv_table(
            &header,
            reports.iter().map(|r| {
                let mut row = vec![csv_field(&r.dataset), r.samples.to_string(), r.size.to_string(), r.dim.to_string()];
                match &r.lowlevel {
                    Some(l) => row.extend(l.spreads.to_array().map(num)),
                    None => row.extend(std::iter::repeat_n(String::new(), 5)),
                }
                row.push(num(r.diversity.value));
                row.push(num(r.learnability.l_dataset));
                row
            }),
        )
    })
}
