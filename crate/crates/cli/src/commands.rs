use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use neurodecode::analysis::{emit_report, load_run, peak_metric, ExtractionMode, ReportOptions};
use neurodecode::baseline::{csp_lda_pipeline, CspLdaModel};
use neurodecode::dataset::{
    build_task, generate_raw, generate_synthetic, load_epochs, load_raw, save_epochs, save_raw, split, EpochSet, Split,
    SynthConfig, Target, Task, TrialMeta,
};
use neurodecode::metrics::classification_metrics;
use neurodecode::models::{
    audit_params, gradcheck_passes, gradient_check, Arch, Model, ModelSpec, Size, BUDGET_TOLERANCE,
};
use neurodecode::signal::{run_pipeline, PipelineConfig};
use neurodecode::training::{
    load_history, train_with, write_baseline_run, write_manifest, write_training_run, EpochRecord, RunConfig,
    RunHistory, RunManifest, TrainConfig, CONFIG_FILE, HISTORY_FILE, MODEL_FILE, PREDICTIONS_FILE,
    SINGLE_SUBJECT_EPOCHS,
};
use neurodecode::Error;
use serde_json::json;

use crate::{AnalyzeArgs, BaselineArgs, Command, EvalArgs, GradcheckArgs, PreprocessArgs, SynthArgs, TrainArgs};

const SINGLE_SUBJECT_DROPOUT: f64 = 0.5;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        if e.is_numeric() {
            return Failure::Numeric(msg);
        }
        match e {
            Error::InvalidConfig(_) | Error::BandOutOfRange { .. } | Error::UnknownSubject(_) | Error::SplitTooSmall { .. } => {
                Failure::Usage(msg)
            }
            _ => Failure::Data(msg),
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

pub fn run(command: Command) -> Outcome {
    match command {
        Command::Synth(a) => synth(a),
        Command::Preprocess(a) => preprocess(a),
        Command::Train(a) => train(a),
        Command::Baseline(a) => baseline(a),
        Command::Eval(a) => eval(a),
        Command::Analyze(a) => analyze(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::AuditParams => audit(),
    }
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

struct ManifestDraft {
    config_path: Option<PathBuf>,
    config: serde_json::Value,
    seed: u64,
    started: f64,
}

impl ManifestDraft {
    fn new(config_path: Option<&Path>, config: serde_json::Value, seed: u64) -> Self {
        ManifestDraft {
            config_path: config_path.map(Path::to_path_buf),
            config,
            seed,
            started: now(),
        }
    }

    fn finish(self, artifacts: &[&str], training_time: Option<f64>) -> RunManifest {
        RunManifest {
            command: command_line(),
            config_path: self.config_path,
            config: self.config,
            seed: self.seed,
            artifacts: artifacts.iter().map(|s| s.to_string()).collect(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: self.started,
            finished_unix: now(),
            training_time_secs: training_time,
        }
    }
}

/// Manifest of a single-file output, written next to it.
fn sidecar_manifest(out: &Path, manifest: &RunManifest) -> Outcome {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    let path = out.with_file_name(name);
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Outcome<T> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn synth(a: SynthArgs) -> Outcome {
    let cfg = SynthConfig {
        mode: a.mode,
        n_trials: a.trials,
        n_subjects: a.subjects,
        snr: a.snr,
        seed: a.seed,
    };
    let draft = ManifestDraft::new(None, json!({ "synth": &cfg, "raw": a.raw }), a.seed);
    if a.raw {
        let (rec, meta) = generate_raw(&cfg)?;
        save_raw(&rec, &meta, &a.out)?;
    } else {
        save_epochs(&generate_synthetic(&cfg)?, &a.out)?;
    }
    let name = a.out.file_name().unwrap_or_default().to_string_lossy().into_owned();
    sidecar_manifest(&a.out, &draft.finish(&[&name], None))?;
    println!("wrote {} trials to {}", a.trials, a.out.display());
    Ok(())
}

fn preprocess(a: PreprocessArgs) -> Outcome {
    let cfg: PipelineConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => PipelineConfig::default(),
    };
    let draft = ManifestDraft::new(a.config.as_deref(), json!(&cfg), 0);
    let (rec, meta) = load_raw(&a.input)?;
    let out = run_pipeline(&rec, &cfg)?;
    let mut data = Vec::new();
    let mut kept: Vec<TrialMeta> = Vec::new();
    for (id, epoch) in &out.epochs {
        let m = meta
            .iter()
            .find(|m| m.trial_id == *id)
            .ok_or_else(|| Failure::Data(format!("event for trial {id} has no metadata")))?;
        data.extend_from_slice(epoch);
        kept.push(m.clone());
    }
    let set = EpochSet::new(rec_channels(&out), neurodecode::signal::N_SAMPLES, data, kept)?;
    save_epochs(&set, &a.out)?;
    let name = a.out.file_name().unwrap_or_default().to_string_lossy().into_owned();
    sidecar_manifest(&a.out, &draft.finish(&[&name], None))?;
    println!(
        "kept {} epochs, skipped {} near the recording edges",
        set.len(),
        out.skipped.len()
    );
    Ok(())
}

fn rec_channels(_out: &neurodecode::signal::PipelineOutput) -> usize {
    neurodecode::signal::N_CHANNELS
}

/// Tasks named by `--task`.
fn parse_tasks(spec: &str, data: &EpochSet) -> Outcome<Vec<Task>> {
    match spec.strip_prefix("single:") {
        Some("all") => {
            let mut ids: Vec<u32> = data.meta.iter().map(|m| m.subject).collect();
            ids.sort_unstable();
            ids.dedup();
            Ok(ids.into_iter().map(Task::SingleSubject).collect())
        }
        Some(list) if list.contains(',') => list
            .split(',')
            .map(|id| {
                id.trim()
                    .parse()
                    .map(Task::SingleSubject)
                    .map_err(|_| Failure::Usage(format!("invalid subject id {id:?}")))
            })
            .collect(),
        _ => spec.parse::<Task>().map(|t| vec![t]).map_err(Failure::Usage),
    }
}

/// The data restricted to `task`, with a seeded split if it has no test trials.
fn prepare(data: &EpochSet, task: Task, test_frac: f64, seed: u64) -> Outcome<EpochSet> {
    let set = build_task(data, task)?;
    if set.is_empty() {
        return Err(Failure::Data(format!("no trials for task {task}")));
    }
    if set.meta.iter().any(|m| m.split == Split::Test) {
        Ok(set)
    } else {
        Ok(split(&set, test_frac, seed)?)
    }
}

fn train(a: TrainArgs) -> Outcome {
    let data = load_epochs(&a.data)?;
    let tasks = parse_tasks(&a.task, &data)?;
    let single = tasks.iter().any(|t| matches!(t, Task::SingleSubject(_)));
    if single && a.size != Size::Small {
        return Err(Failure::Usage("single-subject runs use small models only".into()));
    }
    let mut cfg: TrainConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    if a.config.is_none() && single {
        cfg.epochs = SINGLE_SUBJECT_EPOCHS;
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(t) = a.target {
        cfg.target = t;
    }
    if let Some(v) = a.lr_max {
        cfg.lr_max = v;
    }
    if let Some(v) = a.lr_min {
        cfg.lr_min = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    cfg.validate()?;
    let dropout = a
        .dropout
        .unwrap_or(if single { SINGLE_SUBJECT_DROPOUT } else { a.size.default_dropout() });

    let job = |task: Task, out: &Path| -> Outcome {
        let set = prepare(&data, task, a.test_frac, cfg.seed)?;
        let (_, n_classes) = set.targets(cfg.target);
        let spec = ModelSpec::new(a.arch, a.size)
            .with_dropout(dropout)
            .with_classes(n_classes);
        train_one(&spec, &set, &cfg, out, a.config.as_deref(), a.quiet, task)
    };
    if tasks.len() == 1 {
        return job(tasks[0], &a.out);
    }
    let next = AtomicUsize::new(0);
    let failures = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..a.jobs.clamp(1, tasks.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&task) = tasks.get(i) else { break };
                let Task::SingleSubject(id) = task else { unreachable!("only single-subject tasks fan out") };
                if let Err(e) = job(task, &a.out.join(format!("subject-{id:02}"))) {
                    failures.lock().expect("no panics while locked").push((id, e));
                }
            });
        }
    });
    let mut failures = failures.into_inner().expect("threads joined");
    failures.sort_by_key(|f| f.0);
    match failures.into_iter().next() {
        None => Ok(()),
        Some((id, e)) => Err(match e {
            Failure::Usage(m) => Failure::Usage(format!("subject {id}: {m}")),
            Failure::Data(m) => Failure::Data(format!("subject {id}: {m}")),
            Failure::Numeric(m) => Failure::Numeric(format!("subject {id}: {m}")),
        }),
    }
}

fn train_one(
    spec: &ModelSpec,
    set: &EpochSet,
    cfg: &TrainConfig,
    out: &Path,
    config_path: Option<&Path>,
    quiet: bool,
    task: Task,
) -> Outcome {
    let draft = ManifestDraft::new(
        config_path,
        json!({ "train": cfg, "spec": spec, "task": task.to_string() }),
        cfg.seed,
    );
    let mut model = Model::build(spec, cfg.seed)?;
    let started = Instant::now();
    let label = format!("{}-{} {task}", spec.arch, spec.size);
    let run = train_with(&mut model, set, cfg, |r: &EpochRecord| {
        if !quiet {
            eprintln!(
                "{label} epoch {:4} lr {:.5} loss {:.4} train {:.4} test {:.4}",
                r.epoch, r.lr, r.train_loss, r.train_acc, r.test_acc
            );
        }
    })?;
    let elapsed = started.elapsed().as_secs_f64();
    let test = set.subset(&set.indices_of(Split::Test));
    let (labels, _) = test.targets(cfg.target);
    write_training_run(
        out,
        &run.history,
        &model,
        &test.meta,
        &labels,
        &run.predictions,
        &run.scores,
    )?;
    let manifest = draft.finish(
        &[CONFIG_FILE, HISTORY_FILE, MODEL_FILE, PREDICTIONS_FILE],
        Some(elapsed),
    );
    write_manifest(out, &manifest)?;
    if let Some(last) = run.history.records.last() {
        println!("{label}: final test accuracy {:.4} in {elapsed:.1}s", last.test_acc);
    }
    Ok(())
}

fn baseline(a: BaselineArgs) -> Outcome {
    let data = load_epochs(&a.data)?;
    let set = prepare(&data, Task::CrossSubject, a.test_frac, a.seed)?;
    let draft = ManifestDraft::new(None, json!({ "filter_pairs": a.m, "test_frac": a.test_frac }), a.seed);
    let train = set.subset(&set.indices_of(Split::Train));
    let test = set.subset(&set.indices_of(Split::Test));
    let started = Instant::now();
    let run = csp_lda_pipeline(&train, &test, a.m)?;
    let elapsed = started.elapsed().as_secs_f64();

    let (train_labels, n_classes) = train.targets(Target::Animacy);
    let train_pred: Vec<usize> = CspLdaModel::predict(&run.model, &train)?
        .into_iter()
        .map(|p| p.0)
        .collect();
    let train_acc = classification_metrics(&train_pred, &train_labels, n_classes)?.accuracy;
    let m = &run.metrics;
    let history = RunHistory {
        config: RunConfig::CspLda { filter_pairs: a.m },
        restart_epochs: vec![0],
        records: vec![EpochRecord {
            epoch: 0,
            lr: 0.0,
            train_loss: 0.0,
            train_acc,
            test_acc: m.accuracy,
            test_precision: m.precision,
            test_recall: m.recall,
            test_class_precision: m.class_precision.clone(),
            test_class_recall: m.class_recall.clone(),
        }],
    };
    let (labels, _) = test.targets(Target::Animacy);
    write_baseline_run(&a.out, &history, &test.meta, &labels, &run.predictions, &run.scores)?;
    write_manifest(
        &a.out,
        &draft.finish(&[CONFIG_FILE, HISTORY_FILE, PREDICTIONS_FILE], Some(elapsed)),
    )?;
    if run.model.lda.underdetermined {
        eprintln!("warning: fewer training trials than features; the discriminant relies on shrinkage");
    }
    println!(
        "csp_lda: accuracy {:.4} precision {:.4} recall {:.4}",
        m.accuracy, m.precision, m.recall
    );
    Ok(())
}

fn eval(a: EvalArgs) -> Outcome {
    let history = load_history(&a.run)?;
    println!("run {} ({})", a.run.display(), history.config.model_name());
    for mode in ExtractionMode::ALL {
        let p = peak_metric(&history, mode)?;
        println!(
            "{mode:10} {:.4} (epoch {}, cycle {})",
            p.value,
            p.epoch,
            p.cycle_index + 1
        );
    }
    if let Some(last) = history.records.last() {
        println!(
            "final      {:.4} precision {:.4} recall {:.4} (epoch {})",
            last.test_acc, last.test_precision, last.test_recall, last.epoch
        );
    }
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> Outcome {
    let draft = ManifestDraft::new(
        None,
        json!({ "runs": &a.runs, "mode": a.mode.name(), "aggregation": a.aggregation.to_string() }),
        0,
    );
    let runs = a.runs.iter().map(|d| load_run(d)).collect::<Result<Vec<_>, _>>()?;
    let opts = ReportOptions {
        mode: a.mode,
        aggregation: a.aggregation,
        ..ReportOptions::default()
    };
    let report = emit_report(&runs, &a.out, &opts)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let names: Vec<String> = report
        .files
        .iter()
        .map(|f| f.file_name().unwrap_or_default().to_string_lossy().into_owned())
        .collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    write_manifest(&a.out, &draft.finish(&refs, None))?;
    for row in &report.metrics {
        println!(
            "{:12} {:7} accuracy {:.4} precision {:.4} recall {:.4}",
            row.model, row.size, row.accuracy, row.precision, row.recall
        );
    }
    println!("wrote {} files to {}", report.files.len(), a.out.display());
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> Outcome {
    let archs: Vec<Arch> = a.arch.map_or_else(|| Arch::ALL.to_vec(), |x| vec![x]);
    let sizes: Vec<Size> = a.size.map_or_else(|| Size::ALL.to_vec(), |x| vec![x]);
    let mut failed = Vec::new();
    for &arch in &archs {
        for &size in &sizes {
            let started = Instant::now();
            let report = gradient_check(&ModelSpec::new(arch, size), a.seed)?;
            let pass = gradcheck_passes(&report);
            println!(
                "{arch:12} {size:7} max rel error {:.2e} probed {:5} one-sided {:3} frozen {:3} {:6.1}s {}",
                report.max_rel_error,
                report.probed,
                report.one_sided,
                report.frozen,
                started.elapsed().as_secs_f64(),
                if pass { "PASS" } else { "FAIL" }
            );
            if !pass {
                failed.push(format!("{arch}-{size}"));
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Numeric(format!("gradient check failed for {}", failed.join(", "))))
    }
}

fn audit() -> Outcome {
    let budgets = audit_params()?;
    println!(
        "{:12} {:7} {:>10} {:>10} {:>9}  verdict",
        "model", "size", "actual", "target", "deviation"
    );
    for b in &budgets {
        println!(
            "{:12} {:7} {:>10} {:>10} {:>+8.1}%  {}",
            b.arch,
            b.size,
            b.actual_count,
            b.target_count,
            100.0 * b.deviation(),
            if b.within_budget() { "within" } else { "outside" }
        );
    }
    let within = budgets.iter().filter(|b| b.within_budget()).count();
    println!(
        "{within}/{} within ±{:.0}% of the reference counts",
        budgets.len(),
        100.0 * BUDGET_TOLERANCE
    );
    for arch in Arch::ALL {
        let counts: Vec<usize> = budgets.iter().filter(|b| b.arch == arch).map(|b| b.actual_count).collect();
        let ordered = counts.windows(2).all(|w| w[0] < w[1]);
        println!(
            "{arch:12} small < medium < large: {}",
            if ordered { "yes" } else { "no" }
        );
    }
    Ok(())
}
