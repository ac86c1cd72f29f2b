//! Report files over a set of run directories.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::category::{category_table, Aggregation, CategoryTable};
use super::objects::{mean_profile, per_object_accuracy, ObjectAccuracyProfile};
use super::peak::{peak_metric, record_at, ExtractionMode};
use super::svg::{color, escape, red_green, Plot};
use super::ttest::paired_ttest;
use crate::dataset::{concept_table, Concept, Target, TrialMeta};
use crate::error::{Error, Result};
use crate::training::{load_history, load_predictions, read_manifest, PredictionRow, RunConfig, RunHistory};

pub const METRICS_FILE: &str = "metrics.csv";
pub const CURVES_CSV: &str = "training_curves.csv";
pub const CURVES_SVG: &str = "training_curves.svg";
pub const OBJECTS_SVG: &str = "object_comparison.svg";
pub const CATEGORY_FILE: &str = "category_table.csv";
pub const TTEST_FILE: &str = "object_ttests.csv";

#[derive(Clone, Debug)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub history: RunHistory,
    pub predictions: Vec<PredictionRow>,
    pub training_time_secs: Option<f64>,
}

impl LoadedRun {
    /// `model` or `model-size`.
    pub fn name(&self) -> String {
        match self.history.config.size() {
            Some(s) => format!("{}-{}", self.history.config.model_name(), s),
            None => self.history.config.model_name().to_string(),
        }
    }

    fn is_animacy(&self) -> bool {
        match &self.history.config {
            RunConfig::Trained { train, .. } => train.target == Target::Animacy,
            RunConfig::CspLda { .. } => true,
        }
    }

    pub fn profile(&self, concepts: &[Concept]) -> Result<ObjectAccuracyProfile> {
        let meta: Vec<TrialMeta> = self.predictions.iter().map(PredictionRow::meta).collect();
        let preds: Vec<usize> = self.predictions.iter().map(|r| r.prediction).collect();
        per_object_accuracy(&preds, &meta, concepts)
    }
}

pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    Ok(LoadedRun {
        dir: dir.to_path_buf(),
        history: load_history(dir)?,
        predictions: load_predictions(dir)?,
        training_time_secs: read_manifest(dir)?.and_then(|m| m.training_time_secs),
    })
}

#[derive(Clone, Debug)]
pub struct ReportOptions {
    pub mode: ExtractionMode,
    pub aggregation: Aggregation,
    pub concepts: Vec<Concept>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            mode: ExtractionMode::MaxLast5,
            aggregation: Aggregation::MeanOfModels,
            concepts: concept_table(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub model: String,
    pub size: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub training_time: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub metrics: Vec<MetricsRow>,
    /// Concept ids in the order of the object comparison bars.
    pub object_order: Vec<u32>,
    /// Cross-model mean accuracy matching `object_order`.
    pub object_accuracy: Vec<f64>,
    pub categories: CategoryTable,
    pub warnings: Vec<String>,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Malformed {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn metrics_row(run: &LoadedRun, mode: ExtractionMode) -> Result<MetricsRow> {
    let peak = peak_metric(&run.history, mode)?;
    let rec = record_at(&run.history, peak.epoch).ok_or(Error::EmptyHistory)?;
    let (precision, recall) = match mode {
        ExtractionMode::MaxLast5 => (rec.test_precision, rec.test_recall),
        ExtractionMode::MeanLast5 => {
            let lo = peak.epoch.saturating_sub(super::peak::PEAK_WINDOW - 1);
            let w: Vec<_> = run
                .history
                .records
                .iter()
                .filter(|r| r.epoch >= lo && r.epoch <= peak.epoch)
                .collect();
            let n = w.len() as f64;
            (
                w.iter().map(|r| r.test_precision).sum::<f64>() / n,
                w.iter().map(|r| r.test_recall).sum::<f64>() / n,
            )
        }
    };
    Ok(MetricsRow {
        model: run.history.config.model_name().into(),
        size: run.history.config.size().map(|s| s.name().to_string()).unwrap_or_default(),
        accuracy: peak.value,
        precision,
        recall,
        training_time: run.training_time_secs,
    })
}

#[derive(Serialize)]
struct CurveRow<'a> {
    model: &'a str,
    epoch: usize,
    train_acc: f64,
    test_acc: f64,
    n_runs: usize,
}

fn curves(runs: &[LoadedRun], out: &Path) -> Result<Vec<PathBuf>> {
    // model name → epoch → (train sum, test sum, count)
    let mut groups: BTreeMap<String, BTreeMap<usize, (f64, f64, usize)>> = BTreeMap::new();
    for run in runs.iter().filter(|r| matches!(r.history.config, RunConfig::Trained { .. })) {
        let g = groups.entry(run.name()).or_default();
        for r in &run.history.records {
            let e = g.entry(r.epoch).or_insert((0.0, 0.0, 0));
            e.0 += r.train_acc;
            e.1 += r.test_acc;
            e.2 += 1;
        }
    }
    let csv_path = out.join(CURVES_CSV);
    let mut w = csv_writer(&csv_path)?;
    let x_max = groups
        .values()
        .filter_map(|g| g.keys().next_back().copied())
        .max()
        .unwrap_or(1) as f64;
    let mut plot = Plot::new("Mean accuracy during training", "epoch", "accuracy", x_max);
    let mut legend = Vec::new();
    for (i, (model, g)) in groups.iter().enumerate() {
        let mut train_pts = Vec::new();
        let mut test_pts = Vec::new();
        for (&epoch, &(tr, te, n)) in g {
            let (train_acc, test_acc) = (tr / n as f64, te / n as f64);
            w.serialize(CurveRow {
                model,
                epoch,
                train_acc,
                test_acc,
                n_runs: n,
            })
            .map_err(csv_err(&csv_path))?;
            train_pts.push((epoch as f64, train_acc));
            test_pts.push((epoch as f64, test_acc));
        }
        plot.polyline(&train_pts, color(i), true, &format!("{model} train"));
        plot.polyline(&test_pts, color(i), false, &format!("{model} test"));
        legend.push((format!("{model} train"), color(i), true));
        legend.push((format!("{model} test"), color(i), false));
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    plot.legend(&legend);
    let svg_path = out.join(CURVES_SVG);
    write_text(&svg_path, &plot.finish())?;
    Ok(vec![csv_path, svg_path])
}

/// Object order for the comparison plot: descending mean accuracy, ties
/// by concept id. Objects unscored by any model are left out.
pub fn object_order(concept_ids: &[u32], mean: &[Option<f64>]) -> Vec<(u32, f64)> {
    let mut v: Vec<(u32, f64)> = concept_ids
        .iter()
        .zip(mean)
        .filter_map(|(&id, a)| a.map(|a| (id, a)))
        .collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    v
}

fn object_svg(names: &[String], profiles: &[&ObjectAccuracyProfile], order: &[(u32, f64)]) -> String {
    let n = order.len().max(1) as f64;
    let mut plot = Plot::new(
        "Per-object accuracy, ordered by cross-model mean",
        "object rank",
        "accuracy",
        n,
    );
    plot.raw(r#"<g id="objects">"#);
    let y0 = plot.y(0.0);
    for (rank, &(id, a)) in order.iter().enumerate() {
        let x = plot.x(rank as f64);
        let w = plot.x(rank as f64 + 1.0) - x;
        let y = plot.y(a);
        let bar = format!(
            r#"<rect data-concept="{id}" data-accuracy="{a:.6}" x="{x:.3}" y="{y:.3}" width="{w:.3}" height="{:.3}" fill="{}" opacity="0.45"/>"#,
            y0 - y,
            red_green(a)
        );
        plot.raw(&bar);
    }
    plot.raw("</g>");
    let mut legend = Vec::new();
    for (i, (name, p)) in names.iter().zip(profiles).enumerate() {
        let pts: Vec<(f64, f64)> = order
            .iter()
            .enumerate()
            .filter_map(|(rank, &(id, _))| {
                let slot = p.concept_ids.iter().position(|&c| c == id)?;
                p.accuracy[slot].map(|a| (rank as f64 + 0.5, a))
            })
            .collect();
        plot.polyline(&pts, color(i), false, name);
        legend.push((escape(name), color(i), false));
    }
    plot.legend(&legend.iter().map(|(n, c, d)| (n.clone(), *c, *d)).collect::<Vec<_>>());
    plot.finish()
}

#[derive(Serialize)]
struct TTestRow<'a> {
    model_a: &'a str,
    model_b: &'a str,
    t: f64,
    p: f64,
    df: usize,
    degenerate: bool,
}

/// Writes every report file for `runs` into `out`.
pub fn emit_report(runs: &[LoadedRun], out: &Path, opts: &ReportOptions) -> Result<Report> {
    if runs.is_empty() {
        return Err(Error::EmptyHistory);
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut files = Vec::new();
    let mut warnings = Vec::new();

    let metrics_path = out.join(METRICS_FILE);
    let mut w = csv_writer(&metrics_path)?;
    let mut metrics = Vec::new();
    for run in runs {
        let row = metrics_row(run, opts.mode)?;
        w.serialize(&row).map_err(csv_err(&metrics_path))?;
        metrics.push(row);
    }
    w.flush().map_err(|e| Error::io(&metrics_path, e))?;
    files.push(metrics_path);

    files.extend(curves(runs, out)?);

    let compared: Vec<&LoadedRun> = runs.iter().filter(|r| r.is_animacy()).collect();
    let names: Vec<String> = compared.iter().map(|r| r.name()).collect();
    let profiles = compared
        .iter()
        .map(|r| r.profile(&opts.concepts))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&ObjectAccuracyProfile> = profiles.iter().collect();
    let (order, categories) = if refs.is_empty() {
        warnings.push("no animacy runs: object comparison and category table are empty".into());
        (
            Vec::new(),
            CategoryTable {
                rows: Vec::new(),
                omitted: Vec::new(),
            },
        )
    } else {
        let mean = mean_profile(&refs)?;
        let ids = &refs[0].concept_ids;
        (object_order(ids, &mean), category_table(&refs, opts.aggregation)?)
    };
    for c in &categories.omitted {
        warnings.push(format!("category {c:?} has no scored objects and is omitted"));
    }
    let svg_path = out.join(OBJECTS_SVG);
    write_text(&svg_path, &object_svg(&names, &refs, &order))?;
    files.push(svg_path);

    let cat_path = out.join(CATEGORY_FILE);
    let mut w = csv_writer(&cat_path)?;
    w.write_record(["label", "category", "n_objects", "accuracy"])
        .map_err(csv_err(&cat_path))?;
    for r in &categories.rows {
        w.write_record([
            r.label.clone(),
            r.category.clone(),
            r.n_objects.to_string(),
            format!("{:.4}", r.accuracy),
        ])
        .map_err(csv_err(&cat_path))?;
    }
    w.flush().map_err(|e| Error::io(&cat_path, e))?;
    files.push(cat_path);

    if refs.len() >= 2 {
        let t_path = out.join(TTEST_FILE);
        let mut w = csv_writer(&t_path)?;
        for i in 0..refs.len() {
            for j in i + 1..refs.len() {
                let (a, b): (Vec<f64>, Vec<f64>) = refs[i]
                    .accuracy
                    .iter()
                    .zip(&refs[j].accuracy)
                    .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
                    .unzip();
                match paired_ttest(&a, &b) {
                    Ok(t) => w
                        .serialize(TTestRow {
                            model_a: &names[i],
                            model_b: &names[j],
                            t: t.t,
                            p: t.p,
                            df: t.df,
                            degenerate: t.degenerate,
                        })
                        .map_err(csv_err(&t_path))?,
                    Err(e) => warnings.push(format!("t-test {} vs {}: {e}", names[i], names[j])),
                }
            }
        }
        w.flush().map_err(|e| Error::io(&t_path, e))?;
        files.push(t_path);
    }

    Ok(Report {
        files,
        metrics,
        object_order: order.iter().map(|o| o.0).collect(),
        object_accuracy: order.iter().map(|o| o.1).collect(),
        categories,
        warnings,
    })
}
