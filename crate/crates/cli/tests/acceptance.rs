//! Benchmark acceptance run: one PASS/FAIL line per criterion, non-zero
//! exit if any fails.

use std::f64::consts::PI;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use neurodecode::analysis::{
    load_run, paired_ttest, two_sided_p, CATEGORY_FILE, CURVES_SVG, METRICS_FILE, OBJECTS_SVG,
};
use neurodecode::baseline::{csp_from_covariances, csp_lda_pipeline};
use neurodecode::dataset::{
    generate_synthetic, load_epochs, parse_container, save_epochs, split, EpochSet, Split, SynthConfig, SynthMode,
    Target,
};
use neurodecode::models::{
    audit_params, gradcheck_passes, gradient_check, load_checkpoint, parse_checkpoint, save_checkpoint, Arch, Model,
    ModelSpec, Size,
};
use neurodecode::signal::{bandpass, RawRecording};
use neurodecode::training::{lr_at, restart_epochs, train, TrainConfig};
use neurodecode::Error;
use neurodecode_autodiff::SeededRng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gradients() -> Outcome {
    let mut worst = 0.0f64;
    let mut failed = Vec::new();
    for arch in Arch::ALL {
        for size in Size::ALL {
            let report = gradient_check(&ModelSpec::new(arch, size), 0).map_err(|e| e.to_string())?;
            worst = worst.max(report.max_rel_error);
            if !gradcheck_passes(&report) {
                failed.push(format!("{arch}-{size} ({:.2e})", report.max_rel_error));
            }
        }
    }
    ensure(failed.is_empty(), || format!("failed: {}", failed.join(", ")))?;
    Ok(format!("15/15 builds, max relative error {worst:.2e}"))
}

fn audit() -> Outcome {
    let budgets = audit_params().map_err(|e| e.to_string())?;
    ensure(budgets.len() == 15, || format!("{} builds audited", budgets.len()))?;
    let within = budgets.iter().filter(|b| b.within_budget()).count();
    ensure(within >= 12, || format!("only {within}/15 within ±30%"))?;
    for arch in Arch::ALL {
        let counts: Vec<usize> = budgets.iter().filter(|b| b.arch == arch).map(|b| b.actual_count).collect();
        ensure(counts.windows(2).all(|w| w[0] < w[1]), || format!("{arch} not ordered: {counts:?}"))?;
    }
    Ok(format!("{within}/15 within ±30%, sizes strictly ordered"))
}

fn scheduler() -> Outcome {
    let ends = restart_epochs(15, 2, 945);
    ensure(ends == [15, 45, 105, 225, 465, 945], || format!("{ends:?}"))?;
    let (hi, lo) = (0.05, 1e-6);
    for t_i in [15.0, 30.0, 60.0, 120.0, 240.0, 480.0] {
        let start = lr_at(0.0, t_i, hi, lo);
        let end = lr_at(t_i, t_i, hi, lo);
        let mid = lr_at(t_i / 2.0, t_i, hi, lo);
        ensure((start - hi).abs() <= 1e-12, || format!("start {start}"))?;
        ensure((end - lo).abs() <= 1e-12, || format!("end {end}"))?;
        ensure((mid - (hi + lo) / 2.0).abs() <= 1e-12, || format!("mid {mid}"))?;
    }
    Ok(format!("restarts {ends:?}, boundary identities hold"))
}

fn synth(mode: SynthMode, n_trials: usize, n_subjects: u32, snr: f64, seed: u64) -> Result<EpochSet, String> {
    let set = generate_synthetic(&SynthConfig {
        mode,
        n_trials,
        n_subjects,
        snr,
        seed,
    })
    .map_err(|e| e.to_string())?;
    split(&set, 0.2, seed).map_err(|e| e.to_string())
}

fn halves(set: &EpochSet) -> (EpochSet, EpochSet) {
    (set.subset(&set.indices_of(Split::Train)), set.subset(&set.indices_of(Split::Test)))
}

fn eegnet_final_accuracy(set: &EpochSet, epochs: usize, target: Target, seed: u64) -> Result<f64, String> {
    let (_, n_classes) = set.targets(target);
    let spec = ModelSpec::new(Arch::Eegnet, Size::Small).with_classes(n_classes);
    let mut model = Model::build(&spec, seed).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        epochs,
        seed,
        target,
        ..TrainConfig::default()
    };
    let run = train(&mut model, set, &cfg).map_err(|e| e.to_string())?;
    Ok(run.history.records.last().map_or(0.0, |r| r.test_acc))
}

fn dissociation() -> Outcome {
    let set = synth(SynthMode::Xor, 5000, 1, 0.3, 3)?;
    let (train_set, test_set) = halves(&set);
    ensure(train_set.len() == 4000 && test_set.len() == 1000, || "split sizes".into())?;
    let csp = csp_lda_pipeline(&train_set, &test_set, 3).map_err(|e| e.to_string())?.metrics.accuracy;
    let net = eegnet_final_accuracy(&set, 45, Target::Animacy, 3)?;
    let detail = format!("csp_lda {csp:.4}, eegnet-small {net:.4}, gap {:.4}", net - csp);
    ensure((0.47..=0.53).contains(&csp) && net >= 0.60 && net - csp >= 0.15, || detail.clone())?;
    Ok(detail)
}

fn linear_sanity() -> Outcome {
    let set = synth(SynthMode::Linear, 2500, 1, 1.0, 7)?;
    let (train_set, test_set) = halves(&set);
    let csp = csp_lda_pipeline(&train_set, &test_set, 3).map_err(|e| e.to_string())?.metrics.accuracy;
    let subjects = synth(SynthMode::Subject, 2500, 4, 1.0, 7)?;
    let net = eegnet_final_accuracy(&subjects, 15, Target::Subject, 7)?;
    let detail = format!("linear csp_lda {csp:.4}, eegnet-small subject {net:.4}");
    ensure(csp >= 0.95 && net >= 0.95, || detail.clone())?;
    Ok(detail)
}

fn random_spd(rng: &mut SeededRng, n: usize) -> Vec<f64> {
    let k = n + 20;
    let b: Vec<f64> = (0..n * k).map(|_| rng.normal()).collect();
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            s[i * n + j] = (0..k).map(|r| b[i * k + r] * b[j * k + r]).sum::<f64>() / k as f64;
        }
        s[i * n + i] += 0.01;
    }
    s
}

fn csp_algebra() -> Outcome {
    let n = 63;
    let mut rng = SeededRng::new(2024);
    let (mut residual, mut swap) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let s0 = random_spd(&mut rng, n);
        let s1 = random_spd(&mut rng, n);
        let sum: Vec<f64> = s0.iter().zip(&s1).map(|(a, b)| a + b).collect();
        let csp = csp_from_covariances(&s0, &s1, n, 3).map_err(|e| e.to_string())?;
        // Rows of W times (Σ0+Σ1) times Wᵀ.
        let ws: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let w = csp.eigenvector(i);
                (0..n).map(|c| (0..n).map(|r| w[r] * sum[r * n + c]).sum()).collect()
            })
            .collect();
        for (i, row) in ws.iter().enumerate() {
            let r: f64 = (0..n)
                .map(|j| {
                    let v: f64 = row.iter().zip(csp.eigenvector(j)).map(|(a, b)| a * b).sum();
                    (v - if i == j { 1.0 } else { 0.0 }).abs()
                })
                .sum();
            residual = residual.max(r);
        }
        let swapped = csp_from_covariances(&s1, &s0, n, 3).map_err(|e| e.to_string())?;
        for k in 0..n {
            swap = swap.max((swapped.eigenvalues[k] - (1.0 - csp.eigenvalues[n - 1 - k])).abs());
        }
    }
    let detail = format!("residual {residual:.2e}, swap error {swap:.2e}");
    ensure(residual < 1e-8 && swap < 1e-9, || detail.clone())?;
    Ok(detail)
}

fn fft_peak(x: &[f64]) -> f64 {
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf[..x.len() / 2].iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn filter_response() -> Outcome {
    let rate = 1000u32;
    let filter = |x: Vec<f64>| -> Result<Vec<f64>, String> {
        let rec = RawRecording::new(vec![x], vec!["a".into()], rate, vec![]).map_err(|e| e.to_string())?;
        Ok(bandpass(&rec, 1.0, 40.0).map_err(|e| e.to_string())?.data.remove(0))
    };
    let gain = |freq: f64| -> Result<f64, String> {
        let x: Vec<f64> = (0..10 * rate as usize)
            .map(|i| (2.0 * PI * freq * i as f64 / rate as f64).sin())
            .collect();
        Ok(fft_peak(&filter(x.clone())?) / fft_peak(&x))
    };
    let (g10, g60, g01) = (gain(10.0)?, gain(60.0)?, gain(0.1)?);

    let n = 4000;
    let pulse: Vec<f64> = (0..n)
        .map(|i| {
            let t = (i as f64 - 2000.0) / rate as f64;
            (-(t / 0.05).powi(2)).exp() * (2.0 * PI * 12.0 * t).cos()
        })
        .collect();
    let out = filter(pulse.clone())?;
    let xcorr = |lag: i64| -> f64 {
        (0..n as i64)
            .filter_map(|i| {
                let j = i + lag;
                (0..n as i64).contains(&j).then(|| pulse[i as usize] * out[j as usize])
            })
            .sum()
    };
    let shift = (-100..=100).max_by(|&a, &b| xcorr(a).total_cmp(&xcorr(b))).unwrap_or(i64::MAX);
    let detail = format!("gain 10 Hz {g10:.4}, 60 Hz {g60:.2e}, 0.1 Hz {g01:.2e}, shift {shift}");
    ensure(g10 >= 0.9 && g60 <= 0.1 && g01 <= 0.1 && shift == 0, || detail.clone())?;
    Ok(detail)
}

fn statistics() -> Outcome {
    let mut rng = SeededRng::new(428);
    let mut worst = 0.0f64;
    for k in 0..20 {
        let len = 10 + 20 * k;
        let a: Vec<f64> = (0..len).map(|_| rng.uniform()).collect();
        let b: Vec<f64> = (0..len).map(|_| rng.uniform()).collect();
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let nf = len as f64;
        let s: f64 = d.iter().sum();
        let ss: f64 = d.iter().map(|v| v * v).sum();
        let t = (s / nf) / ((ss - s * s / nf) / (nf - 1.0) / nf).sqrt();
        let got = paired_ttest(&a, &b).map_err(|e| e.to_string())?;
        worst = worst.max((got.t - t).abs());
    }
    ensure(worst < 1e-10, || format!("t error {worst:e}"))?;
    let table = [
        (1, 0.0, 1.0),
        (1, 1.0, 0.5),
        (1, 2.0, 0.295_167_235_300_866_56),
        (10, 0.0, 1.0),
        (10, 1.0, 0.340_893_132_302_059_79),
        (10, 2.0, 0.073_388_034_770_740_375),
        (428, 0.0, 1.0),
        (428, 1.0, 0.317_875_529_665_412_97),
        (428, 2.0, 0.046_131_693_579_261_977),
    ];
    let mut p_err = 0.0f64;
    for (df, t, p) in table {
        p_err = p_err.max((two_sided_p(t, df) - p).abs());
    }
    ensure(p_err < 1e-6, || format!("p error {p_err:e}"))?;
    let a: Vec<f64> = (0..429).map(|_| rng.uniform()).collect();
    let b: Vec<f64> = (0..429).map(|_| rng.uniform()).collect();
    let df = paired_ttest(&a, &b).map_err(|e| e.to_string())?.df;
    ensure(df == 428, || format!("df {df}"))?;
    Ok(format!("t error {worst:.1e}, p error {p_err:.1e}, df {df}"))
}

fn cli(args: &[&str], cwd: &Path) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_neurodecode"))
        .args(args)
        .current_dir(cwd)
        .env_remove("NEURODECODE_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = dir.path();
    let mut evals = Vec::new();
    for tag in ["a", "b"] {
        let data = format!("{tag}.eegb");
        let run = format!("run-{tag}");
        cli(&["synth", "--mode", "xor", "--trials", "200", "--snr", "0.5", "--seed", "11", "--out", &data], p)?;
        cli(
            &["train", "--data", &data, "--arch", "eegnet", "--epochs", "3", "--seed", "11", "--quiet", "--out", &run],
            p,
        )?;
        evals.push(cli(&["eval", "--run", &run], p)?.replace(&run, "RUN"));
    }
    for f in ["a.eegb", "a.eegb.meta.jsonl"] {
        let other = f.replacen('a', "b", 1);
        ensure(read(&p.join(f))? == read(&p.join(&other))?, || format!("{f} differs"))?;
    }
    for f in ["history.jsonl", "config.json", "predictions.csv", "model.ckpt"] {
        ensure(read(&p.join("run-a").join(f))? == read(&p.join("run-b").join(f))?, || format!("{f} differs"))?;
    }
    ensure(evals[0] == evals[1], || "eval output differs".into())?;
    Ok("epoch files, histories, checkpoints and eval output identical".into())
}

fn round_trips() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let set = synth(SynthMode::Linear, 40, 2, 1.0, 5)?;
    let path = dir.path().join("set.eegb");
    save_epochs(&set, &path).map_err(|e| e.to_string())?;
    let back = load_epochs(&path).map_err(|e| e.to_string())?;
    let same = back.meta == set.meta && back.data.iter().zip(&set.data).all(|(x, y)| x.to_bits() == y.to_bits());
    ensure(same && back.data.len() == set.data.len(), || "epoch set changed".into())?;

    let model = Model::build(&ModelSpec::new(Arch::Conformer, Size::Small), 5).map_err(|e| e.to_string())?;
    let ckpt = dir.path().join("m.ckpt");
    save_checkpoint(&model, &ckpt).map_err(|e| e.to_string())?;
    let loaded = load_checkpoint(&ckpt).map_err(|e| e.to_string())?;
    let bitwise = model.params().iter().zip(loaded.params().iter()).all(|(p, q)| {
        p.value.data().iter().zip(q.value.data()).all(|(a, b)| a.to_bits() == b.to_bits())
    });
    ensure(bitwise, || "checkpoint changed".into())?;

    let corrupt = |bytes: &[u8], parse: &dyn Fn(&[u8]) -> Result<(), Error>| -> Result<(), String> {
        let mut magic = bytes.to_vec();
        magic[0] ^= 0xff;
        let mut version = bytes.to_vec();
        version[4..8].copy_from_slice(&99u32.to_le_bytes());
        let results = [
            parse(&magic),
            parse(&version),
            parse(&bytes[..bytes.len() - 1]),
        ];
        let kinds = [
            matches!(results[0], Err(Error::BadMagic { .. })),
            matches!(results[1], Err(Error::VersionMismatch { .. })),
            matches!(results[2], Err(Error::Truncated { .. })),
        ];
        ensure(kinds.iter().all(|&k| k), || format!("{results:?}"))
    };
    corrupt(&read(&path)?, &|b| parse_container(b).map(|_| ()))?;
    corrupt(&read(&ckpt)?, &|b| parse_checkpoint(b).map(|_| ()))?;
    Ok("bitwise round trips; bad magic, version and truncation distinguished".into())
}

fn report() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = dir.path();
    cli(&["synth", "--mode", "linear", "--trials", "600", "--snr", "0.5", "--seed", "4", "--out", "d.eegb"], p)?;
    cli(
        &["train", "--data", "d.eegb", "--arch", "eegnet", "--epochs", "4", "--seed", "4", "--quiet", "--out", "net"],
        p,
    )?;
    cli(&["baseline", "--data", "d.eegb", "--seed", "4", "--out", "csp"], p)?;
    cli(&["analyze", "--runs", "net,csp", "--out", "report"], p)?;
    let out = p.join("report");

    let header = |f: &str| -> Result<String, String> {
        let text = String::from_utf8(read(&out.join(f))?).map_err(|e| e.to_string())?;
        Ok(text.lines().next().unwrap_or_default().to_string())
    };
    let metrics = header(METRICS_FILE)?;
    ensure(metrics == "model,size,accuracy,precision,recall,training_time", || metrics.clone())?;
    let categories = header(CATEGORY_FILE)?;
    ensure(categories == "label,category,n_objects,accuracy", || categories.clone())?;

    let mut bars = Vec::new();
    for f in [CURVES_SVG, OBJECTS_SVG] {
        let text = String::from_utf8(read(&out.join(f))?).map_err(|e| e.to_string())?;
        let doc = roxmltree::Document::parse(&text).map_err(|e| format!("{f}: {e}"))?;
        if f == OBJECTS_SVG {
            bars = doc
                .descendants()
                .filter_map(|n| n.attribute("data-concept")?.parse::<u32>().ok())
                .collect();
        }
    }

    // Cross-model mean accuracy per concept, recomputed from the runs.
    let runs = [load_run(&p.join("net")), load_run(&p.join("csp"))];
    let mut per: std::collections::BTreeMap<u32, [(usize, usize); 2]> = Default::default();
    for (k, run) in runs.into_iter().enumerate() {
        for row in run.map_err(|e| e.to_string())?.predictions {
            let e = per.entry(row.concept_id).or_default();
            e[k].0 += usize::from(row.prediction == row.label);
            e[k].1 += 1;
        }
    }
    let mean = |id: &u32| -> Option<f64> {
        let e = per.get(id)?;
        (e[0].1 > 0 && e[1].1 > 0).then(|| (e[0].0 as f64 / e[0].1 as f64 + e[1].0 as f64 / e[1].1 as f64) / 2.0)
    };
    let mut sorted = bars.clone();
    sorted.sort_unstable();
    let scored: Vec<u32> = per.keys().copied().filter(|id| mean(id).is_some()).collect();
    ensure(!bars.is_empty() && sorted == scored, || "bars are not a permutation of the scored objects".into())?;
    let values: Vec<f64> = bars.iter().filter_map(mean).collect();
    ensure(values.windows(2).all(|w| w[0] >= w[1]), || "bars are not in descending order".into())?;
    Ok(format!("four files, headers exact, {} ordered object bars", bars.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("gradient integrity", gradients),
        ("parameter audit", audit),
        ("scheduler", scheduler),
        ("linear/nonlinear dissociation", dissociation),
        ("linear sanity", linear_sanity),
        ("CSP algebra", csp_algebra),
        ("filter response", filter_response),
        ("statistics oracle", statistics),
        ("determinism", determinism),
        ("format round-trips", round_trips),
        ("report conformance", report),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:2} {name}: {detail} ({secs:.0}s)", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:2} {name}: {detail} ({secs:.0}s)", i + 1);
            }
        }
    }
    println!("{}/{} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
