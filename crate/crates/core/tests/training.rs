use neurodecode::dataset::{generate_synthetic, split, EpochSet, SynthConfig, SynthMode, Target};
use neurodecode::metrics::classification_metrics;
use neurodecode::models::{Arch, Model, ModelSpec, Size};
use neurodecode::training::{
    cycles, evaluate, lr_at, lr_at_progress, restart_epochs, sgd_update, train, TrainConfig,
};
use neurodecode::Error;

const LR_MAX: f64 = 0.05;
const LR_MIN: f64 = 1e-6;

fn data(seed: u64) -> EpochSet {
    let set = generate_synthetic(&SynthConfig {
        mode: SynthMode::Linear,
        n_trials: 48,
        n_subjects: 1,
        snr: 1.0,
        seed,
    })
    .unwrap();
    split(&set, 0.25, seed).unwrap()
}

fn small_cfg(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: 16,
        t0: 2,
        epochs,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_epochs_change_nothing() {
    let set = data(1);
    let mut model = Model::build(&ModelSpec::new(Arch::Eegnet, Size::Small), 1).unwrap();
    let before = model.params().clone();
    let run = train(&mut model, &set, &small_cfg(0, 1)).unwrap();
    assert!(run.history.records.is_empty());
    assert!(run.history.restart_epochs.is_empty());
    for (p, q) in before.iter().zip(model.params().iter()) {
        assert_eq!(p.value.data(), q.value.data());
    }
}

#[test]
fn same_seed_gives_identical_history() {
    let set = data(2);
    let run = |seed| {
        let mut model = Model::build(&ModelSpec::new(Arch::Dgcnn, Size::Small), seed).unwrap();
        train(&mut model, &set, &small_cfg(3, seed)).unwrap()
    };
    let (a, b) = (run(5), run(5));
    assert_eq!(a.history, b.history);
    assert_eq!(a.predictions, b.predictions);
    let bits = |h: &neurodecode::training::RunHistory| -> Vec<u64> {
        h.records.iter().flat_map(|r| [r.train_loss.to_bits(), r.test_acc.to_bits()]).collect()
    };
    assert_eq!(bits(&a.history), bits(&b.history));
    assert_ne!(bits(&a.history), bits(&run(6).history));
}

#[test]
fn history_follows_the_schedule() {
    let set = data(3);
    let mut model = Model::build(&ModelSpec::new(Arch::Lstm, Size::Small), 3).unwrap();
    let run = train(&mut model, &set, &small_cfg(7, 3)).unwrap();
    let h = &run.history;
    assert_eq!(h.records.len(), 7);
    assert_eq!(h.restart_epochs, vec![2, 6, 7]);
    for (i, r) in h.records.iter().enumerate() {
        assert_eq!(r.epoch, i + 1);
        let starts_cycle = i == 0 || h.restart_epochs.contains(&i);
        assert_eq!(r.lr == LR_MAX, starts_cycle, "epoch {}: {}", r.epoch, r.lr);
    }
}

#[test]
fn lr_boundary_identities() {
    for t_i in [1.0, 15.0, 30.0, 240.0, 480.0] {
        assert!((lr_at(0.0, t_i, LR_MAX, LR_MIN) - LR_MAX).abs() <= 1e-12);
        assert!((lr_at(t_i, t_i, LR_MAX, LR_MIN) - LR_MIN).abs() <= 1e-12);
        let mid = lr_at(t_i / 2.0, t_i, LR_MAX, LR_MIN);
        assert!((mid - (LR_MAX + LR_MIN) / 2.0).abs() <= 1e-12);
    }
}

#[test]
fn restart_examples() {
    assert_eq!(restart_epochs(15, 2, 945), vec![15, 45, 105, 225, 465, 945]);
    assert_eq!(restart_epochs(15, 2, 460), vec![15, 45, 105, 225, 460]);
    assert_eq!(restart_epochs(1, 1, 3), vec![1, 2, 3]);
    let c = cycles(15, 2, 460);
    assert_eq!(c.iter().filter(|c| c.complete).count(), 4);
    assert_eq!((c[4].start, c[4].end, c[4].length), (225, 460, 240));
}

#[test]
fn lr_over_a_full_run() {
    // Ten minibatches per epoch over the cross-subject budget.
    let steps_per_epoch = 10;
    let ends = restart_epochs(15, 2, 945);
    let lrs: Vec<f64> = (0..945 * steps_per_epoch)
        .map(|s| lr_at_progress(s as f64 / steps_per_epoch as f64, 15, 2, LR_MAX, LR_MIN))
        .collect();
    let starts: Vec<usize> = std::iter::once(0).chain(ends[..ends.len() - 1].iter().copied()).collect();
    let at_max: Vec<usize> = (0..lrs.len()).filter(|&s| lrs[s] == LR_MAX).collect();
    assert_eq!(at_max, starts.iter().map(|e| e * steps_per_epoch).collect::<Vec<_>>());
    for s in 1..lrs.len() {
        if !at_max.contains(&s) {
            assert!(lrs[s] <= lrs[s - 1], "step {s}");
        }
    }
}

#[test]
fn sgd_examples() {
    let mut theta = [0.0f64];
    let mut v = [0.0f64];
    sgd_update(&mut theta, &[1.0], &mut v, 1.0, 0.9, 0.0);
    assert_eq!(theta[0], -1.0);
    sgd_update(&mut theta, &[1.0], &mut v, 1.0, 0.9, 0.0);
    assert!((theta[0] + 2.9).abs() < 1e-15);

    let mut plain = [1.0f64, -2.0];
    sgd_update(&mut plain, &[0.5, 0.25], &mut [0.0; 2], 0.1, 0.0, 0.0);
    assert_eq!(plain, [1.0 - 0.05, -2.0 - 0.025]);

    let mut still = [3.0f64, 4.0];
    sgd_update(&mut still, &[0.0; 2], &mut [0.0; 2], 0.1, 0.9, 0.0);
    assert_eq!(still, [3.0, 4.0]);

    let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut decayed = [3.0f64, 4.0];
    sgd_update(&mut decayed, &[0.0; 2], &mut [0.0; 2], 0.1, 0.9, 1e-3);
    assert!(norm(&decayed) < 5.0);
}

#[test]
fn metric_examples() {
    let m = classification_metrics(&[0, 1, 1, 0], &[0, 1, 1, 0], 2).unwrap();
    assert_eq!((m.accuracy, m.precision, m.recall), (1.0, 1.0, 1.0));

    let m = classification_metrics(&[1; 6], &[0, 1, 0, 1, 0, 1], 2).unwrap();
    assert_eq!((m.accuracy, m.recall), (0.5, 0.5));

    let m = classification_metrics(&[1, 1, 0, 0], &[1, 0, 1, 0], 2).unwrap();
    assert_eq!((m.accuracy, m.precision), (0.5, 0.5));
}

#[test]
fn evaluation_needs_trials() {
    let set = data(4);
    let model = Model::build(&ModelSpec::new(Arch::Eegnet, Size::Small), 4).unwrap();
    let empty = set.subset(&[]);
    assert!(matches!(evaluate(&model, &empty, Target::Animacy), Err(Error::EmptySplit)));
    let eval = evaluate(&model, &set, Target::Animacy).unwrap();
    assert_eq!(eval.predictions.len(), set.len());
}

#[test]
fn unsplit_data_is_rejected() {
    let set = generate_synthetic(&SynthConfig {
        mode: SynthMode::Linear,
        n_trials: 20,
        n_subjects: 1,
        snr: 1.0,
        seed: 0,
    })
    .unwrap();
    let mut model = Model::build(&ModelSpec::new(Arch::Eegnet, Size::Small), 0).unwrap();
    assert!(matches!(train(&mut model, &set, &small_cfg(1, 0)), Err(Error::EmptySplit)));
}
