use neurodecode::baseline::{csp_from_covariances, csp_lda_pipeline, fit_csp, CspLdaModel};
use neurodecode::dataset::{generate_synthetic, EpochSet, SynthConfig, SynthMode};
use neurodecode::Error;
use neurodecode_autodiff::SeededRng;

const N: usize = 63;

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

fn quad(w: &[f64], s: &[f64], v: &[f64]) -> f64 {
    let n = w.len();
    (0..n).map(|a| w[a] * (0..n).map(|b| s[a * n + b] * v[b]).sum::<f64>()).sum()
}

#[test]
fn simultaneous_diagonalization_on_random_pairs() {
    let mut rng = SeededRng::new(31);
    for pair in 0..100 {
        let s0 = random_spd(&mut rng, N);
        let s1 = random_spd(&mut rng, N);
        let sum: Vec<f64> = s0.iter().zip(&s1).map(|(a, b)| a + b).collect();
        let csp = csp_from_covariances(&s0, &s1, N, 3).unwrap();

        let mut worst_row = 0.0f64;
        for i in 0..N {
            let row: f64 = (0..N)
                .map(|j| {
                    let target = if i == j { 1.0 } else { 0.0 };
                    (quad(csp.eigenvector(i), &sum, csp.eigenvector(j)) - target).abs()
                })
                .sum();
            worst_row = worst_row.max(row);
        }
        assert!(worst_row < 1e-8, "pair {pair}: residual {worst_row:e}");

        for (k, &lambda) in csp.eigenvalues.iter().enumerate() {
            let w = csp.eigenvector(k);
            let rayleigh = quad(w, &s1, w) / quad(w, &sum, w);
            assert!((rayleigh - lambda).abs() < 1e-8, "pair {pair}, k {k}");
            assert!((-1e-9..=1.0 + 1e-9).contains(&lambda));
        }
        assert!(csp.eigenvalues.windows(2).all(|p| p[0] >= p[1]));

        let swapped = csp_from_covariances(&s1, &s0, N, 3).unwrap();
        for k in 0..N {
            let mirrored = 1.0 - csp.eigenvalues[N - 1 - k];
            assert!((swapped.eigenvalues[k] - mirrored).abs() < 1e-9, "pair {pair}, k {k}");
        }
    }
}

fn noise_set(n_trials: usize, seed: u64) -> EpochSet {
    let template = generate_synthetic(&SynthConfig {
        mode: SynthMode::Linear,
        n_trials,
        n_subjects: 1,
        snr: 1.0,
        seed,
    })
    .unwrap();
    let mut rng = SeededRng::new(seed);
    let data = (0..template.data.len()).map(|_| rng.normal() as f32).collect();
    EpochSet::new(template.n_channels, template.n_samples, data, template.meta).unwrap()
}

#[test]
fn equal_class_covariances_give_half() {
    let set = noise_set(2000, 4);
    let labels: Vec<usize> = (0..set.len()).map(|i| i % 2).collect();
    let csp = fit_csp(&set, &labels, 3).unwrap();
    for &l in &csp.eigenvalues {
        assert!((l - 0.5).abs() < 0.05, "{l}");
    }
}

#[test]
fn single_class_training_is_rejected() {
    let set = noise_set(20, 1);
    let alive: Vec<usize> = (0..set.len()).filter(|&i| set.meta[i].label == 1).take(10).collect();
    let one = set.subset(&alive);
    let err = csp_lda_pipeline(&one, &one, 3).unwrap_err();
    assert!(matches!(err, Error::SingleClass(_)), "{err}");
}

fn synth(mode: SynthMode, n_trials: usize, snr: f64, seed: u64) -> EpochSet {
    generate_synthetic(&SynthConfig {
        mode,
        n_trials,
        n_subjects: 1,
        snr,
        seed,
    })
    .unwrap()
}

fn halves(set: &EpochSet, n_train: usize) -> (EpochSet, EpochSet) {
    let train = set.subset(&(0..n_train).collect::<Vec<_>>());
    let test = set.subset(&(n_train..set.len()).collect::<Vec<_>>());
    (train, test)
}

#[test]
fn scaling_trials_leaves_predictions_unchanged() {
    let set = synth(SynthMode::Linear, 400, 0.5, 2);
    let (train, test) = halves(&set, 300);
    let model = CspLdaModel::fit(&train, 3).unwrap();
    let mut scaled = test.clone();
    scaled.data.iter_mut().for_each(|v| *v *= 8.0);
    let a = model.predict(&test).unwrap();
    let b = model.predict(&scaled).unwrap();
    for ((pa, sa), (pb, sb)) in a.iter().zip(&b) {
        assert_eq!(pa, pb);
        assert!((sa - sb).abs() <= 1e-9 * sa.abs().max(1.0));
    }
}

#[test]
fn linear_mode_is_solved() {
    let (train, test) = halves(&synth(SynthMode::Linear, 2500, 1.0, 5), 2000);
    let run = csp_lda_pipeline(&train, &test, 3).unwrap();
    assert!(run.metrics.accuracy >= 0.95, "{}", run.metrics.accuracy);
}

#[test]
fn xor_mode_stays_at_chance() {
    let (train, test) = halves(&synth(SynthMode::Xor, 2500, 0.3, 5), 2000);
    let run = csp_lda_pipeline(&train, &test, 3).unwrap();
    let acc = run.metrics.accuracy;
    assert!((0.47..=0.53).contains(&acc), "{acc}");
}

#[test]
fn pipeline_is_deterministic() {
    let (train, test) = halves(&synth(SynthMode::Linear, 300, 0.4, 9), 200);
    let a = csp_lda_pipeline(&train, &test, 2).unwrap();
    let b = csp_lda_pipeline(&train, &test, 2).unwrap();
    assert_eq!(a.predictions, b.predictions);
    assert!(a.scores.iter().zip(&b.scores).all(|(x, y)| x.to_bits() == y.to_bits()));
}
