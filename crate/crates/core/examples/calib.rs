use rlihf_core::decoder::{build_subject_dataset, loso_evaluate, DecoderHyper};
use rlihf_core::signal::{default_subjects, Preprocessor, RAW_RATE};

fn main() {
    let pre = Preprocessor::new(1.0, 20.0, RAW_RATE, 256.0).unwrap();
    for seed in [2024u64, 7, 99] {
        let subjects: Vec<_> = default_subjects()
            .iter()
            .map(|p| build_subject_dataset(p, &pre, 80, seed).unwrap())
            .collect();
        let folds = loso_evaluate(&subjects, &DecoderHyper::default()).unwrap();
        let accs: Vec<f64> = folds.iter().map(|f| f.pretrain_acc).collect();
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        let min = accs.iter().cloned().fold(1.0f64, f64::min);
        let max = accs.iter().cloned().fold(0.0f64, f64::max);
        println!("seed {seed}: mean {mean:.3} min {min:.3} max {max:.3}");
    }
}
