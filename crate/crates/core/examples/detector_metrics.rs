//! Train the binary OOD detector on InD data vs given outliers and score
//! it with FPR95 and AUROC.
//!
//! cargo run --release --example detector_metrics

use medix::detector::{auroc, fpr_at_tpr, train_ood_detector, DetectionMetrics, DetectorConfig};
use medix::synth::{held_out, MixtureSpec};

fn main() -> medix::Result<()> {
    let spec = MixtureSpec { seed: 3, ..MixtureSpec::three_gaussians() };
    let (train, ood_train) = held_out(&spec, 100, 150)?;
    let fit = train_ood_detector(&train, &ood_train, &DetectorConfig::default())?;
    println!("detector w = {:?}, b = {:.3}; final loss {:.4}", fit.detector.weights, fit.detector.bias, fit.loss_history.last().unwrap());

    let (test_in, test_out) = held_out(&MixtureSpec { seed: 4, ..spec }, 200, 600)?;
    let s_in: Vec<f64> = test_in.features().iter().map(|x| fit.detector.score(x)).collect();
    let s_out: Vec<f64> = test_out.iter().map(|x| fit.detector.score(x)).collect();
    let metrics = DetectionMetrics {
        fpr95: fpr_at_tpr(&s_in, &s_out, 0.95)?,
        auroc: auroc(&s_in, &s_out)?,
        tpr: s_in.iter().filter(|&&s| s > 0.0).count() as f64 / s_in.len() as f64,
        ind_acc: fit.classifier.as_ref().map(|c| medix::detector::ind_accuracy(c, &test_in)),
        err_in: None,
        err_out: None,
    };
    println!("{metrics}");
    println!("{}\n{}", DetectionMetrics::CSV_HEADER, metrics.csv_row());
    Ok(())
}
