//! The full pipeline on the 2-D three-Gaussian world, step by step:
//! classifier → reference gradient → wild gradients → filter → detector.
//!
//! cargo run --release --example mixture_pipeline [seed]

use medix::bounds::estimate_sigma;
use medix::detector::{auroc, fpr_at_tpr, train_ood_detector, DetectorConfig};
use medix::filter::{err_rates, medix_filter, FilterConfig, StopRule, WildSet};
use medix::gradients::{gradient_matrix, reference_gradient, train_ind_classifier, GradientLayout, Loss, TrainConfig};
use medix::synth::{gaussian_world, held_out, MixtureSpec};

fn main() -> medix::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let spec = MixtureSpec { seed, ..MixtureSpec::three_gaussians() };
    let world = gaussian_world(&spec)?;

    let model = train_ind_classifier(&world.train, &TrainConfig { seed, loss: Loss::SquaredError, ..TrainConfig::default() })?;
    let layout = GradientLayout { include_bias: true };
    let reference = reference_gradient(&model, &world.train, layout)?;
    let sigma_hat = estimate_sigma(&gradient_matrix(&model, world.train.features(), world.train.labels(), layout)?);
    println!("classifier loss {:.4}, ‖ref‖ = {:.2e}, σ̂ = {sigma_hat:.4}", model.meta.final_loss, reference.values().iter().map(|v| v * v).sum::<f64>().sqrt());

    let wild = WildSet::from_model(world.wild.features.clone(), world.wild.origin.clone(), &model, layout)?;
    let cfg = FilterConfig { eps_stop: 0.05 * sigma_hat, stop_rule: StopRule::IterationDrop, ..FilterConfig::for_size(wild.len()) };
    let res = medix_filter(&wild, &reference, &cfg)?;
    let rates = err_rates(&res, &wild);
    println!(
        "filter: {} flagged of {} ({} iterations); ERR_in {:.3}, OOD recall {:.3}",
        res.outlier_ids.len(),
        wild.len(),
        res.iterations(),
        rates.err_in.unwrap(),
        rates.ood_recall().unwrap()
    );

    let outliers: Vec<Vec<f64>> = res.outlier_ids.iter().map(|&i| wild.features()[i].clone()).collect();
    let fit = train_ood_detector(&world.train, &outliers, &DetectorConfig { seed, ..DetectorConfig::default() })?;
    let (test_in, test_out) = held_out(&spec, 200, 600)?;
    let s_in: Vec<f64> = test_in.features().iter().map(|x| fit.detector.score(x)).collect();
    let s_out: Vec<f64> = test_out.iter().map(|x| fit.detector.score(x)).collect();
    println!("detector: FPR95 {:.4}, AUROC {:.4}", fpr_at_tpr(&s_in, &s_out, 0.95)?, auroc(&s_in, &s_out)?);
    Ok(())
}
