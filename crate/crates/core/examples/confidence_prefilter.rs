//! Drop low-confidence wild samples before filtering.
//!
//! cargo run --release --example confidence_prefilter

use medix::filter::{Origin, WildSet};
use medix::gradients::{confidence_prefilter, train_ind_classifier, GradientLayout, TrainConfig};
use medix::synth::{gaussian_world, MixtureSpec};

fn main() -> medix::Result<()> {
    let world = gaussian_world(&MixtureSpec::three_gaussians())?;
    let model = train_ind_classifier(&world.train, &TrainConfig::default())?;
    let wild = WildSet::from_model(world.wild.features.clone(), world.wild.origin.clone(), &model, GradientLayout { include_bias: true })?;
    for threshold in [0.0, 0.6, 0.9, 0.99, 1.0] {
        let out = confidence_prefilter(&model, &wild, threshold)?;
        let (ind, ood) = out.kept.as_ref().map_or((0, 0), |k| (k.count(Origin::Ind), k.count(Origin::Ood)));
        println!(
            "threshold {threshold:<4}: kept {:>4} ({ind} InD, {ood} OOD), removed {:.2}%",
            out.kept_ids.len(),
            100.0 * out.removed_fraction
        );
    }
    Ok(())
}
