//! Training integration across the full size x activation matrix.
//!
//! Small networks learn measurably within two epochs on a few hundred
//! synthetic images; middle and large ones need far longer horizons before
//! their eval loss moves reliably (oscillatory activations plus RMSProp
//! warm-up), so for them this only pins down that training composes: finite
//! losses, moving parameters, no shape or cache errors at any configuration.

use actgrad_core::data::synthetic_dataset;
use actgrad_core::network::{ActivationKind, ModelConfig, ModelSize, Network};
use actgrad_core::optim::{train_epoch, RmspropState};

#[test]
fn every_variant_trains_and_small_ones_learn() {
    let train = synthetic_dataset(32, 800); // 320 images
    for size in [ModelSize::Small, ModelSize::Middle, ModelSize::Large] {
        for activation in [ActivationKind::Relu, ActivationKind::Fourier, ActivationKind::Lc] {
            let cfg = ModelConfig::new(size, activation, 801);
            let mut net = Network::build(&cfg).unwrap();
            let params_before = net.flat_params();
            let (loss_before, _) = net.evaluate(&train.images, &train.one_hot).unwrap();
            let mut state = RmspropState::new(net.param_count());
            let mut stats = None;
            for epoch in [802u64, 803] {
                stats = Some(train_epoch(&mut net, &mut state, &train, 32, 1e-3, epoch).unwrap());
            }
            let (loss_after, _) = net.evaluate(&train.images, &train.one_hot).unwrap();
            let label = format!("{} {}", size.name(), activation.name());
            assert!(loss_after.is_finite(), "{label}: non-finite loss");
            assert!(stats.unwrap().mean_loss.is_finite(), "{label}: non-finite epoch loss");
            assert_ne!(net.flat_params(), params_before, "{label}: parameters never moved");
            if size == ModelSize::Small {
                assert!(
                    loss_after < loss_before,
                    "{label}: loss {loss_before:.4} -> {loss_after:.4}"
                );
            }
        }
    }
}
