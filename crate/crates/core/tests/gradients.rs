mod support;

use gsda_core::model::{Classifier, LossMode, ModelConfig};
use gsda_core::{PointCloud, SpectralBasis, SpectralCoeffs};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::fd::{self, Check};

const INSTANCES: u64 = 6;

fn assert_check(name: &str, c: Check, tol: f64) {
    assert!(c.compared > 0, "{name}: nothing compared");
    assert!(c.max_rel < tol, "{name}: max relative error {:.3e} ({} entries)", c.max_rel, c.compared);
}

#[test]
fn classifier_input_gradient_matches_differences() {
    let model = Classifier::new(ModelConfig::new(4, 9)).unwrap();
    let mut total = Check::default();
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = fd::random_points(&mut rng, 16);
        total = total.merge(fd::classifier_check(&model, &pts, LossMode::Targeted((seed % 4) as usize)));
        total = total.merge(fd::classifier_check(&model, &pts, LossMode::Untargeted(1)));
    }
    assert_check("classifier", total, 1e-4);
}

#[test]
fn chamfer_and_hausdorff_gradients_match_differences() {
    let (mut c_total, mut h_total) = (Check::default(), Check::default());
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let clean = fd::random_points(&mut rng, 32);
        let adv = fd::random_points(&mut rng, 32);
        c_total = c_total.merge(fd::chamfer_check(&adv, &clean));
        h_total = h_total.merge(fd::hausdorff_check(&adv, &clean));
    }
    assert_check("chamfer", c_total, 1e-5);
    assert_check("hausdorff", h_total, 1e-4);
}

#[test]
fn spectral_chain_rule_matches_differences() {
    let model = Classifier::new(ModelConfig::new(4, 2)).unwrap();
    let mut total = Check::default();
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let clean = fd::random_points(&mut rng, 16);
        let basis = SpectralBasis::from_cloud(&PointCloud::new(clean.clone()).unwrap(), 4).unwrap();
        let x_hat = basis.gft(&clean).unwrap();
        let delta = SpectralCoeffs(
            x_hat.0.iter().map(|r| r.map(|v| v * rng.random_range(-0.3..0.3))).collect(),
        );
        for beta in [0.0, 3.0] {
            total = total.merge(fd::spectral_chain_check(&model, &basis, &clean, &delta, LossMode::Untargeted(0), beta));
        }
    }
    assert_check("composite", total, 1e-4);
}
