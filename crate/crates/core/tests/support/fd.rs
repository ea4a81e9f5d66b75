//! Central finite-difference oracle shared by the gradient tests.

#![allow(dead_code)]

use gsda_core::attack::{adversarial_loss, RegWeights};
use gsda_core::metrics::{chamfer, hausdorff, nearest_clean};
use gsda_core::model::{Classifier, LossMode};
use gsda_core::{Point, SpectralBasis, SpectralCoeffs};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-4;
pub const MIN_GRAD: f64 = 1e-6;

/// Outcome of comparing one analytic gradient against finite differences.
#[derive(Debug, Default, Clone, Copy)]
pub struct Check {
    pub max_rel: f64,
    pub compared: usize,
    pub skipped: usize,
}

impl Check {
    pub fn merge(self, other: Check) -> Check {
        Check {
            max_rel: self.max_rel.max(other.max_rel),
            compared: self.compared + other.compared,
            skipped: self.skipped + other.skipped,
        }
    }
}

/// Compares `grad` with central differences of `f` at `x`. Entries where
/// `stable(x+h, x-h)` is false straddle a kink and are skipped.
pub fn compare(
    x: &[Point],
    grad: &[Point],
    f: impl Fn(&[Point]) -> f64,
    stable: impl Fn(&[Point], &[Point]) -> bool,
) -> Check {
    let mut out = Check::default();
    for i in 0..x.len() {
        for k in 0..3 {
            let g = grad[i][k];
            if g.abs() <= MIN_GRAD {
                continue;
            }
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[i][k] += H;
            minus[i][k] -= H;
            if !stable(&plus, &minus) {
                out.skipped += 1;
                continue;
            }
            let fd = (f(&plus) - f(&minus)) / (2.0 * H);
            let rel = (g - fd).abs() / g.abs().max(fd.abs());
            out.max_rel = out.max_rel.max(rel);
            out.compared += 1;
        }
    }
    out
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point> {
    (0..n).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect()
}

fn same_assignment(clean: &[Point], a: &[Point], b: &[Point]) -> bool {
    let na = nearest_clean(a, clean).unwrap();
    let nb = nearest_clean(b, clean).unwrap();
    na.iter().zip(&nb).all(|(x, y)| x.1 == y.1)
}

fn worst(nn: &[(f64, usize)]) -> usize {
    let mut w = 0;
    for (i, &(d, _)) in nn.iter().enumerate() {
        if d > nn[w].0 {
            w = i;
        }
    }
    w
}

fn same_worst(clean: &[Point], a: &[Point], b: &[Point]) -> bool {
    same_assignment(clean, a, b)
        && worst(&nearest_clean(a, clean).unwrap()) == worst(&nearest_clean(b, clean).unwrap())
}

pub fn classifier_check(model: &Classifier, points: &[Point], mode: LossMode) -> Check {
    let g = model.grad_input(points, mode).unwrap();
    compare(
        points,
        &g.gradient,
        |p| model.grad_input(p, mode).unwrap().loss,
        |a, b| model.activation_pattern(a) == model.activation_pattern(b) && model.activation_pattern(a) == model.activation_pattern(points),
    )
}

pub fn chamfer_check(adv: &[Point], clean: &[Point]) -> Check {
    let g = chamfer(adv, clean, true).unwrap().1.unwrap();
    compare(adv, &g, |p| chamfer(p, clean, false).unwrap().0, |a, b| same_assignment(clean, a, b))
}

pub fn hausdorff_check(adv: &[Point], clean: &[Point]) -> Check {
    let g = hausdorff(adv, clean, true).unwrap().1.unwrap();
    compare(adv, &g, |p| hausdorff(p, clean, false).unwrap().0, |a, b| same_worst(clean, a, b))
}

/// Checks `Uᵀ·∂L/∂P′` against differences taken directly in the spectral
/// variable `Δ`, with `P′ = U(x̂ + Δ)`.
pub fn spectral_chain_check(
    model: &Classifier,
    basis: &SpectralBasis,
    clean: &[Point],
    delta: &SpectralCoeffs,
    mode: LossMode,
    beta: f64,
) -> Check {
    let weights = RegWeights { chamfer: 5.0, hausdorff: 0.5 };
    let x_hat = basis.gft(clean).unwrap();
    let adv_of = |d: &[Point]| basis.igft(&x_hat.add(&SpectralCoeffs(d.to_vec())).unwrap()).unwrap();
    let adv = adv_of(&delta.0);
    let loss = adversarial_loss(model, &adv, clean, mode, beta, weights).unwrap();
    let grad = basis.gft(&loss.gradient).unwrap();
    compare(
        &delta.0,
        &grad.0,
        |d| adversarial_loss(model, &adv_of(d), clean, mode, beta, weights).unwrap().total,
        |a, b| {
            let (pa, pb) = (adv_of(a), adv_of(b));
            model.activation_pattern(&pa) == model.activation_pattern(&pb)
                && model.activation_pattern(&pa) == model.activation_pattern(&adv)
                && same_worst(clean, &pa, &pb)
                && same_worst(clean, &pa, &adv)
        },
    )
}
