//! Spectral-domain adversarial attack and a coordinate-space baseline.
//!
//! The spectral attack freezes the transform basis of the clean cloud,
//! optimizes an additive perturbation of its coefficients with Adam, clamps
//! every coefficient change to a fixed ratio of the clean coefficient, and
//! tunes the distortion penalty with an outer binary search. The best
//! successful iterate (lowest Chamfer distance) over all rounds is returned.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::metrics::{l2_shift, nearest_clean, DistortionReport};
use crate::model::{argmax, Classifier, LossMode};
use crate::optim::{Adam, AdamConfig};
use crate::spectral::{SpectralBasis, SpectralCoeffs};
use crate::Point;

/// Attack goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackMode {
    /// Force the prediction to this class.
    Targeted(usize),
    /// Any class other than the cloud's label.
    Untargeted,
}

/// Orthonormal basis the perturbation lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    /// Laplacian eigenvectors of the clean cloud's K-NN graph.
    Graph,
    /// 1D DCT-II over point-index order.
    Dct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub iterations: usize,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub k: usize,
    pub beta_init: f64,
    pub binary_search_steps: usize,
    pub w_chamfer: f64,
    pub w_hausdorff: f64,
    /// Per-coefficient ratio bound; `eps_min = -eps_max`.
    pub eps_max: f64,
    pub mode: AttackMode,
    /// Only these frequency indices may be perturbed.
    pub band_mask: Option<Range<usize>>,
    pub transform: TransformKind,
    /// Per-coordinate bound of the baseline attack.
    pub eps_xyz: f64,
    /// Stop a round once the loss stops improving (checked every tenth of
    /// the iteration budget).
    pub abort_early: bool,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            lr: 0.01,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            k: 10,
            beta_init: 10.0,
            binary_search_steps: 10,
            w_chamfer: 5.0,
            w_hausdorff: 0.5,
            eps_max: 3.0,
            mode: AttackMode::Untargeted,
            band_mask: None,
            transform: TransformKind::Graph,
            eps_xyz: 0.2,
            abort_early: true,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(String::from(m)));
        if self.iterations == 0 || self.binary_search_steps == 0 {
            return bad("iterations and binary search steps must be at least 1");
        }
        if !(self.eps_max >= 0.0) || !(self.eps_xyz >= 0.0) {
            return bad("perturbation bounds must be non-negative");
        }
        if !(self.w_chamfer >= 0.0 && self.w_hausdorff >= 0.0 && self.beta_init >= 0.0) {
            return bad("regularization weights must be non-negative");
        }
        if !(self.lr > 0.0) {
            return bad("learning rate must be positive");
        }
        if let Some(r) = &self.band_mask {
            if r.start > r.end {
                return bad("band mask range is reversed");
            }
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, beta1: self.adam_beta1, beta2: self.adam_beta2, eps: self.adam_eps }
    }
}

/// Composite loss `L_class + β (w_c·chamfer + w_h·hausdorff)` at one cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialLoss {
    pub total: f64,
    pub class_loss: f64,
    /// `w_c·chamfer + w_h·hausdorff`, before scaling by β.
    pub reg_loss: f64,
    pub chamfer: f64,
    pub hausdorff: f64,
    /// Gradient of `total` with respect to the adversarial coordinates.
    pub gradient: Vec<Point>,
    pub logits: Vec<f64>,
}

/// Weights of the Chamfer and Hausdorff terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegWeights {
    pub chamfer: f64,
    pub hausdorff: f64,
}

pub fn adversarial_loss(
    model: &Classifier,
    adv: &[Point],
    clean: &[Point],
    mode: LossMode,
    beta: f64,
    weights: RegWeights,
) -> Result<AdversarialLoss> {
    let class = model.grad_input(adv, mode)?;
    let nn = nearest_clean(adv, clean)?;
    let n = adv.len() as f64;
    let chamfer = nn.iter().map(|&(d, _)| d).sum::<f64>() / n;
    let mut worst = 0;
    for (i, &(d, _)) in nn.iter().enumerate() {
        if d > nn[worst].0 {
            worst = i;
        }
    }
    let hausdorff = nn[worst].0;
    let reg_loss = weights.chamfer * chamfer + weights.hausdorff * hausdorff;

    let mut gradient = class.gradient;
    if beta != 0.0 {
        let c_scale = beta * weights.chamfer * 2.0 / n;
        for ((g, a), &(_, j)) in gradient.iter_mut().zip(adv).zip(&nn) {
            let c = clean[j];
            for k in 0..3 {
                g[k] += c_scale * (a[k] - c[k]);
            }
        }
        let h_scale = beta * weights.hausdorff * 2.0;
        let (a, c) = (adv[worst], clean[nn[worst].1]);
        for k in 0..3 {
            gradient[worst][k] += h_scale * (a[k] - c[k]);
        }
    }
    Ok(AdversarialLoss {
        total: class.loss + beta * reg_loss,
        class_loss: class.loss,
        reg_loss,
        chamfer,
        hausdorff,
        gradient,
        logits: class.logits,
    })
}

/// Per-entry magnitude limits `eps_max·|x̂|`, zero outside `band`.
pub fn delta_bounds(x_hat: &SpectralCoeffs, eps_max: f64, band: Option<&Range<usize>>) -> SpectralCoeffs {
    SpectralCoeffs(
        x_hat
            .rows()
            .iter()
            .enumerate()
            .map(|(i, r)| {
                if band.is_none_or(|b| b.contains(&i)) {
                    [eps_max * r[0].abs(), eps_max * r[1].abs(), eps_max * r[2].abs()]
                } else {
                    [0.0; 3]
                }
            })
            .collect(),
    )
}

/// Entrywise clamp of `delta` into `[-eps_max·|x̂|, eps_max·|x̂|]`, with
/// rows outside `band` forced to zero.
pub fn project_delta(
    delta: &SpectralCoeffs,
    x_hat: &SpectralCoeffs,
    eps_max: f64,
    band: Option<&Range<usize>>,
) -> Result<SpectralCoeffs> {
    if delta.len() != x_hat.len() {
        return Err(Error::DimensionMismatch { expected: x_hat.len(), found: delta.len() });
    }
    let mut out = delta.clone();
    clamp_rows(&mut out.0, &delta_bounds(x_hat, eps_max, band).0);
    Ok(out)
}

fn clamp_rows(values: &mut [Point], bounds: &[Point]) {
    for (v, b) in values.iter_mut().zip(bounds) {
        for k in 0..3 {
            v[k] = v[k].clamp(-b[k], b[k]);
        }
    }
}

/// The optimized perturbation.
#[derive(Debug, Clone, PartialEq)]
pub enum Perturbation {
    /// Coefficient offset `Δ` in the transform domain.
    Spectral(SpectralCoeffs),
    /// Coordinate offset added directly to the points.
    Coordinate(Vec<Point>),
}

/// Class and regularization loss of one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationLoss {
    pub class_loss: f64,
    pub reg_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub adversarial: PointCloud,
    pub perturbation: Perturbation,
    pub success: bool,
    pub predicted_label: usize,
    pub distortion: DistortionReport,
    pub beta_used: f64,
    pub iterations_run: usize,
    pub loss_trace: Vec<IterationLoss>,
}

/// Optimization variable of one attack flavour.
trait Variable {
    fn len(&self) -> usize;
    /// Point coordinates for the current variable value.
    fn points(&self, value: &[Point]) -> Result<Vec<Point>>;
    /// Chain rule from a coordinate gradient to a variable gradient.
    fn pull_back(&self, grad: &[Point]) -> Result<Vec<Point>>;
    fn bounds(&self) -> &[Point];
    fn finish(&self, value: Vec<Point>) -> Perturbation;
}

struct SpectralVariable<'a> {
    basis: &'a SpectralBasis,
    x_hat: SpectralCoeffs,
    bounds: SpectralCoeffs,
}

impl Variable for SpectralVariable<'_> {
    fn len(&self) -> usize {
        self.x_hat.len()
    }

    fn points(&self, delta: &[Point]) -> Result<Vec<Point>> {
        let coeffs: Vec<Point> = self
            .x_hat
            .rows()
            .iter()
            .zip(delta)
            .map(|(x, d)| [x[0] + d[0], x[1] + d[1], x[2] + d[2]])
            .collect();
        self.basis.igft(&SpectralCoeffs(coeffs))
    }

    fn pull_back(&self, grad: &[Point]) -> Result<Vec<Point>> {
        Ok(self.basis.gft(grad)?.0)
    }

    fn bounds(&self) -> &[Point] {
        self.bounds.rows()
    }

    fn finish(&self, value: Vec<Point>) -> Perturbation {
        Perturbation::Spectral(SpectralCoeffs(value))
    }
}

struct CoordinateVariable<'a> {
    clean: &'a [Point],
    bounds: Vec<Point>,
}

impl Variable for CoordinateVariable<'_> {
    fn len(&self) -> usize {
        self.clean.len()
    }

    fn points(&self, offset: &[Point]) -> Result<Vec<Point>> {
        Ok(self
            .clean
            .iter()
            .zip(offset)
            .map(|(p, o)| [p[0] + o[0], p[1] + o[1], p[2] + o[2]])
            .collect())
    }

    fn pull_back(&self, grad: &[Point]) -> Result<Vec<Point>> {
        Ok(grad.to_vec())
    }

    fn bounds(&self) -> &[Point] {
        &self.bounds
    }

    fn finish(&self, value: Vec<Point>) -> Perturbation {
        Perturbation::Coordinate(value)
    }
}

/// Graph spectral domain attack on `clean` against `model`.
pub fn gsda_attack(model: &Classifier, clean: &PointCloud, config: &AttackConfig) -> Result<AttackResult> {
    config.validate()?;
    let basis = match config.transform {
        TransformKind::Graph => SpectralBasis::from_cloud(clean, config.k)?,
        TransformKind::Dct => SpectralBasis::dct(clean.len()),
    };
    gsda_attack_with_basis(model, clean, &basis, config)
}

/// Same as [`gsda_attack`] with a caller-supplied basis for `clean`.
pub fn gsda_attack_with_basis(
    model: &Classifier,
    clean: &PointCloud,
    basis: &SpectralBasis,
    config: &AttackConfig,
) -> Result<AttackResult> {
    config.validate()?;
    let x_hat = basis.gft(clean.points())?;
    if let Some(r) = &config.band_mask {
        if r.end > x_hat.len() {
            return Err(Error::BadRange { start: r.start, end: r.end, len: x_hat.len() });
        }
    }
    let bounds = delta_bounds(&x_hat, config.eps_max, config.band_mask.as_ref());
    let var = SpectralVariable { basis, x_hat, bounds };
    optimize(model, clean, &var, config)
}

/// Coordinate-space baseline: same loss, optimizer and penalty search, but
/// the variable is a per-point offset clamped to `±eps_xyz`.
pub fn xyz_baseline_attack(model: &Classifier, clean: &PointCloud, config: &AttackConfig) -> Result<AttackResult> {
    config.validate()?;
    let var = CoordinateVariable { clean: clean.points(), bounds: vec![[config.eps_xyz; 3]; clean.len()] };
    optimize(model, clean, &var, config)
}

struct Best {
    value: Vec<Point>,
    points: Vec<Point>,
    chamfer: f64,
    predicted: usize,
    beta: f64,
}

fn optimize(model: &Classifier, clean: &PointCloud, var: &dyn Variable, config: &AttackConfig) -> Result<AttackResult> {
    let true_label = clean.label();
    let loss_mode = match config.mode {
        AttackMode::Targeted(t) => {
            if t >= model.num_classes() {
                return Err(Error::BadLabel { label: Some(t), classes: model.num_classes() });
            }
            if true_label == Some(t) {
                return Err(Error::InvalidConfig(format!("target {t} equals the true label")));
            }
            LossMode::Targeted(t)
        }
        AttackMode::Untargeted => match true_label {
            Some(y) if y < model.num_classes() => LossMode::Untargeted(y),
            label => return Err(Error::BadLabel { label, classes: model.num_classes() }),
        },
    };
    let succeeded = |pred: usize| match config.mode {
        AttackMode::Targeted(t) => pred == t,
        AttackMode::Untargeted => Some(pred) != true_label,
    };
    let weights = RegWeights { chamfer: config.w_chamfer, hausdorff: config.w_hausdorff };
    let clean_pts = clean.points();
    let n = var.len();
    let check_every = (config.iterations / 10).max(1);

    let mut best: Option<Best> = None;
    let mut trace = Vec::new();
    let mut iterations_run = 0;
    let mut beta = config.beta_init;
    let (mut beta_lo, mut beta_hi) = (0.0f64, None::<f64>);
    let mut last_value = vec![[0.0; 3]; n];
    let mut last_beta = beta;

    for _round in 0..config.binary_search_steps {
        let mut value = vec![[0.0; 3]; n];
        let mut adam = Adam::new(config.adam(), 3 * n);
        let mut round_success = false;
        let mut last_check = f64::INFINITY;

        for it in 0..config.iterations {
            let pts = var.points(&value)?;
            let loss = adversarial_loss(model, &pts, clean_pts, loss_mode, beta, weights)?;
            iterations_run += 1;
            trace.push(IterationLoss { class_loss: loss.class_loss, reg_loss: loss.reg_loss });

            let pred = argmax(&loss.logits);
            if succeeded(pred) {
                round_success = true;
                if best.as_ref().is_none_or(|b| loss.chamfer < b.chamfer) {
                    best = Some(Best { value: value.clone(), points: pts, chamfer: loss.chamfer, predicted: pred, beta });
                }
            }

            if config.abort_early && it % check_every == 0 {
                if last_check.is_finite() && last_check - loss.total <= 1e-4 * last_check.abs() {
                    break;
                }
                last_check = loss.total;
            }

            let grad = var.pull_back(&loss.gradient)?;
            adam.step(flatten_mut(&mut value), flatten(&grad));
            clamp_rows(&mut value, var.bounds());
            debug_assert!(value
                .iter()
                .zip(var.bounds())
                .all(|(v, b)| (0..3).all(|k| v[k].abs() <= b[k])));
        }
        last_value = value;
        last_beta = beta;

        if round_success {
            beta_lo = beta;
            beta = match beta_hi {
                None => beta * 10.0,
                Some(hi) => (beta_lo + hi) / 2.0,
            };
        } else {
            beta_hi = Some(beta);
            beta = if beta_lo == 0.0 { beta / 10.0 } else { (beta_lo + beta) / 2.0 };
        }
    }

    let (value, points, success, predicted, beta_used) = match best {
        Some(b) => (b.value, b.points, true, b.predicted, b.beta),
        None => {
            let pts = var.points(&last_value)?;
            let pred = model.predict(&pts);
            (last_value, pts, succeeded(pred), pred, last_beta)
        }
    };
    let perturbation = var.finish(value);
    let e_delta = match &perturbation {
        Perturbation::Spectral(d) => d.norm(),
        // Coordinate offsets have the same norm in every orthonormal basis.
        Perturbation::Coordinate(_) => l2_shift(&points, clean_pts)?,
    };
    let distortion = DistortionReport {
        d_norm: l2_shift(&points, clean_pts)?,
        d_c: crate::metrics::chamfer(&points, clean_pts, false)?.0,
        d_h: crate::metrics::hausdorff(&points, clean_pts, false)?.0,
        e_delta,
    };
    Ok(AttackResult {
        adversarial: clean.with_points(points)?,
        perturbation,
        success,
        predicted_label: predicted,
        distortion,
        beta_used,
        iterations_run,
        loss_trace: trace,
    })
}

fn flatten(v: &[Point]) -> &[f64] {
    v.as_flattened()
}

fn flatten_mut(v: &mut [Point]) -> &mut [f64] {
    v.as_flattened_mut()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    #[test]
    fn projection_examples() {
        let x_hat = SpectralCoeffs(vec![[2.0, 0.0, -1.0]]);
        let delta = SpectralCoeffs(vec![[1.5, 0.7, 0.2]]);
        let p = project_delta(&delta, &x_hat, 0.5, None).unwrap();
        assert_eq!(p.0[0], [1.0, 0.0, 0.2]);
        assert_eq!(project_delta(&p, &x_hat, 0.5, None).unwrap(), p);

        let x_hat = SpectralCoeffs(vec![[1.0; 3], [1.0; 3], [1.0; 3]]);
        let delta = SpectralCoeffs(vec![[0.1; 3], [0.1; 3], [0.1; 3]]);
        let p = project_delta(&delta, &x_hat, 1.0, Some(&(1..2))).unwrap();
        assert_eq!(p.0, vec![[0.0; 3], [0.1; 3], [0.0; 3]]);
    }

    #[test]
    fn beta_zero_loss_is_class_loss() {
        let model = Classifier::new(ModelConfig::with_widths(&[8, 16], 8, 3, 1)).unwrap();
        let clean = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let adv = [[0.1, 0.0, 0.0], [1.0, 0.2, 0.0], [0.0, 1.0, 0.3]];
        let w = RegWeights { chamfer: 5.0, hausdorff: 0.5 };
        let l = adversarial_loss(&model, &adv, &clean, LossMode::Untargeted(0), 0.0, w).unwrap();
        let g = model.grad_input(&adv, LossMode::Untargeted(0)).unwrap();
        assert_eq!(l.total, g.loss);
        assert_eq!(l.gradient, g.gradient);

        let same = adversarial_loss(&model, &clean, &clean, LossMode::Untargeted(0), 10.0, w).unwrap();
        assert_eq!(same.reg_loss, 0.0);
        let p = model.forward(&clean).probabilities[0];
        assert!((same.total - libm::log(p)).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(AttackConfig { iterations: 0, ..AttackConfig::default() }.validate().is_err());
        assert!(AttackConfig { eps_max: -1.0, ..AttackConfig::default() }.validate().is_err());
        assert!(AttackConfig::default().validate().is_ok());
    }
}
