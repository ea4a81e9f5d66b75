//! Distortion between an adversarial cloud and its clean source.
//!
//! Chamfer and Hausdorff are one-sided (adversarial → clean) and use squared
//! distances. Their gradients treat the nearest-neighbour assignment as
//! fixed, which is exact wherever that assignment is locally stable.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::dist2;
use crate::spectral::SpectralCoeffs;
use crate::Point;

/// The four reported distortion measures.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DistortionReport {
    /// Root of summed squared point shifts.
    pub d_norm: f64,
    /// Mean squared distance to the nearest clean point.
    pub d_c: f64,
    /// Max squared distance to the nearest clean point.
    pub d_h: f64,
    /// Frobenius norm of the spectral perturbation.
    pub e_delta: f64,
}

impl DistortionReport {
    pub fn measure(adv: &[Point], clean: &[Point], delta: &SpectralCoeffs) -> Result<Self> {
        Ok(Self {
            d_norm: l2_shift(adv, clean)?,
            d_c: chamfer(adv, clean, false)?.0,
            d_h: hausdorff(adv, clean, false)?.0,
            e_delta: spectral_energy_delta(delta),
        })
    }
}

/// `sqrt(Σ ‖p'_i − p_i‖²)` with index correspondence.
pub fn l2_shift(adv: &[Point], clean: &[Point]) -> Result<f64> {
    if adv.len() != clean.len() {
        return Err(Error::SizeMismatch { left: adv.len(), right: clean.len() });
    }
    Ok(libm::sqrt(adv.iter().zip(clean).map(|(a, c)| dist2(a, c)).sum()))
}

/// For every adversarial point: squared distance to, and index of, its
/// nearest clean point (lowest index on ties).
pub fn nearest_clean(adv: &[Point], clean: &[Point]) -> Result<Vec<(f64, usize)>> {
    if adv.is_empty() || clean.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(adv
        .iter()
        .map(|a| {
            let mut best = (f64::INFINITY, 0);
            for (j, c) in clean.iter().enumerate() {
                let d = dist2(a, c);
                if d < best.0 {
                    best = (d, j);
                }
            }
            best
        })
        .collect())
}

/// One-sided Chamfer distance and optionally its gradient wrt `adv`.
pub fn chamfer(adv: &[Point], clean: &[Point], with_grad: bool) -> Result<(f64, Option<Vec<Point>>)> {
    let nn = nearest_clean(adv, clean)?;
    let n = adv.len() as f64;
    let value = nn.iter().map(|&(d, _)| d).sum::<f64>() / n;
    let grad = with_grad.then(|| {
        adv.iter()
            .zip(&nn)
            .map(|(a, &(_, j))| {
                let c = clean[j];
                [2.0 / n * (a[0] - c[0]), 2.0 / n * (a[1] - c[1]), 2.0 / n * (a[2] - c[2])]
            })
            .collect()
    });
    Ok((value, grad))
}

/// One-sided Hausdorff distance and optionally its subgradient, which is
/// nonzero only at the worst point (lowest index on ties).
pub fn hausdorff(adv: &[Point], clean: &[Point], with_grad: bool) -> Result<(f64, Option<Vec<Point>>)> {
    let nn = nearest_clean(adv, clean)?;
    let mut worst = 0;
    for (i, &(d, _)) in nn.iter().enumerate() {
        if d > nn[worst].0 {
            worst = i;
        }
    }
    let (value, j) = nn[worst];
    let grad = with_grad.then(|| {
        let mut g = vec![[0.0; 3]; adv.len()];
        let (a, c) = (adv[worst], clean[j]);
        g[worst] = [2.0 * (a[0] - c[0]), 2.0 * (a[1] - c[1]), 2.0 * (a[2] - c[2])];
        g
    });
    Ok((value, grad))
}

/// `‖Δ‖_F`.
pub fn spectral_energy_delta(delta: &SpectralCoeffs) -> f64 {
    delta.norm()
}
