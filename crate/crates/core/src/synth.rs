//! Procedural shape catalogue and the labelled synthetic dataset built on it.
//!
//! Every surface is sampled from its parametric form, jittered, then mapped
//! into the unit ball. All randomness comes from a ChaCha stream seeded by
//! the caller, so outputs are pure functions of their arguments.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cloud::{normalize_unit_ball, PointCloud};
use crate::error::{Error, Result};
use crate::Point;

/// The eight synthetic object classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ShapeClass {
    Sphere,
    Cube,
    Cylinder,
    Cone,
    Torus,
    Plane,
    Helix,
    Cross,
}

impl ShapeClass {
    pub const ALL: [ShapeClass; 8] = [
        ShapeClass::Sphere,
        ShapeClass::Cube,
        ShapeClass::Cylinder,
        ShapeClass::Cone,
        ShapeClass::Torus,
        ShapeClass::Plane,
        ShapeClass::Helix,
        ShapeClass::Cross,
    ];

    pub fn from_id(id: usize) -> Result<Self> {
        Self::ALL.get(id).copied().ok_or(Error::UnknownClass(id))
    }

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ShapeClass::Sphere => "sphere",
            ShapeClass::Cube => "cube",
            ShapeClass::Cylinder => "cylinder",
            ShapeClass::Cone => "cone",
            ShapeClass::Torus => "torus",
            ShapeClass::Plane => "plane",
            ShapeClass::Helix => "helix",
            ShapeClass::Cross => "cross",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.name().eq_ignore_ascii_case(name))
    }
}

/// Parameters of one synthetic instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSpec {
    pub class_id: usize,
    pub n_points: usize,
    pub seed: u64,
    pub jitter_sigma: f64,
}

impl ShapeSpec {
    pub fn new(class: ShapeClass, n_points: usize, seed: u64) -> Self {
        Self { class_id: class.id(), n_points, seed, jitter_sigma: 0.0 }
    }

    pub fn jitter(mut self, sigma: f64) -> Self {
        self.jitter_sigma = sigma;
        self
    }
}

const TORUS_MAJOR: f64 = 1.0;
const TORUS_MINOR: f64 = 0.35;
const HELIX_TURNS: f64 = 2.0;
const HELIX_TUBE: f64 = 0.12;
const ROD_RADIUS: f64 = 0.12;

/// Samples a labelled, normalized cloud on the named surface.
pub fn synth_shape(spec: &ShapeSpec) -> Result<PointCloud> {
    let class = ShapeClass::from_id(spec.class_id)?;
    if spec.n_points < 8 {
        return Err(Error::InvalidConfig(format!(
            "synthetic shapes need at least 8 points, got {}",
            spec.n_points
        )));
    }
    if !(spec.jitter_sigma >= 0.0 && spec.jitter_sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!("jitter sigma {} is invalid", spec.jitter_sigma)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut points: Vec<Point> = if class == ShapeClass::Sphere {
        // Antipodal pairs keep the centroid at the origin, so the sphere
        // survives normalization with every norm equal to 1.
        let mut pts = Vec::with_capacity(spec.n_points);
        while pts.len() + 1 < spec.n_points {
            let p = unit_vector(&mut rng);
            pts.push(p);
            pts.push([-p[0], -p[1], -p[2]]);
        }
        if pts.len() < spec.n_points {
            pts.push(unit_vector(&mut rng));
        }
        pts
    } else {
        (0..spec.n_points).map(|_| surface_point(class, &mut rng)).collect()
    };
    if spec.jitter_sigma > 0.0 {
        for p in &mut points {
            for v in p.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += spec.jitter_sigma * z;
            }
        }
    }
    let cloud = PointCloud::new(points)?
        .with_label(class.id())
        .with_name(format!("{}_{}", class.name(), spec.seed));
    Ok(normalize_unit_ball(&cloud))
}

fn surface_point(class: ShapeClass, rng: &mut ChaCha8Rng) -> Point {
    match class {
        ShapeClass::Sphere => unit_vector(rng),
        ShapeClass::Cube => {
            let face = rng.random_range(0..6usize);
            let u = rng.random_range(-1.0..1.0);
            let v = rng.random_range(-1.0..1.0);
            let s = if face % 2 == 0 { 1.0 } else { -1.0 };
            match face / 2 {
                0 => [s, u, v],
                1 => [u, s, v],
                _ => [u, v, s],
            }
        }
        ShapeClass::Cylinder => {
            let theta = rng.random_range(0.0..2.0 * PI);
            let z = rng.random_range(-1.0..1.0);
            [0.5 * libm::cos(theta), 0.5 * libm::sin(theta), z]
        }
        ShapeClass::Cone => {
            // Lateral area grows linearly with the radius, so the radius
            // fraction is the square root of a uniform draw.
            let t = libm::sqrt(rng.random::<f64>());
            let theta = rng.random_range(0.0..2.0 * PI);
            [t * libm::cos(theta), t * libm::sin(theta), 1.0 - 2.0 * t]
        }
        ShapeClass::Torus => loop {
            let u = rng.random_range(0.0..2.0 * PI);
            let v = rng.random_range(0.0..2.0 * PI);
            let ring = TORUS_MAJOR + TORUS_MINOR * libm::cos(v);
            // Area element is proportional to the ring radius.
            if rng.random::<f64>() * (TORUS_MAJOR + TORUS_MINOR) <= ring {
                break [ring * libm::cos(u), ring * libm::sin(u), TORUS_MINOR * libm::sin(v)];
            }
        },
        ShapeClass::Plane => [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0],
        ShapeClass::Helix => {
            let t = rng.random_range(0.0..2.0 * PI * HELIX_TURNS);
            let phi = rng.random_range(0.0..2.0 * PI);
            let center = [libm::cos(t), libm::sin(t), t / (PI * HELIX_TURNS) - 1.0];
            // Frame: radial direction and the binormal-ish z axis.
            let radial = [libm::cos(t), libm::sin(t), 0.0];
            let (s, c) = (libm::sin(phi), libm::cos(phi));
            [
                center[0] + HELIX_TUBE * c * radial[0],
                center[1] + HELIX_TUBE * c * radial[1],
                center[2] + HELIX_TUBE * s,
            ]
        }
        ShapeClass::Cross => {
            // Three orthogonal rods through the origin.
            let axis = rng.random_range(0..3usize);
            let along = rng.random_range(-1.0..1.0);
            let theta = rng.random_range(0.0..2.0 * PI);
            let (a, b) = (ROD_RADIUS * libm::cos(theta), ROD_RADIUS * libm::sin(theta));
            match axis {
                0 => [along, a, b],
                1 => [a, along, b],
                _ => [a, b, along],
            }
        }
    }
}

fn unit_vector(rng: &mut ChaCha8Rng) -> Point {
    loop {
        let v: Point = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let r = crate::linalg::norm(&v);
        if r > 1e-9 {
            break [v[0] / r, v[1] / r, v[2] / r];
        }
    }
}

/// Per-instance augmentation drawn before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Augment {
    /// Random rotation about the z axis.
    pub rotate_z: bool,
    /// Isotropic scale drawn uniformly from this closed range.
    pub scale_range: (f64, f64),
}

impl Default for Augment {
    fn default() -> Self {
        Self { rotate_z: true, scale_range: (0.8, 1.25) }
    }
}

impl Augment {
    pub fn none() -> Self {
        Self { rotate_z: false, scale_range: (1.0, 1.0) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub classes: Vec<usize>,
    pub per_class: usize,
    pub n_points: usize,
    pub seed: u64,
    pub jitter_sigma: f64,
    pub augment: Augment,
    /// Fraction of each class assigned to the training split.
    pub train_fraction: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            classes: (0..ShapeClass::ALL.len()).collect(),
            per_class: 50,
            n_points: 256,
            seed: 0,
            jitter_sigma: 0.01,
            augment: Augment::default(),
            train_fraction: 0.8,
        }
    }
}

/// One generated instance with its stable id.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: usize,
    pub cloud: PointCloud,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn class_names(&self) -> Vec<String> {
        ShapeClass::ALL.iter().take(self.num_classes).map(|c| String::from(c.name())).collect()
    }
}

/// Builds a stratified train/test split of synthetic shapes.
///
/// Instance ids run class-major; each class contributes
/// `round(per_class * train_fraction)` training instances, clamped so that
/// both splits keep at least one member.
pub fn gen_dataset(config: &DatasetConfig) -> Result<Dataset> {
    if config.per_class < 2 {
        return Err(Error::InvalidConfig(format!(
            "per_class must be at least 2 to split, got {}",
            config.per_class
        )));
    }
    if config.classes.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(0.0..=1.0).contains(&config.train_fraction) {
        return Err(Error::InvalidConfig(format!(
            "train fraction {} outside [0, 1]",
            config.train_fraction
        )));
    }
    let (lo, hi) = config.augment.scale_range;
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::InvalidConfig(format!("scale range ({lo}, {hi}) is invalid")));
    }
    for &c in &config.classes {
        ShapeClass::from_id(c)?;
    }
    let num_classes = config.classes.iter().copied().max().unwrap_or(0) + 1;
    let n_train = libm::round(config.per_class as f64 * config.train_fraction) as usize;
    let n_train = n_train.clamp(1, config.per_class - 1);

    let mut master = ChaCha8Rng::seed_from_u64(config.seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut next_id = 0;
    for &class_id in &config.classes {
        let mut samples = Vec::with_capacity(config.per_class);
        for _ in 0..config.per_class {
            let shape_seed: u64 = master.random();
            let angle = if config.augment.rotate_z { master.random_range(0.0..2.0 * PI) } else { 0.0 };
            let scale = if hi > lo { master.random_range(lo..=hi) } else { lo };
            let base = synth_shape(&ShapeSpec {
                class_id,
                n_points: config.n_points,
                seed: shape_seed,
                jitter_sigma: config.jitter_sigma,
            })?;
            let (s, c) = (libm::sin(angle), libm::cos(angle));
            let moved: Vec<Point> = base
                .points()
                .iter()
                .map(|p| [scale * (c * p[0] - s * p[1]), scale * (s * p[0] + c * p[1]), scale * p[2]])
                .collect();
            let cloud = normalize_unit_ball(&base.with_points(moved)?);
            samples.push(Sample { id: next_id, cloud });
            next_id += 1;
        }
        samples.shuffle(&mut master);
        let held_out = samples.split_off(n_train);
        train.extend(samples);
        test.extend(held_out);
    }
    train.sort_by_key(|s| s.id);
    test.sort_by_key(|s| s.id);
    Ok(Dataset { train, test, num_classes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;

    #[test]
    fn sphere_points_lie_on_unit_sphere() {
        let c = synth_shape(&ShapeSpec::new(ShapeClass::Sphere, 256, 3)).unwrap();
        assert_eq!(c.len(), 256);
        assert_eq!(c.label(), Some(0));
        assert!(c.points().iter().all(|p| (norm(p) - 1.0).abs() < 1e-9));
    }

    #[test]
    fn plane_is_coplanar() {
        let c = synth_shape(&ShapeSpec::new(ShapeClass::Plane, 256, 5)).unwrap();
        assert!(c.points().iter().all(|p| p[2].abs() < 1e-12));
    }

    #[test]
    fn generation_is_deterministic() {
        for class in ShapeClass::ALL {
            let spec = ShapeSpec::new(class, 64, 11).jitter(0.02);
            let a = synth_shape(&spec).unwrap();
            let b = synth_shape(&spec).unwrap();
            assert_eq!(a.points(), b.points());
        }
    }

    #[test]
    fn unknown_class_and_small_n_rejected() {
        assert_eq!(
            synth_shape(&ShapeSpec { class_id: 8, n_points: 64, seed: 0, jitter_sigma: 0.0 }),
            Err(Error::UnknownClass(8))
        );
        assert!(synth_shape(&ShapeSpec::new(ShapeClass::Cube, 7, 0)).is_err());
    }

    #[test]
    fn dataset_split_sizes() {
        let cfg = DatasetConfig { n_points: 32, ..DatasetConfig::default() };
        let ds = gen_dataset(&cfg).unwrap();
        assert_eq!(ds.train.len(), 320);
        assert_eq!(ds.test.len(), 80);
        assert_eq!(ds.num_classes, 8);
        for class in 0..8 {
            assert_eq!(ds.test.iter().filter(|s| s.cloud.label() == Some(class)).count(), 10);
        }
        let again = gen_dataset(&cfg).unwrap();
        let ids = |d: &Dataset| d.test.iter().map(|s| s.id).collect::<Vec<_>>();
        assert_eq!(ids(&ds), ids(&again));
        assert_eq!(ds, again);
    }

    #[test]
    fn dataset_needs_two_per_class() {
        let cfg = DatasetConfig { per_class: 1, ..DatasetConfig::default() };
        assert!(gen_dataset(&cfg).is_err());
    }
}
