//! Implementations behind each subcommand. Every function writes its
//! artifacts under `--out-dir` and also returns the in-memory result.

use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gsda_core::attack::{gsda_attack, xyz_baseline_attack, AttackConfig, AttackMode, AttackResult, TransformKind};
use gsda_core::defense::{sor_defense, srs_defense, SorConfig};
use gsda_core::model::{accuracy, train, Classifier, EpochStats, ModelConfig, TrainConfig};
use gsda_core::spectral::{band_energy, band_filter, BandBounds, BandEnergy, BandOp};
use gsda_core::synth::{gen_dataset, Augment, DatasetConfig, ShapeClass};
use gsda_core::{PointCloud, SpectralBasis, SpectralCoeffs};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cli::*;
use crate::error::{Error, Result};
use crate::io::{create_dir, load_any, load_model, save_model, save_point_cloud, write_json, CloudFormat};
use crate::manifest::{AdvEntry, AdvManifest, Manifest, ManifestEntry, Split};
use crate::plot::{line_chart, Series};
use crate::report::{unix_ms, EvalReport, InstanceRow, ReportFormat};

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs `f` over `items` on a pool of `jobs` threads; output order follows
/// input order.
fn par_map<T: Sync, U: Send>(jobs: Option<usize>, items: &[T], f: impl Fn(usize, &T) -> Result<U> + Sync) -> Result<Vec<U>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Error::Validation(String::from("--jobs must be at least 1")));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
    pool.install(|| items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect())
}

// gen-data

pub fn gen_data(global: &GlobalArgs, args: &GenDataArgs) -> Result<Manifest> {
    let classes = match &args.classes {
        None => (0..ShapeClass::ALL.len()).collect(),
        Some(names) => names
            .iter()
            .map(|n| ShapeClass::from_name(n.trim()).map(ShapeClass::id).ok_or_else(|| Error::Validation(format!("unknown class '{n}'"))))
            .collect::<Result<Vec<_>>>()?,
    };
    let config = DatasetConfig {
        classes,
        per_class: args.per_class,
        n_points: args.n_points,
        seed: global.seed,
        jitter_sigma: args.jitter,
        augment: if args.no_augment { Augment::none() } else { Augment::default() },
        train_fraction: args.train_fraction,
    };
    let ds = gen_dataset(&config)?;
    let names = ds.class_names();
    let clouds_dir = global.out_dir.join("clouds");
    create_dir(&clouds_dir)?;
    let ext = match args.cloud_format {
        CloudFormat::Xyz => "xyz",
        CloudFormat::Off => "off",
        CloudFormat::PlyAscii => "ply",
    };
    let mut entries = Vec::new();
    for (split, samples) in [(Split::Train, &ds.train), (Split::Test, &ds.test)] {
        for s in samples {
            let label = s.cloud.label().expect("generated clouds are labelled");
            let file = format!("{:04}_{}.{ext}", s.id, names[label]);
            save_point_cloud(&s.cloud, &clouds_dir.join(&file), args.cloud_format)?;
            entries.push(ManifestEntry { id: s.id, path: format!("clouds/{file}"), label, class: names[label].clone(), split });
        }
    }
    entries.sort_by_key(|e| e.id);
    let manifest = Manifest {
        seed: global.seed,
        n_points: args.n_points,
        per_class: args.per_class,
        jitter_sigma: args.jitter,
        class_names: names,
        entries,
    };
    manifest.save(&global.out_dir.join("manifest.json"))?;
    Ok(manifest)
}

// train

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSummary {
    pub model_path: PathBuf,
    pub config: serde_json::Value,
    pub history: Vec<EpochRow>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

fn split_clouds(manifest: &Manifest, path: &Path, split: Split) -> Result<Vec<PointCloud>> {
    let filter = match split {
        Split::Train => crate::manifest::SplitFilter::Train,
        Split::Test => crate::manifest::SplitFilter::Test,
    };
    Ok(manifest.load_clouds(path, filter)?.into_iter().map(|(_, c)| c).collect())
}

pub fn train_model(global: &GlobalArgs, args: &TrainArgs) -> Result<(Classifier, TrainSummary)> {
    let manifest = Manifest::load(&args.data)?;
    let train_set = split_clouds(&manifest, &args.data, Split::Train)?;
    let test_set = split_clouds(&manifest, &args.data, Split::Test)?;
    let model_config = ModelConfig::with_widths(&args.widths, args.hidden, manifest.num_classes(), global.seed);
    let mut model = Classifier::new(model_config)?;
    let cfg = TrainConfig {
        epochs: args.epochs,
        batch_size: args.batch_size,
        learning_rate: args.lr,
        weight_decay: args.weight_decay,
        seed: global.seed,
    };
    let eval = (!test_set.is_empty()).then_some(test_set.as_slice());
    let stats: Vec<EpochStats> = train(&mut model, &train_set, &cfg, eval)?;

    create_dir(&global.out_dir)?;
    let model_path = args.model_out.clone().unwrap_or_else(|| global.out_dir.join("model.gsda"));
    save_model(&model, &model_path)?;

    let history: Vec<EpochRow> = stats
        .iter()
        .map(|s| EpochRow { epoch: s.epoch, loss: s.loss, train_accuracy: s.train_accuracy, test_accuracy: s.eval_accuracy })
        .collect();
    let summary = TrainSummary {
        model_path,
        config: json!({
            "data": args.data, "seed": global.seed, "epochs": args.epochs, "batch_size": args.batch_size,
            "learning_rate": args.lr, "weight_decay": args.weight_decay, "widths": args.widths, "hidden": args.hidden,
            "num_classes": manifest.num_classes(),
        }),
        train_accuracy: accuracy(&model, &train_set),
        test_accuracy: if test_set.is_empty() { 0.0 } else { accuracy(&model, &test_set) },
        history,
    };
    match global.format {
        ReportFormat::Json => write_json(&summary, &global.out_dir.join("train_history.json"))?,
        ReportFormat::Csv => {
            let mut csv = String::from("epoch,loss,train_accuracy,test_accuracy\n");
            for r in &summary.history {
                let test = r.test_accuracy.map(|a| a.to_string()).unwrap_or_default();
                let _ = writeln!(csv, "{},{:e},{},{test}", r.epoch, r.loss, r.train_accuracy);
            }
            write_text(&global.out_dir.join("train_history.csv"), &csv)?;
        }
    }
    let curve = |f: fn(&EpochRow) -> Option<f64>| summary.history.iter().filter_map(|r| f(r).map(|v| (r.epoch as f64, v))).collect();
    let svg = line_chart(
        "training",
        "epoch",
        "value",
        &[
            Series { name: "loss", points: curve(|r| Some(r.loss)) },
            Series { name: "train accuracy", points: curve(|r| Some(r.train_accuracy)) },
            Series { name: "test accuracy", points: curve(|r| r.test_accuracy) },
        ],
        false,
    );
    write_text(&global.out_dir.join("train_history.svg"), &svg)?;
    Ok((model, summary))
}

// classify

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifyRow {
    pub name: String,
    pub label: Option<usize>,
    pub predicted: usize,
    pub confidence: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub rows: Vec<ClassifyRow>,
    /// Over rows that carry a label.
    pub accuracy: Option<f64>,
}

pub fn classify(global: &GlobalArgs, args: &ClassifyArgs) -> Result<ClassifyReport> {
    let model = load_model(&args.model)?;
    let mut clouds: Vec<(String, PointCloud)> = Vec::new();
    if let Some(data) = &args.data {
        for (e, c) in Manifest::load(data)?.load_clouds(data, args.split)? {
            clouds.push((e.path, c));
        }
    }
    for p in &args.inputs {
        clouds.push((p.display().to_string(), load_any(p)?));
    }
    if clouds.is_empty() {
        return Err(Error::Validation(String::from("nothing to classify: pass cloud files or --data")));
    }
    let rows = par_map(global.jobs, &clouds, |_, (name, cloud)| {
        let pred = model.forward(cloud.points());
        let predicted = pred.label();
        Ok(ClassifyRow { name: name.clone(), label: cloud.label(), predicted, confidence: pred.probabilities[predicted] })
    })?;
    let labelled: Vec<&ClassifyRow> = rows.iter().filter(|r| r.label.is_some()).collect();
    let accuracy = (!labelled.is_empty())
        .then(|| labelled.iter().filter(|r| r.label == Some(r.predicted)).count() as f64 / labelled.len() as f64);
    let report = ClassifyReport { rows, accuracy };
    create_dir(&global.out_dir)?;
    match global.format {
        ReportFormat::Json => write_json(&report, &global.out_dir.join("classify.json"))?,
        ReportFormat::Csv => {
            let mut csv = String::from("name,label,predicted,confidence\n");
            for r in &report.rows {
                let label = r.label.map(|l| l.to_string()).unwrap_or_default();
                let _ = writeln!(csv, "{},{label},{},{}", r.name, r.predicted, r.confidence);
            }
            write_text(&global.out_dir.join("classify.csv"), &csv)?;
        }
    }
    Ok(report)
}

// spectrum

fn default_bounds(n: usize, low_end: Option<usize>, high_start: Option<usize>) -> Result<BandBounds> {
    let low = low_end.unwrap_or((n / 32).max(1));
    let high = high_start.unwrap_or((n / 4).max(low));
    Ok(BandBounds::new(low, high, n)?)
}

fn band_range(b: BandName, bounds: BandBounds, n: usize) -> Option<Range<usize>> {
    match b {
        BandName::None => None,
        BandName::Low => Some(bounds.low()),
        BandName::Mid => Some(bounds.mid()),
        BandName::High => Some(bounds.high(n)),
    }
}

fn basis_for(cloud: &PointCloud, transform: Transform, k: usize) -> Result<SpectralBasis> {
    Ok(match transform {
        Transform::Graph => SpectralBasis::from_cloud(cloud, k)?,
        Transform::Dct => SpectralBasis::dct(cloud.len()),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Energies {
    pub low: f64,
    pub mid: f64,
    pub high: f64,
}

impl From<BandEnergy> for Energies {
    fn from(e: BandEnergy) -> Self {
        Self { low: e.low, mid: e.mid, high: e.high }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub input: PathBuf,
    pub n: usize,
    pub k: usize,
    pub transform: String,
    pub low_end: usize,
    pub high_start: usize,
    pub energy: Energies,
    pub edited_energy: Energies,
    /// Fraction of energy in the lowest 32 frequencies.
    pub lowest_32_fraction: f64,
    /// Frobenius norm of the coefficient edit.
    pub e_delta: f64,
    /// Largest coordinate error of the unedited round trip.
    pub roundtrip_max_error: f64,
    pub reconstructed: PathBuf,
}

/// Spectrum table: index, eigenvalue, per-axis magnitudes, energy and
/// cumulative energy fraction.
pub fn spectrum_csv(eigenvalues: &[f64], coeffs: &SpectralCoeffs) -> String {
    let total = coeffs.energy();
    let mut csv = String::from("index,lambda,abs_x,abs_y,abs_z,energy,cumulative_energy\n");
    let mut acc = 0.0;
    for (i, (l, c)) in eigenvalues.iter().zip(coeffs.rows()).enumerate() {
        let e = c[0] * c[0] + c[1] * c[1] + c[2] * c[2];
        acc += e;
        let cum = if total > 0.0 { acc / total } else { 0.0 };
        let _ = writeln!(csv, "{i},{l:e},{:e},{:e},{:e},{e:e},{cum:.15}", c[0].abs(), c[1].abs(), c[2].abs());
    }
    csv
}

pub fn spectrum(global: &GlobalArgs, args: &SpectrumArgs) -> Result<SpectrumSummary> {
    let cloud = load_any(&args.input)?;
    let n = cloud.len();
    let basis = basis_for(&cloud, args.transform, args.k)?;
    let bounds = default_bounds(n, args.low_end, args.high_start)?;
    let x_hat = basis.gft(cloud.points())?;

    let roundtrip = basis.igft(&x_hat)?;
    let roundtrip_max_error = roundtrip
        .iter()
        .zip(cloud.points())
        .flat_map(|(a, b)| (0..3).map(move |k| (a[k] - b[k]).abs()))
        .fold(0.0, f64::max);

    let mut edited = x_hat.clone();
    for &b in &args.remove_band {
        if let Some(r) = band_range(b, bounds, n) {
            edited = band_filter(&edited, r, BandOp::Zero)?;
        }
    }
    if let Some(r) = args.perturb_band.and_then(|b| band_range(b, bounds, n)) {
        edited = band_filter(&edited, r, BandOp::AddConstant(args.delta))?;
    }
    let edited_points = basis.igft(&edited)?;
    let edited_cloud = PointCloud::new(edited_points)?;

    create_dir(&global.out_dir)?;
    write_text(&global.out_dir.join("spectrum.csv"), &spectrum_csv(basis.eigenvalues(), &x_hat))?;
    write_text(&global.out_dir.join("spectrum_edited.csv"), &spectrum_csv(basis.eigenvalues(), &edited))?;
    let reconstructed = global.out_dir.join("reconstructed.xyz");
    save_point_cloud(&edited_cloud, &reconstructed, CloudFormat::Xyz)?;

    let axis = |k: usize, c: &SpectralCoeffs| c.rows().iter().enumerate().map(|(i, r)| (i as f64, r[k].abs())).collect();
    let svg = line_chart(
        "graph spectrum",
        "frequency index",
        "|coefficient|",
        &[
            Series { name: "x", points: axis(0, &x_hat) },
            Series { name: "y", points: axis(1, &x_hat) },
            Series { name: "z", points: axis(2, &x_hat) },
        ],
        true,
    );
    write_text(&global.out_dir.join("spectrum.svg"), &svg)?;

    let total = x_hat.energy();
    let low32: f64 = x_hat.rows().iter().take(32).map(|c| c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sum();
    let summary = SpectrumSummary {
        input: args.input.clone(),
        n,
        k: args.k,
        transform: format!("{:?}", args.transform).to_lowercase(),
        low_end: bounds.low_end,
        high_start: bounds.high_start,
        energy: band_energy(&x_hat, bounds)?.into(),
        edited_energy: band_energy(&edited, bounds)?.into(),
        lowest_32_fraction: if total > 0.0 { low32 / total } else { 0.0 },
        e_delta: edited.sub(&x_hat)?.norm(),
        roundtrip_max_error,
        reconstructed,
    };
    write_json(&summary, &global.out_dir.join("spectrum_summary.json"))?;
    Ok(summary)
}

// attack

fn parse_band_mask(spec: &str, n: usize, low_end: Option<usize>, high_start: Option<usize>) -> Result<Range<usize>> {
    let bounds = default_bounds(n, low_end, high_start)?;
    let named = match spec {
        "low" => Some(BandName::Low),
        "mid" => Some(BandName::Mid),
        "high" => Some(BandName::High),
        _ => None,
    };
    if let Some(b) = named {
        return Ok(band_range(b, bounds, n).expect("named band"));
    }
    let parsed = spec.split_once("..").and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
    match parsed {
        Some((a, b)) if a <= b && b <= n => Ok(a..b),
        _ => Err(Error::Validation(format!("band mask '{spec}' is not low, mid, high or a..b within 0..{n}"))),
    }
}

/// Target for the `pos`-th attacked instance: cycles through the classes
/// other than `label`, offset by the seed.
pub fn round_robin_target(label: usize, pos: usize, num_classes: usize, seed: u64) -> Option<usize> {
    if num_classes < 2 {
        return None;
    }
    let slot = ((pos as u64).wrapping_add(seed) % (num_classes as u64 - 1)) as usize;
    Some(if slot >= label { slot + 1 } else { slot })
}

fn attack_config(args: &AttackArgs) -> AttackConfig {
    AttackConfig {
        iterations: args.iterations,
        lr: args.lr,
        k: args.k,
        beta_init: args.beta_init,
        binary_search_steps: args.binary_search_steps,
        w_chamfer: args.w_chamfer,
        w_hausdorff: args.w_hausdorff,
        eps_max: args.eps_max,
        eps_xyz: args.eps_xyz,
        transform: match args.transform {
            Transform::Graph => TransformKind::Graph,
            Transform::Dct => TransformKind::Dct,
        },
        abort_early: !args.no_abort_early,
        ..AttackConfig::default()
    }
}

fn attack_echo(global: &GlobalArgs, args: &AttackArgs, cfg: &AttackConfig) -> serde_json::Value {
    json!({
        "model": args.model, "data": args.data, "split": format!("{:?}", args.split).to_lowercase(),
        "only_correct": args.only_correct, "limit": args.limit, "seed": global.seed,
        "mode": if args.targeted { "targeted" } else { "untargeted" },
        "attack": if args.baseline.is_some() { "xyz" } else { "gsda" },
        "iterations": cfg.iterations, "lr": cfg.lr, "adam_beta1": cfg.adam_beta1, "adam_beta2": cfg.adam_beta2,
        "adam_eps": cfg.adam_eps, "k": cfg.k, "beta_init": cfg.beta_init, "binary_search_steps": cfg.binary_search_steps,
        "w_chamfer": cfg.w_chamfer, "w_hausdorff": cfg.w_hausdorff, "eps_max": cfg.eps_max, "eps_xyz": cfg.eps_xyz,
        "band_mask": args.band_mask, "low_end": args.low_end, "high_start": args.high_start,
        "transform": format!("{:?}", args.transform).to_lowercase(), "abort_early": cfg.abort_early,
    })
}

/// Attack result together with the row reported for it.
pub struct AttackOutcome {
    pub entry: ManifestEntry,
    pub clean: PointCloud,
    pub result: AttackResult,
    pub row: InstanceRow,
}

/// Runs the attack over the selected manifest entries without writing
/// anything.
pub fn run_attacks(global: &GlobalArgs, args: &AttackArgs) -> Result<(serde_json::Value, Vec<AttackOutcome>)> {
    let model = load_model(&args.model)?;
    let manifest = Manifest::load(&args.data)?;
    if manifest.num_classes() > model.num_classes() {
        return Err(Error::Validation(format!(
            "model has {} classes but the dataset uses {}",
            model.num_classes(),
            manifest.num_classes()
        )));
    }
    let mut selected = manifest.load_clouds(&args.data, args.split)?;
    if args.only_correct {
        selected.retain(|(e, c)| model.predict(c.points()) == e.label);
    }
    if let Some(l) = args.limit {
        selected.truncate(l);
    }
    let base = attack_config(args);
    base.validate()?;
    let echo = attack_echo(global, args, &base);
    let num_classes = model.num_classes();

    let outcomes = par_map(global.jobs, &selected, |pos, (entry, clean)| {
        let mut cfg = base.clone();
        let target = if args.targeted { round_robin_target(entry.label, pos, num_classes, global.seed) } else { None };
        cfg.mode = match target {
            Some(t) => AttackMode::Targeted(t),
            None => AttackMode::Untargeted,
        };
        if let Some(spec) = &args.band_mask {
            cfg.band_mask = Some(parse_band_mask(spec, clean.len(), args.low_end, args.high_start)?);
        }
        let start = Instant::now();
        let result = match args.baseline {
            Some(Baseline::Xyz) => xyz_baseline_attack(&model, clean, &cfg)?,
            None => gsda_attack(&model, clean, &cfg)?,
        };
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        let d = result.distortion;
        let row = InstanceRow {
            id: entry.id,
            true_label: entry.label,
            target_label: target,
            predicted_label: result.predicted_label,
            success: result.success,
            d_norm: d.d_norm,
            d_c: d.d_c,
            d_h: d.d_h,
            e_delta: d.e_delta,
            beta_used: result.beta_used,
            iterations: result.iterations_run,
            wall_ms,
        };
        Ok(AttackOutcome { entry: entry.clone(), clean: clean.clone(), result, row })
    })?;
    Ok((echo, outcomes))
}

pub fn attack(global: &GlobalArgs, args: &AttackArgs) -> Result<(EvalReport, Vec<AttackOutcome>)> {
    let (echo, outcomes) = run_attacks(global, args)?;
    let report = EvalReport::new("attack", echo, outcomes.iter().map(|o| o.row.clone()).collect());
    let adv_dir = global.out_dir.join("adv");
    create_dir(&adv_dir)?;
    let mut entries = Vec::with_capacity(outcomes.len());
    for o in &outcomes {
        let file = format!("{:04}.xyz", o.entry.id);
        save_point_cloud(&o.result.adversarial, &adv_dir.join(&file), CloudFormat::Xyz)?;
        entries.push(AdvEntry { id: o.entry.id, path: file, label: o.entry.label, target: o.row.target_label, success: o.row.success });
    }
    AdvManifest {
        source_model: args.model.display().to_string(),
        attack: if args.baseline.is_some() { String::from("xyz") } else { String::from("gsda") },
        entries,
    }
    .save(&adv_dir.join("manifest.json"))?;
    report.write(&global.out_dir.join(format!("report.{}", global.format.extension())), global.format)?;
    Ok((report, outcomes))
}

// defend-eval

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DefenseRow {
    pub setting: usize,
    pub id: usize,
    pub true_label: usize,
    pub target_label: Option<usize>,
    pub predicted_label: usize,
    pub success: bool,
    pub kept_points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DefenseSetting {
    pub defense: String,
    pub drop_ratio: Option<f64>,
    pub srs_drop: Option<usize>,
    pub instances: usize,
    pub successes: usize,
    pub success_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DefenseReport {
    pub config: serde_json::Value,
    pub settings: Vec<DefenseSetting>,
    pub rows: Vec<DefenseRow>,
    pub created_unix_ms: u64,
}

fn attack_succeeds(label: usize, target: Option<usize>, predicted: usize) -> bool {
    match target {
        Some(t) => predicted == t,
        None => predicted != label,
    }
}

pub fn defend_eval(global: &GlobalArgs, args: &DefendArgs) -> Result<DefenseReport> {
    let model = load_model(&args.model)?;
    let adv = AdvManifest::load(&args.adv)?;
    let clouds = adv.load_clouds(&args.adv)?;

    // Each setting is (name, SOR config or SRS drop count).
    enum Setting {
        None,
        Sor(SorConfig),
        Srs(usize),
    }
    let sor = |ratio: Option<f64>| SorConfig { k_neighbors: args.sor_k, alpha: args.sor_alpha, drop_ratio: ratio };
    let settings: Vec<Setting> = match (args.defense, &args.sweep) {
        (DefenseKind::None, _) => vec![Setting::None],
        (DefenseKind::Sor, Some(ratios)) => ratios.iter().map(|&r| Setting::Sor(sor(Some(r)))).collect(),
        (DefenseKind::Sor, None) => vec![Setting::Sor(sor(args.sor_drop_ratio))],
        (DefenseKind::Srs, _) => {
            let drop = args.srs_drop.ok_or_else(|| Error::Validation(String::from("--defense srs needs --srs-drop")))?;
            vec![Setting::Srs(drop)]
        }
    };

    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (si, setting) in settings.iter().enumerate() {
        let setting_rows = par_map(global.jobs, &clouds, |_, (e, cloud)| {
            let defended = match setting {
                Setting::None => cloud.clone(),
                Setting::Sor(cfg) => sor_defense(cloud, cfg)?,
                Setting::Srs(drop) => srs_defense(cloud, *drop, global.seed.wrapping_add(e.id as u64))?,
            };
            let predicted = model.predict(defended.points());
            Ok(DefenseRow {
                setting: si,
                id: e.id,
                true_label: e.label,
                target_label: e.target,
                predicted_label: predicted,
                success: attack_succeeds(e.label, e.target, predicted),
                kept_points: defended.len(),
            })
        })?;
        let successes = setting_rows.iter().filter(|r| r.success).count();
        let (name, ratio, srs) = match setting {
            Setting::None => ("none", None, None),
            Setting::Sor(cfg) => ("sor", cfg.drop_ratio, None),
            Setting::Srs(d) => ("srs", None, Some(*d)),
        };
        summaries.push(DefenseSetting {
            defense: String::from(name),
            drop_ratio: ratio,
            srs_drop: srs,
            instances: setting_rows.len(),
            successes,
            success_rate: successes as f64 / setting_rows.len() as f64,
        });
        rows.extend(setting_rows);
    }
    let report = DefenseReport {
        config: json!({
            "model": args.model, "adv": args.adv, "defense": format!("{:?}", args.defense).to_lowercase(),
            "sor_k": args.sor_k, "sor_alpha": args.sor_alpha, "sor_drop_ratio": args.sor_drop_ratio,
            "sweep": args.sweep, "srs_drop": args.srs_drop, "seed": global.seed,
        }),
        settings: summaries,
        rows,
        created_unix_ms: unix_ms(),
    };
    create_dir(&global.out_dir)?;
    match global.format {
        ReportFormat::Json => write_json(&report, &global.out_dir.join("defense_report.json"))?,
        ReportFormat::Csv => {
            let mut csv = String::from("defense,drop_ratio,srs_drop,instances,successes,success_rate\n");
            for s in &report.settings {
                let r = s.drop_ratio.map(|v| v.to_string()).unwrap_or_default();
                let d = s.srs_drop.map(|v| v.to_string()).unwrap_or_default();
                let _ = writeln!(csv, "{},{r},{d},{},{},{}", s.defense, s.instances, s.successes, s.success_rate);
            }
            write_text(&global.out_dir.join("defense_report.csv"), &csv)?;
        }
    }
    Ok(report)
}

// transfer

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransferMatrix {
    /// Source model of each adversarial set (rows).
    pub sources: Vec<String>,
    /// Target model paths (columns).
    pub targets: Vec<String>,
    /// Misclassification rate of each target on each adversarial set.
    pub rates: Vec<Vec<f64>>,
}

impl TransferMatrix {
    pub fn to_csv(&self) -> String {
        let mut csv = String::from("source");
        for t in &self.targets {
            csv.push(',');
            csv.push_str(t);
        }
        csv.push('\n');
        for (s, row) in self.sources.iter().zip(&self.rates) {
            csv.push_str(s);
            for v in row {
                let _ = write!(csv, ",{v}");
            }
            csv.push('\n');
        }
        csv
    }
}

pub fn transfer(global: &GlobalArgs, args: &TransferArgs) -> Result<TransferMatrix> {
    let models = args.models.iter().map(|p| load_model(p)).collect::<Result<Vec<_>>>()?;
    let mut sources = Vec::new();
    let mut rates = Vec::new();
    for path in &args.adv {
        let adv = AdvManifest::load(path)?;
        let clouds = adv.load_clouds(path)?;
        let row = models
            .iter()
            .map(|m| {
                let wrong = par_map(global.jobs, &clouds, |_, (e, c)| Ok(m.predict(c.points()) != e.label))?;
                Ok(wrong.iter().filter(|&&w| w).count() as f64 / wrong.len() as f64)
            })
            .collect::<Result<Vec<f64>>>()?;
        sources.push(adv.source_model);
        rates.push(row);
    }
    let matrix = TransferMatrix { sources, targets: args.models.iter().map(|p| p.display().to_string()).collect(), rates };
    create_dir(&global.out_dir)?;
    write_text(&global.out_dir.join("transfer.csv"), &matrix.to_csv())?;
    if global.format == ReportFormat::Json {
        write_json(&matrix, &global.out_dir.join("transfer.json"))?;
    }
    Ok(matrix)
}

/// Dispatches a parsed command line and prints a one-line summary.
pub fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::GenData(a) => {
            let m = gen_data(g, a)?;
            println!("wrote {} clouds to {}", m.entries.len(), g.out_dir.display());
        }
        Command::Train(a) => {
            let (_, s) = train_model(g, a)?;
            println!("train accuracy {:.4}, test accuracy {:.4}, model {}", s.train_accuracy, s.test_accuracy, s.model_path.display());
        }
        Command::Classify(a) => {
            let r = classify(g, a)?;
            for row in &r.rows {
                println!("{}\t{}\t{:.4}", row.name, row.predicted, row.confidence);
            }
            if let Some(acc) = r.accuracy {
                println!("accuracy {acc:.4}");
            }
        }
        Command::Spectrum(a) => {
            let s = spectrum(g, a)?;
            println!(
                "n {} energy low/mid/high {:.4}/{:.4}/{:.4}, edit energy {:.6}",
                s.n, s.energy.low, s.energy.mid, s.energy.high, s.e_delta
            );
        }
        Command::Attack(a) => {
            let (r, _) = attack(g, a)?;
            let agg = &r.aggregates;
            println!(
                "success {}/{} ({:.4}), mean d_norm {:.6}, mean d_c {:.3e}, mean d_h {:.3e}",
                agg.successes, agg.instances, agg.success_rate, agg.mean_d_norm, agg.mean_d_c, agg.mean_d_h
            );
        }
        Command::DefendEval(a) => {
            let r = defend_eval(g, a)?;
            for s in &r.settings {
                println!("{} ratio {:?}: success {}/{} ({:.4})", s.defense, s.drop_ratio, s.successes, s.instances, s.success_rate);
            }
        }
        Command::Transfer(a) => {
            print!("{}", transfer(g, a)?.to_csv());
        }
    }
    Ok(())
}

/// Path of the adversarial manifest written by [`attack`].
pub fn adv_manifest_path(out_dir: &Path) -> PathBuf {
    out_dir.join("adv").join("manifest.json")
}
