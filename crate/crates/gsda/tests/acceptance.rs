//! Acceptance criteria 1-10. Runs as one sequential test so that timings
//! are not distorted by other criteria, and prints one PASS/FAIL line per
//! criterion.

#[path = "../../core/tests/support/fd.rs"]
mod fd;

use std::path::{Path, PathBuf};
use std::io::Write as _;
use std::time::Instant;

use gsda::cli::{AttackArgs, Baseline, DefendArgs, DefenseKind, GenDataArgs, GlobalArgs, TrainArgs};
use gsda::commands::{adv_manifest_path, attack, defend_eval, gen_data, run_attacks, train_model, AttackOutcome};
use gsda::manifest::SplitFilter;
use gsda::report::{EvalReport, ReportFormat};
use gsda_core::attack::{delta_bounds, Perturbation};
use gsda_core::model::{Classifier, LossMode, ModelConfig};
use gsda_core::spectral::low_frequency_energy;
use gsda_core::synth::{synth_shape, ShapeClass, ShapeSpec};
use gsda_core::{PointCloud, SpectralBasis, SpectralCoeffs};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    id: u8,
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(id: u8, pass: bool, detail: impl Into<String>) -> Self {
        let v = Self { id, pass, detail: detail.into() };
        say(&v.line());
        v
    }

    fn line(&self) -> String {
        format!("criterion {:>2}: {} | {}", self.id, if self.pass { "PASS" } else { "FAIL" }, self.detail)
    }
}

/// Writes through the stderr handle; libtest only captures the print macros,
/// so these lines show up even when the test passes.
fn say(line: &str) {
    let _ = writeln!(std::io::stderr(), "{line}");
}

fn global(out_dir: &Path, seed: u64) -> GlobalArgs {
    GlobalArgs { seed, jobs: Some(1), out_dir: out_dir.to_path_buf(), format: ReportFormat::Json }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

// 1. Transform correctness.
fn transform_correctness() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut orth, mut lambda0, mut roundtrip, mut parseval) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..200u64 {
        let n = if i % 2 == 0 { 64 } else { 256 };
        let k = [5, 10, 20][(i / 2 % 3) as usize];
        let class = ShapeClass::ALL[rng.random_range(0..ShapeClass::ALL.len())];
        let cloud = synth_shape(&ShapeSpec::new(class, n, rng.random()).jitter(0.01)).unwrap();
        let basis = SpectralBasis::from_cloud(&cloud, k).unwrap();
        let u = basis.vectors();
        let utu = u.transpose().matmul(u);
        for r in 0..n {
            for c in 0..n {
                let expect = if r == c { 1.0 } else { 0.0 };
                orth = orth.max((utu[(r, c)] - expect).abs());
            }
        }
        lambda0 = lambda0.max(basis.eigenvalues()[0].abs());
        let x = basis.gft(cloud.points()).unwrap();
        let back = basis.igft(&x).unwrap();
        for (a, b) in back.iter().zip(cloud.points()) {
            for d in 0..3 {
                roundtrip = roundtrip.max((a[d] - b[d]).abs());
            }
        }
        let signal: f64 = cloud.points().iter().map(|p| p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sum();
        parseval = parseval.max((x.energy() - signal).abs() / signal);
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = orth < 1e-8 && lambda0 < 1e-8 && roundtrip < 1e-9 && parseval < 1e-8 && secs < 60.0;
    Verdict::new(
        1,
        pass,
        format!(
            "200 clouds: max|UtU-I| {orth:.2e}, max|lambda_1| {lambda0:.2e}, round trip {roundtrip:.2e}, Parseval rel {parseval:.2e}, {secs:.1}s"
        ),
    )
}

// 2. Energy concentration.
fn energy_concentration() -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for class in [ShapeClass::Sphere, ShapeClass::Cylinder, ShapeClass::Torus, ShapeClass::Cone] {
        let cloud = synth_shape(&ShapeSpec::new(class, 1024, 0).jitter(0.01)).unwrap();
        let basis = SpectralBasis::from_cloud(&cloud, 10).unwrap();
        let frac = low_frequency_energy(&basis.gft(cloud.points()).unwrap(), 32);
        pass &= frac >= 0.85;
        parts.push(format!("{} {frac:.4}", class.name()));
    }
    Verdict::new(2, pass, format!("lowest-32 energy at n=1024, K=10: {}", parts.join(", ")))
}

// 3. Gradient oracles.
fn gradient_oracles() -> Verdict {
    let (mut cls, mut ch, mut hd, mut comp) = (fd::Check::default(), fd::Check::default(), fd::Check::default(), fd::Check::default());
    for i in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i);
        let model = Classifier::new(ModelConfig::new(8, i)).unwrap();
        let pts = fd::random_points(&mut rng, 16);
        let mode = if i % 2 == 0 { LossMode::Untargeted((i % 8) as usize) } else { LossMode::Targeted((i % 8) as usize) };
        cls = cls.merge(fd::classifier_check(&model, &pts, mode));

        let clean = fd::random_points(&mut rng, 16);
        ch = ch.merge(fd::chamfer_check(&pts, &clean));
        hd = hd.merge(fd::hausdorff_check(&pts, &clean));

        let basis = SpectralBasis::from_cloud(&PointCloud::new(clean.clone()).unwrap(), 5).unwrap();
        let x_hat = basis.gft(&clean).unwrap();
        let delta = SpectralCoeffs(x_hat.rows().iter().map(|r| r.map(|v| v * rng.random_range(-0.5..0.5))).collect());
        comp = comp.merge(fd::spectral_chain_check(&model, &basis, &clean, &delta, LossMode::Untargeted(0), 10.0));
    }
    let checks = [("classifier", cls), ("chamfer", ch), ("hausdorff", hd), ("composite dL/dDelta", comp)];
    let pass = checks.iter().all(|(_, c)| c.compared > 0 && c.max_rel < 1e-4);
    let detail = checks
        .iter()
        .map(|(n, c)| format!("{n} max rel {:.1e} ({} entries, {} kink-skipped)", c.max_rel, c.compared, c.skipped))
        .collect::<Vec<_>>()
        .join("; ");
    Verdict::new(3, pass, format!("20 instances x 16 points: {detail}"))
}

struct Victim {
    model_path: PathBuf,
    suite_manifest: PathBuf,
}

// 4. Victim quality.
fn victim_quality(root: &Path) -> (Verdict, Victim) {
    let data = root.join("data");
    gen_data(&global(&data, 0), &GenDataArgs::default()).unwrap();
    let manifest = data.join("manifest.json");
    let start = Instant::now();
    let (model, summary) = train_model(&global(&root.join("victim"), 0), &TrainArgs::new(manifest.clone())).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let (again, _) = train_model(&global(&root.join("victim_again"), 0), &TrainArgs::new(manifest)).unwrap();
    let deterministic = again.parameters() == model.parameters();
    let pass = summary.test_accuracy >= 0.90 && deterministic && secs < 300.0;
    let verdict = Verdict::new(
        4,
        pass,
        format!(
            "30 epochs, 8 classes x 50: test accuracy {:.4}, retrain bit-identical {deterministic}, {secs:.1}s",
            summary.test_accuracy
        ),
    );

    // Unseen clouds for the attack suite: same generator, different seed.
    let suite = root.join("suite");
    gen_data(&global(&suite, 1), &GenDataArgs { per_class: 15, ..GenDataArgs::default() }).unwrap();
    (verdict, Victim { model_path: summary.model_path, suite_manifest: suite.join("manifest.json") })
}

fn suite_args(v: &Victim) -> AttackArgs {
    AttackArgs {
        split: SplitFilter::All,
        only_correct: true,
        limit: Some(100),
        ..AttackArgs::new(v.model_path.clone(), v.suite_manifest.clone())
    }
}

struct SuiteRun {
    untargeted: EvalReport,
    targeted: EvalReport,
    outcomes: Vec<AttackOutcome>,
    untargeted_dir: PathBuf,
}

fn run_suite(v: &Victim, dir: &Path) -> (SuiteRun, f64) {
    let start = Instant::now();
    let untargeted_dir = dir.join("untargeted");
    let (untargeted, mut outcomes) = attack(&global(&untargeted_dir, 0), &suite_args(v)).unwrap();
    let (targeted, t_out) = attack(&global(&dir.join("targeted"), 0), &AttackArgs { targeted: true, ..suite_args(v) }).unwrap();
    outcomes.extend(t_out);
    (SuiteRun { untargeted, targeted, outcomes, untargeted_dir }, start.elapsed().as_secs_f64())
}

/// Entrywise bound check against a basis rebuilt from the clean cloud.
fn bound_violations(outcomes: &[AttackOutcome], k: usize, eps_max: f64) -> usize {
    outcomes
        .iter()
        .filter(|o| {
            let Perturbation::Spectral(delta) = &o.result.perturbation else { return true };
            let basis = SpectralBasis::from_cloud(&o.clean, k).unwrap();
            let bounds = delta_bounds(&basis.gft(o.clean.points()).unwrap(), eps_max, None);
            delta.rows().iter().zip(bounds.rows()).any(|(d, b)| (0..3).any(|i| d[i].abs() > b[i]))
        })
        .count()
}

// 5. Attack success.
fn attack_success(run: &SuiteRun, secs: f64) -> Verdict {
    let (u, t) = (&run.untargeted.aggregates, &run.targeted.aggregates);
    let violations = bound_violations(&run.outcomes, 10, 3.0);
    let pass = u.instances == 100
        && t.instances == 100
        && u.success_rate >= 0.95
        && t.success_rate >= 0.85
        && violations == 0
        && secs < 1800.0;
    Verdict::new(
        5,
        pass,
        format!(
            "untargeted {}/{} ({:.2}), targeted {}/{} ({:.2}), bound violations {violations}, mean D_c (successes) {:.3e}/{:.3e}, {secs:.0}s",
            u.successes,
            u.instances,
            u.success_rate,
            t.successes,
            t.instances,
            t.success_rate,
            u.success_mean_d_c.unwrap_or(f64::NAN),
            t.success_mean_d_c.unwrap_or(f64::NAN),
        ),
    )
}

// 6. Spectral/data energy identity.
fn energy_identity(outcomes: &[&AttackOutcome]) -> Verdict {
    let mut worst = 0.0f64;
    let mut bad = 0;
    for o in outcomes {
        let d = o.result.distortion;
        let rel = (d.d_norm - d.e_delta).abs() / d.d_norm.max(d.e_delta).max(f64::MIN_POSITIVE);
        if !rel_close(d.d_norm, d.e_delta, 1e-8) {
            bad += 1;
        }
        worst = worst.max(rel);
    }
    Verdict::new(6, bad == 0, format!("{} results, max rel |D_norm - E_Delta| {worst:.2e}, violations {bad}", outcomes.len()))
}

// 7. eps sensitivity.
fn eps_sensitivity(v: &Victim, at_three: &EvalReport, root: &Path) -> (Verdict, Vec<AttackOutcome>) {
    let mut rates = Vec::new();
    let mut all = Vec::new();
    for eps in [0.5, 1.0, 2.0] {
        let (_, outcomes) = run_attacks(&global(root, 0), &AttackArgs { eps_max: eps, ..suite_args(v) }).unwrap();
        rates.push((eps, outcomes.iter().filter(|o| o.row.success).count() as f64 / outcomes.len() as f64));
        all.extend(outcomes);
    }
    rates.push((3.0, at_three.aggregates.success_rate));
    let drops: Vec<f64> = rates.windows(2).map(|w| w[0].1 - w[1].1).filter(|&d| d > 0.0).collect();
    let (pass, note) = match drops.as_slice() {
        [] => (true, "non-decreasing"),
        [d] if *d <= 0.02 + 1e-12 => (true, "single inversion <= 2pp (report-only)"),
        _ => (false, "inversion beyond tolerance"),
    };
    let listing = rates.iter().map(|(e, r)| format!("eps {e}: {r:.2}")).collect::<Vec<_>>().join(", ");
    (Verdict::new(7, pass, format!("{listing}; {note}")), all)
}

// 8. Defense robustness trend.
fn defense_trend(v: &Victim, run: &SuiteRun, root: &Path) -> Verdict {
    let base_dir = root.join("baseline");
    let (baseline, _) = attack(&global(&base_dir, 0), &AttackArgs { baseline: Some(Baseline::Xyz), ..suite_args(v) }).unwrap();
    let sor = |adv: PathBuf, out: &str| {
        let args = DefendArgs { sor_drop_ratio: Some(0.1), ..DefendArgs::new(v.model_path.clone(), adv, DefenseKind::Sor) };
        defend_eval(&global(&root.join(out), 0), &args).unwrap().settings[0].success_rate
    };
    let gsda_def = sor(adv_manifest_path(&run.untargeted_dir), "sor_gsda");
    let base_def = sor(adv_manifest_path(&base_dir), "sor_base");
    let gsda_raw = run.untargeted.aggregates.success_rate;
    let base_raw = baseline.aggregates.success_rate;
    let retained = |d: f64, r: f64| if r > 0.0 { d / r } else { 0.0 };
    let (g, b) = (retained(gsda_def, gsda_raw), retained(base_def, base_raw));
    Verdict::new(
        8,
        g > b && base_raw > 0.0,
        format!(
            "SOR drop 0.1: GSDA {gsda_raw:.2} -> {gsda_def:.2} (retained {g:.3}), xyz baseline {base_raw:.2} -> {base_def:.2} (retained {b:.3})"
        ),
    )
}

// 9. K insensitivity.
fn k_insensitivity(v: &Victim, root: &Path) -> Verdict {
    let mut stats = Vec::new();
    for k in [5, 20] {
        let (_, outcomes) = run_attacks(&global(root, 0), &AttackArgs { k, limit: Some(30), ..suite_args(v) }).unwrap();
        let ok: Vec<f64> = outcomes.iter().filter(|o| o.row.success).map(|o| o.row.d_c).collect();
        let rate = ok.len() as f64 / outcomes.len() as f64;
        let mean = ok.iter().sum::<f64>() / ok.len().max(1) as f64;
        stats.push((k, outcomes.len(), rate, mean));
    }
    let (a, b) = (stats[0].3, stats[1].3);
    let variation = (a - b).abs() / a.min(b);
    let full = stats.iter().all(|s| s.1 == 30 && s.2 == 1.0);
    let listing = stats.iter().map(|(k, _, r, m)| format!("K={k}: success {r:.2}, mean D_c {m:.3e}")).collect::<Vec<_>>().join(", ");
    Verdict::new(9, full && variation < 0.5, format!("{listing}; relative variation {variation:.3}"))
}

// 10. Determinism.
fn determinism(v: &Victim, first: &SuiteRun, root: &Path) -> Verdict {
    let (second, _) = run_suite(v, &root.join("rerun"));
    let same_u = first.untargeted.payload() == second.untargeted.payload();
    let same_t = first.targeted.payload() == second.targeted.payload();
    Verdict::new(
        10,
        same_u && same_t,
        format!(
            "rerun with --jobs 1: untargeted payload identical {same_u}, targeted identical {same_t} (sha256 {})",
            &first.untargeted.payload_sha256[..16]
        ),
    )
}

#[test]
fn acceptance_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let mut verdicts = vec![transform_correctness(), energy_concentration(), gradient_oracles()];
    let (v4, victim) = victim_quality(root);
    verdicts.push(v4);
    let (run, secs) = run_suite(&victim, &root.join("suite_run"));
    verdicts.push(attack_success(&run, secs));
    let (v7, eps_outcomes) = eps_sensitivity(&victim, &run.untargeted, &root.join("eps"));
    let every: Vec<&AttackOutcome> = run.outcomes.iter().chain(&eps_outcomes).collect();
    verdicts.push(energy_identity(&every));
    verdicts.push(v7);
    verdicts.push(defense_trend(&victim, &run, root));
    verdicts.push(k_insensitivity(&victim, &root.join("k")));
    verdicts.push(determinism(&victim, &run, root));

    verdicts.sort_by_key(|v| v.id);
    say("\nacceptance summary");
    for v in &verdicts {
        say(&v.line());
    }
    let failed: Vec<u8> = verdicts.iter().filter(|v| !v.pass).map(|v| v.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
