//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line per criterion and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use instatrait::evaluation::{metrics_two_level, roc_auc, ConfusionMatrix, ReportMetric};
use instatrait::featureset::{
    assemble_matrix, build_popular_catalog, FeatureCatalog, FeatureCategory, FeatureMatrix,
};
use instatrait::learners::{binomial_objective, multinomial_objective, Dense, ModelFamily, Mlp};
use instatrait::pipeline::*;
use instatrait::psychometrics::{bin_score, compute_norms, Level, Norm, Scheme, Trait};
use instatrait::selection::{pearson, pearson_pvalue, select_features};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

// ---------------------------------------------------------------- 1

#[derive(Debug, PartialEq)]
struct OracleMetrics {
    accuracy: f64,
    precision: f64,
    recall: f64,
    f1: f64,
}

// Ratios with an empty denominator are taken as 0.
fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn oracle_binary(tp: u64, fp: u64, fn_: u64, tn: u64) -> Option<OracleMetrics> {
    let all = tp + fp + fn_ + tn;
    if all == 0 {
        return None;
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        (2.0 * precision * recall) / (precision + recall)
    } else {
        0.0
    };
    Some(OracleMetrics {
        accuracy: ratio(tp + tn, all),
        precision,
        recall,
        f1,
    })
}

fn metric_oracle() -> Outcome {
    let start = Instant::now();
    let mut cases = 0;
    let mut mismatches = Vec::new();
    for tp in 0..=5u64 {
        for fp in 0..=5u64 {
            for fn_ in 0..=5u64 {
                for tn in 0..=5u64 {
                    cases += 1;
                    let got = metrics_two_level(&ConfusionMatrix::two_level(tp, fp, fn_, tn)).ok().map(|m| {
                        OracleMetrics {
                            accuracy: m.accuracy,
                            precision: m.precision,
                            recall: m.recall,
                            f1: m.f1,
                        }
                    });
                    if got != oracle_binary(tp, fp, fn_, tn) {
                        mismatches.push((tp, fp, fn_, tn));
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        cases == 1296 && mismatches.is_empty() && elapsed < Duration::from_secs(1),
        format!("{cases} matrices, {} mismatches, {elapsed:.2?}", mismatches.len()),
    )
}

// ---------------------------------------------------------------- 2

fn pair_count_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &pi) in positive.iter().enumerate() {
        if !pi {
            continue;
        }
        for (j, &pj) in positive.iter().enumerate() {
            if pj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

fn random_scored_set(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<bool>) {
    let n = rng.gen_range(2..=50);
    let tied = rng.gen_bool(0.5);
    let scores: Vec<f64> = (0..n)
        .map(|_| if tied { rng.gen_range(0..6) as f64 / 5.0 } else { rng.gen::<f64>() })
        .collect();
    let mut positive: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
    positive[0] = true;
    positive[1] = false;
    (scores, positive)
}

fn auc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (scores, positive) = random_scored_set(&mut rng);
        let got = roc_auc(&scores, &positive).expect("both classes present");
        worst = worst.max((got - pair_count_auc(&scores, &positive)).abs());
    }
    let mut invariant = 0;
    for _ in 0..100 {
        let (scores, positive) = random_scored_set(&mut rng);
        let moved: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() + 7.0).collect();
        if roc_auc(&scores, &positive).unwrap() == roc_auc(&moved, &positive).unwrap() {
            invariant += 1;
        }
    }
    outcome(
        worst <= 1e-9 && invariant == 100,
        format!("max |diff| {worst:.1e} over 1000 sets, transform-invariant on {invariant}/100"),
    )
}

// ---------------------------------------------------------------- 3

fn direct_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1.0);
    let vx = x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / (n - 1.0);
    let vy = y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / (n - 1.0);
    cov / (vx.sqrt() * vy.sqrt())
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let h = (b - a) / intervals as f64;
    let mut sum = f(a) + f(b);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

// With t = sqrt(nu) tan(theta) the Student-t density becomes proportional
// to cos^(nu-1)(theta) on [-pi/2, pi/2], so the two-sided tail beyond |t| is
// a ratio of two such integrals.
fn t_tail_oracle(r: f64, n: usize) -> f64 {
    let nu = (n - 2) as f64;
    let t = r.abs() * (nu / (1.0 - r * r)).sqrt();
    let theta = (t / nu.sqrt()).atan();
    let density = |th: f64| th.cos().powf(nu - 1.0);
    let half = std::f64::consts::FRAC_PI_2;
    simpson(density, theta, half, 20_000) / simpson(density, 0.0, half, 20_000)
}

fn correlation_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_r = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(3..=200);
        let slope = rng.gen_range(-2.0..2.0);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| slope * v + rng.gen_range(-10.0..10.0)).collect();
        let got = pearson(&x, &y).expect("non-constant vectors");
        worst_r = worst_r.max((got - direct_pearson(&x, &y)).abs());
    }
    let mut worst_p = 0.0f64;
    for n in [5usize, 30, 400] {
        for _ in 0..50 {
            let r = rng.gen_range(-0.95..0.95);
            worst_p = worst_p.max((pearson_pvalue(r, n) - t_tail_oracle(r, n)).abs());
        }
    }
    outcome(
        worst_r <= 1e-10 && worst_p <= 1e-6,
        format!("pearson max |diff| {worst_r:.1e}, p-value max |diff| {worst_p:.1e} (n = 5, 30, 400)"),
    )
}

// ---------------------------------------------------------------- 4

fn relative_gradient_error(f: impl Fn(&[f64]) -> (f64, Vec<f64>), w: &[f64]) -> f64 {
    let (_, analytic) = f(w);
    let h = 1e-5;
    let mut numeric = Vec::with_capacity(w.len());
    let mut probe = w.to_vec();
    for j in 0..w.len() {
        probe[j] = w[j] + h;
        let up = f(&probe).0;
        probe[j] = w[j] - h;
        let down = f(&probe).0;
        probe[j] = w[j];
        numeric.push((up - down) / (2.0 * h));
    }
    let diff = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / na.max(nn).max(1e-12)
}

fn batch(rng: &mut ChaCha8Rng, d: usize, k: usize) -> (Dense, Vec<usize>) {
    let x = Dense::new(5, d, (0..5 * d).map(|_| rng.gen_range(-2.0..2.0)).collect());
    let y = (0..5).map(|i| if i < k { i } else { rng.gen_range(0..k) }).collect();
    (x, y)
}

fn gradient_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut lr, mut glm, mut mlp) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let d = rng.gen_range(2..=6);
        let (x, y) = batch(&mut rng, d, 2);
        let w: Vec<f64> = (0..=d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        lr = lr.max(relative_gradient_error(|w| binomial_objective(w, &x, &y, 0.1), &w));

        let (x, y) = batch(&mut rng, d, 3);
        let w: Vec<f64> = (0..3 * (d + 1)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        glm = glm.max(relative_gradient_error(|w| multinomial_objective(w, &x, &y, 3, 0.1), &w));

        let k = rng.gen_range(2..=3);
        let (x, y) = batch(&mut rng, d, k);
        let mut net = Mlp::init(d, &[7, 4], k, &mut rng);
        for layer in &mut net.layers {
            layer.bias.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
        }
        let rows: Vec<usize> = (0..5).collect();
        let start = net.params();
        let err = relative_gradient_error(
            |p| {
                let mut probe = net.clone();
                probe.set_params(p);
                probe.loss_and_gradient(&x, &y, &rows, 0.01)
            },
            &start,
        );
        mlp = mlp.max(err);
    }
    outcome(
        lr < 1e-4 && glm < 1e-4 && mlp < 1e-4,
        format!("worst relative error over 20 batches: LR {lr:.1e}, GLM {glm:.1e}, MLP {mlp:.1e}"),
    )
}

// ---------------------------------------------------------------- 5

fn planted_spec(seed: u64) -> SyntheticCohortSpec {
    SyntheticCohortSpec {
        n_participants: 400,
        catalog_width: 830,
        planted_per_trait: 20,
        effect: 0.7,
        missingness: MissingnessRates::none(),
        seed,
        ..SyntheticCohortSpec::default()
    }
}

struct Prepared {
    config: PipelineConfig,
    matrix: FeatureMatrix,
    labels: LabelTable,
    ids: Vec<String>,
    truth: GroundTruth,
}

fn prepare(config: PipelineConfig) -> Prepared {
    let inputs = load_run_inputs(&config).unwrap();
    let norms = compute_norms(&inputs.profiles, config.norms_version).unwrap();
    let labels = label_table(&inputs.profiles, &norms, &config.traits, &config.schemes).unwrap();
    let snaps = inputs.snapshots.as_deref().unwrap();
    let catalog = build_popular_catalog(snaps, config.catalog.min_followers, config.catalog.min_participants).unwrap();
    let ids: Vec<String> = inputs.profiles.iter().map(|p| p.participant_id.clone()).collect();
    let matrix = assemble_matrix(&ids, Some(snaps), &catalog, &inputs.demographics).unwrap();
    Prepared {
        config,
        matrix,
        labels,
        ids,
        truth: inputs.ground_truth.unwrap(),
    }
}

/// Planted recall of selection run on each trait's training partition.
fn selection_recall(seed: u64) -> f64 {
    let mut config = PipelineConfig::synthetic(seed, planted_spec(seed));
    config.schemes = vec![Scheme::Two];
    let p = prepare(config);
    let mut recalls = Vec::new();
    for &t in &p.config.traits {
        let labels = p.labels.labels_for(&p.ids, t, Scheme::Two);
        let split = split_rows(&labels, t, p.config.base_seed, &p.config).unwrap();
        let train = p.matrix.select_rows(&split.train);
        let train_labels: Vec<Option<Level>> = split.train.iter().map(|&i| labels[i]).collect();
        let set = select_features(&train, &train_labels, t, Scheme::Two, p.config.selection).unwrap();
        let names = set.names();
        let planted = p.truth.planted_features(t);
        recalls.push(planted.iter().filter(|f| names.contains(f)).count() as f64 / planted.len() as f64);
    }
    recalls.iter().sum::<f64>() / recalls.len() as f64
}

fn majority_rate(summary: &RunSummary, family: ModelFamily) -> f64 {
    let rates: Vec<f64> = summary
        .report
        .records
        .iter()
        .filter(|r| r.scheme == Scheme::Two && r.family == family)
        .map(|r| {
            let largest = r.confusion.counts.iter().map(|row| row.iter().sum::<u64>()).max().unwrap();
            largest as f64 / r.confusion.total() as f64
        })
        .collect();
    rates.iter().sum::<f64>() / rates.len() as f64
}

fn planted_recovery(run_dir: &Path) -> (Outcome, Option<RunSummary>) {
    let recalls: Vec<f64> = (0..10).map(selection_recall).collect();
    let recall = recalls.iter().sum::<f64>() / recalls.len() as f64;

    let config = PipelineConfig::synthetic(0, planted_spec(0));
    let start = Instant::now();
    let summary = match run_pipeline(&config, run_dir) {
        Ok(s) => s,
        Err(e) => return (outcome(false, format!("full run failed: {e}")), None),
    };
    let elapsed = start.elapsed();
    let trained = summary.manifest.trained().count();

    let mut passed = recall >= 0.8 && elapsed < Duration::from_secs(300) && trained == 189;
    let mut parts = vec![format!("recall {recall:.3} over 10 seeds")];
    for family in [ModelFamily::Lr, ModelFamily::Glm, ModelFamily::Rf, ModelFamily::Mlp] {
        let acc = summary.report.mean_metric(Scheme::Two, family, ReportMetric::Accuracy).unwrap_or(0.0);
        let majority = majority_rate(&summary, family);
        passed &= acc >= 0.85 && acc > majority;
        parts.push(format!("{} {acc:.3} (majority {majority:.3})", family.label()));
    }
    parts.push(format!("{trained} models in {elapsed:.1?}"));
    (outcome(passed, parts.join(", ")), Some(summary))
}

// ---------------------------------------------------------------- 6

fn null_calibration(scratch: &Path) -> Outcome {
    let mut accuracies = Vec::new();
    let (mut selected, mut tested) = (0usize, 0usize);
    let mut p_max = 0.0;
    for seed in 0..10 {
        let mut config = PipelineConfig::synthetic(seed, SyntheticCohortSpec::null(seed));
        config.schemes = vec![Scheme::Two];
        p_max = config.selection.p_max;
        let dir = scratch.join(format!("null{seed}"));
        let summary = match run_pipeline(&config, &dir) {
            Ok(s) => s,
            Err(e) => return outcome(false, format!("seed {seed}: {e}")),
        };
        accuracies.extend(
            summary
                .report
                .records
                .iter()
                .filter_map(|r| r.metric(ReportMetric::Accuracy)),
        );
        let catalog: FeatureCatalog =
            serde_json::from_str(&fs::read_to_string(dir.join("features.catalog.json")).unwrap()).unwrap();
        let indicators: Vec<&str> = catalog
            .columns
            .iter()
            .filter(|c| c.category == FeatureCategory::FollowingIndicator)
            .map(|c| c.name.as_str())
            .collect();
        for set in &summary.selected {
            tested += indicators.len();
            selected += set.features.iter().filter(|f| indicators.contains(&f.name.as_str())).count();
        }
    }
    let mean = accuracies.iter().sum::<f64>() / accuracies.len() as f64;
    let fpr = selected as f64 / tested as f64;
    outcome(
        (mean - 0.5).abs() <= 0.10 && fpr <= 2.0 * p_max && fpr >= p_max / 2.0,
        format!(
            "mean accuracy {mean:.3} over {} evaluations, indicator false-positive rate {fpr:.4} (p_max {p_max})",
            accuracies.len()
        ),
    )
}

// ---------------------------------------------------------------- 7

fn binning_fixture() -> Outcome {
    let norm = Norm {
        mean: 21.87,
        sd: 9.51,
        n: 400,
    };
    let (hi, lo) = (norm.upper_cutoff(), norm.lower_cutoff());
    let levels: Vec<Level> = [35.0, 20.0, 10.0]
        .iter()
        .map(|&s| bin_score(s, &norm, Scheme::Three).level())
        .collect();
    outcome(
        (hi - 31.38).abs() <= 0.01 && (lo - 12.36).abs() <= 0.01 && levels == [Level::High, Level::Medium, Level::Low],
        format!("cutoffs {hi:.2} / {lo:.2}, 35/20/10 -> {levels:?}"),
    )
}

// ---------------------------------------------------------------- 8

fn files_under(root: &Path, sub: &str) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        let Ok(entries) = fs::read_dir(dir) else { return };
        for entry in entries {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, &root.join(sub), &mut out);
    out
}

fn determinism(first_run: &Path, scratch: &Path) -> Outcome {
    let config = match PipelineConfig::load(&first_run.join(MANIFEST_FILE)) {
        Ok(c) => c,
        Err(e) => return outcome(false, format!("manifest did not load: {e}")),
    };
    let again = scratch.join("rerun");
    if let Err(e) = run_pipeline(&config, &again) {
        return outcome(false, format!("rerun failed: {e}"));
    }
    let mut compared = 0;
    let mut differing = Vec::new();
    for sub in ["models", "report"] {
        let a = files_under(first_run, sub);
        let b = files_under(&again, sub);
        compared += a.len();
        if a.keys().ne(b.keys()) {
            differing.push(format!("{sub}/ file lists"));
        }
        for (path, bytes) in &a {
            if b.get(path) != Some(bytes) {
                differing.push(path.display().to_string());
            }
        }
    }
    outcome(
        compared > 0 && differing.is_empty(),
        format!("{compared} model and report files compared, {} differ", differing.len()),
    )
}

// ---------------------------------------------------------------- 9

fn disclosure(summary: &RunSummary, run_dir: &Path) -> Outcome {
    let mut problems = Vec::new();
    for (scheme, metrics, families) in [
        (Scheme::Two, 3, ModelFamily::ALL.len()),
        (Scheme::Three, 2, ModelFamily::ALL.len() - 1),
    ] {
        match summary.report.table(scheme) {
            Some(t) => {
                if t.rows.len() != Trait::ALL.len() * metrics || t.families.len() != families {
                    problems.push(format!("{scheme}-level table is {} rows x {} families", t.rows.len(), t.families.len()));
                }
                if t.rows.iter().any(|r| !r.best.contains(&true)) {
                    problems.push(format!("{scheme}-level row without a best value"));
                }
            }
            None => problems.push(format!("no {scheme}-level table")),
        }
    }
    let text = fs::read_to_string(run_dir.join("report/report.txt")).unwrap_or_default();
    for needle in ["Two-level classification", "Three-level classification", "generated cohort"] {
        if !text.contains(needle) {
            problems.push(format!("report.txt lacks `{needle}`"));
        }
    }
    let readme = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md");
    let readme = fs::read_to_string(readme).unwrap_or_default().to_lowercase();
    for needle in ["not reproducible", "private", "synthetic cohorts stand in"] {
        if !readme.contains(needle) {
            problems.push(format!("README lacks `{needle}`"));
        }
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            "report tables have both layouts; report and README state the synthetic substitution".into()
        } else {
            problems.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let scratch = tempfile::tempdir().expect("temporary directory");
    let planted_dir = scratch.path().join("planted");
    let mut failed = 0;
    let mut record = |n: usize, name: &str, o: Outcome| {
        println!("{} {n}. {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        if !o.passed {
            failed += 1;
        }
    };

    record(1, "metric oracle", metric_oracle());
    record(2, "AUC oracle", auc_oracle());
    record(3, "correlation oracle", correlation_oracle());
    record(4, "gradient checks", gradient_checks());
    let (o, summary) = planted_recovery(&planted_dir);
    record(5, "planted-signal recovery", o);
    record(6, "null calibration", null_calibration(scratch.path()));
    record(7, "binning fixture", binning_fixture());
    match &summary {
        Some(_) => record(8, "determinism", determinism(&planted_dir, scratch.path())),
        None => record(8, "determinism", outcome(false, "no planted run to repeat".into())),
    }
    match &summary {
        Some(s) => record(9, "disclosure", disclosure(s, &planted_dir)),
        None => record(9, "disclosure", outcome(false, "no planted run to report".into())),
    }

    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
