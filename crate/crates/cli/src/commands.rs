use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use instatrait::evaluation::{build_report, EvaluationRecord};
use instatrait::featureset::{
    assemble_matrix, build_popular_catalog, read_demographics, FeatureCatalog, FeatureMatrix, PopularAccountCatalog,
};
use instatrait::ingestion::{parse_snapshot_dir, ProfileSnapshot};
use instatrait::learners::TrainedModel;
use instatrait::pipeline::{
    evaluate_on_split, generate_synthetic_cohort, label_table, load_demographics, load_profiles, load_snapshots,
    model_path, read_label_csv, run_pipeline, score_candidate, select_for_split, selected_path, split_path,
    split_rows, train_for_split, write_label_csv, InputPaths, LabelTable, PipelineConfig, PipelineError,
    SplitRecord, SyntheticCohortSpec, TraitSplit,
};
use instatrait::psychometrics::{compute_norms, PsychometricsError, Trait, TraitProfile};
use instatrait::selection::{CorrelationReport, SelectedFeatureSet};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{CandidateArgs, Cli, CliError, Command, SynthArgs};

type Result<T> = std::result::Result<T, CliError>;

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

macro_rules! out {
    ($($arg:tt)*) => {
        emit(&(format!($($arg)*) + "\n"))
    };
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(args) => synth(cli, args),
        Command::Report => report(cli),
        Command::ScoreCandidate(args) => candidate(cli, args),
        Command::Run => {
            let config = config(cli)?;
            let dir = out_dir(cli, Some(&config))?;
            let summary = run_pipeline(&config, &dir)?;
            for w in &summary.manifest.warnings {
                eprintln!("warning: {w}");
            }
            out!(
                "{} models for {} participants written to {}",
                summary.manifest.trained().count(),
                summary.manifest.n_participants,
                dir.display()
            );
            Ok(())
        }
        stage => {
            let config = config(cli)?;
            let work = Work::new(out_dir(cli, Some(&config))?)?;
            match stage {
                Command::ScoreQuestionnaire => score(&config, &work),
                Command::Ingest => ingest(&config, &work),
                Command::Catalog => catalog(&config, &work),
                Command::Features => features(&config, &work),
                Command::Select => select(&config, &work),
                Command::Train => train(&config, &work),
                Command::Evaluate => evaluate(&config, &work),
                _ => unreachable!("handled above"),
            }
        }
    }
}

fn config(cli: &Cli) -> Result<PipelineConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("this command needs --config".into()))?;
    if !path.is_file() {
        return Err(CliError::Usage(format!("config file {} does not exist", path.display())));
    }
    let mut config = PipelineConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.base_seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn out_dir(cli: &Cli, config: Option<&PipelineConfig>) -> Result<PathBuf> {
    cli.out
        .clone()
        .or_else(|| config.and_then(|c| c.output_dir.clone()))
        .ok_or_else(|| CliError::Usage("no output directory: pass --out".into()))
}

/// Directory shared by the individual stage commands; file names match
/// those of a full run.
struct Work {
    dir: PathBuf,
}

impl Work {
    fn new(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir).map_err(|e| PipelineError::io(&dir, e))?;
        Ok(Self { dir })
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    fn write(&self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| PipelineError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| PipelineError::io(&path, e))?;
        Ok(())
    }

    fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).expect("output serializes") + "\n";
        self.write(rel, text.as_bytes())
    }

    /// Contents of an earlier stage's output; its absence is a usage error.
    fn read(&self, rel: &str, producer: &str) -> Result<String> {
        let path = self.path(rel);
        if !path.is_file() {
            return Err(CliError::Usage(format!(
                "{} is missing; run `{producer}` first",
                path.display()
            )));
        }
        Ok(fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?)
    }

    fn read_json<T: DeserializeOwned>(&self, rel: &str, producer: &str) -> Result<T> {
        let text = self.read(rel, producer)?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Pipeline(PipelineError::Config(format!("{}: {e}", self.path(rel).display()))))
    }

    fn labels(&self) -> Result<LabelTable> {
        Ok(read_label_csv(self.read("labels.csv", "score-questionnaire")?.as_bytes())?)
    }

    fn matrix(&self) -> Result<FeatureMatrix> {
        let catalog: FeatureCatalog = self.read_json("features.catalog.json", "features")?;
        let text = self.read("features.csv", "features")?;
        FeatureMatrix::read_csv(text.as_bytes(), catalog)
            .map_err(|e| CliError::Pipeline(PipelineError::stage("features", None, e)))
    }

    fn split(&self, t: Trait, matrix: &FeatureMatrix) -> Result<TraitSplit> {
        let record: SplitRecord = self.read_json(&split_path(t), "select")?;
        Ok(record.to_split(matrix)?)
    }
}

fn score(config: &PipelineConfig, work: &Work) -> Result<()> {
    let (key, profiles) = load_profiles(config)?;
    for p in &profiles {
        p.validate(&key)
            .map_err(|e| PipelineError::stage("score", None, e))?;
    }
    let norms = compute_norms(&profiles, config.norms_version).map_err(|e| match e {
        PsychometricsError::InsufficientData { trait_id, .. } => PipelineError::stage("norm", Some(trait_id), e),
        other => PipelineError::stage("norm", None, other),
    })?;
    let labels = label_table(&profiles, &norms, &config.traits, &config.schemes)?;
    work.write_json("profiles.json", &profiles)?;
    work.write_json("norms.json", &norms)?;
    let mut buf = Vec::new();
    write_label_csv(&labels, &mut buf)?;
    work.write("labels.csv", &buf)?;
    out!("scored {} participants", profiles.len());
    Ok(())
}

fn ingest(config: &PipelineConfig, work: &Work) -> Result<()> {
    let (snapshots, issues) = load_snapshots(config)?;
    let Some(snapshots) = snapshots else {
        eprintln!("warning: no Instagram inputs configured; nothing to ingest");
        return Ok(());
    };
    work.write_json("snapshots.json", &snapshots)?;
    work.write_json("ingest_issues.json", &issues)?;
    out!("ingested {} snapshots ({} parse issues)", snapshots.len(), issues.len());
    Ok(())
}

fn catalog(config: &PipelineConfig, work: &Work) -> Result<()> {
    let snapshots: Vec<ProfileSnapshot> = work.read_json("snapshots.json", "ingest")?;
    let catalog = build_popular_catalog(&snapshots, config.catalog.min_followers, config.catalog.min_participants)
        .map_err(|e| PipelineError::stage("catalog", None, e))?;
    work.write_json("catalog.json", &catalog)?;
    out!("{} popular accounts (fingerprint {})", catalog.len(), catalog.fingerprint);
    Ok(())
}

fn features(config: &PipelineConfig, work: &Work) -> Result<()> {
    let profiles: Vec<TraitProfile> = work.read_json("profiles.json", "score-questionnaire")?;
    let ids: Vec<String> = profiles.iter().map(|p| p.participant_id.clone()).collect();
    let snapshots: Option<Vec<ProfileSnapshot>> = if work.path("snapshots.json").is_file() {
        Some(work.read_json("snapshots.json", "ingest")?)
    } else {
        eprintln!("warning: no ingested snapshots; the matrix holds demographic columns only");
        None
    };
    let popular = match snapshots {
        Some(_) => PopularAccountCatalog::from_json(&work.read("catalog.json", "catalog")?)
            .map_err(|e| PipelineError::stage("features", None, e))?,
        None => PopularAccountCatalog::empty(),
    };
    let demographics = load_demographics(config)?;
    let matrix = assemble_matrix(&ids, snapshots.as_deref(), &popular, &demographics)
        .map_err(|e| PipelineError::stage("features", None, e))?;
    let mut buf = Vec::new();
    matrix
        .write_csv(&mut buf)
        .map_err(|e| PipelineError::stage("features", None, e))?;
    work.write("features.csv", &buf)?;
    work.write_json("features.catalog.json", &matrix.catalog)?;
    if work.path("labels.csv").is_file() {
        let labels = work.labels()?;
        let targets: Vec<_> = config.traits.iter().map(|&t| (t, labels.scores_for(&ids, t))).collect();
        let mut buf = Vec::new();
        CorrelationReport::compute(&matrix, &targets)
            .write_csv(&mut buf)
            .map_err(|e| PipelineError::stage("select", None, e))?;
        work.write("correlations.csv", &buf)?;
    }
    out!("{} participants x {} features", matrix.n_rows(), matrix.n_cols());
    Ok(())
}

fn select(config: &PipelineConfig, work: &Work) -> Result<()> {
    let matrix = work.matrix()?;
    let labels = work.labels()?;
    let ids = &matrix.row_ids;
    let mut total = 0;
    for &t in &config.traits {
        let split = split_rows(&labels.labels_for(ids, t, config.schemes[0]), t, config.base_seed, config)?;
        work.write_json(&split_path(t), &SplitRecord::from_split(&split, ids))?;
        for &s in &config.schemes {
            let selected = select_for_split(&matrix, &labels.labels_for(ids, t, s), &split, s, config)?;
            total += selected.features.len();
            work.write_json(&selected_path(t, s), &selected)?;
        }
    }
    out!(
        "selected {total} features over {} trait/scheme pairs",
        config.traits.len() * config.schemes.len()
    );
    Ok(())
}

fn train(config: &PipelineConfig, work: &Work) -> Result<()> {
    let matrix = work.matrix()?;
    let labels = work.labels()?;
    let mut count = 0;
    for &t in &config.traits {
        let split = work.split(t, &matrix)?;
        for &s in &config.schemes {
            let selected: SelectedFeatureSet = work.read_json(&selected_path(t, s), "select")?;
            let models = train_for_split(&matrix, &labels.labels_for(&matrix.row_ids, t, s), &split, &selected, config)?;
            for m in &models {
                work.write(&model_path(t, s, m.spec.family), (m.to_json() + "\n").as_bytes())?;
            }
            count += models.len();
        }
    }
    out!("trained {count} models");
    Ok(())
}

fn evaluate(config: &PipelineConfig, work: &Work) -> Result<()> {
    let matrix = work.matrix()?;
    let labels = work.labels()?;
    let mut records: Vec<EvaluationRecord> = Vec::new();
    for &t in &config.traits {
        let split = work.split(t, &matrix)?;
        for &s in &config.schemes {
            let models = config
                .families
                .iter()
                .filter(|f| f.supports(s))
                .map(|&f| {
                    let text = work.read(&model_path(t, s, f), "train")?;
                    TrainedModel::from_json(&text)
                        .map_err(|e| CliError::Pipeline(PipelineError::stage("evaluate", Some(t), e)))
                })
                .collect::<Result<Vec<_>>>()?;
            records.extend(evaluate_on_split(&matrix, &labels.labels_for(&matrix.row_ids, t, s), &split, s, &models)?);
        }
    }
    work.write_json("evaluations.json", &records)?;
    out!("evaluated {} models", records.len());
    Ok(())
}

fn report(cli: &Cli) -> Result<()> {
    let work = Work::new(out_dir(cli, None)?)?;
    let records: Vec<EvaluationRecord> = work.read_json("evaluations.json", "evaluate")?;
    let report = build_report(records).map_err(|e| PipelineError::stage("report", None, e))?;
    let mut buf = Vec::new();
    report
        .write_csv(&mut buf)
        .map_err(|e| PipelineError::stage("report", None, e))?;
    work.write("report/report.csv", &buf)?;
    work.write("report/report.json", (report.to_json() + "\n").as_bytes())?;
    let text = report.render_text();
    work.write("report/report.txt", text.as_bytes())?;
    emit(&text);
    Ok(())
}

fn synth(cli: &Cli, args: &SynthArgs) -> Result<()> {
    let dir = out_dir(cli, None)?;
    if fs::read_dir(&dir).map(|mut d| d.next().is_some()).unwrap_or(false) {
        return Err(CliError::Usage(format!("{} is not empty", dir.display())));
    }
    let mut spec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
            serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("cohort spec: {e}")))?
        }
        None if args.null => SyntheticCohortSpec::null(0),
        None => SyntheticCohortSpec::default(),
    };
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    if args.null {
        spec.planted_per_trait = 0;
        spec.effect = 0.0;
        spec.overrides.clear();
    }
    if let Some(n) = args.participants {
        spec.n_participants = n;
    }
    if let Some(w) = args.width {
        spec.catalog_width = w;
    }
    if let Some(k) = args.planted {
        spec.planted_per_trait = k;
    }
    if let Some(e) = args.effect {
        spec.effect = e;
    }
    if let Some(q) = args.label_noise {
        spec.label_noise = q;
    }
    if args.no_missingness {
        spec.missingness = instatrait::pipeline::MissingnessRates::none();
    }
    let cohort = generate_synthetic_cohort(&spec)?;
    cohort.write_dir(&dir)?;
    let mut config = PipelineConfig::synthetic(spec.seed, spec.clone());
    config.synthetic = None;
    config.inputs = InputPaths {
        questionnaire: Some("responses.csv".into()),
        scoring_key: Some("scoring_key.json".into()),
        snapshots: Some("snapshots".into()),
        demographics: Some("demographics.csv".into()),
    };
    let path = dir.join("config.json");
    fs::write(&path, config.to_json()).map_err(|e| PipelineError::io(&path, e))?;
    fs::write(dir.join("spec.json"), serde_json::to_string_pretty(&spec).expect("spec serializes") + "\n")
        .map_err(|e| PipelineError::io(&dir, e))?;
    out!(
        "{} participants written to {}; run with --config {}",
        spec.n_participants,
        dir.display(),
        path.display()
    );
    Ok(())
}

fn candidate(cli: &Cli, args: &CandidateArgs) -> Result<()> {
    let run: &Path = match (&args.run, &cli.out) {
        (Some(r), _) => r,
        (None, Some(o)) => o,
        (None, None) => return Err(CliError::Usage("pass --run or --out with the run directory".into())),
    };
    let snapshot = match &args.snapshot {
        Some(dir) => {
            let parsed = parse_snapshot_dir(dir).map_err(|e| PipelineError::stage("ingest", None, e))?;
            for issue in &parsed.issues {
                eprintln!("warning: {issue:?}");
            }
            Some(parsed.snapshot)
        }
        None => None,
    };
    let demographics = match &args.demographics {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
            let rows = read_demographics(file).map_err(|e| PipelineError::stage("features", None, e))?;
            let id = args
                .participant
                .clone()
                .or_else(|| snapshot.as_ref().map(|s| s.participant_id.clone()))
                .ok_or_else(|| CliError::Usage("pass --participant to pick a demographics row".into()))?;
            let row = rows
                .get(&id)
                .cloned()
                .ok_or_else(|| CliError::Usage(format!("no demographics row for `{id}`")))?;
            Some(row)
        }
        None => None,
    };
    let scored = score_candidate(run, snapshot.as_ref(), demographics.as_ref(), args.scheme)?;
    out!("{}", serde_json::to_string_pretty(&scored).expect("score serializes"));
    Ok(())
}
