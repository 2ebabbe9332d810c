//! Config-driven orchestration of the full pipeline.
//!
//! Every stage reads its inputs from and writes its outputs to one output
//! directory, so stages can be run one at a time and [`run`] is exactly the
//! stages run in sequence.
//!
//! | stage      | reads                                   | writes |
//! |------------|-----------------------------------------|--------|
//! | synth      | config                                  | `synthetic.csv`, `ground_truth.csv` |
//! | ingest     | input CSV or `synthetic.csv`            | `quality.csv`, `train.csv`, `test.csv`, `split.csv` |
//! | oversample | `train.csv`                             | `train_oversampled.csv`, `class_balance.csv` |
//! | train      | `train_oversampled.csv`, `test.csv`     | `model.txt`, `evaluation.csv`, `cv.csv` |
//! | explain    | `model.txt`, `train.csv`                | `shap_values.csv`, `shap_importance.csv` |
//! | ranges     | `model.txt`, `train.csv`, `shap_importance.csv` | `ice_curves.csv`, `control_ranges.csv`, `control_ranges.txt`, `plots/*.svg` |
//! | validate   | `test.csv`, `control_ranges.csv`        | `validation.csv`, `validation.txt` |
//! | report     | the CSVs above                          | `summary.txt` |

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attribution::{self, Estimator, ShapleyReport, DEFAULT_SELECTION_THRESHOLD};
use crate::dataset::{self, ProcessDataset, DEFAULT_TARGET_COLUMN};
use crate::error::{Error, Result};
use crate::gbdt::{self, io::load_model, BoostedEnsemble, ExactGreedyParams, GossParams, ModelParams, Variant};
use crate::ice::{self, ControlRange, DEFAULT_ALPHAS, DEFAULT_MAX_INSTANCES};
use crate::smote::{self, SmoteConfig};
use crate::synth::{self, SynthConfig};
use crate::validate::{self, ValidationReport};

pub const SYNTHETIC_DATA: &str = "synthetic.csv";
pub const GROUND_TRUTH: &str = "ground_truth.csv";
pub const QUALITY: &str = "quality.csv";
pub const TRAIN: &str = "train.csv";
pub const TEST: &str = "test.csv";
pub const SPLIT: &str = "split.csv";
pub const OVERSAMPLED: &str = "train_oversampled.csv";
pub const CLASS_BALANCE: &str = "class_balance.csv";
pub const MODEL: &str = "model.txt";
pub const EVALUATION: &str = "evaluation.csv";
pub const CV: &str = "cv.csv";
pub const SHAP_VALUES: &str = "shap_values.csv";
pub const SHAP_IMPORTANCE: &str = "shap_importance.csv";
pub const ICE_CURVES: &str = "ice_curves.csv";
pub const RANGES: &str = "control_ranges.csv";
pub const RANGES_TEXT: &str = "control_ranges.txt";
pub const VALIDATION: &str = "validation.csv";
pub const VALIDATION_TEXT: &str = "validation.txt";
pub const SUMMARY: &str = "summary.txt";
pub const PLOTS_DIR: &str = "plots";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// KAMP-style CSV. When absent the pipeline runs on `synthetic.csv`
    /// produced by the synth stage.
    pub input: Option<PathBuf>,
    pub target: String,
    /// Columns to keep, in order; empty keeps every numeric column.
    pub features: Vec<String>,
    /// Fence multiplier for the IQR outlier count in the quality report.
    pub iqr_k: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            input: None,
            target: DEFAULT_TARGET_COLUMN.into(),
            features: Vec::new(),
            iqr_k: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            test_fraction: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoteSection {
    pub enabled: bool,
    pub k: usize,
    /// Minority size after oversampling; defaults to the majority count.
    pub target_count: Option<usize>,
    pub seed: u64,
}

impl Default for SmoteSection {
    fn default() -> Self {
        SmoteSection {
            enabled: true,
            k: 5,
            target_count: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub variant: Variant,
    /// Folds for cross-validation on the oversampled training set; 0 skips it.
    pub cv_folds: usize,
    pub cv_seed: u64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            variant: Variant::ExactGreedy,
            cv_folds: 3,
            cv_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Tree,
    Exact,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapSection {
    pub estimator: EstimatorKind,
    /// Permutations per instance for the sampled estimator.
    pub permutations: usize,
    pub background: usize,
    pub max_instances: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for ShapSection {
    fn default() -> Self {
        ShapSection {
            estimator: EstimatorKind::Tree,
            permutations: 1000,
            background: 128,
            max_instances: 500,
            threshold: DEFAULT_SELECTION_THRESHOLD,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IceSection {
    pub alphas: Vec<f64>,
    pub max_instances: usize,
    pub seed: u64,
}

impl Default for IceSection {
    fn default() -> Self {
        IceSection {
            alphas: DEFAULT_ALPHAS.to_vec(),
            max_instances: DEFAULT_MAX_INSTANCES,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub plots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            plots: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed. When set, every section seed is derived from it.
    pub seed: Option<u64>,
    pub data: DataSection,
    pub split: SplitSection,
    pub smote: SmoteSection,
    pub model: ModelSection,
    pub exact_greedy: ExactGreedyParams,
    pub goss: GossParams,
    pub shap: ShapSection,
    pub ice: IceSection,
    pub synth: SynthConfig,
    pub output: OutputSection,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Overwrite every section seed with a fixed offset from `master`.
    pub fn set_master_seed(&mut self, master: u64) {
        self.seed = Some(master);
        self.split.seed = master;
        self.smote.seed = master.wrapping_add(1);
        self.goss.seed = master.wrapping_add(2);
        self.model.cv_seed = master.wrapping_add(3);
        self.shap.seed = master.wrapping_add(4);
        self.ice.seed = master.wrapping_add(5);
        self.synth.seed = master.wrapping_add(6);
    }

    /// Applies the master seed, if any.
    pub fn resolved(mut self) -> Self {
        if let Some(s) = self.seed {
            self.set_master_seed(s);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.split.test_fraction > 0.0 && self.split.test_fraction < 1.0) {
            return bad("split.test_fraction must lie in (0, 1)");
        }
        if self.smote.k == 0 {
            return bad("smote.k must be positive");
        }
        if self.model.cv_folds == 1 {
            return bad("model.cv_folds must be 0 (off) or at least 2");
        }
        if self.ice.alphas.is_empty() || self.ice.alphas.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return bad("ice.alphas must be a non-empty list of positive numbers");
        }
        if !(self.shap.threshold > 0.0 && self.shap.threshold <= 1.0) {
            return bad("shap.threshold must lie in (0, 1]");
        }
        if self.shap.background == 0 || self.shap.max_instances == 0 || self.ice.max_instances == 0 {
            return bad("shap.background, shap.max_instances and ice.max_instances must be positive");
        }
        if self.shap.estimator == EstimatorKind::Sampled && self.shap.permutations == 0 {
            return bad("shap.permutations must be positive");
        }
        if !(self.data.iqr_k >= 0.0) {
            return bad("data.iqr_k must be non-negative");
        }
        if self.data.input.is_none() {
            self.synth.validate()?;
        }
        Ok(())
    }

    pub fn model_params(&self) -> ModelParams {
        match self.model.variant {
            Variant::ExactGreedy => ModelParams::ExactGreedy(self.exact_greedy.clone()),
            Variant::GossLeafwise => ModelParams::GossLeafwise(self.goss.clone()),
        }
    }

    fn estimator(&self) -> Estimator {
        match self.shap.estimator {
            EstimatorKind::Tree => Estimator::Tree,
            EstimatorKind::Exact => Estimator::Exact,
            EstimatorKind::Sampled => Estimator::Sampled {
                permutations: self.shap.permutations,
                seed: self.shap.seed,
            },
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.output.dir.join(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Synth,
    Ingest,
    Oversample,
    Train,
    Explain,
    Ranges,
    Validate,
    Report,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Synth => "synth",
            Stage::Ingest => "ingest",
            Stage::Oversample => "oversample",
            Stage::Train => "train",
            Stage::Explain => "explain",
            Stage::Ranges => "ranges",
            Stage::Validate => "validate",
            Stage::Report => "report",
        }
    }

    /// Process exit status when this stage fails.
    pub fn exit_code(self) -> u8 {
        match self {
            Stage::Config => 10,
            Stage::Synth => 11,
            Stage::Ingest => 12,
            Stage::Oversample => 13,
            Stage::Train => 14,
            Stage::Explain => 15,
            Stage::Ranges => 16,
            Stage::Validate => 17,
            Stage::Report => 18,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

pub type StageResult<T> = std::result::Result<T, StageError>;

fn in_stage<T>(stage: Stage, f: impl FnOnce() -> Result<T>) -> StageResult<T> {
    f().map_err(|source| StageError { stage, source })
}

fn create_out_dir(cfg: &PipelineConfig) -> Result<()> {
    fs::create_dir_all(&cfg.output.dir).map_err(|e| Error::io(&cfg.output.dir, e))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn open_artifact(path: &Path, what: &str, producer: &str) -> Result<File> {
    if !path.exists() {
        return Err(Error::MissingArtifact {
            what: what.into(),
            path: path.to_path_buf(),
            producer: producer.into(),
        });
    }
    File::open(path).map_err(|e| Error::io(path, e))
}

fn load_dataset(cfg: &PipelineConfig, name: &str, what: &str, producer: &str) -> Result<ProcessDataset> {
    let path = cfg.out(name);
    dataset::read_csv(open_artifact(&path, what, producer)?, &cfg.data.target)
}

fn load_trained_model(cfg: &PipelineConfig) -> Result<BoostedEnsemble> {
    let path = cfg.out(MODEL);
    open_artifact(&path, "model", "train")?;
    load_model(&path)
}

/// Errors unless the dataset's columns are exactly the model's features.
fn check_columns(model: &BoostedEnsemble, ds: &ProcessDataset) -> Result<()> {
    if model.feature_names() != ds.feature_names() {
        return Err(Error::Config(format!(
            "model features {:?} do not match data columns {:?}",
            model.feature_names(),
            ds.feature_names()
        )));
    }
    Ok(())
}

pub fn synth_stage(cfg: &PipelineConfig) -> StageResult<()> {
    in_stage(Stage::Synth, || {
        create_out_dir(cfg)?;
        let (ds, truth) = synth::generate(&cfg.synth)?;
        ds.write_csv(&cfg.out(SYNTHETIC_DATA), &cfg.data.target)?;
        write_file(&cfg.out(GROUND_TRUTH), |w| {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(["feature", "lower", "upper"])?;
            for p in &truth.relevant {
                c.write_record([
                    truth.feature_names[p.feature].clone(),
                    p.lower.to_string(),
                    p.upper.to_string(),
                ])?;
            }
            c.flush().map_err(|e| Error::io(GROUND_TRUTH, e))
        })
    })
}

pub fn ingest_stage(cfg: &PipelineConfig) -> StageResult<()> {
    in_stage(Stage::Ingest, || {
        create_out_dir(cfg)?;
        let ds = match &cfg.data.input {
            Some(path) => dataset::load_csv(path, &cfg.data.target)?,
            None => load_dataset(cfg, SYNTHETIC_DATA, "synthetic data", "synth")?,
        };
        let ds = if cfg.data.features.is_empty() {
            ds
        } else {
            ds.select_features(&cfg.data.features)?
        };
        let quality = dataset::quality_check(&ds, cfg.data.iqr_k)?;
        write_file(&cfg.out(QUALITY), |w| quality.write_csv(w))?;
        let sp = dataset::split(&ds, cfg.split.test_fraction, cfg.split.seed)?;
        sp.train.write_csv(&cfg.out(TRAIN), &cfg.data.target)?;
        sp.test.write_csv(&cfg.out(TEST), &cfg.data.target)?;
        write_file(&cfg.out(SPLIT), |w| {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(["row", "set"])?;
            let mut all: Vec<(usize, &str)> = sp
                .train_rows
                .iter()
                .map(|&r| (r, "train"))
                .chain(sp.test_rows.iter().map(|&r| (r, "test")))
                .collect();
            all.sort_unstable();
            for (r, set) in all {
                c.write_record([r.to_string(), set.to_string()])?;
            }
            c.flush().map_err(|e| Error::io(SPLIT, e))
        })
    })
}

pub fn oversample_stage(cfg: &PipelineConfig) -> StageResult<()> {
    in_stage(Stage::Oversample, || {
        let train = load_dataset(cfg, TRAIN, "training split", "ingest")?;
        let balanced = if cfg.smote.enabled {
            smote::oversample(
                &train,
                &SmoteConfig {
                    k: cfg.smote.k,
                    target_count: cfg.smote.target_count,
                    seed: cfg.smote.seed,
                },
            )?
        } else {
            train.clone()
        };
        balanced.write_csv(&cfg.out(OVERSAMPLED), &cfg.data.target)?;
        write_file(&cfg.out(CLASS_BALANCE), |w| {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(["set", "normal", "defective"])?;
            for (name, ds) in [("before", &train), ("after", &balanced)] {
                let (n, d) = ds.class_counts();
                c.write_record([name.to_string(), n.to_string(), d.to_string()])?;
            }
            c.flush().map_err(|e| Error::io(CLASS_BALANCE, e))
        })
    })
}

pub fn train_stage(cfg: &PipelineConfig) -> StageResult<()> {
    in_stage(Stage::Train, || {
        let train = load_dataset(cfg, OVERSAMPLED, "oversampled training set", "oversample")?;
        let test = load_dataset(cfg, TEST, "test split", "ingest")?;
        let params = cfg.model_params();
        let model = params.train(&train)?;
        gbdt::io::save_model(&model, &cfg.out(MODEL))?;
        let cm = gbdt::evaluate(&model, &test)?;
        write_file(&cfg.out(EVALUATION), |w| {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(["variant", "tp", "fp", "tn", "fn", "accuracy", "accuracy_percent"])?;
            c.write_record([
                model.variant().to_string(),
                cm.tp.to_string(),
                cm.fp.to_string(),
                cm.tn.to_string(),
                cm.fn_.to_string(),
                cm.accuracy().to_string(),
                format!("{:.2}", cm.accuracy_percent()),
            ])?;
            c.flush().map_err(|e| Error::io(EVALUATION, e))
        })?;
        let cv_path = cfg.out(CV);
        if cfg.model.cv_folds >= 2 {
            let cv = gbdt::cross_validate(&train, &params, cfg.model.cv_folds, cfg.model.cv_seed)?;
            write_file(&cv_path, |w| {
                let mut c = csv::Writer::from_writer(w);
                c.write_record(["fold", "holdout_rows", "accuracy"])?;
                let fmt = |a: Option<f64>| a.map_or("N/A".to_string(), |v| v.to_string());
                for (i, f) in cv.folds.iter().enumerate() {
                    c.write_record([(i + 1).to_string(), f.holdout_rows.to_string(), fmt(f.accuracy)])?;
                }
                c.write_record(["mean".to_string(), String::new(), fmt(cv.mean)])?;
                c.flush().map_err(|e| Error::io(CV, e))
            })?;
        } else if cv_path.exists() {
            fs::remove_file(&cv_path).map_err(|e| Error::io(&cv_path, e))?;
        }
        Ok(())
    })
}

pub fn explain_stage(cfg: &PipelineConfig) -> StageResult<()> {
    in_stage(Stage::Explain, || {
        let model = load_trained_model(cfg)?;
        let train = load_dataset(cfg, TRAIN, "training split", "ingest")?;
        check_columns(&model, &train)?;
        let x = train.features();
        let instances = attribution::subsample_rows(x, cfg.shap.max_instances, cfg.shap.seed);
        let background =
            attribution::subsample_rows(x, cfg.shap.background, cfg.shap.seed.wrapping_add(1));
        let phi = attribution::explain(&model, &instances, &background, cfg.estimator())?;
        let report = ShapleyReport::from_phi(phi, train.feature_names().to_vec(), cfg.shap.threshold)?;
        write_file(&cfg.out(SHAP_VALUES), |w| report.write_values_csv(w))?;
        write_file(&cfg.out(SHAP_IMPORTANCE), |w| report.write_importance_csv(w))
    })
}

/// Names flagged as selected in a feature-importance CSV, in rank order.
pub fn read_selected_features(path: &Path) -> Result<Vec<String>> {
    let mut rdr = csv::Reader::from_reader(open_artifact(path, "feature importance", "explain")?);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.get(4).map(str::trim) == Some("1") {
            out.push(rec.get(1).unwrap_or("").to_string());
        }
    }
    Ok(out)
}

pub fn ranges_stage(cfg: &PipelineConfig) -> StageResult<()> {
    in_stage(Stage::Ranges, || {
        let model = load_trained_model(cfg)?;
        let train = load_dataset(cfg, TRAIN, "training split", "ingest")?;
        check_columns(&model, &train)?;
        let selected = read_selected_features(&cfg.out(SHAP_IMPORTANCE))?;
        let idx: Vec<usize> = selected
            .iter()
            .map(|n| train.feature_index(n).ok_or_else(|| Error::UnknownFeature(n.clone())))
            .collect::<Result<_>>()?;
        let (surfaces, ranges) = ice::ranges_table(
            &model,
            &train,
            &idx,
            &cfg.ice.alphas,
            cfg.ice.max_instances,
            cfg.ice.seed,
        )?;
        write_file(&cfg.out(ICE_CURVES), |w| ice::write_curves_csv(&surfaces, w))?;
        write_file(&cfg.out(RANGES), |w| ice::write_ranges_csv(&ranges, w))?;
        let text = ice::ranges_text_table(&ranges);
        fs::write(cfg.out(RANGES_TEXT), text).map_err(|e| Error::io(cfg.out(RANGES_TEXT), e))?;
        if cfg.output.plots {
            let dir = cfg.out(PLOTS_DIR);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            for s in &surfaces {
                let file = dir.join(format!("ice_{}.svg", sanitize(&s.name)));
                fs::write(&file, ice::plot_svg(s)).map_err(|e| Error::io(&file, e))?;
            }
        }
        Ok(())
    })
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn load_ranges(cfg: &PipelineConfig) -> Result<Vec<ControlRange>> {
    ice::read_ranges_csv(open_artifact(&cfg.out(RANGES), "control ranges", "ranges")?)
}

pub fn validate_stage(cfg: &PipelineConfig) -> StageResult<()> {
    in_stage(Stage::Validate, || {
        let test = load_dataset(cfg, TEST, "test split", "ingest")?;
        let ranges = load_ranges(cfg)?;
        let per_alpha: Vec<(f64, Vec<ControlRange>)> = cfg
            .ice
            .alphas
            .iter()
            .map(|&a| (a, ranges.iter().filter(|r| r.alpha == a).cloned().collect()))
            .collect();
        let report = validate::validation_report(&test, &per_alpha)?;
        write_file(&cfg.out(VALIDATION), |w| report.write_csv(w))?;
        fs::write(cfg.out(VALIDATION_TEXT), report.text_table())
            .map_err(|e| Error::io(cfg.out(VALIDATION_TEXT), e))
    })
}

/// Aligned rendering of a CSV file, with long decimals shortened to four places.
fn csv_as_table(path: &Path) -> Result<Option<String>> {
    if !path.exists() {
        return Ok(None);
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        rows.push(
            rec.iter()
                .map(|f| match f.parse::<f64>() {
                    Ok(v) if f.contains('.') || f.contains('e') => format!("{v:.4}"),
                    _ => f.to_string(),
                })
                .collect(),
        );
    }
    Ok(Some(ice::render_table(&rows)))
}

fn split_counts(cfg: &PipelineConfig) -> Result<Option<String>> {
    let (train_p, test_p) = (cfg.out(TRAIN), cfg.out(TEST));
    if !train_p.exists() || !test_p.exists() {
        return Ok(None);
    }
    let train = load_dataset(cfg, TRAIN, "training split", "ingest")?;
    let test = load_dataset(cfg, TEST, "test split", "ingest")?;
    let mut rows = vec![vec![
        "Set".to_string(),
        "Normal".into(),
        "Defect".into(),
        "Total".into(),
    ]];
    for (name, ds) in [("Training", &train), ("Test", &test)] {
        let (n, d) = ds.class_counts();
        rows.push(vec![name.into(), n.to_string(), d.to_string(), ds.n_rows().to_string()]);
    }
    Ok(Some(ice::render_table(&rows)))
}

fn recovery_section(cfg: &PipelineConfig) -> Result<Option<String>> {
    let truth_p = cfg.out(GROUND_TRUTH);
    if cfg.data.input.is_some() || !truth_p.exists() {
        return Ok(None);
    }
    let mut rdr = csv::Reader::from_reader(File::open(&truth_p).map_err(|e| Error::io(&truth_p, e))?);
    let mut planted = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |k: usize| rec.get(k).and_then(|s| s.parse::<f64>().ok());
        if let (Some(name), Some(lo), Some(hi)) = (rec.get(0), num(1), num(2)) {
            planted.push((name.to_string(), lo, hi));
        }
    }
    let selected = if cfg.out(SHAP_IMPORTANCE).exists() {
        read_selected_features(&cfg.out(SHAP_IMPORTANCE))?
    } else {
        Vec::new()
    };
    let ranges = if cfg.out(RANGES).exists() {
        load_ranges(cfg)?
    } else {
        Vec::new()
    };
    let mut header = vec!["Planted feature".to_string(), "Interval".into(), "Selected".into()];
    header.extend(cfg.ice.alphas.iter().map(|a| format!("Jaccard alpha = {a}")));
    let mut rows = vec![header];
    for (name, lo, hi) in &planted {
        let mut row = vec![
            name.clone(),
            format!("{lo} ~ {hi}"),
            if selected.contains(name) { "yes" } else { "no" }.into(),
        ];
        for &a in &cfg.ice.alphas {
            row.push(
                ranges
                    .iter()
                    .find(|r| &r.name == name && r.alpha == a)
                    .map_or("-".into(), |r| format!("{:.3}", synth::jaccard((*lo, *hi), (r.lower, r.upper)))),
            );
        }
        rows.push(row);
    }
    Ok(Some(ice::render_table(&rows)))
}

/// Re-renders the tables of every artifact present into `summary.txt`.
pub fn report_stage(cfg: &PipelineConfig) -> StageResult<()> {
    in_stage(Stage::Report, || {
        let validation_p = cfg.out(VALIDATION);
        open_artifact(&validation_p, "validation results", "validate")?;
        let validation = ValidationReport::read_csv(File::open(&validation_p).map_err(|e| Error::io(&validation_p, e))?)?;
        let ranges = if cfg.out(RANGES).exists() {
            Some(ice::ranges_text_table(&load_ranges(cfg)?))
        } else {
            None
        };
        let sections: Vec<(&str, Option<String>)> = vec![
            ("Data split", split_counts(cfg)?),
            ("Class balance before and after oversampling", csv_as_table(&cfg.out(CLASS_BALANCE))?),
            ("Test-set evaluation", csv_as_table(&cfg.out(EVALUATION))?),
            ("Cross-validation", csv_as_table(&cfg.out(CV))?),
            ("Feature importance (mean |SHAP|)", csv_as_table(&cfg.out(SHAP_IMPORTANCE))?),
            ("Control ranges", ranges),
            ("Validation", Some(validation.text_table())),
            ("Planted mechanism recovery", recovery_section(cfg)?),
        ];
        let mut s = String::from("procxai pipeline summary\n");
        for (title, body) in sections {
            if let Some(body) = body {
                s.push('\n');
                s.push_str(title);
                s.push('\n');
                s.push_str(&body);
            }
        }
        let improved: Vec<String> = validation
            .rows
            .iter()
            .filter(|r| r.improved)
            .filter_map(|r| r.alpha.map(|a| a.to_string()))
            .collect();
        s.push('\n');
        if improved.is_empty() {
            s.push_str("No alpha lowered the defect rate below the baseline.\n");
        } else {
            s.push_str(&format!(
                "Filtered defect rate below baseline {} for alpha in {{{}}}.\n",
                validation.baseline.rate,
                improved.join(", ")
            ));
        }
        fs::write(cfg.out(SUMMARY), s).map_err(|e| Error::io(cfg.out(SUMMARY), e))
    })
}

/// Main features, their ranges and the validation table of a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub main_features: Vec<String>,
    pub ranges: Vec<ControlRange>,
    pub validation: ValidationReport,
}

/// Reads the outcome of a completed run back from the output directory.
pub fn read_outcome(cfg: &PipelineConfig) -> Result<RunOutcome> {
    let validation_p = cfg.out(VALIDATION);
    let validation =
        ValidationReport::read_csv(open_artifact(&validation_p, "validation results", "validate")?)?;
    Ok(RunOutcome {
        main_features: read_selected_features(&cfg.out(SHAP_IMPORTANCE))?,
        ranges: load_ranges(cfg)?,
        validation,
    })
}

/// All stages in order; synth runs first when no input file is configured.
pub fn run(cfg: &PipelineConfig) -> StageResult<RunOutcome> {
    in_stage(Stage::Config, || cfg.validate())?;
    if cfg.data.input.is_none() {
        synth_stage(cfg)?;
    }
    ingest_stage(cfg)?;
    oversample_stage(cfg)?;
    train_stage(cfg)?;
    explain_stage(cfg)?;
    ranges_stage(cfg)?;
    validate_stage(cfg)?;
    report_stage(cfg)?;
    in_stage(Stage::Report, || read_outcome(cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_settings() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.split.test_fraction, 0.5);
        assert_eq!(cfg.smote.k, 5);
        assert_eq!(cfg.model.cv_folds, 3);
        assert_eq!(cfg.shap.threshold, 0.7);
        assert_eq!(cfg.ice.alphas, vec![0.05, 0.1, 0.2]);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let cfg = PipelineConfig::from_toml(
            "seed = 7\n[model]\nvariant = \"goss-leafwise\"\n[ice]\nalphas = [0.1]\n[synth]\nn_rows = 100\n",
        )
        .unwrap();
        assert_eq!(cfg.model.variant, Variant::GossLeafwise);
        assert_eq!(cfg.synth.n_rows, 100);
        assert_eq!(cfg.synth.n_features, 10);
        let back = PipelineConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        let r = cfg.resolved();
        assert_eq!(r.split.seed, 7);
        assert_eq!(r.synth.seed, 13);
    }

    #[test]
    fn config_errors() {
        assert!(PipelineConfig::from_toml("[ice]\nalphas = []\n").is_err());
        assert!(PipelineConfig::from_toml("[shap]\nthreshold = 0.0\n").is_err());
        assert!(PipelineConfig::from_toml("[split]\ntest_fraction = 1.0\n").is_err());
        assert!(PipelineConfig::from_toml("[nonsense]\nx = 1\n").is_err());
        assert!(PipelineConfig::from_toml("[model]\nvariant = \"forest\"\n").is_err());
    }

    #[test]
    fn missing_model_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = PipelineConfig::default();
        cfg.output.dir = dir.path().to_path_buf();
        let err = explain_stage(&cfg).unwrap_err();
        assert_eq!(err.stage, Stage::Explain);
        assert!(err.to_string().contains("missing model"), "{err}");
    }

    #[test]
    fn exit_codes_are_distinct() {
        let all = [
            Stage::Config,
            Stage::Synth,
            Stage::Ingest,
            Stage::Oversample,
            Stage::Train,
            Stage::Explain,
            Stage::Ranges,
            Stage::Validate,
            Stage::Report,
        ];
        let mut codes: Vec<u8> = all.iter().map(|s| s.exit_code()).collect();
        codes.sort_unstable();
        codes.dedup();
        assert_eq!(codes.len(), all.len());
        assert!(!codes.contains(&0));
    }
}
