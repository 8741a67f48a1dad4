//! The selection pipeline as resumable stages over an output directory.
//!
//! Each stage writes its outputs under stable names together with a JSON
//! artifact that records the config hash, the SHA-256 of every upstream file
//! it read and of every binary file it wrote. A stage is skipped when its
//! artifact matches the current config and upstream files; an artifact from
//! a different config is refused.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tayfcs_core::combiner::{materialize, CombinationMeta, NAME_SEPARATOR};
use tayfcs_core::data::{
    build_vocab_and_encode, generate_synthetic, split, split_indices, Dataset, SplitTag, Vocabulary,
};
use tayfcs_core::eval::{evaluate, MetricsReport};
use tayfcs_core::lre::{run_lre, FeatureWindow, SelectionArtifact, Sequential};
use tayfcs_core::models::DnnModel;
use tayfcs_core::nn::{train, TrainHistory};
use tayfcs_core::tayscorer::{score_model, ComboScore};

use crate::config::PipelineConfig;
use crate::csv_io::load_csv;
use crate::error::{Error, Result};
use crate::formats::{load_dataset, load_dnn, read_file, save_dataset, save_dnn, sha256_hex, write_file};
use crate::parallel::{score_model_parallel, thread_pool, PoolEvaluator};

pub const PREPARE: &str = "prepare.json";
pub const VOCAB: &str = "vocab.json";
pub const TRAIN_SPLIT: &str = "train.bin";
pub const VAL_SPLIT: &str = "val.bin";
pub const TEST_SPLIT: &str = "test.bin";
pub const BASE_CHECKPOINT: &str = "base.ckpt";
pub const BASE_REPORT: &str = "train_base.json";
pub const SCORES: &str = "scores.json";
pub const SELECTION: &str = "selection.json";
pub const AUGMENTED_CHECKPOINT: &str = "augmented.ckpt";
pub const METRICS: &str = "metrics.json";
pub const RESULTS_LEDGER: &str = "results.tsv";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    /// File name to SHA-256 of every input read.
    pub upstream: BTreeMap<String, String>,
    /// File name to SHA-256 of every binary output written.
    pub outputs: BTreeMap<String, String>,
}

pub trait Artifact: Serialize + DeserializeOwned {
    fn provenance(&self) -> &Provenance;
}

macro_rules! artifact {
    ($t:ty) => {
        impl Artifact for $t {
            fn provenance(&self) -> &Provenance {
                &self.provenance
            }
        }
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareManifest {
    pub provenance: Provenance,
    pub source: String,
    pub field_names: Vec<String>,
    pub cardinalities: Vec<u32>,
    /// Train, val, test.
    pub sizes: [usize; 3],
}
artifact!(PrepareManifest);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseReport {
    pub provenance: Provenance,
    pub history: TrainHistory,
    pub val: MetricsReport,
    pub test: MetricsReport,
}
artifact!(BaseReport);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub rank: usize,
    pub name: String,
    pub fields: Vec<usize>,
    pub field_names: Vec<String>,
    pub order: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub provenance: Provenance,
    pub seed: u64,
    pub scoring_records: usize,
    pub max_order: usize,
    pub backward_passes: usize,
    pub entries: Vec<ScoreEntry>,
}
artifact!(ScoreReport);

impl ScoreReport {
    pub fn ranked(&self) -> Vec<ComboScore> {
        self.entries
            .iter()
            .map(|e| ComboScore {
                fields: e.fields.clone(),
                score: e.score,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionFile {
    pub provenance: Provenance,
    pub selection: SelectionArtifact,
}
artifact!(SelectionFile);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub provenance: Provenance,
    pub combinations: Vec<CombinationMeta>,
    pub base: MetricsReport,
    pub augmented: MetricsReport,
    pub augmented_history: TrainHistory,
}
artifact!(FinalMetrics);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageStatus {
    Ran,
    Reused,
}

/// Output directory bound to a validated config.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub out: PathBuf,
    pub config: PipelineConfig,
    pub config_hash: String,
    pub threads: usize,
}

impl Workspace {
    pub fn new(out: impl Into<PathBuf>, config: PipelineConfig, threads: usize) -> Result<Self> {
        config.validate()?;
        let out = out.into();
        std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        Ok(Self {
            config_hash: config.hash(),
            out,
            config,
            threads: threads.max(1),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn file_hash(&self, name: &str) -> Result<String> {
        Ok(sha256_hex(&read_file(&self.path(name))?))
    }

    fn hashes(&self, names: &[&str]) -> Result<BTreeMap<String, String>> {
        names.iter().map(|n| Ok((n.to_string(), self.file_hash(n)?))).collect()
    }

    fn provenance(&self, upstream: &[&str], outputs: BTreeMap<String, String>) -> Result<Provenance> {
        Ok(Provenance {
            config_hash: self.config_hash.clone(),
            upstream: self.hashes(upstream)?,
            outputs,
        })
    }

    /// Read an upstream artifact, refusing one written under another config.
    pub fn load_upstream<T: Artifact>(&self, name: &str) -> Result<T> {
        let path = self.path(name);
        if !path.exists() {
            return Err(Error::format(&path, "missing; run the earlier stage first"));
        }
        let art: T = read_json(&path)?;
        if art.provenance().config_hash != self.config_hash {
            return Err(Error::Provenance(format!(
                "{} was produced by config {}, current config is {}",
                path.display(),
                art.provenance().config_hash,
                self.config_hash
            )));
        }
        for (file, hash) in &art.provenance().outputs {
            if &self.file_hash(file)? != hash {
                return Err(Error::Provenance(format!("{file} does not match the hash recorded in {name}")));
            }
        }
        Ok(art)
    }

    /// An existing artifact that can be reused as is.
    fn reusable<T: Artifact>(&self, name: &str, upstream: &[&str]) -> Result<Option<T>> {
        let path = self.path(name);
        if !path.exists() {
            return Ok(None);
        }
        let Ok(art) = read_json::<T>(&path) else {
            return Ok(None);
        };
        let p = art.provenance();
        if p.config_hash != self.config_hash {
            return Err(Error::Provenance(format!(
                "{} belongs to config {}; use a fresh output directory",
                path.display(),
                p.config_hash
            )));
        }
        let upstream_ok = self.hashes(upstream).map(|h| h == p.upstream).unwrap_or(false);
        let outputs_ok = p
            .outputs
            .iter()
            .all(|(f, h)| self.file_hash(f).map(|x| &x == h).unwrap_or(false));
        Ok((upstream_ok && outputs_ok).then_some(art))
    }

    fn splits(&self) -> Result<(Dataset, Dataset, Dataset)> {
        Ok((
            load_dataset(&self.path(TRAIN_SPLIT))?,
            load_dataset(&self.path(VAL_SPLIT))?,
            load_dataset(&self.path(TEST_SPLIT))?,
        ))
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))
}

/// Pretty JSON with a trailing newline; returns its SHA-256.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<String> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    bytes.push(b'\n');
    write_file(path, &bytes)?;
    Ok(sha256_hex(&bytes))
}

pub fn run_prepare(ws: &Workspace) -> Result<StageStatus> {
    if ws.reusable::<PrepareManifest>(PREPARE, &[])?.is_some() {
        return Ok(StageStatus::Reused);
    }
    let cfg = &ws.config;
    let (source, field_names, sets, vocab): (String, Vec<String>, [Dataset; 3], Option<Vocabulary>) =
        if let Some(spec) = cfg.synthetic_spec() {
            let full = generate_synthetic(&spec)?;
            let [a, b, c] = split_indices(full.len(), cfg.data.ratios, cfg.seed)?;
            let names = full.fields().iter().map(|f| f.name.clone()).collect();
            let sets = [
                full.select(&a).with_split(SplitTag::Train),
                full.select(&b).with_split(SplitTag::Val),
                full.select(&c).with_split(SplitTag::Test),
            ];
            ("synthetic".into(), names, sets, None)
        } else {
            let path = cfg.data.csv.as_ref().expect("validated data source");
            let table = load_csv(path, &cfg.data.label, cfg.delimiter())?;
            let (tr, va, te) = split(&table.rows, cfg.data.ratios, cfg.seed)?;
            let (vocab, sets) = build_vocab_and_encode(&table.field_names, &tr, &va, &te)?;
            let name = path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
            (format!("csv:{name}"), table.field_names, sets, Some(vocab))
        };
    let mut outputs = BTreeMap::new();
    for (name, ds) in [TRAIN_SPLIT, VAL_SPLIT, TEST_SPLIT].into_iter().zip(&sets) {
        outputs.insert(name.to_string(), save_dataset(&ws.path(name), ds)?);
    }
    if let Some(v) = &vocab {
        outputs.insert(VOCAB.to_string(), write_json(&ws.path(VOCAB), v)?);
    }
    let manifest = PrepareManifest {
        provenance: ws.provenance(&[], outputs)?,
        source,
        field_names,
        cardinalities: sets[0].fields().iter().map(|f| f.cardinality).collect(),
        sizes: [sets[0].len(), sets[1].len(), sets[2].len()],
    };
    write_json(&ws.path(PREPARE), &manifest)?;
    Ok(StageStatus::Ran)
}

pub fn run_train_base(ws: &Workspace) -> Result<StageStatus> {
    let upstream = [PREPARE, TRAIN_SPLIT, VAL_SPLIT, TEST_SPLIT];
    ws.load_upstream::<PrepareManifest>(PREPARE)?;
    if ws.reusable::<BaseReport>(BASE_REPORT, &upstream)?.is_some() {
        return Ok(StageStatus::Reused);
    }
    let (tr, va, te) = ws.splits()?;
    let active: Vec<usize> = (0..tr.num_fields()).collect();
    let mut model = DnnModel::new(tr.fields(), &active, &ws.config.dnn_config())?;
    let history = train(&mut model, &tr, &va, &ws.config.train_config())?;
    let mut outputs = BTreeMap::new();
    outputs.insert(BASE_CHECKPOINT.to_string(), save_dnn(&ws.path(BASE_CHECKPOINT), &model)?);
    let report = BaseReport {
        provenance: ws.provenance(&upstream, outputs)?,
        history,
        val: evaluate(&model, "base", &va, None)?,
        test: evaluate(&model, "base", &te, None)?,
    };
    write_json(&ws.path(BASE_REPORT), &report)?;
    Ok(StageStatus::Ran)
}

pub fn run_score(ws: &Workspace) -> Result<StageStatus> {
    let upstream = [BASE_REPORT, BASE_CHECKPOINT, VAL_SPLIT];
    ws.load_upstream::<BaseReport>(BASE_REPORT)?;
    if ws.reusable::<ScoreReport>(SCORES, &upstream)?.is_some() {
        return Ok(StageStatus::Reused);
    }
    let model = load_dnn(&ws.path(BASE_CHECKPOINT))?;
    let val = load_dataset(&ws.path(VAL_SPLIT))?;
    let cfg = ws.config.scorer_config();
    let outcome = if ws.threads > 1 {
        score_model_parallel(&model, &val, &cfg, &thread_pool(ws.threads)?)?
    } else {
        score_model(&model, &val, &cfg)?
    };
    let names = val.fields();
    let entries = outcome
        .ranked
        .iter()
        .enumerate()
        .map(|(rank, c)| {
            let field_names: Vec<String> = c.fields.iter().map(|&f| names[f].name.clone()).collect();
            ScoreEntry {
                rank,
                name: field_names.join(NAME_SEPARATOR),
                fields: c.fields.clone(),
                field_names,
                order: c.order(),
                score: c.score,
            }
        })
        .collect();
    let report = ScoreReport {
        provenance: ws.provenance(&upstream, BTreeMap::new())?,
        seed: cfg.seed,
        scoring_records: outcome.records,
        max_order: cfg.max_order,
        backward_passes: outcome.backward_passes,
        entries,
    };
    write_json(&ws.path(SCORES), &report)?;
    Ok(StageStatus::Ran)
}

pub fn run_select(ws: &Workspace) -> Result<StageStatus> {
    let upstream = [SCORES, TRAIN_SPLIT, VAL_SPLIT];
    let scores = ws.load_upstream::<ScoreReport>(SCORES)?;
    if ws.reusable::<SelectionFile>(SELECTION, &upstream)?.is_some() {
        return Ok(StageStatus::Reused);
    }
    let cfg = ws.config.selection_config();
    let selection = if cfg.k == 0 {
        SelectionArtifact {
            config: cfg,
            selected: Vec::new(),
            final_window: FeatureWindow::initial(0, 0),
            iterations: Vec::new(),
            short: false,
        }
    } else {
        let tr = load_dataset(&ws.path(TRAIN_SPLIT))?;
        let va = load_dataset(&ws.path(VAL_SPLIT))?;
        let ranked = scores.ranked();
        if ws.threads > 1 {
            let pool = thread_pool(ws.threads)?;
            run_lre(&ranked, &tr, &va, &cfg, &PoolEvaluator(&pool))?
        } else {
            run_lre(&ranked, &tr, &va, &cfg, &Sequential)?
        }
    };
    let file = SelectionFile {
        provenance: ws.provenance(&upstream, BTreeMap::new())?,
        selection,
    };
    write_json(&ws.path(SELECTION), &file)?;
    Ok(StageStatus::Ran)
}

pub fn run_augment(ws: &Workspace) -> Result<StageStatus> {
    let upstream = [SELECTION, BASE_REPORT, TRAIN_SPLIT, VAL_SPLIT, TEST_SPLIT];
    let selection = ws.load_upstream::<SelectionFile>(SELECTION)?;
    let base = ws.load_upstream::<BaseReport>(BASE_REPORT)?;
    if ws.reusable::<FinalMetrics>(METRICS, &upstream)?.is_some() {
        return Ok(StageStatus::Reused);
    }
    let (tr, va, te) = ws.splits()?;
    let tau = ws.config.selection.tau;
    let combos: Vec<_> = selection
        .selection
        .selected
        .iter()
        .map(|s| tayfcs_core::combiner::CombinationSpec::new(s.meta.fields.clone(), tr.fields()))
        .collect::<tayfcs_core::Result<_>>()?;
    let (tr, metas) = materialize(&tr, &combos, tau)?;
    let (va, _) = materialize(&va, &combos, tau)?;
    let (te, _) = materialize(&te, &combos, tau)?;
    let active: Vec<usize> = (0..tr.num_fields()).collect();
    let mut model = DnnModel::new(tr.fields(), &active, &ws.config.dnn_config())?;
    let history = train(&mut model, &tr, &va, &ws.config.train_config())?;
    let mut outputs = BTreeMap::new();
    outputs.insert(
        AUGMENTED_CHECKPOINT.to_string(),
        save_dnn(&ws.path(AUGMENTED_CHECKPOINT), &model)?,
    );
    let augmented = evaluate(&model, "augmented", &te, Some(&base.test))?;
    let metrics = FinalMetrics {
        provenance: ws.provenance(&upstream, outputs)?,
        combinations: metas,
        base: base.test,
        augmented,
        augmented_history: history,
    };
    write_json(&ws.path(METRICS), &metrics)?;
    append_results(ws, &metrics)?;
    Ok(StageStatus::Ran)
}

/// One tab-separated row per evaluated model.
fn append_results(ws: &Workspace, m: &FinalMetrics) -> Result<()> {
    let path = ws.path(RESULTS_LEDGER);
    let fresh = !path.exists();
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| Error::io(&path, e))?;
    let mut text = String::new();
    if fresh {
        text.push_str("run_id\tconfig_hash\tmodel\tsplit\trecords\tauc\tlogloss\trel_imp_pct\n");
    }
    let run_id = &ws.config_hash[..12];
    for r in [&m.base, &m.augmented] {
        let rel = r.rel_imp.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        text.push_str(&format!(
            "{run_id}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{rel}\n",
            ws.config_hash,
            r.model_id,
            r.split.as_str(),
            r.records,
            r.auc,
            r.logloss
        ));
    }
    f.write_all(text.as_bytes()).map_err(|e| Error::io(&path, e))
}

pub type StageFn = fn(&Workspace) -> Result<StageStatus>;

pub const STAGES: [(&str, StageFn); 5] = [
    ("prepare", run_prepare),
    ("train-base", run_train_base),
    ("score", run_score),
    ("select", run_select),
    ("augment", run_augment),
];

/// Every stage in order; returns each stage's status.
pub fn run_pipeline(ws: &Workspace) -> Result<Vec<(&'static str, StageStatus)>> {
    STAGES.iter().map(|(name, f)| Ok((*name, f(ws)?))).collect()
}
