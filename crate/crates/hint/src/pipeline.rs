//! The commands behind the CLI, callable in-process.
//!
//! Output layout per command (inside `output_dir`):
//!
//! | command   | files |
//! |-----------|-------|
//! | synth-gen | `trials.jsonl`, `ontology.tsv`, `pk/<property>.tsv`, `risk.tsv` |
//! | ingest    | `trials.jsonl` (accepted), `rejected.tsv` |
//! | pretrain  | `admet_<property>.ckpt`, `risk.ckpt`, `vocab.tsv`, `pretrain_log.csv` |
//! | train     | `model.ckpt`, `manifest.txt`, `train_log.csv`, `{train,valid,test}.jsonl` |
//! | predict   | `scores.jsonl` |
//! | evaluate  | `metrics.json`, `metrics.txt` |
//!
//! Every command also writes the resolved `config.json`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hint_core::graph::{Hint, ADMET_PREFIX, DISEASE_PREFIX, MOLECULE_PREFIX, RISK_PREFIX};
use hint_core::metrics::ScoredSet;
use hint_core::ontology::Ontology;
use hint_core::pretrain::{pretrain_admet, pretrain_risk, AdmetProperty, PretrainReport};
use hint_core::protocol::{HashingEncoder, SentenceEncoder, SentenceEncoderSpec};
use hint_core::rng::Rng;
use hint_core::train::{predict_all, train, EpochLog, FitConfig, TrainConfig};
use hint_core::ParameterStore;
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::config::RunConfig;
use crate::data::{date_split, load_trials, load_trials_strict, to_input, to_labelled, write_trials, SplitSpec, TrialRecord};
use crate::error::{Error, Result};
use crate::formats::{
    format_parent_map, format_pk, format_risk, format_vocabulary, load_ontology, parse_pk, parse_risk, parse_vectors, parse_vocabulary,
    read_text, write_text,
};
use crate::manifest::{Manifest, CHECKPOINT_FILE, MANIFEST_FILE};
use crate::report::MetricsReport;
use crate::synth::{synth_generate, synth_ontology, synth_pk, synth_risk, SynthConfig};

pub const VOCAB_FILE: &str = "vocab.tsv";
pub const RISK_CHECKPOINT: &str = "risk.ckpt";
pub const TRAIN_LOG: &str = "train_log.csv";
pub const SCORES_FILE: &str = "scores.jsonl";

pub fn admet_checkpoint(property: AdmetProperty) -> String {
    format!("admet_{}.ckpt", property.name())
}

pub fn build_encoder(spec: &SentenceEncoderSpec) -> Result<Box<dyn SentenceEncoder>> {
    Ok(match spec {
        SentenceEncoderSpec::Hashing { seed } => Box::new(HashingEncoder::new(*seed)),
        SentenceEncoderSpec::Precomputed { path } => {
            let path = Path::new(path);
            Box::new(parse_vectors(path, &read_text(path)?)?)
        }
    })
}

fn filter_phase(cfg: &RunConfig, records: Vec<TrialRecord>) -> Vec<TrialRecord> {
    match cfg.phase {
        Some(p) => records.into_iter().filter(|r| r.phase == p).collect(),
        None => records,
    }
}

fn base_ontology(cfg: &RunConfig) -> Result<Ontology> {
    match &cfg.ontology {
        Some(_) => load_ontology(cfg.require(&cfg.ontology, "ontology")?),
        None => Ok(Ontology::new()),
    }
}

fn register_all<'a>(ontology: &mut Ontology, codes: impl IntoIterator<Item = &'a String>) -> Result<()> {
    for c in codes {
        ontology.register(c)?;
    }
    Ok(())
}

/// Writes a synthetic trial file plus matching ontology and auxiliary
/// pretraining datasets.
pub fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    let out = &cfg.output_dir;
    let synth = SynthConfig {
        noise: cfg.synth_noise,
        missing_fraction: cfg.synth_missing_fraction,
        phase: cfg.phase,
        ..SynthConfig::new(cfg.synth_n, cfg.seed)
    };
    write_trials(&out.join("trials.jsonl"), &synth_generate(&synth)?)?;
    write_text(&out.join("ontology.tsv"), &format_parent_map(&synth_ontology()))?;
    for p in AdmetProperty::ALL {
        write_text(&out.join("pk").join(format!("{}.tsv", p.name())), &format_pk(&synth_pk(p, cfg.synth_aux_n, cfg.seed)))?;
    }
    write_text(&out.join("risk.tsv"), &format_risk(&synth_risk(cfg.synth_aux_n, cfg.seed)))?;
    cfg.write_resolved(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct IngestSummary {
    pub lines: usize,
    pub accepted: usize,
    pub rejected: usize,
}

/// Validates a trial file: accepted records are rewritten canonically and
/// every rejected line is listed with its reason.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<IngestSummary> {
    let path = cfg.require(&cfg.trials, "trials")?;
    let report = load_trials(path)?;
    let records = filter_phase(cfg, report.records);
    let out = &cfg.output_dir;
    write_trials(&out.join("trials.jsonl"), &records)?;
    let mut rej = String::new();
    for r in &report.rejected {
        let _ = writeln!(rej, "{}\t{}", r.line, r.message.replace(['\t', '\n'], " "));
    }
    write_text(&out.join("rejected.tsv"), &rej)?;
    cfg.write_resolved(out)?;
    Ok(IngestSummary {
        lines: report.lines,
        accepted: report.lines - report.rejected.len(),
        rejected: report.rejected.len(),
    })
}

fn pretrain_vocabulary(cfg: &RunConfig, risk: &[(Vec<String>, f64)]) -> Result<Ontology> {
    let mut ontology = base_ontology(cfg)?;
    register_all(&mut ontology, risk.iter().flat_map(|(c, _)| c))?;
    if cfg.trials.is_some() {
        let records = load_trials_strict(cfg.require(&cfg.trials, "trials")?)?;
        register_all(&mut ontology, records.iter().flat_map(|r| &r.icd_codes))?;
    }
    Ok(ontology)
}

/// Pretrains the five ADMET heads with the molecule encoder and the risk
/// head with the disease encoder.
pub fn cmd_pretrain(cfg: &RunConfig) -> Result<Vec<PretrainReport>> {
    cfg.validate()?;
    let pk_dir = cfg.require(&cfg.pk_dir, "pk_dir")?;
    let risk_path = cfg.require(&cfg.risk, "risk")?;
    let mut pk = Vec::new();
    for p in AdmetProperty::ALL {
        let path = pk_dir.join(format!("{}.tsv", p.name()));
        if !path.exists() {
            return Err(Error::Input(format!("PK dataset path does not exist: {}", path.display())));
        }
        pk.push((p, parse_pk(&path, &read_text(&path)?)?));
    }
    let risk = parse_risk(risk_path, &read_text(risk_path)?)?;
    let ontology = pretrain_vocabulary(cfg, &risk)?;

    let mut store = ParameterStore::new(cfg.seed);
    let mut rng = Rng::seed(cfg.seed);
    let model = Hint::new(&mut store, cfg.model_config(), ontology.len(), &mut rng)?;
    let admet_cfg = FitConfig::new(cfg.pretrain_epochs, cfg.admet_lr, cfg.batch_size)?;
    let risk_cfg = FitConfig::new(cfg.pretrain_epochs, cfg.risk_lr, cfg.batch_size)?;
    let mut reports = pretrain_admet(&mut store, &model.mpnn, &model.admet, &pk, &admet_cfg, &mut rng)?;
    reports.push(pretrain_risk(&mut store, &model.gram, &model.risk, &ontology, &risk, &risk_cfg, &mut rng)?);

    let out = &cfg.output_dir;
    for p in AdmetProperty::ALL {
        let head = format!("{ADMET_PREFIX}{}/", p.name());
        checkpoint::save(&out.join(admet_checkpoint(p)), &store, &[MOLECULE_PREFIX, &head])?;
    }
    checkpoint::save(&out.join(RISK_CHECKPOINT), &store, &[DISEASE_PREFIX, RISK_PREFIX])?;
    write_text(&out.join(VOCAB_FILE), &format_vocabulary(&ontology))?;
    let mut log = String::from("task,epoch,loss,used,skipped\n");
    for r in &reports {
        for (e, loss) in r.epoch_losses.iter().enumerate() {
            let _ = writeln!(log, "{},{},{},{},{}", r.name, e + 1, loss, r.used, r.skipped);
        }
    }
    write_text(&out.join("pretrain_log.csv"), &log)?;
    cfg.write_resolved(out)?;
    Ok(reports)
}

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

fn format_train_log(log: &[EpochLog]) -> String {
    let mut s = String::from("epoch,train_loss,recovery_loss,valid_loss\n");
    for e in log {
        let _ = writeln!(s, "{},{},{},{}", e.epoch, e.train_loss, e.recovery_loss, e.valid_loss);
    }
    s
}

/// Trains on a date split of the trial file and keeps the parameters with
/// the lowest validation loss.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let records = filter_phase(cfg, load_trials_strict(cfg.require(&cfg.trials, "trials")?)?);
    let split = date_split(
        &records,
        &SplitSpec {
            split_date: cfg.split_date,
            validation_fraction: cfg.validation_fraction,
            seed: cfg.seed,
        },
    )?;
    if split.valid.is_empty() {
        return Err(Error::Input("validation partition is empty".into()));
    }
    let pretrain_dir = if cfg.no_pretrain {
        None
    } else {
        Some(cfg.require(&cfg.pretrain_dir, "pretrain_dir (or pass --no-pretrain)")?)
    };
    let ontology = match pretrain_dir {
        Some(dir) => {
            let path = dir.join(VOCAB_FILE);
            parse_vocabulary(&path, &read_text(&path)?)?
        }
        None => {
            let mut o = base_ontology(cfg)?;
            register_all(&mut o, split.train.iter().chain(&split.valid).flat_map(|r| &r.icd_codes))?;
            o
        }
    };
    let spec = cfg.encoder_spec()?;
    let encoder = build_encoder(&spec)?;
    let train_set = to_labelled(&split.train, &ontology, encoder.as_ref())?;
    let valid_set = to_labelled(&split.valid, &ontology, encoder.as_ref())?;

    let mut store = ParameterStore::new(cfg.seed);
    let mut rng = Rng::seed(cfg.seed);
    let model = Hint::new(&mut store, cfg.model_config(), ontology.len(), &mut rng)?;
    if let Some(dir) = pretrain_dir {
        for p in AdmetProperty::ALL {
            checkpoint::load_into(&dir.join(admet_checkpoint(p)), &mut store)?;
        }
        checkpoint::load_into(&dir.join(RISK_CHECKPOINT), &mut store)?;
    }
    let outcome = train(
        &model,
        &mut store,
        &ontology,
        &train_set,
        &valid_set,
        TrainConfig {
            epochs: cfg.epochs,
            lr: cfg.lr,
            batch_size: cfg.batch_size,
            seed: cfg.seed,
        },
    )?;

    let out = &cfg.output_dir;
    checkpoint::save(&out.join(CHECKPOINT_FILE), &outcome.best, &[])?;
    let manifest = Manifest {
        encoder: spec,
        pretrained: pretrain_dir.is_some(),
        model: model.config.clone(),
        vocabulary: ontology,
    };
    write_text(&out.join(MANIFEST_FILE), &manifest.render())?;
    write_text(&out.join(TRAIN_LOG), &format_train_log(&outcome.log))?;
    write_trials(&out.join("train.jsonl"), &split.train)?;
    write_trials(&out.join("valid.jsonl"), &split.valid)?;
    write_trials(&out.join("test.jsonl"), &split.test)?;
    cfg.write_resolved(out)?;
    Ok(TrainSummary {
        log: outcome.log,
        best_epoch: outcome.best_epoch,
        train: split.train.len(),
        valid: split.valid.len(),
        test: split.test.len(),
    })
}

/// A trained model loaded from a `train` output directory.
pub struct LoadedModel {
    pub manifest: Manifest,
    pub model: Hint,
    pub store: ParameterStore,
    pub encoder: Box<dyn SentenceEncoder>,
}

impl LoadedModel {
    pub fn load(dir: &Path, requested: Option<&SentenceEncoderSpec>) -> Result<Self> {
        let mpath = dir.join(MANIFEST_FILE);
        let manifest = Manifest::parse(&mpath, &read_text(&mpath)?)?;
        manifest.check_encoder(requested)?;
        let mut store = ParameterStore::new(0);
        let model = Hint::new(&mut store, manifest.model.clone(), manifest.vocabulary.len(), &mut Rng::seed(0))?;
        let cpath = dir.join(CHECKPOINT_FILE);
        let loaded = checkpoint::load_into(&cpath, &mut store)?;
        if loaded != store.len() {
            return Err(Error::Checkpoint {
                path: cpath,
                message: format!("holds {loaded} parameters, the manifest's model has {}", store.len()),
            });
        }
        let encoder = build_encoder(&manifest.encoder)?;
        Ok(LoadedModel {
            manifest,
            model,
            store,
            encoder,
        })
    }

    /// `ŷ` per record, in order. Records without molecules go through the
    /// imputer.
    pub fn predict(&self, records: &[TrialRecord]) -> Result<Vec<f64>> {
        let ontology = &self.manifest.vocabulary;
        let inputs = records
            .iter()
            .map(|r| to_input(r, ontology, self.encoder.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Ok(predict_all(&self.model, &self.store, ontology, &inputs)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreLine {
    pub nct_id: String,
    pub y_hat: f64,
}

pub fn format_scores(scores: &[ScoreLine]) -> String {
    let mut s = String::new();
    for l in scores {
        s.push_str(&serde_json::to_string(l).expect("scores serialize"));
        s.push('\n');
    }
    s
}

pub fn parse_scores(path: &Path, text: &str) -> Result<Vec<ScoreLine>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(path, i + 1, e.to_string())))
        .collect()
}

pub fn cmd_predict(cfg: &RunConfig) -> Result<Vec<ScoreLine>> {
    let dir = cfg.require(&cfg.model_dir, "model_dir")?;
    let requested = cfg.encoder.as_ref().map(|_| cfg.encoder_spec()).transpose()?;
    let loaded = LoadedModel::load(dir, requested.as_ref())?;
    let records = filter_phase(cfg, load_trials_strict(cfg.require(&cfg.trials, "trials")?)?);
    let y = loaded.predict(&records)?;
    let scores: Vec<ScoreLine> = records
        .iter()
        .zip(y)
        .map(|(r, y_hat)| ScoreLine {
            nct_id: r.nct_id.clone(),
            y_hat,
        })
        .collect();
    write_text(&cfg.output_dir.join(SCORES_FILE), &format_scores(&scores))?;
    cfg.write_resolved(&cfg.output_dir)?;
    Ok(scores)
}

/// Pairs each score with its label by `nct_id`; every score id must have a
/// label.
pub fn align(scores: &[ScoreLine], labels: &BTreeMap<String, u8>) -> Result<ScoredSet> {
    let mut s = Vec::with_capacity(scores.len());
    let mut y = Vec::with_capacity(scores.len());
    for l in scores {
        let label = labels
            .get(&l.nct_id)
            .ok_or_else(|| Error::Input(format!("no label for nct_id `{}`", l.nct_id)))?;
        s.push(l.y_hat);
        y.push(*label == 1);
    }
    Ok(ScoredSet::new(s, y)?)
}

fn load_scores(path: &Path) -> Result<Vec<ScoreLine>> {
    parse_scores(path, &read_text(path)?)
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<MetricsReport> {
    cfg.validate()?;
    let scores = load_scores(cfg.require(&cfg.scores, "scores")?)?;
    let labels: BTreeMap<String, u8> = load_trials_strict(cfg.require(&cfg.trials, "trials")?)?
        .into_iter()
        .map(|r| (r.nct_id, r.label))
        .collect();
    let main = align(&scores, &labels)?;
    let baseline = match &cfg.baseline_scores {
        Some(_) => {
            let base = load_scores(cfg.require(&cfg.baseline_scores, "baseline_scores")?)?;
            let by_id: BTreeMap<&str, f64> = base.iter().map(|l| (l.nct_id.as_str(), l.y_hat)).collect();
            let aligned = scores
                .iter()
                .map(|l| {
                    let y_hat = *by_id
                        .get(l.nct_id.as_str())
                        .ok_or_else(|| Error::Input(format!("baseline has no score for nct_id `{}`", l.nct_id)))?;
                    Ok(ScoreLine {
                        nct_id: l.nct_id.clone(),
                        y_hat,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Some(align(&aligned, &labels)?)
        }
        None => None,
    };
    let report = MetricsReport::compute(&main, baseline.as_ref(), cfg.bootstrap, cfg.seed)?;
    let out = &cfg.output_dir;
    write_text(&out.join("metrics.json"), &report.to_json())?;
    write_text(&out.join("metrics.txt"), &report.to_table())?;
    cfg.write_resolved(out)?;
    Ok(report)
}

/// Path of a file inside a command's output directory.
pub fn output_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}
