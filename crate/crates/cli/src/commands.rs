use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use sha2::{Digest, Sha256};

use spoofwatch::augment::apply_waveform_stage;
use spoofwatch::continual::{self, CycleMode, CycleReport, Pool};
use spoofwatch::corpus::{make_dataset, CorpusSpec, Split, MANIFEST_NAME};
use spoofwatch::frontend::{FrontendConfig, LogMelExtractor};
use spoofwatch::metrics::{self, Label};
use spoofwatch::model::train::{input_statistics, score_examples, EpochLog};
use spoofwatch::model::{
    embedding, load_checkpoint, load_checkpoint_for, save_checkpoint, ModelConfig, ModelParams,
    TrainLog, Trainer,
};
use spoofwatch::rng;

use crate::config::{check_split, usage, ExperimentConfig, Needs};
use crate::data::{ManifestSource, SplitData};

pub const CHECKPOINT: &str = "model.ckpt";
pub const TRAIN_LOG: &str = "train_log.jsonl";
pub const FRONTEND: &str = "frontend.json";
pub const RESOLVED_CONFIG: &str = "experiment.json";
pub const COMPARISON: &str = "comparison.txt";

fn create_dir(path: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(path).map_err(|source| spoofwatch::Error::Unwritable {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    fs::write(path, contents).map_err(|source| spoofwatch::Error::Unwritable {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

pub fn corpus(spec_path: &Path) -> anyhow::Result<()> {
    let text = fs::read_to_string(spec_path).map_err(|e| {
        usage(format!(
            "cannot read corpus spec {}: {e}",
            spec_path.display()
        ))
    })?;
    let mut spec: CorpusSpec = serde_json::from_str(&text)
        .map_err(|e| usage(format!("corpus spec {}: {e}", spec_path.display())))?;
    if spec.out_dir.is_relative() {
        spec.out_dir = spec_path
            .parent()
            .unwrap_or(Path::new(""))
            .join(&spec.out_dir);
    }
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let manifest = make_dataset(&spec)?;
    println!(
        "wrote {} clips and {}",
        manifest.entries.len(),
        spec.out_dir.join(MANIFEST_NAME).display()
    );
    Ok(())
}

fn read_train_log(path: &Path) -> anyhow::Result<Vec<EpochLog>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let reader = BufReader::new(fs::File::open(path)?);
    let mut epochs = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            epochs.push(
                serde_json::from_str(&line)
                    .with_context(|| format!("parsing {}", path.display()))?,
            );
        }
    }
    Ok(epochs)
}

/// Train from the config's train split, checkpointing after every epoch.
///
/// With `resume`, training continues from the saved checkpoint at the first
/// epoch missing from the log. Optimizer moments restart from zero.
pub fn train(config_path: &Path, resume: bool) -> anyhow::Result<()> {
    let cfg = ExperimentConfig::load(config_path, Needs::Train)?;
    let eff = cfg.effective();
    let out = &cfg.output_dir;
    let ckpt = out.join(CHECKPOINT);
    let log_path = out.join(TRAIN_LOG);
    let resumed = if resume {
        if !ckpt.exists() {
            return Err(usage(format!(
                "--resume: no checkpoint at {}",
                ckpt.display()
            )));
        }
        Some((
            load_checkpoint_for(&ckpt, &cfg.model)?,
            read_train_log(&log_path)?,
        ))
    } else {
        None
    };

    let train_data = SplitData::load(
        cfg.manifests.train.as_deref().expect("validated"),
        Split::Train,
    )?;
    let clips = apply_waveform_stage(&train_data.clips()?, &eff.augment)?;
    let examples = train_data.examples_from(&clips, &cfg.frontend)?;
    drop(clips);
    let heldout = match &cfg.manifests.eval {
        Some(p) => Some(SplitData::load(p, Split::Eval)?.examples(&cfg.frontend)?),
        None => None,
    };

    create_dir(out)?;
    write(
        &out.join(RESOLVED_CONFIG),
        serde_json::to_string_pretty(&cfg)?,
    )?;
    write(
        &out.join(FRONTEND),
        serde_json::to_string_pretty(&cfg.frontend)?,
    )?;

    let (params, mut log) = match resumed {
        Some((params, epochs)) => (params, TrainLog { epochs }),
        None => {
            let mut p = ModelParams::init(&cfg.model, &mut rng::stream(eff.train.seed, "init", 0));
            (p.input_mean, p.input_std) = input_statistics(&examples);
            (p, TrainLog::default())
        }
    };
    let mut trainer = Trainer::new(params, &cfg.model, &eff.train)?;
    if log.epochs.is_empty() || log.epochs.len() >= eff.train.epochs {
        save_checkpoint(&ckpt, &trainer.params, &cfg.model)?;
    }
    for epoch in log.epochs.len()..eff.train.epochs {
        let e = trainer.run_epoch(epoch, &examples, &eff.augment, heldout.as_deref())?;
        match (e.heldout_eer, e.heldout_auc) {
            (Some(eer), Some(auc)) => eprintln!(
                "epoch {epoch}: loss {:.4} acc {:.3} heldout EER {eer:.4} AUC {auc:.4}",
                e.mean_loss, e.train_accuracy
            ),
            _ => eprintln!(
                "epoch {epoch}: loss {:.4} acc {:.3}",
                e.mean_loss, e.train_accuracy
            ),
        }
        log.epochs.push(e);
        save_checkpoint(&ckpt, &trainer.params, &cfg.model)?;
        write(&log_path, log.to_jsonl())?;
    }
    println!(
        "checkpoint {} after {} epochs (final loss {})",
        ckpt.display(),
        log.epochs.len(),
        log.final_loss().map_or("n/a".into(), |l| format!("{l:.4}"))
    );
    Ok(())
}

/// Frontend settings saved by `train` next to the checkpoint, or defaults.
fn frontend_for(checkpoint: &Path, model: &ModelConfig) -> anyhow::Result<FrontendConfig> {
    let path = checkpoint.parent().unwrap_or(Path::new("")).join(FRONTEND);
    if path.exists() {
        Ok(serde_json::from_str(&fs::read_to_string(&path)?)
            .with_context(|| format!("parsing {}", path.display()))?)
    } else {
        Ok(FrontendConfig {
            n_mels: model.n_mels,
            ..FrontendConfig::default()
        })
    }
}

fn output_dir(out: Option<PathBuf>, checkpoint: &Path) -> PathBuf {
    out.unwrap_or_else(|| checkpoint.parent().unwrap_or(Path::new(".")).to_path_buf())
}

pub fn eval(
    checkpoint: &Path,
    manifest: &Path,
    split: Split,
    out: Option<PathBuf>,
    threshold: f64,
) -> anyhow::Result<()> {
    let (params, model) = load_checkpoint(checkpoint)?;
    let frontend = frontend_for(checkpoint, &model)?;
    check_split(manifest, split)?;
    let examples = SplitData::load(manifest, split)?.examples(&frontend)?;
    let scores = score_examples(&params, &model, &examples)?;
    let report = metrics::report(&scores, threshold)?;
    let out = output_dir(out, checkpoint);
    create_dir(&out)?;
    let csv_path = out.join(format!("scores_{split}.csv"));
    scores.write_csv(&csv_path)?;
    write(&out.join(format!("report_{split}.json")), report.to_json())?;
    print!("{}", report.to_text());
    println!("scores: {}", csv_path.display());
    Ok(())
}

/// Per-clip embeddings as CSV: `id,label,system,e0,...,e{d-1}`.
pub fn embed(checkpoint: &Path, manifest: &Path, split: Split, out: &Path) -> anyhow::Result<()> {
    let (params, model) = load_checkpoint(checkpoint)?;
    let frontend = frontend_for(checkpoint, &model)?;
    let data = SplitData::load(manifest, split)?;
    let examples = data.examples(&frontend)?;
    let rows = examples
        .iter()
        .map(|e| embedding(&e.spec, &params, &model))
        .collect::<spoofwatch::Result<Vec<_>>>()?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let file = fs::File::create(out).map_err(|source| spoofwatch::Error::Unwritable {
        path: out.to_path_buf(),
        source,
    })?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["id".to_string(), "label".into(), "system".into()];
    header.extend((0..model.embed_dim).map(|k| format!("e{k}")));
    w.write_record(&header)?;
    for (entry, row) in data.entries.iter().zip(&rows) {
        let mut record = vec![
            entry.path.clone(),
            entry.label.to_string(),
            entry.system.clone(),
        ];
        record.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    println!(
        "{} embeddings of width {} to {}",
        rows.len(),
        model.embed_dim,
        out.display()
    );
    Ok(())
}

fn mode_name(mode: CycleMode) -> &'static str {
    match mode {
        CycleMode::Ours => "ours",
        CycleMode::Supervised => "supervised",
    }
}

pub fn continual_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.join("continual")
}

pub fn continual(
    config_path: &Path,
    mode: CycleMode,
    checkpoint: Option<PathBuf>,
) -> anyhow::Result<()> {
    let cfg = ExperimentConfig::load(config_path, Needs::Continual)?;
    let eff = cfg.effective();
    let ckpt = checkpoint.unwrap_or_else(|| cfg.output_dir.join(CHECKPOINT));
    if !ckpt.exists() {
        return Err(usage(format!("checkpoint {} not found", ckpt.display())));
    }
    let params = load_checkpoint_for(&ckpt, &cfg.model)?;

    let pool_data = SplitData::load(
        cfg.manifests.pool.as_deref().expect("validated"),
        Split::Pool,
    )?;
    let eval = SplitData::load(
        cfg.manifests.eval.as_deref().expect("validated"),
        Split::Eval,
    )?
    .examples(&cfg.frontend)?;
    let labels: Vec<Label> = pool_data.entries.iter().map(|e| e.label).collect();
    let source = ManifestSource {
        data: pool_data,
        extractor: LogMelExtractor::new(&cfg.frontend, spoofwatch::audio::CANONICAL_RATE)?,
    };
    let pool = Pool::new(source, labels)?;
    let outcome = match mode {
        CycleMode::Ours => continual::run_cycle(&params, &cfg.model, &pool, &eval, &eff.continual)?,
        CycleMode::Supervised => {
            continual::baseline_finetune(&params, &cfg.model, &pool, &eval, &eff.continual)?
        }
    };

    let dir = continual_dir(&cfg).join(mode_name(mode));
    create_dir(&dir)?;
    let entries = &pool.source().data.entries;
    let mut seed_manifest = String::new();
    for &i in &outcome.seed.indices {
        seed_manifest.push_str(&serde_json::to_string(&entries[i])?);
        seed_manifest.push('\n');
    }
    let hash = hex::encode(Sha256::digest(seed_manifest.as_bytes()));
    write(&dir.join("seed_manifest.jsonl"), &seed_manifest)?;
    let mut report = outcome.report;
    report.seed_manifest_sha256 = Some(hash);
    write(
        &dir.join("report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    save_checkpoint(dir.join(CHECKPOINT), &outcome.params, &cfg.model)?;
    if let Some(plugin) = &outcome.plugin {
        plugin.save(dir.join("plugin.json"))?;
    }
    if mode == CycleMode::Ours {
        let lines: String = outcome
            .pseudo
            .items
            .iter()
            .map(|p| serde_json::to_string(p).map(|s| s + "\n"))
            .collect::<Result<_, _>>()?;
        write(&dir.join("pseudo_labels.jsonl"), lines)?;
    }
    println!(
        "{}: EER {:.4} -> {:.4}, AUC {:.4} -> {:.4} ({} fine-tuning examples)",
        mode_name(mode),
        report.before.eer,
        report.after.eer,
        report.before.auc,
        report.after.auc,
        report.finetune_examples
    );
    if let Some(p) = report.pseudo_label_precision {
        println!(
            "pseudo-labels: {} collected, precision {p:.3}",
            report.collected
        );
    }

    if let Some(table) = comparison(&continual_dir(&cfg))? {
        write(&continual_dir(&cfg).join(COMPARISON), &table)?;
        print!("{table}");
    }
    Ok(())
}

fn read_report(path: &Path) -> anyhow::Result<Option<CycleReport>> {
    if !path.exists() {
        return Ok(None);
    }
    Ok(Some(
        serde_json::from_str(&fs::read_to_string(path)?)
            .with_context(|| format!("parsing {}", path.display()))?,
    ))
}

/// Baseline / Supervised / Ours rows once both modes have reported.
pub fn comparison(dir: &Path) -> anyhow::Result<Option<String>> {
    let (Some(sup), Some(ours)) = (
        read_report(&dir.join("supervised").join("report.json"))?,
        read_report(&dir.join("ours").join("report.json"))?,
    ) else {
        return Ok(None);
    };
    let rows = [
        ("Baseline", sup.before),
        ("Supervised", sup.after),
        ("Ours", ours.after),
    ];
    let mut t = format!(
        "{:<12}{:>8}{:>8}{:>10}\n",
        "method", "EER", "AUC", "accuracy"
    );
    for (name, s) in rows {
        t += &format!(
            "{name:<12}{:>8.4}{:>8.4}{:>10.4}\n",
            s.eer, s.auc, s.accuracy
        );
    }
    let shared = sup.seed_manifest_sha256 == ours.seed_manifest_sha256;
    t += &format!(
        "seed set: {} clips, sha256 {} ({})\n",
        sup.seed_size,
        sup.seed_manifest_sha256.as_deref().unwrap_or("unknown"),
        if shared {
            "shared by both runs"
        } else {
            "DIFFERS between runs"
        }
    );
    if sup.before != ours.before {
        t += "note: the two runs started from different baselines; the Baseline row is the supervised run's\n";
    }
    if let Some(p) = ours.pseudo_label_precision {
        t += &format!(
            "pseudo-labels: {} of target {}, precision {p:.3}\n",
            ours.collected, ours.target
        );
    }
    Ok(Some(t))
}
