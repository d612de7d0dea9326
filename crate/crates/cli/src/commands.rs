use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use stancespan::corpus::{
    audit_conventions, collapse_labels, default_rules, export_jsonl, import_jsonl, import_tsv, make_folds, tag_stats,
    write_jsonl, AuditRule, ColumnMap, Corpus, FoldSet, FOLD_COUNT,
};
use stancespan::encoder::{load_external_vectors, ExternalVectors};
use stancespan::metrics::{agreement, align_corpora, render_report, score_report_with, EvalReport};
use stancespan::render::{render_highlights, RenderFormat};
use stancespan::spanmodel::{load_checkpoint, save_checkpoint, ModelConfig};
use stancespan::suggester::suggester_recall;
use stancespan::training::{
    cross_validate, random_search, render_summary, train, training_split, SearchSpace, TrainConfig,
};
use stancespan::Label;

use crate::{Cli, Command, UsageError};

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct RunConfig {
    model: ModelConfig,
    train: TrainConfig,
    search: SearchSpace,
    columns: ColumnMap,
}

struct Context_ {
    config: RunConfig,
    seed: Option<u64>,
    strict: bool,
}

impl Context_ {
    fn corpus(&self, path: &Path, collapse: bool) -> Result<Corpus> {
        let is_tsv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("tsv"));
        let corpus = if is_tsv {
            import_tsv(path, &self.config.columns, self.strict)
        } else {
            import_jsonl(path, self.strict)
        }
        .with_context(|| format!("reading {}", path.display()))?;
        Ok(if collapse { collapse_labels(corpus) } else { corpus })
    }

    fn fold_seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn train_config(&self) -> TrainConfig {
        let mut t = self.config.train.clone();
        if let Some(seed) = self.seed {
            t.seed = seed;
        }
        t
    }

    fn vectors(&self, path: Option<&PathBuf>, corpus: &Corpus, model: &ModelConfig) -> Result<Option<ExternalVectors>> {
        let needs = model.encoder.mode.uses_external();
        match (path, needs) {
            (Some(p), true) => {
                let dim = model.encoder.external_dim.ok_or_else(|| {
                    UsageError("the config sets an external encoder mode without external_dim".into())
                })?;
                Ok(Some(load_external_vectors(p, corpus, dim)?))
            }
            (None, true) => Err(UsageError(format!(
                "encoder mode {:?} needs --vectors",
                model.encoder.mode
            ))
            .into()),
            (_, false) => Ok(None),
        }
    }

    fn folds(&self, manifest: Option<&PathBuf>, corpus: &Corpus) -> Result<FoldSet> {
        match manifest {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                let folds: FoldSet = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
                for fold in &folds.folds {
                    for id in fold.train.iter().chain(&fold.dev).chain(&fold.test) {
                        if corpus.get(id).is_none() {
                            anyhow::bail!("fold manifest names excerpt {id}, which the corpus lacks");
                        }
                    }
                }
                Ok(folds)
            }
            None => Ok(make_folds(corpus, self.fold_seed())?),
        }
    }
}

fn write_or_print(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn report_text(report: &Option<EvalReport>, json: bool) -> Result<String> {
    Ok(match (report, json) {
        (Some(r), true) => serde_json::to_string_pretty(r)? + "\n",
        (Some(r), false) => render_report(r),
        (None, true) => "null\n".into(),
        (None, false) => "no spans on either side; nothing to score\n".into(),
    })
}

pub fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text)
                .map_err(|e| UsageError(format!("config {}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    let cx = Context_ {
        config,
        seed: cli.seed,
        strict: cli.strict_labels,
    };

    match cli.command {
        Command::Import { input, out, collapse } => {
            let corpus = cx.corpus(&input, collapse)?;
            write_jsonl(&corpus, &out)?;
            let unknown: usize = corpus.excerpts.iter().map(|e| e.unknown_spans.len()).sum();
            println!(
                "{} excerpts, {} spans, {unknown} spans with unknown labels -> {}",
                corpus.len(),
                tag_stats(&corpus.excerpts).total_spans,
                out.display()
            );
        }
        Command::Stats { corpus, collapse, json } => {
            let corpus = cx.corpus(&corpus.corpus, collapse)?;
            let stats = tag_stats(&corpus.excerpts);
            if json {
                println!("{}", serde_json::to_string_pretty(&stats)?);
            } else {
                let mut shown: Vec<Label> = Label::EXPERIMENT.to_vec();
                shown.extend(Label::RAW.iter().filter(|l| stats.count(**l) > 0));
                for label in shown {
                    println!("{:<12} {:>7}", label.as_str(), stats.count(label));
                }
                println!("{:<12} {:>7}", "spans", stats.total_spans);
                println!("{:<12} {:>7}", "tokens", stats.total_tokens);
                println!("{:<12} {:>7}", "excerpts", stats.total_excerpts);
            }
        }
        Command::Audit { corpus, rules } => {
            let corpus = cx.corpus(&corpus.corpus, false)?;
            let rules: Vec<AuditRule> = match rules {
                Some(p) => serde_json::from_str(&fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?)
                    .map_err(|e| UsageError(format!("rules {}: {e}", p.display())))?,
                None => default_rules(),
            };
            for finding in audit_conventions(&corpus, &rules) {
                println!("{}", serde_json::to_string(&finding)?);
            }
        }
        Command::Folds { corpus, out } => {
            let corpus = cx.corpus(&corpus.corpus, false)?;
            let folds = make_folds(&corpus, cx.fold_seed())?;
            write_or_print(out.as_ref(), &(serde_json::to_string_pretty(&folds)? + "\n"))?;
        }
        Command::SuggestRecall {
            corpus,
            max_ngram,
            no_subtrees,
            cross_sentence,
        } => {
            let corpus = cx.corpus(&corpus.corpus, false)?;
            let mut suggester = cx.config.model.suggester.clone();
            if let Some(n) = max_ngram {
                suggester.max_ngram_len = n;
            }
            suggester.use_subtrees &= !no_subtrees;
            suggester.restrict_ngrams_to_sentence &= !cross_sentence;
            let report = suggester_recall(&corpus, &suggester)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Train {
            corpus,
            fold_manifest,
            fold,
            out,
            vectors,
        } => {
            let corpus = cx.corpus(&corpus.corpus, true)?;
            let folds = cx.folds(fold_manifest.as_ref(), &corpus)?;
            let split = folds
                .folds
                .get(fold)
                .ok_or_else(|| UsageError(format!("fold {fold} out of range 0..{}", folds.folds.len())))?;
            let model_config = &cx.config.model;
            let train_config = cx.train_config();
            let vectors = cx.vectors(vectors.as_ref(), &corpus, model_config)?;
            let train_split = training_split(&corpus.subset(split.train.iter()), &train_config)?;
            let dev = corpus.subset(split.dev.iter());
            let outcome = train(&train_split, &dev, model_config, &train_config, vectors.as_ref())?;

            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            save_checkpoint(&outcome.model, out.join("model.ckpt"))?;
            fs::write(out.join("train_log.jsonl"), outcome.log_jsonl())?;
            let summary = serde_json::json!({
                "fold": fold,
                "best_step": outcome.best_step,
                "steps_run": outcome.steps_run,
                "stopped_early": outcome.stopped_early,
                "dev": outcome.best_dev,
            });
            fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
            let dev_f1 = outcome.best_dev.as_ref().map(|r| r.macro_f1);
            println!(
                "trained {} steps; best step {} dev macro-F1 {}; wrote {}",
                outcome.steps_run,
                outcome.best_step,
                dev_f1.map_or("n/a".into(), |v| format!("{v:.4}")),
                out.display()
            );
        }
        Command::Cv {
            corpus,
            folds,
            out,
            vectors,
        } => {
            if folds != FOLD_COUNT {
                return Err(UsageError(format!("only {FOLD_COUNT}-fold cross-validation is supported")).into());
            }
            let corpus = cx.corpus(&corpus.corpus, true)?;
            let fold_set = make_folds(&corpus, cx.fold_seed())?;
            let vectors = cx.vectors(vectors.as_ref(), &corpus, &cx.config.model)?;
            let report = cross_validate(&corpus, &fold_set, &cx.config.model, &cx.train_config(), vectors.as_ref())?;
            print!("{}", render_summary(&report.summary));
            if let Some(p) = out {
                fs::write(&p, serde_json::to_string_pretty(&report)? + "\n")
                    .with_context(|| format!("writing {}", p.display()))?;
            }
        }
        Command::Sweep {
            corpus,
            trials,
            fold_manifest,
            fold,
            out,
            vectors,
        } => {
            let corpus = cx.corpus(&corpus.corpus, true)?;
            let folds = cx.folds(fold_manifest.as_ref(), &corpus)?;
            let split = folds
                .folds
                .get(fold)
                .ok_or_else(|| UsageError(format!("fold {fold} out of range 0..{}", folds.folds.len())))?;
            let needs_vectors = cx.config.search.modes.iter().any(|m| m.uses_external());
            let vectors = match (needs_vectors, vectors.as_ref()) {
                (true, Some(p)) => {
                    let dim = cx.config.model.encoder.external_dim.ok_or_else(|| {
                        UsageError("searching external modes needs model.encoder.external_dim".into())
                    })?;
                    Some(load_external_vectors(p, &corpus, dim)?)
                }
                (true, None) => return Err(UsageError("the search space includes external modes; pass --vectors".into()).into()),
                (false, _) => None,
            };
            let table = random_search(
                &corpus.subset(split.train.iter()),
                &corpus.subset(split.dev.iter()),
                &cx.config.search,
                trials,
                cx.seed.unwrap_or(0),
                &cx.config.model,
                &cx.config.train,
                vectors.as_ref(),
            )?;
            println!("{:>5} {:>12} {:>9} {:>7} {:>8} {:>5} {:>10} {:>5}", "trial", "mode", "act", "hidden", "dropout", "depth", "lr", "dev");
            for t in &table {
                println!(
                    "{:>5} {:>12} {:>9} {:>7} {:>8} {:>5} {:>10.3e} {:>5.3}",
                    t.trial,
                    serde_json::to_value(t.model.encoder.mode)?.as_str().unwrap_or("?"),
                    serde_json::to_value(t.model.classifier.activation)?.as_str().unwrap_or("?"),
                    t.model.classifier.hidden,
                    t.model.classifier.dropout,
                    t.model.classifier.depth,
                    t.train.peak_lr,
                    t.dev_macro_f1
                );
            }
            if let Some(p) = out {
                fs::write(&p, serde_json::to_string_pretty(&table)? + "\n")
                    .with_context(|| format!("writing {}", p.display()))?;
            }
        }
        Command::Evaluate {
            gold,
            pred,
            gold_annotator,
            exclude_empty,
            json,
        } => {
            let gold = cx.corpus(&gold, true)?;
            let pred = cx.corpus(&pred, true)?;
            let pairs = align_corpora(&gold, &pred, gold_annotator.as_deref())?;
            let report = score_report_with(&pairs, !exclude_empty)?;
            print!("{}", report_text(&report, json)?);
        }
        Command::Agree { corpus, a, b, json } => {
            let corpus = cx.corpus(&corpus.corpus, true)?;
            let report = agreement(&corpus, &a, &b)?;
            print!("{}", report_text(&report, json)?);
        }
        Command::Predict {
            model,
            corpus,
            format,
            threshold,
            vectors,
            out,
        } => {
            if !(0.0..=1.0).contains(&threshold) {
                return Err(UsageError(format!("threshold {threshold} outside [0, 1]")).into());
            }
            let model = load_checkpoint(&model)?;
            let mut corpus = cx.corpus(&corpus.corpus, false)?;
            let vectors = cx.vectors(vectors.as_ref(), &corpus, &model.config)?;
            let mut text = String::new();
            let render = match format.as_str() {
                "jsonl" => None,
                other => Some(other.parse::<RenderFormat>().map_err(UsageError)?),
            };
            for ex in &mut corpus.excerpts {
                let frozen = vectors.as_ref().and_then(|v| v.get(&ex.id));
                let spans = model.predict(ex, frozen, threshold)?;
                match render {
                    Some(f) => {
                        text.push_str(&render_highlights(ex, &spans, f));
                        text.push('\n');
                    }
                    None => {
                        ex.spans = spans;
                        ex.unknown_spans.clear();
                    }
                }
            }
            if render.is_none() {
                text = export_jsonl(&corpus);
            }
            write_or_print(out.as_ref(), &text)?;
        }
    }
    Ok(())
}
