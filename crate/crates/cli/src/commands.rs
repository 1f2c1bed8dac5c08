//! One function per subcommand. Each reads its inputs from the config and
//! earlier stages' outputs, and returns the files it wrote.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use moralvis::analysis::{
    self, bootstrap_top_group, by_category, by_category_year, collect_groups, foundation_profile,
    group_stats, read_predictions, score_corpus, write_bootstrap_json, write_cell_table_json,
    write_group_stats_csv, write_predictions, GroupStats, PredictionTable,
};
use moralvis::datamodel::{
    assign_split, join_dataset, join_inputs, load_captions, load_corpus, load_ratings, read_embeddings,
    read_split, write_embeddings, write_split, CaptionTable, Dataset, EmbeddingTable, FeatureKind,
    FeatureSpaceId, RatingsTable, SplitAssignment,
};
use moralvis::features::{assemble_matrix, build_vocabulary, tokenize, write_vocabulary};
use moralvis::regression::{
    evaluate_spaces, fit_ridge, grid_search_cv_multi, load_model, save_model, write_cv_report,
    write_evaluation_csv,
};
use moralvis::{FeatureMatrix, Vocabulary};

use crate::config::RunConfig;

pub const SPLIT_FILE: &str = "split.csv";
pub const VOCAB_FILE: &str = "vocabulary.txt";
pub const EVALUATION_FILE: &str = "evaluation.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";

pub fn feature_path(out: &Path, space: &FeatureSpaceId) -> PathBuf {
    out.join("features").join(format!("{}.memb", space.slug()))
}

pub fn corpus_feature_path(out: &Path, space: &FeatureSpaceId) -> PathBuf {
    out.join("corpus_features").join(format!("{}.memb", space.slug()))
}

pub fn model_path(out: &Path, space: &FeatureSpaceId, target: &str) -> PathBuf {
    out.join("models")
        .join(space.slug())
        .join(format!("{target}.json"))
}

/// `(fold detail, summary)` CvReport files.
pub fn cv_paths(out: &Path, space: &FeatureSpaceId, target: &str) -> (PathBuf, PathBuf) {
    let dir = out.join("cv").join(space.slug());
    (
        dir.join(format!("{target}.folds.csv")),
        dir.join(format!("{target}.summary.csv")),
    )
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

/// Logs one line per finished stage with its timing and output digests.
struct Stage {
    name: String,
    start: Instant,
}

impl Stage {
    fn begin(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            start: Instant::now(),
        }
    }

    fn end(self, outputs: &[PathBuf]) {
        let digests: Vec<String> = outputs
            .iter()
            .map(|p| {
                let d = crate::file_digest(p).unwrap_or_else(|_| "?".into());
                format!(
                    "{}={}",
                    p.file_name().unwrap_or_default().to_string_lossy(),
                    &d[..12.min(d.len())]
                )
            })
            .collect();
        log::info!(
            "stage={} elapsed_ms={} outputs=[{}]",
            self.name,
            self.start.elapsed().as_millis(),
            digests.join(" ")
        );
    }
}

/// Input embedding tables a space is computed from.
fn input_spaces(space: &FeatureSpaceId) -> Vec<FeatureSpaceId> {
    match space.kind {
        FeatureKind::Bow => vec![],
        FeatureKind::Joint => vec![
            FeatureSpaceId::new(FeatureKind::ImageEmbedding, &space.source_label),
            FeatureSpaceId::new(FeatureKind::TextEmbedding, &space.source_label),
        ],
        _ => vec![space.clone()],
    }
}

fn load_tables(
    spaces: &[FeatureSpaceId],
    files: &BTreeMap<String, PathBuf>,
    what: &str,
) -> Result<Vec<EmbeddingTable>> {
    let needed: BTreeSet<FeatureSpaceId> = spaces.iter().flat_map(input_spaces).collect();
    needed
        .into_iter()
        .map(|id| {
            let path = files
                .get(&id.to_string())
                .with_context(|| format!("no {what} embedding file configured for {id}"))?;
            read_embeddings(path, id.clone()).with_context(|| format!("loading {}", path.display()))
        })
        .collect()
}

fn labeled_dataset(cfg: &RunConfig) -> Result<(Dataset, RatingsTable)> {
    let spaces = cfg.feature_spaces()?;
    let ratings_path = cfg.paths.ratings.as_ref().context("paths.ratings is not set")?;
    let ratings =
        load_ratings(ratings_path).with_context(|| format!("loading {}", ratings_path.display()))?;
    let tables = load_tables(&spaces, &cfg.paths.embeddings, "labeled")?;
    // Without a caption file a bow space fails later with MissingInput.
    let captions = match &cfg.paths.captions {
        Some(path) if spaces.iter().any(|s| s.kind == FeatureKind::Bow) => {
            Some(load_captions(path).with_context(|| format!("loading {}", path.display()))?)
        }
        _ => None,
    };
    let refs: Vec<&EmbeddingTable> = tables.iter().collect();
    let (dataset, report) = join_dataset(&ratings, &refs, captions.as_ref())?;
    log::info!("join: kept={} dropped={:?}", report.kept, report.dropped);
    if dataset.is_empty() {
        bail!("no image id is present in every input");
    }
    Ok((dataset, ratings))
}

fn make_split(cfg: &RunConfig, dataset: &Dataset) -> Result<(SplitAssignment, PathBuf)> {
    let split = assign_split(dataset.ids(), cfg.split_fraction, cfg.seed)?;
    let path = cfg.out_dir.join(SPLIT_FILE);
    ensure_parent(&path)?;
    write_split(&split, &path)?;
    log::info!(
        "split: train={} test={}",
        split.train_ids.len(),
        split.test_ids.len()
    );
    Ok((split, path))
}

fn load_split(cfg: &RunConfig) -> Result<SplitAssignment> {
    let path = cfg.out_dir.join(SPLIT_FILE);
    let split = read_split(&path)
        .with_context(|| format!("loading {} (run `split` or `featurize` first)", path.display()))?;
    if split.seed != cfg.seed || split.fraction != cfg.split_fraction {
        bail!(
            "{} was made with seed={} fraction={}, config has seed={} fraction={}",
            path.display(),
            split.seed,
            split.fraction,
            cfg.seed,
            cfg.split_fraction
        );
    }
    Ok(split)
}

pub fn cmd_split(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let stage = Stage::begin("split");
    let (dataset, _) = labeled_dataset(cfg)?;
    let (_, path) = make_split(cfg, &dataset)?;
    stage.end(std::slice::from_ref(&path));
    Ok(vec![path])
}

fn training_vocabulary(cfg: &RunConfig, dataset: &Dataset, split: &SplitAssignment) -> Result<Vocabulary> {
    let captions = dataset.captions().context("captions missing from the dataset")?;
    let docs: Vec<Vec<String>> = dataset
        .ids()
        .iter()
        .zip(captions)
        .filter(|(id, _)| split.train_ids.contains(*id))
        .map(|(_, c)| tokenize(c))
        .collect();
    Ok(build_vocabulary(&docs, cfg.features.min_count)?.with_corpus_label("train"))
}

fn write_matrix(matrix: &FeatureMatrix, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    write_embeddings(&matrix.to_table(), path)?;
    log::info!(
        "featurize: {} rows={} dim={} degenerate_rows={}",
        matrix.space,
        matrix.n_rows(),
        matrix.dim(),
        matrix.degenerate_rows
    );
    Ok(())
}

/// Writes the split, the vocabulary (when a bow space is selected) and one
/// MEMB file per space, for the labeled set and, when configured, the corpus.
pub fn cmd_featurize(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let spaces = cfg.feature_spaces()?;
    let (dataset, _) = labeled_dataset(cfg)?;
    let (split, split_path) = make_split(cfg, &dataset)?;
    let mut written = vec![split_path];

    let vocab = if spaces.iter().any(|s| s.kind == FeatureKind::Bow) && dataset.captions().is_some() {
        let vocab = training_vocabulary(cfg, &dataset, &split)?;
        let path = cfg.out_dir.join(VOCAB_FILE);
        write_vocabulary(&vocab, &path)?;
        log::info!(
            "featurize: vocabulary size={} min_count={}",
            vocab.len(),
            vocab.min_count()
        );
        written.push(path);
        Some(vocab)
    } else {
        None
    };

    for space in &spaces {
        let stage = Stage::begin(format!("featurize:{space}"));
        let matrix = assemble_matrix(&dataset, space, vocab.as_ref())
            .with_context(|| format!("featurizing {space}"))?;
        let path = feature_path(&cfg.out_dir, space);
        write_matrix(&matrix, &path)?;
        stage.end(std::slice::from_ref(&path));
        written.push(path);
    }

    if let Some(corpus_path) = &cfg.paths.corpus {
        let corpus =
            load_corpus(corpus_path).with_context(|| format!("loading {}", corpus_path.display()))?;
        let captions: CaptionTable = corpus.captions();
        for space in &spaces {
            let inputs = input_spaces(space);
            if inputs
                .iter()
                .any(|i| !cfg.paths.corpus_embeddings.contains_key(&i.to_string()))
            {
                log::warn!("featurize: no corpus embeddings for {space}, skipping its corpus features");
                continue;
            }
            let stage = Stage::begin(format!("featurize-corpus:{space}"));
            let tables = load_tables(
                std::slice::from_ref(space),
                &cfg.paths.corpus_embeddings,
                "corpus",
            )?;
            let refs: Vec<&EmbeddingTable> = tables.iter().collect();
            let with_captions = (space.kind == FeatureKind::Bow).then_some(&captions);
            let (data, report) = join_inputs(None, &refs, with_captions)?;
            log::info!(
                "join corpus {space}: kept={} dropped={:?}",
                report.kept,
                report.dropped
            );
            let matrix = assemble_matrix(&data, space, vocab.as_ref())
                .with_context(|| format!("featurizing corpus {space}"))?;
            let path = corpus_feature_path(&cfg.out_dir, space);
            write_matrix(&matrix, &path)?;
            stage.end(std::slice::from_ref(&path));
            written.push(path);
        }
    }
    Ok(written)
}

fn load_matrix(path: &Path, space: &FeatureSpaceId) -> Result<FeatureMatrix> {
    let table = read_embeddings(path, space.clone())
        .with_context(|| format!("loading {} (run `featurize` first)", path.display()))?;
    Ok(FeatureMatrix::from_table(&table)?)
}

/// Target columns for the matrix rows, in row order.
fn target_columns(
    matrix: &FeatureMatrix,
    ratings: &RatingsTable,
    targets: &[String],
) -> Result<Vec<Vec<f64>>> {
    let cols: Vec<usize> = targets
        .iter()
        .map(|t| {
            ratings
                .target_index(t)
                .with_context(|| format!("ratings have no `{t}` column"))
        })
        .collect::<Result<_>>()?;
    let mut out = vec![Vec::with_capacity(matrix.n_rows()); cols.len()];
    for id in &matrix.ids {
        let row = ratings
            .get(id)
            .with_context(|| format!("no ratings for feature row `{id}`"))?;
        for (column, &c) in out.iter_mut().zip(&cols) {
            column.push(row.0[c]);
        }
    }
    Ok(out)
}

fn load_ratings_cfg(cfg: &RunConfig) -> Result<RatingsTable> {
    let path = cfg.paths.ratings.as_ref().context("paths.ratings is not set")?;
    load_ratings(path).with_context(|| format!("loading {}", path.display()))
}

/// Grid search on the training split, then the final model per target fitted
/// on every labeled row at the selected α.
pub fn cmd_train(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let ratings = load_ratings_cfg(cfg)?;
    let split = load_split(cfg)?;
    let cv = cfg.cv_config();
    let mut written = Vec::new();
    for space in cfg.feature_spaces()? {
        let stage = Stage::begin(format!("train:{space}"));
        let full = load_matrix(&feature_path(&cfg.out_dir, &space), &space)?;
        let train = full.select(&split.train_ids);
        let y_full = target_columns(&full, &ratings, &cfg.targets)?;
        let y_train = target_columns(&train, &ratings, &cfg.targets)?;
        let refs: Vec<&[f64]> = y_train.iter().map(Vec::as_slice).collect();
        let reports = grid_search_cv_multi(&train.x, &refs, &cv)
            .with_context(|| format!("cross-validating {space}"))?;
        let mut outputs = Vec::new();
        for ((target, report), y) in cfg.targets.iter().zip(&reports).zip(&y_full) {
            let (detail, summary) = cv_paths(&cfg.out_dir, &space, target);
            ensure_parent(&detail)?;
            write_cv_report(report, &detail, &summary)?;
            let model = fit_ridge(&full.x, y, report.best_alpha, cv.fit_intercept)
                .with_context(|| format!("fitting {space} / {target}"))?
                .with_identity(space.clone(), target.as_str())
                .with_seed(cfg.seed);
            let path = model_path(&cfg.out_dir, &space, target);
            ensure_parent(&path)?;
            save_model(&model, &path)?;
            log::info!(
                "train: {space} {target} best_alpha={} cv_r2={:.4}",
                report.best_alpha,
                report.best_mean_score()
            );
            outputs.extend([detail, summary, path]);
        }
        stage.end(&outputs);
        written.extend(outputs);
    }
    Ok(written)
}

/// Test-set R² per space and target, written as one CSV row per space.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let stage = Stage::begin("evaluate");
    let ratings = load_ratings_cfg(cfg)?;
    let split = load_split(cfg)?;
    let matrices = cfg
        .feature_spaces()?
        .iter()
        .map(|s| load_matrix(&feature_path(&cfg.out_dir, s), s))
        .collect::<Result<Vec<_>>>()?;
    let table = evaluate_spaces(&matrices, &ratings, &cfg.targets, &split, &cfg.cv_config())?;
    let path = cfg.out_dir.join(EVALUATION_FILE);
    write_evaluation_csv(&table, &path)?;
    stage.end(std::slice::from_ref(&path));
    Ok(vec![path])
}

pub fn cmd_predict(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let stage = Stage::begin("predict");
    let space = cfg.analysis_space()?;
    let corpus_path = cfg.paths.corpus.as_ref().context("paths.corpus is not set")?;
    let corpus = load_corpus(corpus_path).with_context(|| format!("loading {}", corpus_path.display()))?;
    let features = load_matrix(&corpus_feature_path(&cfg.out_dir, &space), &space)?;
    let models = cfg
        .targets
        .iter()
        .map(|t| {
            let path = model_path(&cfg.out_dir, &space, t);
            load_model(&path).with_context(|| format!("loading {} (run `train` first)", path.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let table = score_corpus(&models, &features, &corpus)?;
    let path = cfg.out_dir.join(PREDICTIONS_FILE);
    write_predictions(&table, &path)?;
    stage.end(std::slice::from_ref(&path));
    Ok(vec![path])
}

fn load_predictions(cfg: &RunConfig) -> Result<PredictionTable> {
    let path = cfg.out_dir.join(PREDICTIONS_FILE);
    read_predictions(&path).with_context(|| format!("loading {} (run `predict` first)", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Grouping {
    Category,
    CategoryYear,
}

#[derive(Debug, Clone, Default)]
pub struct AnalyzeOptions {
    pub group: Option<Grouping>,
    pub target: Option<String>,
}

/// Sorted by target (config order), then descending mean, then group name.
fn ranked(mut stats: Vec<GroupStats>) -> Vec<GroupStats> {
    stats.sort_by(|a, b| b.mean.total_cmp(&a.mean).then_with(|| a.group.cmp(&b.group)));
    stats
}

pub fn cmd_analyze(cfg: &RunConfig, opts: &AnalyzeOptions) -> Result<Vec<PathBuf>> {
    let stage = Stage::begin("analyze");
    let preds = load_predictions(cfg)?;
    let dir = cfg.out_dir.join("analysis");
    fs::create_dir_all(&dir)?;
    let targets = match &opts.target {
        Some(t) => vec![t.clone()],
        None => preds.target_names.clone(),
    };
    let allowed: BTreeSet<&String> = cfg.analysis.categories.iter().collect();
    let keep = |c: &String| allowed.is_empty() || allowed.contains(c);
    let grouping = opts.group.unwrap_or(Grouping::Category);
    let mut stats = Vec::new();
    for t in &targets {
        let s = match grouping {
            Grouping::Category => group_stats(&preds, |r| by_category(r).filter(keep), t)?,
            Grouping::CategoryYear => group_stats(
                &preds,
                |r| keep(&r.category).then(|| by_category_year(r)).flatten(),
                t,
            )?,
        };
        stats.extend(ranked(s));
    }
    let mut written = Vec::new();
    let path = dir.join("group_stats.csv");
    write_group_stats_csv(&stats, &path)?;
    written.push(path);

    let categories: Vec<String> = if cfg.analysis.categories.is_empty() {
        preds
            .rows
            .iter()
            .map(|r| r.category.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    } else {
        cfg.analysis.categories.clone()
    };
    if moralvis::CANONICAL_TARGETS
        .iter()
        .all(|t| preds.target_index(t).is_ok())
    {
        let path = dir.join("foundation_profile.csv");
        write_group_stats_csv(&foundation_profile(&preds, &categories)?, &path)?;
        written.push(path);
    }

    let a = &cfg.analysis;
    for t in &targets {
        let cells = analysis::year_group_table(
            &preds,
            &a.year_groups,
            a.first_year..=a.last_year,
            t,
            &a.partial_years,
        )?;
        let path = dir.join(format!("cells_{t}.json"));
        write_cell_table_json(&cells, &path)?;
        written.push(path);
    }
    stage.end(&written);
    Ok(written)
}

#[derive(Debug, Clone, Default)]
pub struct BootstrapOptions {
    pub candidate: Option<String>,
    pub target: Option<String>,
    pub resamples: Option<usize>,
}

/// Tests whether the candidate category (default: the one with the highest
/// observed mean) has the strictly highest mean among the configured
/// categories.
pub fn cmd_bootstrap(cfg: &RunConfig, opts: &BootstrapOptions) -> Result<Vec<PathBuf>> {
    let stage = Stage::begin("bootstrap");
    let preds = load_predictions(cfg)?;
    let target = opts
        .target
        .clone()
        .unwrap_or_else(|| cfg.analysis.bootstrap_target.clone());
    let b = opts.resamples.unwrap_or(cfg.analysis.bootstrap_resamples);
    let allowed = (!cfg.analysis.categories.is_empty()).then_some(cfg.analysis.categories.as_slice());
    let groups = collect_groups(&preds, by_category, &target, allowed)?;
    let candidate = match opts
        .candidate
        .clone()
        .or_else(|| cfg.analysis.bootstrap_candidate.clone())
    {
        Some(c) => c,
        None => groups
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(g, v)| (g, moralvis::numeric::mean(v)))
            .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(g, _)| g.clone())
            .context("no category has predictions")?,
    };
    let result = bootstrap_top_group(&groups, &candidate, &target, b, cfg.seed)?;
    log::info!(
        "bootstrap: {candidate} highest {target}: failures={} p={}",
        result.failures,
        result.p_value
    );
    let path = cfg
        .out_dir
        .join("analysis")
        .join(format!("bootstrap_{target}.json"));
    ensure_parent(&path)?;
    write_bootstrap_json(&result, &path)?;
    stage.end(std::slice::from_ref(&path));
    Ok(vec![path])
}
