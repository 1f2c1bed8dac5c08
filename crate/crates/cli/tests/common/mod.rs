//! Synthetic inputs for end-to-end runs: a labeled set whose ratings are
//! linear in a latent vector shared by image and text embeddings, and a news
//! corpus in which `health` items lean towards the morality direction.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use moralvis::datamodel::{write_embeddings, EmbeddingTable, FeatureKind, FeatureSpaceId};
use moralvis::CANONICAL_TARGETS;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const WORDS: [&str; 12] = [
    "river", "market", "child", "soldier", "flower", "crowd", "doctor", "storm", "church", "field",
    "protest", "bridge",
];

pub const CORPUS_CATEGORIES: [&str; 11] = [
    "health",
    "sports",
    "business",
    "science",
    "technology",
    "nyregion",
    "us",
    "world/europe",
    "world/asia",
    "world/africa",
    "world/middleeast",
];

#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub n_labeled: usize,
    pub n_corpus: usize,
    pub dim: usize,
    pub seed: u64,
    pub spaces: Vec<&'static str>,
    pub k: usize,
    pub rounds: usize,
    pub extra_config: String,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            n_labeled: 120,
            n_corpus: 220,
            dim: 16,
            seed: 11,
            spaces: vec!["joint:clip", "image_embedding:clip", "bow:captions"],
            k: 5,
            rounds: 2,
            extra_config: String::new(),
        }
    }
}

fn space(kind: FeatureKind) -> FeatureSpaceId {
    FeatureSpaceId::new(kind, "clip")
}

fn latent(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    (0..dim).map(|_| normal.sample(rng)).collect()
}

fn write_pair(dir: &Path, prefix: &str, rows: &[(String, Vec<f64>)], rng: &mut ChaCha8Rng, dim: usize) {
    let noise = Normal::new(0.0, 0.3).unwrap();
    let image = rows
        .iter()
        .map(|(id, z)| (id.clone(), z.iter().map(|&v| v as f32).collect()));
    let text: Vec<(String, Vec<f32>)> = rows
        .iter()
        .map(|(id, z)| {
            (
                id.clone(),
                z.iter().map(|&v| (v + noise.sample(rng)) as f32).collect(),
            )
        })
        .collect();
    let image = EmbeddingTable::new(space(FeatureKind::ImageEmbedding), dim, image).unwrap();
    let text = EmbeddingTable::new(space(FeatureKind::TextEmbedding), dim, text).unwrap();
    write_embeddings(&image, dir.join(format!("{prefix}_image.memb"))).unwrap();
    write_embeddings(&text, dir.join(format!("{prefix}_text.memb"))).unwrap();
}

fn caption(rng: &mut ChaCha8Rng, moral: bool) -> String {
    let mut words: Vec<&str> = (0..4).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect();
    if moral {
        words.push("kindness");
    }
    format!("The {}, and {}.", words[..2].join(" "), words[2..].join(" "))
}

/// Writes every input file and `config.toml` into `dir`; returns the config path.
pub fn write_fixture(dir: &Path, spec: &FixtureSpec) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let directions: Vec<Vec<f64>> = (0..6)
        .map(|_| {
            let w = latent(&mut rng, spec.dim);
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            w.into_iter().map(|v| v / norm).collect()
        })
        .collect();
    let noise = Normal::new(0.0, 0.1).unwrap();

    let mut ratings = format!("id,{}\n", CANONICAL_TARGETS.join(","));
    let mut captions = String::from("id,caption\n");
    let mut labeled = Vec::new();
    for i in 0..spec.n_labeled {
        let id = format!("img{i:04}");
        let z = latent(&mut rng, spec.dim);
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scores: Vec<f64> = directions
            .iter()
            .map(|w| {
                let s = w.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() / norm;
                (3.0 + 1.5 * s + noise.sample(&mut rng)).clamp(1.0, 5.0)
            })
            .collect();
        let cells: Vec<String> = scores.iter().map(|s| format!("{s:.4}")).collect();
        writeln!(ratings, "{id},{}", cells.join(",")).unwrap();
        writeln!(captions, "{id},\"{}\"", caption(&mut rng, scores[0] > 3.0)).unwrap();
        labeled.push((id, z));
    }
    fs::write(dir.join("ratings.csv"), ratings).unwrap();
    fs::write(dir.join("captions.csv"), captions).unwrap();
    write_pair(dir, "labeled", &labeled, &mut rng, spec.dim);

    let mut corpus = String::from("id,caption,category,date,url\n");
    let mut unlabeled = Vec::new();
    for i in 0..spec.n_corpus {
        let id = format!("news{i:05}");
        let category = CORPUS_CATEGORIES[i % CORPUS_CATEGORIES.len()];
        let mut z = latent(&mut rng, spec.dim);
        if category == "health" {
            for (v, w) in z.iter_mut().zip(&directions[0]) {
                *v += 2.0 * w;
            }
        }
        let year = 2010 + (i / CORPUS_CATEGORIES.len()) % 9;
        let date = if i % 37 == 5 {
            "unknown".to_string()
        } else {
            format!("{year}-0{}-15", 1 + i % 6)
        };
        writeln!(
            corpus,
            "{id},\"{}\",{category},{date},https://example.org/{i}",
            caption(&mut rng, false)
        )
        .unwrap();
        unlabeled.push((id, z));
    }
    fs::write(dir.join("corpus.csv"), corpus).unwrap();
    write_pair(dir, "corpus", &unlabeled, &mut rng, spec.dim);

    let spaces: Vec<String> = spec.spaces.iter().map(|s| format!("\"{s}\"")).collect();
    let config = format!(
        r#"seed = {seed}
out_dir = "out"
spaces = [{spaces}]
{extra}
[paths]
ratings = "ratings.csv"
captions = "captions.csv"
corpus = "corpus.csv"

[paths.embeddings]
"image_embedding:clip" = "labeled_image.memb"
"text_embedding:clip" = "labeled_text.memb"

[paths.corpus_embeddings]
"image_embedding:clip" = "corpus_image.memb"
"text_embedding:clip" = "corpus_text.memb"

[cv]
k = {k}
rounds = {rounds}
alpha_grid = [0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0]
fit_intercept = true

[analysis]
categories = ["health", "sports", "business", "science", "technology"]
year_groups = ["nyregion", "us", "world/europe", "world/asia", "world/africa", "world/middleeast"]
first_year = 2010
last_year = 2018
partial_years = [2018]
bootstrap_target = "morality"
bootstrap_resamples = 500
"#,
        seed = spec.seed,
        spaces = spaces.join(", "),
        extra = spec.extra_config,
        k = spec.k,
        rounds = spec.rounds,
    );
    let path = dir.join("config.toml");
    fs::write(&path, config).unwrap();
    path
}

/// Runs the `moralvis` binary.
pub fn moralvis(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moralvis"))
        .arg("--config")
        .arg(config)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

pub fn ok(config: &Path, args: &[&str]) {
    let out = moralvis(config, args);
    assert!(
        out.status.success(),
        "moralvis {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Relative path → bytes for every file below `dir`, in sorted order.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
