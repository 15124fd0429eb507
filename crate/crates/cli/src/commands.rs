use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use forumrec::corpus::{
    ingest_jsonl, ingest_jsonl_with, split_by_time, write_id_map, write_jsonl, write_schedule, Dataset, SplitSpec,
    SECONDS_PER_DAY,
};
use forumrec::model::{Ablation, Checkpoint};
use forumrec::recommend::{
    evaluate, export_trajectories, Baseline, BaselineKind, EvalOptions, EvalReport, ModelRecommender, Recommender,
};
use forumrec::synth::{generate, SynthConfig, POSTS_FILE, SCHEDULE_FILE, TRUTH_FILE};
use forumrec::text::{fit_topics, Preprocessor, TopicArtifacts, TopicConfig};
use forumrec::train::{fit, grid_search, write_epoch_log, GridSpec, TrainConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::*;
use crate::manifest::{Artifact, RunManifest};
use crate::usage;

pub const SYNTH_SEED_OFFSET: u64 = 0;
pub const LDA_SEED_OFFSET: u64 = 1;
pub const TRAIN_SEED_OFFSET: u64 = 2;

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const TRAINING_LOG_FILE: &str = "training_log.csv";
pub const TRAJECTORY_FILE: &str = "trajectories.csv";
pub const TOPICS_META_FILE: &str = "topics.json";
pub const ID_MAP_FILE: &str = "id_map.csv";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const ABLATION_JSON: &str = "ablation.json";
pub const ABLATION_CSV: &str = "ablation.csv";
pub const RECOMMENDATIONS_FILE: &str = "recommendations.json";
pub const GRID_CSV: &str = "grid.csv";
pub const BEST_CONFIG_FILE: &str = "best_config.toml";
const TOPIC_FILES: [&str; 4] = ["lda_model.csv", "vocab.tsv", "course_topics.csv", "post_topics.csv"];

/// What a command did: its manifest plus a human-readable summary for stdout.
#[derive(Debug, Clone)]
pub struct Report {
    pub manifest: RunManifest,
    pub summary: String,
}

struct Run {
    command: &'static str,
    started: Instant,
    invocation: serde_json::Value,
}

impl Run {
    fn start(command: &'static str, args: &impl Serialize) -> Result<Self> {
        log::info!("{command}: starting");
        Ok(Run { command, started: Instant::now(), invocation: serde_json::to_value(args)? })
    }

    fn finish(
        self,
        config: impl Serialize,
        seed: Option<u64>,
        inputs: &[PathBuf],
        outputs: &[PathBuf],
        out_dir: &Path,
        summary: String,
    ) -> Result<Report> {
        let manifest = RunManifest {
            command: self.command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            invocation: self.invocation,
            config: serde_json::to_value(config)?,
            seed,
            inputs: inputs.iter().map(Artifact::of).collect::<Result<_>>()?,
            outputs: outputs.iter().map(Artifact::of).collect::<Result<_>>()?,
            wall_secs: self.started.elapsed().as_secs_f64(),
        };
        manifest.write(out_dir)?;
        log::info!("{}: done in {:.1}s", self.command, manifest.wall_secs);
        Ok(Report { manifest, summary })
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn dataset_files(dir: &Path) -> Vec<PathBuf> {
    vec![dir.join(POSTS_FILE), dir.join(SCHEDULE_FILE)]
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    ingest_jsonl(dir.join(POSTS_FILE), dir.join(SCHEDULE_FILE))
        .with_context(|| format!("loading dataset from {}", dir.display()))
}

fn resolve_train_end(ds: &Dataset, split: &TrainEndArgs) -> Result<f64> {
    if let Some(t) = split.train_end {
        return Ok(t);
    }
    let bounds = ds.course().week_boundaries();
    let weeks = split.train_weeks.unwrap_or(bounds.len().saturating_sub(1));
    if weeks == 0 || weeks >= bounds.len() {
        return Err(usage(format!(
            "train_weeks must lie in 1..{} for a {}-week course",
            bounds.len(),
            bounds.len()
        )));
    }
    Ok(bounds[weeks])
}

/// Settings the topic artifacts were fitted with, kept next to them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicsMeta {
    pub train_end: f64,
    pub num_topics: usize,
    pub iters: usize,
    pub min_count: usize,
    pub seed: u64,
    pub separate_course_model: bool,
}

impl TopicsMeta {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(TOPICS_META_FILE);
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

fn topic_files(dir: &Path) -> Vec<PathBuf> {
    TOPIC_FILES.iter().chain([&TOPICS_META_FILE]).map(|f| dir.join(f)).collect()
}

fn load_topics(dir: &Path) -> Result<(TopicsMeta, TopicArtifacts)> {
    let meta = TopicsMeta::read(dir)?;
    let arts = TopicArtifacts::load(dir).with_context(|| format!("loading topics from {}", dir.display()))?;
    Ok((meta, arts))
}

fn toml_table(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.parse::<toml::Table>().map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Defaults, then the config file, then `--set` overrides; `--seed` derives the training seed.
pub fn resolve_train_config(args: &TrainConfigArgs) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    let mut explicit_seed = false;
    let mut apply = |cfg: &mut TrainConfig, key: &str, value: &str| -> Result<()> {
        explicit_seed |= key == "seed";
        cfg.set(key, value).map_err(|e| usage(e.to_string()))
    };
    if let Some(path) = &args.config {
        for (key, value) in toml_table(path)? {
            let text = match value {
                toml::Value::String(s) => s,
                toml::Value::Integer(_) | toml::Value::Float(_) | toml::Value::Boolean(_) => value.to_string(),
                other => {
                    return Err(usage(format!(
                        "{}: `{key}` must be a string, number or boolean, got {}",
                        path.display(),
                        other.type_str()
                    )))
                }
            };
            apply(&mut cfg, &key, &text)?;
        }
    }
    for kv in &args.set {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        apply(&mut cfg, key.trim(), value.trim())?;
    }
    if !explicit_seed {
        cfg.seed = args.seed.wrapping_add(TRAIN_SEED_OFFSET);
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn test_window(ds: &Dataset, train_end: f64, window: &WindowArgs) -> Result<Dataset> {
    if window.cutoff == 0 {
        return Err(usage("cutoff N must be at least 1"));
    }
    if window.window_days.is_nan() || window.window_days <= 0.0 {
        return Err(usage("window_days must be positive"));
    }
    let test_end = window.test_end.unwrap_or(train_end + window.window_days * SECONDS_PER_DAY);
    let (_, test) = split_by_time(ds, SplitSpec::new(train_end, test_end)?)?;
    Ok(test)
}

fn eval_options(train_end: f64, window: &WindowArgs) -> EvalOptions {
    EvalOptions { n_cutoff: window.cutoff, at: train_end, per_event: window.per_event }
}

pub fn cmd_synth(args: &SynthArgs) -> Result<Report> {
    let run = Run::start("synth", args)?;
    let mut cfg = SynthConfig::preset(&args.preset, args.scale).map_err(|e| usage(e.to_string()))?;
    cfg.seed = args.seed.wrapping_add(SYNTH_SEED_OFFSET);
    if let Some(path) = &args.config {
        let mut merged = match toml::Value::try_from(&cfg)? {
            toml::Value::Table(t) => t,
            _ => unreachable!("configs serialize to tables"),
        };
        merged.extend(toml_table(path)?);
        cfg = toml::Value::Table(merged)
            .try_into()
            .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let synth = generate(&cfg)?;
    create_dir(&args.out)?;
    synth.write(&args.out)?;
    let ds = &synth.dataset;
    let summary = format!(
        "{} posts by {} students on {} threads over {} weeks",
        ds.len(),
        ds.num_students(),
        ds.num_threads(),
        ds.course().num_weeks()
    );
    let outputs = [POSTS_FILE, SCHEDULE_FILE, TRUTH_FILE].map(|f| args.out.join(f));
    run.finish(&cfg, Some(cfg.seed), &[], &outputs, &args.out, summary)
}

pub fn cmd_ingest(args: &IngestArgs) -> Result<Report> {
    let run = Run::start("ingest", args)?;
    let pre = match &args.stopwords {
        Some(path) => Preprocessor::from_stopword_file(path)?,
        None => Preprocessor::default(),
    };
    let ds = ingest_jsonl_with(&args.posts, &args.schedule, &pre)?;
    create_dir(&args.out)?;
    let outputs = [POSTS_FILE, SCHEDULE_FILE, ID_MAP_FILE].map(|f| args.out.join(f));
    write_jsonl(&ds, &outputs[0])?;
    write_schedule(ds.course(), &outputs[1])?;
    write_id_map(&ds, &outputs[2])?;
    let summary = format!(
        "{} posts, {} students, {} threads, {} weeks",
        ds.len(),
        ds.num_students(),
        ds.num_threads(),
        ds.course().num_weeks()
    );
    let mut inputs = vec![args.posts.clone(), args.schedule.clone()];
    inputs.extend(args.stopwords.clone());
    run.finish(serde_json::Value::Null, None, &inputs, &outputs, &args.out, summary)
}

pub fn cmd_lda(args: &LdaArgs) -> Result<Report> {
    let run = Run::start("lda", args)?;
    let ds = load_dataset(&args.data)?;
    let train_end = resolve_train_end(&ds, &args.split)?;
    if args.topics == Some(0) {
        return Err(usage("--topics must be at least 1"));
    }
    let cfg = TopicConfig {
        num_topics: args.topics,
        iters: args.iters,
        min_count: args.min_count,
        seed: args.seed.wrapping_add(LDA_SEED_OFFSET),
        separate_course_model: args.separate_course_model,
        ..TopicConfig::default()
    };
    let arts = fit_topics(&ds, train_end, &cfg)?;
    create_dir(&args.out)?;
    arts.save(&args.out)?;
    let meta = TopicsMeta {
        train_end,
        num_topics: arts.num_topics(),
        iters: cfg.iters,
        min_count: cfg.min_count,
        seed: cfg.seed,
        separate_course_model: cfg.separate_course_model,
    };
    let meta_path = args.out.join(TOPICS_META_FILE);
    std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)? + "\n")
        .with_context(|| format!("writing {}", meta_path.display()))?;
    let summary = format!(
        "{} topics over {} words, trained on posts before {train_end}",
        arts.num_topics(),
        arts.vocab.len()
    );
    run.finish(&meta, Some(meta.seed), &dataset_files(&args.data), &topic_files(&args.out), &args.out, summary)
}

pub fn cmd_train(args: &TrainArgs) -> Result<Report> {
    let run = Run::start("train", args)?;
    let cfg = resolve_train_config(&args.train)?;
    let ds = load_dataset(&args.data)?;
    let (meta, arts) = load_topics(&args.topics)?;
    let train = ds.before(meta.train_end);
    let outcome = fit::<f64>(&train, &arts, &cfg, meta.train_end)?;
    create_dir(&args.out)?;
    let mut outputs = vec![args.out.join(CHECKPOINT_FILE), args.out.join(TRAINING_LOG_FILE)];
    outcome.checkpoint.save(&outputs[0])?;
    write_epoch_log(&outcome.log, &outputs[1])?;
    if args.export_trajectories {
        let path = args.out.join(TRAJECTORY_FILE);
        let rows = export_trajectories(&outcome.checkpoint, &train, &arts, &path)?;
        log::info!("wrote {rows} trajectory rows");
        outputs.push(path);
    }
    let last = outcome.log.last().map_or(f64::NAN, |l| l.mean_loss);
    let summary = format!("trained {} epochs on {} posts; final mean loss {last:.4}", cfg.epochs, train.len());
    let mut inputs = dataset_files(&args.data);
    inputs.extend(topic_files(&args.topics));
    inputs.extend(args.train.config.clone());
    run.finish(&cfg, Some(cfg.seed), &inputs, &outputs, &args.out, summary)
}

fn write_report(report: &EvalReport, out: &Path) -> Result<[PathBuf; 2]> {
    create_dir(out)?;
    let paths = [out.join(REPORT_JSON), out.join(REPORT_CSV)];
    report.write_json(&paths[0])?;
    report.write_csv(&paths[1])?;
    Ok(paths)
}

#[derive(Serialize)]
struct EvalConfig {
    method: String,
    train_end: f64,
    n_cutoff: usize,
    per_event: bool,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<Report> {
    let run = Run::start("eval", args)?;
    let ds = load_dataset(&args.data)?;
    let mut inputs = dataset_files(&args.data);
    let checkpoint = match &args.checkpoint {
        Some(path) => {
            inputs.push(path.clone());
            Some(Checkpoint::<f64>::load(path)?)
        }
        None => None,
    };
    let train_end = match &checkpoint {
        Some(ck) => {
            if args.split.train_end.is_some_and(|t| t != ck.train_end) || args.split.train_weeks.is_some() {
                return Err(usage(format!("the checkpoint was trained up to {}; drop --train-end/--train-weeks", ck.train_end)));
            }
            ck.train_end
        }
        None => resolve_train_end(&ds, &args.split)?,
    };
    let train = ds.before(train_end);
    let test = test_window(&ds, train_end, &args.window)?;
    let opts = eval_options(train_end, &args.window);
    let report = match (&checkpoint, &args.baseline) {
        (Some(ck), _) => evaluate(&ModelRecommender::new(ck, &train)?, &test, opts)?,
        (None, Some(name)) => {
            let kind: BaselineKind = name.parse().map_err(|e: forumrec::Error| usage(e.to_string()))?;
            evaluate(&Baseline::new(kind, &train, args.rec_ascending), &test, opts)?
        }
        (None, None) => return Err(usage("pass --checkpoint or --baseline")),
    };
    let outputs = write_report(&report, &args.out)?;
    let summary = format!(
        "{}: MAP@{} = {:.4} over {} students",
        report.method, report.n_cutoff, report.map_at_n, report.users_evaluated
    );
    let config = EvalConfig { method: report.method.clone(), train_end, n_cutoff: opts.n_cutoff, per_event: opts.per_event };
    run.finish(config, None, &inputs, &outputs, &args.out, summary)
}

/// One row of the ablation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// `full` or the single disabled component.
    pub variant: String,
    pub map_at_n: f64,
    pub users_evaluated: usize,
}

/// The full model first, then one row per ablation flag.
pub fn ablation_variants() -> Vec<(String, Ablation)> {
    std::iter::once(("full".to_string(), Ablation::default()))
        .chain(Ablation::FLAGS.iter().map(|&f| (f.to_string(), Ablation::from_flags(&[f]).expect("known flag"))))
        .collect()
}

pub fn read_ablation_table(dir: &Path) -> Result<Vec<AblationRow>> {
    let path = dir.join(ABLATION_JSON);
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn cmd_ablate(args: &AblateArgs) -> Result<Report> {
    let run = Run::start("ablate", args)?;
    let base = resolve_train_config(&args.train)?;
    if !base.ablation.is_full_model() {
        return Err(usage("ablate sets the ablation flags itself; remove them from the configuration"));
    }
    let ds = load_dataset(&args.data)?;
    let (meta, arts) = load_topics(&args.topics)?;
    let train = ds.before(meta.train_end);
    let test = test_window(&ds, meta.train_end, &args.window)?;
    let opts = eval_options(meta.train_end, &args.window);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.max(1))
        .build()
        .context("starting worker pool")?;
    let rows: Vec<AblationRow> = pool.install(|| {
        ablation_variants()
            .into_par_iter()
            .map(|(variant, ablation)| {
                let cfg = TrainConfig { ablation, ..base.clone() };
                let ck = fit::<f64>(&train, &arts, &cfg, meta.train_end)?.checkpoint;
                let report = evaluate(&ModelRecommender::new(&ck, &train)?, &test, opts)?;
                log::info!("{variant}: MAP {:.4}", report.map_at_n);
                Ok(AblationRow { variant, map_at_n: report.map_at_n, users_evaluated: report.users_evaluated })
            })
            .collect::<Result<_>>()
    })?;
    create_dir(&args.out)?;
    let outputs = [args.out.join(ABLATION_CSV), args.out.join(ABLATION_JSON)];
    let mut csv = format!("variant,map_at_{},users_evaluated\n", opts.n_cutoff);
    let mut summary = String::new();
    for r in &rows {
        csv += &format!("{},{},{}\n", r.variant, r.map_at_n, r.users_evaluated);
        summary += &format!("{:<22} {:.4}\n", r.variant, r.map_at_n);
    }
    std::fs::write(&outputs[0], csv).with_context(|| format!("writing {}", outputs[0].display()))?;
    std::fs::write(&outputs[1], serde_json::to_string_pretty(&rows)? + "\n")
        .with_context(|| format!("writing {}", outputs[1].display()))?;
    let mut inputs = dataset_files(&args.data);
    inputs.extend(topic_files(&args.topics));
    run.finish(&base, Some(base.seed), &inputs, &outputs, &args.out, summary.trim_end().to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedThread {
    pub thread_id: String,
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendations {
    pub student_id: String,
    pub at: f64,
    pub threads: Vec<RankedThread>,
}

pub fn cmd_recommend(args: &RecommendArgs) -> Result<Report> {
    let run = Run::start("recommend", args)?;
    let ck = Checkpoint::<f64>::load(&args.checkpoint)?;
    let ds = load_dataset(&args.data)?;
    let student = ds
        .student_index(&args.student)
        .ok_or_else(|| usage(format!("unknown student `{}`", args.student)))?;
    if args.top_k == 0 {
        return Err(usage("--top-k must be at least 1"));
    }
    let train = ds.before(ck.train_end);
    let at = args.at.unwrap_or(ck.train_end);
    let rec = ModelRecommender::new(&ck, &train)?;
    let ranked = rec.rank(student, at, args.top_k).map_err(|e| match e {
        e @ forumrec::Error::Config(_) => usage(e.to_string()),
        e => e.into(),
    })?;
    let distances = ranked.distances.clone().unwrap_or_default();
    let threads: Vec<RankedThread> = ranked
        .thread_ids
        .iter()
        .enumerate()
        .map(|(i, &p)| RankedThread { thread_id: ds.thread_ids()[p].clone(), distance: distances.get(i).copied() })
        .collect();
    let result = Recommendations { student_id: args.student.clone(), at, threads };
    create_dir(&args.out)?;
    let path = args.out.join(RECOMMENDATIONS_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&result)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    let summary = result
        .threads
        .iter()
        .enumerate()
        .map(|(i, t)| match t.distance {
            Some(d) => format!("{}\t{}\t{d:.6}", i + 1, t.thread_id),
            None => format!("{}\t{}", i + 1, t.thread_id),
        })
        .collect::<Vec<_>>()
        .join("\n");
    let mut inputs = dataset_files(&args.data);
    inputs.push(args.checkpoint.clone());
    run.finish(serde_json::Value::Null, None, &inputs, &[path], &args.out, summary)
}

pub fn cmd_grid(args: &GridArgs) -> Result<Report> {
    let run = Run::start("grid", args)?;
    let base = resolve_train_config(&args.train)?;
    let defaults = GridSpec::default();
    let spec = GridSpec {
        dims: args.dims.clone().unwrap_or(defaults.dims),
        alphas: args.alphas.clone().unwrap_or(defaults.alphas),
        betas: args.betas.clone().unwrap_or(defaults.betas),
    };
    let ds = load_dataset(&args.data)?;
    let (meta, arts) = load_topics(&args.topics)?;
    let train = ds.before(meta.train_end);
    let result = grid_search(&train, &arts, meta.train_end, &base, &spec, args.jobs)?;
    create_dir(&args.out)?;
    let outputs = [args.out.join(GRID_CSV), args.out.join(BEST_CONFIG_FILE)];
    let mut csv = String::from("d,alpha,beta,validation_map\n");
    for p in &result.points {
        csv += &format!("{},{},{},{}\n", p.d, p.alpha, p.beta, p.validation_map);
    }
    std::fs::write(&outputs[0], csv).with_context(|| format!("writing {}", outputs[0].display()))?;
    let best_toml: String = result
        .best
        .entries()
        .into_iter()
        .map(|(k, v)| match k {
            "activation" | "clip_grad_norm" => format!("{k} = \"{v}\"\n"),
            _ => format!("{k} = {v}\n"),
        })
        .collect();
    std::fs::write(&outputs[1], best_toml).with_context(|| format!("writing {}", outputs[1].display()))?;
    let b = &result.best;
    let summary = format!(
        "{} configurations; best d={} alpha={} beta={} (config in {})",
        result.points.len(),
        b.d,
        b.alpha,
        b.beta,
        outputs[1].display()
    );
    let mut inputs = dataset_files(&args.data);
    inputs.extend(topic_files(&args.topics));
    run.finish(spec_json(&spec, &base), Some(base.seed), &inputs, &outputs, &args.out, summary)
}

fn spec_json(spec: &GridSpec, base: &TrainConfig) -> serde_json::Value {
    serde_json::json!({ "base": base, "dims": spec.dims, "alphas": spec.alphas, "betas": spec.betas })
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<Report> {
    let path = if args.manifest.is_dir() {
        args.manifest.join(crate::manifest::MANIFEST_FILE)
    } else {
        args.manifest.clone()
    };
    let manifest = RunManifest::read(&path)?;
    let bad = manifest.mismatches();
    if !bad.is_empty() {
        let lines: Vec<String> = bad.iter().map(|(p, why)| format!("  {}: {why}", p.display())).collect();
        anyhow::bail!("{} artifact(s) do not match {}:\n{}", bad.len(), path.display(), lines.join("\n"));
    }
    let n = manifest.inputs.len() + manifest.outputs.len();
    Ok(Report { manifest, summary: format!("{n} artifacts match {}", path.display()) })
}
