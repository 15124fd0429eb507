//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero if any fail.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::time::{Duration, Instant};

use forumrec::corpus::ReplyHistory;
use forumrec::model::{project_student, project_thread, zeta, Dims, Hyper, ModelParams};
use forumrec::recommend::{average_precision, EvalReport};
use forumrec::text::{lda_fit, LdaConfig, TermFrequencyVector};
use forumrec::train::{grad_check, random_instance, t_batch};
use forumrec_cli::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let dims = Dims { d: 3, k: 2, s: 2, m: 4, n: 4 };
    let worst = (0..20u64)
        .map(|seed| {
            let (params, inp) = random_instance(seed, dims);
            grad_check(&params, &inp, 1e-5).max_rel_error
        })
        .fold(0.0, f64::max);
    let took = start.elapsed();
    outcome(
        worst <= 1e-4 && took < Duration::from_secs(10),
        format!("max relative error {worst:.2e} over 20 instances in {:.2}s", took.as_secs_f64()),
    )
}

fn closed_form_zeta() -> Outcome {
    let never = ReplyHistory::default();
    let one_post = ReplyHistory { post_times: vec![12.0], reply_times: vec![], last_own_post: Some(10.0) };
    let post_and_reply = ReplyHistory { post_times: vec![12.0], reply_times: vec![13.0], last_own_post: Some(10.0) };
    let cases = [
        (zeta(&never, 20.0, 0.5, 0.001, 1.0), 0.0),
        (zeta(&one_post, 20.0, 0.5, 0.001, 1.0), (-1.0f64).exp()),
        (zeta(&post_and_reply, 20.0, 0.5, 0.001, 1.0), (-1.0f64).exp() + (-0.003f64).exp()),
    ];
    let err = cases
        .iter()
        .map(|(got, want)| got.as_ref().map_or(f64::INFINITY, |g| (g - want).abs()))
        .fold(0.0, f64::max);
    outcome(err <= 1e-12, format!("largest deviation {err:.1e} on 3 examples"))
}

fn projection_identities() -> Outcome {
    let dims = Dims { d: 4, k: 2, s: 3, m: 2, n: 2 };
    let params = ModelParams::<f64>::zeros(dims, Hyper::default()).expect("valid dims");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checks = 0;
    let mut ok = true;
    for _ in 0..100 {
        let u: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let p: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let delta = rng.random_range(0.0..50.0);
        let week = rng.random_range(0..3);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        let same_student = project_student(&u, delta, week, &params).is_ok_and(|v| bits(&v) == bits(&u));
        let same_thread = bits(&project_thread(&u, &p, 0.0)) == bits(&p);
        let mid: Vec<f64> = u.iter().zip(&p).map(|(a, b)| (a + b) / 2.0).collect();
        let midpoint = bits(&project_thread(&u, &p, 1.0)) == bits(&mid);
        ok &= same_student && same_thread && midpoint;
        checks += 3;
    }
    outcome(ok, format!("{checks} bitwise identity checks"))
}

/// MAP@N straight from its definition: precision at k times relevance at k, summed over
/// the top N and divided by min(|relevant|, N).
fn brute_force_ap(ranked: &[usize], relevant: &BTreeSet<usize>, n: usize) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for k in 1..=n.min(ranked.len()) {
        if relevant.contains(&ranked[k - 1]) {
            let precision = ranked[..k].iter().filter(|t| relevant.contains(t)).count() as f64 / k as f64;
            total += precision;
        }
    }
    total / relevant.len().min(n) as f64
}

fn map_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut err: f64 = 0.0;
    for _ in 0..100 {
        let len = rng.random_range(1..=20);
        let mut ranked: Vec<usize> = (0..20).collect();
        ranked.shuffle(&mut rng);
        ranked.truncate(len);
        let relevant: BTreeSet<usize> = (0..20).filter(|_| rng.random_bool(0.25)).collect();
        err = err.max((average_precision(&ranked, &relevant, 5) - brute_force_ap(&ranked, &relevant, 5)).abs());
    }
    outcome(err <= 1e-12, format!("largest deviation {err:.1e} on 100 fixtures"))
}

fn t_batch_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let events: Vec<(usize, usize)> = (0..10_000).map(|_| (rng.random_range(0..300), rng.random_range(0..200))).collect();
    let start = Instant::now();
    let batches = t_batch(events.iter().copied());
    let took = start.elapsed();
    let mut disjoint = true;
    for b in &batches {
        let mut students = BTreeSet::new();
        let mut threads = BTreeSet::new();
        for &i in &b.events {
            disjoint &= students.insert(events[i].0) && threads.insert(events[i].1);
        }
    }
    // chronology per entity: indices of each entity's events appear in increasing order
    let flat: Vec<usize> = batches.iter().flat_map(|b| b.events.iter().copied()).collect();
    let mut complete = flat.len() == events.len();
    let mut sorted = flat.clone();
    sorted.sort_unstable();
    complete &= sorted.iter().enumerate().all(|(i, &e)| i == e);
    let mut last_student: HashMap<usize, usize> = HashMap::new();
    let mut last_thread: HashMap<usize, usize> = HashMap::new();
    let mut chronological = true;
    for &i in &flat {
        let (s, p) = events[i];
        chronological &= last_student.insert(s, i).is_none_or(|prev| prev < i);
        chronological &= last_thread.insert(p, i).is_none_or(|prev| prev < i);
    }
    outcome(
        disjoint && complete && chronological && took < Duration::from_secs(5),
        format!("{} batches for 10000 events in {:.3}s", batches.len(), took.as_secs_f64()),
    )
}

fn lda_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let vocab = 50;
    let docs: Vec<TermFrequencyVector> = (0..200)
        .map(|_| {
            let lean: f64 = if rng.random_bool(0.5) { 0.9 } else { 0.1 };
            let mut counts = vec![0u32; vocab];
            for _ in 0..40 {
                let first_topic = rng.random_bool(lean);
                let w = rng.random_range(0..25) + if first_topic { 0 } else { 25 };
                counts[w] += 1;
            }
            TermFrequencyVector::from_counts(counts.into_iter().enumerate().filter(|(_, c)| *c > 0))
        })
        .collect();
    let cfg = LdaConfig { iters: 200, ..LdaConfig::new(2, 11) };
    let (a, b) = match (lda_fit(&docs, vocab, &cfg), lda_fit(&docs, vocab, &cfg)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return outcome(false, format!("fit failed: {e}")),
    };
    // mass[t][g]: probability topic t puts on generating word set g
    let mass: Vec<[f64; 2]> = (0..2)
        .map(|t| {
            let row = a.topic(t);
            [row[..25].iter().sum(), row[25..].iter().sum()]
        })
        .collect();
    let mut pairs: Vec<(f64, usize, usize)> =
        (0..2).flat_map(|t| (0..2).map(move |g| (t, g))).map(|(t, g)| (mass[t][g], t, g)).collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    let (mut used_t, mut used_g, mut matched) = (BTreeSet::new(), BTreeSet::new(), Vec::new());
    for (m, t, g) in pairs {
        if !used_t.contains(&t) && !used_g.contains(&g) {
            used_t.insert(t);
            used_g.insert(g);
            matched.push(m);
        }
    }
    let worst = matched.iter().copied().fold(f64::INFINITY, f64::min);
    let bits = |m: &forumrec::text::LdaModel| (0..2).flat_map(|t| m.topic(t).iter().map(|x| x.to_bits()).collect::<Vec<_>>()).collect::<Vec<_>>();
    let identical = bits(&a) == bits(&b);
    outcome(
        worst >= 0.9 && identical,
        format!("worst matched mass {worst:.3}; reruns bitwise identical: {identical}"),
    )
}

struct EndToEnd {
    full: f64,
    no_thread_projection: f64,
    no_text_features: f64,
    pop: f64,
    rec: f64,
    took: Duration,
}

const SEEDS: [u64; 3] = [0, 1, 2];

fn map_of(dir: &Path) -> anyhow::Result<f64> {
    Ok(EvalReport::read_json(dir.join(REPORT_JSON))?.map_at_n)
}

fn end_to_end(root: &Path) -> anyhow::Result<EndToEnd> {
    let start = Instant::now();
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let window = WindowArgs { cutoff: 5, test_end: None, window_days: 1.0, per_event: false };
    let mut sums = [0.0; 5];
    for seed in SEEDS {
        let dir = root.join(format!("seed{seed}"));
        let data = dir.join("data");
        let topics = dir.join("topics");
        cmd_synth(&SynthArgs { preset: "algo-like".into(), scale: 0.1, config: None, seed, out: data.clone() })?;
        cmd_lda(&LdaArgs {
            data: data.clone(),
            topics: None,
            iters: forumrec::text::DEFAULT_ITERS,
            min_count: forumrec::text::DEFAULT_MIN_COUNT,
            separate_course_model: false,
            split: TrainEndArgs { train_end: None, train_weeks: Some(8) },
            seed,
            out: topics.clone(),
        })?;
        let train = TrainConfigArgs { seed, ..Default::default() };
        cmd_ablate(&AblateArgs {
            data: data.clone(),
            topics: topics.clone(),
            train,
            window: window.clone(),
            jobs,
            out: dir.join("ablate"),
        })?;
        let rows = read_ablation_table(&dir.join("ablate"))?;
        let row = |name: &str| rows.iter().find(|r| r.variant == name).map(|r| r.map_at_n);
        let baseline = |name: &str| -> anyhow::Result<f64> {
            let out = dir.join(name);
            cmd_eval(&EvalArgs {
                data: data.clone(),
                checkpoint: None,
                baseline: Some(name.into()),
                rec_ascending: false,
                split: TrainEndArgs { train_end: None, train_weeks: Some(8) },
                window: window.clone(),
                out: out.clone(),
            })?;
            map_of(&out)
        };
        let values = [
            row("full"),
            row("no_thread_projection"),
            row("no_text_features"),
            Some(baseline("pop")?),
            Some(baseline("rec")?),
        ];
        for (sum, v) in sums.iter_mut().zip(values) {
            *sum += v.ok_or_else(|| anyhow::anyhow!("ablation table is missing a variant"))?;
        }
    }
    let mean = |i: usize| sums[i] / SEEDS.len() as f64;
    Ok(EndToEnd {
        full: mean(0),
        no_thread_projection: mean(1),
        no_text_features: mean(2),
        pop: mean(3),
        rec: mean(4),
        took: start.elapsed(),
    })
}

fn determinism(root: &Path) -> anyhow::Result<Outcome> {
    let base = root.join("seed0");
    let mut sums = Vec::new();
    for run in ["train_a", "train_b"] {
        let report = cmd_train(&TrainArgs {
            data: base.join("data"),
            topics: base.join("topics"),
            train: TrainConfigArgs { seed: 0, ..Default::default() },
            export_trajectories: false,
            out: root.join(run),
        })?;
        let ck = report
            .manifest
            .output(CHECKPOINT_FILE)
            .ok_or_else(|| anyhow::anyhow!("manifest lists no checkpoint"))?;
        sums.push(ck.sha256.clone());
        if sha256_file(&ck.path)? != ck.sha256 {
            return Ok(outcome(false, "checkpoint does not match its manifest"));
        }
    }
    Ok(outcome(sums[0] == sums[1], format!("checkpoint sha256 {} vs {}", &sums[0][..16], &sums[1][..16])))
}

fn main() {
    let root = tempfile::tempdir().expect("temporary directory");
    let mut results: Vec<(usize, &str, Outcome)> = vec![
        (1, "gradient correctness", gradient_correctness()),
        (2, "closed-form excitation", closed_form_zeta()),
        (3, "projection identities", projection_identities()),
        (4, "MAP oracle equivalence", map_oracle()),
        (5, "t-batch invariants", t_batch_invariants()),
        (6, "LDA recovery", lda_recovery()),
    ];
    match end_to_end(root.path()) {
        Ok(e) => {
            let minutes = e.took < Duration::from_secs(300);
            results.push((
                7,
                "end-to-end superiority",
                outcome(
                    e.full > e.pop && e.full > e.rec && minutes,
                    format!(
                        "mean MAP@5 over 3 seeds: model {:.4}, POP {:.4}, REC {:.4}; {:.0}s",
                        e.full,
                        e.pop,
                        e.rec,
                        e.took.as_secs_f64()
                    ),
                ),
            ));
            results.push((
                8,
                "ablation direction",
                outcome(
                    e.full >= e.no_thread_projection && e.full >= e.no_text_features,
                    format!(
                        "mean MAP@5: full {:.4}, no_thread_projection {:.4}, no_text_features {:.4}",
                        e.full, e.no_thread_projection, e.no_text_features
                    ),
                ),
            ));
        }
        Err(err) => {
            results.push((7, "end-to-end superiority", outcome(false, format!("pipeline failed: {err:#}"))));
            results.push((8, "ablation direction", outcome(false, format!("pipeline failed: {err:#}"))));
        }
    }
    let det = determinism(root.path()).unwrap_or_else(|err| outcome(false, format!("training failed: {err:#}")));
    results.push((9, "training determinism", det));

    let mut failed = 0;
    for (n, name, o) in &results {
        println!("[{}] {n}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
