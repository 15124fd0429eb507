use forumrec::corpus::{ingest_jsonl, split_by_time, write_jsonl, Dataset, SplitSpec, SECONDS_PER_DAY, SECONDS_PER_WEEK};
use forumrec::model::Checkpoint;
use forumrec::recommend::{evaluate, Baseline, BaselineKind, EvalOptions, ModelRecommender};
use forumrec::synth::{generate, SynthConfig, POSTS_FILE, SCHEDULE_FILE};
use forumrec::text::{fit_topics, TopicConfig};
use forumrec::train::{fit, TrainConfig};
use proptest::prelude::*;

fn small(seed: u64) -> SynthConfig {
    SynthConfig { num_students: 40, num_threads: 25, seed, ..SynthConfig::algo_like(0.1) }
}

fn assert_same_events(a: &Dataset, b: &Dataset) {
    assert_eq!(a.len(), b.len());
    assert_eq!(a.student_ids(), b.student_ids());
    assert_eq!(a.thread_ids(), b.thread_ids());
    for (x, y) in a.events().iter().zip(b.events()) {
        assert_eq!(x, y);
    }
    assert_eq!(a.course(), b.course());
}

#[test]
fn synthetic_corpus_survives_write_and_ingest() {
    let synth = generate(&small(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    synth.write(dir.path()).unwrap();
    let back = ingest_jsonl(dir.path().join(POSTS_FILE), dir.path().join(SCHEDULE_FILE)).unwrap();
    assert_same_events(&synth.dataset, &back);

    let again = dir.path().join("again.jsonl");
    write_jsonl(&back, &again).unwrap();
    assert_eq!(
        std::fs::read(dir.path().join(POSTS_FILE)).unwrap(),
        std::fs::read(&again).unwrap()
    );
}

#[test]
fn train_evaluate_and_reload() {
    let cfg = small(5);
    let ds = generate(&cfg).unwrap().dataset;
    let t1 = cfg.course_start + 8.0 * SECONDS_PER_WEEK;
    let topics = fit_topics(&ds, t1, &TopicConfig { iters: 50, min_count: 2, ..Default::default() }).unwrap();
    for dist in topics.post_thetas.values() {
        assert!((dist.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    let (train, test) = split_by_time(&ds, SplitSpec::new(t1, t1 + 7.0 * SECONDS_PER_DAY).unwrap()).unwrap();
    let tc = TrainConfig { d: 4, epochs: 3, ..Default::default() };
    let out = fit::<f64>(&train, &topics, &tc, t1).unwrap();
    assert_eq!(out.log.len(), 3);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.bin");
    out.checkpoint.save(&path).unwrap();
    let loaded = Checkpoint::<f64>::load(&path).unwrap();
    assert_eq!(loaded.to_bytes(), out.checkpoint.to_bytes());

    let opts = EvalOptions::at(t1);
    let model = evaluate(&ModelRecommender::new(&loaded, &train).unwrap(), &test, opts).unwrap();
    assert!((0.0..=1.0).contains(&model.map_at_n));
    assert_eq!(model.users_evaluated, model.per_user_ap.len());
    for kind in [BaselineKind::Pop, BaselineKind::Rec, BaselineKind::UserRec] {
        let r = evaluate(&Baseline::new(kind, &train, false), &test, opts).unwrap();
        assert!((0.0..=1.0).contains(&r.map_at_n));
        assert_eq!(r.users_evaluated, model.users_evaluated);
    }

    let rec = ModelRecommender::new(&loaded, &train).unwrap();
    assert!(rec.recommend(0, t1 - 1.0, 5).is_err());
    let ranked = rec.recommend(0, t1, 5).unwrap();
    assert!(ranked.thread_ids.iter().all(|p| rec.candidates().contains(p)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn split_partitions_by_time(seed in 0u64..4, a in 0.05f64..0.9, width in 0.01f64..0.5) {
        let cfg = small(seed);
        let ds = generate(&cfg).unwrap().dataset;
        let span = cfg.course_end() - cfg.course_start;
        let t1 = cfg.course_start + a * span;
        let t2 = t1 + width * span;
        let (train, test) = split_by_time(&ds, SplitSpec::new(t1, t2).unwrap()).unwrap();
        prop_assert!(train.events().iter().all(|e| e.timestamp < t1));
        prop_assert!(test.events().iter().all(|e| t1 <= e.timestamp && e.timestamp < t2));
        let inside = ds.events().iter().filter(|e| e.timestamp < t2).count();
        prop_assert_eq!(train.len() + test.len(), inside);
        prop_assert_eq!(train.num_students(), ds.num_students());
    }
}
