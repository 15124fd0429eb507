//! Nearest-neighbour thread ranking, MAP@N evaluation and heuristic baselines.

mod baselines;
mod eval;
mod model_rec;
mod rank;
mod trajectory;

pub use baselines::{baseline_pop, baseline_rec, baseline_user_rec};
pub use eval::{evaluate, Baseline, BaselineKind, EvalOptions, EvalReport, Recommender};
pub use model_rec::ModelRecommender;
pub use rank::{average_precision, rank_onehot_candidates, rank_threads, RankedRecommendation};
pub use trajectory::export_trajectories;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::dataset;
    use crate::corpus::split_by_time;
    use crate::corpus::SplitSpec;
    use crate::model::{predict_next, project_student, project_thread, LastThread};
    use crate::text::fixtures::artifacts;
    use crate::train::{fit, TrainConfig};

    fn fixture() -> crate::corpus::Dataset {
        dataset(
            3,
            5,
            &[
                (1, 0, 0, 10.0, None),
                (2, 1, 0, 20.0, Some(1)),
                (3, 0, 1, 30.0, None),
                (4, 2, 1, 45.0, Some(3)),
                (5, 0, 0, 60.0, Some(2)),
                (6, 1, 2, 80.0, None),
                (7, 2, 0, 90.0, Some(5)),
                (8, 0, 2, 120.0, None),
                (9, 1, 3, 130.0, None),
            ],
        )
    }

    #[test]
    fn model_ranking_composes_the_operations() {
        let ds = fixture();
        let topics = artifacts(&ds, 2);
        let (train, test) = split_by_time(&ds, SplitSpec::new(100.0, 200.0).unwrap()).unwrap();
        let cfg = TrainConfig { d: 3, epochs: 2, seed: 1, ..Default::default() };
        let ck = fit::<f64>(&train, &topics, &cfg, 100.0).unwrap().checkpoint;
        let rec = ModelRecommender::new(&ck, &train).unwrap();
        assert_eq!(rec.candidates(), &[0, 1, 2]);

        let at = 100.0;
        let s = 0;
        let st = &ck.states.students[s];
        let week = ck.states.last_week[s].unwrap();
        let u_hat = project_student(&st.embedding, st.elapsed(at, ck.time_unit), week, &ck.params).unwrap();
        let lt = ck.states.last_thread[s].unwrap();
        let last = LastThread { thread: lt, embedding: &ck.states.threads[lt].embedding };
        let q = predict_next(&u_hat, s, Some(last), &ck.params).unwrap();
        assert_eq!(rec.predict(s, at).unwrap(), q);

        let dense: Vec<(usize, Vec<f64>)> = rec
            .candidate_vectors(s, at)
            .unwrap()
            .into_iter()
            .map(|(p, v)| {
                let mut full = vec![0.0; 5];
                full[p] = 1.0;
                full.extend(v);
                (p, full)
            })
            .collect();
        let ranked = rec.recommend(s, at, 3).unwrap();
        assert_eq!(ranked.thread_ids, rank_threads(&q, &dense, 3).thread_ids);

        // student 0 never posted on thread 1 after student 2's reply; its target is pulled
        let cands = rec.candidate_vectors(s, at).unwrap();
        let p1 = &ck.states.threads[1].embedding;
        assert_ne!(&cands[1].1, p1);
        assert_eq!(cands[1].1, project_thread(&st.embedding, p1, cands_zeta(&ck, &train, s, 1, at)));

        assert!(rec.predict(s, 50.0).is_err());
        let report = evaluate(&rec, &test, EvalOptions::at(at)).unwrap();
        assert_eq!(report.users_evaluated, 2);
        assert!(report.method.starts_with("model"));
        let per_event = evaluate(&rec, &test, EvalOptions { per_event: true, ..EvalOptions::at(at) }).unwrap();
        assert_eq!(per_event.users_evaluated, 2);
    }

    fn cands_zeta(ck: &crate::model::Checkpoint<f64>, train: &crate::corpus::Dataset, s: usize, p: usize, at: f64) -> f64 {
        let h = crate::corpus::reply_history(train, s, p, ck.train_end);
        crate::model::zeta(&h, at, ck.params.hyper.alpha, ck.params.hyper.beta, ck.time_unit).unwrap()
    }

    #[test]
    fn checkpoint_must_describe_the_dataset() {
        let ds = fixture();
        let topics = artifacts(&ds, 2);
        let (train, _) = split_by_time(&ds, SplitSpec::new(100.0, 200.0).unwrap()).unwrap();
        let cfg = TrainConfig { d: 2, epochs: 1, ..Default::default() };
        let ck = fit::<f64>(&train, &topics, &cfg, 100.0).unwrap().checkpoint;
        assert!(ModelRecommender::new(&ck, &ds).is_err());
        let mut late = ck.clone();
        late.train_end = 50.0;
        assert!(ModelRecommender::new(&late, &train).is_err());
    }

    #[test]
    fn trajectory_rows() {
        let ds = fixture();
        let topics = artifacts(&ds, 2);
        let cfg = TrainConfig { d: 2, epochs: 1, ..Default::default() };
        let ck = fit::<f64>(&ds, &topics, &cfg, 200.0).unwrap().checkpoint;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        assert_eq!(export_trajectories(&ck, &ds, &topics, &path).unwrap(), 18);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("kind,entity_id,timestamp,e0,e1\nstudent,s0,10,"));
    }
}
