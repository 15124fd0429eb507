use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::Adam;
use super::config::TrainConfig;
use super::tbatch::{t_batch, TBatch};
use crate::corpus::{Dataset, ThreadIndex};
use crate::error::{Error, Result};
use crate::model::{
    assign_course_topic, event_backward, event_forward, project_thread, zeta, Ablation, Checkpoint, Dims,
    EntityStates, EventForward, EventInputs, ModelParams, Tensors,
};
use crate::scalar::Scalar;
use crate::text::TopicArtifacts;

/// Parameter-independent inputs of one event, computed once per dataset.
#[derive(Debug, Clone)]
pub(crate) struct PlannedEvent<T> {
    pub index: usize,
    pub student: usize,
    pub thread: usize,
    pub timestamp: f64,
    /// Topic vector fed to the recurrent cells (zeros without text features).
    pub theta: Vec<T>,
    pub delta_u: T,
    pub delta_p: T,
    /// Week used as projection context.
    pub week: usize,
    /// Week assigned to this post, which becomes the student's context afterwards.
    pub post_week: usize,
    pub last_thread: Option<usize>,
    pub zeta: T,
}

pub(crate) fn check_topics(ds: &Dataset, topics: &TopicArtifacts) -> Result<()> {
    let weeks = ds.course().num_weeks();
    if topics.course_thetas.len() != weeks {
        return Err(Error::Shape(format!(
            "topic artifacts describe {} weeks, the course has {weeks}",
            topics.course_thetas.len()
        )));
    }
    Ok(())
}

pub(crate) fn plan_events<T: Scalar>(
    ds: &Dataset,
    topics: &TopicArtifacts,
    ablation: Ablation,
    time_unit: f64,
    alpha: f64,
    beta: f64,
) -> Result<Vec<PlannedEvent<T>>> {
    check_topics(ds, topics)?;
    let k = topics.num_topics();
    let index = ThreadIndex::new(ds);
    let mut student_time: Vec<Option<f64>> = vec![None; ds.num_students()];
    let mut thread_time: Vec<Option<f64>> = vec![None; ds.num_threads()];
    let mut last_week: Vec<Option<usize>> = vec![None; ds.num_students()];
    let mut last_thread: Vec<Option<usize>> = vec![None; ds.num_students()];
    let elapsed = |prev: Option<f64>, t: f64| T::of(prev.map_or(0.0, |p| (t - p) / time_unit));

    let mut plans = Vec::with_capacity(ds.len());
    for (i, e) in ds.events().iter().enumerate() {
        let theta = topics
            .theta(e.post_id)
            .ok_or_else(|| Error::Integrity(format!("no topic vector for post {}", e.post_id)))?;
        if theta.len() != k {
            return Err(Error::Shape(format!("post {} has {} topics, expected {k}", e.post_id, theta.len())));
        }
        let history = index.history(e.student, e.thread, e.timestamp);
        let z = zeta(&history, e.timestamp, alpha, beta, time_unit)?;
        let post_week = assign_course_topic(theta, &topics.course_thetas);
        plans.push(PlannedEvent {
            index: i,
            student: e.student,
            thread: e.thread,
            timestamp: e.timestamp,
            theta: if ablation.no_text_features {
                vec![T::zero(); k]
            } else {
                theta.probs().iter().map(|&x| T::of(x)).collect()
            },
            delta_u: elapsed(student_time[e.student], e.timestamp),
            delta_p: elapsed(thread_time[e.thread], e.timestamp),
            week: last_week[e.student].unwrap_or_else(|| ds.course().week_at(e.timestamp)),
            post_week,
            last_thread: last_thread[e.student],
            zeta: T::of(z),
        });
        student_time[e.student] = Some(e.timestamp);
        thread_time[e.thread] = Some(e.timestamp);
        last_week[e.student] = Some(post_week);
        last_thread[e.student] = Some(e.thread);
    }
    Ok(plans)
}

pub(crate) fn event_inputs<T: Scalar>(
    plan: &PlannedEvent<T>,
    states: &EntityStates<T>,
    ablation: Ablation,
) -> EventInputs<T> {
    let u_prev = states.students[plan.student].embedding.clone();
    let p_prev = states.threads[plan.thread].embedding.clone();
    let target_proj = if ablation.no_thread_projection {
        p_prev.clone()
    } else {
        project_thread(&u_prev, &p_prev, plan.zeta)
    };
    EventInputs {
        student: plan.student,
        thread: plan.thread,
        u_prev,
        p_prev,
        theta: plan.theta.clone(),
        delta_u: plan.delta_u,
        delta_p: plan.delta_p,
        week: plan.week,
        last_thread: plan
            .last_thread
            .map(|lt| (lt, states.threads[lt].embedding.clone())),
        target_proj,
        project_student: !ablation.no_student_projection,
        update_student: !ablation.no_dynamic_student,
        update_thread: !ablation.no_dynamic_thread,
    }
}

fn apply_event<T: Scalar>(plan: &PlannedEvent<T>, fwd: EventForward<T>, states: &mut EntityStates<T>) {
    let student = &mut states.students[plan.student];
    student.embedding = fwd.u_new;
    student.last_update = Some(plan.timestamp);
    let thread = &mut states.threads[plan.thread];
    thread.embedding = fwd.p_new;
    thread.last_update = Some(plan.timestamp);
    states.last_thread[plan.student] = Some(plan.thread);
    states.last_week[plan.student] = Some(plan.post_week);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntityKind {
    Student,
    Thread,
}

impl EntityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Student => "student",
            EntityKind::Thread => "thread",
        }
    }
}

/// One entity's embedding right after an event touched it.
#[derive(Debug, Clone, Copy)]
pub struct TrajectoryPoint<'a, T> {
    pub kind: EntityKind,
    pub entity: usize,
    pub timestamp: f64,
    pub embedding: &'a [T],
}

/// Result of a gradient-free pass over a dataset.
#[derive(Debug, Clone)]
pub struct Replay<T> {
    pub states: EntityStates<T>,
    pub mean_loss: f64,
}

/// Everything a training or replay pass over one dataset needs.
pub(crate) struct Timeline<T> {
    plans: Vec<PlannedEvent<T>>,
    batches: Vec<TBatch>,
    m: usize,
    n: usize,
}

impl<T: Scalar> Timeline<T> {
    pub fn new(ds: &Dataset, topics: &TopicArtifacts, ablation: Ablation, time_unit: f64, hyper: (f64, f64)) -> Result<Self> {
        let plans = plan_events(ds, topics, ablation, time_unit, hyper.0, hyper.1)?;
        let batches = t_batch(plans.iter().map(|p| (p.student, p.thread)));
        Ok(Timeline {
            plans,
            batches,
            m: ds.num_students(),
            n: ds.num_threads(),
        })
    }

    pub fn replay(
        &self,
        params: &ModelParams<T>,
        ablation: Ablation,
        mut on_update: impl FnMut(TrajectoryPoint<'_, T>),
    ) -> Result<Replay<T>> {
        let mut states = EntityStates::new(self.m, self.n, params.dims.d);
        let mut total = 0.0;
        for (b, batch) in self.batches.iter().enumerate() {
            let mut outs = Vec::with_capacity(batch.events.len());
            for &i in &batch.events {
                let plan = &self.plans[i];
                let fwd = event_forward(params, &event_inputs(plan, &states, ablation));
                let loss = fwd.loss().as_f64();
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch: 0, batch: b, event: plan.index });
                }
                total += loss;
                outs.push((plan, fwd));
            }
            for (plan, fwd) in outs {
                apply_event(plan, fwd, &mut states);
                let (s, p) = (plan.student, plan.thread);
                on_update(TrajectoryPoint {
                    kind: EntityKind::Student,
                    entity: s,
                    timestamp: plan.timestamp,
                    embedding: &states.students[s].embedding,
                });
                on_update(TrajectoryPoint {
                    kind: EntityKind::Thread,
                    entity: p,
                    timestamp: plan.timestamp,
                    embedding: &states.threads[p].embedding,
                });
            }
        }
        Ok(Replay {
            states,
            mean_loss: total / self.plans.len().max(1) as f64,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub wall_secs: f64,
}

pub fn write_epoch_log(log: &[EpochLog], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "mean_loss", "wall_secs"])?;
    for e in log {
        w.write_record([e.epoch.to_string(), e.mean_loss.to_string(), format!("{:.3}", e.wall_secs)])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub checkpoint: Checkpoint<T>,
    pub log: Vec<EpochLog>,
}

/// Model dimensions implied by a dataset, its topic artifacts and an embedding size.
pub fn dims_for(ds: &Dataset, topics: &TopicArtifacts, d: usize) -> Result<Dims> {
    check_topics(ds, topics)?;
    let dims = Dims {
        d,
        k: topics.num_topics(),
        s: ds.course().num_weeks(),
        m: ds.num_students(),
        n: ds.num_threads(),
    };
    dims.validate()?;
    Ok(dims)
}

/// Trains from a seeded Gaussian initialization. `train_end` is recorded in the checkpoint
/// as the time the final states describe.
pub fn fit<T: Scalar>(train: &Dataset, topics: &TopicArtifacts, cfg: &TrainConfig, train_end: f64) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    let dims = dims_for(train, topics, cfg.d)?;
    let init = ModelParams::init(dims, cfg.hyper(), &mut ChaCha8Rng::seed_from_u64(cfg.seed))?;
    fit_from(init, train, topics, cfg, train_end)
}

/// Trains starting from `init`, whose hyperparameters are replaced by those of `cfg`.
pub fn fit_from<T: Scalar>(
    init: ModelParams<T>,
    train: &Dataset,
    topics: &TopicArtifacts,
    cfg: &TrainConfig,
    train_end: f64,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset("training window has no events".into()));
    }
    let dims = dims_for(train, topics, cfg.d)?;
    if init.dims != dims {
        return Err(Error::Shape(format!("initial parameters have {:?}, data needs {dims:?}", init.dims)));
    }
    let mut params = ModelParams { hyper: cfg.hyper(), ..init };
    params.validate()?;
    let ablation = cfg.ablation;
    let time_unit = train.mean_inter_event_gap();
    let timeline = Timeline::<T>::new(train, topics, ablation, time_unit, (cfg.alpha, cfg.beta))?;

    let mut adam = Adam::new(&dims, cfg.learning_rate);
    let mut grads = Tensors::zeros(&dims);
    let clip = cfg.clip_grad_norm.map(T::of);
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        let mut states = EntityStates::new(dims.m, dims.n, dims.d);
        let mut total = 0.0;
        for (b, batch) in timeline.batches.iter().enumerate() {
            grads.fill_zero();
            let mut outs = Vec::with_capacity(batch.events.len());
            for &i in &batch.events {
                let plan = &timeline.plans[i];
                let inp = event_inputs(plan, &states, ablation);
                let fwd = event_forward(&params, &inp);
                let loss = fwd.loss().as_f64();
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, batch: b, event: plan.index });
                }
                total += loss;
                event_backward(&params, &inp, &fwd, &mut grads);
                outs.push((plan, fwd));
            }
            for (plan, fwd) in outs {
                apply_event(plan, fwd, &mut states);
            }
            if let Some(max_norm) = clip {
                let norm = grads.squared_norm().sqrt();
                if norm > max_norm {
                    grads.scale(max_norm / norm);
                }
            }
            adam.step(&mut params.tensors, &grads);
        }
        let entry = EpochLog {
            epoch,
            mean_loss: total / timeline.plans.len() as f64,
            wall_secs: start.elapsed().as_secs_f64(),
        };
        log::info!("epoch {epoch}: mean loss {:.6} ({:.2}s)", entry.mean_loss, entry.wall_secs);
        log.push(entry);
    }
    if !params.tensors.all_finite() {
        return Err(Error::Integrity("training produced non-finite parameters".into()));
    }

    let states = timeline.replay(&params, ablation, |_| {})?.states;
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            params,
            time_unit,
            train_end,
            ablation,
            states,
        },
        log,
    })
}

/// Replays `ds` with fixed parameters, reporting each embedding change to `on_update`.
pub fn replay<T: Scalar>(
    params: &ModelParams<T>,
    ablation: Ablation,
    ds: &Dataset,
    topics: &TopicArtifacts,
    time_unit: f64,
    on_update: impl FnMut(TrajectoryPoint<'_, T>),
) -> Result<Replay<T>> {
    let hyper = (params.hyper.alpha.as_f64(), params.hyper.beta.as_f64());
    Timeline::new(ds, topics, ablation, time_unit, hyper)?.replay(params, ablation, on_update)
}
