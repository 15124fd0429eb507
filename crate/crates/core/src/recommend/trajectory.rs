use std::path::Path;

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::model::Checkpoint;
use crate::scalar::Scalar;
use crate::text::TopicArtifacts;
use crate::train::{replay, EntityKind};

/// Replays `train` with the checkpoint's parameters and writes one CSV row per embedding
/// change: `kind, entity_id, timestamp, e0 .. e{d-1}`.
pub fn export_trajectories<T: Scalar>(
    checkpoint: &Checkpoint<T>,
    train: &Dataset,
    topics: &TopicArtifacts,
    path: impl AsRef<Path>,
) -> Result<usize> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    let d = checkpoint.params.dims.d;
    let mut header = vec!["kind".to_string(), "entity_id".into(), "timestamp".into()];
    header.extend((0..d).map(|i| format!("e{i}")));
    w.write_record(&header)?;
    let mut rows = 0;
    let mut failure = None;
    replay(&checkpoint.params, checkpoint.ablation, train, topics, checkpoint.time_unit, |pt| {
        if failure.is_some() {
            return;
        }
        let id = match pt.kind {
            EntityKind::Student => &train.student_ids()[pt.entity],
            EntityKind::Thread => &train.thread_ids()[pt.entity],
        };
        let mut record = vec![pt.kind.as_str().to_string(), id.clone(), pt.timestamp.to_string()];
        record.extend(pt.embedding.iter().map(|x| x.to_string()));
        match w.write_record(&record) {
            Ok(()) => rows += 1,
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(rows)
}
