//! Embedding stores, the coupled recurrent update, student and thread projection,
//! the next-thread prediction head and the training loss.

mod ablation;
mod checkpoint;
mod event;
mod ops;
mod params;
mod state;

pub use ablation::Ablation;
pub use checkpoint::Checkpoint;
pub use event::{event_backward, event_forward, EventForward, EventInputs};
pub use ops::{loss, predict_next, project_student, project_thread, update, zeta, LastThread};
pub use params::{Activation, Dims, Hyper, ModelParams, Tensors, INIT_STD, TENSOR_NAMES};
pub use state::{DynamicState, EntityStates};

pub use crate::text::assign_course_topic;
