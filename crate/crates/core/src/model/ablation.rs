use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Components that can be switched off to measure their contribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Ablation {
    /// Student dynamic embeddings stay at their initial value.
    pub no_dynamic_student: bool,
    /// Thread dynamic embeddings stay at their initial value.
    pub no_dynamic_thread: bool,
    /// The projected student embedding is the last updated one.
    pub no_student_projection: bool,
    /// Targets and candidates use the thread embedding without the excitation pull.
    pub no_thread_projection: bool,
    /// The topic vector fed to the recurrent cells is zero.
    pub no_text_features: bool,
}

impl Ablation {
    pub const FLAGS: [&'static str; 5] = [
        "no_dynamic_student",
        "no_dynamic_thread",
        "no_student_projection",
        "no_thread_projection",
        "no_text_features",
    ];

    pub fn set(&mut self, flag: &str, on: bool) -> Result<()> {
        let slot = match flag {
            "no_dynamic_student" => &mut self.no_dynamic_student,
            "no_dynamic_thread" => &mut self.no_dynamic_thread,
            "no_student_projection" => &mut self.no_student_projection,
            "no_thread_projection" => &mut self.no_thread_projection,
            "no_text_features" => &mut self.no_text_features,
            other => return Err(Error::Config(format!("unknown ablation flag `{other}`"))),
        };
        *slot = on;
        Ok(())
    }

    pub fn from_flags<S: AsRef<str>>(flags: &[S]) -> Result<Self> {
        let mut a = Ablation::default();
        for f in flags {
            a.set(f.as_ref(), true)?;
        }
        Ok(a)
    }

    pub fn active_flags(&self) -> Vec<&'static str> {
        Self::FLAGS
            .iter()
            .zip(self.as_array())
            .filter(|(_, on)| *on)
            .map(|(f, _)| *f)
            .collect()
    }

    fn as_array(&self) -> [bool; 5] {
        [
            self.no_dynamic_student,
            self.no_dynamic_thread,
            self.no_student_projection,
            self.no_thread_projection,
            self.no_text_features,
        ]
    }

    pub fn is_full_model(&self) -> bool {
        *self == Ablation::default()
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flags = self.active_flags();
        if flags.is_empty() {
            f.write_str("full")
        } else {
            f.write_str(&flags.join("+"))
        }
    }
}

impl Ablation {
    pub(crate) fn bits(&self) -> u8 {
        self.as_array()
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &on)| acc | (u8::from(on) << i))
    }

    pub(crate) fn from_bits(bits: u8) -> Option<Self> {
        if bits >> Self::FLAGS.len() != 0 {
            return None;
        }
        let on = |i: usize| bits & (1 << i) != 0;
        Some(Ablation {
            no_dynamic_student: on(0),
            no_dynamic_thread: on(1),
            no_student_projection: on(2),
            no_thread_projection: on(3),
            no_text_features: on(4),
        })
    }
}
