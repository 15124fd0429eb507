use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Ablation, Activation, Hyper};
use crate::scalar::Scalar;

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub d: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub lambda_u: f64,
    pub lambda_t: f64,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    /// Global gradient-norm cap per batch; `None` disables clipping.
    pub clip_grad_norm: Option<f64>,
    pub activation: Activation,
    pub ablation: Ablation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            d: 10,
            epochs: 30,
            learning_rate: 0.001,
            lambda_u: 1.0,
            lambda_t: 1.0,
            alpha: 0.5,
            beta: 0.001,
            seed: 0,
            clip_grad_norm: Some(5.0),
            activation: Activation::Sigmoid,
            ablation: Ablation::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.d == 0 {
            return Err(Error::Config("embedding dimension d must be positive".into()));
        }
        for (name, v) in [
            ("lambda_u", self.lambda_u),
            ("lambda_t", self.lambda_t),
            ("alpha", self.alpha),
            ("beta", self.beta),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and non-negative")));
            }
        }
        if let Some(c) = self.clip_grad_norm {
            if c.is_nan() || c <= 0.0 {
                return Err(Error::Config("clip_grad_norm must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn hyper<T: Scalar>(&self) -> Hyper<T> {
        Hyper {
            alpha: T::of(self.alpha),
            beta: T::of(self.beta),
            lambda_u: T::of(self.lambda_u),
            lambda_t: T::of(self.lambda_t),
            activation: self.activation,
        }
    }

    /// Every setting as `key, value` pairs that [`TrainConfig::set`] accepts back.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![
            ("d", self.d.to_string()),
            ("epochs", self.epochs.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("lambda_u", self.lambda_u.to_string()),
            ("lambda_t", self.lambda_t.to_string()),
            ("alpha", self.alpha.to_string()),
            ("beta", self.beta.to_string()),
            ("seed", self.seed.to_string()),
            ("clip_grad_norm", self.clip_grad_norm.map_or("none".into(), |c| c.to_string())),
            ("activation", self.activation.to_string()),
        ];
        let active = self.ablation.active_flags();
        out.extend(Ablation::FLAGS.iter().map(|&f| (f, active.contains(&f).to_string())));
        out
    }

    /// Applies one `key = value` setting. Keys mirror the struct fields plus the ablation
    /// flags; `clip_grad_norm = none` disables clipping.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<V: FromStr>(key: &str, value: &str) -> Result<V> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
        }
        match key {
            "d" => self.d = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "lambda_u" => self.lambda_u = parse(key, value)?,
            "lambda_t" => self.lambda_t = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "activation" => self.activation = value.parse()?,
            "clip_grad_norm" => {
                self.clip_grad_norm = match value {
                    "none" | "off" => None,
                    v => Some(parse(key, v)?),
                }
            }
            flag if Ablation::FLAGS.contains(&flag) => self.ablation.set(flag, parse(key, value)?)?,
            other => return Err(Error::Config(format!("unknown training key `{other}`"))),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let mut c = TrainConfig::default();
        c.validate().unwrap();
        c.epochs = 0;
        assert!(c.validate().is_err());
        let c = TrainConfig { learning_rate: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn key_value_settings() {
        let mut c = TrainConfig::default();
        c.set("d", "5").unwrap();
        c.set("no_text_features", "true").unwrap();
        c.set("clip_grad_norm", "none").unwrap();
        c.set("activation", "tanh").unwrap();
        assert_eq!(c.d, 5);
        assert!(c.ablation.no_text_features);
        assert_eq!(c.clip_grad_norm, None);
        assert_eq!(c.activation, Activation::Tanh);
        assert!(c.set("dim", "5").is_err());
        assert!(c.set("d", "five").is_err());
    }

    #[test]
    fn entries_round_trip_through_set() {
        let mut c = TrainConfig { learning_rate: 0.1 + 0.2, clip_grad_norm: None, ..Default::default() };
        c.set("no_dynamic_thread", "true").unwrap();
        c.set("activation", "tanh").unwrap();
        let mut back = TrainConfig::default();
        for (k, v) in c.entries() {
            back.set(k, &v).unwrap();
        }
        assert_eq!(back, c);
    }
}
