//! Versioned little-endian binary container for parameters and replayed state.
//!
//! Layout: magic `FRCK`, `u32` version, scalar tag, dimensions, activation code,
//! ablation bits, hyperparameters, normalization constants, named tensors, then per-entity states.

use std::path::Path;

use super::ablation::Ablation;
use super::params::{Activation, Dims, Hyper, ModelParams, Tensors, TENSOR_NAMES};
use super::state::{DynamicState, EntityStates};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"FRCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub params: ModelParams<T>,
    /// Seconds per normalized time unit.
    pub time_unit: f64,
    /// End of the training window the states were replayed up to.
    pub train_end: f64,
    /// Variant the parameters were trained as; evaluation replays the same behavior.
    pub ablation: Ablation,
    pub states: EntityStates<T>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, x: u8) {
        self.0.push(x);
    }
    fn u32(&mut self, x: u32) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn u64(&mut self, x: u64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn i64(&mut self, x: i64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn f64(&mut self, x: f64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
    fn scalars<T: Scalar>(&mut self, xs: &[T]) {
        for &x in xs {
            x.write_le(&mut self.0);
        }
    }
    fn opt_index(&mut self, x: Option<usize>) {
        self.i64(x.map_or(-1, |v| v as i64));
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("exact length"))
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Checkpoint("dimension overflows usize".into()))
    }
    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.array()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    fn str(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| Error::Checkpoint("invalid utf-8".into()))
    }
    fn scalar<T: Scalar>(&mut self) -> Result<T> {
        Ok(T::read_le(self.take(T::BYTES)?))
    }
    fn scalars<T: Scalar>(&mut self, out: &mut [T]) -> Result<()> {
        for slot in out {
            *slot = self.scalar()?;
        }
        Ok(())
    }
    fn opt_index(&mut self, bound: usize) -> Result<Option<usize>> {
        match self.i64()? {
            -1 => Ok(None),
            v if v >= 0 && (v as usize) < bound => Ok(Some(v as usize)),
            v => Err(Error::Checkpoint(format!("index {v} out of range {bound}"))),
        }
    }
}

impl<T: Scalar> Checkpoint<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(VERSION);
        w.str(T::TAG);
        let dims = self.params.dims;
        for x in [dims.d, dims.k, dims.s, dims.m, dims.n] {
            w.u64(x as u64);
        }
        let h = &self.params.hyper;
        w.u8(h.activation.code());
        w.u8(self.ablation.bits());
        w.scalars(&[h.alpha, h.beta, h.lambda_u, h.lambda_t]);
        w.f64(self.time_unit);
        w.f64(self.train_end);

        w.u32(TENSOR_NAMES.len() as u32);
        let shapes = self.params.tensors.shapes();
        for ((name, (rows, cols)), data) in TENSOR_NAMES.iter().zip(shapes).zip(self.params.tensors.slices()) {
            w.str(name);
            w.u64(rows as u64);
            w.u64(cols as u64);
            w.scalars(data);
        }

        for state in self.states.students.iter().chain(&self.states.threads) {
            match state.last_update {
                Some(t) => {
                    w.u8(1);
                    w.f64(t);
                }
                None => w.u8(0),
            }
            w.scalars(&state.embedding);
        }
        for (&thread, &week) in self.states.last_thread.iter().zip(&self.states.last_week) {
            w.opt_index(thread);
            w.opt_index(week);
        }
        w.0
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let tag = r.str()?;
        if tag != T::TAG {
            return Err(Error::Checkpoint(format!("stored scalar type {tag}, requested {}", T::TAG)));
        }
        let dims = Dims {
            d: r.usize()?,
            k: r.usize()?,
            s: r.usize()?,
            m: r.usize()?,
            n: r.usize()?,
        };
        dims.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
        let activation = Activation::from_code(r.u8()?)
            .ok_or_else(|| Error::Checkpoint("unknown activation code".into()))?;
        let ablation = Ablation::from_bits(r.u8()?)
            .ok_or_else(|| Error::Checkpoint("unknown ablation bits".into()))?;
        let hyper = Hyper {
            alpha: r.scalar()?,
            beta: r.scalar()?,
            lambda_u: r.scalar()?,
            lambda_t: r.scalar()?,
            activation,
        };
        let time_unit = r.f64()?;
        let train_end = r.f64()?;

        let count = r.u32()? as usize;
        if count != TENSOR_NAMES.len() {
            return Err(Error::Checkpoint(format!("expected {} tensors, found {count}", TENSOR_NAMES.len())));
        }
        let mut tensors = Tensors::<T>::zeros(&dims);
        let shapes = tensors.shapes();
        for ((name, shape), data) in TENSOR_NAMES.iter().zip(shapes).zip(tensors.slices_mut()) {
            let stored = r.str()?;
            let stored_shape = (r.usize()?, r.usize()?);
            if stored != *name || stored_shape != shape {
                return Err(Error::Checkpoint(format!(
                    "tensor {stored} {stored_shape:?} does not match {name} {shape:?}"
                )));
            }
            r.scalars(data)?;
        }

        let mut states = EntityStates::new(dims.m, dims.n, dims.d);
        for state in states.students.iter_mut().chain(states.threads.iter_mut()) {
            *state = DynamicState {
                last_update: match r.u8()? {
                    0 => None,
                    1 => Some(r.f64()?),
                    other => return Err(Error::Checkpoint(format!("bad state flag {other}"))),
                },
                embedding: vec![T::zero(); dims.d],
            };
            r.scalars(&mut state.embedding)?;
        }
        for i in 0..dims.m {
            states.last_thread[i] = r.opt_index(dims.n)?;
            states.last_week[i] = r.opt_index(dims.s)?;
        }
        if r.pos != buf.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", buf.len() - r.pos)));
        }
        Ok(Checkpoint {
            params: ModelParams { dims, tensors, hyper },
            time_unit,
            train_end,
            ablation,
            states,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }
}
