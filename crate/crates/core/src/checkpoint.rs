//! Self-describing binary checkpoint format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic            8 bytes  "TEMPORA1"
//! version          u32      currently 1
//! model kind       u8       0 = TRBM, 1 = CRBM
//! visible kind     u8       0 = binary, 1 = Gaussian
//! training phase   u8       0 fresh / 1 static / 2 autoencoded / 3 joint
//! flags            u8       bit 0: supervised baseline (deterministic eval only)
//! order            u32      temporal order T
//! tensor count     u32
//! tensor section   name_len u16, name bytes, ndim u8, dims u64 each, f64 data
//! ```
//!
//! Tensors appear in a fixed order (`W`, `B_VIS`, `B_HID`, `SIGMA2`, then
//! `W_DELAY_1..T` and, for the CRBM, `P_DELAY_1..T`), so saving is a pure
//! function of the model and a load/save round trip is byte-identical.

use crate::error::{Error, Result};
use crate::rbm::{RbmParams, UnitKind};
use crate::ta::TrainingPhase;
use crate::temporal::{CrbmParams, ModelKind, TemporalModel, TrbmParams};
use ndarray::{Array1, Array2};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 8] = b"TEMPORA1";
pub const VERSION: u32 = 1;

/// A trained (or partially trained) model plus the bookkeeping needed to
/// resume or evaluate it safely.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: TemporalModel,
    pub phase: TrainingPhase,
    /// Set when the parameters come from the supervised baseline; such
    /// models were never trained by contrastive divergence and only support
    /// deterministic evaluation.
    pub mlp_baseline: bool,
}

fn phase_code(phase: TrainingPhase) -> u8 {
    match phase {
        TrainingPhase::Fresh => 0,
        TrainingPhase::StaticDone => 1,
        TrainingPhase::TaDone => 2,
        TrainingPhase::JointDone => 3,
    }
}

fn phase_from_code(code: u8) -> Result<TrainingPhase> {
    Ok(match code {
        0 => TrainingPhase::Fresh,
        1 => TrainingPhase::StaticDone,
        2 => TrainingPhase::TaDone,
        3 => TrainingPhase::JointDone,
        other => {
            return Err(Error::Checkpoint(format!(
                "unknown training phase code {other}"
            )))
        }
    })
}

fn write_tensor<W: Write>(w: &mut W, name: &str, dims: &[u64], data: &[f64]) -> Result<()> {
    w.write_all(&(name.len() as u16).to_le_bytes())?;
    w.write_all(name.as_bytes())?;
    w.write_all(&[dims.len() as u8])?;
    for d in dims {
        w.write_all(&d.to_le_bytes())?;
    }
    for x in data {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn write_vec<W: Write>(w: &mut W, name: &str, a: &Array1<f64>) -> Result<()> {
    let data: Vec<f64> = a.iter().copied().collect();
    write_tensor(w, name, &[a.len() as u64], &data)
}

fn write_mat<W: Write>(w: &mut W, name: &str, a: &Array2<f64>) -> Result<()> {
    let data: Vec<f64> = a.iter().copied().collect();
    write_tensor(w, name, &[a.nrows() as u64, a.ncols() as u64], &data)
}

struct TensorReader<'a, R: Read> {
    inner: &'a mut R,
}

impl<'a, R: Read> TensorReader<'a, R> {
    fn read_exact_buf(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.inner.read_exact(&mut buf)?;
        Ok(buf)
    }

    fn next(&mut self, expected_name: &str) -> Result<(Vec<u64>, Vec<f64>)> {
        let name_len = u16::from_le_bytes(self.read_exact_buf(2)?.try_into().unwrap()) as usize;
        let name_bytes = self.read_exact_buf(name_len)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
        if name != expected_name {
            return Err(Error::Checkpoint(format!(
                "expected tensor '{expected_name}', found '{name}'"
            )));
        }
        let ndim = self.read_exact_buf(1)?[0] as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(u64::from_le_bytes(
                self.read_exact_buf(8)?.try_into().unwrap(),
            ));
        }
        let count = dims.iter().product::<u64>() as usize;
        let raw = self.read_exact_buf(count * 8)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok((dims, data))
    }

    fn vec(&mut self, name: &str) -> Result<Array1<f64>> {
        let (dims, data) = self.next(name)?;
        if dims.len() != 1 {
            return Err(Error::Checkpoint(format!(
                "tensor '{name}' should be one-dimensional"
            )));
        }
        Ok(Array1::from_vec(data))
    }

    fn mat(&mut self, name: &str) -> Result<Array2<f64>> {
        let (dims, data) = self.next(name)?;
        if dims.len() != 2 {
            return Err(Error::Checkpoint(format!(
                "tensor '{name}' should be two-dimensional"
            )));
        }
        Array2::from_shape_vec((dims[0] as usize, dims[1] as usize), data)
            .map_err(|e| Error::Checkpoint(format!("tensor '{name}': {e}")))
    }
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let model = &self.model;
        let base = model.base();
        let order = model.order() as u32;
        let kind_code = match model.kind() {
            ModelKind::Trbm => 0u8,
            ModelKind::Crbm => 1u8,
        };
        let visible_code = match base.visible_kind {
            UnitKind::Binary => 0u8,
            UnitKind::Gaussian => 1u8,
        };
        let flags = u8::from(self.mlp_baseline);
        let tensor_count = match model {
            TemporalModel::Trbm(_) => 4 + order,
            TemporalModel::Crbm(_) => 4 + 2 * order,
        };

        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[kind_code, visible_code, phase_code(self.phase), flags])?;
        w.write_all(&order.to_le_bytes())?;
        w.write_all(&tensor_count.to_le_bytes())?;

        write_mat(w, "W", &base.weights)?;
        write_vec(w, "B_VIS", &base.visible_bias)?;
        write_vec(w, "B_HID", &base.hidden_bias)?;
        write_vec(w, "SIGMA2", &base.visible_variance)?;
        match model {
            TemporalModel::Trbm(m) => {
                for (d, mat) in m.delayed_hidden.iter().enumerate() {
                    write_mat(w, &format!("W_DELAY_{}", d + 1), mat)?;
                }
            }
            TemporalModel::Crbm(m) => {
                for (d, mat) in m.delayed_to_hidden.iter().enumerate() {
                    write_mat(w, &format!("W_DELAY_{}", d + 1), mat)?;
                }
                for (d, mat) in m.delayed_to_visible.iter().enumerate() {
                    write_mat(w, &format!("P_DELAY_{}", d + 1), mat)?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint(
                "bad magic: not a model checkpoint".into(),
            ));
        }
        let mut version = [0u8; 4];
        r.read_exact(&mut version)?;
        let version = u32::from_le_bytes(version);
        if version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version} (this build reads {VERSION})"
            )));
        }
        let mut head = [0u8; 4];
        r.read_exact(&mut head)?;
        let kind = match head[0] {
            0 => ModelKind::Trbm,
            1 => ModelKind::Crbm,
            other => {
                return Err(Error::Checkpoint(format!("unknown model kind {other}")));
            }
        };
        let visible_kind = match head[1] {
            0 => UnitKind::Binary,
            1 => UnitKind::Gaussian,
            other => {
                return Err(Error::Checkpoint(format!("unknown unit kind {other}")));
            }
        };
        let phase = phase_from_code(head[2])?;
        if head[3] & !1 != 0 {
            return Err(Error::Checkpoint(format!("unknown flags {:#x}", head[3])));
        }
        let mlp_baseline = head[3] & 1 != 0;
        let mut word = [0u8; 4];
        r.read_exact(&mut word)?;
        let order = u32::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let tensor_count = u32::from_le_bytes(word);
        let expected_count = match kind {
            ModelKind::Trbm => 4 + order as u32,
            ModelKind::Crbm => 4 + 2 * order as u32,
        };
        if tensor_count != expected_count {
            return Err(Error::Checkpoint(format!(
                "expected {expected_count} tensors for this kind and order, header says {tensor_count}"
            )));
        }

        let mut tr = TensorReader { inner: r };
        let weights = tr.mat("W")?;
        let visible_bias = tr.vec("B_VIS")?;
        let hidden_bias = tr.vec("B_HID")?;
        let visible_variance = tr.vec("SIGMA2")?;
        let base = RbmParams {
            weights,
            visible_bias,
            hidden_bias,
            visible_variance,
            visible_kind,
        };
        base.validate()?;

        let model = match kind {
            ModelKind::Trbm => {
                let mut m = TrbmParams::from_static(base, order);
                for d in 1..=order {
                    m.delayed_hidden[d - 1] = tr.mat(&format!("W_DELAY_{d}"))?;
                }
                m.validate()?;
                TemporalModel::Trbm(m)
            }
            ModelKind::Crbm => {
                let mut m = CrbmParams::from_static(base, order);
                for d in 1..=order {
                    m.delayed_to_hidden[d - 1] = tr.mat(&format!("W_DELAY_{d}"))?;
                }
                for d in 1..=order {
                    m.delayed_to_visible[d - 1] = tr.mat(&format!("P_DELAY_{d}"))?;
                }
                m.validate()?;
                TemporalModel::Crbm(m)
            }
        };
        Ok(Checkpoint {
            model,
            phase,
            mlp_baseline,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = bytes;
        let ckpt = Self::read_from(&mut cursor)?;
        if !cursor.is_empty() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes after the last tensor",
                cursor.len()
            )));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let ckpt = Self::read_from(&mut r)?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Checkpoint(
                "trailing bytes after the last tensor".into(),
            ));
        }
        Ok(ckpt)
    }

    /// Human-readable metadata block (no timestamps, so output is stable).
    pub fn summary(&self) -> String {
        let model = &self.model;
        let base = model.base();
        let kind_line = match base.visible_kind {
            UnitKind::Binary => "binary",
            UnitKind::Gaussian => "gaussian",
        };
        format!(
            "model: {}\nvisible_units: {} ({kind_line})\nhidden_units: {}\norder: {}\nphase: {}\nbaseline: {}\nparameters: {}\n",
            model.kind(),
            base.n_visible(),
            base.n_hidden(),
            model.order(),
            self.phase,
            self.mlp_baseline,
            parameter_total(model),
        )
    }
}

fn parameter_total(model: &TemporalModel) -> usize {
    let base = model.base();
    let static_count = base.weights.len() + base.visible_bias.len() + base.hidden_bias.len();
    let delayed: usize = match model {
        TemporalModel::Trbm(m) => m.delayed_hidden.iter().map(|w| w.len()).sum(),
        TemporalModel::Crbm(m) => m
            .delayed_to_hidden
            .iter()
            .chain(m.delayed_to_visible.iter())
            .map(|w| w.len())
            .sum(),
    };
    static_count + delayed
}
