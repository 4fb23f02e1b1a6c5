use ndarray::{Array1, Array2};

use super::nn::{Layer, Network};
use super::TrainerConfig;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SWCK";
const VERSION: u32 = 1;

/// Resumable training state: weights, optimizer moments, step and epoch
/// counters.
///
/// The byte form is little-endian: magic `SWCK`, version `u32`, epochs
/// `u32`, step `u64`, layer count `u32`, then for each layer its shape
/// (`u32` rows, `u32` cols) followed by weights, bias, first moments and
/// second moments as raw `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub first_moment: Vec<Layer>,
    pub second_moment: Vec<Layer>,
    pub step: u64,
    pub epochs: u32,
}

impl Checkpoint {
    pub fn fresh(network: Network) -> Self {
        Self {
            first_moment: network.zeros_like(),
            second_moment: network.zeros_like(),
            network,
            step: 0,
            epochs: 0,
        }
    }

    pub(crate) fn check_compatible(&self, inputs: usize, cfg: &TrainerConfig) -> Result<()> {
        let net = &self.network;
        if net.input_width() != inputs
            || net.hidden_layers() != cfg.num_layers
            || net.layers[0].bias.len() != cfg.hidden_units
        {
            return Err(Error::Checkpoint("checkpoint shape does not match the configuration".into()));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.epochs.to_le_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&(self.network.layers.len() as u32).to_le_bytes());
        for (l, layer) in self.network.layers.iter().enumerate() {
            let (r, c) = layer.weights.dim();
            out.extend_from_slice(&(r as u32).to_le_bytes());
            out.extend_from_slice(&(c as u32).to_le_bytes());
            for part in [layer, &self.first_moment[l], &self.second_moment[l]] {
                for v in part.weights.iter().chain(part.bias.iter()) {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let epochs = r.u32()?;
        let step = r.u64()?;
        let n = r.u32()? as usize;
        let (mut layers, mut m1, mut m2) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..n {
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            for dst in [&mut layers, &mut m1, &mut m2] {
                let w = r.f64s(rows * cols)?;
                let b = r.f64s(cols)?;
                dst.push(Layer {
                    weights: Array2::from_shape_vec((rows, cols), w).expect("sized"),
                    bias: Array1::from(b),
                });
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        if layers.len() < 2 || layers.windows(2).any(|w| w[0].weights.ncols() != w[1].weights.nrows()) {
            return Err(Error::Checkpoint("layer shapes do not chain".into()));
        }
        Ok(Self {
            network: Network { layers },
            first_moment: m1,
            second_moment: m2,
            step,
            epochs,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}
