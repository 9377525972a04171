//! Model checkpoint.
//!
//! Header: magic `AOPFCKPT`, version, layer sizes, init and shuffle seeds,
//! input mode, config digest, input and output scalers, one output head per
//! output (tag 0 bounded `lo hi`, tag 1 affine `mean std`). Then the Adam
//! step count and both moment blocks, then the parameters. Parameter blocks
//! follow the network's flat order: per layer, the row-major
//! `outputs × inputs` weights followed by the biases.

use augopf_core::digest::Digest;
use augopf_core::inference::InputMode;
use augopf_core::nn::{AdamState, Layer, Mlp, MlpModel, OutputHead};

use super::codec::{Reader, Writer};
use super::FormatError;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"AOPFCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: MlpModel,
    pub mode: InputMode,
    pub shuffle_seed: u64,
    pub config_digest: Digest,
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let m = &ck.model;
    let mut w = Writer::new(CHECKPOINT_MAGIC, CHECKPOINT_VERSION);
    w.u64(m.net.sizes.len() as u64);
    m.net.sizes.iter().for_each(|&s| w.u64(s as u64));
    w.u64(m.init_seed);
    w.u64(ck.shuffle_seed);
    w.u8(match ck.mode {
        InputMode::LoadOnly => 0,
        InputMode::Augmented => 1,
    });
    w.bytes(&ck.config_digest.0);
    w.scaler(&m.input_scaler);
    w.scaler(&m.output_scaler);
    w.u64(m.heads.len() as u64);
    for h in &m.heads {
        let (tag, a, b) = match *h {
            OutputHead::Bounded { lo, hi } => (0, lo, hi),
            OutputHead::Affine { mean, std } => (1, mean, std),
        };
        w.u8(tag);
        w.f64(a);
        w.f64(b);
    }
    w.u64(m.adam.step);
    w.f64s(&m.adam.m);
    w.f64s(&m.adam.v);
    w.f64s(&m.net.params());
    w.finish()
}

/// Decodes a checkpoint; with `expected` set, a different layer shape is an
/// error naming both shapes.
pub fn decode_checkpoint(bytes: &[u8], expected: Option<&[usize]>) -> Result<Checkpoint, FormatError> {
    let mut r = Reader::open(bytes, CHECKPOINT_MAGIC, "checkpoint", CHECKPOINT_VERSION)?;
    let n_sizes = r.usize()?;
    if n_sizes > 1 << 16 {
        return Err(FormatError::Invalid {
            field: "layer count",
            detail: n_sizes.to_string(),
        });
    }
    let sizes = (0..n_sizes).map(|_| r.usize()).collect::<Result<Vec<_>, _>>()?;
    if let Some(e) = expected {
        if e != sizes.as_slice() {
            return Err(FormatError::ShapeMismatch {
                expected: e.to_vec(),
                found: sizes,
            });
        }
    }
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(FormatError::Invalid {
            field: "layer sizes",
            detail: format!("{sizes:?}"),
        });
    }
    let init_seed = r.u64()?;
    let shuffle_seed = r.u64()?;
    let mode = match r.u8()? {
        0 => InputMode::LoadOnly,
        1 => InputMode::Augmented,
        t => {
            return Err(FormatError::Invalid {
                field: "input mode",
                detail: t.to_string(),
            })
        }
    };
    let config_digest = Digest(r.array()?);
    let input_scaler = r.scaler()?;
    let output_scaler = r.scaler()?;
    let n_heads = r.usize()?;
    let d_out = sizes[sizes.len() - 1];
    if input_scaler.len() != sizes[0] || output_scaler.len() != d_out || n_heads != d_out {
        return Err(FormatError::Invalid {
            field: "scalers",
            detail: String::from("dimensions disagree with the layer sizes"),
        });
    }
    let heads = (0..n_heads)
        .map(|_| {
            let tag = r.u8()?;
            let (a, b) = (r.f64()?, r.f64()?);
            match tag {
                0 => Ok(OutputHead::Bounded { lo: a, hi: b }),
                1 => Ok(OutputHead::Affine { mean: a, std: b }),
                t => Err(FormatError::Invalid {
                    field: "head",
                    detail: t.to_string(),
                }),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n_params: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    let step = r.u64()?;
    let adam = AdamState {
        m: r.f64s(n_params)?,
        v: r.f64s(n_params)?,
        step,
    };
    let params = r.f64s(n_params)?;
    r.end()?;
    let mut at = 0;
    let layers = sizes
        .windows(2)
        .map(|w| {
            let (inputs, outputs) = (w[0], w[1]);
            let weights = params[at..at + inputs * outputs].to_vec();
            at += inputs * outputs;
            let biases = params[at..at + outputs].to_vec();
            at += outputs;
            Layer {
                inputs,
                outputs,
                weights,
                biases,
            }
        })
        .collect();
    Ok(Checkpoint {
        model: MlpModel {
            net: Mlp { sizes, layers },
            input_scaler,
            output_scaler,
            heads,
            init_seed,
            adam,
        },
        mode,
        shuffle_seed,
        config_digest,
    })
}
