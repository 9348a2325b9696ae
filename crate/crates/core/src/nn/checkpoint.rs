//! Flat binary model checkpoints.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic    4 bytes  "FCRF"
//! version  u32      1
//! count    u32      number of layer widths (encoder + decoder)
//! widths   u32 * count
//! per layer, in order:
//!   weights  f64 * (fan_in * fan_out), row-major (fan_in, fan_out)
//!   biases   f64 * fan_out
//! ```

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};

use super::{Model, NnError};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"FCRF";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(model: &Model, mut out: W) -> Result<(), NnError> {
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;
    out.write_u32::<LittleEndian>(model.layer_sizes().len() as u32)?;
    for &w in model.layer_sizes() {
        out.write_u32::<LittleEndian>(w as u32)?;
    }
    for (w, b) in model.weights().iter().zip(model.biases()) {
        for &v in w.iter() {
            out.write_f64::<LittleEndian>(v)?;
        }
        for &v in b.iter() {
            out.write_f64::<LittleEndian>(v)?;
        }
    }
    Ok(())
}

fn truncated(field: &'static str) -> impl FnOnce(std::io::Error) -> NnError {
    move |e| NnError::Checkpoint {
        field,
        detail: format!("truncated ({e})"),
    }
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Model, NnError> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic).map_err(truncated("magic"))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(NnError::Checkpoint {
            field: "magic",
            detail: format!("expected FCRF, found {magic:?}"),
        });
    }
    let version = input.read_u32::<LittleEndian>().map_err(truncated("version"))?;
    if version != CHECKPOINT_VERSION {
        return Err(NnError::Checkpoint {
            field: "version",
            detail: format!("unsupported version {version}"),
        });
    }
    let count = input.read_u32::<LittleEndian>().map_err(truncated("layer count"))? as usize;
    if !(2..=64).contains(&count) {
        return Err(NnError::Checkpoint {
            field: "layer count",
            detail: format!("implausible layer count {count}"),
        });
    }
    let mut sizes = Vec::with_capacity(count);
    for _ in 0..count {
        sizes.push(input.read_u32::<LittleEndian>().map_err(truncated("layer widths"))? as usize);
    }
    let mut weights = Vec::with_capacity(count - 1);
    let mut biases = Vec::with_capacity(count - 1);
    for pair in sizes.windows(2) {
        let mut w = vec![0.0; pair[0] * pair[1]];
        input
            .read_f64_into::<LittleEndian>(&mut w)
            .map_err(truncated("weights"))?;
        let mut b = vec![0.0; pair[1]];
        input
            .read_f64_into::<LittleEndian>(&mut b)
            .map_err(truncated("biases"))?;
        weights.push(Array2::from_shape_vec((pair[0], pair[1]), w).expect("sized above"));
        biases.push(Array1::from_vec(b));
    }
    Model::from_parameters(sizes, weights, biases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_model;

    #[test]
    fn roundtrip_is_exact() {
        let m = init_model(&[10, 6, 3], 42).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&m, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"FCRF");
        assert_eq!(buf.len(), 4 + 4 + 4 + 5 * 4 + 8 * m.parameter_count());
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn bad_magic_and_truncation_are_reported() {
        let m = init_model(&[4, 2], 0).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&m, &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(
            read_checkpoint(bad.as_slice()),
            Err(NnError::Checkpoint { field: "magic", .. })
        ));
        let short = &buf[..buf.len() - 3];
        assert!(matches!(
            read_checkpoint(short),
            Err(NnError::Checkpoint { field: "biases", .. })
        ));
    }
}
