//! Binary model container. All integers are little-endian `u32`, all reals
//! little-endian IEEE-754 `f64`:
//!
//! ```text
//! magic        8 bytes  "P2FDMODL"
//! version      u32      1
//! input        u32
//! n_hidden     u32
//! hidden       u32 x n_hidden
//! output       u32
//! dropout      u32 after-layer (0 = none), f64 rate
//! residual     u32 from, u32 into (0, 0 = none)
//! mean, std    f64 x input each
//! classes      f64 x output
//! layers       for each hidden layer then the output layer:
//!              weights f64 x (in * out), row-major (in, out); bias f64 x out
//! ```
//!
//! The file ends exactly after the last bias.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::model::{Architecture, Dense, DistanceModel, Dropout, Normalization, Residual};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 8] = b"P2FDMODL";
pub const MODEL_VERSION: u32 = 1;

/// Upper bound on any single dimension, to reject corrupt headers before
/// allocating.
const MAX_DIM: u32 = 1 << 16;

pub fn write_model(model: &DistanceModel, out: &mut impl Write) -> Result<()> {
    if !model.is_initialized() {
        return Err(Error::UninitializedModel);
    }
    let a = &model.arch;
    out.write_all(MODEL_MAGIC)?;
    put_u32(out, MODEL_VERSION)?;
    put_u32(out, a.input as u32)?;
    put_u32(out, a.hidden.len() as u32)?;
    for &w in &a.hidden {
        put_u32(out, w as u32)?;
    }
    put_u32(out, a.output as u32)?;
    let (after, rate) = a.dropout.map_or((0, 0.0), |d| (d.after as u32, d.rate));
    put_u32(out, after)?;
    put_f64(out, rate)?;
    let (from, into) = a.residual.map_or((0, 0), |r| (r.from as u32, r.into as u32));
    put_u32(out, from)?;
    put_u32(out, into)?;
    for v in model.norm.mean.iter().chain(&model.norm.std).chain(&model.classes) {
        put_f64(out, *v)?;
    }
    for layer in &model.layers {
        for v in layer.weights.iter().chain(layer.bias.iter()) {
            put_f64(out, *v)?;
        }
    }
    Ok(())
}

pub fn read_model(input: &mut impl Read) -> Result<DistanceModel> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MODEL_MAGIC {
        return Err(Error::ModelFormat("bad magic".into()));
    }
    let version = get_u32(input)?;
    if version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!("unsupported version {version}")));
    }
    let input_dim = get_dim(input)?;
    let n_hidden = get_dim(input)?;
    let hidden = (0..n_hidden).map(|_| get_dim(input)).collect::<Result<Vec<_>>>()?;
    let output = get_dim(input)?;
    let after = get_u32(input)? as usize;
    let rate = get_f64(input)?;
    let from = get_u32(input)? as usize;
    let into = get_u32(input)? as usize;
    let arch = Architecture {
        input: input_dim,
        hidden,
        output,
        dropout: (after != 0).then_some(Dropout { after, rate }),
        residual: (from != 0 || into != 0).then_some(Residual { from, into }),
    };
    arch.validate()?;
    let mean = get_vec(input, input_dim)?;
    let std = get_vec(input, input_dim)?;
    let classes = get_vec(input, output)?;

    let mut widths = vec![arch.input];
    widths.extend(&arch.hidden);
    widths.push(arch.output);
    let mut layers = Vec::with_capacity(widths.len() - 1);
    for pair in widths.windows(2) {
        let (i, o) = (pair[0], pair[1]);
        let weights = Array2::from_shape_vec((i, o), get_vec(input, i * o)?)
            .map_err(|e| Error::ModelFormat(e.to_string()))?;
        let bias = Array1::from_vec(get_vec(input, o)?);
        layers.push(Dense { weights, bias });
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(Error::ModelFormat("trailing bytes after last layer".into()));
    }
    Ok(DistanceModel {
        arch,
        layers,
        norm: Normalization { mean, std },
        classes,
    })
}

impl DistanceModel {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write_model(self, &mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_model(&mut BufReader::new(File::open(path)?))
    }
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::ModelFormat("file truncated".into())
    } else {
        Error::Io(e)
    }
}

fn put_u32(out: &mut impl Write, v: u32) -> Result<()> {
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64(out: &mut impl Write, v: f64) -> Result<()> {
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u32(input: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn get_dim(input: &mut impl Read) -> Result<usize> {
    let v = get_u32(input)?;
    if v > MAX_DIM {
        return Err(Error::ModelFormat(format!("dimension {v} too large")));
    }
    Ok(v as usize)
}

fn get_f64(input: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b).map_err(truncated)?;
    Ok(f64::from_le_bytes(b))
}

fn get_vec(input: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| get_f64(input)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut m = DistanceModel::initialize(Architecture::with_hidden(vec![5, 5, 5, 5]), 11).unwrap();
        m.norm.mean[2] = 3.25;
        m.norm.std[0] = 0.5;
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        assert_eq!(&buf[..8], MODEL_MAGIC);
        let back = read_model(&mut buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_corruption() {
        let m = DistanceModel::initialize(Architecture::with_hidden(vec![3, 3]), 1).unwrap();
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_model(&mut bad.as_slice()), Err(Error::ModelFormat(_))));

        let short = &buf[..buf.len() - 3];
        assert!(matches!(read_model(&mut &short[..]), Err(Error::ModelFormat(_))));

        let mut long = buf.clone();
        long.push(0);
        assert!(matches!(read_model(&mut long.as_slice()), Err(Error::ModelFormat(_))));

        let mut version = buf;
        version[8] = 9;
        assert!(matches!(read_model(&mut version.as_slice()), Err(Error::ModelFormat(_))));
    }

    #[test]
    fn refuses_to_write_uninitialized() {
        let mut buf = Vec::new();
        assert!(matches!(
            write_model(&DistanceModel::default(), &mut buf),
            Err(Error::UninitializedModel)
        ));
    }
}
