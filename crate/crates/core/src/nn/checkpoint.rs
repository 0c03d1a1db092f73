//! Checkpoint files: a plain-text manifest followed by raw little-endian
//! `f64` values.
//!
//! ```text
//! hqcnn-checkpoint v1
//! tensors <count>
//! <name> <d0>x<d1>x…        (one line per tensor, in storage order)
//! data
//! <Σ prod(dims) × 8 bytes>
//! ```

use std::fs;
use std::path::Path;

use super::tensor::Tensor;
use crate::error::{Error, Result};

const MAGIC: &str = "hqcnn-checkpoint v1";

pub fn encode(tensors: &[(&str, &Tensor)]) -> Vec<u8> {
    let mut header = format!("{MAGIC}\ntensors {}\n", tensors.len());
    for (name, t) in tensors {
        let dims: Vec<String> = t.shape().iter().map(ToString::to_string).collect();
        header.push_str(&format!("{name} {}\n", dims.join("x")));
    }
    header.push_str("data\n");
    let mut bytes = header.into_bytes();
    for (_, t) in tensors {
        for v in &t.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    bytes
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Vec<(String, Tensor)>> {
    let err = |line: usize, msg: String| Error::Format { path: path.to_path_buf(), line, msg };
    let mut pos = 0;
    let mut next_line = |line_no: usize| -> Result<&str> {
        let rest = &bytes[pos..];
        let end = rest.iter().position(|&b| b == b'\n').ok_or_else(|| err(line_no, "truncated header".into()))?;
        pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| err(line_no, "header is not UTF-8".into()))
    };
    if next_line(1)? != MAGIC {
        return Err(err(1, format!("expected '{MAGIC}'")));
    }
    let count: usize = next_line(2)?
        .strip_prefix("tensors ")
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| err(2, "expected 'tensors <count>'".into()))?;
    let mut manifest = Vec::with_capacity(count);
    for i in 0..count {
        let line_no = 3 + i;
        let line = next_line(line_no)?;
        let (name, dims) = line.split_once(' ').ok_or_else(|| err(line_no, "expected '<name> <dims>'".into()))?;
        let shape = dims
            .split('x')
            .map(|d| d.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| err(line_no, format!("bad dimensions '{dims}'")))?;
        manifest.push((name.to_string(), shape));
    }
    if next_line(3 + count)? != "data" {
        return Err(err(3 + count, "expected 'data'".into()));
    }
    let body = &bytes[pos..];
    let total: usize = manifest.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
    if body.len() != total * 8 {
        return Err(err(4 + count, format!("expected {} data bytes, found {}", total * 8, body.len())));
    }
    let mut values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    manifest
        .into_iter()
        .map(|(name, shape)| {
            let n = shape.iter().product();
            let data: Vec<f64> = values.by_ref().take(n).collect();
            Ok((name, Tensor::new(shape, data)?))
        })
        .collect()
}

pub fn save(path: &Path, tensors: &[(&str, &Tensor)]) -> Result<()> {
    fs::write(path, encode(tensors)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let a = Tensor::new(vec![2, 3], vec![0.1, -2.5, f64::MIN_POSITIVE, 1e300, -0.0, 7.0]).unwrap();
        let b = Tensor::new(vec![4], vec![std::f64::consts::PI; 4]).unwrap();
        let bytes = encode(&[("conv1.weight", &a), ("q", &b)]);
        let back = decode(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back[0].0, "conv1.weight");
        assert_eq!(back[0].1, a);
        assert_eq!(back[1].1.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn corrupt_inputs_report_line() {
        let good = encode(&[("w", &Tensor::zeros(vec![2]))]);
        let truncated = &good[..good.len() - 3];
        assert!(matches!(decode(truncated, Path::new("m")), Err(Error::Format { line: 5, .. })));
        let bad_magic = b"nope\n";
        assert!(matches!(decode(bad_magic, Path::new("m")), Err(Error::Format { line: 1, .. })));
        let bad_dims = b"hqcnn-checkpoint v1\ntensors 1\nw 2xq\ndata\n";
        assert!(matches!(decode(bad_dims, Path::new("m")), Err(Error::Format { line: 3, .. })));
    }
}
