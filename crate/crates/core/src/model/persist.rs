//! Single-file model format.
//!
//! A text manifest followed by raw tensor data:
//!
//! ```text
//! UCRMODEL 1
//! byte_order little
//! scalar f64
//! kind gru
//! n_items 1682
//! dim 100
//! window 50
//! trained 1
//! tensors 11
//! tensor item_embedding 1682 100
//! tensor w_z 100 100
//! ...
//! end
//! <tensor data, manifest order, row-major, f64 little-endian>
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{schema, Dims, ScorerKind, ScorerParams};
use crate::linalg::Matrix;
use crate::{Error, Result};

pub const MAGIC: &str = "UCRMODEL";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_model(params: &ScorerParams, mut w: impl Write) -> Result<()> {
    let dims = params.dims();
    writeln!(w, "{MAGIC} {FORMAT_VERSION}")?;
    writeln!(w, "byte_order little")?;
    writeln!(w, "scalar f64")?;
    writeln!(w, "kind {}", params.kind())?;
    writeln!(w, "n_items {}", dims.n_items)?;
    writeln!(w, "dim {}", dims.dim)?;
    writeln!(w, "window {}", dims.window)?;
    writeln!(w, "trained {}", u8::from(params.is_trained()))?;
    writeln!(w, "tensors {}", params.tensors().len())?;
    for (name, t) in params.tensor_names().iter().zip(params.tensors()) {
        writeln!(w, "tensor {name} {} {}", t.rows, t.cols)?;
    }
    writeln!(w, "end")?;
    for t in params.tensors() {
        let mut buf = Vec::with_capacity(t.data.len() * 8);
        for v in &t.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

fn header_line(r: &mut impl BufRead) -> Result<Vec<String>> {
    let mut line = String::new();
    if r.read_line(&mut line)? == 0 {
        return Err(Error::Format("unexpected end of manifest".into()));
    }
    Ok(line.split_whitespace().map(str::to_owned).collect())
}

fn keyed<T: std::str::FromStr>(r: &mut impl BufRead, key: &str) -> Result<T> {
    let parts = header_line(r)?;
    match parts.as_slice() {
        [k, v] if k == key => v
            .parse()
            .map_err(|_| Error::Format(format!("bad value for {key}: {v:?}"))),
        _ => Err(Error::Format(format!("expected `{key} <value>`, got {parts:?}"))),
    }
}

pub fn read_model(r: impl Read) -> Result<ScorerParams> {
    let mut r = BufReader::new(r);
    let magic = header_line(&mut r)?;
    match magic.as_slice() {
        [m, v] if m == MAGIC => {
            let version: u32 = v.parse().map_err(|_| Error::Format("bad format version".into()))?;
            if version != FORMAT_VERSION {
                return Err(Error::Format(format!("unsupported format version {version}")));
            }
        }
        _ => return Err(Error::Format("not a model file".into())),
    }
    let order: String = keyed(&mut r, "byte_order")?;
    if order != "little" {
        return Err(Error::Format(format!("unsupported byte order {order}")));
    }
    let scalar: String = keyed(&mut r, "scalar")?;
    if scalar != "f64" {
        return Err(Error::Format(format!("unsupported scalar type {scalar}")));
    }
    let kind: String = keyed(&mut r, "kind")?;
    let kind: ScorerKind = kind.parse().map_err(|_| Error::Format(format!("unknown kind {kind}")))?;
    let dims = Dims {
        n_items: keyed(&mut r, "n_items")?,
        dim: keyed(&mut r, "dim")?,
        window: keyed(&mut r, "window")?,
    };
    let trained: u8 = keyed(&mut r, "trained")?;
    let count: usize = keyed(&mut r, "tensors")?;
    let expected = schema(kind, dims);
    if count != expected.len() {
        return Err(Error::Format(format!("{kind} expects {} tensors, manifest lists {count}", expected.len())));
    }
    let mut shapes = Vec::with_capacity(count);
    for spec in &expected {
        let parts = header_line(&mut r)?;
        match parts.as_slice() {
            [t, name, rows, cols] if t == "tensor" => {
                let rows: usize = rows.parse().map_err(|_| Error::Format("bad tensor rows".into()))?;
                let cols: usize = cols.parse().map_err(|_| Error::Format("bad tensor cols".into()))?;
                if name != spec.name || rows != spec.rows || cols != spec.cols {
                    return Err(Error::Format(format!(
                        "tensor {name} {rows}x{cols} does not match expected {} {}x{}",
                        spec.name, spec.rows, spec.cols
                    )));
                }
                shapes.push((rows, cols));
            }
            _ => return Err(Error::Format(format!("bad tensor line {parts:?}"))),
        }
    }
    if header_line(&mut r)? != ["end"] {
        return Err(Error::Format("missing manifest terminator".into()));
    }
    let mut tensors = Vec::with_capacity(count);
    for (rows, cols) in shapes {
        let mut bytes = vec![0u8; rows * cols * 8];
        r.read_exact(&mut bytes)
            .map_err(|_| Error::Format("truncated tensor data".into()))?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        tensors.push(Matrix::from_vec(rows, cols, data));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format("trailing bytes after tensor data".into()));
    }
    ScorerParams::from_tensors(kind, dims, tensors, trained == 1)
}

pub fn save(params: &ScorerParams, path: &Path) -> Result<()> {
    let f = File::create(path)?;
    write_model(params, BufWriter::new(f))
}

pub fn load(path: &Path) -> Result<ScorerParams> {
    read_model(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn params(kind: ScorerKind) -> ScorerParams {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let dims = Dims {
            n_items: 7,
            dim: 4,
            window: 5,
        };
        ScorerParams::init(kind, dims, &mut rng)
    }

    #[test]
    fn round_trip_is_bit_identical() {
        for kind in [ScorerKind::Gru, ScorerKind::Attention, ScorerKind::Pooling] {
            let p = params(kind);
            let mut buf = Vec::new();
            write_model(&p, &mut buf).unwrap();
            let q = read_model(buf.as_slice()).unwrap();
            assert_eq!(p, q);
            let mut again = Vec::new();
            write_model(&q, &mut again).unwrap();
            assert_eq!(buf, again);
        }
    }

    #[test]
    fn manifest_is_plain_text() {
        let mut buf = Vec::new();
        write_model(&params(ScorerKind::Gru), &mut buf).unwrap();
        let text = String::from_utf8_lossy(&buf[..200]);
        assert!(text.starts_with("UCRMODEL 1\nbyte_order little\nscalar f64\nkind gru\n"));
        assert!(text.contains("tensor item_embedding 7 4\n"));
    }

    #[test]
    fn rejects_truncated_and_foreign_files() {
        let mut buf = Vec::new();
        write_model(&params(ScorerKind::Pooling), &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_model(buf.as_slice()), Err(Error::Format(_))));
        assert!(matches!(read_model(&b"hello\n"[..]), Err(Error::Format(_))));
    }
}
