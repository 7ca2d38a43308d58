//! Trained-model file format.
//!
//! ```text
//! "AIRW" | u32 version=1 | u32 p | u32 C | p*C f32, little-endian,
//! one class column at a time
//! ```
//!
//! Weights are stored as f32, matching the feature format; reloading a
//! saved model reproduces its bytes exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use air_core::{AirError, Result, Weights};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;

const MODEL_MAGIC: &[u8; 4] = b"AIRW";
const MODEL_VERSION: u32 = 1;

pub fn save_model(path: &Path, w: &Weights) -> Result<()> {
    let (p, c) = w.dim();
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MODEL_MAGIC)?;
    out.write_u32::<LittleEndian>(MODEL_VERSION)?;
    out.write_u32::<LittleEndian>(p as u32)?;
    out.write_u32::<LittleEndian>(c as u32)?;
    for class in 0..c {
        for j in 0..p {
            out.write_f32::<LittleEndian>(w[[j, class]] as f32)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Weights> {
    let display = path.display().to_string();
    let file = File::open(path)?;
    let file_len = file.metadata()?.len();
    let mut input = BufReader::new(file);

    let mut magic = [0u8; 4];
    input
        .read_exact(&mut magic)
        .map_err(|_| AirError::Truncated {
            path: display.clone(),
            detail: "missing magic".into(),
        })?;
    if &magic != MODEL_MAGIC {
        return Err(AirError::WrongMagic {
            path: display,
            expected: String::from_utf8_lossy(MODEL_MAGIC).into_owned(),
            found: format!("{magic:?}"),
        });
    }
    let version = input.read_u32::<LittleEndian>()?;
    if version != MODEL_VERSION {
        return Err(AirError::InvalidInput(format!(
            "{display}: unsupported model version {version}"
        )));
    }
    let p = input.read_u32::<LittleEndian>()? as usize;
    let c = input.read_u32::<LittleEndian>()? as usize;
    if p == 0 || c == 0 {
        return Err(AirError::InvalidInput(format!(
            "{display}: degenerate model shape {p} x {c}"
        )));
    }
    let total = p.checked_mul(c).ok_or_else(|| {
        AirError::InvalidInput(format!("{display}: model shape {p} x {c} overflows"))
    })?;
    let expected_len = 16 + 4 * total as u64;
    if file_len < expected_len {
        return Err(AirError::Truncated {
            path: display,
            detail: format!("header promises {expected_len} bytes, file has {file_len}"),
        });
    }

    let mut w = Array2::<f64>::zeros((p, c));
    for class in 0..c {
        for j in 0..p {
            w[[j, class]] = input.read_f32::<LittleEndian>()? as f64;
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    struct TempDir(std::path::PathBuf);

    impl TempDir {
        fn new(tag: &str) -> Self {
            let dir = std::env::temp_dir().join(format!("air-model-{tag}-{}", std::process::id()));
            fs::create_dir_all(&dir).unwrap();
            TempDir(dir)
        }

        fn path(&self, name: &str) -> std::path::PathBuf {
            self.0.join(name)
        }
    }

    impl Drop for TempDir {
        fn drop(&mut self) {
            let _ = fs::remove_dir_all(&self.0);
        }
    }

    #[test]
    fn model_round_trips_bitwise() {
        let dir = TempDir::new("round");
        let w = Array2::from_shape_fn((5, 3), |(j, c)| (j as f64 - 2.0) * 0.25 + c as f64);
        let path = dir.path("m.airw");
        save_model(&path, &w).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, w);

        let rewritten = dir.path("m2.airw");
        save_model(&rewritten, &back).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&rewritten).unwrap());
    }

    #[test]
    fn wrong_magic_is_reported() {
        let dir = TempDir::new("magic");
        let path = dir.path("bad.airw");
        fs::write(&path, b"AIRFxxxxxxxxxxxxxxxx").unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(matches!(err, AirError::WrongMagic { .. }), "{err}");
    }

    #[test]
    fn truncated_payload_is_reported() {
        let dir = TempDir::new("trunc");
        let w = Array2::from_elem((4, 2), 1.0);
        let path = dir.path("m.airw");
        save_model(&path, &w).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        let err = load_model(&path).unwrap_err();
        assert!(matches!(err, AirError::Truncated { .. }), "{err}");
    }
}
