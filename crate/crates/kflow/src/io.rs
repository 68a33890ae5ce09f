//! File formats: `KFT1` single tensors and `KFC1` named-payload containers.
//!
//! `KFT1`: 4 magic bytes "KFT1", a u32 little-endian header length, a UTF-8
//! JSON header `{"dtype":"f32","shape":[...],"order":"row-major"}`, then the
//! raw little-endian f32 payload.
//!
//! `KFC1`: 4 magic bytes "KFC1", a u32 little-endian manifest length, a JSON
//! manifest mapping entry names to `(offset, length, dtype, shape)` (offsets
//! relative to the payload region, lengths in bytes), the concatenated
//! payloads, and a trailing u32 little-endian CRC32 of the payload region.
//! Manifest keys are sorted, and payloads are laid out in key order, so a
//! container's bytes are a pure function of its contents.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Tensor;

pub const TENSOR_MAGIC: &[u8; 4] = b"KFT1";
pub const CONTAINER_MAGIC: &[u8; 4] = b"KFC1";

#[derive(Debug, Serialize, Deserialize)]
struct TensorHeader {
    dtype: String,
    shape: Vec<usize>,
    order: String,
}

/// Writes a tensor as a `KFT1` file (f32 storage precision).
pub fn tensor_write(path: &Path, tensor: &Tensor) -> Result<()> {
    if tensor.is_empty() {
        return Err(Error::invalid("refusing to write an empty tensor"));
    }
    let header = TensorHeader {
        dtype: "f32".to_string(),
        shape: tensor.shape().to_vec(),
        order: "row-major".to_string(),
    };
    let header_bytes = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(8 + header_bytes.len() + 4 * tensor.len());
    out.extend_from_slice(TENSOR_MAGIC);
    out.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    for &v in tensor.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    atomic_write(path, &out)
}

/// Reads a `KFT1` tensor file.
pub fn tensor_read(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path)?;
    if bytes.len() < 8 {
        return Err(Error::format(format!(
            "{}: truncated before the header",
            path.display()
        )));
    }
    if &bytes[..4] != TENSOR_MAGIC {
        return Err(Error::format(format!(
            "{}: bad magic {:?}, expected tensor format KFT1",
            path.display(),
            &bytes[..4]
        )));
    }
    let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if bytes.len() < 8 + header_len {
        return Err(Error::format(format!("{}: truncated header", path.display())));
    }
    let header: TensorHeader = serde_json::from_slice(&bytes[8..8 + header_len])
        .map_err(|e| Error::format(format!("{}: bad header: {e}", path.display())))?;
    if header.dtype != "f32" {
        return Err(Error::format(format!(
            "{}: unsupported dtype {:?}",
            path.display(),
            header.dtype
        )));
    }
    if header.order != "row-major" {
        return Err(Error::format(format!(
            "{}: unsupported order {:?}",
            path.display(),
            header.order
        )));
    }
    let n: usize = header.shape.iter().product();
    if header.shape.contains(&0) || header.shape.is_empty() {
        return Err(Error::format(format!(
            "{}: empty tensors are not allowed (shape {:?})",
            path.display(),
            header.shape
        )));
    }
    let payload = &bytes[8 + header_len..];
    if payload.len() != 4 * n {
        return Err(Error::format(format!(
            "{}: payload holds {} bytes, shape {:?} needs {}",
            path.display(),
            payload.len(),
            header.shape,
            4 * n
        )));
    }
    let data: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Tensor::new(header.shape, data)
}

/// Supported payload element types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
    U8,
}

impl Dtype {
    fn elem_bytes(&self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
            Dtype::U8 => 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EntryMeta {
    pub offset: u64,
    pub length: u64,
    pub dtype: Dtype,
    pub shape: Vec<usize>,
}

/// Builder for a `KFC1` container.
#[derive(Debug, Default)]
pub struct ContainerWriter {
    entries: BTreeMap<String, (Dtype, Vec<usize>, Vec<u8>)>,
}

impl ContainerWriter {
    pub fn new() -> Self {
        ContainerWriter::default()
    }

    pub fn put_f64(&mut self, name: &str, shape: Vec<usize>, values: &[f64]) -> Result<()> {
        self.check_entry(name, &shape, values.len())?;
        let mut bytes = Vec::with_capacity(8 * values.len());
        for &v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        self.entries.insert(name.to_string(), (Dtype::F64, shape, bytes));
        Ok(())
    }

    pub fn put_f32(&mut self, name: &str, shape: Vec<usize>, values: &[f64]) -> Result<()> {
        self.check_entry(name, &shape, values.len())?;
        let mut bytes = Vec::with_capacity(4 * values.len());
        for &v in values {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        self.entries.insert(name.to_string(), (Dtype::F32, shape, bytes));
        Ok(())
    }

    pub fn put_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let bytes = serde_json::to_vec(value)
            .map_err(|e| Error::format(format!("entry {name}: {e}")))?;
        let len = bytes.len();
        self.entries.insert(name.to_string(), (Dtype::U8, vec![len], bytes));
        Ok(())
    }

    fn check_entry(&self, name: &str, shape: &[usize], len: usize) -> Result<()> {
        let n: usize = shape.iter().product();
        if shape.is_empty() || n != len {
            return Err(Error::shape(format!(
                "entry {name}: shape {shape:?} does not describe {len} values"
            )));
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut manifest: BTreeMap<String, EntryMeta> = BTreeMap::new();
        let mut payload: Vec<u8> = Vec::new();
        for (name, (dtype, shape, bytes)) in &self.entries {
            manifest.insert(
                name.clone(),
                EntryMeta {
                    offset: payload.len() as u64,
                    length: bytes.len() as u64,
                    dtype: *dtype,
                    shape: shape.clone(),
                },
            );
            payload.extend_from_slice(bytes);
        }
        let manifest_bytes = serde_json::to_vec(&manifest).expect("manifest serializes");
        let mut out =
            Vec::with_capacity(12 + manifest_bytes.len() + payload.len());
        out.extend_from_slice(CONTAINER_MAGIC);
        out.extend_from_slice(&(manifest_bytes.len() as u32).to_le_bytes());
        out.extend_from_slice(&manifest_bytes);
        out.extend_from_slice(&payload);
        out.extend_from_slice(&crc32(&payload).to_le_bytes());
        atomic_write(path, &out)
    }
}

/// A parsed `KFC1` container.
#[derive(Debug)]
pub struct Container {
    manifest: BTreeMap<String, EntryMeta>,
    payload: Vec<u8>,
}

impl Container {
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        if bytes.len() < 12 {
            return Err(Error::format(format!("{}: truncated", path.display())));
        }
        if &bytes[..4] != CONTAINER_MAGIC {
            return Err(Error::format(format!(
                "{}: bad magic {:?}, expected container format KFC1",
                path.display(),
                String::from_utf8_lossy(&bytes[..4])
            )));
        }
        let manifest_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        if bytes.len() < 8 + manifest_len + 4 {
            return Err(Error::format(format!("{}: truncated manifest", path.display())));
        }
        let manifest: BTreeMap<String, EntryMeta> =
            serde_json::from_slice(&bytes[8..8 + manifest_len])
                .map_err(|e| Error::format(format!("{}: bad manifest: {e}", path.display())))?;
        let payload = &bytes[8 + manifest_len..bytes.len() - 4];
        let stored_crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
        let actual_crc = crc32(payload);
        if stored_crc != actual_crc {
            return Err(Error::format(format!(
                "{}: payload CRC32 mismatch (stored {stored_crc:#010x}, computed {actual_crc:#010x})",
                path.display()
            )));
        }
        for (name, meta) in &manifest {
            let end = meta.offset.checked_add(meta.length);
            if end.is_none() || end.unwrap() as usize > payload.len() {
                return Err(Error::format(format!(
                    "{}: entry {name} extends past the payload",
                    path.display()
                )));
            }
            let n: usize = meta.shape.iter().product();
            if n * meta.dtype.elem_bytes() != meta.length as usize {
                return Err(Error::format(format!(
                    "{}: entry {name} shape {:?} disagrees with its length",
                    path.display(),
                    meta.shape
                )));
            }
        }
        Ok(Container {
            manifest,
            payload: payload.to_vec(),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.manifest.keys().map(|s| s.as_str())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.manifest.contains_key(name)
    }

    fn entry(&self, name: &str) -> Result<(&EntryMeta, &[u8])> {
        let meta = self
            .manifest
            .get(name)
            .ok_or_else(|| Error::format(format!("container entry {name} missing")))?;
        let bytes = &self.payload[meta.offset as usize..(meta.offset + meta.length) as usize];
        Ok((meta, bytes))
    }

    pub fn shape(&self, name: &str) -> Result<Vec<usize>> {
        Ok(self.entry(name)?.0.shape.clone())
    }

    /// Numeric entry as f64 values regardless of storage precision.
    pub fn floats(&self, name: &str) -> Result<(Vec<usize>, Vec<f64>)> {
        let (meta, bytes) = self.entry(name)?;
        let values = match meta.dtype {
            Dtype::F64 => bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
            Dtype::F32 => bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
            Dtype::U8 => {
                return Err(Error::format(format!("entry {name} holds bytes, not floats")))
            }
        };
        Ok((meta.shape.clone(), values))
    }

    pub fn json<T: for<'de> Deserialize<'de>>(&self, name: &str) -> Result<T> {
        let (meta, bytes) = self.entry(name)?;
        if meta.dtype != Dtype::U8 {
            return Err(Error::format(format!("entry {name} is not a JSON blob")));
        }
        serde_json::from_slice(bytes)
            .map_err(|e| Error::format(format!("entry {name}: bad JSON: {e}")))
    }
}

/// Write-to-temp-then-rename so readers never observe a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|s| s.to_string_lossy()).unwrap_or_default()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// IEEE CRC32 (reflected, polynomial 0xEDB88320).
pub fn crc32(bytes: &[u8]) -> u32 {
    let mut table = [0u32; 256];
    for (i, t) in table.iter_mut().enumerate() {
        let mut c = i as u32;
        for _ in 0..8 {
            c = if c & 1 != 0 { 0xEDB8_8320 ^ (c >> 1) } else { c >> 1 };
        }
        *t = c;
    }
    let mut crc = 0xFFFF_FFFFu32;
    for &b in bytes {
        crc = table[((crc ^ b as u32) & 0xFF) as usize] ^ (crc >> 8);
    }
    crc ^ 0xFFFF_FFFF
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::SeededRng;

    #[test]
    fn crc32_known_vector() {
        assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
        assert_eq!(crc32(b""), 0);
    }

    #[test]
    fn tensor_round_trip_at_f32_precision() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.kft");
        let mut rng = SeededRng::new(1, 0);
        let t = rng.randn(&[3, 5]).unwrap();
        tensor_write(&path, &t).unwrap();
        let back = tensor_read(&path).unwrap();
        assert_eq!(back.shape(), t.shape());
        for (a, b) in back.data().iter().zip(t.data()) {
            assert_eq!(*a, *b as f32 as f64, "exact at f32 precision");
        }
    }

    #[test]
    fn tensor_bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.kft");
        std::fs::write(&path, b"XXXX\x00\x00\x00\x00").unwrap();
        let err = tensor_read(&path).unwrap_err();
        assert!(err.to_string().contains("magic"), "{err}");
    }

    #[test]
    fn tensor_truncation_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.kft");
        let t = Tensor::from_vec(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        tensor_write(&path, &t).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(tensor_read(&path).is_err());
    }

    #[test]
    fn zero_shape_file_rejected_on_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.kft");
        let header = br#"{"dtype":"f32","shape":[0],"order":"row-major"}"#;
        let mut bytes = Vec::new();
        bytes.extend_from_slice(TENSOR_MAGIC);
        bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
        bytes.extend_from_slice(header);
        std::fs::write(&path, &bytes).unwrap();
        let err = tensor_read(&path).unwrap_err();
        assert!(err.to_string().contains("empty"), "{err}");
    }

    #[test]
    fn container_round_trip_and_integrity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.kfc");
        let mut w = ContainerWriter::new();
        w.put_f64("model/w", vec![2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        w.put_f32("data/x", vec![4], &[0.5, -0.5, 1.5, 2.5]).unwrap();
        w.put_json("meta", &serde_json::json!({"version": 1})).unwrap();
        w.write(&path).unwrap();

        let c = Container::read(&path).unwrap();
        let (shape, vals) = c.floats("model/w").unwrap();
        assert_eq!(shape, vec![2, 3]);
        assert_eq!(vals, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let (_, vals) = c.floats("data/x").unwrap();
        assert_eq!(vals, vec![0.5, -0.5, 1.5, 2.5]);
        let meta: serde_json::Value = c.json("meta").unwrap();
        assert_eq!(meta["version"], 1);

        // Corrupt one payload byte: the CRC must catch it.
        let mut bytes = std::fs::read(&path).unwrap();
        let flip = bytes.len() - 10;
        bytes[flip] ^= 0x01;
        std::fs::write(&path, &bytes).unwrap();
        let err = Container::read(&path).unwrap_err();
        assert!(err.to_string().contains("CRC32"), "{err}");
    }

    #[test]
    fn container_version_bump_rejected_with_expected_name() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v2.kfc");
        let mut w = ContainerWriter::new();
        w.put_f64("x", vec![1], &[1.0]).unwrap();
        w.write(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[3] = b'2'; // KFC1 -> KFC2
        std::fs::write(&path, &bytes).unwrap();
        let err = Container::read(&path).unwrap_err();
        assert!(err.to_string().contains("KFC1"), "error names the expected version: {err}");
    }

    #[test]
    fn container_bytes_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.kfc");
        let b = dir.path().join("b.kfc");
        for path in [&a, &b] {
            let mut w = ContainerWriter::new();
            // Insertion order differs; bytes must not.
            if path == &a {
                w.put_f64("z", vec![1], &[9.0]).unwrap();
                w.put_f64("a", vec![1], &[1.0]).unwrap();
            } else {
                w.put_f64("a", vec![1], &[1.0]).unwrap();
                w.put_f64("z", vec![1], &[9.0]).unwrap();
            }
            w.write(path).unwrap();
        }
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
}
