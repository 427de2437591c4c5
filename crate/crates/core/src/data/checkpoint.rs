//! `SPCK` checkpoint files: named tensors plus a `key=value` trailer.

use std::collections::BTreeMap;
use std::path::Path;

use super::binary::{put_tensor, put_u32, read_file, write_file, Reader};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SPCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    /// Tensors in file order.
    pub tensors: Vec<(String, Tensor)>,
    /// Hyperparameters and run state, sorted by key on disk.
    pub meta: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::Format(format!("checkpoint has no tensor '{name}'")))
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Format(format!("checkpoint has no '{key}' entry")))
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = CHECKPOINT_MAGIC.to_vec();
        put_u32(&mut out, CHECKPOINT_VERSION);
        put_u32(&mut out, self.tensors.len() as u32);
        for (name, t) in &self.tensors {
            put_u32(&mut out, name.len() as u32);
            out.extend_from_slice(name.as_bytes());
            put_tensor(&mut out, t);
        }
        let trailer: String = self.meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        put_u32(&mut out, trailer.len() as u32);
        out.extend_from_slice(trailer.as_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "checkpoint");
        if r.take(4).ok() != Some(CHECKPOINT_MAGIC.as_slice()) {
            return Err(Error::Format("checkpoint: bad magic".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!(
                "checkpoint: version {version}, this build reads {CHECKPOINT_VERSION}"
            )));
        }
        let count = r.u32()?;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Format("checkpoint: tensor name is not UTF-8".into()))?
                .to_string();
            tensors.push((name, r.tensor()?));
        }
        let len = r.u32()? as usize;
        let text =
            std::str::from_utf8(r.take(len)?).map_err(|_| Error::Format("checkpoint: trailer is not UTF-8".into()))?;
        r.finish()?;
        let mut meta = BTreeMap::new();
        for line in text.lines() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("checkpoint: bad trailer line '{line}'")))?;
            meta.insert(k.to_string(), v.to_string());
        }
        Ok(Self { tensors, meta })
    }
}

pub fn write_checkpoint(path: &Path, c: &Checkpoint) -> Result<()> {
    write_file(path, &c.encode())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::decode(&read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut meta = BTreeMap::new();
        meta.insert("step".into(), "12".into());
        meta.insert("model.th".into(), "0.7".into());
        Checkpoint {
            tensors: vec![
                (
                    "a".into(),
                    Tensor::from_vec(vec![2, 2], vec![0.1, -0.0, f64::MIN_POSITIVE, 3e300]).unwrap(),
                ),
                ("lstm.0.rho".into(), Tensor::full(&[3], -4.0)),
            ],
            meta,
        }
    }

    #[test]
    fn save_load_save_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.spck");
        let c = sample();
        write_checkpoint(&p, &c).unwrap();
        let back = read_checkpoint(&p).unwrap();
        assert_eq!(back.encode(), std::fs::read(&p).unwrap());
        assert_eq!(back.meta("step").unwrap(), "12");
        assert_eq!(back.tensor("a").unwrap().data()[1].to_bits(), (-0.0f64).to_bits());
        assert!(back.tensor("missing").is_err());
    }

    #[test]
    fn version_and_corruption_are_rejected() {
        let bytes = sample().encode();
        let mut v2 = bytes.clone();
        v2[4..8].copy_from_slice(&2u32.to_le_bytes());
        let err = Checkpoint::decode(&v2).unwrap_err();
        assert!(err.to_string().contains("version"));
        for cut in [3, 10, 20, bytes.len() - 1] {
            assert!(
                matches!(Checkpoint::decode(&bytes[..cut]), Err(Error::Format(_))),
                "cut {cut}"
            );
        }
    }
}
