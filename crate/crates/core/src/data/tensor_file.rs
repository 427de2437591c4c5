use std::path::Path;

use super::binary::{put_tensor, read_file, write_file, Reader};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const TENSOR_MAGIC: &[u8; 4] = b"FTNS";

pub fn encode_tensor(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * t.shape().len() + 8 * t.len());
    out.extend_from_slice(TENSOR_MAGIC);
    put_tensor(&mut out, t);
    out
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor> {
    let mut r = Reader::new(bytes, "tensor file");
    if r.take(4).ok() != Some(TENSOR_MAGIC.as_slice()) {
        return Err(Error::Format("tensor file: bad magic".into()));
    }
    let t = r.tensor()?;
    r.finish()?;
    Ok(t)
}

pub fn write_tensor(path: &Path, t: &Tensor) -> Result<()> {
    write_file(path, &encode_tensor(t))
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    decode_tensor(&read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_tensor_round_trips_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..16 * 32 * 32).map(|_| rng.random::<f64>() * 1e3 - 5e2).collect();
        let t = Tensor::from_vec(vec![16, 32, 32], data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.ftns");
        write_tensor(&p, &t).unwrap();
        let back = read_tensor(&p).unwrap();
        assert_eq!(back.shape(), t.shape());
        assert!(back
            .data()
            .iter()
            .zip(t.data())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(encode_tensor(&back), std::fs::read(&p).unwrap());
    }

    #[test]
    fn malformed_headers_are_rejected() {
        let good = encode_tensor(&Tensor::full(&[2, 3], 1.5));
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode_tensor(&bad_magic), Err(Error::Format(_))));

        let mut zero_dim = good.clone();
        zero_dim[8..12].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(decode_tensor(&zero_dim), Err(Error::Format(_))));

        let mut rank0 = TENSOR_MAGIC.to_vec();
        rank0.extend_from_slice(&0u32.to_le_bytes());
        assert!(matches!(decode_tensor(&rank0), Err(Error::Format(_))));

        assert!(matches!(decode_tensor(&good[..good.len() - 3]), Err(Error::Format(_))));
        let mut long = good.clone();
        long.push(0);
        assert!(matches!(decode_tensor(&long), Err(Error::Format(_))));
        let mut huge = good;
        huge[8..12].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(decode_tensor(&huge), Err(Error::Format(_))));
    }
}
