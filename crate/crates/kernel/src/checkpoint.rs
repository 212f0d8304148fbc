//! Flat binary parameter checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "ECOPARAM"
//! version  u32
//! count    u32
//! count x { name_len u32, name utf-8, ndim u32, dims u64 x ndim }
//! raw f64 values of every entry, in table order
//! ```

use crate::error::KernelError;
use crate::params::Parameterized;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ECOPARAM";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub entries: Vec<CheckpointEntry>,
}

fn corrupt(msg: impl Into<String>) -> KernelError {
    KernelError::Checkpoint(msg.into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], KernelError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| corrupt("unexpected end of data"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, KernelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, KernelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

impl Checkpoint {
    /// Snapshots a model, prefixing every entry name with `prefix`.
    pub fn from_model<P: Parameterized>(prefix: &str, model: &P) -> Self {
        let mut c = Checkpoint::default();
        c.append(prefix, model);
        c
    }

    pub fn append<P: Parameterized>(&mut self, prefix: &str, model: &P) {
        model.visit(prefix, &mut |name, shape, data| {
            self.entries.push(CheckpointEntry {
                name: name.to_string(),
                shape: shape.to_vec(),
                data: data.to_vec(),
            })
        });
    }

    /// Copies the entries named under `prefix` into `model`, checking names
    /// and shapes against the model's own layout.
    pub fn load_into<P: Parameterized>(
        &self,
        prefix: &str,
        model: &mut P,
    ) -> Result<(), KernelError> {
        let layout = {
            let mut v = Vec::new();
            model.visit(prefix, &mut |n, s, _| v.push((n.to_string(), s.to_vec())));
            v
        };
        let mut flat = Vec::with_capacity(model.num_params());
        for (name, shape) in &layout {
            let e = self
                .entries
                .iter()
                .find(|e| &e.name == name)
                .ok_or_else(|| corrupt(format!("missing entry {name}")))?;
            if &e.shape != shape {
                return Err(corrupt(format!(
                    "entry {name}: shape {:?}, model expects {shape:?}",
                    e.shape
                )));
            }
            flat.extend_from_slice(&e.data);
        }
        model.assign_flat(&flat);
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for e in &self.entries {
            out.extend_from_slice(&(e.name.len() as u32).to_le_bytes());
            out.extend_from_slice(e.name.as_bytes());
            out.extend_from_slice(&(e.shape.len() as u32).to_le_bytes());
            for &d in &e.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
        }
        for e in &self.entries {
            for v in &e.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, KernelError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(corrupt(format!("unsupported version {version}")));
        }
        let count = r.u32()? as usize;
        let mut table = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| corrupt("entry name is not utf-8"))?
                .to_string();
            let ndim = r.u32()? as usize;
            let shape = (0..ndim)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>, _>>()?;
            table.push((name, shape));
        }
        let mut entries = Vec::with_capacity(table.len());
        for (name, shape) in table {
            let n: usize = shape.iter().product();
            let raw = r.take(n.checked_mul(8).ok_or_else(|| corrupt("entry too large"))?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            entries.push(CheckpointEntry { name, shape, data });
        }
        if r.pos != bytes.len() {
            return Err(corrupt("trailing bytes"));
        }
        Ok(Checkpoint { entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{Activation, Mlp};
    use crate::gru::GruCell;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn model_round_trip_is_byte_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mlp = Mlp::new(4, &[5, 2], Activation::ReLU, Activation::Identity, &mut rng);
        let gru = GruCell::new(3, 4, &mut rng);
        let mut c = Checkpoint::from_model("head", &mlp);
        c.append("cell", &gru);
        let bytes = c.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);

        let mut mlp2 = mlp.zeros_like();
        let mut gru2 = gru.zeros_like();
        back.load_into("head", &mut mlp2).unwrap();
        back.load_into("cell", &mut gru2).unwrap();
        assert_eq!(mlp2, mlp);
        assert_eq!(gru2, gru);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let small = Mlp::new(4, &[5, 2], Activation::ReLU, Activation::Identity, &mut rng);
        let mut big = Mlp::new(4, &[6, 2], Activation::ReLU, Activation::Identity, &mut rng);
        let c = Checkpoint::from_model("m", &small);
        assert!(matches!(
            c.load_into("m", &mut big),
            Err(KernelError::Checkpoint(_))
        ));
    }

    #[test]
    fn truncated_and_garbage_inputs_rejected() {
        assert!(Checkpoint::from_bytes(b"nope").is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mlp = Mlp::new(2, &[2], Activation::ReLU, Activation::Identity, &mut rng);
        let bytes = Checkpoint::from_model("m", &mlp).to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
    }

    proptest! {
        #[test]
        fn arbitrary_values_survive_bitwise(values in prop::collection::vec(any::<f64>(), 0..50)) {
            let c = Checkpoint {
                entries: vec![CheckpointEntry { name: "x".into(), shape: vec![values.len()], data: values.clone() }],
            };
            let back = Checkpoint::from_bytes(&c.to_bytes()).unwrap();
            let bits: Vec<u64> = back.entries[0].data.iter().map(|v| v.to_bits()).collect();
            let expect: Vec<u64> = values.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(bits, expect);
        }
    }
}
