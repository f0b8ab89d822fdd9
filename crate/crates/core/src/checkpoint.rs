//! Binary checkpoints: named f64 tensors behind a fixed magic, written via
//! temp file + rename so a reader never sees a half-written checkpoint.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{FeatureClassifier, ACCURACY_FLOOR};
use crate::models::{build_lenet_classifier, GanPair};
use crate::rng::rng_from;
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"XGAN1";

/// Layout after the magic: u32 entry count, then per entry a u32-length
/// UTF-8 name, u32 rank, u32 dims, and the row-major f64 payload. All
/// integers and floats little-endian.
pub fn write_entries(path: &Path, entries: &[(String, &Tensor<f64>)]) -> Result<()> {
    let mut buf = Vec::with_capacity(64);
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&u32::try_from(entries.len()).expect("entry count").to_le_bytes());
    for (name, tensor) in entries {
        let bytes = name.as_bytes();
        buf.extend_from_slice(&u32::try_from(bytes.len()).expect("name length").to_le_bytes());
        buf.extend_from_slice(bytes);
        buf.extend_from_slice(&u32::try_from(tensor.rank()).expect("rank").to_le_bytes());
        for &d in tensor.shape() {
            buf.extend_from_slice(&u32::try_from(d).expect("dim").to_le_bytes());
        }
        for &v in tensor.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&buf)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    source: String,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Truncated {
                source_name: self.source.clone(),
                needed: n,
                found: self.bytes.len() - self.pos,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("four bytes")))
    }
}

pub fn read_entries(path: &Path) -> Result<BTreeMap<String, Tensor<f64>>> {
    let bytes = fs::read(path)?;
    let mut c = Cursor { bytes: &bytes, pos: 0, source: path.display().to_string() };

    let magic = c.take(CHECKPOINT_MAGIC.len())?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!(
            "{} is not a checkpoint: magic {:?}, expected {:?}",
            c.source,
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(CHECKPOINT_MAGIC),
        )));
    }

    let count = c.u32()? as usize;
    let mut out = BTreeMap::new();
    for _ in 0..count {
        let name_len = c.u32()? as usize;
        let name = String::from_utf8(c.take(name_len)?.to_vec())
            .map_err(|_| Error::Format(format!("non-UTF-8 entry name in {}", c.source)))?;
        let rank = c.u32()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(c.u32()? as usize);
        }
        let len: usize = shape.iter().product();
        let raw = c.take(len * 8)?;
        let data = raw
            .chunks_exact(8)
            .map(|ch| f64::from_le_bytes(ch.try_into().expect("eight bytes")))
            .collect();
        let tensor = Tensor::new(shape, data)?;
        if out.insert(name.clone(), tensor).is_some() {
            return Err(Error::Format(format!("duplicate entry {name} in {}", c.source)));
        }
    }
    if c.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} has {} trailing bytes after the last entry",
            c.source,
            bytes.len() - c.pos
        )));
    }
    Ok(out)
}

fn meta(value: f64) -> Tensor<f64> {
    Tensor::new(vec![1], vec![value]).expect("scalar meta entry")
}

fn read_meta(entries: &mut BTreeMap<String, Tensor<f64>>, key: &str, source: &Path) -> Result<f64> {
    let t = entries
        .remove(key)
        .ok_or_else(|| Error::Format(format!("{} lacks entry {key}", source.display())))?;
    Ok(t.data()[0])
}

/// Both networks' full state plus the shape metadata needed for sanity
/// checks at load time.
pub fn save_gan(path: &Path, pair: &GanPair<f64>) -> Result<()> {
    let mut entries: Vec<(String, &Tensor<f64>)> = Vec::new();
    let nd = meta(pair.noise_dim as f64);
    let (c, h, w) = pair.image_shape;
    let shape = Tensor::new(vec![3], vec![c as f64, h as f64, w as f64])?;
    for (name, t) in pair.generator.state() {
        entries.push((format!("generator/{name}"), t));
    }
    for (name, t) in pair.discriminator.state() {
        entries.push((format!("discriminator/{name}"), t));
    }
    entries.push(("meta/noise_dim".into(), &nd));
    entries.push(("meta/image_shape".into(), &shape));
    write_entries(path, &entries)
}

/// Restores into an already-built pair of the same architecture.
pub fn load_gan(path: &Path, pair: &mut GanPair<f64>) -> Result<()> {
    let mut entries = read_entries(path)?;
    let noise_dim = read_meta(&mut entries, "meta/noise_dim", path)? as usize;
    if noise_dim != pair.noise_dim {
        return Err(Error::Format(format!(
            "checkpoint {} was trained with noise_dim {noise_dim}, pair expects {}",
            path.display(),
            pair.noise_dim
        )));
    }
    entries.remove("meta/image_shape");

    let mut g = BTreeMap::new();
    let mut d = BTreeMap::new();
    for (name, t) in entries {
        if let Some(rest) = name.strip_prefix("generator/") {
            g.insert(rest.to_string(), t);
        } else if let Some(rest) = name.strip_prefix("discriminator/") {
            d.insert(rest.to_string(), t);
        } else {
            return Err(Error::Format(format!("unexpected entry {name} in {}", path.display())));
        }
    }
    pair.generator.load_state(&mut g)?;
    pair.discriminator.load_state(&mut d)?;
    Ok(())
}

pub fn save_classifier(path: &Path, clf: &FeatureClassifier) -> Result<()> {
    let mut entries: Vec<(String, &Tensor<f64>)> = Vec::new();
    let acc = meta(clf.holdout_accuracy);
    let classes = meta(clf.model.num_classes as f64);
    let channels = meta(clf.model.channels as f64);
    for (name, t) in clf.model.network.state() {
        entries.push((format!("classifier/{name}"), t));
    }
    entries.push(("meta/holdout_accuracy".into(), &acc));
    entries.push(("meta/num_classes".into(), &classes));
    entries.push(("meta/channels".into(), &channels));
    write_entries(path, &entries)
}

/// Rebuilds the classifier from its own metadata; no architecture inputs.
pub fn load_classifier(path: &Path) -> Result<FeatureClassifier> {
    let mut entries = read_entries(path)?;
    let holdout_accuracy = read_meta(&mut entries, "meta/holdout_accuracy", path)?;
    let num_classes = read_meta(&mut entries, "meta/num_classes", path)? as usize;
    let channels = read_meta(&mut entries, "meta/channels", path)? as usize;

    let mut state = BTreeMap::new();
    for (name, t) in entries {
        match name.strip_prefix("classifier/") {
            Some(rest) => {
                state.insert(rest.to_string(), t);
            }
            None => {
                return Err(Error::Format(format!("unexpected entry {name} in {}", path.display())))
            }
        }
    }
    let mut model = build_lenet_classifier(channels, num_classes, &mut rng_from(0));
    model.network.load_state(&mut state)?;
    Ok(FeatureClassifier {
        model,
        holdout_accuracy,
        low_accuracy_warning: holdout_accuracy < ACCURACY_FLOOR,
    })
}
