//! Self-describing binary checkpoints: config, vocabulary, epoch counters,
//! and every named parameter with its optimizer moments, all in
//! little-endian f64 so a save/load cycle is bit-exact.

use std::fmt;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::config::Config;
use crate::data::Vocabulary;
use crate::model::{build_groups, ModelParams, ParamGroup};
use crate::optim::Adam;
use crate::rng::{stream, Purpose};

const MAGIC: &[u8; 8] = b"DKSCKPT1";

#[derive(Debug)]
pub enum CheckpointError {
    Io(String),
    Format(String),
    Mismatch(String),
}

impl fmt::Display for CheckpointError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckpointError::Io(m) => write!(f, "checkpoint io error: {m}"),
            CheckpointError::Format(m) => write!(f, "malformed checkpoint: {m}"),
            CheckpointError::Mismatch(m) => write!(f, "checkpoint mismatch: {m}"),
        }
    }
}

impl std::error::Error for CheckpointError {}

fn io_err(e: std::io::Error) -> CheckpointError {
    CheckpointError::Io(e.to_string())
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<(), CheckpointError> {
    w.write_all(&v.to_le_bytes()).map_err(io_err)
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<(), CheckpointError> {
    write_u64(w, s.len() as u64)?;
    w.write_all(s.as_bytes()).map_err(io_err)
}

fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> Result<(), CheckpointError> {
    write_u64(w, values.len() as u64)?;
    for v in values {
        w.write_all(&v.to_le_bytes()).map_err(io_err)?;
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, CheckpointError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(io_err)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_str<R: Read>(r: &mut R) -> Result<String, CheckpointError> {
    let len = read_u64(r)? as usize;
    if len > 1 << 30 {
        return Err(CheckpointError::Format(format!("string length {len} is implausible")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(io_err)?;
    String::from_utf8(buf).map_err(|e| CheckpointError::Format(e.to_string()))
}

fn read_f64s<R: Read>(r: &mut R) -> Result<Vec<f64>, CheckpointError> {
    let len = read_u64(r)? as usize;
    if len > 1 << 28 {
        return Err(CheckpointError::Format(format!("array length {len} is implausible")));
    }
    let mut out = Vec::with_capacity(len);
    let mut buf = [0u8; 8];
    for _ in 0..len {
        r.read_exact(&mut buf).map_err(io_err)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

pub fn save_checkpoint(
    path: &Path,
    config: &Config,
    vocab: &Vocabulary,
    groups: &[ParamGroup],
    adam: &Adam,
    epoch: u64,
) -> Result<(), CheckpointError> {
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC).map_err(io_err)?;
    write_str(&mut w, &config.to_toml())?;
    let tokens = vocab.tokens();
    write_u64(&mut w, tokens.len() as u64)?;
    for t in tokens {
        write_str(&mut w, t)?;
    }
    write_u64(&mut w, config.train.seed)?;
    write_u64(&mut w, epoch)?;
    write_u64(&mut w, adam.step)?;
    let n_entries: u64 = groups.iter().map(|g| g.entries.len() as u64).sum();
    write_u64(&mut w, n_entries)?;
    for g in groups {
        for e in &g.entries {
            write_str(&mut w, &e.name)?;
            write_u64(&mut w, u64::from(e.frozen))?;
            let shape = e.tensor.shape();
            write_u64(&mut w, shape.len() as u64)?;
            for &d in shape {
                write_u64(&mut w, d as u64)?;
            }
            write_f64s(&mut w, &e.tensor.to_vec())?;
            write_f64s(&mut w, &e.moment1)?;
            write_f64s(&mut w, &e.moment2)?;
        }
    }
    w.flush().map_err(io_err)
}

pub struct LoadedCheckpoint {
    pub config: Config,
    pub vocab: Vocabulary,
    pub model: ModelParams,
    pub groups: Vec<ParamGroup>,
    pub adam_step: u64,
    pub epoch: u64,
}

pub fn load_checkpoint(path: &Path) -> Result<LoadedCheckpoint, CheckpointError> {
    let file = std::fs::File::open(path).map_err(|e| CheckpointError::Io(format!("{}: {e}", path.display())))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(CheckpointError::Format("bad magic; not a checkpoint file".into()));
    }
    let config_text = read_str(&mut r)?;
    let config: Config =
        toml::from_str(&config_text).map_err(|e| CheckpointError::Format(format!("embedded config: {e}")))?;
    let n_tokens = read_u64(&mut r)? as usize;
    let mut tokens = Vec::with_capacity(n_tokens);
    for _ in 0..n_tokens {
        tokens.push(read_str(&mut r)?);
    }
    let vocab = Vocabulary::from_tokens(tokens);
    let _seed = read_u64(&mut r)?;
    let epoch = read_u64(&mut r)?;
    let adam_step = read_u64(&mut r)?;

    // Rebuild the structure, then overwrite every tensor by name.
    let model = ModelParams::init(&config, &vocab, &mut stream(0, Purpose::Init, 0));
    let mut groups = build_groups(&model);
    let mut filled = 0usize;
    let n_entries = read_u64(&mut r)? as usize;
    for _ in 0..n_entries {
        let name = read_str(&mut r)?;
        let frozen = read_u64(&mut r)? != 0;
        let ndim = read_u64(&mut r)? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(read_u64(&mut r)? as usize);
        }
        let values = read_f64s(&mut r)?;
        let m1 = read_f64s(&mut r)?;
        let m2 = read_f64s(&mut r)?;
        let entry = groups
            .iter_mut()
            .flat_map(|g| g.entries.iter_mut())
            .find(|e| e.name == name)
            .ok_or_else(|| CheckpointError::Mismatch(format!("unknown parameter {name}")))?;
        if entry.tensor.shape() != shape.as_slice() {
            return Err(CheckpointError::Mismatch(format!(
                "parameter {name}: shape {:?} in file, {:?} expected from config/vocabulary",
                shape,
                entry.tensor.shape()
            )));
        }
        entry.tensor.set_values(&values);
        entry.moment1 = m1;
        entry.moment2 = m2;
        entry.frozen = frozen;
        filled += 1;
    }
    let expected: usize = groups.iter().map(|g| g.entries.len()).sum();
    if filled != expected {
        return Err(CheckpointError::Mismatch(format!(
            "checkpoint holds {filled} parameters, model needs {expected}"
        )));
    }
    if model.vocab_size() != vocab.len() {
        return Err(CheckpointError::Mismatch(format!(
            "embedding table has {} rows but the vocabulary holds {} tokens",
            model.vocab_size(),
            vocab.len()
        )));
    }
    Ok(LoadedCheckpoint { config, vocab, model, groups, adam_step, epoch })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::corpus::{Dialogue, Turn};

    fn setup() -> (Config, Vocabulary, ModelParams, Vec<ParamGroup>) {
        let mut config = Config::default();
        config.model.embedding_dim = 4;
        config.model.hidden_size = 2;
        config.model.decoder_hidden = 3;
        let corpus = vec![Dialogue {
            id: "d".into(),
            turns: vec![Turn {
                post: vec!["a".into()],
                response: vec!["b".into()],
                knowledge: vec![],
                gold_index: None,
            }],
        }];
        let vocab = Vocabulary::build(&corpus, 5);
        let model = ModelParams::init(&config, &vocab, &mut stream(11, Purpose::Init, 0));
        let groups = build_groups(&model);
        (config, vocab, model, groups)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (config, vocab, model, mut groups) = setup();
        // fill the moments with non-trivial values
        for g in groups.iter_mut() {
            for (i, e) in g.entries.iter_mut().enumerate() {
                for (j, m) in e.moment1.iter_mut().enumerate() {
                    *m = (i as f64 + 1.0) * 0.1 + j as f64 * 1e-13;
                }
                e.moment2[0] = 0.123456789012345678;
            }
        }
        let mut adam = Adam::new(0.001);
        adam.step = 17;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &config, &vocab, &groups, &adam, 3).unwrap();

        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.epoch, 3);
        assert_eq!(loaded.adam_step, 17);
        assert_eq!(loaded.vocab.len(), vocab.len());
        for (want, got) in model.named().iter().zip(loaded.model.named().iter()) {
            assert_eq!(want.0, got.0);
            let a = want.1.to_vec();
            let b = got.1.to_vec();
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                assert_eq!(x.to_bits(), y.to_bits(), "{}", want.0);
            }
        }
        for (g1, g2) in groups.iter().zip(&loaded.groups) {
            for (e1, e2) in g1.entries.iter().zip(&g2.entries) {
                assert_eq!(e1.moment1, e2.moment1);
                assert_eq!(e1.moment2, e2.moment2);
            }
        }
        // saving the loaded state reproduces the file byte for byte
        let path2 = dir.path().join("model2.ckpt");
        let mut adam2 = Adam::new(loaded.config.train.learning_rate);
        adam2.step = loaded.adam_step;
        save_checkpoint(&path2, &loaded.config, &loaded.vocab, &loaded.groups, &adam2, 3).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn truncated_file_is_a_format_error() {
        let (config, vocab, _, groups) = setup();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &config, &vocab, &groups, &Adam::new(0.1), 1).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }

    #[test]
    fn non_checkpoint_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nope.ckpt");
        std::fs::write(&path, b"garbage that is long enough").unwrap();
        match load_checkpoint(&path) {
            Err(CheckpointError::Format(m)) => assert!(m.contains("magic")),
            other => panic!("expected format error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn vocab_embedding_mismatch_is_detected() {
        // A checkpoint whose embedded config/vocab disagree with its tensors:
        // simulate by saving with a larger vocabulary than the model was
        // built for.
        let (config, _, _, groups) = setup();
        let bigger = Vocabulary::from_tokens(vec!["a".into(), "b".into(), "c".into(), "d".into()]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &config, &bigger, &groups, &Adam::new(0.1), 1).unwrap();
        match load_checkpoint(&path) {
            Err(CheckpointError::Mismatch(m)) => {
                assert!(m.contains("embedding") || m.contains("shape"), "{m}")
            }
            other => panic!("expected mismatch, got {:?}", other.map(|_| ())),
        }
    }
}
