//! Checkpoint container: magic "S2VC", version, CRC32, then length-prefixed
//! named sections. Tensor payloads reuse the tensor container format;
//! config and vocabulary are stored as UTF-8 text. Save -> load -> save is
//! byte-identical, and a resumed run continues bitwise.

use std::fs;
use std::path::Path;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::loss::LossBreakdown;
use crate::tensor::{read_tensor, write_tensor, DType, Tensor};
use crate::text::Vocab;
use crate::train::{AdamState, Trainer};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"S2VC";
pub const CHECKPOINT_VERSION: u32 = 1;

fn write_section(out: &mut Vec<u8>, name: &str, payload: &[u8]) {
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
}

fn tensor_bytes(t: &Tensor) -> Vec<u8> {
    let mut buf = Vec::with_capacity(t.numel() * 8 + 64);
    write_tensor(&mut buf, t, DType::F64).expect("in-memory write");
    buf
}

pub fn save(trainer: &Trainer, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut payload = Vec::new();

    write_section(
        &mut payload,
        "config",
        trainer.config.to_canonical_toml().as_bytes(),
    );
    write_section(&mut payload, "vocab", trainer.vocab.to_text().as_bytes());

    let mut meta = Vec::with_capacity(24);
    meta.extend_from_slice(&trainer.step.to_le_bytes());
    meta.extend_from_slice(&trainer.opt.step.to_le_bytes());
    meta.extend_from_slice(&trainer.config.seed.to_le_bytes());
    write_section(&mut payload, "meta", &meta);

    let history: String = trainer
        .history
        .iter()
        .map(|b| {
            format!(
                "{},{},{},{},{}\n",
                b.text_ce, b.recon_decoder, b.recon_unet, b.motion, b.total
            )
        })
        .collect();
    write_section(&mut payload, "history", history.as_bytes());

    for (_, name, t) in trainer.store.iter() {
        write_section(&mut payload, &format!("param/{name}"), &tensor_bytes(t));
    }
    let (m, v) = trainer.opt.moments();
    for ((_, name, _), moment) in trainer.store.iter().zip(m) {
        let t = Tensor::from_vec(vec![moment.len()], moment.clone())?;
        write_section(&mut payload, &format!("adam_m/{name}"), &tensor_bytes(&t));
    }
    for ((_, name, _), moment) in trainer.store.iter().zip(v) {
        let t = Tensor::from_vec(vec![moment.len()], moment.clone())?;
        write_section(&mut payload, &format!("adam_v/{name}"), &tensor_bytes(&t));
    }

    let mut out = Vec::with_capacity(payload.len() + 12);
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    out.extend_from_slice(&payload);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

struct Sections {
    entries: Vec<(String, Vec<u8>)>,
}

impl Sections {
    fn get(&self, name: &str, origin: &Path) -> Result<&[u8]> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| b.as_slice())
            .ok_or_else(|| Error::integrity(origin, format!("missing section {name}")))
    }
}

fn parse_sections(payload: &[u8], origin: &Path) -> Result<Sections> {
    let mut entries = Vec::new();
    let mut cursor = 0usize;
    let bad = |what: &str| Error::integrity(origin, format!("truncated section {what}"));
    while cursor < payload.len() {
        if cursor + 4 > payload.len() {
            return Err(bad("name length"));
        }
        let name_len = u32::from_le_bytes(payload[cursor..cursor + 4].try_into().unwrap()) as usize;
        cursor += 4;
        if cursor + name_len > payload.len() {
            return Err(bad("name"));
        }
        let name = String::from_utf8(payload[cursor..cursor + name_len].to_vec())
            .map_err(|_| Error::integrity(origin, "section name is not UTF-8"))?;
        cursor += name_len;
        if cursor + 8 > payload.len() {
            return Err(bad(&name));
        }
        let len = u64::from_le_bytes(payload[cursor..cursor + 8].try_into().unwrap()) as usize;
        cursor += 8;
        if cursor + len > payload.len() {
            return Err(bad(&name));
        }
        entries.push((name, payload[cursor..cursor + len].to_vec()));
        cursor += len;
    }
    Ok(Sections { entries })
}

pub fn load(path: &Path) -> Result<Trainer> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || bytes[0..4] != CHECKPOINT_MAGIC {
        return Err(Error::integrity(path, "not a checkpoint file (bad magic)"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::integrity(
            path,
            format!("checkpoint version {version}, expected {CHECKPOINT_VERSION}"),
        ));
    }
    let stored_crc = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let payload = &bytes[12..];
    if crc32fast::hash(payload) != stored_crc {
        return Err(Error::integrity(path, "checksum mismatch"));
    }
    let sections = parse_sections(payload, path)?;

    let config_text = std::str::from_utf8(sections.get("config", path)?)
        .map_err(|_| Error::integrity(path, "config section is not UTF-8"))?;
    let config = RunConfig::from_toml_str(config_text)?;
    let vocab_text = std::str::from_utf8(sections.get("vocab", path)?)
        .map_err(|_| Error::integrity(path, "vocab section is not UTF-8"))?;
    let vocab = Vocab::from_text(vocab_text);

    let meta = sections.get("meta", path)?;
    if meta.len() != 24 {
        return Err(Error::integrity(path, "meta section has wrong length"));
    }
    let step = u64::from_le_bytes(meta[0..8].try_into().unwrap());
    let adam_step = u64::from_le_bytes(meta[8..16].try_into().unwrap());

    let mut trainer = Trainer::new(config, vocab)?;
    trainer.step = step;

    for pid in trainer.store.ids().collect::<Vec<_>>() {
        let name = trainer.store.name(pid).to_string();
        let bytes = sections.get(&format!("param/{name}"), path)?;
        let tensor = read_tensor(&mut &bytes[..], path)?;
        if tensor.shape() != trainer.store.get(pid).shape() {
            return Err(Error::integrity(
                path,
                format!("parameter {name} has shape {:?}", tensor.shape()),
            ));
        }
        trainer
            .store
            .get_mut(pid)
            .data_mut()
            .copy_from_slice(tensor.data());
    }

    let mut m = Vec::new();
    let mut v = Vec::new();
    for pid in trainer.store.ids().collect::<Vec<_>>() {
        let name = trainer.store.name(pid).to_string();
        let mb = read_tensor(&mut sections.get(&format!("adam_m/{name}"), path)?, path)?;
        let vb = read_tensor(&mut sections.get(&format!("adam_v/{name}"), path)?, path)?;
        let numel = trainer.store.get(pid).numel();
        if mb.numel() != numel || vb.numel() != numel {
            return Err(Error::integrity(path, format!("adam moments for {name}")));
        }
        m.push(mb.data().to_vec());
        v.push(vb.data().to_vec());
    }
    let mut opt = AdamState::new(&trainer.store);
    opt.restore(m, v, adam_step);
    trainer.opt = opt;

    let history_text = std::str::from_utf8(sections.get("history", path)?)
        .map_err(|_| Error::integrity(path, "history section is not UTF-8"))?;
    for line in history_text.lines() {
        let fields: Vec<f64> = line.split(',').filter_map(|f| f.parse().ok()).collect();
        if fields.len() == 5 {
            trainer.history.push_back(LossBreakdown {
                text_ce: fields[0],
                recon_decoder: fields[1],
                recon_unet: fields[2],
                motion: fields[3],
                total: fields[4],
            });
        }
    }
    Ok(trainer)
}

/// Resume-time guard: the supplied config must match the checkpointed one
/// (vocab_size is filled from the checkpoint before comparing).
pub fn verify_config_match(supplied: &RunConfig, stored: &RunConfig, path: &Path) -> Result<()> {
    let mut normalized = supplied.clone();
    if normalized.model.vocab_size == 0 {
        normalized.model.vocab_size = stored.model.vocab_size;
    }
    if normalized.to_canonical_toml() != stored.to_canonical_toml() {
        return Err(Error::integrity(
            path,
            "supplied config does not match the checkpointed config",
        ));
    }
    Ok(())
}
