//! Line-delimited JSON dataset files.
//!
//! Line 1 is a header `{"schema": "hitea-corpus/1", "vocab": [...], "num_records": n}`;
//! each following line is one clip record with fields
//! `id, split, pair_id, caption, token_ids, moments, frames`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{tokenize, validate_clips, VideoClip, Vocab};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: &str = "hitea-corpus/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub schema: String,
    pub vocab: Vocab,
    pub num_records: usize,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    id: &'a str,
    split: super::Split,
    pair_id: &'a Option<String>,
    caption: &'a str,
    token_ids: Vec<u32>,
    moments: &'a [super::Moment],
    frames: &'a super::Frames,
}

fn write_records<W: Write>(mut out: W, clips: &[VideoClip], vocab: &Vocab) -> Result<W> {
    let header = DatasetHeader {
        schema: SCHEMA_VERSION.to_string(),
        vocab: vocab.clone(),
        num_records: clips.len(),
    };
    let io_err = |e| Error::io("<dataset>", e);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n").map_err(io_err)?;
    for clip in clips {
        let record = RecordOut {
            id: &clip.id,
            split: clip.split,
            pair_id: &clip.pair_id,
            caption: &clip.caption,
            token_ids: tokenize(&clip.caption, vocab)?.token_ids,
            moments: &clip.moments,
            frames: &clip.frames,
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n").map_err(io_err)?;
    }
    Ok(out)
}

pub fn write_dataset(clips: &[VideoClip], vocab: &Vocab, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = write_records(BufWriter::new(file), clips, vocab).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// SHA-256 of the serialized dataset, hex encoded.
pub fn corpus_fingerprint(clips: &[VideoClip], vocab: &Vocab) -> Result<String> {
    let bytes = write_records(Vec::new(), clips, vocab)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn field<T: DeserializeOwned>(obj: &mut serde_json::Map<String, Value>, record: usize, name: &str) -> Result<T> {
    let value = obj.remove(name).ok_or_else(|| Error::Parse {
        record,
        field: name.into(),
        reason: "missing".into(),
    })?;
    serde_json::from_value(value).map_err(|e| Error::Parse {
        record,
        field: name.into(),
        reason: e.to_string(),
    })
}

/// Reads and validates a dataset file. Record indices in errors are 0-based
/// and exclude the header line.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<(Vocab, Vec<VideoClip>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Parse {
            record: 0,
            field: "schema".into(),
            reason: "empty file".into(),
        })?
        .map_err(|e| Error::io(path, e))?;
    let header: DatasetHeader = serde_json::from_str(&header_line).map_err(|e| Error::Parse {
        record: 0,
        field: "schema".into(),
        reason: format!("bad header: {e}"),
    })?;
    if header.schema != SCHEMA_VERSION {
        return Err(Error::Parse {
            record: 0,
            field: "schema".into(),
            reason: format!("expected {SCHEMA_VERSION}, found {}", header.schema),
        });
    }
    let vocab = header.vocab;
    let mut clips = Vec::with_capacity(header.num_records);
    for (record, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if record >= header.num_records {
            if line.trim().is_empty() {
                continue;
            }
            return Err(Error::Parse {
                record,
                field: "<record>".into(),
                reason: "more records than the header declares".into(),
            });
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            record,
            field: "<record>".into(),
            reason: e.to_string(),
        })?;
        let Value::Object(mut obj) = value else {
            return Err(Error::Parse {
                record,
                field: "<record>".into(),
                reason: "not an object".into(),
            });
        };
        let clip = VideoClip {
            id: field(&mut obj, record, "id")?,
            split: field(&mut obj, record, "split")?,
            pair_id: field(&mut obj, record, "pair_id")?,
            caption: field(&mut obj, record, "caption")?,
            moments: field(&mut obj, record, "moments")?,
            frames: field(&mut obj, record, "frames")?,
        };
        let token_ids: Vec<u32> = field(&mut obj, record, "token_ids")?;
        if let Some(extra) = obj.keys().next() {
            return Err(Error::Parse {
                record,
                field: extra.clone(),
                reason: "unknown field".into(),
            });
        }
        let expected = tokenize(&clip.caption, &vocab).map_err(|e| Error::Invalid {
            record,
            field: "caption".into(),
            reason: e.to_string(),
        })?;
        if expected.token_ids != token_ids {
            return Err(Error::Invalid {
                record,
                field: "token_ids".into(),
                reason: "do not match the tokenized caption".into(),
            });
        }
        clips.push(clip);
    }
    if clips.len() < header.num_records {
        return Err(Error::Parse {
            record: clips.len(),
            field: "<record>".into(),
            reason: format!(
                "file truncated: header declares {} records, found {}",
                header.num_records,
                clips.len()
            ),
        });
    }
    validate_clips(&clips)?;
    Ok((vocab, clips))
}
