//! On-disk formats.
//!
//! Feature file (`.zslf`), all integers little-endian:
//!
//! | offset | size  | field                         |
//! |--------|-------|-------------------------------|
//! | 0      | 4     | magic `ZSLF`                  |
//! | 4      | 4     | version (u32, currently 1)    |
//! | 8      | 8     | N (u64)                       |
//! | 16     | 8     | d (u64)                       |
//! | 24     | 1     | labels present (0 or 1)       |
//! | 25     | 8·N·d | features, f64 row-major       |
//! | …      | 4·N   | labels (u32), if present      |
//!
//! Checkpoint (`.zslc`): magic `ZSLC`, version (u32), matrix count (u32),
//! then per matrix rows (u64), cols (u64) and rows·cols f64 values
//! row-major. Matrices are stored in parameter order (`W1, b1, …, V`)
//! followed by the class-norm running mean and variance when enabled. A
//! JSON sidecar with the same stem carries the training config and shapes.

use std::collections::BTreeSet;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use classnorm::nn::{ClassNorm, Dense, Embedder, Mlp, Parameterized};
use classnorm::zsl::{LabeledFeatures, Pool, SplitSpec, TrainConfig, ZslModel};
use classnorm::{Error, Matrix, Result};
use serde::{Deserialize, Serialize};

pub const FEATURE_MAGIC: &[u8; 4] = b"ZSLF";
pub const FEATURE_VERSION: u32 = 1;
pub const CHECKPOINT_MAGIC: &[u8; 4] = b"ZSLC";
pub const CHECKPOINT_VERSION: u32 = 1;
const FEATURE_HEADER_LEN: usize = 25;

fn parse_err(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        location: location.into(),
        message: message.into(),
    }
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Little-endian cursor that reports byte offsets on failure.
struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            parse_err(
                format!("byte {}", self.pos),
                format!(
                    "truncated {what}: expected {n} bytes, got {}",
                    self.buf.len().saturating_sub(self.pos)
                ),
            )
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| parse_err("header", "size overflow"))?, what)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(parse_err(
                format!("byte {}", self.pos),
                format!("{} trailing bytes", self.buf.len() - self.pos),
            ));
        }
        Ok(())
    }
}

fn dim(v: u64, what: &str) -> Result<usize> {
    usize::try_from(v).map_err(|_| parse_err("header", format!("{what} {v} does not fit in memory")))
}

fn magic(r: &mut Reader<'_>, expected: &[u8; 4], version: u32) -> Result<()> {
    let m = r.take(4, "magic")?;
    if m != expected {
        return Err(parse_err("byte 0", format!("bad magic {m:?}, expected {:?}", std::str::from_utf8(expected).unwrap())));
    }
    let v = r.u32("version")?;
    if v != version {
        return Err(parse_err("byte 4", format!("unsupported version {v}, expected {version}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureFile {
    pub features: Matrix<f64>,
    pub labels: Option<Vec<u32>>,
}

impl FeatureFile {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let (n, d) = self.features.shape();
        if let Some(l) = &self.labels {
            if l.len() != n {
                return Err(Error::Dimension(format!("{n} feature rows but {} labels", l.len())));
            }
        }
        let mut out = Vec::with_capacity(FEATURE_HEADER_LEN + 8 * n * d + 4 * n);
        out.extend_from_slice(FEATURE_MAGIC);
        out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
        out.extend_from_slice(&(n as u64).to_le_bytes());
        out.extend_from_slice(&(d as u64).to_le_bytes());
        out.push(u8::from(self.labels.is_some()));
        for v in self.features.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for l in self.labels.iter().flatten() {
            out.extend_from_slice(&l.to_le_bytes());
        }
        Ok(out)
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        magic(&mut r, FEATURE_MAGIC, FEATURE_VERSION)?;
        let n = dim(r.u64("row count")?, "row count")?;
        let d = dim(r.u64("dimension")?, "dimension")?;
        let has_labels = match r.take(1, "label flag")?[0] {
            0 => false,
            1 => true,
            f => return Err(parse_err("byte 24", format!("label flag must be 0 or 1, got {f}"))),
        };
        let total = n.checked_mul(d).ok_or_else(|| parse_err("header", "size overflow"))?;
        let expected = FEATURE_HEADER_LEN + 8 * total + if has_labels { 4 * n } else { 0 };
        if buf.len() != expected {
            return Err(parse_err(
                format!("byte {}", buf.len()),
                format!("payload length mismatch: expected {expected} bytes, got {}", buf.len()),
            ));
        }
        let values = r.f64s(total, "features")?;
        let labels = if has_labels {
            Some((0..n).map(|_| r.u32("labels")).collect::<Result<Vec<u32>>>()?)
        } else {
            None
        };
        r.finish()?;
        Ok(Self {
            features: Matrix::new(n, d, values)?,
            labels,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode()?).map_err(io_at(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&fs::read(path).map_err(io_at(path))?)
    }

    pub fn from_labeled(data: &LabeledFeatures<f64>) -> Result<Self> {
        let labels = data
            .labels
            .iter()
            .map(|&l| u32::try_from(l).map_err(|_| Error::Data(format!("label {l} exceeds u32"))))
            .collect::<Result<Vec<u32>>>()?;
        Ok(Self {
            features: data.features.clone(),
            labels: Some(labels),
        })
    }
}

/// Class attribute table: one row per class, first column the class id.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributeFile {
    pub ids: Vec<u32>,
    pub attributes: Matrix<f64>,
}

impl AttributeFile {
    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        if self.ids.len() != self.attributes.rows() {
            return Err(Error::Dimension("id count does not match attribute rows".into()));
        }
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for (id, row) in self.ids.iter().zip(self.attributes.row_iter()) {
            let mut rec = vec![id.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
        let mut ids = Vec::new();
        let mut values = Vec::new();
        let mut width = None;
        let mut seen = BTreeSet::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| parse_err(format!("row {row}"), e.to_string()))?;
            if rec.len() < 2 {
                return Err(parse_err(format!("row {row}"), "expected a class id and at least one attribute"));
            }
            match width {
                None => width = Some(rec.len()),
                Some(w) if w != rec.len() => {
                    return Err(parse_err(
                        format!("row {row}"),
                        format!("ragged row: {} fields, expected {w}", rec.len()),
                    ))
                }
                _ => {}
            }
            let id: u32 = rec[0]
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("row {row}, column 1"), format!("bad class id '{}'", &rec[0])))?;
            if !seen.insert(id) {
                return Err(parse_err(format!("row {row}"), format!("duplicate class id {id}")));
            }
            ids.push(id);
            for (j, field) in rec.iter().enumerate().skip(1) {
                let v: f64 = field.trim().parse().map_err(|_| {
                    parse_err(format!("row {row}, column {}", j + 1), format!("bad number '{field}'"))
                })?;
                values.push(v);
            }
        }
        let w = width.ok_or_else(|| parse_err("row 1", "empty attribute file"))? - 1;
        Ok(Self {
            attributes: Matrix::new(ids.len(), w, values)?,
            ids,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(fs::File::create(path).map_err(io_at(path))?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(fs::File::open(path).map_err(io_at(path))?)
    }

    /// Row of class `id`.
    pub fn row_of(&self, id: u32) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }
}

/// File names inside a data directory.
pub const ATTRIBUTES_FILE: &str = "attributes.csv";
pub const TRAIN_FILE: &str = "train.zslf";
pub const TEST_FILE: &str = "test.zslf";
pub const SPLIT_FILE: &str = "split.json";

/// Seen/unseen split by class id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitFile {
    pub seen: Vec<u32>,
    pub unseen: Vec<u32>,
}

/// A data directory loaded into memory. Class indices are attribute rows.
#[derive(Clone, Debug, PartialEq)]
pub struct DataDir {
    pub ids: Vec<u32>,
    pub pool: Pool<f64>,
    pub split: Option<SplitSpec>,
}

fn to_rows(labels: Option<Vec<u32>>, attrs: &AttributeFile, file: &str) -> Result<Vec<usize>> {
    let labels = labels.ok_or_else(|| Error::Data(format!("{file} has no labels")))?;
    labels
        .into_iter()
        .map(|l| attrs.row_of(l).ok_or_else(|| Error::Data(format!("{file}: label {l} has no attribute row"))))
        .collect()
}

impl DataDir {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(io_at(dir))?;
        AttributeFile {
            ids: self.ids.clone(),
            attributes: self.pool.attributes.clone(),
        }
        .save(&dir.join(ATTRIBUTES_FILE))?;
        let relabel = |d: &LabeledFeatures<f64>| -> Result<FeatureFile> {
            let mut f = FeatureFile::from_labeled(d)?;
            for l in f.labels.iter_mut().flatten() {
                *l = self.ids[*l as usize];
            }
            Ok(f)
        };
        relabel(&self.pool.train)?.save(&dir.join(TRAIN_FILE))?;
        relabel(&self.pool.test)?.save(&dir.join(TEST_FILE))?;
        if let Some(s) = &self.split {
            let split = SplitFile {
                seen: s.seen.iter().map(|&c| self.ids[c]).collect(),
                unseen: s.unseen.iter().map(|&c| self.ids[c]).collect(),
            };
            let path = dir.join(SPLIT_FILE);
            fs::write(&path, serde_json::to_vec_pretty(&split)?).map_err(io_at(&path))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let attrs = AttributeFile::load(&dir.join(ATTRIBUTES_FILE))?;
        let train = FeatureFile::load(&dir.join(TRAIN_FILE))?;
        let test = FeatureFile::load(&dir.join(TEST_FILE))?;
        let train = LabeledFeatures::new(train.features, to_rows(train.labels, &attrs, TRAIN_FILE)?)?;
        let test = LabeledFeatures::new(test.features, to_rows(test.labels, &attrs, TEST_FILE)?)?;
        let split_path = dir.join(SPLIT_FILE);
        let split = if split_path.exists() {
            let s: SplitFile = serde_json::from_slice(&fs::read(&split_path).map_err(io_at(&split_path))?)?;
            let rows = |ids: &[u32]| -> Result<Vec<usize>> {
                ids.iter()
                    .map(|&i| attrs.row_of(i).ok_or_else(|| Error::Data(format!("split: unknown class {i}"))))
                    .collect()
            };
            Some(SplitSpec {
                seen: rows(&s.seen)?,
                unseen: rows(&s.unseen)?,
            })
        } else {
            None
        };
        Ok(Self {
            pool: Pool::new(attrs.attributes, train, test)?,
            ids: attrs.ids,
            split,
        })
    }

    pub fn require_split(&self) -> Result<&SplitSpec> {
        self.split
            .as_ref()
            .ok_or_else(|| Error::Data(format!("data directory has no {SPLIT_FILE}")))
    }
}

/// Sidecar describing a checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format: String,
    pub version: u32,
    pub d_a: usize,
    pub d_z: usize,
    pub config: TrainConfig,
    pub shapes: Vec<(usize, usize)>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn checkpoint_matrices(model: &ZslModel<f64>) -> Vec<Matrix<f64>> {
    let mut mats: Vec<Matrix<f64>> = model.embedder.parameters().into_iter().cloned().collect();
    if let Some(cn) = model.embedder.class_norm() {
        mats.push(Matrix::row_vector(&cn.running_mean));
        mats.push(Matrix::row_vector(&cn.running_var));
    }
    mats
}

pub fn encode_checkpoint(model: &ZslModel<f64>) -> Vec<u8> {
    let mats = checkpoint_matrices(model);
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(mats.len() as u32).to_le_bytes());
    for m in &mats {
        out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
        out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
        for v in m.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn save_checkpoint(path: &Path, model: &ZslModel<f64>, config: &TrainConfig) -> Result<()> {
    let emb = model.embedder.config();
    let meta = CheckpointMeta {
        format: "ZSLC".into(),
        version: CHECKPOINT_VERSION,
        d_a: emb.d_a,
        d_z: emb.d_z,
        config: config.clone(),
        shapes: checkpoint_matrices(model).iter().map(|m| m.shape()).collect(),
    };
    fs::write(path, encode_checkpoint(model)).map_err(io_at(path))?;
    let side = sidecar_path(path);
    fs::write(&side, serde_json::to_vec_pretty(&meta)?).map_err(io_at(&side))
}

pub fn decode_checkpoint(buf: &[u8], meta: &CheckpointMeta) -> Result<ZslModel<f64>> {
    let mut r = Reader { buf, pos: 0 };
    magic(&mut r, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
    let count = r.u32("matrix count")? as usize;
    let mut mats = Vec::with_capacity(count);
    for i in 0..count {
        let rows = dim(r.u64("rows")?, "rows")?;
        let cols = dim(r.u64("cols")?, "cols")?;
        let values = r.f64s(rows * cols, &format!("matrix {i}"))?;
        mats.push(Matrix::new(rows, cols, values)?);
    }
    r.finish()?;

    let cfg = meta.config.embedder_config(meta.d_a, meta.d_z);
    let specs = cfg.layer_specs();
    let expected = 2 * specs.len() + 1 + if cfg.class_norm { 2 } else { 0 };
    if count != expected {
        return Err(parse_err("byte 8", format!("expected {expected} matrices, got {count}")));
    }
    let mut it = mats.into_iter();
    let layers = specs
        .into_iter()
        .map(|spec| Dense {
            spec,
            weight: it.next().unwrap(),
            bias: it.next().unwrap(),
        })
        .collect();
    let output = it.next().unwrap();
    let class_norm = if cfg.class_norm {
        let mut cn = ClassNorm::new(cfg.hidden_dim(), cfg.momentum)?;
        cn.running_mean = it.next().unwrap().into_vec();
        cn.running_var = it.next().unwrap().into_vec();
        Some(cn)
    } else {
        None
    };
    let mut embedder = Embedder::from_parts(cfg, Mlp { layers }, class_norm, output)?;
    embedder.set_mode(classnorm::nn::Mode::Eval);
    Ok(ZslModel {
        embedder,
        preproc: meta.config.attribute_preproc,
        logit: meta.config.logit_config(),
    })
}

pub fn load_checkpoint(path: &Path) -> Result<(ZslModel<f64>, CheckpointMeta)> {
    let side = sidecar_path(path);
    let meta: CheckpointMeta = serde_json::from_slice(&fs::read(&side).map_err(io_at(&side))?)?;
    let model = decode_checkpoint(&fs::read(path).map_err(io_at(path))?, &meta)?;
    Ok((model, meta))
}
