//! Binary layouts for encoded splits and model checkpoints.
//!
//! All integers and floats are little-endian. Strings are a `u32` byte length
//! followed by UTF-8.
//!
//! Split file:
//! `"TFCSDATA" | u32 version | u8 split | u32 fields | u64 records |
//!  fields x (u64 id, str name, u32 cardinality) |
//!  fields x records u32 column values | records u8 labels`
//!
//! Checkpoint:
//! `"TFCSCKPT" | u32 version | u8 kind (1 dnn, 2 lr) | u64 schema hash |
//!  u32 fields | fields x (u64 id, str name, u32 cardinality) | body`
//!
//! A DNN body is `u32 dim | tables | u32 layers | layers x (u32 in, u32 out,
//! u8 activation (0 relu, 1 identity), in*out f64 weights, out f64 bias)`; an
//! LR body is `f64 bias | tables`. Each table is `u32 rows | u32 width |
//! init (u8 0 zeros | u8 1, u64 seed, f64 bound) | u8 sparse | u64 stored |
//! stored x (u32 row, width f64)`.

use std::path::Path;

use sha2::{Digest, Sha256};
use tayfcs_core::data::{Dataset, FieldSchema, SplitTag};
use tayfcs_core::hash::{fnv1a64_extend, FNV_OFFSET};
use tayfcs_core::models::{DnnModel, LrModel};
use tayfcs_core::nn::{Activation, Dense, EmbeddingTable, Mlp, Network, RowInit};

use crate::error::{Error, Result};

pub const DATA_MAGIC: &[u8; 8] = b"TFCSDATA";
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"TFCSCKPT";
pub const FORMAT_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Write via a temporary sibling and rename, so readers never see a partial
/// file.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Hash of field names, ids and cardinalities.
pub fn schema_hash(fields: &[FieldSchema]) -> u64 {
    fields.iter().fold(FNV_OFFSET, |h, f| {
        let h = fnv1a64_extend(h, &(f.field_id as u64).to_le_bytes());
        let h = fnv1a64_extend(h, f.name.as_bytes());
        fnv1a64_extend(h, &f.cardinality.to_le_bytes())
    })
}

#[derive(Default)]
struct Out(Vec<u8>);

impl Out {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        v.iter().for_each(|x| self.0.extend_from_slice(&x.to_le_bytes()));
    }
    fn len32(&mut self, n: usize) {
        self.u32(u32::try_from(n).expect("length fits in u32"));
    }
    fn str(&mut self, s: &str) {
        self.len32(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
    fn fields(&mut self, fields: &[FieldSchema]) {
        self.len32(fields.len());
        for f in fields {
            self.u64(f.field_id as u64);
            self.str(&f.name);
            self.u32(f.cardinality);
        }
    }
    fn table(&mut self, t: &EmbeddingTable) {
        self.u32(t.rows());
        self.len32(t.width());
        match t.init() {
            RowInit::Zeros => self.u8(0),
            RowInit::Uniform { seed, bound } => {
                self.u8(1);
                self.u64(seed);
                self.f64s(&[bound]);
            }
        }
        self.u8(u8::from(t.is_sparse()));
        self.u64(t.stored_row_count() as u64);
        for (row, values) in t.stored_rows() {
            self.u32(row);
            self.f64s(values);
        }
    }
}

struct In<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> In<'a> {
    fn new(bytes: &'a [u8], path: &'a Path) -> Self {
        In { bytes, pos: 0, path }
    }
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::format(self.path, format!("{} (offset {})", msg.into(), self.pos))
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| self.err("truncated file"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| self.err("invalid UTF-8"))
    }
    fn magic(&mut self, magic: &[u8; 8]) -> Result<()> {
        if self.take(8)? != magic {
            return Err(self.err("bad magic"));
        }
        let v = self.u32()?;
        if v != FORMAT_VERSION {
            return Err(self.err(format!("unsupported version {v}")));
        }
        Ok(())
    }
    fn fields(&mut self) -> Result<Vec<FieldSchema>> {
        let n = self.u32()? as usize;
        (0..n)
            .map(|_| {
                Ok(FieldSchema {
                    field_id: self.u64()? as usize,
                    name: self.str()?,
                    cardinality: self.u32()?,
                })
            })
            .collect()
    }
    fn table(&mut self) -> Result<EmbeddingTable> {
        let rows = self.u32()?;
        let width = self.u32()? as usize;
        let init = match self.u8()? {
            0 => RowInit::Zeros,
            1 => RowInit::Uniform {
                seed: self.u64()?,
                bound: self.f64()?,
            },
            t => return Err(self.err(format!("unknown init tag {t}"))),
        };
        let sparse = self.u8()? != 0;
        let stored = self.u64()?;
        let mut table = EmbeddingTable::with_backing(rows, width, init, sparse);
        for _ in 0..stored {
            let row = self.u32()?;
            if row >= rows {
                return Err(self.err(format!("row {row} out of range")));
            }
            let values = self.f64s(width)?;
            table.row_mut(row).copy_from_slice(&values);
        }
        Ok(table)
    }
    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.err("trailing bytes"));
        }
        Ok(())
    }
}

fn split_tag(t: SplitTag) -> u8 {
    match t {
        SplitTag::Train => 0,
        SplitTag::Val => 1,
        SplitTag::Test => 2,
        SplitTag::Full => 3,
    }
}

pub fn encode_dataset(ds: &Dataset) -> Vec<u8> {
    let mut o = Out::default();
    o.0.extend_from_slice(DATA_MAGIC);
    o.u32(FORMAT_VERSION);
    o.u8(split_tag(ds.split()));
    o.len32(ds.num_fields());
    o.u64(ds.len() as u64);
    for f in ds.fields() {
        o.u64(f.field_id as u64);
        o.str(&f.name);
        o.u32(f.cardinality);
    }
    for f in 0..ds.num_fields() {
        for &v in ds.column(f).expect("field in range") {
            o.u32(v);
        }
    }
    o.0.extend_from_slice(ds.labels());
    o.0
}

pub fn decode_dataset(bytes: &[u8], path: &Path) -> Result<Dataset> {
    let mut i = In::new(bytes, path);
    i.magic(DATA_MAGIC)?;
    let split = match i.u8()? {
        0 => SplitTag::Train,
        1 => SplitTag::Val,
        2 => SplitTag::Test,
        3 => SplitTag::Full,
        t => return Err(i.err(format!("unknown split tag {t}"))),
    };
    let nf = i.u32()? as usize;
    let n = i.u64()? as usize;
    let mut fields = Vec::with_capacity(nf);
    for _ in 0..nf {
        fields.push(FieldSchema {
            field_id: i.u64()? as usize,
            name: i.str()?,
            cardinality: i.u32()?,
        });
    }
    let mut columns = Vec::with_capacity(nf);
    for _ in 0..nf {
        columns.push((0..n).map(|_| i.u32()).collect::<Result<Vec<_>>>()?);
    }
    let labels = i.take(n)?.to_vec();
    i.finish()?;
    Ok(Dataset::new(fields, columns, labels, split)?)
}

pub fn save_dataset(path: &Path, ds: &Dataset) -> Result<String> {
    let bytes = encode_dataset(ds);
    write_file(path, &bytes)?;
    Ok(sha256_hex(&bytes))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    decode_dataset(&read_file(path)?, path)
}

const KIND_DNN: u8 = 1;
const KIND_LR: u8 = 2;

fn header(o: &mut Out, kind: u8, fields: &[FieldSchema]) {
    o.0.extend_from_slice(CHECKPOINT_MAGIC);
    o.u32(FORMAT_VERSION);
    o.u8(kind);
    o.u64(schema_hash(fields));
    o.fields(fields);
}

fn read_header(i: &mut In<'_>, kind: u8) -> Result<Vec<FieldSchema>> {
    i.magic(CHECKPOINT_MAGIC)?;
    let k = i.u8()?;
    if k != kind {
        return Err(i.err(format!("model kind {k}, expected {kind}")));
    }
    let hash = i.u64()?;
    let fields = i.fields()?;
    if schema_hash(&fields) != hash {
        return Err(i.err("schema hash mismatch"));
    }
    Ok(fields)
}

pub fn encode_dnn(model: &DnnModel) -> Vec<u8> {
    let mut o = Out::default();
    header(&mut o, KIND_DNN, model.fields());
    o.len32(model.dim());
    for t in &model.network.tables {
        o.table(t);
    }
    o.len32(model.network.mlp.layers.len());
    for l in &model.network.mlp.layers {
        o.len32(l.inputs);
        o.len32(l.outputs);
        o.u8(match l.activation {
            Activation::Relu => 0,
            Activation::Identity => 1,
        });
        o.f64s(&l.weights);
        o.f64s(&l.bias);
    }
    o.0
}

pub fn decode_dnn(bytes: &[u8], path: &Path) -> Result<DnnModel> {
    let mut i = In::new(bytes, path);
    let fields = read_header(&mut i, KIND_DNN)?;
    let dim = i.u32()? as usize;
    let tables = (0..fields.len()).map(|_| i.table()).collect::<Result<Vec<_>>>()?;
    let n_layers = i.u32()? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let inputs = i.u32()? as usize;
        let outputs = i.u32()? as usize;
        let activation = match i.u8()? {
            0 => Activation::Relu,
            1 => Activation::Identity,
            t => return Err(i.err(format!("unknown activation {t}"))),
        };
        let weights = i.f64s(inputs * outputs)?;
        let bias = i.f64s(outputs)?;
        layers.push(Dense {
            inputs,
            outputs,
            weights,
            bias,
            activation,
        });
    }
    i.finish()?;
    let network = Network {
        tables,
        mlp: Mlp { layers },
        dim,
    };
    Ok(DnnModel::from_parts(fields, network)?)
}

pub fn encode_lr(model: &LrModel) -> Vec<u8> {
    let mut o = Out::default();
    header(&mut o, KIND_LR, model.fields());
    o.f64s(&[model.bias]);
    for t in &model.weights {
        o.table(t);
    }
    o.0
}

pub fn decode_lr(bytes: &[u8], path: &Path) -> Result<LrModel> {
    let mut i = In::new(bytes, path);
    let fields = read_header(&mut i, KIND_LR)?;
    let bias = i.f64()?;
    let weights = (0..fields.len()).map(|_| i.table()).collect::<Result<Vec<_>>>()?;
    i.finish()?;
    Ok(LrModel::from_parts(fields, bias, weights)?)
}

pub fn save_dnn(path: &Path, model: &DnnModel) -> Result<String> {
    let bytes = encode_dnn(model);
    write_file(path, &bytes)?;
    Ok(sha256_hex(&bytes))
}

pub fn load_dnn(path: &Path) -> Result<DnnModel> {
    decode_dnn(&read_file(path)?, path)
}
