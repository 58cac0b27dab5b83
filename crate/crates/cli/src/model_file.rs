//! Binary model container (little-endian), see `docs/FORMATS.md`.
//!
//! Floats are always written as f64; a header byte records the training
//! precision, and widening f32 to f64 is exact, so a save/load round trip
//! reproduces the model bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use kcnet::baselines::ElmEncoder;
use kcnet::data::{Normalization, NormalizationMode};
use kcnet::{ElmConfig, ElmModel, KcNet, ModelConfig, OutputWeights, ProjectionMatrix, Scalar};
use ndarray::{Array1, Array2};

use crate::error::{CliError, CliResult};

pub const MAGIC: &[u8; 8] = b"KCNETMDL";
pub const VERSION: u32 = 1;

const KIND_KCNET: u8 = 1;
const KIND_ELM: u8 = 2;

/// Either model family, at either precision.
#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel {
    KcNet64(KcNet<f64>),
    KcNet32(KcNet<f32>),
    Elm64(ElmModel<f64>),
    Elm32(ElmModel<f32>),
}

impl SavedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            SavedModel::KcNet64(_) | SavedModel::KcNet32(_) => "kcnet",
            SavedModel::Elm64(_) | SavedModel::Elm32(_) => "elm",
        }
    }

    pub fn hidden_dim(&self) -> usize {
        match self {
            SavedModel::KcNet64(m) => m.hidden_dim(),
            SavedModel::KcNet32(m) => m.hidden_dim(),
            SavedModel::Elm64(m) => m.config.hidden_dim,
            SavedModel::Elm32(m) => m.config.hidden_dim,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            SavedModel::KcNet64(m) => m.input_dim(),
            SavedModel::KcNet32(m) => m.input_dim(),
            SavedModel::Elm64(m) => m.config.input_dim,
            SavedModel::Elm32(m) => m.config.input_dim,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            SavedModel::KcNet64(m) => m.config.rng_seed,
            SavedModel::KcNet32(m) => m.config.rng_seed,
            SavedModel::Elm64(m) => m.config.rng_seed,
            SavedModel::Elm32(m) => m.config.rng_seed,
        }
    }

    pub fn class_labels(&self) -> &[String] {
        match self {
            SavedModel::KcNet64(m) => &m.class_labels,
            SavedModel::KcNet32(m) => &m.class_labels,
            SavedModel::Elm64(m) => &m.class_labels,
            SavedModel::Elm32(m) => &m.class_labels,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.bytes(MAGIC);
        w.u32(VERSION);
        match self {
            SavedModel::KcNet64(m) => write_kcnet(&mut w, m),
            SavedModel::KcNet32(m) => write_kcnet(&mut w, m),
            SavedModel::Elm64(m) => write_elm(&mut w, m),
            SavedModel::Elm32(m) => write_elm(&mut w, m),
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, String> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err("bad magic".into());
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let kind = r.u8()?;
        let width = r.u8()?;
        let model = match (kind, width) {
            (KIND_KCNET, 8) => SavedModel::KcNet64(read_kcnet(&mut r)?),
            (KIND_KCNET, 4) => SavedModel::KcNet32(read_kcnet(&mut r)?),
            (KIND_ELM, 8) => SavedModel::Elm64(read_elm(&mut r)?),
            (KIND_ELM, 4) => SavedModel::Elm32(read_elm(&mut r)?),
            _ => return Err(format!("unknown model kind {kind} / scalar width {width}")),
        };
        if r.pos != bytes.len() {
            return Err(format!("{} trailing bytes", bytes.len() - r.pos));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_bytes()).map_err(CliError::file(path))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(CliError::file(path))?;
        Self::from_bytes(&bytes).map_err(|reason| CliError::ModelFormat {
            path: path.to_path_buf(),
            reason,
        })
    }
}

impl From<KcNet<f64>> for SavedModel {
    fn from(m: KcNet<f64>) -> Self {
        SavedModel::KcNet64(m)
    }
}

impl From<KcNet<f32>> for SavedModel {
    fn from(m: KcNet<f32>) -> Self {
        SavedModel::KcNet32(m)
    }
}

impl From<ElmModel<f64>> for SavedModel {
    fn from(m: ElmModel<f64>) -> Self {
        SavedModel::Elm64(m)
    }
}

impl From<ElmModel<f32>> for SavedModel {
    fn from(m: ElmModel<f32>) -> Self {
        SavedModel::Elm32(m)
    }
}

/// Scalar types a model can be saved at.
pub trait Precise: Scalar {
    fn wrap_kcnet(m: KcNet<Self>) -> SavedModel;
    fn wrap_elm(m: ElmModel<Self>) -> SavedModel;
}

impl Precise for f64 {
    fn wrap_kcnet(m: KcNet<Self>) -> SavedModel {
        SavedModel::KcNet64(m)
    }

    fn wrap_elm(m: ElmModel<Self>) -> SavedModel {
        SavedModel::Elm64(m)
    }
}

impl Precise for f32 {
    fn wrap_kcnet(m: KcNet<Self>) -> SavedModel {
        SavedModel::KcNet32(m)
    }

    fn wrap_elm(m: ElmModel<Self>) -> SavedModel {
        SavedModel::Elm32(m)
    }
}

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn bytes(&mut self, b: &[u8]) {
        self.buf.write_all(b).expect("vec write");
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }

    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }

    fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }

    fn scalar<T: Scalar>(&mut self, v: T) {
        self.f64(v.to_f64_lossy());
    }

    fn varint(&mut self, mut v: u64) {
        loop {
            let byte = (v & 0x7f) as u8;
            v >>= 7;
            if v == 0 {
                self.u8(byte);
                return;
            }
            self.u8(byte | 0x80);
        }
    }

    fn string(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], String> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn usize(&mut self) -> Result<usize, String> {
        usize::try_from(self.u64()?).map_err(|e| e.to_string())
    }

    /// A count of items that each take at least `min_bytes`; rejects counts
    /// the remaining input cannot hold before anything is allocated.
    fn count(&mut self, min_bytes: usize) -> Result<usize, String> {
        let n = self.usize()?;
        let left = self.buf.len() - self.pos;
        if n.saturating_mul(min_bytes.max(1)) > left {
            return Err(format!("count {n} exceeds remaining {left} bytes"));
        }
        Ok(n)
    }

    fn f64(&mut self) -> Result<f64, String> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn scalar<T: Scalar>(&mut self) -> Result<T, String> {
        Ok(T::from_f64_lossy(self.f64()?))
    }

    fn bool(&mut self) -> Result<bool, String> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(format!("bad flag byte {b}")),
        }
    }

    fn varint(&mut self) -> Result<u64, String> {
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let byte = self.u8()?;
            v |= u64::from(byte & 0x7f) << shift;
            if byte & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err("varint overflow".into())
    }

    fn string(&mut self) -> Result<String, String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| e.to_string())
    }
}

fn mode_code(m: NormalizationMode) -> u8 {
    match m {
        NormalizationMode::PerFeature => 0,
        NormalizationMode::Global => 1,
        NormalizationMode::Identity => 2,
    }
}

fn mode_from(code: u8) -> Result<NormalizationMode, String> {
    match code {
        0 => Ok(NormalizationMode::PerFeature),
        1 => Ok(NormalizationMode::Global),
        2 => Ok(NormalizationMode::Identity),
        c => Err(format!("unknown normalization code {c}")),
    }
}

fn write_common(w: &mut Writer, classes: &[String], norm: &Normalization) {
    w.u32(classes.len() as u32);
    for c in classes {
        w.string(c);
    }
    w.usize(norm.dim());
    for i in 0..norm.dim() {
        w.f64(norm.mean[i]);
        w.f64(norm.std[i]);
        w.u8(u8::from(norm.constant[i]));
    }
}

fn read_common(r: &mut Reader<'_>) -> Result<(Vec<String>, Normalization), String> {
    let n = r.u32()? as usize;
    let classes = (0..n).map(|_| r.string()).collect::<Result<Vec<_>, _>>()?;
    let d = r.count(17)?;
    let mut norm = Normalization {
        mean: Vec::with_capacity(d),
        std: Vec::with_capacity(d),
        constant: Vec::with_capacity(d),
    };
    for _ in 0..d {
        norm.mean.push(r.f64()?);
        norm.std.push(r.f64()?);
        norm.constant.push(r.bool()?);
    }
    Ok((classes, norm))
}

fn write_matrix<T: Scalar>(w: &mut Writer, m: &Array2<T>) {
    w.usize(m.nrows());
    w.usize(m.ncols());
    for &v in m.iter() {
        w.scalar(v);
    }
}

fn read_matrix<T: Scalar>(r: &mut Reader<'_>) -> Result<Array2<T>, String> {
    let rows = r.usize()?;
    let cols = r.count(0)?;
    let len = rows.checked_mul(cols).ok_or("matrix size overflow")?;
    if len.saturating_mul(8) > r.buf.len() - r.pos {
        return Err(format!("{rows}x{cols} matrix exceeds remaining input"));
    }
    let values = (0..len).map(|_| r.scalar()).collect::<Result<Vec<T>, _>>()?;
    Ok(Array2::from_shape_vec((rows, cols), values).expect("shape matches length"))
}

fn write_kcnet<T: Scalar>(w: &mut Writer, m: &KcNet<T>) {
    let c = &m.config;
    w.u8(KIND_KCNET);
    w.u8(T::BYTES as u8);
    w.usize(c.input_dim);
    w.usize(c.hidden_dim);
    w.usize(c.fan_in);
    w.f64(c.inhibition);
    w.f64(c.ridge_lambda);
    w.u64(c.rng_seed);
    w.usize(c.block_size);
    w.u8(mode_code(c.normalization));
    write_common(w, &m.class_labels, &m.normalization);

    w.usize(m.projection.input_dim());
    w.usize(m.projection.hidden_dim());
    for row in m.projection.rows() {
        w.varint(row.len() as u64);
        let mut prev = 0;
        for &i in row {
            w.varint((i - prev) as u64);
            prev = i;
        }
    }
    write_matrix(w, &m.output.beta);
}

fn read_kcnet<T: Scalar>(r: &mut Reader<'_>) -> Result<KcNet<T>, String> {
    let config = ModelConfig {
        input_dim: r.usize()?,
        hidden_dim: r.usize()?,
        fan_in: r.usize()?,
        inhibition: r.f64()?,
        ridge_lambda: r.f64()?,
        rng_seed: r.u64()?,
        block_size: r.usize()?,
        normalization: mode_from(r.u8()?)?,
    };
    let (class_labels, normalization) = read_common(r)?;

    let d = r.usize()?;
    let b = r.count(1)?;
    let mut rows = Vec::with_capacity(b);
    for _ in 0..b {
        let len = r.varint()? as usize;
        if len > d {
            return Err(format!("row of {len} indices exceeds input_dim {d}"));
        }
        let mut row = Vec::with_capacity(len);
        let mut prev = 0usize;
        for k in 0..len {
            let delta = usize::try_from(r.varint()?).map_err(|e| e.to_string())?;
            if k > 0 && delta == 0 {
                return Err("repeated projection index".into());
            }
            prev = prev.checked_add(delta).ok_or("index overflow")?;
            row.push(prev);
        }
        rows.push(row);
    }
    let projection = ProjectionMatrix::from_rows(d, rows).map_err(|e| e.to_string())?;
    let beta = read_matrix(r)?;
    check_shapes(config.input_dim, d, config.hidden_dim, b, beta.nrows(), &normalization)?;
    check_classes(beta.ncols(), class_labels.len())?;
    Ok(KcNet {
        config,
        projection,
        output: OutputWeights::new(beta),
        normalization,
        class_labels,
    })
}

fn write_elm<T: Scalar>(w: &mut Writer, m: &ElmModel<T>) {
    let c = &m.config;
    w.u8(KIND_ELM);
    w.u8(T::BYTES as u8);
    w.usize(c.input_dim);
    w.usize(c.hidden_dim);
    w.u64(c.rng_seed);
    w.f64(c.ridge_lambda);
    w.usize(c.block_size);
    w.u8(mode_code(c.normalization));
    w.f64(m.lambda_used);
    write_common(w, &m.class_labels, &m.normalization);
    write_matrix(w, &m.encoder.weights);
    w.usize(m.encoder.bias.len());
    for &v in m.encoder.bias.iter() {
        w.scalar(v);
    }
    write_matrix(w, &m.output.beta);
}

fn read_elm<T: Scalar>(r: &mut Reader<'_>) -> Result<ElmModel<T>, String> {
    let config = ElmConfig {
        input_dim: r.usize()?,
        hidden_dim: r.usize()?,
        rng_seed: r.u64()?,
        ridge_lambda: r.f64()?,
        block_size: r.usize()?,
        normalization: mode_from(r.u8()?)?,
    };
    let lambda_used = r.f64()?;
    let (class_labels, normalization) = read_common(r)?;
    let weights = read_matrix::<T>(r)?;
    let n_bias = r.count(8)?;
    let bias = (0..n_bias).map(|_| r.scalar()).collect::<Result<Vec<T>, _>>()?;
    let beta = read_matrix(r)?;
    check_shapes(config.input_dim, weights.ncols(), config.hidden_dim, weights.nrows(), beta.nrows(), &normalization)?;
    if n_bias != config.hidden_dim {
        return Err(format!("{n_bias} biases for {} hidden units", config.hidden_dim));
    }
    check_classes(beta.ncols(), class_labels.len())?;
    Ok(ElmModel {
        config,
        encoder: ElmEncoder {
            weights,
            bias: Array1::from(bias),
        },
        output: OutputWeights::new(beta),
        normalization,
        class_labels,
        lambda_used,
    })
}

fn check_shapes(
    input_dim: usize,
    layer_inputs: usize,
    hidden_dim: usize,
    layer_rows: usize,
    beta_rows: usize,
    norm: &Normalization,
) -> Result<(), String> {
    if layer_inputs != input_dim || norm.dim() != input_dim {
        return Err(format!(
            "input width disagrees: config {input_dim}, layer {layer_inputs}, normalization {}",
            norm.dim()
        ));
    }
    if layer_rows != hidden_dim || beta_rows != hidden_dim {
        return Err(format!(
            "hidden width disagrees: config {hidden_dim}, layer {layer_rows}, decoder {beta_rows}"
        ));
    }
    Ok(())
}

fn check_classes(beta_cols: usize, labels: usize) -> Result<(), String> {
    if beta_cols != labels {
        return Err(format!("decoder has {beta_cols} outputs for {labels} class labels"));
    }
    Ok(())
}
