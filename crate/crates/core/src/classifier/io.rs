//! `.gzmd` model files.
//!
//! Little-endian throughout:
//!
//! ```text
//! magic "GZMD" | u16 version | u16 omega | u64 seed
//! u32 config length | config text (key = value lines)
//! u32 entry count
//! per entry: u16 name length | name | u8 ndim | u32 dims[ndim] | f32 data
//! ```
//!
//! Entry names are `bn{0,1,2}.{gamma,beta,running_mean,running_var}` and
//! `dense{1,2,3,4}.{weight,bias}`; dense weights are stored `[inputs, outputs]`
//! row-major. Optimizer moments are not stored.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};

use super::network::{BatchNorm, Dense, Network};
use super::{input_dim, ModelError, ModelState, TrainConfig};

type Getter<'a> = dyn FnMut(&str, &[usize]) -> Result<Vec<f32>, ModelError> + 'a;

pub const MODEL_MAGIC: &[u8; 4] = b"GZMD";
pub const MODEL_VERSION: u16 = 1;

struct Entry {
    dims: Vec<usize>,
    data: Vec<f32>,
}

fn entries(net: &Network<f32>) -> Vec<(String, Entry)> {
    let mut out = Vec::new();
    let vec1 = |a: &Array1<f32>| Entry {
        dims: vec![a.len()],
        data: a.to_vec(),
    };
    for (k, bn) in net.batch_norms().into_iter().enumerate() {
        out.push((format!("bn{k}.gamma"), vec1(&bn.gamma)));
        out.push((format!("bn{k}.beta"), vec1(&bn.beta)));
        out.push((format!("bn{k}.running_mean"), vec1(&bn.running_mean)));
        out.push((format!("bn{k}.running_var"), vec1(&bn.running_var)));
    }
    for (k, d) in [&net.dense1, &net.dense2, &net.dense3, &net.dense4].into_iter().enumerate() {
        out.push((
            format!("dense{}.weight", k + 1),
            Entry {
                dims: d.weight.shape().to_vec(),
                data: d.weight.iter().copied().collect(),
            },
        ));
        out.push((format!("dense{}.bias", k + 1), vec1(&d.bias)));
    }
    out
}

fn io_err(path: &str) -> impl Fn(std::io::Error) -> ModelError + '_ {
    move |source| ModelError::Io {
        path: PathBuf::from(path),
        source,
    }
}

pub fn write_model_to<W: Write>(model: &ModelState, writer: W) -> Result<(), ModelError> {
    let io = io_err("<writer>");
    let omega = u16::try_from(model.omega).map_err(|_| ModelError::Malformed("omega exceeds u16".into()))?;
    let mut w = BufWriter::new(writer);
    let mut put = |b: &[u8]| w.write_all(b).map_err(&io);
    put(MODEL_MAGIC)?;
    put(&MODEL_VERSION.to_le_bytes())?;
    put(&omega.to_le_bytes())?;
    put(&model.seed.to_le_bytes())?;
    let cfg = model.config.to_string();
    put(&(cfg.len() as u32).to_le_bytes())?;
    put(cfg.as_bytes())?;
    let list = entries(&model.net);
    put(&(list.len() as u32).to_le_bytes())?;
    for (name, e) in &list {
        put(&(name.len() as u16).to_le_bytes())?;
        put(name.as_bytes())?;
        put(&[e.dims.len() as u8])?;
        for &d in &e.dims {
            put(&(d as u32).to_le_bytes())?;
        }
        let mut raw = Vec::with_capacity(e.data.len() * 4);
        for v in &e.data {
            raw.extend_from_slice(&v.to_le_bytes());
        }
        put(&raw)?;
    }
    w.flush().map_err(&io)
}

fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N], ModelError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(io_err("<reader>"))?;
    Ok(buf)
}

fn take_vec(r: &mut impl Read, n: usize) -> Result<Vec<u8>, ModelError> {
    let mut buf = Vec::new();
    r.take(n as u64).read_to_end(&mut buf).map_err(io_err("<reader>"))?;
    if buf.len() != n {
        return Err(ModelError::Io {
            path: PathBuf::from("<reader>"),
            source: std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "model file truncated"),
        });
    }
    Ok(buf)
}

pub fn read_model_from<R: Read>(reader: R) -> Result<ModelState, ModelError> {
    let mut r = BufReader::new(reader);
    let magic = take::<4>(&mut r)?;
    if &magic != MODEL_MAGIC {
        return Err(ModelError::BadMagic(magic));
    }
    let version = u16::from_le_bytes(take(&mut r)?);
    if version != MODEL_VERSION {
        return Err(ModelError::VersionMismatch(version));
    }
    let omega = u16::from_le_bytes(take(&mut r)?) as usize;
    let seed = u64::from_le_bytes(take(&mut r)?);
    let cfg_len = u32::from_le_bytes(take(&mut r)?) as usize;
    let text = String::from_utf8(take_vec(&mut r, cfg_len)?).map_err(|e| ModelError::Malformed(e.to_string()))?;
    let config: TrainConfig = text.parse().map_err(ModelError::Malformed)?;
    if config.omega != omega || config.seed != seed {
        return Err(ModelError::Malformed("config echo disagrees with header".into()));
    }

    let count = u32::from_le_bytes(take(&mut r)?);
    let mut found: HashMap<String, Entry> = HashMap::new();
    for _ in 0..count {
        let name_len = u16::from_le_bytes(take(&mut r)?) as usize;
        let name = String::from_utf8(take_vec(&mut r, name_len)?).map_err(|e| ModelError::Malformed(e.to_string()))?;
        let ndim = take::<1>(&mut r)?[0] as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(u32::from_le_bytes(take(&mut r)?) as usize);
        }
        let n: usize = dims.iter().product();
        let raw = take_vec(&mut r, n * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        found.insert(name, Entry { dims, data });
    }

    let mut get = |name: &str, dims: &[usize]| -> Result<Vec<f32>, ModelError> {
        let e = found
            .remove(name)
            .ok_or_else(|| ModelError::Malformed(format!("missing entry {name}")))?;
        if e.dims != dims {
            return Err(ModelError::Malformed(format!(
                "entry {name} has dims {:?}, expected {dims:?}",
                e.dims
            )));
        }
        Ok(e.data)
    };
    let widths = [input_dim(omega), 256, 128, 64, 2];
    let bn = |get: &mut Getter, k: usize, n: usize| {
        Ok::<_, ModelError>(BatchNorm {
            gamma: Array1::from(get(&format!("bn{k}.gamma"), &[n])?),
            beta: Array1::from(get(&format!("bn{k}.beta"), &[n])?),
            running_mean: Array1::from(get(&format!("bn{k}.running_mean"), &[n])?),
            running_var: Array1::from(get(&format!("bn{k}.running_var"), &[n])?),
        })
    };
    let dense = |get: &mut Getter, k: usize| {
        let (i, o) = (widths[k - 1], widths[k]);
        let w = get(&format!("dense{k}.weight"), &[i, o])?;
        Ok::<_, ModelError>(Dense {
            weight: Array2::from_shape_vec((i, o), w).expect("dims checked"),
            bias: Array1::from(get(&format!("dense{k}.bias"), &[o])?),
        })
    };
    let net = Network {
        bn0: bn(&mut get, 0, widths[0])?,
        dense1: dense(&mut get, 1)?,
        bn1: bn(&mut get, 1, widths[1])?,
        dense2: dense(&mut get, 2)?,
        bn2: bn(&mut get, 2, widths[2])?,
        dense3: dense(&mut get, 3)?,
        dense4: dense(&mut get, 4)?,
    };
    if let Some(extra) = found.keys().next() {
        return Err(ModelError::Malformed(format!("unexpected entry {extra}")));
    }
    if !net.all_finite() {
        return Err(ModelError::Malformed("non-finite parameter".into()));
    }
    Ok(ModelState::from_parts(config, net))
}

fn with_path(err: ModelError, path: &Path) -> ModelError {
    match err {
        ModelError::Io { source, .. } => ModelError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    }
}

pub fn save_model(model: &ModelState, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_model_to(model, file).map_err(|e| with_path(e, path))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelState, ModelError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_model_from(file).map_err(|e| with_path(e, path))
}
