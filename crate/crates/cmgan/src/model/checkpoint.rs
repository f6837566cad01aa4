//! Binary model checkpoint: every parameter tensor with shapes, dimensions,
//! the weight-sharing topology, and batch-norm running statistics. Values are
//! stored as IEEE-754 64-bit little-endian, so a write→read round-trip is
//! bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{CmGanModel, ModelDims};
use crate::error::{Error, Result};
use crate::nn::{BatchNormState, DenseParams};

const MAGIC: &[u8; 4] = b"CMGC";
const VERSION: u16 = 1;

pub fn save_checkpoint(model: &CmGanModel, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path.display().to_string(), e);

    w.write_all(MAGIC).map_err(io_err)?;
    w.write_u16::<LittleEndian>(VERSION).map_err(io_err)?;
    for dim in [
        model.dims.d_img,
        model.dims.d_txt,
        model.dims.classes,
        model.dims.hidden,
        model.dims.inter_hidden,
    ] {
        w.write_u32::<LittleEndian>(dim as u32).map_err(io_err)?;
    }
    w.write_u8(model.weight_sharing as u8).map_err(io_err)?;
    w.write_u32::<LittleEndian>(model.store.len() as u32)
        .map_err(io_err)?;
    for id in model.store.ids() {
        let p = model.store.get(id);
        w.write_u32::<LittleEndian>(p.in_dim() as u32).map_err(io_err)?;
        w.write_u32::<LittleEndian>(p.out_dim() as u32).map_err(io_err)?;
        for &v in p.weight.iter() {
            w.write_f64::<LittleEndian>(v).map_err(io_err)?;
        }
        for &v in p.bias.iter() {
            w.write_f64::<LittleEndian>(v).map_err(io_err)?;
        }
        match &p.batch_norm {
            None => w.write_u8(0).map_err(io_err)?,
            Some(bn) => {
                w.write_u8(1).map_err(io_err)?;
                for arr in [&bn.gamma, &bn.beta, &bn.running_mean, &bn.running_var] {
                    for &v in arr.iter() {
                        w.write_f64::<LittleEndian>(v).map_err(io_err)?;
                    }
                }
            }
        }
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<CmGanModel> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut r = BufReader::new(file);
    let p = path.display().to_string();
    let io_err = |_e: std::io::Error| Error::format(&p, "truncated checkpoint");

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| Error::io(&p, e))?;
    if &magic != MAGIC {
        return Err(Error::format(&p, format!("bad magic {magic:?}, expected \"CMGC\"")));
    }
    let version = r.read_u16::<LittleEndian>().map_err(io_err)?;
    if version != VERSION {
        return Err(Error::format(&p, format!("unsupported version {version}")));
    }
    let mut dims = [0usize; 5];
    for d in &mut dims {
        *d = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
    }
    let dims = ModelDims {
        d_img: dims[0],
        d_txt: dims[1],
        classes: dims[2],
        hidden: dims[3],
        inter_hidden: dims[4],
    };
    let weight_sharing = r.read_u8().map_err(io_err)? != 0;

    // Rebuild the topology (layer descriptors and shared-entry layout), then
    // overwrite every parameter entry with the stored values.
    let mut model = CmGanModel::new(dims, weight_sharing, &mut ChaCha20Rng::seed_from_u64(0));
    let n_entries = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
    if n_entries != model.store.len() {
        return Err(Error::format(
            &p,
            format!(
                "checkpoint holds {n_entries} parameter entries, topology expects {}",
                model.store.len()
            ),
        ));
    }
    let ids: Vec<_> = model.store.ids().collect();
    for id in ids {
        let in_dim = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
        let out_dim = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
        let expect = model.store.get(id);
        if in_dim != expect.in_dim() || out_dim != expect.out_dim() {
            return Err(Error::format(
                &p,
                format!(
                    "entry {} has shape {in_dim}x{out_dim}, topology expects {}x{}",
                    id.index(),
                    expect.in_dim(),
                    expect.out_dim()
                ),
            ));
        }
        let mut weight = Vec::with_capacity(in_dim * out_dim);
        for _ in 0..in_dim * out_dim {
            weight.push(r.read_f64::<LittleEndian>().map_err(io_err)?);
        }
        let mut bias = Vec::with_capacity(out_dim);
        for _ in 0..out_dim {
            bias.push(r.read_f64::<LittleEndian>().map_err(io_err)?);
        }
        let has_bn = r.read_u8().map_err(io_err)? != 0;
        if has_bn != expect.batch_norm.is_some() {
            return Err(Error::format(
                &p,
                format!("entry {} batch-norm flag disagrees with topology", id.index()),
            ));
        }
        let batch_norm = if has_bn {
            let mut arrays = Vec::with_capacity(4);
            for _ in 0..4 {
                let mut a = Vec::with_capacity(out_dim);
                for _ in 0..out_dim {
                    a.push(r.read_f64::<LittleEndian>().map_err(io_err)?);
                }
                arrays.push(Array1::from_vec(a));
            }
            let running_var = arrays.pop().unwrap();
            let running_mean = arrays.pop().unwrap();
            let beta = arrays.pop().unwrap();
            let gamma = arrays.pop().unwrap();
            Some(BatchNormState {
                gamma,
                beta,
                running_mean,
                running_var,
            })
        } else {
            None
        };
        *model.store.get_mut(id) = DenseParams {
            weight: Array2::from_shape_vec((in_dim, out_dim), weight).expect("checked shape"),
            bias: Array1::from_vec(bias),
            batch_norm,
        };
    }
    Ok(model)
}
