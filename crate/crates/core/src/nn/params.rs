//! Binary parameter blob: little-endian, a magic tag, then a
//! length-prefixed table of named tensors.
//!
//! ```text
//! b"CCNNPRM1" | u32 count | count x { u32 name_len | name | u32 ndim | ndim x u64 dim | prod(dim) x f64 }
//! ```

use std::io::{Read, Write};

use crate::error::{invalid, Error, Result};
use crate::tensor::Tensor;

use super::graph::LayerGraph;

const MAGIC: &[u8; 8] = b"CCNNPRM1";

fn names(graph: &LayerGraph) -> Vec<(String, usize, bool, usize)> {
    let mut out = Vec::new();
    for (li, layer) in graph.layers().iter().enumerate() {
        let (pnames, bnames): (&[&str], &[&str]) = match layer.params.len() {
            0 => (&[], &[]),
            _ if !layer.buffers.is_empty() => (&["gamma", "beta"], &["running_mean", "running_var"]),
            _ => (&["weight", "bias"], &[]),
        };
        for (i, n) in pnames.iter().enumerate() {
            out.push((format!("{li}.{n}"), li, true, i));
        }
        for (i, n) in bnames.iter().enumerate() {
            out.push((format!("{li}.{n}"), li, false, i));
        }
    }
    out
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

impl LayerGraph {
    /// Writes every parameter and buffer tensor.
    pub fn write_params(&self, w: &mut impl Write) -> Result<()> {
        let entries = names(self);
        w.write_all(MAGIC)?;
        w.write_all(&(entries.len() as u32).to_le_bytes())?;
        for (name, li, is_param, i) in entries {
            let layer = &self.layers()[li];
            let t = if is_param { &layer.params[i] } else { &layer.buffers[i] };
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(t.ndim() as u32).to_le_bytes())?;
            for &d in t.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn params_to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_params(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    /// Replaces parameters and buffers from a blob. Every tensor the graph
    /// owns must be present with a matching shape.
    pub fn read_params(&mut self, r: &mut impl Read) -> Result<()> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(invalid("not a parameter blob"));
        }
        let count = read_u32(r)? as usize;
        let mut table = std::collections::HashMap::with_capacity(count);
        for _ in 0..count {
            let len = read_u32(r)? as usize;
            let mut name = vec![0u8; len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|_| invalid("tensor name is not UTF-8"))?;
            let ndim = read_u32(r)? as usize;
            let shape = (0..ndim).map(|_| read_u64(r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                data.push(f64::from_le_bytes(b));
            }
            table.insert(name, Tensor::new(shape, data)?);
        }
        for (name, li, is_param, i) in names(self) {
            let t = table
                .remove(&name)
                .ok_or_else(|| Error::InvalidArgument(format!("blob is missing {name}")))?;
            let layer = &mut self.layers_mut()[li];
            let slot = if is_param { &mut layer.params[i] } else { &mut layer.buffers[i] };
            if slot.shape() != t.shape() {
                return Err(invalid(format!(
                    "{name}: blob shape {:?} does not match {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            *slot = t;
        }
        if let Some(extra) = table.keys().next() {
            return Err(invalid(format!("blob has unexpected tensor {extra}")));
        }
        Ok(())
    }

    pub fn params_from_bytes(&mut self, mut bytes: &[u8]) -> Result<()> {
        self.read_params(&mut bytes)
    }
}
