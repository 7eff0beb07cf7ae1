//! Binary landscape container and a content-addressed on-disk cache.
//!
//! Layout (little-endian): magic `SYMHOMLS`, version `u32`, `k`, `ell`, `negative_index`,
//! reduction tag, y-slice, axes `(lo, step, nodes, periodic)`, boundary tags, then the
//! value array as `f64`.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{Axis, GeneratingLandscape, LandscapeOptions, Reduction, YSlice};
use crate::dynamics::HamiltonianSpec;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"SYMHOMLS";
const VERSION: u32 = 1;

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format("truncated landscape container".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

impl GeneratingLandscape {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 9 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_u64(&mut out, self.k as u64);
        put_u64(&mut out, self.ell as u64);
        put_u64(&mut out, self.negative_index as u64);
        out.push(match self.reduction {
            Reduction::Single => 0,
            Reduction::TwistPair => 1,
            Reduction::Full => 2,
        });
        match &self.y_slice {
            YSlice::GraphMode => out.push(0),
            YSlice::Fixed(y) => {
                out.push(1);
                put_u64(&mut out, y.len() as u64);
                for &v in y {
                    put_f64(&mut out, v);
                }
            }
        }
        put_u64(&mut out, self.axes.len() as u64);
        for a in &self.axes {
            put_f64(&mut out, a.lo);
            put_f64(&mut out, a.step);
            put_u64(&mut out, a.nodes as u64);
            out.push(a.periodic as u8);
        }
        put_u64(&mut out, self.values.len() as u64);
        out.extend(self.boundary_tag.iter().map(|&t| t as u8));
        for &v in &self.values {
            put_f64(&mut out, v);
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Format("not a landscape container".into()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
        if version != VERSION {
            return Err(Error::Format(format!("unsupported container version {version}")));
        }
        let k = r.u64()? as usize;
        let ell = r.u64()? as usize;
        let negative_index = r.u64()? as usize;
        let reduction = match r.u8()? {
            0 => Reduction::Single,
            1 => Reduction::TwistPair,
            2 => Reduction::Full,
            t => return Err(Error::Format(format!("unknown reduction tag {t}"))),
        };
        let y_slice = match r.u8()? {
            0 => YSlice::GraphMode,
            _ => {
                let n = r.u64()? as usize;
                YSlice::Fixed((0..n).map(|_| r.f64()).collect::<Result<_>>()?)
            }
        };
        let na = r.u64()? as usize;
        let mut axes = Vec::with_capacity(na);
        for _ in 0..na {
            axes.push(Axis { lo: r.f64()?, step: r.f64()?, nodes: r.u64()? as usize, periodic: r.u8()? != 0 });
        }
        let nv = r.u64()? as usize;
        if axes.iter().map(|a| a.nodes).product::<usize>() != nv {
            return Err(Error::Format("axis shape does not match value count".into()));
        }
        let boundary_tag = r.take(nv)?.iter().map(|&b| b != 0).collect();
        let values = (0..nv).map(|_| r.f64()).collect::<Result<_>>()?;
        Ok(GeneratingLandscape { k, ell, y_slice, reduction, axes, values, negative_index, boundary_tag })
    }
}

/// Directory of landscape containers keyed by the hash of spec, horizon, momenta and options.
#[derive(Clone, Debug)]
pub struct LandscapeCache {
    dir: PathBuf,
}

impl LandscapeCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(LandscapeCache { dir })
    }

    pub fn key(h: &HamiltonianSpec, k: usize, ys: &[f64], opts: &LandscapeOptions) -> String {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_string(h).expect("spec serializes").as_bytes());
        hasher.update((k as u64).to_le_bytes());
        for y in ys {
            hasher.update(y.to_le_bytes());
        }
        hasher.update(serde_json::to_string(opts).expect("options serialize").as_bytes());
        hex::encode(hasher.finalize())
    }

    fn path(&self, key: &str, i: usize) -> PathBuf {
        self.dir.join(format!("{key}-{i}.bin"))
    }

    fn load(path: &Path) -> Result<GeneratingLandscape> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        GeneratingLandscape::from_bytes(&buf)
    }

    /// Returns cached landscapes when every slice is present, otherwise builds and stores them.
    pub fn get_or_build(
        &self,
        h: &HamiltonianSpec,
        k: usize,
        ys: &[f64],
        opts: &LandscapeOptions,
    ) -> Result<(Vec<GeneratingLandscape>, bool)> {
        let key = Self::key(h, k, ys, opts);
        let cached: Option<Vec<_>> = (0..ys.len()).map(|i| Self::load(&self.path(&key, i)).ok()).collect();
        if let Some(ls) = cached {
            return Ok((ls, true));
        }
        let ls = super::build_landscapes(h, k, ys, opts)?;
        for (i, l) in ls.iter().enumerate() {
            let tmp = self.dir.join(format!("{key}-{i}.tmp"));
            std::fs::File::create(&tmp)?.write_all(&l.to_bytes())?;
            std::fs::rename(&tmp, self.path(&key, i))?;
        }
        Ok((ls, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn container_roundtrip() {
        let l = GeneratingLandscape {
            k: 4,
            ell: 2,
            y_slice: YSlice::Fixed(vec![0.25]),
            reduction: Reduction::TwistPair,
            axes: vec![
                Axis { lo: 0.0, step: 0.5, nodes: 2, periodic: true },
                Axis { lo: -1.0, step: 1.0, nodes: 3, periodic: false },
            ],
            values: vec![1.0, -2.0, 3.5, 0.0, f64::MIN_POSITIVE, 7.0],
            negative_index: 1,
            boundary_tag: vec![true, false, true, true, false, true],
        };
        let b = l.to_bytes();
        assert_eq!(&b[..8], MAGIC);
        assert_eq!(GeneratingLandscape::from_bytes(&b).unwrap(), l);
        assert!(GeneratingLandscape::from_bytes(&b[..b.len() - 3]).is_err());
    }
}
